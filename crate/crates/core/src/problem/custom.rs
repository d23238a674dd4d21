//! Problems assembled from expression strings, as read from a config file.

use serde::{Deserialize, Serialize};

use super::{ExactSolution, Expr, Field, ProblemError, ProblemSpec, Region, RegionPartition, Sym2};
use crate::mesh::{Domain, Interfaces};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CustomDomain {
    #[default]
    UnitSquare,
    Lshape,
    /// `[x0, x1, y0, y1]`
    Rectangle([f64; 4]),
}

/// A subdomain overriding some of the base coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomRegion {
    pub x: [f64; 2],
    pub y: [f64; 2],
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<[[String; 2]; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<[String; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactExprs {
    pub u: String,
    pub ux: String,
    pub uy: String,
}

fn zero() -> String {
    "0".into()
}

fn zero2() -> [String; 2] {
    [zero(), zero()]
}

fn identity() -> [[String; 2]; 2] {
    [["1".into(), "0".into()], ["0".into(), "1".into()]]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomProblem {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub domain: CustomDomain,
    #[serde(rename = "K", default = "identity")]
    pub k: [[String; 2]; 2],
    #[serde(default = "zero2")]
    pub b: [String; 2],
    #[serde(default = "zero")]
    pub sigma: String,
    #[serde(default = "zero")]
    pub f: String,
    #[serde(rename = "gD", default = "zero")]
    pub g_d: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub regions: Vec<CustomRegion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<ExactExprs>,
    /// Cells per unit length of the initial mesh.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
}

impl Default for CustomProblem {
    fn default() -> Self {
        CustomProblem {
            name: None,
            domain: CustomDomain::default(),
            k: identity(),
            b: zero2(),
            sigma: zero(),
            f: zero(),
            g_d: zero(),
            regions: Vec::new(),
            exact: None,
            resolution: None,
        }
    }
}

fn parse(field: &str, text: &str) -> Result<Expr, ProblemError> {
    Expr::parse(text).map_err(|source| ProblemError::Parse { field: field.to_string(), source })
}

fn parse_tensor(field: &str, k: &[[String; 2]; 2]) -> Result<[Expr; 3], ProblemError> {
    let strip = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
    if strip(&k[0][1]) != strip(&k[1][0]) {
        return Err(ProblemError::Parse {
            field: field.to_string(),
            source: super::ParseError::Syntax { position: 0, message: "K must be symmetric".into() },
        });
    }
    Ok([parse(&format!("{field}[0][0]"), &k[0][0])?, parse(&format!("{field}[0][1]"), &k[0][1])?, parse(&format!("{field}[1][1]"), &k[1][1])?])
}

impl CustomProblem {
    pub fn build(&self) -> Result<ProblemSpec, ProblemError> {
        let domain = match self.domain {
            CustomDomain::UnitSquare => Domain::unit_square(),
            CustomDomain::Lshape => Domain::LShape,
            CustomDomain::Rectangle([x0, x1, y0, y1]) => Domain::Rectangle { x0, x1, y0, y1 },
        };
        let boxes = self.validate_regions()?;

        // Index 0 is the base definition, index i the i-th region override.
        let mut ks = vec![parse_tensor("K", &self.k)?];
        let mut bs = vec![[parse("b[0]", &self.b[0])?, parse("b[1]", &self.b[1])?]];
        let mut sigmas = vec![parse("sigma", &self.sigma)?];
        let mut fs = vec![parse("f", &self.f)?];
        for (i, r) in self.regions.iter().enumerate() {
            let tag = format!("regions[{i}]");
            ks.push(match &r.k {
                Some(k) => parse_tensor(&format!("{tag}.K"), k)?,
                None => ks[0].clone(),
            });
            bs.push(match &r.b {
                Some(b) => [parse(&format!("{tag}.b[0]"), &b[0])?, parse(&format!("{tag}.b[1]"), &b[1])?],
                None => bs[0].clone(),
            });
            sigmas.push(match &r.sigma {
                Some(s) => parse(&format!("{tag}.sigma"), s)?,
                None => sigmas[0].clone(),
            });
            fs.push(match &r.f {
                Some(s) => parse(&format!("{tag}.f"), s)?,
                None => fs[0].clone(),
            });
        }
        let g_d = parse("gD", &self.g_d)?;
        let exact = match &self.exact {
            Some(e) => {
                let (u, ux, uy) = (parse("exact.u", &e.u)?, parse("exact.ux", &e.ux)?, parse("exact.uy", &e.uy)?);
                Some(ExactSolution {
                    value: Field::spatial(move |p| u.eval(p[0], p[1])),
                    gradient: Field::spatial(move |p| [ux.eval(p[0], p[1]), uy.eval(p[0], p[1])]),
                })
            }
            None => None,
        };

        let regions = RegionPartition { boxes };
        let bbox = domain.bounding_box();
        let interfaces: Interfaces = regions.interfaces(bbox);
        Ok(ProblemSpec {
            name: self.name.clone().unwrap_or_else(|| "custom".into()),
            domain,
            interfaces,
            regions,
            diffusion: Field::new(move |p, r| {
                let [xx, xy, yy] = &ks[r];
                Sym2::new(xx.eval(p[0], p[1]), xy.eval(p[0], p[1]), yy.eval(p[0], p[1]))
            }),
            advection: Field::new(move |p, r| [bs[r][0].eval(p[0], p[1]), bs[r][1].eval(p[0], p[1])]),
            reaction: Field::new(move |p, r| sigmas[r].eval(p[0], p[1])),
            source: Field::new(move |p, r| fs[r].eval(p[0], p[1])),
            dirichlet: Field::spatial(move |p| g_d.eval(p[0], p[1])),
            exact,
            default_resolution: self.resolution.unwrap_or(4),
        })
    }

    fn validate_regions(&self) -> Result<Vec<Region>, ProblemError> {
        let boxes: Vec<Region> = self.regions.iter().map(|r| Region { x: r.x, y: r.y }).collect();
        for (i, b) in boxes.iter().enumerate() {
            if !(b.x[0] < b.x[1] && b.y[0] < b.y[1]) {
                return Err(ProblemError::InvalidRegion { index: i, message: "empty box".into() });
            }
            for (j, o) in boxes[..i].iter().enumerate() {
                let overlap_x = b.x[0].max(o.x[0]) < b.x[1].min(o.x[1]);
                let overlap_y = b.y[0].max(o.y[0]) < b.y[1].min(o.y[1]);
                if overlap_x && overlap_y {
                    return Err(ProblemError::InvalidRegion { index: i, message: format!("overlaps region {j}") });
                }
            }
        }
        Ok(boxes)
    }
}

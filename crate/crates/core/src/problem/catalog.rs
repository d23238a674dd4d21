//! The built-in benchmark problems.

use std::f64::consts::PI;

use super::{ExactSolution, Field, ProblemError, ProblemSpec, Region, RegionPartition, Sym2};
use crate::mesh::{Domain, Interfaces, Point};

const ENTRIES: &[(&str, &str)] = &[
    ("lshape", "Poisson on the L-shaped domain with the r^(2/3) corner singularity"),
    ("hetero-interface", "advection-diffusion with a 100x diffusivity jump at x = 1/2"),
    ("aniso-ccw", "anisotropic high-contrast diffusion, counterclockwise rotating advection"),
    ("aniso-cw", "anisotropic high-contrast diffusion, clockwise rotating advection"),
];

/// `(name, description)` of every catalog problem.
pub fn catalog_entries() -> &'static [(&'static str, &'static str)] {
    ENTRIES
}

pub fn catalog(name: &str) -> Result<ProblemSpec, ProblemError> {
    match name {
        "lshape" => Ok(lshape()),
        "hetero-interface" => Ok(hetero_interface()),
        "aniso-ccw" => Ok(aniso(1.0, name)),
        "aniso-cw" => Ok(aniso(-1.0, name)),
        _ => Err(ProblemError::UnknownProblem(name.to_string())),
    }
}

const ALPHA: f64 = 2.0 / 3.0;

/// Sector angle in `[0, 3π/2]`, zero along the reentrant edge on the
/// negative y-axis, so `u` vanishes on both reentrant edges.
fn sector_angle(p: Point) -> f64 {
    let mut phi = p[1].atan2(p[0]);
    if phi < -0.5 * PI {
        phi += 2.0 * PI;
    }
    phi + 0.5 * PI
}

/// `u = r^α sin(αθ)` with `α = 2/3`, and its gradient.
pub fn lshape_exact() -> ExactSolution {
    let value = Field::spatial(|p: Point| {
        let r = p[0].hypot(p[1]);
        r.powf(ALPHA) * (ALPHA * sector_angle(p)).sin()
    });
    let gradient = Field::spatial(|p: Point| {
        let r = p[0].hypot(p[1]);
        if r == 0.0 {
            return [f64::NAN, f64::NAN];
        }
        let th = sector_angle(p);
        // e_r, e_θ from the physical angle; θ only shifts by a constant.
        let (c, s) = (p[0] / r, p[1] / r);
        let scale = ALPHA * r.powf(ALPHA - 1.0);
        let gr = scale * (ALPHA * th).sin();
        let gt = scale * (ALPHA * th).cos();
        [gr * c - gt * s, gr * s + gt * c]
    });
    ExactSolution { value, gradient }
}

fn lshape() -> ProblemSpec {
    let exact = lshape_exact();
    ProblemSpec {
        name: "lshape".into(),
        domain: Domain::LShape,
        interfaces: Interfaces::default(),
        regions: RegionPartition::default(),
        diffusion: Field::constant(Sym2::identity()),
        advection: Field::constant([0.0, 0.0]),
        reaction: Field::constant(0.0),
        source: Field::constant(0.0),
        dirichlet: exact.value.clone(),
        exact: Some(exact),
        default_resolution: 2,
    }
}

/// The 1D solution of `-(ε u')' + u' = 0` on `[0, 1]` with `ε = ε₁` left and
/// `ε₂` right of `x = 1/2`, `u(0) = u0`, `u(1) = u1`.
///
/// Written with `exp` of nonpositive arguments only, so it is stable for small
/// `ε₁`. Region 1 is the left subdomain; it only matters for the gradient
/// at `x = 1/2`.
pub fn hetero_exact(eps1: f64, eps2: f64, u0: f64, u1: f64) -> ExactSolution {
    let a = 0.5 / eps1;
    let c = 0.5 / eps2;
    let em_a = (-a).exp_m1(); // e^{-a} - 1
    let em_c = (-c).exp_m1();
    let mid = (u0 / em_a - u1 / c.exp_m1()) / (1.0 / em_a - 1.0 / c.exp_m1());
    let left = move |x: f64| {
        (mid * (-a).exp() - u0 + (u0 - mid) * ((x - 0.5) / eps1).exp()) / em_a
    };
    let right = move |x: f64| {
        (u1 * (-c).exp() - mid + (mid - u1) * ((x - 1.0) / eps2).exp()) / em_c
    };
    let dleft = move |x: f64| (u0 - mid) * ((x - 0.5) / eps1).exp() / (eps1 * em_a);
    let dright = move |x: f64| (mid - u1) * ((x - 1.0) / eps2).exp() / (eps2 * em_c);
    let value = Field::spatial(move |p: Point| if p[0] <= 0.5 { left(p[0]) } else { right(p[0]) });
    let gradient = Field::new(move |p: Point, region| {
        let on_left = if (p[0] - 0.5).abs() < 1e-14 { region == 1 } else { p[0] < 0.5 };
        [if on_left { dleft(p[0]) } else { dright(p[0]) }, 0.0]
    });
    ExactSolution { value, gradient }
}

fn hetero_interface() -> ProblemSpec {
    hetero_interface_with(1e-2, 1.0)
}

/// The two-subdomain interface problem with diffusivities `eps1` (left) and
/// `eps2` (right) across the flow.
pub fn hetero_interface_with(eps1: f64, eps2: f64) -> ProblemSpec {
    let exact = hetero_exact(eps1, eps2, 0.0, 1.0);
    ProblemSpec {
        name: "hetero-interface".into(),
        domain: Domain::unit_square(),
        interfaces: Interfaces { x: vec![0.5], y: vec![] },
        regions: RegionPartition {
            boxes: vec![Region { x: [0.0, 0.5], y: [0.0, 1.0] }, Region { x: [0.5, 1.0], y: [0.0, 1.0] }],
        },
        diffusion: Field::new(move |_, r| if r == 1 { Sym2::diag(eps1, 1.0) } else { Sym2::diag(eps2, 1.0) }),
        advection: Field::constant([1.0, 0.0]),
        reaction: Field::constant(0.0),
        source: Field::constant(0.0),
        dirichlet: exact.value.clone(),
        exact: Some(exact),
        default_resolution: 4,
    }
}

/// The rotating field `40 (x(2y-1)(x-1), -y(2x-1)(y-1))`, scaled by `sign`.
pub(crate) fn rotating_field(sign: f64, p: Point) -> [f64; 2] {
    let [x, y] = p;
    [
        sign * 40.0 * x * (2.0 * y - 1.0) * (x - 1.0),
        -sign * 40.0 * y * (2.0 * x - 1.0) * (y - 1.0),
    ]
}

fn aniso(sign: f64, name: &str) -> ProblemSpec {
    const S: f64 = 2.0 / 3.0;
    let boxes = vec![
        Region { x: [0.0, S], y: [0.0, S] },
        Region { x: [S, 1.0], y: [0.0, S] },
        Region { x: [S, 1.0], y: [S, 1.0] },
        Region { x: [0.0, S], y: [S, 1.0] },
    ];
    ProblemSpec {
        name: name.to_string(),
        domain: Domain::unit_square(),
        interfaces: Interfaces { x: vec![S], y: vec![S] },
        regions: RegionPartition { boxes },
        diffusion: Field::new(|_, r| if r % 2 == 1 { Sym2::diag(1e-6, 1.0) } else { Sym2::diag(1.0, 1e-6) }),
        advection: Field::spatial(move |p| rotating_field(sign, p)),
        reaction: Field::constant(1.0),
        source: Field::spatial(|p: Point| {
            let r = (p[0] - 0.5).hypot(p[1] - 0.5);
            1e-2 * (-(r - 0.35).powi(2) / 0.005).exp()
        }),
        dirichlet: Field::constant(0.0),
        exact: None,
        default_resolution: 6,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn names_resolve() {
        for (name, _) in catalog_entries() {
            assert_eq!(catalog(name).unwrap().name, *name);
        }
        assert!(matches!(catalog("nope"), Err(ProblemError::UnknownProblem(_))));
    }

    #[test]
    fn lshape_values() {
        let u = lshape_exact();
        // Sector angle 3π/4 is the physical direction π/4.
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((u.value.eval([h, h], 0) - 1.0).abs() < 1e-14);
        // Zero on both reentrant edges.
        assert!(u.value.eval([0.0, -0.5], 0).abs() < 1e-15);
        assert!(u.value.eval([-0.5, 0.0], 0).abs() < 1e-15);
        assert_eq!(u.value.eval([0.0, 0.0], 0), 0.0);
        let p = catalog("lshape").unwrap();
        assert_eq!(p.dirichlet.eval([1.0, 0.3], 0), u.value.eval([1.0, 0.3], 0));
    }

    #[test]
    fn lshape_gradient_matches_finite_differences() {
        let u = lshape_exact();
        for p in [[0.3, 0.4], [-0.7, 0.2], [0.5, -0.6], [0.01, 0.9], [-0.2, 0.001]] {
            let g = u.gradient.eval(p, 0);
            let d = 1e-6;
            let fx = (u.value.eval([p[0] + d, p[1]], 0) - u.value.eval([p[0] - d, p[1]], 0)) / (2.0 * d);
            let fy = (u.value.eval([p[0], p[1] + d], 0) - u.value.eval([p[0], p[1] - d], 0)) / (2.0 * d);
            assert!((g[0] - fx).abs() < 1e-6 && (g[1] - fy).abs() < 1e-6, "{p:?}: {g:?} vs {fx} {fy}");
        }
    }

    #[test]
    fn lshape_is_harmonic() {
        let u = lshape_exact();
        let d = 1e-3;
        for p in [[0.3, 0.4], [-0.7, 0.2], [0.5, -0.6]] {
            let c = u.value.eval(p, 0);
            let lap = (u.value.eval([p[0] + d, p[1]], 0)
                + u.value.eval([p[0] - d, p[1]], 0)
                + u.value.eval([p[0], p[1] + d], 0)
                + u.value.eval([p[0], p[1] - d], 0)
                - 4.0 * c)
                / (d * d);
            assert!(lap.abs() < 1e-4, "{lap}");
        }
    }

    #[test]
    fn hetero_interface_value() {
        let p = catalog("hetero-interface").unwrap();
        let u = p.exact.as_ref().unwrap();
        for y in [0.0, 0.3, 1.0] {
            assert!((u.value.eval([0.5, y], 1) - 0.6065307).abs() < 1e-7);
        }
        assert!(u.value.eval([0.0, 0.2], 1).abs() < 1e-15);
        assert!((u.value.eval([1.0, 0.2], 2) - 1.0).abs() < 1e-15);
        // Both pieces agree at the interface.
        assert!((u.value.eval([0.5 - 1e-13, 0.0], 1) - u.value.eval([0.5 + 1e-13, 0.0], 2)).abs() < 1e-9);
    }

    #[test]
    fn hetero_flux_matches() {
        let u = hetero_exact(1e-2, 1.0, 0.0, 1.0);
        let left = 1e-2 * u.gradient.eval([0.5, 0.5], 1)[0];
        let right = 1.0 * u.gradient.eval([0.5, 0.5], 2)[0];
        assert!(((left - right) / right).abs() < 1e-9, "{left} {right}");
    }

    #[test]
    fn hetero_solves_the_ode() {
        let u = hetero_exact(1e-2, 1.0, 0.0, 1.0);
        // -ε u'' + u' = 0 on each side, checked with the analytic derivative.
        for (x, eps, r) in [(0.3, 1e-2, 1), (0.45, 1e-2, 1), (0.7, 1.0, 2), (0.95, 1.0, 2)] {
            let d = 1e-6;
            let upp = (u.gradient.eval([x + d, 0.0], r)[0] - u.gradient.eval([x - d, 0.0], r)[0]) / (2.0 * d);
            let up = u.gradient.eval([x, 0.0], r)[0];
            assert!((-eps * upp + up).abs() < 1e-5 * (1.0 + up.abs()), "x={x}");
        }
    }

    #[test]
    fn aniso_stagnates_at_center() {
        for name in ["aniso-ccw", "aniso-cw"] {
            let p = catalog(name).unwrap();
            assert_eq!(p.advection.eval([0.5, 0.5], 0), [0.0, 0.0]);
            assert!(p.exact.is_none());
        }
        // Counterclockwise: moving right below the centre.
        let b = catalog("aniso-ccw").unwrap().advection.eval([0.5, 0.25], 1);
        assert!(b[0] > 0.0);
        let p = catalog("aniso-cw").unwrap();
        assert_eq!(p.diffusion.eval([0.2, 0.2], p.region_of([0.2, 0.2])), Sym2::diag(1e-6, 1.0));
        assert_eq!(p.diffusion.eval([0.9, 0.2], p.region_of([0.9, 0.2])), Sym2::diag(1.0, 1e-6));
        assert_eq!(p.diffusion.eval([0.9, 0.9], p.region_of([0.9, 0.9])), Sym2::diag(1e-6, 1.0));
        assert_eq!(p.diffusion.eval([0.2, 0.9], p.region_of([0.2, 0.9])), Sym2::diag(1.0, 1e-6));
    }

    proptest! {
        #[test]
        fn aniso_is_divergence_free(x in 0.0..1.0f64, y in 0.0..1.0f64) {
            // ∂x bx + ∂y by, both terms differentiated by hand.
            for sign in [1.0, -1.0] {
                let dbx = sign * 40.0 * (2.0 * y - 1.0) * (2.0 * x - 1.0);
                let dby = -sign * 40.0 * (2.0 * x - 1.0) * (2.0 * y - 1.0);
                prop_assert!((dbx + dby).abs() <= 1e-12);
                // And numerically against the implemented field.
                let d = 1e-5;
                let b = |p| rotating_field(sign, p);
                let div = (b([x + d, y])[0] - b([x - d, y])[0] + b([x, y + d])[1] - b([x, y - d])[1]) / (2.0 * d);
                prop_assert!(div.abs() < 1e-6);
            }
        }

        #[test]
        fn catalog_tensors_are_spd(x in 0.0..1.0f64, y in 0.0..1.0f64) {
            for (name, _) in catalog_entries() {
                let p = catalog(name).unwrap();
                let pt = if p.domain == Domain::LShape { [2.0 * x - 1.0, y] } else { [x, y] };
                let k = p.diffusion.eval(pt, p.region_of(pt));
                prop_assert!(k.is_spd());
            }
        }

        #[test]
        fn dirichlet_matches_exact_trace(t in 0.0..1.0f64) {
            for name in ["lshape", "hetero-interface"] {
                let p = catalog(name).unwrap();
                let u = p.exact.as_ref().unwrap();
                let pts: Vec<Point> = if name == "lshape" {
                    vec![[1.0, 2.0 * t - 1.0], [2.0 * t - 1.0, 1.0], [-t, 0.0], [0.0, -t]]
                } else {
                    vec![[0.0, t], [1.0, t], [t, 0.0], [t, 1.0]]
                };
                for q in pts {
                    let r = p.region_of(q);
                    prop_assert!((p.dirichlet.eval(q, r) - u.value.eval(q, r)).abs() <= 1e-10);
                }
            }
        }
    }
}

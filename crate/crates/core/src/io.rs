//! Plain-text outputs: convergence tables, solver logs and legacy VTK fields.

use std::io::{self, Write};

use crate::adapt::{observed_rates, AdaptRecord, RateAxis, RateQuantity};
use crate::mesh::Mesh;
use crate::spaces::{CgSpace, DgSpace, QuadratureRule};

/// Column order of `convergence.csv`. Rates refer to the interval ending at
/// the row and are empty on the first row or when undefined.
pub const CONVERGENCE_COLUMNS: [&str; 20] = [
    "level",
    "elements",
    "dofs_trial",
    "dofs_test",
    "estimator",
    "err_L2",
    "err_Vh",
    "err_Vh_beta",
    "effectivity",
    "dofs_total",
    "h_max",
    "marked",
    "rate_Vh_h",
    "rate_Vh_beta_h",
    "rate_L2_dofs",
    "rate_Vh_dofs",
    "rate_estimator_dofs",
    "outer_iterations",
    "inner_iterations",
    "orthogonality",
];

/// Column order of `solver_log.csv`. Wall times live here so that the
/// convergence table stays byte-identical between runs.
pub const SOLVER_LOG_COLUMNS: [&str; 8] =
    ["level", "dofs_total", "outer_iterations", "inner_iterations", "warm_started", "solver_residual", "orthogonality", "seconds"];

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.10e}")).unwrap_or_default()
}

pub fn write_convergence_csv(records: &[AdaptRecord], mut w: impl Write) -> io::Result<()> {
    writeln!(w, "{}", CONVERGENCE_COLUMNS.join(","))?;
    let rate = |x, y| {
        let mut r = vec![None];
        r.extend(observed_rates(records, x, y));
        r
    };
    let vh_h = rate(RateAxis::H, RateQuantity::ErrVh);
    let beta_h = rate(RateAxis::H, RateQuantity::ErrVhBeta);
    let l2_d = rate(RateAxis::Dofs, RateQuantity::ErrL2);
    let vh_d = rate(RateAxis::Dofs, RateQuantity::ErrVh);
    let est_d = rate(RateAxis::Dofs, RateQuantity::Estimator);
    for (i, r) in records.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{:.10e},{},{},{},{},{},{:.10e},{},{},{},{},{},{},{},{},{:.3e}",
            r.level,
            r.elements,
            r.dofs_trial,
            r.dofs_test,
            r.estimator,
            opt(r.err_l2),
            opt(r.err_vh),
            opt(r.err_vh_beta),
            opt(r.effectivity),
            r.dofs_total,
            r.h_max,
            r.marked,
            opt(vh_h[i]),
            opt(beta_h[i]),
            opt(l2_d[i]),
            opt(vh_d[i]),
            opt(est_d[i]),
            r.outer_iterations,
            r.inner_iterations,
            r.orthogonality,
        )?;
    }
    Ok(())
}

pub fn write_solver_log(records: &[AdaptRecord], mut w: impl Write) -> io::Result<()> {
    writeln!(w, "{}", SOLVER_LOG_COLUMNS.join(","))?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{:.3e},{:.3e},{:.6}",
            r.level,
            r.dofs_total,
            r.outer_iterations,
            r.inner_iterations,
            r.warm_started,
            r.solver_residual,
            r.orthogonality,
            r.seconds
        )?;
    }
    Ok(())
}

/// Element means of a broken field.
pub fn element_means(mesh: &Mesh, dg: &DgSpace, w: &[f64]) -> Vec<f64> {
    let q = QuadratureRule::with_degree(dg.degree());
    let weights: Vec<f64> = q.triangle_weights.iter().map(|w| 2.0 * w).collect();
    (0..mesh.num_elements())
        .map(|e| q.triangle_points.iter().zip(&weights).map(|(&xi, wt)| wt * dg.evaluate(w, e, xi)).sum())
        .collect()
}

/// Fields attached to a VTK export.
pub struct VtkFields<'a> {
    /// Continuous coefficients of `u_h`.
    pub u: &'a [f64],
    pub cg: &'a CgSpace,
    /// Broken coefficients of `ε_h`.
    pub eps: &'a [f64],
    pub dg: &'a DgSpace,
    pub indicators: &'a [f64],
}

/// Legacy ASCII unstructured grid: `u_h` at vertices, `eps_mean` and `E_T`
/// per cell.
pub fn write_vtk(mesh: &Mesh, fields: Option<&VtkFields<'_>>, title: &str, mut w: impl Write) -> io::Result<()> {
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{title}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.num_vertices())?;
    for v in mesh.vertices() {
        writeln!(w, "{:.17e} {:.17e} 0", v[0], v[1])?;
    }
    let ne = mesh.num_elements();
    writeln!(w, "CELLS {} {}", ne, 4 * ne)?;
    for t in mesh.elements() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "CELL_TYPES {ne}")?;
    for _ in 0..ne {
        writeln!(w, "5")?;
    }
    let Some(f) = fields else { return Ok(()) };
    writeln!(w, "POINT_DATA {}", mesh.num_vertices())?;
    writeln!(w, "SCALARS u_h double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for v in f.cg.vertex_values(mesh, f.u) {
        writeln!(w, "{v:.17e}")?;
    }
    writeln!(w, "CELL_DATA {ne}")?;
    writeln!(w, "SCALARS eps_mean double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for v in element_means(mesh, f.dg, f.eps) {
        writeln!(w, "{v:.17e}")?;
    }
    writeln!(w, "SCALARS E_T double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for v in f.indicators {
        writeln!(w, "{v:.17e}")?;
    }
    Ok(())
}

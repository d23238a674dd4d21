//! Solvers for the saddle-point system `[[G, B], [Bᵀ, 0]] [ε; u] = [L; 0]`
//! and for the plain dG system `B_full x = L`.

use std::time::Instant;

use sprs::CsMat;
use thiserror::Error;

use crate::assembly::SaddleSystem;
use crate::linalg::{self, axpy, dot, mul, mul_transpose, norm, LinalgError, LuFactor, SpdFactor};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("the trial space is empty")]
    EmptyTrialSpace,
    #[error("initial guess has the wrong size")]
    BadInitialGuess,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// Trial (continuous) coefficients.
    pub u: Vec<f64>,
    /// Residual representative in the test space.
    pub eps: Vec<f64>,
    pub iterations: usize,
    pub inner_iterations: usize,
    /// `sqrt(|L - Gε - Bu|² + |Bᵀε|²) / |L|`, zero when `L = 0`.
    pub relative_residual: f64,
    pub seconds: f64,
    pub converged: bool,
}

/// Relative block residuals `(|G ε + B u - L|, |Bᵀ ε|) / |L|`.
pub fn block_residuals(sys: &SaddleSystem, eps: &[f64], u: &[f64]) -> (f64, f64) {
    let (r, s) = residual(sys, eps, u);
    let scale = norm(&sys.load);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    (norm(&r) / scale, norm(&s) / scale)
}

/// `r = L - Gε - Bu`, `s = -Bᵀε`.
fn residual(sys: &SaddleSystem, eps: &[f64], u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let ge = mul(&sys.g, eps);
    let bu = mul(&sys.b, u);
    let r = sys.load.iter().zip(ge.iter().zip(&bu)).map(|(l, (a, b))| l - a - b).collect();
    let s = mul_transpose(&sys.b, eps).into_iter().map(|v| -v).collect();
    (r, s)
}

fn relative(sys: &SaddleSystem, eps: &[f64], u: &[f64]) -> f64 {
    let (a, b) = block_residuals(sys, eps, u);
    a.hypot(b)
}

/// Sparse LU of the full indefinite matrix, with a few steps of iterative
/// refinement if the first solve misses `tol`.
pub fn solve_direct(sys: &SaddleSystem, tol: f64) -> Result<SolveResult, SolverError> {
    let start = Instant::now();
    let (m, n) = (sys.dim_test(), sys.dim_trial());
    if n == 0 {
        return Err(SolverError::EmptyTrialSpace);
    }
    let lu = LuFactor::new(&sys.kkt())?;
    let mut rhs = sys.load.clone();
    rhs.resize(m + n, 0.0);
    let mut x = lu.solve(&rhs)?;
    let mut res = relative(sys, &x[..m], &x[m..]);
    let mut iterations = 1;
    while res > tol && iterations < 4 {
        let (r, s) = residual(sys, &x[..m], &x[m..]);
        let mut corr_rhs = r;
        corr_rhs.extend(s);
        let corr = lu.solve(&corr_rhs)?;
        axpy(1.0, &corr, &mut x);
        res = relative(sys, &x[..m], &x[m..]);
        iterations += 1;
    }
    let u = x.split_off(m);
    Ok(SolveResult {
        u,
        eps: x,
        iterations,
        inner_iterations: 0,
        relative_residual: res,
        seconds: start.elapsed().as_secs_f64(),
        converged: res <= tol,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterativeOptions {
    pub outer_tol: f64,
    pub max_outer: usize,
    pub inner_tol: f64,
    pub max_inner: usize,
    pub restart: usize,
    pub augment: usize,
}

impl Default for IterativeOptions {
    fn default() -> Self {
        IterativeOptions { outer_tol: 1e-8, max_outer: 50, inner_tol: 1e-10, max_inner: 1000, restart: 30, augment: 3 }
    }
}

/// Initial iterate `(ε₀, u₀)`, typically prolongated from a coarser level.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub eps: Vec<f64>,
    pub u: Vec<f64>,
}

/// Outer iteration on the saddle system:
///
/// ```text
/// r = L - Gε - Bu,  s = -Bᵀε
/// η = (BᵀG⁻¹B)⁻¹ (BᵀG⁻¹r - s)
/// δ = G⁻¹ (r - Bη)
/// ```
///
/// `G⁻¹` is an exact sparse Cholesky solve. The Schur system is solved by
/// LGMRES preconditioned with the Cholesky factor of `Bᵀ diag(G)⁻¹ B`.
pub fn solve_iterative(
    sys: &SaddleSystem,
    opts: &IterativeOptions,
    warm: Option<&WarmStart>,
) -> Result<SolveResult, SolverError> {
    let start = Instant::now();
    let (m, n) = (sys.dim_test(), sys.dim_trial());
    if n == 0 {
        return Err(SolverError::EmptyTrialSpace);
    }
    let (mut eps, mut u) = match warm {
        Some(w) if w.eps.len() == m && w.u.len() == n => (w.eps.clone(), w.u.clone()),
        Some(_) => return Err(SolverError::BadInitialGuess),
        None => (vec![0.0; m], vec![0.0; n]),
    };
    let g_inv = SpdFactor::new(&sys.g)?;
    let s_hat = SpdFactor::new(&approximate_schur(&sys.g, &sys.b))?;
    let schur = |x: &[f64]| mul_transpose(&sys.b, &g_inv.solve(&mul(&sys.b, x)));
    let precond = |x: &[f64]| s_hat.solve(x);

    let mut best = (f64::INFINITY, eps.clone(), u.clone());
    let mut inner_total = 0;
    let mut iterations = 0;
    let mut stalled = 0;
    loop {
        let res = relative(sys, &eps, &u);
        if res < best.0 {
            if res > 0.5 * best.0 {
                stalled += 1;
            } else {
                stalled = 0;
            }
            best = (res, eps.clone(), u.clone());
        } else {
            stalled += 1;
        }
        if res <= opts.outer_tol || iterations >= opts.max_outer || stalled >= 3 {
            break;
        }
        let (r, s) = residual(sys, &eps, &u);
        let g_r = g_inv.solve(&r);
        let mut rhs = mul_transpose(&sys.b, &g_r);
        axpy(-1.0, &s, &mut rhs);
        let scale = norm(&rhs);
        let inner = lgmres(&schur, &precond, &rhs, opts.inner_tol * scale.max(f64::MIN_POSITIVE), opts);
        inner_total += inner.iterations;
        let eta = inner.x;
        let mut t = r;
        axpy(-1.0, &mul(&sys.b, &eta), &mut t);
        let delta = g_inv.solve(&t);
        axpy(1.0, &delta, &mut eps);
        axpy(1.0, &eta, &mut u);
        iterations += 1;
    }
    let (res, eps, u) = best;
    Ok(SolveResult {
        u,
        eps,
        iterations,
        inner_iterations: inner_total,
        relative_residual: res,
        seconds: start.elapsed().as_secs_f64(),
        converged: res <= opts.outer_tol,
    })
}

/// `Bᵀ diag(G)⁻¹ B`
pub fn approximate_schur(g: &CsMat<f64>, b: &CsMat<f64>) -> CsMat<f64> {
    let d = linalg::diagonal(g);
    let mut scaled = b.clone();
    for (r, mut row) in scaled.outer_iterator_mut().enumerate() {
        for (_, v) in row.iter_mut() {
            *v /= d[r];
        }
    }
    let bt = linalg::transpose(b);
    &bt * &scaled
}

pub(crate) struct KrylovResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final residual norm (recurrence estimate).
    #[cfg_attr(not(test), allow(dead_code))]
    pub residual: f64,
}

/// Restarted GMRES with right preconditioning, augmented after every cycle
/// with the `opts.augment` most recent corrections (LGMRES). Stops once the
/// true residual is at most `abs_tol`.
pub(crate) fn lgmres(
    a: &dyn Fn(&[f64]) -> Vec<f64>,
    precond: &dyn Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    abs_tol: f64,
    opts: &IterativeOptions,
) -> KrylovResult {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut aug: Vec<Vec<f64>> = Vec::new();
    let mut iterations = 0;
    let mut r = b.to_vec();
    let mut beta = norm(&r);
    while beta > abs_tol && iterations < opts.max_inner {
        let k = opts.restart + aug.len();
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(k + 1);
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(k);
        let mut h = vec![vec![0.0; k]; k + 1];
        let (mut cs, mut sn) = (vec![0.0; k], vec![0.0; k]);
        let mut g = vec![0.0; k + 1];
        g[0] = beta;
        v.push(r.iter().map(|x| x / beta).collect());
        let mut used = 0;
        for j in 0..k {
            let zj = if j < opts.restart { precond(&v[j]) } else { aug[j - opts.restart].clone() };
            let mut w = a(&zj);
            for i in 0..=j {
                h[i][j] = dot(&w, &v[i]);
                axpy(-h[i][j], &v[i], &mut w);
            }
            h[j + 1][j] = norm(&w);
            z.push(zj);
            iterations += 1;
            used = j + 1;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let rho = h[j][j].hypot(h[j + 1][j]);
            let breakdown = h[j + 1][j] <= 1e-14 * rho;
            if rho == 0.0 {
                used = j;
                break;
            }
            cs[j] = h[j][j] / rho;
            sn[j] = h[j + 1][j] / rho;
            let hj1 = h[j + 1][j];
            h[j][j] = rho;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            if breakdown || g[j + 1].abs() <= abs_tol || iterations >= opts.max_inner {
                break;
            }
            v.push(w.iter().map(|x| x / hj1).collect());
        }
        if used == 0 {
            break;
        }
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let mut s = g[i];
            for l in i + 1..used {
                s -= h[i][l] * y[l];
            }
            y[i] = s / h[i][i];
        }
        let mut dx = vec![0.0; n];
        for (yi, zi) in y.iter().zip(&z) {
            axpy(*yi, zi, &mut dx);
        }
        axpy(1.0, &dx, &mut x);
        let dn = norm(&dx);
        if opts.augment > 0 && dn > 0.0 {
            aug.insert(0, dx.iter().map(|v| v / dn).collect());
            aug.truncate(opts.augment);
        }
        r = a(&x);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        beta = norm(&r);
    }
    KrylovResult { x, iterations, residual: beta }
}

/// Solves the square dG system directly.
pub fn solve_dg(b_full: &CsMat<f64>, load: &[f64], tol: f64) -> Result<Vec<f64>, SolverError> {
    let lu = LuFactor::new(b_full)?;
    let mut x = lu.solve(load)?;
    let scale = norm(load).max(f64::MIN_POSITIVE);
    for _ in 0..3 {
        let mut r = load.to_vec();
        axpy(-1.0, &mul(b_full, &x), &mut r);
        if norm(&r) <= tol * scale {
            return Ok(x);
        }
        axpy(1.0, &lu.solve(&r)?, &mut x);
    }
    Ok(x)
}

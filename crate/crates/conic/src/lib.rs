//! Small dense conic solver for mixed linear, second-order and
//! semidefinite programs.
//!
//! Problems are described with [`ConicProblem`] in a maximisation form over
//! scalar variables, second-order-cone variables and real symmetric PSD
//! blocks. Complex Hermitian PSD variables are handled through the real
//! embedding provided by [`embed_hermitian`] and [`extract_hermitian`].

pub mod cone;
mod error;
mod ipm;
pub mod problem;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub use error::ConicError;
pub use problem::{ConicProblem, LinExpr, PsdVar, ScalarDomain, ScalarVar, SocVar};

/// Termination status of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIters,
}

/// Relative KKT residuals of the returned iterate.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KktResiduals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

/// Solver knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Stopping tolerance on the relative residuals and gap.
    pub tol: f64,
    pub max_iters: usize,
    /// Threshold used by the infeasibility and unboundedness certificates.
    pub infeasibility_tol: f64,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { tol: 1e-7, max_iters: 100, infeasibility_tol: 1e-8, step_fraction: 0.99 }
    }
}

/// Result of [`solve`].
#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub scalars: Vec<f64>,
    pub soc: Vec<DVector<f64>>,
    pub psd: Vec<DMatrix<f64>>,
    /// Objective value at the returned primal point.
    pub objective: f64,
    /// Upper bound on the optimal value given by the dual iterate.
    pub dual_bound: f64,
    pub residuals: KktResiduals,
    pub iterations: usize,
    /// Equality multipliers of the internal standard form.
    pub dual: Vec<f64>,
}

impl ConicSolution {
    pub fn scalar(&self, v: ScalarVar) -> f64 {
        self.scalars[v.index()]
    }

    pub fn psd(&self, v: PsdVar) -> &DMatrix<f64> {
        &self.psd[v.index()]
    }

    pub fn soc(&self, v: SocVar) -> &DVector<f64> {
        &self.soc[v.index()]
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Solves `problem` with the given tolerance and iteration cap.
///
/// `tol` must lie in `[1e-10, 1e-4]`.
pub fn solve(problem: &ConicProblem, tol: f64, max_iters: usize) -> Result<ConicSolution, ConicError> {
    solve_with(problem, &SolverSettings { tol, max_iters, ..SolverSettings::default() })
}

/// Solves `problem` with explicit settings.
pub fn solve_with(problem: &ConicProblem, settings: &SolverSettings) -> Result<ConicSolution, ConicError> {
    if !(1e-10..=1e-4).contains(&settings.tol) {
        return Err(ConicError::Tolerance(settings.tol));
    }
    problem.validate()?;
    let sf = ipm::StdForm::compile(problem);
    let res = ipm::solve_std(&sf, settings);
    Ok(ipm::recover(problem, &sf, res))
}

/// Real symmetric embedding `[[Re H, -Im H], [Im H, Re H]]` of a Hermitian
/// matrix.
///
/// For Hermitian `H` and symmetric `Z`, `<embed(H), Z> = 2 Re tr(H extract(Z))`,
/// and `embed(H)` is PSD exactly when `H` is.
pub fn embed_hermitian(h: &DMatrix<Complex64>) -> Result<DMatrix<f64>, ConicError> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(ConicError::Dimension(format!("{}x{} is not square", n, h.ncols())));
    }
    let dev = (h - h.adjoint()).iter().fold(0.0f64, |a, v| a.max(v.norm()));
    let scale = h.iter().fold(1.0f64, |a, v| a.max(v.norm()));
    if !dev.is_finite() || dev > 1e-9 * scale {
        return Err(ConicError::NotHermitian(dev));
    }
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let (re, im) = (h[(i, j)].re, h[(i, j)].im);
            out[(i, j)] = re;
            out[(i + n, j + n)] = re;
            out[(i, j + n)] = -im;
            out[(i + n, j)] = im;
        }
    }
    Ok(out)
}

/// Inverse of [`embed_hermitian`], averaging the redundant copies.
///
/// # Panics
/// Panics if `z` is not square with even dimension.
pub fn extract_hermitian(z: &DMatrix<f64>) -> DMatrix<Complex64> {
    assert!(z.nrows() == z.ncols() && z.nrows() % 2 == 0, "embedded matrix must be 2n x 2n");
    let n = z.nrows() / 2;
    let mut h = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for i in 0..n {
        for j in 0..n {
            let re = 0.5 * (z[(i, j)] + z[(i + n, j + n)]);
            let im = 0.5 * (z[(i + n, j)] - z[(i, j + n)]);
            h[(i, j)] = Complex64::new(re, im);
        }
    }
    // enforce exact Hermitian symmetry
    (&h + h.adjoint()).map(|v| v * 0.5)
}

//! Modelling layer: variables, affine expressions and constraints.
//!
//! A [`ConicProblem`] is a maximisation of a linear objective over scalar
//! variables (free or nonnegative), second-order-cone vector variables and
//! real symmetric PSD matrix variables, subject to linear equalities,
//! linear inequalities and second-order-cone constraints on affine maps.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::ConicError;

/// Domain of a scalar variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarDomain {
    Free,
    NonNeg,
}

/// Handle to a scalar variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScalarVar(pub(crate) usize);

/// Handle to a PSD matrix variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PsdVar(pub(crate) usize);

/// Handle to a vector variable constrained to a second-order cone
/// `(t, u_1, ..., u_{n-1})` with `||u|| <= t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SocVar(pub(crate) usize);

impl ScalarVar {
    pub fn index(self) -> usize {
        self.0
    }
}

impl PsdVar {
    pub fn index(self) -> usize {
        self.0
    }
}

impl SocVar {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Affine expression `sum c_s s + sum c_(v,i) v_i + sum <C_b, X_b> + constant`.
///
/// PSD coefficients use the trace inner product; they are symmetrised when
/// the problem is compiled.
#[derive(Debug, Clone, Default)]
pub struct LinExpr {
    pub(crate) scalars: Vec<(usize, f64)>,
    pub(crate) soc: Vec<(usize, usize, f64)>,
    pub(crate) psd: Vec<(usize, DMatrix<f64>)>,
    pub(crate) constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        LinExpr { constant: c, ..Self::default() }
    }

    pub fn scalar(v: ScalarVar, c: f64) -> Self {
        let mut e = Self::new();
        e.add_scalar(v, c);
        e
    }

    pub fn add_scalar(&mut self, v: ScalarVar, c: f64) -> &mut Self {
        if c != 0.0 {
            self.scalars.push((v.0, c));
        }
        self
    }

    pub fn add_soc_entry(&mut self, v: SocVar, entry: usize, c: f64) -> &mut Self {
        if c != 0.0 {
            self.soc.push((v.0, entry, c));
        }
        self
    }

    pub fn add_psd(&mut self, v: PsdVar, c: &DMatrix<f64>) -> &mut Self {
        if let Some((_, m)) = self.psd.iter_mut().find(|(b, _)| *b == v.0) {
            *m += c;
        } else {
            self.psd.push((v.0, c.clone()));
        }
        self
    }

    pub fn add_constant(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    /// Appends `factor * other`.
    pub fn add_expr(&mut self, other: &LinExpr, factor: f64) -> &mut Self {
        for &(i, c) in &other.scalars {
            self.scalars.push((i, c * factor));
        }
        for &(b, i, c) in &other.soc {
            self.soc.push((b, i, c * factor));
        }
        for (b, m) in &other.psd {
            self.add_psd(PsdVar(*b), &(m * factor));
        }
        self.constant += other.constant * factor;
        self
    }

    /// Evaluates the expression at a solution.
    pub fn eval(&self, sol: &crate::ConicSolution) -> f64 {
        let mut v = self.constant;
        for &(i, c) in &self.scalars {
            v += c * sol.scalars[i];
        }
        for &(b, i, c) in &self.soc {
            v += c * sol.soc[b][i];
        }
        for (b, m) in &self.psd {
            v += m.dot(&sol.psd[*b]);
        }
        v
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SocConstraint {
    pub t: LinExpr,
    pub u: Vec<LinExpr>,
}

/// A convex conic program in modelling form (maximisation).
#[derive(Debug, Clone, Default)]
pub struct ConicProblem {
    pub(crate) scalars: Vec<ScalarDomain>,
    pub(crate) psd_sizes: Vec<usize>,
    pub(crate) soc_sizes: Vec<usize>,
    pub(crate) objective: LinExpr,
    pub(crate) eqs: Vec<(LinExpr, f64)>,
    pub(crate) les: Vec<(LinExpr, f64)>,
    pub(crate) socs: Vec<SocConstraint>,
}

impl ConicProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_scalar(&mut self, domain: ScalarDomain) -> ScalarVar {
        self.scalars.push(domain);
        ScalarVar(self.scalars.len() - 1)
    }

    pub fn add_psd(&mut self, size: usize) -> PsdVar {
        assert!(size > 0, "PSD block must be non-empty");
        self.psd_sizes.push(size);
        PsdVar(self.psd_sizes.len() - 1)
    }

    /// Adds a vector variable of total dimension `dim` (>= 2) living in the
    /// second-order cone.
    pub fn add_soc_var(&mut self, dim: usize) -> SocVar {
        assert!(dim >= 2, "second-order cone needs dimension >= 2");
        self.soc_sizes.push(dim);
        SocVar(self.soc_sizes.len() - 1)
    }

    pub fn n_scalars(&self) -> usize {
        self.scalars.len()
    }

    pub fn psd_sizes(&self) -> &[usize] {
        &self.psd_sizes
    }

    pub fn soc_sizes(&self) -> &[usize] {
        &self.soc_sizes
    }

    pub fn n_equalities(&self) -> usize {
        self.eqs.len()
    }

    pub fn n_inequalities(&self) -> usize {
        self.les.len()
    }

    pub fn n_soc_constraints(&self) -> usize {
        self.socs.len()
    }

    /// Sets the objective to be maximised.
    pub fn maximize(&mut self, obj: LinExpr) {
        self.objective = obj;
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    /// `expr == rhs`
    pub fn add_eq(&mut self, expr: LinExpr, rhs: f64) {
        self.eqs.push((expr, rhs));
    }

    /// `expr <= rhs`
    pub fn add_le(&mut self, expr: LinExpr, rhs: f64) {
        self.les.push((expr, rhs));
    }

    /// `expr >= rhs`
    pub fn add_ge(&mut self, mut expr: LinExpr, rhs: f64) {
        let mut neg = LinExpr::new();
        neg.add_expr(&expr, -1.0);
        expr = neg;
        self.les.push((expr, -rhs));
    }

    /// `||u|| <= t` for affine `t` and `u`.
    pub fn add_soc(&mut self, t: LinExpr, u: Vec<LinExpr>) {
        self.socs.push(SocConstraint { t, u });
    }

    /// Checks that every expression references existing variables with
    /// finite, correctly sized coefficients.
    pub fn validate(&self) -> Result<(), ConicError> {
        let check = |e: &LinExpr, what: &str| -> Result<(), ConicError> {
            if !e.constant.is_finite() {
                return Err(ConicError::NonFinite(what.to_string()));
            }
            for &(i, c) in &e.scalars {
                if i >= self.scalars.len() {
                    return Err(ConicError::Dimension(format!("{what}: scalar {i} out of range")));
                }
                if !c.is_finite() {
                    return Err(ConicError::NonFinite(what.to_string()));
                }
            }
            for &(b, i, c) in &e.soc {
                let Some(&n) = self.soc_sizes.get(b) else {
                    return Err(ConicError::Dimension(format!("{what}: cone var {b} out of range")));
                };
                if i >= n {
                    return Err(ConicError::Dimension(format!("{what}: cone entry {i} >= {n}")));
                }
                if !c.is_finite() {
                    return Err(ConicError::NonFinite(what.to_string()));
                }
            }
            for (b, m) in &e.psd {
                let Some(&n) = self.psd_sizes.get(*b) else {
                    return Err(ConicError::Dimension(format!("{what}: PSD block {b} out of range")));
                };
                if m.nrows() != n || m.ncols() != n {
                    return Err(ConicError::Dimension(format!(
                        "{what}: PSD coefficient is {}x{}, block is {n}x{n}",
                        m.nrows(),
                        m.ncols()
                    )));
                }
                if m.iter().any(|v| !v.is_finite()) {
                    return Err(ConicError::NonFinite(what.to_string()));
                }
            }
            Ok(())
        };
        check(&self.objective, "objective")?;
        for (i, (e, r)) in self.eqs.iter().enumerate() {
            check(e, &format!("equality {i}"))?;
            if !r.is_finite() {
                return Err(ConicError::NonFinite(format!("equality {i} rhs")));
            }
        }
        for (i, (e, r)) in self.les.iter().enumerate() {
            check(e, &format!("inequality {i}"))?;
            if !r.is_finite() {
                return Err(ConicError::NonFinite(format!("inequality {i} rhs")));
            }
        }
        for (i, s) in self.socs.iter().enumerate() {
            check(&s.t, &format!("soc {i} t"))?;
            for u in &s.u {
                check(u, &format!("soc {i} u"))?;
            }
            if s.u.is_empty() {
                return Err(ConicError::Dimension(format!("soc {i} has an empty cone part")));
            }
        }
        Ok(())
    }

    /// Self-describing text dump for offline cross-checking.
    ///
    /// Layout: a `variables` header, then one section per constraint family
    /// and cone. Every affine expression is printed as dense row-major
    /// coefficients over the scalar, cone-variable and PSD blocks in that
    /// order, followed by its constant.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# conic problem (maximize)");
        let _ = writeln!(
            out,
            "variables scalars={} soc={:?} psd={:?}",
            self.scalars.len(),
            self.soc_sizes,
            self.psd_sizes
        );
        let doms: Vec<&str> = self
            .scalars
            .iter()
            .map(|d| match d {
                ScalarDomain::Free => "free",
                ScalarDomain::NonNeg => "nonneg",
            })
            .collect();
        let _ = writeln!(out, "domains {}", doms.join(" "));
        let _ = writeln!(out, "[objective]");
        self.dump_expr(&mut out, &self.objective);
        let _ = writeln!(out, "[equalities] count={}", self.eqs.len());
        for (e, r) in &self.eqs {
            self.dump_expr(&mut out, e);
            let _ = writeln!(out, "rhs {r:.17e}");
        }
        let _ = writeln!(out, "[inequalities le] count={}", self.les.len());
        for (e, r) in &self.les {
            self.dump_expr(&mut out, e);
            let _ = writeln!(out, "rhs {r:.17e}");
        }
        let _ = writeln!(out, "[soc] count={}", self.socs.len());
        for s in &self.socs {
            let _ = writeln!(out, "cone dim={}", s.u.len() + 1);
            self.dump_expr(&mut out, &s.t);
            for u in &s.u {
                self.dump_expr(&mut out, u);
            }
        }
        for (b, n) in self.psd_sizes.iter().enumerate() {
            let _ = writeln!(out, "[psd {b}] size={n}");
        }
        out
    }

    fn dump_expr(&self, out: &mut String, e: &LinExpr) {
        let mut dense = vec![0.0; self.scalars.len()];
        for &(i, c) in &e.scalars {
            dense[i] += c;
        }
        for (b, &n) in self.soc_sizes.iter().enumerate() {
            let mut v = vec![0.0; n];
            for &(bb, i, c) in &e.soc {
                if bb == b {
                    v[i] += c;
                }
            }
            dense.extend(v);
        }
        for (b, &n) in self.psd_sizes.iter().enumerate() {
            let mut m = DMatrix::<f64>::zeros(n, n);
            for (bb, c) in &e.psd {
                if *bb == b {
                    m += c;
                }
            }
            // row-major
            for i in 0..n {
                for j in 0..n {
                    dense.push(m[(i, j)]);
                }
            }
        }
        let row: Vec<String> = dense.iter().map(|v| format!("{v:.17e}")).collect();
        let _ = writeln!(out, "row {} const {:.17e}", row.join(" "), e.constant);
    }
}

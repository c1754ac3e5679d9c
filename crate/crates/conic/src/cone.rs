//! Cone algebra for the product cone `R+^l x Q^{n1} x ... x S+^{s1} x ...`.
//!
//! Elements are stored block-wise: one dense vector for the nonnegative
//! orthant, then one block per second-order or semidefinite cone. The
//! Nesterov-Todd scaling, Jordan products and step-to-boundary routines used
//! by the interior-point iteration live here.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Shape of a non-orthant cone block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeKind {
    /// Second-order cone `{(t, u) : ||u|| <= t}` of total dimension `n`.
    Soc(usize),
    /// Cone of `n x n` real symmetric positive semidefinite matrices.
    Psd(usize),
}

impl ConeKind {
    /// Barrier degree contribution.
    pub fn degree(self) -> usize {
        match self {
            ConeKind::Soc(_) => 1,
            ConeKind::Psd(n) => n,
        }
    }
}

/// One block of a cone element.
#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    Soc(DVector<f64>),
    Psd(DMatrix<f64>),
}

impl Block {
    pub fn zeros(kind: ConeKind) -> Self {
        match kind {
            ConeKind::Soc(n) => Block::Soc(DVector::zeros(n)),
            ConeKind::Psd(n) => Block::Psd(DMatrix::zeros(n, n)),
        }
    }

    pub fn identity(kind: ConeKind) -> Self {
        match kind {
            ConeKind::Soc(n) => {
                let mut v = DVector::zeros(n);
                v[0] = 1.0;
                Block::Soc(v)
            }
            ConeKind::Psd(n) => Block::Psd(DMatrix::identity(n, n)),
        }
    }

    pub fn dot(&self, other: &Block) -> f64 {
        match (self, other) {
            (Block::Soc(a), Block::Soc(b)) => a.dot(b),
            (Block::Psd(a), Block::Psd(b)) => a.dot(b),
            _ => panic!("cone block kind mismatch"),
        }
    }

    pub fn axpy(&mut self, alpha: f64, x: &Block) {
        match (self, x) {
            (Block::Soc(a), Block::Soc(b)) => a.axpy(alpha, b, 1.0),
            (Block::Psd(a), Block::Psd(b)) => a.zip_apply(b, |u, v| *u += alpha * v),
            _ => panic!("cone block kind mismatch"),
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        match self {
            Block::Soc(a) => *a *= alpha,
            Block::Psd(a) => *a *= alpha,
        }
    }

    pub fn norm_squared(&self) -> f64 {
        match self {
            Block::Soc(a) => a.norm_squared(),
            Block::Psd(a) => a.norm_squared(),
        }
    }
}

/// An element of the product cone's ambient space.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeVec {
    pub lin: DVector<f64>,
    pub blocks: Vec<Block>,
}

impl ConeVec {
    pub fn zeros(n_lin: usize, kinds: &[ConeKind]) -> Self {
        ConeVec {
            lin: DVector::zeros(n_lin),
            blocks: kinds.iter().map(|&k| Block::zeros(k)).collect(),
        }
    }

    pub fn identity(n_lin: usize, kinds: &[ConeKind]) -> Self {
        ConeVec {
            lin: DVector::from_element(n_lin, 1.0),
            blocks: kinds.iter().map(|&k| Block::identity(k)).collect(),
        }
    }

    pub fn dot(&self, other: &ConeVec) -> f64 {
        self.lin.dot(&other.lin)
            + self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a.dot(b))
                .sum::<f64>()
    }

    pub fn axpy(&mut self, alpha: f64, x: &ConeVec) {
        self.lin.axpy(alpha, &x.lin, 1.0);
        for (a, b) in self.blocks.iter_mut().zip(&x.blocks) {
            a.axpy(alpha, b);
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.lin *= alpha;
        for b in &mut self.blocks {
            b.scale(alpha);
        }
    }

    pub fn norm(&self) -> f64 {
        (self.lin.norm_squared() + self.blocks.iter().map(Block::norm_squared).sum::<f64>()).sqrt()
    }
}

/// Nesterov-Todd scaling of one non-orthant block.
#[derive(Debug, Clone)]
enum BlockScaling {
    /// `W = eta (2 w w^T - J)`, symmetric.
    Soc { eta: f64, w: DVector<f64> },
    /// `W(Z) = R^T Z R`, `W^{-T}(S) = R^{-1} S R^{-T}`.
    Psd { r: DMatrix<f64>, rinv: DMatrix<f64>, g: DMatrix<f64> },
}

/// Nesterov-Todd scaling for the whole product cone, together with the scaled
/// point `lambda = W z = W^{-T} x`.
#[derive(Debug, Clone)]
pub struct NtScaling {
    lin: DVector<f64>,
    blocks: Vec<BlockScaling>,
    pub lambda: ConeVec,
}

fn soc_jdet(v: &DVector<f64>) -> f64 {
    v[0] * v[0] - v.rows(1, v.len() - 1).norm_squared()
}

fn soc_reflect(v: &DVector<f64>) -> DVector<f64> {
    let mut out = -v.clone();
    out[0] = v[0];
    out
}

/// Applies `eta (2 w w^T - J)` to `v`.
fn soc_apply(eta: f64, w: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let wv = w.dot(v);
    let mut out = w * (2.0 * wv);
    out -= soc_reflect(v);
    out * eta
}

/// Applies the inverse `eta^{-1} (2 J w w^T J - J)` to `v`.
fn soc_apply_inv(eta: f64, w: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let jw = soc_reflect(w);
    let jwv = jw.dot(v);
    let mut out = jw * (2.0 * jwv);
    out -= soc_reflect(v);
    out / eta
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotInterior;

impl NtScaling {
    /// Computes the scaling for a strictly feasible primal-dual pair.
    pub fn new(x: &ConeVec, z: &ConeVec) -> Result<Self, NotInterior> {
        if x.lin.iter().chain(z.lin.iter()).any(|&v| !(v > 0.0)) {
            return Err(NotInterior);
        }
        let lin = x.lin.zip_map(&z.lin, |a, b| (a / b).sqrt());
        let lam_lin = x.lin.zip_map(&z.lin, |a, b| (a * b).sqrt());
        let mut blocks = Vec::with_capacity(x.blocks.len());
        let mut lam_blocks = Vec::with_capacity(x.blocks.len());
        for (xb, zb) in x.blocks.iter().zip(&z.blocks) {
            match (xb, zb) {
                (Block::Soc(s), Block::Soc(zz)) => {
                    let sd = soc_jdet(s);
                    let zd = soc_jdet(zz);
                    if !(sd > 0.0 && zd > 0.0 && s[0] > 0.0 && zz[0] > 0.0) {
                        return Err(NotInterior);
                    }
                    let sn = sd.sqrt();
                    let zn = zd.sqrt();
                    let sbar = s / sn;
                    let zbar = zz / zn;
                    let gamma = ((1.0 + sbar.dot(&zbar)) / 2.0).sqrt();
                    let wbar = (sbar + soc_reflect(&zbar)) / (2.0 * gamma);
                    let mut w = wbar.clone();
                    w[0] += 1.0;
                    w /= (2.0 * (wbar[0] + 1.0)).sqrt();
                    let eta = (sn / zn).sqrt();
                    let lam = soc_apply(eta, &w, zz);
                    blocks.push(BlockScaling::Soc { eta, w });
                    lam_blocks.push(Block::Soc(lam));
                }
                (Block::Psd(s), Block::Psd(zz)) => {
                    let l1 = s.clone().cholesky().ok_or(NotInterior)?.unpack();
                    let l2 = zz.clone().cholesky().ok_or(NotInterior)?.unpack();
                    let prod = l2.transpose() * &l1;
                    let svd = prod.svd(true, true);
                    let u = svd.u.ok_or(NotInterior)?;
                    let vt = svd.v_t.ok_or(NotInterior)?;
                    let sv = svd.singular_values;
                    if sv.iter().any(|&v| !(v > 0.0)) {
                        return Err(NotInterior);
                    }
                    let isq = sv.map(|v| 1.0 / v.sqrt());
                    let mut r = l1 * vt.transpose();
                    for (j, f) in isq.iter().enumerate() {
                        r.column_mut(j).scale_mut(*f);
                    }
                    let mut rinv = u.transpose() * l2.transpose();
                    for (i, f) in isq.iter().enumerate() {
                        rinv.row_mut(i).scale_mut(*f);
                    }
                    lam_blocks.push(Block::Psd(DMatrix::from_diagonal(&sv)));
                    let g = &r * r.transpose();
                    blocks.push(BlockScaling::Psd { r, rinv, g });
                }
                _ => panic!("cone block kind mismatch"),
            }
        }
        Ok(NtScaling {
            lin,
            blocks,
            lambda: ConeVec { lin: lam_lin, blocks: lam_blocks },
        })
    }

    /// `W v`
    pub fn apply_w(&self, v: &ConeVec) -> ConeVec {
        self.map(v, |s, b| match (s, b) {
            (BlockScaling::Soc { eta, w }, Block::Soc(x)) => Block::Soc(soc_apply(*eta, w, x)),
            (BlockScaling::Psd { r, .. }, Block::Psd(x)) => Block::Psd(r.transpose() * x * r),
            _ => unreachable!(),
        }, |w, x| w * x)
    }

    /// `W^T v`
    pub fn apply_wt(&self, v: &ConeVec) -> ConeVec {
        self.map(v, |s, b| match (s, b) {
            (BlockScaling::Soc { eta, w }, Block::Soc(x)) => Block::Soc(soc_apply(*eta, w, x)),
            (BlockScaling::Psd { r, .. }, Block::Psd(x)) => Block::Psd(r * x * r.transpose()),
            _ => unreachable!(),
        }, |w, x| w * x)
    }

    /// `W^{-T} v`
    pub fn apply_winv_t(&self, v: &ConeVec) -> ConeVec {
        self.map(v, |s, b| match (s, b) {
            (BlockScaling::Soc { eta, w }, Block::Soc(x)) => Block::Soc(soc_apply_inv(*eta, w, x)),
            (BlockScaling::Psd { rinv, .. }, Block::Psd(x)) => {
                Block::Psd(rinv * x * rinv.transpose())
            }
            _ => unreachable!(),
        }, |w, x| x / w)
    }

    /// `W^T W` applied to a single block (used to form the Schur complement).
    pub fn apply_g_block(&self, idx: usize, b: &Block) -> Block {
        match (&self.blocks[idx], b) {
            (BlockScaling::Soc { eta, w }, Block::Soc(x)) => {
                Block::Soc(soc_apply(*eta, w, &soc_apply(*eta, w, x)))
            }
            (BlockScaling::Psd { g, .. }, Block::Psd(x)) => Block::Psd(g * x * g),
            _ => unreachable!(),
        }
    }

    /// Diagonal of `W^T W` on the orthant part.
    pub fn g_lin(&self, i: usize) -> f64 {
        self.lin[i] * self.lin[i]
    }

    fn map(
        &self,
        v: &ConeVec,
        f: impl Fn(&BlockScaling, &Block) -> Block,
        flin: impl Fn(f64, f64) -> f64,
    ) -> ConeVec {
        ConeVec {
            lin: self.lin.zip_map(&v.lin, flin),
            blocks: self.blocks.iter().zip(&v.blocks).map(|(s, b)| f(s, b)).collect(),
        }
    }
}

/// Jordan product `u o v`.
pub fn jordan(u: &ConeVec, v: &ConeVec) -> ConeVec {
    ConeVec {
        lin: u.lin.component_mul(&v.lin),
        blocks: u
            .blocks
            .iter()
            .zip(&v.blocks)
            .map(|(a, b)| match (a, b) {
                (Block::Soc(a), Block::Soc(b)) => {
                    let n = a.len();
                    let mut out = DVector::zeros(n);
                    out[0] = a.dot(b);
                    for i in 1..n {
                        out[i] = a[0] * b[i] + b[0] * a[i];
                    }
                    Block::Soc(out)
                }
                (Block::Psd(a), Block::Psd(b)) => {
                    let ab = a * b;
                    Block::Psd((&ab + ab.transpose()) * 0.5)
                }
                _ => panic!("cone block kind mismatch"),
            })
            .collect(),
    }
}

/// Solves `lambda o u = r` for `u`, where `lambda` is a scaled point (its PSD
/// blocks are diagonal).
pub fn jordan_solve(lambda: &ConeVec, r: &ConeVec) -> ConeVec {
    ConeVec {
        lin: r.lin.component_div(&lambda.lin),
        blocks: lambda
            .blocks
            .iter()
            .zip(&r.blocks)
            .map(|(l, r)| match (l, r) {
                (Block::Soc(l), Block::Soc(r)) => {
                    let n = l.len();
                    let l0 = l[0];
                    let l1 = l.rows(1, n - 1);
                    let r1 = r.rows(1, n - 1);
                    let det = l0 * l0 - l1.norm_squared();
                    let u0 = (l0 * r[0] - l1.dot(&r1)) / det;
                    let mut out = DVector::zeros(n);
                    out[0] = u0;
                    for i in 1..n {
                        out[i] = (r[i] - u0 * l[i]) / l0;
                    }
                    Block::Soc(out)
                }
                (Block::Psd(l), Block::Psd(r)) => {
                    let n = l.nrows();
                    Block::Psd(DMatrix::from_fn(n, n, |i, j| {
                        2.0 * r[(i, j)] / (l[(i, i)] + l[(j, j)])
                    }))
                }
                _ => panic!("cone block kind mismatch"),
            })
            .collect(),
    }
}

/// Largest `alpha >= 0` (capped at `cap`) with `x + alpha dx` in the cone.
pub fn max_step(x: &ConeVec, dx: &ConeVec, cap: f64) -> f64 {
    let mut alpha = cap;
    for (v, d) in x.lin.iter().zip(dx.lin.iter()) {
        if *d < 0.0 {
            alpha = alpha.min(-v / d);
        }
    }
    for (b, db) in x.blocks.iter().zip(&dx.blocks) {
        alpha = alpha.min(match (b, db) {
            (Block::Soc(v), Block::Soc(d)) => soc_max_step(v, d),
            (Block::Psd(v), Block::Psd(d)) => psd_max_step(v, d),
            _ => panic!("cone block kind mismatch"),
        });
    }
    alpha.max(0.0)
}

fn soc_max_step(v: &DVector<f64>, d: &DVector<f64>) -> f64 {
    let vd = soc_jdet(v);
    if !(vd > 0.0) {
        return 0.0;
    }
    let a = soc_jdet(d);
    let b = 2.0 * (v[0] * d[0] - v.rows(1, v.len() - 1).dot(&d.rows(1, d.len() - 1)));
    let c = vd;
    // f(t) = a t^2 + b t + c, f(0) = c > 0; find the first positive root,
    // also requiring v0 + t d0 >= 0.
    let mut tmax = f64::INFINITY;
    if d[0] < 0.0 {
        tmax = -v[0] / d[0];
    }
    let root = if a.abs() <= 1e-300 {
        if b < 0.0 {
            -c / b
        } else {
            f64::INFINITY
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            // no real root: f keeps the sign of a, which must be positive
            // since f(0) > 0
            f64::INFINITY
        } else {
            let sq = disc.sqrt();
            let q = -0.5 * (b + b.signum() * sq);
            let (r1, r2) = (q / a, if q != 0.0 { c / q } else { f64::INFINITY });
            [r1, r2]
                .into_iter()
                .filter(|r| *r > 0.0)
                .fold(f64::INFINITY, f64::min)
        }
    };
    root.min(tmax)
}

fn psd_max_step(v: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
    let Some(ch) = v.clone().cholesky() else {
        return 0.0;
    };
    let l = ch.l();
    // M = -L^{-1} D L^{-T}
    let Some(linv) = l.clone().try_inverse() else {
        return 0.0;
    };
    let mut m = -(&linv * d * linv.transpose());
    m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let lmax = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lmax > 0.0 {
        1.0 / lmax
    } else {
        f64::INFINITY
    }
}

/// Smallest eigenvalue-like interiority measure, used for diagnostics.
pub fn min_interiority(x: &ConeVec) -> f64 {
    let mut m = x.lin.iter().cloned().fold(f64::INFINITY, f64::min);
    for b in &x.blocks {
        let v = match b {
            Block::Soc(v) => v[0] - v.rows(1, v.len() - 1).norm(),
            Block::Psd(v) => SymmetricEigen::new(v.clone())
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min),
        };
        m = m.min(v);
    }
    m
}

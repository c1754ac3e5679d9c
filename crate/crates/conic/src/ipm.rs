//! Infeasible-start primal-dual interior-point method with Nesterov-Todd
//! scaling and Mehrotra predictor-corrector steps.
//!
//! The modelling problem is compiled to the standard form
//!
//! ```text
//! minimize  <c, x>   subject to  A x = b,  x in K
//! ```
//!
//! where `K` is a product of the nonnegative orthant, second-order cones and
//! PSD cones. Each Newton step reduces to the `m x m` Schur complement
//! `A W^T W A^T`, which is small for the problems this crate targets.

use nalgebra::{DMatrix, DVector};

use crate::cone::{jordan, jordan_solve, max_step, Block, ConeKind, ConeVec, NtScaling};
use crate::problem::{ConicProblem, LinExpr, ScalarDomain};
use crate::{ConicSolution, KktResiduals, SolveStatus, SolverSettings};

/// A sparse-by-block row of `A`.
#[derive(Debug, Clone, Default)]
struct Row {
    lin: Vec<(usize, f64)>,
    blocks: Vec<(usize, Block)>,
}

impl Row {
    fn dot(&self, x: &ConeVec) -> f64 {
        let mut v = 0.0;
        for &(i, c) in &self.lin {
            v += c * x.lin[i];
        }
        for (b, coef) in &self.blocks {
            v += coef.dot(&x.blocks[*b]);
        }
        v
    }

    fn norm_squared(&self) -> f64 {
        self.lin.iter().map(|(_, c)| c * c).sum::<f64>()
            + self.blocks.iter().map(|(_, b)| b.norm_squared()).sum::<f64>()
    }

    fn scale(&mut self, s: f64) {
        for (_, c) in &mut self.lin {
            *c *= s;
        }
        for (_, b) in &mut self.blocks {
            b.scale(s);
        }
    }

    /// Adds `alpha * row` into the cone vector.
    fn add_to(&self, alpha: f64, out: &mut ConeVec) {
        for &(i, c) in &self.lin {
            out.lin[i] += alpha * c;
        }
        for (b, coef) in &self.blocks {
            out.blocks[*b].axpy(alpha, coef);
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum ScalarMap {
    Direct(usize),
    Split(usize, usize),
}

/// Standard-form data plus the maps back to the modelling variables.
#[derive(Debug, Clone)]
pub(crate) struct StdForm {
    n_lin: usize,
    kinds: Vec<ConeKind>,
    rows: Vec<Row>,
    b: DVector<f64>,
    c: ConeVec,
    c_scale: f64,
    scalar_map: Vec<ScalarMap>,
    soc_offset: usize,
    psd_offset: usize,
    /// Set when a zero row has a nonzero right-hand side.
    trivially_infeasible: bool,
}

impl StdForm {
    pub(crate) fn compile(p: &ConicProblem) -> StdForm {
        let mut n_lin = 0;
        let mut scalar_map = Vec::with_capacity(p.scalars.len());
        for d in &p.scalars {
            match d {
                ScalarDomain::NonNeg => {
                    scalar_map.push(ScalarMap::Direct(n_lin));
                    n_lin += 1;
                }
                ScalarDomain::Free => {
                    scalar_map.push(ScalarMap::Split(n_lin, n_lin + 1));
                    n_lin += 2;
                }
            }
        }
        let slack_offset = n_lin;
        n_lin += p.les.len();

        let mut kinds: Vec<ConeKind> = p.soc_sizes.iter().map(|&n| ConeKind::Soc(n)).collect();
        let aux_offset = kinds.len();
        for s in &p.socs {
            kinds.push(ConeKind::Soc(s.u.len() + 1));
        }
        let psd_offset = kinds.len();
        kinds.extend(p.psd_sizes.iter().map(|&n| ConeKind::Psd(n)));

        let to_row = |e: &LinExpr| -> Row {
            let mut row = Row::default();
            for &(i, c) in &e.scalars {
                match scalar_map[i] {
                    ScalarMap::Direct(j) => row.lin.push((j, c)),
                    ScalarMap::Split(a, b) => {
                        row.lin.push((a, c));
                        row.lin.push((b, -c));
                    }
                }
            }
            for &(b, i, c) in &e.soc {
                match row.blocks.iter_mut().find(|(bb, _)| *bb == b) {
                    Some((_, Block::Soc(v))) => v[i] += c,
                    _ => {
                        let mut v = DVector::zeros(p.soc_sizes[b]);
                        v[i] = c;
                        row.blocks.push((b, Block::Soc(v)));
                    }
                }
            }
            for (b, m) in &e.psd {
                let sym = (m + m.transpose()) * 0.5;
                let idx = psd_offset + b;
                match row.blocks.iter_mut().find(|(bb, _)| *bb == idx) {
                    Some((_, Block::Psd(acc))) => *acc += sym,
                    _ => row.blocks.push((idx, Block::Psd(sym))),
                }
            }
            merge_lin(&mut row.lin);
            row.blocks.sort_by_key(|(b, _)| *b);
            row
        };

        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for (e, r) in &p.eqs {
            rows.push(to_row(e));
            rhs.push(r - e.constant);
        }
        for (k, (e, r)) in p.les.iter().enumerate() {
            let mut row = to_row(e);
            row.lin.push((slack_offset + k, 1.0));
            rows.push(row);
            rhs.push(r - e.constant);
        }
        for (k, s) in p.socs.iter().enumerate() {
            let cone = aux_offset + k;
            let dim = s.u.len() + 1;
            for (i, e) in std::iter::once(&s.t).chain(s.u.iter()).enumerate() {
                let mut row = Row::default();
                let mut neg = LinExpr::new();
                neg.add_expr(e, -1.0);
                let r = to_row(&neg);
                row.lin = r.lin;
                row.blocks = r.blocks;
                let mut v = DVector::zeros(dim);
                v[i] = 1.0;
                row.blocks.push((cone, Block::Soc(v)));
                row.blocks.sort_by_key(|(b, _)| *b);
                rows.push(row);
                rhs.push(e.constant);
            }
        }

        // Row equilibration; drop empty rows.
        let mut trivially_infeasible = false;
        let mut kept_rows = Vec::with_capacity(rows.len());
        let mut kept_rhs = Vec::with_capacity(rows.len());
        for (mut row, r) in rows.into_iter().zip(rhs) {
            let n = row.norm_squared().sqrt();
            if n <= 1e-300 {
                if r.abs() > 1e-12 {
                    trivially_infeasible = true;
                }
                continue;
            }
            row.scale(1.0 / n);
            kept_rows.push(row);
            kept_rhs.push(r / n);
        }

        // Objective: maximise => minimise the negation.
        let mut c = ConeVec::zeros(n_lin, &kinds);
        let obj_row = to_row(&p.objective);
        obj_row.add_to(-1.0, &mut c);
        let cn = c.norm();
        let c_scale = if cn > 0.0 { cn } else { 1.0 };
        c.scale(1.0 / c_scale);

        StdForm {
            n_lin,
            kinds,
            rows: kept_rows,
            b: DVector::from_vec(kept_rhs),
            c,
            c_scale,
            scalar_map,
            soc_offset: 0,
            psd_offset,
            trivially_infeasible,
        }
    }

    fn a_mul(&self, x: &ConeVec) -> DVector<f64> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.dot(x)))
    }

    fn at_mul(&self, y: &DVector<f64>) -> ConeVec {
        let mut out = ConeVec::zeros(self.n_lin, &self.kinds);
        for (r, &yi) in self.rows.iter().zip(y.iter()) {
            if yi != 0.0 {
                r.add_to(yi, &mut out);
            }
        }
        out
    }

    fn degree(&self) -> f64 {
        (self.n_lin + self.kinds.iter().map(|k| k.degree()).sum::<usize>()) as f64
    }

    /// Schur complement `A G A^T` with `G = W^T W`.
    fn schur(&self, scal: &NtScaling) -> DMatrix<f64> {
        let m = self.rows.len();
        let mut mat = DMatrix::zeros(m, m);
        // orthant part, column-wise
        let mut by_lin: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n_lin];
        let mut by_block: Vec<Vec<usize>> = vec![Vec::new(); self.kinds.len()];
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, c) in &r.lin {
                by_lin[j].push((i, c));
            }
            for (b, _) in &r.blocks {
                by_block[*b].push(i);
            }
        }
        for (j, entries) in by_lin.iter().enumerate() {
            if entries.is_empty() {
                continue;
            }
            let g = scal.g_lin(j);
            for &(i1, c1) in entries {
                for &(i2, c2) in entries {
                    mat[(i1, i2)] += g * c1 * c2;
                }
            }
        }
        for (b, rows) in by_block.iter().enumerate() {
            if rows.is_empty() {
                continue;
            }
            let coefs: Vec<&Block> = rows
                .iter()
                .map(|&i| {
                    &self.rows[i]
                        .blocks
                        .iter()
                        .find(|(bb, _)| *bb == b)
                        .expect("row listed for block")
                        .1
                })
                .collect();
            let scaled: Vec<Block> = coefs.iter().map(|c| scal.apply_g_block(b, c)).collect();
            for (p, &i1) in rows.iter().enumerate() {
                for (q, &i2) in rows.iter().enumerate().skip(p) {
                    let v = coefs[p].dot(&scaled[q]);
                    mat[(i1, i2)] += v;
                    if p != q {
                        mat[(i2, i1)] += v;
                    }
                }
            }
        }
        mat
    }

    fn apply_g(&self, scal: &NtScaling, v: &ConeVec) -> ConeVec {
        ConeVec {
            lin: DVector::from_iterator(
                self.n_lin,
                v.lin.iter().enumerate().map(|(i, x)| scal.g_lin(i) * x),
            ),
            blocks: v
                .blocks
                .iter()
                .enumerate()
                .map(|(b, blk)| scal.apply_g_block(b, blk))
                .collect(),
        }
    }
}

fn merge_lin(lin: &mut Vec<(usize, f64)>) {
    lin.sort_by_key(|(i, _)| *i);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(lin.len());
    for &(i, c) in lin.iter() {
        match out.last_mut() {
            Some((j, acc)) if *j == i => *acc += c,
            _ => out.push((i, c)),
        }
    }
    out.retain(|(_, c)| *c != 0.0);
    *lin = out;
}

/// Factorised Schur complement.
enum Factor {
    Empty,
    Chol(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl Factor {
    fn new(mut m: DMatrix<f64>) -> Option<Factor> {
        let n = m.nrows();
        if n == 0 {
            return None;
        }
        let dmax = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
        if let Some(c) = m.clone().cholesky() {
            return Some(Factor::Chol(c));
        }
        let mut reg = 1e-14 * dmax;
        for _ in 0..6 {
            for i in 0..n {
                m[(i, i)] += reg;
            }
            if let Some(c) = m.clone().cholesky() {
                return Some(Factor::Chol(c));
            }
            reg *= 100.0;
        }
        let lu = m.lu();
        if lu.is_invertible() {
            Some(Factor::Lu(lu))
        } else {
            None
        }
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match self {
            Factor::Empty => DVector::zeros(0),
            Factor::Chol(c) => c.solve(rhs),
            Factor::Lu(l) => l.solve(rhs).unwrap_or_else(|| DVector::zeros(rhs.len())),
        }
    }
}

struct Direction {
    dx: ConeVec,
    dy: DVector<f64>,
    dz: ConeVec,
}

fn newton(
    sf: &StdForm,
    scal: &NtScaling,
    fac: &Factor,
    rp: &DVector<f64>,
    rd: &ConeVec,
    rc: &ConeVec,
) -> Direction {
    let u = jordan_solve(&scal.lambda, rc);
    let wtu = scal.apply_wt(&u);
    let g_rd = sf.apply_g(scal, rd);
    let rhs = rp - sf.a_mul(&wtu) + sf.a_mul(&g_rd);
    let dy = fac.solve(&rhs);
    let mut dz = rd.clone();
    dz.axpy(-1.0, &sf.at_mul(&dy));
    let mut dx = wtu;
    dx.axpy(-1.0, &sf.apply_g(scal, &dz));
    Direction { dx, dy, dz }
}

pub(crate) struct StdResult {
    pub status: SolveStatus,
    pub x: ConeVec,
    pub y: DVector<f64>,
    pub residuals: KktResiduals,
    pub iterations: usize,
    pub dobj: f64,
}

pub(crate) fn solve_std(sf: &StdForm, settings: &SolverSettings) -> StdResult {
    let m = sf.rows.len();
    let nu = sf.degree();
    let tol = settings.tol;

    let bmax = sf.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let xi = 1.0 + bmax;
    let zeta = 1.0 + sf.c.norm();
    let mut x = ConeVec::identity(sf.n_lin, &sf.kinds);
    x.scale(xi);
    let mut z = ConeVec::identity(sf.n_lin, &sf.kinds);
    z.scale(zeta);
    let mut y = DVector::zeros(m);

    let bnorm = sf.b.norm();
    let cnorm = sf.c.norm();
    let mut status = SolveStatus::MaxIters;
    let mut residuals = KktResiduals::default();
    let mut iterations = 0;
    let mut best: Option<(f64, ConeVec, DVector<f64>, KktResiduals)> = None;

    if sf.trivially_infeasible {
        return StdResult {
            status: SolveStatus::Infeasible,
            x,
            y,
            residuals,
            iterations: 0,
            dobj: f64::NAN,
        };
    }

    for it in 0..=settings.max_iters {
        iterations = it;
        let rp = &sf.b - sf.a_mul(&x);
        let mut rd = sf.c.clone();
        rd.axpy(-1.0, &sf.at_mul(&y));
        rd.axpy(-1.0, &z);
        let pobj = sf.c.dot(&x);
        let dobj = sf.b.dot(&y);
        let gap = x.dot(&z);
        let pres = rp.norm() / (1.0 + bnorm);
        let dres = rd.norm() / (1.0 + cnorm);
        let rel_gap = (pobj - dobj).abs().max(gap) / (1.0 + pobj.abs());
        residuals = KktResiduals { primal: pres, dual: dres, gap: rel_gap };

        if pres <= tol && dres <= tol && rel_gap <= tol {
            status = SolveStatus::Optimal;
            break;
        }
        let merit = pres.max(dres).max(rel_gap);
        if best.as_ref().is_none_or(|(b, ..)| merit < *b) {
            best = Some((merit, x.clone(), y.clone(), residuals));
        }

        // Infeasibility certificates.
        if it > 3 {
            if dobj > 0.0 {
                let mut aty_z = sf.at_mul(&y);
                aty_z.axpy(1.0, &z);
                if aty_z.norm() <= settings.infeasibility_tol * dobj {
                    status = SolveStatus::Infeasible;
                    break;
                }
            }
            if pobj < 0.0 {
                let ax = sf.a_mul(&x);
                if ax.norm() <= settings.infeasibility_tol * (-pobj) {
                    status = SolveStatus::Unbounded;
                    break;
                }
            }
        }
        if it == settings.max_iters {
            break;
        }

        let Ok(scal) = NtScaling::new(&x, &z) else {
            break;
        };
        let fac = if m == 0 {
            Factor::Empty
        } else {
            match Factor::new(sf.schur(&scal)) {
                Some(f) => f,
                None => break,
            }
        };
        let mu = gap / nu;

        // predictor
        let mut rc = jordan(&scal.lambda, &scal.lambda);
        rc.scale(-1.0);
        let aff = newton(sf, &scal, &fac, &rp, &rd, &rc);
        let ap = max_step(&x, &aff.dx, 1.0);
        let ad = max_step(&z, &aff.dz, 1.0);
        let a_aff = ap.min(ad);
        let mut x_aff = x.clone();
        x_aff.axpy(a_aff, &aff.dx);
        let mut z_aff = z.clone();
        z_aff.axpy(a_aff, &aff.dz);
        let mu_aff = x_aff.dot(&z_aff) / nu;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        let dxs = scal.apply_winv_t(&aff.dx);
        let dzs = scal.apply_w(&aff.dz);
        let mut rc = ConeVec::identity(sf.n_lin, &sf.kinds);
        rc.scale(sigma * mu);
        rc.axpy(-1.0, &jordan(&scal.lambda, &scal.lambda));
        rc.axpy(-1.0, &jordan(&dxs, &dzs));
        let dir = newton(sf, &scal, &fac, &rp, &rd, &rc);

        let ap = max_step(&x, &dir.dx, f64::INFINITY);
        let ad = max_step(&z, &dir.dz, f64::INFINITY);
        let alpha = (settings.step_fraction * ap.min(ad)).min(1.0);
        if !(alpha > 1e-14) {
            break;
        }
        x.axpy(alpha, &dir.dx);
        z.axpy(alpha, &dir.dz);
        y.axpy(alpha, &dir.dy, 1.0);
    }

    if status == SolveStatus::MaxIters {
        if let Some((_, bx, by, br)) = best {
            if br.primal.max(br.dual).max(br.gap)
                < residuals.primal.max(residuals.dual).max(residuals.gap)
            {
                x = bx;
                y = by;
                residuals = br;
            }
        }
    }
    let dobj = sf.b.dot(&y);
    StdResult { status, x, y, residuals, iterations, dobj }
}

/// Maps a standard-form result back to the modelling variables.
pub(crate) fn recover(p: &ConicProblem, sf: &StdForm, r: StdResult) -> ConicSolution {
    let scalars = sf
        .scalar_map
        .iter()
        .map(|m| match *m {
            ScalarMap::Direct(i) => r.x.lin[i],
            ScalarMap::Split(a, b) => r.x.lin[a] - r.x.lin[b],
        })
        .collect();
    let soc = (0..p.soc_sizes.len())
        .map(|i| match &r.x.blocks[sf.soc_offset + i] {
            Block::Soc(v) => v.clone(),
            Block::Psd(_) => unreachable!(),
        })
        .collect();
    let psd = (0..p.psd_sizes.len())
        .map(|i| match &r.x.blocks[sf.psd_offset + i] {
            Block::Psd(m) => (m + m.transpose()) * 0.5,
            Block::Soc(_) => unreachable!(),
        })
        .collect();
    let mut sol = ConicSolution {
        status: r.status,
        scalars,
        soc,
        psd,
        objective: 0.0,
        dual_bound: f64::NAN,
        residuals: r.residuals,
        iterations: r.iterations,
        dual: r.y.iter().cloned().collect(),
    };
    sol.objective = p.objective.eval(&sol);
    // For the maximisation: objective = -c_scale * pobj + const,
    // upper bound = -c_scale * dobj + const.
    sol.dual_bound = -sf.c_scale * r.dobj + p.objective.constant;
    sol
}

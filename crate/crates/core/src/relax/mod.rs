//! The semidefinite relaxation on the reduced face, in two forms.
//!
//! Both forms share the least-squares objective
//! `f(x, y) = 1/2 ||W o K(Y(x, y)) - Ebar||_F^2` where `Y(x, y)` places
//! `U Y U^T` in the sensor block and `U X A^T` in the sensor-anchor blocks,
//! with `x = sqrt(2) vec(X)` and `y = svec(Y)`. The quadratic form keeps
//! `Y - X X^T` positive semidefinite directly; the linearized form uses
//! `[[Z_11, X^T], [X, Y]]` with the equality `Z_11 = I` carried as residual
//! equations.

pub mod linearized;
pub mod quadratic;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::edm::{self, Pattern};
use crate::error::{Error, Result};
use crate::model::{derive_constants, PartialEdm};
use crate::reduce::Reduction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormKind {
    #[default]
    Quadratic,
    Linearized,
}

impl std::str::FromStr for FormKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" => Ok(Self::Quadratic),
            "linearized" => Ok(Self::Linearized),
            other => Err(Error::InvalidParameter(format!("unknown formulation '{other}'"))),
        }
    }
}

impl std::fmt::Display for FormKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Quadratic => "quadratic",
            Self::Linearized => "linearized",
        })
    }
}

/// Lengths of the blocks of a primal-dual point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nu: usize,
    pub nl: usize,
    /// `svec` of the top-left block of `Z_s` (linearized only).
    pub nz: usize,
    /// `svec` of the top-left block of the dual matrix (linearized only).
    pub nw: usize,
}

impl Dims {
    pub fn total(&self) -> usize {
        self.nx + self.ny + self.nu + self.nl + self.nz + self.nw
    }
}

/// A primal-dual point, or a direction in the same space.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub lu: DVector<f64>,
    pub ll: DVector<f64>,
    pub z: DVector<f64>,
    pub w: DVector<f64>,
}

impl Point {
    pub fn zeros(d: &Dims) -> Self {
        Self {
            x: DVector::zeros(d.nx),
            y: DVector::zeros(d.ny),
            lu: DVector::zeros(d.nu),
            ll: DVector::zeros(d.nl),
            z: DVector::zeros(d.nz),
            w: DVector::zeros(d.nw),
        }
    }

    pub fn dims(&self) -> Dims {
        Dims {
            nx: self.x.len(),
            ny: self.y.len(),
            nu: self.lu.len(),
            nl: self.ll.len(),
            nz: self.z.len(),
            nw: self.w.len(),
        }
    }

    fn parts(&self) -> [&DVector<f64>; 6] {
        [&self.x, &self.y, &self.lu, &self.ll, &self.z, &self.w]
    }

    pub fn flatten(&self) -> DVector<f64> {
        let parts = self.parts();
        let len = parts.iter().map(|p| p.len()).sum();
        DVector::from_iterator(len, parts.iter().flat_map(|p| p.iter().copied()))
    }

    pub fn from_flat(d: &Dims, v: &DVector<f64>) -> Self {
        debug_assert_eq!(v.len(), d.total());
        let mut off = 0;
        let mut take = |k: usize| {
            let out = v.rows(off, k).into_owned();
            off += k;
            out
        };
        Self { x: take(d.nx), y: take(d.ny), lu: take(d.nu), ll: take(d.nl), z: take(d.nz), w: take(d.nw) }
    }

    /// `self + alpha * d`.
    pub fn step(&self, alpha: f64, d: &Point) -> Point {
        Point {
            x: &self.x + &d.x * alpha,
            y: &self.y + &d.y * alpha,
            lu: &self.lu + &d.lu * alpha,
            ll: &self.ll + &d.ll * alpha,
            z: &self.z + &d.z * alpha,
            w: &self.w + &d.w * alpha,
        }
    }

    pub fn dot(&self, other: &Point) -> f64 {
        self.parts().iter().zip(other.parts()).map(|(a, b)| a.dot(b)).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

/// Centering targets for the three complementarity blocks.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mu {
    pub u: f64,
    pub l: f64,
    pub c: f64,
}

impl Mu {
    pub const ZERO: Mu = Mu { u: 0.0, l: 0.0, c: 0.0 };
}

/// Blocks of the perturbed optimality system. `rc` is square and in general
/// not symmetric; `rs` is the stationarity residual in `x` (quadratic form) or
/// the residual of `Z_11 = I` (linearized form).
#[derive(Debug, Clone, PartialEq)]
pub struct KktResidual {
    pub ru: DVector<f64>,
    pub rl: DVector<f64>,
    pub rc: DMatrix<f64>,
    pub rs: DVector<f64>,
}

impl KktResidual {
    pub fn len(&self) -> usize {
        self.ru.len() + self.rl.len() + self.rc.len() + self.rs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flatten(&self) -> DVector<f64> {
        let it = self
            .ru
            .iter()
            .chain(self.rl.iter())
            .chain(self.rc.iter())
            .chain(self.rs.iter())
            .copied();
        DVector::from_iterator(self.len(), it)
    }

    /// Rebuilds a residual with the block sizes of `shape`.
    pub fn from_flat(shape: &KktResidual, v: &DVector<f64>) -> Self {
        let (a, b, c) = (shape.ru.len(), shape.rl.len(), shape.rc.len());
        let k = shape.rc.nrows();
        Self {
            ru: v.rows(0, a).into_owned(),
            rl: v.rows(a, b).into_owned(),
            rc: DMatrix::from_column_slice(k, k, v.rows(a + b, c).as_slice()),
            rs: v.rows(a + b + c, shape.rs.len()).into_owned(),
        }
    }

    pub fn dot(&self, other: &KktResidual) -> f64 {
        self.ru.dot(&other.ru) + self.rl.dot(&other.rl) + edm::inner(&self.rc, &other.rc) + self.rs.dot(&other.rs)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn block_norms(&self) -> [f64; 4] {
        [self.ru.norm(), self.rl.norm(), self.rc.norm(), self.rs.norm()]
    }
}

/// Quantities shared by residual and Jacobian evaluations at one point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    /// `K(Y(x, y))`.
    pub ky: DMatrix<f64>,
    /// `W o K(Y(x, y)) - Ebar`.
    pub resid: DMatrix<f64>,
    pub f: f64,
    pub su: DVector<f64>,
    pub sl: DVector<f64>,
    /// `K^*(W o resid + sMat_u(lambda_u) - sMat_l(lambda_l))`.
    pub g: DMatrix<f64>,
    /// `U^T G_11 U`, the eliminated multiplier of the `Y` block.
    pub lam: DMatrix<f64>,
    /// `sqrt(2) vec(U^T G_12 A)`.
    pub gx: DVector<f64>,
    /// `Mat(x)`, unscaled, `n_red x r`.
    pub xm: DMatrix<f64>,
    /// Primal cone matrix: `Z` or `Z_s`.
    pub zc: DMatrix<f64>,
    /// Dual cone matrix: `Lambda` or `Lambda_S`.
    pub lc: DMatrix<f64>,
}

/// A relaxation instance over a fixed face.
#[derive(Debug, Clone)]
pub struct Formulation {
    pub kind: FormKind,
    pub n: usize,
    pub m: usize,
    pub r: usize,
    /// Order of the reduced sensor block.
    pub nr: usize,
    /// Sensor part of the face basis, `n x n_red`.
    pub u: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub w2: DMatrix<f64>,
    pub ebar: DMatrix<f64>,
    pub hu: Pattern,
    pub hl: Pattern,
    pub ubar: DVector<f64>,
    pub lbar: DVector<f64>,
}

impl Formulation {
    /// `pe` must already be in the node order of `u` (sensors first, anchors
    /// last), and `a` are the centered anchors.
    pub fn new(kind: FormKind, pe: &PartialEdm, u: DMatrix<f64>, a: DMatrix<f64>) -> Result<Self> {
        let (n, m, r) = (pe.n, pe.m, a.ncols());
        if a.nrows() != m || u.nrows() != n {
            return Err(Error::Dimension(format!(
                "partial EDM has n={n}, m={m}; basis is {}x{}, anchors {}x{}",
                u.nrows(),
                u.ncols(),
                a.nrows(),
                a.ncols()
            )));
        }
        let c = derive_constants(pe, &a);
        Ok(Self {
            kind,
            n,
            m,
            r,
            nr: u.ncols(),
            w2: pe.w.component_mul(&pe.w),
            w: pe.w.clone(),
            ebar: c.ebar,
            ubar: pe.hu.svec(&c.ubar),
            lbar: pe.hl.svec(&c.lbar),
            hu: pe.hu.clone(),
            hl: pe.hl.clone(),
            u,
            a,
        })
    }

    pub fn from_reduction(kind: FormKind, red: &Reduction, a: &DMatrix<f64>) -> Result<Self> {
        Self::new(kind, &red.pe, red.face.sensor_basis(), a.clone())
    }

    pub fn order(&self) -> usize {
        self.n + self.m
    }

    pub fn dims(&self) -> Dims {
        let t = edm::tri(self.r);
        let lin = self.kind == FormKind::Linearized;
        Dims {
            nx: self.nr * self.r,
            ny: edm::tri(self.nr),
            nu: self.hu.nz(),
            nl: self.hl.nz(),
            nz: if lin { t } else { 0 },
            nw: if lin { t } else { 0 },
        }
    }

    /// Norm of the problem data, used to scale absolute tolerances.
    pub fn data_norm(&self) -> f64 {
        (self.ebar.norm_squared() + self.ubar.norm_squared() + self.lbar.norm_squared()).sqrt()
    }

    pub fn mat_x(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.nr, self.r, x.as_slice())
    }

    /// `Y(x, y)` of order `n + m`; the anchor block is zero.
    pub fn y_op(&self, x: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n;
        let mut out = DMatrix::zeros(self.order(), self.order());
        let yy = edm::smat_n(y, self.nr);
        out.view_mut((0, 0), (n, n)).copy_from(&(&self.u * yy * self.u.transpose()));
        let xm = self.mat_x(x) / std::f64::consts::SQRT_2;
        let sa = &self.u * xm * self.a.transpose();
        out.view_mut((0, n), (n, self.m)).copy_from(&sa);
        out.view_mut((n, 0), (self.m, n)).copy_from(&sa.transpose());
        out
    }

    /// Adjoint of [`Formulation::y_op`] on symmetric arguments.
    pub fn y_adj(&self, s: &DMatrix<f64>) -> (DVector<f64>, DVector<f64>) {
        let n = self.n;
        let s11 = s.view((0, 0), (n, n));
        let s12 = s.view((0, n), (n, self.m));
        let gx = self.u.transpose() * s12 * &self.a * std::f64::consts::SQRT_2;
        let gy = self.u.transpose() * s11 * &self.u;
        (edm::vec_m(&gx), edm::svec(&gy))
    }

    /// Full Gram matrix `sBlk_2(AA^T) + Y(x, y)` in this formulation's node order.
    pub fn gram(&self, x: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
        let mut g = self.y_op(x, y);
        let n = self.n;
        let aat = &self.a * self.a.transpose();
        g.view_mut((n, n), (self.m, self.m)).copy_from(&aat);
        g
    }

    pub fn objective(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let ky = edm::k_op(&self.y_op(x, y));
        0.5 * (self.w.component_mul(&ky) - &self.ebar).norm_squared()
    }

    /// The same objective evaluated directly from the full Gram matrix:
    /// `1/2 ||W o (K(Ybar) - E)||^2`.
    pub fn objective_from_gram(&self, ybar: &DMatrix<f64>, e: &DMatrix<f64>) -> f64 {
        0.5 * self.w.component_mul(&(edm::k_op(ybar) - e)).norm_squared()
    }

    /// Bound slacks `s_u = svec_u(Ubar - K(Y))`, `s_l = svec_l(K(Y) - Lbar)`.
    pub fn bound_slacks(&self, ky: &DMatrix<f64>) -> (DVector<f64>, DVector<f64>) {
        (&self.ubar - self.hu.svec(ky), self.hl.svec(ky) - &self.lbar)
    }

    /// `K^*(W o wr + sMat_u(lu) - sMat_l(ll))`, with `wr` the already
    /// weighted residual.
    fn g_of(&self, wr: &DMatrix<f64>, lu: &DVector<f64>, ll: &DVector<f64>) -> DMatrix<f64> {
        let mut s = wr.clone();
        if self.hu.nz() > 0 {
            s += self.hu.smat(lu).expect("pattern length");
        }
        if self.hl.nz() > 0 {
            s -= self.hl.smat(ll).expect("pattern length");
        }
        edm::k_adj(&s)
    }

    /// The eliminated multiplier `Lambda` for the `Y` block.
    pub fn lambda_from_point(&self, x: &DVector<f64>, y: &DVector<f64>, lu: &DVector<f64>, ll: &DVector<f64>) -> DMatrix<f64> {
        let ky = edm::k_op(&self.y_op(x, y));
        let resid = self.w.component_mul(&ky) - &self.ebar;
        let g = self.g_of(&self.w.component_mul(&resid), lu, ll);
        edm::smat_n(&self.y_adj(&g).1, self.nr)
    }

    /// Stationarity in `x` with `Lambda` eliminated:
    /// `sqrt(2) vec(U^T G_12 A) + vec(Lambda Mat(x))`.
    pub fn dual_residual_ls(&self, x: &DVector<f64>, y: &DVector<f64>, lu: &DVector<f64>, ll: &DVector<f64>) -> DVector<f64> {
        let ky = edm::k_op(&self.y_op(x, y));
        let resid = self.w.component_mul(&ky) - &self.ebar;
        let g = self.g_of(&self.w.component_mul(&resid), lu, ll);
        let (gx, gy) = self.y_adj(&g);
        let lam = edm::smat_n(&gy, self.nr);
        gx + edm::vec_m(&(lam * self.mat_x(x)))
    }

    pub fn evaluate(&self, p: &Point) -> Evaluation {
        let ky = edm::k_op(&self.y_op(&p.x, &p.y));
        let resid = self.w.component_mul(&ky) - &self.ebar;
        let f = 0.5 * resid.norm_squared();
        let (su, sl) = self.bound_slacks(&ky);
        let g = self.g_of(&self.w.component_mul(&resid), &p.lu, &p.ll);
        let (gx, gy) = self.y_adj(&g);
        let lam = edm::smat_n(&gy, self.nr);
        let xm = self.mat_x(&p.x);
        let yy = edm::smat_n(&p.y, self.nr);
        let (zc, lc) = match self.kind {
            FormKind::Quadratic => (&yy - &xm * xm.transpose() * 0.5, lam.clone()),
            FormKind::Linearized => {
                let x_half = &xm / std::f64::consts::SQRT_2;
                let zs = stack_sym(&edm::smat_n(&p.z, self.r), &x_half, &yy);
                let l21 = self.mat_x(&gx) / std::f64::consts::SQRT_2;
                let ls = stack_sym(&edm::smat_n(&p.w, self.r), &l21, &lam);
                (zs, ls)
            }
        };
        Evaluation { ky, resid, f, su, sl, g, lam, gx, xm, zc, lc }
    }

    /// Change in `G` along a direction: returns `(dK, dG)`.
    fn d_g(&self, d: &Point) -> (DMatrix<f64>, DMatrix<f64>) {
        let dk = edm::k_op(&self.y_op(&d.x, &d.y));
        let dg = self.g_of(&self.w2.component_mul(&dk), &d.lu, &d.ll);
        (dk, dg)
    }

    /// Pulls the adjoints accumulated on `K(Y)` and on `G` back to the
    /// primal-dual space, adding into `out`.
    fn pull_back(&self, mut dk_adj: DMatrix<f64>, g_adj: &DMatrix<f64>, out: &mut Point) {
        let q = edm::k_op(g_adj);
        dk_adj += self.w2.component_mul(&q);
        if self.hu.nz() > 0 {
            out.lu += self.hu.svec(&q);
        }
        if self.hl.nz() > 0 {
            out.ll -= self.hl.svec(&q);
        }
        let (ax, ay) = self.y_adj(&edm::k_adj(&dk_adj));
        out.x += ax;
        out.y += ay;
    }

    /// Adds the bound-complementarity adjoint contributions of `(w1, w2)`.
    fn bound_adjoint(&self, ev: &Evaluation, p: &Point, w1: &DVector<f64>, w2: &DVector<f64>, out: &mut Point) -> DMatrix<f64> {
        let mut dk_adj = DMatrix::zeros(self.order(), self.order());
        if self.hu.nz() > 0 {
            out.lu += ev.su.component_mul(w1);
            dk_adj -= self.hu.smat(&p.lu.component_mul(w1)).expect("pattern length");
        }
        if self.hl.nz() > 0 {
            out.ll += ev.sl.component_mul(w2);
            dk_adj += self.hl.smat(&p.ll.component_mul(w2)).expect("pattern length");
        }
        dk_adj
    }

    /// Bound-complementarity blocks of the Jacobian image.
    fn bound_jacobian(&self, ev: &Evaluation, p: &Point, d: &Point, dk: &DMatrix<f64>) -> (DVector<f64>, DVector<f64>) {
        let dsu = -self.hu.svec(dk);
        let dsl = self.hl.svec(dk);
        (
            d.lu.component_mul(&ev.su) + p.lu.component_mul(&dsu),
            d.ll.component_mul(&ev.sl) + p.ll.component_mul(&dsl),
        )
    }

    pub fn kkt_residual(&self, p: &Point, mu: Mu) -> KktResidual {
        let ev = self.evaluate(p);
        self.kkt_residual_at(&ev, p, mu)
    }

    pub fn kkt_residual_at(&self, ev: &Evaluation, p: &Point, mu: Mu) -> KktResidual {
        match self.kind {
            FormKind::Quadratic => quadratic::residual(self, ev, p, mu),
            FormKind::Linearized => linearized::residual(self, ev, p, mu),
        }
    }

    pub fn apply_jacobian(&self, ev: &Evaluation, p: &Point, d: &Point) -> KktResidual {
        match self.kind {
            FormKind::Quadratic => quadratic::jacobian(self, ev, p, d),
            FormKind::Linearized => linearized::jacobian(self, ev, p, d),
        }
    }

    pub fn apply_jacobian_adjoint(&self, ev: &Evaluation, p: &Point, w: &KktResidual) -> Point {
        match self.kind {
            FormKind::Quadratic => quadratic::jacobian_adjoint(self, ev, p, w),
            FormKind::Linearized => linearized::jacobian_adjoint(self, ev, p, w),
        }
    }

    /// Sum of the complementarity products `lambda_u.s_u + lambda_l.s_l +
    /// |<Lambda, Z>|`.
    pub fn complementarity(&self, ev: &Evaluation, p: &Point) -> (f64, f64, f64) {
        (p.lu.dot(&ev.su), p.ll.dot(&ev.sl), edm::inner(&ev.lc, &ev.zc))
    }

    pub fn relative_gap(&self, ev: &Evaluation, p: &Point) -> f64 {
        let (cu, cl, cc) = self.complementarity(ev, p);
        (cu + cl + cc.abs()) / (1.0 + ev.f.abs())
    }
}

/// `[[a, b^T], [b, c]]`.
pub(crate) fn stack_sym(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, q) = (a.nrows(), c.nrows());
    let mut out = DMatrix::zeros(p + q, p + q);
    out.view_mut((0, 0), (p, p)).copy_from(a);
    out.view_mut((p, 0), (q, p)).copy_from(b);
    out.view_mut((0, p), (p, q)).copy_from(&b.transpose());
    out.view_mut((p, p), (q, q)).copy_from(c);
    out
}

/// Solves `A X^T = Ybar_21` for `X` in the least-squares sense. Fails when
/// the residual exceeds `1e-8 ||Ybar_21||`.
pub fn recover_x_from_gram(ybar: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (x, resid) = x_from_gram(ybar, a)?;
    let y21 = ybar.view((ybar.nrows() - a.nrows(), 0), (a.nrows(), ybar.nrows() - a.nrows()));
    if resid > 1e-8 * y21.norm().max(f64::MIN_POSITIVE) && resid > 1e-14 {
        return Err(Error::Numerical(format!(
            "anchor-sensor block is inconsistent with the anchors (residual {resid:.3e})"
        )));
    }
    Ok(x)
}

/// `X = Ybar_21^T A (A^T A)^{-1}` and the residual `||A X^T - Ybar_21||_F`.
pub fn x_from_gram(ybar: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let m = a.nrows();
    let total = ybar.nrows();
    if total <= m || !ybar.is_square() {
        return Err(Error::Dimension(format!("Gram matrix of order {total} with {m} anchors")));
    }
    let n = total - m;
    let y21 = ybar.view((n, 0), (m, n)).into_owned();
    let ata = a.transpose() * a;
    let chol = ata
        .cholesky()
        .ok_or(Error::RankDeficientAnchors { smallest: 0.0, largest: 0.0 })?;
    // X^T = (A^T A)^{-1} A^T Ybar_21
    let xt = chol.solve(&(a.transpose() * &y21));
    let resid = (a * &xt - &y21).norm();
    Ok((xt.transpose(), resid))
}

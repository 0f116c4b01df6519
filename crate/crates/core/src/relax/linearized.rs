//! Residual, Jacobian and adjoint for the form with the linear matrix
//! constraint `Z_s = [[Z_11, X^T], [X, Y]] >= 0` and `Z_11 = I`.
//!
//! The dual matrix is `Lambda_S = [[Omega, Lambda_21^T], [Lambda_21, Lambda]]`:
//! stationarity in `x` and `y` fixes `Lambda_21 = Mat(g_x)/sqrt(2)` and
//! `Lambda = U^T G_11 U`, stationarity in `Z_11` is absorbed by the free
//! multiplier of `Z_11 = I`, so `Omega` is a free variable. The blocks are the
//! two bound complementarities, `Lambda_S Z_s - mu_c I` and
//! `svec(Z_11) - svec(I)`.

use nalgebra::{DMatrix, DVector};

use super::{stack_sym, Evaluation, Formulation, KktResidual, Mu, Point};
use crate::edm::{self, sym};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

pub(super) fn residual(f: &Formulation, ev: &Evaluation, p: &Point, mu: Mu) -> KktResidual {
    let k = f.r + f.nr;
    KktResidual {
        ru: p.lu.component_mul(&ev.su).add_scalar(-mu.u),
        rl: p.ll.component_mul(&ev.sl).add_scalar(-mu.l),
        rc: &ev.lc * &ev.zc - DMatrix::identity(k, k) * mu.c,
        rs: &p.z - edm::svec(&DMatrix::identity(f.r, f.r)),
    }
}

pub(super) fn jacobian(f: &Formulation, ev: &Evaluation, p: &Point, d: &Point) -> KktResidual {
    let (dk, dg) = f.d_g(d);
    let (ru, rl) = f.bound_jacobian(ev, p, d, &dk);
    let (dgx, dgy) = f.y_adj(&dg);
    let dzs = stack_sym(
        &edm::smat_n(&d.z, f.r),
        &(f.mat_x(&d.x) / SQRT_2),
        &edm::smat_n(&d.y, f.nr),
    );
    let dls = stack_sym(
        &edm::smat_n(&d.w, f.r),
        &(f.mat_x(&dgx) / SQRT_2),
        &edm::smat_n(&dgy, f.nr),
    );
    KktResidual { ru, rl, rc: dls * &ev.zc + &ev.lc * dzs, rs: d.z.clone() }
}

pub(super) fn jacobian_adjoint(f: &Formulation, ev: &Evaluation, p: &Point, w: &KktResidual) -> Point {
    let (r, k) = (f.r, f.nr);
    let mut out = Point::zeros(&f.dims());
    let dk_adj = f.bound_adjoint(ev, p, &w.ru, &w.rl, &mut out);

    // Lambda_S dZ_s
    let s = sym(&(&ev.lc * &w.rc));
    out.z += edm::svec(&s.view((0, 0), (r, r)).into_owned());
    out.y += edm::svec(&s.view((r, r), (k, k)).into_owned());
    out.x += edm::vec_m(&s.view((r, 0), (k, r)).into_owned()) * SQRT_2;
    out.z += &w.rs;

    // dLambda_S Z_s
    let t = sym(&(&w.rc * &ev.zc));
    out.w += edm::svec(&t.view((0, 0), (r, r)).into_owned());
    let gx_adj: DVector<f64> = edm::vec_m(&t.view((r, 0), (k, r)).into_owned()) * SQRT_2;
    let g_adj = f.y_op(&gx_adj, &edm::svec(&t.view((r, r), (k, k)).into_owned()));
    f.pull_back(dk_adj, &g_adj, &mut out);
    out
}

/// Start with `x = 0`, `Y = beta I`, `Z_11 = I`, `Omega = gamma I` and unit
/// bound multipliers.
pub fn start_point(f: &Formulation, beta: f64, gamma: f64) -> Point {
    let d = f.dims();
    Point {
        x: DVector::zeros(d.nx),
        y: edm::svec(&(DMatrix::identity(f.nr, f.nr) * beta)),
        lu: DVector::from_element(d.nu, 1.0),
        ll: DVector::from_element(d.nl, 1.0),
        z: edm::svec(&DMatrix::identity(f.r, f.r)),
        w: edm::svec(&(DMatrix::identity(f.r, f.r) * gamma)),
    }
}

//! Residual, Jacobian and adjoint for the form with `Z = Y - X X^T`.
//!
//! The blocks are `lambda_u o s_u - mu_u`, `lambda_l o s_l - mu_l`,
//! `Lambda Z - mu_c I` and the `x`-stationarity
//! `g_x + vec(Lambda Mat(x))`, with `Lambda` eliminated through `y`-stationarity.

use nalgebra::{DMatrix, DVector};

use super::{Evaluation, Formulation, KktResidual, Mu, Point};
use crate::edm::{self, sym};

pub(super) fn residual(f: &Formulation, ev: &Evaluation, p: &Point, mu: Mu) -> KktResidual {
    let k = f.nr;
    KktResidual {
        ru: p.lu.component_mul(&ev.su).add_scalar(-mu.u),
        rl: p.ll.component_mul(&ev.sl).add_scalar(-mu.l),
        rc: &ev.lam * &ev.zc - DMatrix::identity(k, k) * mu.c,
        rs: &ev.gx + edm::vec_m(&(&ev.lam * &ev.xm)),
    }
}

pub(super) fn jacobian(f: &Formulation, ev: &Evaluation, p: &Point, d: &Point) -> KktResidual {
    let (dk, dg) = f.d_g(d);
    let (ru, rl) = f.bound_jacobian(ev, p, d, &dk);
    let (dgx, dgy) = f.y_adj(&dg);
    let dlam = edm::smat_n(&dgy, f.nr);
    let dm = f.mat_x(&d.x);
    let mixed = &ev.xm * dm.transpose();
    let dz = edm::smat_n(&d.y, f.nr) - (&mixed + mixed.transpose()) * 0.5;
    KktResidual {
        ru,
        rl,
        rc: &ev.lam * dz + &dlam * &ev.zc,
        rs: dgx + edm::vec_m(&(&dlam * &ev.xm + &ev.lam * dm)),
    }
}

pub(super) fn jacobian_adjoint(f: &Formulation, ev: &Evaluation, p: &Point, w: &KktResidual) -> Point {
    let mut out = Point::zeros(&f.dims());
    let dk_adj = f.bound_adjoint(ev, p, &w.ru, &w.rl, &mut out);

    // Lambda dZ
    let s = sym(&(&ev.lam * &w.rc));
    out.y += edm::svec(&s);
    out.x -= edm::vec_m(&(&s * &ev.xm));

    // dLambda Z, dLambda Mat(x), Lambda Mat(dx)
    let w4 = f.mat_x(&w.rs);
    let dlam_adj = sym(&(&w.rc * &ev.zc)) + sym(&(&w4 * ev.xm.transpose()));
    out.x += edm::vec_m(&(&ev.lam * &w4));

    let g_adj = f.y_op(&w.rs, &edm::svec(&dlam_adj));
    f.pull_back(dk_adj, &g_adj, &mut out);
    out
}

/// `Lagrangian = f - lambda_u.s_u - lambda_l.s_l - <Lambda, Z>` with `Lambda`
/// held fixed; used to check the eliminated stationarity blocks.
pub fn lagrangian(f: &Formulation, p: &Point, lam: &DMatrix<f64>) -> f64 {
    let ky = edm::k_op(&f.y_op(&p.x, &p.y));
    let obj = 0.5 * (f.w.component_mul(&ky) - &f.ebar).norm_squared();
    let (su, sl) = f.bound_slacks(&ky);
    let xm = f.mat_x(&p.x);
    let z = edm::smat_n(&p.y, f.nr) - &xm * xm.transpose() * 0.5;
    obj - p.lu.dot(&su) - p.ll.dot(&sl) - edm::inner(lam, &z)
}

/// Strictly feasible primal start `x = 0`, `Y = beta I` and unit bound
/// multipliers.
pub fn start_point(f: &Formulation, beta: f64) -> Point {
    let d = f.dims();
    Point {
        x: DVector::zeros(d.nx),
        y: edm::svec(&(DMatrix::identity(f.nr, f.nr) * beta)),
        lu: DVector::from_element(d.nu, 1.0),
        ll: DVector::from_element(d.nl, 1.0),
        z: DVector::zeros(0),
        w: DVector::zeros(0),
    }
}

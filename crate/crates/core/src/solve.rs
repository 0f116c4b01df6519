//! Gauss-Newton primal-dual path following.
//!
//! Each iteration solves the overdetermined linearization
//! `min ||F'(d) + F_mu||` of the perturbed optimality system in the least
//! squares sense, then steps with a fraction-to-boundary rule that keeps the
//! bound slacks, the bound multipliers and the primal cone matrix strictly
//! interior. The eliminated dual cone matrix may start outside its cone; it is
//! kept interior only once it has entered. Once the relative gap falls below
//! the crossover level the centering term is dropped for good.

use std::io::Write;
use std::path::Path;

use log::debug;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::edm;
use crate::error::{Error, Result};
use crate::linalg::{cgls, lstsq_min_norm, LstsqInfo};
use crate::model::{build_partial_edm, Instance};
use crate::reduce::{self, CliqueSpec, Reduction, TerminalKind};
use crate::relax::{linearized, quadratic, Evaluation, FormKind, Formulation, KktResidual, Mu, Point};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub gap_tol: f64,
    pub max_iter: usize,
    pub sigma: f64,
    pub ftb: f64,
    /// Relative gap below which `mu = 0`. Pure affine steps stall against the
    /// cone boundary when started far from the optimum, so the default only
    /// lets the final iterations drop the centering term.
    pub crossover_gap: f64,
    /// Relative tolerance of the inner least-squares solve (normal-equation
    /// residual against `||F'^* F||`).
    pub ls_tol: f64,
    /// A solve is reported converged only when the unperturbed residual is
    /// at most `kkt_tol (1 + ||data||)`.
    pub kkt_tol: f64,
    /// Above this many nodes the step is computed by CGLS instead of a dense
    /// factorization.
    pub dense_limit: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gap_tol: 1e-10,
            max_iter: 200,
            sigma: 0.25,
            ftb: 0.95,
            crossover_gap: 1e-9,
            ls_tol: 1e-10,
            kkt_tol: 1e-8,
            dense_limit: 60,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.gap_tol > 0.0) {
            return bad("gap tolerance must be positive");
        }
        if self.max_iter == 0 {
            return bad("max iterations must be at least 1");
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return bad("sigma must lie in (0, 1)");
        }
        if !(self.ftb > 0.0 && self.ftb < 1.0) {
            return bad("fraction to boundary must lie in (0, 1)");
        }
        if !(self.crossover_gap >= 0.0) {
            return bad("crossover gap must be nonnegative");
        }
        if !(self.ls_tol > 0.0) || !(self.kkt_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Centering,
    Affine,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Centering => "centering",
            Mode::Affine => "affine",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIter,
    NumericalFailure,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Converged => "converged",
            Status::MaxIter => "max_iter",
            Status::NumericalFailure => "numerical_failure",
        })
    }
}

/// One row of the iteration trace. The residual norms are those of `F_mu`
/// at the iterate, before the step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub objective: f64,
    pub relgap: f64,
    pub norm_fu: f64,
    pub norm_fl: f64,
    pub norm_fc: f64,
    pub norm_fs: f64,
    pub alpha: f64,
    pub mu: f64,
    pub mode: Mode,
}

pub const TRACE_HEADER: [&str; 10] =
    ["iter", "objective", "relgap", "normFu", "normFl", "normFc", "normFs", "alpha", "mu", "mode"];

pub fn write_trace_csv<W: Write>(trace: &[IterRecord], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(TRACE_HEADER)?;
    for t in trace {
        wtr.write_record([
            t.iter.to_string(),
            format!("{:.17e}", t.objective),
            format!("{:.17e}", t.relgap),
            format!("{:.17e}", t.norm_fu),
            format!("{:.17e}", t.norm_fl),
            format!("{:.17e}", t.norm_fc),
            format!("{:.17e}", t.norm_fs),
            format!("{:.17e}", t.alpha),
            format!("{:.17e}", t.mu),
            t.mode.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_trace_csv(trace: &[IterRecord], path: &Path) -> Result<()> {
    write_trace_csv(trace, std::fs::File::create(path)?)
}

/// Largest multiple `beta` of the identity start admitted by the bounds, and
/// the smallest one needed for the lower bounds: `(lo, hi)`.
fn beta_interval(f: &Formulation) -> (f64, f64) {
    let unit = edm::svec(&DMatrix::identity(f.nr, f.nr));
    let k0 = edm::k_op(&f.y_op(&DVector::zeros(f.nr * f.r), &unit));
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let ku = f.hu.svec(&k0);
    for (k, &c) in ku.iter().enumerate() {
        let b = f.ubar[k];
        if c > 0.0 {
            hi = hi.min(b / c);
        } else if b <= 0.0 {
            hi = f64::NEG_INFINITY;
        }
    }
    let kl = f.hl.svec(&k0);
    for (k, &c) in kl.iter().enumerate() {
        let b = f.lbar[k];
        if c > 0.0 {
            lo = lo.max(b / c);
        } else if b >= 0.0 {
            lo = f64::INFINITY;
        }
    }
    (lo, hi)
}

/// Start point: `x = 0`, `Y = beta I` with unit bound multipliers. `beta`
/// starts at `2 (1 + max Ebar)`, is pushed inside the interval admitted by the
/// bounds and doubled while the eliminated dual matrix is not positive
/// definite. If no admissible `beta` makes it so, the solve starts exterior.
pub fn init_feasible(f: &Formulation) -> Result<Point> {
    let (lo, hi) = beta_interval(f);
    if !(lo < hi) {
        return Err(Error::ContradictoryBounds(format!(
            "no start Y = beta I satisfies the bounds strictly (needs beta > {lo:.3e} and beta < {hi:.3e})"
        )));
    }
    let emax = f.ebar.amax();
    let mut beta = 2.0 * (1.0 + emax);
    if beta <= lo {
        beta = 2.0 * lo;
    }
    if beta >= hi {
        beta = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * hi };
    }
    let mut p = quadratic::start_point(f, beta);
    for _ in 0..60 {
        let lam = f.lambda_from_point(&p.x, &p.y, &p.lu, &p.ll);
        if edm::lambda_min(&lam) > 0.0 || 2.0 * beta >= hi {
            break;
        }
        beta *= 2.0;
        p = quadratic::start_point(f, beta);
    }
    if f.kind == FormKind::Linearized {
        let lam = f.lambda_from_point(&p.x, &p.y, &p.lu, &p.ll);
        let ev = f.evaluate(&linearized::start_point(f, beta, 1.0));
        let l21 = f.mat_x(&ev.gx) / std::f64::consts::SQRT_2;
        let gamma = match lam.clone().cholesky() {
            Some(ch) if edm::lambda_min(&lam) > 0.0 => {
                let s = l21.transpose() * ch.solve(&l21);
                1.0 + 2.0 * edm::lambda_max(&s).max(0.0)
            }
            _ => 1.0 + l21.norm(),
        };
        p = linearized::start_point(f, beta, gamma);
    }
    debug!("start: beta = {beta:.3e}");
    Ok(p)
}

/// Centering targets at the current point.
pub fn centering_mu(f: &Formulation, ev: &Evaluation, p: &Point, sigma: f64) -> Mu {
    let (cu, cl, cc) = f.complementarity(ev, p);
    let avg = |c: f64, k: usize| if k == 0 { 0.0 } else { sigma * c / k as f64 };
    Mu { u: avg(cu, p.lu.len()), l: avg(cl, p.ll.len()), c: avg(cc.abs(), ev.zc.nrows()) }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    /// Present for the dense path.
    pub lstsq: Option<LstsqInfo>,
    pub cgls_iters: usize,
    /// `||F'^*(F'd + F)|| / ||F'^* F||`.
    pub normal_residual: f64,
}

/// The Jacobian as a dense matrix, one column per coordinate direction.
pub fn dense_jacobian(f: &Formulation, ev: &Evaluation, p: &Point) -> DMatrix<f64> {
    let dims = f.dims();
    let cols: Vec<DVector<f64>> = (0..dims.total())
        .into_par_iter()
        .map(|k| {
            let mut e = DVector::zeros(dims.total());
            e[k] = 1.0;
            f.apply_jacobian(ev, p, &Point::from_flat(&dims, &e)).flatten()
        })
        .collect();
    DMatrix::from_columns(&cols)
}

/// Gauss-Newton direction: the minimum-norm minimizer of `||F'(d) + F_mu||`.
pub fn gauss_newton_step(
    f: &Formulation,
    ev: &Evaluation,
    p: &Point,
    mu: Mu,
    cfg: &SolverConfig,
) -> Result<(Point, StepInfo)> {
    let dims = f.dims();
    let res = f.kkt_residual_at(ev, p, mu);
    let rhs = -res.flatten();
    let (d, lstsq, iters) = if f.order() <= cfg.dense_limit {
        let j = dense_jacobian(f, ev, p);
        let (d, info) = lstsq_min_norm(&j, &rhs, 1e-14);
        (d, Some(info), 0)
    } else {
        let apply = |v: &DVector<f64>| f.apply_jacobian(ev, p, &Point::from_flat(&dims, v)).flatten();
        let adj = |w: &DVector<f64>| f.apply_jacobian_adjoint(ev, p, &KktResidual::from_flat(&res, w)).flatten();
        let (d, it) = cgls(apply, adj, &rhs, dims.total(), cfg.ls_tol, 20 * dims.total());
        (d, None, it)
    };
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("Gauss-Newton direction is not finite".into()));
    }
    let dir = Point::from_flat(&dims, &d);
    let lin = f.apply_jacobian(ev, p, &dir).flatten() - &rhs;
    let num = f.apply_jacobian_adjoint(ev, p, &KktResidual::from_flat(&res, &lin)).norm();
    let den = f.apply_jacobian_adjoint(ev, p, &res).norm();
    let normal_residual = if den > 0.0 { num / den } else { num };
    Ok((dir, StepInfo { lstsq, cgls_iters: iters, normal_residual }))
}

/// Largest `alpha <= 1` with `v + alpha dv >= (1 - ftb) v` componentwise.
pub fn ratio_test(v: &DVector<f64>, dv: &DVector<f64>, ftb: f64) -> f64 {
    let mut alpha = 1.0f64;
    for (x, dx) in v.iter().zip(dv.iter()) {
        if *dx < 0.0 {
            alpha = alpha.min(ftb * x / -dx);
        }
    }
    alpha
}

/// Fraction-to-boundary step length: ratio tests on the bound slacks and
/// multipliers, then bisection on the eigenvalues of the cone matrices so that
/// `lambda_min(Z(alpha)) >= (1 - ftb) lambda_min(Z)` and likewise for the dual
/// cone matrix when it is currently positive definite.
pub fn step_length(f: &Formulation, ev: &Evaluation, p: &Point, d: &Point, ftb: f64) -> f64 {
    let full = f.evaluate(&p.step(1.0, d));
    let dsu = &full.su - &ev.su;
    let dsl = &full.sl - &ev.sl;
    let mut alpha = [
        ratio_test(&ev.su, &dsu, ftb),
        ratio_test(&ev.sl, &dsl, ftb),
        ratio_test(&p.lu, &d.lu, ftb),
        ratio_test(&p.ll, &d.ll, ftb),
    ]
    .into_iter()
    .fold(1.0, f64::min);

    let zmin = edm::lambda_min(&ev.zc);
    let lmin = edm::lambda_min(&ev.lc);
    let ok = |a: f64| {
        let e = f.evaluate(&p.step(a, d));
        let zok = zmin <= 0.0 || edm::lambda_min(&e.zc) >= (1.0 - ftb) * zmin;
        let lok = lmin <= 0.0 || edm::lambda_min(&e.lc) >= (1.0 - ftb) * lmin;
        zok && lok
    };
    if !ok(alpha) {
        let (mut lo, mut hi) = (0.0, alpha);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-3 * hi {
                break;
            }
        }
        alpha = lo;
    }
    alpha
}

/// Norms of the unperturbed system and the sign conditions of optimality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `||F_0||`.
    pub kkt_norm: f64,
    pub data_norm: f64,
    /// Minima over empty bound sets are `+inf` (`null` in JSON).
    #[serde(with = "inf_as_null")]
    pub min_su: f64,
    #[serde(with = "inf_as_null")]
    pub min_sl: f64,
    #[serde(with = "inf_as_null")]
    pub min_lu: f64,
    #[serde(with = "inf_as_null")]
    pub min_ll: f64,
    pub primal_min_eig: f64,
    pub dual_min_eig: f64,
}

mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl Certificate {
    /// Whether every condition holds within `tol` (residual scaled by
    /// `1 + ||data||`, signs scaled by the largest magnitude involved).
    pub fn holds(&self, kkt_tol: f64, sign_tol: f64) -> bool {
        self.kkt_norm <= kkt_tol * (1.0 + self.data_norm)
            && [self.min_su, self.min_sl, self.min_lu, self.min_ll, self.primal_min_eig, self.dual_min_eig]
                .iter()
                .all(|&v| v >= -sign_tol)
    }
}

pub fn certificate(f: &Formulation, p: &Point) -> Certificate {
    let ev = f.evaluate(p);
    let res = f.kkt_residual_at(&ev, p, Mu::ZERO);
    let min = |v: &DVector<f64>| v.iter().copied().fold(f64::INFINITY, f64::min);
    Certificate {
        kkt_norm: res.norm(),
        data_norm: f.data_norm(),
        min_su: min(&ev.su),
        min_sl: min(&ev.sl),
        min_lu: min(&p.lu),
        min_ll: min(&p.ll),
        primal_min_eig: edm::lambda_min(&ev.zc),
        dual_min_eig: edm::lambda_min(&ev.lc),
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub point: Point,
    pub trace: Vec<IterRecord>,
    pub status: Status,
    pub objective: f64,
    pub relgap: f64,
    pub certificate: Certificate,
    pub message: Option<String>,
}

impl SolveOutput {
    pub fn iterations(&self) -> usize {
        self.trace.len().saturating_sub(1)
    }
}

fn record(iter: usize, ev: &Evaluation, gap: f64, res: &KktResidual, alpha: f64, mu: Mu, mode: Mode) -> IterRecord {
    let [fu, fl, fc, fs] = res.block_norms();
    IterRecord {
        iter,
        objective: ev.f,
        relgap: gap,
        norm_fu: fu,
        norm_fl: fl,
        norm_fc: fc,
        norm_fs: fs,
        alpha,
        mu: mu.c.max(mu.u).max(mu.l),
        mode,
    }
}

pub fn solve(f: &Formulation, cfg: &SolverConfig) -> Result<SolveOutput> {
    let p0 = init_feasible(f)?;
    solve_from(f, p0, cfg)
}

/// Runs the iteration from a given start. The trace has one row per iterate;
/// the last row describes the returned point and has `alpha = 0`.
pub fn solve_from(f: &Formulation, mut p: Point, cfg: &SolverConfig) -> Result<SolveOutput> {
    cfg.validate()?;
    let mut mode = Mode::Centering;
    let mut trace = Vec::new();
    let mut status = Status::MaxIter;
    let mut message = None;
    let sign_tol = 1e-8;
    let mut ev = f.evaluate(&p);
    for iter in 0..=cfg.max_iter {
        let gap = f.relative_gap(&ev, &p);
        if mode == Mode::Centering && gap < cfg.crossover_gap {
            mode = Mode::Affine;
        }
        let mu = match mode {
            Mode::Centering => centering_mu(f, &ev, &p, cfg.sigma),
            Mode::Affine => Mu::ZERO,
        };
        let res = f.kkt_residual_at(&ev, &p, mu);
        if !gap.is_finite() || !ev.f.is_finite() {
            status = Status::NumericalFailure;
            message = Some("iterate is not finite".into());
            trace.push(record(iter, &ev, gap, &res, 0.0, mu, mode));
            break;
        }
        if gap <= cfg.gap_tol {
            let cert = certificate(f, &p);
            if cert.holds(cfg.kkt_tol, sign_tol) {
                status = Status::Converged;
                trace.push(record(iter, &ev, gap, &res, 0.0, mu, mode));
                break;
            }
        }
        if iter == cfg.max_iter {
            trace.push(record(iter, &ev, gap, &res, 0.0, mu, mode));
            break;
        }
        let (d, info) = match gauss_newton_step(f, &ev, &p, mu, cfg) {
            Ok(v) => v,
            Err(e) => {
                status = Status::NumericalFailure;
                message = Some(e.to_string());
                trace.push(record(iter, &ev, gap, &res, 0.0, mu, mode));
                break;
            }
        };
        let alpha = step_length(f, &ev, &p, &d, cfg.ftb);
        debug!(
            "iter {iter}: f = {:.3e}, gap = {gap:.3e}, |F| = {:.3e}, alpha = {alpha:.3e}, mode = {mode}, ls = {:.1e}",
            ev.f,
            res.norm(),
            info.normal_residual
        );
        trace.push(record(iter, &ev, gap, &res, alpha, mu, mode));
        if !(alpha > 0.0) {
            status = Status::NumericalFailure;
            message = Some("step length collapsed to zero".into());
            break;
        }
        p = p.step(alpha, &d);
        ev = f.evaluate(&p);
    }
    let gap = f.relative_gap(&ev, &p);
    Ok(SolveOutput {
        objective: ev.f,
        relgap: gap,
        certificate: certificate(f, &p),
        point: p,
        trace,
        status,
        message,
    })
}

/// How sensor cliques are chosen for the reduction.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum CliqueMode {
    /// Anchor face only.
    #[default]
    None,
    /// Greedy detection with the given minimum size (at least `r + 2`).
    Auto { min_size: usize },
    /// Cliques in original node numbering.
    Given(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveOptions {
    pub form: FormKind,
    pub cliques: CliqueMode,
    pub config: SolverConfig,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub form: FormKind,
    pub status: Status,
    /// Optimal Gram matrix over all nodes, in the instance's node order.
    pub ybar: DMatrix<f64>,
    pub objective: f64,
    pub relgap: f64,
    pub certificate: Certificate,
    pub trace: Vec<IterRecord>,
    pub cliques: Vec<Vec<usize>>,
    /// Order of the reduced matrix variable (sensor part plus `r`).
    pub reduced_order: usize,
    /// Order with the anchor face alone, `n + r`.
    pub anchor_only_order: usize,
    pub message: Option<String>,
}

impl Solution {
    pub fn iterations(&self) -> usize {
        self.trace.len().saturating_sub(1)
    }
}

/// Builds the reduction requested in `opts`.
pub fn reduce_instance(inst: &Instance, cliques: &CliqueMode) -> Result<Reduction> {
    let pe = build_partial_edm(inst)?;
    let specs: Vec<CliqueSpec> = match cliques {
        CliqueMode::None => Vec::new(),
        CliqueMode::Auto { min_size } => reduce::find_sensor_cliques(&pe, inst.r, *min_size)?,
        CliqueMode::Given(c) => c.iter().cloned().map(CliqueSpec::sensors).collect(),
    };
    reduce::reduce(&pe, &inst.anchors, &specs, TerminalKind::AForm)
}

/// Reduce, solve and map the optimal Gram matrix back to the original order.
pub fn solve_instance(inst: &Instance, opts: &SolveOptions) -> Result<Solution> {
    let red = reduce_instance(inst, &opts.cliques)?;
    let f = Formulation::from_reduction(opts.form, &red, &inst.anchors)?;
    let out = solve(&f, &opts.config)?;
    let ybar = red.unpermute_sym(&f.gram(&out.point.x, &out.point.y));
    Ok(Solution {
        form: opts.form,
        status: out.status,
        ybar,
        objective: out.objective,
        relgap: out.relgap,
        certificate: out.certificate,
        trace: out.trace,
        cliques: red.cliques.iter().map(|c| c.nodes.clone()).collect(),
        reduced_order: red.face.reduced_order(),
        anchor_only_order: inst.n + inst.r,
        message: out.message,
    })
}

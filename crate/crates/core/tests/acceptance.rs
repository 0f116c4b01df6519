use std::io::Write;
use std::time::{Duration, Instant};

use edm_snl::edm::{self, BlockLayout, Pattern};
use edm_snl::locate::{self, locate_both};
use edm_snl::model::{build_partial_edm, generate, Edge, GenerateParams, Instance};
use edm_snl::reduce::{anchor_face, clique_distances, clique_face, FaceBasis, TerminalKind};
use edm_snl::relax::{FormKind, Formulation, KktResidual, Mu, Point};
use edm_snl::solve::{self, solve_instance, CliqueMode, Solution, SolveOptions, SolverConfig, Status};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KKT_TOL: f64 = 1e-7;
const SIGN_TOL: f64 = 1e-8;

/// Prints the verdict past the test harness's output capture, then fails the
/// test when the criterion does not hold.
fn report(n: usize, title: &str, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {n} ({title}): {verdict}: {detail}");
    match std::fs::OpenOptions::new().append(true).open("/dev/stdout") {
        Ok(mut out) => {
            let _ = writeln!(out, "{line}");
        }
        Err(_) => println!("{line}"),
    }
    assert!(pass, "criterion {n} ({title}) failed: {detail}");
}

fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

fn rand_sym(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    edm::sym(&rand_mat(rng, n, n))
}

fn rand_vec(rng: &mut ChaCha8Rng, k: usize) -> DVector<f64> {
    DVector::from_fn(k, |_, _| rng.gen_range(-1.0..1.0))
}

/// `|lhs - rhs|` against the Cauchy-Schwarz scale of both sides.
fn adjoint_error(lhs: f64, rhs: f64, scale: f64) -> f64 {
    (lhs - rhs).abs() / scale.max(f64::MIN_POSITIVE)
}

fn sym_adjoint_error(
    op: impl Fn(&DMatrix<f64>) -> DMatrix<f64>,
    adj: impl Fn(&DMatrix<f64>) -> DMatrix<f64>,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> f64 {
    let (ox, ay) = (op(x), adj(y));
    adjoint_error(edm::inner(&ox, y), edm::inner(x, &ay), ox.norm() * y.norm() + x.norm() * ay.norm())
}

fn random_partition(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut sizes = Vec::new();
    let mut left = n;
    while left > 0 {
        let k = rng.gen_range(1..=left.min(5));
        sizes.push(k);
        left -= k;
    }
    sizes
}

#[test]
fn criterion_1_operator_identities() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_adj: f64 = 0.0;
    let mut worst_inv: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.gen_range(2..=20);
        let b = rand_sym(&mut rng, n);
        let d = rand_sym(&mut rng, n);
        worst_adj = worst_adj.max(sym_adjoint_error(edm::k_op, edm::k_adj, &b, &d));
        worst_adj = worst_adj.max(sym_adjoint_error(edm::de, edm::de_adj, &b, &d));

        let v = rand_vec(&mut rng, edm::tri(n));
        let sv = edm::svec(&b);
        let smv = edm::smat_n(&v, n);
        worst_adj = worst_adj.max(adjoint_error(sv.dot(&v), edm::inner(&b, &smv), sv.norm() * v.norm() + b.norm() * smv.norm()));

        let layout = BlockLayout::new(&random_partition(&mut rng, n));
        for i in 1..=layout.len() {
            let (_, ki) = layout.block(i).unwrap();
            let t = rand_sym(&mut rng, ki);
            let sb = edm::sblk_diag(&layout, i, &b).unwrap();
            let st = edm::sblk_diag_adj(&layout, i, &t).unwrap();
            worst_adj = worst_adj.max(adjoint_error(edm::inner(&sb, &t), edm::inner(&b, &st), sb.norm() * t.norm() + b.norm() * st.norm()));
            for j in 1..=layout.len() {
                if i == j {
                    continue;
                }
                let (_, kj) = layout.block(j).unwrap();
                let g = rand_mat(&mut rng, ki, kj);
                let sb = edm::sblk_off(&layout, i, j, &b).unwrap();
                let sg = edm::sblk_off_adj(&layout, i, j, &g).unwrap();
                worst_adj = worst_adj.max(adjoint_error(edm::inner(&sb, &g), edm::inner(&b, &sg), sb.norm() * g.norm() + b.norm() * sg.norm()));
            }
        }

        let pairs: Vec<(usize, usize)> =
            (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|_| rng.gen_bool(0.5)).collect();
        let h = Pattern::from_pairs(n, pairs);
        let w = rand_vec(&mut rng, h.nz());
        let hs = h.svec(&b);
        let hw = h.smat(&w).unwrap();
        worst_adj = worst_adj.max(adjoint_error(hs.dot(&w), edm::inner(&b, &hw), hs.norm() * w.norm() + b.norm() * hw.norm()));

        let hollow = edm::off_diag(&d);
        let back = edm::k_op(&edm::k_dagger(&hollow));
        worst_inv = worst_inv.max((back - &hollow).norm() / hollow.norm());
        let j = edm::j_project(n);
        let jbj = &j * &b * &j;
        let kk = edm::k_dagger(&edm::k_op(&b));
        worst_inv = worst_inv.max((kk - &jbj).norm() / b.norm());
    }
    let elapsed = start.elapsed();
    let pass = worst_adj <= 1e-11 && worst_inv <= 1e-11 && elapsed < Duration::from_secs(5);
    report(
        1,
        "operator identities",
        pass,
        format!("max adjoint error {worst_adj:.2e}, max inverse error {worst_inv:.2e}, {:.2}s", elapsed.as_secs_f64()),
    );
}

fn face(blocks: Vec<DMatrix<f64>>, kind: TerminalKind, a: &DMatrix<f64>, n: usize) -> FaceBasis {
    let af = anchor_face(a).unwrap();
    FaceBasis { blocks, terminal_kind: kind, sigma: af.sigma, v: af.v, n_free: n }
}

#[test]
fn criterion_2_feasible_set_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    let mut disagreements = 0;
    let mut infeasible = 0;
    for s in 0..100 {
        let r = rng.gen_range(2..=3);
        let n = rng.gen_range(r + 1..=12);
        let m = rng.gen_range(r + 1..=r + 4);
        let a = rand_mat(&mut rng, m, r);
        let x = rand_mat(&mut rng, n, r) * rng.gen_range(0.5..3.0);
        let k = rng.gen_range(0..=n);
        let b = rand_mat(&mut rng, n, k);
        let mut y = &x * x.transpose() + &b * b.transpose();
        if s % 4 == 3 {
            let v = rand_vec(&mut rng, n).normalize();
            // Push `v^T (Y - XX^T) v` below zero.
            let excess = (b.transpose() * &v).norm_squared() + rng.gen_range(0.01..1.0);
            y -= &v * v.transpose() * excess;
            infeasible += 1;
        }

        let mut z_a = DMatrix::identity(n + r, n + r);
        z_a.view_mut((0, 0), (n, n)).copy_from(&y);
        z_a.view_mut((0, n), (n, r)).copy_from(&x);
        z_a.view_mut((n, 0), (r, n)).copy_from(&x.transpose());
        let f_a = face(vec![DMatrix::identity(n, n), a.clone()], TerminalKind::AForm, &a, n);
        let ybar_a = f_a.assemble(&z_a).unwrap();

        let af = anchor_face(&a).unwrap();
        let f_u = face(vec![DMatrix::identity(n, n), af.u.clone()], TerminalKind::SForm, &a, n);
        let c = f_u.a_to_s_congruence();
        let z_u = &c * &z_a * c.transpose();
        let ybar_u = f_u.assemble(&z_u).unwrap();

        let sigma = DMatrix::from_diagonal(&af.sigma);
        let x_back = z_u.view((0, n), (n, r)) * sigma.clone().try_inverse().unwrap() * af.v.transpose();
        let mut direct = DMatrix::zeros(n + m, n + m);
        direct.view_mut((0, 0), (n, n)).copy_from(&y);
        direct.view_mut((n, 0), (m, n)).copy_from(&(&a * x.transpose()));
        direct.view_mut((0, n), (n, m)).copy_from(&(&x * a.transpose()));
        direct.view_mut((n, n), (m, m)).copy_from(&(&a * a.transpose()));
        let scale = 1.0 + ybar_a.norm();
        worst = worst
            .max((&ybar_a - &ybar_u).norm() / scale)
            .max((&ybar_a - &direct).norm() / scale)
            .max((&x_back - &x).norm() / (1.0 + x.norm()))
            .max((z_u.view((n, n), (r, r)) - &sigma * &sigma).norm() / scale);

        let schur = edm::lambda_min(&z_a);
        let quadratic = edm::lambda_min(&(&y - &x * x.transpose()));
        if (schur >= -1e-12) != (quadratic >= -1e-12) || (s % 4 == 3) == (quadratic >= -1e-12) {
            disagreements += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1e-10 && disagreements == 0 && elapsed < Duration::from_secs(10);
    report(
        2,
        "feasible-set equivalence",
        pass,
        format!(
            "max reconstruction error {worst:.2e}, {disagreements} PSD disagreements over 100 samples ({infeasible} infeasible), {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
}

fn noiseless_family(seed: u64) -> Instance {
    generate(&GenerateParams { noise_sigma: 0.0, seed, ..Default::default() }).unwrap()
}

fn stacked(x: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(x.nrows() + a.nrows(), x.ncols());
    p.rows_mut(0, x.nrows()).copy_from(x);
    p.rows_mut(x.nrows(), a.nrows()).copy_from(a);
    p
}

#[test]
fn criterion_3_slater_diagnosis() {
    let mut worst_unreduced = f64::NEG_INFINITY;
    let mut worst_reduced = f64::INFINITY;
    let mut anchor_err: f64 = 0.0;
    for seed in 1..=20 {
        let inst = noiseless_family(seed * 11);
        let p = stacked(inst.x_true.as_ref().unwrap(), &inst.anchors);
        let ybar = &p * p.transpose();
        worst_unreduced = worst_unreduced.max(edm::lambda_min(&ybar) / ybar.norm());

        let red = solve::reduce_instance(&inst, &CliqueMode::Auto { min_size: inst.r + 2 }).unwrap();
        let z = red.face.slater_point(&red.permute_rows(&p), 1e-2).unwrap();
        worst_reduced = worst_reduced.min(edm::lambda_min(&z));
        let assembled = red.face.assemble(&z).unwrap();
        let (n, m) = (inst.n, inst.m);
        let aat = &inst.anchors * inst.anchors.transpose();
        anchor_err = anchor_err.max((assembled.view((n, n), (m, m)) - &aat).norm() / aat.norm());
    }
    let pass = worst_unreduced <= 1e-8 && worst_reduced > 0.0 && anchor_err <= 1e-10;
    report(
        3,
        "Slater diagnosis",
        pass,
        format!(
            "largest unreduced lambda_min {worst_unreduced:.2e}, smallest reduced lambda_min {worst_reduced:.2e}, anchor block error {anchor_err:.2e}"
        ),
    );
}

/// A noiseless instance where sensor 0 and its `p - 1` nearest sensors are
/// made mutually adjacent.
fn planted_clique(seed: u64, p: usize) -> (Instance, Vec<usize>) {
    let mut inst = noiseless_family(seed);
    let x = inst.x_true.clone().unwrap();
    let mut order: Vec<usize> = (1..inst.n).collect();
    order.sort_by(|&i, &j| (x.row(i) - x.row(0)).norm().total_cmp(&(x.row(j) - x.row(0)).norm()));
    let mut clique: Vec<usize> = std::iter::once(0).chain(order.into_iter().take(p - 1)).collect();
    clique.sort_unstable();
    for (k, &i) in clique.iter().enumerate() {
        for &j in &clique[k + 1..] {
            if !inst.edges.iter().any(|e| (e.i, e.j) == (i, j)) {
                inst.edges.push(Edge { i, j, d2: (x.row(i) - x.row(j)).norm_squared() });
            }
        }
    }
    (inst, clique)
}

fn rmsd(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / (a.nrows() as f64).sqrt()
}

fn method2_positions(inst: &Instance, sol: &Solution) -> DMatrix<f64> {
    locate::method2(&sol.ybar, &inst.anchors, inst.r).unwrap().x
}

#[test]
fn criterion_4_clique_reduction() {
    let mut lines = Vec::new();
    let mut pass = true;
    for (k, p) in [5usize, 6, 7].into_iter().enumerate() {
        let (inst, clique) = planted_clique(40 + k as u64, p);
        let x = inst.x_true.clone().unwrap();
        let r2 = clique_face(&clique_distances(&x, &clique), inst.r).unwrap().r2;
        let base = solve_instance(&inst, &SolveOptions::default()).unwrap();
        let opts = SolveOptions { cliques: CliqueMode::Given(vec![clique]), ..Default::default() };
        let reduced = solve_instance(&inst, &opts).unwrap();
        let drop = base.reduced_order as i64 - reduced.reduced_order as i64;
        let dobj = (base.objective - reduced.objective).abs();
        let dpos = rmsd(&method2_positions(&inst, &base), &method2_positions(&inst, &reduced));
        let ok = r2 <= 3
            && drop == (p - r2) as i64
            && base.status == Status::Converged
            && reduced.status == Status::Converged
            && dobj <= 1e-6
            && dpos <= 1e-4;
        pass &= ok;
        lines.push(format!("p={p}: r2={r2}, order drop {drop}, objective diff {dobj:.1e}, position rmsd {dpos:.1e}"));
    }
    report(4, "clique reduction", pass, lines.join("; "));
}

fn dense_noiseless() -> Instance {
    generate(&GenerateParams {
        r: 2,
        n: 10,
        m: 4,
        radio_range: f64::INFINITY,
        density: 0.8,
        noise_sigma: 0.0,
        square_half_width: 0.5,
        seed: 5,
        out_of_range_bounds: false,
    })
    .unwrap()
}

#[test]
fn criterion_5_noiseless_recovery() {
    let start = Instant::now();
    let inst = dense_noiseless();
    let sol = solve_instance(&inst, &SolveOptions::default()).unwrap();
    let x1 = locate::method1(&sol.ybar, &inst.anchors).unwrap().x;
    let err = rmsd(&x1, inst.x_true.as_ref().unwrap());
    let elapsed = start.elapsed();
    let pass = sol.status == Status::Converged
        && sol.relgap <= 1e-10
        && sol.iterations() <= 100
        && err < 1e-3
        && elapsed < Duration::from_secs(60);
    report(
        5,
        "noiseless recovery",
        pass,
        format!(
            "status {:?}, relative gap {:.2e} after {} iterations, Method 1 rmsd {err:.2e}, {:.2}s",
            sol.status,
            sol.relgap,
            sol.iterations(),
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_6_method_comparison() {
    let start = Instant::now();
    let seeds: Vec<u64> = (1..=7).collect();
    let mut sums = [[0.0f64; 3]; 2];
    for &seed in &seeds {
        let inst = generate(&GenerateParams { seed, ..Default::default() }).unwrap();
        let sol = solve_instance(&inst, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Converged, "seed {seed}");
        let pe = build_partial_edm(&inst).unwrap();
        let res = locate_both(&sol.ybar, &inst.anchors, &pe, inst.x_true.as_ref()).unwrap();
        for (k, r) in res.iter().enumerate() {
            sums[k][0] += r.measures.m1;
            sums[k][1] += r.measures.m2.unwrap();
            sums[k][2] += r.measures.m3;
        }
    }
    let mean = |k: usize, j: usize| sums[k][j] / seeds.len() as f64;
    let ratio = mean(1, 1) / mean(0, 1);
    let elapsed = start.elapsed();
    let pass = ratio < 0.5 && mean(1, 0) < mean(0, 0) && mean(1, 2) < mean(0, 2) && elapsed < Duration::from_secs(600);
    report(
        6,
        "method comparison",
        pass,
        format!(
            "means over {} seeds: measure 1 {:.4} vs {:.4}, measure 2 {:.4} vs {:.4} (ratio {ratio:.3}), measure 3 {:.4} vs {:.4}, {:.1}s",
            seeds.len(),
            mean(0, 0),
            mean(1, 0),
            mean(0, 1),
            mean(1, 1),
            mean(0, 2),
            mean(1, 2),
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_7_barrier_comparison() {
    // A vanishing stopping tolerance lets each run continue to the smallest
    // gap it can reach; the path up to 1e-8 is unaffected.
    let config = SolverConfig { gap_tol: 1e-300, max_iter: 80, ..Default::default() };
    let mut fewer = 0;
    let mut smaller = 0;
    let mut rows = Vec::new();
    for seed in 1..=10u64 {
        let inst = generate(&GenerateParams { seed, ..Default::default() }).unwrap();
        let run = |form| {
            let sol = solve_instance(&inst, &SolveOptions { form, config: config.clone(), ..Default::default() }).unwrap();
            let hit = sol.trace.iter().find(|t| t.relgap <= 1e-8).map_or(usize::MAX, |t| t.iter);
            let best = sol.trace.iter().map(|t| t.relgap).fold(f64::INFINITY, f64::min);
            (hit, best)
        };
        let (qh, qb) = run(FormKind::Quadratic);
        let (lh, lb) = run(FormKind::Linearized);
        fewer += usize::from(qh <= lh);
        smaller += usize::from(qb <= lb);
        let show = |h: usize| if h == usize::MAX { "never".to_string() } else { h.to_string() };
        rows.push(format!("seed {seed}: {}/{} its, {qb:.1e}/{lb:.1e}", show(qh), show(lh)));
    }
    let pass = fewer >= 7 && smaller >= 7;
    report(
        7,
        "barrier comparison",
        pass,
        format!(
            "quadratic reaches 1e-8 no later on {fewer}/10, final gap no larger on {smaller}/10 (quadratic/linearized: {})",
            rows.join("; ")
        ),
    );
}

fn fd_formulation(kind: FormKind, seed: u64) -> Formulation {
    let mut inst = generate(&GenerateParams {
        r: 2,
        n: 7,
        m: 3,
        radio_range: 0.9,
        density: 0.8,
        noise_sigma: 0.05,
        square_half_width: 0.5,
        seed,
        out_of_range_bounds: true,
    })
    .unwrap();
    inst.upper_bounds = inst.edges.iter().take(3).map(|e| Edge { d2: 50.0, ..*e }).collect();
    let red = solve::reduce_instance(&inst, &CliqueMode::None).unwrap();
    Formulation::from_reduction(kind, &red, &inst.anchors).unwrap()
}

/// A point with positive slacks and multipliers and a positive definite
/// primal matrix.
fn interior_point(f: &Formulation, rng: &mut ChaCha8Rng) -> Point {
    let d = f.dims();
    loop {
        let x = rand_vec(rng, d.nx);
        let xm = f.mat_x(&x);
        let b = rand_mat(rng, f.nr, f.nr);
        let y = &xm * xm.transpose() + &b * b.transpose() * 0.1 + DMatrix::identity(f.nr, f.nr) * 2.0;
        let c = rand_mat(rng, f.r, f.r);
        let p = Point {
            x,
            y: edm::svec(&y),
            lu: DVector::from_fn(d.nu, |_, _| rng.gen_range(0.1..2.0)),
            ll: DVector::from_fn(d.nl, |_, _| rng.gen_range(0.1..2.0)),
            z: if d.nz > 0 { edm::svec(&(DMatrix::identity(f.r, f.r) * 3.0 + edm::sym(&c))) } else { DVector::zeros(0) },
            w: rand_vec(rng, d.nw),
        };
        let ev = f.evaluate(&p);
        if ev.su.iter().chain(ev.sl.iter()).all(|&s| s > 0.0) && edm::lambda_min(&ev.zc) > 0.0 {
            return p;
        }
    }
}

#[test]
fn criterion_8_jacobian_and_adjoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut ratios = Vec::new();
    let mut worst_adj: f64 = 0.0;
    let mut pairs = 0;
    for k in 0..50u64 {
        let kind = if k % 2 == 0 { FormKind::Quadratic } else { FormKind::Linearized };
        let f = fd_formulation(kind, 1 + k / 10);
        let p = interior_point(&f, &mut rng);
        let mu = Mu { u: rng.gen_range(0.01..1.0), l: rng.gen_range(0.01..1.0), c: rng.gen_range(0.01..1.0) };
        let ev = f.evaluate(&p);
        let dims = f.dims();
        let d = Point::from_flat(&dims, &rand_vec(&mut rng, dims.total()));
        let f0 = f.kkt_residual_at(&ev, &p, mu);
        let jd = f.apply_jacobian(&ev, &p, &d).flatten();
        let err = |h: f64| ((f.kkt_residual(&p.step(h, &d), mu).flatten() - f0.flatten()) / h - &jd).norm();
        ratios.push(err(1e-3) / err(1e-4));

        for _ in 0..2 {
            let ds = Point::from_flat(&dims, &rand_vec(&mut rng, dims.total()));
            let w = KktResidual::from_flat(&f0, &rand_vec(&mut rng, f0.len()));
            let jds = f.apply_jacobian(&ev, &p, &ds);
            let jtw = f.apply_jacobian_adjoint(&ev, &p, &w);
            let scale = jds.norm() * w.norm() + ds.norm() * jtw.norm();
            worst_adj = worst_adj.max(adjoint_error(jds.dot(&w), ds.dot(&jtw), scale));
            pairs += 1;
        }
    }
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pass = (5.0..=20.0).contains(&lo) && (5.0..=20.0).contains(&hi) && worst_adj <= 1e-11;
    report(
        8,
        "Jacobian and adjoint",
        pass,
        format!("error ratios in [{lo:.2}, {hi:.2}] over {} points, max adjoint error {worst_adj:.2e} over {pairs} pairs", ratios.len()),
    );
}

#[test]
fn criterion_9_kkt_certificate() {
    let mut cases: Vec<(String, Instance)> = Vec::new();
    for seed in 1..=4u64 {
        cases.push((format!("noisy seed {seed}"), generate(&GenerateParams { seed, ..Default::default() }).unwrap()));
    }
    cases.push(("noiseless dense".into(), dense_noiseless()));
    let mut bounded = generate(&GenerateParams {
        r: 2,
        n: 12,
        m: 4,
        radio_range: 0.6,
        density: 0.8,
        noise_sigma: 0.02,
        square_half_width: 0.5,
        seed: 9,
        out_of_range_bounds: true,
    })
    .unwrap();
    bounded.upper_bounds = bounded.edges.iter().take(4).map(|e| Edge { d2: 2.0, ..*e }).collect();
    cases.push(("bounded".into(), bounded));

    let mut converged = 0;
    let mut worst_kkt: f64 = 0.0;
    let mut worst_sign: f64 = f64::INFINITY;
    let mut failures = Vec::new();
    for (name, inst) in &cases {
        for form in [FormKind::Quadratic, FormKind::Linearized] {
            let sol = solve_instance(inst, &SolveOptions { form, ..Default::default() }).unwrap();
            if sol.status != Status::Converged {
                continue;
            }
            converged += 1;
            let c = sol.certificate;
            let kkt = c.kkt_norm / (1.0 + c.data_norm);
            let sign = [c.min_su, c.min_sl, c.min_lu, c.min_ll, c.primal_min_eig, c.dual_min_eig]
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            worst_kkt = worst_kkt.max(kkt);
            worst_sign = worst_sign.min(sign);
            if kkt > KKT_TOL || sign < -SIGN_TOL {
                failures.push(format!("{name} {form}"));
            }
        }
    }
    let pass = converged > 0 && failures.is_empty();
    report(
        9,
        "KKT certificate",
        pass,
        format!(
            "{converged} converged solves, max scaled residual {worst_kkt:.2e}, smallest sign value {worst_sign:.2e}, violations: {}",
            if failures.is_empty() { "none".to_string() } else { failures.join(", ") }
        ),
    );
}

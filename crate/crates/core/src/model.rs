//! Problem data: instances with optional ground truth, random generation,
//! the partial distance matrix with weights and bounds, and JSON/CSV I/O.
//!
//! Node numbering is global: sensors are `0..n`, anchors are `n..n+m`.
//! Coordinates stored in an [`Instance`] live in the anchor-centered frame;
//! `translation` is the shift that maps them back to the original frame.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::edm::{self, Pattern};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Number of whole-instance regenerations tried before giving up on
/// connectivity.
pub const MAX_GENERATION_ATTEMPTS: usize = 1000;

/// A measured (squared) distance or bound between nodes `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub d2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub r: usize,
    pub n: usize,
    pub m: usize,
    /// Ground-truth sensor positions, `n x r`, when known.
    pub x_true: Option<DMatrix<f64>>,
    /// Centered anchor positions, `m x r`.
    pub anchors: DMatrix<f64>,
    pub translation: DVector<f64>,
    /// `None` means unlimited range.
    pub radio_range: Option<f64>,
    pub density: f64,
    pub seed: u64,
    pub noise_sigma: f64,
    pub square_half_width: f64,
    /// Measured squared distances for sensor-sensor and sensor-anchor pairs.
    pub edges: Vec<Edge>,
    pub upper_bounds: Vec<Edge>,
    pub lower_bounds: Vec<Edge>,
    /// Sensor cliques supplied explicitly, bypassing detection.
    pub cliques: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateParams {
    pub r: usize,
    pub n: usize,
    pub m: usize,
    /// `f64::INFINITY` for unlimited range.
    pub radio_range: f64,
    pub density: f64,
    pub noise_sigma: f64,
    pub square_half_width: f64,
    pub seed: u64,
    /// Add lower bounds `d >= range` for every pair out of radio range.
    pub out_of_range_bounds: bool,
}

/// The comparison family `r = 2, n = 16, m = 5`, range 0.15 and density 0.75.
/// With 21 points a 0.15 radio range rarely connects a 2 x 2 square, so the
/// default square has half-width 0.075.
impl Default for GenerateParams {
    fn default() -> Self {
        Self {
            r: 2,
            n: 16,
            m: 5,
            radio_range: 0.15,
            density: 0.75,
            noise_sigma: 0.05,
            square_half_width: 0.075,
            seed: 1,
            out_of_range_bounds: false,
        }
    }
}

impl GenerateParams {
    fn validate(&self) -> Result<()> {
        if !(self.n > self.m && self.m > self.r && self.r >= 1) {
            return Err(Error::InvalidParameter(format!(
                "need n > m > r >= 1, got n={}, m={}, r={}",
                self.n, self.m, self.r
            )));
        }
        if !(self.radio_range > 0.0) {
            return Err(Error::InvalidParameter("radio range must be positive".into()));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::InvalidParameter("density must lie in (0, 1]".into()));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::InvalidParameter("noise sigma must be nonnegative".into()));
        }
        if !(self.square_half_width > 0.0) || !self.square_half_width.is_finite() {
            return Err(Error::InvalidParameter("square half-width must be positive".into()));
        }
        Ok(())
    }
}

/// Draws a random instance, regenerating with `seed + 1, seed + 2, ...` until
/// the underlying graph (anchor clique included) is connected and the anchors
/// have full column rank. The returned instance records the seed that
/// succeeded, so generating from it again reproduces it in one attempt.
pub fn generate(params: &GenerateParams) -> Result<Instance> {
    params.validate()?;
    for attempt in 0..MAX_GENERATION_ATTEMPTS {
        let seed = params.seed.wrapping_add(attempt as u64);
        if let Some(inst) = generate_once(params, seed)? {
            return Ok(inst);
        }
    }
    Err(Error::ConnectivityUnreachable { attempts: MAX_GENERATION_ATTEMPTS })
}

fn generate_once(p: &GenerateParams, seed: u64) -> Result<Option<Instance>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = p.n + p.m;
    let h = p.square_half_width;
    let points = DMatrix::from_fn(total, p.r, |_, _| rng.gen_range(-h..=h));

    let x_raw = points.rows(0, p.n).into_owned();
    let a_raw = points.rows(p.n, p.m).into_owned();

    let mut edges = Vec::new();
    let mut lower = Vec::new();
    for i in 0..p.n {
        for j in i + 1..total {
            let d = (points.row(i) - points.row(j)).norm();
            // Always draw both variates so the stream does not depend on
            // which pairs survive.
            let keep: f64 = rng.gen();
            let z: f64 = rng.sample(StandardNormal);
            if d <= p.radio_range {
                if keep < p.density {
                    let noisy = d * (1.0 + p.noise_sigma * z);
                    edges.push(Edge { i, j, d2: noisy * noisy });
                }
            } else if p.out_of_range_bounds {
                lower.push(Edge { i, j, d2: p.radio_range * p.radio_range });
            }
        }
    }

    if !is_connected(p.n, p.m, &edges) {
        return Ok(None);
    }
    let (anchors, x_true, translation) = match center_anchors(&a_raw, &x_raw) {
        Ok(v) => v,
        Err(Error::RankDeficientAnchors { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    Ok(Some(Instance {
        r: p.r,
        n: p.n,
        m: p.m,
        x_true: Some(x_true),
        anchors,
        translation,
        radio_range: p.radio_range.is_finite().then_some(p.radio_range),
        density: p.density,
        seed,
        noise_sigma: p.noise_sigma,
        square_half_width: p.square_half_width,
        edges,
        upper_bounds: Vec::new(),
        lower_bounds: lower,
        cliques: None,
    }))
}

/// Connectivity of the graph on `n + m` nodes whose edges are `edges` plus
/// the complete anchor clique.
pub fn is_connected(n: usize, m: usize, edges: &[Edge]) -> bool {
    let total = n + m;
    if total == 0 {
        return true;
    }
    let mut parent: Vec<usize> = (0..total).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut union = |a: usize, b: usize| {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
        }
    };
    for k in 1..m {
        union(n, n + k);
    }
    for e in edges {
        union(e.i, e.j);
    }
    let root = find(&mut parent, 0);
    (1..total).all(|v| find(&mut parent, v) == root)
}

/// Translates anchors and sensors so that the anchors are centered.
/// Returns `(A, X, translation)` with `A = A_raw - e t^T`, `X = X_raw - e t^T`.
pub fn center_anchors(
    a_raw: &DMatrix<f64>,
    x_raw: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DVector<f64>)> {
    if a_raw.ncols() != x_raw.ncols() {
        return Err(Error::Dimension("anchor and sensor dimensions differ".into()));
    }
    check_full_column_rank(a_raw)?;
    let t = a_raw.row_mean().transpose();
    let shift = |m: &DMatrix<f64>| {
        let mut out = m.clone();
        for mut row in out.row_iter_mut() {
            row -= t.transpose();
        }
        out
    };
    Ok((shift(a_raw), shift(x_raw), t))
}

pub(crate) fn check_full_column_rank(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() < a.ncols() {
        return Err(Error::RankDeficientAnchors { smallest: 0.0, largest: 0.0 });
    }
    let sv = a.singular_values();
    let largest = sv.max();
    let smallest = sv.min();
    if !(smallest > 1e-10 * largest) {
        return Err(Error::RankDeficientAnchors { smallest, largest });
    }
    Ok(())
}

impl Instance {
    /// Validates the structural invariants.
    pub fn validate(&self) -> Result<()> {
        let (n, m, r) = (self.n, self.m, self.r);
        if !(n > m && m > r && r >= 1) {
            return Err(Error::InvalidInstance(format!(
                "need n > m > r >= 1, got n={n}, m={m}, r={r}"
            )));
        }
        if self.anchors.shape() != (m, r) {
            return Err(Error::InvalidInstance(format!(
                "anchors are {:?}, expected ({m}, {r})",
                self.anchors.shape()
            )));
        }
        if let Some(x) = &self.x_true {
            if x.shape() != (n, r) {
                return Err(Error::InvalidInstance(format!(
                    "x_true is {:?}, expected ({n}, {r})",
                    x.shape()
                )));
            }
        }
        if self.translation.len() != r {
            return Err(Error::InvalidInstance("translation length differs from r".into()));
        }
        let col_sums = self.anchors.row_sum();
        if col_sums.amax() > 1e-12 {
            return Err(Error::InvalidInstance(format!(
                "anchors are not centered: column sums {col_sums}"
            )));
        }
        check_full_column_rank(&self.anchors)
            .map_err(|e| Error::InvalidInstance(e.to_string()))?;

        let check_edges = |name: &str, list: &[Edge]| -> Result<()> {
            let mut seen = std::collections::HashSet::new();
            for e in list {
                if !(e.i < e.j && e.j < n + m && e.i < n) {
                    return Err(Error::InvalidInstance(format!(
                        "{name}: pair ({}, {}) must satisfy i < j, i a sensor",
                        e.i, e.j
                    )));
                }
                if !(e.d2 >= 0.0) || !e.d2.is_finite() {
                    return Err(Error::InvalidInstance(format!(
                        "{name}: pair ({}, {}) has invalid value {}",
                        e.i, e.j, e.d2
                    )));
                }
                if !seen.insert((e.i, e.j)) {
                    return Err(Error::InvalidInstance(format!(
                        "{name}: duplicate pair ({}, {})",
                        e.i, e.j
                    )));
                }
            }
            Ok(())
        };
        check_edges("edges", &self.edges)?;
        check_edges("upper_bounds", &self.upper_bounds)?;
        check_edges("lower_bounds", &self.lower_bounds)?;
        if let Some(cliques) = &self.cliques {
            for c in cliques {
                if c.iter().any(|&v| v >= n) {
                    return Err(Error::InvalidInstance("clique lists a non-sensor node".into()));
                }
            }
        }
        Ok(())
    }

    /// `P = [X; A]` when ground truth is known.
    pub fn true_configuration(&self) -> Option<DMatrix<f64>> {
        let x = self.x_true.as_ref()?;
        let mut p = DMatrix::zeros(self.n + self.m, self.r);
        p.rows_mut(0, self.n).copy_from(x);
        p.rows_mut(self.n, self.m).copy_from(&self.anchors);
        Some(p)
    }

    pub fn sensor_sensor_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.j < self.n).count()
    }

    pub fn sensor_anchor_edges(&self) -> usize {
        self.edges.len() - self.sensor_sensor_edges()
    }

    pub fn is_connected(&self) -> bool {
        is_connected(self.n, self.m, &self.edges)
    }
}

/// The partial squared-distance matrix over all `n + m` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialEdm {
    pub n: usize,
    pub m: usize,
    pub e: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub hu: Pattern,
    pub hl: Pattern,
    pub ub: DMatrix<f64>,
    pub lb: DMatrix<f64>,
    /// Sensor-sensor known pairs.
    pub ne: Vec<(usize, usize)>,
    /// Sensor-anchor known pairs.
    pub me: Vec<(usize, usize)>,
    pub nu: Vec<(usize, usize)>,
    pub mu: Vec<(usize, usize)>,
    pub nl: Vec<(usize, usize)>,
    pub ml: Vec<(usize, usize)>,
}

/// `K(sBlk_2(AA^T))` embedded at order `n + m`.
pub fn anchor_distance_block(n: usize, a: &DMatrix<f64>) -> DMatrix<f64> {
    let m = a.nrows();
    let mut g = DMatrix::zeros(n + m, n + m);
    g.view_mut((n, n), (m, m)).copy_from(&(a * a.transpose()));
    edm::k_op(&g)
}

/// Builds the weighted partial EDM with 0/1 weights on known pairs and on the
/// anchor clique.
pub fn build_partial_edm(inst: &Instance) -> Result<PartialEdm> {
    inst.validate()?;
    let (n, m) = (inst.n, inst.m);
    let total = n + m;
    let mut e = anchor_distance_block(n, &inst.anchors);
    let mut w = DMatrix::zeros(total, total);
    for i in n..total {
        for j in n..total {
            if i != j {
                w[(i, j)] = 1.0;
            }
        }
    }
    let (mut ne, mut me) = (Vec::new(), Vec::new());
    for edge in &inst.edges {
        e[(edge.i, edge.j)] = edge.d2;
        e[(edge.j, edge.i)] = edge.d2;
        w[(edge.i, edge.j)] = 1.0;
        w[(edge.j, edge.i)] = 1.0;
        if edge.j < n { &mut ne } else { &mut me }.push((edge.i, edge.j));
    }

    let fill = |list: &[Edge]| {
        let mut mat = DMatrix::zeros(total, total);
        let (mut ss, mut sa) = (Vec::new(), Vec::new());
        for b in list {
            mat[(b.i, b.j)] = b.d2;
            mat[(b.j, b.i)] = b.d2;
            if b.j < n { &mut ss } else { &mut sa }.push((b.i, b.j));
        }
        (mat, ss, sa)
    };
    let (ub, nu, mu) = fill(&inst.upper_bounds);
    let (lb, nl, ml) = fill(&inst.lower_bounds);
    let hu = Pattern::from_pairs(total, inst.upper_bounds.iter().map(|b| (b.i, b.j)));
    let hl = Pattern::from_pairs(total, inst.lower_bounds.iter().map(|b| (b.i, b.j)));

    for &(i, j) in hu.pairs() {
        if hl.pairs().binary_search(&(i, j)).is_ok() && lb[(i, j)] > ub[(i, j)] {
            return Err(Error::ContradictoryBounds(format!(
                "pair ({i}, {j}): lower bound {} exceeds upper bound {}",
                lb[(i, j)],
                ub[(i, j)]
            )));
        }
    }

    Ok(PartialEdm { n, m, e, w, hu, hl, ub, lb, ne, me, nu, mu, nl, ml })
}

impl PartialEdm {
    pub fn order(&self) -> usize {
        self.n + self.m
    }

    /// Symmetric relabeling: node `perm[k]` of `self` becomes node `k`.
    pub fn permuted(&self, perm: &[usize]) -> PartialEdm {
        let total = self.order();
        debug_assert_eq!(perm.len(), total);
        let mut inv = vec![0; total];
        for (k, &p) in perm.iter().enumerate() {
            inv[p] = k;
        }
        let pm = |a: &DMatrix<f64>| DMatrix::from_fn(total, total, |i, j| a[(perm[i], perm[j])]);
        let map_pairs = |v: &[(usize, usize)]| -> Vec<(usize, usize)> {
            let mut out: Vec<_> = v
                .iter()
                .map(|&(i, j)| {
                    let (a, b) = (inv[i], inv[j]);
                    if a < b { (a, b) } else { (b, a) }
                })
                .collect();
            out.sort_unstable();
            out
        };
        let pattern = |p: &Pattern| {
            Pattern::from_pairs(total, p.pairs().iter().map(|&(i, j)| (inv[i], inv[j])))
        };
        PartialEdm {
            n: self.n,
            m: self.m,
            e: pm(&self.e),
            w: pm(&self.w),
            hu: pattern(&self.hu),
            hl: pattern(&self.hl),
            ub: pm(&self.ub),
            lb: pm(&self.lb),
            ne: map_pairs(&self.ne),
            me: map_pairs(&self.me),
            nu: map_pairs(&self.nu),
            mu: map_pairs(&self.mu),
            nl: map_pairs(&self.nl),
            ml: map_pairs(&self.ml),
        }
    }

    /// Whether the distance between `i` and `j` is known (measured or between
    /// anchors).
    pub fn is_known(&self, i: usize, j: usize) -> bool {
        i == j || self.w[(i, j)] > 0.0
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
        for i in 0..self.order() {
            wtr.write_record(self.e.row(i).iter().map(|v| format!("{v:.17e}")))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Constants obtained by moving the fixed anchor block to the data side.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedConstants {
    pub ebar: DMatrix<f64>,
    pub ubar: DMatrix<f64>,
    pub lbar: DMatrix<f64>,
}

/// `Ebar = W o (E - K(sBlk_2(AA^T)))`, `Ubar = H_u o (U^b - K(sBlk_2(AA^T)))`,
/// `Lbar = H_l o (L^b - K(sBlk_2(AA^T)))`.
pub fn derive_constants(pe: &PartialEdm, a: &DMatrix<f64>) -> DerivedConstants {
    let ka = anchor_distance_block(pe.n, a);
    let ebar = pe.w.component_mul(&(&pe.e - &ka));
    let ubar = pe.hu.indicator().component_mul(&(&pe.ub - &ka));
    let lbar = pe.hl.indicator().component_mul(&(&pe.lb - &ka));
    DerivedConstants { ebar, ubar, lbar }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    format_version: u32,
    r: usize,
    n: usize,
    m: usize,
    seed: u64,
    radio_range: Option<f64>,
    density: f64,
    noise_sigma: f64,
    square_half_width: f64,
    translation: Vec<f64>,
    anchors: Vec<Vec<f64>>,
    x_true: Option<Vec<Vec<f64>>>,
    edges: Vec<Edge>,
    #[serde(default)]
    upper_bounds: Vec<Edge>,
    #[serde(default)]
    lower_bounds: Vec<Edge>,
    #[serde(default)]
    cliques: Option<Vec<Vec<usize>>>,
}

pub(crate) fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn from_rows(name: &str, rows: &[Vec<f64>], ncols: usize) -> Result<DMatrix<f64>> {
    if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
        return Err(Error::InvalidInstance(format!(
            "{name}: row {bad} has {} entries, expected {ncols}",
            rows[bad].len()
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

impl Instance {
    pub fn to_json(&self) -> Result<String> {
        let file = InstanceFile {
            format_version: FORMAT_VERSION,
            r: self.r,
            n: self.n,
            m: self.m,
            seed: self.seed,
            radio_range: self.radio_range,
            density: self.density,
            noise_sigma: self.noise_sigma,
            square_half_width: self.square_half_width,
            translation: self.translation.iter().copied().collect(),
            anchors: rows_of(&self.anchors),
            x_true: self.x_true.as_ref().map(rows_of),
            edges: self.edges.clone(),
            upper_bounds: self.upper_bounds.clone(),
            lower_bounds: self.lower_bounds.clone(),
            cliques: self.cliques.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::InvalidInstance("missing field `format_version`".into()))?;
        if found != FORMAT_VERSION as u64 {
            return Err(Error::FormatVersion { found: found as u32, expected: FORMAT_VERSION });
        }
        let f: InstanceFile = serde_json::from_value(value)?;
        let anchors = from_rows("anchors", &f.anchors, f.r)?;
        let x_true = f.x_true.as_deref().map(|x| from_rows("x_true", x, f.r)).transpose()?;
        let inst = Instance {
            r: f.r,
            n: f.n,
            m: f.m,
            x_true,
            anchors,
            translation: DVector::from_vec(f.translation),
            radio_range: f.radio_range,
            density: f.density,
            seed: f.seed,
            noise_sigma: f.noise_sigma,
            square_half_width: f.square_half_width,
            edges: f.edges,
            upper_bounds: f.upper_bounds,
            lower_bounds: f.lower_bounds,
            cliques: f.cliques,
        };
        inst.validate()?;
        Ok(inst)
    }
}

pub fn save_instance(inst: &Instance, path: &Path) -> Result<()> {
    let text = inst.to_json()?;
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn load_instance(path: &Path) -> Result<Instance> {
    Instance::from_json(&fs::read_to_string(path)?)
}

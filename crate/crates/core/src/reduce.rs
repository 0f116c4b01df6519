//! Facial reduction. Builds the block-diagonal congruence
//! `F = I ⊕ U_2 ⊕ ... ⊕ U_k ⊕ T` (terminal `T = A` or `T = U` from the
//! anchor SVD) so that every feasible Gram matrix of the relaxation is
//! `Ybar = F Z F^T` with a smaller `Z` that admits a positive definite point.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::edm;
use crate::error::{Error, Result};
use crate::linalg::sorted_sym_eigen;
use crate::model::PartialEdm;

/// Eigenvalues of `B + 2ee^T` at or below this fraction of the largest are
/// treated as zero.
pub const FACE_RANK_TOL: f64 = 1e-8;

/// An eigenvalue tail above this fraction of the largest eigenvalue means the
/// clique distances cannot be realized in dimension `r`.
pub const FACE_TAIL_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorFace {
    /// `m x r` with orthonormal columns.
    pub u: DMatrix<f64>,
    /// Singular values in descending order.
    pub sigma: DVector<f64>,
    /// `r x r` right singular vectors, `A = U diag(sigma) V^T`.
    pub v: DMatrix<f64>,
}

/// Compact SVD of the (centered, full column rank) anchor matrix.
pub fn anchor_face(a: &DMatrix<f64>) -> Result<AnchorFace> {
    let r = a.ncols();
    if a.nrows() < r {
        return Err(Error::RankDeficientAnchors { smallest: 0.0, largest: 0.0 });
    }
    let svd = a.clone().svd(true, true);
    let u_full = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sigma = DVector::from_iterator(r, order.iter().map(|&k| svd.singular_values[k]));
    let largest = sigma[0];
    let smallest = sigma[r - 1];
    if !(smallest > 1e-10 * largest) {
        return Err(Error::RankDeficientAnchors { smallest, largest });
    }
    let mut u = DMatrix::zeros(a.nrows(), r);
    let mut v = DMatrix::zeros(r, r);
    for (dst, &src) in order.iter().enumerate() {
        u.set_column(dst, &u_full.column(src));
        v.set_column(dst, &vt.row(src).transpose());
    }
    Ok(AnchorFace { u, sigma, v })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliqueFace {
    /// `p x r2` with orthonormal columns spanning the range of `B + 2ee^T`.
    pub u2: DMatrix<f64>,
    pub r2: usize,
    /// `B = K^dagger(E2)`, the centered Gram matrix of the clique.
    pub b: DMatrix<f64>,
    /// All eigenvalues of `B + 2ee^T`, descending.
    pub eigenvalues: DVector<f64>,
}

/// Face of the PSD cone containing every Gram matrix consistent with the
/// clique's distance matrix `e2`.
pub fn clique_face(e2: &DMatrix<f64>, r: usize) -> Result<CliqueFace> {
    let p = e2.nrows();
    if p == 0 || !e2.is_square() {
        return Err(Error::InvalidClique("clique distance matrix must be square and nonempty".into()));
    }
    if !edm::is_symmetric(e2, 1e-12 * (1.0 + e2.amax())) {
        return Err(Error::InvalidClique("clique distance matrix is not symmetric".into()));
    }
    if e2.diagonal().amax() != 0.0 || e2.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidClique("clique distance matrix must be hollow and nonnegative".into()));
    }
    let b = edm::k_dagger(e2);
    let mut b_hat = b.clone();
    b_hat.add_scalar_mut(2.0);
    let (vals, vecs) = sorted_sym_eigen(&b_hat);
    let lmax = vals[0].max(f64::MIN_POSITIVE);

    let b_min = edm::lambda_min(&b);
    if b_min < -FACE_TAIL_TOL * lmax {
        return Err(Error::NotEdm { eigenvalue: b_min });
    }

    let raw_rank = vals.iter().filter(|&&v| v > FACE_RANK_TOL * lmax).count();
    let max_rank = (r + 1).min(p);
    let r2 = if raw_rank > max_rank {
        let tail: Vec<f64> = vals.iter().skip(max_rank).copied().collect();
        if tail[0] > FACE_TAIL_TOL * lmax {
            return Err(Error::InconsistentClique { r, rank: raw_rank, max: max_rank, tail });
        }
        max_rank
    } else {
        raw_rank.max(1)
    };
    let u2 = vecs.columns(0, r2).into_owned();
    Ok(CliqueFace { u2, r2, b, eigenvalues: vals })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TerminalKind {
    /// Terminal block `U` from the anchor SVD, with `Z_kk = Sigma_r^2`.
    SForm,
    /// Terminal block `A`, with `Z_kk = I_r`.
    #[default]
    AForm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceBasis {
    /// Diagonal blocks in order: identity for free sensors (omitted when there
    /// are none), one `U_i` per clique, then the terminal block.
    pub blocks: Vec<DMatrix<f64>>,
    pub terminal_kind: TerminalKind,
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
    pub n_free: usize,
}

/// Assembles `I_{n_free} ⊕ U_2 ⊕ ... ⊕ U_k ⊕ terminal`.
pub fn compose_face(
    n_free: usize,
    cliques: &[DMatrix<f64>],
    a: &DMatrix<f64>,
    kind: TerminalKind,
) -> Result<FaceBasis> {
    let af = anchor_face(a)?;
    let mut blocks = Vec::with_capacity(cliques.len() + 2);
    if n_free > 0 {
        blocks.push(DMatrix::identity(n_free, n_free));
    }
    for (k, u) in cliques.iter().enumerate() {
        if u.ncols() == 0 || u.ncols() > u.nrows() {
            return Err(Error::Dimension(format!(
                "clique block {k} is {}x{}",
                u.nrows(),
                u.ncols()
            )));
        }
        blocks.push(u.clone());
    }
    blocks.push(match kind {
        TerminalKind::AForm => a.clone(),
        TerminalKind::SForm => af.u.clone(),
    });
    Ok(FaceBasis { blocks, terminal_kind: kind, sigma: af.sigma, v: af.v, n_free })
}

impl FaceBasis {
    pub fn total_rows(&self) -> usize {
        self.blocks.iter().map(|b| b.nrows()).sum()
    }

    pub fn reduced_order(&self) -> usize {
        self.blocks.iter().map(|b| b.ncols()).sum()
    }

    pub fn r(&self) -> usize {
        self.sigma.len()
    }

    pub fn sensor_count(&self) -> usize {
        self.total_rows() - self.terminal().nrows()
    }

    /// Columns of the sensor part of `Z`.
    pub fn sensor_order(&self) -> usize {
        self.reduced_order() - self.r()
    }

    pub fn terminal(&self) -> &DMatrix<f64> {
        self.blocks.last().expect("terminal block always present")
    }

    /// Block-diagonal matrix of all blocks.
    pub fn matrix(&self) -> DMatrix<f64> {
        block_diag(&self.blocks)
    }

    /// Block-diagonal of the sensor blocks only, `n x n_red`.
    pub fn sensor_basis(&self) -> DMatrix<f64> {
        block_diag(&self.blocks[..self.blocks.len() - 1])
    }

    /// Required value of the terminal diagonal block of `Z`.
    pub fn terminal_value(&self) -> DMatrix<f64> {
        match self.terminal_kind {
            TerminalKind::AForm => DMatrix::identity(self.r(), self.r()),
            TerminalKind::SForm => DMatrix::from_diagonal(&self.sigma.map(|s| s * s)),
        }
    }

    /// `F Z F^T`.
    pub fn assemble(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if z.nrows() != self.reduced_order() || z.ncols() != self.reduced_order() {
            return Err(Error::Dimension(format!(
                "Z is {}x{}, face expects order {}",
                z.nrows(),
                z.ncols(),
                self.reduced_order()
            )));
        }
        let f = self.matrix();
        Ok(&f * z * f.transpose())
    }

    /// Congruence carrying an A-form `Z` to the s-form `Z` giving the same
    /// `Ybar`: `I ⊕ Sigma V^T`.
    pub fn a_to_s_congruence(&self) -> DMatrix<f64> {
        let ns = self.sensor_order();
        let r = self.r();
        let mut c = DMatrix::identity(ns + r, ns + r);
        let sv = DMatrix::from_diagonal(&self.sigma) * self.v.transpose();
        c.view_mut((ns, ns), (r, r)).copy_from(&sv);
        c
    }

    /// The reduced `Z` realizing the configuration `p` (rows in the face's
    /// node order, anchors last), i.e. `Y_red = X_red X_red^T` with the
    /// terminal block fixed.
    pub fn lift_configuration(&self, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let nsens = self.sensor_count();
        let r = self.r();
        if p.nrows() != self.total_rows() || p.ncols() != r {
            return Err(Error::Dimension("configuration does not match face".into()));
        }
        let us = self.sensor_basis();
        let x_red = us.transpose() * p.rows(0, nsens);
        let x_term = match self.terminal_kind {
            TerminalKind::AForm => DMatrix::identity(r, r),
            TerminalKind::SForm => DMatrix::from_diagonal(&self.sigma) * self.v.transpose(),
        };
        let stacked = stack(&x_red, &x_term);
        Ok(&stacked * stacked.transpose())
    }

    /// A strictly feasible reduced point built from the configuration `p`.
    /// Each sensor block keeps its own Gram matrix (cross-block products are
    /// dropped), clique blocks are shifted by the distance-preserving
    /// `De(delta e) = 2 delta ee^T` and free sensors by `delta I`. The sensor
    /// coordinates coupling to the terminal block are scaled by
    /// `1 / (2 sqrt(k))` for `k` sensor blocks, which keeps the Schur
    /// complement positive definite. The result has `lambda_min > 0` and
    /// reproduces every clique distance and the anchor block exactly.
    pub fn slater_point(&self, p: &DMatrix<f64>, delta: f64) -> Result<DMatrix<f64>> {
        let nsens = self.sensor_count();
        let r = self.r();
        if p.nrows() != self.total_rows() || p.ncols() != r {
            return Err(Error::Dimension("configuration does not match face".into()));
        }
        let us = self.sensor_basis();
        let x_red = us.transpose() * p.rows(0, nsens);
        let ns = self.sensor_order();
        let sensor_blocks = &self.blocks[..self.blocks.len() - 1];
        let mut y = DMatrix::zeros(ns, ns);
        let mut col = 0;
        for (k, b) in sensor_blocks.iter().enumerate() {
            let w = b.ncols();
            let xb = x_red.rows(col, w);
            let shift = if k == 0 && self.n_free > 0 {
                DMatrix::identity(w, w) * delta
            } else {
                let e = DVector::from_element(b.nrows(), 1.0);
                let ue = b.transpose() * e;
                &ue * ue.transpose() * (2.0 * delta)
            };
            y.view_mut((col, col), (w, w)).copy_from(&(xb * xb.transpose() + shift));
            col += w;
        }
        debug_assert_eq!(col, ns);
        let scaled = &x_red * (0.5 / (sensor_blocks.len().max(1) as f64).sqrt());
        let (z_sk, z_kk) = match self.terminal_kind {
            TerminalKind::AForm => (scaled, DMatrix::identity(r, r)),
            TerminalKind::SForm => (
                scaled * &self.v * DMatrix::from_diagonal(&self.sigma),
                self.terminal_value(),
            ),
        };
        let mut z = DMatrix::zeros(ns + r, ns + r);
        z.view_mut((0, 0), (ns, ns)).copy_from(&y);
        z.view_mut((0, ns), (ns, r)).copy_from(&z_sk);
        z.view_mut((ns, 0), (r, ns)).copy_from(&z_sk.transpose());
        z.view_mut((ns, ns), (r, r)).copy_from(&z_kk);
        Ok(z)
    }
}

fn stack(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut i, mut j) = (0, 0);
    for b in blocks {
        out.view_mut((i, j), b.shape()).copy_from(b);
        i += b.nrows();
        j += b.ncols();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CliqueKind {
    AnchorClique,
    SensorClique,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliqueSpec {
    pub nodes: Vec<usize>,
    pub kind: CliqueKind,
}

impl CliqueSpec {
    pub fn sensors(nodes: Vec<usize>) -> Self {
        Self { nodes, kind: CliqueKind::SensorClique }
    }
}

/// Checks that `cliques` are disjoint sensor cliques of size at least `r + 2`
/// whose pairwise distances are all known.
pub fn validate_cliques(pe: &PartialEdm, r: usize, cliques: &[CliqueSpec]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for (k, c) in cliques.iter().enumerate() {
        if c.kind != CliqueKind::SensorClique {
            return Err(Error::InvalidClique(format!("clique {k} is not a sensor clique")));
        }
        if c.nodes.len() < r + 2 {
            return Err(Error::InvalidClique(format!(
                "clique {k} has {} nodes, at least r + 2 = {} are needed for a reduction",
                c.nodes.len(),
                r + 2
            )));
        }
        for (a, &i) in c.nodes.iter().enumerate() {
            if i >= pe.n {
                return Err(Error::InvalidClique(format!("clique {k}: node {i} is not a sensor")));
            }
            if !seen.insert(i) {
                return Err(Error::InvalidClique(format!("node {i} appears in more than one clique")));
            }
            for &j in &c.nodes[a + 1..] {
                if !pe.is_known(i, j) {
                    return Err(Error::InvalidClique(format!(
                        "clique {k}: distance between {i} and {j} is unknown"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Symmetric permutation placing free sensors first, then each clique
/// contiguously, then the anchors. `perm[k]` is the original index of the node
/// placed at position `k`.
pub fn permute_for_cliques(pe: &PartialEdm, cliques: &[CliqueSpec]) -> (PartialEdm, Vec<usize>) {
    let in_clique: BTreeSet<usize> = cliques.iter().flat_map(|c| c.nodes.iter().copied()).collect();
    let mut perm: Vec<usize> = (0..pe.n).filter(|i| !in_clique.contains(i)).collect();
    for c in cliques {
        perm.extend(c.nodes.iter().copied());
    }
    perm.extend(pe.n..pe.n + pe.m);
    (pe.permuted(&perm), perm)
}

pub fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    inv
}

/// Greedy disjoint clique search in the known sensor-sensor graph: seed at
/// the highest-degree unused sensor, grow by the candidate with most
/// neighbours inside the common neighbourhood. Ties go to the smaller index.
pub fn find_sensor_cliques(pe: &PartialEdm, r: usize, min_size: usize) -> Result<Vec<CliqueSpec>> {
    if min_size < r + 2 {
        return Err(Error::InvalidParameter(format!(
            "minimum clique size {min_size} is below r + 2 = {}",
            r + 2
        )));
    }
    let n = pe.n;
    let adj: Vec<BTreeSet<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i && pe.w[(i, j)] > 0.0).collect())
        .collect();
    let mut used = BTreeSet::new();
    let mut tried = BTreeSet::new();
    let mut found = Vec::new();
    loop {
        let seed = (0..n)
            .filter(|i| !used.contains(i) && !tried.contains(i))
            .max_by(|&a, &b| {
                let da = adj[a].iter().filter(|v| !used.contains(*v)).count();
                let db = adj[b].iter().filter(|v| !used.contains(*v)).count();
                da.cmp(&db).then(b.cmp(&a))
            });
        let Some(seed) = seed else { break };
        let mut clique = vec![seed];
        let mut cand: BTreeSet<usize> = adj[seed].iter().copied().filter(|v| !used.contains(v)).collect();
        while !cand.is_empty() {
            let next = *cand
                .iter()
                .max_by(|&&a, &&b| {
                    let da = adj[a].intersection(&cand).count();
                    let db = adj[b].intersection(&cand).count();
                    da.cmp(&db).then(b.cmp(&a))
                })
                .expect("nonempty");
            clique.push(next);
            cand = cand.intersection(&adj[next]).copied().collect();
        }
        if clique.len() >= min_size {
            clique.sort_unstable();
            used.extend(clique.iter().copied());
            found.push(CliqueSpec::sensors(clique));
        } else {
            tried.insert(seed);
        }
    }
    Ok(found)
}

/// A permuted partial EDM together with its face.
#[derive(Debug, Clone)]
pub struct Reduction {
    /// Partial EDM in face order (free sensors, cliques, anchors).
    pub pe: PartialEdm,
    pub perm: Vec<usize>,
    pub face: FaceBasis,
    /// Cliques in original node numbering.
    pub cliques: Vec<CliqueSpec>,
    pub clique_faces: Vec<CliqueFace>,
}

impl Reduction {
    /// Brings a matrix over the face's node order back to the original order.
    pub fn unpermute_sym(&self, s: &DMatrix<f64>) -> DMatrix<f64> {
        let inv = invert_permutation(&self.perm);
        let k = s.nrows();
        DMatrix::from_fn(k, k, |i, j| s[(inv[i], inv[j])])
    }

    /// Rows of `rows_in_face_order` back to original order.
    pub fn unpermute_rows(&self, rows_in_face_order: &DMatrix<f64>) -> DMatrix<f64> {
        let inv = invert_permutation(&self.perm);
        DMatrix::from_fn(rows_in_face_order.nrows(), rows_in_face_order.ncols(), |i, j| {
            rows_in_face_order[(inv[i], j)]
        })
    }

    pub fn permute_rows(&self, rows: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(rows.nrows(), rows.ncols(), |i, j| rows[(self.perm[i], j)])
    }
}

/// Validates the cliques, permutes, computes each clique face and composes
/// the full face.
pub fn reduce(
    pe: &PartialEdm,
    a: &DMatrix<f64>,
    cliques: &[CliqueSpec],
    kind: TerminalKind,
) -> Result<Reduction> {
    let r = a.ncols();
    validate_cliques(pe, r, cliques)?;
    let (ppe, perm) = permute_for_cliques(pe, cliques);
    let n_clique: usize = cliques.iter().map(|c| c.nodes.len()).sum();
    let n_free = pe.n - n_clique;
    let mut offset = n_free;
    let mut faces = Vec::with_capacity(cliques.len());
    for c in cliques {
        let p = c.nodes.len();
        let e2 = ppe.e.view((offset, offset), (p, p)).into_owned();
        faces.push(clique_face(&e2, r)?);
        offset += p;
    }
    let blocks: Vec<DMatrix<f64>> = faces.iter().map(|f| f.u2.clone()).collect();
    let face = compose_face(n_free, &blocks, a, kind)?;
    Ok(Reduction { pe: ppe, perm, face, cliques: cliques.to_vec(), clique_faces: faces })
}

/// Reduction using the anchor face only.
pub fn anchor_only(pe: &PartialEdm, a: &DMatrix<f64>, kind: TerminalKind) -> Result<Reduction> {
    reduce(pe, a, &[], kind)
}

/// Indices of the anchor block in `0..n+m`.
pub fn anchor_range(pe: &PartialEdm) -> std::ops::Range<usize> {
    pe.n..pe.n + pe.m
}

/// Distances among the clique nodes computed from a configuration.
pub fn clique_distances(p: &DMatrix<f64>, nodes: &[usize]) -> DMatrix<f64> {
    let k = nodes.len();
    DMatrix::from_fn(k, k, |i, j| (p.row(nodes[i]) - p.row(nodes[j])).norm_squared())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_partial_edm, generate, GenerateParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn anchor_face_reconstructs() {
        let a = DMatrix::from_row_slice(3, 2, &[1., 0., -1., 1., 0., -1.]);
        let f = anchor_face(&a).unwrap();
        let back = &f.u * DMatrix::from_diagonal(&f.sigma) * f.v.transpose();
        assert!((back - &a).amax() <= 1e-12);
        assert!((f.u.transpose() * &f.u - DMatrix::identity(2, 2)).amax() < 1e-12);
        assert!(f.sigma.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn anchor_face_orthogonal_columns() {
        let a = DMatrix::from_row_slice(4, 2, &[3., 0., -3., 0., 0., 1., 0., -1.]);
        let f = anchor_face(&a).unwrap();
        assert!((f.sigma[0] - 18f64.sqrt()).abs() < 1e-12);
        assert!((f.sigma[1] - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn anchor_face_rank_one_fails() {
        let a = DMatrix::from_row_slice(3, 2, &[1., 2., -2., -4., 1., 2.]);
        assert!(matches!(anchor_face(&a), Err(Error::RankDeficientAnchors { .. })));
    }

    #[test]
    fn clique_face_two_points() {
        let e2 = DMatrix::from_row_slice(2, 2, &[0., 1., 1., 0.]);
        let f = clique_face(&e2, 1).unwrap();
        assert!((&f.b - DMatrix::from_row_slice(2, 2, &[0.25, -0.25, -0.25, 0.25])).amax() < 1e-15);
        assert!((f.eigenvalues[0] - 4.0).abs() < 1e-12);
        assert!((f.eigenvalues[1] - 0.5).abs() < 1e-12);
        assert_eq!(f.r2, 2);
    }

    #[test]
    fn clique_face_coincident_points() {
        for p in [2, 3, 5] {
            let f = clique_face(&DMatrix::zeros(p, p), 2).unwrap();
            assert_eq!(f.r2, 1);
            assert_eq!(f.b, DMatrix::zeros(p, p));
            let e = DVector::from_element(p, 1.0 / (p as f64).sqrt());
            assert!((f.u2.column(0) - e).amax() < 1e-12);
        }
    }

    #[test]
    fn clique_face_planar_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = DMatrix::from_fn(4, 2, |_, _| rng.gen_range(-1.0..1.0));
        let e2 = edm::k_op(&(&p * p.transpose()));
        let f = clique_face(&e2, 2).unwrap();
        assert!(f.r2 <= 3);
        assert!((edm::k_op(&f.b) - &e2).amax() < 1e-10);
        // The true Gram matrix lies in the face.
        let g = &p * p.transpose();
        let proj = &f.u2 * f.u2.transpose() * &g * &f.u2 * f.u2.transpose();
        assert!((proj - g).amax() < 1e-10);
    }

    #[test]
    fn clique_face_rejects_unrealizable() {
        // Four mutually equidistant points need dimension 3.
        let mut e2 = DMatrix::from_element(4, 4, 1.0);
        e2.fill_diagonal(0.0);
        assert!(matches!(clique_face(&e2, 2), Err(Error::InconsistentClique { .. })));
        assert!(clique_face(&e2, 3).is_ok());
        // Violates the triangle inequality: not an EDM.
        let bad = DMatrix::from_row_slice(3, 3, &[0., 1., 16., 1., 0., 1., 16., 1., 0.]);
        assert!(matches!(clique_face(&bad, 2), Err(Error::NotEdm { .. }) | Err(Error::InconsistentClique { .. })));
    }

    fn instance() -> crate::model::Instance {
        generate(&GenerateParams {
            r: 2,
            n: 9,
            m: 3,
            radio_range: f64::INFINITY,
            density: 1.0,
            noise_sigma: 0.0,
            square_half_width: 1.0,
            seed: 5,
            out_of_range_bounds: false,
        })
        .unwrap()
    }

    #[test]
    fn compose_without_cliques_is_us() {
        let inst = instance();
        let f = compose_face(inst.n, &[], &inst.anchors, TerminalKind::SForm).unwrap();
        let af = anchor_face(&inst.anchors).unwrap();
        let mut us = DMatrix::zeros(inst.n + inst.m, inst.n + 2);
        us.view_mut((0, 0), (inst.n, inst.n)).fill_with_identity();
        us.view_mut((inst.n, inst.n), (inst.m, 2)).copy_from(&af.u);
        assert_eq!(f.matrix(), us);
        assert_eq!(f.reduced_order(), inst.n + 2);
    }

    #[test]
    fn one_clique_layout_and_order_drop() {
        let inst = instance();
        let pe = build_partial_edm(&inst).unwrap();
        let clique = CliqueSpec::sensors(vec![2, 4, 5, 7, 8]);
        let red = reduce(&pe, &inst.anchors, &[clique], TerminalKind::AForm).unwrap();
        let r2 = red.clique_faces[0].r2;
        assert_eq!(r2, 3);
        assert_eq!(red.face.reduced_order(), 4 + r2 + 2);
        assert_eq!(red.face.blocks.len(), 3);
        assert_eq!(red.face.blocks[1].shape(), (5, 3));
        assert_eq!(&red.face.blocks[2], &inst.anchors);
        let unreduced = inst.n + 2;
        assert!(unreduced - red.face.reduced_order() >= 5 - 2 - 1);
    }

    #[test]
    fn overlapping_cliques_rejected() {
        let inst = instance();
        let pe = build_partial_edm(&inst).unwrap();
        let c1 = CliqueSpec::sensors(vec![0, 1, 2, 3]);
        let c2 = CliqueSpec::sensors(vec![3, 4, 5, 6]);
        assert!(matches!(
            reduce(&pe, &inst.anchors, &[c1, c2], TerminalKind::AForm),
            Err(Error::InvalidClique(_))
        ));
        let small = CliqueSpec::sensors(vec![0, 1, 2]);
        assert!(reduce(&pe, &inst.anchors, &[small], TerminalKind::AForm).is_err());
    }

    #[test]
    fn permutation_round_trip() {
        let inst = instance();
        let pe = build_partial_edm(&inst).unwrap();
        let (same, perm) = permute_for_cliques(&pe, &[]);
        assert_eq!(perm, (0..inst.n + inst.m).collect::<Vec<_>>());
        assert_eq!(same, pe);

        let c = CliqueSpec::sensors(vec![1, 6, 3, 8]);
        let (ppe, perm) = permute_for_cliques(&pe, &[c]);
        let inv = invert_permutation(&perm);
        assert_eq!(ppe.permuted(&inv), pe);
        for i in 0..pe.order() {
            for j in 0..pe.order() {
                assert_eq!(ppe.e[(i, j)], pe.e[(perm[i], perm[j])]);
            }
        }
    }

    #[test]
    fn greedy_cliques_on_complete_graph() {
        let inst = generate(&GenerateParams {
            r: 2,
            n: 6,
            m: 3,
            radio_range: f64::INFINITY,
            density: 1.0,
            noise_sigma: 0.0,
            square_half_width: 1.0,
            seed: 1,
            out_of_range_bounds: false,
        })
        .unwrap();
        let pe = build_partial_edm(&inst).unwrap();
        let found = find_sensor_cliques(&pe, 2, 4).unwrap();
        assert_eq!(found, vec![CliqueSpec::sensors((0..6).collect())]);

        let mut empty = inst.clone();
        empty.edges.retain(|e| e.j >= empty.n);
        let pe = build_partial_edm(&empty).unwrap();
        assert!(find_sensor_cliques(&pe, 2, 4).unwrap().is_empty());
        assert!(find_sensor_cliques(&pe, 2, 3).is_err());
    }

    #[test]
    fn slater_point_is_interior_and_preserves_distances() {
        let inst = instance();
        let pe = build_partial_edm(&inst).unwrap();
        let clique = CliqueSpec::sensors(vec![0, 3, 5, 6]);
        for kind in [TerminalKind::AForm, TerminalKind::SForm] {
            let red = reduce(&pe, &inst.anchors, std::slice::from_ref(&clique), kind).unwrap();
            let p = red.permute_rows(&inst.true_configuration().unwrap());
            let z_true = red.face.lift_configuration(&p).unwrap();
            let ybar = red.face.assemble(&z_true).unwrap();
            assert!((&ybar - &p * p.transpose()).amax() < 1e-10);

            let z = red.face.slater_point(&p, 0.1).unwrap();
            assert!(edm::lambda_min(&z) > 0.0);
            let y = red.face.assemble(&z).unwrap();
            let (o, k) = (red.face.n_free, 4);
            let e_clique = edm::k_op(&y.view((o, o), (k, k)).into_owned());
            assert!((e_clique - red.pe.e.view((o, o), (k, k))).amax() < 1e-10);
            let aat = &inst.anchors * inst.anchors.transpose();
            assert!((y.view((inst.n, inst.n), (inst.m, inst.m)) - aat).amax() < 1e-10);
        }
    }
}

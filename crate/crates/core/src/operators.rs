//! Phase separator and XY mixers restricted to the weight-k sector, with
//! exact propagators.
//!
//! Each `X_i X_j + Y_i Y_j` term maps `|..0_i..1_j..>` to `2 |..1_i..0_j..>`
//! and annihilates states where bits `i` and `j` agree, so inside the sector
//! a mixer is a real symmetric matrix whose entries are 2 per contributing
//! pair.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, QaoaError, Result};
use crate::instances::ProblemInstance;
use crate::linalg::{taylor_expm_apply, CsrMatrix};
use crate::subspace::{binomial, StateVector, SubspaceIndex};

/// Above this many qubits the propagator switches from a cached dense
/// eigendecomposition to Taylor application of the sparse matrix.
pub const SPECTRAL_MAX_QUBITS: usize = 14;

const RECONSTRUCTION_TOL: f64 = 1e-9;
const ORTHONORMALITY_TOL: f64 = 1e-10;

/// Diagonal cost operator: entry `i` is `f(unrank(i))`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSeparator {
    diagonal: Vec<f64>,
}

impl PhaseSeparator {
    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn apply(&self, gamma: f64, state: &StateVector) -> Result<StateVector> {
        state.check_dim(self.dim())?;
        let mut out = state.clone();
        self.apply_in_place(gamma, out.amplitudes_mut());
        Ok(out)
    }

    pub(crate) fn apply_in_place(&self, gamma: f64, amps: &mut [Complex64]) {
        for (a, &f) in amps.iter_mut().zip(&self.diagonal) {
            *a *= Complex64::from_polar(1.0, -gamma * f);
        }
    }
}

pub fn build_phase_separator(instance: &ProblemInstance, index: &SubspaceIndex) -> Result<PhaseSeparator> {
    if instance.n() != index.n() || instance.k() != index.k() {
        return Err(invalid(format!(
            "instance (n={}, k={}) does not match subspace (n={}, k={})",
            instance.n(),
            instance.k(),
            index.n(),
            index.k()
        )));
    }
    Ok(PhaseSeparator { diagonal: instance.objective_table().iter().map(|&v| f64::from(v)).collect() })
}

pub fn phase_apply(sep: &PhaseSeparator, gamma: f64, state: &StateVector) -> Result<StateVector> {
    sep.apply(gamma, state)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixerKind {
    Ring,
    Complete,
}

impl MixerKind {
    pub fn name(self) -> &'static str {
        match self {
            MixerKind::Ring => "ring",
            MixerKind::Complete => "complete",
        }
    }

    /// Qubit pairs carrying an XY term. The ring uses the distinct pairs
    /// `{i, (i+1) mod n}`, so `n = 2` has a single pair.
    pub fn pairs(self, n: usize) -> Vec<(usize, usize)> {
        match self {
            MixerKind::Complete => (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect(),
            MixerKind::Ring => {
                let mut pairs: Vec<(usize, usize)> = (0..n)
                    .map(|i| {
                        let j = (i + 1) % n;
                        (i.min(j), i.max(j))
                    })
                    .filter(|(i, j)| i != j)
                    .collect();
                pairs.sort_unstable();
                pairs.dedup();
                pairs
            }
        }
    }
}

impl std::fmt::Display for MixerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MixerKind {
    type Err = QaoaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ring" => Ok(MixerKind::Ring),
            "complete" => Ok(MixerKind::Complete),
            other => Err(invalid(format!("unknown mixer '{other}'"))),
        }
    }
}

/// Sector matrix of the mixer: entry `(a, b)` is 2 for each XY pair whose
/// swap takes basis state `b` to basis state `a`.
pub fn mixer_matrix(index: &SubspaceIndex, kind: MixerKind) -> Result<CsrMatrix> {
    if index.n() < 2 {
        return Err(invalid(format!("mixers need n >= 2, got n = {}", index.n())));
    }
    let pairs = kind.pairs(index.n());
    let rows = index
        .basis()
        .into_iter()
        .map(|x| {
            pairs
                .iter()
                .filter(|&&(i, j)| (x >> i ^ x >> j) & 1 == 1)
                .map(|&(i, j)| (index.rank_unchecked(x ^ (1 << i | 1 << j)), 2.0))
                .collect()
        })
        .collect();
    Ok(CsrMatrix::from_rows(rows))
}

/// Eigenpairs sorted by ascending eigenvalue; eigenvectors column-major.
#[derive(Clone, Debug)]
pub struct Spectrum {
    dim: usize,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    transposed: DMatrix<f64>,
}

impl Spectrum {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Column `j` is the eigenvector for `eigenvalues()[j]`.
    pub fn eigenvector(&self, j: usize) -> &[f64] {
        &self.eigenvectors.as_slice()[j * self.dim..(j + 1) * self.dim]
    }

    fn compute(matrix: &CsrMatrix) -> Result<Self> {
        let dim = matrix.dim();
        let dense = DMatrix::from_row_slice(dim, dim, &matrix.to_dense());
        let eig = SymmetricEigen::new(dense.clone());
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues: Vec<f64> = order.iter().map(|&j| eig.eigenvalues[j]).collect();
        let mut eigenvectors = Vec::with_capacity(dim * dim);
        for &j in &order {
            eigenvectors.extend(eig.eigenvectors.column(j).iter());
        }

        let v = DMatrix::from_column_slice(dim, dim, &eigenvectors);
        let gram = v.transpose() * &v;
        let ortho_err = (gram - DMatrix::<f64>::identity(dim, dim)).amax();
        if ortho_err > ORTHONORMALITY_TOL {
            return Err(QaoaError::Numerical(format!("eigenvectors not orthonormal: error {ortho_err:e}")));
        }
        let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&eigenvalues));
        let recon_err = (&v * lambda * v.transpose() - dense).amax();
        if recon_err > RECONSTRUCTION_TOL {
            return Err(QaoaError::Numerical(format!("eigendecomposition reconstruction error {recon_err:e}")));
        }
        let transposed = v.transpose();
        Ok(Self { dim, eigenvalues, eigenvectors: v, transposed })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PropagatorMode {
    /// Spectral up to [`SPECTRAL_MAX_QUBITS`], Taylor beyond.
    Auto,
    Spectral,
    Taylor,
}

#[derive(Clone, Debug)]
enum Propagator {
    Spectral(Spectrum),
    Taylor { norm_bound: f64 },
}

/// A mixer on one weight-k sector together with its propagator.
#[derive(Clone, Debug)]
pub struct MixerOperator {
    kind: MixerKind,
    n: usize,
    k: usize,
    matrix: CsrMatrix,
    propagator: Propagator,
}

pub fn build_ring_mixer(index: &SubspaceIndex) -> Result<MixerOperator> {
    MixerOperator::new(index, MixerKind::Ring)
}

pub fn build_complete_mixer(index: &SubspaceIndex) -> Result<MixerOperator> {
    MixerOperator::new(index, MixerKind::Complete)
}

impl MixerOperator {
    pub fn new(index: &SubspaceIndex, kind: MixerKind) -> Result<Self> {
        Self::with_mode(index, kind, PropagatorMode::Auto)
    }

    pub fn with_mode(index: &SubspaceIndex, kind: MixerKind, mode: PropagatorMode) -> Result<Self> {
        let matrix = mixer_matrix(index, kind)?;
        let spectral = match mode {
            PropagatorMode::Auto => index.n() <= SPECTRAL_MAX_QUBITS,
            PropagatorMode::Spectral => true,
            PropagatorMode::Taylor => false,
        };
        let propagator = if spectral {
            Propagator::Spectral(Spectrum::compute(&matrix)?)
        } else {
            Propagator::Taylor { norm_bound: matrix.inf_norm() }
        };
        Ok(Self { kind, n: index.n(), k: index.k(), matrix, propagator })
    }

    pub fn kind(&self) -> MixerKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Cached spectrum, absent when the Taylor propagator is in use.
    pub fn spectrum(&self) -> Option<&Spectrum> {
        match &self.propagator {
            Propagator::Spectral(s) => Some(s),
            Propagator::Taylor { .. } => None,
        }
    }

    /// Eigenvalues in ascending order, computing them if not cached.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        match &self.propagator {
            Propagator::Spectral(s) => Ok(s.eigenvalues.clone()),
            Propagator::Taylor { .. } => Ok(Spectrum::compute(&self.matrix)?.eigenvalues),
        }
    }

    /// `exp(-i beta H) state`.
    pub fn apply(&self, beta: f64, state: &StateVector) -> Result<StateVector> {
        state.check_dim(self.dim())?;
        let mut out = state.clone();
        self.apply_in_place(beta, out.amplitudes_mut());
        Ok(out)
    }

    /// Batched form of [`Self::apply`] on a `dim x 2B` matrix holding the real
    /// parts of `B` states followed by their imaginary parts.
    pub(crate) fn apply_batch(&self, betas: &[f64], batch: &mut DMatrix<f64>) {
        match &self.propagator {
            Propagator::Spectral(s) => spectral_apply_batch(s, betas, batch),
            Propagator::Taylor { .. } => {
                let width = betas.len();
                for (b, &beta) in betas.iter().enumerate() {
                    let mut amps: Vec<Complex64> =
                        (0..self.dim()).map(|i| Complex64::new(batch[(i, b)], batch[(i, width + b)])).collect();
                    self.apply_in_place(beta, &mut amps);
                    for (i, a) in amps.iter().enumerate() {
                        batch[(i, b)] = a.re;
                        batch[(i, width + b)] = a.im;
                    }
                }
            }
        }
    }

    pub(crate) fn apply_in_place(&self, beta: f64, amps: &mut [Complex64]) {
        if beta == 0.0 {
            return;
        }
        match &self.propagator {
            Propagator::Spectral(s) => spectral_apply(s, beta, amps),
            Propagator::Taylor { norm_bound } => {
                let out = taylor_expm_apply(|x, y| self.matrix.mul_vec(x, y), *norm_bound, beta, amps);
                amps.copy_from_slice(&out);
            }
        }
    }
}

fn spectral_apply(s: &Spectrum, beta: f64, amps: &mut [Complex64]) {
    let dim = s.dim;
    // coefficients in the eigenbasis: y = V^T x, accumulated row by row
    let mut yr = vec![0.0; dim];
    let mut yi = vec![0.0; dim];
    for (i, a) in amps.iter().enumerate() {
        let row = &s.transposed.as_slice()[i * dim..(i + 1) * dim];
        axpy(a.re, row, &mut yr);
        axpy(a.im, row, &mut yi);
    }
    for j in 0..dim {
        let c = Complex64::new(yr[j], yi[j]) * Complex64::from_polar(1.0, -beta * s.eigenvalues[j]);
        yr[j] = c.re;
        yi[j] = c.im;
    }
    let mut outr = vec![0.0; dim];
    let mut outi = vec![0.0; dim];
    for j in 0..dim {
        let col = s.eigenvector(j);
        axpy(yr[j], col, &mut outr);
        axpy(yi[j], col, &mut outi);
    }
    for (a, (re, im)) in amps.iter_mut().zip(outr.into_iter().zip(outi)) {
        *a = Complex64::new(re, im);
    }
}

/// Applies `exp(-i betas[b] H)` to column `b` of a batch stored as
/// `[re | im]`, a `dim x 2B` matrix.
fn spectral_apply_batch(s: &Spectrum, betas: &[f64], batch: &mut DMatrix<f64>) {
    let width = betas.len();
    let mut coeffs = &s.transposed * &*batch;
    for (b, &beta) in betas.iter().enumerate() {
        for j in 0..s.dim {
            let c = Complex64::new(coeffs[(j, b)], coeffs[(j, width + b)])
                * Complex64::from_polar(1.0, -beta * s.eigenvalues[j]);
            coeffs[(j, b)] = c.re;
            coeffs[(j, width + b)] = c.im;
        }
    }
    s.eigenvectors.mul_to(&coeffs, batch);
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    let n = y.len();
    let x = &x[..n];
    for i in 0..n {
        y[i] += alpha * x[i];
    }
}

pub fn propagator_apply(mixer: &MixerOperator, beta: f64, state: &StateVector) -> Result<StateVector> {
    mixer.apply(beta, state)
}

/// Shared mixers keyed by `(n, k, kind)`; each is built at most once.
#[derive(Debug, Default)]
pub struct MixerCache {
    entries: Mutex<HashMap<(usize, usize, MixerKind), Arc<MixerOperator>>>,
}

impl MixerCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, index: &SubspaceIndex, kind: MixerKind) -> Result<Arc<MixerOperator>> {
        let mut entries = self.entries.lock().expect("mixer cache poisoned");
        let key = (index.n(), index.k(), kind);
        if let Some(m) = entries.get(&key) {
            return Ok(Arc::clone(m));
        }
        let m = Arc::new(MixerOperator::new(index, kind)?);
        entries.insert(key, Arc::clone(&m));
        Ok(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JohnsonEigenvalue {
    pub value: i64,
    pub multiplicity: u64,
}

/// Closed-form adjacency spectrum of the Johnson graph `J(n,k)`: eigenvalue
/// `(k-j)(n-k-j) - j` with multiplicity `C(n,j) - C(n,j-1)` for
/// `j = 0..=min(k, n-k)`.
pub fn johnson_spectrum(n: usize, k: usize) -> Result<Vec<JohnsonEigenvalue>> {
    if k > n {
        return Err(invalid(format!("k = {k} exceeds n = {n}")));
    }
    let (n, k) = (n as i64, k as i64);
    Ok((0..=k.min(n - k))
        .map(|j| {
            let below = if j == 0 { 0 } else { binomial(n as u64, (j - 1) as u64) };
            JohnsonEigenvalue {
                value: (k - j) * (n - k - j) - j,
                multiplicity: binomial(n as u64, j as u64) - below,
            }
        })
        .collect())
}

/// Groups sorted-or-unsorted eigenvalues into `(value, multiplicity)`
/// clusters, merging neighbours closer than `tol`. Output is ascending.
pub fn cluster_eigenvalues(values: &[f64], tol: f64) -> Vec<(f64, usize)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, usize, f64)> = Vec::new();
    for v in sorted {
        match out.last_mut() {
            Some((_, count, sum)) if (v - *sum / *count as f64).abs() < tol => {
                *count += 1;
                *sum += v;
            }
            _ => out.push((v, 1, v)),
        }
    }
    out.into_iter().map(|(_, count, sum)| (sum / count as f64, count)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodCandidate {
    pub d: u32,
    /// Candidate period `pi * d / 2`.
    pub x: f64,
    /// Largest distance of `x (l_i - l_j)` from a multiple of `2 pi`.
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicityReport {
    pub tolerance: f64,
    pub distinct_eigenvalues: usize,
    pub candidates: Vec<PeriodCandidate>,
}

impl PeriodicityReport {
    /// Smallest candidate within tolerance, if any.
    pub fn period(&self) -> Option<&PeriodCandidate> {
        self.candidates.iter().find(|c| c.deviation < self.tolerance)
    }

    pub fn deviation_at(&self, d: u32) -> Option<f64> {
        self.candidates.iter().find(|c| c.d == d).map(|c| c.deviation)
    }
}

fn distance_to_2pi_multiple(y: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    (y - two_pi * (y / two_pi).round()).abs()
}

/// Tests the candidate periods `x = pi d / 2`, `d = 1..=d_max`, against a
/// set of eigenvalues. Eigenvalues closer than `1e-9` are merged first.
pub fn periodicity_probe(eigenvalues: &[f64], d_max: u32, tolerance: f64) -> PeriodicityReport {
    let distinct: Vec<f64> = cluster_eigenvalues(eigenvalues, 1e-9).into_iter().map(|(v, _)| v).collect();
    let candidates = (1..=d_max)
        .map(|d| {
            let x = std::f64::consts::FRAC_PI_2 * f64::from(d);
            let mut deviation = 0.0f64;
            for (i, a) in distinct.iter().enumerate() {
                for b in &distinct[i + 1..] {
                    deviation = deviation.max(distance_to_2pi_multiple(x * (b - a)));
                }
            }
            PeriodCandidate { d, x, deviation }
        })
        .collect();
    PeriodicityReport { tolerance, distinct_eigenvalues: distinct.len(), candidates }
}

/// Which weight sectors a periodicity probe covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sectors {
    Single(usize),
    /// Every weight `0..=n`, i.e. the full `2^n`-dimensional operator.
    All,
}

/// Eigenvalues of a mixer over the requested sectors. Sectors of dimension 1
/// contribute the single eigenvalue 0.
pub fn mixer_eigenvalues(kind: MixerKind, n: usize, sectors: Sectors) -> Result<Vec<f64>> {
    let ks: Vec<usize> = match sectors {
        Sectors::Single(k) => vec![k],
        Sectors::All => (0..=n).collect(),
    };
    let mut out = Vec::new();
    for k in ks {
        let index = SubspaceIndex::new(n, k)?;
        let m = MixerOperator::with_mode(&index, kind, PropagatorMode::Spectral)?;
        out.extend(m.eigenvalues()?);
    }
    Ok(out)
}

pub fn ring_periodicity_probe(n: usize, sectors: Sectors, d_max: u32, tolerance: f64) -> Result<PeriodicityReport> {
    Ok(periodicity_probe(&mixer_eigenvalues(MixerKind::Ring, n, sectors)?, d_max, tolerance))
}

/// CSV dump `eigenvalue,multiplicity`.
pub fn write_spectrum_csv<W: Write>(mut w: W, clusters: &[(f64, usize)]) -> Result<()> {
    writeln!(w, "eigenvalue,multiplicity")?;
    for (value, mult) in clusters {
        // collapse -0.0 so dumps are stable
        let value = if value.abs() < 1e-12 { 0.0 } else { *value };
        writeln!(w, "{value:.12},{mult}")?;
    }
    Ok(())
}

/// Coordinate-format dump, one `row col value` triple per line.
pub fn write_matrix_coo<W: Write>(mut w: W, matrix: &CsrMatrix) -> Result<()> {
    writeln!(w, "% {} {} {}", matrix.dim(), matrix.dim(), matrix.nnz())?;
    for r in 0..matrix.dim() {
        for (c, v) in matrix.row(r) {
            writeln!(w, "{r} {c} {v}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{gen_random_graph, Graph};
    use crate::subspace::{basis_k_state, dicke_state};
    use std::f64::consts::PI;

    fn idx(n: usize, k: usize) -> SubspaceIndex {
        SubspaceIndex::new(n, k).unwrap()
    }

    #[test]
    fn phase_separator_examples() {
        let tri = ProblemInstance::new(Graph::complete(3).unwrap(), 1).unwrap();
        let sep = build_phase_separator(&tri, &idx(3, 1)).unwrap();
        assert_eq!(sep.diagonal(), &[2.0, 2.0, 2.0]);
        let empty = ProblemInstance::new(Graph::new(6, []).unwrap(), 3).unwrap();
        assert!(build_phase_separator(&empty, &idx(6, 3)).unwrap().diagonal().iter().all(|&d| d == 0.0));
        assert!(build_phase_separator(&empty, &idx(6, 2)).is_err());
    }

    #[test]
    fn phase_apply_examples() {
        let inst = ProblemInstance::with_half_k(gen_random_graph(7, 0.5, 3).unwrap()).unwrap();
        let sep = build_phase_separator(&inst, inst.index()).unwrap();
        let s = dicke_state(inst.index());
        let rotated = MixerOperator::new(inst.index(), MixerKind::Ring).unwrap().apply(0.4, &s).unwrap();
        assert_eq!(sep.apply(0.0, &rotated).unwrap(), rotated);
        let full_turn = sep.apply(2.0 * PI, &rotated).unwrap();
        assert!(full_turn.phase_aligned_distance(&rotated) < 1e-12);
        for a in full_turn.amplitudes().iter().zip(rotated.amplitudes()) {
            assert!((a.0 - a.1).norm() < 1e-12);
        }
        let probs = sep.apply(1.234, &rotated).unwrap().probabilities();
        for (p, q) in probs.iter().zip(rotated.probabilities()) {
            assert!((p - q).abs() < 1e-15);
        }
        let wrong = dicke_state(&idx(7, 2));
        assert!(sep.apply(0.1, &wrong).is_err());
    }

    #[test]
    fn ring_pairs() {
        assert_eq!(MixerKind::Ring.pairs(2), vec![(0, 1)]);
        assert_eq!(MixerKind::Ring.pairs(4), vec![(0, 1), (0, 3), (1, 2), (2, 3)]);
        assert_eq!(MixerKind::Complete.pairs(4).len(), 6);
    }

    #[test]
    fn small_mixer_matrices() {
        for kind in [MixerKind::Ring, MixerKind::Complete] {
            let m = mixer_matrix(&idx(2, 1), kind).unwrap();
            assert_eq!(m.to_dense(), vec![0.0, 2.0, 2.0, 0.0]);
            assert!(mixer_matrix(&idx(1, 1), kind).is_err());
        }
    }

    #[test]
    fn mixer_structure() {
        for n in 2..=8 {
            for k in 0..=n {
                let index = idx(n, k);
                for kind in [MixerKind::Ring, MixerKind::Complete] {
                    let m = mixer_matrix(&index, kind).unwrap();
                    assert!(m.is_symmetric());
                    for r in 0..m.dim() {
                        assert_eq!(m.get(r, r), 0.0);
                        let row_sum: f64 = m.row(r).map(|(_, v)| v).sum();
                        assert!(m.row(r).all(|(_, v)| v == 2.0));
                        match kind {
                            MixerKind::Ring => assert!(row_sum <= 2.0 * n as f64),
                            MixerKind::Complete => assert_eq!(m.row(r).count(), k * (n - k)),
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn complete_mixer_neighbours_are_distance_two() {
        let index = idx(4, 2);
        let m = mixer_matrix(&index, MixerKind::Complete).unwrap();
        let basis = index.basis();
        for (r, &x) in basis.iter().enumerate() {
            let expected: Vec<usize> = basis
                .iter()
                .enumerate()
                .filter(|(_, &y)| (x ^ y).count_ones() == 2)
                .map(|(c, _)| c)
                .collect();
            let got: Vec<usize> = m.row(r).map(|(c, _)| c).collect();
            assert_eq!(got, expected);
            assert_eq!(got.len(), 4);
        }
    }

    #[test]
    fn dicke_eigenvalues() {
        for n in 3..=9 {
            let index = idx(n, 1);
            let ring = build_ring_mixer(&index).unwrap();
            let d = dicke_state(&index);
            let mut hd = vec![Complex64::new(0.0, 0.0); index.dim()];
            ring.matrix().mul_vec(d.amplitudes(), &mut hd);
            for (a, b) in hd.iter().zip(d.amplitudes()) {
                assert!((a - b * 4.0).norm() < 1e-12);
            }
            for k in 0..=n {
                let index = idx(n, k);
                let complete = build_complete_mixer(&index).unwrap();
                let d = dicke_state(&index);
                let mut hd = vec![Complex64::new(0.0, 0.0); index.dim()];
                complete.matrix().mul_vec(d.amplitudes(), &mut hd);
                let lambda = 2.0 * (k * (n - k)) as f64;
                for (a, b) in hd.iter().zip(d.amplitudes()) {
                    assert!((a - b * lambda).norm() < 1e-12);
                }
                let top = *complete.eigenvalues().unwrap().last().unwrap();
                assert!((top - lambda).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn johnson_formula_examples() {
        let s = johnson_spectrum(4, 2).unwrap();
        assert_eq!(
            s,
            vec![
                JohnsonEigenvalue { value: 4, multiplicity: 1 },
                JohnsonEigenvalue { value: 0, multiplicity: 3 },
                JohnsonEigenvalue { value: -2, multiplicity: 2 },
            ]
        );
        for n in 2..=12 {
            let s = johnson_spectrum(n, 1).unwrap();
            assert_eq!(s[0], JohnsonEigenvalue { value: n as i64 - 1, multiplicity: 1 });
            assert_eq!(s[1], JohnsonEigenvalue { value: -1, multiplicity: n as u64 - 1 });
        }
        let total: u64 = johnson_spectrum(10, 5).unwrap().iter().map(|e| e.multiplicity).sum();
        assert_eq!(total, 252);
        assert!(johnson_spectrum(3, 4).is_err());
    }

    #[test]
    fn johnson_formula_matches_numeric_adjacency() {
        let m = build_complete_mixer(&idx(4, 2)).unwrap();
        let clusters = cluster_eigenvalues(&m.eigenvalues().unwrap(), 1e-8);
        assert_eq!(clusters.len(), 3);
        let expect = [(-4.0, 2), (0.0, 3), (8.0, 1)];
        for ((v, c), (ev, ec)) in clusters.iter().zip(expect) {
            assert!((v - ev).abs() < 1e-10);
            assert_eq!(*c, ec);
        }
    }

    #[test]
    fn propagator_identity_and_period() {
        let index = idx(6, 3);
        let s = basis_k_state(&index, 0b010101).unwrap();
        for kind in [MixerKind::Ring, MixerKind::Complete] {
            let m = MixerOperator::new(&index, kind).unwrap();
            let same = m.apply(0.0, &s).unwrap();
            assert!(same.amplitudes().iter().zip(s.amplitudes()).all(|(a, b)| (a - b).norm() < 1e-13));
        }
        let complete = build_complete_mixer(&index).unwrap();
        let turned = complete.apply(PI, &s).unwrap();
        assert!(turned.phase_aligned_distance(&s) < 1e-9);
    }

    #[test]
    fn ring_dicke_phase() {
        for n in 3..=8 {
            let index = idx(n, 1);
            let ring = build_ring_mixer(&index).unwrap();
            let d = dicke_state(&index);
            for &beta in &[0.3, 1.1, -2.5] {
                let out = ring.apply(beta, &d).unwrap();
                let phase = Complex64::from_polar(1.0, -4.0 * beta);
                for (a, b) in out.amplitudes().iter().zip(d.amplitudes()) {
                    assert!((a - b * phase).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn propagator_unitary_and_time_reversal() {
        let index = idx(8, 4);
        let inst = ProblemInstance::new(gen_random_graph(8, 0.5, 1).unwrap(), 4).unwrap();
        let sep = build_phase_separator(&inst, &index).unwrap();
        let s = sep.apply(0.7, &dicke_state(&index)).unwrap();
        let s = build_ring_mixer(&index).unwrap().apply(0.2, &s).unwrap();
        for kind in [MixerKind::Ring, MixerKind::Complete] {
            let m = MixerOperator::new(&index, kind).unwrap();
            let fwd = m.apply(0.83, &s).unwrap();
            assert!((fwd.norm_sqr() - 1.0).abs() < 1e-10);
            // conj(exp(-iBH)) = exp(iBH): conj(U conj(v)) = U^* v
            let conj_in: Vec<Complex64> = s.amplitudes().iter().map(|a| a.conj()).collect();
            let conj_state = StateVector::from_amplitudes(&index, conj_in).unwrap();
            let a = m.apply(0.83, &conj_state).unwrap();
            let b = m.apply(-0.83, &s).unwrap();
            for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
                assert!((x.conj() - y).norm() < 1e-12);
            }
        }
        let wrong = dicke_state(&idx(8, 3));
        assert!(build_complete_mixer(&index).unwrap().apply(0.1, &wrong).is_err());
    }

    #[test]
    fn taylor_fallback_matches_spectral() {
        let index = idx(9, 4);
        let inst = ProblemInstance::new(gen_random_graph(9, 0.5, 8).unwrap(), 4).unwrap();
        let sep = build_phase_separator(&inst, &index).unwrap();
        let s = sep.apply(1.3, &dicke_state(&index)).unwrap();
        for kind in [MixerKind::Ring, MixerKind::Complete] {
            let spectral = MixerOperator::with_mode(&index, kind, PropagatorMode::Spectral).unwrap();
            let taylor = MixerOperator::with_mode(&index, kind, PropagatorMode::Taylor).unwrap();
            assert!(taylor.spectrum().is_none());
            for &beta in &[0.05, 0.9, 3.0] {
                let a = spectral.apply(beta, &s).unwrap();
                let b = taylor.apply(beta, &s).unwrap();
                let err = a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
                assert!(err < 1e-10, "{kind} beta={beta}: {err:e}");
            }
        }
    }

    #[test]
    fn spectral_decomposition_invariants() {
        let index = idx(7, 3);
        for kind in [MixerKind::Ring, MixerKind::Complete] {
            let m = MixerOperator::new(&index, kind).unwrap();
            let s = m.spectrum().unwrap();
            let dim = index.dim();
            let dense = m.matrix().to_dense();
            for r in 0..dim {
                for c in 0..dim {
                    let recon: f64 = (0..dim).map(|j| s.eigenvector(j)[r] * s.eigenvalues()[j] * s.eigenvector(j)[c]).sum();
                    assert!((recon - dense[r * dim + c]).abs() < 1e-9);
                }
            }
            assert!(s.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn periodicity_examples() {
        let two = ring_periodicity_probe(2, Sectors::Single(1), 4, 1e-12).unwrap();
        assert_eq!(two.period().unwrap().d, 1);
        assert!(two.deviation_at(1).unwrap() < 1e-12);

        let four = ring_periodicity_probe(4, Sectors::All, 200, 1e-6).unwrap();
        assert!(four.period().is_none());

        for n in 2..=7 {
            let eig = mixer_eigenvalues(MixerKind::Complete, n, Sectors::All).unwrap();
            let report = periodicity_probe(&eig, 2, 1e-9);
            assert!(report.deviation_at(2).unwrap() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn cluster_and_dumps() {
        let c = cluster_eigenvalues(&[1.0, -2.0, 1.0 + 1e-12, 3.0], 1e-8);
        assert_eq!(c.len(), 3);
        assert_eq!(c[1].1, 2);
        let mut buf = Vec::new();
        write_spectrum_csv(&mut buf, &[(-0.0, 1), (2.0, 3)]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "eigenvalue,multiplicity\n0.000000000000,1\n2.000000000000,3\n");
        let mut buf = Vec::new();
        write_matrix_coo(&mut buf, &mixer_matrix(&idx(2, 1), MixerKind::Ring).unwrap()).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "% 2 2 2\n0 1 2\n1 0 2\n");
    }

    #[test]
    fn mixer_cache_reuses() {
        let cache = MixerCache::new();
        let a = cache.get(&idx(5, 2), MixerKind::Ring).unwrap();
        let b = cache.get(&idx(5, 2), MixerKind::Ring).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        let c = cache.get(&idx(5, 2), MixerKind::Complete).unwrap();
        assert!(!Arc::ptr_eq(&a, &c));
    }
}

//! Full `2^n`-dimensional reference simulation for cross-checking the
//! subspace engine on small instances.
//!
//! Operators are assembled from Kronecker products of single-qubit Pauli
//! matrices (qubit 0 is the least significant bit of the basis index) and
//! propagated with a Taylor-series matrix exponential, sharing nothing
//! with the combinadic basis or the cached eigendecompositions.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::AngleSchedule;
use crate::error::{QaoaError, Result};
use crate::instances::ProblemInstance;
use crate::linalg::taylor_expm_apply;
use crate::operators::MixerKind;

pub const MAX_REFERENCE_QUBITS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReferenceStart {
    Dicke,
    Basis(u64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceOutcome {
    pub expectation: f64,
    /// Extremes of the weight-k probability mass over every intermediate
    /// state of the evolution.
    pub min_sector_occupation: f64,
    pub max_sector_occupation: f64,
}

#[derive(Clone, Copy)]
enum Pauli {
    I,
    X,
    Y,
    Z,
}

fn pauli_matrix(p: Pauli) -> DMatrix<Complex64> {
    let (o, l, i) = (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0));
    let entries = match p {
        Pauli::I => [l, o, o, l],
        Pauli::X => [o, l, l, o],
        Pauli::Y => [o, -i, i, o],
        Pauli::Z => [l, o, o, -l],
    };
    DMatrix::from_row_slice(2, 2, &entries)
}

/// Tensor product with `ops` on the listed qubits and identity elsewhere.
fn pauli_string(n: usize, ops: &[(usize, Pauli)]) -> DMatrix<Complex64> {
    let mut out = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
    for q in (0..n).rev() {
        let p = ops.iter().find(|(qq, _)| *qq == q).map_or(Pauli::I, |&(_, p)| p);
        out = out.kronecker(&pauli_matrix(p));
    }
    out
}

fn mixer_pairs(kind: MixerKind, n: usize) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = match kind {
        MixerKind::Complete => (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect(),
        MixerKind::Ring => (0..n).map(|i| (i, (i + 1) % n)).map(|(a, b)| (a.min(b), a.max(b))).collect(),
    };
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

/// Dense `sum X_i X_j + Y_i Y_j` over the mixer's qubit pairs.
pub fn full_mixer(kind: MixerKind, n: usize) -> DMatrix<Complex64> {
    let dim = 1usize << n;
    let mut h = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for (i, j) in mixer_pairs(kind, n) {
        h += pauli_string(n, &[(i, Pauli::X), (j, Pauli::X)]);
        h += pauli_string(n, &[(i, Pauli::Y), (j, Pauli::Y)]);
    }
    h
}

/// Diagonal of `1/4 sum_{uv in E} (3I - Z_u Z_v - Z_u - Z_v)`.
pub fn full_phase_diagonal(instance: &ProblemInstance) -> Vec<f64> {
    let n = instance.n();
    let dim = 1usize << n;
    let mut h = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    let identity = DMatrix::<Complex64>::identity(dim, dim);
    for &(u, v) in instance.graph().edges() {
        h += &identity * Complex64::new(3.0, 0.0);
        h -= pauli_string(n, &[(u, Pauli::Z), (v, Pauli::Z)]);
        h -= pauli_string(n, &[(u, Pauli::Z)]);
        h -= pauli_string(n, &[(v, Pauli::Z)]);
    }
    (0..dim).map(|i| h[(i, i)].re / 4.0).collect()
}

/// Evolves in the full Hilbert space and returns `<H_P>` together with the
/// weight-k occupation extremes.
pub fn full_space_reference_expectation(
    instance: &ProblemInstance,
    kind: MixerKind,
    start: ReferenceStart,
    schedule: &AngleSchedule,
) -> Result<ReferenceOutcome> {
    let n = instance.n();
    if n > MAX_REFERENCE_QUBITS {
        return Err(QaoaError::ResourceLimit(format!(
            "full-space reference limited to {MAX_REFERENCE_QUBITS} qubits, got {n}"
        )));
    }
    if n < 2 {
        return Err(QaoaError::InvalidArgument("mixers need n >= 2".into()));
    }
    let k = instance.k() as u32;
    let dim = 1usize << n;

    let mut state = vec![Complex64::new(0.0, 0.0); dim];
    match start {
        ReferenceStart::Dicke => {
            let members: Vec<usize> = (0..dim).filter(|x| x.count_ones() == k).collect();
            let amp = 1.0 / (members.len() as f64).sqrt();
            for x in members {
                state[x] = Complex64::new(amp, 0.0);
            }
        }
        ReferenceStart::Basis(x) => {
            if x.count_ones() != k || x as usize >= dim {
                return Err(QaoaError::InvalidArgument(format!("start {x:#b} is not a weight-{k} state")));
            }
            state[x as usize] = Complex64::new(1.0, 0.0);
        }
    }

    let mixer = full_mixer(kind, n);
    let rows: Vec<Vec<(usize, Complex64)>> = (0..dim)
        .map(|r| (0..dim).filter(|&c| mixer[(r, c)].norm() > 0.0).map(|c| (c, mixer[(r, c)])).collect())
        .collect();
    let norm_bound = rows.iter().map(|row| row.iter().map(|(_, v)| v.norm()).sum::<f64>()).fold(0.0, f64::max);
    let apply_mixer = |x: &[Complex64], y: &mut [Complex64]| {
        for (out, row) in y.iter_mut().zip(&rows) {
            *out = row.iter().map(|&(c, v)| v * x[c]).sum();
        }
    };
    let diag = full_phase_diagonal(instance);

    let occupation = |s: &[Complex64]| -> f64 {
        s.iter().enumerate().filter(|(x, _)| x.count_ones() == k).map(|(_, a)| a.norm_sqr()).sum()
    };
    let mut min_occ = occupation(&state);
    let mut max_occ = min_occ;
    for (&gamma, &beta) in schedule.gammas().iter().zip(schedule.betas()) {
        for (a, &f) in state.iter_mut().zip(&diag) {
            *a *= Complex64::from_polar(1.0, -gamma * f);
        }
        let occ = occupation(&state);
        min_occ = min_occ.min(occ);
        max_occ = max_occ.max(occ);
        state = taylor_expm_apply(apply_mixer, norm_bound, beta, &state);
        let occ = occupation(&state);
        min_occ = min_occ.min(occ);
        max_occ = max_occ.max(occ);
    }
    let expectation = state.iter().zip(&diag).map(|(a, f)| a.norm_sqr() * f).sum();
    Ok(ReferenceOutcome { expectation, min_sector_occupation: min_occ, max_sector_occupation: max_occ })
}

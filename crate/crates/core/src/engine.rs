//! p-round evolution, expectation values, approximation ratios and
//! measurement sampling.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, QaoaError, Result};
use crate::instances::ProblemInstance;
use crate::operators::{build_phase_separator, MixerKind, MixerOperator, PhaseSeparator};
use crate::rng::rng_from_seed;
use crate::subspace::{basis_k_state, dicke_state, random_k_state, StateVector, SubspaceIndex};

pub mod reference;

const BATCH_WIDTH: usize = 64;

/// Phase-separator angles `gammas` and mixer angles `betas`, one per round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleSchedule {
    gammas: Vec<f64>,
    betas: Vec<f64>,
}

impl AngleSchedule {
    pub fn new(gammas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        if gammas.is_empty() || gammas.len() != betas.len() {
            return Err(invalid(format!(
                "schedule needs equal non-zero lengths, got {} gammas and {} betas",
                gammas.len(),
                betas.len()
            )));
        }
        if gammas.iter().chain(&betas).any(|a| !a.is_finite()) {
            return Err(invalid("schedule angles must be finite"));
        }
        Ok(Self { gammas, betas })
    }

    pub fn zeros(p: usize) -> Result<Self> {
        Self::new(vec![0.0; p], vec![0.0; p])
    }

    pub fn p(&self) -> usize {
        self.gammas.len()
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// Flat layout `[gamma_1..gamma_p, beta_1..beta_p]`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.gammas.iter().chain(&self.betas).copied().collect()
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.len() % 2 != 0 {
            return Err(invalid("flat schedule must have even length"));
        }
        let p = flat.len() / 2;
        Self::new(flat[..p].to_vec(), flat[p..].to_vec())
    }

    /// Same schedule with an extra `(0, 0)` round appended.
    pub fn zero_padded(&self) -> Self {
        let mut out = self.clone();
        out.gammas.push(0.0);
        out.betas.push(0.0);
        out
    }

    /// Componentwise map of both angle vectors.
    pub fn map(&self, gamma: impl Fn(f64) -> f64, beta: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.gammas.iter().map(|&g| gamma(g)).collect(), self.betas.iter().map(|&b| beta(b)).collect())
    }
}

/// Box `[0, gamma_max) x [0, beta_max)` for every round.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchDomain {
    pub gamma_max: f64,
    pub beta_max: f64,
}

impl Default for SearchDomain {
    fn default() -> Self {
        Self { gamma_max: TAU, beta_max: FRAC_PI_2 }
    }
}

impl SearchDomain {
    pub fn new(gamma_max: f64, beta_max: f64) -> Result<Self> {
        let d = Self { gamma_max, beta_max };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.gamma_max) || !ok(self.beta_max) {
            return Err(invalid(format!(
                "search domain needs positive finite bounds, got gamma_max={} beta_max={}",
                self.gamma_max, self.beta_max
            )));
        }
        Ok(())
    }

    pub fn contains(&self, schedule: &AngleSchedule) -> bool {
        schedule.gammas().iter().all(|g| (0.0..self.gamma_max).contains(g))
            && schedule.betas().iter().all(|b| (0.0..self.beta_max).contains(b))
    }

    /// Uniform random schedule with `p` rounds.
    pub fn sample<R: Rng>(&self, p: usize, rng: &mut R) -> AngleSchedule {
        let gammas = (0..p).map(|_| rng.random::<f64>() * self.gamma_max).collect();
        let betas = (0..p).map(|_| rng.random::<f64>() * self.beta_max).collect();
        AngleSchedule::new(gammas, betas).expect("sampled angles are finite")
    }
}

/// Initial state choices for an evolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    Dicke,
    /// Computational basis state given by a weight-k mask.
    Basis(u64),
    /// Uniformly random weight-k basis state chosen once from a seed.
    RandomK(u64),
}

impl InitialState {
    pub fn prepare(&self, index: &SubspaceIndex) -> Result<StateVector> {
        match *self {
            InitialState::Dicke => Ok(dicke_state(index)),
            InitialState::Basis(x) => basis_k_state(index, x),
            InitialState::RandomK(seed) => Ok(random_k_state(index, seed)),
        }
    }
}

/// Operators for one instance and one mixer, ready to evolve states.
#[derive(Clone, Debug)]
pub struct Simulator {
    phase: PhaseSeparator,
    mixer: Arc<MixerOperator>,
    max_value: u32,
    n_edges: usize,
}

impl Simulator {
    pub fn new(instance: &ProblemInstance, mixer: Arc<MixerOperator>) -> Result<Self> {
        if mixer.n() != instance.n() || mixer.k() != instance.k() {
            return Err(invalid(format!(
                "mixer built for (n={}, k={}) but instance has (n={}, k={})",
                mixer.n(),
                mixer.k(),
                instance.n(),
                instance.k()
            )));
        }
        Ok(Self {
            phase: build_phase_separator(instance, instance.index())?,
            mixer,
            max_value: instance.max_value(),
            n_edges: instance.graph().n_edges(),
        })
    }

    /// Builds a private mixer instead of sharing a cached one.
    pub fn with_kind(instance: &ProblemInstance, kind: MixerKind) -> Result<Self> {
        Self::new(instance, Arc::new(MixerOperator::new(instance.index(), kind)?))
    }

    pub fn mixer(&self) -> &MixerOperator {
        &self.mixer
    }

    pub fn mixer_kind(&self) -> MixerKind {
        self.mixer.kind()
    }

    pub fn phase_separator(&self) -> &PhaseSeparator {
        &self.phase
    }

    pub fn max_value(&self) -> u32 {
        self.max_value
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn dim(&self) -> usize {
        self.phase.dim()
    }

    pub fn evolve(&self, initial: &StateVector, schedule: &AngleSchedule) -> Result<StateVector> {
        initial.check_dim(self.dim())?;
        let mut state = initial.clone();
        let amps = state.amplitudes_mut();
        for (&gamma, &beta) in schedule.gammas().iter().zip(schedule.betas()) {
            self.phase.apply_in_place(gamma, amps);
            self.mixer.apply_in_place(beta, amps);
        }
        Ok(state)
    }

    pub fn expectation(&self, state: &StateVector) -> Result<f64> {
        state.check_dim(self.dim())?;
        Ok(diagonal_expectation(self.phase.diagonal(), state.amplitudes()))
    }

    /// `F_p` for the given start and schedule.
    pub fn evaluate(&self, initial: &StateVector, schedule: &AngleSchedule) -> Result<f64> {
        self.expectation(&self.evolve(initial, schedule)?)
    }

    /// `F_p` for many schedules of equal length, evolved together with
    /// dense matrix products. Agrees with [`Self::evaluate`] to rounding.
    pub fn evaluate_batch(&self, initial: &StateVector, schedules: &[AngleSchedule]) -> Result<Vec<f64>> {
        initial.check_dim(self.dim())?;
        let Some(first) = schedules.first() else {
            return Ok(Vec::new());
        };
        if schedules.iter().any(|s| s.p() != first.p()) {
            return Err(invalid("batched schedules must share the same p"));
        }
        let dim = self.dim();
        let mut out = Vec::with_capacity(schedules.len());
        for chunk in schedules.chunks(BATCH_WIDTH) {
            let width = chunk.len();
            let mut batch = DMatrix::<f64>::zeros(dim, 2 * width);
            for b in 0..width {
                for (i, a) in initial.amplitudes().iter().enumerate() {
                    batch[(i, b)] = a.re;
                    batch[(i, width + b)] = a.im;
                }
            }
            let mut betas = vec![0.0; width];
            for round in 0..first.p() {
                for (b, s) in chunk.iter().enumerate() {
                    let gamma = s.gammas()[round];
                    for (i, &f) in self.phase.diagonal().iter().enumerate() {
                        let a = Complex64::new(batch[(i, b)], batch[(i, width + b)]) * Complex64::from_polar(1.0, -gamma * f);
                        batch[(i, b)] = a.re;
                        batch[(i, width + b)] = a.im;
                    }
                    betas[b] = s.betas()[round];
                }
                self.mixer.apply_batch(&betas, &mut batch);
            }
            for b in 0..width {
                let value = self
                    .phase
                    .diagonal()
                    .iter()
                    .enumerate()
                    .map(|(i, f)| f * (batch[(i, b)].powi(2) + batch[(i, width + b)].powi(2)))
                    .sum();
                out.push(value);
            }
        }
        Ok(out)
    }

    pub fn approximation_ratio(&self, expectation: f64) -> Result<f64> {
        ratio(expectation, self.max_value)
    }

    pub fn run(&self, initial: &StateVector, schedule: &AngleSchedule) -> Result<EvolutionResult> {
        let final_state = self.evolve(initial, schedule)?;
        let expectation = self.expectation(&final_state)?;
        let approx_ratio = self.approximation_ratio(expectation)?;
        let measurement_distribution = final_state.probabilities();
        Ok(EvolutionResult { schedule: schedule.clone(), final_state, expectation, approx_ratio, measurement_distribution })
    }
}

fn diagonal_expectation(diagonal: &[f64], amps: &[Complex64]) -> f64 {
    diagonal.iter().zip(amps).map(|(d, a)| d * a.norm_sqr()).sum()
}

fn ratio(expectation: f64, max_value: u32) -> Result<f64> {
    if max_value == 0 {
        return Err(QaoaError::UndefinedRatio("instance has no edges, optimum is 0".into()));
    }
    Ok(expectation / f64::from(max_value))
}

/// `e^{-i b_p H_M} e^{-i g_p H_P} ... e^{-i b_1 H_M} e^{-i g_1 H_P} |initial>`.
pub fn evolve(
    instance: &ProblemInstance,
    mixer: &Arc<MixerOperator>,
    initial: &StateVector,
    schedule: &AngleSchedule,
) -> Result<StateVector> {
    Simulator::new(instance, Arc::clone(mixer))?.evolve(initial, schedule)
}

pub fn expectation(instance: &ProblemInstance, state: &StateVector) -> Result<f64> {
    if state.n() != instance.n() || state.k() != instance.k() {
        return Err(invalid("state does not belong to the instance's weight-k sector"));
    }
    let diag: Vec<f64> = instance.objective_table().iter().map(|&v| f64::from(v)).collect();
    Ok(diagonal_expectation(&diag, state.amplitudes()))
}

/// Expectation divided by the exact weight-k optimum.
pub fn approximation_ratio(instance: &ProblemInstance, expectation: f64) -> Result<f64> {
    ratio(expectation, instance.max_value())
}

pub fn measurement_distribution(state: &StateVector) -> Vec<f64> {
    state.probabilities()
}

/// `n_samples` i.i.d. computational-basis measurements of `state`, each
/// paired with its objective value.
pub fn sample_measurements(
    instance: &ProblemInstance,
    state: &StateVector,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<(u64, u32)>> {
    if n_samples == 0 {
        return Err(invalid("n_samples must be at least 1"));
    }
    state.check_dim(instance.index().dim())?;
    let mut cdf = Vec::with_capacity(state.dim());
    let mut acc = 0.0;
    for p in state.probabilities() {
        acc += p;
        cdf.push(acc);
    }
    let total = acc;
    let mut rng = rng_from_seed(seed);
    let out = (0..n_samples)
        .map(|_| {
            let u = rng.random::<f64>() * total;
            let i = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            let x = instance.index().unrank(i).expect("sampled index in range");
            (x, instance.objective_table()[i])
        })
        .collect();
    Ok(out)
}

/// Final state of one evolution with its derived quantities.
#[derive(Clone, Debug)]
pub struct EvolutionResult {
    pub schedule: AngleSchedule,
    pub final_state: StateVector,
    pub expectation: f64,
    pub approx_ratio: f64,
    pub measurement_distribution: Vec<f64>,
}

#[derive(Serialize)]
struct EvolutionResultJson<'a> {
    schedule: &'a AngleSchedule,
    expectation: f64,
    approx_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    distribution: Option<&'a [f64]>,
}

impl EvolutionResult {
    pub fn to_json(&self, include_distribution: bool) -> String {
        let doc = EvolutionResultJson {
            schedule: &self.schedule,
            expectation: self.expectation,
            approx_ratio: self.approx_ratio,
            distribution: include_distribution.then_some(self.measurement_distribution.as_slice()),
        };
        serde_json::to_string(&doc).expect("evolution result serializes")
    }
}

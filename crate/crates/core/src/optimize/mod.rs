//! Angle-selection strategies: Monte Carlo sampling, basin hopping with
//! Nelder–Mead refinement, and interpolation warm starts across levels.
//!
//! Every strategy spends its budget through one counting evaluator, so the
//! reported evaluation count is exact and the reported best is the maximum
//! of the values actually evaluated.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{AngleSchedule, InitialState, SearchDomain, Simulator};
use crate::error::{invalid, QaoaError, Result};
use crate::instances::ProblemInstance;
use crate::operators::{MixerCache, MixerKind};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::stats::{ci_halfwidth, SampleSummary};
use crate::subspace::StateVector;

pub mod nelder_mead;

use nelder_mead::NelderMeadOptions;

pub const RUN_RECORD_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BudgetScope {
    /// The budget applies afresh at every level p.
    PerLevel,
    /// The budget is shared across all levels of a run.
    Total,
}

/// Number of `F_p` evaluations a strategy may spend.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub max_evaluations: usize,
    pub scope: BudgetScope,
}

impl Budget {
    pub fn per_level(max_evaluations: usize) -> Result<Self> {
        let b = Self { max_evaluations, scope: BudgetScope::PerLevel };
        b.validate()?;
        Ok(b)
    }

    pub fn total(max_evaluations: usize) -> Result<Self> {
        let b = Self { max_evaluations, scope: BudgetScope::Total };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_evaluations == 0 {
            return Err(invalid("budget must allow at least one evaluation"));
        }
        Ok(())
    }

    /// Evaluations available to one level of a `levels`-level run.
    pub fn for_level(&self, levels: usize) -> usize {
        match self.scope {
            BudgetScope::PerLevel => self.max_evaluations,
            BudgetScope::Total => (self.max_evaluations / levels.max(1)).max(1),
        }
    }
}

/// Tunables of the local and global searches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSettings {
    /// Initial simplex edge in radians.
    pub simplex_step: f64,
    pub x_tol: f64,
    pub f_tol: f64,
    /// Basin-hopping perturbation half-width in radians.
    pub hop_step: f64,
    /// Metropolis temperature as a fraction of the edge count.
    pub temperature_scale: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self { simplex_step: 0.1, x_tol: 1e-6, f_tol: 1e-9, hop_step: 0.3, temperature_scale: 0.1 }
    }
}

impl OptimizerSettings {
    fn nelder_mead(&self) -> NelderMeadOptions {
        NelderMeadOptions { initial_step: self.simplex_step, x_tol: self.x_tol, f_tol: self.f_tol }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    MonteCarlo,
    BasinHopping,
    Interpolation,
    /// Large-budget basin hopping used as the best-known estimate.
    Reference,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::MonteCarlo => "monte-carlo",
            StrategyKind::BasinHopping => "basin-hopping",
            StrategyKind::Interpolation => "interpolation",
            StrategyKind::Reference => "reference",
        }
    }

    fn id(self) -> u64 {
        self as u64
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = QaoaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "monte-carlo" => Ok(Self::MonteCarlo),
            "basin-hopping" => Ok(Self::BasinHopping),
            "interpolation" => Ok(Self::Interpolation),
            "reference" => Ok(Self::Reference),
            other => Err(invalid(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Outcome of one optimization run at one level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub strategy: StrategyKind,
    pub instance_id: Option<u64>,
    pub instance_seed: Option<u64>,
    pub mixer: MixerKind,
    pub p: usize,
    pub domain: SearchDomain,
    pub seed: u64,
    pub best_schedule: AngleSchedule,
    pub best_expectation: f64,
    pub approx_ratio: Option<f64>,
    pub evaluations: usize,
    pub budget: usize,
    pub samples: SampleSummary,
    pub wall_time_secs: Option<f64>,
    /// Every evaluated value in call order; not serialized.
    #[serde(skip)]
    pub evaluation_log: Vec<f64>,
}

impl RunRecord {
    /// One JSON line; the wall time is dropped so output is reproducible.
    pub fn to_json_line(&self) -> String {
        let mut copy = self.clone();
        copy.wall_time_secs = None;
        serde_json::to_string(&copy).expect("run record serializes")
    }

    pub fn with_instance(mut self, id: u64, seed: u64) -> Self {
        self.instance_id = Some(id);
        self.instance_seed = Some(seed);
        self
    }
}

/// Maps any real schedule into the domain: γ wraps modulo `gamma_max`;
/// β wraps modulo `beta_max` for the complete mixer and is clamped to
/// `[0, beta_max)` for the ring mixer, which has no period.
pub fn project_to_domain(kind: MixerKind, domain: &SearchDomain, schedule: &AngleSchedule) -> AngleSchedule {
    let wrap = |v: f64, m: f64| {
        let r = v.rem_euclid(m);
        if r >= m {
            0.0
        } else {
            r
        }
    };
    let beta_top = domain.beta_max.next_down();
    schedule
        .map(
            |g| wrap(g, domain.gamma_max),
            |b| match kind {
                MixerKind::Complete => wrap(b, domain.beta_max),
                MixerKind::Ring => b.clamp(0.0, beta_top),
            },
        )
        .expect("projection keeps angles finite")
}

/// Counting front end to `F_p`: projects into the domain, enforces the
/// evaluation cap and logs every value.
struct Evaluator<'a> {
    sim: &'a Simulator,
    initial: &'a StateVector,
    domain: SearchDomain,
    budget: usize,
    /// Current cap, at most `budget`; basin hopping lowers it per hop.
    limit: usize,
    log: Vec<f64>,
    best: Option<(AngleSchedule, f64)>,
    error: Option<QaoaError>,
}

impl<'a> Evaluator<'a> {
    fn new(sim: &'a Simulator, initial: &'a StateVector, domain: SearchDomain, budget: usize) -> Result<Self> {
        domain.validate()?;
        initial.check_dim(sim.dim())?;
        Ok(Self { sim, initial, domain, budget, limit: budget, log: Vec::new(), best: None, error: None })
    }

    fn used(&self) -> usize {
        self.log.len()
    }

    fn remaining(&self) -> usize {
        self.budget - self.used()
    }

    fn project(&self, schedule: &AngleSchedule) -> AngleSchedule {
        project_to_domain(self.sim.mixer_kind(), &self.domain, schedule)
    }

    fn record(&mut self, schedule: AngleSchedule, value: f64) {
        self.log.push(value);
        if self.best.as_ref().is_none_or(|(_, b)| value > *b) {
            self.best = Some((schedule, value));
        }
    }

    fn eval_flat(&mut self, flat: &[f64]) -> Option<f64> {
        if self.used() >= self.limit || self.error.is_some() {
            return None;
        }
        let schedule = AngleSchedule::from_flat(flat).map(|s| self.project(&s));
        match schedule.and_then(|s| self.sim.evaluate(self.initial, &s).map(|v| (s, v))) {
            Ok((s, v)) => {
                self.record(s, v);
                Some(v)
            }
            Err(e) => {
                self.error = Some(e);
                None
            }
        }
    }

    fn eval_batch(&mut self, schedules: Vec<AngleSchedule>) -> Result<()> {
        let take = schedules.len().min(self.limit.saturating_sub(self.used()));
        let schedules: Vec<_> = schedules.into_iter().take(take).map(|s| self.project(&s)).collect();
        let values = self.sim.evaluate_batch(self.initial, &schedules)?;
        for (s, v) in schedules.into_iter().zip(values) {
            self.record(s, v);
        }
        Ok(())
    }

    /// Nelder–Mead from `start` within the current limit. Returns the
    /// refined point and value, or `None` if no evaluation was possible.
    fn refine(&mut self, start: &AngleSchedule, settings: &OptimizerSettings) -> Result<Option<(AngleSchedule, f64)>> {
        let start = self.project(start);
        let result = nelder_mead::maximize(|x| self.eval_flat(x), &start.to_flat(), &settings.nelder_mead());
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        Ok(match result {
            Some(r) => Some((self.project(&AngleSchedule::from_flat(&r.point)?), r.value)),
            None => None,
        })
    }

    fn finish(self, strategy: StrategyKind, p: usize, seed: u64, started: Instant) -> Result<RunRecord> {
        let (best_schedule, best_expectation) =
            self.best.ok_or_else(|| invalid("strategy finished without evaluating anything"))?;
        let approx_ratio = self.sim.approximation_ratio(best_expectation).ok();
        Ok(RunRecord {
            schema_version: RUN_RECORD_SCHEMA_VERSION,
            strategy,
            instance_id: None,
            instance_seed: None,
            mixer: self.sim.mixer_kind(),
            p,
            domain: self.domain,
            seed,
            best_schedule,
            best_expectation,
            approx_ratio,
            evaluations: self.log.len(),
            budget: self.budget,
            samples: SampleSummary::of(&self.log),
            wall_time_secs: Some(started.elapsed().as_secs_f64()),
            evaluation_log: self.log,
        })
    }
}

fn check_budget(budget: usize) -> Result<()> {
    if budget == 0 {
        return Err(invalid("budget must allow at least one evaluation"));
    }
    Ok(())
}

fn check_p(p: usize) -> Result<()> {
    if p == 0 {
        return Err(invalid("p must be at least 1"));
    }
    Ok(())
}

/// Evaluates `budget` independent uniform schedules from the domain and
/// keeps the best.
pub fn monte_carlo_search(
    sim: &Simulator,
    initial: &StateVector,
    p: usize,
    domain: &SearchDomain,
    budget: usize,
    seed: u64,
) -> Result<RunRecord> {
    check_budget(budget)?;
    check_p(p)?;
    let started = Instant::now();
    let mut ev = Evaluator::new(sim, initial, *domain, budget)?;
    let mut rng = rng_from_seed(seed);
    let samples = (0..budget).map(|_| domain.sample(p, &mut rng)).collect();
    ev.eval_batch(samples)?;
    ev.finish(StrategyKind::MonteCarlo, p, seed, started)
}

/// Nelder–Mead refinement from `start`, spending at most `budget`
/// evaluations. The start is evaluated first, so the returned value is
/// never below `F_p(start)`.
pub fn local_refine(
    sim: &Simulator,
    initial: &StateVector,
    start: &AngleSchedule,
    domain: &SearchDomain,
    budget: usize,
    settings: &OptimizerSettings,
) -> Result<(AngleSchedule, f64)> {
    check_budget(budget)?;
    let mut ev = Evaluator::new(sim, initial, *domain, budget)?;
    ev.refine(start, settings)?;
    Ok(ev.best.expect("budget allows the start evaluation"))
}

/// Basin hopping from a uniformly random start drawn from `seed`.
#[allow(clippy::too_many_arguments)]
pub fn basin_hopping(
    sim: &Simulator,
    initial: &StateVector,
    p: usize,
    domain: &SearchDomain,
    budget: usize,
    hops: usize,
    seed: u64,
    settings: &OptimizerSettings,
) -> Result<RunRecord> {
    check_p(p)?;
    let mut rng = rng_from_seed(seed);
    let start = domain.sample(p, &mut rng);
    hop_from(sim, initial, &[start], domain, budget, hops, rng, seed, settings, StrategyKind::BasinHopping)
}

/// Basin hopping whose first local search starts at `start`.
#[allow(clippy::too_many_arguments)]
pub fn basin_hopping_from(
    sim: &Simulator,
    initial: &StateVector,
    start: &AngleSchedule,
    domain: &SearchDomain,
    budget: usize,
    hops: usize,
    seed: u64,
    settings: &OptimizerSettings,
) -> Result<RunRecord> {
    basin_hopping_multi_start(sim, initial, std::slice::from_ref(start), domain, budget, hops, seed, settings)
}

/// Basin hopping that first evaluates every schedule in `starts` and
/// begins its first local search at the best of them, so the result is
/// never below any start.
#[allow(clippy::too_many_arguments)]
pub fn basin_hopping_multi_start(
    sim: &Simulator,
    initial: &StateVector,
    starts: &[AngleSchedule],
    domain: &SearchDomain,
    budget: usize,
    hops: usize,
    seed: u64,
    settings: &OptimizerSettings,
) -> Result<RunRecord> {
    let rng = rng_from_seed(seed);
    hop_from(sim, initial, starts, domain, budget, hops, rng, seed, settings, StrategyKind::BasinHopping)
}

/// Shared hopping loop. With several `starts`, each is evaluated once and
/// the first local search begins at the best of them.
#[allow(clippy::too_many_arguments)]
fn hop_from(
    sim: &Simulator,
    initial: &StateVector,
    starts: &[AngleSchedule],
    domain: &SearchDomain,
    budget: usize,
    hops: usize,
    mut rng: rand_chacha::ChaCha8Rng,
    seed: u64,
    settings: &OptimizerSettings,
    strategy: StrategyKind,
) -> Result<RunRecord> {
    check_budget(budget)?;
    if hops == 0 {
        return Err(invalid("basin hopping needs at least one hop"));
    }
    let p = starts.first().map(AngleSchedule::p).ok_or_else(|| invalid("no start schedule"))?;
    if starts.iter().any(|s| s.p() != p) {
        return Err(invalid("start schedules must share p"));
    }
    let started = Instant::now();
    let mut ev = Evaluator::new(sim, initial, *domain, budget)?;

    let mut current = if starts.len() == 1 {
        ev.project(&starts[0])
    } else {
        let mut best: Option<(AngleSchedule, f64)> = None;
        for s in starts {
            if ev.remaining() == 0 {
                break;
            }
            let s = ev.project(s);
            let v = ev.sim.evaluate(ev.initial, &s)?;
            ev.record(s.clone(), v);
            if best.as_ref().is_none_or(|(_, b)| v > *b) {
                best = Some((s, v));
            }
        }
        best.expect("budget allows one evaluation").0
    };
    let mut current_value = f64::NEG_INFINITY;
    let temperature = settings.temperature_scale * sim.n_edges() as f64;

    for hop in 0..hops {
        let allotment = ev.remaining() / (hops - hop);
        if allotment == 0 {
            continue;
        }
        let candidate = if hop == 0 {
            current.clone()
        } else {
            let flat: Vec<f64> =
                current.to_flat().iter().map(|x| x + rng.random_range(-settings.hop_step..=settings.hop_step)).collect();
            AngleSchedule::from_flat(&flat)?
        };
        ev.limit = ev.used() + allotment;
        let Some((point, value)) = ev.refine(&candidate, settings)? else { continue };
        let accept = value >= current_value || {
            let u: f64 = rng.random();
            temperature > 0.0 && u < ((value - current_value) / temperature).exp()
        };
        if accept {
            current = point;
            current_value = value;
        }
    }
    ev.limit = ev.budget;
    ev.finish(strategy, p, seed, started)
}

/// Piecewise-linear resampling of a p-round schedule onto p+1 rounds,
/// treating each angle vector as a function of `i/(p−1)`. A single round
/// is duplicated.
pub fn interpolate_schedule(prev: &AngleSchedule) -> AngleSchedule {
    let resample = |v: &[f64]| -> Vec<f64> {
        let p = v.len();
        if p == 1 {
            return vec![v[0]; 2];
        }
        (0..=p)
            .map(|j| {
                let pos = j as f64 * (p - 1) as f64 / p as f64;
                let lo = (pos.floor() as usize).min(p - 2);
                let t = pos - lo as f64;
                v[lo] * (1.0 - t) + v[lo + 1] * t
            })
            .collect()
    };
    AngleSchedule::new(resample(prev.gammas()), resample(prev.betas())).expect("resampled angles are finite")
}

/// Level-(p+1) run started from the interpolation of `prev`'s best
/// schedule and refined with Nelder–Mead.
pub fn interpolation_warm_start(
    prev: Option<&RunRecord>,
    sim: &Simulator,
    initial: &StateVector,
    domain: &SearchDomain,
    budget: usize,
    settings: &OptimizerSettings,
) -> Result<RunRecord> {
    let prev = prev.ok_or_else(|| invalid("interpolation needs the previous level's run"))?;
    check_budget(budget)?;
    let started = Instant::now();
    let start = interpolate_schedule(&prev.best_schedule);
    let mut ev = Evaluator::new(sim, initial, *domain, budget)?;
    ev.refine(&start, settings)?;
    ev.finish(StrategyKind::Interpolation, start.p(), prev.seed, started)
}

/// Settings of a strategy comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareSettings {
    pub strategies: Vec<StrategyKind>,
    pub budget: Budget,
    pub p_max: usize,
    pub seed: u64,
    /// Hops of the basin-hopping strategy.
    pub hops: usize,
    /// Reference budget as a multiple of the strategy budget.
    pub reference_multiplier: usize,
    pub reference_hops: usize,
    pub optimizer: OptimizerSettings,
}

impl CompareSettings {
    pub fn new(strategies: Vec<StrategyKind>, budget: Budget, p_max: usize, seed: u64) -> Self {
        Self {
            strategies,
            budget,
            p_max,
            seed,
            hops: 10,
            reference_multiplier: 20,
            reference_hops: 10,
            optimizer: OptimizerSettings::default(),
        }
    }
}

/// Mean best ratio of one strategy at one level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub p: usize,
    pub strategy: StrategyKind,
    pub mean_ratio: f64,
    pub ci_halfwidth: f64,
    pub n_instances: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrategyComparison {
    /// Ordered by level, then strategy in the requested order, then the
    /// reference.
    pub curves: Vec<CurvePoint>,
    /// Per evaluated instance: every run, ordered as in `curves`.
    pub runs: Vec<Vec<RunRecord>>,
    /// Indices of instances skipped because their optimum is 0.
    pub skipped: Vec<usize>,
}

impl StrategyComparison {
    pub fn curve(&self, strategy: StrategyKind) -> Vec<f64> {
        self.curves.iter().filter(|c| c.strategy == strategy).map(|c| c.mean_ratio).collect()
    }
}

/// Runs every strategy at every level `1..=p_max` on every instance with
/// equal budgets, plus a large-budget reference, and averages the best
/// approximation ratios. Instances run in parallel on the current rayon
/// pool; results do not depend on the thread count.
pub fn strategy_compare(
    instances: &[ProblemInstance],
    mixer: MixerKind,
    initial: InitialState,
    domain: &SearchDomain,
    settings: &CompareSettings,
) -> Result<StrategyComparison> {
    settings.budget.validate()?;
    check_p(settings.p_max)?;
    if settings.strategies.is_empty() {
        return Err(invalid("no strategies to compare"));
    }
    if settings.strategies.contains(&StrategyKind::Reference) {
        return Err(invalid("the reference curve is always computed and cannot be requested"));
    }
    domain.validate()?;
    let cache = MixerCache::new();
    let (kept, skipped): (Vec<usize>, Vec<usize>) = (0..instances.len()).partition(|&i| instances[i].max_value() > 0);

    let runs = kept
        .par_iter()
        .map(|&i| {
            let inst = &instances[i];
            let sim = Simulator::new(inst, cache.get(inst.index(), mixer)?)?;
            let state = initial.prepare(inst.index())?;
            compare_one(&sim, &state, domain, settings, i as u64)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut order = settings.strategies.clone();
    order.push(StrategyKind::Reference);
    let mut curves = Vec::new();
    for p in 1..=settings.p_max {
        for &strategy in &order {
            let ratios: Vec<f64> = runs
                .iter()
                .flat_map(|r| r.iter().filter(|rec| rec.p == p && rec.strategy == strategy))
                .filter_map(|rec| rec.approx_ratio)
                .collect();
            let mean = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;
            curves.push(CurvePoint { p, strategy, mean_ratio: mean, ci_halfwidth: ci_halfwidth(&ratios), n_instances: ratios.len() });
        }
    }
    Ok(StrategyComparison { curves, runs, skipped })
}

fn compare_one(
    sim: &Simulator,
    initial: &StateVector,
    domain: &SearchDomain,
    settings: &CompareSettings,
    instance_id: u64,
) -> Result<Vec<RunRecord>> {
    let budget = settings.budget.for_level(settings.p_max);
    let opt = &settings.optimizer;
    let mut out = Vec::new();
    let mut previous: Vec<Option<RunRecord>> = vec![None; settings.strategies.len()];
    let mut reference: Option<RunRecord> = None;
    for p in 1..=settings.p_max {
        let mut level = Vec::new();
        for (slot, &strategy) in settings.strategies.iter().enumerate() {
            let seed = derive_seed(settings.seed, &[stream::STRATEGY, instance_id, strategy.id(), p as u64]);
            let rec = match strategy {
                StrategyKind::MonteCarlo => monte_carlo_search(sim, initial, p, domain, budget, seed)?,
                StrategyKind::BasinHopping => basin_hopping(sim, initial, p, domain, budget, settings.hops, seed, opt)?,
                StrategyKind::Interpolation => match &previous[slot] {
                    None => {
                        let mut r = basin_hopping(sim, initial, p, domain, budget, settings.hops, seed, opt)?;
                        r.strategy = StrategyKind::Interpolation;
                        r
                    }
                    Some(prev) => {
                        let mut r = interpolation_warm_start(Some(prev), sim, initial, domain, budget, opt)?;
                        r.seed = seed;
                        r
                    }
                },
                StrategyKind::Reference => unreachable!("rejected above"),
            };
            let rec = rec.with_instance(instance_id, settings.seed);
            previous[slot] = Some(rec.clone());
            level.push(rec);
        }

        // The reference starts from the zero-padded previous reference and
        // every strategy's best, so it dominates them and never decreases.
        let seed = derive_seed(settings.seed, &[stream::REFERENCE, instance_id, p as u64]);
        let mut rng = rng_from_seed(seed);
        let mut starts = Vec::new();
        match &reference {
            Some(prev) => starts.push(prev.best_schedule.zero_padded()),
            None => starts.push(domain.sample(p, &mut rng)),
        }
        starts.extend(level.iter().map(|r| r.best_schedule.clone()));
        let ref_budget = budget.saturating_mul(settings.reference_multiplier).max(starts.len() + 1);
        let rec = hop_from(sim, initial, &starts, domain, ref_budget, settings.reference_hops, rng, seed, opt, StrategyKind::Reference)?
            .with_instance(instance_id, settings.seed);
        reference = Some(rec.clone());
        level.push(rec);
        out.extend(level);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{gen_random_graph, Graph};
    use crate::subspace::dicke_state;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, TAU};

    fn triangle(kind: MixerKind) -> (Simulator, StateVector) {
        let inst = ProblemInstance::new(Graph::complete(3).unwrap(), 1).unwrap();
        let sim = Simulator::with_kind(&inst, kind).unwrap();
        (sim, dicke_state(inst.index()))
    }

    fn random(n: usize, seed: u64, kind: MixerKind) -> (Simulator, StateVector) {
        let inst = ProblemInstance::with_half_k(gen_random_graph(n, 0.5, seed).unwrap()).unwrap();
        let sim = Simulator::with_kind(&inst, kind).unwrap();
        (sim, dicke_state(inst.index()))
    }

    /// Best cell of an R×R grid over the default p=1 domain.
    fn grid_max(sim: &Simulator, state: &StateVector, r: usize) -> (AngleSchedule, f64) {
        let d = SearchDomain::default();
        let schedules: Vec<_> = (0..r)
            .flat_map(|i| (0..r).map(move |j| (i, j)))
            .map(|(i, j)| {
                AngleSchedule::new(vec![d.gamma_max * i as f64 / r as f64], vec![d.beta_max * j as f64 / r as f64]).unwrap()
            })
            .collect();
        let values = sim.evaluate_batch(state, &schedules).unwrap();
        let best = values.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
        (schedules[best].clone(), values[best])
    }

    #[test]
    fn budget_validation() {
        assert!(Budget::per_level(0).is_err());
        assert_eq!(Budget::total(100).unwrap().for_level(3), 33);
        assert_eq!(Budget::per_level(100).unwrap().for_level(3), 100);
    }

    #[test]
    fn projection_wraps_and_clamps() {
        let d = SearchDomain::default();
        let s = AngleSchedule::new(vec![-0.5, TAU + 0.25], vec![-0.1, FRAC_PI_2 + 0.2]).unwrap();
        let k = project_to_domain(MixerKind::Complete, &d, &s);
        assert!((k.gammas()[0] - (TAU - 0.5)).abs() < 1e-12 && (k.gammas()[1] - 0.25).abs() < 1e-12);
        assert!((k.betas()[0] - (FRAC_PI_2 - 0.1)).abs() < 1e-12 && (k.betas()[1] - 0.2).abs() < 1e-12);
        let r = project_to_domain(MixerKind::Ring, &d, &s);
        assert_eq!(r.betas()[0], 0.0);
        assert!(r.betas()[1] < FRAC_PI_2);
        assert!(d.contains(&k) && d.contains(&r));
        // tiny negatives must not round up to the open upper bound
        let edge = AngleSchedule::new(vec![-1e-300], vec![-1e-300]).unwrap();
        assert!(d.contains(&project_to_domain(MixerKind::Complete, &d, &edge)));
    }

    #[test]
    fn monte_carlo_examples() {
        let (sim, state) = triangle(MixerKind::Complete);
        let d = SearchDomain::default();
        let one = monte_carlo_search(&sim, &state, 1, &d, 1, 7).unwrap();
        assert_eq!(one.evaluations, 1);
        assert_eq!(one.samples.count, 1);
        assert_eq!(one.best_expectation, one.evaluation_log[0]);
        assert_eq!(one.samples.std, 0.0);

        let a = monte_carlo_search(&sim, &state, 2, &d, 300, 11).unwrap();
        let b = monte_carlo_search(&sim, &state, 2, &d, 300, 11).unwrap();
        assert_eq!(a.to_json_line(), b.to_json_line());
        assert!(a.best_expectation <= 2.0 + 1e-12);
        assert!(monte_carlo_search(&sim, &state, 1, &d, 0, 1).is_err());
        assert!(monte_carlo_search(&sim, &state, 1, &SearchDomain { gamma_max: 0.0, beta_max: 1.0 }, 5, 1).is_err());
    }

    #[test]
    fn monte_carlo_batch_matches_single_path() {
        let (sim, state) = random(7, 3, MixerKind::Ring);
        let rec = monte_carlo_search(&sim, &state, 3, &SearchDomain::default(), 20, 5).unwrap();
        let single = sim.evaluate(&state, &rec.best_schedule).unwrap();
        assert!((single - rec.best_expectation).abs() < 1e-10);
    }

    #[test]
    fn local_refine_examples() {
        let (sim, state) = random(6, 9, MixerKind::Complete);
        let d = SearchDomain::default();
        let opts = OptimizerSettings::default();
        let (grid_best, grid_value) = grid_max(&sim, &state, 64);
        let (refined, value) = local_refine(&sim, &state, &grid_best, &d, 400, &opts).unwrap();
        assert!(value >= grid_value);
        assert!(d.contains(&refined));
        assert!((sim.evaluate(&state, &refined).unwrap() - value).abs() < 1e-12);

        // at a maximum with a tiny simplex nothing better is found
        let tiny = OptimizerSettings { simplex_step: 1e-9, ..opts };
        let (again, v2) = local_refine(&sim, &state, &refined, &d, 400, &tiny).unwrap();
        assert!((v2 - value).abs() < 1e-9);
        assert!(again.to_flat().iter().zip(refined.to_flat()).all(|(a, b)| (a - b).abs() < 1e-6));
    }

    #[test]
    fn basin_hopping_single_hop_is_local_refine() {
        let (sim, state) = random(6, 4, MixerKind::Ring);
        let d = SearchDomain::default();
        let opts = OptimizerSettings::default();
        let seed = 99;
        let rec = basin_hopping(&sim, &state, 2, &d, 150, 1, seed, &opts).unwrap();
        let start = d.sample(2, &mut rng_from_seed(seed));
        let (_, value) = local_refine(&sim, &state, &start, &d, 150, &opts).unwrap();
        assert_eq!(rec.best_expectation, value);
    }

    #[test]
    fn basin_hopping_reaches_triangle_optimum() {
        let (sim, state) = triangle(MixerKind::Complete);
        let d = SearchDomain::default();
        let (grid_best, _) = grid_max(&sim, &state, 256);
        let opts = OptimizerSettings::default();
        let (_, oracle) = local_refine(&sim, &state, &grid_best, &d, 2000, &opts).unwrap();
        let rec = basin_hopping(&sim, &state, 1, &d, 2000, 10, 5, &opts).unwrap();
        assert!((rec.best_expectation - oracle).abs() < 1e-6, "{} vs {oracle}", rec.best_expectation);
        assert!(rec.best_expectation <= 2.0 + 1e-12);
    }

    #[test]
    fn best_ever_is_non_decreasing_in_hops() {
        let (sim, state) = random(7, 12, MixerKind::Complete);
        let d = SearchDomain::default();
        let opts = OptimizerSettings::default();
        // with a per-hop allotment fixed, more hops only add evaluations
        let values: Vec<f64> = (1..=4)
            .map(|h| basin_hopping(&sim, &state, 2, &d, 60 * h, h, 8, &opts).unwrap().best_expectation)
            .collect();
        assert!(values.windows(2).all(|w| w[1] >= w[0]), "{values:?}");
    }

    #[test]
    fn interpolation_examples() {
        let one = AngleSchedule::new(vec![0.4], vec![0.2]).unwrap();
        let two = interpolate_schedule(&one);
        assert_eq!(two.gammas(), &[0.4, 0.4]);
        assert_eq!(two.betas(), &[0.2, 0.2]);

        let c = 0.3;
        let ramp = AngleSchedule::new((1..=4).map(|i| c * i as f64).collect(), vec![0.1; 4]).unwrap();
        let five = interpolate_schedule(&ramp);
        assert_eq!(five.p(), 5);
        let g = five.gammas();
        let step = g[1] - g[0];
        assert!(g.windows(2).all(|w| (w[1] - w[0] - step).abs() < 1e-12));
        assert!((g[0] - c).abs() < 1e-12 && (g[4] - 4.0 * c).abs() < 1e-12);
        assert!(five.betas().iter().all(|&b| (b - 0.1).abs() < 1e-12));
    }

    #[test]
    fn warm_start_never_below_start() {
        let (sim, state) = random(7, 21, MixerKind::Complete);
        let d = SearchDomain::default();
        let opts = OptimizerSettings::default();
        assert!(interpolation_warm_start(None, &sim, &state, &d, 10, &opts).is_err());
        let prev = basin_hopping(&sim, &state, 2, &d, 200, 2, 1, &opts).unwrap();
        let next = interpolation_warm_start(Some(&prev), &sim, &state, &d, 100, &opts).unwrap();
        assert_eq!(next.p, 3);
        let start_value = sim.evaluate(&state, &interpolate_schedule(&prev.best_schedule)).unwrap();
        assert!(next.best_expectation >= start_value);
        let padded = sim.evaluate(&state, &prev.best_schedule.zero_padded()).unwrap();
        assert!((padded - prev.best_expectation).abs() < 1e-12);
    }

    #[test]
    fn strategy_compare_properties() {
        let instances: Vec<_> = (0..4)
            .map(|s| ProblemInstance::with_half_k(gen_random_graph(6, 0.5, s).unwrap()).unwrap())
            .chain([ProblemInstance::new(Graph::new(6, []).unwrap(), 3).unwrap()])
            .collect();
        let strategies = vec![StrategyKind::MonteCarlo, StrategyKind::BasinHopping, StrategyKind::Interpolation];
        let settings = CompareSettings::new(strategies.clone(), Budget::per_level(30).unwrap(), 3, 17);
        let d = SearchDomain::default();
        let cmp = strategy_compare(&instances, MixerKind::Complete, InitialState::Dicke, &d, &settings).unwrap();
        assert_eq!(cmp.skipped, vec![4]);
        assert_eq!(cmp.curves.len(), 3 * 4);
        for runs in &cmp.runs {
            for rec in runs {
                assert!(rec.evaluations <= rec.budget);
                assert!(d.contains(&rec.best_schedule));
                let log_max = rec.evaluation_log.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(rec.best_expectation, log_max);
            }
            for p in 1..=3 {
                let level: Vec<_> = runs.iter().filter(|r| r.p == p).collect();
                let reference = level.iter().find(|r| r.strategy == StrategyKind::Reference).unwrap();
                for r in &level {
                    assert!(r.best_expectation <= reference.best_expectation + 1e-9);
                }
            }
            let refs: Vec<f64> =
                runs.iter().filter(|r| r.strategy == StrategyKind::Reference).map(|r| r.best_expectation).collect();
            assert!(refs.windows(2).all(|w| w[1] >= w[0] - 1e-12), "{refs:?}");
        }
        let again = strategy_compare(&instances, MixerKind::Complete, InitialState::Dicke, &d, &settings).unwrap();
        assert_eq!(cmp.curves, again.curves);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn strategies_respect_budget_and_domain(seed in any::<u64>(), budget in 1usize..60, hops in 1usize..5, p in 1usize..4) {
            let kind = if seed % 2 == 0 { MixerKind::Ring } else { MixerKind::Complete };
            let (sim, state) = random(5, seed, kind);
            let d = SearchDomain::default();
            let opts = OptimizerSettings::default();
            let mc = monte_carlo_search(&sim, &state, p, &d, budget, seed).unwrap();
            let bh = basin_hopping(&sim, &state, p, &d, budget, hops, seed, &opts).unwrap();
            for rec in [&mc, &bh] {
                prop_assert!(rec.evaluations <= budget);
                prop_assert_eq!(rec.evaluations, rec.evaluation_log.len());
                prop_assert!(d.contains(&rec.best_schedule));
                let log_max = rec.evaluation_log.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert_eq!(rec.best_expectation, log_max);
            }
            prop_assert_eq!(mc.evaluations, budget);
        }
    }
}

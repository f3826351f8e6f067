//! Invariant suite behind the `verify` subcommand: spectral identities,
//! periods, the full-space oracle, symmetries and exact padding, checked
//! on seeded random small instances.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{fmt, Csv, ExperimentConfig, ExperimentOutput};
use crate::engine::reference::{full_space_reference_expectation, ReferenceStart};
use crate::engine::{AngleSchedule, InitialState, SearchDomain, Simulator};
use crate::error::Result;
use crate::instances::{gen_random_graph, ProblemInstance};
use crate::operators::{build_complete_mixer, johnson_spectrum, ring_periodicity_probe, MixerKind, Sectors};
use crate::rng::{derive_seed, rng_from_seed};
use crate::subspace::{StateVector, SubspaceIndex};

/// Result of one invariant check.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub cases: usize,
    /// Largest observed error; for `lower_bound` checks, the smallest
    /// observed margin.
    pub worst: f64,
    pub tolerance: f64,
    /// When true the check passes if `worst > tolerance`.
    pub lower_bound: bool,
}

impl Check {
    pub fn passed(&self) -> bool {
        if self.lower_bound {
            self.worst > self.tolerance
        } else {
            self.worst <= self.tolerance
        }
    }
}

fn random_instance(rng: &mut ChaCha8Rng, n_lo: usize, n_hi: usize) -> Result<ProblemInstance> {
    let n = rng.random_range(n_lo..=n_hi);
    let k = rng.random_range(1..n);
    ProblemInstance::new(gen_random_graph(n, 0.5, rng.random())?, k)
}

fn random_schedule(rng: &mut ChaCha8Rng, p: usize) -> AngleSchedule {
    let gammas = (0..p).map(|_| rng.random_range(-TAU..TAU)).collect();
    let betas = (0..p).map(|_| rng.random_range(-PI..PI)).collect();
    AngleSchedule::new(gammas, betas).expect("finite angles")
}

fn random_state(rng: &mut ChaCha8Rng, index: &SubspaceIndex) -> Result<StateVector> {
    let mut amps: Vec<Complex64> =
        (0..index.dim()).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    StateVector::from_amplitudes(index, amps)
}

fn kind_of(rng: &mut ChaCha8Rng) -> MixerKind {
    if rng.random::<bool>() {
        MixerKind::Complete
    } else {
        MixerKind::Ring
    }
}

/// Runs every check with `cases` random cases each, seeded from `seed`.
pub fn invariant_suite(cases: usize, seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let rng_for = |label: u64| rng_from_seed(derive_seed(seed, &[label]));

    // complete mixer = 2 x Johnson adjacency
    let mut worst = 0.0f64;
    let mut count = 0;
    for n in 2..=8 {
        for k in 0..=n {
            let index = SubspaceIndex::new(n, k)?;
            let mut got = build_complete_mixer(&index)?.eigenvalues()?;
            got.sort_by(f64::total_cmp);
            let mut expect: Vec<f64> = johnson_spectrum(n, k)?
                .iter()
                .flat_map(|e| std::iter::repeat_n(2.0 * e.value as f64, e.multiplicity as usize))
                .collect();
            expect.sort_by(f64::total_cmp);
            if got.len() != expect.len() {
                worst = f64::INFINITY;
            } else {
                worst = got.iter().zip(&expect).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
            }
            count += 1;
        }
    }
    checks.push(Check { name: "johnson-spectrum", cases: count, worst, tolerance: 1e-8, lower_bound: false });

    // exp(-i pi H_K) is a global phase
    let mut rng = rng_for(1);
    let mut worst = 0.0f64;
    let mut count = 0;
    for n in 2..=8 {
        for k in 0..=n {
            let index = SubspaceIndex::new(n, k)?;
            let mixer = build_complete_mixer(&index)?;
            let state = random_state(&mut rng, &index)?;
            worst = worst.max(mixer.apply(PI, &state)?.phase_aligned_distance(&state));
            count += 1;
        }
    }
    checks.push(Check { name: "complete-mixer-period", cases: count, worst, tolerance: 1e-9, lower_bound: false });

    // ring mixer: no period pi d / 2, d <= 1000, for n >= 4; found for n = 2, 3
    let mut margin = f64::INFINITY;
    for n in 4..=8 {
        let report = ring_periodicity_probe(n, Sectors::All, 1000, 1e-6)?;
        margin = report.candidates.iter().map(|c| c.deviation).fold(margin, f64::min);
    }
    checks.push(Check { name: "ring-mixer-aperiodic", cases: 5, worst: margin, tolerance: 1e-6, lower_bound: true });
    let mut worst = 0.0f64;
    for n in 2..=3 {
        let report = ring_periodicity_probe(n, Sectors::All, 1000, 1e-6)?;
        worst = worst.max(report.period().map_or(f64::INFINITY, |c| c.deviation));
    }
    checks.push(Check { name: "ring-mixer-small-periodic", cases: 2, worst, tolerance: 1e-6, lower_bound: false });

    // subspace evolution vs full 2^n space
    let mut rng = rng_for(2);
    let (mut worst, mut occupation) = (0.0f64, 0.0f64);
    for _ in 0..cases {
        let inst = random_instance(&mut rng, 3, 7)?;
        let kind = kind_of(&mut rng);
        let p = rng.random_range(1..=3);
        let schedule = random_schedule(&mut rng, p);
        let (start, initial) = if rng.random::<bool>() {
            (ReferenceStart::Dicke, InitialState::Dicke)
        } else {
            let x = inst.index().unrank(rng.random_range(0..inst.index().dim()))?;
            (ReferenceStart::Basis(x), InitialState::Basis(x))
        };
        let sim = Simulator::with_kind(&inst, kind)?;
        let sub = sim.evaluate(&initial.prepare(inst.index())?, &schedule)?;
        let full = full_space_reference_expectation(&inst, kind, start, &schedule)?;
        worst = worst.max((sub - full.expectation).abs());
        occupation = occupation.max((1.0 - full.min_sector_occupation).abs()).max((full.max_sector_occupation - 1.0).abs());
    }
    checks.push(Check { name: "full-space-oracle", cases, worst, tolerance: 1e-10, lower_bound: false });
    checks.push(Check { name: "sector-occupation", cases, worst: occupation, tolerance: 1e-10, lower_bound: false });

    // angle symmetries and norm preservation
    let mut rng = rng_for(3);
    let (mut sym, mut rev, mut norm) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..cases {
        let inst = random_instance(&mut rng, 3, 8)?;
        let p = rng.random_range(1..=4);
        let schedule = random_schedule(&mut rng, p);
        let dicke = InitialState::Dicke.prepare(inst.index())?;
        for kind in [MixerKind::Complete, MixerKind::Ring] {
            let sim = Simulator::with_kind(&inst, kind)?;
            let f = sim.evaluate(&dicke, &schedule)?;
            let reversed = schedule.map(|g| -g, |b| -b)?;
            rev = rev.max((sim.evaluate(&dicke, &reversed)? - f).abs());
            if kind == MixerKind::Complete {
                let mirrored = schedule.map(|g| TAU - g, |b| PI - b)?;
                sym = sym.max((sim.evaluate(&dicke, &mirrored)? - f).abs());
            }
            norm = norm.max((sim.evolve(&dicke, &schedule)?.norm_sqr().sqrt() - 1.0).abs());
        }
    }
    checks.push(Check { name: "complete-mixer-mirror-symmetry", cases, worst: sym, tolerance: 1e-9, lower_bound: false });
    checks.push(Check { name: "time-reversal-symmetry", cases: 2 * cases, worst: rev, tolerance: 1e-9, lower_bound: false });
    checks.push(Check { name: "norm-preservation", cases: 2 * cases, worst: norm, tolerance: 1e-10, lower_bound: false });

    // mean over all basis starts is the objective average
    let mut rng = rng_for(4);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let inst = random_instance(&mut rng, 3, 7)?;
        let kind = kind_of(&mut rng);
        let p = rng.random_range(1..=3);
        let schedule = random_schedule(&mut rng, p);
        let sim = Simulator::with_kind(&inst, kind)?;
        let mut total = 0.0;
        for x in inst.index().basis() {
            total += sim.evaluate(&InitialState::Basis(x).prepare(inst.index())?, &schedule)?;
        }
        worst = worst.max((total / inst.index().dim() as f64 - inst.mean_value()).abs());
    }
    checks.push(Check { name: "mixed-state-constancy", cases, worst, tolerance: 1e-9, lower_bound: false });

    // zero-angle padding is exact
    let mut rng = rng_for(5);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let inst = random_instance(&mut rng, 3, 8)?;
        let kind = kind_of(&mut rng);
        let sim = Simulator::with_kind(&inst, kind)?;
        let schedule = SearchDomain::default().sample(rng.random_range(1..=4), &mut rng);
        let dicke = InitialState::Dicke.prepare(inst.index())?;
        let f = sim.evaluate(&dicke, &schedule)?;
        worst = worst.max((sim.evaluate(&dicke, &schedule.zero_padded().zero_padded())? - f).abs());
    }
    checks.push(Check { name: "zero-padding", cases, worst, tolerance: 1e-12, lower_bound: false });

    Ok(checks)
}

pub(crate) fn run(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let checks = invariant_suite(config.verify_cases, config.master_seed())?;
    let notes = vec!["worst is the largest error, or the smallest margin for lower-bound checks".to_string()];
    let mut csv = Csv::new(config, &notes, &["check", "cases", "worst", "tolerance", "bound", "pass"]);
    let mut failures = Vec::new();
    for c in &checks {
        let bound = if c.lower_bound { "lower" } else { "upper" };
        csv.row(&[c.name.to_string(), c.cases.to_string(), format!("{:.6e}", c.worst), format!("{:.1e}", c.tolerance), bound.into(), c.passed().to_string()]);
        if !c.passed() {
            failures.push(format!("{}: worst {} vs tolerance {}", c.name, fmt(c.worst), c.tolerance));
        }
    }
    Ok(ExperimentOutput { files: vec![csv.into_file("verify.csv")], failures })
}

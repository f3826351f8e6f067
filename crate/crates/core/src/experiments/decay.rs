//! Monte Carlo statistics per level and the number of uniform draws at
//! level p+1 needed to beat the best of level p.

use rayon::prelude::*;

use super::{fmt, generate_family, simulator, usable, Csv, ExperimentConfig, ExperimentOutput};
use crate::engine::{SearchDomain, Simulator};
use crate::error::Result;
use crate::operators::MixerCache;
use crate::optimize::monte_carlo_search;
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::stats::{ci_halfwidth, mean_std};
use crate::subspace::StateVector;

const STREAM_CHUNK: usize = 4096;
const SUB_BATCH: usize = 64;

/// Outcome of a samples-to-beat search for several thresholds at once.
#[derive(Clone, Debug, PartialEq)]
pub struct BeatCounts {
    /// Draws until the first value strictly above each threshold, in input
    /// order; `cap` where none was found.
    pub counts: Vec<usize>,
    pub censored: usize,
    pub draws: usize,
}

/// Draws one seeded stream of uniform level-`p` schedules (at most `cap`)
/// and records, for every threshold, the 1-based index of the first draw
/// whose value exceeds it. Each count has the marginal law of an
/// independent search; the shared stream only correlates them.
pub fn samples_to_beat(
    sim: &Simulator,
    initial: &StateVector,
    p: usize,
    domain: &SearchDomain,
    thresholds: &[f64],
    cap: usize,
    seed: u64,
) -> Result<BeatCounts> {
    let mut order: Vec<usize> = (0..thresholds.len()).collect();
    order.sort_by(|&a, &b| thresholds[a].total_cmp(&thresholds[b]).then(a.cmp(&b)));
    let mut counts = vec![cap; thresholds.len()];
    let mut next = 0;
    let mut draws = 0;
    let mut running = f64::NEG_INFINITY;
    let mut rng = rng_from_seed(seed);
    while next < order.len() && draws < cap {
        let take = STREAM_CHUNK.min(cap - draws);
        let batch: Vec<_> = (0..take).map(|_| domain.sample(p, &mut rng)).collect();
        let values: Vec<f64> = batch
            .par_chunks(SUB_BATCH)
            .map(|c| sim.evaluate_batch(initial, c))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        for v in values {
            draws += 1;
            running = running.max(v);
            while next < order.len() && running > thresholds[order[next]] {
                counts[order[next]] = draws;
                next += 1;
            }
            if next == order.len() {
                break;
            }
        }
    }
    Ok(BeatCounts { counts, censored: order.len() - next, draws })
}

pub(crate) fn run(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let (members, notes) = usable(generate_family(&config.family)?);
    let cache = MixerCache::new();
    let mut cap_note = notes.clone();
    cap_note.push(format!("samples-to-beat capped at {} draws; censored runs count as the cap", config.beat_cap));
    let mut levels_csv = Csv::new(
        config,
        &notes,
        &["graph_id", "mixer", "p", "mean_best_ratio", "best_ratio_ci", "mean_sample_std", "sample_std_ci", "repetitions"],
    );
    let mut beat_csv = Csv::new(
        config,
        &cap_note,
        &[
            "graph_id",
            "mixer",
            "p_from",
            "p_to",
            "mean_samples",
            "samples_ci",
            "mean_log10_samples",
            "censored",
            "cap",
            "repetitions",
        ],
    );
    for m in &members {
        for (slot, &kind) in config.mixers.iter().enumerate() {
            let sim = simulator(&cache, &m.instance, kind)?;
            let state = config.initial.prepare(m.instance.index())?;
            let levels: Vec<usize> = (config.p_min..=config.p_max).collect();
            let cells: Vec<(usize, usize)> =
                levels.iter().flat_map(|&p| (0..config.repetitions).map(move |r| (p, r))).collect();
            let runs = cells
                .par_iter()
                .map(|&(p, r)| {
                    let seed =
                        derive_seed(config.master_seed(), &[stream::MONTE_CARLO, m.id, slot as u64, r as u64, p as u64]);
                    let rec = monte_carlo_search(&sim, &state, p, &config.domain, config.samples, seed)?;
                    Ok((rec.best_expectation, rec.samples.std))
                })
                .collect::<Result<Vec<_>>>()?;
            let per_level: Vec<&[(f64, f64)]> = runs.chunks(config.repetitions).collect();

            for (&p, reps) in levels.iter().zip(&per_level) {
                let ratios: Vec<f64> = reps.iter().map(|r| sim.approximation_ratio(r.0)).collect::<Result<_>>()?;
                let stds: Vec<f64> = reps.iter().map(|r| r.1).collect();
                levels_csv.row(&[
                    m.id.to_string(),
                    kind.to_string(),
                    p.to_string(),
                    fmt(mean_std(&ratios).0),
                    fmt(ci_halfwidth(&ratios)),
                    fmt(mean_std(&stds).0),
                    fmt(ci_halfwidth(&stds)),
                    config.repetitions.to_string(),
                ]);
            }

            for (i, &p) in levels.iter().enumerate().take(levels.len() - 1) {
                let thresholds: Vec<f64> = per_level[i].iter().map(|r| r.0).collect();
                let seed = derive_seed(config.master_seed(), &[stream::BEAT, m.id, slot as u64, p as u64 + 1]);
                let beat = samples_to_beat(&sim, &state, p + 1, &config.domain, &thresholds, config.beat_cap, seed)?;
                let counts: Vec<f64> = beat.counts.iter().map(|&c| c as f64).collect();
                let logs: Vec<f64> = counts.iter().map(|c| c.log10()).collect();
                beat_csv.row(&[
                    m.id.to_string(),
                    kind.to_string(),
                    p.to_string(),
                    (p + 1).to_string(),
                    fmt(mean_std(&counts).0),
                    fmt(ci_halfwidth(&counts)),
                    fmt(mean_std(&logs).0),
                    beat.censored.to_string(),
                    config.beat_cap.to_string(),
                    config.repetitions.to_string(),
                ]);
            }
        }
    }
    Ok(ExperimentOutput {
        files: vec![levels_csv.into_file("std_decay.csv"), beat_csv.into_file("samples_to_beat.csv")],
        failures: vec![],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{gen_random_graph, ProblemInstance};
    use crate::operators::MixerKind;
    use crate::subspace::dicke_state;

    #[test]
    fn beat_counts_match_sequential_scan() {
        let inst = ProblemInstance::with_half_k(gen_random_graph(6, 0.5, 8).unwrap()).unwrap();
        let sim = Simulator::with_kind(&inst, MixerKind::Complete).unwrap();
        let state = dicke_state(inst.index());
        let d = SearchDomain::default();
        let thresholds = [inst.mean_value(), inst.mean_value() + 0.5, f64::INFINITY, 0.0];
        let beat = samples_to_beat(&sim, &state, 2, &d, &thresholds, 5000, 3).unwrap();

        let mut rng = rng_from_seed(3);
        let values: Vec<f64> =
            (0..5000).map(|_| sim.evaluate(&state, &d.sample(2, &mut rng)).unwrap()).collect();
        for (t, &count) in thresholds.iter().zip(&beat.counts) {
            let expect = values.iter().position(|v| v > t).map_or(5000, |i| i + 1);
            assert_eq!(count, expect, "threshold {t}");
        }
        assert_eq!(beat.censored, 1);
        assert_eq!(beat.draws, 5000);
    }
}

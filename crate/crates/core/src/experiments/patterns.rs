//! Best-known angle schedules per round, and the strategy comparison.

use rayon::prelude::*;

use super::{fmt, generate_family, provenance_json, simulator, usable, Csv, ExperimentConfig, ExperimentOutput, OutputFile};
use crate::engine::AngleSchedule;
use crate::error::Result;
use crate::operators::MixerCache;
use crate::optimize::{self, basin_hopping_multi_start, interpolate_schedule, Budget, CompareSettings};
use crate::rng::{derive_seed, rng_from_seed, stream};

/// Reference protocol: levels 1..=p_max in sequence; each level runs basin
/// hopping with `budget × reference_multiplier` evaluations and
/// `reference_hops` hops, started from the best of a uniform draw, the
/// interpolated previous best and the zero-padded previous best.
pub(crate) fn angle_patterns(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let (members, notes) = usable(generate_family(&config.family)?);
    let cache = MixerCache::new();
    let budget = config.budget.saturating_mul(config.reference_multiplier);
    let mut files = Vec::new();
    for (slot, &kind) in config.mixers.iter().enumerate() {
        let per_graph = members
            .par_iter()
            .map(|m| {
                let sim = simulator(&cache, &m.instance, kind)?;
                let state = config.initial.prepare(m.instance.index())?;
                let mut prev: Option<AngleSchedule> = None;
                let mut found = Vec::new();
                for p in 1..=config.p_max {
                    let seed = derive_seed(config.master_seed(), &[stream::REFERENCE, m.id, slot as u64, p as u64]);
                    let mut starts = vec![config.domain.sample(p, &mut rng_from_seed(seed ^ 1))];
                    if let Some(prev) = &prev {
                        starts.push(interpolate_schedule(prev));
                        starts.push(prev.zero_padded());
                    }
                    let rec = basin_hopping_multi_start(
                        &sim,
                        &state,
                        &starts,
                        &config.domain,
                        budget,
                        config.reference_hops,
                        seed,
                        &config.optimizer,
                    )?;
                    prev = Some(rec.best_schedule.clone());
                    if p >= config.p_min {
                        found.push(rec.best_schedule);
                    }
                }
                Ok(found)
            })
            .collect::<Result<Vec<_>>>()?;

        let mut csv = Csv::new(config, &notes, &["graph_id", "p", "round", "gamma", "beta"]);
        for (m, schedules) in members.iter().zip(&per_graph) {
            for s in schedules {
                for (round, (g, b)) in s.gammas().iter().zip(s.betas()).enumerate() {
                    csv.row(&[m.id.to_string(), s.p().to_string(), (round + 1).to_string(), fmt(*g), fmt(*b)]);
                }
            }
        }
        files.push(csv.into_file(&format!("angle_patterns_{kind}.csv")));
    }
    Ok(ExperimentOutput { files, failures: vec![] })
}

pub(crate) fn strategy_compare(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let members = generate_family(&config.family)?;
    let (_, notes) = usable(members.clone());
    let instances: Vec<_> = members.iter().map(|m| m.instance.clone()).collect();
    let mut settings =
        CompareSettings::new(config.strategies.clone(), Budget::per_level(config.budget)?, config.p_max, config.master_seed());
    settings.hops = config.hops;
    settings.reference_multiplier = config.reference_multiplier;
    settings.reference_hops = config.reference_hops;
    settings.optimizer = config.optimizer;

    let mut files = Vec::new();
    for &kind in &config.mixers {
        let cmp = optimize::strategy_compare(&instances, kind, config.initial, &config.domain, &settings)?;
        let mut csv = Csv::new(config, &notes, &["p", "strategy", "mean_ratio", "ci_halfwidth", "n_instances"]);
        for c in cmp.curves.iter().filter(|c| c.p >= config.p_min) {
            csv.row(&[c.p.to_string(), c.strategy.to_string(), fmt(c.mean_ratio), fmt(c.ci_halfwidth), c.n_instances.to_string()]);
        }
        files.push(csv.into_file(&format!("strategy_compare_{kind}.csv")));

        let mut runs = serde_json::to_string(&provenance_json(config))? + "\n";
        for rec in cmp.runs.iter().flatten() {
            let mut rec = rec.clone();
            rec.instance_seed = rec.instance_id.map(|id| members[id as usize].seed);
            runs.push_str(&rec.to_json_line());
            runs.push('\n');
        }
        files.push(OutputFile { name: format!("strategy_runs_{kind}.jsonl"), contents: runs });
    }
    Ok(ExperimentOutput { files, failures: vec![] })
}

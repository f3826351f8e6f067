//! Initial-state and mixer comparisons at equal optimizer budgets.

use rayon::prelude::*;

use super::{fmt, generate_family, simulator, usable, Csv, ExperimentConfig, ExperimentOutput};
use crate::engine::{InitialState, SearchDomain, Simulator};
use crate::error::{invalid, QaoaError, Result};
use crate::operators::{MixerCache, MixerKind};
use crate::optimize::basin_hopping;
use crate::rng::{derive_seed, stream};
use crate::stats::{ci_halfwidth, mean_std};
use crate::subspace::StateVector;

/// Classical starts are enumerated exhaustively only up to this size.
const MAX_CLASSICAL_N: usize = 10;

fn best_ratio(sim: &Simulator, state: &StateVector, p: usize, config: &ExperimentConfig, seed: u64) -> Result<f64> {
    let domain: SearchDomain = config.domain;
    let rec = basin_hopping(sim, state, p, &domain, config.budget, config.hops, seed, &config.optimizer)?;
    sim.approximation_ratio(rec.best_expectation)
}

fn mixer_slot(config: &ExperimentConfig, kind: MixerKind) -> u64 {
    config.mixers.iter().position(|&m| m == kind).unwrap_or(0) as u64
}

/// Per graph, mixer and level: best ratio from the Dicke start and the
/// mean/std of best ratios over every weight-k basis start. All starts of
/// one (graph, mixer, level) share the optimizer seed.
pub(crate) fn initial_compare(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    if config.family.n_max > MAX_CLASSICAL_N {
        return Err(QaoaError::Unsupported(format!(
            "classical starts are enumerated exhaustively only for n <= {MAX_CLASSICAL_N}"
        )));
    }
    let (members, notes) = usable(generate_family(&config.family)?);
    let cache = MixerCache::new();
    let mut cells = Vec::new();
    for m in &members {
        for &kind in &config.mixers {
            for p in config.p_min..=config.p_max {
                cells.push((m, kind, p));
            }
        }
    }
    let rows = cells
        .par_iter()
        .map(|&(m, kind, p)| {
            let sim = simulator(&cache, &m.instance, kind)?;
            let seed = derive_seed(config.master_seed(), &[stream::OPTIMIZE, m.id, mixer_slot(config, kind), p as u64]);
            let index = m.instance.index();
            let dicke = best_ratio(&sim, &InitialState::Dicke.prepare(index)?, p, config, seed)?;
            let classical = index
                .basis()
                .into_iter()
                .map(|x| best_ratio(&sim, &InitialState::Basis(x).prepare(index)?, p, config, seed))
                .collect::<Result<Vec<_>>>()?;
            let (mean, std) = mean_std(&classical);
            Ok((m.id, p, kind, dicke, mean, std))
        })
        .collect::<Result<Vec<_>>>()?;

    let columns = ["graph_id", "p", "mixer", "dicke_ratio", "classical_mean_ratio", "classical_std"];
    let mut per_graph = Csv::new(config, &notes, &columns);
    for &(id, p, kind, d, m, s) in &rows {
        per_graph.row(&[id.to_string(), p.to_string(), kind.to_string(), fmt(d), fmt(m), fmt(s)]);
    }

    let mut summary = Csv::new(
        config,
        &notes,
        &["p", "mixer", "dicke_ratio", "classical_mean_ratio", "classical_std", "dicke_wins", "n_graphs"],
    );
    for p in config.p_min..=config.p_max {
        for &kind in &config.mixers {
            let sel: Vec<_> = rows.iter().filter(|r| r.1 == p && r.2 == kind).collect();
            let n = sel.len().max(1) as f64;
            let avg = |f: &dyn Fn(&(u64, usize, MixerKind, f64, f64, f64)) -> f64| sel.iter().map(|r| f(r)).sum::<f64>() / n;
            let wins = sel.iter().filter(|r| r.3 >= r.4).count();
            summary.row(&[
                p.to_string(),
                kind.to_string(),
                fmt(avg(&|r| r.3)),
                fmt(avg(&|r| r.4)),
                fmt(avg(&|r| r.5)),
                wins.to_string(),
                sel.len().to_string(),
            ]);
        }
    }
    Ok(ExperimentOutput {
        files: vec![per_graph.into_file("initial_compare.csv"), summary.into_file("initial_compare_mean.csv")],
        failures: vec![],
    })
}

/// Per level: mean and 95% half-width over graphs of `r_first / r_second`
/// where both mixers get the same budget and optimizer seed.
pub(crate) fn mixer_compare(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let [first, second] = config.mixers[..] else {
        return Err(invalid("mixer-compare needs exactly two mixers (numerator, denominator)"));
    };
    let (members, mut notes) = usable(generate_family(&config.family)?);
    let cache = MixerCache::new();
    let cells: Vec<_> = members.iter().flat_map(|m| (config.p_min..=config.p_max).map(move |p| (m, p))).collect();
    let rows = cells
        .par_iter()
        .map(|&(m, p)| {
            let seed = derive_seed(config.master_seed(), &[stream::OPTIMIZE, m.id, p as u64]);
            let state = config.initial.prepare(m.instance.index())?;
            let a = best_ratio(&simulator(&cache, &m.instance, first)?, &state, p, config, seed)?;
            let b = best_ratio(&simulator(&cache, &m.instance, second)?, &state, p, config, seed)?;
            Ok((m.id, p, a, b))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut per_graph = Csv::new(config, &notes, &["graph_id", "p", "ratio_first", "ratio_second", "quotient"]);
    let mut quotients: Vec<Vec<f64>> = vec![Vec::new(); config.p_max + 1];
    for &(id, p, a, b) in &rows {
        if b <= 0.0 {
            notes.push(format!("skipped graph {id} at p={p}: denominator ratio is {b}"));
            continue;
        }
        per_graph.row(&[id.to_string(), p.to_string(), fmt(a), fmt(b), fmt(a / b)]);
        quotients[p].push(a / b);
    }
    notes.push(format!("quotient r_{first} / r_{second}"));
    let mut summary = Csv::new(config, &notes, &["p", "mean_ratio", "ci_halfwidth", "n_graphs"]);
    for (p, q) in quotients.iter().enumerate().skip(config.p_min) {
        let mean = q.iter().sum::<f64>() / q.len().max(1) as f64;
        summary.row(&[p.to_string(), fmt(mean), fmt(ci_halfwidth(q)), q.len().to_string()]);
    }
    Ok(ExperimentOutput {
        files: vec![summary.into_file("mixer_compare.csv"), per_graph.into_file("mixer_compare_graphs.csv")],
        failures: vec![],
    })
}

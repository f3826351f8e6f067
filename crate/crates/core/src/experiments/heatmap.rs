//! `F_1(γ, β)` on a uniform grid, per graph and averaged over the family.

use rayon::prelude::*;

use super::{fmt, generate_family, simulator, usable, Csv, ExperimentConfig, ExperimentOutput};
use crate::engine::AngleSchedule;
use crate::error::{QaoaError, Result};
use crate::operators::MixerCache;

/// Grid points `(γ_i, β_j) = (γ_max·i/R, β_max·j/R)` in γ-major order.
pub(crate) fn grid(config: &ExperimentConfig) -> Vec<AngleSchedule> {
    let r = config.grid_resolution;
    let d = config.domain;
    (0..r)
        .flat_map(|i| (0..r).map(move |j| (i, j)))
        .map(|(i, j)| {
            AngleSchedule::new(vec![d.gamma_max * i as f64 / r as f64], vec![d.beta_max * j as f64 / r as f64])
                .expect("grid angles are finite")
        })
        .collect()
}

pub(crate) fn run(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    if config.p_min != 1 || config.p_max != 1 {
        return Err(QaoaError::Unsupported(format!(
            "heatmaps are defined for p = 1 only, got p in [{}, {}]",
            config.p_min, config.p_max
        )));
    }
    let (members, notes) = usable(generate_family(&config.family)?);
    let points = grid(config);
    let cache = MixerCache::new();
    let mut files = Vec::new();
    for &kind in &config.mixers {
        let per_graph = members
            .par_iter()
            .map(|m| {
                let sim = simulator(&cache, &m.instance, kind)?;
                let state = config.initial.prepare(m.instance.index())?;
                sim.evaluate_batch(&state, &points)
            })
            .collect::<Result<Vec<_>>>()?;

        let mut notes = notes.clone();
        notes.push(format!("mixer {kind}, {} graphs averaged", members.len()));
        let mut mean = Csv::new(config, &notes, &["gamma", "beta", "value"]);
        for (idx, s) in points.iter().enumerate() {
            let avg = per_graph.iter().map(|v| v[idx]).sum::<f64>() / per_graph.len().max(1) as f64;
            mean.row(&[fmt(s.gammas()[0]), fmt(s.betas()[0]), fmt(avg)]);
        }
        files.push(mean.into_file(&format!("heatmap_{kind}_mean.csv")));

        let mut graphs = Csv::new(config, &notes, &["graph_id", "gamma", "beta", "value"]);
        for (m, values) in members.iter().zip(&per_graph) {
            for (s, v) in points.iter().zip(values) {
                graphs.row(&[m.id.to_string(), fmt(s.gammas()[0]), fmt(s.betas()[0]), fmt(*v)]);
            }
        }
        files.push(graphs.into_file(&format!("heatmap_{kind}_graphs.csv")));
    }
    Ok(ExperimentOutput { files, failures: vec![] })
}

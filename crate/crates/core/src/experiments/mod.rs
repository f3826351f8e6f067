//! Config-driven experiment runners. Each experiment returns its output
//! files in memory; every file starts with a provenance header (code
//! version, config hash, master seed), and all parallel work is reduced in
//! a fixed order, so the bytes depend only on the config.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::engine::{InitialState, SearchDomain, Simulator};
use crate::error::{invalid, QaoaError, Result};
use crate::instances::{gen_random_graph, ProblemInstance};
use crate::operators::{MixerCache, MixerKind};
use crate::optimize::{OptimizerSettings, StrategyKind};
use crate::rng::{derive_seed, stream};

mod compare;
mod decay;
mod heatmap;
mod patterns;
pub mod verify;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Gen,
    Heatmap,
    InitialCompare,
    MixerCompare,
    StdDecay,
    AnglePatterns,
    StrategyCompare,
    Verify,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Gen,
        ExperimentKind::Heatmap,
        ExperimentKind::InitialCompare,
        ExperimentKind::MixerCompare,
        ExperimentKind::StdDecay,
        ExperimentKind::AnglePatterns,
        ExperimentKind::StrategyCompare,
        ExperimentKind::Verify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Gen => "gen",
            ExperimentKind::Heatmap => "heatmap",
            ExperimentKind::InitialCompare => "initial-compare",
            ExperimentKind::MixerCompare => "mixer-compare",
            ExperimentKind::StdDecay => "std-decay",
            ExperimentKind::AnglePatterns => "angle-patterns",
            ExperimentKind::StrategyCompare => "strategy-compare",
            ExperimentKind::Verify => "verify",
        }
    }
}

/// Seeded Erdős–Rényi family. Graph `i` has `n_min + i mod (n_max − n_min + 1)`
/// vertices and its own derived seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub p_edge: f64,
    pub count: usize,
    /// Master seed of the whole experiment.
    pub seed: u64,
    /// Subset size; `floor(n/2)` when absent.
    pub k: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub family: FamilyConfig,
    pub mixers: Vec<MixerKind>,
    pub initial: InitialState,
    pub p_min: usize,
    pub p_max: usize,
    pub domain: SearchDomain,
    /// Evaluations per optimization run and level.
    pub budget: usize,
    pub hops: usize,
    pub grid_resolution: usize,
    /// Monte Carlo draws per repetition and level.
    pub samples: usize,
    pub repetitions: usize,
    /// Largest number of draws spent on one samples-to-beat search.
    pub beat_cap: usize,
    pub strategies: Vec<StrategyKind>,
    pub reference_multiplier: usize,
    pub reference_hops: usize,
    pub optimizer: OptimizerSettings,
    /// Random cases per check in the invariant suite.
    pub verify_cases: usize,
}

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let mut c = ExperimentConfig {
            kind,
            family: FamilyConfig { n_min: 7, n_max: 10, p_edge: 0.5, count: 100, seed: 2024, k: None },
            mixers: vec![MixerKind::Complete, MixerKind::Ring],
            initial: InitialState::Dicke,
            p_min: 1,
            p_max: 5,
            domain: SearchDomain::default(),
            budget: 200,
            hops: 4,
            grid_resolution: 64,
            samples: 1000,
            repetitions: 100,
            beat_cap: 1_000_000,
            strategies: vec![StrategyKind::MonteCarlo, StrategyKind::BasinHopping, StrategyKind::Interpolation],
            reference_multiplier: 20,
            reference_hops: 10,
            optimizer: OptimizerSettings::default(),
            verify_cases: 20,
        };
        match kind {
            ExperimentKind::Gen | ExperimentKind::Verify => {}
            ExperimentKind::Heatmap => {
                c.family.n_min = 10;
                c.family.n_max = 10;
                c.p_max = 1;
            }
            ExperimentKind::InitialCompare => {
                c.family.n_min = 7;
                c.family.n_max = 7;
                c.family.count = 20;
                c.p_max = 3;
                // The Dicke landscape is rugged; classical starts at p = 1
                // are one-dimensional in β. Smaller budgets under-optimize
                // the Dicke start and bias the comparison.
                c.budget = 5000;
                c.hops = 40;
            }
            ExperimentKind::MixerCompare => {
                c.family.n_min = 7;
                c.family.n_max = 7;
            }
            ExperimentKind::StdDecay => {
                c.family.n_min = 10;
                c.family.n_max = 10;
                c.family.count = 1;
                c.mixers = vec![MixerKind::Complete];
            }
            ExperimentKind::AnglePatterns => {
                c.family.n_min = 8;
                c.family.n_max = 8;
                c.family.count = 50;
                c.p_min = 5;
                c.p_max = 6;
                c.mixers = vec![MixerKind::Complete];
            }
            ExperimentKind::StrategyCompare => {
                c.family.count = 50;
                c.budget = 100;
                c.mixers = vec![MixerKind::Complete];
            }
        }
        c
    }

    /// Defaults for `kind`, overlaid with the (possibly partial) JSON object
    /// `overrides`, then with `seed` when given.
    pub fn resolve(kind: ExperimentKind, overrides: Option<&Value>, seed: Option<u64>) -> Result<Self> {
        let mut merged = serde_json::to_value(Self::defaults(kind))?;
        if let Some(o) = overrides {
            if !o.is_object() {
                return Err(invalid("config must be a JSON object"));
            }
            if let Some(k) = o.get("kind") {
                if k != &Value::String(kind.name().to_string()) {
                    return Err(invalid(format!("config kind {k} does not match subcommand {}", kind.name())));
                }
            }
            merge(&mut merged, o);
        }
        let mut config: Self = serde_json::from_value(merged)?;
        if let Some(s) = seed {
            config.family.seed = s;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(kind: ExperimentKind, path: Option<&Path>, seed: Option<u64>) -> Result<Self> {
        let overrides = match path {
            Some(p) => Some(serde_json::from_str::<Value>(&std::fs::read_to_string(p)?)?),
            None => None,
        };
        Self::resolve(kind, overrides.as_ref(), seed)
    }

    pub fn validate(&self) -> Result<()> {
        let f = &self.family;
        if f.count == 0 {
            return Err(invalid("family.count must be at least 1"));
        }
        if f.n_min < 2 || f.n_min > f.n_max {
            return Err(invalid(format!("family n range [{}, {}] is empty or below 2", f.n_min, f.n_max)));
        }
        if !(0.0..=1.0).contains(&f.p_edge) {
            return Err(invalid("family.p_edge must lie in [0, 1]"));
        }
        if let Some(k) = f.k {
            if k == 0 || k > f.n_min {
                return Err(invalid(format!("k = {k} is invalid for n >= {}", f.n_min)));
            }
        }
        if self.mixers.is_empty() {
            return Err(invalid("at least one mixer is required"));
        }
        if self.p_min == 0 || self.p_min > self.p_max {
            return Err(invalid(format!("p range [{}, {}] is invalid", self.p_min, self.p_max)));
        }
        self.domain.validate()?;
        let positive = [
            ("budget", self.budget),
            ("hops", self.hops),
            ("samples", self.samples),
            ("repetitions", self.repetitions),
            ("beat_cap", self.beat_cap),
            ("reference_multiplier", self.reference_multiplier),
            ("reference_hops", self.reference_hops),
            ("verify_cases", self.verify_cases),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(invalid(format!("{name} must be at least 1")));
        }
        if self.grid_resolution < 2 {
            return Err(invalid("grid_resolution must be at least 2"));
        }
        if self.strategies.is_empty() || self.strategies.contains(&StrategyKind::Reference) {
            return Err(invalid("strategies must be non-empty and must not include the reference"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_json().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn master_seed(&self) -> u64 {
        self.family.seed
    }
}

fn merge(base: &mut Value, over: &Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (key, v) in o {
                match b.get_mut(key) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(key.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

/// One generated graph of the family.
#[derive(Clone, Debug)]
pub struct FamilyMember {
    pub id: u64,
    pub seed: u64,
    pub instance: ProblemInstance,
}

pub fn generate_family(family: &FamilyConfig) -> Result<Vec<FamilyMember>> {
    let span = family.n_max - family.n_min + 1;
    (0..family.count)
        .map(|i| {
            let n = family.n_min + i % span;
            let seed = derive_seed(family.seed, &[stream::GRAPH, i as u64]);
            let graph = gen_random_graph(n, family.p_edge, seed)?;
            let instance = match family.k {
                Some(k) => ProblemInstance::new(graph, k)?,
                None => ProblemInstance::with_half_k(graph)?,
            };
            Ok(FamilyMember { id: i as u64, seed, instance })
        })
        .collect()
}

/// A file produced by an experiment, relative to the output directory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExperimentOutput {
    pub files: Vec<OutputFile>,
    /// Failed checks; only the invariant suite reports any.
    pub failures: Vec<String>,
}

impl ExperimentOutput {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|f| f.name == name).map(|f| f.contents.as_str())
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for f in &self.files {
            std::fs::write(dir.join(&f.name), &f.contents)?;
        }
        Ok(())
    }
}

/// CSV text with a `#` provenance header.
pub(crate) struct Csv {
    text: String,
}

impl Csv {
    pub(crate) fn new(config: &ExperimentConfig, notes: &[String], columns: &[&str]) -> Self {
        let mut text = String::new();
        for line in provenance_lines(config) {
            writeln!(text, "# {line}").unwrap();
        }
        for note in notes {
            writeln!(text, "# {note}").unwrap();
        }
        writeln!(text, "{}", columns.join(",")).unwrap();
        Self { text }
    }

    pub(crate) fn row(&mut self, fields: &[String]) {
        writeln!(self.text, "{}", fields.join(",")).unwrap();
    }

    pub(crate) fn into_file(self, name: &str) -> OutputFile {
        OutputFile { name: name.to_string(), contents: self.text }
    }
}

fn provenance_lines(config: &ExperimentConfig) -> Vec<String> {
    vec![
        format!("maxk-qaoa {CODE_VERSION}"),
        format!("experiment {}", config.kind.name()),
        format!("config-sha256 {}", config.hash()),
        format!("master-seed {}", config.master_seed()),
    ]
}

pub(crate) fn provenance_json(config: &ExperimentConfig) -> Value {
    serde_json::json!({
        "provenance": {
            "version": CODE_VERSION,
            "experiment": config.kind.name(),
            "config_sha256": config.hash(),
            "master_seed": config.master_seed(),
        }
    })
}

/// Fixed-precision float formatting for CSV cells.
pub(crate) fn fmt(x: f64) -> String {
    let s = format!("{x:.12}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// Instances with a positive optimum, plus a note for each skipped one.
pub(crate) fn usable(members: Vec<FamilyMember>) -> (Vec<FamilyMember>, Vec<String>) {
    let mut notes = Vec::new();
    let kept = members
        .into_iter()
        .filter(|m| {
            let ok = m.instance.max_value() > 0;
            if !ok {
                notes.push(format!("skipped graph {}: no edges, approximation ratio undefined", m.id));
            }
            ok
        })
        .collect();
    (kept, notes)
}

pub(crate) fn simulator(cache: &MixerCache, instance: &ProblemInstance, kind: MixerKind) -> Result<Simulator> {
    Simulator::new(instance, cache.get(instance.index(), kind)?)
}

/// Runs the experiment named in `config` on the current rayon pool.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let mut out = match config.kind {
        ExperimentKind::Gen => gen(config)?,
        ExperimentKind::Heatmap => heatmap::run(config)?,
        ExperimentKind::InitialCompare => compare::initial_compare(config)?,
        ExperimentKind::MixerCompare => compare::mixer_compare(config)?,
        ExperimentKind::StdDecay => decay::run(config)?,
        ExperimentKind::AnglePatterns => patterns::angle_patterns(config)?,
        ExperimentKind::StrategyCompare => patterns::strategy_compare(config)?,
        ExperimentKind::Verify => verify::run(config)?,
    };
    let mut resolved = provenance_json(config);
    resolved["config"] = serde_json::to_value(config)?;
    out.files.push(OutputFile {
        name: format!("{}.config.json", config.kind.name()),
        contents: serde_json::to_string_pretty(&resolved)? + "\n",
    });
    Ok(out)
}

/// Runs on a dedicated pool with `threads` workers (0 = rayon default).
pub fn run_with_threads(config: &ExperimentConfig, threads: usize) -> Result<ExperimentOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| QaoaError::InvalidArgument(format!("cannot build thread pool: {e}")))?;
    pool.install(|| run_experiment(config))
}

fn gen(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let members = generate_family(&config.family)?;
    let mut text = serde_json::to_string(&provenance_json(config))? + "\n";
    let lines: Vec<String> = members
        .par_iter()
        .map(|m| {
            serde_json::json!({
                "graph_id": m.id,
                "seed": m.seed,
                "n": m.instance.n(),
                "k": m.instance.k(),
                "p_edge": config.family.p_edge,
                "max_value": m.instance.max_value(),
                "graph": m.instance.graph(),
            })
            .to_string()
        })
        .collect();
    for line in lines {
        text.push_str(&line);
        text.push('\n');
    }
    Ok(ExperimentOutput { files: vec![OutputFile { name: "instances.jsonl".into(), contents: text }], failures: vec![] })
}

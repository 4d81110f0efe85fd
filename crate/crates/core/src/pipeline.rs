//! End-to-end orchestration behind the command-line tool: run configuration,
//! artifact layout, and the generate / identify / labels / learn /
//! fragility / report stages.
//!
//! Every random stream derives from the top-level `seed` through
//! [`crate::rng::stream`], indexed by signal, record or run number, so each
//! stage is a pure function of its configuration and inputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::ensemble;
use crate::error::{Error, Result};
use crate::features::{extract, FEATURE_DIM, FEATURE_NAMES, IDX_L, IDX_PGA};
use crate::fragility::{
    bin_by_projection, curve, curves_table, fit_logistic, hybrid_probability,
    labeled_only_diagnostic, FragilityCurve, LogisticCalibration, Projection,
};
use crate::ground_motion::{
    synthesize, synthesize_corrected, GroundMotionParams, Signal, THETA_DIM,
};
use crate::identification::{
    identify, parameters_table, read_parameters_csv, IdentificationConfig, TargetRecord,
};
use crate::io::{read_signal, write_signal, FlatReport, SignalFormat, Table};
use crate::kde::{kristan_bandwidth, theta_is_valid, KdeModel, ParameterEnsemble};
use crate::learning::{
    active_learn, log_schedule, prbp, simple_classifier_prbp, train_svm, ActiveConfig,
    ActiveState, IterationRecord, Kernel, LookupOracle, Pool, SvmModel,
};
use crate::oscillator::{solve_linear, summarize, Label, Preset, StructureConfig};
use crate::preprocess::{filter_pool, FeatureSet, KeepRange, PreprocessModel};
use crate::rng::{stream, tags};
use crate::stats::{mean, median};

/// Smallest pool the learning stages accept.
pub const MIN_POOL_SIZE: usize = 500;

/// Stream tag for the synthetic records handed to identification.
const PSEUDO_SIGNAL: &str = "pseudo-record-signal";

pub struct KeySpec {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

/// Every configuration key with its default. The command-line tool exposes
/// each one as a flag of the same name.
pub const KEYS: &[KeySpec] = &[
    KeySpec { name: "seed", default: "0", help: "top-level seed for every random stream" },
    KeySpec { name: "poolSize", default: "5000", help: "number of simulated signals" },
    KeySpec { name: "structure", default: "5", help: "structure preset in Hz: 2.5, 5 or 10" },
    KeySpec { name: "kernel", default: "linear", help: "SVM kernel: linear or rbf" },
    KeySpec { name: "gamma", default: "", help: "RBF width; empty means 1/d" },
    KeySpec { name: "cost", default: "10", help: "soft-margin cost C" },
    KeySpec { name: "tolerance", default: "0.001", help: "SMO KKT tolerance" },
    KeySpec { name: "featureSet", default: "r4", help: "classifier inputs: r13 or r4" },
    KeySpec { name: "budget", default: "1000", help: "labels acquired per learning run" },
    KeySpec { name: "runs", default: "20", help: "learning runs (pairs of starting points)" },
    KeySpec { name: "bins", default: "20", help: "k-means bins per fragility curve" },
    KeySpec {
        name: "fragilityN",
        default: "20,50,100,200,500,1000",
        help: "labeled-set sizes evaluated by the fragility stage",
    },
    KeySpec { name: "outDir", default: "out", help: "artifact directory" },
    KeySpec { name: "dt", default: "0.01", help: "signal time step in seconds" },
    KeySpec { name: "signalFormat", default: "bin", help: "stored signals: bin, csv or none" },
    KeySpec { name: "batchSize", default: "250", help: "signals per generation checkpoint" },
    KeySpec { name: "ensemble", default: "", help: "parameter CSV for the KDE; empty means the shipped pseudo-records" },
    KeySpec { name: "records", default: "", help: "directory of records to identify; empty means synthetic pseudo-records" },
    KeySpec { name: "recordCount", default: "97", help: "pseudo-records synthesized for identification" },
    KeySpec { name: "simReplicates", default: "20", help: "simulations per damping candidate" },
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub pool_size: usize,
    pub structure: Preset,
    pub kernel: String,
    pub gamma: Option<f64>,
    pub cost: f64,
    pub tolerance: f64,
    pub feature_set: FeatureSet,
    pub budget: usize,
    pub runs: usize,
    pub bins: usize,
    pub fragility_n: Vec<usize>,
    pub out_dir: PathBuf,
    pub dt: f64,
    pub signal_format: Option<SignalFormat>,
    pub batch_size: usize,
    pub ensemble: Option<PathBuf>,
    pub records: Option<PathBuf>,
    pub record_count: usize,
    pub sim_replicates: usize,
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse `{value}`: {e}")))
}

fn optional_path(value: &str) -> Option<PathBuf> {
    let v = value.trim();
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut cfg = RunConfig {
            seed: 0,
            pool_size: 0,
            structure: Preset::Hz5,
            kernel: String::new(),
            gamma: None,
            cost: 0.0,
            tolerance: 0.0,
            feature_set: FeatureSet::R4,
            budget: 0,
            runs: 0,
            bins: 0,
            fragility_n: Vec::new(),
            out_dir: PathBuf::new(),
            dt: 0.0,
            signal_format: None,
            batch_size: 0,
            ensemble: None,
            records: None,
            record_count: 0,
            sim_replicates: 0,
        };
        for k in KEYS {
            cfg.set(k.name, k.default).expect("defaults parse");
        }
        cfg
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "seed" => self.seed = parse_num(key, v)?,
            "poolSize" => self.pool_size = parse_num(key, v)?,
            "structure" => self.structure = Preset::parse(v)?,
            "kernel" => match v {
                "linear" | "rbf" => self.kernel = v.to_string(),
                _ => return Err(Error::Config(format!("unknown kernel `{v}` (linear|rbf)"))),
            },
            "gamma" => self.gamma = if v.is_empty() { None } else { Some(parse_num(key, v)?) },
            "cost" => self.cost = parse_num(key, v)?,
            "tolerance" => self.tolerance = parse_num(key, v)?,
            "featureSet" => self.feature_set = FeatureSet::parse(v)?,
            "budget" => self.budget = parse_num(key, v)?,
            "runs" => self.runs = parse_num(key, v)?,
            "bins" => self.bins = parse_num(key, v)?,
            "fragilityN" => {
                self.fragility_n = v
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse_num(key, s))
                    .collect::<Result<_>>()?
            }
            "outDir" => self.out_dir = PathBuf::from(v),
            "dt" => self.dt = parse_num(key, v)?,
            "signalFormat" => {
                self.signal_format = match v {
                    "bin" => Some(SignalFormat::Binary),
                    "csv" => Some(SignalFormat::Csv),
                    "none" => None,
                    _ => {
                        return Err(Error::Config(format!(
                            "unknown signal format `{v}` (bin|csv|none)"
                        )))
                    }
                }
            }
            "batchSize" => self.batch_size = parse_num(key, v)?,
            "ensemble" => self.ensemble = optional_path(v),
            "records" => self.records = optional_path(v),
            "recordCount" => self.record_count = parse_num(key, v)?,
            "simReplicates" => self.sim_replicates = parse_num(key, v)?,
            _ => return Err(Error::Config(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        Some(match key {
            "seed" => self.seed.to_string(),
            "poolSize" => self.pool_size.to_string(),
            "structure" => self.structure.name().to_string(),
            "kernel" => self.kernel.clone(),
            "gamma" => self.gamma.map(|g| g.to_string()).unwrap_or_default(),
            "cost" => self.cost.to_string(),
            "tolerance" => self.tolerance.to_string(),
            "featureSet" => self.feature_set.name().to_string(),
            "budget" => self.budget.to_string(),
            "runs" => self.runs.to_string(),
            "bins" => self.bins.to_string(),
            "fragilityN" => self
                .fragility_n
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(","),
            "outDir" => self.out_dir.display().to_string(),
            "dt" => self.dt.to_string(),
            "signalFormat" => match self.signal_format {
                Some(SignalFormat::Binary) => "bin".into(),
                Some(SignalFormat::Csv) => "csv".into(),
                None => "none".into(),
            },
            "batchSize" => self.batch_size.to_string(),
            "ensemble" => path(&self.ensemble),
            "records" => path(&self.records),
            "recordCount" => self.record_count.to_string(),
            "simReplicates" => self.sim_replicates.to_string(),
            _ => return None,
        })
    }

    /// Defaults overlaid with the `key=value` lines of `text`.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let l = line.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let (k, v) = l
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
            cfg.set(k.trim(), v)?;
        }
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        KEYS.iter()
            .map(|k| format!("{}={}\n", k.name, self.get(k.name).expect("known key")))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.pool_size == 0 {
            return bad("poolSize must be positive".into());
        }
        if !(self.dt > 0.0) {
            return bad("dt must be > 0".into());
        }
        if self.batch_size == 0 {
            return bad("batchSize must be positive".into());
        }
        if !(self.cost > 0.0) || !(self.tolerance > 0.0) {
            return bad("cost and tolerance must be > 0".into());
        }
        if matches!(self.gamma, Some(g) if !(g > 0.0)) {
            return bad("gamma must be > 0".into());
        }
        if self.budget < 2 {
            return bad("budget must be at least 2".into());
        }
        if self.runs == 0 || self.bins == 0 {
            return bad("runs and bins must be positive".into());
        }
        Ok(())
    }

    /// Extra checks for the stages that learn from the pool.
    pub fn validate_learning(&self, kept: usize) -> Result<()> {
        self.validate()?;
        if self.pool_size < MIN_POOL_SIZE {
            return Err(Error::Config(format!(
                "poolSize {} is below the minimum {MIN_POOL_SIZE} for learning",
                self.pool_size
            )));
        }
        if self.budget > kept {
            return Err(Error::Config(format!(
                "budget {} exceeds the kept pool size {kept}",
                self.budget
            )));
        }
        Ok(())
    }

    pub fn structure_config(&self) -> StructureConfig {
        StructureConfig::preset(self.structure)
    }

    pub fn kernel_for(&self, dim: usize) -> Result<Kernel> {
        Kernel::parse(&self.kernel, self.gamma, dim)
    }

    /// `"<kernel>-<featureSet>"`, naming the learning artifacts.
    pub fn learner_tag(&self) -> String {
        format!("{}-{}", self.kernel, self.feature_set.name())
    }

    pub fn layout(&self) -> Layout {
        Layout {
            root: self.out_dir.clone(),
        }
    }

    /// Labeled-set sizes at which learning keeps a model.
    pub fn snapshot_sizes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .fragility_n
            .iter()
            .copied()
            .chain(std::iter::once(self.budget))
            .filter(|&n| (2..=self.budget).contains(&n))
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Labeled-set sizes summarized across runs.
    pub fn summary_schedule(&self) -> Vec<usize> {
        let mut v = log_schedule(10.min(self.budget), self.budget, 10);
        v.extend(self.snapshot_sizes());
        v.retain(|&n| n >= 2);
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// File locations under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn features(&self) -> PathBuf {
        self.root.join("features.csv")
    }
    pub fn kde(&self) -> PathBuf {
        self.root.join("kde.txt")
    }
    pub fn signals_dir(&self) -> PathBuf {
        self.root.join("signals")
    }
    pub fn signal(&self, id: usize, format: SignalFormat) -> PathBuf {
        self.signals_dir().join(format!("s{id:06}.{}", format.extension()))
    }
    pub fn checkpoints_dir(&self) -> PathBuf {
        self.root.join("checkpoints")
    }
    pub fn checkpoint(&self, batch: usize) -> PathBuf {
        self.checkpoints_dir().join(format!("batch{batch:05}.csv"))
    }
    pub fn labels(&self) -> PathBuf {
        self.root.join("labels.csv")
    }
    pub fn preprocess(&self) -> PathBuf {
        self.root.join("preprocess.csv")
    }
    pub fn learn_dir(&self, tag: &str) -> PathBuf {
        self.root.join("learn").join(tag)
    }
    pub fn run_dir(&self, tag: &str, run: usize) -> PathBuf {
        self.learn_dir(tag).join(format!("run{run:02}"))
    }
    pub fn history(&self, tag: &str, run: usize) -> PathBuf {
        self.run_dir(tag, run).join("history.csv")
    }
    pub fn model(&self, tag: &str, run: usize, n: usize) -> PathBuf {
        self.run_dir(tag, run).join(format!("model_n{n}.csv"))
    }
    pub fn learn_summary(&self, tag: &str) -> PathBuf {
        self.learn_dir(tag).join("summary.csv")
    }
    pub fn baselines(&self) -> PathBuf {
        self.root.join("learn").join("baselines.txt")
    }
    pub fn fragility_dir(&self, tag: &str) -> PathBuf {
        self.root.join("fragility").join(tag)
    }
    pub fn curve(&self, tag: &str, run: usize, n: usize) -> PathBuf {
        self.fragility_dir(tag).join("curves").join(format!("run{run:02}_n{n}.csv"))
    }
    pub fn fragility_report(&self, tag: &str) -> PathBuf {
        self.fragility_dir(tag).join("report.txt")
    }
    pub fn identify_dir(&self) -> PathBuf {
        self.root.join("identify")
    }
    pub fn identified(&self) -> PathBuf {
        self.identify_dir().join("identified.csv")
    }
    pub fn report(&self) -> PathBuf {
        self.root.join("report.txt")
    }
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(p) = path.parent() {
        fs::create_dir_all(p)?;
    }
    Ok(())
}

/// Writes through a temporary file so a crash never leaves a partial file
/// under the final name.
fn write_atomic(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    create_parent(path)?;
    let tmp = path.with_extension("partial");
    write(&tmp)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

// ---------------------------------------------------------------- generate

pub fn load_ensemble(cfg: &RunConfig) -> Result<Vec<GroundMotionParams>> {
    match &cfg.ensemble {
        Some(p) => Ok(read_parameters_csv(p)?.into_iter().map(|(_, g)| g).collect()),
        None => ensemble::shipped(),
    }
}

pub fn build_kde(cfg: &RunConfig) -> Result<KdeModel> {
    kristan_bandwidth(&ParameterEnsemble::from_params(&load_ensemble(cfg)?)?)
}

/// Parameters of simulated signal `id`.
pub fn draw_parameters(kde: &KdeModel, seed: u64, id: usize) -> Result<GroundMotionParams> {
    let (theta, _) = kde.sample_accepted(&mut stream(seed, tags::KDE_DRAW, id as u64), theta_is_valid)?;
    GroundMotionParams::from_theta(&theta)
}

/// High-pass corrected signal `id` for the given parameters.
pub fn simulate_signal(params: &GroundMotionParams, cfg: &RunConfig, id: usize) -> Result<Signal> {
    synthesize_corrected(params, cfg.dt, &mut stream(cfg.seed, tags::WHITE_NOISE, id as u64))
}

pub fn simulate(kde: &KdeModel, cfg: &RunConfig, id: usize) -> Result<(Signal, [f64; FEATURE_DIM])> {
    let params = draw_parameters(kde, cfg.seed, id)?;
    let signal = simulate_signal(&params, cfg, id)?;
    let lin = solve_linear(&signal, &cfg.structure_config())?.peak();
    let x = extract(&signal, &params.theta(), lin).to_array();
    Ok((signal, x))
}

fn feature_header() -> Vec<String> {
    std::iter::once("id".to_string())
        .chain(FEATURE_NAMES.iter().map(|s| s.to_string()))
        .collect()
}

fn feature_row(id: usize, x: &[f64; FEATURE_DIM]) -> Vec<String> {
    std::iter::once(id.to_string())
        .chain(x.iter().map(|v| v.to_string()))
        .collect()
}

/// Keys whose change invalidates generation checkpoints.
const GENERATION_KEYS: [&str; 7] =
    ["seed", "poolSize", "structure", "dt", "signalFormat", "batchSize", "ensemble"];

fn generation_stamp(cfg: &RunConfig) -> String {
    GENERATION_KEYS
        .iter()
        .map(|k| format!("{k}={}\n", cfg.get(k).expect("known key")))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateSummary {
    pub batches_total: usize,
    pub batches_run: usize,
    pub complete: bool,
}

/// Simulates the pool in checkpointed batches. Completed batches are
/// skipped; `max_batches` stops after that many new batches.
pub fn generate(cfg: &RunConfig, max_batches: Option<usize>) -> Result<GenerateSummary> {
    cfg.validate()?;
    let layout = cfg.layout();
    fs::create_dir_all(layout.checkpoints_dir())?;
    let stamp_path = layout.checkpoints_dir().join("config.txt");
    let stamp = generation_stamp(cfg);
    match fs::read_to_string(&stamp_path) {
        Ok(old) if old != stamp => {
            return Err(Error::Config(format!(
                "checkpoints in {} come from a different configuration; remove them first",
                layout.checkpoints_dir().display()
            )))
        }
        Ok(_) => {}
        Err(_) => fs::write(&stamp_path, &stamp)?,
    }
    let kde = build_kde(cfg)?;
    kde.write(&layout.kde())?;
    if cfg.signal_format.is_some() {
        fs::create_dir_all(layout.signals_dir())?;
    }
    let batches = cfg.pool_size.div_ceil(cfg.batch_size);
    let mut ran = 0;
    for b in 0..batches {
        let path = layout.checkpoint(b);
        if path.exists() {
            continue;
        }
        if max_batches.is_some_and(|m| ran >= m) {
            return Ok(GenerateSummary {
                batches_total: batches,
                batches_run: ran,
                complete: false,
            });
        }
        let ids: Vec<usize> = (b * cfg.batch_size..((b + 1) * cfg.batch_size).min(cfg.pool_size)).collect();
        let rows: Vec<[f64; FEATURE_DIM]> = ids
            .par_iter()
            .map(|&id| {
                let (signal, x) = simulate(&kde, cfg, id)?;
                if let Some(format) = cfg.signal_format {
                    write_signal(&layout.signal(id, format), &signal, format)?;
                }
                Ok(x)
            })
            .collect::<Result<_>>()?;
        let mut t = Table::new(feature_header());
        for (id, x) in ids.iter().zip(&rows) {
            t.push(feature_row(*id, x));
        }
        write_atomic(&path, |p| t.write(p))?;
        ran += 1;
    }
    let mut all = Table::new(feature_header());
    for b in 0..batches {
        all.rows.extend(Table::read(&layout.checkpoint(b))?.rows);
    }
    write_atomic(&layout.features(), |p| all.write(p))?;
    Ok(GenerateSummary {
        batches_total: batches,
        batches_run: ran,
        complete: true,
    })
}

pub fn cmd_generate(cfg: &RunConfig) -> Result<GenerateSummary> {
    generate(cfg, None)
}

fn parse_feature_rows(t: &Table) -> Result<Vec<(usize, [f64; FEATURE_DIM])>> {
    let ids = t.column_usize("id")?;
    let cols: Vec<Vec<f64>> = FEATURE_NAMES.iter().map(|n| t.column_f64(n)).collect::<Result<_>>()?;
    Ok(ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| {
            let mut x = [0.0; FEATURE_DIM];
            for (j, c) in cols.iter().enumerate() {
                x[j] = c[i];
            }
            (id, x)
        })
        .collect())
}

pub fn read_features(path: &Path) -> Result<Vec<(usize, [f64; FEATURE_DIM])>> {
    parse_feature_rows(&Table::read(path)?)
}

// ---------------------------------------------------------------- identify

#[derive(Debug, Clone)]
pub struct IdentifiedRecord {
    pub id: String,
    pub params: GroundMotionParams,
    /// Generating parameters, for synthetic pseudo-records.
    pub source: Option<GroundMotionParams>,
}

/// The first `recordCount` pseudo-records, synthesized without correction on
/// their default duration.
pub fn pseudo_records(cfg: &RunConfig) -> Result<Vec<(String, GroundMotionParams, Signal)>> {
    let params = ensemble::shipped()?;
    params
        .into_iter()
        .take(cfg.record_count)
        .enumerate()
        .map(|(i, p)| {
            let s = synthesize(&p, p.default_duration(), cfg.dt, &mut stream(cfg.seed, PSEUDO_SIGNAL, i as u64))?;
            Ok((ensemble::record_id(i), p, s))
        })
        .collect()
}

fn identification_config(cfg: &RunConfig) -> IdentificationConfig {
    IdentificationConfig {
        sim_replicates: cfg.sim_replicates,
        seed: cfg.seed,
        ..Default::default()
    }
}

pub fn cmd_identify(cfg: &RunConfig) -> Result<Vec<IdentifiedRecord>> {
    cfg.validate()?;
    let icfg = identification_config(cfg);
    icfg.validate()?;
    let layout = cfg.layout();
    fs::create_dir_all(layout.identify_dir())?;
    let inputs: Vec<(String, Option<GroundMotionParams>, Signal)> = match &cfg.records {
        Some(dir) => {
            let mut files: Vec<PathBuf> = fs::read_dir(dir)?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            files.retain(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("csv" | "bin")));
            files.sort();
            if files.is_empty() {
                return Err(Error::Config(format!("no .csv or .bin records in {}", dir.display())));
            }
            files
                .iter()
                .map(|p| {
                    let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or("record").to_string();
                    Ok((id, None, read_signal(p)?))
                })
                .collect::<Result<_>>()?
        }
        None => {
            let recs = pseudo_records(cfg)?;
            if let Some(format) = cfg.signal_format {
                let dir = layout.identify_dir().join("records");
                fs::create_dir_all(&dir)?;
                for (id, _, s) in &recs {
                    write_signal(&dir.join(format!("{id}.{}", format.extension())), s, format)?;
                }
            }
            recs.into_iter().map(|(id, p, s)| (id, Some(p), s)).collect()
        }
    };
    let out: Vec<IdentifiedRecord> = inputs
        .into_par_iter()
        .map(|(id, source, signal)| {
            let fit = identify(&TargetRecord::from_signal(signal), &icfg)?;
            Ok(IdentifiedRecord {
                id,
                params: fit.params,
                source,
            })
        })
        .collect::<Result<_>>()?;
    let rows: Vec<(String, GroundMotionParams)> = out.iter().map(|r| (r.id.clone(), r.params)).collect();
    write_atomic(&layout.identified(), |p| parameters_table(&rows).write(p))?;
    let sources: Vec<(String, GroundMotionParams)> = out
        .iter()
        .filter_map(|r| r.source.map(|s| (r.id.clone(), s)))
        .collect();
    if !sources.is_empty() {
        parameters_table(&sources).write(&layout.identify_dir().join("source.csv"))?;
    }
    Ok(out)
}

// ------------------------------------------------------------------ labels

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelRow {
    pub id: usize,
    pub pga: f64,
    pub pgv: f64,
    pub pgd: f64,
    pub energy: f64,
    pub lin_disp: f64,
    pub max_nonlinear: f64,
    pub label: Label,
}

pub const LABEL_COLUMNS: [&str; 8] = ["id", "PGA", "V", "D", "E", "L", "Z", "label"];

/// Stored signal `id`, or its deterministic re-simulation when signals were
/// not kept.
pub fn load_signal(cfg: &RunConfig, id: usize, x: &[f64; FEATURE_DIM]) -> Result<Signal> {
    if let Some(format) = cfg.signal_format {
        let p = cfg.layout().signal(id, format);
        if p.exists() {
            return read_signal(&p);
        }
    }
    let params = GroundMotionParams::from_theta(&x[..THETA_DIM])?;
    simulate_signal(&params, cfg, id)
}

/// Runs the elastoplastic oracle over the kept pool.
pub fn cmd_labels(cfg: &RunConfig) -> Result<Vec<LabelRow>> {
    cfg.validate()?;
    let layout = cfg.layout();
    let rows = read_features(&layout.features())?;
    let structure = cfg.structure_config();
    let lin: Vec<f64> = rows.iter().map(|(_, x)| x[IDX_L]).collect();
    let kept = filter_pool(&lin, KeepRange::for_yield(structure.yield_y));
    let labels: Vec<LabelRow> = kept
        .par_iter()
        .map(|&k| {
            let (id, x) = &rows[k];
            let s = load_signal(cfg, *id, x)?;
            let sum = summarize(&s, &structure)?;
            Ok(LabelRow {
                id: *id,
                pga: x[IDX_PGA],
                pgv: x[crate::features::IDX_PGV],
                pgd: x[crate::features::IDX_PGD],
                energy: x[crate::features::IDX_ENERGY],
                lin_disp: sum.max_linear,
                max_nonlinear: sum.max_nonlinear,
                label: sum.label,
            })
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new(LABEL_COLUMNS);
    for r in &labels {
        t.push([
            r.id.to_string(),
            r.pga.to_string(),
            r.pgv.to_string(),
            r.pgd.to_string(),
            r.energy.to_string(),
            r.lin_disp.to_string(),
            r.max_nonlinear.to_string(),
            r.label.as_i8().to_string(),
        ]);
    }
    write_atomic(&layout.labels(), |p| t.write(p))?;
    Ok(labels)
}

// ------------------------------------------------------------------- learn

/// The kept pool with raw features and ground-truth labels.
#[derive(Debug, Clone)]
pub struct DeskPool {
    pub generated: usize,
    pub ids: Vec<usize>,
    pub raw: Vec<[f64; FEATURE_DIM]>,
    pub labels: Vec<Label>,
    pub max_nonlinear: Vec<f64>,
}

impl DeskPool {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.raw.iter().map(|x| x[j]).collect()
    }

    pub fn pga(&self) -> Vec<f64> {
        self.column(IDX_PGA)
    }

    pub fn lin_disp(&self) -> Vec<f64> {
        self.column(IDX_L)
    }

    pub fn kept_fraction(&self) -> f64 {
        self.len() as f64 / self.generated as f64
    }

    pub fn positive_rate(&self) -> f64 {
        self.labels.iter().filter(|l| l.is_positive()).count() as f64 / self.len() as f64
    }
}

pub fn load_desk_pool(cfg: &RunConfig) -> Result<DeskPool> {
    let layout = cfg.layout();
    let features = read_features(&layout.features())?;
    let by_id: BTreeMap<usize, [f64; FEATURE_DIM]> = features.iter().copied().collect();
    let t = Table::read(&layout.labels())?;
    let ids = t.column_usize("id")?;
    let z = t.column_f64("Z")?;
    let labels = t
        .column_f64("label")?
        .into_iter()
        .map(|v| Label::from_i8(v as i8))
        .collect::<Result<Vec<_>>>()?;
    let raw = ids
        .iter()
        .map(|id| {
            by_id
                .get(id)
                .copied()
                .ok_or_else(|| Error::invalid(format!("label row {id} has no feature row")))
        })
        .collect::<Result<_>>()?;
    Ok(DeskPool {
        generated: features.len(),
        ids,
        raw,
        labels,
        max_nonlinear: z,
    })
}

/// Classifier inputs: the fitted transform and the selected columns.
#[derive(Debug, Clone)]
pub struct PreparedPool {
    pub preprocess: PreprocessModel,
    pub feature_set: FeatureSet,
    pub x: Vec<Vec<f64>>,
}

pub fn prepare(pool: &DeskPool, structure: &StructureConfig, feature_set: FeatureSet) -> Result<PreparedPool> {
    let model = PreprocessModel::fit(&pool.raw, KeepRange::for_yield(structure.yield_y))?;
    let x = pool
        .raw
        .iter()
        .map(|r| Ok(feature_set.select(&model.apply(r)?)))
        .collect::<Result<_>>()?;
    Ok(PreparedPool {
        preprocess: model,
        feature_set,
        x,
    })
}

pub fn active_config(cfg: &RunConfig, dim: usize) -> Result<ActiveConfig> {
    Ok(ActiveConfig {
        kernel: cfg.kernel_for(dim)?,
        cost: cfg.cost,
        tolerance: cfg.tolerance,
        budget: cfg.budget,
        snapshots: cfg.snapshot_sizes(),
    })
}

/// Learning run `run`, its starting points drawn from its own stream.
pub fn learn_run(cfg: &RunConfig, pool: &DeskPool, prepared: &PreparedPool, run: usize) -> Result<ActiveState> {
    let acfg = active_config(cfg, prepared.x.first().map_or(0, Vec::len))?;
    let mut p = Pool::new(prepared.x.clone(), pool.pga(), pool.lin_disp(), LookupOracle(&pool.labels))?;
    let mut rng = stream(cfg.seed, tags::START_POINTS, run as u64);
    active_learn(&mut p, &acfg, Some(&pool.labels), &mut rng)
}

pub fn learn_runs(cfg: &RunConfig, pool: &DeskPool, prepared: &PreparedPool) -> Result<Vec<ActiveState>> {
    cfg.validate_learning(pool.len())?;
    (0..cfg.runs)
        .into_par_iter()
        .map(|r| learn_run(cfg, pool, prepared, r))
        .collect()
}

/// PRBP of the PGA and L columns used directly as scores.
pub fn baseline_prbp(pool: &DeskPool) -> Result<(f64, f64)> {
    Ok((
        simple_classifier_prbp(&pool.pga(), &pool.labels)?,
        simple_classifier_prbp(&pool.lin_disp(), &pool.labels)?,
    ))
}

pub fn history_table(state: &ActiveState, pool: &DeskPool, feature_set: FeatureSet) -> Table {
    let names: Vec<String> = feature_set
        .columns()
        .iter()
        .map(|&j| format!("w_{}", FEATURE_NAMES[j]))
        .collect();
    let mut header: Vec<String> = [
        "n",
        "queried",
        "id",
        "label",
        "queryAbsScore",
        "runnerUpAbsScore",
        "prbp",
        "bias",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let linear = state.history.iter().all(|h| h.weights.is_some());
    if linear {
        header.extend(names);
    }
    let mut t = Table::new(header);
    for h in &state.history {
        let mut row = vec![
            h.n.to_string(),
            h.queried.to_string(),
            pool.ids[h.queried].to_string(),
            h.label.as_i8().to_string(),
            h.query_abs_score.to_string(),
            h.runner_up_abs_score.to_string(),
            h.prbp.map(|p| p.to_string()).unwrap_or_default(),
            h.bias.to_string(),
        ];
        if linear {
            row.extend(h.weights.iter().flatten().map(|w| w.to_string()));
        }
        t.push(row);
    }
    t
}

/// `(queried pool position, label)` per history row.
pub fn read_history(path: &Path) -> Result<Vec<(usize, Label, Option<f64>)>> {
    let t = Table::read(path)?;
    let q = t.column_usize("queried")?;
    let j = t.column_index("prbp").ok_or_else(|| Error::format(path, "missing prbp column"))?;
    let l = t.column_f64("label")?;
    q.into_iter()
        .zip(l)
        .zip(&t.rows)
        .map(|((q, l), row)| {
            let p = if row[j].is_empty() {
                None
            } else {
                Some(row[j].parse::<f64>().map_err(|e| Error::format(path, e.to_string()))?)
            };
            Ok((q, Label::from_i8(l as i8)?, p))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrbpSummary {
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// PRBP across runs at each scheduled labeled-set size.
pub fn summarize_prbp(histories: &[Vec<Option<f64>>], schedule: &[usize]) -> Vec<PrbpSummary> {
    schedule
        .iter()
        .filter_map(|&n| {
            let vals: Vec<f64> = histories
                .iter()
                .filter_map(|h| h.get(n - 1).copied().flatten())
                .collect();
            (!vals.is_empty()).then(|| PrbpSummary {
                n,
                mean: mean(&vals),
                min: vals.iter().copied().fold(f64::INFINITY, f64::min),
                max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            })
        })
        .collect()
}

pub fn prbp_summary_table(rows: &[PrbpSummary]) -> Table {
    let mut t = Table::new(["n", "prbpMean", "prbpMin", "prbpMax"]);
    for r in rows {
        t.push([r.n.to_string(), r.mean.to_string(), r.min.to_string(), r.max.to_string()]);
    }
    t
}

fn prbp_trace(history: &[IterationRecord]) -> Vec<Option<f64>> {
    history.iter().map(|h| h.prbp).collect()
}

#[derive(Debug, Clone)]
pub struct LearnSummary {
    pub kept: usize,
    pub summary: Vec<PrbpSummary>,
    pub pga_prbp: f64,
    pub lin_prbp: f64,
}

pub fn cmd_learn(cfg: &RunConfig) -> Result<LearnSummary> {
    let layout = cfg.layout();
    let pool = load_desk_pool(cfg)?;
    cfg.validate_learning(pool.len())?;
    let prepared = prepare(&pool, &cfg.structure_config(), cfg.feature_set)?;
    prepared.preprocess.write(&layout.preprocess())?;
    let tag = cfg.learner_tag();
    let states = learn_runs(cfg, &pool, &prepared)?;
    for (r, s) in states.iter().enumerate() {
        let dir = layout.run_dir(&tag, r);
        fs::create_dir_all(&dir)?;
        write_atomic(&layout.history(&tag, r), |p| history_table(s, &pool, cfg.feature_set).write(p))?;
        for snap in &s.snapshots {
            snap.model.write(&layout.model(&tag, r, snap.n))?;
        }
    }
    let traces: Vec<Vec<Option<f64>>> = states.iter().map(|s| prbp_trace(&s.history)).collect();
    let summary = summarize_prbp(&traces, &cfg.summary_schedule());
    prbp_summary_table(&summary).write(&layout.learn_summary(&tag))?;
    let (pga_prbp, lin_prbp) = baseline_prbp(&pool)?;
    let mut b = FlatReport::default();
    b.insert("pgaPrbp", pga_prbp);
    b.insert("lPrbp", lin_prbp);
    b.insert("positiveRate", pool.positive_rate());
    b.write(&layout.baselines())?;
    Ok(LearnSummary {
        kept: pool.len(),
        summary,
        pga_prbp,
        lin_prbp,
    })
}

// --------------------------------------------------------------- fragility

pub fn pool_scores(model: &SvmModel, x: &[Vec<f64>]) -> Vec<f64> {
    x.iter().map(|xi| model.score(xi)).collect()
}

fn calibrate(scores: &[f64], labeled: &[(usize, Label)]) -> Result<LogisticCalibration> {
    let s: Vec<f64> = labeled.iter().map(|(i, _)| scores[*i]).collect();
    let l: Vec<Label> = labeled.iter().map(|(_, l)| *l).collect();
    fit_logistic(&s, &l)
}

/// Fragility diagnostics of one model at one labeled-set size.
#[derive(Debug, Clone)]
pub struct SnapshotEvaluation {
    pub run: usize,
    pub n: usize,
    pub calibration: LogisticCalibration,
    pub score: FragilityCurve,
    pub pga: FragilityCurve,
    pub lin_disp: FragilityCurve,
    /// Score-based `Δ_L2` per bin count.
    pub bin_sensitivity: Vec<(usize, f64)>,
    /// Mean bin probability of the labeled-set-only PGA curve.
    pub labeled_only_mean: f64,
    /// Linear/RBF combination, for RBF learners.
    pub hybrid: Option<FragilityCurve>,
}

pub const BIN_SENSITIVITY: [usize; 3] = [10, 20, 40];

fn distinct_count(v: &[f64]) -> usize {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s.dedup();
    s.len()
}

/// Calibrates on the labeled set only, then compares with the pool labels.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_snapshot(
    cfg: &RunConfig,
    pool: &DeskPool,
    prepared: &PreparedPool,
    kernel: Kernel,
    labeled: &[(usize, Label)],
    scores: &[f64],
    run: usize,
    n: usize,
) -> Result<SnapshotEvaluation> {
    let kidx = (run * 100_000 + n) as u64 * 8;
    let krng = |j: u64| stream(cfg.seed, tags::KMEANS, kidx + j);
    let calibration = calibrate(scores, labeled)?;
    let p: Vec<f64> = scores.iter().map(|&s| calibration.probability(s)).collect();
    let k = cfg.bins.min(distinct_count(scores));
    let score = curve(Projection::Score, &pool.labels, &p, scores, k, &mut krng(0))?;
    let pga_v = pool.pga();
    let pga = curve(Projection::Pga, &pool.labels, &p, &pga_v, cfg.bins, &mut krng(1))?;
    let lin_disp = curve(Projection::LinDisp, &pool.labels, &p, &pool.lin_disp(), cfg.bins, &mut krng(2))?;
    let bin_sensitivity = BIN_SENSITIVITY
        .iter()
        .enumerate()
        .map(|(j, &kk)| {
            let c = curve(
                Projection::Score,
                &pool.labels,
                &p,
                scores,
                kk.min(distinct_count(scores)),
                &mut krng(3 + j as u64),
            )?;
            Ok((kk, c.delta_l2))
        })
        .collect::<Result<_>>()?;
    let lab_pga: Vec<f64> = labeled.iter().map(|(i, _)| pga_v[*i]).collect();
    let lab_l: Vec<Label> = labeled.iter().map(|(_, l)| *l).collect();
    let diag = labeled_only_diagnostic(&lab_pga, &lab_l, cfg.bins.min(distinct_count(&lab_pga)), &mut krng(6))?;
    let hybrid = match kernel {
        Kernel::Linear => None,
        Kernel::Rbf { .. } => {
            let xs: Vec<Vec<f64>> = labeled.iter().map(|(i, _)| prepared.x[*i].clone()).collect();
            let lin = train_svm(&xs, &lab_l, Kernel::Linear, cfg.cost)?.model;
            let lin_scores = pool_scores(&lin, &prepared.x);
            let lin_cal = calibrate(&lin_scores, labeled)?;
            let ph: Vec<f64> = lin_scores
                .iter()
                .zip(&p)
                .map(|(&s, &pr)| hybrid_probability(lin_cal.probability(s), pr))
                .collect();
            // same groups as the score curve, so only the estimate differs
            Some(curve(Projection::Hybrid, &pool.labels, &ph, scores, k, &mut krng(0))?)
        }
    };
    Ok(SnapshotEvaluation {
        run,
        n,
        calibration,
        score,
        pga,
        lin_disp,
        bin_sensitivity,
        labeled_only_mean: diag.mean_probability(),
        hybrid,
    })
}

pub const LABELED_ONLY_WARNING: &str = "labeled-set-only PGA curves ignore how active learning chose the labeled set and misstate the failure probability; use the pool-wide curves";

fn stats_into(report: &mut FlatReport, key: &str, vals: &[f64]) {
    report.insert(format!("{key}.mean"), mean(vals));
    report.insert(format!("{key}.median"), median(vals));
    report.insert(format!("{key}.min"), vals.iter().copied().fold(f64::INFINITY, f64::min));
    report.insert(format!("{key}.max"), vals.iter().copied().fold(f64::NEG_INFINITY, f64::max));
}

/// Flat report over runs: per projection and labeled-set size, plus per-run
/// values.
pub fn fragility_report(evals: &[SnapshotEvaluation], sizes: &[usize]) -> FlatReport {
    let mut r = FlatReport::default();
    r.insert("labeledOnly.warning", LABELED_ONLY_WARNING);
    for &n in sizes {
        let at: Vec<&SnapshotEvaluation> = evals.iter().filter(|e| e.n == n).collect();
        if at.is_empty() {
            continue;
        }
        let mut curves: Vec<(&str, Vec<&FragilityCurve>)> = vec![
            ("score", at.iter().map(|e| &e.score).collect()),
            ("pga", at.iter().map(|e| &e.pga).collect()),
            ("linDisp", at.iter().map(|e| &e.lin_disp).collect()),
        ];
        let hyb: Vec<&FragilityCurve> = at.iter().filter_map(|e| e.hybrid.as_ref()).collect();
        if !hyb.is_empty() {
            curves.push(("hybrid", hyb));
        }
        for (name, cs) in &curves {
            let base = format!("n{n}.{name}");
            stats_into(&mut r, &format!("{base}.deltaL2"), &cs.iter().map(|c| c.delta_l2).collect::<Vec<_>>());
            stats_into(&mut r, &format!("{base}.entropy"), &cs.iter().map(|c| c.entropy).collect::<Vec<_>>());
            stats_into(
                &mut r,
                &format!("{base}.uncertainFraction"),
                &cs.iter().map(|c| c.uncertain_fraction).collect::<Vec<_>>(),
            );
        }
        for (j, &k) in BIN_SENSITIVITY.iter().enumerate() {
            let v: Vec<f64> = at.iter().map(|e| e.bin_sensitivity[j].1).collect();
            stats_into(&mut r, &format!("n{n}.score.deltaL2.K{k}"), &v);
        }
        let lo: Vec<f64> = at.iter().map(|e| e.labeled_only_mean).collect();
        stats_into(&mut r, &format!("n{n}.labeledOnly.meanProbability"), &lo);
    }
    for e in evals {
        let base = format!("run{:02}.n{}", e.run, e.n);
        r.insert(format!("{base}.slope"), e.calibration.slope);
        r.insert(format!("{base}.intercept"), e.calibration.intercept);
        r.insert(format!("{base}.slopeCapped"), e.calibration.capped);
        for c in [Some(&e.score), Some(&e.pga), Some(&e.lin_disp), e.hybrid.as_ref()].into_iter().flatten() {
            let p = c.projection.name();
            r.insert(format!("{base}.{p}.deltaL2"), c.delta_l2);
            r.insert(format!("{base}.{p}.entropy"), c.entropy);
            r.insert(format!("{base}.{p}.uncertainFraction"), c.uncertain_fraction);
        }
        r.insert(format!("{base}.labeledOnly.meanProbability"), e.labeled_only_mean);
    }
    r
}

/// Evaluates the stored models of every run at every size in `fragilityN`.
pub fn cmd_fragility(cfg: &RunConfig) -> Result<Vec<SnapshotEvaluation>> {
    let layout = cfg.layout();
    let pool = load_desk_pool(cfg)?;
    cfg.validate_learning(pool.len())?;
    let prepared = prepare(&pool, &cfg.structure_config(), cfg.feature_set)?;
    let tag = cfg.learner_tag();
    let kernel = cfg.kernel_for(prepared.x[0].len())?;
    let sizes: Vec<usize> = cfg
        .snapshot_sizes()
        .into_iter()
        .filter(|n| cfg.fragility_n.contains(n))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..cfg.runs).flat_map(|r| sizes.iter().map(move |&n| (r, n))).collect();
    let evals: Vec<SnapshotEvaluation> = jobs
        .par_iter()
        .map(|&(r, n)| {
            let hist = read_history(&layout.history(&tag, r))?;
            let labeled: Vec<(usize, Label)> = hist.iter().take(n).map(|(q, l, _)| (*q, *l)).collect();
            let model = SvmModel::read(&layout.model(&tag, r, n))?;
            let scores = pool_scores(&model, &prepared.x);
            evaluate_snapshot(cfg, &pool, &prepared, kernel, &labeled, &scores, r, n)
        })
        .collect::<Result<_>>()?;
    for e in &evals {
        let curves: Vec<&FragilityCurve> = [Some(&e.score), Some(&e.pga), Some(&e.lin_disp), e.hybrid.as_ref()]
            .into_iter()
            .flatten()
            .collect();
        let path = layout.curve(&tag, e.run, e.n);
        create_parent(&path)?;
        curves_table(&curves).write(&path)?;
    }
    fragility_report(&evals, &sizes).write(&layout.fragility_report(&tag))?;
    Ok(evals)
}

// ------------------------------------------------------------------ report

/// Gathers the pool statistics and every learning and fragility summary
/// found under the output directory into one flat report.
pub fn cmd_report(cfg: &RunConfig) -> Result<FlatReport> {
    let layout = cfg.layout();
    let mut r = FlatReport::default();
    for k in KEYS {
        r.insert(format!("config.{}", k.name), cfg.get(k.name).expect("known key"));
    }
    if layout.labels().exists() {
        let pool = load_desk_pool(cfg)?;
        r.insert("pool.generated", pool.generated);
        r.insert("pool.kept", pool.len());
        r.insert("pool.keptFraction", pool.kept_fraction());
        r.insert("pool.positiveRate", pool.positive_rate());
        let (pga, lin) = baseline_prbp(&pool)?;
        r.insert("baseline.pgaPrbp", pga);
        r.insert("baseline.lPrbp", lin);
    }
    if layout.preprocess().exists() {
        let m = PreprocessModel::read(&layout.preprocess())?;
        for (j, name) in FEATURE_NAMES.iter().enumerate() {
            r.insert(format!("preprocess.delta.{name}"), m.deltas[j]);
        }
    }
    for sub in ["learn", "fragility"] {
        let dir = layout.root.join(sub);
        let Ok(entries) = fs::read_dir(&dir) else { continue };
        let mut tags: Vec<String> = entries
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .filter_map(|e| e.file_name().to_str().map(str::to_string))
            .collect();
        tags.sort();
        for tag in tags {
            if sub == "learn" {
                let p = layout.learn_summary(&tag);
                if p.exists() {
                    let t = Table::read(&p)?;
                    for row in &t.rows {
                        r.insert(format!("learn.{tag}.n{}.prbpMean", row[0]), &row[1]);
                        r.insert(format!("learn.{tag}.n{}.prbpMin", row[0]), &row[2]);
                        r.insert(format!("learn.{tag}.n{}.prbpMax", row[0]), &row[3]);
                    }
                }
            } else {
                let p = layout.fragility_report(&tag);
                if p.exists() {
                    for (k, v) in FlatReport::read(&p)?.entries {
                        if !k.starts_with("run") {
                            r.insert(format!("fragility.{tag}.{k}"), v);
                        }
                    }
                }
            }
        }
    }
    r.write(&layout.report())?;
    Ok(r)
}

/// PRBP of a model on the pool.
pub fn model_prbp(model: &SvmModel, prepared: &PreparedPool, pool: &DeskPool) -> Result<f64> {
    prbp(&pool_scores(model, &prepared.x), &pool.labels)
}

/// Bin centers of the k-means groups of `values`.
pub fn bin_centers(values: &[f64], k: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(bin_by_projection(values, k, 10, &mut stream(seed, tags::KMEANS, 0))?.centers)
}

//! Desk pools shared by the tests of one binary: generated once per
//! structure, labeled, loaded into memory and their files dropped.

#![allow(dead_code)]

use std::sync::OnceLock;

use seisfrag::learning::ActiveState;
use seisfrag::pipeline::{
    cmd_labels, evaluate_snapshot, generate, learn_runs, load_desk_pool, prepare, DeskPool,
    PreparedPool, RunConfig, SnapshotEvaluation,
};

pub struct Desk {
    pub cfg: RunConfig,
    pub pool: DeskPool,
    pub prepared: PreparedPool,
}

fn build(structure: &str) -> Desk {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut cfg = RunConfig::default();
    cfg.set("structure", structure).unwrap();
    cfg.set("signalFormat", "none").unwrap();
    cfg.set("outDir", dir.path().to_str().unwrap()).unwrap();
    generate(&cfg, None).unwrap();
    cmd_labels(&cfg).unwrap();
    let pool = load_desk_pool(&cfg).unwrap();
    let prepared = prepare(&pool, &cfg.structure_config(), cfg.feature_set).unwrap();
    Desk { cfg, pool, prepared }
}

pub fn desk(structure: &str) -> &'static Desk {
    static HZ2_5: OnceLock<Desk> = OnceLock::new();
    static HZ5: OnceLock<Desk> = OnceLock::new();
    static HZ10: OnceLock<Desk> = OnceLock::new();
    let cell = match structure {
        "2.5" => &HZ2_5,
        "5" => &HZ5,
        "10" => &HZ10,
        other => panic!("no preset {other}"),
    };
    cell.get_or_init(|| build(structure))
}

pub struct Experiment {
    pub cfg: RunConfig,
    pub states: Vec<ActiveState>,
    /// Evaluations at n = 20 and n = 1000, per run.
    pub early: Vec<SnapshotEvaluation>,
    pub late: Vec<SnapshotEvaluation>,
}

fn experiment(kernel: &str) -> Experiment {
    let d = desk("5");
    let mut cfg = d.cfg.clone();
    cfg.set("kernel", kernel).unwrap();
    let states = learn_runs(&cfg, &d.pool, &d.prepared).unwrap();
    let k = cfg.kernel_for(d.prepared.x[0].len()).unwrap();
    let eval = |n: usize| -> Vec<SnapshotEvaluation> {
        states
            .iter()
            .enumerate()
            .map(|(r, s)| {
                let snap = s.snapshot(n).expect("snapshot");
                evaluate_snapshot(&cfg, &d.pool, &d.prepared, k, &s.labeled[..n], &snap.pool_scores, r, n)
                    .unwrap()
            })
            .collect()
    };
    let (early, late) = (eval(20), eval(1000));
    Experiment {
        cfg,
        states,
        early,
        late,
    }
}

/// Twenty linear-kernel runs on the 5 Hz pool in the reduced feature set.
pub fn linear() -> &'static Experiment {
    static CELL: OnceLock<Experiment> = OnceLock::new();
    CELL.get_or_init(|| experiment("linear"))
}

pub fn rbf() -> &'static Experiment {
    static CELL: OnceLock<Experiment> = OnceLock::new();
    CELL.get_or_init(|| experiment("rbf"))
}

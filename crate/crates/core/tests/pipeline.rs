use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use seisfrag::io::{FlatReport, Table};
use seisfrag::pipeline::{
    cmd_fragility, cmd_labels, cmd_learn, cmd_report, generate, read_features, read_history,
    summarize_prbp, RunConfig,
};

fn config(dir: &Path, extra: &[(&str, &str)]) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.set("outDir", dir.to_str().unwrap()).unwrap();
    for (k, v) in extra {
        cfg.set(k, v).unwrap();
    }
    cfg
}

const SMALL: &[(&str, &str)] = &[
    ("poolSize", "600"),
    ("budget", "60"),
    ("fragilityN", "20,50"),
    ("signalFormat", "none"),
    ("batchSize", "200"),
];

fn run_all(cfg: &RunConfig) {
    generate(cfg, None).unwrap();
    cmd_labels(cfg).unwrap();
    cmd_learn(cfg).unwrap();
    cmd_fragility(cfg).unwrap();
    cmd_report(cfg).unwrap();
}

/// Every file under `root`, keyed by relative path. The report echoes the
/// output directory, which differs between the compared runs.
fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let mut bytes = fs::read(&p).unwrap();
                if p.file_name().unwrap() == "report.txt" {
                    let text = String::from_utf8(bytes).unwrap();
                    bytes = text
                        .lines()
                        .filter(|l| !l.starts_with("config.outDir"))
                        .collect::<Vec<_>>()
                        .join("\n")
                        .into_bytes();
                }
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), bytes);
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

#[test]
fn tiny_pool_writes_one_file_per_signal() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &[("poolSize", "10"), ("signalFormat", "bin")]);
    generate(&cfg, None).unwrap();
    assert_eq!(fs::read_dir(cfg.layout().signals_dir()).unwrap().count(), 10);
    assert_eq!(read_features(&cfg.layout().features()).unwrap().len(), 10);
    // fine for generation, too small to learn from
    assert!(cmd_learn(&cfg).is_err());
}

#[test]
fn resumed_generation_equals_an_uninterrupted_one() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let extra = [("poolSize", "45"), ("batchSize", "10"), ("signalFormat", "csv")];
    let (ca, cb) = (config(a.path(), &extra), config(b.path(), &extra));
    generate(&ca, None).unwrap();
    let first = generate(&cb, Some(2)).unwrap();
    assert!(!first.complete && first.batches_run == 2);
    assert!(!cb.layout().features().exists());
    let rest = generate(&cb, None).unwrap();
    assert!(rest.complete);
    assert_eq!(rest.batches_run, rest.batches_total - 2);
    assert_eq!(snapshot(a.path()), snapshot(b.path()));
}

#[test]
fn changed_configuration_refuses_old_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    generate(&config(dir.path(), &[("poolSize", "12")]), Some(1)).unwrap();
    assert!(generate(&config(dir.path(), &[("poolSize", "12"), ("seed", "1")]), None).is_err());
}

#[test]
fn full_pipeline_is_bit_identical_across_reruns() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_all(&config(a.path(), SMALL));
    run_all(&config(b.path(), SMALL));
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    assert_eq!(sa.keys().collect::<Vec<_>>(), sb.keys().collect::<Vec<_>>());
    for (k, v) in &sa {
        assert!(v == &sb[k], "{k} differs");
    }
    // rerunning in place changes nothing either
    let cfg = config(a.path(), SMALL);
    run_all(&cfg);
    assert_eq!(snapshot(a.path()), sa);
}

#[test]
fn learning_artifacts_are_complete_and_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    generate(&cfg, None).unwrap();
    let labels = cmd_labels(&cfg).unwrap();
    let features = read_features(&cfg.layout().features()).unwrap();
    let y = cfg.structure_config().yield_y;
    let kept = features.iter().filter(|(_, x)| (y..=6.0 * y).contains(&x[12])).count();
    assert_eq!(labels.len(), kept);
    assert_eq!(Table::read(&cfg.layout().labels()).unwrap().rows.len(), kept);

    let summary = cmd_learn(&cfg).unwrap();
    let tag = cfg.learner_tag();
    let histories: Vec<Vec<Option<f64>>> = (0..20)
        .map(|r| read_history(&cfg.layout().history(&tag, r)).unwrap().into_iter().map(|h| h.2).collect())
        .collect();
    assert!(!cfg.layout().history(&tag, 20).exists());
    let schedule = cfg.summary_schedule();
    assert_eq!(summary.summary, summarize_prbp(&histories, &schedule));
    let written = Table::read(&cfg.layout().learn_summary(&tag)).unwrap();
    let ns: Vec<usize> = written.column_usize("n").unwrap();
    assert_eq!(ns, schedule);
    assert!(ns.contains(&10) && ns.contains(&60));

    cmd_fragility(&cfg).unwrap();
    let report = FlatReport::read(&cfg.layout().fragility_report(&tag)).unwrap();
    for proj in ["score", "pga", "linDisp"] {
        assert!(report.get(&format!("n50.{proj}.deltaL2.mean")).is_some(), "{proj}");
    }
    assert!(report.get("n50.hybrid.deltaL2.mean").is_none());
    assert!(report.get("labeledOnly.warning").is_some());
    assert!(cfg.layout().curve(&tag, 19, 50).exists());
}

#[test]
fn rbf_fragility_reports_the_hybrid() {
    let dir = tempfile::tempdir().unwrap();
    let mut extra = SMALL.to_vec();
    extra.push(("kernel", "rbf"));
    let cfg = config(dir.path(), &extra);
    generate(&cfg, None).unwrap();
    cmd_labels(&cfg).unwrap();
    cmd_learn(&cfg).unwrap();
    cmd_fragility(&cfg).unwrap();
    let report = FlatReport::read(&cfg.layout().fragility_report(&cfg.learner_tag())).unwrap();
    assert!(report.get("n50.hybrid.deltaL2.mean").is_some());
    let r = cmd_report(&cfg).unwrap();
    assert!(r.get(&format!("fragility.{}.n50.hybrid.deltaL2.mean", cfg.learner_tag())).is_some());
}


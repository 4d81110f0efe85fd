use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};
use seisfrag::pipeline::{
    cmd_fragility, cmd_generate, cmd_identify, cmd_labels, cmd_learn, cmd_report, RunConfig, KEYS,
};

const SUBCOMMANDS: [(&str, &str); 6] = [
    ("generate", "sample motions from the KDE, simulate the pool and extract features"),
    ("identify", "identify ground-motion parameters of records"),
    ("labels", "label the kept pool with the elastoplastic oracle"),
    ("learn", "run the active learners and write histories and models"),
    ("fragility", "calibrate stored models and build fragility curves"),
    ("report", "collect every summary into one flat report"),
];

fn cli() -> Command {
    let mut cmd = Command::new("seisfrag")
        .about("Fragility curves from active learning on simulated ground motions")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .value_parser(clap::value_parser!(PathBuf))
                .global(true)
                .help("key=value file; flags override its entries"),
        );
    for k in KEYS {
        let help = if k.default.is_empty() {
            k.help.to_string()
        } else {
            format!("{} [default: {}]", k.help, k.default)
        };
        cmd = cmd.arg(
            Arg::new(k.name)
                .long(k.name)
                .value_name("VALUE")
                .action(ArgAction::Set)
                .allow_hyphen_values(true)
                .global(true)
                .help(help),
        );
    }
    for (name, about) in SUBCOMMANDS {
        cmd = cmd.subcommand(Command::new(name).about(about));
    }
    cmd
}

/// Defaults, then the config file, then flags.
fn config(m: &ArgMatches) -> seisfrag::Result<RunConfig> {
    let mut cfg = match m.get_one::<PathBuf>("config") {
        Some(p) => RunConfig::read(p)?,
        None => RunConfig::default(),
    };
    for k in KEYS {
        if let Some(v) = m.get_one::<String>(k.name) {
            cfg.set(k.name, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(name: &str, cfg: &RunConfig) -> seisfrag::Result<()> {
    let layout = cfg.layout();
    match name {
        "generate" => {
            let s = cmd_generate(cfg)?;
            println!(
                "generated {} signals in {} batches ({} new) -> {}",
                cfg.pool_size,
                s.batches_total,
                s.batches_run,
                layout.features().display()
            );
        }
        "identify" => {
            let out = cmd_identify(cfg)?;
            println!("identified {} records -> {}", out.len(), layout.identified().display());
        }
        "labels" => {
            let rows = cmd_labels(cfg)?;
            let pos = rows.iter().filter(|r| r.label.is_positive()).count();
            println!(
                "kept {} signals, {} labeled +1 -> {}",
                rows.len(),
                pos,
                layout.labels().display()
            );
        }
        "learn" => {
            let s = cmd_learn(cfg)?;
            println!("kept pool {}; baselines PRBP pga {:.4} L {:.4}", s.kept, s.pga_prbp, s.lin_prbp);
            println!("n\tmean\tmin\tmax");
            for r in &s.summary {
                println!("{}\t{:.4}\t{:.4}\t{:.4}", r.n, r.mean, r.min, r.max);
            }
        }
        "fragility" => {
            let evals = cmd_fragility(cfg)?;
            let tag = cfg.learner_tag();
            println!("evaluated {} snapshots -> {}", evals.len(), layout.fragility_report(&tag).display());
            let mut sizes: Vec<usize> = evals.iter().map(|e| e.n).collect();
            sizes.sort_unstable();
            sizes.dedup();
            println!("n\tscore\tpga\tlinDisp\t(mean deltaL2)");
            for n in sizes {
                let at: Vec<_> = evals.iter().filter(|e| e.n == n).collect();
                let avg = |f: &dyn Fn(&seisfrag::pipeline::SnapshotEvaluation) -> f64| {
                    at.iter().map(|e| f(e)).sum::<f64>() / at.len() as f64
                };
                println!(
                    "{n}\t{:.4}\t{:.4}\t{:.4}",
                    avg(&|e| e.score.delta_l2),
                    avg(&|e| e.pga.delta_l2),
                    avg(&|e| e.lin_disp.delta_l2)
                );
            }
        }
        "report" => {
            let r = cmd_report(cfg)?;
            println!("{} entries -> {}", r.entries.len(), layout.report().display());
        }
        other => unreachable!("unknown subcommand {other}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let m = cli().get_matches();
    let (name, sub) = m.subcommand().expect("subcommand required");
    let result = config(sub).and_then(|cfg| run(name, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

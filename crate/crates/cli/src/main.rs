use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use perclab::env::sample_environment_covering;
use perclab::harness::{report, run, Experiment, ExperimentConfig};
use perclab::pmf::build_pmf;
use perclab::renewal::{mean_xi, DelaySpec, Renewal};
use perclab::rng::derive_stream;
use perclab::scales::ScaleTable;

#[derive(Parser)]
#[command(name = "perclab", version, about = "Percolation in a stretched renewal environment")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON ExperimentConfig
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// worker threads (default: all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect the configured inter-arrival law
    Dist {
        #[command(subcommand)]
        cmd: DistCmd,
    },
    Renewal {
        #[command(subcommand)]
        cmd: RenewalCmd,
    },
    Scales {
        #[command(subcommand)]
        cmd: ScalesCmd,
    },
    Env {
        #[command(subcommand)]
        cmd: EnvCmd,
    },
    /// Decoupling gap on the lifted chain
    Decouple,
    Perc {
        #[command(subcommand)]
        cmd: PercCmd,
    },
    Proof {
        #[command(subcommand)]
        cmd: ProofCmd,
    },
    /// Summarize every record under --out
    Report,
}

#[derive(Subcommand)]
enum DistCmd {
    Show {
        #[arg(long, default_value_t = 20)]
        atoms: usize,
    },
}

#[derive(Subcommand)]
enum RenewalCmd {
    Stationarity,
    Coupling,
    C1,
}

#[derive(Subcommand)]
enum ScalesCmd {
    Table {
        #[arg(long, default_value_t = 4)]
        kmax: usize,
    },
    Verify,
}

#[derive(Subcommand)]
enum EnvCmd {
    /// Write a stationary environment covering `len` columns
    Sample {
        #[arg(long, default_value_t = 1000)]
        len: u64,
    },
    Label,
    Pk,
}

#[derive(Subcommand)]
enum PercCmd {
    Qk,
    Theta {
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
    },
    Sweep,
    Audit,
}

#[derive(Subcommand)]
enum ProofCmd {
    Constants,
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn base_config(g: &Global, tag: &str) -> Result<ExperimentConfig, String> {
    let mut cfg = match &g.config {
        Some(p) => ExperimentConfig::load(p).map_err(|e| e.to_string())?,
        None => ExperimentConfig::with_experiment(Experiment::default_for(tag).expect("known tag")),
    };
    if cfg.experiment.tag() != tag {
        cfg.experiment = Experiment::default_for(tag).expect("known tag");
    }
    if let Some(s) = g.seed {
        cfg.master_seed = s;
    }
    if let Some(t) = g.trials {
        cfg.trials = t;
    }
    if let Some(o) = &g.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

fn execute(g: &Global, tag: &str, tweak: impl FnOnce(&mut Experiment)) -> ExitCode {
    let mut cfg = match base_config(g, tag) {
        Ok(c) => c,
        Err(e) => return fail(2, e),
    };
    tweak(&mut cfg.experiment);
    match run(&cfg) {
        Ok(rec) => {
            println!("{}", serde_json::to_string_pretty(&rec).expect("record serializes"));
            match rec.violations {
                Some(v) if v > 0 => fail(3, format!("{v} containment violations")),
                _ => ExitCode::SUCCESS,
            }
        }
        Err(e) => fail(2, e),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let g = &cli.global;
    if let Some(w) = g.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            return fail(2, e);
        }
    }
    match &cli.command {
        Command::Dist { cmd: DistCmd::Show { atoms } } => {
            let cfg = match base_config(g, "stationarity") {
                Ok(c) => c,
                Err(e) => return fail(2, e),
            };
            let pmf = match build_pmf(&cfg.distribution) {
                Ok(p) => p,
                Err(e) => return fail(2, e),
            };
            match mean_xi(&pmf) {
                Ok(m) => println!("mean {m:.12}"),
                Err(e) => println!("mean: {e}"),
            }
            println!("k,mass");
            for k in pmf.atoms(*atoms) {
                println!("{k},{:.6e}", pmf.mass(k));
            }
            ExitCode::SUCCESS
        }
        Command::Renewal { cmd } => execute(
            g,
            match cmd {
                RenewalCmd::Stationarity => "stationarity",
                RenewalCmd::Coupling => "coupling",
                RenewalCmd::C1 => "c1",
            },
            |_| {},
        ),
        Command::Scales { cmd: ScalesCmd::Table { kmax } } => {
            let cfg = match base_config(g, "scales") {
                Ok(c) => c,
                Err(e) => return fail(2, e),
            };
            let table = cfg.multiscale.a().and_then(|a| ScaleTable::new(a, *kmax));
            match table {
                Ok(t) => {
                    println!("k,floor_A^(k+1),L_k,r_k");
                    for k in 0..=*kmax {
                        println!("{k},{},{},{}", t.floors[k], t.l[k], t.r[k]);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(2, e),
            }
        }
        Command::Scales { cmd: ScalesCmd::Verify } => execute(g, "scales", |_| {}),
        Command::Env { cmd: EnvCmd::Sample { len } } => {
            let cfg = match base_config(g, "labels") {
                Ok(c) => c,
                Err(e) => return fail(2, e),
            };
            let res = build_pmf(&cfg.distribution).and_then(|pmf| {
                let ren = Renewal::new(pmf);
                let mut s = derive_stream(cfg.master_seed, "env", 0);
                let env = sample_environment_covering(&ren, *len, DelaySpec::Stationary, &mut s)?;
                std::fs::create_dir_all(&cfg.output_dir)?;
                let path = cfg.output_dir.join("environment.txt");
                env.write_gaps(&path)?;
                Ok(path)
            });
            match res {
                Ok(p) => {
                    println!("{}", p.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(2, e),
            }
        }
        Command::Env { cmd: EnvCmd::Label } => execute(g, "labels", |_| {}),
        Command::Env { cmd: EnvCmd::Pk } => execute(g, "pk", |_| {}),
        Command::Decouple => execute(g, "decouple", |_| {}),
        Command::Perc { cmd } => match cmd {
            PercCmd::Qk => execute(g, "qk", |_| {}),
            PercCmd::Theta { p: pp, n: nn } => execute(g, "theta", |e| {
                if let Experiment::Theta { p, n } = e {
                    if let Some(v) = pp {
                        *p = *v;
                    }
                    if let Some(v) = nn {
                        *n = *v;
                    }
                }
            }),
            PercCmd::Sweep => execute(g, "sweep", |_| {}),
            PercCmd::Audit => execute(g, "audits", |_| {}),
        },
        Command::Proof { cmd: ProofCmd::Constants } => execute(g, "proof_constants", |_| {}),
        Command::Report => {
            let dir = g.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            match report(&dir) {
                Ok((text, bad)) => {
                    print!("{text}");
                    if bad {
                        fail(3, "audit violations present")
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => fail(2, e),
            }
        }
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use treevasion::bench::{
    build_eval_set, emit_artifacts, load_mnist_subtask, mnist_paths, run_robustness, NamedModel,
    RobustnessConfig, SolverKind,
};
use treevasion::boost::{train_with_summary, BoostConfig, Dataset};
use treevasion::ensemble::{load_model, save_model, ModelFormat};
use treevasion::evade::{coordinate_descent_evade, DescentConfig};
use treevasion::exact::{solve, SolveConfig};
use treevasion::milp::{build_program, export_lp, write_lp};
use treevasion::satgen::{load_dimacs, random_3sat, reduce_to_ensemble, to_dimacs};
use treevasion::{DistanceSpec, Metric, TreeEnsemble, DEFAULT_EPSILON};

const THREADS_ENV: &str = "TREEVASION_THREADS";

#[derive(Parser)]
#[command(name = "treevasion", version, about = "Evasion attacks on tree ensembles")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Model file; repeat for several models in `bench`.
    #[arg(long, global = true)]
    model: Vec<PathBuf>,
    /// Model file format: json or xgboost.
    #[arg(long, global = true, default_value = "json")]
    model_format: ModelFormat,
    /// Directory holding the MNIST IDX files.
    #[arg(long, global = true, env = "MNIST_DIR")]
    data: Option<PathBuf>,
    /// Distance metric (L0, L1, L2, Linf); repeat for several in `bench`.
    #[arg(long, global = true)]
    metric: Vec<Metric>,
    #[arg(long, global = true, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Per-instance solver time limit in seconds.
    #[arg(long, global = true, default_value_t = 60.0)]
    time_limit: f64,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a boosted ensemble on an MNIST digit pair.
    Train(TrainArgs),
    /// Train with adversarial boosting.
    Harden {
        #[command(flatten)]
        train: TrainArgs,
        /// L0 budget of the adversarial instances.
        #[arg(long, default_value_t = 28)]
        budget: usize,
    },
    /// Evade a single instance.
    Evade {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, default_value = "exact")]
        solver: SolverKind,
    },
    /// Robustness sweep over an evaluation set.
    Bench {
        #[arg(long, default_value = "2,6")]
        digits: String,
        /// Number of evaluation instances.
        #[arg(long, default_value_t = 100)]
        size: usize,
        #[arg(long, default_value = "exact")]
        solver: SolverKind,
        /// Write zero wall times so reruns give identical files.
        #[arg(long)]
        deterministic: bool,
        /// Skip the coordinate-descent warm start of the exact solver.
        #[arg(long)]
        no_warm_start: bool,
    },
    /// Generate a random 3-SAT formula (or read one) and its tree ensemble.
    Satgen {
        #[arg(long, default_value_t = 20)]
        vars: usize,
        #[arg(long, default_value_t = 40)]
        clauses: usize,
        /// Reduce this DIMACS file instead of generating a formula.
        #[arg(long)]
        cnf: Option<PathBuf>,
    },
    /// Write the evasion program of one instance in CPLEX LP format.
    ExportLp {
        #[command(flatten)]
        instance: InstanceArgs,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// Positive and negative digit.
    #[arg(long, default_value = "2,6")]
    digits: String,
    #[arg(long, default_value_t = 200)]
    rounds: usize,
    #[arg(long, default_value_t = 4)]
    depth: usize,
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    /// Train on this many randomly chosen rows.
    #[arg(long)]
    subsample: Option<usize>,
    #[arg(long, default_value_t = 1)]
    min_leaf: usize,
    /// L2 penalty on leaf values.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Minimum hessian sum of a child node.
    #[arg(long, default_value_t = 1.0)]
    min_child_weight: f64,
    /// Bound on each leaf's Newton step before shrinkage; 0 disables it.
    #[arg(long, default_value_t = 0.0)]
    max_delta_step: f64,
}

#[derive(Args)]
struct InstanceArgs {
    /// Row of the test set of the digit pair.
    #[arg(long, conflicts_with = "x")]
    instance: Option<usize>,
    /// Comma-separated feature values.
    #[arg(long)]
    x: Option<String>,
    #[arg(long, default_value = "2,6")]
    digits: String,
}

fn parse_digits(s: &str) -> Result<(u8, u8)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok((a.parse()?, b.parse()?)),
        _ => bail!("expected two digits like `2,6`, got {s:?}"),
    }
}

fn parse_values(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad value {v:?}")))
        .collect()
}

impl Global {
    fn data_dir(&self) -> Result<&Path> {
        self.data
            .as_deref()
            .context("no MNIST directory; pass --data or set MNIST_DIR")
    }

    fn mnist(&self, digits: &str, train: bool) -> Result<Dataset> {
        let (pos, neg) = parse_digits(digits)?;
        let [tr, te] = mnist_paths(self.data_dir()?);
        let (img, lab) = if train { tr } else { te };
        Ok(load_mnist_subtask(img, lab, pos, neg)?)
    }

    fn models(&self) -> Result<Vec<NamedModel>> {
        if self.model.is_empty() {
            bail!("no model given; pass --model");
        }
        self.model
            .iter()
            .map(|p| {
                let m = load_model(p, self.model_format)
                    .with_context(|| format!("loading {}", p.display()))?;
                let name = p
                    .file_stem()
                    .map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned());
                Ok(NamedModel::new(name, m))
            })
            .collect()
    }

    fn single_model(&self) -> Result<TreeEnsemble> {
        let mut models = self.models()?;
        if models.len() != 1 {
            bail!("expected exactly one --model");
        }
        Ok(models.remove(0).model)
    }

    fn metrics(&self) -> Vec<Metric> {
        if self.metric.is_empty() {
            vec![Metric::L0]
        } else {
            self.metric.clone()
        }
    }

    fn instance(&self, args: &InstanceArgs) -> Result<Vec<f64>> {
        match (&args.x, args.instance) {
            (Some(x), _) => parse_values(x),
            (None, Some(i)) => {
                let test = self.mnist(&args.digits, false)?;
                if i >= test.len() {
                    bail!("instance {i} out of range ({} test rows)", test.len());
                }
                Ok(test.row(i).to_vec())
            }
            (None, None) => bail!("pass --instance or --x"),
        }
    }
}

fn train(g: &Global, args: &TrainArgs, adversarial: Option<usize>) -> Result<()> {
    let mut data = g.mnist(&args.digits, true)?;
    if let Some(n) = args.subsample {
        data = data.subsample(n, &mut ChaCha8Rng::seed_from_u64(g.seed));
    }
    let cfg = BoostConfig {
        rounds: args.rounds,
        max_depth: args.depth,
        learning_rate: args.eta,
        adversarial: adversarial.is_some(),
        budget: adversarial.unwrap_or(28),
        min_leaf_count: args.min_leaf,
        lambda: args.lambda,
        min_child_weight: args.min_child_weight,
        max_delta_step: args.max_delta_step,
        epsilon: g.epsilon,
        ..Default::default()
    };
    let (model, summary) = train_with_summary(&data, &cfg)?;
    let test = g.mnist(&args.digits, false)?;
    println!(
        "trained {} trees on {} rows; train error {:.4}, test error {:.4}, final loss {:.5}",
        model.trees.len(),
        data.len(),
        data.error_rate(&model),
        test.error_rate(&model),
        summary.losses.last().copied().unwrap_or(f64::NAN),
    );
    if adversarial.is_some() {
        println!(
            "generated {} adversarial instances, largest L0 change {}",
            summary.adversarial_generated, summary.max_adversarial_l0
        );
    }
    let out = g.out.clone().unwrap_or_else(|| "model.json".into());
    save_model(&model, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Train(args) => train(g, args, None),
        Command::Harden { train: args, budget } => train(g, args, Some(*budget)),
        Command::Evade { instance, solver } => {
            let model = g.single_model()?;
            let x = g.instance(instance)?;
            let metric = g.metrics()[0];
            let outcome = match solver {
                SolverKind::Approx => {
                    if metric != Metric::L0 {
                        bail!("the approximate solver only supports L0");
                    }
                    let cfg = DescentConfig {
                        epsilon: g.epsilon,
                        ..Default::default()
                    };
                    coordinate_descent_evade(&model, &x, &cfg)?.0
                }
                SolverKind::Exact => {
                    let d = DistanceSpec::new(metric).with_epsilon(g.epsilon);
                    let prog = build_program(&model, &x, &d, &[])?;
                    let cfg = SolveConfig::default().with_time_limit(Duration::from_secs_f64(g.time_limit));
                    solve(&prog, &model, &x, &cfg)?
                }
            };
            let text = serde_json::to_string_pretty(&outcome)?;
            match &g.out {
                Some(p) => fs::write(p, text)?,
                None => println!("{text}"),
            }
            eprintln!(
                "{} {}: distance {} ({})",
                solver,
                metric,
                outcome.distance,
                outcome.status.label()
            );
            Ok(())
        }
        Command::Bench {
            digits,
            size,
            solver,
            deterministic,
            no_warm_start,
        } => {
            let models = g.models()?;
            let test = g.mnist(digits, false)?;
            let refs: Vec<&TreeEnsemble> = models.iter().map(|m| &m.model).collect();
            let eval = build_eval_set(&refs, &test, *size)?;
            let cfg = RobustnessConfig {
                solver: *solver,
                time_limit: Duration::from_secs_f64(g.time_limit),
                epsilon: g.epsilon,
                warm_start: !no_warm_start,
                record_timing: !deterministic,
                ..Default::default()
            };
            let report = run_robustness(&models, &eval, &g.metrics(), &cfg)?;
            let out = g.out.clone().unwrap_or_else(|| "bench_out".into());
            emit_artifacts(&report, &eval, &out)?;
            for s in &report.summaries {
                let q = s
                    .quartiles
                    .map(|q| format!("min {} q25 {} median {} q75 {} max {}", q.min, q.q25, q.median, q.q75, q.max))
                    .unwrap_or_else(|| "no evasions".into());
                println!(
                    "{} {} {}: {q}; optimal {}, best effort {}, not evaded {}",
                    s.model, s.metric, s.solver, s.optimal, s.best_effort, s.not_evaded
                );
            }
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Satgen { vars, clauses, cnf } => {
            let formula = match cnf {
                Some(p) => load_dimacs(p)?,
                None => random_3sat(&mut ChaCha8Rng::seed_from_u64(g.seed), *vars, *clauses),
            };
            let model = reduce_to_ensemble(&formula);
            let stem = g.out.clone().unwrap_or_else(|| "satgen".into());
            let cnf_path = stem.with_extension("cnf");
            let model_path = stem.with_extension("json");
            if cnf.is_none() {
                fs::write(&cnf_path, to_dimacs(&formula))?;
                println!("wrote {}", cnf_path.display());
            }
            save_model(&model, &model_path)?;
            println!("wrote {}", model_path.display());
            Ok(())
        }
        Command::ExportLp { instance } => {
            let model = g.single_model()?;
            let x = g.instance(instance)?;
            let d = DistanceSpec::new(g.metrics()[0]).with_epsilon(g.epsilon);
            let prog = build_program(&model, &x, &d, &[])?;
            match &g.out {
                Some(p) => export_lp(&prog, p)?,
                None => write_lp(&prog, std::io::stdout().lock())?,
            }
            Ok(())
        }
    }
}

fn main() -> Result<()> {
    if let Ok(n) = std::env::var(THREADS_ENV) {
        let n: usize = n
            .parse()
            .with_context(|| format!("{THREADS_ENV} must be a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    run(Cli::parse())
}

//! `stochgame` command-line front-end.
//!
//! Every subcommand prints one JSON object on stdout; logs go to stderr.
//! Exit status is 0 on success, 2 on usage errors and 1 on domain errors,
//! the latter two with a one-line JSON reason as the last stderr line.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::{json, Value};

use stochgame::bellman::{self, DiscountedOptions, SolveOptions};
use stochgame::gallery::{self, Named};
use stochgame::model::{self, normalize_rewards, reach_to_acc};
use stochgame::sim::{self, SimOptions};
use stochgame::strategy::{self, AnyStrategy, SynthOptions};
use stochgame::{eval, Game, TargetSet};

const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "stochgame", version, about = "Solve turn-based stochastic games with total-reward objectives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Least fixed point of the Bellman operator by Kleene iteration.
    Solve {
        #[arg(long)]
        game: PathBuf,
        #[command(flatten)]
        solve: SolveFlags,
    },
    /// The iterate L^{N+1}(0): optimal values of plays cut after N+1 vertices.
    Nstep {
        #[arg(long)]
        game: PathBuf,
        #[arg(long)]
        n: usize,
    },
    /// Discounted values with a certified error bound.
    Discounted {
        #[arg(long)]
        game: PathBuf,
        #[arg(long, value_parser = discount)]
        lambda: f64,
        #[arg(long, default_value_t = 1e-9, value_parser = positive)]
        tol: f64,
        #[arg(long, default_value_t = 1_000_000)]
        max_iter: usize,
    },
    /// Synthesize an (eps-)optimal strategy for one player.
    Strategy {
        #[arg(long)]
        game: PathBuf,
        #[arg(long, value_enum)]
        player: PlayerArg,
        #[arg(long, value_enum, default_value_t = KindArg::Md)]
        kind: KindArg,
        #[arg(long, default_value_t = 0.01, value_parser = positive)]
        eps: f64,
        #[command(flatten)]
        solve: SolveFlags,
        /// Also write the bare strategy document here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact value of a memoryless strategy pair from one vertex.
    Evaluate {
        #[command(flatten)]
        pair: PairFlags,
    },
    /// Monte Carlo estimate for a strategy pair of any kind.
    Simulate {
        #[command(flatten)]
        pair: PairFlags,
        #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
        horizon: u64,
        #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
        episodes: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads; results do not depend on this.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        threads: u64,
    },
    /// Write a truncated gallery game and its named-vertex manifest.
    Gallery {
        #[arg(long, value_enum)]
        name: GalleryName,
        #[arg(long)]
        n: usize,
        /// Game file; the manifest goes next to it as `<stem>.manifest.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a transformed game.
    Transform {
        #[arg(long)]
        game: PathBuf,
        #[arg(long, conflicts_with = "normalize", requires = "targets")]
        reach_to_acc: bool,
        #[arg(long, required_unless_present = "reach_to_acc")]
        normalize: bool,
        #[arg(long, value_delimiter = ',')]
        targets: Option<Vec<String>>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct SolveFlags {
    #[arg(long, default_value_t = 1e-9, value_parser = positive)]
    tol: f64,
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    max_iter: u64,
    /// Iterates above this are reported as infinite.
    #[arg(long, default_value_t = 1e12, value_parser = positive)]
    bound: f64,
}

impl SolveFlags {
    fn options(&self) -> SolveOptions<f64> {
        SolveOptions {
            tol: self.tol,
            max_iter: self.max_iter as usize,
            divergence_bound: self.bound,
        }
    }
}

#[derive(Debug, Args)]
struct PairFlags {
    #[arg(long)]
    game: PathBuf,
    /// Max strategy file.
    #[arg(long)]
    sigma: PathBuf,
    /// Min strategy file.
    #[arg(long)]
    pi: PathBuf,
    /// Start vertex id.
    #[arg(long)]
    from: String,
    /// Comma-separated target ids; switches to the reachability objective.
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PlayerArg {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Md,
    Hd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GalleryName {
    Fig1,
    #[value(name = "fig1-nomax")]
    Fig1NoMax,
    #[value(name = "fig1-nomin")]
    Fig1NoMin,
    Fig2,
}

fn positive(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(format!("expected a positive finite number, got {s}"))
    }
}

fn discount(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x > 0.0 && x < 1.0 {
        Ok(x)
    } else {
        Err(format!("discount must lie in (0, 1), got {s}"))
    }
}

/// A domain error: `kind` names the failing layer.
#[derive(Debug)]
struct Failure {
    kind: &'static str,
    message: String,
}

impl Failure {
    fn new(kind: &'static str, message: impl ToString) -> Self {
        Self {
            kind,
            message: message.to_string(),
        }
    }
}

macro_rules! failure_from {
    ($($t:ty => $kind:literal),* $(,)?) => {
        $(impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::new($kind, e)
            }
        })*
    };
}

failure_from! {
    stochgame::ModelError => "model",
    stochgame::SolveError => "solve",
    stochgame::StrategyError => "strategy",
    stochgame::EvalError => "eval",
    sim::SimError => "simulate",
    gallery::GalleryError => "gallery",
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))
}

fn load_game(path: &Path) -> Result<Game, Failure> {
    let game = model::load(&read(path)?)?;
    info!("loaded {} ({} vertices)", path.display(), game.len());
    Ok(game)
}

fn load_strategy(game: &Game, path: &Path) -> Result<AnyStrategy<f64>, Failure> {
    strategy::load_strategy(game, &read(path)?)
        .map_err(|e| Failure::new("strategy", format!("{}: {e}", path.display())))
}

fn targets(game: &Game, ids: &Option<Vec<String>>) -> Result<Option<TargetSet>, Failure> {
    ids.as_ref()
        .map(|ids| TargetSet::from_ids(game, ids.iter().map(String::as_str)))
        .transpose()
        .map_err(Failure::from)
}

fn ids(game: &Game, vs: impl IntoIterator<Item = usize>) -> Vec<String> {
    vs.into_iter().map(|v| game.id(v).to_string()).collect()
}

fn named_values(game: &Game, values: &stochgame::ValueVector) -> Value {
    let map: BTreeMap<&str, _> = values.named(game).into_iter().collect();
    json!(map)
}

fn envelope(command: &str, body: Value) -> Value {
    let mut out = json!({ "schema_version": SCHEMA_VERSION, "command": command });
    if let (Some(o), Value::Object(b)) = (out.as_object_mut(), body) {
        o.extend(b);
    }
    out
}

fn run(command: Command) -> Result<Value, Failure> {
    match command {
        Command::Solve { game, solve } => {
            let game = load_game(&game)?;
            let r = bellman::value_iterate(&game, &solve.options())?;
            info!(
                "{} iterations, residual {:e}, {} divergent, converged: {}",
                r.iterations,
                r.residual,
                r.divergent.len(),
                r.converged
            );
            Ok(envelope(
                "solve",
                json!({
                    "values": named_values(&game, &r.values),
                    "iterations": r.iterations,
                    "residual": r.residual,
                    "divergent": ids(&game, r.divergent.iter().copied()),
                    "converged": r.converged,
                    "stopped": r.stopped,
                }),
            ))
        }
        Command::Nstep { game, n } => {
            let game = load_game(&game)?;
            let values = bellman::nstep_values(&game, n);
            Ok(envelope("nstep", json!({ "n": n, "values": named_values(&game, &values) })))
        }
        Command::Discounted { game, lambda, tol, max_iter } => {
            let game = load_game(&game)?;
            let opts = DiscountedOptions {
                max_iter,
                ..DiscountedOptions::default()
            };
            let r = bellman::discounted_iterate(&game, lambda, tol, &opts)?;
            info!("{} iterations, error bound {:e}", r.iterations, r.error_bound);
            Ok(envelope(
                "discounted",
                json!({
                    "lambda": lambda,
                    "values": named_values(&game, &r.values),
                    "error_bound": r.error_bound,
                    "iterations": r.iterations,
                    "certified": r.certified,
                }),
            ))
        }
        Command::Strategy { game, player, kind, eps, solve, out } => {
            let game = load_game(&game)?;
            let mut opts = SynthOptions::default();
            opts.search.solve = solve.options();
            let mut body = json!({ "eps": eps });
            let s: AnyStrategy<f64> = match (player, kind) {
                (PlayerArg::Min, _) => {
                    let r = bellman::value_iterate(&game, &solve.options())?;
                    if r.stopped == bellman::StopReason::MaxIter {
                        return Err(Failure::new("solve", "value iteration hit --max-iter before converging"));
                    }
                    body["values"] = named_values(&game, &r.values);
                    if kind == KindArg::Md {
                        strategy::min_md_optimal(&game, &r.values)?.into()
                    } else {
                        strategy::min_eps_hd(&game, &r.values, eps, &opts)?.into()
                    }
                }
                (PlayerArg::Max, KindArg::Md) => {
                    let r = strategy::max_md_eps(&game, eps, &opts)?;
                    info!("lambda {}, ell {}, n {}", r.lambda, r.ell, r.n);
                    body["lambda"] = json!(r.lambda);
                    body["ell"] = json!(r.ell);
                    body["n"] = json!(r.n);
                    body["discounted_error"] = json!(r.discounted_error);
                    body["certified"] = json!(r.certified);
                    r.strategy.into()
                }
                (PlayerArg::Max, KindArg::Hd) => strategy::max_eps_hd(&game, eps, &opts)?.into(),
            };
            let doc = strategy::save_strategy(&game, &s);
            if let Some(path) = out {
                write(&path, &pretty(&doc))?;
            }
            body["strategy"] = doc;
            Ok(envelope("strategy", body))
        }
        Command::Evaluate { pair } => {
            let game = load_game(&pair.game)?;
            let sigma = load_strategy(&game, &pair.sigma)?;
            let pi = load_strategy(&game, &pair.pi)?;
            let v = game.resolve(&pair.from)?;
            let (Some(s), Some(p)) = (sigma.as_memoryless(), pi.as_memoryless()) else {
                return Err(Failure::new("strategy", "evaluate needs memoryless strategies; use simulate for hd"));
            };
            let body = match targets(&game, &pair.targets)? {
                Some(t) => {
                    let p = eval::evaluate_reach(&game, s, p, v, &t)?;
                    json!({ "from": pair.from, "objective": "reach", "value": p })
                }
                None => {
                    let r = eval::evaluate_md_pair(&game, s, p, v)?;
                    json!({ "from": pair.from, "objective": "acc", "result": r })
                }
            };
            Ok(envelope("evaluate", body))
        }
        Command::Simulate { pair, horizon, episodes, seed, threads } => {
            let game = load_game(&pair.game)?;
            let sigma = load_strategy(&game, &pair.sigma)?;
            let pi = load_strategy(&game, &pair.pi)?;
            let v = game.resolve(&pair.from)?;
            let t = targets(&game, &pair.targets)?;
            let opts = SimOptions {
                horizon: horizon as usize,
                episodes: episodes as usize,
                seed,
                threads: threads as usize,
            };
            let stats = sim::simulate(&game, &sigma, &pi, v, t.as_ref(), &opts)?;
            info!("mean {} ± {} over {} episodes", stats.mean_acc, stats.stderr, stats.episodes);
            Ok(envelope("simulate", json!({ "from": pair.from, "stats": stats })))
        }
        Command::Gallery { name, n, out } => {
            let g: Named<f64> = match name {
                GalleryName::Fig1 => gallery::build_fig1(n)?,
                GalleryName::Fig1NoMax => gallery::build_fig1_no_max_optimal(n)?,
                GalleryName::Fig1NoMin => gallery::build_fig1_no_min_optimal(n)?,
                GalleryName::Fig2 => gallery::build_fig2(n)?,
            };
            let name = name.to_possible_value().expect("no skipped variants").get_name().to_string();
            let manifest = json!({
                "schema_version": SCHEMA_VERSION,
                "name": name,
                "n": n,
                "start": g.game.id(g.start),
                "targets": g.targets.ids(&g.game),
                "vertices": g.manifest(),
            });
            let manifest_path = out.with_extension("manifest.json");
            write(&out, &model::save(&g.game))?;
            write(&manifest_path, &pretty(&manifest))?;
            info!("wrote {} ({} vertices) and {}", out.display(), g.game.len(), manifest_path.display());
            Ok(envelope(
                "gallery",
                json!({
                    "game": out.display().to_string(),
                    "manifest": manifest_path.display().to_string(),
                    "vertices": g.game.len(),
                    "start": g.game.id(g.start),
                    "targets": g.targets.ids(&g.game),
                }),
            ))
        }
        Command::Transform { game, reach_to_acc: reach, targets: ids_in, out, .. } => {
            let game = load_game(&game)?;
            let (result, body) = if reach {
                let t = targets(&game, &ids_in)?.unwrap_or_default();
                let g = reach_to_acc(&game, &t)?;
                (g, json!({ "transform": "reach-to-acc", "targets": t.ids(&game) }))
            } else {
                let (g, split) = normalize_rewards(&game);
                (g, json!({ "transform": "normalize", "added": split.added() }))
            };
            write(&out, &model::save(&result))?;
            let mut body = body;
            body["out"] = json!(out.display().to_string());
            body["vertices"] = json!(result.len());
            Ok(envelope("transform", body))
        }
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize")
}

fn reason(kind: &str, message: &str) -> String {
    json!({ "error": kind, "message": message }).to_string()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("usage error");
            eprintln!("{}", reason("usage", first.trim_start_matches("error: ")));
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(v) => {
            println!("{}", pretty(&v));
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", reason(f.kind, &f.message));
            ExitCode::from(1)
        }
    }
}

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use mcn_core::completion::{complete_ternary, load_generator, train, TrainConfig};
use mcn_core::eval::{
    run_experiment1, run_experiment2, write_png, Exp1Config, Exp2Config, ModelPaths,
};
use mcn_core::gridmap::{load_map, save_map, MapMeta, TernaryMap};
use mcn_core::rng;
use mcn_core::simworld::{
    generate_floorplan, make_dataset, run_episode, start_pose, Controller, Dataset, DatasetConfig,
    EpisodeConfig, Explorer, PlanParams, PlanStyle, RandomWalk,
};

use crate::config::{resolve, UsageError};
use crate::{Command, Common};

pub type Failure = Box<dyn std::error::Error + Send + Sync>;

fn bad(msg: impl std::fmt::Display) -> Failure {
    Box::new(UsageError(msg.to_string()))
}

pub fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train_cmd(a),
        Command::Slam(a) => slam(a),
        Command::Complete(a) => complete(a),
        Command::Eval1(a) => eval1(a),
        Command::Eval2(a) => eval2(a),
        Command::Render(a) => render(a),
    }
}

/// Keeps only the flags the user actually gave.
fn flags<'a>(pairs: impl IntoIterator<Item = (&'a str, Option<Value>)>) -> Vec<(&'a str, Value)> {
    pairs.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))).collect()
}

fn style_params(style: &Option<String>) -> Result<PlanParams, Failure> {
    Ok(match style {
        Some(s) => s.parse::<PlanStyle>().map_err(bad)?.params(),
        None => PlanParams::default(),
    })
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(v)? + "\n")?;
    Ok(())
}

const CONFIG_FILE: &str = "config.json";

#[derive(Args, Debug)]
pub struct GenDataArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of environments across all splits.
    #[arg(long)]
    pub envs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// How partial maps are made.
    #[arg(long, value_parser = ["degrade", "sim"])]
    pub mode: Option<String>,
    /// Floorplan preset the defaults start from.
    #[arg(long, value_parser = ["a", "b"])]
    pub style: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

fn gen_data(a: GenDataArgs) -> Result<(), Failure> {
    let defaults = DatasetConfig {
        plan: style_params(&a.style)?,
        ..DatasetConfig::default()
    };
    let mode = a.mode.map(|m| json!(if m == "sim" { "sim_partial" } else { "degrade" }));
    let cfg: DatasetConfig = resolve(
        &defaults,
        a.common.config.as_deref(),
        &a.common.sets,
        flags([("n_envs", a.envs.map(|v| json!(v))), ("seed", a.seed.map(|v| json!(v))), ("mode", mode)]),
    )?;
    cfg.split_counts().map_err(bad)?;
    let ds = make_dataset(&cfg)?;
    let res = cfg.plan.resolution * cfg.plan.width as f64 / cfg.image_size as f64;
    ds.save(&a.out, res)?;
    write_json(&a.out.join(CONFIG_FILE), &cfg)?;
    println!(
        "wrote {} train / {} val / {} test environments to {}",
        ds.train.len(),
        ds.val.len(),
        ds.test.len(),
        a.out.display()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset directory written by `gen-data`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = ["l2", "gan"])]
    pub mode: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Reconstruction weight in gan mode.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

fn train_cmd(a: TrainArgs) -> Result<(), Failure> {
    let cfg: TrainConfig = resolve(
        &TrainConfig::default(),
        a.common.config.as_deref(),
        &a.common.sets,
        flags([
            ("mode", a.mode.map(|v| json!(v))),
            ("epochs", a.epochs.map(|v| json!(v))),
            ("batch_size", a.batch_size.map(|v| json!(v))),
            ("adam.lr", a.lr.map(|v| json!(v))),
            ("lambda", a.lambda.map(|v| json!(v))),
            ("generator.dropout", a.dropout.map(|v| json!(v))),
            ("seed", a.seed.map(|v| json!(v))),
        ]),
    )?;
    cfg.validate().map_err(bad)?;
    let ds = Dataset::load(&a.data)?;
    write_json(&a.out.join(CONFIG_FILE), &json!({ "data": a.data, "train": cfg }))?;
    let trained = train(&ds.train, &ds.val, &cfg, Some(&a.out))?;
    for m in &trained.log {
        let d = m.d_loss.map_or(String::new(), |d| format!("  d_loss {d:.5}"));
        let v = m.val_f.map_or(String::new(), |f| format!("  val_f {f:.4}"));
        println!("epoch {:4}  g_loss {:.5}  l2 {:.5}{d}{v}", m.epoch, m.g_loss, m.l2);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Explorer,
    RandomWalk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlamRun {
    pub env_seed: u64,
    pub steps: usize,
    pub controller: ControllerKind,
    pub plan: PlanParams,
    pub episode: EpisodeConfig,
}

impl Default for SlamRun {
    fn default() -> Self {
        Self {
            env_seed: 0,
            steps: 200,
            controller: ControllerKind::Explorer,
            plan: PlanParams::default(),
            episode: EpisodeConfig::default(),
        }
    }
}

#[derive(Args, Debug)]
pub struct SlamArgs {
    #[command(flatten)]
    pub common: Common,
    /// Seed of the simulated floorplan, start pose and noise.
    #[arg(long)]
    pub env_seed: Option<u64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long, value_parser = ["explorer", "random_walk"])]
    pub controller: Option<String>,
    #[arg(long, value_parser = ["a", "b"])]
    pub style: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

fn slam(a: SlamArgs) -> Result<(), Failure> {
    let defaults = SlamRun {
        plan: style_params(&a.style)?,
        ..SlamRun::default()
    };
    let cfg: SlamRun = resolve(
        &defaults,
        a.common.config.as_deref(),
        &a.common.sets,
        flags([
            ("env_seed", a.env_seed.map(|v| json!(v))),
            ("steps", a.steps.map(|v| json!(v))),
            ("episode.slam.particles", a.particles.map(|v| json!(v))),
            ("controller", a.controller.map(|v| json!(v))),
        ]),
    )?;
    if cfg.steps == 0 || cfg.episode.slam.particles == 0 {
        return Err(bad("steps and particles must be positive"));
    }
    let plan = generate_floorplan(cfg.env_seed, &cfg.plan)?;
    let start = start_pose(&plan, &mut rng::stream(cfg.env_seed, &[1]))?;
    let mut episode_cfg = cfg.episode.clone();
    episode_cfg.seed = rng::derive_seed(cfg.env_seed, &[2]);
    episode_cfg.slam.seed = rng::derive_seed(cfg.env_seed, &[3]);
    let mut controller: Box<dyn Controller> = match cfg.controller {
        ControllerKind::Explorer => Box::new(Explorer::new(&plan, &start)),
        ControllerKind::RandomWalk => Box::new(RandomWalk::new(rng::derive_seed(cfg.env_seed, &[4]))),
    };
    let ep = run_episode(&plan, start, controller.as_mut(), cfg.steps, &episode_cfg, |_, _| {})?;

    write_json(&a.out.join(CONFIG_FILE), &cfg)?;
    let log_path = a.out.join("episode.jsonl");
    let mut log = std::io::BufWriter::new(fs::File::create(&log_path)?);
    for r in &ep.records {
        writeln!(log, "{}", serde_json::to_string(r)?)?;
    }
    log.flush()?;
    let (grid, traj) = ep.particles.best_map();
    let meta = MapMeta::with_resolution(grid.resolution());
    save_map(&grid.to_ternary(), &meta, &a.out.join("best_map.pgm"))?;
    save_map(&plan.render(), &meta, &a.out.join("truth.pgm"))?;
    let est = *traj.last().expect("trajectory is never empty");
    let truth = *ep.truth.last().expect("truth is never empty");
    let summary = json!({
        "steps": ep.records.len(),
        "final_estimate": est,
        "final_truth": truth,
        "position_error_m": est.distance(&truth),
        "heading_error_deg": est.heading_error(&truth).to_degrees(),
    });
    write_json(&a.out.join("summary.json"), &summary)?;
    println!(
        "{} steps, final position error {:.3} m, heading error {:.2} deg",
        ep.records.len(),
        est.distance(&truth),
        est.heading_error(&truth).to_degrees()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct CompleteArgs {
    /// Generator checkpoint (its `.json` sidecar must sit next to it).
    #[arg(long)]
    pub model: PathBuf,
    /// Partial map as ternary PGM.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output PGM path.
    #[arg(long)]
    pub out: PathBuf,
    /// Keep dropout on to draw a sample instead of the deterministic completion.
    #[arg(long)]
    pub stochastic: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn complete(a: CompleteArgs) -> Result<(), Failure> {
    let g = load_generator(&a.model, None)?;
    let (map, meta) = load_map(&a.input)?;
    let done = complete_ternary(&g, &map, &mut rng::seeded(a.seed), a.stochastic)?;
    save_map(&done, &meta, &a.out)?;
    let echo = json!({ "model": a.model, "in": a.input, "stochastic": a.stochastic, "seed": a.seed });
    write_json(&a.out.with_extension("config.json"), &echo)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct Eval1Args {
    #[command(flatten)]
    pub common: Common,
    /// Dataset directory; its test split is scored, its training split feeds the baseline.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub l2: Option<PathBuf>,
    #[arg(long)]
    pub gan: Option<PathBuf>,
    /// Generators trained on the other plan style.
    #[arg(long)]
    pub cross_l2: Option<PathBuf>,
    #[arg(long)]
    pub cross_gan: Option<PathBuf>,
    /// Number of test environments that get image panels.
    #[arg(long)]
    pub panels: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

fn eval1(a: Eval1Args) -> Result<(), Failure> {
    let cfg: Exp1Config = resolve(
        &Exp1Config::default(),
        a.common.config.as_deref(),
        &a.common.sets,
        flags([("panels", a.panels.map(|v| json!(v)))]),
    )?;
    let models = ModelPaths {
        gan: a.gan,
        l2: a.l2,
        cross_gan: a.cross_gan,
        cross_l2: a.cross_l2,
    };
    let ds = Dataset::load(&a.data)?;
    write_json(&a.out.join(CONFIG_FILE), &json!({ "data": a.data, "models": models, "experiment": cfg }))?;
    let report = run_experiment1(&ds, &models, &cfg, Some(&a.out))?;
    print!("{}", report.table());
    Ok(())
}

#[derive(Args, Debug)]
pub struct Eval2Args {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub envs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Upper bound on filter iterations per environment.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, value_parser = ["a", "b"])]
    pub style: Option<String>,
    #[arg(long)]
    pub l2: Option<PathBuf>,
    #[arg(long)]
    pub gan: Option<PathBuf>,
    /// Dataset whose training split the baseline searches.
    #[arg(long)]
    pub training: Option<PathBuf>,
    #[arg(long, default_value = "eval2")]
    pub out: PathBuf,
}

fn eval2(a: Eval2Args) -> Result<(), Failure> {
    let defaults = Exp2Config {
        plan: style_params(&a.style)?,
        ..Exp2Config::default()
    };
    let cfg: Exp2Config = resolve(
        &defaults,
        a.common.config.as_deref(),
        &a.common.sets,
        flags([
            ("n_envs", a.envs.map(|v| json!(v))),
            ("seed", a.seed.map(|v| json!(v))),
            ("max_steps", a.steps.map(|v| json!(v))),
        ]),
    )?;
    cfg.validate().map_err(bad)?;
    let models = ModelPaths {
        gan: a.gan,
        l2: a.l2,
        ..ModelPaths::default()
    };
    let training: Vec<TernaryMap> = match &a.training {
        Some(dir) => Dataset::load(dir)?.train.into_iter().map(|e| e.full).collect(),
        None => Vec::new(),
    };
    write_json(
        &a.out.join(CONFIG_FILE),
        &json!({ "models": models, "training": a.training, "experiment": cfg }),
    )?;
    let report = run_experiment2(&cfg, &models, &training, Some(&a.out))?;
    for s in &report.skipped {
        eprintln!("notice: skipped {}: {}", s.env, s.reason);
    }
    print!("{}", report.table());
    Ok(())
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    /// Ternary PGM map.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output PNG path.
    #[arg(long)]
    pub out: PathBuf,
    /// Integer upscaling factor.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=64))]
    pub scale: u32,
}

fn render(a: RenderArgs) -> Result<(), Failure> {
    let (map, _) = load_map(&a.input)?;
    let k = a.scale as usize;
    let big = if k == 1 {
        map
    } else {
        let cells = (0..map.height() * k)
            .flat_map(|y| (0..map.width() * k).map(move |x| (x / k, y / k)))
            .map(|(x, y)| map.get(x, y))
            .collect();
        TernaryMap::from_cells(map.width() * k, map.height() * k, cells)?
    };
    write_png(&big, &a.out)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

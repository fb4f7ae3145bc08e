use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{confusion, metrics, ConfusionCounts};
use crate::neuralnet::{Adam, AdamConfig, Checkpoint, Tensor};
use crate::rng;
use crate::simworld::DatasetEntry;

use super::inference::{pack_input, unpack_output};
use super::loss::{gan_losses, l2_loss};
use super::network::{
    apply_update, Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, Parameterized,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    /// Generator alone on the reconstruction loss.
    L2,
    /// Alternating discriminator / generator updates.
    Gan,
}

impl std::str::FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(TrainMode::L2),
            "gan" => Ok(TrainMode::Gan),
            _ => Err(Error::InvalidParam(format!("unknown training mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Weight of the reconstruction term in gan mode; 0 leaves the pure adversarial objective.
    pub lambda: f64,
    pub seed: u64,
    /// Save checkpoints every this many epochs (and after the last one).
    pub checkpoint_every: usize,
    pub power_iters: usize,
    /// Apply a random flip/transpose of the square to each training pair.
    pub augment: bool,
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: TrainMode::L2,
            epochs: 200,
            batch_size: 8,
            adam: AdamConfig::default(),
            lambda: 10.0,
            seed: 0,
            checkpoint_every: 10,
            power_iters: 1,
            augment: true,
            generator: GeneratorConfig::default(),
            discriminator: DiscriminatorConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.checkpoint_every == 0 {
            return Err(Error::InvalidParam(
                "epochs, batch_size and checkpoint_every must be positive".into(),
            ));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidParam(format!("lambda {} must be >= 0", self.lambda)));
        }
        if !(self.adam.lr > 0.0) {
            return Err(Error::InvalidParam(format!("learning rate {} must be > 0", self.adam.lr)));
        }
        self.generator.validate()
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub d_loss: Option<f64>,
    pub g_loss: f64,
    pub l2: f64,
    pub val_l2: Option<f64>,
    pub val_f: Option<f64>,
}

pub struct Trained {
    pub generator: Generator,
    pub discriminator: Option<Discriminator>,
    pub log: Vec<EpochMetrics>,
}

pub const GENERATOR_FILE: &str = "generator.ckpt";
pub const DISCRIMINATOR_FILE: &str = "discriminator.ckpt";
pub const LOG_FILE: &str = "train_log.jsonl";

/// Writes the checkpoint plus a JSON sidecar holding the architecture config.
pub fn save_generator(g: &Generator, step: u64, path: &Path) -> Result<()> {
    g.to_checkpoint(step).save(path)?;
    let side = path.with_extension("json");
    fs::write(&side, serde_json::to_string_pretty(&g.config)?).map_err(|e| Error::io(&side, e))
}

/// Loads a generator; without an explicit config the JSON sidecar is used.
pub fn load_generator(path: &Path, config: Option<GeneratorConfig>) -> Result<Generator> {
    let config = match config {
        Some(c) => c,
        None => {
            let side = path.with_extension("json");
            let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
            serde_json::from_str(&text)?
        }
    };
    let mut g = Generator::new(config)?;
    let ck = Checkpoint::load(path, g.arch_hash())?;
    g.load_checkpoint(&ck)?;
    Ok(g)
}

fn save_discriminator(d: &Discriminator, step: u64, path: &Path) -> Result<()> {
    d.to_checkpoint(step).save(path)?;
    let side = path.with_extension("json");
    fs::write(&side, serde_json::to_string_pretty(&d.config)?).map_err(|e| Error::io(&side, e))
}

pub fn load_discriminator(path: &Path) -> Result<Discriminator> {
    let side = path.with_extension("json");
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let mut d = Discriminator::new(serde_json::from_str(&text)?)?;
    let ck = Checkpoint::load(path, d.arch_hash())?;
    d.load_checkpoint(&ck)?;
    Ok(d)
}

fn pack_pairs(entries: &[DatasetEntry], size: usize) -> Result<Vec<(Tensor, Tensor)>> {
    entries
        .iter()
        .map(|e| Ok((pack_input(&e.partial, size)?, pack_input(&e.full, size)?)))
        .collect()
}

/// Deterministic validation pass: mean L2 and pooled-mean F-measure.
pub fn validate(g: &Generator, pairs: &[(Tensor, Tensor)]) -> Result<(f64, f64)> {
    let mut l2_sum = 0.0;
    let mut f_sum = 0.0;
    for (x, t) in pairs {
        let (y, _) = g.forward(x, None)?;
        l2_sum += l2_loss(&y, t)?.0;
        let pred = unpack_output(&y)?;
        let truth = unpack_output(t)?;
        f_sum += metrics(&confusion(&pred, &truth)?).f_measure;
    }
    let n = pairs.len() as f64;
    Ok((l2_sum / n, f_sum / n))
}

fn diverged(epoch: usize, last_good: &Option<PathBuf>) -> Error {
    Error::Diverged {
        epoch,
        last_good: last_good.clone(),
    }
}

/// Trains a completion network. With `out_dir` set, checkpoints and a
/// JSON-lines metric log are written there.
/// One of the eight symmetries of a square image: bit 0 mirrors x, bit 1
/// mirrors y, bit 2 swaps the axes (applied last).
pub(crate) fn dihedral(t: &Tensor, k: u8) -> Tensor {
    let [n, c, h, w] = t.shape();
    debug_assert_eq!(h, w);
    let mut out = Tensor::zeros([n, c, h, w]);
    let src = t.data();
    let dst = out.data_mut();
    for plane in 0..n * c {
        let base = plane * h * w;
        for y in 0..h {
            for x in 0..w {
                let sx = if k & 1 != 0 { w - 1 - x } else { x };
                let sy = if k & 2 != 0 { h - 1 - y } else { y };
                let (dx, dy) = if k & 4 != 0 { (y, x) } else { (x, y) };
                dst[base + dy * w + dx] = src[base + sy * w + sx];
            }
        }
    }
    out
}

pub fn train(
    train_set: &[DatasetEntry],
    val_set: &[DatasetEntry],
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<Trained> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::InvalidParam("training split is empty".into()));
    }
    let size = cfg.generator.size;
    let pairs = pack_pairs(train_set, size)?;
    let val_pairs = pack_pairs(val_set, size)?;

    let mut g = Generator::new(cfg.generator.clone())?;
    let mut g_opt = Adam::new(cfg.adam, &g.param_sizes());
    let mut d = match cfg.mode {
        TrainMode::Gan => Some(Discriminator::new(cfg.discriminator.clone())?),
        TrainMode::L2 => None,
    };
    let mut d_opt = d.as_ref().map(|d| Adam::new(cfg.adam, &d.param_sizes()));

    let mut log_file = match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let p = dir.join(LOG_FILE);
            Some((fs::File::create(&p).map_err(|e| Error::io(&p, e))?, p))
        }
        None => None,
    };

    let mut log = Vec::with_capacity(cfg.epochs);
    let mut last_good: Option<PathBuf> = None;
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng::stream(cfg.seed, &[epoch as u64]));
        let (mut g_sum, mut l2_sum, mut d_sum) = (0.0, 0.0, 0.0);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let mut flips = rng::stream(cfg.seed, &[epoch as u64, b as u64, 2]);
            let (xs, ts): (Vec<Tensor>, Vec<Tensor>) = chunk
                .iter()
                .map(|&i| {
                    let (x, t) = &pairs[i];
                    if cfg.augment {
                        let k = flips.random_range(0..8u8);
                        (dihedral(x, k), dihedral(t, k))
                    } else {
                        (x.clone(), t.clone())
                    }
                })
                .unzip();
            let x = Tensor::stack(&xs)?;
            let t = Tensor::stack(&ts)?;
            let mut noise = rng::stream(cfg.seed, &[epoch as u64, b as u64, 1]);
            let w = chunk.len() as f64;
            g.power_iterate(cfg.power_iters);
            match (&mut d, &mut d_opt) {
                (None, _) => {
                    let (y, trace) = g.forward(&x, Some(&mut noise))?;
                    let (loss, grad) = l2_loss(&y, &t)?;
                    if !loss.is_finite() {
                        return Err(diverged(epoch, &last_good));
                    }
                    let (grads, _) = g.backward(&trace, &grad)?;
                    apply_update(&mut g, &mut g_opt, &grads).map_err(|_| diverged(epoch, &last_good))?;
                    g_sum += loss * w;
                    l2_sum += loss * w;
                }
                (Some(d), Some(d_opt)) => {
                    d.power_iterate(cfg.power_iters);
                    let l = gan_losses(d, &g, &x, &t, cfg.lambda, Some(&mut noise))
                        .map_err(|_| diverged(epoch, &last_good))?;
                    apply_update(d, d_opt, &l.d_grads).map_err(|_| diverged(epoch, &last_good))?;
                    apply_update(&mut g, &mut g_opt, &l.g_grads).map_err(|_| diverged(epoch, &last_good))?;
                    d_sum += l.d_loss * w;
                    g_sum += l.g_loss * w;
                    l2_sum += l.l2 * w;
                }
                (Some(_), None) => unreachable!("optimizer exists iff discriminator does"),
            }
        }
        let n = pairs.len() as f64;
        let (val_l2, val_f) = if val_pairs.is_empty() {
            (None, None)
        } else {
            let (l, f) = validate(&g, &val_pairs)?;
            (Some(l), Some(f))
        };
        let m = EpochMetrics {
            epoch,
            d_loss: d.as_ref().map(|_| d_sum / n),
            g_loss: g_sum / n,
            l2: l2_sum / n,
            val_l2,
            val_f,
        };
        if !m.g_loss.is_finite() || m.d_loss.is_some_and(|v| !v.is_finite()) {
            return Err(diverged(epoch, &last_good));
        }
        if let Some((f, p)) = &mut log_file {
            writeln!(f, "{}", serde_json::to_string(&m)?).map_err(|e| Error::io(p.as_path(), e))?;
        }
        log.push(m);
        if let Some(dir) = out_dir {
            if epoch % cfg.checkpoint_every == 0 || epoch == cfg.epochs {
                let step = g_opt.steps();
                let tagged = dir.join(format!("generator_e{epoch:04}.ckpt"));
                save_generator(&g, step, &tagged)?;
                if let Some(d) = &d {
                    save_discriminator(d, step, &dir.join(format!("discriminator_e{epoch:04}.ckpt")))?;
                }
                last_good = Some(tagged);
            }
        }
    }
    if let Some(dir) = out_dir {
        save_generator(&g, g_opt.steps(), &dir.join(GENERATOR_FILE))?;
        if let Some(d) = &d {
            save_discriminator(d, g_opt.steps(), &dir.join(DISCRIMINATOR_FILE))?;
        }
    }
    Ok(Trained {
        generator: g,
        discriminator: d,
        log,
    })
}

/// Pools confusion counts of deterministic completions over a set of pairs.
pub fn pooled_confusion(g: &Generator, entries: &[DatasetEntry]) -> Result<ConfusionCounts> {
    let mut total = ConfusionCounts::default();
    for e in entries {
        let x = pack_input(&e.partial, g.config.size)?;
        let (y, _) = g.forward(&x, None)?;
        total += confusion(&unpack_output(&y)?, &e.full)?;
    }
    Ok(total)
}

//! Experiment orchestration: building models, the training loop with
//! validation-based model selection, checkpoints, finetuning, metrics.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, ExplorationRecord, Histogram};
use crate::data::{self, augment_cifar, batches, sequential_batches, Dataset, DatasetName, SplitSpec, Splits};
use crate::error::{Error, Result};
use crate::kernels::{self, Exec};
use crate::model::{Arch, Network, SlotOptions, Weights};
use crate::optim::{policy_lr, policy_weight_decay, sgd_step, LrSchedule, Mode, SgdState, DEFAULT_RESTARTS, MOMENTUM};
use crate::slot::{SelectionMask, ShareMode, SlotInit, WeightDist};
use crate::tensor::Tensor;

/// Exploration is measured over windows of this many epochs.
pub const EXPLORATION_WINDOW: usize = 5;
pub const DEFAULT_BATCH_SIZE: usize = 128;
const EVAL_BATCH: usize = 1000;
const TRAIN_STREAM: u64 = 1 << 40;
const CHECKPOINT_MAGIC: &[u8; 8] = b"SLOTCKPT";
const CHECKPOINT_VERSION: u32 = 1;

/// How often probabilistic sampling draws a new selection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum PsResample {
    #[default]
    PerBatch,
    PerEpoch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub arch: Arch,
    pub mode: Mode,
    pub k: usize,
    /// `None` uses the architecture default for the mode.
    pub epochs: Option<usize>,
    pub seed: u64,
    /// Seed of the train/validation partition.
    pub split_seed: u64,
    pub lambda: Option<f32>,
    pub gamma: f32,
    pub weight_dist: WeightDist,
    pub share: ShareMode,
    pub sparse: bool,
    pub finetune_from: Option<PathBuf>,
    pub finetune_epochs: usize,
    pub data_dir: PathBuf,
    pub out_dir: Option<PathBuf>,
    pub deterministic: bool,
    pub val_fraction: Option<f32>,
    pub batch_size: usize,
    /// Overrides the per-mode learning rate.
    pub lr: Option<f32>,
    /// Overrides the per-mode L2 penalty.
    pub weight_decay: Option<f32>,
    pub restarts: Vec<usize>,
    pub ps_resample: PsResample,
    /// Keep a copy of the training state after these many epochs (0 is the
    /// initial state).
    pub snapshot_epochs: Vec<usize>,
    /// `None` augments CIFAR-10 and leaves MNIST alone.
    pub augment: Option<bool>,
}

impl TrainConfig {
    pub fn new(arch: Arch, mode: Mode, k: usize) -> Self {
        TrainConfig {
            arch,
            mode,
            k,
            epochs: None,
            seed: 0,
            split_seed: 0,
            lambda: None,
            gamma: 0.0,
            weight_dist: WeightDist::GlorotUniform,
            share: ShareMode::None,
            sparse: false,
            finetune_from: None,
            finetune_epochs: 100,
            data_dir: PathBuf::from("data"),
            out_dir: None,
            deterministic: true,
            val_fraction: None,
            batch_size: DEFAULT_BATCH_SIZE,
            lr: None,
            weight_decay: None,
            restarts: DEFAULT_RESTARTS.to_vec(),
            ps_resample: PsResample::PerBatch,
            snapshot_epochs: Vec::new(),
            augment: None,
        }
    }

    pub fn total_epochs(&self) -> usize {
        match (self.epochs, self.mode) {
            (Some(e), _) => e,
            (None, Mode::Finetune) => self.finetune_epochs,
            (None, Mode::Baseline) => self.arch.baseline_epochs(),
            (None, _) => self.arch.slot_epochs(),
        }
    }

    pub fn base_lr(&self) -> f32 {
        self.lr.unwrap_or_else(|| policy_lr(self.mode, self.k))
    }

    pub fn weight_decay(&self) -> f32 {
        self.weight_decay.unwrap_or_else(|| policy_weight_decay(self.mode))
    }

    pub fn dataset(&self) -> DatasetName {
        if self.arch.is_mnist() {
            DatasetName::Mnist
        } else {
            DatasetName::Cifar10
        }
    }

    pub fn split_spec(&self) -> SplitSpec {
        let mut spec = SplitSpec::default_for(self.dataset(), self.split_seed);
        if let Some(f) = self.val_fraction {
            spec.val_fraction = f;
        }
        spec
    }

    pub fn augments(&self) -> bool {
        self.augment.unwrap_or(self.dataset() == DatasetName::Cifar10)
    }

    pub fn exec(&self) -> Exec {
        if self.deterministic {
            Exec::Serial
        } else {
            Exec::Parallel
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::invalid("K must be at least 1"));
        }
        if self.total_epochs() < 1 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.batch_size < 1 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if !self.mode.is_slot() && (self.sparse || self.share != ShareMode::None) {
            return Err(Error::invalid(format!(
                "sharing and sparsity only apply to slot modes, not {}",
                self.mode.name()
            )));
        }
        if self.sparse && self.k < 2 {
            return Err(Error::invalid("sparse slot machines need K >= 2"));
        }
        if self.mode == Mode::Finetune && self.finetune_from.is_none() {
            return Err(Error::invalid("finetune mode needs a source checkpoint"));
        }
        Ok(())
    }

    fn slot_options(&self) -> SlotOptions {
        SlotOptions {
            init: SlotInit {
                k: self.k,
                weight_dist: self.weight_dist,
                lambda: self.lambda,
                gamma: self.gamma,
                share_mode: self.share,
            },
            sparse: self.sparse,
        }
    }
}

/// Builds the initial network for a slot or baseline configuration.
pub fn build_model(config: &TrainConfig) -> Result<Network> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    match config.mode {
        Mode::SlotGs | Mode::SlotPs => Network::slot(config.arch, &config.slot_options(), &mut rng),
        Mode::Baseline => Network::dense(config.arch, &mut rng),
        Mode::Finetune => Err(Error::invalid("finetune models are built from a checkpoint")),
    }
}

// ---------------------------------------------------------------------------
// Metrics

pub const METRICS_HEADER: &str = "epoch,lr,train_loss,train_acc,val_acc,test_acc,weight_change_pct,elapsed_s";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    /// Number of completed epochs (1-based).
    pub epoch: usize,
    pub lr: f32,
    pub train_loss: f32,
    pub train_acc: f32,
    pub val_acc: f32,
    /// Only on the final row.
    pub test_acc: Option<f32>,
    /// Percentage of connections whose highest-score option changed over the
    /// last window; only at window boundaries of slot runs.
    pub weight_change_pct: Option<f32>,
    pub elapsed_s: f64,
}

impl MetricsRow {
    /// Same row ignoring wall-clock time.
    pub fn same_values(&self, other: &MetricsRow) -> bool {
        MetricsRow { elapsed_s: 0.0, ..self.clone() } == MetricsRow { elapsed_s: 0.0, ..other.clone() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsLog {
    pub rows: Vec<MetricsRow>,
}

fn opt_field(v: Option<f32>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl MetricsLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(METRICS_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{:.3}",
                r.epoch,
                r.lr,
                r.train_loss,
                r.train_acc,
                r.val_acc,
                opt_field(r.test_acc),
                opt_field(r.weight_change_pct),
                r.elapsed_s
            );
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(METRICS_HEADER) {
            return Err(Error::invalid("metrics CSV header mismatch"));
        }
        let parse = |s: &str| -> Result<f32> { s.parse().map_err(|_| Error::invalid(format!("bad number {s:?}"))) };
        let opt = |s: &str| -> Result<Option<f32>> { if s.is_empty() { Ok(None) } else { parse(s).map(Some) } };
        let rows = lines
            .filter(|l| !l.trim().is_empty())
            .map(|line| {
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 8 {
                    return Err(Error::invalid(format!("metrics row has {} fields", f.len())));
                }
                Ok(MetricsRow {
                    epoch: f[0].parse().map_err(|_| Error::invalid("bad epoch"))?,
                    lr: parse(f[1])?,
                    train_loss: parse(f[2])?,
                    train_acc: parse(f[3])?,
                    val_acc: parse(f[4])?,
                    test_acc: opt(f[5])?,
                    weight_change_pct: opt(f[6])?,
                    elapsed_s: f[7].parse().map_err(|_| Error::invalid("bad elapsed"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MetricsLog { rows })
    }

    /// Mean weight-change percentage over rows whose epoch lies in `[from, to]`.
    pub fn mean_weight_change(&self, from: usize, to: usize) -> Option<f32> {
        let vals: Vec<f32> = self
            .rows
            .iter()
            .filter(|r| r.epoch >= from && r.epoch <= to)
            .filter_map(|r| r.weight_change_pct)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f32>() / vals.len() as f32)
    }
}

// ---------------------------------------------------------------------------
// Checkpoints

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerOptim {
    pub weights: SgdState,
    pub bias: Option<SgdState>,
}

/// Weights of the epoch with the best validation accuracy so far.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestSnapshot {
    pub epoch: usize,
    pub val_acc: f32,
    pub weights: Vec<Tensor>,
    pub biases: Vec<Option<Tensor>>,
    /// Mean |w| over the selected weights of slot networks.
    pub mean_abs_selected: Option<f32>,
}

impl BestSnapshot {
    pub fn network(&self, arch: Arch) -> Result<Network> {
        let mut net = Network::from_dense_weights(arch, self.weights.clone())?;
        for (p, b) in net.params_mut().iter_mut().zip(&self.biases) {
            if let (Weights::Dense { bias, .. }, Some(b)) = (&mut p.weights, b) {
                *bias = Some(b.clone());
            }
        }
        Ok(net)
    }
}

/// Complete training state. Resuming from a checkpoint in deterministic mode
/// reproduces the uninterrupted run bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: TrainConfig,
    /// Completed epochs.
    pub epoch: usize,
    pub network: Network,
    pub optimizer: Vec<LayerOptim>,
    pub rng: ChaCha8Rng,
    pub best: Option<BestSnapshot>,
    /// Highest-score selection at the last exploration boundary.
    pub exploration_ref: Vec<SelectionMask>,
    pub exploration: Vec<ExplorationRecord>,
    pub metrics: MetricsLog,
    /// SHA-256 of all option tensors at initialization (slot modes).
    pub initial_digest: Option<String>,
    pub init_mean_abs_selected: Option<f32>,
    pub elapsed_s: f64,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(CHECKPOINT_MAGIC).map_err(|e| Error::io(path, e))?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes()).map_err(|e| Error::io(path, e))?;
        bincode::serialize_into(&mut w, self).map_err(|e| Error::Checkpoint(e.to_string()))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let mut head = [0u8; 12];
        r.read_exact(&mut head).map_err(|e| Error::io(path, e))?;
        if &head[..8] != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint(format!("{} is not a checkpoint", path.display())));
        }
        let version = u32::from_le_bytes([head[8], head[9], head[10], head[11]]);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        bincode::deserialize_from(r).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn is_complete(&self) -> bool {
        self.epoch >= self.config.total_epochs()
    }
}

fn train_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(TRAIN_STREAM);
    rng
}

fn fresh_optimizer(net: &Network, momentum: f32, weight_decay: f32) -> Result<Vec<LayerOptim>> {
    net.params()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            Ok(match &p.weights {
                Weights::Slot(s) => LayerOptim {
                    weights: SgdState::new(format!("layer {i} scores"), s.scores().len(), momentum, weight_decay)?,
                    bias: None,
                },
                Weights::Dense { weights, bias } => LayerOptim {
                    weights: SgdState::new(format!("layer {i} weights"), weights.len(), momentum, weight_decay)?,
                    bias: bias
                        .as_ref()
                        .map(|b| SgdState::new(format!("layer {i} bias"), b.len(), momentum, weight_decay))
                        .transpose()?,
                },
            })
        })
        .collect()
}

fn initial_state(config: TrainConfig, network: Network) -> Result<Checkpoint> {
    let optimizer = fresh_optimizer(&network, MOMENTUM, config.weight_decay())?;
    let slot = network.is_slot();
    Ok(Checkpoint {
        rng: train_rng(config.seed),
        epoch: 0,
        optimizer,
        best: None,
        exploration_ref: if slot { network.select_gs() } else { Vec::new() },
        exploration: Vec::new(),
        metrics: MetricsLog::default(),
        initial_digest: slot.then(|| analysis::options_digest(&network)),
        init_mean_abs_selected: slot.then(|| analysis::mean_abs_selected(&network)),
        elapsed_s: 0.0,
        config,
        network,
    })
}

/// Fresh training state for a slot or baseline configuration.
pub fn start(config: &TrainConfig) -> Result<Checkpoint> {
    let network = build_model(config)?;
    initial_state(config.clone(), network)
}

/// Training state that finetunes the weights selected by a slot checkpoint:
/// the highest-score options become ordinary trainable weights.
pub fn finetune_start(source: &Checkpoint, epochs: usize) -> Result<Checkpoint> {
    if !source.config.mode.is_slot() {
        return Err(Error::invalid(format!(
            "finetuning needs a slot-machine checkpoint, got {}",
            source.config.mode.name()
        )));
    }
    let network = source.network.exported()?;
    let mut config = source.config.clone();
    config.mode = Mode::Finetune;
    config.epochs = Some(epochs);
    config.finetune_epochs = epochs;
    config.finetune_from.get_or_insert_with(|| PathBuf::from("<in-memory>"));
    config.lr = None;
    config.weight_decay = None;
    config.sparse = false;
    config.share = ShareMode::None;
    config.snapshot_epochs.clear();
    initial_state(config, network)
}

// ---------------------------------------------------------------------------
// Evaluation

/// Fraction of rows whose highest logit is the label.
pub fn accuracy(logits: &Tensor, labels: &[u8]) -> Result<f32> {
    let pred = kernels::argmax_rows(logits)?;
    if pred.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            op: "accuracy",
            left: vec![pred.len()],
            right: vec![labels.len()],
        });
    }
    Ok(correct(&pred, labels) as f32 / labels.len().max(1) as f32)
}

fn correct(pred: &[usize], labels: &[u8]) -> usize {
    pred.iter().zip(labels).filter(|(p, l)| **p == **l as usize).count()
}

/// Test-time accuracy. Slot networks are evaluated with their
/// highest-score options, whichever rule was used in training.
pub fn evaluate(net: &Network, dataset: &Dataset, exec: Exec) -> Result<f32> {
    let masks = net.select_gs();
    let eff = net.effective(Some(&masks))?;
    let mut hits = 0usize;
    for (x, y) in sequential_batches(dataset, EVAL_BATCH) {
        let logits = net.logits(&x, &eff, exec)?;
        hits += correct(&kernels::argmax_rows(&logits)?, &y);
    }
    Ok(hits as f32 / dataset.len().max(1) as f32)
}

// ---------------------------------------------------------------------------
// Training loop

/// Result of a completed run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub metrics: MetricsLog,
    pub checkpoint: Checkpoint,
    /// Test accuracy of the best-validation snapshot.
    pub test_acc: f32,
    pub best_epoch: usize,
    pub best_val_acc: f32,
    /// Copies of the state after each requested snapshot epoch.
    pub snapshots: Vec<Checkpoint>,
}

impl TrainOutcome {
    pub fn snapshot(&self, epoch: usize) -> Option<&Checkpoint> {
        self.snapshots.iter().find(|c| c.epoch == epoch)
    }
}

fn one_epoch(state: &mut Checkpoint, splits: &Splits) -> Result<MetricsRow> {
    let config = &state.config;
    let total = config.total_epochs();
    let schedule = LrSchedule::for_run(config.base_lr(), &config.restarts, total)?;
    let epoch = state.epoch;
    let lr = schedule.lr_at(epoch)?;
    let exec = config.exec();
    let (mode, augment, seed, bs, resample) =
        (config.mode, config.augments(), config.seed, config.batch_size, config.ps_resample);
    let started = Instant::now();

    let mut epoch_masks = match (mode, resample) {
        (Mode::SlotPs, PsResample::PerEpoch) => Some(state.network.select_ps(&mut state.rng)),
        _ => None,
    };

    let mut loss_sum = 0.0f64;
    let mut hits = 0usize;
    let mut seen = 0usize;
    for (mut x, y) in batches(&splits.train, bs, seed, epoch) {
        if augment {
            augment_cifar(&mut x, &mut state.rng)?;
        }
        let masks = match mode {
            Mode::SlotGs => state.network.select_gs(),
            Mode::SlotPs => match epoch_masks.as_mut() {
                Some(m) => m.clone(),
                None => state.network.select_ps(&mut state.rng),
            },
            Mode::Baseline | Mode::Finetune => Vec::new(),
        };
        let grads = {
            let eff = state.network.effective(Some(&masks))?;
            let (logits, tape) = state.network.forward(&x, &eff, true, &mut state.rng, exec)?;
            let (loss, g) = kernels::softmax_cross_entropy(&logits, &y)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch: epoch + 1, loss });
            }
            loss_sum += loss as f64 * y.len() as f64;
            hits += correct(&kernels::argmax_rows(&logits)?, &y);
            seen += y.len();
            state.network.backward(&tape, &eff, &g, exec)?
        };
        for ((param, grad), opt) in state.network.params_mut().iter_mut().zip(grads).zip(&mut state.optimizer) {
            match &mut param.weights {
                Weights::Slot(slot) => {
                    let sg = slot.score_grads(&grad.weights)?;
                    sgd_step(slot.scores_mut(), sg.data(), &mut opt.weights, lr)?;
                }
                Weights::Dense { weights, bias } => {
                    sgd_step(weights.data_mut(), grad.weights.data(), &mut opt.weights, lr)?;
                    if let (Some(b), Some(gb), Some(ob)) = (bias.as_mut(), grad.bias.as_ref(), opt.bias.as_mut()) {
                        sgd_step(b.data_mut(), gb.data(), ob, lr)?;
                    }
                }
            }
        }
    }
    drop(epoch_masks.take());
    state.epoch += 1;

    let val_acc = evaluate(&state.network, &splits.val, exec)?;
    if state.best.as_ref().is_none_or(|b| val_acc > b.val_acc) {
        state.best = Some(BestSnapshot {
            epoch: state.epoch,
            val_acc,
            weights: state.network.export_selected(),
            biases: state
                .network
                .params()
                .iter()
                .map(|p| match &p.weights {
                    Weights::Dense { bias, .. } => bias.clone(),
                    Weights::Slot(_) => None,
                })
                .collect(),
            mean_abs_selected: state.network.is_slot().then(|| analysis::mean_abs_selected(&state.network)),
        });
    }

    let mut weight_change_pct = None;
    if state.network.is_slot() && state.epoch.is_multiple_of(EXPLORATION_WINDOW) {
        let current = state.network.select_gs();
        let record = ExplorationRecord::between(
            state.epoch - EXPLORATION_WINDOW,
            state.epoch,
            &state.exploration_ref,
            &current,
        )?;
        weight_change_pct = Some(record.overall * 100.0);
        state.exploration.push(record);
        state.exploration_ref = current;
    }

    state.elapsed_s += started.elapsed().as_secs_f64();
    let row = MetricsRow {
        epoch: state.epoch,
        lr,
        train_loss: (loss_sum / seen.max(1) as f64) as f32,
        train_acc: hits as f32 / seen.max(1) as f32,
        val_acc,
        test_acc: None,
        weight_change_pct,
        elapsed_s: state.elapsed_s,
    };
    state.metrics.rows.push(row.clone());
    Ok(row)
}

/// Advances `state` until `until` epochs are complete (capped at the
/// configured total), calling `on_epoch` after each one.
pub fn run_until(
    state: &mut Checkpoint,
    splits: &Splits,
    until: usize,
    mut on_epoch: impl FnMut(&Checkpoint, &MetricsRow),
) -> Result<()> {
    let until = until.min(state.config.total_epochs());
    while state.epoch < until {
        let row = one_epoch(state, splits)?;
        if let Some(digest) = &state.initial_digest {
            debug_assert_eq!(digest, &analysis::options_digest(&state.network), "options changed");
        }
        on_epoch(state, &row);
    }
    Ok(())
}

/// Evaluates the best-validation snapshot on the test set (once) and records
/// it on the final metrics row.
pub fn finish(mut state: Checkpoint, splits: &Splits, snapshots: Vec<Checkpoint>) -> Result<TrainOutcome> {
    let best = state
        .best
        .clone()
        .ok_or_else(|| Error::invalid("no completed epoch to evaluate"))?;
    let net = best.network(state.config.arch)?;
    let test_acc = evaluate(&net, &splits.test, state.config.exec())?;
    if let Some(last) = state.metrics.rows.last_mut() {
        last.test_acc = Some(test_acc);
    }
    Ok(TrainOutcome {
        metrics: state.metrics.clone(),
        test_acc,
        best_epoch: best.epoch,
        best_val_acc: best.val_acc,
        checkpoint: state,
        snapshots,
    })
}

/// Runs a prepared state to completion, keeping the requested snapshots.
pub fn run_to_end(
    mut state: Checkpoint,
    splits: &Splits,
    mut on_epoch: impl FnMut(&Checkpoint, &MetricsRow),
) -> Result<TrainOutcome> {
    let wanted = state.config.snapshot_epochs.clone();
    let mut snapshots = Vec::new();
    if wanted.contains(&state.epoch) {
        snapshots.push(state.clone());
    }
    let total = state.config.total_epochs();
    run_until(&mut state, splits, total, |s, row| {
        if wanted.contains(&s.epoch) {
            snapshots.push(s.clone());
        }
        on_epoch(s, row);
    })?;
    finish(state, splits, snapshots)
}

/// Trains a slot or baseline configuration on prepared data.
pub fn train_with(config: &TrainConfig, splits: &Splits) -> Result<TrainOutcome> {
    run_to_end(start(config)?, splits, |_, _| {})
}

/// Finetunes the selection held by `source` for `epochs` epochs.
pub fn finetune(source: &Checkpoint, epochs: usize, splits: &Splits) -> Result<TrainOutcome> {
    run_to_end(finetune_start(source, epochs)?, splits, |_, _| {})
}

/// Continues an interrupted run to its configured end.
pub fn resume(state: Checkpoint, splits: &Splits) -> Result<TrainOutcome> {
    run_to_end(state, splits, |_, _| {})
}

/// Loads the dataset for `config` and splits/normalizes it.
pub fn load_splits(config: &TrainConfig) -> Result<Splits> {
    let raw = match config.dataset() {
        DatasetName::Cifar10 => data::load_cifar10_dir(&config.data_dir)?,
        _ => data::load_mnist_dir(&config.data_dir)?,
    };
    Splits::prepare(raw, &config.split_spec())
}

// ---------------------------------------------------------------------------
// Run directory outputs

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const EXPLORATION_FILE: &str = "exploration.csv";
pub const CONFIG_FILE: &str = "config.json";

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn summary_line(test_acc: f32) -> String {
    format!("test_acc={test_acc:.6}")
}

fn write_histograms(dir: &Path, net: &Network, epoch: usize) -> Result<()> {
    for (i, layer) in net.slot_layers().enumerate() {
        let w = Histogram::selected_weights(layer, i, epoch);
        write_file(&dir.join(format!("hist_weights_{i}_{epoch}.csv")), &w.to_csv())?;
        let s = Histogram::scores(layer, i, epoch);
        write_file(&dir.join(format!("hist_scores_{i}_{epoch}.csv")), &s.to_csv())?;
    }
    Ok(())
}

/// Writes the configuration, metrics, checkpoint, exploration log,
/// histograms and the summary line into `dir`.
pub fn write_run_outputs(dir: &Path, outcome: &TrainOutcome, initial: Option<&Network>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let config = serde_json::to_string_pretty(&outcome.checkpoint.config).map_err(|e| Error::invalid(e.to_string()))?;
    write_file(&dir.join(CONFIG_FILE), &config)?;
    write_file(&dir.join(METRICS_FILE), &outcome.metrics.to_csv())?;
    outcome.checkpoint.save(&dir.join(CHECKPOINT_FILE))?;
    write_file(&dir.join(SUMMARY_FILE), &(summary_line(outcome.test_acc) + "\n"))?;
    let net = &outcome.checkpoint.network;
    if net.is_slot() {
        write_file(
            &dir.join(EXPLORATION_FILE),
            &analysis::exploration_csv(&outcome.checkpoint.exploration),
        )?;
        if let Some(init) = initial {
            write_histograms(dir, init, 0)?;
        }
        write_histograms(dir, net, outcome.checkpoint.epoch)?;
    }
    for snap in &outcome.snapshots {
        snap.save(&dir.join(format!("checkpoint_epoch{}.bin", snap.epoch)))?;
    }
    Ok(())
}

/// Full run from a configuration: loads data, trains (or finetunes when
/// `finetune_from` is set), writes outputs to `out_dir` when given.
pub fn train(config: &TrainConfig, mut on_epoch: impl FnMut(&MetricsRow)) -> Result<TrainOutcome> {
    let state = match &config.finetune_from {
        Some(path) => {
            let source = Checkpoint::load(path)?;
            let mut state = finetune_start(&source, config.finetune_epochs)?;
            state.config.finetune_from = Some(path.clone());
            state.config.data_dir = config.data_dir.clone();
            state.config.out_dir = config.out_dir.clone();
            state.config.deterministic = config.deterministic;
            state
        }
        None => start(config)?,
    };
    let splits = load_splits(&state.config)?;
    let initial = state.network.is_slot().then(|| state.network.clone());
    let outcome = run_to_end(state, &splits, |_, row| on_epoch(row))?;
    if let Some(dir) = &config.out_dir {
        write_run_outputs(dir, &outcome, initial.as_ref())?;
    }
    Ok(outcome)
}

//! Command-line front end of the `slotm` binary.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{self, Histogram, MicroConfig, MicroTask};
use crate::error::{Error, Result};
use crate::model::{Arch, Network, SlotOptions};
use crate::optim::{Mode, DEFAULT_RESTARTS};
use crate::slot::{ShareMode, SlotInit, WeightDist};
use crate::train::{self, Checkpoint, PsResample, TrainConfig};

#[derive(Parser, Debug)]
#[command(name = "slotm", version, about = "Train and inspect slot-machine networks")]
#[command(args_conflicts_with_subcommands = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write exploration.csv from a checkpoint and report a window mean.
    AnalyzeExploration(ExplorationArgs),
    /// Write weight, option and score histograms of a checkpoint.
    AnalyzeHist(HistArgs),
    /// Enumerate every configuration of a micro network and rank a GS run.
    Oracle(OracleArgs),
    /// Compare a slot network with its pruned-network expansion.
    ExpandCheck(ExpandArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ShareArg {
    None,
    Layer,
    Global,
}

impl From<ShareArg> for ShareMode {
    fn from(s: ShareArg) -> Self {
        match s {
            ShareArg::None => ShareMode::None,
            ShareArg::Layer => ShareMode::PerLayer,
            ShareArg::Global => ShareMode::Global,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DistArg {
    Uniform,
    Normal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ResampleArg {
    Batch,
    Epoch,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long, default_value = "lenet")]
    pub arch: Arch,
    #[arg(long, default_value = "slot_gs")]
    pub mode: Mode,
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub split_seed: Option<u64>,
    /// Score range multiplier; defaults to 0.1 for FC and 1.0 for conv layers.
    #[arg(long)]
    pub lambda: Option<f32>,
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f32,
    #[arg(long, value_enum, default_value = "uniform")]
    pub weight_dist: DistArg,
    #[arg(long, value_enum, default_value = "none")]
    pub share: ShareArg,
    #[arg(long)]
    pub sparse: bool,
    #[arg(long)]
    pub finetune_from: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub finetune_epochs: usize,
    #[arg(long, default_value = "data")]
    pub data_dir: PathBuf,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Single-threaded, bit-reproducible kernels.
    #[arg(long)]
    pub deterministic: bool,
    #[arg(long)]
    pub val_fraction: Option<f32>,
    #[arg(long)]
    pub lr: Option<f32>,
    #[arg(long)]
    pub weight_decay: Option<f32>,
    #[arg(long, default_value_t = train::DEFAULT_BATCH_SIZE)]
    pub batch_size: usize,
    #[arg(long, value_delimiter = ',')]
    pub restarts: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value = "batch")]
    pub ps_resample: ResampleArg,
    /// Also save checkpoints after these epochs (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub snapshot_epochs: Vec<usize>,
    #[arg(long)]
    pub quiet: bool,
}

impl TrainArgs {
    pub fn to_config(&self) -> TrainConfig {
        let mut c = TrainConfig::new(self.arch, self.mode, self.k);
        c.epochs = self.epochs;
        c.seed = self.seed;
        c.split_seed = self.split_seed.unwrap_or(0);
        c.lambda = self.lambda;
        c.gamma = self.gamma;
        c.weight_dist = match self.weight_dist {
            DistArg::Uniform => WeightDist::GlorotUniform,
            DistArg::Normal => WeightDist::GlorotNormal,
        };
        c.share = self.share.into();
        c.sparse = self.sparse;
        c.finetune_from = self.finetune_from.clone();
        c.finetune_epochs = self.finetune_epochs;
        c.data_dir = self.data_dir.clone();
        c.out_dir = self.out_dir.clone();
        c.deterministic = self.deterministic;
        c.val_fraction = self.val_fraction;
        c.lr = self.lr;
        c.weight_decay = self.weight_decay;
        c.batch_size = self.batch_size;
        c.restarts = self.restarts.clone().unwrap_or_else(|| DEFAULT_RESTARTS.to_vec());
        c.ps_resample = match self.ps_resample {
            ResampleArg::Batch => PsResample::PerBatch,
            ResampleArg::Epoch => PsResample::PerEpoch,
        };
        c.snapshot_epochs = self.snapshot_epochs.clone();
        c
    }
}

#[derive(Args, Debug)]
pub struct ExplorationArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub from: usize,
    #[arg(long, default_value_t = 200)]
    pub to: usize,
}

#[derive(Args, Debug)]
pub struct HistArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    /// Layer widths, input first.
    #[arg(long, value_delimiter = ',', default_value = "2,4,2")]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    #[arg(long, default_value_t = 300)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f32,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExpandArgs {
    #[arg(long, default_value = "lenet")]
    pub arch: Arch,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub batch: usize,
    /// Check this checkpoint's network instead of a fresh one.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn run_train(args: &TrainArgs) -> Result<()> {
    let config = args.to_config();
    let total = config.total_epochs();
    let quiet = args.quiet;
    let outcome = train::train(&config, |row| {
        if !quiet {
            eprintln!(
                "epoch {}/{} lr={:.5} loss={:.4} train_acc={:.4} val_acc={:.4}{}",
                row.epoch,
                total,
                row.lr,
                row.train_loss,
                row.train_acc,
                row.val_acc,
                row.weight_change_pct.map(|p| format!(" changed={p:.3}%")).unwrap_or_default()
            );
        }
    })?;
    if !quiet {
        eprintln!("best val_acc={:.4} at epoch {}", outcome.best_val_acc, outcome.best_epoch);
    }
    println!("{}", train::summary_line(outcome.test_acc));
    Ok(())
}

fn run_exploration(args: &ExplorationArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    create_dir(&args.out_dir)?;
    write(&args.out_dir.join(train::EXPLORATION_FILE), &analysis::exploration_csv(&ckpt.exploration))?;
    match analysis::mean_exploration(&ckpt.exploration, args.from, args.to) {
        Some(m) => println!("mean_changed_pct[{}..{}]={:.6}", args.from, args.to, m * 100.0),
        None => println!("no exploration records in epochs {}..{}", args.from, args.to),
    }
    Ok(())
}

fn run_hist(args: &HistArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    create_dir(&args.out_dir)?;
    let epoch = ckpt.epoch;
    for (i, layer) in ckpt.network.slot_layers().enumerate() {
        let dir = &args.out_dir;
        write(&dir.join(format!("hist_weights_{i}_{epoch}.csv")), &Histogram::selected_weights(layer, i, epoch).to_csv())?;
        write(&dir.join(format!("hist_options_{i}_{epoch}.csv")), &Histogram::all_options(layer, i, epoch).to_csv())?;
        write(&dir.join(format!("hist_scores_{i}_{epoch}.csv")), &Histogram::scores(layer, i, epoch).to_csv())?;
    }
    println!("mean_abs_selected={:.6}", analysis::mean_abs_selected(&ckpt.network));
    Ok(())
}

fn run_oracle(args: &OracleArgs) -> Result<()> {
    let config = MicroConfig::new(args.dims.clone(), args.k);
    let task = MicroTask::blobs(args.points, args.seed);
    let mut layers = config.init_layers(args.seed)?;
    let ranked = analysis::brute_force_oracle(&config, &layers, &task)?;
    let chosen = analysis::train_micro_gs(&mut layers, &task, args.steps, args.lr)?;
    let loss = analysis::micro_loss(&layers, &chosen, &task);
    let rank = analysis::rank_of(&ranked, loss);
    if let Some(dir) = &args.out_dir {
        create_dir(dir)?;
        write(
            &dir.join("oracle_ranking.csv"),
            &analysis::oracle_ranking_csv(&ranked, config.k, config.connections()),
        )?;
    }
    println!(
        "configurations={} best_loss={:.6} gs_loss={:.6} gs_rank={} gs_percentile={:.4}",
        ranked.len(),
        ranked[0].loss,
        loss,
        rank,
        rank as f64 / ranked.len() as f64
    );
    Ok(())
}

fn run_expand(args: &ExpandArgs) -> Result<()> {
    let net = match &args.checkpoint {
        Some(path) => Checkpoint::load(path)?.network,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            Network::slot(
                args.arch,
                &SlotOptions {
                    init: SlotInit::new(args.k),
                    sparse: false,
                },
                &mut rng,
            )?
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed.wrapping_add(1));
    let input = analysis::random_inputs(&net, args.batch, &mut rng);
    let diff = analysis::expansion_max_diff(&net, &input)?;
    let expanded = analysis::expand_to_pruned_network(&net)?;
    let units: usize = expanded.layers.iter().map(|l| l.dummy_units()).sum();
    println!("dummy_units={units} max_abs_diff={diff:e}");
    Ok(())
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        None => run_train(&cli.train),
        Some(Command::AnalyzeExploration(a)) => run_exploration(a),
        Some(Command::AnalyzeHist(a)) => run_hist(a),
        Some(Command::Oracle(a)) => run_oracle(a),
        Some(Command::ExpandCheck(a)) => run_expand(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

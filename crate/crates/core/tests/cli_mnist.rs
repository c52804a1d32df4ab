//! End-to-end runs through the command line entry point on MNIST.

mod support;

use std::fs;

use slotmachine::cli::cli_main;
use slotmachine::data::sequential_batches;
use slotmachine::kernels::{self, Exec};
use slotmachine::model::Arch;
use slotmachine::optim::Mode;
use slotmachine::train::{self, Checkpoint, MetricsLog, TrainConfig};

fn mean_loss(state: &Checkpoint, splits: &slotmachine::data::Splits) -> f64 {
    let net = &state.network;
    let masks = net.select_gs();
    let eff = net.effective(Some(&masks)).unwrap();
    let (mut total, mut n) = (0.0f64, 0usize);
    for (x, y) in sequential_batches(&splits.train, 1000) {
        let logits = net.logits(&x, &eff, Exec::Serial).unwrap();
        let (loss, _) = kernels::softmax_cross_entropy(&logits, &y).unwrap();
        total += loss as f64 * y.len() as f64;
        n += y.len();
    }
    total / n as f64
}

#[test]
fn one_epoch_lowers_training_loss() {
    let mut config = TrainConfig::new(Arch::Lenet, Mode::SlotGs, 2);
    config.epochs = Some(1);
    config.data_dir = support::data_dir();
    let splits = train::load_splits(&config).expect("MNIST under the data directory");
    let state = train::start(&config).unwrap();
    let before = mean_loss(&state, &splits);
    let out = train::run_to_end(state, &splits, |_, _| {}).unwrap();
    let after = out.metrics.rows[0].train_loss as f64;
    assert!(after < before, "train loss {after} not below initial {before}");
}

#[test]
fn train_then_analyze_through_cli() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let data = support::data_dir();
    let code = cli_main([
        "slotm",
        "--arch",
        "lenet",
        "--mode",
        "slot_gs",
        "--k",
        "2",
        "--epochs",
        "1",
        "--quiet",
        "--data-dir",
        data.to_str().unwrap(),
        "--out-dir",
        run.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);

    let metrics = MetricsLog::from_csv(&fs::read_to_string(run.join(train::METRICS_FILE)).unwrap()).unwrap();
    assert_eq!(metrics.rows.len(), 1);
    let summary = fs::read_to_string(run.join(train::SUMMARY_FILE)).unwrap();
    let acc: f32 = summary.trim().strip_prefix("test_acc=").unwrap().parse().unwrap();
    assert_eq!(metrics.rows[0].test_acc, Some(acc));
    assert!(acc > 0.5);
    let config: TrainConfig = serde_json::from_str(&fs::read_to_string(run.join(train::CONFIG_FILE)).unwrap()).unwrap();
    assert_eq!((config.arch, config.mode, config.k), (Arch::Lenet, Mode::SlotGs, 2));
    assert!(run.join("hist_weights_0_0.csv").exists() && run.join("hist_scores_2_1.csv").exists());

    let ckpt = run.join(train::CHECKPOINT_FILE);
    let state = Checkpoint::load(&ckpt).unwrap();
    assert!(state.is_complete());

    let hist = dir.path().join("hist");
    let args = ["slotm", "analyze-hist", "--checkpoint", ckpt.to_str().unwrap(), "--out-dir", hist.to_str().unwrap()];
    assert_eq!(cli_main(args), 0);
    for layer in 0..3 {
        for kind in ["weights", "options", "scores"] {
            let csv = fs::read_to_string(hist.join(format!("hist_{kind}_{layer}_1.csv"))).unwrap();
            assert_eq!(csv.lines().count(), 1 + slotmachine::analysis::HISTOGRAM_BINS);
        }
    }

    let explo = dir.path().join("explo");
    let args = ["slotm", "analyze-exploration", "--checkpoint", ckpt.to_str().unwrap(), "--out-dir", explo.to_str().unwrap()];
    assert_eq!(cli_main(args), 0);
    assert!(explo.join(train::EXPLORATION_FILE).exists());

    let args = ["slotm", "expand-check", "--checkpoint", ckpt.to_str().unwrap()];
    assert_eq!(cli_main(args), 0);
}

#[test]
fn auxiliary_commands_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("oracle");
    let args = ["slotm", "oracle", "--dims", "2,3,2", "--k", "2", "--steps", "50", "--out-dir", out.to_str().unwrap()];
    assert_eq!(cli_main(args), 0);
    let csv = fs::read_to_string(out.join("oracle_ranking.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4096);

    assert_eq!(cli_main(["slotm", "expand-check", "--arch", "conv2", "--k", "3"]), 0);
    assert_eq!(cli_main(["slotm", "--arch", "resnet"]), 2);
    assert_eq!(cli_main(["slotm", "--k", "0", "--data-dir", "/nonexistent"]), 1);
    assert_eq!(cli_main(["slotm", "--data-dir", "/nonexistent", "--epochs", "1"]), 1);
}

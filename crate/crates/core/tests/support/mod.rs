//! Shared fixtures and the fast property suites. Each `check_*` returns a
//! one-line summary on success and a description of the first violation
//! otherwise.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use slotmachine::analysis::{self, MicroConfig, MicroTask};
use slotmachine::data::{self, Dataset, DatasetName, Normalization, Splits};
use slotmachine::kernels;
use slotmachine::model::{Arch, Network, SlotOptions};
use slotmachine::optim::Mode;
use slotmachine::slot::{self, LayerKind, SelectionMask, ShareMode, SlotInit, SlotLayer, WeightDist};
use slotmachine::train::{self, Checkpoint, PsResample, TrainConfig};
use slotmachine::Tensor;

pub type Check = Result<String, String>;

/// Gradients below this magnitude are compared in absolute terms.
pub const GRAD_FLOOR: f64 = 1e-2;
pub const FD_TOLERANCE: f64 = 1e-3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(shape: &[usize], lo: f32, hi: f32, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(lo..=hi))
}

/// Random images labelled by the largest of ten fixed random projections,
/// so that the labels are learnable.
pub fn synthetic_splits(arch: Arch, n_train: usize, n_val: usize, n_test: usize, seed: u64) -> Splits {
    let [c, h, w] = arch.input_shape();
    let dim = c * h * w;
    let mut r = rng(seed);
    let proj: Vec<f32> = (0..10 * dim).map(|_| r.random_range(-1.0f32..1.0)).collect();
    let mut make = |n: usize| {
        let images = uniform(&[n, c, h, w], -1.0, 1.0, &mut r);
        let labels = images
            .data()
            .chunks_exact(dim)
            .map(|img| {
                (0..10)
                    .map(|k| img.iter().zip(&proj[k * dim..(k + 1) * dim]).map(|(a, b)| a * b).sum::<f32>())
                    .enumerate()
                    .fold((0, f32::NEG_INFINITY), |best, (k, v)| if v > best.1 { (k, v) } else { best })
                    .0 as u8
            })
            .collect();
        Dataset::new(DatasetName::Synthetic, images, labels).unwrap()
    };
    Splits {
        train: make(n_train),
        val: make(n_val),
        test: make(n_test),
        normalization: Normalization {
            mean: vec![0.0; c],
            std: vec![1.0; c],
        },
    }
}

pub fn slot_net(arch: Arch, k: usize, seed: u64) -> Network {
    Network::slot(
        arch,
        &SlotOptions {
            init: SlotInit::new(k),
            sparse: false,
        },
        &mut rng(seed),
    )
    .unwrap()
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_FLOOR)
}

/// Central differences of `f` around `x` for every coordinate; returns the
/// largest relative error against `analytic`.
pub fn fd_max_err(x: &Tensor, analytic: &Tensor, h: f32, f: impl Fn(&Tensor) -> f64) -> f64 {
    assert_eq!(x.shape(), analytic.shape());
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += h;
        let mut minus = x.clone();
        minus.data_mut()[i] -= h;
        let numeric = (f(&plus) - f(&minus)) / (2.0 * h as f64);
        worst = worst.max(rel_err(analytic.data()[i] as f64, numeric));
    }
    worst
}

/// `Σ r ⊙ y` in f64.
pub fn project(y: &Tensor, r: &Tensor) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| *a as f64 * *b as f64).sum()
}

fn fd_gate(name: &str, err: f64, report: &mut Vec<String>) -> Result<(), String> {
    report.push(format!("{name}={err:.1e}"));
    if err <= FD_TOLERANCE {
        Ok(())
    } else {
        Err(format!("{name}: relative error {err:.3e} > {FD_TOLERANCE:e}"))
    }
}

/// Values whose pairwise gaps are at least `gap`, in random order.
pub fn separated_values(shape: &[usize], gap: f32, rng: &mut ChaCha8Rng) -> Tensor {
    use rand::seq::SliceRandom;
    let n: usize = shape.iter().product();
    let mut vals: Vec<f32> = (0..n).map(|i| (i as f32 - n as f32 / 2.0) * gap).collect();
    vals.shuffle(rng);
    Tensor::new(shape.to_vec(), vals).unwrap()
}

/// (a) every backward kernel against central finite differences.
pub fn check_a_backward_kernels() -> Check {
    let mut r = rng(11);
    let mut report = Vec::new();

    // Linear: the map is linear in each argument, so a wide step is exact.
    let x = uniform(&[4, 8], -1.0, 1.0, &mut r);
    let w = uniform(&[3, 8], -1.0, 1.0, &mut r);
    let b = uniform(&[3], -1.0, 1.0, &mut r);
    let g = uniform(&[4, 3], -1.0, 1.0, &mut r);
    let lg = kernels::linear_backward(&x, &w, &g, true).map_err(|e| e.to_string())?;
    let e = fd_max_err(&x, lg.input.as_ref().unwrap(), 0.25, |x| {
        project(&kernels::linear_forward(x, &w, Some(&b)).unwrap(), &g)
    });
    fd_gate("linear.input", e, &mut report)?;
    let e = fd_max_err(&w, &lg.weights, 0.25, |w| project(&kernels::linear_forward(&x, w, Some(&b)).unwrap(), &g));
    fd_gate("linear.weights", e, &mut report)?;
    let e = fd_max_err(&b, &lg.bias, 0.25, |b| project(&kernels::linear_forward(&x, &w, Some(b)).unwrap(), &g));
    fd_gate("linear.bias", e, &mut report)?;

    // Convolution.
    let x = uniform(&[2, 3, 8, 8], -1.0, 1.0, &mut r);
    let k = uniform(&[4, 3, 3, 3], -1.0, 1.0, &mut r);
    let g = uniform(&[2, 4, 8, 8], -1.0, 1.0, &mut r);
    let cg = kernels::conv2d_backward(&x, &k, &g, true).map_err(|e| e.to_string())?;
    let e = fd_max_err(&x, cg.input.as_ref().unwrap(), 0.25, |x| project(&kernels::conv2d_forward(x, &k).unwrap(), &g));
    fd_gate("conv.input", e, &mut report)?;
    let e = fd_max_err(&k, &cg.kernels, 0.25, |k| project(&kernels::conv2d_forward(&x, k).unwrap(), &g));
    fd_gate("conv.kernels", e, &mut report)?;

    // Max pooling: window entries are 0.1 apart, the step never reorders them.
    let x = separated_values(&[2, 3, 8, 8], 0.1, &mut r);
    let g = uniform(&[2, 3, 4, 4], -1.0, 1.0, &mut r);
    let (_, argmax) = kernels::maxpool2x2_forward(&x).map_err(|e| e.to_string())?;
    let gp = kernels::maxpool2x2_backward(&g, &argmax, x.shape()).map_err(|e| e.to_string())?;
    let e = fd_max_err(&x, &gp, 0.01, |x| project(&kernels::maxpool2x2_forward(x).unwrap().0, &g));
    fd_gate("maxpool", e, &mut report)?;

    // ReLU away from the kink.
    let x = Tensor::from_fn(&[4, 8], |_| {
        let m = r.random_range(0.1f32..1.0);
        if r.random_bool(0.5) { m } else { -m }
    });
    let g = uniform(&[4, 8], -1.0, 1.0, &mut r);
    let gr = kernels::relu_backward(&g, &x).map_err(|e| e.to_string())?;
    let e = fd_max_err(&x, &gr, 0.01, |x| project(&kernels::relu_forward(x), &g));
    fd_gate("relu", e, &mut report)?;

    // Dropout with a fixed mask (same generator seed on every call).
    let x = uniform(&[4, 16], -1.0, 1.0, &mut r);
    let g = uniform(&[4, 16], -1.0, 1.0, &mut r);
    let (_, mask) = kernels::dropout_forward(&x, 0.5, &mut rng(5), true).map_err(|e| e.to_string())?;
    let gd = kernels::dropout_backward(&g, mask.as_deref());
    let e = fd_max_err(&x, &gd, 0.25, |x| project(&kernels::dropout_forward(x, 0.5, &mut rng(5), true).unwrap().0, &g));
    fd_gate("dropout", e, &mut report)?;

    // Softmax cross-entropy.
    let logits = uniform(&[2, 5], -2.0, 2.0, &mut r);
    let labels = [1u8, 4];
    let (_, gl) = kernels::softmax_cross_entropy(&logits, &labels).map_err(|e| e.to_string())?;
    let e = fd_max_err(&logits, &gl, 0.02, |l| kernels::softmax_cross_entropy(l, &labels).unwrap().0 as f64);
    fd_gate("softmax_ce", e, &mut report)?;

    Ok(report.join(" "))
}

/// Two slot layers with a ReLU between them, used by the pre-activation check.
pub struct TinySlotNet {
    pub l1: SlotLayer,
    pub l2: SlotLayer,
    pub m1: SelectionMask,
    pub m2: SelectionMask,
    pub x: Tensor,
    pub labels: Vec<u8>,
}

impl TinySlotNet {
    pub fn new(seed: u64) -> Self {
        let mut r = rng(seed);
        let init = SlotInit::new(3);
        let l1 = SlotLayer::init(LayerKind::Linear { out_features: 5, in_features: 6 }, &init, &mut r).unwrap();
        let l2 = SlotLayer::init(LayerKind::Linear { out_features: 3, in_features: 5 }, &init, &mut r).unwrap();
        let m1 = l1.select_gs();
        let m2 = l2.select_gs();
        let x = uniform(&[4, 6], -2.0, 2.0, &mut r);
        TinySlotNet {
            l1,
            l2,
            m1,
            m2,
            x,
            labels: vec![0, 2, 1, 2],
        }
    }

    pub fn pre1(&self) -> Tensor {
        slot::slot_forward(&self.l1, &self.m1, &self.x).unwrap()
    }

    /// Loss as a function of the first layer's pre-activation, evaluated in
    /// f64 with plain loops.
    pub fn loss_from_pre1(&self, a1: &Tensor) -> f64 {
        let w2 = self.l2.effective_weights(&self.m2).unwrap();
        let (batch, hidden) = (a1.shape()[0], a1.shape()[1]);
        let classes = w2.shape()[0];
        let mut total = 0.0;
        for b in 0..batch {
            let h: Vec<f64> = a1.data()[b * hidden..(b + 1) * hidden].iter().map(|&v| (v as f64).max(0.0)).collect();
            let logits: Vec<f64> = (0..classes)
                .map(|o| (0..hidden).map(|i| w2.data()[o * hidden + i] as f64 * h[i]).sum())
                .collect();
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - logits[self.labels[b] as usize];
        }
        total / batch as f64
    }

    /// `∂L/∂a1` through the backward kernels.
    pub fn grad_pre1(&self) -> Tensor {
        let a1 = self.pre1();
        let h = kernels::relu_forward(&a1);
        let a2 = slot::slot_forward(&self.l2, &self.m2, &h).unwrap();
        let (_, g2) = kernels::softmax_cross_entropy(&a2, &self.labels).unwrap();
        let back = slot::slot_backward_scores(&self.l2, &self.m2, Some(&h), &g2).unwrap();
        kernels::relu_backward(&back.input, &a1).unwrap()
    }
}

/// (b) `∂L/∂a` by perturbing pre-activations, then exact assembly of the
/// score gradient from it.
pub fn check_b_preactivation() -> Check {
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for seed in 0..5 {
        let net = TinySlotNet::new(seed);
        let a1 = net.pre1();
        let analytic = net.grad_pre1();
        let h = 1e-3f32;
        for i in 0..a1.len() {
            // Skip coordinates whose perturbation would cross the ReLU kink.
            if a1.data()[i].abs() <= 2.0 * h {
                continue;
            }
            let mut plus = a1.clone();
            plus.data_mut()[i] += h;
            let mut minus = a1.clone();
            minus.data_mut()[i] -= h;
            let numeric = (net.loss_from_pre1(&plus) - net.loss_from_pre1(&minus)) / (2.0 * h as f64);
            worst = worst.max(rel_err(analytic.data()[i] as f64, numeric));
            checked += 1;
        }

        // Score gradient = (Σ_b ∂L/∂a · input) times each option, exactly.
        let sg = slot::slot_backward_scores(&net.l1, &net.m1, Some(&net.x), &analytic).map_err(|e| e.to_string())?;
        let w_eff = net.l1.effective_weights(&net.m1).unwrap();
        let gw = kernels::linear_backward(&net.x, &w_eff, &analytic, false).unwrap().weights;
        let k = net.l1.k();
        for (c, &g) in gw.data().iter().enumerate() {
            for j in 0..k {
                let expect = g * net.l1.options().data()[c * k + j];
                if sg.scores.data()[c * k + j].to_bits() != expect.to_bits() {
                    return Err(format!("score grad [{c},{j}] is not grad_w * option"));
                }
            }
        }
        // The weight gradient itself against a plain f64 sum.
        let (b, fin) = (net.x.shape()[0], net.x.shape()[1]);
        for o in 0..5 {
            for i in 0..fin {
                let naive: f64 = (0..b).map(|n| analytic.data()[n * 5 + o] as f64 * net.x.data()[n * fin + i] as f64).sum();
                if (naive - gw.data()[o * fin + i] as f64).abs() > 1e-5 {
                    return Err(format!("weight gradient [{o},{i}] differs from the batch sum"));
                }
            }
        }
    }
    if worst > FD_TOLERANCE {
        return Err(format!("pre-activation gradient relative error {worst:.3e}"));
    }
    Ok(format!("{checked} pre-activations, max rel err {worst:.1e}; score assembly exact"))
}

/// (c) expansion equivalence on every architecture at random initialization.
pub fn check_c_expansion() -> Check {
    let mut parts = Vec::new();
    for (i, arch) in Arch::ALL.into_iter().enumerate() {
        let net = slot_net(arch, 2, 40 + i as u64);
        let x = analysis::random_inputs(&net, 2, &mut rng(50 + i as u64));
        let diff = analysis::expansion_max_diff(&net, &x).map_err(|e| e.to_string())?;
        if diff > 1e-6 {
            return Err(format!("{}: expansion differs by {diff:e}", arch.name()));
        }
        parts.push(format!("{}={diff:.1e}", arch.name()));
    }
    Ok(parts.join(" "))
}

pub fn digest_variants() -> Vec<(&'static str, TrainConfig)> {
    let base = |mode: Mode, k: usize| {
        let mut c = TrainConfig::new(Arch::Lenet, mode, k);
        c.epochs = Some(3);
        c.batch_size = 64;
        c.seed = 3;
        c
    };
    let mut v = vec![
        ("gs", base(Mode::SlotGs, 4)),
        ("ps", base(Mode::SlotPs, 4)),
        ("ps_epoch", {
            let mut c = base(Mode::SlotPs, 4);
            c.ps_resample = PsResample::PerEpoch;
            c
        }),
        ("gs_sparse", {
            let mut c = base(Mode::SlotGs, 4);
            c.sparse = true;
            c
        }),
        ("ps_sparse", {
            let mut c = base(Mode::SlotPs, 2);
            c.sparse = true;
            c
        }),
        ("gs_layer_shared", {
            let mut c = base(Mode::SlotGs, 4);
            c.share = ShareMode::PerLayer;
            c
        }),
        ("gs_global_shared", {
            let mut c = base(Mode::SlotGs, 4);
            c.share = ShareMode::Global;
            c
        }),
        ("gs_normal", {
            let mut c = base(Mode::SlotGs, 4);
            c.weight_dist = WeightDist::GlorotNormal;
            c
        }),
    ];
    let mut conv = TrainConfig::new(Arch::Conv2, Mode::SlotGs, 2);
    conv.epochs = Some(3);
    conv.batch_size = 16;
    v.push(("conv2_gs_augment_dropout", conv));
    v
}

/// (d) option tensors are bit-identical after three epochs in every mode.
pub fn check_d_digest() -> Check {
    let lenet = synthetic_splits(Arch::Lenet, 256, 64, 64, 1);
    let conv = synthetic_splits(Arch::Conv2, 32, 16, 16, 2);
    let mut names = Vec::new();
    for (name, config) in digest_variants() {
        let splits = if config.arch == Arch::Lenet { &lenet } else { &conv };
        let before = analysis::options_digest(&train::build_model(&config).map_err(|e| e.to_string())?);
        let initial_scores: Vec<Tensor> = train::build_model(&config)
            .unwrap()
            .slot_layers()
            .map(|l| l.scores().clone())
            .collect();
        let out = train::train_with(&config, splits).map_err(|e| format!("{name}: {e}"))?;
        let after = analysis::options_digest(&out.checkpoint.network);
        if before != after || out.checkpoint.initial_digest.as_deref() != Some(before.as_str()) {
            return Err(format!("{name}: option digest changed during training"));
        }
        let moved = out
            .checkpoint
            .network
            .slot_layers()
            .zip(&initial_scores)
            .any(|(l, s)| l.scores() != s);
        if !moved {
            return Err(format!("{name}: scores did not change, the check would be vacuous"));
        }
        names.push(name);
    }
    Ok(format!("{} variants: {}", names.len(), names.join(",")))
}

/// (e) greedy selection lands in the top 10% of all configurations.
pub fn check_e_oracle() -> Check {
    let config = MicroConfig::new(vec![2, 4, 2], 2);
    let mut parts = Vec::new();
    for seed in 0..5 {
        let task = MicroTask::blobs(200, seed);
        let mut layers = config.init_layers(seed).map_err(|e| e.to_string())?;
        let ranked = analysis::brute_force_oracle(&config, &layers, &task).map_err(|e| e.to_string())?;
        if ranked.len() != 1 << 16 {
            return Err(format!("enumerated {} configurations, expected 65536", ranked.len()));
        }
        let chosen = analysis::train_micro_gs(&mut layers, &task, 300, 0.1).map_err(|e| e.to_string())?;
        let loss = analysis::micro_loss(&layers, &chosen, &task);
        if ranked[0].loss > loss {
            return Err(format!("seed {seed}: trained loss below the enumerated minimum"));
        }
        let frac = analysis::rank_of(&ranked, loss) as f64 / ranked.len() as f64;
        if frac > 0.10 {
            return Err(format!("seed {seed}: GS mask at percentile {:.2}%", frac * 100.0));
        }
        parts.push(format!("{:.2}%", frac * 100.0));
    }
    Ok(format!("GS percentiles {}", parts.join(" ")))
}

/// (f) sampled frequencies match the softmax within ±0.01 over 10^5 draws.
pub fn check_f_ps_frequencies() -> Check {
    let draws = 100_000;
    let mut r = rng(77);
    let rows: Vec<Vec<f32>> = vec![
        vec![0.0, 3f32.ln()],
        vec![0.3, -1.2, 2.0, 0.7],
        vec![5.0, 5.0, 5.0],
    ];
    let mut worst = 0.0f32;
    for row in rows {
        let k = row.len();
        let scores = Tensor::new(vec![1, k], row.clone()).unwrap();
        let probs = slot::softmax_probs(&row);
        let mut counts = vec![0usize; k];
        for _ in 0..draws {
            counts[slot::select_ps(&scores, &mut r).chosen()[0] as usize] += 1;
        }
        for (c, p) in counts.iter().zip(&probs) {
            let diff = (*c as f32 / draws as f32 - p).abs();
            worst = worst.max(diff);
            if diff > 0.01 {
                return Err(format!("scores {row:?}: frequency off by {diff}"));
            }
        }
    }
    Ok(format!("max |freq - p| = {worst:.4}"))
}

/// Trains `config` straight through and again with a save/load at
/// `interrupt`; both must agree bit for bit.
pub fn resume_matches(config: &TrainConfig, splits: &Splits, interrupt: usize, dir: &Path) -> Result<(), String> {
    let straight = train::train_with(config, splits).map_err(|e| e.to_string())?;
    let mut state = train::start(config).map_err(|e| e.to_string())?;
    train::run_until(&mut state, splits, interrupt, |_, _| {}).map_err(|e| e.to_string())?;
    let path: PathBuf = dir.join(format!("resume_{}_{}.bin", config.arch.name(), config.mode.name()));
    state.save(&path).map_err(|e| e.to_string())?;
    let loaded = Checkpoint::load(&path).map_err(|e| e.to_string())?;
    if loaded != state {
        return Err("checkpoint did not round-trip".into());
    }
    drop(state);
    let resumed = train::resume(loaded, splits).map_err(|e| e.to_string())?;
    let rows_match = straight.metrics.rows.len() == resumed.metrics.rows.len()
        && straight
            .metrics
            .rows
            .iter()
            .zip(&resumed.metrics.rows)
            .all(|(a, b)| a.same_values(b));
    if !rows_match {
        return Err(format!("{}: resumed metrics differ", config.mode.name()));
    }
    if straight.checkpoint.network != resumed.checkpoint.network
        || straight.checkpoint.optimizer != resumed.checkpoint.optimizer
        || straight.checkpoint.best != resumed.checkpoint.best
        || straight.test_acc.to_bits() != resumed.test_acc.to_bits()
    {
        return Err(format!("{}: resumed state differs", config.mode.name()));
    }
    Ok(())
}

/// (g) checkpoint round trip resumes bit-exactly in deterministic mode.
pub fn check_g_resume() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let lenet = synthetic_splits(Arch::Lenet, 256, 64, 64, 4);
    let mut cases = Vec::new();
    for mode in [Mode::SlotGs, Mode::SlotPs, Mode::Baseline] {
        let mut c = TrainConfig::new(Arch::Lenet, mode, if mode == Mode::Baseline { 1 } else { 4 });
        c.epochs = Some(6);
        c.batch_size = 64;
        c.seed = 9;
        resume_matches(&c, &lenet, 3, dir.path())?;
        cases.push(format!("lenet/{}", mode.name()));
    }
    let conv = synthetic_splits(Arch::Conv2, 32, 16, 16, 5);
    let mut c = TrainConfig::new(Arch::Conv2, Mode::SlotGs, 2);
    c.epochs = Some(3);
    c.batch_size = 16;
    resume_matches(&c, &conv, 1, dir.path())?;
    cases.push("conv2/slot_gs".into());
    Ok(format!("bit-exact resume: {}", cases.join(", ")))
}

/// (h) loaders reject malformed fixtures and round-trip valid ones.
pub fn check_h_loaders() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = dir.path();
    let write = |name: &str, bytes: &[u8]| {
        let path = p.join(name);
        std::fs::write(&path, bytes).unwrap();
        path
    };
    let mut r = rng(8);
    let (n, rows, cols) = (7, 5, 4);
    let pixels: Vec<u8> = (0..n * rows * cols).map(|_| r.random()).collect();
    let labels: Vec<u8> = (0..n).map(|_| r.random_range(0..10)).collect();

    let img_bytes = data::encode_idx_images(&pixels, n, rows, cols);
    let lbl_bytes = data::encode_idx_labels(&labels);
    let (px, n2, r2, c2) = data::parse_idx_images(&img_bytes, p).map_err(|e| e.to_string())?;
    if (px.as_slice(), n2, r2, c2) != (pixels.as_slice(), n, rows, cols) || data::encode_idx_images(&px, n2, r2, c2) != img_bytes {
        return Err("IDX images do not round-trip".into());
    }
    let lb = data::parse_idx_labels(&lbl_bytes, p).map_err(|e| e.to_string())?;
    if lb != labels || data::encode_idx_labels(&lb) != lbl_bytes {
        return Err("IDX labels do not round-trip".into());
    }
    let ds = data::load_mnist_idx(&write("img", &img_bytes), &write("lbl", &lbl_bytes)).map_err(|e| e.to_string())?;
    if ds.images.shape() != [n, 1, rows, cols] || ds.labels != labels || ds.images.data()[3] != pixels[3] as f32 / 255.0 {
        return Err("IDX file load does not match the fixture".into());
    }

    let mut bad_magic = img_bytes.clone();
    bad_magic[3] = 0x01;
    let mut bad_label = lbl_bytes.clone();
    bad_label[8] = 10;
    let rejects = [
        ("image magic", data::load_mnist_idx(&write("a", &bad_magic), &write("b", &lbl_bytes)).is_err()),
        ("truncated pixels", data::load_mnist_idx(&write("c", &img_bytes[..img_bytes.len() - 3]), &write("d", &lbl_bytes)).is_err()),
        ("truncated header", data::load_mnist_idx(&write("e", &img_bytes[..9]), &write("f", &lbl_bytes)).is_err()),
        ("label count", data::load_mnist_idx(&write("g", &img_bytes), &write("h", &data::encode_idx_labels(&labels[..n - 1]))).is_err()),
        ("label range", data::load_mnist_idx(&write("i", &img_bytes), &write("j", &bad_label)).is_err()),
        ("missing file", data::load_mnist_idx(&p.join("nope"), &p.join("nope2")).is_err()),
    ];

    let cifar_px: Vec<u8> = (0..3 * 3072).map(|_| r.random()).collect();
    let cifar_lbl = vec![0u8, 9, 4];
    let cifar = data::encode_cifar10(&cifar_lbl, &cifar_px);
    let (l, px) = data::parse_cifar10(&cifar, p).map_err(|e| e.to_string())?;
    if l != cifar_lbl || px != cifar_px || data::encode_cifar10(&l, &px) != cifar {
        return Err("CIFAR-10 does not round-trip".into());
    }
    let cds = data::load_cifar10(&[write("cifar.bin", &cifar)]).map_err(|e| e.to_string())?;
    if cds.images.shape() != [3, 3, 32, 32] {
        return Err("CIFAR-10 load has the wrong shape".into());
    }
    let mut cifar_bad = cifar.clone();
    cifar_bad[slotmachine::data::CIFAR_RECORD_BYTES] = 200;
    let cifar_rejects = [
        ("cifar length", data::load_cifar10(&[write("k", &cifar[..cifar.len() - 1])]).is_err()),
        ("cifar label", data::load_cifar10(&[write("l", &cifar_bad)]).is_err()),
        ("cifar empty", data::load_cifar10(&[write("m", &[])]).is_err()),
    ];
    for (what, rejected) in rejects.iter().chain(&cifar_rejects) {
        if !rejected {
            return Err(format!("malformed fixture accepted: {what}"));
        }
    }
    Ok(format!("round trips ok, {} malformed fixtures rejected", rejects.len() + cifar_rejects.len()))
}

/// Directory holding the MNIST (and optionally CIFAR-10) files.
pub fn data_dir() -> PathBuf {
    std::env::var_os("SLOTMACHINE_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

pub fn dataset_name(arch: Arch) -> DatasetName {
    if arch.is_mnist() {
        DatasetName::Mnist
    } else {
        DatasetName::Cifar10
    }
}

//! Diagnostics and verification oracles: selection drift between epochs,
//! weight and score histograms, exhaustive enumeration of micro networks,
//! the pruned-network expansion of a slot network, and sparsity.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernels;
use crate::model::{Network, Op};
use crate::optim::{sgd_step, SgdState, MOMENTUM};
use crate::slot::{LayerKind, SelectionMask, SlotInit, SlotLayer};
use crate::tensor::Tensor;

// ---------------------------------------------------------------------------
// Selection drift

/// Fraction of connections whose selected option differs between two masks.
pub fn weight_change_fraction(a: &SelectionMask, b: &SelectionMask) -> Result<f32> {
    if a.len() != b.len() || a.k() != b.k() {
        return Err(Error::ShapeMismatch {
            op: "weight_change_fraction",
            left: vec![a.len(), a.k()],
            right: vec![b.len(), b.k()],
        });
    }
    Ok(count_changed(a, b) as f32 / a.len().max(1) as f32)
}

fn count_changed(a: &SelectionMask, b: &SelectionMask) -> usize {
    a.chosen().iter().zip(b.chosen()).filter(|(x, y)| x != y).count()
}

/// Highest-score selection drift between two epochs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplorationRecord {
    pub from_epoch: usize,
    pub to_epoch: usize,
    pub per_layer: Vec<f32>,
    /// Changed connections over all connections.
    pub overall: f32,
}

impl ExplorationRecord {
    pub fn between(from_epoch: usize, to_epoch: usize, before: &[SelectionMask], after: &[SelectionMask]) -> Result<Self> {
        if before.len() != after.len() {
            return Err(Error::ShapeMismatch {
                op: "ExplorationRecord::between",
                left: vec![before.len()],
                right: vec![after.len()],
            });
        }
        let per_layer = before
            .iter()
            .zip(after)
            .map(|(a, b)| weight_change_fraction(a, b))
            .collect::<Result<Vec<_>>>()?;
        let changed: usize = before.iter().zip(after).map(|(a, b)| count_changed(a, b)).sum();
        let total: usize = before.iter().map(SelectionMask::len).sum();
        Ok(ExplorationRecord {
            from_epoch,
            to_epoch,
            per_layer,
            overall: changed as f32 / total.max(1) as f32,
        })
    }
}

pub fn exploration_csv(records: &[ExplorationRecord]) -> String {
    let layers = records.first().map_or(0, |r| r.per_layer.len());
    let mut s = String::from("from_epoch,to_epoch,overall");
    for i in 0..layers {
        let _ = write!(s, ",layer{i}");
    }
    s.push('\n');
    for r in records {
        let _ = write!(s, "{},{},{}", r.from_epoch, r.to_epoch, r.overall);
        for v in &r.per_layer {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

/// Mean of `overall` over records ending inside `[from, to]`.
pub fn mean_exploration(records: &[ExplorationRecord], from: usize, to: usize) -> Option<f32> {
    let vals: Vec<f32> = records
        .iter()
        .filter(|r| r.to_epoch >= from && r.to_epoch <= to)
        .map(|r| r.overall)
        .collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f32>() / vals.len() as f32)
}

// ---------------------------------------------------------------------------
// Histograms, digest, magnitudes

pub const HISTOGRAM_BINS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Population {
    SelectedWeights,
    AllOptions,
    Scores,
}

impl Population {
    pub fn name(self) -> &'static str {
        match self {
            Population::SelectedWeights => "selected_weights",
            Population::AllOptions => "all_options",
            Population::Scores => "scores",
        }
    }
}

/// Fixed-bin histogram; values outside the range land in the end bins, so
/// the counts always sum to the population size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub population: Population,
    pub layer: usize,
    pub epoch: usize,
    pub edges: Vec<f32>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn build(population: Population, layer: usize, epoch: usize, values: &[f32], lo: f32, hi: f32, bins: usize) -> Result<Self> {
        if bins == 0 || lo >= hi || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid(format!("bad histogram range ({lo}, {hi}) with {bins} bins")));
        }
        let width = (hi - lo) as f64 / bins as f64;
        let edges = (0..=bins).map(|i| (lo as f64 + i as f64 * width) as f32).collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            let pos = ((v as f64 - lo as f64) / width).floor();
            let bin = if pos.is_nan() { 0 } else { pos.clamp(0.0, (bins - 1) as f64) as usize };
            counts[bin] += 1;
        }
        Ok(Histogram {
            population,
            layer,
            epoch,
            edges,
            counts,
        })
    }

    /// Highest-score weights over `(-σ, σ)` of the layer.
    pub fn selected_weights(layer: &SlotLayer, id: usize, epoch: usize) -> Histogram {
        let sigma = layer.kind().glorot_std();
        Self::build(Population::SelectedWeights, id, epoch, layer.export_selected().data(), -sigma, sigma, HISTOGRAM_BINS)
            .expect("glorot range is non-empty")
    }

    pub fn all_options(layer: &SlotLayer, id: usize, epoch: usize) -> Histogram {
        let sigma = layer.kind().glorot_std();
        Self::build(Population::AllOptions, id, epoch, layer.options().data(), -sigma, sigma, HISTOGRAM_BINS)
            .expect("glorot range is non-empty")
    }

    /// Scores over their own observed range.
    pub fn scores(layer: &SlotLayer, id: usize, epoch: usize) -> Histogram {
        let data = layer.scores().data();
        let (mut lo, mut hi) = data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if !(lo.is_finite() && hi.is_finite()) {
            (lo, hi) = (-1.0, 1.0);
        } else if lo >= hi {
            let pad = 0.5f32.max(lo.abs() * 1e-3);
            lo -= pad;
            hi += pad;
        }
        Self::build(Population::Scores, id, epoch, data, lo, hi, HISTOGRAM_BINS).expect("range is finite and non-empty")
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("population,layer,epoch,bin_lo,bin_hi,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                self.population.name(),
                self.layer,
                self.epoch,
                self.edges[i],
                self.edges[i + 1],
                c
            );
        }
        s
    }
}

/// Hex SHA-256 over the shapes and bit patterns of every option tensor.
pub fn options_digest(net: &Network) -> String {
    let mut h = Sha256::new();
    for layer in net.slot_layers() {
        let t = layer.options();
        h.update((t.shape().len() as u64).to_le_bytes());
        for &d in t.shape() {
            h.update((d as u64).to_le_bytes());
        }
        for v in t.data() {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Mean |w| over the highest-score weights of all slot layers.
pub fn mean_abs_selected(net: &Network) -> f32 {
    let (sum, n) = net.slot_layers().fold((0.0f64, 0usize), |(s, n), l| {
        let w = l.export_selected();
        (s + w.data().iter().map(|v| v.abs() as f64).sum::<f64>(), n + w.len())
    });
    (sum / n.max(1) as f64) as f32
}

// ---------------------------------------------------------------------------
// Sparsity

/// Fraction of connections whose highest-score option is the pinned zero.
pub fn sparsity_report(layer: &SlotLayer) -> Result<f32> {
    if !layer.is_sparse_pinned() {
        return Err(Error::invalid("sparsity is only defined for layers with a pinned zero option"));
    }
    let mask = layer.select_gs();
    let zeros = mask.chosen().iter().filter(|&&c| c == 0).count();
    Ok(zeros as f32 / mask.len().max(1) as f32)
}

/// Sparsity over every pinned layer of a network, weighted by connections.
pub fn network_sparsity(net: &Network) -> Result<f32> {
    let mut zeros = 0.0f64;
    let mut total = 0usize;
    for layer in net.slot_layers() {
        zeros += sparsity_report(layer)? as f64 * layer.connections() as f64;
        total += layer.connections();
    }
    if total == 0 {
        return Err(Error::invalid("network has no slot layers"));
    }
    Ok((zeros / total as f64) as f32)
}

// ---------------------------------------------------------------------------
// Exhaustive enumeration on a micro task

/// Upper bound on the number of enumerated configurations.
pub const MAX_CONFIGURATIONS: u64 = 1 << 20;

/// Two-class points in the plane.
#[derive(Clone, Debug, PartialEq)]
pub struct MicroTask {
    pub points: Vec<[f32; 2]>,
    pub labels: Vec<u8>,
}

impl MicroTask {
    /// `n` points split evenly between Gaussian blobs centred at
    /// `±(1.5, 1.0)` with standard deviation 0.5.
    pub fn blobs(n: usize, seed: u64) -> MicroTask {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0f32, 0.5).expect("positive std");
        let (points, labels) = (0..n)
            .map(|i| {
                let label = (i % 2) as u8;
                let sign = if label == 0 { 1.0 } else { -1.0 };
                ([sign * 1.5 + noise.sample(&mut rng), sign * 1.0 + noise.sample(&mut rng)], label)
            })
            .unzip();
        MicroTask { points, labels }
    }

    pub fn inputs(&self) -> Tensor {
        Tensor::new(vec![self.points.len(), 2], self.points.iter().flatten().copied().collect())
            .expect("one row per point")
    }
}

/// Fully connected bias-free ReLU network with widths `dims` (input first).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicroConfig {
    pub dims: Vec<usize>,
    pub k: usize,
}

impl MicroConfig {
    pub fn new(dims: Vec<usize>, k: usize) -> Self {
        MicroConfig { dims, k }
    }

    pub fn kinds(&self) -> Vec<LayerKind> {
        self.dims
            .windows(2)
            .map(|w| LayerKind::Linear {
                in_features: w[0],
                out_features: w[1],
            })
            .collect()
    }

    pub fn connections(&self) -> usize {
        self.dims.windows(2).map(|w| w[0] * w[1]).sum()
    }

    /// `K^n`, or an error beyond [`MAX_CONFIGURATIONS`].
    pub fn configurations(&self) -> Result<u64> {
        let n = u32::try_from(self.connections()).map_err(|_| Error::invalid("too many connections"))?;
        (self.k as u64)
            .checked_pow(n)
            .filter(|&c| c <= MAX_CONFIGURATIONS)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "K^n = {}^{} exceeds the enumeration limit of {MAX_CONFIGURATIONS}",
                    self.k,
                    self.connections()
                ))
            })
    }

    fn validate(&self) -> Result<()> {
        if self.dims.len() < 2 || self.dims.contains(&0) || self.k < 1 {
            return Err(Error::invalid("micro network needs at least two non-zero widths and K >= 1"));
        }
        if self.dims[0] != 2 || *self.dims.last().expect("checked length") < 2 {
            return Err(Error::invalid("micro network maps 2-D points to at least 2 classes"));
        }
        Ok(())
    }

    pub fn init_layers(&self, seed: u64) -> Result<Vec<SlotLayer>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.kinds()
            .into_iter()
            .map(|kind| SlotLayer::init(kind, &SlotInit::new(self.k), &mut rng))
            .collect()
    }
}

/// Splits a configuration index into per-connection choices, first
/// connection in the least significant digit.
pub fn decode_configuration(mut index: u64, k: usize, connections: usize) -> Vec<u32> {
    (0..connections)
        .map(|_| {
            let d = (index % k as u64) as u32;
            index /= k as u64;
            d
        })
        .collect()
}

pub fn encode_configuration(chosen: &[u32], k: usize) -> u64 {
    chosen.iter().rev().fold(0u64, |acc, &d| acc * k as u64 + d as u64)
}

/// Mean cross-entropy of the micro network for one choice per connection,
/// computed in f64.
pub fn micro_loss(layers: &[SlotLayer], chosen: &[u32], task: &MicroTask) -> f64 {
    let mut weights: Vec<Vec<f64>> = Vec::with_capacity(layers.len());
    let mut offset = 0;
    for l in layers {
        let k = l.k();
        let opts = l.options().data();
        let n = l.connections();
        weights.push(
            (0..n)
                .map(|c| opts[c * k + chosen[offset + c] as usize] as f64)
                .collect(),
        );
        offset += n;
    }
    let mut total = 0.0;
    let mut h: Vec<f64> = Vec::new();
    let mut next: Vec<f64> = Vec::new();
    for (p, &label) in task.points.iter().zip(&task.labels) {
        h.clear();
        h.extend(p.iter().map(|&v| v as f64));
        for (li, (l, w)) in layers.iter().zip(&weights).enumerate() {
            let LayerKind::Linear { out_features, in_features } = l.kind() else {
                unreachable!("micro networks are fully connected")
            };
            next.clear();
            next.extend((0..out_features).map(|o| {
                let a: f64 = (0..in_features).map(|i| w[o * in_features + i] * h[i]).sum();
                if li + 1 < layers.len() { a.max(0.0) } else { a }
            }));
            std::mem::swap(&mut h, &mut next);
        }
        let max = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + h.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - h[label as usize];
    }
    total / task.points.len().max(1) as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankedConfiguration {
    pub index: u64,
    pub loss: f64,
}

/// Every configuration of the micro network with its training loss, sorted
/// by loss then index.
pub fn brute_force_oracle(config: &MicroConfig, layers: &[SlotLayer], task: &MicroTask) -> Result<Vec<RankedConfiguration>> {
    config.validate()?;
    let total = config.configurations()?;
    let n = config.connections();
    if layers.iter().map(SlotLayer::connections).sum::<usize>() != n || layers.iter().any(|l| l.k() != config.k) {
        return Err(Error::invalid("layers do not match the micro configuration"));
    }
    let mut ranked: Vec<RankedConfiguration> = (0..total)
        .into_par_iter()
        .map(|index| RankedConfiguration {
            index,
            loss: micro_loss(layers, &decode_configuration(index, config.k, n), task),
        })
        .collect();
    ranked.sort_by(|a, b| a.loss.total_cmp(&b.loss).then(a.index.cmp(&b.index)));
    Ok(ranked)
}

/// Number of configurations with strictly lower loss.
pub fn rank_of(ranked: &[RankedConfiguration], loss: f64) -> usize {
    ranked.partition_point(|r| r.loss < loss)
}

pub fn oracle_ranking_csv(ranked: &[RankedConfiguration], k: usize, connections: usize) -> String {
    let mut s = String::from("rank,index,loss,choices\n");
    for (i, r) in ranked.iter().enumerate() {
        let digits: String = decode_configuration(r.index, k, connections)
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(s, "{i},{},{},{digits}", r.index, r.loss);
    }
    s
}

/// Greedy-selection training of the micro network on the full task with
/// straight-through score gradients. Returns the final highest-score
/// choices, concatenated over layers.
pub fn train_micro_gs(layers: &mut [SlotLayer], task: &MicroTask, steps: usize, lr: f32) -> Result<Vec<u32>> {
    let x = task.inputs();
    let mut states = layers
        .iter()
        .enumerate()
        .map(|(i, l)| SgdState::new(format!("micro layer {i}"), l.scores().len(), MOMENTUM, 0.0))
        .collect::<Result<Vec<_>>>()?;
    for _ in 0..steps {
        let masks: Vec<SelectionMask> = layers.iter().map(SlotLayer::select_gs).collect();
        let weights = layers
            .iter()
            .zip(&masks)
            .map(|(l, m)| l.effective_weights(m))
            .collect::<Result<Vec<_>>>()?;
        let mut inputs = Vec::with_capacity(layers.len());
        let mut pre = Vec::with_capacity(layers.len());
        let mut h = x.clone();
        for (i, w) in weights.iter().enumerate() {
            let a = kernels::linear_forward(&h, w, None)?;
            inputs.push(h);
            h = if i + 1 < weights.len() { kernels::relu_forward(&a) } else { a.clone() };
            pre.push(a);
        }
        let (_, mut g) = kernels::softmax_cross_entropy(&h, &task.labels)?;
        for i in (0..layers.len()).rev() {
            if i + 1 < layers.len() {
                g = kernels::relu_backward(&g, &pre[i])?;
            }
            let lg = kernels::linear_backward(&inputs[i], &weights[i], &g, i > 0)?;
            let sg = layers[i].score_grads(&lg.weights)?;
            sgd_step(layers[i].scores_mut(), sg.data(), &mut states[i], lr)?;
            if let Some(gi) = lg.input {
                g = gi;
            }
        }
    }
    Ok(layers.iter().flat_map(|l| l.select_gs().chosen().to_vec()).collect())
}

// ---------------------------------------------------------------------------
// Pruned-network expansion

/// One slot layer rewritten as a dense layer followed by a layer of `K·c`
/// identity units: unit `(c, k)` carries option `k` of connection `c` times
/// its input, and the pruning mask keeps exactly one unit per connection
/// feeding the output.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpandedLayer {
    pub kind: LayerKind,
    pub k: usize,
    /// Input-to-dummy weights, `[c, K]`.
    pub path_weights: Vec<f64>,
    /// Dummy-to-output mask, `[c, K]`.
    pub keep: Vec<bool>,
}

impl ExpandedLayer {
    pub fn dummy_units(&self) -> usize {
        self.path_weights.len()
    }

    pub fn kept_paths(&self) -> usize {
        self.keep.iter().filter(|&&b| b).count()
    }

    fn forward(&self, x: &[f64], in_shape: &[usize]) -> (Vec<f64>, Vec<usize>) {
        let k = self.k;
        // Every path is evaluated; pruned ones contribute through a zero mask.
        let path = |c: usize, v: f64| -> f64 {
            (0..k)
                .map(|j| {
                    let unit = self.path_weights[c * k + j] * v;
                    if self.keep[c * k + j] { unit } else { 0.0 }
                })
                .sum()
        };
        match self.kind {
            LayerKind::Linear { out_features, in_features } => {
                let y = (0..out_features)
                    .map(|o| (0..in_features).map(|i| path(o * in_features + i, x[i])).sum())
                    .collect();
                (y, vec![out_features])
            }
            LayerKind::Conv { out_channels, in_channels } => {
                let (h, w) = (in_shape[1], in_shape[2]);
                let mut y = vec![0.0; out_channels * h * w];
                for co in 0..out_channels {
                    for ci in 0..in_channels {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let c = ((co * in_channels + ci) * 3 + ky) * 3 + kx;
                                for oy in 0..h {
                                    let iy = oy as isize + ky as isize - 1;
                                    if iy < 0 || iy >= h as isize {
                                        continue;
                                    }
                                    for ox in 0..w {
                                        let ix = ox as isize + kx as isize - 1;
                                        if ix < 0 || ix >= w as isize {
                                            continue;
                                        }
                                        let v = x[(ci * h + iy as usize) * w + ix as usize];
                                        y[(co * h + oy) * w + ox] += path(c, v);
                                    }
                                }
                            }
                        }
                    }
                }
                (y, vec![out_channels, h, w])
            }
        }
    }
}

/// Slot network rewritten with dummy identity layers and a pruning mask.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpandedNetwork {
    pub ops: Vec<Op>,
    pub layers: Vec<ExpandedLayer>,
    pub input_shape: [usize; 3],
}

/// Expansion of one slot layer; the kept path of each connection is its
/// highest-score option.
pub fn expand_layer(layer: &SlotLayer) -> Result<ExpandedLayer> {
    if !layer.options().all_finite() {
        return Err(Error::invalid("cannot expand a layer with non-finite options"));
    }
    let k = layer.k();
    let keep = layer
        .select_gs()
        .chosen()
        .iter()
        .flat_map(|&sel| (0..k).map(move |j| j == sel as usize))
        .collect();
    Ok(ExpandedLayer {
        kind: layer.kind(),
        k,
        path_weights: layer.options().data().iter().map(|&v| v as f64).collect(),
        keep,
    })
}

/// Builds the expansion of a slot network whose kept paths follow the
/// highest scores.
pub fn expand_to_pruned_network(net: &Network) -> Result<ExpandedNetwork> {
    if !net.is_slot() {
        return Err(Error::invalid("expansion needs a slot network"));
    }
    Ok(ExpandedNetwork {
        ops: net.ops().to_vec(),
        layers: net.slot_layers().map(expand_layer).collect::<Result<Vec<_>>>()?,
        input_shape: net.arch().input_shape(),
    })
}

impl ExpandedNetwork {
    /// Evaluation-mode logits computed in f64, one example at a time.
    pub fn forward(&self, input: &Tensor) -> Result<Vec<Vec<f64>>> {
        let [c, h, w] = self.input_shape;
        if input.rank() != 4 || input.shape()[1..] != [c, h, w] {
            return Err(Error::ShapeMismatch {
                op: "ExpandedNetwork::forward",
                left: input.shape().to_vec(),
                right: vec![c, h, w],
            });
        }
        let per = c * h * w;
        Ok(input
            .data()
            .chunks_exact(per)
            .map(|example| self.forward_one(example))
            .collect())
    }

    fn forward_one(&self, example: &[f32]) -> Vec<f64> {
        let mut x: Vec<f64> = example.iter().map(|&v| v as f64).collect();
        let mut shape = self.input_shape.to_vec();
        for op in &self.ops {
            match *op {
                Op::Param(i) => {
                    let (y, s) = self.layers[i].forward(&x, &shape);
                    x = y;
                    shape = s;
                }
                Op::Relu => x.iter_mut().for_each(|v| *v = v.max(0.0)),
                Op::MaxPool => {
                    let (c, h, w) = (shape[0], shape[1] / 2, shape[2] / 2);
                    let src = &x;
                    let y = (0..c * h * w)
                        .map(|idx| {
                            let (ch, oy, ox) = (idx / (h * w), idx / w % h, idx % w);
                            let at = |dy: usize, dx: usize| src[(ch * shape[1] + 2 * oy + dy) * shape[2] + 2 * ox + dx];
                            at(0, 0).max(at(0, 1)).max(at(1, 0)).max(at(1, 1))
                        })
                        .collect();
                    x = y;
                    shape = vec![c, h, w];
                }
                Op::Flatten => shape = vec![x.len()],
                Op::Dropout(_) => {}
            }
        }
        x
    }
}

/// Largest absolute difference between the expanded network's logits and
/// the slot network's highest-score forward on `input`.
pub fn expansion_max_diff(net: &Network, input: &Tensor) -> Result<f64> {
    let expanded = expand_to_pruned_network(net)?;
    let reference = expanded.forward(input)?;
    let masks = net.select_gs();
    let eff = net.effective(Some(&masks))?;
    let logits = net.logits(input, &eff, kernels::Exec::Serial)?;
    let classes = logits.shape()[1];
    Ok(logits
        .data()
        .chunks_exact(classes)
        .zip(&reference)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| (x as f64 - y).abs()))
        .fold(0.0, f64::max))
}

/// Uniform inputs in `[-1, 1]` shaped for `net`.
pub fn random_inputs<R: Rng + ?Sized>(net: &Network, batch: usize, rng: &mut R) -> Tensor {
    let [c, h, w] = net.arch().input_shape();
    Tensor::from_fn(&[batch, c, h, w], |_| rng.random_range(-1.0f32..=1.0))
}

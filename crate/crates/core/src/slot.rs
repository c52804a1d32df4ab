//! Slot layers: every connection owns `K` fixed random weight options and one
//! trainable quality score per option.
//!
//! Options and scores are stored with the option axis last, so connection `c`
//! occupies `[c * K, (c + 1) * K)` in both arrays. The connection order is the
//! row-major order of the dense weight tensor (`[out, in]` for fully connected
//! layers, `[out, in, 3, 3]` for convolutions).
//!
//! Selection picks one option per connection. The forward pass then runs the
//! ordinary dense kernel on the gathered weights. The backward pass uses the
//! straight-through rule: the selection is treated as the identity, so the
//! gradient for score `k` of connection `c` is the dense weight gradient of
//! `c` multiplied by option `k`. Every option of every connection receives a
//! gradient on every step, not only the selected one.

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{self, KSIZE};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Linear { out_features: usize, in_features: usize },
    /// 3x3 convolution.
    Conv { out_channels: usize, in_channels: usize },
}

impl LayerKind {
    pub fn fan_in(&self) -> usize {
        match *self {
            LayerKind::Linear { in_features, .. } => in_features,
            LayerKind::Conv { in_channels, .. } => in_channels * KSIZE * KSIZE,
        }
    }

    pub fn fan_out(&self) -> usize {
        match *self {
            LayerKind::Linear { out_features, .. } => out_features,
            LayerKind::Conv { out_channels, .. } => out_channels * KSIZE * KSIZE,
        }
    }

    /// Shape of the dense weight tensor this layer produces.
    pub fn weight_shape(&self) -> Vec<usize> {
        match *self {
            LayerKind::Linear { out_features, in_features } => vec![out_features, in_features],
            LayerKind::Conv { out_channels, in_channels } => vec![out_channels, in_channels, KSIZE, KSIZE],
        }
    }

    pub fn connections(&self) -> usize {
        self.weight_shape().iter().product()
    }

    pub fn is_conv(&self) -> bool {
        matches!(self, LayerKind::Conv { .. })
    }

    /// Standard deviation of the Glorot normal distribution,
    /// `sqrt(2 / (fan_in + fan_out))`.
    pub fn glorot_std(&self) -> f32 {
        (2.0 / (self.fan_in() + self.fan_out()) as f64).sqrt() as f32
    }

    /// Default score-range multiplier: 0.1 for fully connected layers, 1 for
    /// convolutions.
    pub fn default_lambda(&self) -> f32 {
        if self.is_conv() {
            1.0
        } else {
            0.1
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightDist {
    /// `U(-σ, σ)` with σ the Glorot normal standard deviation.
    #[default]
    GlorotUniform,
    /// `N(0, σ)`; used for the weight-distribution ablation.
    GlorotNormal,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShareMode {
    #[default]
    None,
    /// One K-vector of options reused by every connection in a layer.
    PerLayer,
    /// One K-vector reused by every connection in the network.
    Global,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotInit {
    pub k: usize,
    pub weight_dist: WeightDist,
    /// Score range multiplier; `None` picks the per-kind default.
    pub lambda: Option<f32>,
    /// Offset of the score range.
    pub gamma: f32,
    pub share_mode: ShareMode,
}

impl SlotInit {
    pub fn new(k: usize) -> Self {
        SlotInit {
            k,
            weight_dist: WeightDist::GlorotUniform,
            lambda: None,
            gamma: 0.0,
            share_mode: ShareMode::None,
        }
    }
}

/// One option index per connection.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionMask {
    chosen: Vec<u32>,
    k: usize,
}

impl SelectionMask {
    pub fn new(chosen: Vec<u32>, k: usize) -> Result<Self> {
        if let Some(&bad) = chosen.iter().find(|&&c| c as usize >= k) {
            return Err(Error::SelectionOutOfRange { index: bad as usize, k });
        }
        Ok(SelectionMask { chosen, k })
    }

    /// Same index for every connection.
    pub fn uniform(connections: usize, index: usize, k: usize) -> Result<Self> {
        Self::new(vec![index as u32; connections], k)
    }

    pub fn chosen(&self) -> &[u32] {
        &self.chosen
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.chosen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chosen.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotLayer {
    kind: LayerKind,
    k: usize,
    options: Tensor,
    scores: Tensor,
    share_mode: ShareMode,
    sparse_pinned: bool,
}

fn sample_weight<R: Rng + ?Sized>(dist: WeightDist, sigma: f32, rng: &mut R) -> f32 {
    match dist {
        WeightDist::GlorotUniform => rng.random_range(-sigma..=sigma),
        WeightDist::GlorotNormal => Normal::new(0.0, sigma).expect("sigma is finite and positive").sample(rng),
    }
}

impl SlotLayer {
    /// Samples fresh options and scores.
    ///
    /// Options are drawn from the Glorot distribution of the layer (ignoring
    /// `K`); scores from `U(γ, γ + λσ)`. With `ShareMode::PerLayer` a single
    /// K-vector is drawn and repeated for every connection. `ShareMode::Global`
    /// draws per-layer values here; [`make_global_shared`] replaces them.
    pub fn init<R: Rng + ?Sized>(kind: LayerKind, init: &SlotInit, rng: &mut R) -> Result<Self> {
        let k = init.k;
        if k < 1 {
            return Err(Error::invalid("K must be at least 1"));
        }
        let lambda = init.lambda.unwrap_or_else(|| kind.default_lambda());
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("score range λ must be positive, got {lambda}")));
        }
        if !init.gamma.is_finite() {
            return Err(Error::invalid("score offset γ must be finite"));
        }
        let sigma = kind.glorot_std();
        let n = kind.connections();
        let mut shape = kind.weight_shape();
        shape.push(k);

        let options = match init.share_mode {
            ShareMode::PerLayer => {
                let shared: Vec<f32> = (0..k).map(|_| sample_weight(init.weight_dist, sigma, rng)).collect();
                Tensor::from_fn(&shape, |i| shared[i % k])
            }
            ShareMode::None | ShareMode::Global => {
                Tensor::from_fn(&shape, |_| sample_weight(init.weight_dist, sigma, rng))
            }
        };
        let hi = init.gamma + lambda * sigma;
        let score_dist = Uniform::new_inclusive(init.gamma, hi).map_err(|e| Error::invalid(e.to_string()))?;
        let scores = Tensor::from_fn(&shape, |_| score_dist.sample(rng));
        debug_assert_eq!(options.len(), n * k);
        Ok(SlotLayer {
            kind,
            k,
            options,
            scores,
            share_mode: init.share_mode,
            sparse_pinned: false,
        })
    }

    /// Builds a layer from explicit option and score tensors shaped
    /// `[weight_shape..., K]`.
    pub fn from_parts(kind: LayerKind, options: Tensor, scores: Tensor) -> Result<Self> {
        let mut shape = kind.weight_shape();
        let k = *options.shape().last().unwrap_or(&0);
        shape.push(k);
        if options.shape() != shape.as_slice() || scores.shape() != shape.as_slice() {
            return Err(Error::ShapeMismatch {
                op: "SlotLayer::from_parts",
                left: options.shape().to_vec(),
                right: scores.shape().to_vec(),
            });
        }
        Ok(SlotLayer {
            kind,
            k,
            options,
            scores,
            share_mode: ShareMode::None,
            sparse_pinned: false,
        })
    }

    pub fn kind(&self) -> LayerKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn connections(&self) -> usize {
        self.kind.connections()
    }

    pub fn options(&self) -> &Tensor {
        &self.options
    }

    pub fn scores(&self) -> &Tensor {
        &self.scores
    }

    pub fn scores_mut(&mut self) -> &mut [f32] {
        self.scores.data_mut()
    }

    pub fn share_mode(&self) -> ShareMode {
        self.share_mode
    }

    pub fn is_sparse_pinned(&self) -> bool {
        self.sparse_pinned
    }

    /// Number of distinct stored weight values: `K` when options are shared,
    /// `n * K` otherwise.
    pub fn distinct_option_values(&self) -> usize {
        match self.share_mode {
            ShareMode::None => self.options.len(),
            ShareMode::PerLayer | ShareMode::Global => self.k,
        }
    }

    pub fn select_gs(&self) -> SelectionMask {
        select_gs(&self.scores)
    }

    pub fn select_ps<R: Rng + ?Sized>(&self, rng: &mut R) -> SelectionMask {
        select_ps(&self.scores, rng)
    }

    fn check_mask(&self, mask: &SelectionMask) -> Result<()> {
        if mask.len() != self.connections() {
            return Err(Error::ShapeMismatch {
                op: "slot mask",
                left: vec![mask.len()],
                right: self.kind.weight_shape(),
            });
        }
        if mask.k() != self.k {
            return Err(Error::SelectionOutOfRange { index: mask.k(), k: self.k });
        }
        Ok(())
    }

    /// Dense weights `W_eff[c] = options[c, mask[c]]`.
    pub fn effective_weights(&self, mask: &SelectionMask) -> Result<Tensor> {
        self.check_mask(mask)?;
        let k = self.k;
        let opts = self.options.data();
        let data = mask
            .chosen()
            .iter()
            .enumerate()
            .map(|(c, &sel)| opts[c * k + sel as usize])
            .collect();
        Tensor::new(self.kind.weight_shape(), data)
    }

    /// Weights picked by the highest score. Used for evaluation under both
    /// selection rules and as the starting point for finetuning.
    pub fn export_selected(&self) -> Tensor {
        self.effective_weights(&self.select_gs())
            .expect("argmax mask always matches its own layer")
    }

    /// Straight-through score gradient from the gradient of the loss with
    /// respect to the effective (gathered) weights:
    /// `grad_scores[c, k] = grad_weights[c] * options[c, k]`.
    ///
    /// `grad_weights[c]` already sums `∂L/∂a_i · h_j` over the batch (and
    /// over spatial positions for convolutions).
    pub fn score_grads(&self, grad_weights: &Tensor) -> Result<Tensor> {
        if grad_weights.shape() != self.kind.weight_shape().as_slice() {
            return Err(Error::ShapeMismatch {
                op: "score_grads",
                left: grad_weights.shape().to_vec(),
                right: self.kind.weight_shape(),
            });
        }
        let k = self.k;
        let mut out = self.options.clone();
        for (chunk, &g) in out.data_mut().chunks_exact_mut(k).zip(grad_weights.data()) {
            for w in chunk {
                *w *= g;
            }
        }
        Ok(out)
    }

    /// Forces option 0 of every connection to exactly zero.
    pub fn pin_sparse(&mut self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::invalid("sparse slot layers need K >= 2"));
        }
        for chunk in self.options.data_mut().chunks_exact_mut(self.k) {
            chunk[0] = 0.0;
        }
        self.sparse_pinned = true;
        Ok(())
    }

    pub(crate) fn set_shared_options(&mut self, values: &[f32], mode: ShareMode) {
        debug_assert_eq!(values.len(), self.k);
        let k = self.k;
        for (i, w) in self.options.data_mut().iter_mut().enumerate() {
            *w = values[i % k];
        }
        self.share_mode = mode;
    }
}

/// Highest score per connection; ties go to the lowest index.
pub fn select_gs(scores: &Tensor) -> SelectionMask {
    let k = *scores.shape().last().expect("scores have an option axis");
    let chosen = scores
        .data()
        .chunks_exact(k)
        .map(|row| {
            let mut best = 0;
            let mut best_v = row[0];
            for (i, &v) in row.iter().enumerate().skip(1) {
                if v > best_v {
                    best = i;
                    best_v = v;
                }
            }
            best as u32
        })
        .collect();
    SelectionMask { chosen, k }
}

/// Softmax probabilities of one connection's scores, computed with the
/// maximum subtracted.
pub fn softmax_probs(row: &[f32]) -> Vec<f32> {
    let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut p: Vec<f32> = row.iter().map(|&s| (s - max).exp()).collect();
    let sum: f32 = p.iter().sum();
    for v in &mut p {
        *v /= sum;
    }
    p
}

/// Draws one option per connection from the softmax of its scores.
pub fn select_ps<R: Rng + ?Sized>(scores: &Tensor, rng: &mut R) -> SelectionMask {
    let k = *scores.shape().last().expect("scores have an option axis");
    let mut weights = vec![0.0f32; k];
    let chosen = scores
        .data()
        .chunks_exact(k)
        .map(|row| {
            if k == 1 {
                return 0;
            }
            let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            let mut total = 0.0f32;
            for (w, &s) in weights.iter_mut().zip(row) {
                *w = (s - max).exp();
                total += *w;
            }
            let mut u = rng.random::<f32>() * total;
            for (i, &w) in weights.iter().enumerate() {
                if u < w {
                    return i as u32;
                }
                u -= w;
            }
            // Rounding left `u` past the last bucket; fall back to the last
            // option with non-zero mass.
            weights.iter().rposition(|&w| w > 0.0).unwrap_or(0) as u32
        })
        .collect();
    SelectionMask { chosen, k }
}

/// Forward pass of a slot layer with a fixed selection: gather, then the
/// dense kernel. Slot layers carry no bias.
pub fn slot_forward(layer: &SlotLayer, mask: &SelectionMask, input: &Tensor) -> Result<Tensor> {
    let w = layer.effective_weights(mask)?;
    match layer.kind {
        LayerKind::Linear { .. } => kernels::linear_forward(input, &w, None),
        LayerKind::Conv { .. } => kernels::conv2d_forward(input, &w),
    }
}

#[derive(Debug, Clone)]
pub struct SlotGrads {
    pub scores: Tensor,
    /// Gradient with respect to the layer input, through the selected weights.
    pub input: Tensor,
}

/// Backward pass of a single slot layer given its cached input and the
/// gradient with respect to its pre-activation output.
pub fn slot_backward_scores(
    layer: &SlotLayer,
    mask: &SelectionMask,
    input: Option<&Tensor>,
    grad_preactivation: &Tensor,
) -> Result<SlotGrads> {
    let input = input.ok_or_else(|| Error::MissingCache("slot layer input".into()))?;
    let w = layer.effective_weights(mask)?;
    let (gi, gw) = match layer.kind {
        LayerKind::Linear { .. } => {
            let g = kernels::linear_backward(input, &w, grad_preactivation, true)?;
            (g.input, g.weights)
        }
        LayerKind::Conv { .. } => {
            let g = kernels::conv2d_backward(input, &w, grad_preactivation, true)?;
            (g.input, g.kernels)
        }
    };
    Ok(SlotGrads {
        scores: layer.score_grads(&gw)?,
        input: gi.expect("input gradient requested"),
    })
}

/// Replaces the options of every layer with one shared K-vector drawn from
/// `U(-σ̂, σ̂)`, σ̂ being the mean of the layers' Glorot standard deviations.
/// Scores are untouched.
pub fn make_global_shared<R: Rng + ?Sized>(layers: &mut [&mut SlotLayer], k: usize, rng: &mut R) -> Result<()> {
    if layers.is_empty() {
        return Err(Error::invalid("global sharing needs at least one layer"));
    }
    if let Some(l) = layers.iter().find(|l| l.k != k) {
        return Err(Error::invalid(format!("layer has K={} but sharing requested K={k}", l.k)));
    }
    let sigma = mean_glorot_std(layers.iter().map(|l| l.kind));
    let values: Vec<f32> = (0..k).map(|_| rng.random_range(-sigma..=sigma)).collect();
    for layer in layers.iter_mut() {
        layer.set_shared_options(&values, ShareMode::Global);
    }
    Ok(())
}

pub fn mean_glorot_std(kinds: impl IntoIterator<Item = LayerKind>) -> f32 {
    let (sum, n) = kinds
        .into_iter()
        .fold((0.0f64, 0usize), |(s, n), kind| (s + kind.glorot_std() as f64, n + 1));
    (sum / n.max(1) as f64) as f32
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lin(out_features: usize, in_features: usize) -> LayerKind {
        LayerKind::Linear { out_features, in_features }
    }

    #[test]
    fn glorot_std_closed_form() {
        assert!((lin(100, 300).glorot_std() - 0.070_710_68).abs() < 1e-7);
    }

    #[test]
    fn init_respects_supports() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let kind = lin(100, 300);
        let layer = SlotLayer::init(kind, &SlotInit::new(4), &mut rng).unwrap();
        let sigma = kind.glorot_std();
        assert!(layer.options().data().iter().all(|w| w.abs() <= sigma));
        assert!(layer.scores().data().iter().all(|&s| (0.0..=0.1 * sigma).contains(&s)));
        assert_eq!(layer.options().shape(), &[100, 300, 4]);
        assert_eq!(layer.options().shape(), layer.scores().shape());
    }

    #[test]
    fn conv_init_uses_unit_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let kind = LayerKind::Conv { out_channels: 8, in_channels: 4 };
        let layer = SlotLayer::init(kind, &SlotInit::new(2), &mut rng).unwrap();
        let sigma = kind.glorot_std();
        let max = layer.scores().data().iter().copied().fold(0.0, f32::max);
        assert!(max <= sigma && max > 0.5 * sigma);
    }

    #[test]
    fn init_rejects_bad_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(SlotLayer::init(lin(2, 2), &SlotInit::new(0), &mut rng).is_err());
        let mut init = SlotInit::new(2);
        init.lambda = Some(0.0);
        assert!(SlotLayer::init(lin(2, 2), &init, &mut rng).is_err());
        init.lambda = Some(-1.0);
        assert!(SlotLayer::init(lin(2, 2), &init, &mut rng).is_err());
    }

    #[test]
    fn gamma_shifts_score_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut init = SlotInit::new(3);
        init.gamma = 5.0;
        let layer = SlotLayer::init(lin(10, 10), &init, &mut rng).unwrap();
        let hi = 5.0 + 0.1 * lin(10, 10).glorot_std();
        assert!(layer.scores().data().iter().all(|&s| (5.0..=hi).contains(&s)));
    }

    #[test]
    fn per_layer_sharing_repeats_one_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut init = SlotInit::new(4);
        init.share_mode = ShareMode::PerLayer;
        let layer = SlotLayer::init(lin(5, 7), &init, &mut rng).unwrap();
        let rows: Vec<&[f32]> = layer.options().data().chunks_exact(4).collect();
        assert!(rows.iter().all(|r| *r == rows[0]));
        assert_eq!(layer.distinct_option_values(), 4);
    }

    #[test]
    fn gs_picks_max_with_low_tie_break() {
        let s = Tensor::new(vec![2, 3], vec![0.1, 0.9, 0.3, 0.5, 0.5, 0.1]).unwrap();
        assert_eq!(select_gs(&s).chosen(), &[1, 0]);
    }

    #[test]
    fn ps_saturated_softmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = Tensor::new(vec![1, 4], vec![0.0, 0.0, 50.0, 0.0]).unwrap();
        for _ in 0..10_000 {
            assert_eq!(select_ps(&s, &mut rng).chosen(), &[2]);
        }
    }

    #[test]
    fn k1_forward_matches_plain_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layer = SlotLayer::init(lin(3, 5), &SlotInit::new(1), &mut rng).unwrap();
        let x = Tensor::from_fn(&[2, 5], |i| i as f32 * 0.1);
        let plain = kernels::linear_forward(&x, &layer.options().clone().reshape(&[3, 5]).unwrap(), None).unwrap();
        let slot = slot_forward(&layer, &layer.select_gs(), &x).unwrap();
        assert_eq!(plain, slot);
        assert_eq!(layer.export_selected(), layer.options().clone().reshape(&[3, 5]).unwrap());
    }

    #[test]
    fn constructed_gather_gives_ones() {
        let kind = lin(2, 3);
        let options = Tensor::from_fn(&[2, 3, 3], |i| (i % 3) as f32);
        let layer = SlotLayer::from_parts(kind, options, Tensor::zeros(&[2, 3, 3])).unwrap();
        let mask = SelectionMask::uniform(6, 1, 3).unwrap();
        let x = Tensor::new(vec![1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(slot_forward(&layer, &mask, &x).unwrap().data(), &[6.0, 6.0]);
    }

    #[test]
    fn mask_out_of_range_is_rejected() {
        assert!(matches!(
            SelectionMask::new(vec![0, 3], 3),
            Err(Error::SelectionOutOfRange { index: 3, k: 3 })
        ));
    }

    #[test]
    fn score_grad_is_direct_product() {
        // dL/da = 2, h = 3, options = [0.1, -0.2]
        let kind = lin(1, 1);
        let layer = SlotLayer::from_parts(
            kind,
            Tensor::new(vec![1, 1, 2], vec![0.1, -0.2]).unwrap(),
            Tensor::new(vec![1, 1, 2], vec![1.0, 0.0]).unwrap(),
        )
        .unwrap();
        let g = slot_backward_scores(
            &layer,
            &layer.select_gs(),
            Some(&Tensor::new(vec![1, 1], vec![3.0]).unwrap()),
            &Tensor::new(vec![1, 1], vec![2.0]).unwrap(),
        )
        .unwrap();
        assert!((g.scores.data()[0] - 0.6).abs() < 1e-6);
        assert!((g.scores.data()[1] + 1.2).abs() < 1e-6);
        // input gradient uses the selected option only
        assert!((g.input.data()[0] - 0.2).abs() < 1e-7);
    }

    #[test]
    fn zero_options_give_zero_score_grads() {
        let kind = lin(2, 2);
        let layer = SlotLayer::from_parts(kind, Tensor::zeros(&[2, 2, 3]), Tensor::zeros(&[2, 2, 3])).unwrap();
        let g = slot_backward_scores(
            &layer,
            &layer.select_gs(),
            Some(&Tensor::full(&[4, 2], 1.5)),
            &Tensor::full(&[4, 2], -0.7),
        )
        .unwrap();
        assert!(g.scores.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_without_cache_fails() {
        let kind = lin(1, 1);
        let layer = SlotLayer::from_parts(kind, Tensor::zeros(&[1, 1, 2]), Tensor::zeros(&[1, 1, 2])).unwrap();
        assert!(matches!(
            slot_backward_scores(&layer, &layer.select_gs(), None, &Tensor::zeros(&[1, 1])),
            Err(Error::MissingCache(_))
        ));
    }

    #[test]
    fn export_is_idempotent_and_matches_gs() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let layer = SlotLayer::init(lin(4, 6), &SlotInit::new(5), &mut rng).unwrap();
        let a = layer.export_selected();
        let b = layer.export_selected();
        assert_eq!(a.data(), b.data());
        assert_eq!(a, layer.effective_weights(&layer.select_gs()).unwrap());
    }

    #[test]
    fn pin_sparse_zeroes_first_option() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut layer = SlotLayer::init(lin(4, 6), &SlotInit::new(2), &mut rng).unwrap();
        layer.pin_sparse().unwrap();
        assert!(layer.is_sparse_pinned());
        assert!(layer.options().data().chunks_exact(2).all(|c| c[0] == 0.0));
        let mut k1 = SlotLayer::init(lin(4, 6), &SlotInit::new(1), &mut rng).unwrap();
        assert!(k1.pin_sparse().is_err());
    }

    #[test]
    fn global_sharing_uses_mean_sigma() {
        let a = lin(100, 100); // sqrt(2/200) = 0.1
        let b = lin(11, 11); // sqrt(2/22) ≈ 0.3015
        let mean = mean_glorot_std([a, b]);
        assert!((mean - (a.glorot_std() + b.glorot_std()) / 2.0).abs() < 1e-7);
        assert!((a.glorot_std() - 0.1).abs() < 1e-7);

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut la = SlotLayer::init(a, &SlotInit::new(4), &mut rng).unwrap();
        let mut lb = SlotLayer::init(b, &SlotInit::new(4), &mut rng).unwrap();
        let scores_before = (la.scores().clone(), lb.scores().clone());
        make_global_shared(&mut [&mut la, &mut lb], 4, &mut rng).unwrap();
        let first = la.options().data()[..4].to_vec();
        assert!(first.iter().all(|v| v.abs() <= mean));
        for layer in [&la, &lb] {
            assert!(layer.options().data().chunks_exact(4).all(|c| c == first.as_slice()));
            assert_eq!(layer.share_mode(), ShareMode::Global);
        }
        assert_eq!((la.scores().clone(), lb.scores().clone()), scores_before);
    }
}

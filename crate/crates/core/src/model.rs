//! The fixed architectures (Lenet-300-100, CONV-2/4/6) and a network type
//! whose parametric layers are either slot layers or ordinary dense weights.

use std::borrow::Cow;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{self, Exec};
use crate::slot::{make_global_shared, LayerKind, SelectionMask, ShareMode, SlotInit, SlotLayer};
use crate::tensor::Tensor;

pub const DROPOUT_RATE: f32 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arch {
    Lenet,
    Conv2,
    Conv4,
    Conv6,
}

impl Arch {
    pub const ALL: [Arch; 4] = [Arch::Lenet, Arch::Conv2, Arch::Conv4, Arch::Conv6];

    pub fn name(self) -> &'static str {
        match self {
            Arch::Lenet => "lenet",
            Arch::Conv2 => "conv2",
            Arch::Conv4 => "conv4",
            Arch::Conv6 => "conv6",
        }
    }

    /// `[C, H, W]` of the expected input.
    pub fn input_shape(self) -> [usize; 3] {
        match self {
            Arch::Lenet => [1, 28, 28],
            _ => [3, 32, 32],
        }
    }

    pub fn is_mnist(self) -> bool {
        self == Arch::Lenet
    }

    /// Default epoch budget when training slot machines.
    pub fn slot_epochs(self) -> usize {
        200
    }

    /// Default epoch budget when training weights from scratch.
    pub fn baseline_epochs(self) -> usize {
        match self {
            Arch::Lenet | Arch::Conv2 => 200,
            Arch::Conv4 | Arch::Conv6 => 330,
        }
    }

    fn conv_widths(self) -> &'static [usize] {
        match self {
            Arch::Lenet => &[],
            Arch::Conv2 => &[64],
            Arch::Conv4 => &[64, 128],
            Arch::Conv6 => &[64, 128, 256],
        }
    }

    /// Layer program of the architecture.
    pub fn ops(self) -> (Vec<Op>, Vec<LayerKind>) {
        let mut ops = Vec::new();
        let mut kinds = Vec::new();
        let [mut c, mut h, mut w] = self.input_shape();
        for &width in self.conv_widths() {
            for _ in 0..2 {
                ops.push(Op::Param(kinds.len()));
                kinds.push(LayerKind::Conv {
                    out_channels: width,
                    in_channels: c,
                });
                ops.push(Op::Relu);
                c = width;
            }
            ops.push(Op::MaxPool);
            h /= 2;
            w /= 2;
        }
        ops.push(Op::Flatten);
        let mut features = c * h * w;
        let (hidden, dropout): (&[usize], bool) = match self {
            Arch::Lenet => (&[300, 100], false),
            _ => (&[256, 256], true),
        };
        for &width in hidden {
            ops.push(Op::Param(kinds.len()));
            kinds.push(LayerKind::Linear {
                out_features: width,
                in_features: features,
            });
            ops.push(Op::Relu);
            if dropout {
                ops.push(Op::Dropout(DROPOUT_RATE));
            }
            features = width;
        }
        ops.push(Op::Param(kinds.len()));
        kinds.push(LayerKind::Linear {
            out_features: 10,
            in_features: features,
        });
        (ops, kinds)
    }
}

impl std::str::FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "lenet" | "lenet300100" => Ok(Arch::Lenet),
            "conv2" => Ok(Arch::Conv2),
            "conv4" => Ok(Arch::Conv4),
            "conv6" => Ok(Arch::Conv6),
            other => Err(Error::invalid(format!("unknown architecture {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Op {
    /// Index into the network's parametric layers.
    Param(usize),
    Relu,
    MaxPool,
    Flatten,
    Dropout(f32),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Weights {
    Slot(SlotLayer),
    Dense { weights: Tensor, bias: Option<Tensor> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamLayer {
    pub kind: LayerKind,
    pub weights: Weights,
}

impl ParamLayer {
    pub fn slot(&self) -> Option<&SlotLayer> {
        match &self.weights {
            Weights::Slot(s) => Some(s),
            Weights::Dense { .. } => None,
        }
    }

    pub fn slot_mut(&mut self) -> Option<&mut SlotLayer> {
        match &mut self.weights {
            Weights::Slot(s) => Some(s),
            Weights::Dense { .. } => None,
        }
    }
}

/// Options for building a slot network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotOptions {
    pub init: SlotInit,
    pub sparse: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    arch: Arch,
    ops: Vec<Op>,
    params: Vec<ParamLayer>,
}

/// Effective weights for one forward pass.
pub type Effective<'a> = Vec<(Cow<'a, Tensor>, Option<&'a Tensor>)>;

enum Cache {
    Param(Tensor),
    Relu(Tensor),
    Pool { argmax: Vec<u32>, in_shape: Vec<usize> },
    Flatten(Vec<usize>),
    Dropout(Option<Vec<f32>>),
}

/// Per-op values saved by [`Network::forward`] for the backward pass.
pub struct Tape {
    caches: Vec<Cache>,
}

/// Gradient of the loss with respect to one layer's effective weights.
#[derive(Clone, Debug)]
pub struct ParamGrad {
    pub weights: Tensor,
    pub bias: Option<Tensor>,
}

impl Network {
    /// Slot network: every parametric layer gets `K` options and scores.
    pub fn slot<R: Rng + ?Sized>(arch: Arch, opts: &SlotOptions, rng: &mut R) -> Result<Self> {
        let (ops, kinds) = arch.ops();
        let mut layers = kinds
            .iter()
            .map(|&kind| SlotLayer::init(kind, &opts.init, rng))
            .collect::<Result<Vec<_>>>()?;
        if opts.init.share_mode == ShareMode::Global {
            let mut refs: Vec<&mut SlotLayer> = layers.iter_mut().collect();
            make_global_shared(&mut refs, opts.init.k, rng)?;
        }
        if opts.sparse {
            for l in &mut layers {
                l.pin_sparse()?;
            }
        }
        let params = kinds
            .into_iter()
            .zip(layers)
            .map(|(kind, l)| ParamLayer {
                kind,
                weights: Weights::Slot(l),
            })
            .collect();
        Ok(Network { arch, ops, params })
    }

    /// Dense network with Glorot-uniform weights and zero biases on fully
    /// connected layers. The weights are drawn exactly as a K=1 slot network
    /// with the same generator would draw its options.
    pub fn dense<R: Rng + ?Sized>(arch: Arch, rng: &mut R) -> Result<Self> {
        let opts = SlotOptions {
            init: SlotInit::new(1),
            sparse: false,
        };
        Network::slot(arch, &opts, rng)?.exported()
    }

    /// Dense network from explicit weights; biases start at zero.
    pub fn from_dense_weights(arch: Arch, weights: Vec<Tensor>) -> Result<Self> {
        let (ops, kinds) = arch.ops();
        if weights.len() != kinds.len() {
            return Err(Error::invalid(format!(
                "{} expects {} weight tensors, got {}",
                arch.name(),
                kinds.len(),
                weights.len()
            )));
        }
        let params = kinds
            .into_iter()
            .zip(weights)
            .map(|(kind, w)| {
                if w.shape() != kind.weight_shape().as_slice() {
                    return Err(Error::ShapeMismatch {
                        op: "from_dense_weights",
                        left: w.shape().to_vec(),
                        right: kind.weight_shape(),
                    });
                }
                let bias = match kind {
                    LayerKind::Linear { out_features, .. } => Some(Tensor::zeros(&[out_features])),
                    LayerKind::Conv { .. } => None,
                };
                Ok(ParamLayer {
                    kind,
                    weights: Weights::Dense { weights: w, bias },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Network { arch, ops, params })
    }

    /// Plain network made of the highest-score options of every slot layer.
    pub fn exported(&self) -> Result<Network> {
        Network::from_dense_weights(self.arch, self.export_selected())
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    pub fn params(&self) -> &[ParamLayer] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [ParamLayer] {
        &mut self.params
    }

    pub fn is_slot(&self) -> bool {
        self.params.iter().all(|p| p.slot().is_some())
    }

    pub fn slot_layers(&self) -> impl Iterator<Item = &SlotLayer> {
        self.params.iter().filter_map(ParamLayer::slot)
    }

    /// Number of connections (weights excluding biases).
    pub fn connections(&self) -> usize {
        self.params.iter().map(|p| p.kind.connections()).sum()
    }

    /// Number of stored option values; `K * n` for unshared slot networks.
    pub fn stored_option_values(&self) -> usize {
        let layers: Vec<&SlotLayer> = self.slot_layers().collect();
        if layers.iter().any(|l| l.share_mode() == ShareMode::Global) {
            return layers.first().map_or(0, |l| l.k());
        }
        layers.iter().map(|l| l.distinct_option_values()).sum()
    }

    /// Multiply-accumulate count of one forward pass for a single example.
    /// Depends only on the architecture: slot layers run the same dense
    /// kernels on gathered weights.
    pub fn forward_macs(&self) -> u64 {
        let [mut _c, mut h, mut w] = self.arch.input_shape();
        let mut macs = 0u64;
        for op in &self.ops {
            match *op {
                Op::Param(i) => {
                    let kind = self.params[i].kind;
                    macs += match kind {
                        LayerKind::Conv { .. } => (kind.connections() * h * w) as u64,
                        LayerKind::Linear { .. } => kind.connections() as u64,
                    };
                }
                Op::MaxPool => {
                    h /= 2;
                    w /= 2;
                }
                _ => {}
            }
        }
        macs
    }

    /// Highest-score weights per slot layer; dense layers return their
    /// current weights.
    pub fn export_selected(&self) -> Vec<Tensor> {
        self.params
            .iter()
            .map(|p| match &p.weights {
                Weights::Slot(s) => s.export_selected(),
                Weights::Dense { weights, .. } => weights.clone(),
            })
            .collect()
    }

    pub fn select_gs(&self) -> Vec<SelectionMask> {
        self.slot_layers().map(SlotLayer::select_gs).collect()
    }

    pub fn select_ps<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<SelectionMask> {
        self.slot_layers().map(|l| l.select_ps(rng)).collect()
    }

    /// Effective weights for a forward pass. Slot layers need one mask each
    /// (in layer order); dense layers borrow their weights.
    pub fn effective<'a>(&'a self, masks: Option<&[SelectionMask]>) -> Result<Effective<'a>> {
        let mut slot_idx = 0;
        self.params
            .iter()
            .map(|p| match &p.weights {
                Weights::Slot(s) => {
                    let masks = masks.ok_or_else(|| Error::invalid("slot layers need selection masks"))?;
                    let mask = masks
                        .get(slot_idx)
                        .ok_or_else(|| Error::invalid("fewer masks than slot layers"))?;
                    slot_idx += 1;
                    Ok((Cow::Owned(s.effective_weights(mask)?), None))
                }
                Weights::Dense { weights, bias } => Ok((Cow::Borrowed(weights), bias.as_ref())),
            })
            .collect()
    }

    /// Runs the layer program. `rng` drives dropout and is only used when
    /// `train` is set.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        input: &Tensor,
        effective: &Effective<'_>,
        train: bool,
        rng: &mut R,
        exec: Exec,
    ) -> Result<(Tensor, Tape)> {
        let [c, h, w] = self.arch.input_shape();
        if input.rank() != 4 || input.shape()[1..] != [c, h, w] {
            return Err(Error::ShapeMismatch {
                op: "Network::forward",
                left: input.shape().to_vec(),
                right: vec![c, h, w],
            });
        }
        if effective.len() != self.params.len() {
            return Err(Error::invalid("effective weights do not match the layer count"));
        }
        let mut x = input.clone();
        let mut caches = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            match *op {
                Op::Param(i) => {
                    let (weights, bias) = &effective[i];
                    let y = match self.params[i].kind {
                        LayerKind::Linear { .. } => kernels::linear_forward(&x, weights, *bias)?,
                        LayerKind::Conv { .. } => kernels::conv2d_forward_exec(&x, weights, exec)?,
                    };
                    caches.push(Cache::Param(std::mem::replace(&mut x, y)));
                }
                Op::Relu => {
                    let y = kernels::relu_forward(&x);
                    caches.push(Cache::Relu(std::mem::replace(&mut x, y)));
                }
                Op::MaxPool => {
                    let (y, argmax) = kernels::maxpool2x2_forward(&x)?;
                    caches.push(Cache::Pool {
                        argmax,
                        in_shape: x.shape().to_vec(),
                    });
                    x = y;
                }
                Op::Flatten => {
                    let shape = x.shape().to_vec();
                    let features = shape[1..].iter().product();
                    x = x.reshape(&[shape[0], features])?;
                    caches.push(Cache::Flatten(shape));
                }
                Op::Dropout(p) => {
                    let (y, mask) = kernels::dropout_forward(&x, p, rng, train)?;
                    caches.push(Cache::Dropout(mask));
                    x = y;
                }
            }
        }
        Ok((x, Tape { caches }))
    }

    /// Gradients with respect to every layer's effective weights (and bias).
    pub fn backward(&self, tape: &Tape, effective: &Effective<'_>, grad_logits: &Tensor, exec: Exec) -> Result<Vec<ParamGrad>> {
        if tape.caches.len() != self.ops.len() {
            return Err(Error::MissingCache(format!(
                "tape holds {} entries for {} ops",
                tape.caches.len(),
                self.ops.len()
            )));
        }
        let mut grads: Vec<Option<ParamGrad>> = vec![None; self.params.len()];
        let mut g = grad_logits.clone();
        for (pos, (op, cache)) in self.ops.iter().zip(&tape.caches).enumerate().rev() {
            let first = pos == 0;
            g = match (op, cache) {
                (Op::Param(i), Cache::Param(input)) => {
                    let (weights, _) = &effective[*i];
                    let (gi, pg) = match self.params[*i].kind {
                        LayerKind::Linear { .. } => {
                            let lg = kernels::linear_backward(input, weights, &g, !first)?;
                            let has_bias = matches!(&self.params[*i].weights, Weights::Dense { bias: Some(_), .. });
                            (
                                lg.input,
                                ParamGrad {
                                    weights: lg.weights,
                                    bias: has_bias.then_some(lg.bias),
                                },
                            )
                        }
                        LayerKind::Conv { .. } => {
                            let cg = kernels::conv2d_backward_exec(input, weights, &g, !first, exec)?;
                            (
                                cg.input,
                                ParamGrad {
                                    weights: cg.kernels,
                                    bias: None,
                                },
                            )
                        }
                    };
                    grads[*i] = Some(pg);
                    match gi {
                        Some(gi) => gi,
                        None => break,
                    }
                }
                (Op::Relu, Cache::Relu(input)) => kernels::relu_backward(&g, input)?,
                (Op::MaxPool, Cache::Pool { argmax, in_shape }) => kernels::maxpool2x2_backward(&g, argmax, in_shape)?,
                (Op::Flatten, Cache::Flatten(shape)) => g.reshape(shape)?,
                (Op::Dropout(_), Cache::Dropout(mask)) => kernels::dropout_backward(&g, mask.as_deref()),
                _ => return Err(Error::MissingCache(format!("tape entry {pos} does not match op {op:?}"))),
            };
        }
        grads
            .into_iter()
            .enumerate()
            .map(|(i, g)| g.ok_or_else(|| Error::MissingCache(format!("no gradient reached layer {i}"))))
            .collect()
    }

    /// Logits in evaluation mode (no dropout) for already-chosen weights.
    pub fn logits(&self, input: &Tensor, effective: &Effective<'_>, exec: Exec) -> Result<Tensor> {
        let mut unused = NoRng;
        Ok(self.forward(input, effective, false, &mut unused, exec)?.0)
    }
}

/// Generator handed to evaluation-mode forwards, where dropout never draws.
struct NoRng;

impl rand::RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("evaluation forward does not sample")
    }

    fn next_u64(&mut self) -> u64 {
        unreachable!("evaluation forward does not sample")
    }

    fn fill_bytes(&mut self, _dst: &mut [u8]) {
        unreachable!("evaluation forward does not sample")
    }
}

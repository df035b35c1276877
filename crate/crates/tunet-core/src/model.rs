//! The full temporal U-Net: encoder ("down") stages, bottleneck, decoder
//! ("up") stages with shortcut concatenation, and a 1x1 projection head.
//!
//! Every down stage runs two length-preserving convolutions (ReLU after
//! each), keeps the pre-pool activation as the skip, then halves the time
//! axis with a stride-2 max pool. Every up stage doubles the time axis with a
//! stride-2 transposed convolution whose output channels equal the skip
//! channels, concatenates the skip (doubling channels), and runs two
//! convolutions. The head is a kernel-1 projection to the class scores with
//! no activation.


use crate::error::{Error, Result};
use crate::layers::{
    conv1d_backward, conv1d_forward, deconv1d_backward, deconv1d_forward, maxpool1d_backward,
    maxpool1d_forward, relu_backward, relu_forward, softmax_time, Conv1dCache, Deconv1dCache,
    PoolCache, ReluCache,
};
use crate::tensor::{concat_channels, split_channels_grad, Element, LabelMatrix, Tensor3};

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TUnetConfig {
    /// Input channels: one per OFDM carrier.
    pub input_channels: usize,
    /// Time samples per series.
    pub series_length: usize,
    /// Output classes: 2 for detection, gestures + 1 for classification.
    pub num_classes: usize,
    /// Number of down/up stages; the time axis halves once per stage.
    pub depth: usize,
    /// Channels after the first stage; doubles per stage.
    pub base_channels: usize,
    /// Temporal kernel size of the stage convolutions.
    pub conv_kernel: usize,
    /// Seed for parameter initialization.
    pub seed: u64,
}

impl Default for TUnetConfig {
    fn default() -> Self {
        Self {
            input_channels: 52,
            series_length: 192,
            num_classes: 2,
            depth: 3,
            base_channels: 64,
            conv_kernel: 3,
            seed: 0,
        }
    }
}

impl TUnetConfig {
    /// Two-class head: non-action vs action.
    pub fn detect() -> Self {
        Self::default()
    }

    /// (gestures + 1)-class head: one per gesture plus non-action.
    pub fn classify(gestures: usize) -> Self {
        Self {
            num_classes: gestures + 1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::InvalidConfig("depth must be >= 1".into()));
        }
        if self.input_channels == 0 || self.base_channels == 0 {
            return Err(Error::InvalidConfig("channel counts must be >= 1".into()));
        }
        if self.conv_kernel == 0 {
            return Err(Error::InvalidConfig("conv_kernel must be >= 1".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::InvalidConfig("num_classes must be >= 2".into()));
        }
        let factor = 1usize << self.depth;
        if self.series_length == 0 || !self.series_length.is_multiple_of(factor) {
            return Err(Error::InvalidConfig(format!(
                "series_length {} must be divisible by 2^depth = {}",
                self.series_length, factor
            )));
        }
        Ok(())
    }

    /// Channels produced by down stage `s`.
    pub fn stage_channels(&self, stage: usize) -> usize {
        self.base_channels << stage
    }

    pub fn bottleneck_channels(&self) -> usize {
        self.base_channels << self.depth
    }

    /// Padding that preserves length for odd kernels and overshoots by one
    /// sample for even kernels (the extra sample is trimmed).
    pub fn conv_padding(&self) -> usize {
        self.conv_kernel / 2
    }
}

/// One named parameter array.
#[derive(Clone, Debug, PartialEq)]
pub struct Param<E> {
    pub name: String,
    pub tensor: Tensor3<E>,
}

/// Ordered, uniquely named collection of trainable arrays. Iteration order is
/// the construction order and is identical across runs.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore<E> {
    params: Vec<Param<E>>,
}

impl<E: Element> ParamStore<E> {
    pub fn new() -> Self {
        Self { params: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor3<E>) -> Result<()> {
        let name = name.into();
        if self.params.iter().any(|p| p.name == name) {
            return Err(Error::InvalidConfig(format!(
                "duplicate parameter name `{}`",
                name
            )));
        }
        self.params.push(Param { name, tensor });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<E>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param<E>> {
        self.params.iter_mut()
    }

    pub fn get(&self, name: &str) -> Result<&Tensor3<E>> {
        self.params
            .iter()
            .find(|p| p.name == name)
            .map(|p| &p.tensor)
            .ok_or_else(|| Error::ShapeMismatch(format!("missing parameter `{}`", name)))
    }

    pub fn set(&mut self, name: &str, tensor: Tensor3<E>) -> Result<()> {
        let param = self
            .params
            .iter_mut()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::ShapeMismatch(format!("missing parameter `{}`", name)))?;
        if param.tensor.shape() != tensor.shape() {
            return Err(Error::ShapeMismatch(format!(
                "parameter `{}`: shape {:?} does not match {:?}",
                name,
                tensor.shape(),
                param.tensor.shape()
            )));
        }
        param.tensor = tensor;
        Ok(())
    }

    /// Total number of scalar values across all arrays.
    pub fn total_values(&self) -> usize {
        self.params.iter().map(|p| p.tensor.numel()).sum()
    }

    /// Same names and shapes, all values zero.
    pub fn zeros_like(&self) -> Self {
        Self {
            params: self
                .params
                .iter()
                .map(|p| {
                    let (b, c, l) = p.tensor.shape();
                    Param {
                        name: p.name.clone(),
                        tensor: Tensor3::zeros(b, c, l),
                    }
                })
                .collect(),
        }
    }

    pub fn cast<F: Element>(&self) -> ParamStore<F> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    tensor: p.tensor.cast::<F>(),
                })
                .collect(),
        }
    }
}

impl<E: Element> Default for ParamStore<E> {
    fn default() -> Self {
        Self::new()
    }
}

/// How a parameter array is initialized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    /// Zero-mean normal with variance 2 / fan_in.
    HeNormal { fan_in: usize },
    Zero,
}

/// Name, shape, and init of one parameter array.
#[derive(Clone, Debug)]
pub struct ParamSpec {
    pub name: String,
    pub shape: (usize, usize, usize),
    pub init: Init,
}

/// The architecture walk: every parameter array in creation order. Shared by
/// [`build`] and the checkpoint loader so they can never disagree.
pub fn param_shapes(cfg: &TUnetConfig) -> Vec<ParamSpec> {
    let k = cfg.conv_kernel;
    let mut specs = Vec::new();
    let conv_pair = |specs: &mut Vec<ParamSpec>, prefix: &str, in_c: usize, out_c: usize| {
        specs.push(ParamSpec {
            name: format!("{prefix}.weight"),
            shape: (out_c, in_c, k),
            init: Init::HeNormal { fan_in: in_c * k },
        });
        specs.push(ParamSpec {
            name: format!("{prefix}.bias"),
            shape: (1, 1, out_c),
            init: Init::Zero,
        });
    };

    let mut in_c = cfg.input_channels;
    for s in 0..cfg.depth {
        let ch = cfg.stage_channels(s);
        conv_pair(&mut specs, &format!("down{s}.conv1"), in_c, ch);
        conv_pair(&mut specs, &format!("down{s}.conv2"), ch, ch);
        in_c = ch;
    }

    let bott = cfg.bottleneck_channels();
    conv_pair(&mut specs, "bottleneck.conv1", in_c, bott);
    conv_pair(&mut specs, "bottleneck.conv2", bott, bott);
    in_c = bott;

    for s in (0..cfg.depth).rev() {
        let skip = cfg.stage_channels(s);
        specs.push(ParamSpec {
            name: format!("up{s}.deconv.weight"),
            shape: (in_c, skip, 2),
            init: Init::HeNormal { fan_in: in_c * 2 },
        });
        specs.push(ParamSpec {
            name: format!("up{s}.deconv.bias"),
            shape: (1, 1, skip),
            init: Init::Zero,
        });
        conv_pair(&mut specs, &format!("up{s}.conv1"), 2 * skip, skip);
        conv_pair(&mut specs, &format!("up{s}.conv2"), skip, skip);
        in_c = skip;
    }

    specs.push(ParamSpec {
        name: "head.weight".into(),
        shape: (cfg.num_classes, in_c, 1),
        init: Init::HeNormal { fan_in: in_c },
    });
    specs.push(ParamSpec {
        name: "head.bias".into(),
        shape: (1, 1, cfg.num_classes),
        init: Init::Zero,
    });
    specs
}

/// Initialize all parameters from the config seed. Same seed, same store,
/// bit for bit.
pub fn build<E: Element>(cfg: &TUnetConfig) -> Result<ParamStore<E>> {
    cfg.validate()?;
    let mut rng = crate::rng::seeded(cfg.seed);
    let mut store = ParamStore::new();
    for spec in param_shapes(cfg) {
        let (b, c, l) = spec.shape;
        let tensor = match spec.init {
            Init::Zero => Tensor3::zeros(b, c, l),
            Init::HeNormal { fan_in } => {
                let std = (2.0 / fan_in as f64).sqrt();
                let data: Vec<E> = (0..b * c * l)
                    .map(|_| E::from_f64(crate::rng::standard_normal(&mut rng) * std))
                    .collect();
                Tensor3::from_vec(b, c, l, data)?
            }
        };
        store.push(spec.name, tensor)?;
    }
    Ok(store)
}

/// One convolution + ReLU step with its backward-pass state.
struct ConvStep<E> {
    conv: Conv1dCache<E>,
    relu: ReluCache,
    /// True when an even kernel overshot by one sample and the tail was cut.
    trimmed: bool,
}

struct DownCache<E> {
    conv1: ConvStep<E>,
    conv2: ConvStep<E>,
    skip_channels: usize,
    pool: PoolCache,
}

struct UpCache<E> {
    deconv: Deconv1dCache<E>,
    split_at: usize,
    conv1: ConvStep<E>,
    conv2: ConvStep<E>,
}

/// Everything the backward pass needs; produced by [`forward`].
pub struct ForwardCache<E> {
    downs: Vec<DownCache<E>>,
    bottleneck1: ConvStep<E>,
    bottleneck2: ConvStep<E>,
    /// Deepest stage first, matching forward execution order.
    ups: Vec<UpCache<E>>,
    head: Conv1dCache<E>,
}

fn truncate_time<E: Element>(x: &Tensor3<E>, new_len: usize) -> Tensor3<E> {
    let (b, c, _) = x.shape();
    let mut out = Tensor3::zeros(b, c, new_len);
    for bi in 0..b {
        for ci in 0..c {
            out.row_mut(bi, ci).copy_from_slice(&x.row(bi, ci)[..new_len]);
        }
    }
    out
}

fn extend_time_zeros<E: Element>(x: &Tensor3<E>, new_len: usize) -> Tensor3<E> {
    let (b, c, l) = x.shape();
    let mut out = Tensor3::zeros(b, c, new_len);
    for bi in 0..b {
        for ci in 0..c {
            out.row_mut(bi, ci)[..l].copy_from_slice(x.row(bi, ci));
        }
    }
    out
}

/// Length-preserving convolution + ReLU: pad = kernel/2; even kernels trim
/// the one trailing extra sample.
fn conv_relu<E: Element>(
    x: Tensor3<E>,
    weights: &Tensor3<E>,
    bias: &Tensor3<E>,
    padding: usize,
) -> Result<(Tensor3<E>, ConvStep<E>)> {
    let in_len = x.length();
    let (raw, conv) = conv1d_forward(x, weights, bias.row(0, 0), 1, padding)?;
    let (out, trimmed) = if raw.length() == in_len {
        (raw, false)
    } else if raw.length() == in_len + 1 {
        (truncate_time(&raw, in_len), true)
    } else {
        return Err(Error::ShapeMismatch(format!(
            "stage conv changed length {} -> {}; kernel/padding combination unsupported",
            in_len,
            raw.length()
        )));
    };
    let (out, relu) = relu_forward(out);
    Ok((out, ConvStep { conv, relu, trimmed }))
}

/// Backward of [`conv_relu`]; returns grad w.r.t. the step input and fills
/// the weight/bias gradients into `grads`.
fn conv_relu_backward<E: Element>(
    grad: &Tensor3<E>,
    step: &ConvStep<E>,
    weights: &Tensor3<E>,
    padding: usize,
    grads: &mut ParamStore<E>,
    name: &str,
) -> Result<Tensor3<E>> {
    let g = relu_backward(grad, &step.relu)?;
    let g = if step.trimmed {
        extend_time_zeros(&g, g.length() + 1)
    } else {
        g
    };
    let (gx, gw, gb) = conv1d_backward(&g, &step.conv, weights, 1, padding)?;
    grads.set(&format!("{name}.weight"), gw)?;
    grads.set(
        &format!("{name}.bias"),
        Tensor3::from_vec(1, 1, gb.len(), gb)?,
    )?;
    Ok(gx)
}

/// Run the network; logits keep the input's time length, one score vector
/// per sample.
pub fn forward<E: Element>(
    params: &ParamStore<E>,
    x: Tensor3<E>,
    cfg: &TUnetConfig,
) -> Result<(Tensor3<E>, ForwardCache<E>)> {
    cfg.validate()?;
    if x.channels() != cfg.input_channels || x.length() != cfg.series_length {
        return Err(Error::ShapeMismatch(format!(
            "input {:?} does not match configured (batch, {}, {})",
            x.shape(),
            cfg.input_channels,
            cfg.series_length
        )));
    }
    let pad = cfg.conv_padding();

    let mut cur = x;
    let mut downs = Vec::with_capacity(cfg.depth);
    for s in 0..cfg.depth {
        let (out, step1) = conv_relu(
            cur,
            params.get(&format!("down{s}.conv1.weight"))?,
            params.get(&format!("down{s}.conv1.bias"))?,
            pad,
        )?;
        let (skip, step2) = conv_relu(
            out,
            params.get(&format!("down{s}.conv2.weight"))?,
            params.get(&format!("down{s}.conv2.bias"))?,
            pad,
        )?;
        let (pooled, pool) = maxpool1d_forward(&skip, 2, 2)?;
        cur = pooled;
        downs.push((skip, step1, step2, pool));
    }

    let (out, bottleneck1) = conv_relu(
        cur,
        params.get("bottleneck.conv1.weight")?,
        params.get("bottleneck.conv1.bias")?,
        pad,
    )?;
    let (mut cur, bottleneck2) = conv_relu(
        out,
        params.get("bottleneck.conv2.weight")?,
        params.get("bottleneck.conv2.bias")?,
        pad,
    )?;

    let mut ups = Vec::with_capacity(cfg.depth);
    for s in (0..cfg.depth).rev() {
        let (up, deconv) = deconv1d_forward(
            cur,
            params.get(&format!("up{s}.deconv.weight"))?,
            params.get(&format!("up{s}.deconv.bias"))?.row(0, 0),
            2,
        )?;
        let split_at = up.channels();
        let cat = concat_channels(&up, &downs[s].0)?;
        let (out, step1) = conv_relu(
            cat,
            params.get(&format!("up{s}.conv1.weight"))?,
            params.get(&format!("up{s}.conv1.bias"))?,
            pad,
        )?;
        let (out, step2) = conv_relu(
            out,
            params.get(&format!("up{s}.conv2.weight"))?,
            params.get(&format!("up{s}.conv2.bias"))?,
            pad,
        )?;
        cur = out;
        ups.push(UpCache {
            deconv,
            split_at,
            conv1: step1,
            conv2: step2,
        });
    }

    let (logits, head) = conv1d_forward(
        cur,
        params.get("head.weight")?,
        params.get("head.bias")?.row(0, 0),
        1,
        0,
    )?;

    let downs = downs
        .into_iter()
        .map(|(skip, conv1, conv2, pool)| DownCache {
            skip_channels: skip.channels(),
            conv1,
            conv2,
            pool,
        })
        .collect();

    Ok((
        logits,
        ForwardCache {
            downs,
            bottleneck1,
            bottleneck2,
            ups,
            head,
        },
    ))
}

/// Chain all layer backwards in exact reverse topology; the returned store
/// mirrors `params` name for name and shape for shape.
pub fn backward<E: Element>(
    params: &ParamStore<E>,
    cache: &ForwardCache<E>,
    grad_logits: &Tensor3<E>,
    cfg: &TUnetConfig,
) -> Result<ParamStore<E>> {
    let pad = cfg.conv_padding();
    let mut grads = params.zeros_like();

    let (mut g, gw, gb) = conv1d_backward(grad_logits, &cache.head, params.get("head.weight")?, 1, 0)?;
    grads.set("head.weight", gw)?;
    grads.set("head.bias", Tensor3::from_vec(1, 1, gb.len(), gb)?)?;

    // Up stages, most recent first (stage 0 ran last).
    let mut skip_grads: Vec<Option<Tensor3<E>>> = (0..cfg.depth).map(|_| None).collect();
    for (i, up) in cache.ups.iter().enumerate().rev() {
        let s = cfg.depth - 1 - i;
        let g2 = conv_relu_backward(
            &g,
            &up.conv2,
            params.get(&format!("up{s}.conv2.weight"))?,
            pad,
            &mut grads,
            &format!("up{s}.conv2"),
        )?;
        let gcat = conv_relu_backward(
            &g2,
            &up.conv1,
            params.get(&format!("up{s}.conv1.weight"))?,
            pad,
            &mut grads,
            &format!("up{s}.conv1"),
        )?;
        let (g_up, g_skip) = split_channels_grad(&gcat, up.split_at)?;
        skip_grads[s] = Some(g_skip);
        let (gx, gwd, gbd) = deconv1d_backward(
            &g_up,
            &up.deconv,
            params.get(&format!("up{s}.deconv.weight"))?,
            2,
        )?;
        grads.set(&format!("up{s}.deconv.weight"), gwd)?;
        grads.set(
            &format!("up{s}.deconv.bias"),
            Tensor3::from_vec(1, 1, gbd.len(), gbd)?,
        )?;
        g = gx;
    }

    let g2 = conv_relu_backward(
        &g,
        &cache.bottleneck2,
        params.get("bottleneck.conv2.weight")?,
        pad,
        &mut grads,
        "bottleneck.conv2",
    )?;
    g = conv_relu_backward(
        &g2,
        &cache.bottleneck1,
        params.get("bottleneck.conv1.weight")?,
        pad,
        &mut grads,
        "bottleneck.conv1",
    )?;

    for s in (0..cfg.depth).rev() {
        let down = &cache.downs[s];
        let mut g_skip = maxpool1d_backward(&g, &down.pool)?;
        if let Some(extra) = skip_grads[s].take() {
            debug_assert_eq!(extra.channels(), down.skip_channels);
            g_skip.add_assign(&extra)?;
        }
        let g2 = conv_relu_backward(
            &g_skip,
            &down.conv2,
            params.get(&format!("down{s}.conv2.weight"))?,
            pad,
            &mut grads,
            &format!("down{s}.conv2"),
        )?;
        g = conv_relu_backward(
            &g2,
            &down.conv1,
            params.get(&format!("down{s}.conv1.weight"))?,
            pad,
            &mut grads,
            &format!("down{s}.conv1"),
        )?;
    }

    Ok(grads)
}

/// Per-sample argmax over softmax probabilities; ties break to the lowest
/// class index. Returns the labels and the full per-class confidence curves.
pub fn predict<E: Element>(
    params: &ParamStore<E>,
    x: Tensor3<E>,
    cfg: &TUnetConfig,
) -> Result<(LabelMatrix, Tensor3<E>)> {
    let (logits, _) = forward(params, x, cfg)?;
    let probs = softmax_time(&logits);
    let (batch, classes, length) = probs.shape();
    let mut labels = LabelMatrix::zeros(batch, length);
    for b in 0..batch {
        for t in 0..length {
            let mut best = probs.at(b, 0, t);
            let mut best_c = 0usize;
            for c in 1..classes {
                let v = probs.at(b, c, t);
                if v > best {
                    best = v;
                    best_c = c;
                }
            }
            labels.set(b, t, best_c);
        }
    }
    Ok((labels, probs))
}

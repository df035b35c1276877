//! Central finite-difference verification of every layer's backward pass and
//! of the end-to-end loss gradient, all at 64-bit precision.
//!
//! This backs the `gradcheck` CLI subcommand. The layer oracles here use
//! forward evaluations only, so they stay independent of the backward code
//! they check.

use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::layers::{
    conv1d_backward, conv1d_forward, deconv1d_backward, deconv1d_forward, maxpool1d_backward,
    maxpool1d_forward, relu_backward, relu_forward, softmax_xent_backward, softmax_xent_forward,
};
use crate::model::{backward, build, forward, TUnetConfig};
use crate::rng;
use crate::tensor::{LabelMatrix, Tensor3};

/// Central-difference step (64-bit).
pub const FD_STEP: f64 = 1e-5;

/// Default acceptance tolerance on the worst relative error.
pub const DEFAULT_TOLERANCE: f64 = 1e-5;

/// Deliberate corruption hooks for testing the failure path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    ConvBackward,
}

/// Worst observed relative error for one checked layer.
#[derive(Clone, Debug)]
pub struct LayerCheck {
    pub layer: &'static str,
    pub worst_rel_err: f64,
    pub tolerance: f64,
}

impl LayerCheck {
    pub fn passed(&self) -> bool {
        self.worst_rel_err <= self.tolerance
    }
}

#[derive(Clone, Debug)]
pub struct GradcheckReport {
    pub checks: Vec<LayerCheck>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed())
    }

    /// Names of the failing layers, if any.
    pub fn failures(&self) -> Vec<&'static str> {
        self.checks
            .iter()
            .filter(|c| !c.passed())
            .map(|c| c.layer)
            .collect()
    }
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<12} worst rel err {:.3e} (tol {:.1e}) {}",
                c.layer,
                c.worst_rel_err,
                c.tolerance,
                if c.passed() { "pass" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-8 {
        (analytic - numeric).abs()
    } else {
        (analytic - numeric).abs() / scale
    }
}

fn uniform(r: &mut ChaCha8Rng, b: usize, c: usize, l: usize) -> Tensor3<f64> {
    let data: Vec<f64> = (0..b * c * l).map(|_| r.gen_range(-1.0..1.0)).collect();
    Tensor3::from_vec(b, c, l, data).unwrap()
}

/// Worst rel err between an analytic gradient tensor and central differences
/// of `eval` under perturbation of `values`.
fn fd_worst(
    values: &Tensor3<f64>,
    analytic: &Tensor3<f64>,
    mut eval: impl FnMut(&Tensor3<f64>) -> f64,
) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..values.numel() {
        let mut plus = values.clone();
        plus.data_mut()[i] += FD_STEP;
        let mut minus = values.clone();
        minus.data_mut()[i] -= FD_STEP;
        let numeric = (eval(&plus) - eval(&minus)) / (2.0 * FD_STEP);
        worst = worst.max(rel_err(analytic.data()[i], numeric));
    }
    worst
}

fn inner(a: &Tensor3<f64>, b: &Tensor3<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn check_conv(seeds: &[u64], fault: Option<Fault>) -> LayerCheck {
    let mut worst = 0.0f64;
    for &seed in seeds {
        let mut r = rng::seeded(seed);
        let (batch, in_c, out_c) = (r.gen_range(1..=2), r.gen_range(1..=4), r.gen_range(1..=4));
        // Draw until the output length divides exactly.
        let (l, kernel, stride, padding) = loop {
            let l = r.gen_range(4..=16usize);
            let kernel = r.gen_range(1..=3usize);
            let stride = r.gen_range(1..=2usize);
            let padding = r.gen_range(0..=1usize);
            let span = l + 2 * padding;
            if span >= kernel && (span - kernel) % stride == 0 {
                break (l, kernel, stride, padding);
            }
        };
        let x = uniform(&mut r, batch, in_c, l);
        let w = uniform(&mut r, out_c, in_c, kernel);
        let bias: Vec<f64> = (0..out_c).map(|_| r.gen_range(-1.0..1.0)).collect();

        let (out, cache) = conv1d_forward(x.clone(), &w, &bias, stride, padding).unwrap();
        let cot = uniform(&mut r, batch, out_c, out.length());
        let (gx, mut gw, gb) = conv1d_backward(&cot, &cache, &w, stride, padding).unwrap();
        if fault == Some(Fault::ConvBackward) {
            gw.data_mut()[0] += 1.0;
        }

        worst = worst.max(fd_worst(&x, &gx, |xp| {
            let (o, _) = conv1d_forward(xp.clone(), &w, &bias, stride, padding).unwrap();
            inner(&o, &cot)
        }));
        worst = worst.max(fd_worst(&w, &gw, |wp| {
            let (o, _) = conv1d_forward(x.clone(), wp, &bias, stride, padding).unwrap();
            inner(&o, &cot)
        }));
        let gb_t = Tensor3::from_vec(1, 1, out_c, gb).unwrap();
        let bias_t = Tensor3::from_vec(1, 1, out_c, bias.clone()).unwrap();
        worst = worst.max(fd_worst(&bias_t, &gb_t, |bp| {
            let (o, _) = conv1d_forward(x.clone(), &w, bp.row(0, 0), stride, padding).unwrap();
            inner(&o, &cot)
        }));
    }
    LayerCheck {
        layer: "conv1d",
        worst_rel_err: worst,
        tolerance: DEFAULT_TOLERANCE,
    }
}

fn check_deconv(seeds: &[u64]) -> LayerCheck {
    let mut worst = 0.0f64;
    for &seed in seeds {
        let mut r = rng::seeded(seed);
        let (batch, in_c, out_c) = (r.gen_range(1..=2), r.gen_range(1..=4), r.gen_range(1..=4));
        let l = r.gen_range(2..=8usize);
        let (kernel, stride) = if r.gen_bool(0.5) { (2, 2) } else { (3, 1) };
        let x = uniform(&mut r, batch, in_c, l);
        let w = uniform(&mut r, in_c, out_c, kernel);
        let bias: Vec<f64> = (0..out_c).map(|_| r.gen_range(-1.0..1.0)).collect();

        let (out, cache) = deconv1d_forward(x.clone(), &w, &bias, stride).unwrap();
        let cot = uniform(&mut r, batch, out_c, out.length());
        let (gx, gw, gb) = deconv1d_backward(&cot, &cache, &w, stride).unwrap();

        worst = worst.max(fd_worst(&x, &gx, |xp| {
            let (o, _) = deconv1d_forward(xp.clone(), &w, &bias, stride).unwrap();
            inner(&o, &cot)
        }));
        worst = worst.max(fd_worst(&w, &gw, |wp| {
            let (o, _) = deconv1d_forward(x.clone(), wp, &bias, stride).unwrap();
            inner(&o, &cot)
        }));
        let gb_t = Tensor3::from_vec(1, 1, out_c, gb).unwrap();
        let bias_t = Tensor3::from_vec(1, 1, out_c, bias.clone()).unwrap();
        worst = worst.max(fd_worst(&bias_t, &gb_t, |bp| {
            let (o, _) = deconv1d_forward(x.clone(), &w, bp.row(0, 0), stride).unwrap();
            inner(&o, &cot)
        }));
    }
    LayerCheck {
        layer: "deconv1d",
        worst_rel_err: worst,
        tolerance: DEFAULT_TOLERANCE,
    }
}

fn check_maxpool(seeds: &[u64]) -> LayerCheck {
    let mut worst = 0.0f64;
    for &seed in seeds {
        let mut r = rng::seeded(seed.wrapping_add(0x706f6f6c));
        let (batch, channels) = (r.gen_range(1..=2), r.gen_range(1..=4));
        let l = 2 * r.gen_range(2..=8usize);
        // Redraw until window values are well separated; finite differences
        // near a tie would cross the argmax switch.
        let x = loop {
            let cand = uniform(&mut r, batch, channels, l);
            let mut ok = true;
            'scan: for b in 0..batch {
                for c in 0..channels {
                    let row = cand.row(b, c);
                    for t in 0..l / 2 {
                        if (row[2 * t] - row[2 * t + 1]).abs() < 100.0 * FD_STEP {
                            ok = false;
                            break 'scan;
                        }
                    }
                }
            }
            if ok {
                break cand;
            }
        };
        let (out, cache) = maxpool1d_forward(&x, 2, 2).unwrap();
        let cot = uniform(&mut r, batch, channels, out.length());
        let gx = maxpool1d_backward(&cot, &cache).unwrap();
        worst = worst.max(fd_worst(&x, &gx, |xp| {
            let (o, _) = maxpool1d_forward(xp, 2, 2).unwrap();
            inner(&o, &cot)
        }));
    }
    LayerCheck {
        layer: "maxpool1d",
        worst_rel_err: worst,
        tolerance: DEFAULT_TOLERANCE,
    }
}

fn check_relu(seeds: &[u64]) -> LayerCheck {
    let mut worst = 0.0f64;
    for &seed in seeds {
        let mut r = rng::seeded(seed.wrapping_add(0x72656c75));
        let (batch, channels, l) = (r.gen_range(1..=2), r.gen_range(1..=4), r.gen_range(4..=16));
        // Keep values away from the kink at zero.
        let mut x = uniform(&mut r, batch, channels, l);
        for v in x.data_mut() {
            if v.abs() < 1e-3 {
                *v += if *v >= 0.0 { 1e-2 } else { -1e-2 };
            }
        }
        let (out, cache) = relu_forward(x.clone());
        let cot = uniform(&mut r, batch, channels, out.length());
        let gx = relu_backward(&cot, &cache).unwrap();
        worst = worst.max(fd_worst(&x, &gx, |xp| {
            let (o, _) = relu_forward(xp.clone());
            inner(&o, &cot)
        }));
    }
    LayerCheck {
        layer: "relu",
        worst_rel_err: worst,
        tolerance: DEFAULT_TOLERANCE,
    }
}

fn check_softmax_xent(seeds: &[u64]) -> LayerCheck {
    let mut worst = 0.0f64;
    for &seed in seeds {
        let mut r = rng::seeded(seed.wrapping_add(0x786e7400));
        let (batch, classes, l) = (r.gen_range(1..=2), r.gen_range(2..=4), r.gen_range(2..=16));
        let logits = uniform(&mut r, batch, classes, l);
        let labels = LabelMatrix::from_vec(
            batch,
            l,
            (0..batch * l).map(|_| r.gen_range(0..classes)).collect(),
        )
        .unwrap();
        let (_, probs) = softmax_xent_forward(&logits, &labels).unwrap();
        let grad = softmax_xent_backward(&probs, &labels).unwrap();
        worst = worst.max(fd_worst(&logits, &grad, |lp| {
            let (loss, _) = softmax_xent_forward(lp, &labels).unwrap();
            loss
        }));
    }
    LayerCheck {
        layer: "softmax_xent",
        worst_rel_err: worst,
        tolerance: DEFAULT_TOLERANCE,
    }
}

fn check_end_to_end(seeds: &[u64]) -> LayerCheck {
    let mut worst = 0.0f64;
    for &seed in seeds {
        let cfg = TUnetConfig {
            input_channels: 2,
            series_length: 8,
            num_classes: 2,
            depth: 1,
            base_channels: 4,
            conv_kernel: 3,
            seed,
        };
        let mut r = rng::seeded(seed.wrapping_add(0x6e657400));
        // Nudge every parameter off its init: freshly built nets have zero
        // biases, so fully clamped conv windows land pre-activations exactly
        // on the ReLU kink, where central differences disagree with the
        // subgradient by construction.
        let mut params = build::<f64>(&cfg).unwrap();
        for p in params.iter_mut() {
            for v in p.tensor.data_mut() {
                *v += r.gen_range(-0.1..0.1);
            }
        }
        let x = uniform(&mut r, 1, 2, 8);
        let labels = LabelMatrix::from_vec(1, 8, (0..8).map(|_| r.gen_range(0..2)).collect()).unwrap();

        let (logits, cache) = forward(&params, x.clone(), &cfg).unwrap();
        let (_, probs) = softmax_xent_forward(&logits, &labels).unwrap();
        let grad_logits = softmax_xent_backward(&probs, &labels).unwrap();
        let grads = backward(&params, &cache, &grad_logits, &cfg).unwrap();

        for (pi, param) in params.iter().enumerate() {
            let analytic = &grads.iter().nth(pi).unwrap().tensor;
            for i in 0..param.tensor.numel() {
                let eval_at = |delta: f64| -> f64 {
                    let mut perturbed = params.clone();
                    let target = perturbed.iter_mut().nth(pi).unwrap();
                    target.tensor.data_mut()[i] += delta;
                    let (lg, _) = forward(&perturbed, x.clone(), &cfg).unwrap();
                    let (loss, _) = softmax_xent_forward(&lg, &labels).unwrap();
                    loss
                };
                let numeric = (eval_at(FD_STEP) - eval_at(-FD_STEP)) / (2.0 * FD_STEP);
                worst = worst.max(rel_err(analytic.data()[i], numeric));
            }
        }
    }
    LayerCheck {
        layer: "end_to_end",
        worst_rel_err: worst,
        tolerance: DEFAULT_TOLERANCE,
    }
}

/// Run the full suite over the given seeds.
pub fn run(seeds: &[u64]) -> GradcheckReport {
    run_with_fault(seeds, None)
}

/// As [`run`], with an optional deliberate corruption for failure-path tests.
pub fn run_with_fault(seeds: &[u64], fault: Option<Fault>) -> GradcheckReport {
    GradcheckReport {
        checks: vec![
            check_conv(seeds, fault),
            check_deconv(seeds),
            check_maxpool(seeds),
            check_relu(seeds),
            check_softmax_xent(seeds),
            check_end_to_end(seeds),
        ],
    }
}

/// The seeds the CLI uses.
pub fn default_seeds(base: u64) -> Vec<u64> {
    (0..5).map(|i| base.wrapping_add(i)).collect()
}

//! Finite-difference verification of the analytic gradients.
//!
//! Runs a tiny two-block network in training mode (batch statistics, no
//! dropout) and compares every parameter's backpropagated gradient against
//! a central difference of the loss.

use serde::{Deserialize, Serialize};

use super::net::{tiny_config, Batch, Network};
use super::train::softmax_ce_for_check;
use super::CnnConfig;
use crate::error::Result;
use crate::rng::{gaussian, rng_from};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_parameter: String,
    pub parameters_checked: usize,
    pub tolerance: f64,
    pub pass: bool,
}

/// The input geometry the default check uses: 4 examples of 2 x 32.
pub const CHECK_INPUT_LEN: usize = 32;
pub const CHECK_BATCH: usize = 4;
pub const CHECK_CLASSES: usize = 3;

pub fn default_check_config(seed: u64) -> CnnConfig {
    tiny_config(CHECK_CLASSES, seed)
}

fn check_batch(seed: u64) -> (Batch, Vec<usize>) {
    let mut rng = rng_from(seed, &[0x67726164]);
    let mut x = Batch::zeros(CHECK_BATCH, 2, CHECK_INPUT_LEN);
    for v in x.data.iter_mut() {
        *v = gaussian(&mut rng);
    }
    let labels = (0..CHECK_BATCH).map(|i| i % CHECK_CLASSES).collect();
    (x, labels)
}

/// Loss of a network clone on a fixed batch, training-mode statistics but
/// no running-stat mutation, so it acts as a pure function of the params.
fn loss_of(net: &Network, x: &Batch, labels: &[usize], scale: f64) -> f64 {
    let mut n = net.clone();
    let (logits, _) = n.forward_train(x, None, false);
    softmax_ce_for_check(&logits, labels, n.cfg.num_classes, scale).0
}

/// Analytic gradients for the same loss, flattened per parameter tensor.
fn analytic_grads(net: &Network, x: &Batch, labels: &[usize], scale: f64) -> Vec<Vec<f64>> {
    let mut n = net.clone();
    n.zero_grads();
    let (logits, tape) = n.forward_train(x, None, false);
    let (_, dlogits) = softmax_ce_for_check(&logits, labels, n.cfg.num_classes, scale);
    n.backward(&tape, &dlogits);
    let mut grads = Vec::new();
    n.visit_params(|p| grads.push(p.g.clone()));
    grads
}

/// Compare analytic and central-difference gradients for every parameter
/// of `cfg` (step 1e-4 relative to the parameter magnitude).
pub fn gradient_check(cfg: &CnnConfig, tolerance: f64) -> Result<GradCheckReport> {
    cfg.validate_structure()?;
    let net = Network::new(cfg, CHECK_INPUT_LEN)?;
    let (x, labels) = check_batch(cfg.seed ^ 0xabcd);

    let analytic = analytic_grads(&net, &x, &labels, 1.0);
    let names = net.param_names();

    let mut max_rel = 0.0f64;
    let mut worst = String::new();
    let mut checked = 0usize;
    for (t, name) in names.iter().enumerate() {
        let len = analytic[t].len();
        for i in 0..len {
            let mut plus = net.clone();
            let mut minus = net.clone();
            let mut theta = 0.0;
            let mut idx = 0usize;
            plus.visit_params(|p| {
                if idx == t {
                    theta = p.v[i];
                }
                idx += 1;
            });
            let h = 1e-4 * theta.abs().max(1.0);
            let mut idx_p = 0usize;
            plus.visit_params(|p| {
                if idx_p == t {
                    p.v[i] += h;
                }
                idx_p += 1;
            });
            let mut idx_m = 0usize;
            minus.visit_params(|p| {
                if idx_m == t {
                    p.v[i] -= h;
                }
                idx_m += 1;
            });
            let numeric =
                (loss_of(&plus, &x, &labels, 1.0) - loss_of(&minus, &x, &labels, 1.0)) / (2.0 * h);
            let ga = analytic[t][i];
            // Near-zero gradients are compared absolutely at the same scale.
            let rel = (ga - numeric).abs() / (ga.abs() + numeric.abs()).max(1e-3);
            if rel > max_rel {
                max_rel = rel;
                worst = format!("{name}[{i}]");
            }
            checked += 1;
        }
    }

    Ok(GradCheckReport {
        max_relative_error: max_rel,
        worst_parameter: worst,
        parameters_checked: checked,
        tolerance,
        pass: max_rel < tolerance,
    })
}

/// Gradients must be finite even for an all-zero batch, where batch norm
/// leans on its epsilon stabilizer.
pub fn zero_input_gradients_finite(cfg: &CnnConfig) -> Result<bool> {
    cfg.validate_structure()?;
    let mut net = Network::new(cfg, CHECK_INPUT_LEN)?;
    let x = Batch::zeros(CHECK_BATCH, 2, CHECK_INPUT_LEN);
    let labels: Vec<usize> = (0..CHECK_BATCH).map(|i| i % cfg.num_classes).collect();
    net.zero_grads();
    let (logits, tape) = net.forward_train(&x, None, false);
    let (_, dlogits) = softmax_ce_for_check(&logits, &labels, cfg.num_classes, 1.0);
    net.backward(&tape, &dlogits);
    let mut ok = true;
    net.visit_params(|p| ok &= p.g.iter().all(|g| g.is_finite()));
    Ok(ok)
}

/// Doubling the loss must double every gradient (linearity of backprop).
pub fn loss_scaling_is_linear(cfg: &CnnConfig, rel_tol: f64) -> Result<bool> {
    cfg.validate_structure()?;
    let net = Network::new(cfg, CHECK_INPUT_LEN)?;
    let (x, labels) = check_batch(cfg.seed ^ 0x77);
    let g1 = analytic_grads(&net, &x, &labels, 1.0);
    let g2 = analytic_grads(&net, &x, &labels, 2.0);
    for (a, b) in g1.iter().zip(g2.iter()) {
        for (&x1, &x2) in a.iter().zip(b.iter()) {
            let err = (x2 - 2.0 * x1).abs();
            if err > rel_tol * x1.abs().max(1e-12) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

//! From-scratch CNN over 2 x L feature matrices.
//!
//! Fixed architecture: 6 convolutional blocks (conv, batch norm, leaky
//! ReLU, max pool) followed by 3 fully connected blocks (linear, dropout,
//! leaky ReLU) and a final linear layer. The first convolution uses a
//! 2-row kernel that collapses the I/Q rows; everything after runs along
//! the feature length. All arithmetic is f64 and sequential, so training
//! is bit-reproducible from its seeds.

mod gradcheck;
mod net;
mod train;

pub use gradcheck::{
    default_check_config, gradient_check, loss_scaling_is_linear, zero_input_gradients_finite,
    GradCheckReport,
    CHECK_BATCH, CHECK_CLASSES, CHECK_INPUT_LEN,
};
pub use net::{tiny_config, Network, NetworkCheckpoint};
pub use train::{
    evaluate, stratified_split, train, train_on, EvalResult, TrainHistory, TrainedModel,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vfdt::FeatureMatrix;

/// One convolutional block's shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvBlockCfg {
    pub out_channels: usize,
    /// Row extent of the kernel; 2 in the first block (mixes I and Q), 1 after.
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub pool_w: usize,
}

/// Network architecture parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub conv_blocks: Vec<ConvBlockCfg>,
    pub fc_widths: Vec<usize>,
    pub dropout_p: f64,
    pub leaky_slope: f64,
    pub num_classes: usize,
    pub seed: u64,
}

impl CnnConfig {
    /// The default stack: channels (8, 16, 32, 32, 64, 64) with 1x7
    /// kernels (2x7 first), pool width 2, FC widths (256, 128, 64),
    /// dropout 0.5, leaky slope 0.1.
    pub fn default_for(num_classes: usize, seed: u64) -> Self {
        let ch = [8usize, 16, 32, 32, 64, 64];
        Self {
            conv_blocks: ch
                .iter()
                .enumerate()
                .map(|(i, &c)| ConvBlockCfg {
                    out_channels: c,
                    kernel_h: if i == 0 { 2 } else { 1 },
                    kernel_w: 7,
                    pool_w: 2,
                })
                .collect(),
            fc_widths: vec![256, 128, 64],
            dropout_p: 0.5,
            leaky_slope: 0.1,
            num_classes,
            seed,
        }
    }

    /// Structural checks that any buildable network must satisfy.
    pub fn validate_structure(&self) -> Result<()> {
        if self.conv_blocks.is_empty() {
            return Err(Error::validation("at least one conv block required"));
        }
        for (i, b) in self.conv_blocks.iter().enumerate() {
            let want_h = if i == 0 { 2 } else { 1 };
            if b.kernel_h != want_h {
                return Err(Error::validation(format!(
                    "conv block {i} kernel_h must be {want_h}, got {}",
                    b.kernel_h
                )));
            }
            if b.out_channels == 0 || b.kernel_w == 0 || b.pool_w == 0 {
                return Err(Error::validation(format!("conv block {i} has a zero dimension")));
            }
        }
        if self.fc_widths.iter().any(|&w| w == 0) {
            return Err(Error::validation("fc widths must be positive"));
        }
        if self.num_classes < 2 {
            return Err(Error::validation("num_classes must be >= 2"));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::validation("dropout_p must lie in [0, 1)"));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::validation("leaky_slope must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Full contract: the fixed 6-conv / 3-FC arity on top of the
    /// structural checks. Training enforces this; diagnostic tools like
    /// the gradient check may build smaller structurally-valid networks.
    pub fn validate(&self) -> Result<()> {
        self.validate_structure()?;
        if self.conv_blocks.len() != 6 {
            return Err(Error::validation(format!(
                "architecture requires exactly 6 conv blocks, got {}",
                self.conv_blocks.len()
            )));
        }
        if self.fc_widths.len() != 3 {
            return Err(Error::validation(format!(
                "architecture requires exactly 3 fully connected blocks, got {}",
                self.fc_widths.len()
            )));
        }
        Ok(())
    }
}

/// Training-loop parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub train_fraction: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 30, train_fraction: 0.9, batch_size: 64, learning_rate: 1e-3, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::validation("epochs must be >= 1"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::validation("train_fraction must lie in (0, 1)"));
        }
        if self.batch_size < 1 {
            return Err(Error::validation("batch_size must be >= 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::validation("learning_rate must be positive"));
        }
        Ok(())
    }
}

/// One feature matrix with its device class and capture domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub features: FeatureMatrix,
    pub device_label: usize,
    pub domain_label: String,
}

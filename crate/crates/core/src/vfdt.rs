//! Variance fractal dimension trajectories.
//!
//! A window of a real sampled signal gets a dimension estimate from the
//! variance of its lagged increments:
//!
//! ```text
//! D = 2 - ln(var(x[j+lag] - x[j])) / (2 ln(lag))
//! ```
//!
//! clamped to [1, 2]. Sliding the window along the signal produces the
//! trajectory. For a discrete Brownian path (Hurst exponent 0.5) the
//! increment variance at lag d is d, so D = 1.5 at every lag; rougher
//! signals land higher, smoother ones lower, within the calibrated range.
//!
//! The estimator is single-scale: it reads the variance at one fixed lag
//! instead of regressing over several, which keeps every window cheap and
//! makes the trajectory well-defined per window. Because the variance is
//! not normalized, the absolute signal scale shifts the whole trajectory;
//! callers that compare trajectories across sources apply a fixed,
//! documented gain to place their signals inside the informative band.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::IqFrame;

/// Sliding-window parameters for trajectory computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VfdtConfig {
    /// Window length W in samples.
    pub window_len: usize,
    /// Offset S between consecutive windows; S < W overlaps windows.
    pub window_offset: usize,
    /// Increment lag d; must be at least 2 (ln 1 = 0 breaks the ratio).
    pub increment_lag: usize,
    /// Floor applied to degenerate variances before taking the log.
    pub variance_floor: f64,
}

impl Default for VfdtConfig {
    fn default() -> Self {
        Self { window_len: 256, window_offset: 64, increment_lag: 4, variance_floor: 1e-12 }
    }
}

impl VfdtConfig {
    pub fn new(window_len: usize, window_offset: usize, increment_lag: usize) -> Self {
        Self { window_len, window_offset, increment_lag, variance_floor: 1e-12 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_offset < 1 || self.window_offset > self.window_len {
            return Err(Error::validation(format!(
                "window_offset must satisfy 1 <= S <= W, got S={} W={}",
                self.window_offset, self.window_len
            )));
        }
        if self.increment_lag < 2 {
            return Err(Error::validation(
                "increment_lag must be >= 2 (lag 1 makes the log denominator zero)",
            ));
        }
        if self.increment_lag >= self.window_len || self.window_len - self.increment_lag < 2 {
            return Err(Error::validation(format!(
                "need at least 2 increments per window: W={} lag={}",
                self.window_len, self.increment_lag
            )));
        }
        if !(self.variance_floor > 0.0) {
            return Err(Error::validation("variance_floor must be positive"));
        }
        Ok(())
    }

    /// Number of full windows a signal of `source_len` samples yields.
    pub fn trace_len(&self, source_len: usize) -> usize {
        if source_len < self.window_len {
            0
        } else {
            (source_len - self.window_len) / self.window_offset + 1
        }
    }
}

/// The dimension trajectory of one real signal.
#[derive(Debug, Clone, PartialEq)]
pub struct VfdtTrace {
    pub values: Vec<f64>,
    pub config: VfdtConfig,
    pub source_len: usize,
}

impl VfdtTrace {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn std(&self) -> f64 {
        let m = self.mean();
        (self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
            / self.values.len() as f64)
            .sqrt()
    }
}

/// Paired I/Q trajectory matrix, the 2 x L classifier input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    cols: usize,
    /// Row 0 then row 1, each `cols` long.
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_rows(row0: Vec<f64>, row1: Vec<f64>) -> Result<Self> {
        if row0.len() != row1.len() || row0.is_empty() {
            return Err(Error::validation(format!(
                "rows must have identical nonzero length, got {} and {}",
                row0.len(),
                row1.len()
            )));
        }
        if row0.iter().chain(row1.iter()).any(|v| !v.is_finite()) {
            return Err(Error::data("feature matrix contains non-finite values"));
        }
        let cols = row0.len();
        let mut data = row0;
        data.extend(row1);
        Ok(Self { cols, data })
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Dimension estimate for one window.
pub fn window_dimension(window: &[f64], lag: usize, variance_floor: f64) -> Result<f64> {
    if lag < 2 {
        return Err(Error::validation("increment lag must be >= 2"));
    }
    if window.len() < lag || window.len() - lag < 2 {
        return Err(Error::validation(format!(
            "window of {} samples leaves fewer than 2 increments at lag {}",
            window.len(),
            lag
        )));
    }
    let n = window.len() - lag;
    let mut sum = 0.0f64;
    for j in 0..n {
        sum += window[j + lag] - window[j];
    }
    let mean = sum / n as f64;
    let mut ss = 0.0f64;
    for j in 0..n {
        let d = (window[j + lag] - window[j]) - mean;
        ss += d * d;
    }
    let var = (ss / (n - 1) as f64).max(variance_floor);
    let d = 2.0 - var.ln() / (2.0 * (lag as f64).ln());
    Ok(d.clamp(1.0, 2.0))
}

/// Full trajectory of a real signal. Trailing partial windows are discarded.
pub fn vfdt(signal: &[f64], config: &VfdtConfig) -> Result<VfdtTrace> {
    config.validate()?;
    if signal.len() < config.window_len {
        return Err(Error::validation(format!(
            "signal of {} samples is shorter than one window of {}",
            signal.len(),
            config.window_len
        )));
    }
    let count = config.trace_len(signal.len());
    let mut values = Vec::with_capacity(count);
    for i in 0..count {
        let start = i * config.window_offset;
        let window = &signal[start..start + config.window_len];
        values.push(window_dimension(window, config.increment_lag, config.variance_floor)?);
    }
    Ok(VfdtTrace { values, config: *config, source_len: signal.len() })
}

/// Fit a trace to exactly `target_len` values: truncate from the end, or
/// pad by repeating the final value. Zero-padding would inject 0.0, a value
/// outside the dimension range, so edge replication is used instead.
pub fn normalize_trace_len(values: &[f64], target_len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(target_len);
    if values.len() >= target_len {
        out.extend_from_slice(&values[..target_len]);
    } else {
        out.extend_from_slice(values);
        let last = *values.last().expect("non-empty trace");
        out.resize(target_len, last);
    }
    out
}

/// Build the 2 x L matrix from a frame: row 0 is the I trajectory, row 1
/// the Q trajectory, each length-normalized to `target_len`.
pub fn feature_matrix(
    frame: &IqFrame,
    config: &VfdtConfig,
    target_len: usize,
) -> Result<FeatureMatrix> {
    if target_len == 0 {
        return Err(Error::validation("target feature length must be positive"));
    }
    let ti = vfdt(frame.i_samples(), config)?;
    let tq = vfdt(frame.q_samples(), config)?;
    FeatureMatrix::from_rows(
        normalize_trace_len(&ti.values, target_len),
        normalize_trace_len(&tq.values, target_len),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian, rng_from};
    use rand::Rng;

    #[test]
    fn constant_window_clamps_to_two() {
        let window = vec![3.25f64; 64];
        assert_eq!(window_dimension(&window, 4, 1e-12).unwrap(), 2.0);
    }

    #[test]
    fn linear_ramp_clamps_to_two() {
        let window: Vec<f64> = (0..64).map(|j| 0.5 * j as f64).collect();
        assert_eq!(window_dimension(&window, 4, 1e-12).unwrap(), 2.0);
    }

    #[test]
    fn lag_one_is_rejected() {
        let window = vec![0.0f64; 64];
        assert!(window_dimension(&window, 1, 1e-12).is_err());
        assert!(window_dimension(&window, 0, 1e-12).is_err());
    }

    #[test]
    fn window_barely_too_short_is_rejected() {
        let window = vec![0.0f64; 6];
        assert!(window_dimension(&window[..5], 4, 1e-12).is_err());
        assert!(window_dimension(&window, 4, 1e-12).is_ok());
    }

    #[test]
    fn brownian_windows_average_one_point_five() {
        // H = 0.5 paths have D = 2 - H = 1.5; Monte-Carlo over 1000
        // independent 1024-sample cumulative-sum paths at lag 4.
        let mut rng = rng_from(2024, &[100]);
        let mut sum = 0.0;
        let n = 1000;
        for _ in 0..n {
            let mut acc = 0.0;
            let path: Vec<f64> = (0..1024)
                .map(|_| {
                    acc += gaussian(&mut rng);
                    acc
                })
                .collect();
            sum += window_dimension(&path, 4, 1e-12).unwrap();
        }
        let mean = sum / n as f64;
        assert!((mean - 1.5).abs() < 0.05, "Brownian mean dimension {mean}");
    }

    #[test]
    fn white_noise_trace_mean_regression() {
        // Frozen Monte-Carlo constant for unit-variance white Gaussian
        // noise at W=256, S=64, lag=4: mean dimension 1.7509.
        let mut rng = rng_from(77, &[5]);
        let signal: Vec<f64> = (0..66_000).map(|_| gaussian(&mut rng)).collect();
        let trace = vfdt(&signal, &VfdtConfig::default()).unwrap();
        let mean = trace.mean();
        assert!((mean - 1.7509).abs() < 0.015, "white noise mean {mean}");
    }

    #[test]
    fn trace_length_arithmetic() {
        let cfg = VfdtConfig::new(256, 64, 4);
        let signal = vec![0.0f64; 4096];
        let trace = vfdt(&signal, &cfg).unwrap();
        assert_eq!(trace.values.len(), 61);
        assert_eq!(cfg.trace_len(4096), 61);
    }

    #[test]
    fn trace_length_formula_holds_over_random_shapes() {
        let mut rng = rng_from(5, &[6]);
        for _ in 0..200 {
            let w = rng.gen_range(8..300usize);
            let s = rng.gen_range(1..=w);
            let lag = rng.gen_range(2..(w - 2).max(3)).min(w - 2);
            let len = w + rng.gen_range(0..2000usize);
            let cfg = VfdtConfig::new(w, s, lag);
            if cfg.validate().is_err() {
                continue;
            }
            let signal: Vec<f64> = (0..len).map(|_| gaussian(&mut rng)).collect();
            let trace = vfdt(&signal, &cfg).unwrap();
            assert_eq!(trace.values.len(), (len - w) / s + 1, "W={w} S={s} len={len}");
        }
    }

    #[test]
    fn short_signal_is_an_error_not_an_empty_trace() {
        let cfg = VfdtConfig::default();
        let signal = vec![0.0f64; 255];
        assert!(vfdt(&signal, &cfg).is_err());
    }

    #[test]
    fn dc_offset_invariance_is_exact() {
        // Quantized samples plus a power-of-two offset make every addition
        // exact, so the increment cancellation is bit-exact.
        let mut rng = rng_from(13, &[7]);
        let quantum = (1u64 << 20) as f64;
        let signal: Vec<f64> = (0..2048)
            .map(|_| ((gaussian(&mut rng) * quantum).round()) / quantum)
            .collect();
        let shifted: Vec<f64> = signal.iter().map(|v| v + 0.5).collect();
        let cfg = VfdtConfig::default();
        let a = vfdt(&signal, &cfg).unwrap();
        let b = vfdt(&shifted, &cfg).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn clamp_range_holds_on_random_windows() {
        let mut rng = rng_from(17, &[8]);
        for _ in 0..2000 {
            let scale = 10f64.powf(rng.gen_range(-8.0..8.0));
            let kind: u8 = rng.gen_range(0..4);
            let window: Vec<f64> = match kind {
                0 => (0..64).map(|_| gaussian(&mut rng) * scale).collect(),
                1 => {
                    let mut acc = 0.0;
                    (0..64)
                        .map(|_| {
                            acc += gaussian(&mut rng) * scale;
                            acc
                        })
                        .collect()
                }
                2 => vec![scale; 64],
                _ => (0..64).map(|j| scale * j as f64).collect(),
            };
            let d = window_dimension(&window, 4, 1e-12).unwrap();
            assert!((1.0..=2.0).contains(&d), "dimension {d} out of range");
        }
    }

    #[test]
    fn determinism_bit_identical() {
        let mut rng = rng_from(19, &[9]);
        let signal: Vec<f64> = (0..3000).map(|_| gaussian(&mut rng)).collect();
        let cfg = VfdtConfig::default();
        let a = vfdt(&signal, &cfg).unwrap();
        let b = vfdt(&signal, &cfg).unwrap();
        assert!(a.values.iter().zip(b.values.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn rougher_mixtures_have_higher_dimension() {
        // Mixture of a large slow sinusoid and calibrated white noise; the
        // amplitudes put every mix inside the estimator's [1, 2] band so
        // the roughness ordering is visible rather than clamped.
        let mut rng = rng_from(23, &[10]);
        let n = 66_000;
        let smooth: Vec<f64> = (0..n)
            .map(|t| 27.0 * (2.0 * std::f64::consts::PI * t as f64 / 128.0).sin())
            .collect();
        let noise: Vec<f64> = (0..n).map(|_| 0.66 * gaussian(&mut rng)).collect();
        let cfg = VfdtConfig::default();
        let mut prev = 0.0;
        for alpha in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let mix: Vec<f64> = smooth
                .iter()
                .zip(noise.iter())
                .map(|(s, w)| (1.0 - alpha) * s + alpha * w)
                .collect();
            let mean = vfdt(&mix, &cfg).unwrap().mean();
            assert!(mean >= prev, "alpha {alpha}: {mean} < {prev}");
            prev = mean;
        }
    }

    #[test]
    fn feature_matrix_truncates_and_pads() {
        let mut rng = rng_from(29, &[11]);
        let cfg = VfdtConfig::default();
        // Trace of exactly 61 values from 4096 samples.
        let make_frame = |len: usize, rng: &mut rand_chacha::ChaCha8Rng| {
            let i: Vec<f64> = (0..len).map(|_| gaussian(rng)).collect();
            let q: Vec<f64> = (0..len).map(|_| gaussian(rng)).collect();
            IqFrame::new(i, q, 1e6).unwrap()
        };
        let frame = make_frame(4096, &mut rng);
        let exact = feature_matrix(&frame, &cfg, 61).unwrap();
        let raw = vfdt(frame.i_samples(), &cfg).unwrap();
        assert_eq!(exact.row(0), &raw.values[..]);

        let truncated = feature_matrix(&frame, &cfg, 51).unwrap();
        assert_eq!(truncated.row(0), &raw.values[..51]);

        let padded = feature_matrix(&frame, &cfg, 70).unwrap();
        assert_eq!(&padded.row(0)[..61], &raw.values[..]);
        assert!(padded.row(0)[61..].iter().all(|&v| v == raw.values[60]));
    }

    #[test]
    fn feature_matrix_rejects_short_frames() {
        let frame = IqFrame::new(vec![0.0; 100], vec![0.0; 100], 1e6).unwrap();
        assert!(feature_matrix(&frame, &VfdtConfig::default(), 16).is_err());
    }

    #[test]
    fn config_json_schema() {
        let cfg = VfdtConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["window_len", "window_offset", "increment_lag", "variance_floor"] {
            assert!(value.get(key).is_some(), "missing {key}");
        }
        let back: VfdtConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }
}

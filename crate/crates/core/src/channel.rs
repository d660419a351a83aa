//! Propagation domains: flat gain, short FIR multipath, and AWGN at a
//! requested SNR. Each profile stands in for one capture location.

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::gaussian;
use crate::signal::{interleave_iq, IqFrame};

pub const MAX_TAPS: usize = 8;

/// One synthetic capture domain.
///
/// `snr_db: None` is the noiseless sentinel; with a single unit tap and
/// unit gain the profile is an exact identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelProfile {
    pub domain_id: String,
    pub snr_db: Option<f64>,
    /// Flat complex gain as (re, im).
    pub flat_gain: (f64, f64),
    /// FIR taps as (re, im), tap 0 first. At most 8 taps.
    pub multipath_taps: Vec<(f64, f64)>,
    pub seed: u64,
}

impl ChannelProfile {
    /// Unit-gain, single-tap, noiseless profile.
    pub fn identity(domain_id: impl Into<String>) -> Self {
        Self {
            domain_id: domain_id.into(),
            snr_db: None,
            flat_gain: (1.0, 0.0),
            multipath_taps: vec![(1.0, 0.0)],
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.multipath_taps.is_empty() || self.multipath_taps.len() > MAX_TAPS {
            return Err(Error::validation(format!(
                "multipath_taps must hold 1..={MAX_TAPS} taps, got {}",
                self.multipath_taps.len()
            )));
        }
        if self.multipath_taps[0] == (0.0, 0.0) {
            return Err(Error::validation("first multipath tap must be nonzero"));
        }
        if let Some(snr) = self.snr_db {
            if !(-10.0..=60.0).contains(&snr) {
                return Err(Error::validation(format!("snr_db {snr} outside [-10, 60]")));
            }
        }
        Ok(())
    }
}

/// Pass a frame through a channel profile.
///
/// The signal is scaled by the flat gain, convolved with the taps keeping
/// the input length (tail truncated), then complex white Gaussian noise is
/// added, scaled so the realized SNR matches the request exactly.
pub fn apply_channel(
    frame: &IqFrame,
    profile: &ChannelProfile,
    rng: &mut ChaCha8Rng,
) -> Result<IqFrame> {
    profile.validate()?;
    let gain = Complex64::new(profile.flat_gain.0, profile.flat_gain.1);
    let taps: Vec<Complex64> =
        profile.multipath_taps.iter().map(|&(re, im)| Complex64::new(re, im)).collect();

    let x = interleave_iq(frame.i_samples(), frame.q_samples());
    let n = x.len();
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    for (k, &h) in taps.iter().enumerate() {
        if h == Complex64::new(0.0, 0.0) {
            continue;
        }
        for idx in k..n {
            y[idx] += h * (gain * x[idx - k]);
        }
    }

    if let Some(snr_db) = profile.snr_db {
        let signal_power: f64 = y.iter().map(|s| s.norm_sqr()).sum::<f64>() / n as f64;
        if signal_power <= 0.0 {
            return Err(Error::data("zero-power frame cannot be scaled to a target SNR"));
        }
        let target_noise_power = signal_power * 10f64.powf(-snr_db / 10.0);
        let mut noise: Vec<Complex64> =
            (0..n).map(|_| Complex64::new(gaussian(rng), gaussian(rng))).collect();
        let raw_power: f64 = noise.iter().map(|s| s.norm_sqr()).sum::<f64>() / n as f64;
        let scale = (target_noise_power / raw_power).sqrt();
        for (s, nz) in y.iter_mut().zip(noise.iter_mut()) {
            *s += *nz * scale;
        }
    }

    let (i, q) = crate::signal::split_iq(&y);
    let mut out = IqFrame::new(i, q, frame.sample_rate_hz())?;
    out.source_label = frame.source_label.clone();
    out.domain_label = Some(profile.domain_id.clone());
    Ok(out)
}

fn polar(mag: f64, phase: f64) -> (f64, f64) {
    (mag * phase.cos(), mag * phase.sin())
}

/// Normalize taps to unit total power so a domain changes the signal's
/// structure, not its broadband level.
fn unit_power_taps(raw: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let total: f64 = raw.iter().map(|&(re, im)| re * re + im * im).sum();
    let s = total.sqrt();
    raw.iter().map(|&(re, im)| (re / s, im / s)).collect()
}

/// The five standard domains, ordered by increasing severity: D1 is a
/// near, line-of-sight channel; D3 adds dense echoes and low SNR; R1 and
/// R2 use fixed pseudo-random echo phases. Gains are unit-magnitude
/// phase rotations and tap sets are unit power, so domains reshape the
/// signal without moving its overall level.
///
/// The same set ships as `domains/standard5.json`.
pub fn standard_domains() -> Vec<ChannelProfile> {
    vec![
        ChannelProfile {
            domain_id: "D1".into(),
            snr_db: Some(30.0),
            flat_gain: polar(1.0, 0.0),
            multipath_taps: vec![(1.0, 0.0)],
            seed: 101,
        },
        ChannelProfile {
            domain_id: "D2".into(),
            snr_db: Some(21.0),
            flat_gain: polar(1.0, 0.44),
            multipath_taps: unit_power_taps(&[(1.0, 0.0), polar(0.30, -1.05)]),
            seed: 102,
        },
        ChannelProfile {
            domain_id: "D3".into(),
            snr_db: Some(14.0),
            flat_gain: polar(1.0, 1.40),
            multipath_taps: unit_power_taps(&[
                (1.0, 0.0),
                polar(0.42, 2.27),
                polar(0.28, -0.79),
                polar(0.16, 1.40),
            ]),
            seed: 103,
        },
        ChannelProfile {
            domain_id: "R1".into(),
            snr_db: Some(16.0),
            flat_gain: polar(1.0, 2.20),
            multipath_taps: unit_power_taps(&[
                (1.0, 0.0),
                polar(0.33, 0.91),
                polar(0.22, -2.68),
                polar(0.13, -2.01),
                polar(0.08, 2.53),
            ]),
            seed: 104,
        },
        ChannelProfile {
            domain_id: "R2".into(),
            snr_db: Some(12.0),
            flat_gain: polar(1.0, -0.70),
            multipath_taps: unit_power_taps(&[
                (1.0, 0.0),
                polar(0.38, -1.07),
                polar(0.25, 0.22),
                polar(0.16, 3.13),
                polar(0.10, 2.86),
                polar(0.06, -1.99),
            ]),
            seed: 105,
        },
    ]
}

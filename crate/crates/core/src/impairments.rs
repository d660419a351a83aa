//! Hardware-impaired transmitter synthesis.
//!
//! A synthetic device is a 4-QAM transmitter followed by a parameterized
//! impairment chain: IQ imbalance, power-amplifier nonlinearity, carrier
//! frequency offset, oscillator phase noise, and DC offset. Each stage with
//! its neutral parameter is an exact identity, and the whole chain is
//! reproducible from (device seed, payload hash).

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{fnv1a, gaussian, rng_from};
use crate::signal::{CaptureStream, IqFrame};

/// 4-QAM modulation parameters. Rectangular pulses, Gray-coded bit pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationConfig {
    /// Samples each symbol is held for.
    pub samples_per_symbol: usize,
    /// Average symbol energy; the constellation is scaled by its square root.
    pub symbol_energy: f64,
}

impl Default for ModulationConfig {
    fn default() -> Self {
        Self { samples_per_symbol: 8, symbol_energy: 1.0 }
    }
}

/// One synthetic device's impairment parameters.
///
/// `iip3_dbm: None` models an ideally linear amplifier (zero cubic term).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub device_id: String,
    pub iip3_dbm: Option<f64>,
    pub iq_amp_imbalance_db: f64,
    pub iq_phase_imbalance_deg: f64,
    pub phase_noise_fmax_hz: f64,
    pub cfo_hz: f64,
    /// DC bias as (I, Q).
    pub dc_offset: (f64, f64),
    pub seed: u64,
}

impl DeviceProfile {
    /// A device with every impairment at its neutral value.
    pub fn clean(device_id: impl Into<String>, seed: u64) -> Self {
        Self {
            device_id: device_id.into(),
            iip3_dbm: None,
            iq_amp_imbalance_db: 0.0,
            iq_phase_imbalance_deg: 0.0,
            phase_noise_fmax_hz: 0.0,
            cfo_hz: 0.0,
            dc_offset: (0.0, 0.0),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.iip3_dbm {
            if !(10.0..=50.0).contains(&p) {
                return Err(Error::validation(format!("iip3_dbm {p} outside [10, 50]")));
            }
        }
        if !(0.0..=10.0).contains(&self.iq_amp_imbalance_db) {
            return Err(Error::validation(format!(
                "iq_amp_imbalance_db {} outside [0, 10]",
                self.iq_amp_imbalance_db
            )));
        }
        if !(0.0..=100.0).contains(&self.phase_noise_fmax_hz) {
            return Err(Error::validation(format!(
                "phase_noise_fmax_hz {} outside [0, 100]",
                self.phase_noise_fmax_hz
            )));
        }
        Ok(())
    }
}

/// Order of the default transmit chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ImpairmentStage {
    IqImbalance,
    PaNonlinearity,
    CarrierOffset,
    PhaseNoise,
    DcOffset,
}

pub const DEFAULT_CHAIN: [ImpairmentStage; 5] = [
    ImpairmentStage::IqImbalance,
    ImpairmentStage::PaNonlinearity,
    ImpairmentStage::CarrierOffset,
    ImpairmentStage::PhaseNoise,
    ImpairmentStage::DcOffset,
];

/// Gray map for bit pairs: 00 -> (+,+), 01 -> (-,+), 11 -> (-,-), 10 -> (+,-).
const GRAY_4QAM: [(f64, f64); 4] = [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)];

/// Modulate a bit vector onto a 4-QAM baseband stream with rectangular
/// pulses. Stream length is `bits/2 * samples_per_symbol`.
pub fn qam4_modulate(bits: &[u8], cfg: &ModulationConfig, fs: f64) -> Result<CaptureStream> {
    if bits.len() % 2 != 0 {
        return Err(Error::validation(format!("bit count {} is odd", bits.len())));
    }
    if bits.is_empty() {
        return Err(Error::validation("empty payload"));
    }
    if cfg.samples_per_symbol < 1 {
        return Err(Error::validation("samples_per_symbol must be >= 1"));
    }
    if !(cfg.symbol_energy > 0.0) {
        return Err(Error::validation("symbol_energy must be positive"));
    }
    let rail = (cfg.symbol_energy / 2.0).sqrt();
    let mut samples = Vec::with_capacity(bits.len() / 2 * cfg.samples_per_symbol);
    for pair in bits.chunks_exact(2) {
        let idx = (pair[0] as usize) * 2 + pair[1] as usize;
        let (i, q) = GRAY_4QAM[idx];
        let sym = Complex64::new(i * rail, q * rail);
        for _ in 0..cfg.samples_per_symbol {
            samples.push(sym);
        }
    }
    CaptureStream::new(samples, fs)
}

/// Third-order intercept amplitude squared for a dBm figure (1 ohm
/// reference): A^2 = 2 * 10^((P - 30) / 10).
pub fn iip3_amplitude_sq(iip3_dbm: f64) -> f64 {
    2.0 * 10f64.powf((iip3_dbm - 30.0) / 10.0)
}

/// Cubic-polynomial memoryless PA model with output saturation.
///
/// Below the AM/AM peak (input amplitude A/2 where A is the intercept
/// amplitude) the gain follows y = x (1 - c3 |x|^2) with c3 = 4 / (3 A^2).
/// Above it the output amplitude saturates at the peak value A/3 with the
/// phase preserved, the behavior of the usual cubic-polynomial block; the
/// unclamped cubic would swing back through zero and invert, which no
/// amplifier does.
pub fn pa_cubic(x: &CaptureStream, iip3_dbm: f64) -> CaptureStream {
    let a_sq = iip3_amplitude_sq(iip3_dbm);
    let c3 = 4.0 / (3.0 * a_sq);
    let a_sat = a_sq.sqrt() / 2.0;
    let y_sat = a_sq.sqrt() / 3.0;
    let out: Vec<Complex64> = x
        .samples()
        .iter()
        .map(|&s| {
            let mag = s.norm();
            if mag <= a_sat {
                s * (1.0 - c3 * mag * mag)
            } else {
                s * (y_sat / mag)
            }
        })
        .collect();
    let mut stream = CaptureStream::new(out, x.sample_rate_hz()).expect("finite PA output");
    stream.source_label = x.source_label.clone();
    stream.domain_label = x.domain_label.clone();
    stream
}

/// Split-gain IQ imbalance: the I rail gains +amp_db/2, the Q rail loses
/// the same, and the Q mixer leaks a `sin(phase)` share of I.
pub fn iq_imbalance(x: &CaptureStream, amp_db: f64, phase_deg: f64) -> CaptureStream {
    if amp_db == 0.0 && phase_deg == 0.0 {
        return x.clone();
    }
    let gi = 10f64.powf(amp_db / 40.0);
    let gq = 10f64.powf(-amp_db / 40.0);
    let phase = phase_deg.to_radians();
    let (sin_p, cos_p) = phase.sin_cos();
    let out: Vec<Complex64> = x
        .samples()
        .iter()
        .map(|s| Complex64::new(gi * s.re, gq * (s.im * cos_p + s.re * sin_p)))
        .collect();
    let mut stream = CaptureStream::new(out, x.sample_rate_hz()).expect("finite imbalance output");
    stream.source_label = x.source_label.clone();
    stream.domain_label = x.domain_label.clone();
    stream
}

/// Oscillator phase noise as integrated filtered-Gaussian frequency
/// deviation. White Gaussian noise is low-passed with a single-pole IIR at
/// `cutoff_hz`, peak-normalized to `fmax_hz`, then integrated into a phase
/// that rotates the signal. `fmax_hz = 0` returns the input unchanged.
pub fn phase_noise(
    x: &CaptureStream,
    fmax_hz: f64,
    cutoff_hz: f64,
    rng: &mut ChaCha8Rng,
) -> Result<CaptureStream> {
    if fmax_hz == 0.0 {
        return Ok(x.clone());
    }
    if fmax_hz < 0.0 {
        return Err(Error::validation("fmax_hz must be non-negative"));
    }
    let fs = x.sample_rate_hz();
    if !(cutoff_hz > 0.0 && cutoff_hz < fs / 2.0) {
        return Err(Error::validation(format!(
            "cutoff_hz must lie in (0, fs/2), got {cutoff_hz} at fs {fs}"
        )));
    }
    let alpha = (-2.0 * std::f64::consts::PI * cutoff_hz / fs).exp();
    let n = x.len();
    let mut freq = Vec::with_capacity(n);
    let mut state = 0.0f64;
    let mut peak = 0.0f64;
    for _ in 0..n {
        state = alpha * state + (1.0 - alpha) * gaussian(rng);
        freq.push(state);
        peak = peak.max(state.abs());
    }
    let scale = if peak > 0.0 { fmax_hz / peak } else { 0.0 };
    let mut phase = 0.0f64;
    let two_pi_over_fs = 2.0 * std::f64::consts::PI / fs;
    let out: Vec<Complex64> = x
        .samples()
        .iter()
        .zip(freq.iter())
        .map(|(s, f)| {
            phase += two_pi_over_fs * f * scale;
            let (sin_p, cos_p) = phase.sin_cos();
            s * Complex64::new(cos_p, sin_p)
        })
        .collect();
    let mut stream = CaptureStream::new(out, fs)?;
    stream.source_label = x.source_label.clone();
    stream.domain_label = x.domain_label.clone();
    Ok(stream)
}

/// Carrier frequency offset: y[n] = x[n] e^{j 2 pi f n / fs}.
pub fn apply_cfo(x: &CaptureStream, cfo_hz: f64) -> Result<CaptureStream> {
    if cfo_hz == 0.0 {
        return Ok(x.clone());
    }
    let fs = x.sample_rate_hz();
    if cfo_hz.abs() >= fs / 2.0 {
        return Err(Error::validation(format!(
            "cfo {cfo_hz} Hz aliases at sample rate {fs}"
        )));
    }
    let step = 2.0 * std::f64::consts::PI * cfo_hz / fs;
    let out: Vec<Complex64> = x
        .samples()
        .iter()
        .enumerate()
        .map(|(n, s)| {
            let (sin_p, cos_p) = (step * n as f64).sin_cos();
            s * Complex64::new(cos_p, sin_p)
        })
        .collect();
    let mut stream = CaptureStream::new(out, fs)?;
    stream.source_label = x.source_label.clone();
    stream.domain_label = x.domain_label.clone();
    Ok(stream)
}

fn add_dc(x: &CaptureStream, dc: (f64, f64)) -> CaptureStream {
    if dc == (0.0, 0.0) {
        return x.clone();
    }
    let offset = Complex64::new(dc.0, dc.1);
    let out: Vec<Complex64> = x.samples().iter().map(|s| s + offset).collect();
    let mut stream = CaptureStream::new(out, x.sample_rate_hz()).expect("finite dc output");
    stream.source_label = x.source_label.clone();
    stream.domain_label = x.domain_label.clone();
    stream
}

/// Run a payload through a device's full impairment chain.
///
/// The per-frame RNG is seeded from (profile seed, payload hash), so the
/// same device, payload, and seed always produce the identical frame, and
/// frames for different payloads are independent.
pub fn transmit(
    profile: &DeviceProfile,
    payload_bits: &[u8],
    cfg: &ModulationConfig,
    fs: f64,
) -> Result<IqFrame> {
    transmit_ordered(profile, payload_bits, cfg, fs, &DEFAULT_CHAIN)
}

/// `transmit` with an explicit stage order.
pub fn transmit_ordered(
    profile: &DeviceProfile,
    payload_bits: &[u8],
    cfg: &ModulationConfig,
    fs: f64,
    order: &[ImpairmentStage],
) -> Result<IqFrame> {
    profile.validate()?;
    if profile.cfo_hz.abs() > fs / 10.0 {
        return Err(Error::validation(format!(
            "cfo {} Hz exceeds fs/10 at fs {fs}",
            profile.cfo_hz
        )));
    }
    let mut rng = rng_from(profile.seed, &[fnv1a(payload_bits)]);
    let mut stream = qam4_modulate(payload_bits, cfg, fs)?;
    for stage in order {
        stream = match stage {
            ImpairmentStage::IqImbalance => iq_imbalance(
                &stream,
                profile.iq_amp_imbalance_db,
                profile.iq_phase_imbalance_deg,
            ),
            ImpairmentStage::PaNonlinearity => match profile.iip3_dbm {
                Some(p) => pa_cubic(&stream, p),
                None => stream,
            },
            ImpairmentStage::CarrierOffset => apply_cfo(&stream, profile.cfo_hz)?,
            ImpairmentStage::PhaseNoise => {
                // Fixed cutoff for device synthesis; the sweep harness
                // exercises the cutoff parameter directly.
                phase_noise(&stream, profile.phase_noise_fmax_hz, DEVICE_PN_CUTOFF_HZ, &mut rng)?
            }
            ImpairmentStage::DcOffset => add_dc(&stream, profile.dc_offset),
        };
    }
    let mut frame = IqFrame::from_stream(&stream)?;
    frame.source_label = Some(profile.device_id.clone());
    frame.domain_label = None;
    Ok(frame)
}

/// Low-pass cutoff of the frequency-deviation filter used when a device
/// profile applies phase noise.
pub const DEVICE_PN_CUTOFF_HZ: f64 = 1000.0;

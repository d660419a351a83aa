//! IQ sample containers, cf32 file I/O, and burst extraction from
//! continuous capture streams.
//!
//! The on-disk format is the SDR-ecosystem "cf32" layout: interleaved
//! little-endian 32-bit floats, in-phase sample first, quadrature second.
//! A JSON sidecar at `<path>.json` carries the sample rate and optional
//! labels:
//!
//! ```json
//! { "sample_rate_hz": 45000000.0, "source_label": "dev7", "domain_label": "D1" }
//! ```

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Moving-average window used by the burst power gate.
pub const POWER_GATE_WINDOW: usize = 64;

/// One contiguous recording of complex baseband samples.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureStream {
    samples: Vec<Complex64>,
    sample_rate_hz: f64,
    pub source_label: Option<String>,
    pub domain_label: Option<String>,
}

impl CaptureStream {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::data("capture stream must hold at least one sample"));
        }
        if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
            return Err(Error::validation(format!(
                "sample_rate_hz must be positive and finite, got {sample_rate_hz}"
            )));
        }
        if samples.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(Error::data("capture stream contains non-finite samples"));
        }
        Ok(Self { samples, sample_rate_hz, source_label: None, domain_label: None })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }
}

/// One transmission burst split into real I and Q vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct IqFrame {
    i_samples: Vec<f64>,
    q_samples: Vec<f64>,
    sample_rate_hz: f64,
    pub source_label: Option<String>,
    pub domain_label: Option<String>,
}

impl IqFrame {
    pub fn new(i_samples: Vec<f64>, q_samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if i_samples.is_empty() || i_samples.len() != q_samples.len() {
            return Err(Error::data(format!(
                "I and Q must have identical nonzero length, got {} and {}",
                i_samples.len(),
                q_samples.len()
            )));
        }
        if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
            return Err(Error::validation(format!(
                "sample_rate_hz must be positive and finite, got {sample_rate_hz}"
            )));
        }
        if i_samples.iter().chain(q_samples.iter()).any(|v| !v.is_finite()) {
            return Err(Error::data("frame contains non-finite samples"));
        }
        Ok(Self { i_samples, q_samples, sample_rate_hz, source_label: None, domain_label: None })
    }

    /// Split a complex stream into an IqFrame carrying the stream's labels.
    pub fn from_stream(stream: &CaptureStream) -> Result<Self> {
        let (i, q) = split_iq(stream.samples());
        let mut frame = Self::new(i, q, stream.sample_rate_hz())?;
        frame.source_label = stream.source_label.clone();
        frame.domain_label = stream.domain_label.clone();
        Ok(frame)
    }

    /// Re-interleave into a complex stream, preserving labels.
    pub fn to_stream(&self) -> CaptureStream {
        let samples = interleave_iq(&self.i_samples, &self.q_samples);
        let mut stream = CaptureStream::new(samples, self.sample_rate_hz)
            .expect("frame invariants imply a valid stream");
        stream.source_label = self.source_label.clone();
        stream.domain_label = self.domain_label.clone();
        stream
    }

    pub fn i_samples(&self) -> &[f64] {
        &self.i_samples
    }

    pub fn q_samples(&self) -> &[f64] {
        &self.q_samples
    }

    pub fn len(&self) -> usize {
        self.i_samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i_samples.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }
}

pub fn split_iq(samples: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    let i = samples.iter().map(|s| s.re).collect();
    let q = samples.iter().map(|s| s.im).collect();
    (i, q)
}

pub fn interleave_iq(i: &[f64], q: &[f64]) -> Vec<Complex64> {
    i.iter().zip(q.iter()).map(|(&re, &im)| Complex64::new(re, im)).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Sidecar {
    sample_rate_hz: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    source_label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    domain_label: Option<String>,
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    std::path::PathBuf::from(s)
}

/// Read an interleaved little-endian float32 IQ file plus its JSON sidecar.
pub fn read_cf32(path: impl AsRef<Path>) -> Result<CaptureStream> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    if bytes.is_empty() {
        return Err(Error::format(format!("{}: empty cf32 file", path.display())));
    }
    if bytes.len() % 8 != 0 {
        return Err(Error::format(format!(
            "{}: byte length {} is not a multiple of 8 (float32 I/Q pairs)",
            path.display(),
            bytes.len()
        )));
    }

    let side = sidecar_path(path);
    let side_text = fs::read_to_string(&side).map_err(|e| {
        Error::metadata(format!("sidecar {} unreadable: {e}", side.display()))
    })?;
    let meta: Sidecar = serde_json::from_str(&side_text)
        .map_err(|e| Error::metadata(format!("sidecar {} invalid: {e}", side.display())))?;
    if !(meta.sample_rate_hz > 0.0) || !meta.sample_rate_hz.is_finite() {
        return Err(Error::metadata(format!(
            "sidecar sample_rate_hz must be positive, got {}",
            meta.sample_rate_hz
        )));
    }

    let mut samples = Vec::with_capacity(bytes.len() / 8);
    for pair in bytes.chunks_exact(8) {
        let re = f32::from_le_bytes([pair[0], pair[1], pair[2], pair[3]]) as f64;
        let im = f32::from_le_bytes([pair[4], pair[5], pair[6], pair[7]]) as f64;
        if !re.is_finite() || !im.is_finite() {
            return Err(Error::data(format!(
                "{}: non-finite sample at index {}",
                path.display(),
                samples.len()
            )));
        }
        samples.push(Complex64::new(re, im));
    }

    let mut stream = CaptureStream::new(samples, meta.sample_rate_hz)?;
    stream.source_label = meta.source_label;
    stream.domain_label = meta.domain_label;
    Ok(stream)
}

/// Write a stream as interleaved little-endian float32 plus JSON sidecar.
///
/// Samples are narrowed to f32 on disk; `read_cf32` inverts the write
/// bit-exactly whenever the stream values are f32-representable.
pub fn write_cf32(stream: &CaptureStream, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(stream.len() * 8);
    for s in stream.samples() {
        bytes.extend_from_slice(&(s.re as f32).to_le_bytes());
        bytes.extend_from_slice(&(s.im as f32).to_le_bytes());
    }
    fs::write(path, bytes)?;

    let meta = Sidecar {
        sample_rate_hz: stream.sample_rate_hz(),
        source_label: stream.source_label.clone(),
        domain_label: stream.domain_label.clone(),
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

/// Extract transmission bursts from a continuous capture.
///
/// Gate: causal moving-average power over the last `POWER_GATE_WINDOW`
/// samples (shorter at the head of the stream), opening when the average
/// crosses `power_threshold` and closing when it falls below half of it.
/// Runs shorter than `min_frame_len` are dropped; longer than
/// `max_frame_len` are truncated.
pub fn extract_frames(
    stream: &CaptureStream,
    power_threshold: f64,
    min_frame_len: usize,
    max_frame_len: usize,
) -> Result<Vec<IqFrame>> {
    if !(power_threshold > 0.0) || !power_threshold.is_finite() {
        return Err(Error::validation("power_threshold must be positive"));
    }
    if min_frame_len < 1 || min_frame_len > max_frame_len {
        return Err(Error::validation(format!(
            "need 1 <= min_frame_len <= max_frame_len, got {min_frame_len}..{max_frame_len}"
        )));
    }

    let samples = stream.samples();
    let fall_threshold = power_threshold / 2.0;

    let mut frames = Vec::new();
    let mut window_sum = 0.0f64;
    let mut gate_open = false;
    let mut run_start = 0usize;

    let close_run = |start: usize, end: usize, frames: &mut Vec<IqFrame>| {
        let run = &samples[start..end];
        if run.len() < min_frame_len {
            return;
        }
        let run = &run[..run.len().min(max_frame_len)];
        let (i, q) = split_iq(run);
        let mut frame = IqFrame::new(i, q, stream.sample_rate_hz())
            .expect("stream invariants imply valid frames");
        frame.source_label = stream.source_label.clone();
        frame.domain_label = stream.domain_label.clone();
        frames.push(frame);
    };

    for (n, s) in samples.iter().enumerate() {
        window_sum += s.norm_sqr();
        if n >= POWER_GATE_WINDOW {
            window_sum -= samples[n - POWER_GATE_WINDOW].norm_sqr();
        }
        let window_len = (n + 1).min(POWER_GATE_WINDOW);
        let avg_power = window_sum / window_len as f64;

        if !gate_open && avg_power > power_threshold {
            gate_open = true;
            run_start = n;
        } else if gate_open && avg_power < fall_threshold {
            close_run(run_start, n, &mut frames);
            gate_open = false;
        }
    }
    if gate_open {
        close_run(run_start, samples.len(), &mut frames);
    }
    Ok(frames)
}

//! Synthetic device population generation.

use rand::Rng;

use crate::error::{Error, Result};
use crate::impairments::DeviceProfile;
use crate::rng::{derive_seed, rng_from};

/// Parameter ranges devices are drawn from, uniformly and independently.
///
/// The sweep-tested impairment levels anchor the IIP3, imbalance, and
/// phase-noise ranges. The CFO range corresponds to roughly +/- 1 ppm
/// oscillator error at a 2.4 GHz carrier; it also keeps the imbalance
/// beat the offset writes into the dimension trajectory slower than the
/// trajectory's own sampling, so the oscillation stays resolvable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationRanges {
    pub iip3_dbm: (f64, f64),
    pub amp_imbalance_db: (f64, f64),
    pub phase_imbalance_deg: (f64, f64),
    pub phase_noise_fmax_hz: (f64, f64),
    pub cfo_hz: (f64, f64),
    pub dc_magnitude: (f64, f64),
}

impl Default for PopulationRanges {
    fn default() -> Self {
        Self {
            iip3_dbm: (20.0, 40.0),
            amp_imbalance_db: (0.0, 8.0),
            phase_imbalance_deg: (0.0, 3.0),
            phase_noise_fmax_hz: (10.0, 50.0),
            cfo_hz: (-2000.0, 2000.0),
            dc_magnitude: (0.0, 0.05),
        }
    }
}

const MAX_POPULATION: usize = 10_000;
const MAX_ATTEMPTS_PER_DEVICE: usize = 10_000;

/// Fraction of each range under which two devices count as colliding on
/// that parameter.
const MIN_SEPARATION: f64 = 0.05;

fn param_vector(p: &DeviceProfile) -> [f64; 6] {
    [
        p.iip3_dbm.expect("generated profiles always set iip3"),
        p.iq_amp_imbalance_db,
        p.iq_phase_imbalance_deg,
        p.phase_noise_fmax_hz,
        p.cfo_hz,
        (p.dc_offset.0 * p.dc_offset.0 + p.dc_offset.1 * p.dc_offset.1).sqrt(),
    ]
}

fn spans(r: &PopulationRanges) -> [f64; 6] {
    [
        r.iip3_dbm.1 - r.iip3_dbm.0,
        r.amp_imbalance_db.1 - r.amp_imbalance_db.0,
        r.phase_imbalance_deg.1 - r.phase_imbalance_deg.0,
        r.phase_noise_fmax_hz.1 - r.phase_noise_fmax_hz.0,
        r.cfo_hz.1 - r.cfo_hz.0,
        r.dc_magnitude.1 - r.dc_magnitude.0,
    ]
}

/// True when two profiles sit within 5% of range on every parameter at
/// once, which would make them near-clones.
pub fn too_close(a: &DeviceProfile, b: &DeviceProfile, ranges: &PopulationRanges) -> bool {
    let (va, vb, sp) = (param_vector(a), param_vector(b), spans(ranges));
    va.iter()
        .zip(vb.iter())
        .zip(sp.iter())
        .all(|((x, y), s)| (x - y).abs() < MIN_SEPARATION * s)
}

/// Draw `n` device profiles, rejecting candidates that collide with an
/// already-accepted device on all parameters simultaneously.
pub fn generate_population(n: usize, seed: u64) -> Result<Vec<DeviceProfile>> {
    generate_population_in(n, seed, &PopulationRanges::default())
}

pub fn generate_population_in(
    n: usize,
    seed: u64,
    ranges: &PopulationRanges,
) -> Result<Vec<DeviceProfile>> {
    if n < 2 {
        return Err(Error::validation("population needs at least 2 devices"));
    }
    if n > MAX_POPULATION {
        return Err(Error::capacity(format!(
            "population of {n} exceeds the separation constraint's capacity ({MAX_POPULATION})"
        )));
    }
    let mut rng = rng_from(seed, &[0x706f70]);
    let mut devices: Vec<DeviceProfile> = Vec::with_capacity(n);
    for idx in 0..n {
        let mut attempts = 0;
        let profile = loop {
            attempts += 1;
            if attempts > MAX_ATTEMPTS_PER_DEVICE {
                return Err(Error::capacity(format!(
                    "could not place device {idx} after {MAX_ATTEMPTS_PER_DEVICE} draws"
                )));
            }
            let dc_mag = rng.gen_range(ranges.dc_magnitude.0..=ranges.dc_magnitude.1);
            let dc_phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let candidate = DeviceProfile {
                device_id: format!("dev{idx:02}"),
                iip3_dbm: Some(rng.gen_range(ranges.iip3_dbm.0..=ranges.iip3_dbm.1)),
                iq_amp_imbalance_db: rng
                    .gen_range(ranges.amp_imbalance_db.0..=ranges.amp_imbalance_db.1),
                iq_phase_imbalance_deg: rng
                    .gen_range(ranges.phase_imbalance_deg.0..=ranges.phase_imbalance_deg.1),
                phase_noise_fmax_hz: rng
                    .gen_range(ranges.phase_noise_fmax_hz.0..=ranges.phase_noise_fmax_hz.1),
                cfo_hz: rng.gen_range(ranges.cfo_hz.0..=ranges.cfo_hz.1),
                dc_offset: (dc_mag * dc_phase.cos(), dc_mag * dc_phase.sin()),
                seed: derive_seed(seed, &[0x646576, idx as u64]),
            };
            if devices.iter().all(|d| !too_close(d, &candidate, ranges)) {
                break candidate;
            }
        };
        devices.push(profile);
    }
    Ok(devices)
}

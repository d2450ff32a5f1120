//! V2V link model: Rician small-scale fading, fourth-power path loss,
//! Shannon capacity and the per-slot packet success probability.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::config::ScenarioConfig;
use crate::mobility::Geometry;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("link distance must be positive, got {0}")]
    Distance(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelParams {
    /// Hz.
    pub bandwidth: f64,
    /// Linear transmit SNR.
    pub snr: f64,
    /// Linear Rician factor.
    pub rician_k: f64,
    /// Seconds.
    pub slot_secs: f64,
    /// Bits.
    pub packet_bits: f64,
}

impl ChannelParams {
    pub const PATH_LOSS_EXPONENT: i32 = 4;

    pub fn from_config(config: &ScenarioConfig) -> Self {
        Self {
            bandwidth: config.bandwidth,
            snr: config.snr,
            rician_k: config.rician_k,
            slot_secs: config.slot_secs,
            packet_bits: config.packet_bits(),
        }
    }
}

/// Draws `h = sqrt(k/(k+1)) e^{jθ} + sqrt(1/(k+1)) ω`, with θ uniform on
/// `[0, 2π)` and ω unit-variance circular complex Gaussian. `E|h|² = 1`.
/// An infinite `k` yields a pure line-of-sight phasor.
pub fn sample_rician_gain<R: Rng + ?Sized>(rng: &mut R, k: f64) -> Complex64 {
    let theta = rng.random::<f64>() * 2.0 * PI;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    let scatter = Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
    if k.is_infinite() {
        return Complex64::from_polar(1.0, theta);
    }
    let los = (k / (k + 1.0)).sqrt();
    let nlos = (1.0 / (k + 1.0)).sqrt();
    Complex64::from_polar(los, theta) + scatter * nlos
}

/// Shannon capacity in bit/s; zero when there is no line of sight.
pub fn capacity(
    distance: f64,
    gain: Complex64,
    params: &ChannelParams,
    line_of_sight: bool,
) -> Result<f64, ChannelError> {
    if !(distance > 0.0) {
        return Err(ChannelError::Distance(distance));
    }
    if !line_of_sight {
        return Ok(0.0);
    }
    let snr = params.snr * gain.norm_sqr() * distance.powi(-ChannelParams::PATH_LOSS_EXPONENT);
    Ok(params.bandwidth * snr.ln_1p() / std::f64::consts::LN_2)
}

/// Linear ramp in the slot throughput `g = T c`: 0 below one packet, 1 above
/// five packets.
pub fn success_probability(capacity: f64, params: &ChannelParams) -> f64 {
    let g = params.slot_secs * capacity;
    let s = params.packet_bits;
    if g < s {
        0.0
    } else if g > 5.0 * s {
        1.0
    } else {
        (g - s) / (4.0 * s)
    }
}

/// Per-slot link state: geometry plus symmetric success probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkSnapshot {
    pub geometry: Geometry,
    prob: Vec<f64>,
}

impl LinkSnapshot {
    pub fn from_parts(geometry: Geometry, prob: Vec<f64>) -> Self {
        assert_eq!(prob.len(), geometry.len() * geometry.len());
        Self { geometry, prob }
    }

    pub fn len(&self) -> usize {
        self.geometry.len()
    }

    pub fn is_empty(&self) -> bool {
        self.geometry.is_empty()
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.geometry.adjacent(i, j)
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.prob[i * self.len() + j]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.geometry.neighbors(i)
    }
}

/// One fading draw per adjacent unordered pair, in `(i, j), i < j` order.
pub fn build_link_snapshot<R: Rng + ?Sized>(
    geometry: Geometry,
    params: &ChannelParams,
    rng: &mut R,
) -> LinkSnapshot {
    let n = geometry.len();
    let mut prob = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            if !geometry.adjacent(i, j) {
                continue;
            }
            let h = sample_rician_gain(rng, params.rician_k);
            // Co-located transceivers have unbounded capacity.
            let p = match capacity(geometry.distance(i, j), h, params, true) {
                Ok(c) => success_probability(c, params),
                Err(ChannelError::Distance(_)) => 1.0,
            };
            prob[i * n + j] = p;
            prob[j * n + i] = p;
        }
    }
    LinkSnapshot { geometry, prob }
}

//! Power-normalized coefficients: medium-time power, asymmetric noise
//! suppression, temporal masking, spectral weight smoothing, mean power
//! normalization and a power-law rate-level nonlinearity.
//!
//! Each stage works on a frames x channels matrix of nonnegative powers.
//! Recurrences run along the frame axis independently per channel.

use ndarray::{Array2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::dsp::{power_spectrum, stft, AudioBuffer, StftConfig};
use crate::error::{Error, Result};
use crate::filterbank::{project, FilterBank, FilterKind};

/// Floor on the medium-time power when forming the transfer ratio.
const RATIO_FLOOR: f64 = 1e-20;
/// Floor on the running mean power.
const MEAN_POWER_FLOOR: f64 = 1e-20;
/// Forgetting factor of the running mean power.
const MEAN_POWER_FORGET: f64 = 0.999;
/// Initial low-pass level relative to the first frame.
const ANS_INIT_RATIO: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PncConfig {
    pub m_window: usize,
    pub lambda_t: f64,
    pub mu_t: f64,
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub smooth_neighbors: usize,
    pub power_exponent: f64,
}

impl Default for PncConfig {
    fn default() -> Self {
        Self {
            m_window: 2,
            lambda_t: 0.85,
            mu_t: 0.2,
            lambda_a: 0.999,
            lambda_b: 0.5,
            smooth_neighbors: 4,
            power_exponent: 1.0 / 15.0,
        }
    }
}

impl PncConfig {
    /// Temporal-masking constant as printed in the original description.
    pub const PAPER_LITERAL_MU_T: f64 = 2.0;

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: String| Error::Config {
            path: format!("pnc.{field}"),
            message,
        };
        if !(self.lambda_t > 0.0 && self.lambda_t < 1.0) {
            return Err(bad("lambda_t", format!("must be in (0, 1), got {}", self.lambda_t)));
        }
        if !(self.mu_t > 0.0) || !self.mu_t.is_finite() {
            return Err(bad("mu_t", format!("must be positive, got {}", self.mu_t)));
        }
        if !(self.lambda_a > 0.0 && self.lambda_a < 1.0) {
            return Err(bad("lambda_a", format!("must be in (0, 1), got {}", self.lambda_a)));
        }
        if !(self.lambda_b > 0.0 && self.lambda_b <= self.lambda_a) {
            return Err(bad(
                "lambda_b",
                format!("must be in (0, lambda_a], got {}", self.lambda_b),
            ));
        }
        if !(self.power_exponent > 0.0) || !self.power_exponent.is_finite() {
            return Err(bad(
                "power_exponent",
                format!("must be positive, got {}", self.power_exponent),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Short-time channel power.
    P,
    /// Medium-time power.
    Q,
    /// Asymmetric low-pass (noise floor estimate).
    QLe,
    /// Rectified difference `max(Q - Q_le, 0)`.
    Q0,
    /// After temporal masking.
    R,
    /// Smoothed transfer ratio.
    S,
    /// Ratio applied to the short-time power.
    T,
    /// Mean-power normalized.
    U,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPowerMatrix {
    pub data: Array2<f64>,
    pub stage: Stage,
}

impl ChannelPowerMatrix {
    pub fn new(data: Array2<f64>, stage: Stage) -> Result<Self> {
        if data.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::invalid("channel power must be nonnegative"));
        }
        Ok(Self { data, stage })
    }

    pub fn n_frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_channels(&self) -> usize {
        self.data.ncols()
    }
}

/// `P[m, l]`: squared-normalized gammatone projection of the power spectrum.
pub fn short_time_power(audio: &AudioBuffer, cfg: &StftConfig, fb: &FilterBank) -> Result<ChannelPowerMatrix> {
    if fb.kind() != FilterKind::GammatoneSqNorm {
        return Err(Error::invalid(format!(
            "short-time power needs a squared-normalized gammatone bank, got {}",
            fb.kind().name()
        )));
    }
    let power = power_spectrum(&stft(audio, cfg)?)?;
    short_time_power_from_spectrum(power.data(), fb)
}

pub(crate) fn short_time_power_from_spectrum(power: &Array2<f64>, fb: &FilterBank) -> Result<ChannelPowerMatrix> {
    let mut data = project(power, fb)?;
    // projection of nonnegative values by nonnegative weights; clear -0.0
    data.mapv_inplace(|v| v.max(0.0));
    Ok(ChannelPowerMatrix { data, stage: Stage::P })
}

/// Centered moving average over `2M + 1` frames, truncated at the edges.
pub fn medium_time_power(p: &ChannelPowerMatrix, m_window: usize) -> ChannelPowerMatrix {
    let frames = p.n_frames();
    let mut data = Array2::zeros(p.data.raw_dim());
    for m in 0..frames {
        let lo = m.saturating_sub(m_window);
        let hi = (m + m_window).min(frames - 1);
        let count = (hi - lo + 1) as f64;
        let mut row = data.row_mut(m);
        for k in lo..=hi {
            row += &p.data.row(k);
        }
        row.mapv_inplace(|v| v / count);
    }
    ChannelPowerMatrix { data, stage: Stage::Q }
}

/// Asymmetric low-pass floor estimate `Q_le`.
pub fn asymmetric_lowpass(q: &ChannelPowerMatrix, cfg: &PncConfig) -> ChannelPowerMatrix {
    let mut data = Array2::zeros(q.data.raw_dim());
    if q.n_frames() == 0 {
        return ChannelPowerMatrix {
            data,
            stage: Stage::QLe,
        };
    }
    let mut state: Vec<f64> = q.data.row(0).iter().map(|v| ANS_INIT_RATIO * v).collect();
    for (src, mut dst) in q.data.axis_iter(Axis(0)).zip(data.axis_iter_mut(Axis(0))) {
        for ((s, &x), out) in state.iter_mut().zip(src).zip(dst.iter_mut()) {
            let lambda = if x >= *s { cfg.lambda_a } else { cfg.lambda_b };
            *s = lambda * *s + (1.0 - lambda) * x;
            *out = *s;
        }
    }
    ChannelPowerMatrix {
        data,
        stage: Stage::QLe,
    }
}

/// `Q_0 = max(Q - Q_le, 0)`.
pub fn asymmetric_noise_suppression(q: &ChannelPowerMatrix, cfg: &PncConfig) -> ChannelPowerMatrix {
    let floor = asymmetric_lowpass(q, cfg);
    let data = Zip::from(&q.data)
        .and(&floor.data)
        .map_collect(|&x, &le| (x - le).max(0.0));
    ChannelPowerMatrix { data, stage: Stage::Q0 }
}

/// Online peak tracking and the temporal-masking case split.
pub fn temporal_masking(q0: &ChannelPowerMatrix, cfg: &PncConfig) -> ChannelPowerMatrix {
    let mut data = Array2::zeros(q0.data.raw_dim());
    if q0.n_frames() == 0 {
        return ChannelPowerMatrix { data, stage: Stage::R };
    }
    let mut peak: Vec<f64> = q0.data.row(0).to_vec();
    data.row_mut(0).assign(&q0.data.row(0));
    for m in 1..q0.n_frames() {
        let src = q0.data.row(m);
        let mut dst = data.row_mut(m);
        for ((p, &x), out) in peak.iter_mut().zip(src).zip(dst.iter_mut()) {
            let decayed = cfg.lambda_t * *p;
            *out = if x >= decayed { x } else { cfg.mu_t * *p };
            *p = decayed.max(x);
        }
    }
    ChannelPowerMatrix { data, stage: Stage::R }
}

/// Average of `R / Q` over `2N + 1` neighbouring channels (truncated at the
/// edges), multiplied into the short-time power.
pub fn weight_smoothing(
    r: &ChannelPowerMatrix,
    q: &ChannelPowerMatrix,
    p: &ChannelPowerMatrix,
    neighbors: usize,
) -> Result<ChannelPowerMatrix> {
    if r.data.dim() != q.data.dim() || r.data.dim() != p.data.dim() {
        return Err(Error::DimensionMismatch(format!(
            "R {:?}, Q {:?}, P {:?}",
            r.data.dim(),
            q.data.dim(),
            p.data.dim()
        )));
    }
    let channels = r.n_channels();
    let ratio = Zip::from(&r.data)
        .and(&q.data)
        .map_collect(|&rv, &qv| rv / qv.max(RATIO_FLOOR));
    let mut data = Array2::zeros(p.data.raw_dim());
    for ((ratio_row, p_row), mut out) in ratio
        .axis_iter(Axis(0))
        .zip(p.data.axis_iter(Axis(0)))
        .zip(data.axis_iter_mut(Axis(0)))
    {
        for l in 0..channels {
            let lo = l.saturating_sub(neighbors);
            let hi = (l + neighbors).min(channels - 1);
            let mut acc = 0.0;
            for k in lo..=hi {
                acc += ratio_row[k];
            }
            out[l] = p_row[l] * acc / (hi - lo + 1) as f64;
        }
    }
    Ok(ChannelPowerMatrix { data, stage: Stage::T })
}

/// Divide by a running average of the per-frame channel-mean power. The
/// running average starts at the first frame's mean.
pub fn mean_power_normalize(t: &ChannelPowerMatrix) -> ChannelPowerMatrix {
    let mut data = t.data.clone();
    let mut running: Option<f64> = None;
    for mut row in data.axis_iter_mut(Axis(0)) {
        let frame_mean = row.mean().unwrap_or(0.0);
        let mu = match running {
            None => frame_mean,
            Some(prev) => MEAN_POWER_FORGET * prev + (1.0 - MEAN_POWER_FORGET) * frame_mean,
        };
        running = Some(mu);
        let denom = mu.max(MEAN_POWER_FLOOR);
        row.mapv_inplace(|v| v / denom);
    }
    ChannelPowerMatrix { data, stage: Stage::U }
}

pub fn rate_level(u: &ChannelPowerMatrix, exponent: f64) -> Array2<f64> {
    u.data.mapv(|v| v.powf(exponent))
}

/// Run the whole chain on the short-time power `P`.
pub fn power_normalized_coefficients(p: &ChannelPowerMatrix, cfg: &PncConfig) -> Result<Array2<f64>> {
    cfg.validate()?;
    let q = medium_time_power(p, cfg.m_window);
    let q0 = asymmetric_noise_suppression(&q, cfg);
    let r = temporal_masking(&q0, cfg);
    let t = weight_smoothing(&r, &q, p, cfg.smooth_neighbors)?;
    let u = mean_power_normalize(&t);
    Ok(rate_level(&u, cfg.power_exponent))
}

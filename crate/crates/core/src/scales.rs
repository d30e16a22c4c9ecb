//! Frequency scale conversions and the absolute threshold of hearing.
//!
//! All frequencies are in Hz.

use crate::error::{Error, Result};

/// Bark value of `f`: `13 atan(0.00076 f) + 3.5 atan(f / 7500)`.
#[inline]
pub fn hz_to_bark(f: f64) -> f64 {
    13.0 * (0.00076 * f).atan() + 3.5 * (f / 7500.0).atan()
}

/// Absolute threshold of hearing in dB SPL. Undefined at 0 Hz.
pub fn ath_db(f: f64) -> Result<f64> {
    if !(f > 0.0) || !f.is_finite() {
        return Err(Error::invalid(format!(
            "absolute threshold of hearing is undefined at {f} Hz"
        )));
    }
    let khz = f * 1e-3;
    Ok(3.64 * khz.powf(-0.8) - 6.5 * (-0.6 * (khz - 3.3).powi(2)).exp() + 1e-15 * f.powi(4))
}

/// HTK mel scale.
#[inline]
pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

#[inline]
pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Glasberg-Moore equivalent rectangular bandwidth at `f`.
#[inline]
pub fn erb_bandwidth(f: f64) -> f64 {
    24.7 * (4.37 * f / 1000.0 + 1.0)
}

/// ERB-rate (number of ERBs below `f`).
#[inline]
pub fn hz_to_erb_rate(f: f64) -> f64 {
    21.4 * (1.0 + 4.37 * f / 1000.0).log10()
}

#[inline]
pub fn erb_rate_to_hz(e: f64) -> f64 {
    (10f64.powf(e / 21.4) - 1.0) * 1000.0 / 4.37
}

#[cfg(test)]
mod tests {
    use super::*;

    // High-precision (40-digit) evaluations of the closed forms.
    const BARK_1000: f64 = 8.912_246_205_393_677;
    const BARK_7500: f64 = 20.911_520_241_784_265;
    const ATH_1000: f64 = 3.369_066_525_895_342;
    const ATH_3300: f64 = -4.980_884_944_002_541;
    const ATH_100: f64 = 22.952_896_351_667_406;

    #[test]
    fn bark_values() {
        assert_eq!(hz_to_bark(0.0), 0.0);
        assert!((hz_to_bark(1000.0) - BARK_1000).abs() < 1e-12);
        assert!((hz_to_bark(7500.0) - BARK_7500).abs() < 1e-12);
    }

    #[test]
    fn bark_is_strictly_increasing() {
        let mut prev = hz_to_bark(0.0);
        for k in 1..=8000 {
            let b = hz_to_bark(k as f64);
            assert!(b > prev);
            prev = b;
        }
    }

    #[test]
    fn ath_values() {
        assert!((ath_db(1000.0).unwrap() - ATH_1000).abs() < 1e-12);
        assert!((ath_db(3300.0).unwrap() - ATH_3300).abs() < 1e-12);
        assert!((ath_db(100.0).unwrap() - ATH_100).abs() < 1e-11);
        assert!(ath_db(0.0).is_err());
        assert!(ath_db(-5.0).is_err());
    }

    #[test]
    fn ath_minimum_between_2_and_5_khz() {
        let (argmin, _) = (1..=200)
            .map(|k| k as f64 * 40.0)
            .map(|f| (f, ath_db(f).unwrap()))
            .fold((0.0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        assert!(argmin > 2000.0 && argmin < 5000.0, "{argmin}");
    }

    #[test]
    fn mel_values_and_inverse() {
        assert_eq!(hz_to_mel(0.0), 0.0);
        assert!((hz_to_mel(700.0) - 781.172_838_748_031_2).abs() < 1e-9);
        for f in [100.0, 1000.0, 7000.0] {
            assert!((mel_to_hz(hz_to_mel(f)) - f).abs() / f < 1e-9);
        }
    }

    #[test]
    fn erb_values() {
        assert!((erb_bandwidth(0.0) - 24.7).abs() < 1e-12);
        assert!((erb_bandwidth(1000.0) - 132.639).abs() < 1e-9);
        assert!(erb_bandwidth(2000.0) > erb_bandwidth(1000.0));
        for f in [20.0, 440.0, 8000.0] {
            assert!((erb_rate_to_hz(hz_to_erb_rate(f)) - f).abs() / f < 1e-9);
        }
    }
}

//! Mel, gammatone and difference-of-gammatone (DoG) filterbanks sampled on
//! STFT bin frequencies.

use std::fmt::Write as _;

use ndarray::{Array2, Axis};

use crate::dsp::{Domain, Spectrogram};
use crate::error::{Error, Result};
use crate::scales::{erb_bandwidth, erb_rate_to_hz, hz_to_erb_rate, hz_to_mel, mel_to_hz};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterKind {
    Mel,
    GammatoneNorm,
    GammatoneSqNorm,
    Dog,
}

impl FilterKind {
    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Mel => "mel",
            FilterKind::GammatoneNorm => "gammatone",
            FilterKind::GammatoneSqNorm => "gammatone-sq",
            FilterKind::Dog => "dog",
        }
    }
}

impl std::str::FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mel" => Ok(FilterKind::Mel),
            "gammatone" | "gammatone-norm" => Ok(FilterKind::GammatoneNorm),
            "gammatone-sq" | "gammatone-sqnorm" => Ok(FilterKind::GammatoneSqNorm),
            "dog" => Ok(FilterKind::Dog),
            other => Err(Error::invalid(format!("unknown filterbank kind `{other}`"))),
        }
    }
}

/// `n_filters x n_bins` weights plus the center frequency of each filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    weights: Array2<f64>,
    center_freqs: Vec<f64>,
    kind: FilterKind,
    alpha: Option<f64>,
}

impl FilterBank {
    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn center_freqs(&self) -> &[f64] {
        &self.center_freqs
    }

    pub fn kind(&self) -> FilterKind {
        self.kind
    }

    /// Surround bandwidth scale, DoG banks only.
    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn n_filters(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.weights.ncols()
    }

    /// One line per filter: center frequency followed by the coefficients.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (row, fc) in self.weights.axis_iter(Axis(0)).zip(&self.center_freqs) {
            write!(out, "{fc}").unwrap();
            for w in row {
                write!(out, ",{w}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Bin frequencies of an even-length FFT with `n_bins` one-sided bins.
pub fn default_bin_freqs(n_bins: usize, sample_rate: u32) -> Vec<f64> {
    let n_fft = 2 * n_bins.saturating_sub(1);
    (0..n_bins)
        .map(|k| k as f64 * sample_rate as f64 / n_fft.max(1) as f64)
        .collect()
}

fn check_layout(n_filters: usize, bin_freqs: &[f64], f_min: f64, f_max: f64) -> Result<()> {
    if n_filters == 0 {
        return Err(Error::invalid("filterbank needs at least one filter"));
    }
    if bin_freqs.len() < 2 {
        return Err(Error::invalid("filterbank needs at least two bins"));
    }
    if bin_freqs.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("bin frequencies must be strictly increasing"));
    }
    let nyquist = *bin_freqs.last().unwrap();
    if !(f_min >= 0.0 && f_min < f_max && f_max <= nyquist + 1e-9) {
        return Err(Error::invalid(format!(
            "invalid frequency range [{f_min}, {f_max}] (Nyquist {nyquist})"
        )));
    }
    Ok(())
}

fn normalize_rows(weights: &mut Array2<f64>, denom: impl Fn(ndarray::ArrayView1<f64>) -> f64) {
    for mut row in weights.axis_iter_mut(Axis(0)) {
        let d = denom(row.view());
        if d > 0.0 {
            row.mapv_inplace(|w| w / d);
        }
    }
}

pub fn mel_filterbank(n_filters: usize, n_bins: usize, sample_rate: u32, f_min: f64, f_max: f64) -> Result<FilterBank> {
    mel_filterbank_for_bins(n_filters, &default_bin_freqs(n_bins, sample_rate), f_min, f_max)
}

/// Triangular filters with mel-spaced peaks, each normalized to unit area.
///
/// A triangle narrower than the bin spacing that would sample no bin at all
/// collapses onto the bin nearest its peak.
pub fn mel_filterbank_for_bins(n_filters: usize, bin_freqs: &[f64], f_min: f64, f_max: f64) -> Result<FilterBank> {
    check_layout(n_filters, bin_freqs, f_min, f_max)?;
    let (lo, hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
    let edges: Vec<f64> = (0..n_filters + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_filters + 1) as f64))
        .collect();

    let mut weights = Array2::zeros((n_filters, bin_freqs.len()));
    for (i, mut row) in weights.axis_iter_mut(Axis(0)).enumerate() {
        let (left, center, right) = (edges[i], edges[i + 1], edges[i + 2]);
        for (w, &f) in row.iter_mut().zip(bin_freqs) {
            let rising = (f - left) / (center - left);
            let falling = (right - f) / (right - center);
            *w = rising.min(falling).max(0.0);
        }
        if row.iter().all(|&w| w == 0.0) {
            row[nearest_bin(bin_freqs, center)] = 1.0;
        }
    }
    normalize_rows(&mut weights, |r| r.sum());
    Ok(FilterBank {
        weights,
        center_freqs: edges[1..=n_filters].to_vec(),
        kind: FilterKind::Mel,
        alpha: None,
    })
}

fn nearest_bin(bin_freqs: &[f64], f: f64) -> usize {
    bin_freqs
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - f).abs().total_cmp(&(b.1 - f).abs()))
        .map(|(k, _)| k)
        .unwrap_or(0)
}

/// Centers spaced uniformly on the ERB-rate scale, `f_min` and `f_max` inclusive.
pub fn erb_spaced_centers(n_filters: usize, f_min: f64, f_max: f64) -> Vec<f64> {
    let (lo, hi) = (hz_to_erb_rate(f_min), hz_to_erb_rate(f_max));
    if n_filters == 1 {
        return vec![erb_rate_to_hz(0.5 * (lo + hi))];
    }
    let mut centers: Vec<f64> = (0..n_filters)
        .map(|i| erb_rate_to_hz(lo + (hi - lo) * i as f64 / (n_filters - 1) as f64))
        .collect();
    // pin the endpoints against round-off in the log/exp round trip
    centers[0] = f_min;
    centers[n_filters - 1] = f_max;
    centers
}

/// Half-power (-3 dB) half-width of `[1 + x^2]^-2` is `sqrt(2^(1/4) - 1)`.
fn gammatone_scale(center: f64) -> f64 {
    let half_bandwidth = 0.5 * 1.019 * erb_bandwidth(center);
    half_bandwidth / (2f64.powf(0.25) - 1.0).sqrt()
}

/// Unnormalized 4th-order gammatone magnitude responses with bandwidths
/// multiplied by `bandwidth_scale`.
fn gammatone_responses(centers: &[f64], bin_freqs: &[f64], bandwidth_scale: f64) -> Array2<f64> {
    let mut weights = Array2::zeros((centers.len(), bin_freqs.len()));
    for (mut row, &fc) in weights.axis_iter_mut(Axis(0)).zip(centers) {
        let b = bandwidth_scale * gammatone_scale(fc);
        for (w, &f) in row.iter_mut().zip(bin_freqs) {
            let x = (f - fc) / b;
            *w = (1.0 + x * x).powi(-2);
        }
    }
    weights
}

fn area_normalized_gammatone(centers: &[f64], bin_freqs: &[f64], bandwidth_scale: f64) -> Array2<f64> {
    let mut weights = gammatone_responses(centers, bin_freqs, bandwidth_scale);
    normalize_rows(&mut weights, |r| r.sum());
    weights
}

pub fn gammatone_filterbank(
    n_filters: usize,
    n_bins: usize,
    sample_rate: u32,
    f_min: f64,
    f_max: f64,
    squared: bool,
) -> Result<FilterBank> {
    gammatone_filterbank_for_bins(
        n_filters,
        &default_bin_freqs(n_bins, sample_rate),
        f_min,
        f_max,
        squared,
    )
}

/// ERB-spaced gammatone bank. `squared = false` divides each row by its sum;
/// `squared = true` squares the coefficients first and divides by the sum of
/// squares.
pub fn gammatone_filterbank_for_bins(
    n_filters: usize,
    bin_freqs: &[f64],
    f_min: f64,
    f_max: f64,
    squared: bool,
) -> Result<FilterBank> {
    check_layout(n_filters, bin_freqs, f_min, f_max)?;
    let centers = erb_spaced_centers(n_filters, f_min, f_max);
    let mut weights = gammatone_responses(&centers, bin_freqs, 1.0);
    if squared {
        weights.mapv_inplace(|w| w * w);
    }
    normalize_rows(&mut weights, |r| r.sum());
    Ok(FilterBank {
        weights,
        center_freqs: centers,
        kind: if squared {
            FilterKind::GammatoneSqNorm
        } else {
            FilterKind::GammatoneNorm
        },
        alpha: None,
    })
}

/// `G_1 - G_alpha` before the excitatory normalization. Every row sums to zero.
pub fn gammatone_difference(
    n_filters: usize,
    bin_freqs: &[f64],
    f_min: f64,
    f_max: f64,
    alpha: f64,
) -> Result<Array2<f64>> {
    if !(alpha > 1.0) {
        return Err(Error::invalid(format!(
            "surround must be wider than center (alpha = {alpha}, need alpha > 1)"
        )));
    }
    check_layout(n_filters, bin_freqs, f_min, f_max)?;
    let centers = erb_spaced_centers(n_filters, f_min, f_max);
    let center = area_normalized_gammatone(&centers, bin_freqs, 1.0);
    let surround = area_normalized_gammatone(&centers, bin_freqs, alpha);
    Ok(center - surround)
}

pub fn dog_filterbank(
    n_filters: usize,
    n_bins: usize,
    sample_rate: u32,
    f_min: f64,
    f_max: f64,
    alpha: f64,
) -> Result<FilterBank> {
    dog_filterbank_for_bins(n_filters, &default_bin_freqs(n_bins, sample_rate), f_min, f_max, alpha)
}

/// Difference-of-gammatones bank: each row of `G_1 - G_alpha` divided by the
/// sum of its positive coefficients.
pub fn dog_filterbank_for_bins(
    n_filters: usize,
    bin_freqs: &[f64],
    f_min: f64,
    f_max: f64,
    alpha: f64,
) -> Result<FilterBank> {
    let mut weights = gammatone_difference(n_filters, bin_freqs, f_min, f_max, alpha)?;
    normalize_rows(&mut weights, |r| r.iter().filter(|&&w| w > 0.0).sum());
    Ok(FilterBank {
        weights,
        center_freqs: erb_spaced_centers(n_filters, f_min, f_max),
        kind: FilterKind::Dog,
        alpha: Some(alpha),
    })
}

/// Project every frame onto the filters. Linear; no rectification.
pub fn apply_filterbank(spec: &Spectrogram, fb: &FilterBank) -> Result<Spectrogram> {
    if !matches!(spec.domain(), Domain::Magnitude | Domain::Power) {
        return Err(Error::DomainMismatch {
            expected: "magnitude or power",
            found: spec.domain().name(),
        });
    }
    let data = project(spec.data(), fb)?;
    Ok(Spectrogram::from_parts(data, fb.center_freqs.clone(), Domain::Feature))
}

pub(crate) fn project(data: &Array2<f64>, fb: &FilterBank) -> Result<Array2<f64>> {
    if data.ncols() != fb.n_bins() {
        return Err(Error::DimensionMismatch(format!(
            "spectrogram has {} bins, filterbank expects {}",
            data.ncols(),
            fb.n_bins()
        )));
    }
    Ok(data.dot(&fb.weights.t()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    const SR: u32 = 16_000;

    fn row_sums(w: &Array2<f64>) -> Vec<f64> {
        w.axis_iter(Axis(0)).map(|r| r.sum()).collect()
    }

    #[test]
    fn unit_area_for_every_kind_and_layout() {
        for n_filters in [1, 8, 40, 80] {
            for n_bins in [65, 129, 201, 257] {
                let mel = mel_filterbank(n_filters, n_bins, SR, 20.0, 8000.0).unwrap();
                let gt = gammatone_filterbank(n_filters, n_bins, SR, 20.0, 8000.0, false).unwrap();
                let sq = gammatone_filterbank(n_filters, n_bins, SR, 20.0, 8000.0, true).unwrap();
                for fb in [&mel, &gt, &sq] {
                    assert_eq!(fb.weights().dim(), (n_filters, n_bins));
                    for s in row_sums(fb.weights()) {
                        assert!((s - 1.0).abs() < 1e-6, "{:?} {n_filters}x{n_bins}: {s}", fb.kind());
                    }
                    assert!(fb.weights().iter().all(|&w| w >= 0.0));
                    assert!(fb.center_freqs().windows(2).all(|w| w[0] < w[1]));
                }
                assert_ne!(gt.weights(), sq.weights());
            }
        }
    }

    #[test]
    fn mel_rows_are_unimodal_and_peak_at_center() {
        let fb = mel_filterbank(80, 201, SR, 20.0, 8000.0).unwrap();
        let freqs = default_bin_freqs(201, SR);
        for (row, &fc) in fb.weights().axis_iter(Axis(0)).zip(fb.center_freqs()) {
            // centers recomputed independently from the mel formula
            let peak = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            let nearest = nearest_bin(&freqs, fc);
            assert!(peak.abs_diff(nearest) <= 1, "peak {peak} nearest {nearest}");
            let nz: Vec<f64> = row.iter().copied().filter(|&w| w > 0.0).collect();
            let top = nz.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            assert!(nz[..=top].windows(2).all(|w| w[0] <= w[1]));
            assert!(nz[top..].windows(2).all(|w| w[0] >= w[1]));
        }
        let lo = hz_to_mel(20.0);
        let hi = hz_to_mel(8000.0);
        for (i, fc) in fb.center_freqs().iter().enumerate() {
            let expected = mel_to_hz(lo + (hi - lo) * (i + 1) as f64 / 81.0);
            assert!((fc - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn gammatone_centers_are_erb_spaced() {
        let fb = gammatone_filterbank(80, 201, SR, 20.0, 8000.0, false).unwrap();
        let c = fb.center_freqs();
        assert!((c[0] - 20.0).abs() < 1e-9);
        assert!((c[79] - 8000.0).abs() < 1e-9);
        let rates: Vec<f64> = c.iter().map(|&f| hz_to_erb_rate(f)).collect();
        let step = rates[1] - rates[0];
        for w in rates.windows(2) {
            assert!((w[1] - w[0] - step).abs() < 1e-9);
        }
    }

    #[test]
    fn gammatone_half_power_at_stated_bandwidth() {
        let fc = 1000.0;
        let half = 0.5 * 1.019 * erb_bandwidth(fc);
        let w = gammatone_responses(&[fc], &[fc, fc + half], 1.0);
        let ratio_db = 20.0 * (w[[0, 1]] / w[[0, 0]]).log10();
        assert!((ratio_db + 10.0 * 2f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn dog_normalization() {
        for n_filters in [8, 80] {
            for n_bins in [65, 201] {
                let freqs = default_bin_freqs(n_bins, SR);
                let diff = gammatone_difference(n_filters, &freqs, 20.0, 8000.0, 2.0).unwrap();
                for s in row_sums(&diff) {
                    assert!(s.abs() < 1e-6);
                }
                let fb = dog_filterbank(n_filters, n_bins, SR, 20.0, 8000.0, 2.0).unwrap();
                assert_eq!(fb.alpha(), Some(2.0));
                for row in fb.weights().axis_iter(Axis(0)) {
                    let pos: f64 = row.iter().filter(|&&w| w > 0.0).sum();
                    assert!((pos - 1.0).abs() < 1e-6);
                    assert!(row.iter().any(|&w| w < 0.0));
                }
            }
        }
    }

    #[test]
    fn dog_rows_have_center_lobe_and_surround() {
        let fb = dog_filterbank(80, 201, SR, 20.0, 8000.0, 2.0).unwrap();
        let freqs = default_bin_freqs(201, SR);
        for (i, (row, &fc)) in fb.weights().axis_iter(Axis(0)).zip(fb.center_freqs()).enumerate() {
            let k = nearest_bin(&freqs, fc);
            assert!(row[k] > 0.0, "filter {i}");
            if (10..70).contains(&i) {
                assert!(row.iter().take(k).any(|&w| w < 0.0), "no lower surround on {i}");
                assert!(row.iter().skip(k + 1).any(|&w| w < 0.0), "no upper surround on {i}");
            }
        }
    }

    #[test]
    fn dog_rejects_narrow_surround() {
        let err = dog_filterbank(8, 201, SR, 20.0, 8000.0, 1.0).unwrap_err();
        assert!(err.to_string().contains("surround must be wider than center"));
        assert!(dog_filterbank(8, 201, SR, 20.0, 8000.0, 0.5).is_err());
    }

    #[test]
    fn dog_difference_vanishes_as_alpha_approaches_one() {
        let freqs = default_bin_freqs(201, SR);
        let norm = |a: f64| {
            gammatone_difference(20, &freqs, 20.0, 8000.0, a)
                .unwrap()
                .iter()
                .map(|w| w * w)
                .sum::<f64>()
                .sqrt()
        };
        let (far, near, nearer) = (norm(2.0), norm(1.01), norm(1.0001));
        assert!(far > near && near > nearer);
        assert!(nearer < 1e-3 * far);
    }

    #[test]
    fn flat_frame_response() {
        let flat = Spectrogram::new(Array2::ones((1, 201)), default_bin_freqs(201, SR), Domain::Power).unwrap();
        let gt = gammatone_filterbank(80, 201, SR, 20.0, 8000.0, false).unwrap();
        let dog = dog_filterbank(80, 201, SR, 20.0, 8000.0, 2.0).unwrap();
        let g = apply_filterbank(&flat, &gt).unwrap();
        let d = apply_filterbank(&flat, &dog).unwrap();
        for (gv, dv) in g.data().iter().zip(d.data().iter()) {
            assert!((gv - 1.0).abs() < 1e-12);
            assert!(*dv <= 1.0 && dv < gv);
        }
    }

    #[test]
    fn invalid_ranges_rejected() {
        assert!(mel_filterbank(0, 201, SR, 20.0, 8000.0).is_err());
        assert!(mel_filterbank(8, 201, SR, 4000.0, 2000.0).is_err());
        assert!(gammatone_filterbank(8, 201, SR, 20.0, 9000.0, false).is_err());
    }

    #[test]
    fn apply_examples() {
        let bank = FilterBank {
            weights: Array2::from_elem((1, 4), 0.25),
            center_freqs: vec![1000.0],
            kind: FilterKind::Mel,
            alpha: None,
        };
        let spec = Spectrogram::new(
            array![[1.0, 2.0, 3.0, 6.0], [0.0, 0.0, 0.0, 0.0]],
            vec![0.0, 1.0, 2.0, 3.0],
            Domain::Power,
        )
        .unwrap();
        let out = apply_filterbank(&spec, &bank).unwrap();
        assert_eq!(out.data(), &array![[3.0], [0.0]]);
        assert_eq!(out.domain(), Domain::Feature);

        let wrong = Spectrogram::new(Array2::ones((1, 3)), vec![0.0, 1.0, 2.0], Domain::Power).unwrap();
        assert!(matches!(
            apply_filterbank(&wrong, &bank),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn csv_dump_layout() {
        let fb = mel_filterbank(3, 9, SR, 20.0, 8000.0).unwrap();
        let csv = fb.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        for (line, fc) in lines.iter().zip(fb.center_freqs()) {
            let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
            assert_eq!(cols.len(), 10);
            assert_eq!(cols[0], *fc);
        }
    }

    proptest! {
        #[test]
        fn matches_triple_loop(vals in prop::collection::vec(0.0f64..10.0, 15), ws in prop::collection::vec(-1.0f64..1.0, 10)) {
            let spec = Spectrogram::new(
                Array2::from_shape_vec((3, 5), vals.clone()).unwrap(),
                (0..5).map(|k| k as f64).collect(),
                Domain::Power,
            ).unwrap();
            let bank = FilterBank {
                weights: Array2::from_shape_vec((2, 5), ws.clone()).unwrap(),
                center_freqs: vec![1.0, 2.0],
                kind: FilterKind::Dog,
                alpha: Some(2.0),
            };
            let out = apply_filterbank(&spec, &bank).unwrap();
            for f in 0..3 {
                for i in 0..2 {
                    let mut acc = 0.0;
                    for k in 0..5 {
                        acc += ws[i * 5 + k] * vals[f * 5 + k];
                    }
                    prop_assert!((out.data()[[f, i]] - acc).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn linear(x in prop::collection::vec(0.0f64..5.0, 201 * 2), y in prop::collection::vec(0.0f64..5.0, 201 * 2), a in 0.0f64..3.0, b in 0.0f64..3.0) {
            let fb = dog_filterbank(16, 201, SR, 20.0, 8000.0, 2.0).unwrap();
            let freqs = default_bin_freqs(201, SR);
            let mk = |v: Vec<f64>| Spectrogram::new(Array2::from_shape_vec((2, 201), v).unwrap(), freqs.clone(), Domain::Power).unwrap();
            let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let lhs = apply_filterbank(&mk(combo), &fb).unwrap();
            let fx = apply_filterbank(&mk(x), &fb).unwrap();
            let fy = apply_filterbank(&mk(y), &fb).unwrap();
            for ((l, p), q) in lhs.data().iter().zip(fx.data().iter()).zip(fy.data().iter()) {
                prop_assert!((l - (a * p + b * q)).abs() < 1e-9);
            }
        }
    }
}

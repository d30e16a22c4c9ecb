//! Word error rate and its clean-to-noisy degradation, plus SNR.

use crate::dsp::AudioBuffer;
use crate::error::{Error, Result};

/// Whitespace-tokenized, case-folded word sequence.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Transcript {
    words: Vec<String>,
}

impl Transcript {
    pub const EMPTY: Transcript = Transcript { words: Vec::new() };

    pub fn parse(text: &str) -> Self {
        Self::parse_with(text, false)
    }

    /// With `strip_punctuation`, punctuation other than apostrophes is
    /// removed from each token before empty tokens are dropped.
    pub fn parse_with(text: &str, strip_punctuation: bool) -> Self {
        let words = text
            .split_whitespace()
            .map(|w| {
                let w = w.to_lowercase();
                if strip_punctuation {
                    w.chars().filter(|c| !c.is_ascii_punctuation() || *c == '\'').collect()
                } else {
                    w
                }
            })
            .filter(|w: &String| !w.is_empty())
            .collect();
        Self { words }
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            words: words
                .into_iter()
                .map(Into::into)
                .filter(|w: &String| !w.is_empty())
                .collect(),
        }
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Minimum number of substitutions, insertions and deletions turning `a` into `b`.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn wer(reference: &Transcript, hypothesis: &Transcript) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::EmptyReference);
    }
    Ok(edit_distance(reference.words(), hypothesis.words()) as f64 / reference.len() as f64)
}

/// Pooled WER: total edits over total reference words.
pub fn corpus_wer<'a, I>(pairs: I) -> Result<f64>
where
    I: IntoIterator<Item = (&'a Transcript, &'a Transcript)>,
{
    let (mut edits, mut words) = (0usize, 0usize);
    for (r, h) in pairs {
        edits += edit_distance(r.words(), h.words());
        words += r.len();
    }
    if words == 0 {
        return Err(Error::EmptyReference);
    }
    Ok(edits as f64 / words as f64)
}

pub fn werd(wer_clean: f64, wer_noisy: f64) -> f64 {
    wer_noisy - wer_clean
}

pub fn nwerd(werd: f64, quality_score: f64) -> Result<f64> {
    if !(quality_score > 0.0) || !quality_score.is_finite() {
        return Err(Error::invalid(format!(
            "quality score must be positive, got {quality_score}"
        )));
    }
    Ok(werd / quality_score)
}

/// Mean of per-utterance NWERD values.
pub fn mean_nwerd(werds_and_quality: &[(f64, f64)]) -> Result<f64> {
    if werds_and_quality.is_empty() {
        return Err(Error::invalid("no utterances to aggregate"));
    }
    let mut sum = 0.0;
    for &(w, q) in werds_and_quality {
        sum += nwerd(w, q)?;
    }
    Ok(sum / werds_and_quality.len() as f64)
}

pub(crate) fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn snr_db(signal: &AudioBuffer, noise: &AudioBuffer) -> Result<f64> {
    snr_db_samples(signal.samples(), noise.samples())
}

pub(crate) fn snr_db_samples(signal: &[f64], noise: &[f64]) -> Result<f64> {
    if signal.len() != noise.len() {
        return Err(Error::DimensionMismatch(format!(
            "signal has {} samples, noise has {}",
            signal.len(),
            noise.len()
        )));
    }
    let pn = energy(noise);
    if pn == 0.0 {
        return Err(Error::InfiniteSnr);
    }
    Ok(10.0 * (energy(signal) / pn).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(s: &str) -> Transcript {
        Transcript::parse(s)
    }

    #[test]
    fn tokenization() {
        assert_eq!(t("  Hello   WORLD ").words(), ["hello", "world"]);
        assert_eq!(t("it's, done.").words(), ["it's,", "done."]);
        assert_eq!(Transcript::parse_with("it's, done.", true).words(), ["it's", "done"]);
        assert!(Transcript::parse_with("-- ...", true).is_empty());
    }

    #[test]
    fn wer_examples() {
        assert_eq!(wer(&t("a b c"), &t("a b c")).unwrap(), 0.0);
        assert!((wer(&t("a b c"), &t("a x c")).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(wer(&t("a b c"), &t("")).unwrap(), 1.0);
        assert_eq!(wer(&t("a"), &t("b c d")).unwrap(), 3.0);
        assert!(matches!(wer(&t(""), &t("a")), Err(Error::EmptyReference)));
    }

    #[test]
    fn corpus_pooling() {
        let (r1, h1, r2, h2) = (t("a b c d"), t("a b c d"), t("a b"), t("x"));
        let w = corpus_wer([(&r1, &h1), (&r2, &h2)]).unwrap();
        assert!((w - 2.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn degradation_examples() {
        assert!((werd(0.05, 0.25) - 0.20).abs() < 1e-15);
        assert_eq!(werd(0.3, 0.3), 0.0);
        assert_eq!(nwerd(0.0, 3.1).unwrap(), 0.0);
        assert!((nwerd(0.20, 2.0).unwrap() - 0.10).abs() < 1e-15);
        assert!(nwerd(0.2, 4.0).unwrap() < nwerd(0.2, 2.0).unwrap());
        assert!(nwerd(0.2, 0.0).is_err());
        assert!(nwerd(0.2, -1.0).is_err());
        assert!((mean_nwerd(&[(0.2, 2.0), (0.2, 4.0)]).unwrap() - 0.075).abs() < 1e-15);
    }

    #[test]
    fn snr_examples() {
        let s = AudioBuffer::new(vec![0.5, -0.25, 0.125, 1.0], 16_000).unwrap();
        assert!(snr_db(&s, &s).unwrap().abs() < 1e-12);
        assert!((snr_db(&s, &s.scaled(0.1).unwrap()).unwrap() - 20.0).abs() < 1e-9);
        assert!((snr_db(&s, &s.scaled(10.0).unwrap()).unwrap() + 20.0).abs() < 1e-9);
        let silent = AudioBuffer::new(vec![0.0; 4], 16_000).unwrap();
        assert!(matches!(snr_db(&s, &silent), Err(Error::InfiniteSnr)));
        let short = AudioBuffer::new(vec![0.1; 3], 16_000).unwrap();
        assert!(snr_db(&s, &short).is_err());
    }

    proptest! {
        #[test]
        fn distance_is_symmetric_and_bounded(a in prop::collection::vec(0u8..4, 0..8), b in prop::collection::vec(0u8..4, 0..8)) {
            let d = edit_distance(&a, &b);
            prop_assert_eq!(d, edit_distance(&b, &a));
            prop_assert!(d <= a.len().max(b.len()));
            prop_assert!(d >= a.len().abs_diff(b.len()));
            prop_assert_eq!(edit_distance(&a, &a), 0);
        }
    }
}

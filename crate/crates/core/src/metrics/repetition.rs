//! Repetition rate: geometric mean over n = 1..4 of the share of n-gram types
//! that occur more than once, pooled over fixed-size windows.

use std::collections::HashMap;

use super::tokenize::TokenSequence;
use super::MetricError;

pub const WINDOW_TOKENS: usize = 1000;
/// A trailing partial window is kept only from this size on.
pub const MIN_TRAILING_TOKENS: usize = 100;
pub const MAX_ORDER: usize = 4;

/// Splits a token stream into the windows that are counted.
pub fn windows<T>(stream: &[T]) -> Vec<&[T]> {
    if stream.len() <= WINDOW_TOKENS {
        return vec![stream];
    }
    stream
        .chunks(WINDOW_TOKENS)
        .filter(|w| w.len() == WINDOW_TOKENS || w.len() >= MIN_TRAILING_TOKENS)
        .collect()
}

/// Repetition rate of a corpus in percent. Units are concatenated in order.
pub fn repetition_rate(corpus: &[TokenSequence]) -> Result<f64, MetricError> {
    let mut ids: HashMap<&str, u32> = HashMap::new();
    let stream: Vec<u32> = corpus
        .iter()
        .flat_map(|seq| seq.iter())
        .map(|t| {
            let next = ids.len() as u32;
            *ids.entry(t).or_insert(next)
        })
        .collect();
    repetition_rate_of_stream(&stream)
}

pub fn repetition_rate_of_stream(stream: &[u32]) -> Result<f64, MetricError> {
    if stream.len() < MAX_ORDER {
        return Err(MetricError::TooFewTokens(stream.len()));
    }
    let mut repeated = [0usize; MAX_ORDER];
    let mut types = [0usize; MAX_ORDER];
    let mut counts: HashMap<&[u32], u32> = HashMap::new();
    for window in windows(stream) {
        for n in 1..=MAX_ORDER {
            counts.clear();
            for gram in window.windows(n) {
                *counts.entry(gram).or_default() += 1;
            }
            types[n - 1] += counts.len();
            repeated[n - 1] += counts.values().filter(|&&c| c > 1).count();
        }
    }
    let product: f64 = (0..MAX_ORDER)
        .map(|i| repeated[i] as f64 / types[i] as f64)
        .product();
    Ok(100.0 * product.powf(1.0 / MAX_ORDER as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_distinct_is_zero() {
        let s: Vec<u32> = (0..50).collect();
        assert_eq!(repetition_rate_of_stream(&s).unwrap(), 0.0);
    }

    #[test]
    fn constant_stream_is_hundred() {
        let s = vec![7u32; 300];
        assert_eq!(repetition_rate_of_stream(&s).unwrap(), 100.0);
    }

    #[test]
    fn too_short() {
        assert_eq!(repetition_rate_of_stream(&[1, 2, 3]), Err(MetricError::TooFewTokens(3)));
    }

    #[test]
    fn windowing_rules() {
        let s: Vec<u32> = (0..2150).collect();
        let w = windows(&s);
        assert_eq!(w.iter().map(|w| w.len()).collect::<Vec<_>>(), [1000, 1000, 150]);
        let s: Vec<u32> = (0..2050).collect();
        assert_eq!(windows(&s).len(), 2);
        let s: Vec<u32> = (0..40).collect();
        assert_eq!(windows(&s).len(), 1);
    }
}

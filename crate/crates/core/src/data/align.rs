//! Word-interval feature averaging: collapse an irregularly sampled frame
//! stream to one feature vector per word by taking the mean of the frames
//! inside each word's utterance interval.

use crate::error::{Error, Result};

/// Timestamped frame sequence, possibly irregularly sampled.
pub struct RawStream {
    timestamps: Vec<f64>,
    frames: Vec<Vec<f64>>,
}

impl RawStream {
    /// Timestamps must be strictly increasing and match the frame count;
    /// frames must share one width.
    pub fn new(timestamps: Vec<f64>, frames: Vec<Vec<f64>>) -> Result<RawStream> {
        if timestamps.len() != frames.len() {
            return Err(Error::Validation(format!(
                "{} timestamps for {} frames",
                timestamps.len(),
                frames.len()
            )));
        }
        if timestamps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(
                "timestamps must be strictly increasing".into(),
            ));
        }
        if let Some(first) = frames.first() {
            let d = first.len();
            if frames.iter().any(|f| f.len() != d) {
                return Err(Error::Validation("frames must share one width".into()));
            }
        }
        Ok(RawStream { timestamps, frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        self.frames.first().map_or(0, |f| f.len())
    }
}

/// Utterance span of one word, in seconds.
#[derive(Debug, Clone, Copy)]
pub struct WordInterval {
    pub word_index: usize,
    pub start: f64,
    pub end: f64,
}

/// Mean feature vector per word interval. A frame belongs to interval `i`
/// when its timestamp lies in `[start_i, end_i)`. Intervals containing no
/// frames yield the zero vector; the second return value counts them.
pub fn align_expectation(
    stream: &RawStream,
    intervals: &[WordInterval],
) -> Result<(Vec<Vec<f64>>, usize)> {
    for w in intervals {
        if w.start >= w.end {
            return Err(Error::Validation(format!(
                "word {} has an empty or inverted interval [{}, {})",
                w.word_index, w.start, w.end
            )));
        }
    }
    for pair in intervals.windows(2) {
        if pair[1].start < pair[0].end {
            return Err(Error::Validation(format!(
                "intervals for words {} and {} overlap or are unsorted",
                pair[0].word_index, pair[1].word_index
            )));
        }
    }

    let d = stream.width();
    let mut out = Vec::with_capacity(intervals.len());
    let mut empty = 0usize;
    for w in intervals {
        let mut acc = vec![0.0; d];
        let mut count = 0usize;
        for (ts, frame) in stream.timestamps.iter().zip(&stream.frames) {
            if *ts >= w.start && *ts < w.end {
                for (a, v) in acc.iter_mut().zip(frame) {
                    *a += v;
                }
                count += 1;
            }
        }
        if count == 0 {
            empty += 1;
        } else {
            acc.iter_mut().for_each(|a| *a /= count as f64);
        }
        out.push(acc);
    }
    Ok((out, empty))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval(i: usize, start: f64, end: f64) -> WordInterval {
        WordInterval {
            word_index: i,
            start,
            end,
        }
    }

    #[test]
    fn single_frame_passes_through() {
        let stream = RawStream::new(vec![0.5], vec![vec![3.0, -1.0]]).unwrap();
        let (out, empty) = align_expectation(&stream, &[interval(0, 0.0, 1.0)]).unwrap();
        assert_eq!(out, vec![vec![3.0, -1.0]]);
        assert_eq!(empty, 0);
    }

    #[test]
    fn interval_mean_is_arithmetic() {
        let stream = RawStream::new(vec![0.1, 0.2], vec![vec![1.0], vec![3.0]]).unwrap();
        let (out, _) = align_expectation(&stream, &[interval(0, 0.0, 1.0)]).unwrap();
        assert_eq!(out, vec![vec![2.0]]);
    }

    #[test]
    fn empty_interval_yields_zeros_and_a_warning() {
        let stream = RawStream::new(vec![5.0], vec![vec![1.0, 2.0]]).unwrap();
        let (out, empty) =
            align_expectation(&stream, &[interval(0, 0.0, 1.0), interval(1, 4.0, 6.0)]).unwrap();
        assert_eq!(out[0], vec![0.0, 0.0]);
        assert_eq!(out[1], vec![1.0, 2.0]);
        assert_eq!(empty, 1);
    }

    #[test]
    fn interval_end_is_exclusive() {
        let stream = RawStream::new(vec![1.0], vec![vec![9.0]]).unwrap();
        let (out, empty) = align_expectation(&stream, &[interval(0, 0.0, 1.0)]).unwrap();
        assert_eq!(out[0], vec![0.0]);
        assert_eq!(empty, 1);

        let (out, empty) = align_expectation(&stream, &[interval(0, 1.0, 2.0)]).unwrap();
        assert_eq!(out[0], vec![9.0]);
        assert_eq!(empty, 0);
    }

    #[test]
    fn rejects_overlapping_or_unsorted_intervals() {
        let stream = RawStream::new(vec![0.1], vec![vec![1.0]]).unwrap();
        assert!(align_expectation(
            &stream,
            &[interval(0, 0.0, 1.0), interval(1, 0.5, 1.5)]
        )
        .is_err());
        assert!(align_expectation(
            &stream,
            &[interval(0, 2.0, 3.0), interval(1, 0.0, 1.0)]
        )
        .is_err());
        assert!(align_expectation(&stream, &[interval(0, 1.0, 1.0)]).is_err());
    }

    #[test]
    fn rejects_non_increasing_timestamps() {
        assert!(RawStream::new(vec![0.2, 0.2], vec![vec![1.0], vec![2.0]]).is_err());
        assert!(RawStream::new(vec![0.3, 0.2], vec![vec![1.0], vec![2.0]]).is_err());
    }

    #[test]
    fn mean_ignores_frame_order_within_tolerance() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);

        let values: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin() * 5.0).collect();
        let baseline = {
            let ts: Vec<f64> = (0..20).map(|i| i as f64 * 0.01).collect();
            let frames: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
            let stream = RawStream::new(ts, frames).unwrap();
            align_expectation(&stream, &[interval(0, 0.0, 1.0)]).unwrap().0[0][0]
        };

        for _ in 0..25 {
            let mut shuffled = values.clone();
            shuffled.shuffle(&mut rng);
            let ts: Vec<f64> = (0..20).map(|i| i as f64 * 0.01).collect();
            let frames: Vec<Vec<f64>> = shuffled.iter().map(|&v| vec![v]).collect();
            let stream = RawStream::new(ts, frames).unwrap();
            let (out, _) = align_expectation(&stream, &[interval(0, 0.0, 1.0)]).unwrap();
            assert!((out[0][0] - baseline).abs() < 1e-12);
        }
    }
}

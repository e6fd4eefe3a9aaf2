//! Sampled write-distribution approximation.
//!
//! Models a store counter that overflows every `interval_n` writes and arms a
//! write trap; the next store is the sample and its frame's 8-byte counter is
//! bumped. Consecutive samples are therefore exactly `interval_n + 1` writes
//! apart.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Debug, Clone)]
pub struct Sampler {
    interval_n: u64,
    write_counter: u64,
    armed: bool,
    estimates: HashMap<u64, u64>,
    samples_taken: u64,
}

impl Sampler {
    pub fn new(interval_n: u64) -> Self {
        assert!(interval_n >= 1, "sample interval must be at least 1");
        Sampler { interval_n, write_counter: 0, armed: false, estimates: HashMap::new(), samples_taken: 0 }
    }

    pub fn interval(&self) -> u64 {
        self.interval_n
    }

    pub fn is_armed(&self) -> bool {
        self.armed
    }

    pub fn samples_taken(&self) -> u64 {
        self.samples_taken
    }

    pub fn estimate(&self, frame: u64) -> u64 {
        self.estimates.get(&frame).copied().unwrap_or(0)
    }

    /// Feeds one tracked application write. Returns the frame if this write
    /// was the trapped one.
    #[inline]
    pub fn observe_write(&mut self, frame: u64) -> Option<u64> {
        if self.armed {
            *self.estimates.entry(frame).or_insert(0) += 1;
            self.samples_taken += 1;
            self.armed = false;
            self.write_counter = 0;
            return Some(frame);
        }
        self.write_counter += 1;
        if self.write_counter == self.interval_n {
            self.armed = true;
        }
        None
    }

    pub fn estimate_share<F: Scalar>(&self, frame: u64) -> Result<F> {
        if self.samples_taken == 0 {
            return Err(Error::NoSamples);
        }
        let num = F::from_u64(self.estimate(frame)).expect("u64 converts to float");
        let den = F::from_u64(self.samples_taken).expect("u64 converts to float");
        Ok(num / den)
    }

    /// Bytes of counter storage: one 8-byte counter per tracked 4 KiB block.
    pub fn storage_bytes(tracked_blocks: u64) -> u64 {
        tracked_blocks * 8
    }

    /// `frame,estimate` rows plus a `#samples` trailer.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<_> = self.estimates.iter().map(|(&f, &c)| (f, c)).collect();
        rows.sort_unstable();
        let mut out = String::from("frame,estimate\n");
        for (f, c) in rows {
            let _ = writeln!(out, "{f},{c}");
        }
        let _ = writeln!(out, "#samples,{}", self.samples_taken);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn n3_samples_fourth_and_eighth() {
        let mut s = Sampler::new(3);
        let frames = [10, 11, 12, 13, 14, 15, 16, 17];
        let sampled: Vec<_> = frames.iter().filter_map(|&f| s.observe_write(f)).collect();
        assert_eq!(sampled, vec![13, 17]);
    }

    #[test]
    fn n1_samples_every_second_write() {
        let mut s = Sampler::new(1);
        let hits: Vec<bool> = (0..10).map(|i| s.observe_write(i).is_some()).collect();
        assert_eq!(hits, [false, true].repeat(5));
    }

    #[test]
    fn estimates_sum_to_samples() {
        let mut s = Sampler::new(2);
        for i in 0..1000u64 {
            s.observe_write(i % 7);
        }
        let sum: u64 = (0..7).map(|f| s.estimate(f)).sum();
        assert_eq!(sum, s.samples_taken());
        assert_eq!(s.samples_taken(), 333);
    }

    #[test]
    fn shares() {
        let mut s = Sampler::new(1);
        assert_eq!(s.estimate_share::<f64>(4), Err(Error::NoSamples));
        s.observe_write(4);
        s.observe_write(4);
        assert_abs_diff_eq!(s.estimate_share::<f64>(4).unwrap(), 1.0);
        s.observe_write(5);
        s.observe_write(5);
        assert_abs_diff_eq!(s.estimate_share::<f32>(4).unwrap(), 0.5);
        assert_abs_diff_eq!(s.estimate_share::<f32>(5).unwrap(), 0.5);
    }

    #[test]
    fn counter_storage_is_one_512th() {
        let gib = 1u64 << 30;
        assert_eq!(Sampler::storage_bytes(gib / 4096), gib / 512);
    }

    #[test]
    fn csv_dump() {
        let mut s = Sampler::new(1);
        for f in [9, 9, 3, 3] {
            s.observe_write(f);
        }
        assert_eq!(s.to_csv(), "frame,estimate\n3,1\n9,1\n#samples,2\n");
    }
}

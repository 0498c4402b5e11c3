//! Windowed lifting/driving ratio estimate.
//!
//! The operator keeps a short memory of (travelled distance, bucket height)
//! and extrapolates the bucket height at arrival from the least-squares slope
//! dh/ds over that window.

use std::collections::VecDeque;

const MIN_SAMPLES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Sample {
    t: f64,
    s: f64,
    h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    window: f64,
    samples: VecDeque<Sample>,
    lifting: bool,
    slope: f64,
}

impl EstimatorState {
    pub fn new(window: f64) -> Self {
        Self {
            window,
            samples: VecDeque::new(),
            lifting: false,
            slope: 0.0,
        }
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Current dh/ds; zero while not lifting or without enough samples.
    pub fn slope(&self) -> f64 {
        self.slope
    }

    /// Adds a sample at time `t` (cumulative distance `s`, bucket height `h`),
    /// drops samples older than the window and refreshes the slope.
    pub fn push(&mut self, t: f64, s: f64, h: f64, lifting: bool) {
        self.samples.push_back(Sample { t, s, h });
        while let Some(front) = self.samples.front() {
            if front.t < t - self.window {
                self.samples.pop_front();
            } else {
                break;
            }
        }
        self.lifting = lifting;
        self.slope = if lifting { self.fit() } else { 0.0 };
    }

    fn fit(&self) -> f64 {
        let n = self.samples.len();
        if n < MIN_SAMPLES {
            return 0.0;
        }
        let nf = n as f64;
        let s_mean = self.samples.iter().map(|p| p.s).sum::<f64>() / nf;
        let h_mean = self.samples.iter().map(|p| p.h).sum::<f64>() / nf;
        let (mut sxx, mut sxy) = (0.0, 0.0);
        for p in &self.samples {
            let ds = p.s - s_mean;
            sxx += ds * ds;
            sxy += ds * (p.h - h_mean);
        }
        if sxx <= 1e-12 {
            0.0
        } else {
            (sxy / sxx).max(0.0)
        }
    }
}

/// Predicted bucket height after travelling `remaining` more metres.
pub fn estimate_height_at_arrival(est: &EstimatorState, h: f64, remaining: f64) -> f64 {
    h + est.slope() * remaining.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feed_line(est: &mut EstimatorState, slope: f64, t0: f64, n: usize) {
        for i in 0..n {
            let t = t0 + 0.01 * i as f64;
            let s = 3.0 * t;
            est.push(t, s, 0.5 + slope * s, true);
        }
    }

    #[test]
    fn starts_flat() {
        let est = EstimatorState::new(1.0);
        assert_eq!(est.slope(), 0.0);
        assert_eq!(estimate_height_at_arrival(&est, 1.2, 10.0), 1.2);
    }

    #[test]
    fn linear_extrapolation() {
        let mut est = EstimatorState::new(1.0);
        feed_line(&mut est, 0.2, 0.0, 50);
        assert!((est.slope() - 0.2).abs() < 1e-9);
        assert!((estimate_height_at_arrival(&est, 1.0, 10.0) - 3.0).abs() < 1e-8);
    }

    #[test]
    fn too_few_samples_is_conservative() {
        let mut est = EstimatorState::new(1.0);
        feed_line(&mut est, 0.2, 0.0, MIN_SAMPLES - 1);
        assert_eq!(est.slope(), 0.0);
    }

    #[test]
    fn not_lifting_means_zero_slope() {
        let mut est = EstimatorState::new(1.0);
        feed_line(&mut est, 0.2, 0.0, 50);
        est.push(0.5, 1.5, 0.8, false);
        assert_eq!(est.slope(), 0.0);
    }

    #[test]
    fn window_evicts_old_samples() {
        let mut est = EstimatorState::new(0.5);
        feed_line(&mut est, 0.4, 0.0, 100);
        feed_line(&mut est, 0.1, 1.0, 100);
        assert!((est.slope() - 0.1).abs() < 1e-9, "{}", est.slope());
        assert!(est.len() <= 52);
    }

    #[test]
    fn standstill_gives_zero_slope() {
        let mut est = EstimatorState::new(1.0);
        for i in 0..20 {
            est.push(0.01 * i as f64, 4.0, 0.5 + 0.01 * i as f64, true);
        }
        assert_eq!(est.slope(), 0.0);
    }
}

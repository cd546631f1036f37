//! Derivatives of periodic samples on a uniform grid over `[0, 2 pi)`.

use std::cell::RefCell;
use std::f64::consts::TAU;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffMode {
    #[default]
    Spectral,
    /// Fourth-order central differences.
    FiniteDifference,
}

#[derive(Clone)]
pub struct Differentiator {
    n: usize,
    mode: DiffMode,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Differentiator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Differentiator")
            .field("n", &self.n)
            .field("mode", &self.mode)
            .finish()
    }
}

impl Differentiator {
    /// `n` must be even and at least 8.
    pub fn new(n: usize, mode: DiffMode) -> Self {
        assert!(n >= 8 && n % 2 == 0, "grid size must be even and >= 8");
        let mut planner = FftPlanner::new();
        Self {
            n,
            mode,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn mode(&self) -> DiffMode {
        self.mode
    }

    pub fn spacing(&self) -> f64 {
        TAU / self.n as f64
    }

    /// First and second derivatives.
    pub fn derivatives(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(f.len(), self.n);
        match self.mode {
            DiffMode::Spectral => self.spectral(f),
            DiffMode::FiniteDifference => self.finite_difference(f),
        }
    }

    pub fn first(&self, f: &[f64]) -> Vec<f64> {
        self.derivatives(f).0
    }

    /// In-place transform with a per-thread scratch buffer.
    fn transform(&self, buf: &mut [Complex<f64>], forward: bool) {
        thread_local! {
            static SCRATCH: RefCell<Vec<Complex<f64>>> = const { RefCell::new(Vec::new()) };
        }
        let plan = if forward { &self.fwd } else { &self.inv };
        SCRATCH.with(|cell| {
            let mut scratch = cell.borrow_mut();
            let need = plan.get_inplace_scratch_len();
            if scratch.len() < need {
                scratch.resize(need, Complex::new(0.0, 0.0));
            }
            plan.process_with_scratch(buf, &mut scratch[..need]);
        });
    }

    fn spectral(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let mut buf: Vec<Complex<f64>> = f.iter().map(|&x| Complex::new(x, 0.0)).collect();
        self.transform(&mut buf, true);
        // Both derivatives are real, so one inverse transform of
        // `D1 + i D2` returns `d1` in the real part and `d2` in the imaginary part.
        let half = n / 2;
        for (k, c) in buf.iter_mut().enumerate() {
            let wave = if k < half {
                k as f64
            } else if k > half {
                k as f64 - n as f64
            } else {
                0.0
            };
            let sq = if k == half {
                (half * half) as f64
            } else {
                wave * wave
            };
            let d1 = *c * Complex::new(0.0, wave);
            let d2 = *c * (-sq);
            *c = d1 + Complex::new(-d2.im, d2.re);
        }
        self.transform(&mut buf, false);
        let scale = 1.0 / n as f64;
        (
            buf.iter().map(|c| c.re * scale).collect(),
            buf.iter().map(|c| c.im * scale).collect(),
        )
    }

    fn finite_difference(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let h = self.spacing();
        let at = |i: isize| f[i.rem_euclid(n as isize) as usize];
        let mut d1 = Vec::with_capacity(n);
        let mut d2 = Vec::with_capacity(n);
        for i in 0..n as isize {
            let (m2, m1, c, p1, p2) = (at(i - 2), at(i - 1), at(i), at(i + 1), at(i + 2));
            d1.push((m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h));
            d2.push((-m2 + 16.0 * m1 - 30.0 * c + 16.0 * p1 - p2) / (12.0 * h * h));
        }
        (d1, d2)
    }
}

/// Trigonometric interpolation of periodic samples onto a grid `factor` times
/// finer, by zero padding. The Nyquist coefficient is split evenly.
pub fn fourier_upsample(f: &[f64], factor: usize) -> Vec<f64> {
    let n = f.len();
    let m = n * factor;
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex<f64>> = f.iter().map(|&x| Complex::new(x, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let mut wide = vec![Complex::new(0.0, 0.0); m];
    let half = n / 2;
    for k in 0..half {
        wide[k] = buf[k];
    }
    for k in half + 1..n {
        wide[m - n + k] = buf[k];
    }
    if n % 2 == 0 {
        wide[half] = buf[half] * 0.5;
        wide[m - half] = buf[half] * 0.5;
    } else {
        wide[half] = buf[half];
    }
    planner.plan_fft_inverse(m).process(&mut wide);
    let scale = 1.0 / n as f64;
    wide.iter().map(|c| c.re * scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| TAU * i as f64 / n as f64).collect()
    }

    #[test]
    fn spectral_is_exact_on_trig_polynomials() {
        let n = 64;
        let th = grid(n);
        let f: Vec<f64> = th.iter().map(|t| (3.0 * t).sin() + 0.5 * (7.0 * t).cos()).collect();
        let d = Differentiator::new(n, DiffMode::Spectral);
        let (d1, d2) = d.derivatives(&f);
        for i in 0..n {
            let t = th[i];
            assert!((d1[i] - (3.0 * (3.0 * t).cos() - 3.5 * (7.0 * t).sin())).abs() < 1e-12);
            assert!((d2[i] - (-9.0 * (3.0 * t).sin() - 24.5 * (7.0 * t).cos())).abs() < 1e-11);
        }
    }

    #[test]
    fn finite_differences_are_fourth_order() {
        let err = |n: usize| {
            let th = grid(n);
            let f: Vec<f64> = th.iter().map(|t| t.sin().exp()).collect();
            let d = Differentiator::new(n, DiffMode::FiniteDifference);
            let (d1, _) = d.derivatives(&f);
            th.iter()
                .zip(&d1)
                .map(|(t, v)| (v - t.cos() * t.sin().exp()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(64) / err(128);
        assert!(ratio > 14.0, "{ratio}");
    }

    #[test]
    fn upsampling_interpolates() {
        let n = 32;
        let f: Vec<f64> = grid(n).iter().map(|t| (2.0 * t).cos() + t.sin()).collect();
        let fine = fourier_upsample(&f, 4);
        for (i, t) in grid(4 * n).iter().enumerate() {
            assert!((fine[i] - ((2.0 * t).cos() + t.sin())).abs() < 1e-13);
        }
    }
}

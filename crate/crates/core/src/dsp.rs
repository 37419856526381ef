//! FFT-backed helpers shared by the simulator and the signal loaders.

use std::cell::RefCell;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

pub(crate) fn power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

thread_local! {
    // plans are cached by the planner; reuse it across calls
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_in_place(buf: &mut [Complex<f64>], inverse: bool) {
    let fft = PLANNER.with_borrow_mut(|p| if inverse { p.plan_fft_inverse(buf.len()) } else { p.plan_fft_forward(buf.len()) });
    fft.process(buf);
}

fn spectrum(x: &[f64], n: usize) -> Vec<Complex<f64>> {
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    for (b, &v) in buf.iter_mut().zip(x) {
        b.re = v;
    }
    fft_in_place(&mut buf, false);
    buf
}

fn real_part(mut buf: Vec<Complex<f64>>, out_len: usize) -> Vec<f64> {
    let n = buf.len();
    fft_in_place(&mut buf, true);
    let scale = 1.0 / n as f64;
    buf.iter().take(out_len).map(|c| c.re * scale).collect()
}

/// Smallest length `>= n` whose only prime factors are 2, 3 and 5.
pub(crate) fn smooth_len(n: usize) -> usize {
    let mut best = n.max(1).next_power_of_two();
    let mut p5 = 1;
    while p5 < best {
        let mut p35 = p5;
        while p35 < best {
            let mut v = p35;
            while v < n {
                v *= 2;
            }
            best = best.min(v);
            p35 *= 3;
        }
        p5 *= 5;
    }
    best
}

/// Spectrum of a real signal zero-padded to a 5-smooth length of at least `min_len`.
pub(crate) struct RealSpectrum {
    bins: Vec<Complex<f64>>,
    sample_rate: f64,
}

impl RealSpectrum {
    pub fn new(x: &[f64], min_len: usize, sample_rate: f64) -> Self {
        let n = smooth_len(min_len.max(x.len()));
        Self { bins: spectrum(x, n), sample_rate }
    }

    /// Spectrum of `x` at this transform length (e.g. an impulse response).
    pub fn spectrum_of(&self, x: &[f64]) -> Vec<Complex<f64>> {
        spectrum(x, self.bins.len())
    }

    /// Apply the response `h(bin, f)` (defined for f >= 0; the negative half is
    /// its conjugate mirror) and return the first `out_len` samples.
    pub fn filtered(&self, out_len: usize, mut h: impl FnMut(usize, f64) -> Complex<f64>) -> Vec<f64> {
        let n = self.bins.len();
        let df = self.sample_rate / n as f64;
        let mut out = self.bins.clone();
        for k in 0..=n / 2 {
            let g = h(k, k as f64 * df);
            out[k] *= g;
            if k != 0 && k != n / 2 {
                out[n - k] *= g.conj();
            }
        }
        real_part(out, out_len)
    }

    /// Number of non-negative frequency bins, `n / 2 + 1`.
    pub fn bins(&self) -> usize {
        self.bins.len() / 2 + 1
    }

    pub fn bin_width(&self) -> f64 {
        self.sample_rate / self.bins.len() as f64
    }
}

/// Keep only the spectral content within `[lo, hi]` Hz.
pub(crate) fn band_limit(x: &[f64], sample_rate: f64, lo: f64, hi: f64) -> Vec<f64> {
    let spec = RealSpectrum::new(x, x.len(), sample_rate);
    spec.filtered(x.len(), |_, f| {
        if f >= lo && f <= hi {
            Complex::new(1.0, 0.0)
        } else {
            Complex::new(0.0, 0.0)
        }
    })
}

/// Band-limited resampling by spectral truncation or zero extension.
pub(crate) fn resample(x: &[f64], from: f64, to: f64) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let m = ((n as f64) * to / from).round().max(1.0) as usize;
    if m == n {
        return x.to_vec();
    }
    let bins = spectrum(x, n);
    let mut out = vec![Complex::new(0.0, 0.0); m];
    let h = n.min(m);
    out[0] = bins[0];
    for k in 1..=(h - 1) / 2 {
        out[k] = bins[k];
        out[m - k] = bins[n - k];
    }
    if h % 2 == 0 {
        let k = h / 2;
        if m > n {
            // split the source Nyquist bin across both halves
            out[k] = bins[k] * 0.5;
            out[m - k] = bins[k] * 0.5;
        } else {
            out[k] = bins[k] + bins[n - k];
        }
    }
    let scale = m as f64 / n as f64;
    real_part(out, m).into_iter().map(|v| v * scale).collect()
}

/// Position of the cross-correlation maximum of `b` against `a`, in samples
/// (positive when `b` lags `a`), searched over `[-max_lag, max_lag]`.
pub fn xcorr_peak_lag(a: &[f64], b: &[f64], max_lag: usize) -> i64 {
    let n = a.len().min(b.len());
    let mut best = (f64::NEG_INFINITY, 0_i64);
    for lag in -(max_lag as i64)..=(max_lag as i64) {
        let mut acc = 0.0;
        for i in 0..n {
            let j = i as i64 + lag;
            if j >= 0 && (j as usize) < n {
                acc += a[i] * b[j as usize];
            }
        }
        if acc > best.0 {
            best = (acc, lag);
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_lengths() {
        assert_eq!(smooth_len(1), 1);
        assert_eq!(smooth_len(7), 8);
        assert_eq!(smooth_len(11), 12);
        assert_eq!(smooth_len(121), 125);
        assert_eq!(smooth_len(135_000), 135_000);
        for n in 1..2000 {
            let m = smooth_len(n);
            let mut r = m;
            for p in [2, 3, 5] {
                while r % p == 0 {
                    r /= p;
                }
            }
            assert!(m >= n && r == 1);
            // brute-force oracle: no smaller smooth length fits
            assert!((n..m).all(|k| {
                let mut r = k;
                for p in [2, 3, 5] {
                    while r % p == 0 {
                        r /= p;
                    }
                }
                r != 1
            }));
        }
    }

    #[test]
    fn convolution_matches_direct_sum() {
        let x = [1.0, -2.0, 0.5, 3.0];
        let h = [0.5, 0.25, -1.0];
        let spec = RealSpectrum::new(&x, x.len() + h.len(), 1.0);
        let hs = spec.spectrum_of(&h);
        let y = spec.filtered(x.len() + h.len() - 1, |k, _| hs[k]);
        for n in 0..y.len() {
            let mut want = 0.0;
            for (k, hk) in h.iter().enumerate() {
                if n >= k && n - k < x.len() {
                    want += hk * x[n - k];
                }
            }
            assert!((y[n] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_response_is_transparent() {
        let x: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let spec = RealSpectrum::new(&x, 100, 48000.0);
        let y = spec.filtered(100, |_, _| Complex::new(1.0, 0.0));
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn xcorr_finds_integer_delay() {
        let a: Vec<f64> = (0..500).map(|i| ((i * 7919) % 101) as f64 - 50.0).collect();
        let mut b = vec![0.0; 500];
        b[9..].copy_from_slice(&a[..491]);
        assert_eq!(xcorr_peak_lag(&a, &b, 30), 9);
    }
}

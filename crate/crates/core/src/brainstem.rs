//! Superior olive models: MSO coincidence counting over interaural time
//! differences and LSO log-amplitude-ratio counting over level differences.
//!
//! Both nuclei read the same spike pairs. Pairs are formed per channel by
//! nearest-first matching: every admissible cross-ear pair is ranked by
//! `|dt|` (then by its midpoint time) and accepted when neither spike has
//! been used yet. A pair is admissible when `|dt| <= max_itd` and
//! `2 * f_i * |dt| < 1`. The ranking does not depend on which ear is called
//! left, so swapping the ears mirrors both matrices exactly.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cochlea::SpikeTrain;
use crate::error::{invalid, Error, Result};

/// Analysis window, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowSpec {
    pub length_ms: f64,
    pub hop_ms: f64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self { length_ms: 100.0, hop_ms: 100.0 }
    }
}

impl WindowSpec {
    pub fn new(length_ms: f64, hop_ms: f64) -> Result<Self> {
        if !(length_ms > 0.0) || !(hop_ms > 0.0) || hop_ms > length_ms {
            return Err(invalid(format!("need 0 < hop <= length, got length {length_ms} ms, hop {hop_ms} ms")));
        }
        Ok(Self { length_ms, hop_ms })
    }

    pub fn length_samples(&self, sample_rate: f64) -> usize {
        (self.length_ms * 1e-3 * sample_rate).round() as usize
    }

    pub fn hop_samples(&self, sample_rate: f64) -> usize {
        (self.hop_ms * 1e-3 * sample_rate).round() as usize
    }

    /// `[start, end)` sample ranges of every full window within `len` samples.
    pub fn ranges(&self, len: usize, sample_rate: f64) -> Vec<(usize, usize)> {
        let (w, h) = (self.length_samples(sample_rate), self.hop_samples(sample_rate).max(1));
        let mut out = Vec::new();
        let mut start = 0;
        while start + w <= len {
            out.push((start, start + w));
            start += h;
        }
        out
    }
}

/// Shared MSO/LSO lateralization bins (the LSO uses as many neurons as the MSO).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LateralizationGrid {
    /// Largest representable interaural delay in seconds.
    pub max_itd: f64,
    pub sample_rate: f64,
    /// Largest representable delay in whole samples; `bins = 2 * max_lag + 1`.
    pub max_lag: usize,
    /// Bound on |log10(A_left / A_right)|.
    pub ild_clamp: f64,
}

pub const DEFAULT_ILD_CLAMP: f64 = 1.0;

impl LateralizationGrid {
    pub fn new(max_itd: f64, sample_rate: f64, ild_clamp: f64) -> Result<Self> {
        if !(max_itd > 0.0) || !(sample_rate > 0.0) || !(ild_clamp > 0.0) {
            return Err(invalid("lateralization grid needs positive max_itd, sample rate and ILD clamp"));
        }
        let max_lag = (max_itd * sample_rate).round() as usize;
        Ok(Self { max_itd, sample_rate, max_lag, ild_clamp })
    }

    /// Number of neurons per channel, `J`; always odd.
    pub fn bins(&self) -> usize {
        2 * self.max_lag + 1
    }

    pub fn center_bin(&self) -> usize {
        self.max_lag
    }

    /// Interaural delay (s) each MSO bin is tuned to; positive means the
    /// right ear lags.
    pub fn bin_delays(&self) -> Vec<f64> {
        (0..self.bins()).map(|j| (j as f64 - self.max_lag as f64) / self.sample_rate).collect()
    }

    /// Nominal azimuth (deg, 90 = front, 180 = left) of each bin, inverting the
    /// spherical-head delay `tau = (r/c)(sin x + x)` for a head whose extreme
    /// delay is `max_itd`.
    pub fn bin_angles(&self) -> Vec<f64> {
        let norm = std::f64::consts::FRAC_PI_2 + 1.0;
        self.bin_delays()
            .into_iter()
            .map(|d| {
                let target = (d.abs() / self.max_itd).min(1.0) * norm;
                // sin x + x is increasing on [0, pi/2]
                let (mut lo, mut hi) = (0.0_f64, std::f64::consts::FRAC_PI_2);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if mid.sin() + mid < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                90.0 + d.signum() * (0.5 * (lo + hi)).to_degrees()
            })
            .collect()
    }

    /// LSO bin of a log-amplitude ratio, rounding symmetrically about the center.
    pub fn ild_bin(&self, ratio: f64) -> usize {
        let r = ratio.clamp(-self.ild_clamp, self.ild_clamp);
        let offset = (r / self.ild_clamp * self.max_lag as f64).round() as i64;
        (self.max_lag as i64 + offset) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Nucleus {
    Mso,
    Lso,
}

/// Channel x bin spike counts of one nucleus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeMatrix {
    pub kind: Nucleus,
    pub rows: usize,
    pub cols: usize,
    pub counts: Vec<u32>,
}

impl SpikeMatrix {
    pub fn zeros(kind: Nucleus, rows: usize, cols: usize) -> Self {
        Self { kind, rows, cols, counts: vec![0; rows * cols] }
    }

    pub fn from_rows(kind: Nucleus, rows: &[Vec<u32>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self { kind, rows: rows.len(), cols, counts: rows.concat() }
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.counts[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.counts[i * self.cols..(i + 1) * self.cols]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }

    pub fn accumulate(&mut self, other: &SpikeMatrix) -> Result<()> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::DimensionMismatch(format!(
                "cannot add {}x{} to {}x{}",
                other.rows, other.cols, self.rows, self.cols
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// Reverse the bin axis (j -> J-1-j).
    pub fn mirrored(&self) -> SpikeMatrix {
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.counts[i * self.cols + j] = self.get(i, self.cols - 1 - j);
            }
        }
        out
    }

    /// Debug dump, one `i,j,count` line per cell.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("i,j,count\n");
        for i in 0..self.rows {
            for j in 0..self.cols {
                let _ = writeln!(s, "{i},{j},{}", self.get(i, j));
            }
        }
        s
    }
}

/// Matched spike indices `(left, right)` of one channel.
pub fn pair_spikes(left: &SpikeTrain, right: &SpikeTrain, center_hz: f64, grid: &LateralizationGrid) -> Vec<(usize, usize)> {
    let fs = grid.sample_rate;
    let admissible = |d: i64| {
        let d = d.unsigned_abs() as usize;
        d <= grid.max_lag && 2.0 * center_hz * (d as f64 / fs) < 1.0
    };
    let reach = grid.max_lag as i64;
    let mut candidates: Vec<(u64, u64, usize, usize)> = Vec::new();
    for (li, &tl) in left.times.iter().enumerate() {
        let lo = right.times.partition_point(|&t| (t as i64) < tl as i64 - reach);
        for (off, &tr) in right.times[lo..].iter().enumerate() {
            let d = tr as i64 - tl as i64;
            if d > reach {
                break;
            }
            if admissible(d) {
                candidates.push((d.unsigned_abs(), (tl + tr) as u64, li, lo + off));
            }
        }
    }
    candidates.sort_unstable();
    let mut used_l = vec![false; left.len()];
    let mut used_r = vec![false; right.len()];
    let mut pairs = Vec::new();
    for (_, _, li, ri) in candidates {
        if !used_l[li] && !used_r[ri] {
            used_l[li] = true;
            used_r[ri] = true;
            pairs.push((li, ri));
        }
    }
    pairs.sort_unstable();
    pairs
}

fn check_inputs(left: &[SpikeTrain], right: &[SpikeTrain], centers: &[f64]) -> Result<()> {
    if left.len() != right.len() || left.len() != centers.len() {
        return Err(Error::DimensionMismatch(format!(
            "channel counts differ: left {}, right {}, filterbank {}",
            left.len(),
            right.len(),
            centers.len()
        )));
    }
    Ok(())
}

fn log_ratio(a_left: f64, a_right: f64, clamp: f64) -> f64 {
    match (a_left > 0.0, a_right > 0.0) {
        (true, true) => a_left.log10() - a_right.log10(),
        (true, false) => clamp,
        (false, true) => -clamp,
        (false, false) => 0.0,
    }
}

/// MSO and LSO matrices of one window from the same spike pairs.
pub fn compute_binaural(
    left: &[SpikeTrain],
    right: &[SpikeTrain],
    centers: &[f64],
    grid: &LateralizationGrid,
) -> Result<(SpikeMatrix, SpikeMatrix)> {
    check_inputs(left, right, centers)?;
    let (rows, cols) = (centers.len(), grid.bins());
    let mut mso = SpikeMatrix::zeros(Nucleus::Mso, rows, cols);
    let mut lso = SpikeMatrix::zeros(Nucleus::Lso, rows, cols);
    for (i, &cf) in centers.iter().enumerate() {
        for (li, ri) in pair_spikes(&left[i], &right[i], cf, grid) {
            let d = right[i].times[ri] as i64 - left[i].times[li] as i64;
            mso.counts[i * cols + (grid.max_lag as i64 + d) as usize] += 1;
            let r = log_ratio(left[i].amplitudes[li], right[i].amplitudes[ri], grid.ild_clamp);
            lso.counts[i * cols + grid.ild_bin(r)] += 1;
        }
    }
    Ok((mso, lso))
}

pub fn compute_mso(left: &[SpikeTrain], right: &[SpikeTrain], centers: &[f64], grid: &LateralizationGrid) -> Result<SpikeMatrix> {
    compute_binaural(left, right, centers, grid).map(|(m, _)| m)
}

pub fn compute_lso(left: &[SpikeTrain], right: &[SpikeTrain], centers: &[f64], grid: &LateralizationGrid) -> Result<SpikeMatrix> {
    compute_binaural(left, right, centers, grid).map(|(_, l)| l)
}

/// Per-window MSO/LSO matrices over a whole recording of `len` samples.
pub fn windowed_matrices(
    left: &[SpikeTrain],
    right: &[SpikeTrain],
    centers: &[f64],
    grid: &LateralizationGrid,
    window: &WindowSpec,
    len: usize,
) -> Result<Vec<(SpikeMatrix, SpikeMatrix)>> {
    check_inputs(left, right, centers)?;
    window
        .ranges(len, grid.sample_rate)
        .into_iter()
        .map(|(s, e)| {
            let l: Vec<_> = left.iter().map(|t| t.window(s, e)).collect();
            let r: Vec<_> = right.iter().map(|t| t.window(s, e)).collect();
            compute_binaural(&l, &r, centers, grid)
        })
        .collect()
}

/// Sum of per-window matrices.
pub fn aggregate(windows: &[(SpikeMatrix, SpikeMatrix)]) -> Result<(SpikeMatrix, SpikeMatrix)> {
    let (first_m, first_l) = windows.first().ok_or_else(|| invalid("no analysis windows to aggregate"))?;
    let mut mso = first_m.clone();
    let mut lso = first_l.clone();
    for (m, l) in &windows[1..] {
        mso.accumulate(m)?;
        lso.accumulate(l)?;
    }
    Ok((mso, lso))
}

//! Inferior colliculus: Bayesian estimation of the MSO/LSO -> IC connection
//! weights and integration of both cues into the IC activity map.
//!
//! Training fits one Poisson rate per neuron and angle (the per-angle sample
//! mean of the training matrices). Each neuron `(i, j)` then gets a posterior
//! over angles, which is pruned against a fraction of its own maximum into
//! excitatory and inhibitory weights. LSO connections exist only in channels
//! at or above `f_tau`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::brainstem::SpikeMatrix;
use crate::error::{invalid, Error, Result};

pub const DEFAULT_F_TAU: f64 = 1400.0;
pub const DEFAULT_OMEGA: f64 = 0.5;

/// Azimuths (deg) the IC neurons are tuned to; 90 is straight ahead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleGrid {
    pub angles: Vec<f64>,
}

impl Default for AngleGrid {
    fn default() -> Self {
        Self { angles: (0..13).map(|k| k as f64 * 15.0).collect() }
    }
}

impl AngleGrid {
    pub fn new(angles: Vec<f64>) -> Result<Self> {
        if angles.is_empty() || !angles.windows(2).all(|w| w[0] < w[1]) {
            return Err(invalid("angle grid must be non-empty and strictly increasing"));
        }
        Ok(Self { angles })
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn index_of(&self, angle: f64) -> Option<usize> {
        self.angles.iter().position(|&a| (a - angle).abs() < 1e-6)
    }

    /// Grid spacing in degrees (uniform grids).
    pub fn step(&self) -> f64 {
        if self.angles.len() < 2 {
            0.0
        } else {
            self.angles[1] - self.angles[0]
        }
    }
}

/// Labeled training matrices of one nucleus.
#[derive(Debug, Clone, Default)]
pub struct TrainingSet {
    pub instances: Vec<(SpikeMatrix, f64)>,
}

impl TrainingSet {
    pub fn push(&mut self, matrix: SpikeMatrix, angle: f64) {
        self.instances.push((matrix, angle));
    }
}

/// Per-angle Poisson rate of every neuron, row-major `I x J` per angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonRates {
    pub grid: AngleGrid,
    pub rows: usize,
    pub cols: usize,
    pub rates: Vec<Vec<f64>>,
}

impl PoissonRates {
    pub fn rate(&self, k: usize, i: usize, j: usize) -> f64 {
        self.rates[k][i * self.cols + j]
    }
}

/// Maximum-likelihood rates: the per-angle sample mean.
pub fn estimate_rates(train: &TrainingSet, grid: &AngleGrid) -> Result<PoissonRates> {
    let (first, _) = train.instances.first().ok_or_else(|| invalid("empty training set"))?;
    let (rows, cols) = (first.rows, first.cols);
    let mut sums = vec![vec![0.0_f64; rows * cols]; grid.len()];
    let mut counts = vec![0_usize; grid.len()];
    for (m, angle) in &train.instances {
        let k = grid.index_of(*angle).ok_or_else(|| invalid(format!("label {angle} deg is not on the angle grid")))?;
        if (m.rows, m.cols) != (rows, cols) {
            return Err(Error::DimensionMismatch(format!(
                "training matrix is {}x{}, expected {rows}x{cols}",
                m.rows, m.cols
            )));
        }
        for (s, &c) in sums[k].iter_mut().zip(&m.counts) {
            *s += c as f64;
        }
        counts[k] += 1;
    }
    if let Some(k) = counts.iter().position(|&n| n == 0) {
        return Err(Error::EmptyAngle(grid.angles[k]));
    }
    for (row, &n) in sums.iter_mut().zip(&counts) {
        for v in row.iter_mut() {
            *v /= n as f64;
        }
    }
    Ok(PoissonRates { grid: grid.clone(), rows, cols, rates: sums })
}

/// `ln p(S | lambda)` under independent Poisson neurons, with `0 ln 0 = 0`.
pub fn poisson_log_likelihood(counts: &[u32], rates: &[f64]) -> f64 {
    counts
        .iter()
        .zip(rates)
        .map(|(&s, &lambda)| {
            let s = s as f64;
            if s == 0.0 {
                -lambda
            } else if lambda <= 0.0 {
                f64::NEG_INFINITY
            } else {
                s * lambda.ln() - lambda - ln_gamma(s + 1.0)
            }
        })
        .sum()
}

/// Normalize log-weights into probabilities; all `-inf` gives a uniform vector.
fn normalize_log(logs: &[f64]) -> Vec<f64> {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return vec![1.0 / logs.len() as f64; logs.len()];
    }
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|v| v / z).collect()
}

/// Posterior over the rate grid's angles given an observed matrix, uniform prior.
pub fn posterior(observed: &SpikeMatrix, rates: &PoissonRates) -> Result<Vec<f64>> {
    if (observed.rows, observed.cols) != (rates.rows, rates.cols) {
        return Err(Error::DimensionMismatch(format!(
            "observation is {}x{}, rates are {}x{}",
            observed.rows, observed.cols, rates.rows, rates.cols
        )));
    }
    let prior = -(rates.grid.len() as f64).ln();
    let logs: Vec<f64> = rates.rates.iter().map(|r| poisson_log_likelihood(&observed.counts, r) + prior).collect();
    Ok(normalize_log(&logs))
}

/// Dense `I x J x K` tensor, `k` fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor3 {
    pub rows: usize,
    pub cols: usize,
    pub depth: usize,
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(rows: usize, cols: usize, depth: usize) -> Self {
        Self { rows, cols, depth, data: vec![0.0; rows * cols * depth] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.cols + j) * self.depth + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.data[(i * self.cols + j) * self.depth + k] = v;
    }

    /// The `K` values of neuron `(i, j)`.
    pub fn fiber(&self, i: usize, j: usize) -> &[f64] {
        let s = (i * self.cols + j) * self.depth;
        &self.data[s..s + self.depth]
    }
}

/// Posterior of each angle given a spike of neuron `(i, j)`.
///
/// The likelihood of a spike landing in neuron `j` of channel `i` when the
/// source is at `theta_k` is the Poisson rate normalized by its channel total
/// (independent Poisson counts conditioned on the channel's spike count).
/// Neurons silent at every angle get a uniform posterior.
pub fn neuron_posteriors(rates: &PoissonRates) -> Tensor3 {
    let (rows, cols, k_n) = (rates.rows, rates.cols, rates.grid.len());
    let mut out = Tensor3::zeros(rows, cols, k_n);
    let totals: Vec<Vec<f64>> = (0..k_n)
        .map(|k| (0..rows).map(|i| (0..cols).map(|j| rates.rate(k, i, j)).sum()).collect())
        .collect();
    for i in 0..rows {
        for j in 0..cols {
            let logs: Vec<f64> = (0..k_n)
                .map(|k| {
                    let (r, t) = (rates.rate(k, i, j), totals[k][i]);
                    if r > 0.0 && t > 0.0 {
                        (r / t).ln()
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect();
            for (k, p) in normalize_log(&logs).into_iter().enumerate() {
                out.set(i, j, k, p);
            }
        }
    }
    out
}

/// Pruning thresholds, each a fraction of a neuron's maximum posterior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Omegas {
    pub e_mso: f64,
    pub e_lso: f64,
    pub i_lso: f64,
}

impl Default for Omegas {
    fn default() -> Self {
        Self { e_mso: DEFAULT_OMEGA, e_lso: DEFAULT_OMEGA, i_lso: DEFAULT_OMEGA }
    }
}

impl Omegas {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("e_mso", self.e_mso), ("e_lso", self.e_lso), ("i_lso", self.i_lso)] {
            if !(0.0..=1.0).contains(&w) {
                return Err(invalid(format!("omega {name} = {w} is outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// MSO/LSO -> IC connection weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcWeights {
    pub e_mso: Tensor3,
    pub e_lso: Tensor3,
    pub i_lso: Tensor3,
    pub omegas: Omegas,
    pub f_tau: f64,
    pub centers: Vec<f64>,
    pub grid: AngleGrid,
}

impl IcWeights {
    /// Uniform prior over the angle grid.
    pub fn prior(&self) -> f64 {
        1.0 / self.grid.len() as f64
    }
}

/// Prune per-neuron posteriors into IC weights.
///
/// A neuron keeps an excitatory weight `P` towards angle `k` when
/// `P_k > omega * max_k P`; it gets an inhibitory weight `1 - P` when
/// `P_k < omega * max_k P`. LSO weights are zero below `f_tau`.
pub fn derive_weights(
    p_mso: &Tensor3,
    p_lso: &Tensor3,
    centers: &[f64],
    grid: &AngleGrid,
    omegas: Omegas,
    f_tau: f64,
) -> Result<IcWeights> {
    omegas.validate()?;
    let dims = (p_mso.rows, p_mso.cols, p_mso.depth);
    if dims != (p_lso.rows, p_lso.cols, p_lso.depth) || dims.0 != centers.len() || dims.2 != grid.len() {
        return Err(Error::DimensionMismatch(format!(
            "posteriors {:?} / {:?} do not match {} channels and {} angles",
            dims,
            (p_lso.rows, p_lso.cols, p_lso.depth),
            centers.len(),
            grid.len()
        )));
    }
    let (rows, cols, depth) = dims;
    let mut e_mso = Tensor3::zeros(rows, cols, depth);
    let mut e_lso = Tensor3::zeros(rows, cols, depth);
    let mut i_lso = Tensor3::zeros(rows, cols, depth);
    let peak = |f: &[f64]| f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for i in 0..rows {
        let high = centers[i] >= f_tau;
        for j in 0..cols {
            let (pm, pl) = (p_mso.fiber(i, j), p_lso.fiber(i, j));
            let (max_m, max_l) = (peak(pm), peak(pl));
            for k in 0..depth {
                if pm[k] > omegas.e_mso * max_m {
                    e_mso.set(i, j, k, pm[k]);
                }
                if high && pl[k] > omegas.e_lso * max_l {
                    e_lso.set(i, j, k, pl[k]);
                }
                if high && pl[k] < omegas.i_lso * max_l {
                    i_lso.set(i, j, k, 1.0 - pl[k]);
                }
            }
        }
    }
    Ok(IcWeights { e_mso, e_lso, i_lso, omegas, f_tau, centers: centers.to_vec(), grid: grid.clone() })
}

/// IC activity, `I x K` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcActivity {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl IcActivity {
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.cols + k]
    }
}

/// `S_IC[i][k] = sum_j S_mso[i][j] E_mso[i][j][k] + S_lso[i][j] (E_lso - I_lso)[i][j][k]`.
pub fn integrate_ic(mso: &SpikeMatrix, lso: &SpikeMatrix, w: &IcWeights) -> Result<IcActivity> {
    let (rows, cols, depth) = (w.e_mso.rows, w.e_mso.cols, w.e_mso.depth);
    for m in [mso, lso] {
        if (m.rows, m.cols) != (rows, cols) {
            return Err(Error::DimensionMismatch(format!(
                "spike matrix is {}x{}, weights expect {rows}x{cols}",
                m.rows, m.cols
            )));
        }
    }
    let mut values = vec![0.0; rows * depth];
    for i in 0..rows {
        let out = &mut values[i * depth..(i + 1) * depth];
        for j in 0..cols {
            let (sm, sl) = (mso.get(i, j) as f64, lso.get(i, j) as f64);
            if sm != 0.0 {
                for (o, e) in out.iter_mut().zip(w.e_mso.fiber(i, j)) {
                    *o += sm * e;
                }
            }
            if sl != 0.0 {
                let (el, il) = (w.e_lso.fiber(i, j), w.i_lso.fiber(i, j));
                for k in 0..depth {
                    out[k] += sl * el[k] - sl * il[k];
                }
            }
        }
    }
    Ok(IcActivity { rows, cols: depth, values })
}

/// Softmax of every angle column across the frequency channels.
pub fn softmax_ic(ic: &IcActivity) -> IcActivity {
    softmax_ic_along(ic, SoftmaxAxis::AcrossChannels)
}

/// Which entries of S^IC one softmax normalizes together.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SoftmaxAxis {
    /// Each angle column across the channels.
    AcrossChannels,
    /// Each channel row across the angles: a soft winner-take-all per f_i.
    #[default]
    AcrossAngles,
}

pub fn softmax_ic_along(ic: &IcActivity, axis: SoftmaxAxis) -> IcActivity {
    let (groups, len, at): (usize, usize, fn(usize, usize, usize) -> usize) = match axis {
        SoftmaxAxis::AcrossChannels => (ic.cols, ic.rows, |g, n, cols| n * cols + g),
        SoftmaxAxis::AcrossAngles => (ic.rows, ic.cols, |g, n, cols| g * cols + n),
    };
    let mut out = ic.clone();
    for g in 0..groups {
        let idx = |n| at(g, n, ic.cols);
        let max = (0..len).map(|n| ic.values[idx(n)]).fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = (0..len).map(|n| (ic.values[idx(n)] - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        for (n, e) in exps.into_iter().enumerate() {
            out.values[idx(n)] = e / z;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brainstem::Nucleus;

    fn m(rows: &[Vec<u32>]) -> SpikeMatrix {
        SpikeMatrix::from_rows(Nucleus::Mso, rows)
    }

    fn two_angles() -> AngleGrid {
        AngleGrid::new(vec![0.0, 15.0]).unwrap()
    }

    #[test]
    fn default_grid_is_thirteen_angles() {
        let g = AngleGrid::default();
        assert_eq!(g.len(), 13);
        assert_eq!(g.angles[6], 90.0);
        assert_eq!(g.angles[12], 180.0);
        assert!(AngleGrid::new(vec![10.0, 5.0]).is_err());
    }

    #[test]
    fn single_instance_rates_are_that_instance() {
        let mut t = TrainingSet::default();
        t.push(m(&[vec![2, 5]]), 0.0);
        t.push(m(&[vec![7, 1]]), 15.0);
        let r = estimate_rates(&t, &two_angles()).unwrap();
        assert_eq!(r.rates, vec![vec![2.0, 5.0], vec![7.0, 1.0]]);
    }

    #[test]
    fn rates_are_the_mean() {
        let mut t = TrainingSet::default();
        t.push(m(&[vec![2]]), 0.0);
        t.push(m(&[vec![4]]), 0.0);
        t.push(m(&[vec![1]]), 15.0);
        let r = estimate_rates(&t, &two_angles()).unwrap();
        assert_eq!(r.rates[0], vec![3.0]);
    }

    #[test]
    fn missing_angle_is_named() {
        let mut t = TrainingSet::default();
        t.push(m(&[vec![2]]), 0.0);
        match estimate_rates(&t, &two_angles()) {
            Err(Error::EmptyAngle(a)) => assert_eq!(a, 15.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn rates(values: &[f64]) -> PoissonRates {
        PoissonRates {
            grid: AngleGrid::new((0..values.len()).map(|k| k as f64 * 15.0).collect()).unwrap(),
            rows: 1,
            cols: 1,
            rates: values.iter().map(|&v| vec![v]).collect(),
        }
    }

    #[test]
    fn hand_evaluated_posterior() {
        // 1 e^-1 against 3 e^-3, normalized
        let p = posterior(&m(&[vec![1]]), &rates(&[1.0, 3.0])).unwrap();
        assert!((p[0] - 0.7112).abs() < 1e-4 && (p[1] - 0.2888).abs() < 1e-4, "{p:?}");
    }

    #[test]
    fn identical_rates_give_uniform_posterior() {
        let p = posterior(&m(&[vec![4]]), &rates(&[2.0, 2.0, 2.0])).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn impossible_observation_is_not_nan() {
        // every angle has zero rate where a spike was observed
        let p = posterior(&m(&[vec![3]]), &rates(&[0.0, 0.0])).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
        // huge counts underflow every likelihood without log-space handling
        let p = posterior(&m(&[vec![5000]]), &rates(&[1.0, 2.0])).unwrap();
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    fn tensor(rows: usize, cols: usize, depth: usize, f: impl Fn(usize, usize, usize) -> f64) -> Tensor3 {
        let mut t = Tensor3::zeros(rows, cols, depth);
        for i in 0..rows {
            for j in 0..cols {
                for k in 0..depth {
                    t.set(i, j, k, f(i, j, k));
                }
            }
        }
        t
    }

    #[test]
    fn omega_zero_keeps_everything_and_one_prunes_all() {
        let p = tensor(2, 3, 4, |i, j, k| 0.1 + 0.05 * (i + j + k) as f64);
        let g = AngleGrid::new(vec![0.0, 15.0, 30.0, 45.0]).unwrap();
        let centers = [500.0, 2000.0];
        let w = derive_weights(&p, &p, &centers, &g, Omegas { e_mso: 0.0, e_lso: 0.0, i_lso: 0.0 }, 1400.0).unwrap();
        assert_eq!(w.e_mso, p);
        let w = derive_weights(&p, &p, &centers, &g, Omegas { e_mso: 1.0, e_lso: 1.0, i_lso: 1.0 }, 1400.0).unwrap();
        assert!(w.e_mso.data.iter().all(|&v| v == 0.0));
        assert!(w.e_lso.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn no_lso_weights_below_f_tau() {
        let p = tensor(2, 3, 4, |_, j, k| if j == k { 0.7 } else { 0.1 });
        let g = AngleGrid::new(vec![0.0, 15.0, 30.0, 45.0]).unwrap();
        let w = derive_weights(&p, &p, &[1000.0, 2000.0], &g, Omegas::default(), 1400.0).unwrap();
        for j in 0..3 {
            assert!(w.e_lso.fiber(0, j).iter().all(|&v| v == 0.0));
            assert!(w.i_lso.fiber(0, j).iter().all(|&v| v == 0.0));
        }
        // above f_tau: peak is excitatory, the rest inhibitory with 1 - P
        assert_eq!(w.e_lso.fiber(1, 1), &[0.0, 0.7, 0.0, 0.0]);
        assert_eq!(w.i_lso.fiber(1, 1), &[0.9, 0.0, 0.9, 0.9]);
    }

    #[test]
    fn scalar_integration() {
        let g = AngleGrid::new(vec![90.0]).unwrap();
        let w = IcWeights {
            e_mso: tensor(1, 1, 1, |_, _, _| 0.5),
            e_lso: tensor(1, 1, 1, |_, _, _| 0.25),
            i_lso: tensor(1, 1, 1, |_, _, _| 0.1),
            omegas: Omegas::default(),
            f_tau: 1400.0,
            centers: vec![2000.0],
            grid: g,
        };
        let ic = integrate_ic(&m(&[vec![2]]), &m(&[vec![3]]), &w).unwrap();
        assert!((ic.values[0] - 1.45).abs() < 1e-15);
        let zero = integrate_ic(&m(&[vec![0]]), &m(&[vec![0]]), &w).unwrap();
        assert_eq!(zero.values, vec![0.0]);
    }

    #[test]
    fn softmax_closed_forms() {
        let ic = IcActivity { rows: 2, cols: 2, values: vec![0.0, 5.0, 3f64.ln(), 5.0] };
        let s = softmax_ic(&ic);
        assert!((s.get(0, 0) - 0.25).abs() < 1e-15 && (s.get(1, 0) - 0.75).abs() < 1e-15);
        assert_eq!(s.get(0, 1), 0.5);
        let shifted = IcActivity { rows: 2, cols: 2, values: ic.values.iter().map(|v| v + 1000.0).collect() };
        let s2 = softmax_ic(&shifted);
        for (a, b) in s.values.iter().zip(&s2.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_across_angles_normalizes_rows() {
        let ic = IcActivity { rows: 2, cols: 2, values: vec![0.0, 3f64.ln(), 7.0, 7.0] };
        let s = softmax_ic_along(&ic, SoftmaxAxis::AcrossAngles);
        assert!((s.get(0, 0) - 0.25).abs() < 1e-15 && (s.get(0, 1) - 0.75).abs() < 1e-15);
        assert_eq!((s.get(1, 0), s.get(1, 1)), (0.5, 0.5));
    }

    #[test]
    fn neuron_posteriors_follow_normalized_rates() {
        // channel totals: angle 0 -> 4, angle 1 -> 2
        let r = PoissonRates {
            grid: two_angles(),
            rows: 1,
            cols: 2,
            rates: vec![vec![3.0, 1.0], vec![0.0, 2.0]],
        };
        let p = neuron_posteriors(&r);
        assert_eq!(p.fiber(0, 0), &[1.0, 0.0]);
        // 0.25 vs 1.0
        assert!((p.get(0, 1, 0) - 0.2).abs() < 1e-15 && (p.get(0, 1, 1) - 0.8).abs() < 1e-15);
    }
}

//! Self-check suite: each core computation against an independent brute-force
//! oracle on seeded random instances. Backs the `check` command.

use rand::Rng;
use serde::Serialize;

use crate::brainstem::{compute_binaural, LateralizationGrid, Nucleus, SpikeMatrix};
use crate::classifier::{gradient_check, softmax, train_mlp, Example, MlpModel, TrainConfig};
use crate::cochlea::SpikeTrain;
use crate::error::Result;
use crate::midbrain::{
    derive_weights, estimate_rates, integrate_ic, neuron_posteriors, posterior, AngleGrid, Omegas, PoissonRates,
    Tensor3, TrainingSet, DEFAULT_F_TAU,
};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(suite: &'static str, name: &'static str, passed: bool, detail: String) -> Check {
    Check { suite, name, passed, detail }
}

fn random_matrix(rng: &mut impl Rng, kind: Nucleus, rows: usize, cols: usize, max: u32) -> SpikeMatrix {
    let r: Vec<Vec<u32>> = (0..rows).map(|_| (0..cols).map(|_| rng.random_range(0..=max)).collect()).collect();
    SpikeMatrix::from_rows(kind, &r)
}

fn random_tensor(rng: &mut impl Rng, rows: usize, cols: usize, depth: usize) -> Tensor3 {
    let mut t = Tensor3::zeros(rows, cols, depth);
    for i in 0..rows {
        for j in 0..cols {
            for k in 0..depth {
                t.set(i, j, k, rng.random::<f64>());
            }
        }
    }
    t
}

/// Rates, IC integration, posteriors and pruning.
pub fn exact_math(master: u64) -> Result<Vec<Check>> {
    const S: &str = "exact-math";
    let mut rng = seed::rng(seed::derive(master, "exact-math", 0));
    let mut out = Vec::new();

    // Poisson MLE: sample mean against a plain summation
    let grid = AngleGrid::new(vec![0.0, 15.0, 30.0])?;
    let mut set = TrainingSet::default();
    for n in 0..30 {
        set.push(random_matrix(&mut rng, Nucleus::Mso, 4, 5, 50), grid.angles[n % 3]);
    }
    let rates = estimate_rates(&set, &grid)?;
    let mut worst: f64 = 0.0;
    for (k, &a) in grid.angles.iter().enumerate() {
        let members: Vec<&SpikeMatrix> = set.instances.iter().filter(|(_, x)| *x == a).map(|(m, _)| m).collect();
        for i in 0..4 {
            for j in 0..5 {
                let mut sum = 0.0;
                for m in &members {
                    sum += m.get(i, j) as f64;
                }
                worst = worst.max((sum / members.len() as f64 - rates.rate(k, i, j)).abs());
            }
        }
    }
    out.push(check(S, "rates equal the sample mean", worst <= 1e-12, format!("max deviation {worst:e}")));

    // IC activity against a triple loop
    let (rows, cols, depth) = (3, 4, 5);
    let mso = random_matrix(&mut rng, Nucleus::Mso, rows, cols, 20);
    let lso = random_matrix(&mut rng, Nucleus::Lso, rows, cols, 20);
    let g5 = AngleGrid::new((0..depth).map(|k| 15.0 * k as f64).collect())?;
    let mut w = derive_weights(
        &random_tensor(&mut rng, rows, cols, depth),
        &random_tensor(&mut rng, rows, cols, depth),
        &[500.0, 1500.0, 3000.0],
        &g5,
        Omegas::default(),
        DEFAULT_F_TAU,
    )?;
    w.e_mso = random_tensor(&mut rng, rows, cols, depth);
    w.e_lso = random_tensor(&mut rng, rows, cols, depth);
    w.i_lso = random_tensor(&mut rng, rows, cols, depth);
    let ic = integrate_ic(&mso, &lso, &w)?;
    let mut exact = true;
    for i in 0..rows {
        for k in 0..depth {
            let mut c = 0.0;
            for j in 0..cols {
                let (sm, sl) = (mso.get(i, j) as f64, lso.get(i, j) as f64);
                c += sm * w.e_mso.get(i, j, k);
                c += sl * w.e_lso.get(i, j, k) - sl * w.i_lso.get(i, j, k);
            }
            exact &= c == ic.get(i, k);
        }
    }
    out.push(check(S, "IC integration equals the triple loop", exact, "3x4x5 random tensors".into()));

    // posterior: normalization and the two-angle hand case
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let p = posterior(&random_matrix(&mut rng, Nucleus::Mso, 4, 5, 50), &rates)?;
        worst = worst.max((p.iter().sum::<f64>() - 1.0).abs());
    }
    out.push(check(S, "posteriors sum to one", worst <= 1e-9, format!("max |sum - 1| {worst:e}")));
    let two = PoissonRates {
        grid: AngleGrid::new(vec![0.0, 15.0])?,
        rows: 1,
        cols: 1,
        rates: vec![vec![1.0], vec![3.0]],
    };
    let p = posterior(&SpikeMatrix::from_rows(Nucleus::Mso, &[vec![1]]), &two)?;
    let (a, b) = ((-1.0f64).exp(), 3.0 * (-3.0f64).exp());
    let hand = (a / (a + b), b / (a + b));
    let ok = (p[0] - 0.7112).abs() <= 1e-4 && (p[1] - 0.2888).abs() <= 1e-4 && (p[0] - hand.0).abs() <= 1e-12;
    out.push(check(S, "posterior hand case", ok, format!("P = ({:.4}, {:.4})", p[0], p[1])));

    // pruned weights: no LSO weight below f_tau
    let centers: Vec<f64> = (0..20).map(|i| 200.0 + 200.0 * i as f64).collect();
    let g13 = AngleGrid::default();
    let mut violations = 0;
    for _ in 0..10 {
        let mut set = TrainingSet::default();
        for &a in &g13.angles {
            set.push(random_matrix(&mut rng, Nucleus::Lso, 20, 7, 30), a);
        }
        let r = estimate_rates(&set, &g13)?;
        let p = neuron_posteriors(&r);
        let omegas = Omegas { e_mso: rng.random(), e_lso: rng.random(), i_lso: rng.random() };
        let w = derive_weights(&p, &p, &centers, &g13, omegas, DEFAULT_F_TAU)?;
        for i in (0..centers.len()).filter(|&i| centers[i] < DEFAULT_F_TAU) {
            for j in 0..7 {
                violations += w.e_lso.fiber(i, j).iter().chain(w.i_lso.fiber(i, j)).filter(|&&v| v != 0.0).count();
            }
        }
    }
    out.push(check(S, "no LSO weight below f_tau", violations == 0, format!("{violations} nonzero weights")));
    Ok(out)
}

/// Repeatedly take the admissible unused pair with the smallest |lag|, found
/// by scanning every pair (ties: smaller t_l + t_r, then lower indices).
fn exhaustive_pairs(l: &[usize], r: &[usize], f: f64, grid: &LateralizationGrid) -> Vec<(usize, usize)> {
    let mut used_l = vec![false; l.len()];
    let mut used_r = vec![false; r.len()];
    let mut pairs = Vec::new();
    loop {
        let mut best: Option<(usize, usize, usize, usize)> = None;
        for (a, &tl) in l.iter().enumerate() {
            for (b, &tr) in r.iter().enumerate() {
                let d = tl.abs_diff(tr);
                let ok = !used_l[a] && !used_r[b] && d <= grid.max_lag && 2.0 * f * d as f64 / grid.sample_rate < 1.0;
                if ok && best.is_none_or(|x| (d, tl + tr, a, b) < x) {
                    best = Some((d, tl + tr, a, b));
                }
            }
        }
        let Some((_, _, a, b)) = best else { break };
        used_l[a] = true;
        used_r[b] = true;
        pairs.push((a, b));
    }
    pairs
}

fn random_train(rng: &mut impl Rng, n: usize, span: usize) -> SpikeTrain {
    let mut times: Vec<usize> = (0..n).map(|_| rng.random_range(0..span)).collect();
    times.sort_unstable();
    times.dedup();
    let amplitudes = times.iter().map(|_| rng.random_range(0.01..1.0)).collect();
    SpikeTrain { channel: 0, times, amplitudes }
}

/// MSO pairing, the half-period rule and left/right mirror symmetry.
pub fn spike_physics(master: u64, grid: &LateralizationGrid) -> Result<Vec<Check>> {
    const S: &str = "spike-physics";
    let mut rng = seed::rng(seed::derive(master, "spike-physics", 0));
    let mut out = Vec::new();
    let cols = grid.bins();

    let centers = [300.0, 800.0, 1500.0, 3000.0];
    let mut mismatches = 0;
    let mut mirror_ok = true;
    for _ in 0..25 {
        let left: Vec<SpikeTrain> = centers.iter().map(|_| random_train(&mut rng, 100, 4800)).collect();
        let right: Vec<SpikeTrain> = centers.iter().map(|_| random_train(&mut rng, 100, 4800)).collect();
        let (mso, lso) = compute_binaural(&left, &right, &centers, grid)?;
        let mut oracle = vec![0u32; centers.len() * cols];
        for (i, &f) in centers.iter().enumerate() {
            for (a, b) in exhaustive_pairs(&left[i].times, &right[i].times, f, grid) {
                let d = right[i].times[b] as i64 - left[i].times[a] as i64;
                oracle[i * cols + (grid.max_lag as i64 + d) as usize] += 1;
            }
        }
        mismatches += oracle.iter().zip(&mso.counts).filter(|(a, b)| a != b).count();
        let (m2, l2) = compute_binaural(&right, &left, &centers, grid)?;
        mirror_ok &= m2 == mso.mirrored() && l2 == lso.mirrored();
    }
    out.push(check(S, "MSO equals exhaustive pairing", mismatches == 0, format!("{mismatches} differing cells")));

    // 2 kHz channel, right ear 300 us late: 2 f dt = 1.2; sparse spikes so
    // no other pairing lies within reach
    let lag = (300e-6 * grid.sample_rate).round() as usize;
    let l: Vec<usize> = (0..100).map(|n| 100 + 480 * n).collect();
    let r: Vec<usize> = l.iter().map(|t| t + lag).collect();
    let train = |t: &[usize]| SpikeTrain { channel: 0, times: t.to_vec(), amplitudes: vec![0.5; t.len()] };
    let (m, _) = compute_binaural(&[train(&l)], &[train(&r)], &[2000.0], grid)?;
    let held = 2.0 * 2000.0 * lag as f64 / grid.sample_rate >= 1.0 && m.total() == 0;
    out.push(check(S, "half-period rule silences 2 kHz at 300 us", held, format!("{} counts", m.total())));
    out.push(check(S, "left/right swap mirrors both matrices", mirror_ok, "25 random windows".into()));
    Ok(out)
}

fn random_model(rng: &mut impl Rng, input: usize, output: usize) -> MlpModel {
    let mut m = MlpModel::zeros(input, output);
    let hidden = m.hidden;
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
    m.w1 = draw(hidden * input);
    m.b1 = draw(hidden);
    m.w2 = draw(output * hidden);
    m.b2 = draw(output);
    m
}

/// Gradients, softmax normalization and seeded training determinism.
pub fn mlp(master: u64) -> Result<Vec<Check>> {
    const S: &str = "mlp";
    let mut rng = seed::rng(seed::derive(master, "mlp", 0));
    let mut out = Vec::new();
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let m = random_model(&mut rng, 10, 3);
        let batch: Vec<Example> =
            (0..8).map(|_| ((0..10).map(|_| rng.random_range(-1.0..1.0)).collect(), rng.random_range(0..3))).collect();
        worst = worst.max(gradient_check(&m, &batch, 1e-5, m.param_count(), rng.random()));
    }
    out.push(check(S, "gradients match central differences", worst < 1e-4, format!("max relative error {worst:e}")));

    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let scale = 10f64.powf(rng.random_range(-2.0..3.0));
        let z: Vec<f64> = (0..13).map(|_| rng.random_range(-scale..scale)).collect();
        worst = worst.max((softmax(&z).iter().sum::<f64>() - 1.0).abs());
    }
    out.push(check(S, "softmax sums to one", worst <= 1e-9, format!("max |sum - 1| {worst:e}")));

    let data: Vec<Example> = (0..60)
        .map(|n| {
            let c = n % 3;
            ((0..10).map(|d| if d % 3 == c { 1.0 } else { 0.0 } + rng.random_range(-0.3..0.3)).collect(), c)
        })
        .collect();
    let cfg = TrainConfig { epochs: 30, seed: rng.random(), ..TrainConfig::default() };
    let (a, _) = train_mlp(&data, 3, &cfg)?;
    let (b, _) = train_mlp(&data, 3, &cfg)?;
    let bits = |m: &MlpModel| -> Vec<u64> { m.w1.iter().chain(&m.b1).chain(&m.w2).chain(&m.b2).map(|v| v.to_bits()).collect() };
    out.push(check(S, "seeded training is bit-identical", bits(&a) == bits(&b), "two runs, 30 epochs".into()));
    Ok(out)
}

/// Every suite with the default lateralization grid.
pub fn run_all(master: u64, grid: &LateralizationGrid) -> Result<Vec<Check>> {
    let mut out = exact_math(master)?;
    out.extend(spike_physics(master, grid)?);
    out.extend(mlp(master)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        let grid = LateralizationGrid::new(543e-6, 48_000.0, 1.0).unwrap();
        let checks = run_all(3, &grid).unwrap();
        assert_eq!(checks.len(), 11);
        for c in &checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}

use binaural_ssl::acoustics::{render, HeadModel, SceneSpec};
use binaural_ssl::asr::{levenshtein, rerank, synth_hypotheses, DomainCorpus, Lexicon};
use binaural_ssl::behavior::{relative_azimuth, NeckState};
use binaural_ssl::brainstem::{compute_binaural, LateralizationGrid, Nucleus, SpikeMatrix};
use binaural_ssl::classifier::{argmax, softmax, MlpModel};
use binaural_ssl::cochlea::{design_filterbank, encode_spikes, filter_signal, SpikeTrain};
use binaural_ssl::midbrain::{
    derive_weights, estimate_rates, integrate_ic, posterior, softmax_ic_along, AngleGrid, IcActivity, Omegas,
    PoissonRates, SoftmaxAxis, Tensor3, TrainingSet,
};
use binaural_ssl::signal::MonoSignal;
use proptest::prelude::*;

const FS: f64 = 48_000.0;

fn grid() -> LateralizationGrid {
    LateralizationGrid::new(543e-6, FS, 1.0).unwrap()
}

fn train_from(times: Vec<usize>, amps: &[f64]) -> SpikeTrain {
    let mut t = times;
    t.sort_unstable();
    t.dedup();
    let amplitudes = (0..t.len()).map(|n| amps[n % amps.len()]).collect();
    SpikeTrain { channel: 0, times: t, amplitudes }
}

fn spikes() -> impl Strategy<Value = SpikeTrain> {
    (prop::collection::vec(0usize..2400, 0..100), prop::collection::vec(0.01f64..1.0, 1..8))
        .prop_map(|(t, a)| train_from(t, &a))
}

/// Greedy global matching by scanning all pairs each round.
fn oracle_counts(l: &SpikeTrain, r: &SpikeTrain, f: f64, g: &LateralizationGrid) -> Vec<u32> {
    let mut counts = vec![0; g.bins()];
    let mut used_l = vec![false; l.len()];
    let mut used_r = vec![false; r.len()];
    loop {
        let mut best: Option<(usize, usize, usize, usize)> = None;
        for (a, &tl) in l.times.iter().enumerate() {
            for (b, &tr) in r.times.iter().enumerate() {
                let d = tl.abs_diff(tr);
                if used_l[a] || used_r[b] || d > g.max_lag || 2.0 * f * d as f64 / FS >= 1.0 {
                    continue;
                }
                if best.is_none_or(|x| (d, tl + tr, a, b) < x) {
                    best = Some((d, tl + tr, a, b));
                }
            }
        }
        let Some((_, _, a, b)) = best else { break };
        used_l[a] = true;
        used_r[b] = true;
        counts[(g.max_lag as i64 + r.times[b] as i64 - l.times[a] as i64) as usize] += 1;
    }
    counts
}

fn matrix(rows: usize, cols: usize, max: u32) -> impl Strategy<Value = Vec<Vec<u32>>> {
    prop::collection::vec(prop::collection::vec(0..=max, cols), rows)
}

fn tensor(rows: usize, cols: usize, depth: usize) -> impl Strategy<Value = Tensor3> {
    prop::collection::vec(0.0f64..1.0, rows * cols * depth).prop_map(move |v| {
        let mut t = Tensor3::zeros(rows, cols, depth);
        for (n, x) in v.into_iter().enumerate() {
            t.set(n / (cols * depth), (n / depth) % cols, n % depth, x);
        }
        t
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mso_matches_exhaustive_pairing(l in spikes(), r in spikes(), f in 100.0f64..4000.0) {
        let g = grid();
        let m = compute_binaural(&[l.clone()], &[r.clone()], &[f], &g).unwrap().0;
        prop_assert_eq!(m.row(0), &oracle_counts(&l, &r, f, &g)[..]);
    }

    #[test]
    fn mso_counts_obey_bounds_and_half_period_rule(l in spikes(), r in spikes(), f in 100.0f64..4000.0) {
        let g = grid();
        let (m, lso) = compute_binaural(&[l.clone()], &[r.clone()], &[f], &g).unwrap();
        prop_assert!(m.total() <= l.len().min(r.len()) as u64);
        prop_assert_eq!(m.total(), lso.total());
        for (j, d) in g.bin_delays().into_iter().enumerate() {
            if 2.0 * f * d.abs() >= 1.0 {
                prop_assert_eq!(m.get(0, j), 0);
            }
        }
    }

    #[test]
    fn swapping_ears_mirrors_both_matrices(l in spikes(), r in spikes(), f in 100.0f64..4000.0) {
        let g = grid();
        let (m, s) = compute_binaural(&[l.clone()], &[r.clone()], &[f], &g).unwrap();
        let (m2, s2) = compute_binaural(&[r], &[l], &[f], &g).unwrap();
        prop_assert_eq!(m2, m.mirrored());
        prop_assert_eq!(s2, s.mirrored());
    }

    #[test]
    fn rates_are_exact_means(ms in prop::collection::vec(matrix(3, 4, 200), 1..12)) {
        let g = AngleGrid::new(vec![90.0]).unwrap();
        let mut set = TrainingSet::default();
        for m in &ms {
            set.push(SpikeMatrix::from_rows(Nucleus::Mso, m), 90.0);
        }
        let rates = estimate_rates(&set, &g).unwrap();
        for i in 0..3 {
            for j in 0..4 {
                let mut sum = 0.0;
                for m in &ms {
                    sum += m[i][j] as f64;
                }
                prop_assert!((rates.rate(0, i, j) - sum / ms.len() as f64).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn ic_integration_is_the_triple_sum(
        mso in matrix(3, 4, 30), lso in matrix(3, 4, 30),
        e_mso in tensor(3, 4, 5), e_lso in tensor(3, 4, 5), i_lso in tensor(3, 4, 5),
    ) {
        let g = AngleGrid::new(vec![0.0, 45.0, 90.0, 135.0, 180.0]).unwrap();
        let mut w = derive_weights(&e_mso, &e_lso, &[300.0, 1400.0, 3000.0], &g, Omegas::default(), 1400.0).unwrap();
        w.e_mso = e_mso;
        w.e_lso = e_lso;
        w.i_lso = i_lso;
        let (sm, sl) = (SpikeMatrix::from_rows(Nucleus::Mso, &mso), SpikeMatrix::from_rows(Nucleus::Lso, &lso));
        let ic = integrate_ic(&sm, &sl, &w).unwrap();
        for i in 0..3 {
            for k in 0..5 {
                let mut c = 0.0;
                for j in 0..4 {
                    let (a, b) = (mso[i][j] as f64, lso[i][j] as f64);
                    c += a * w.e_mso.get(i, j, k);
                    c += b * w.e_lso.get(i, j, k) - b * w.i_lso.get(i, j, k);
                }
                prop_assert_eq!(c, ic.get(i, k));
            }
        }
    }

    #[test]
    fn no_lso_weight_below_f_tau(p in tensor(4, 3, 5), omegas in (0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0)) {
        let g = AngleGrid::new(vec![0.0, 45.0, 90.0, 135.0, 180.0]).unwrap();
        let centers = [300.0, 1000.0, 1400.0, 3000.0];
        let o = Omegas { e_mso: omegas.0, e_lso: omegas.1, i_lso: omegas.2 };
        let w = derive_weights(&p, &p, &centers, &g, o, 1400.0).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                prop_assert!(w.e_lso.fiber(i, j).iter().chain(w.i_lso.fiber(i, j)).all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn posterior_ignores_neuron_order(
        s in matrix(2, 3, 15),
        rates in prop::collection::vec(prop::collection::vec(0.1f64..10.0, 6), 3),
        perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let g = AngleGrid::new(vec![0.0, 90.0, 180.0]).unwrap();
        let flat: Vec<u32> = s.iter().flatten().copied().collect();
        let pr = PoissonRates { grid: g.clone(), rows: 2, cols: 3, rates: rates.clone() };
        let p = posterior(&SpikeMatrix::from_rows(Nucleus::Mso, &s), &pr).unwrap();
        let permuted: Vec<u32> = perm.iter().map(|&n| flat[n]).collect();
        let s2 = SpikeMatrix::from_rows(Nucleus::Mso, &[permuted[..3].to_vec(), permuted[3..].to_vec()]);
        let r2 = rates.iter().map(|r| perm.iter().map(|&n| r[n]).collect()).collect();
        let p2 = posterior(&s2, &PoissonRates { grid: g, rows: 2, cols: 3, rates: r2 }).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        for (a, b) in p.iter().zip(&p2) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn ic_softmax_normalizes_each_group(values in prop::collection::vec(-15.0f64..15.0, 20)) {
        let ic = IcActivity { rows: 4, cols: 5, values };
        let cols = softmax_ic_along(&ic, SoftmaxAxis::AcrossChannels);
        for k in 0..5 {
            prop_assert!(((0..4).map(|i| cols.get(i, k)).sum::<f64>() - 1.0).abs() <= 1e-9);
        }
        let rows = softmax_ic_along(&ic, SoftmaxAxis::AcrossAngles);
        for i in 0..4 {
            prop_assert!(((0..5).map(|k| rows.get(i, k)).sum::<f64>() - 1.0).abs() <= 1e-9);
        }
        prop_assert!(cols.values.iter().chain(&rows.values).all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn mlp_output_is_a_distribution(x in prop::collection::vec(-5.0f64..5.0, 10), seed in any::<u64>(), c in -100.0f64..100.0) {
        let m = MlpModel::new(10, 3, seed).unwrap();
        let p = m.predict(&x).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(p.iter().all(|&v| v > 0.0));
        let z = [x[0], x[1], x[2]];
        let shifted = [x[0] + c, x[1] + c, x[2] + c];
        prop_assert_eq!(argmax(&softmax(&z)), argmax(&softmax(&shifted)));
    }

    #[test]
    fn relative_angle_and_neck_stay_in_range(source in 0.0f64..=180.0, neck in 0.0f64..=180.0, turn in -400.0f64..400.0) {
        let rel = relative_azimuth(source, neck);
        prop_assert!((0.0..=180.0).contains(&rel));
        let mut n = NeckState::new(neck);
        n.turn(turn);
        prop_assert!((0.0..=180.0).contains(&n.theta()));
    }

    #[test]
    fn rerank_never_loses_to_the_top_hypothesis(truth in 0usize..192, rate in 0.0f64..0.5, seed in any::<u64>()) {
        let lex = Lexicon::bundled();
        let domain = DomainCorpus::bundled(&lex);
        let hyps = synth_hypotheses(&domain.sentences[truth], rate, seed, &lex).unwrap();
        let r = rerank(&hyps, &domain).unwrap();
        let top = domain.phonemes.iter().map(|p| levenshtein(&hyps.best().phonemes.0, &p.0)).min().unwrap();
        prop_assert!(r.distance <= top);
    }
}

fn noise(len: usize, seed: u64) -> MonoSignal {
    use rand::Rng;
    let mut rng = binaural_ssl::seed::rng(seed);
    MonoSignal::new((0..len).map(|_| rng.random_range(-0.5..0.5)).collect(), FS).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    // eighths of a degree keep 180 - az exact in floating point
    fn mirrored_scenes_swap_ears(az in (0u32..=1440).prop_map(|k| k as f64 / 8.0), seed in any::<u64>(), rt60 in prop_oneof![Just(0.0), 0.25f64..0.5]) {
        let head = HeadModel { ego_noise: false, ..HeadModel::default() };
        let scene = SceneSpec { azimuth: az, rt60, decorrelated_reverb: false, seed, ..SceneSpec::default() };
        let dry = noise(4800, seed);
        let a = render(&dry, &scene, &head).unwrap().clean;
        let b = render(&dry, &SceneSpec { azimuth: 180.0 - az, ..scene }, &head).unwrap().clean;
        prop_assert_eq!(a.left, b.right);
        prop_assert_eq!(a.right, b.left);
    }

    #[test]
    fn far_ear_is_quieter(az in (0.0f64..=180.0).prop_filter("lateral", |a| (a - 90.0).abs() > 1.0), seed in any::<u64>()) {
        let head = HeadModel { ego_noise: false, ..HeadModel::default() };
        let s = render(&noise(4800, seed), &SceneSpec::anechoic(az), &head).unwrap().clean;
        let (near, far) = if az < 90.0 { (&s.right, &s.left) } else { (&s.left, &s.right) };
        prop_assert!(far.rms() <= near.rms());
    }

    #[test]
    fn filterbank_is_linear(seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let bank = design_filterbank(20, 200.0, 4000.0, FS).unwrap();
        let (x, y) = (noise(2400, seed), noise(2400, seed ^ 1));
        let mix = MonoSignal::new(x.samples.iter().zip(&y.samples).map(|(p, q)| a * p + b * q).collect(), FS).unwrap();
        let (fx, fy, fm) = (filter_signal(&x, &bank).unwrap(), filter_signal(&y, &bank).unwrap(), filter_signal(&mix, &bank).unwrap());
        for c in 0..20 {
            let scale = fm[c].samples.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
            for n in 0..2400 {
                let expect = a * fx[c].samples[n] + b * fy[c].samples[n];
                prop_assert!((fm[c].samples[n] - expect).abs() <= 1e-6 * scale);
            }
        }
    }

    #[test]
    fn one_spike_per_positive_lobe(seed in any::<u64>()) {
        let bank = design_filterbank(20, 200.0, 4000.0, FS).unwrap();
        for ch in filter_signal(&noise(4800, seed), &bank).unwrap() {
            let t = encode_spikes(&ch);
            prop_assert!(t.times.iter().zip(&t.amplitudes).all(|(&n, &a)| a > 0.0 && ch.samples[n] == a));
            for w in t.times.windows(2) {
                prop_assert!(w[0] < w[1]);
                prop_assert!(ch.samples[w[0]..w[1]].iter().any(|&v| v <= 0.0));
            }
        }
    }
}

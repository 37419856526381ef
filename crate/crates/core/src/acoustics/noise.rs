//! Seeded pink noise for the near-field ego-noise model.

use rand_distr::{Distribution, StandardNormal};

use crate::dsp;
use crate::seed;

/// Pink (1/f) noise from white Gaussian noise through Kellet's refined
/// filter, scaled to exactly `power` mean square.
pub fn pink(len: usize, power: f64, seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed);
    let mut b = [0.0_f64; 7];
    let mut out: Vec<f64> = (0..len)
        .map(|_| {
            let w: f64 = StandardNormal.sample(&mut rng);
            b[0] = 0.99886 * b[0] + w * 0.0555179;
            b[1] = 0.99332 * b[1] + w * 0.0750759;
            b[2] = 0.96900 * b[2] + w * 0.1538520;
            b[3] = 0.86650 * b[3] + w * 0.3104856;
            b[4] = 0.55000 * b[4] + w * 0.5329522;
            b[5] = -0.7616 * b[5] - w * 0.0168980;
            let y = b[..6].iter().sum::<f64>() + b[6] + w * 0.5362;
            b[6] = w * 0.115926;
            y
        })
        .collect();
    let p = dsp::power(&out);
    if p > 0.0 {
        let g = (power / p).sqrt();
        out.iter_mut().for_each(|v| *v *= g);
    }
    out
}

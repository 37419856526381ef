//! Single-hidden-layer perceptron mapping normalized IC activity to an angle
//! class. Sigmoid hidden layer of half the input width, softmax output,
//! cross-entropy loss, seeded mini-batch gradient descent.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    /// `hidden x input`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `output x hidden`, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Epochs without a loss improvement before stopping; 0 disables.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 0.01, epochs: 200, batch_size: 16, patience: 20, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(invalid(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(invalid("epochs and batch size must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean training loss after each epoch.
    pub losses: Vec<f64>,
    pub accuracy: f64,
}

/// One labeled example: input vector and class index.
pub type Example = (Vec<f64>, usize);

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `-ln p`, floored away from infinity but keeping NaN visible.
fn nll(p: f64) -> f64 {
    if p.is_nan() {
        p
    } else {
        -p.max(f64::MIN_POSITIVE).ln()
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = k;
        }
    }
    best
}

struct Forward {
    hidden: Vec<f64>,
    probs: Vec<f64>,
}

impl MlpModel {
    /// Uniform init in `±1/sqrt(fan_in)`; hidden width is `input / 2`.
    pub fn new(input: usize, output: usize, seed: u64) -> Result<Self> {
        let hidden = input / 2;
        if hidden == 0 || output == 0 {
            return Err(invalid(format!("cannot build a {input}-{hidden}-{output} network")));
        }
        let mut rng = seed::rng(seed);
        let mut init = |n: usize, fan_in: usize| -> Vec<f64> {
            let r = 1.0 / (fan_in as f64).sqrt();
            (0..n).map(|_| rng.random_range(-r..=r)).collect()
        };
        let w1 = init(hidden * input, input);
        let b1 = init(hidden, input);
        let w2 = init(output * hidden, hidden);
        let b2 = init(output, hidden);
        Ok(Self { input, hidden, output, w1, b1, w2, b2 })
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        let hidden = input / 2;
        Self {
            input,
            hidden,
            output,
            w1: vec![0.0; hidden * input],
            b1: vec![0.0; hidden],
            w2: vec![0.0; output * hidden],
            b2: vec![0.0; output],
        }
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    fn param_mut(&mut self, mut idx: usize) -> &mut f64 {
        for v in [&mut self.w1, &mut self.b1, &mut self.w2] {
            if idx < v.len() {
                return &mut v[idx];
            }
            idx -= v.len();
        }
        &mut self.b2[idx]
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input {
            return Err(Error::DimensionMismatch(format!("input has {} values, model expects {}", x.len(), self.input)));
        }
        Ok(())
    }

    fn forward(&self, x: &[f64]) -> Forward {
        let hidden: Vec<f64> = (0..self.hidden)
            .map(|h| {
                let row = &self.w1[h * self.input..(h + 1) * self.input];
                sigmoid(self.b1[h] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            })
            .collect();
        let logits: Vec<f64> = (0..self.output)
            .map(|o| {
                let row = &self.w2[o * self.hidden..(o + 1) * self.hidden];
                self.b2[o] + row.iter().zip(&hidden).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect();
        Forward { hidden, probs: softmax(&logits) }
    }

    /// Output probabilities.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.forward(x).probs)
    }

    /// `(class, confidence, probabilities)`, confidence being the max probability.
    pub fn classify(&self, x: &[f64]) -> Result<(usize, f64, Vec<f64>)> {
        let p = self.predict(x)?;
        let k = argmax(&p);
        Ok((k, p[k], p))
    }

    /// Mean cross-entropy and its gradient over a batch, laid out like the
    /// parameters (`w1, b1, w2, b2`).
    pub fn loss_and_gradient(&self, batch: &[&Example]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.param_count()];
        let (o_b1, o_w2) = (self.w1.len(), self.w1.len() + self.b1.len());
        let o_b2 = o_w2 + self.w2.len();
        let mut loss = 0.0;
        let mut delta_h = vec![0.0; self.hidden];
        for (x, label) in batch {
            let f = self.forward(x);
            loss += nll(f.probs[*label]);
            delta_h.iter_mut().for_each(|d| *d = 0.0);
            for o in 0..self.output {
                let d = f.probs[o] - if o == *label { 1.0 } else { 0.0 };
                grad[o_b2 + o] += d;
                let row = &self.w2[o * self.hidden..(o + 1) * self.hidden];
                let g = &mut grad[o_w2 + o * self.hidden..o_w2 + (o + 1) * self.hidden];
                for h in 0..self.hidden {
                    g[h] += d * f.hidden[h];
                    delta_h[h] += d * row[h];
                }
            }
            for h in 0..self.hidden {
                let d = delta_h[h] * f.hidden[h] * (1.0 - f.hidden[h]);
                grad[o_b1 + h] += d;
                let g = &mut grad[h * self.input..(h + 1) * self.input];
                for (gi, xi) in g.iter_mut().zip(x.iter()) {
                    *gi += d * xi;
                }
            }
        }
        let n = batch.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }

    fn loss(&self, batch: &[&Example]) -> f64 {
        batch.iter().map(|(x, l)| nll(self.forward(x).probs[*l])).sum::<f64>()
            / batch.len().max(1) as f64
    }

    fn step(&mut self, grad: &[f64], lr: f64) {
        let mut g = grad.iter();
        for v in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            for (p, d) in v.iter_mut().zip(&mut g) {
                *p -= lr * d;
            }
        }
    }

    /// Fraction of examples classified correctly.
    pub fn accuracy(&self, data: &[Example]) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let hits = data.iter().filter(|(x, l)| argmax(&self.forward(x).probs) == *l).count();
        hits as f64 / data.len() as f64
    }
}

/// Train a fresh network on `data` with `classes` outputs.
pub fn train_mlp(data: &[Example], classes: usize, cfg: &TrainConfig) -> Result<(MlpModel, TrainReport)> {
    cfg.validate()?;
    let (first, _) = data.first().ok_or_else(|| invalid("empty training set"))?;
    let input = first.len();
    let mut seen = vec![false; classes];
    for (x, l) in data {
        if x.len() != input {
            return Err(Error::DimensionMismatch(format!("example has {} values, expected {input}", x.len())));
        }
        *seen.get_mut(*l).ok_or_else(|| invalid(format!("label {l} out of range for {classes} classes")))? = true;
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        return Err(invalid(format!("class {k} has no training examples")));
    }

    let mut model = MlpModel::new(input, classes, seed::derive(cfg.seed, "mlp-init", 0))?;
    let mut rng = seed::rng(seed::derive(cfg.seed, "mlp-shuffle", 0));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    let (mut best, mut stale) = (f64::INFINITY, 0);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &data[i]).collect();
            let (_, grad) = model.loss_and_gradient(&batch);
            model.step(&grad, cfg.learning_rate);
        }
        let all: Vec<&Example> = data.iter().collect();
        let loss = model.loss(&all);
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        losses.push(loss);
        if loss < best - 1e-12 {
            best = loss;
            stale = 0;
        } else {
            stale += 1;
            if cfg.patience > 0 && stale >= cfg.patience {
                break;
            }
        }
    }
    let accuracy = model.accuracy(data);
    Ok((model, TrainReport { losses, accuracy }))
}

/// Largest relative error between the analytic gradient and central finite
/// differences (step `h`) over `samples` randomly chosen parameters.
pub fn gradient_check(model: &MlpModel, batch: &[Example], h: f64, samples: usize, seed: u64) -> f64 {
    let refs: Vec<&Example> = batch.iter().collect();
    let (_, grad) = model.loss_and_gradient(&refs);
    let mut rng = seed::rng(seed);
    let n = model.param_count();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx.truncate(samples.min(n));
    let mut worst: f64 = 0.0;
    for p in idx {
        let numeric = finite_difference(model, &refs, p, h);
        let denom = (grad[p].abs() + numeric.abs()).max(1e-10);
        worst = worst.max((grad[p] - numeric).abs() / denom);
    }
    worst
}

/// Central difference of the batch loss with respect to parameter `p`.
pub fn finite_difference(model: &MlpModel, batch: &[&Example], p: usize, h: f64) -> f64 {
    let mut m = model.clone();
    let orig = *m.param_mut(p);
    *m.param_mut(p) = orig + h;
    let plus = m.loss(batch);
    *m.param_mut(p) = orig - h;
    let minus = m.loss(batch);
    (plus - minus) / (2.0 * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Vec<Example> {
        vec![
            (vec![0.0, 0.0, 1.0, 0.2], 0),
            (vec![0.1, 0.2, 0.9, 0.0], 0),
            (vec![1.0, 0.9, 0.0, 0.1], 1),
            (vec![0.8, 1.0, 0.1, 0.3], 1),
        ]
    }

    #[test]
    fn hidden_layer_is_half_the_input() {
        let m = MlpModel::new(20 * 13, 13, 1).unwrap();
        assert_eq!((m.input, m.hidden, m.output), (260, 130, 13));
        assert_eq!(m.w1.len(), 130 * 260);
    }

    #[test]
    fn toy_set_is_learned() {
        let cfg = TrainConfig { learning_rate: 1.0, epochs: 200, batch_size: 4, patience: 0, seed: 3 };
        let (m, report) = train_mlp(&toy(), 2, &cfg).unwrap();
        assert_eq!(report.accuracy, 1.0);
        for (x, l) in toy() {
            assert_eq!(m.classify(&x).unwrap().0, l);
        }
    }

    #[test]
    fn full_batch_loss_never_increases() {
        let cfg = TrainConfig { learning_rate: 0.01, epochs: 200, batch_size: 4, patience: 0, seed: 5 };
        let (_, report) = train_mlp(&toy(), 2, &cfg).unwrap();
        for w in report.losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn seeded_training_is_bit_identical() {
        let cfg = TrainConfig { seed: 9, epochs: 20, ..TrainConfig::default() };
        let a = train_mlp(&toy(), 2, &cfg).unwrap().0;
        let b = train_mlp(&toy(), 2, &cfg).unwrap().0;
        assert_eq!(a, b);
    }

    #[test]
    fn zero_model_is_uniform_and_picks_first_class() {
        let m = MlpModel::zeros(6, 4);
        let (k, conf, p) = m.classify(&[0.3; 6]).unwrap();
        assert_eq!(k, 0);
        assert_eq!(conf, 0.25);
        assert!(p.iter().all(|&v| v == 0.25));
    }

    #[test]
    fn wrong_width_is_rejected() {
        let m = MlpModel::zeros(6, 4);
        assert!(matches!(m.classify(&[0.0; 5]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn missing_class_is_rejected() {
        let data = vec![(vec![0.0, 1.0], 0)];
        assert!(train_mlp(&data, 2, &TrainConfig::default()).is_err());
    }

    #[test]
    fn nan_input_reports_divergence() {
        let data = vec![(vec![f64::NAN, 1.0], 0), (vec![1.0, 0.0], 1)];
        assert!(matches!(train_mlp(&data, 2, &TrainConfig::default()), Err(Error::Diverged { epoch: 0 })));
    }

    fn random_batch(n: usize, input: usize, classes: usize, seed: u64) -> Vec<Example> {
        let mut rng = seed::rng(seed);
        (0..n).map(|_| ((0..input).map(|_| rng.random_range(-1.0..1.0)).collect(), rng.random_range(0..classes))).collect()
    }

    #[test]
    fn gradients_match_central_differences() {
        for s in 0..5 {
            let m = MlpModel::new(10, 3, s).unwrap();
            assert_eq!(m.hidden, 5);
            let err = gradient_check(&m, &random_batch(8, 10, 3, 100 + s), 1e-5, m.param_count(), s);
            assert!(err < 1e-4, "seed {s}: {err}");
        }
    }

    #[test]
    fn exact_output_has_no_gradient() {
        let mut m = MlpModel::zeros(4, 3);
        m.b2 = vec![40.0, 0.0, 0.0];
        let batch = random_batch(4, 4, 1, 2);
        let refs: Vec<&Example> = batch.iter().collect();
        let (_, g) = m.loss_and_gradient(&refs);
        assert!(g.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn finite_difference_error_is_second_order() {
        let m = MlpModel::new(10, 3, 4).unwrap();
        let batch = random_batch(8, 10, 3, 5);
        let refs: Vec<&Example> = batch.iter().collect();
        let (_, g) = m.loss_and_gradient(&refs);
        // a first-layer weight
        let p = 7;
        let err = |h: f64| (finite_difference(&m, &refs, p, h) - g[p]).abs();
        let ratio = err(2e-2) / err(1e-2);
        assert!((3.5..4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn softmax_shift_keeps_argmax() {
        let z = [0.3, 2.0, -1.0];
        let shifted: Vec<f64> = z.iter().map(|v| v + 500.0).collect();
        assert_eq!(argmax(&softmax(&z)), argmax(&softmax(&shifted)));
        assert!((softmax(&shifted).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

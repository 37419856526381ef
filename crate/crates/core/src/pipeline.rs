//! The full localization system: cochlea -> MSO/LSO -> IC -> MLP, its
//! training from labeled binaural segments, and model persistence.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::acoustics::HeadModel;
use crate::brainstem::{aggregate, windowed_matrices, LateralizationGrid, SpikeMatrix, WindowSpec, DEFAULT_ILD_CLAMP};
use crate::classifier::{train_mlp, Example, MlpModel, TrainConfig, TrainReport};
use crate::cochlea::{self, FilterbankSpec};
use crate::error::{invalid, Error, Result};
use crate::midbrain::{
    derive_weights, estimate_rates, integrate_ic, neuron_posteriors, softmax_ic_along, AngleGrid, IcWeights, Omegas,
    PoissonRates, SoftmaxAxis, TrainingSet, DEFAULT_F_TAU,
};
use crate::signal::{StereoSignal, SAMPLE_RATE};

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SslConfig {
    pub channels: usize,
    pub f_low: f64,
    pub f_high: f64,
    pub spike_floor: f64,
    pub window: WindowSpec,
    /// Windows summed into one decision.
    pub windows_per_decision: usize,
    /// Sets the largest representable delay via the spherical-head model.
    pub interaural_distance: f64,
    pub ild_clamp: f64,
    pub angles: AngleGrid,
    pub omegas: Omegas,
    pub f_tau: f64,
    pub softmax_axis: SoftmaxAxis,
    pub mlp: TrainConfig,
}

impl Default for SslConfig {
    fn default() -> Self {
        Self {
            channels: cochlea::DEFAULT_CHANNELS,
            f_low: cochlea::DEFAULT_F_LOW,
            f_high: cochlea::DEFAULT_F_HIGH,
            spike_floor: cochlea::DEFAULT_SPIKE_FLOOR,
            window: WindowSpec::default(),
            windows_per_decision: 10,
            interaural_distance: HeadModel::default().interaural_distance,
            ild_clamp: DEFAULT_ILD_CLAMP,
            angles: AngleGrid::default(),
            omegas: Omegas::default(),
            f_tau: DEFAULT_F_TAU,
            softmax_axis: SoftmaxAxis::default(),
            mlp: TrainConfig::default(),
        }
    }
}

/// Monaural and binaural stages up to the MSO/LSO matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontend {
    pub filterbank: FilterbankSpec,
    pub grid: LateralizationGrid,
    pub window: WindowSpec,
    pub windows_per_decision: usize,
    pub spike_floor: f64,
}

impl Frontend {
    pub fn new(cfg: &SslConfig) -> Result<Self> {
        if cfg.windows_per_decision == 0 {
            return Err(invalid("a decision needs at least one window"));
        }
        let head = HeadModel { interaural_distance: cfg.interaural_distance, ..HeadModel::default() };
        head.validate()?;
        Ok(Self {
            filterbank: cochlea::design_filterbank(cfg.channels, cfg.f_low, cfg.f_high, SAMPLE_RATE)?,
            grid: LateralizationGrid::new(head.max_itd(), SAMPLE_RATE, cfg.ild_clamp)?,
            window: cfg.window,
            windows_per_decision: cfg.windows_per_decision,
            spike_floor: cfg.spike_floor,
        })
    }

    /// Samples in one decision span.
    pub fn decision_len(&self) -> usize {
        let fs = self.filterbank.sample_rate;
        self.window.hop_samples(fs) * (self.windows_per_decision - 1) + self.window.length_samples(fs)
    }

    /// MSO and LSO counts summed over every window of `stereo`.
    pub fn analyze(&self, stereo: &StereoSignal) -> Result<(SpikeMatrix, SpikeMatrix)> {
        let fs = self.filterbank.sample_rate;
        if stereo.sample_rate() != fs {
            return Err(Error::SampleRateMismatch { expected: fs, actual: stereo.sample_rate() });
        }
        if stereo.len() < self.window.length_samples(fs) {
            return Err(invalid(format!(
                "segment of {} samples is shorter than one {} ms window",
                stereo.len(),
                self.window.length_ms
            )));
        }
        let left = cochlea::spike_trains(&stereo.left, &self.filterbank, self.spike_floor)?;
        let right = cochlea::spike_trains(&stereo.right, &self.filterbank, self.spike_floor)?;
        let windows =
            windowed_matrices(&left, &right, &self.filterbank.centers, &self.grid, &self.window, stereo.len())?;
        aggregate(&windows)
    }
}

/// Binaural evidence of one decision and its label.
#[derive(Debug, Clone, PartialEq)]
pub struct Evidence {
    pub mso: SpikeMatrix,
    pub lso: SpikeMatrix,
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SslModel {
    pub config: SslConfig,
    pub frontend: Frontend,
    pub rates_mso: PoissonRates,
    pub rates_lso: PoissonRates,
    pub weights: IcWeights,
    pub mlp: MlpModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Localization {
    pub class: usize,
    /// Head-relative azimuth, 90 = straight ahead.
    pub angle: f64,
    pub confidence: f64,
    pub probabilities: Vec<f64>,
    /// No binaural spikes at all: the estimate carries no information.
    pub silent: bool,
}

/// Softmax-normalized IC activity, flattened channel-major.
pub fn ic_features(weights: &IcWeights, axis: SoftmaxAxis, mso: &SpikeMatrix, lso: &SpikeMatrix) -> Result<Vec<f64>> {
    Ok(softmax_ic_along(&integrate_ic(mso, lso, weights)?, axis).values)
}

/// Bayesian IC weights from labeled evidence.
pub fn fit_weights(
    evidence: &[Evidence],
    centers: &[f64],
    cfg: &SslConfig,
) -> Result<(PoissonRates, PoissonRates, IcWeights)> {
    let mut mso = TrainingSet::default();
    let mut lso = TrainingSet::default();
    for e in evidence {
        mso.push(e.mso.clone(), e.angle);
        lso.push(e.lso.clone(), e.angle);
    }
    let rates_mso = estimate_rates(&mso, &cfg.angles)?;
    let rates_lso = estimate_rates(&lso, &cfg.angles)?;
    let weights = derive_weights(
        &neuron_posteriors(&rates_mso),
        &neuron_posteriors(&rates_lso),
        centers,
        &cfg.angles,
        cfg.omegas,
        cfg.f_tau,
    )?;
    Ok((rates_mso, rates_lso, weights))
}

/// Fit the IC weights and the MLP on the same labeled evidence.
pub fn train_from_evidence(evidence: &[Evidence], frontend: &Frontend, cfg: &SslConfig) -> Result<(SslModel, TrainReport)> {
    let (rates_mso, rates_lso, weights) = fit_weights(evidence, &frontend.filterbank.centers, cfg)?;
    let data: Vec<Example> = evidence
        .iter()
        .map(|e| {
            let k = cfg.angles.index_of(e.angle).ok_or_else(|| invalid(format!("label {} is off the grid", e.angle)))?;
            Ok((ic_features(&weights, cfg.softmax_axis, &e.mso, &e.lso)?, k))
        })
        .collect::<Result<_>>()?;
    let (mlp, report) = train_mlp(&data, cfg.angles.len(), &cfg.mlp)?;
    let model = SslModel { config: cfg.clone(), frontend: frontend.clone(), rates_mso, rates_lso, weights, mlp };
    Ok((model, report))
}

/// Analyze labeled segments and train.
pub fn train_ssl(segments: &[(StereoSignal, f64)], cfg: &SslConfig) -> Result<(SslModel, TrainReport)> {
    let frontend = Frontend::new(cfg)?;
    let evidence = segments
        .iter()
        .map(|(s, angle)| {
            let (mso, lso) = frontend.analyze(s)?;
            Ok(Evidence { mso, lso, angle: *angle })
        })
        .collect::<Result<Vec<_>>>()?;
    train_from_evidence(&evidence, &frontend, cfg)
}

impl SslModel {
    pub fn angles(&self) -> &AngleGrid {
        &self.config.angles
    }

    pub fn classify_evidence(&self, mso: &SpikeMatrix, lso: &SpikeMatrix) -> Result<Localization> {
        let k_n = self.angles().len();
        if mso.is_zero() && lso.is_zero() {
            return Ok(Localization {
                class: 0,
                angle: self.angles().angles[0],
                confidence: 1.0 / k_n as f64,
                probabilities: vec![1.0 / k_n as f64; k_n],
                silent: true,
            });
        }
        let (class, confidence, probabilities) = self.mlp.classify(&ic_features(&self.weights, self.config.softmax_axis, mso, lso)?)?;
        Ok(Localization { class, angle: self.angles().angles[class], confidence, probabilities, silent: false })
    }

    /// Head-relative direction of the source in a segment.
    pub fn localize(&self, stereo: &StereoSignal) -> Result<Localization> {
        let (mso, lso) = self.frontend.analyze(stereo)?;
        self.classify_evidence(&mso, &lso)
    }

    fn body(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Write `{version, sha256, model}` atomically (temp file, then rename).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let body = self.body()?;
        let digest = hex_digest(&body);
        let doc = format!("{{\"version\":{MODEL_VERSION},\"sha256\":\"{digest}\",\"model\":{body}}}\n");
        let mut tmp_name = path.as_os_str().to_owned();
        tmp_name.push(".tmp");
        let tmp = std::path::PathBuf::from(tmp_name);
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(doc.as_bytes())?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        let mut doc: serde_json::Value = serde_json::from_str(&text)?;
        let version = doc.get("version").and_then(serde_json::Value::as_u64);
        if version != Some(MODEL_VERSION as u64) {
            return Err(Error::VersionMismatch {
                found: version.map_or_else(|| "none".to_string(), |v| v.to_string()),
                expected: MODEL_VERSION,
            });
        }
        let digest = doc.get("sha256").and_then(serde_json::Value::as_str).unwrap_or_default().to_string();
        let model: SslModel = serde_json::from_value(doc["model"].take())?;
        if hex_digest(&model.body()?) != digest {
            return Err(Error::CorruptModel(format!("{}: checksum mismatch", path.display())));
        }
        Ok(model)
    }
}

fn hex_digest(s: &str) -> String {
    Sha256::digest(s.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_frontend_dimensions() {
        let f = Frontend::new(&SslConfig::default()).unwrap();
        assert_eq!(f.filterbank.channel_count(), 20);
        // 543 us at 48 kHz -> 26 samples each side
        assert_eq!(f.grid.bins(), 53);
        assert_eq!(f.decision_len(), 48_000);
    }

    #[test]
    fn short_segment_is_rejected() {
        let f = Frontend::new(&SslConfig::default()).unwrap();
        let s = crate::signal::MonoSignal::silence(100, SAMPLE_RATE);
        assert!(f.analyze(&StereoSignal::new(s.clone(), s).unwrap()).is_err());
    }
}

//! Experiment drivers: SSL training with held-out evaluation, the static
//! ASR-vs-angle study, closed-loop tracking and the ω sweep. Every run is a
//! pure function of its config and master seed and reports CSV (plus a JSON
//! summary) into the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acoustics::{
    build_compound, downmix, measure_band_snr, render, Downmix, HeadModel, SceneSpec, SNR_CAP_DB,
};
use crate::asr::{g2p, levenshtein, rerank, score, synth_hypotheses, tokenize, DomainCorpus, Lexicon, SnrRateMap};
use crate::behavior::{
    accumulate_errors, lock_retention, mean_abs_error_at, run_tracking_trial, TrackingSetup, TrackingTrajectory,
    TrialSpec, DEFAULT_LEAD_IN_S, DEFAULT_LOCK_THRESHOLD, LOCK_TOLERANCE_DEG,
};
use crate::classifier::TrainReport;
use crate::corpus::{Corpus, Utterance};
use crate::error::{invalid, Error, Result};
use crate::midbrain::Omegas;
use crate::pipeline::{train_from_evidence, Evidence, Frontend, SslConfig, SslModel};
use crate::seed;
use crate::signal::{write_wav_mono, write_wav_stereo};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoomSettings {
    pub rt60: f64,
    pub drr_db: f64,
    pub distance: f64,
    pub decorrelated_reverb: bool,
}

impl Default for RoomSettings {
    fn default() -> Self {
        let s = SceneSpec::default();
        Self { rt60: s.rt60, drr_db: s.drr_db, distance: s.distance, decorrelated_reverb: s.decorrelated_reverb }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub snr_db: f64,
    pub ego_noise: bool,
    /// Training decisions rendered per angle.
    pub decisions_per_angle: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self { snr_db: 20.0, ego_noise: true, decisions_per_angle: 60 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StaticAsrSettings {
    pub snr_db: f64,
    pub ego_noise: bool,
    /// Presentations of the whole corpus per (angle, downmix mode).
    pub trials: usize,
    pub downmix: Vec<Downmix>,
    /// Two `(snr_db, phoneme error rate)` points of the recognizer's logistic map.
    pub calibration: [(f64, f64); 2],
    /// Band in Hz over which the recognizer's SNR is measured.
    pub band_hz: (f64, f64),
}

impl Default for StaticAsrSettings {
    fn default() -> Self {
        Self {
            // low enough that re-ranking still fails on some sentences
            snr_db: -12.0,
            ego_noise: true,
            trials: 10,
            downmix: Downmix::ALL.to_vec(),
            calibration: [(20.0, 0.05), (0.0, 0.4)],
            // where the pinna acts
            band_hz: (2000.0, 4000.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicSettings {
    pub snr_db: f64,
    pub ego_noise: bool,
    /// Compound sounds, each a rotation of the corpus.
    pub compounds: usize,
    /// Starting offsets δ_start in degrees.
    pub offsets: Vec<f64>,
    pub max_iterations: usize,
    pub lock_threshold: f64,
    pub lead_in_s: f64,
}

impl Default for DynamicSettings {
    fn default() -> Self {
        Self {
            snr_db: 20.0,
            ego_noise: false,
            compounds: 12,
            offsets: (0..=6).map(|k| 15.0 * k as f64).collect(),
            max_iterations: 10,
            lock_threshold: DEFAULT_LOCK_THRESHOLD,
            lead_in_s: DEFAULT_LEAD_IN_S,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    /// Each ω is varied over these values while the other two keep the base value.
    pub values: Vec<f64>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self { values: vec![0.25, 0.5, 0.75] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderSettings {
    pub azimuth: f64,
    /// Index into the corpus.
    pub utterance: usize,
    pub snr_db: f64,
    pub ego_noise: bool,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self { azimuth: 45.0, utterance: 0, snr_db: 20.0, ego_noise: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: PathBuf,
    /// Directory of `name.wav` + `name.txt` pairs; the bundled corpus if unset.
    pub corpus: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub domain: Option<PathBuf>,
    /// Model file; `<out>/model.json` if unset.
    pub model: Option<PathBuf>,
    /// Its `ego_noise` flag is replaced by the running experiment's.
    pub head: HeadModel,
    pub room: RoomSettings,
    pub ssl: SslConfig,
    pub train: TrainSettings,
    pub static_asr: StaticAsrSettings,
    pub dynamic: DynamicSettings,
    pub sweep: SweepSettings,
    pub render: RenderSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            corpus: None,
            lexicon: None,
            domain: None,
            model: None,
            head: HeadModel::default(),
            room: RoomSettings::default(),
            ssl: SslConfig::default(),
            train: TrainSettings::default(),
            static_asr: StaticAsrSettings::default(),
            dynamic: DynamicSettings::default(),
            sweep: SweepSettings::default(),
            render: RenderSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn model_path(&self) -> PathBuf {
        self.model.clone().unwrap_or_else(|| self.out.join("model.json"))
    }

    fn scene(&self, snr_db: f64) -> SceneSpec {
        SceneSpec {
            azimuth: 90.0,
            distance: self.room.distance,
            rt60: self.room.rt60,
            drr_db: self.room.drr_db,
            snr_db,
            decorrelated_reverb: self.room.decorrelated_reverb,
            seed: self.seed,
        }
    }

    fn head_with(&self, ego_noise: bool) -> HeadModel {
        HeadModel { ego_noise, ..self.head }
    }

    pub fn validate(&self) -> Result<()> {
        self.head.validate()?;
        self.ssl.mlp.validate()?;
        self.ssl.omegas.validate()?;
        if self.static_asr.trials == 0 || self.dynamic.compounds == 0 || self.train.decisions_per_angle == 0 {
            return Err(invalid("trials, compounds and decisions per angle must be at least 1"));
        }
        if self.static_asr.downmix.is_empty() {
            return Err(invalid("static-asr needs at least one downmix mode"));
        }
        if self.dynamic.max_iterations == 0 || self.dynamic.offsets.is_empty() {
            return Err(invalid("dynamic-ssl needs offsets and at least one iteration"));
        }
        if !(self.room.rt60 >= 0.0) || !self.room.drr_db.is_finite() {
            return Err(invalid("room needs rt60 >= 0 and a finite DRR"));
        }
        Ok(())
    }
}

/// Lexicon, domain sentences and speech material of a run.
#[derive(Debug, Clone)]
pub struct Materials {
    pub lexicon: Lexicon,
    pub domain: DomainCorpus,
    /// Presented in the ASR and tracking experiments.
    pub corpus: Corpus,
    pub training: Corpus,
    pub heldout: Corpus,
}

impl Materials {
    /// Missing input files are reported before any synthesis starts.
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        for p in [&cfg.corpus, &cfg.lexicon, &cfg.domain].into_iter().flatten() {
            if !p.exists() {
                return Err(Error::MissingInput(p.clone()));
            }
        }
        let lexicon = match &cfg.lexicon {
            Some(p) => Lexicon::load(p)?,
            None => Lexicon::bundled(),
        };
        let domain = match &cfg.domain {
            Some(p) => DomainCorpus::load(p, &lexicon)?,
            None => DomainCorpus::bundled(&lexicon),
        };
        let (corpus, training, heldout) = match &cfg.corpus {
            Some(dir) => {
                let all = Corpus::load_dir(dir)?;
                // every fifth utterance is held out from SSL training
                let pick = |keep: bool| Corpus {
                    utterances: all.utterances.iter().enumerate().filter(|(k, _)| (k % 5 == 4) == keep).map(|(_, u)| u.clone()).collect(),
                };
                let (training, heldout) = (pick(false), pick(true));
                if training.is_empty() || heldout.is_empty() {
                    return Err(invalid("a corpus directory needs at least five utterances"));
                }
                (all, training, heldout)
            }
            None => {
                let test = Corpus::bundled(&lexicon, &domain, cfg.seed)?;
                let training = Corpus::bundled_training(&lexicon, &domain, cfg.seed)?;
                (test.clone(), training, test)
            }
        };
        Ok(Self { lexicon, domain, corpus, training, heldout })
    }
}

/// Render every utterance at every angle and analyze each complete decision
/// span. With `per_angle`, utterances are cycled (starting at a different one
/// per angle) until that many decisions exist; otherwise each is used once.
/// Spans without a single binaural spike are skipped.
pub fn scene_evidence(
    frontend: &Frontend,
    utterances: &[Utterance],
    angles: &[f64],
    per_angle: Option<usize>,
    scene: &SceneSpec,
    head: &HeadModel,
    master_seed: u64,
) -> Result<Vec<Evidence>> {
    if utterances.is_empty() {
        return Err(invalid("no utterances to render"));
    }
    let seg = frontend.decision_len();
    let n = utterances.len();
    let mut out = Vec::new();
    for (a, &angle) in angles.iter().enumerate() {
        let target = per_angle.unwrap_or(usize::MAX);
        let mut got = 0;
        let mut renders = 0;
        while got < target {
            if per_angle.is_none() && renders == n {
                break;
            }
            if renders >= n && got == 0 {
                return Err(invalid("no utterance is longer than one decision span"));
            }
            let u = &utterances[(a * 7 + renders) % n];
            let sc = SceneSpec {
                azimuth: angle,
                seed: seed::derive(master_seed, "scene", (a * 1_000_000 + renders) as u64),
                ..*scene
            };
            renders += 1;
            let r = render(&u.audio, &sc, head)?;
            let mut start = 0;
            while start + seg <= r.noisy.len() && got < target {
                let (mso, lso) = frontend.analyze(&r.noisy.slice_padded(start, seg))?;
                start += seg;
                if mso.is_zero() && lso.is_zero() {
                    continue;
                }
                out.push(Evidence { mso, lso, angle });
                got += 1;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleAccuracy {
    pub azimuth: f64,
    pub decisions: usize,
    pub correct: usize,
    pub within_one: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub decisions: usize,
    pub accuracy: f64,
    /// Share of decisions at most one grid bin off.
    pub within_one: f64,
    pub per_angle: Vec<AngleAccuracy>,
}

/// Classification accuracy of `model` on labeled evidence.
pub fn evaluate(model: &SslModel, evidence: &[Evidence]) -> Result<Accuracy> {
    if evidence.is_empty() {
        return Err(invalid("no evidence to evaluate"));
    }
    let grid = model.angles();
    let mut per: Vec<AngleAccuracy> = grid
        .angles
        .iter()
        .map(|&azimuth| AngleAccuracy { azimuth, decisions: 0, correct: 0, within_one: 0, accuracy: 0.0 })
        .collect();
    for e in evidence {
        let k = grid.index_of(e.angle).ok_or_else(|| invalid(format!("label {} is off the grid", e.angle)))?;
        let got = model.classify_evidence(&e.mso, &e.lso)?.class;
        per[k].decisions += 1;
        per[k].correct += usize::from(got == k);
        per[k].within_one += usize::from(got.abs_diff(k) <= 1);
    }
    for p in &mut per {
        p.accuracy = if p.decisions == 0 { 0.0 } else { p.correct as f64 / p.decisions as f64 };
    }
    let total = evidence.len() as f64;
    Ok(Accuracy {
        decisions: evidence.len(),
        accuracy: per.iter().map(|p| p.correct).sum::<usize>() as f64 / total,
        within_one: per.iter().map(|p| p.within_one).sum::<usize>() as f64 / total,
        per_angle: per,
    })
}

/// Labeled training and held-out evidence of a config.
pub fn training_evidence(cfg: &ExperimentConfig, m: &Materials) -> Result<(Frontend, Vec<Evidence>, Vec<Evidence>)> {
    let frontend = Frontend::new(&cfg.ssl)?;
    let head = cfg.head_with(cfg.train.ego_noise);
    let scene = cfg.scene(cfg.train.snr_db);
    let angles = &cfg.ssl.angles.angles;
    let train = scene_evidence(
        &frontend,
        &m.training.utterances,
        angles,
        Some(cfg.train.decisions_per_angle),
        &scene,
        &head,
        seed::derive(cfg.seed, "train", 0),
    )?;
    let test =
        scene_evidence(&frontend, &m.heldout.utterances, angles, None, &scene, &head, seed::derive(cfg.seed, "heldout", 0))?;
    Ok((frontend, train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub training_decisions: usize,
    pub epochs: usize,
    pub final_loss: f64,
    pub train_accuracy: f64,
    pub heldout: Accuracy,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SslModel,
    pub report: TrainReport,
    pub summary: TrainSummary,
}

/// Train on rendered scenes, evaluate on held-out speech, save the model.
pub fn run_train(cfg: &ExperimentConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let m = Materials::load(cfg)?;
    let (frontend, train, test) = training_evidence(cfg, &m)?;
    let (model, report) = train_from_evidence(&train, &frontend, &cfg.ssl)?;
    let heldout = evaluate(&model, &test)?;
    let summary = TrainSummary {
        training_decisions: train.len(),
        epochs: report.losses.len(),
        final_loss: report.losses.last().copied().unwrap_or(f64::NAN),
        train_accuracy: report.accuracy,
        heldout,
    };
    fs::create_dir_all(&cfg.out)?;
    model.save(cfg.model_path())?;
    #[derive(Serialize)]
    struct LossRow {
        epoch: usize,
        loss: f64,
    }
    let losses: Vec<LossRow> = report.losses.iter().enumerate().map(|(e, &loss)| LossRow { epoch: e + 1, loss }).collect();
    write_csv(cfg.out.join("train_loss.csv"), &losses)?;
    write_csv(cfg.out.join("heldout_accuracy.csv"), &summary.heldout.per_angle)?;
    write_json(cfg.out.join("train_summary.json"), &summary)?;
    Ok(TrainOutcome { model, report, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticDetailRow {
    pub azimuth: f64,
    pub delta_diff: f64,
    pub mode: Downmix,
    pub trial: usize,
    pub utterance: String,
    /// Band SNR of the downmixed signal, capped at the report cap.
    pub snr_db: f64,
    pub phoneme_error_rate: f64,
    /// Rank-1 hypothesis of the recognizer.
    pub raw: String,
    /// Domain sentence chosen by re-ranking.
    pub recognized: String,
    pub raw_correct: bool,
    pub reranked_correct: bool,
    /// Phoneme distance of the rank-1 hypothesis to the truth.
    pub raw_distance: usize,
    /// Phoneme distance of the re-ranked sentence to the truth.
    pub distance: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticTrialRow {
    pub azimuth: f64,
    pub delta_diff: f64,
    pub mode: Downmix,
    pub trial: usize,
    pub utterances: usize,
    pub snr_db: f64,
    pub ser_raw: f64,
    pub ser: f64,
    pub wer_raw: f64,
    pub wer: f64,
    pub mean_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticSummaryRow {
    pub azimuth: f64,
    pub delta_diff: f64,
    pub mode: Downmix,
    pub trials: usize,
    pub snr_db: f64,
    pub ser_raw: f64,
    pub ser: f64,
    pub wer: f64,
    pub mean_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticAsrReport {
    pub detail: Vec<StaticDetailRow>,
    pub trials: Vec<StaticTrialRow>,
    pub summary: Vec<StaticSummaryRow>,
}

impl StaticAsrReport {
    /// Per azimuth, the lower SER of the two single-channel modes.
    pub fn best_single_channel(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for r in self.summary.iter().filter(|r| r.mode != Downmix::Average) {
            match out.iter_mut().find(|(a, _)| *a == r.azimuth) {
                Some(e) => e.1 = e.1.min(r.ser),
                None => out.push((r.azimuth, r.ser)),
            }
        }
        out
    }

    /// The azimuth where the best single-channel SER is lowest (first on ties).
    pub fn best_single_minimum(&self) -> Option<(f64, f64)> {
        self.best_single_channel().into_iter().fold(None, |best, (a, s)| match best {
            Some((_, b)) if b <= s => best,
            _ => Some((a, s)),
        })
    }

    pub fn ser(&self, azimuth: f64, mode: Downmix) -> Option<f64> {
        self.summary.iter().find(|r| r.azimuth == azimuth && r.mode == mode).map(|r| r.ser)
    }
}

/// SER and phoneme distance of re-ranked recognition for every presentation
/// angle and downmix mode.
pub fn run_static_asr(cfg: &ExperimentConfig) -> Result<StaticAsrReport> {
    cfg.validate()?;
    let m = Materials::load(cfg)?;
    let s = &cfg.static_asr;
    let map = SnrRateMap::through(s.calibration[0], s.calibration[1])?;
    let head = cfg.head_with(s.ego_noise);
    let truth_ph: Vec<_> = m.corpus.utterances.iter().map(|u| g2p(&u.transcript, &m.lexicon)).collect();
    let mut detail = Vec::new();
    let mut trials = Vec::new();
    for (a, &azimuth) in cfg.ssl.angles.angles.iter().enumerate() {
        for t in 0..s.trials {
            let mut rows: Vec<Vec<StaticDetailRow>> = vec![Vec::new(); s.downmix.len()];
            for (u, utt) in m.corpus.utterances.iter().enumerate() {
                let idx = ((a * s.trials + t) * m.corpus.len() + u) as u64;
                let scene_seed = seed::derive(cfg.seed, "static-asr", idx);
                let r = render(&utt.audio, &SceneSpec { azimuth, seed: scene_seed, ..cfg.scene(s.snr_db) }, &head)?;
                for (k, &mode) in s.downmix.iter().enumerate() {
                    let clean = downmix(&r.clean, mode);
                    let noisy = downmix(&r.noisy, mode);
                    let snr = measure_band_snr(&clean, &noisy, s.band_hz.0, s.band_hz.1)?;
                    let rate = map.rate(snr);
                    let hyps = synth_hypotheses(
                        &utt.transcript,
                        rate,
                        seed::derive(scene_seed, &mode.to_string(), 0),
                        &m.lexicon,
                    )?;
                    let won = rerank(&hyps, &m.domain)?;
                    let winner = &m.domain.sentences[won.sentence];
                    rows[k].push(StaticDetailRow {
                        azimuth,
                        delta_diff: azimuth - 90.0,
                        mode,
                        trial: t,
                        utterance: utt.id.clone(),
                        snr_db: snr.min(SNR_CAP_DB),
                        phoneme_error_rate: rate,
                        raw: hyps.best().text.clone(),
                        recognized: winner.clone(),
                        raw_correct: same_words(&hyps.best().text, &utt.transcript),
                        reranked_correct: same_words(winner, &utt.transcript),
                        raw_distance: levenshtein(&hyps.best().phonemes.0, &truth_ph[u].0),
                        distance: levenshtein(&m.domain.phonemes[won.sentence].0, &truth_ph[u].0),
                    });
                }
            }
            for (k, rs) in rows.into_iter().enumerate() {
                trials.push(trial_row(azimuth, s.downmix[k], t, &rs, &m.corpus)?);
                detail.extend(rs);
            }
        }
    }
    let summary = summarize_static(&trials);
    fs::create_dir_all(&cfg.out)?;
    write_csv(cfg.out.join("static_asr_detail.csv"), &detail)?;
    write_csv(cfg.out.join("static_asr_trials.csv"), &trials)?;
    write_csv(cfg.out.join("static_asr_summary.csv"), &summary)?;
    Ok(StaticAsrReport { detail, trials, summary })
}

fn same_words(a: &str, b: &str) -> bool {
    tokenize(a) == tokenize(b)
}

fn trial_row(azimuth: f64, mode: Downmix, trial: usize, rows: &[StaticDetailRow], corpus: &Corpus) -> Result<StaticTrialRow> {
    let truths = corpus.utterances.iter().map(|u| u.transcript.as_str());
    let raw = score(&rows.iter().map(|r| r.raw.as_str()).zip(truths.clone()).collect::<Vec<_>>())?;
    let reranked = score(&rows.iter().map(|r| r.recognized.as_str()).zip(truths).collect::<Vec<_>>())?;
    Ok(StaticTrialRow {
        azimuth,
        delta_diff: azimuth - 90.0,
        mode,
        trial,
        utterances: rows.len(),
        snr_db: rows.iter().map(|r| r.snr_db).sum::<f64>() / rows.len() as f64,
        ser_raw: raw.ser,
        ser: reranked.ser,
        wer_raw: raw.wer,
        wer: reranked.wer,
        mean_distance: rows.iter().map(|r| r.distance as f64).sum::<f64>() / rows.len() as f64,
    })
}

fn summarize_static(trials: &[StaticTrialRow]) -> Vec<StaticSummaryRow> {
    let mut out: Vec<StaticSummaryRow> = Vec::new();
    for t in trials {
        match out.iter_mut().find(|r| r.azimuth == t.azimuth && r.mode == t.mode) {
            Some(r) => {
                r.trials += 1;
                r.snr_db += t.snr_db;
                r.ser_raw += t.ser_raw;
                r.ser += t.ser;
                r.wer += t.wer;
                r.mean_distance += t.mean_distance;
            }
            None => out.push(StaticSummaryRow {
                azimuth: t.azimuth,
                delta_diff: t.delta_diff,
                mode: t.mode,
                trials: 1,
                snr_db: t.snr_db,
                ser_raw: t.ser_raw,
                ser: t.ser,
                wer: t.wer,
                mean_distance: t.mean_distance,
            }),
        }
    }
    for r in &mut out {
        let n = r.trials as f64;
        r.snr_db /= n;
        r.ser_raw /= n;
        r.ser /= n;
        r.wer /= n;
        r.mean_distance /= n;
    }
    out
}

/// The §IV-B battery: every compound at every loudspeaker from every offset.
pub fn schedule_trials(cfg: &ExperimentConfig) -> Vec<TrialSpec> {
    let d = &cfg.dynamic;
    let mut trials = Vec::new();
    for c in 0..d.compounds {
        for &source in &cfg.ssl.angles.angles {
            for &delta in &d.offsets {
                let id = trials.len();
                let seed = seed::derive(cfg.seed, "trial", id as u64);
                trials.push(TrialSpec::with_offset(id, source, delta, c, d.max_iterations, seed));
            }
        }
    }
    trials
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub trial: usize,
    pub compound: usize,
    pub source: f64,
    pub delta_start: f64,
    pub iter: usize,
    pub theta_neck: f64,
    pub relative: f64,
    pub estimate: f64,
    pub confidence: f64,
    pub held: bool,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicSummary {
    pub trials: usize,
    pub iterations: usize,
    /// Mean |δ_diff| after the third iteration.
    pub mean_abs_error_after_3: Option<f64>,
    pub locked_iterations: usize,
    pub post_lock_iterations: usize,
    pub lock_retention: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct DynamicReport {
    pub trajectories: Vec<TrackingTrajectory>,
    pub summary: DynamicSummary,
}

/// Closed-loop tracking over the scheduled battery with a trained model.
pub fn run_dynamic_ssl(cfg: &ExperimentConfig) -> Result<DynamicReport> {
    cfg.validate()?;
    let model_path = cfg.model_path();
    if !model_path.exists() {
        return Err(invalid(format!("no trained model at {}; run `train` first", model_path.display())));
    }
    let model = SslModel::load(&model_path)?;
    let m = Materials::load(cfg)?;
    let d = &cfg.dynamic;
    let audio = m.corpus.audio();
    let compounds = (0..d.compounds).map(|c| build_compound(&audio, c)).collect::<Result<Vec<_>>>()?;
    let head = cfg.head_with(d.ego_noise);
    let setup = TrackingSetup {
        model: &model,
        head: &head,
        scene: cfg.scene(d.snr_db),
        lock_threshold: d.lock_threshold,
        lead_in_s: d.lead_in_s,
    };
    let trajectories = schedule_trials(cfg)
        .iter()
        .map(|t| run_tracking_trial(t, &compounds[t.compound], &setup))
        .collect::<Result<Vec<_>>>()?;
    let errors = accumulate_errors(&trajectories)?;
    let (kept, total) = lock_retention(&trajectories, LOCK_TOLERANCE_DEG);
    let summary = DynamicSummary {
        trials: trajectories.len(),
        iterations: trajectories.iter().map(|t| t.records.len()).sum(),
        mean_abs_error_after_3: mean_abs_error_at(&trajectories, 3),
        locked_iterations: kept,
        post_lock_iterations: total,
        lock_retention: (total > 0).then(|| kept as f64 / total as f64),
    };
    let rows: Vec<TrajectoryRow> = trajectories
        .iter()
        .flat_map(|t| {
            t.records.iter().map(|r| TrajectoryRow {
                trial: t.trial.id,
                compound: t.trial.compound,
                source: t.trial.source,
                delta_start: t.trial.delta_start(),
                iter: r.iteration,
                theta_neck: r.theta_neck,
                relative: r.relative,
                estimate: r.estimate,
                confidence: r.confidence,
                held: r.held,
                error: r.error,
            })
        })
        .collect();
    fs::create_dir_all(&cfg.out)?;
    write_csv(cfg.out.join("trajectories.csv"), &rows)?;
    write_csv(cfg.out.join("error_histogram.csv"), &errors.histogram)?;
    write_csv(cfg.out.join("convergence.csv"), &errors.per_iteration)?;
    write_json(cfg.out.join("dynamic_summary.json"), &summary)?;
    Ok(DynamicReport { trajectories, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub e_mso: f64,
    pub e_lso: f64,
    pub i_lso: f64,
    pub train_accuracy: f64,
    pub heldout_accuracy: f64,
    pub heldout_within_one: f64,
}

/// Held-out accuracy as each pruning threshold ω is varied on its own.
pub fn run_sweep_omega(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let m = Materials::load(cfg)?;
    let (frontend, train, test) = training_evidence(cfg, &m)?;
    let base = cfg.ssl.omegas;
    let mut grid: Vec<Omegas> = vec![base];
    for &v in &cfg.sweep.values {
        for o in [Omegas { e_mso: v, ..base }, Omegas { e_lso: v, ..base }, Omegas { i_lso: v, ..base }] {
            if !grid.contains(&o) {
                grid.push(o);
            }
        }
    }
    let mut rows = Vec::new();
    for omegas in grid {
        omegas.validate()?;
        let ssl = SslConfig { omegas, ..cfg.ssl.clone() };
        let (model, report) = train_from_evidence(&train, &frontend, &ssl)?;
        let acc = evaluate(&model, &test)?;
        rows.push(SweepRow {
            e_mso: omegas.e_mso,
            e_lso: omegas.e_lso,
            i_lso: omegas.i_lso,
            train_accuracy: report.accuracy,
            heldout_accuracy: acc.accuracy,
            heldout_within_one: acc.within_one,
        });
    }
    fs::create_dir_all(&cfg.out)?;
    write_csv(cfg.out.join("sweep_omega.csv"), &rows)?;
    Ok(rows)
}

/// Render one corpus utterance at the configured azimuth: writes the dry,
/// clean binaural and noisy binaural WAV files; returns their paths.
pub fn run_render(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let m = Materials::load(cfg)?;
    let r = &cfg.render;
    let utt = m
        .corpus
        .utterances
        .get(r.utterance)
        .ok_or_else(|| invalid(format!("utterance {} not in a corpus of {}", r.utterance, m.corpus.len())))?;
    let scene = SceneSpec { azimuth: r.azimuth, seed: seed::derive(cfg.seed, "render", 0), ..cfg.scene(r.snr_db) };
    let out = render(&utt.audio, &scene, &cfg.head_with(r.ego_noise))?;
    fs::create_dir_all(&cfg.out)?;
    let stem = format!("{}_az{:03}", utt.id, r.azimuth.round() as i64);
    let paths = [
        cfg.out.join(format!("{stem}_dry.wav")),
        cfg.out.join(format!("{stem}_clean.wav")),
        cfg.out.join(format!("{stem}_noisy.wav")),
    ];
    write_wav_mono(&paths[0], &utt.audio)?;
    write_wav_stereo(&paths[1], &out.clean)?;
    write_wav_stereo(&paths[2], &out.noisy)?;
    Ok(paths.to_vec())
}

fn write_csv<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

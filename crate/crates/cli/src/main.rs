//! Command-line front end. A JSON config supplies every setting; flags
//! override it.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use binaural_ssl::acoustics::{Downmix, HeadModel};
use binaural_ssl::experiments::{
    run_dynamic_ssl, run_render, run_static_asr, run_sweep_omega, run_train, ExperimentConfig,
};
use binaural_ssl::pipeline::Frontend;
use binaural_ssl::verify;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "binaural-ssl", version, about = "Binaural sound source localization and recognition experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Train the localization model on rendered scenes and save it
    Train,
    /// Render one corpus utterance at an azimuth to WAV files
    Render,
    /// Sentence error rate against source angle for each downmix
    StaticAsr,
    /// Closed-loop head tracking of compound sounds
    DynamicSsl,
    /// Held-out accuracy as each pruning threshold varies
    SweepOmega,
    /// Run the oracle and invariant self-checks
    Check,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        self == Switch::On
    }
}

#[derive(Args)]
struct Flags {
    /// JSON experiment config; built-in defaults when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Model file (default <out>/model.json)
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Static-asr: corpus presentations; dynamic-ssl: compound sounds;
    /// train, sweep-omega: decisions per angle
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Ego-noise SNR in dB of the running experiment
    #[arg(long, global = true, allow_negative_numbers = true)]
    snr: Option<f64>,
    /// Downmix modes, comma separated (LCh,RCh,LRCh)
    #[arg(long, global = true, value_delimiter = ',')]
    downmix: Option<Vec<Downmix>>,
    /// Pruning threshold of the excitatory MSO weights
    #[arg(long, global = true)]
    omega_e_mso: Option<f64>,
    /// Pruning threshold of the excitatory LSO weights
    #[arg(long, global = true)]
    omega_e_lso: Option<f64>,
    /// Pruning threshold of the inhibitory LSO weights
    #[arg(long, global = true)]
    omega_i_lso: Option<f64>,
    /// Pinna gain; off sets it to 0 dB
    #[arg(long, global = true)]
    pinna: Option<Switch>,
    /// Ego noise of the running experiment
    #[arg(long, global = true)]
    ego_noise: Option<Switch>,
    /// Render: source azimuth in degrees
    #[arg(long, global = true)]
    azimuth: Option<f64>,
    /// Render: corpus utterance index
    #[arg(long, global = true)]
    utterance: Option<usize>,
}

fn configure(command: Command, f: &Flags) -> Result<ExperimentConfig> {
    let mut cfg = match &f.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading config {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = f.seed {
        cfg.seed = s;
    }
    if let Some(o) = &f.out {
        cfg.out = o.clone();
    }
    if let Some(m) = &f.model {
        cfg.model = Some(m.clone());
    }
    if let Some(d) = &f.downmix {
        cfg.static_asr.downmix = d.clone();
    }
    let o = &mut cfg.ssl.omegas;
    o.e_mso = f.omega_e_mso.unwrap_or(o.e_mso);
    o.e_lso = f.omega_e_lso.unwrap_or(o.e_lso);
    o.i_lso = f.omega_i_lso.unwrap_or(o.i_lso);
    match f.pinna {
        Some(Switch::Off) => cfg.head.pinna_gain_db = 0.0,
        Some(Switch::On) if cfg.head.pinna_gain_db == 0.0 => cfg.head.pinna_gain_db = HeadModel::default().pinna_gain_db,
        _ => {}
    }
    if let Some(a) = f.azimuth {
        cfg.render.azimuth = a;
    }
    if let Some(u) = f.utterance {
        cfg.render.utterance = u;
    }
    // --trials, --snr and --ego-noise act on the running experiment's section
    let ego = f.ego_noise.map(Switch::on);
    match command {
        Command::Train | Command::SweepOmega => {
            let t = &mut cfg.train;
            t.decisions_per_angle = f.trials.unwrap_or(t.decisions_per_angle);
            t.snr_db = f.snr.unwrap_or(t.snr_db);
            t.ego_noise = ego.unwrap_or(t.ego_noise);
        }
        Command::StaticAsr => {
            let s = &mut cfg.static_asr;
            s.trials = f.trials.unwrap_or(s.trials);
            s.snr_db = f.snr.unwrap_or(s.snr_db);
            s.ego_noise = ego.unwrap_or(s.ego_noise);
        }
        Command::DynamicSsl => {
            let d = &mut cfg.dynamic;
            d.compounds = f.trials.unwrap_or(d.compounds);
            d.snr_db = f.snr.unwrap_or(d.snr_db);
            d.ego_noise = ego.unwrap_or(d.ego_noise);
        }
        Command::Render => {
            let r = &mut cfg.render;
            r.snr_db = f.snr.unwrap_or(r.snr_db);
            r.ego_noise = ego.unwrap_or(r.ego_noise);
        }
        Command::Check => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = configure(cli.command, &cli.flags)?;
    match cli.command {
        Command::Train => {
            let o = run_train(&cfg)?;
            let h = &o.summary.heldout;
            println!("model        {}", cfg.model_path().display());
            println!("decisions    {} training, {} held out", o.summary.training_decisions, h.decisions);
            println!("epochs       {} (final loss {:.4})", o.summary.epochs, o.summary.final_loss);
            println!("train acc    {:.3}", o.summary.train_accuracy);
            println!("held-out acc {:.3} exact, {:.3} within one bin", h.accuracy, h.within_one);
        }
        Command::Render => {
            for p in run_render(&cfg)? {
                println!("{}", p.display());
            }
        }
        Command::StaticAsr => {
            let r = run_static_asr(&cfg)?;
            println!("azimuth mode  ser    ser_raw distance");
            for s in &r.summary {
                println!("{:>7} {:<5} {:.3}  {:.3}   {:.3}", s.azimuth, s.mode.to_string(), s.ser, s.ser_raw, s.mean_distance);
            }
            if let Some((az, ser)) = r.best_single_minimum() {
                println!("best single channel: minimum SER {ser:.3} at {az} deg");
            }
        }
        Command::DynamicSsl => {
            let r = run_dynamic_ssl(&cfg)?;
            let s = &r.summary;
            println!("trials {} iterations {}", s.trials, s.iterations);
            if let Some(e) = s.mean_abs_error_after_3 {
                println!("mean |error| after iteration 3: {e:.2} deg");
            }
            if let Some(l) = s.lock_retention {
                println!("lock retention: {l:.3} ({} of {} post-lock iterations)", s.locked_iterations, s.post_lock_iterations);
            }
        }
        Command::SweepOmega => {
            println!("e_mso e_lso i_lso heldout within_one");
            for r in run_sweep_omega(&cfg)? {
                println!("{:.2}  {:.2}  {:.2}  {:.3}   {:.3}", r.e_mso, r.e_lso, r.i_lso, r.heldout_accuracy, r.heldout_within_one);
            }
        }
        Command::Check => {
            let frontend = Frontend::new(&cfg.ssl)?;
            let checks = verify::run_all(cfg.seed, &frontend.grid)?;
            for c in &checks {
                println!("{} {:<14} {:<42} {}", if c.passed { "PASS" } else { "FAIL" }, c.suite, c.name, c.detail);
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                bail!("{failed} of {} checks failed", checks.len());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

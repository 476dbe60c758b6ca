//! Command-line surface: `synth → prep → train → predict → eval`, plus
//! `gradcheck`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::io::{self, Prediction, SynthConfig};
use crate::metrics::{evaluate, EvalReport};
use crate::models::{
    build_model, build_model_with, ensemble_predict, ModelConfig, ModelGraph, ModelKind,
};
use crate::nn::{grad_check_with, GradCheckOptions, GradCheckReport, Mode, RngState, Tensor3};
use crate::prep::{self, ScoreStream, WindowSet};
use crate::train::{self, kfold_split, TrainConfig};

#[derive(Debug, Parser)]
#[command(
    name = "arousalnet",
    version,
    about = "Sleep-arousal detection with 1D CNNs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic 200 Hz recordings with annotated arousals.
    Synth(SynthArgs),
    /// Normalize, decimate to 100 Hz and cut labeled 30 s windows.
    Prep(PrepArgs),
    /// Train a model (or an ensemble) on prepared windows.
    Train(TrainArgs),
    /// Write per-sample arousal probabilities for every record of a directory.
    Predict(PredictArgs),
    /// Score predictions against record annotations.
    Eval(EvalArgs),
    /// Check backprop against finite differences on a tiny f64 variant.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    pub records: usize,
    /// Seconds per record.
    #[arg(long, default_value_t = 3600.0)]
    pub duration: f64,
    /// Events per hour.
    #[arg(long, default_value_t = 20.0)]
    pub event_rate: f64,
    /// Shortest event, seconds.
    #[arg(long, default_value_t = 3.0)]
    pub event_min: f64,
    /// Longest event, seconds.
    #[arg(long, default_value_t = 15.0)]
    pub event_max: f64,
    #[arg(long, default_value_t = 3.0)]
    pub snr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PrepArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub model: ModelKind,
    /// Directory of `.win` files written by `prep`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Train this many members with seeds `seed`, `seed+1`, ... and store
    /// them in one ensemble file.
    #[arg(long)]
    pub ensemble: Option<usize>,
    /// Train on all records outside fold `i` of `k` (1-based), split at
    /// record level with the run's seed.
    #[arg(long, value_parser = parse_fold)]
    pub fold: Option<(usize, usize)>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 512)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 32)]
    pub micro_batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 6)]
    pub patience: usize,
    /// Also write the per-epoch history here.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model or ensemble file.
    #[arg(long)]
    pub model: PathBuf,
    /// Directory of recordings (`.hdr/.sig/.lab`).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Windows per forward pass.
    #[arg(long, default_value_t = 16)]
    pub chunk: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of `.pred` files.
    #[arg(long)]
    pub preds: PathBuf,
    /// Directory of the matching recordings.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub per_record: bool,
    /// Also write the report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub model: ModelKind,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Check in eval mode after calibrating batch-norm statistics.
    #[arg(long)]
    pub eval: bool,
}

fn parse_fold(s: &str) -> std::result::Result<(usize, usize), String> {
    let (i, k) = s
        .split_once('/')
        .ok_or_else(|| format!("expected i/k, got {s:?}"))?;
    let i: usize = i
        .parse()
        .map_err(|_| format!("fold index {i:?} is not a number"))?;
    let k: usize = k
        .parse()
        .map_err(|_| format!("fold count {k:?} is not a number"))?;
    if k < 2 || i == 0 || i > k {
        return Err(format!("need 1 <= i <= k and k >= 2, got {i}/{k}"));
    }
    Ok((i, k))
}

/// Parses `args` (program name first) and runs the command, writing
/// human-readable output to `out`.
pub fn run<I, S>(args: I, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            return say(out, &e.to_string());
        }
        Err(e) => {
            let msg = e.to_string();
            return Err(Error::invalid(msg.trim_start_matches("error: ").trim_end()));
        }
    };
    execute(cli.command, out)
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a, out),
        Command::Prep(a) => prep_dir(a, out),
        Command::Train(a) => train_cmd(a, out),
        Command::Predict(a) => predict(a, out),
        Command::Eval(a) => eval(a, out).map(|_| ()),
        Command::Gradcheck(a) => gradcheck(a, out).map(|_| ()),
    }
}

fn say(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<output>", e))
}

fn synth(a: SynthArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = SynthConfig {
        records: a.records,
        duration_s: a.duration,
        event_rate: a.event_rate,
        event_min_s: a.event_min,
        event_max_s: a.event_max,
        snr: a.snr,
        seed: a.seed,
        ..SynthConfig::default()
    };
    for r in io::synth_dataset(&cfg)? {
        io::write_record(&a.out, &r)?;
    }
    say(
        out,
        &format!("wrote {} records to {}\n", a.records, a.out.display()),
    )
}

fn prep_dir(a: PrepArgs, out: &mut dyn Write) -> Result<()> {
    let ids = io::list_records(&a.input)?;
    if ids.is_empty() {
        return Err(Error::invalid(format!(
            "no records in {}",
            a.input.display()
        )));
    }
    let mut total = 0;
    for id in &ids {
        let set = prep::prepare_record(&io::read_record(&a.input, id)?)?;
        total += set.len();
        io::write_windows(&a.out.join(format!("{id}.win")), &set)?;
    }
    say(
        out,
        &format!(
            "prepared {total} windows from {} records into {}\n",
            ids.len(),
            a.out.display()
        ),
    )
}

/// Windows of the records outside fold `i` of `k`.
fn select_fold(
    windows: &WindowSet,
    fold: (usize, usize),
    seed: u64,
) -> Result<(WindowSet, Vec<String>)> {
    let mut ids: Vec<String> = windows
        .provenance
        .iter()
        .map(|p| p.record_id.clone())
        .collect();
    ids.sort();
    ids.dedup();
    let plan = kfold_split(&ids, fold.1, &mut RngState::new(seed))?;
    let (train_ids, test_ids) = plan.fold(fold.0 - 1)?;
    let rows: Vec<usize> = (0..windows.len())
        .filter(|&r| train_ids.contains(&windows.provenance[r].record_id))
        .collect();
    Ok((windows.subset(&rows), test_ids))
}

fn train_cmd(a: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let mut windows = io::read_window_dir(&a.data)?;
    if let Some(fold) = a.fold {
        let (w, held_out) = select_fold(&windows, fold, a.seed)?;
        say(
            out,
            &format!(
                "fold {}/{} holds out {}\n",
                fold.0,
                fold.1,
                held_out.join(" ")
            ),
        )?;
        windows = w;
    }
    let members = a.ensemble.unwrap_or(1);
    if members == 0 {
        return Err(Error::invalid("--ensemble needs at least one member"));
    }
    let mut trained = Vec::with_capacity(members);
    let mut history = String::new();
    for j in 0..members {
        let seed = a.seed.wrapping_add(j as u64);
        let mut model = build_model(a.model, &mut RngState::new(seed));
        let cfg = TrainConfig {
            batch_size: a.batch_size,
            max_epochs: a.epochs,
            learning_rate: a.lr,
            patience: a.patience,
            seed,
            micro_batch: a.micro_batch,
            ..TrainConfig::default()
        };
        let outcome = train::train(&mut model, &windows, &cfg)?;
        let text = train::history_text(&outcome.history);
        if members > 1 {
            history.push_str(&format!("# member {j} seed {seed}\n"));
        }
        history.push_str(&text);
        say(out, &text)?;
        let mut summary = format!(
            "best epoch {} val_loss {:.6}\n",
            outcome.best_epoch, outcome.best_val_loss
        );
        if let Some(msg) = &outcome.aborted {
            summary.push_str(&format!("warning: {msg}; kept the best earlier epoch\n"));
        }
        say(out, &summary)?;
        trained.push(model);
    }
    if a.ensemble.is_some() {
        io::save_ensemble(&a.out, &trained)?;
    } else {
        io::save_model(&a.out, &trained[0])?;
    }
    if let Some(h) = &a.history {
        std::fs::write(h, history).map_err(|e| Error::io(h, e))?;
    }
    say(out, &format!("saved {}\n", a.out.display()))
}

/// Per-sample probabilities of one recording at its own rate.
pub fn predict_record(
    members: &mut [ModelGraph<f32>],
    record: &prep::Record,
    chunk: usize,
) -> Result<Vec<f32>> {
    let (windows, starts) = prep::prepare_inference(record)?;
    let rows: Vec<usize> = (0..windows.batch()).collect();
    let mut probs = Vec::with_capacity(rows.len());
    for part in rows.chunks(chunk.max(1)) {
        let p = ensemble_predict(members, &windows.gather(part))?;
        // Clamp rounding of the f32 mean into the probability range.
        probs.extend((0..part.len()).map(|b| p.get(b, 1, 0).clamp(0.0, 1.0)));
    }
    prep::upsample_predictions(&probs, &starts, record.len())
}

fn predict(a: PredictArgs, out: &mut dyn Write) -> Result<()> {
    let mut members = io::load_members::<f32>(&a.model, None)?;
    let ids = io::list_records(&a.data)?;
    for id in &ids {
        let record = io::read_record(&a.data, id)?;
        let probs = predict_record(&mut members, &record, a.chunk)?;
        io::write_prediction(
            &a.out.join(format!("{id}.pred")),
            &Prediction {
                record_id: id.clone(),
                probs,
            },
        )?;
    }
    say(
        out,
        &format!(
            "predicted {} records with {} model(s) into {}\n",
            ids.len(),
            members.len(),
            a.out.display()
        ),
    )
}

/// Pairs every prediction file with its recording's annotations.
pub fn load_streams(preds: &Path, data: &Path) -> Result<Vec<ScoreStream>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(preds)
        .map_err(|e| Error::io(preds, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("pred"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::invalid(format!(
            "no .pred files in {}",
            preds.display()
        )));
    }
    files
        .iter()
        .map(|f| {
            let p = io::read_prediction(f)?;
            let record = io::read_record(data, &p.record_id)?;
            if record.len() != p.probs.len() {
                return Err(Error::shape(
                    format!("prediction {}", f.display()),
                    record.len(),
                    p.probs.len(),
                ));
            }
            ScoreStream::new(p.record_id, p.probs, record.labels)
        })
        .collect()
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> Result<EvalReport> {
    let streams = load_streams(&a.preds, &a.data)?;
    let report = evaluate(&streams)?;
    let text = report.to_text(a.per_record);
    if let Some(path) = &a.report {
        std::fs::write(path, &text).map_err(|e| Error::io(path, e))?;
    }
    say(out, &text)?;
    Ok(report)
}

/// Full-model finite-difference check at the reduced geometry.
pub fn tiny_model_gradcheck(kind: ModelKind, seed: u64, mode: Mode) -> Result<GradCheckReport> {
    let mut rng = RngState::new(seed);
    let mut model = build_model_with::<f64>(kind, ModelConfig::TINY, &mut rng);
    let [c, l] = [ModelConfig::TINY.in_channels, ModelConfig::TINY.input_len];
    let x = Tensor3::<f64>::from_fn([2, c, l], |_, _, _| rng.uniform());
    if mode == Mode::Eval {
        let cal = Tensor3::<f64>::from_fn([8, c, l], |_, _, _| rng.uniform());
        model.graph.calibrate_batch_norm(&cal)?;
    }
    let opts = GradCheckOptions {
        mode,
        ..GradCheckOptions::default()
    };
    grad_check_with(&mut model.graph, &x, &opts)
}

fn gradcheck(a: GradcheckArgs, out: &mut dyn Write) -> Result<GradCheckReport> {
    let mode = if a.eval { Mode::Eval } else { Mode::Train };
    let r = tiny_model_gradcheck(a.model, a.seed, mode)?;
    say(
        out,
        &format!(
            "model {} {:?}: max relative error {:.3e} (|g| >= 1e-6: {:.3e}) over {} coordinates, {} kinks skipped, worst {}\n",
            a.model, mode, r.max_rel_error, r.resolved_max_rel_error, r.checked, r.skipped_kinks, r.worst
        ),
    )?;
    if r.max_rel_error >= 1e-4 {
        return Err(Error::invalid(format!(
            "gradient check for {} exceeded 1e-4 (max relative error {:.3e})",
            a.model, r.max_rel_error
        )));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_syntax() {
        assert_eq!(parse_fold("2/3"), Ok((2, 3)));
        assert!(parse_fold("0/3").is_err());
        assert!(parse_fold("4/3").is_err());
        assert!(parse_fold("1/1").is_err());
        assert!(parse_fold("x").is_err());
    }

    #[test]
    fn model_names_parse() {
        for kind in ModelKind::ALL {
            let cli =
                Cli::try_parse_from(["arousalnet", "gradcheck", "--model", kind.name()]).unwrap();
            match cli.command {
                Command::Gradcheck(g) => assert_eq!(g.model, kind),
                _ => unreachable!(),
            }
        }
        assert!(Cli::try_parse_from(["arousalnet", "gradcheck", "--model", "m6"]).is_err());
    }

    #[test]
    fn help_is_not_an_error() {
        let mut out = Vec::new();
        run(["arousalnet", "--help"], &mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().contains("synth"));
        let err = run(["arousalnet", "train"], &mut Vec::new()).unwrap_err();
        assert!(err.to_string().contains("--model"), "{err}");
    }
}

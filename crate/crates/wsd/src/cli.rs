//! Command-line interface: train, eval, predict, gradcheck, inspect.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{AblationMode, TrainConfig};
use crate::data::checkpoint::{load_checkpoint, manifest, save_checkpoint};
use crate::data::glove::load_glove;
use crate::data::jsonl::parse_jsonl;
use crate::data::senseval::{parse_senseval_xml, read_answer_key, write_answer_key};
use crate::data::Instance;
use crate::error::{Result, WsdError};
use crate::numeric::Rng;
use crate::train::{evaluate, train, write_log};

#[derive(Parser)]
#[command(name = "wsd", about = "Bidirectional-LSTM word sense disambiguation", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a SensEval XML or JSONL corpus.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a test corpus.
    Eval(EvalArgs),
    /// Print the sense distribution for each JSONL instance.
    Predict(PredictArgs),
    /// Verify analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Print a checkpoint's tensor manifest and config.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    train_xml: Option<PathBuf>,
    #[arg(long)]
    train_jsonl: Option<PathBuf>,
    #[arg(long)]
    dev_jsonl: Option<PathBuf>,
    #[arg(long)]
    glove: Option<PathBuf>,
    /// Output checkpoint path.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Training log path (default: <checkpoint>.log).
    #[arg(long)]
    log: Option<PathBuf>,
    /// full | no-dropword | no-pretrained | shuffled
    #[arg(long, default_value = "full")]
    mode: AblationMode,
    /// key=value file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    hyper: HyperArgs,
}

/// One flag per hyperparameter, mirroring the config field names.
#[derive(Args, Default)]
struct HyperArgs {
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    hidden_layer: Option<usize>,
    #[arg(long)]
    p_drop_embed: Option<f64>,
    #[arg(long)]
    p_drop_lstm_out: Option<f64>,
    #[arg(long)]
    p_drop_hidden: Option<f64>,
    #[arg(long)]
    dropword: Option<f64>,
    #[arg(long)]
    noise_scale: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    lr_decay: Option<f64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    forget_bias_one: Option<bool>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    test_xml: Option<PathBuf>,
    #[arg(long)]
    test_jsonl: Option<PathBuf>,
    /// Gold answer key (for XML corpora without inline answers).
    #[arg(long)]
    key: Option<PathBuf>,
    /// Write system answers in key format.
    #[arg(long)]
    answers_out: Option<PathBuf>,
    #[arg(long, default_value = "full")]
    mode: AblationMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    jsonl: PathBuf,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    configs: usize,
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    checkpoint: PathBuf,
}

fn exit_code(err: &WsdError) -> i32 {
    match err {
        WsdError::Config(_) => 1,
        WsdError::Numerical(_) => 3,
        _ => 2,
    }
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are successes
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
        Command::Inspect(args) => cmd_inspect(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Applies `key=value` lines to the config; unknown keys are errors.
fn apply_config_file(config: &mut TrainConfig, path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path)?;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| WsdError::ParseLine {
            path: path.display().to_string(),
            line: lineno + 1,
            msg: "expected key=value".into(),
        })?;
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let bad = |what: &str| WsdError::ParseLine {
            path: path.display().to_string(),
            line: lineno + 1,
            msg: format!("invalid {what}: `{value}`"),
        };
        match key.as_str() {
            "embed_dim" => config.embed_dim = value.parse().map_err(|_| bad("usize"))?,
            "hidden" => config.hidden = value.parse().map_err(|_| bad("usize"))?,
            "hidden_layer" => config.hidden_layer = value.parse().map_err(|_| bad("usize"))?,
            "p_drop_embed" => config.reg.p_drop_embed = value.parse().map_err(|_| bad("float"))?,
            "p_drop_lstm_out" => config.reg.p_drop_lstm_out = value.parse().map_err(|_| bad("float"))?,
            "p_drop_hidden" => config.reg.p_drop_hidden = value.parse().map_err(|_| bad("float"))?,
            "dropword" => config.reg.p_dropword = value.parse().map_err(|_| bad("float"))?,
            "noise_scale" => config.reg.noise_scale = value.parse().map_err(|_| bad("float"))?,
            "momentum" => config.momentum = value.parse().map_err(|_| bad("float"))?,
            "learning_rate" => config.learning_rate = value.parse().map_err(|_| bad("float"))?,
            "lr_decay" => config.lr_decay = value.parse().map_err(|_| bad("float"))?,
            "max_epochs" => config.max_epochs = value.parse().map_err(|_| bad("usize"))?,
            "patience" => config.patience = value.parse().map_err(|_| bad("usize"))?,
            "batch_size" => config.batch_size = value.parse().map_err(|_| bad("usize"))?,
            "seed" => config.seed = value.parse().map_err(|_| bad("u64"))?,
            "forget_bias_one" => config.forget_bias_one = value.parse().map_err(|_| bad("bool"))?,
            "threads" => config.threads = value.parse().map_err(|_| bad("usize"))?,
            other => {
                return Err(WsdError::ParseLine {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    msg: format!("unknown config key `{other}`"),
                })
            }
        }
    }
    Ok(())
}

fn merge_hyper(config: &mut TrainConfig, hyper: &HyperArgs) {
    macro_rules! merge {
        ($($field:expr => $opt:expr),* $(,)?) => {
            $(if let Some(v) = $opt { $field = v; })*
        };
    }
    merge! {
        config.embed_dim => hyper.embed_dim,
        config.hidden => hyper.hidden,
        config.hidden_layer => hyper.hidden_layer,
        config.reg.p_drop_embed => hyper.p_drop_embed,
        config.reg.p_drop_lstm_out => hyper.p_drop_lstm_out,
        config.reg.p_drop_hidden => hyper.p_drop_hidden,
        config.reg.p_dropword => hyper.dropword,
        config.reg.noise_scale => hyper.noise_scale,
        config.momentum => hyper.momentum,
        config.learning_rate => hyper.learning_rate,
        config.lr_decay => hyper.lr_decay,
        config.max_epochs => hyper.max_epochs,
        config.patience => hyper.patience,
        config.batch_size => hyper.batch_size,
        config.seed => hyper.seed,
        config.forget_bias_one => hyper.forget_bias_one,
        config.threads => hyper.threads,
    }
}

fn load_corpus(xml: Option<&Path>, jsonl: Option<&Path>, what: &str) -> Result<Vec<Instance>> {
    match (xml, jsonl) {
        (Some(path), None) => {
            let parsed = parse_senseval_xml(path)?;
            if parsed.skipped_headless > 0 {
                eprintln!(
                    "warning: skipped {} instance(s) without a head mark",
                    parsed.skipped_headless
                );
            }
            Ok(parsed.instances)
        }
        (None, Some(path)) => parse_jsonl(path),
        _ => Err(WsdError::Config(format!(
            "exactly one of --{what}-xml / --{what}-jsonl is required"
        ))),
    }
}

fn echo_config(command: &str, config: &TrainConfig, mode: Option<AblationMode>) {
    let mut echo = serde_json::json!({ "command": command, "config": config });
    if let Some(m) = mode {
        echo["mode"] = serde_json::to_value(m).unwrap();
    }
    eprintln!("{echo}");
}

fn cmd_train(args: TrainArgs) -> Result<i32> {
    let mut config = TrainConfig::default();
    if let Some(path) = &args.config {
        apply_config_file(&mut config, path)?;
    }
    merge_hyper(&mut config, &args.hyper);
    config.validate()?;
    echo_config("train", &config, Some(args.mode));

    let train_set = load_corpus(args.train_xml.as_deref(), args.train_jsonl.as_deref(), "train")?;
    let dev_set = match &args.dev_jsonl {
        Some(path) => parse_jsonl(path)?,
        None => Vec::new(),
    };
    let glove = match &args.glove {
        Some(path) => Some(load_glove(path, config.embed_dim)?),
        None => None,
    };
    if let Some(table) = &glove {
        if table.skipped_lines > 0 {
            eprintln!("warning: skipped {} malformed embedding line(s)", table.skipped_lines);
        }
    }

    let outcome = train(&train_set, &dev_set, &config, args.mode, glove.as_ref())?;
    eprintln!(
        "vocabulary size |V| = {} ({} lemmas)",
        outcome.model.vocab.len(),
        outcome.model.inventory.lemmas().len()
    );

    save_checkpoint(&outcome.model, &args.checkpoint)?;
    let log_path = args.log.unwrap_or_else(|| {
        let mut p = args.checkpoint.clone();
        p.set_extension("log");
        p
    });
    write_log(&log_path, &outcome.log)?;

    if let Some(msg) = outcome.diverged {
        eprintln!("training aborted: {msg} (last good checkpoint written)");
        return Ok(3);
    }
    if let Some(last) = outcome.log.last() {
        println!(
            "trained {} epochs; final train loss {:.6}{}",
            last.epoch,
            last.train_loss,
            last.dev_f1.map(|f| format!("; best-checkpoint dev F1 tracked, last {f:.4}")).unwrap_or_default()
        );
    }
    Ok(0)
}

fn cmd_eval(args: EvalArgs) -> Result<i32> {
    let model = load_checkpoint(&args.checkpoint)?;
    echo_config("eval", &model.config, Some(args.mode));
    let mut test = load_corpus(args.test_xml.as_deref(), args.test_jsonl.as_deref(), "test")?;
    if let Some(key_path) = &args.key {
        let key = read_answer_key(key_path)?;
        for inst in &mut test {
            if let Some((_, senses)) = key.get(&inst.id) {
                inst.gold = senses.clone();
            }
        }
    }
    let mut rng = Rng::from_seed(args.seed);
    let (report, answers) = evaluate(&model, &test, args.mode, &mut rng);
    if let Some(out) = &args.answers_out {
        write_answer_key(out, &answers)?;
    }

    println!(
        "attempted {} / {}  correct {}  P {:.4}  R {:.4}  F1 {:.4}",
        report.attempted, report.total, report.correct, report.precision, report.recall, report.f1
    );
    for (lemma, s) in &report.per_lemma {
        println!(
            "  {lemma}: {}/{} correct ({} attempted)",
            s.correct, s.total, s.attempted
        );
    }
    println!("{}", serde_json::to_string(&report)?);
    Ok(0)
}

fn cmd_predict(args: PredictArgs) -> Result<i32> {
    let model = load_checkpoint(&args.checkpoint)?;
    echo_config("predict", &model.config, None);
    let instances = parse_jsonl(&args.jsonl)?;
    for inst in &instances {
        let (tokens, target) = crate::data::preprocess(&inst.tokens, inst.target_position);
        let pp = Instance { tokens, target_position: target, ..inst.clone() };
        let enc = crate::data::vocab::encode_eval(&pp, &model.vocab);
        match crate::model::predict(&model.params, &enc) {
            Ok((idx, dist)) => {
                let senses = model.inventory.senses(&inst.lemma).unwrap_or(&[]);
                let line = serde_json::json!({
                    "id": inst.id,
                    "lemma": inst.lemma,
                    "predicted": senses.get(idx),
                    "senses": senses,
                    "distribution": dist.data,
                });
                println!("{line}");
            }
            Err(e) => {
                eprintln!("warning: instance {}: {e}", inst.id);
            }
        }
    }
    Ok(0)
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<i32> {
    let mut config = TrainConfig::default();
    config.seed = args.seed;
    echo_config("gradcheck", &config, None);
    let report = crate::gradcheck::run_suite(args.seed, args.configs, args.tolerance);
    println!(
        "gradcheck: {} configs, max relative error {:.3e} (tolerance {:.1e}) at {}",
        report.configs_run,
        report.max_relative_error,
        report.tolerance,
        if report.worst_coordinate.is_empty() { "-" } else { &report.worst_coordinate }
    );
    if report.passed() {
        println!("PASS");
        Ok(0)
    } else {
        println!("FAIL");
        Ok(3)
    }
}

fn cmd_inspect(args: InspectArgs) -> Result<i32> {
    let model = load_checkpoint(&args.checkpoint)?;
    println!("format version: {}", crate::data::checkpoint::CHECKPOINT_VERSION);
    println!("config: {}", serde_json::to_string(&model.config)?);
    println!("vocabulary: {} words", model.vocab.len());
    println!("lemmas: {}", model.inventory.lemmas().len());
    let mut total = 0usize;
    let mut rows: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (name, shape) in manifest(&model) {
        total += shape.iter().product::<usize>();
        rows.insert(name, shape);
    }
    for (name, shape) in &rows {
        println!("  {name}: {shape:?}");
    }
    println!("total parameters: {total}");
    Ok(0)
}

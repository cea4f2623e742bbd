//! `ralign` command line.

mod figure;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ralign::checkpoint;
use ralign::dataset::{data_root, load_partition, parse_split};
use ralign::eval::{evaluate, predict_row, EvalReport, Prediction};
use ralign::model::{Head, Model, Trace};
use ralign::{train_task, RalignError, ReactionInput, Task, TrainConfig};
use ralign_data::{align_query, ingest, reaction_key, write_quarantine, DatasetRow, Ingested, Schema, Split, Target};
use serde_json::json;

#[derive(Parser)]
#[command(name = "ralign", version, about = "Reaction-center aligned models for reaction conditions, yield and selectivity")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for training, splits and synthetic data.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of ranked predictions.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Split description: `random:0.7:0.1:0.2[:seed]`, `column` or `file:<path>`.
    #[arg(long, global = true)]
    split: Option<String>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Ingest, align and normalise a CSV; write the cleaned rows and a quarantine log.
    Preprocess {
        input: PathBuf,
        output: PathBuf,
        /// condition, generation, yield or selectivity (defaults to the task of --config).
        #[arg(long)]
        schema: Option<String>,
    },
    /// Train a model; writes a checkpoint directory with metric history.
    Train {
        #[arg(value_name = "CONFIG")]
        config_file: Option<PathBuf>,
    },
    /// Score a checkpoint on a split of its dataset.
    Evaluate {
        checkpoint: PathBuf,
        /// train, valid or test.
        #[arg(value_name = "SPLIT")]
        which: String,
        /// Evaluate on this CSV instead of the configured dataset.
        #[arg(long)]
        data: Option<String>,
    },
    /// Ranked conditions or a scalar prediction for one mapped reaction.
    Predict { checkpoint: PathBuf, reaction: String },
    /// Per-atom attention weights as CSV plus an SVG heat-map.
    Explain { checkpoint: PathBuf, reaction: String },
    /// Export per-layer node embeddings for reactions listed one per line.
    Embed { checkpoint: PathBuf, reactions: PathBuf },
    /// Finite-difference check of every differentiable operator.
    Gradcheck {
        #[arg(long, default_value_t = 10)]
        trials: u64,
    },
    /// Write a synthetic dataset in one of the ingest layouts.
    Synth {
        path: PathBuf,
        #[arg(long)]
        schema: String,
        #[arg(long, default_value_t = 200)]
        count: usize,
    },
}

struct CliError {
    category: &'static str,
    message: String,
    code: u8,
}

impl From<RalignError> for CliError {
    fn from(e: RalignError) -> Self {
        CliError {
            category: e.category(),
            message: e.to_string(),
            code: e.exit_code() as u8,
        }
    }
}

macro_rules! via_ralign {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                RalignError::from(e).into()
            }
        }
    )*};
}
via_ralign!(std::io::Error, serde_json::Error, ralign_data::DataError, chem::ChemError, ndiff::TensorError);

fn usage(msg: impl Into<String>) -> CliError {
    RalignError::Config(msg.into()).into()
}

type Res<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.category, "message": e.message }));
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: &Cli) -> Res<()> {
    match &cli.cmd {
        Cmd::Preprocess { input, output, schema } => preprocess(cli, input, output, schema.as_deref()),
        Cmd::Train { config_file } => train(cli, config_file.as_ref().or(cli.config.as_ref())),
        Cmd::Evaluate { checkpoint, which, data } => evaluate_cmd(cli, checkpoint, which, data.as_deref()),
        Cmd::Predict { checkpoint, reaction } => predict(cli, checkpoint, reaction),
        Cmd::Explain { checkpoint, reaction } => explain(cli, checkpoint, reaction),
        Cmd::Embed { checkpoint, reactions } => embed(cli, checkpoint, reactions),
        Cmd::Gradcheck { trials } => gradcheck(cli, *trials),
        Cmd::Synth { path, schema, count } => synth(cli, path, schema, *count),
    }
}

fn read_config(path: &Path) -> Res<TrainConfig> {
    Ok(TrainConfig::parse(&fs::read_to_string(path)?)?)
}

fn parse_schema(name: &str) -> Res<Schema> {
    Schema::parse(name).ok_or_else(|| usage(format!("unknown schema {name:?}")))
}

fn print_json(v: &serde_json::Value) -> Res<()> {
    let text = serde_json::to_string_pretty(v)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn write_quarantine_file(path: &Path, ing: &Ingested) -> Res<()> {
    write_quarantine(fs::File::create(path)?, &ing.quarantine)?;
    Ok(())
}

// preprocess

fn preprocess(cli: &Cli, input: &Path, output: &Path, schema: Option<&str>) -> Res<()> {
    let schema = match (schema, &cli.config) {
        (Some(s), _) => parse_schema(s)?,
        (None, Some(c)) => read_config(c)?.task.schema(),
        (None, None) => return Err(usage("preprocess needs --schema or --config")),
    };
    let ing = ingest(input, schema)?;
    fs::create_dir_all(output)?;
    let mut w = csv::Writer::from_path(output.join("dataset.csv")).map_err(ralign_data::DataError::from)?;
    let mut header: Vec<&str> = match schema {
        Schema::Condition => vec!["mapped_rxn", "catalyst1", "solvent1", "solvent2", "reagent1", "reagent2"],
        Schema::Generation => vec!["mapped_rxn", "reagents"],
        Schema::Yield => vec!["mapped_rxn", "conditions", "yield"],
        Schema::Selectivity => vec!["mapped_rxn", "conditions", "ddg", "ratio", "temperature"],
    };
    header.extend(["reaction_key", "reaction_center_atoms", "split"]);
    w.write_record(&header).map_err(ralign_data::DataError::from)?;
    for row in &ing.rows {
        let mut rec = vec![row.reaction.clone()];
        let conditions = row.aligned.condition_text.clone().unwrap_or_default();
        match &row.target {
            Target::Slots(s) => rec.extend(s.iter().map(|x| x.clone().unwrap_or_default())),
            Target::Reagents(r) => rec.push(r.join(".")),
            Target::Yield(y) => rec.extend([conditions, y.to_string()]),
            Target::Selectivity(s) => rec.extend([conditions, s.ddg.to_string(), s.ratio.to_string(), s.temperature.to_string()]),
        }
        rec.push(reaction_key(&row.aligned));
        rec.push(row.aligned.rc.len().to_string());
        rec.push(row.split.clone().unwrap_or_default());
        w.write_record(&rec).map_err(ralign_data::DataError::from)?;
    }
    w.flush()?;
    write_quarantine_file(&output.join("quarantine.jsonl"), &ing)?;
    print_json(&json!({
        "schema": schema.name(),
        "accepted": ing.rows.len(),
        "quarantined": ing.quarantine.len(),
        "dataset": output.join("dataset.csv"),
        "quarantine": output.join("quarantine.jsonl"),
    }))
}

// train

fn default_ks(k: Option<usize>) -> Vec<usize> {
    let k = k.unwrap_or(10).max(1);
    let mut ks: Vec<usize> = [1, 3, 5, 10].into_iter().filter(|&x| x < k).collect();
    ks.push(k);
    ks
}

fn train(cli: &Cli, config: Option<&PathBuf>) -> Res<()> {
    let path = config.ok_or_else(|| usage("train needs a configuration file"))?;
    let mut cfg = read_config(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(s) = &cli.split {
        cfg.split = s.clone();
    }
    cfg.validate()?;
    let root = data_root();
    let (part, ing) = load_partition(&cfg, root.as_deref())?;
    log::info!(
        "{} rows ({} quarantined): train {}, valid {}, test {}",
        ing.total(),
        ing.quarantine.len(),
        part.train.len(),
        part.valid.len(),
        part.test.len()
    );
    let out = train_task(&part.train, &part.valid, &cfg)?;
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(cfg.task.name()));
    checkpoint::save(&dir, &out.model, &out.history)?;
    fs::write(dir.join("history.json"), serde_json::to_string_pretty(&out.history)?)?;
    write_quarantine_file(&dir.join("quarantine.jsonl"), &ing)?;
    let ks = default_ks(cli.k);
    let mut metrics = serde_json::Map::new();
    for (name, rows) in [("valid", &part.valid), ("test", &part.test)] {
        if !rows.is_empty() {
            metrics.insert(name.into(), serde_json::to_value(evaluate(&out.model, rows, &ks)?)?);
        }
    }
    fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(&metrics)?)?;
    print_json(&json!({
        "checkpoint": dir,
        "task": cfg.task.name(),
        "params": out.model.param_count(),
        "epochs": out.history.len(),
        "best_epoch": out.best_epoch,
        "quarantined": ing.quarantine.len(),
        "metrics": metrics,
    }))
}

// evaluate

fn report_table(report: &EvalReport) -> String {
    let mut s = String::new();
    match report {
        EvalReport::Topk(r) => {
            s.push_str(&format!("{:<10}", "k"));
            for k in &r.ks {
                s.push_str(&format!("{:>9}", format!("top-{k}")));
            }
            s.push('\n');
            let mut line = |name: &str, v: &[f64]| {
                s.push_str(&format!("{name:<10}"));
                for x in v {
                    s.push_str(&format!("{:>8.2}%", 100.0 * x));
                }
                s.push('\n');
            };
            line("overall", &r.overall);
            for (c, v) in &r.components {
                line(&format!("{c:?}").to_lowercase(), v);
            }
        }
        EvalReport::Regression(m) => {
            s.push_str(&format!("n     {}\nMAE   {:.4}\nRMSE  {:.4}\nR2    {:.4}\n", m.n, m.mae, m.rmse, m.r2));
        }
    }
    s
}

fn evaluate_cmd(cli: &Cli, ck: &Path, split: &str, data: Option<&str>) -> Res<()> {
    let which = Split::parse(split).ok_or_else(|| usage(format!("unknown split {split:?}")))?;
    let (model, _) = checkpoint::load(ck)?;
    let mut cfg = model.cfg.clone();
    if let Some(d) = data {
        cfg.data = Some(d.to_string());
    }
    if let Some(s) = &cli.split {
        cfg.split = s.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let (part, _) = load_partition(&cfg, data_root().as_deref())?;
    let rows = part.get(which);
    if rows.is_empty() {
        return Err(RalignError::Data(ralign_data::DataError::Split(format!("{split} split is empty"))).into());
    }
    let report = evaluate(&model, rows, &default_ks(cli.k))?;
    print!("{}", report_table(&report));
    let out = cli.out.clone().unwrap_or_else(|| ck.join(format!("eval_{}.json", which.name())));
    fs::write(&out, serde_json::to_string_pretty(&json!({ "split": which.name(), "rows": rows.len(), "report": report }))?)?;
    println!("report written to {}", out.display());
    Ok(())
}

// predict / explain / embed

fn query(model: &Model, reaction: &str) -> Res<DatasetRow> {
    let schema = model.cfg.task.schema();
    let aligned = align_query(reaction, schema)?;
    let target = match model.cfg.task {
        Task::ConditionPredict => Target::Slots(Default::default()),
        Task::ConditionGenerate => Target::Reagents(Vec::new()),
        Task::Yield | Task::Selectivity => Target::Yield(f64::NAN),
    };
    Ok(DatasetRow {
        line: 1,
        reaction: reaction.to_string(),
        aligned,
        target,
        split: None,
    })
}

fn predict(cli: &Cli, ck: &Path, reaction: &str) -> Res<()> {
    let (model, _) = checkpoint::load(ck)?;
    let row = query(&model, reaction)?;
    let k = cli.k.unwrap_or(5).max(1);
    let v = match predict_row(&model, &row, k)? {
        Prediction::Ranked(list) => json!({
            "task": model.cfg.task.name(),
            "predictions": list.iter().enumerate().map(|(i, r)| json!({
                "rank": i + 1,
                "score": r.score,
                "molecules": r.molecules.iter().map(|m| m.clone().unwrap_or_else(|| "NONE".into())).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        }),
        Prediction::Value(x) => {
            let unit = if model.cfg.task == Task::Yield { "percent" } else { "kcal/mol" };
            json!({ "task": model.cfg.task.name(), "value": x, "unit": unit })
        }
    };
    print_json(&v)
}

struct AtomRef {
    side: &'static str,
    index: usize,
    element: &'static str,
    rc: bool,
}

fn atom_refs(row: &DatasetRow) -> Vec<AtomRef> {
    let a = &row.aligned;
    let mut out = Vec::new();
    for (side, mol, flags) in [("reactant", &a.reactant, &a.rc.reactant), ("product", &a.product, &a.rc.product)] {
        for i in 0..mol.num_atoms() {
            out.push(AtomRef {
                side,
                index: i,
                element: mol.atom(i).symbol(),
                rc: flags[i],
            });
        }
    }
    out
}

fn head_kind(model: &Model, h: usize) -> &'static str {
    if model.cfg.vanilla_xattn || h < ralign::attention::normal_heads(model.cfg.heads) {
        "normal"
    } else {
        "rc"
    }
}

fn query_labels(model: &Model, trace: &Trace, queries: usize) -> Vec<String> {
    match (&model.head, &model.vocab) {
        (Head::Seq(_), Some(v)) => (0..queries)
            .map(|q| trace.tokens.get(q).map_or("?".to_string(), |&t| v.token(t).to_string()))
            .collect(),
        _ => vec!["pooled".to_string(); queries],
    }
}

/// Mean weight per atom over the last layer's queries and the heads of one kind.
fn panel_weights(model: &Model, trace: &Trace, kind: &str) -> Option<Vec<f64>> {
    let layer = trace.attention.last()?;
    let heads: Vec<_> = layer.iter().enumerate().filter(|(h, _)| head_kind(model, *h) == kind).map(|(_, w)| w).collect();
    if heads.is_empty() {
        return None;
    }
    let cols = heads[0].cols();
    let mut acc = vec![0.0; cols];
    let mut count = 0.0;
    for w in heads {
        for q in 0..w.rows() {
            for (a, x) in acc.iter_mut().zip(w.row_slice(q)) {
                *a += x;
            }
            count += 1.0;
        }
    }
    Some(acc.into_iter().map(|a| a / count).collect())
}

fn explain(cli: &Cli, ck: &Path, reaction: &str) -> Res<()> {
    let (model, _) = checkpoint::load(ck)?;
    let row = query(&model, reaction)?;
    let x = ReactionInput::new(&row.aligned)?;
    let trace = model.trace(&x)?;
    let atoms = atom_refs(&row);
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("explain"));
    fs::create_dir_all(&dir)?;

    let mut w = csv::Writer::from_path(dir.join("attention.csv")).map_err(ralign_data::DataError::from)?;
    w.write_record(["layer", "head", "head_kind", "query", "query_label", "side", "atom", "element", "rc", "weight"])
        .map_err(ralign_data::DataError::from)?;
    for (l, layer) in trace.attention.iter().enumerate() {
        for (h, wt) in layer.iter().enumerate() {
            let labels = query_labels(&model, &trace, wt.rows());
            for q in 0..wt.rows() {
                for (k, a) in atoms.iter().enumerate() {
                    w.write_record([
                        l.to_string(),
                        h.to_string(),
                        head_kind(&model, h).to_string(),
                        q.to_string(),
                        labels[q].clone(),
                        a.side.to_string(),
                        a.index.to_string(),
                        a.element.to_string(),
                        u8::from(a.rc).to_string(),
                        format!("{:.6e}", wt.get(q, k)),
                    ])
                    .map_err(ralign_data::DataError::from)?;
                }
            }
        }
    }
    w.flush()?;

    let normal = panel_weights(&model, &trace, "normal");
    let restricted = panel_weights(&model, &trace, "rc");
    let panels = [
        figure::Panel {
            title: "normal heads (last layer, mean over queries)".into(),
            weights: normal.as_deref(),
        },
        figure::Panel {
            title: "reaction-center heads (last layer, mean over queries)".into(),
            weights: restricted.as_deref(),
        },
    ];
    let svg = figure::heatmap_svg(&row.aligned.reactant, &row.aligned.product, &x.rc, &panels, cli.seed.unwrap_or(0));
    fs::write(dir.join("heatmap.svg"), svg)?;
    let prediction = match (&model.vocab, trace.value) {
        (_, Some(v)) => json!(v),
        (Some(v), None) => json!(trace.tokens.iter().map(|&t| v.token(t)).collect::<Vec<_>>()),
        (None, None) => json!(null),
    };
    print_json(&json!({
        "attention": dir.join("attention.csv"),
        "heatmap": dir.join("heatmap.svg"),
        "prediction": prediction,
        "reaction_center_atoms": x.rc.iter().filter(|&&b| b).count(),
    }))
}

fn embed(cli: &Cli, ck: &Path, reactions: &Path) -> Res<()> {
    let (model, _) = checkpoint::load(ck)?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("embeddings.csv"));
    let mut w = csv::Writer::from_path(&out).map_err(ralign_data::DataError::from)?;
    let d = model.cfg.hidden;
    let mut header: Vec<String> = ["reaction", "layer", "side", "atom", "element", "rc"].map(String::from).to_vec();
    header.extend((0..d).map(|i| format!("e{i}")));
    w.write_record(&header).map_err(ralign_data::DataError::from)?;
    let mut count = 0;
    for (r, line) in fs::read_to_string(reactions)?.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).enumerate() {
        let row = query(&model, line)?;
        let trace = model.trace(&ReactionInput::new(&row.aligned)?)?;
        let atoms = atom_refs(&row);
        for (l, (hr, hp)) in trace.layers.iter().enumerate() {
            for a in &atoms {
                let t = if a.side == "reactant" { hr } else { hp };
                let mut rec = vec![r.to_string(), (l + 1).to_string(), a.side.to_string(), a.index.to_string(), a.element.to_string(), u8::from(a.rc).to_string()];
                rec.extend(t.row_slice(a.index).iter().map(|v| format!("{v:.6e}")));
                w.write_record(&rec).map_err(ralign_data::DataError::from)?;
            }
        }
        count += 1;
    }
    w.flush()?;
    print_json(&json!({ "reactions": count, "layers": model.cfg.layers, "dim": d, "out": out }))
}

// gradcheck / synth

fn gradcheck(cli: &Cli, trials: u64) -> Res<()> {
    const LIMIT: f64 = 1e-4;
    let reports = ndiff::gradcheck::op_suite(trials, cli.seed.unwrap_or(0x5eed))?;
    let mut worst = 0.0f64;
    let mut stdout = std::io::stdout().lock();
    for r in &reports {
        writeln!(stdout, "{:<22} {:.3e}", r.op, r.max_rel_err)?;
        worst = worst.max(r.max_rel_err);
    }
    writeln!(stdout, "max relative error {worst:.3e} (limit {LIMIT:e})")?;
    if worst < LIMIT {
        Ok(())
    } else {
        Err(RalignError::Tensor(ndiff::TensorError::Invalid {
            op: "gradcheck",
            detail: format!("gradient error {worst:e} exceeds {LIMIT:e}"),
        }).into())
    }
}

fn synth(cli: &Cli, path: &Path, schema: &str, count: usize) -> Res<()> {
    let schema = parse_schema(schema)?;
    let seed = cli.seed.unwrap_or(0);
    let reactions = chem::synth::generate(count, seed);
    let mut buf = Vec::new();
    ralign_data::synth::write_csv(&mut buf, &reactions, schema)?;
    if let Some(spec) = &cli.split {
        // Append a split column so `split = column` configs work directly.
        let rows = ralign_data::ingest_reader(buf.as_slice(), schema)?.rows;
        let tags = ralign_data::make_splits(&rows, &parse_split(spec, seed, None)?)?;
        let text = String::from_utf8(buf).expect("csv output is utf-8");
        let mut out = String::new();
        for (i, line) in text.lines().enumerate() {
            out.push_str(line);
            out.push(',');
            out.push_str(if i == 0 { "split" } else { tags[i - 1].name() });
            out.push('\n');
        }
        buf = out.into_bytes();
    }
    fs::write(path, &buf)?;
    print_json(&json!({ "path": path, "schema": schema.name(), "rows": count, "seed": seed }))
}

//! Acceptance criteria C1-C7. Run with `cargo test -p ralign-validation --test acceptance`.

#[path = "../../chem/tests/oracle/mod.rs"]
mod rc_oracle;
#[path = "../../data/tests/topk_oracle/mod.rs"]
mod topk_oracle;

use std::time::Instant;

use chem::tokenize_smiles;
use ndiff::gradcheck::{check_params, op_suite};
use ndiff::{Tape, Tensor, TensorError};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ralign::attention::normal_heads;
use ralign::beam::{beam_search, exhaustive, log_softmax, StepScorer};
use ralign::checkpoint;
use ralign::dataset::{parse_split, partition};
use ralign::eval::{evaluate, grouped_references, predict_row, EvalReport};
use ralign::model::Model;
use ralign::nn::{Ctx, Ffn};
use ralign::train::{prepare, train_task_with};
use ralign::vocab::Vocab;
use ralign::{train_task, Control, RalignError, ReactionInput, Task, TrainConfig};
use ralign_data::synth::synthetic_rows;
use ralign_data::{ingest, DatasetRow, MajorityBaseline, Schema, TopkReport};
use ralign_validation::{dataset, verdict, Outcome, Suite};

const HOUR: f64 = 3600.0;

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn tensor_err(e: RalignError) -> TensorError {
    match e {
        RalignError::Tensor(t) => t,
        other => panic!("{other}"),
    }
}

fn tiny(task: Task, d: usize) -> TrainConfig {
    let mut cfg = TrainConfig::preset(task.name()).unwrap();
    cfg.hidden = d;
    cfg.layers = 2;
    cfg.dec_layers = 1;
    cfg.heads = 2;
    cfg.cond_layers = 1;
    cfg.dropout = 0.0;
    cfg
}

// C1

fn model_gradcheck(task: Task, schema: Schema) -> Result<f64, String> {
    let rows = synthetic_rows(schema, 3, 31).map_err(e2s)?;
    let vocab = task.is_sequence().then(|| Vocab::build(rows.iter().flat_map(|r| ralign::vocab::target_tokens(&r.target).unwrap())));
    let model = Model::new(&tiny(task, 8), vocab).map_err(e2s)?;
    let examples = prepare(&model, &rows).map_err(e2s)?;
    let mut worst = 0.0f64;
    for ex in &examples {
        let err = check_params(&model.store, 1e-5, Some(4), 3, |t, s| {
            let m = Model {
                store: s.clone(),
                ..model.clone()
            };
            m.loss(t, &ex.input, &ex.target, &Ctx::eval()).map_err(tensor_err)
        })
        .map_err(e2s)?;
        worst = worst.max(err);
    }
    Ok(worst)
}

fn c1() -> Outcome {
    let start = Instant::now();
    let reports = op_suite(10, 0x5eed).map_err(e2s)?;
    let (op, op_err) = reports
        .iter()
        .map(|r| (r.op, r.max_rel_err))
        .fold(("", 0.0f64), |a, b| if b.1 > a.1 { b } else { a });
    let pooled = model_gradcheck(Task::Yield, Schema::Yield)?;
    let seq = model_gradcheck(Task::ConditionPredict, Schema::Condition)?;
    let secs = start.elapsed().as_secs_f64();
    verdict(
        op_err < 1e-3 && pooled < 1e-3 && seq < 1e-3 && secs < 120.0,
        format!(
            "{} ops worst {op} {op_err:.1e}; 2-block encoder+pooled head {pooled:.1e}; encoder+decoder {seq:.1e}; {secs:.1}s (limits 1e-3, 120s)",
            reports.len()
        ),
    )
}

// C2

fn c2() -> Outcome {
    let reactions = rc_oracle::corpus().len();
    let checks = rc_oracle::check_corpus(9)?;
    let cases = topk_oracle::check_cases(1000, 17)?;
    verdict(
        reactions >= 200 && cases == 1000,
        format!("reaction centers agree on {reactions} reactions ({checks} checks incl. shuffled atoms); top-k agrees on {cases} cases"),
    )
}

// C3

fn restricted_mass() -> Result<String, String> {
    let mut checked = 0;
    for (task, schema) in [(Task::Yield, Schema::Yield), (Task::ConditionPredict, Schema::Condition)] {
        let rows = synthetic_rows(schema, 12, 5).map_err(e2s)?;
        let mut cfg = tiny(task, 16);
        cfg.heads = 4;
        cfg.max_len = 6;
        let model = ralign::train::init_model(&cfg, &rows).map_err(e2s)?;
        for r in &rows {
            let x = ReactionInput::new(&r.aligned).map_err(e2s)?;
            let trace = model.trace(&x).map_err(e2s)?;
            for layer in &trace.attention {
                for (h, w) in layer.iter().enumerate() {
                    for q in 0..w.rows() {
                        let row = w.row_slice(q);
                        let sum: f64 = row.iter().sum();
                        if (sum - 1.0).abs() > 1e-12 {
                            return Err(format!("weights sum to {sum}"));
                        }
                        if h >= normal_heads(cfg.heads) {
                            for (k, &on) in x.rc.iter().enumerate() {
                                if !on && row[k] != 0.0 {
                                    return Err(format!("head {h} puts {} on non-center key {k}", row[k]));
                                }
                            }
                        }
                        checked += 1;
                    }
                }
            }
        }
    }
    Ok(format!("zero mass on {checked} restricted/normal attention rows"))
}

fn zeroed_adapter() -> Result<String, String> {
    let rows = synthetic_rows(Schema::Yield, 10, 6).map_err(e2s)?;
    let mut model = Model::new(&tiny(Task::Yield, 16), None).map_err(e2s)?;
    let ids: Vec<_> = model
        .store
        .iter()
        .filter(|(_, n, _)| n.contains(".attn_") && n.ends_with(".wv"))
        .map(|(id, _, t)| (id, t.rows(), t.cols()))
        .collect();
    for (id, r, c) in ids {
        model.store.set(id, Tensor::zeros(r, c)).map_err(e2s)?;
    }
    for r in &rows {
        let with = ReactionInput::new(&r.aligned).map_err(e2s)?;
        if with.conditions.is_empty() {
            return Err("synthetic row without conditions".into());
        }
        let mut without = with.clone();
        without.conditions.clear();
        let t = Tape::new();
        let (a, _) = model.encode(&t, &with, &Ctx::eval()).map_err(e2s)?;
        let (b, _) = model.encode(&t, &without, &Ctx::eval()).map_err(e2s)?;
        if a.value().data() != b.value().data() {
            return Err("zeroed adapter changed encoder output".into());
        }
    }
    Ok(format!("bit-equal on {} reactions", rows.len()))
}

fn equivariance() -> Result<String, String> {
    let rows = synthetic_rows(Schema::Yield, 16, 8).map_err(e2s)?;
    let model = Model::new(&tiny(Task::Yield, 16), None).map_err(e2s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for r in &rows {
        let a = &r.aligned;
        let (n, m) = (a.reactant.num_atoms(), a.pair_count());
        let mut pi: Vec<usize> = (0..m).collect();
        pi.shuffle(&mut rng);
        let mut order = pi.clone();
        let mut leave: Vec<usize> = (m..n).collect();
        leave.shuffle(&mut rng);
        order.extend(leave);
        let b = a.permute(&order, &pi).map_err(e2s)?;
        let ta = model.trace(&ReactionInput::new(a).map_err(e2s)?).map_err(e2s)?;
        let tb = model.trace(&ReactionInput::new(&b).map_err(e2s)?).map_err(e2s)?;
        for ((ra, pa), (rb, pb)) in ta.layers.iter().zip(&tb.layers) {
            for (k, &s) in order.iter().enumerate() {
                for (x, y) in rb.row_slice(k).iter().zip(ra.row_slice(s)) {
                    worst = worst.max((x - y).abs());
                }
                if k < m {
                    for (x, y) in pb.row_slice(k).iter().zip(pa.row_slice(s)) {
                        worst = worst.max((x - y).abs());
                    }
                }
            }
        }
        worst = worst.max((ta.value.unwrap() - tb.value.unwrap()).abs());
    }
    if worst < 1e-9 {
        Ok(format!("max deviation {worst:.1e} over {} reactions", rows.len()))
    } else {
        Err(format!("max deviation {worst:.1e} exceeds 1e-9"))
    }
}

fn tokenizer_round_trip() -> Result<String, String> {
    let mut corpus: Vec<String> = include_str!("../../chem/tests/data/smiles.txt")
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect();
    for r in chem::synth::generate(200, 3) {
        corpus.push(r.reaction.clone());
        corpus.extend(r.conditions.iter().flatten().cloned());
    }
    for s in &corpus {
        let toks = tokenize_smiles(s).map_err(|e| format!("{s}: {e}"))?;
        if toks.concat() != *s {
            return Err(format!("{s} does not round-trip"));
        }
    }
    Ok(format!("{} strings", corpus.len()))
}

fn checkpoint_round_trip() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(e2s)?;
    let mut compared = 0;
    for (task, schema) in [(Task::Yield, Schema::Yield), (Task::ConditionPredict, Schema::Condition)] {
        let rows = synthetic_rows(schema, 10, 12).map_err(e2s)?;
        let mut cfg = tiny(task, 16);
        cfg.epochs = 1;
        cfg.beam = 3;
        let out = train_task(&rows, &[], &cfg).map_err(e2s)?;
        let path = dir.path().join(task.name());
        checkpoint::save(&path, &out.model, &out.history).map_err(e2s)?;
        let (loaded, _) = checkpoint::load(&path).map_err(e2s)?;
        for (a, b) in out.model.store.iter().zip(loaded.store.iter()) {
            let bits = |t: &Tensor| t.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            if a.1 != b.1 || bits(a.2) != bits(b.2) {
                return Err(format!("tensor {} differs after reload", a.1));
            }
        }
        for r in &rows {
            if predict_row(&out.model, r, 3).map_err(e2s)? != predict_row(&loaded, r, 3).map_err(e2s)? {
                return Err("prediction differs after reload".into());
            }
            compared += 1;
        }
    }
    Ok(format!("tensors bit-exact, {compared} predictions identical"))
}

fn c3() -> Outcome {
    let parts = [
        ("restricted heads", restricted_mass()),
        ("zeroed adapter", zeroed_adapter()),
        ("permutation", equivariance()),
        ("tokenizer", tokenizer_round_trip()),
        ("checkpoint", checkpoint_round_trip()),
    ];
    let ok = parts.iter().all(|(_, r)| r.is_ok());
    let detail = parts
        .iter()
        .map(|(name, r)| match r {
            Ok(d) => format!("{name} ok ({d})"),
            Err(d) => format!("{name} FAILED ({d})"),
        })
        .collect::<Vec<_>>()
        .join("; ");
    verdict(ok, detail)
}

// C4, C5

fn regression_on_dataset(file: &str, preset: &str, min_r2: f64, max_mae: f64) -> Outcome {
    let path = dataset(file)?;
    let start = Instant::now();
    let mut cfg = TrainConfig::preset(preset).unwrap();
    cfg.split = "random:0.7:0.1:0.2".into();
    let ing = ingest(&path, cfg.task.schema()).map_err(e2s)?;
    let spec = parse_split(&cfg.split, cfg.seed, None).map_err(e2s)?;
    let part = partition(ing.rows, &spec).map_err(e2s)?;
    let out = train_task(&part.train, &part.valid, &cfg).map_err(e2s)?;
    let EvalReport::Regression(m) = evaluate(&out.model, &part.test, &[1]).map_err(e2s)? else {
        return Err("regression report expected".into());
    };
    let secs = start.elapsed().as_secs_f64();
    verdict(
        m.r2 >= min_r2 && m.mae <= max_mae && secs <= 3.0 * HOUR,
        format!(
            "test n={} R2 {:.4} (>= {min_r2}) MAE {:.4} (<= {max_mae}); {} quarantined; best epoch {}; {:.0}s",
            m.n,
            m.r2,
            m.mae,
            ing.quarantine.len(),
            out.best_epoch,
            secs
        ),
    )
}

fn c4() -> Outcome {
    regression_on_dataset("buchwald_hartwig.csv", "yield", 0.90, 6.0)
}

fn c5() -> Outcome {
    regression_on_dataset("ch_functionalization.csv", "selectivity", 0.93, 0.7)
}

// C6

fn c6a() -> Outcome {
    let rows = synthetic_rows(Schema::Condition, 50, 2024).map_err(e2s)?;
    let mut cfg = TrainConfig::preset("condition").unwrap();
    cfg.hidden = 32;
    cfg.layers = 2;
    cfg.dec_layers = 2;
    cfg.heads = 4;
    cfg.dropout = 0.0;
    cfg.lr = 1e-3;
    cfg.warmup_epochs = 1;
    cfg.gamma = 1.0;
    cfg.batch_size = 10;
    cfg.epochs = 300;
    cfg.beam = 1;
    let top1 = |model: &Model| -> Result<f64, String> {
        match evaluate(model, &rows, &[1]).map_err(e2s)? {
            EvalReport::Topk(r) => Ok(r.overall[0]),
            _ => Err("top-k report expected".into()),
        }
    };
    let mut probe_err = None;
    let out = train_task_with(&rows, &[], &cfg, |model, rec| {
        if rec.epoch % 10 == 0 {
            match top1(model) {
                Ok(acc) if acc >= 0.95 => return Control::Stop,
                Ok(_) => {}
                Err(e) => probe_err = Some(e),
            }
        }
        Control::Continue
    })
    .map_err(e2s)?;
    if let Some(e) = probe_err {
        return Err(e);
    }
    let acc = top1(&out.model)?;
    let epochs = out.history.len();
    verdict(
        acc >= 0.95 && epochs <= 300,
        format!("train top-1 {:.1}% after {epochs} epochs (>= 95% within 300)", 100.0 * acc),
    )
}

fn c6b() -> Outcome {
    let path = dataset("uspto_condition_20k.csv")?;
    let mut cfg = TrainConfig::preset("condition").unwrap();
    cfg.hidden = 128;
    cfg.layers = 3;
    cfg.dec_layers = 3;
    cfg.epochs = 20;
    let ing = ingest(&path, Schema::Condition).map_err(e2s)?;
    let has_column = ing.rows.iter().all(|r| r.split.is_some());
    let split = if has_column { "column" } else { "random:0.8:0.1:0.1" };
    let part = partition(ing.rows, &parse_split(split, cfg.seed, None).map_err(e2s)?).map_err(e2s)?;
    let out = train_task(&part.train, &part.valid, &cfg).map_err(e2s)?;
    let ks = [1, 3, 5, 10];
    let EvalReport::Topk(model) = evaluate(&out.model, &part.test, &ks).map_err(e2s)? else {
        return Err("top-k report expected".into());
    };
    let combos: Vec<_> = part.train.iter().filter_map(|r| r.target.combo()).collect();
    let baseline = MajorityBaseline::fit(&combos);
    let refs = grouped_references(&part.test);
    let preds = vec![baseline.predict(10); part.test.len()];
    let base = TopkReport::compute(&preds, &refs, &ks).map_err(e2s)?;
    let monotone = model.overall.windows(2).all(|w| w[0] <= w[1]);
    verdict(
        model.overall[0] >= 2.0 * base.overall[0] && monotone,
        format!(
            "model top-k {:?} vs majority {:?} on {} test reactions",
            model.overall,
            base.overall,
            part.test.len()
        ),
    )
}

fn train_briefly(cfg: &TrainConfig, rows: &[DatasetRow]) -> Result<usize, String> {
    let out = train_task(rows, &rows[..4], cfg).map_err(e2s)?;
    if out.history.len() != cfg.epochs || out.history.iter().any(|h| !h.train_loss.is_finite()) {
        return Err("training did not complete".into());
    }
    evaluate(&out.model, &rows[..4], &[1]).map_err(e2s)?;
    Ok(out.model.param_count())
}

fn c6c() -> Outcome {
    let mut lines = Vec::new();
    for (task, schema) in [(Task::ConditionPredict, Schema::Condition), (Task::Yield, Schema::Yield)] {
        let rows = synthetic_rows(schema, 16, 9).map_err(e2s)?;
        let mut cfg = tiny(task, 16);
        cfg.layers = 3;
        cfg.epochs = 2;
        cfg.beam = 2;
        let d = cfg.hidden;
        let base = train_briefly(&cfg, &rows)?;
        let mut nf = cfg.clone();
        nf.no_fusion = true;
        let no_fusion = train_briefly(&nf, &rows)?;
        let mut va = cfg.clone();
        va.vanilla_xattn = true;
        let vanilla = train_briefly(&va, &rows)?;
        let per_block = Ffn::param_count(2 * d, 2 * d, 2 * d) - 2 * Ffn::param_count(d, d, d);
        let expect = cfg.layers * per_block;
        if base - no_fusion != expect || per_block != 4 * d * d || vanilla != base {
            return Err(format!(
                "{}: base {base}, no_fusion {no_fusion} (expected -{expect}), vanilla {vanilla}",
                task.name()
            ));
        }
        lines.push(format!("{}: {base} params, no_fusion -{expect} (L*4d^2), vanilla_xattn +0", task.name()));
    }
    Ok(lines.join("; "))
}

// C7

struct Toy {
    vocab: usize,
    seed: u64,
}

impl StepScorer for Toy {
    fn log_probs(&self, prefix: &[usize]) -> ralign::Result<Vec<f64>> {
        let mut h = self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xcbf2_9ce4_8422_2325;
        for &t in prefix {
            h = (h ^ (t as u64 + 1)).wrapping_mul(0x100_0000_01b3);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(h);
        let logits: Vec<f64> = (0..self.vocab).map(|_| rng.gen_range(-3.0..3.0)).collect();
        Ok(log_softmax(&logits))
    }
}

fn c7() -> Outcome {
    let mut cases = 0;
    let mut ranks = 0;
    for vocab in 2..=4 {
        for max_len in 1..=4 {
            for seed in 0..25 {
                let toy = Toy { vocab, seed };
                let eos = seed as usize % vocab;
                let all = exhaustive(&toy, eos, max_len).map_err(e2s)?;
                let got = beam_search(&toy, eos, all.len(), max_len, all.len()).map_err(e2s)?;
                if got.len() != all.len() || got.iter().zip(&all).any(|(a, b)| a.tokens != b.tokens) {
                    return Err(format!("|V|={vocab} L={max_len} seed {seed}: rankings differ"));
                }
                cases += 1;
                ranks += all.len();
            }
        }
    }
    Ok(format!("{cases} toy problems, {ranks} ranked sequences, 100% rank agreement"))
}

fn main() {
    let mut suite = Suite::new();
    suite.run("C1", "finite-difference gradients", c1);
    suite.run("C2", "oracle equivalence", c2);
    suite.run("C3", "exact invariants", c3);
    suite.run("C4", "Buchwald-Hartwig yield", c4);
    suite.run("C5", "C-H functionalization selectivity", c5);
    suite.run("C6a", "50-sample condition overfit", c6a);
    suite.run("C6b", "USPTO 20k subsample vs majority baseline", c6b);
    suite.run("C6c", "ablation flags", c6c);
    suite.run("C7", "beam search vs exhaustive enumeration", c7);
    std::process::exit(suite.finish());
}

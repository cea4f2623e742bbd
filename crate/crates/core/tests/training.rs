mod common;

use std::fs;

use common::small_cfg;
use ralign::checkpoint::{load, save};
use ralign::eval::{evaluate, predict_row, EvalReport};
use ralign::train::{lr_schedule, train_task_with};
use ralign::{train_task, Control, RalignError, Task};
use ralign_data::synth::synthetic_rows;
use ralign_data::Schema;

#[test]
fn schedule_warms_up_then_decays_per_epoch() {
    let mut cfg = small_cfg(Task::Yield);
    cfg.lr = 1e-3;
    cfg.warmup_epochs = 2;
    cfg.gamma = 0.5;
    let spe = 4;
    let lr = |s| lr_schedule(s, spe, &cfg);
    assert_eq!(lr(0), 0.0);
    assert!((lr(2) - 0.25e-3).abs() < 1e-18);
    assert!((lr(4) - 0.5e-3).abs() < 1e-18);
    assert_eq!(lr(8), 1e-3);
    assert_eq!(lr(11), 1e-3);
    assert_eq!(lr(12), 0.5e-3);
    assert_eq!(lr(17), 0.25e-3);
}

#[test]
fn training_is_deterministic() {
    let rows = synthetic_rows(Schema::Yield, 12, 1).unwrap();
    let mut cfg = small_cfg(Task::Yield);
    cfg.epochs = 3;
    cfg.batch_size = 4;
    cfg.dropout = 0.1;
    let a = train_task(&rows, &[], &cfg).unwrap();
    let b = train_task(&rows, &[], &cfg).unwrap();
    assert_eq!(a.history, b.history);
    let pa: Vec<_> = a.model.store.iter().map(|(_, _, t)| t.data().to_vec()).collect();
    let pb: Vec<_> = b.model.store.iter().map(|(_, _, t)| t.data().to_vec()).collect();
    assert_eq!(pa, pb);
}

#[test]
fn yield_model_overfits_a_small_set() {
    let rows = synthetic_rows(Schema::Yield, 16, 4).unwrap();
    let mut cfg = small_cfg(Task::Yield);
    cfg.lr = 3e-3;
    cfg.warmup_epochs = 1;
    cfg.gamma = 1.0;
    cfg.batch_size = 4;
    cfg.epochs = 400;
    let mut last_mae = f64::INFINITY;
    let out = train_task_with(&rows, &[], &cfg, |model, rec| {
        if rec.epoch % 20 == 0 {
            if let Ok(EvalReport::Regression(m)) = evaluate(model, &rows, &[1]) {
                last_mae = m.mae;
                if m.mae < 1.0 {
                    return Control::Stop;
                }
            }
        }
        Control::Continue
    })
    .unwrap();
    let EvalReport::Regression(m) = evaluate(&out.model, &rows, &[1]).unwrap() else {
        panic!("regression report expected");
    };
    assert!(m.mae < 1.0, "train MAE {} (last probe {last_mae})", m.mae);
}

#[test]
fn condition_training_lowers_loss() {
    let rows = synthetic_rows(Schema::Condition, 20, 3).unwrap();
    let mut cfg = small_cfg(Task::ConditionPredict);
    cfg.epochs = 15;
    cfg.lr = 2e-3;
    cfg.warmup_epochs = 1;
    cfg.batch_size = 5;
    cfg.beam = 3;
    let out = train_task(&rows, &rows[..5], &cfg).unwrap();
    let first = out.history.first().unwrap().train_loss;
    let last = out.history.last().unwrap().train_loss;
    assert!(last < 0.7 * first, "{first} -> {last}");
    let EvalReport::Topk(report) = evaluate(&out.model, &rows[..5], &[1, 3]).unwrap() else {
        panic!("top-k report expected");
    };
    assert!(report.overall[0] <= report.overall[1]);
    assert_eq!(report.components.len(), 3);
}

#[test]
fn task_and_target_must_agree() {
    let rows = synthetic_rows(Schema::Yield, 4, 0).unwrap();
    let err = train_task(&rows, &[], &small_cfg(Task::ConditionPredict)).err().unwrap();
    assert!(matches!(err, RalignError::Config(_)));
}

#[test]
fn checkpoint_round_trip_reproduces_predictions() {
    let dir = tempfile::tempdir().unwrap();
    for (task, schema) in [(Task::Yield, Schema::Yield), (Task::ConditionGenerate, Schema::Generation)] {
        let rows = synthetic_rows(schema, 10, 7).unwrap();
        let mut cfg = small_cfg(task);
        cfg.epochs = 2;
        cfg.max_len = 24;
        cfg.beam = 2;
        let out = train_task(&rows, &[], &cfg).unwrap();
        let path = dir.path().join(task.name());
        save(&path, &out.model, &out.history).unwrap();
        let (loaded, manifest) = load(&path).unwrap();
        assert_eq!(manifest.history, out.history);
        assert_eq!(loaded.cfg, out.model.cfg);
        assert_eq!(loaded.scaler, out.model.scaler);
        for (a, b) in out.model.store.iter().zip(loaded.store.iter()) {
            assert_eq!(a.1, b.1);
            assert_eq!(a.2.data(), b.2.data());
        }
        for r in &rows {
            assert_eq!(predict_row(&out.model, r, 2).unwrap(), predict_row(&loaded, r, 2).unwrap());
        }
    }
}

#[test]
fn corrupted_checkpoints_are_rejected() {
    let rows = synthetic_rows(Schema::Yield, 4, 1).unwrap();
    let mut cfg = small_cfg(Task::Yield);
    cfg.epochs = 1;
    let out = train_task(&rows, &[], &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck");
    save(&path, &out.model, &out.history).unwrap();
    let tensors = path.join("tensors.bin");
    let manifest = path.join("manifest.json");
    let good = fs::read(&tensors).unwrap();
    let good_manifest = fs::read_to_string(&manifest).unwrap();
    let is_checkpoint_err = |r: ralign::Result<_>| matches!(r.map(|_| ()), Err(RalignError::Checkpoint(_)));

    let mut flipped = good.clone();
    flipped[100] ^= 1;
    fs::write(&tensors, &flipped).unwrap();
    assert!(is_checkpoint_err(load(&path)));

    fs::write(&tensors, &good[..good.len() - 8]).unwrap();
    assert!(is_checkpoint_err(load(&path)));

    fs::write(&tensors, &good).unwrap();
    fs::write(&manifest, good_manifest.replace("\"version\": 1", "\"version\": 2")).unwrap();
    assert!(is_checkpoint_err(load(&path)));

    fs::write(&manifest, &good_manifest).unwrap();
    assert!(load(&path).is_ok());
}

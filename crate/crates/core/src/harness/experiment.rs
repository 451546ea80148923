use std::collections::BTreeSet;

use super::report::{Aggregate, EvalReport, SubjectRow};
use super::{evaluate, train, TrainConfig};
use crate::data::{loocv_split, LabeledSample};
use crate::error::{arg_err, config_err, contract_err, Error, Result};
use crate::model::{make_ablation, Stiln, Variant};

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce5_e4b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Leave-one-subject-out training and evaluation. Every fold starts from
/// the same seeded initialisation (checked by checksum) and its own
/// seeded batch order.
pub fn run_loocv(samples: &[LabeledSample], cfg: &TrainConfig, top_k: usize) -> Result<EvalReport> {
    cfg.validate()?;
    let subjects: Vec<u32> = samples
        .iter()
        .map(|s| s.subject_id)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let plan = loocv_split(&subjects)?;
    plan.validate()?;

    let fresh = || Stiln::new(cfg.model.clone(), cfg.seed);
    let reference = fresh()?;
    let init_checksum = reference.params().checksum();
    let param_count = reference.param_count();
    drop(reference);

    let mut rows = Vec::with_capacity(plan.folds.len());
    for fold in &plan.folds {
        let model = fresh()?;
        if model.params().checksum() != init_checksum {
            return contract_err(format!(
                "fold {} did not start from the seeded initialisation",
                fold.test_subject
            ));
        }
        let (train_set, test_set): (Vec<LabeledSample>, Vec<LabeledSample>) = samples
            .iter()
            .filter(|s| {
                s.subject_id == fold.test_subject || fold.train_subjects.contains(&s.subject_id)
            })
            .cloned()
            .partition(|s| s.subject_id != fold.test_subject);
        if train_set.iter().any(|s| s.subject_id == fold.test_subject) || test_set.is_empty() {
            return contract_err(format!(
                "fold {} leaks or has no test data",
                fold.test_subject
            ));
        }
        let outcome = train(
            model,
            &train_set,
            cfg,
            splitmix(cfg.seed ^ splitmix(fold.test_subject as u64)),
        )?;
        let mut model = outcome.model;
        let m = evaluate(&mut model, &test_set)?;
        log::info!(
            "{} fold s{:02}: acc {:.4} f1 {:.4} ({} train, {} test)",
            cfg.model.variant,
            fold.test_subject,
            m.acc,
            m.f1,
            train_set.len(),
            test_set.len()
        );
        rows.push(SubjectRow {
            subject: fold.test_subject,
            acc: m.acc,
            f1: m.f1,
            confusion: m.confusion,
            n_train: train_set.len(),
            final_loss: outcome.losses.last().copied().unwrap_or(f32::NAN),
        });
    }
    Ok(EvalReport {
        tag: cfg.model.variant.name().to_string(),
        variant: cfg.model.variant,
        task: cfg.task,
        summary: Aggregate::from_rows(&rows, top_k)?,
        per_subject: rows,
        split_hash: plan.hash(),
        param_count,
        init_checksum,
        config: cfg.clone(),
    })
}

/// A one-dimensional hyperparameter grid.
#[derive(Clone, Debug, PartialEq)]
pub enum SweepGrid {
    LstmHidden(Vec<usize>),
    Lr(Vec<f64>),
}

impl SweepGrid {
    pub fn hidden() -> Self {
        SweepGrid::LstmHidden(vec![16, 32, 64, 128, 256])
    }

    pub fn lr() -> Self {
        SweepGrid::Lr(vec![0.0001, 0.0005, 0.001])
    }

    /// `hidden` or `lr`.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "hidden" => Ok(Self::hidden()),
            "lr" => Ok(Self::lr()),
            other => config_err(format!("unknown grid {other:?}, expected hidden or lr")),
        }
    }

    fn points(&self, base: &TrainConfig) -> Vec<(String, TrainConfig)> {
        match self {
            SweepGrid::LstmHidden(hs) => hs
                .iter()
                .map(|&h| {
                    let mut c = base.clone();
                    c.model.lstm_hidden = h;
                    (h.to_string(), c)
                })
                .collect(),
            SweepGrid::Lr(lrs) => lrs
                .iter()
                .map(|&lr| (lr.to_string(), TrainConfig { lr, ..base.clone() }))
                .collect(),
        }
    }
}

/// One LOOCV report per grid point, every other setting held fixed.
pub fn run_sweep(
    samples: &[LabeledSample],
    base: &TrainConfig,
    grid: &SweepGrid,
    top_k: usize,
) -> Result<Vec<EvalReport>> {
    let points = grid.points(base);
    if points.is_empty() {
        return arg_err("empty sweep grid");
    }
    points
        .into_iter()
        .map(|(tag, cfg)| {
            let mut r = run_loocv(samples, &cfg, top_k)?;
            r.tag = tag;
            Ok(r)
        })
        .collect()
}

/// One LOOCV report per structural variant on identical data, splits and
/// seeds.
pub fn run_ablation(
    samples: &[LabeledSample],
    base: &TrainConfig,
    variants: &[Variant],
    top_k: usize,
) -> Result<Vec<EvalReport>> {
    if variants.is_empty() {
        return arg_err("no variants to run");
    }
    let mut reports = Vec::with_capacity(variants.len());
    for &v in variants {
        let cfg = TrainConfig {
            model: make_ablation(v, &base.model)?,
            ..base.clone()
        };
        let r = run_loocv(samples, &cfg, top_k)?;
        log::info!("{v}: {} parameters", r.param_count);
        if let Some(first) = reports.first().map(|f: &EvalReport| f.split_hash.clone()) {
            if r.split_hash != first {
                return contract_err(format!("{v} ran on a different split"));
            }
        }
        reports.push(r);
    }
    if let Some(full) = reports.iter().find(|r| r.variant == Variant::Net0) {
        for r in reports
            .iter()
            .filter(|r| matches!(r.variant, Variant::Net1 | Variant::Net4 | Variant::Net5))
        {
            if r.param_count >= full.param_count {
                return Err(Error::Contract(format!(
                    "{} has {} parameters, not fewer than NET0's {}",
                    r.variant, r.param_count, full.param_count
                )));
            }
        }
    }
    Ok(reports)
}

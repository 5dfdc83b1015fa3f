//! Transductive full-graph training, early stopping and prediction.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_params, epoch_dropout, init_params, is_first_layer, labelled, trace, ForwardOptions};
use super::{ModelConfig, ModelInputs, PqGcnParams};
use crate::eval::{macro_prf, MetricsReport};
use crate::graphs::GraphBundle;
use crate::nn::io::fmt_real;
use crate::nn::{AdamConfig, AdamState, Parameter, Tape, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_macro_f1: f64,
    /// Accuracy on the rows the loss is fitted to, in evaluation mode.
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub wall_clock_secs: f64,
    /// Metrics of the kept parameters on labelled test questions, if any.
    pub test_metrics: Option<MetricsReport>,
}

impl TrainReport {
    pub fn epochs_run(&self) -> usize {
        self.epochs.len()
    }

    /// Per-epoch rows. Wall-clock time is left out so reruns compare equal.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("epoch\ttrain_loss\tval_loss\tval_macro_f1\ttrain_accuracy\n");
        for e in &self.epochs {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                e.epoch,
                fmt_real(e.train_loss),
                fmt_real(e.val_loss),
                fmt_real(e.val_macro_f1),
                fmt_real(e.train_accuracy)
            );
        }
        out
    }
}

type Rows = Vec<(usize, usize)>;

/// Split labelled train rows into fitted rows and a seeded validation set.
fn carve_validation(rows: &[usize], labels: &[usize], config: &ModelConfig) -> (Rows, Rows) {
    let mut pairs: Vec<(usize, usize)> = rows.iter().copied().zip(labels.iter().copied()).collect();
    let n_val = ((pairs.len() as f64) * config.validation_fraction).floor() as usize;
    let n_val = n_val.min(pairs.len().saturating_sub(1));
    pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed ^ 0x5_EED0_FA11));
    let mut val = pairs.split_off(pairs.len() - n_val);
    pairs.sort_unstable();
    val.sort_unstable();
    (pairs, val)
}

fn mean_ce(logits: &Tensor, rows: &[(usize, usize)]) -> f64 {
    let total: f64 = rows
        .iter()
        .map(|&(r, y)| {
            let row = logits.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() - row[y]
        })
        .sum();
    total / rows.len() as f64
}

/// Index of the largest entry; ties go to the lowest index.
pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn eval_logits(inputs: &ModelInputs, config: &ModelConfig, values: &[Tensor]) -> Result<Tensor> {
    let mut tape = Tape::new();
    let t = trace(&mut tape, inputs, config, values, &ForwardOptions::default())?;
    Ok(tape.value(t.logits)?.clone())
}

fn metrics_on(logits: &Tensor, rows: &[(usize, usize)], num_classes: usize) -> Result<MetricsReport> {
    let gold: Vec<usize> = rows.iter().map(|r| r.1).collect();
    let pred: Vec<usize> = rows.iter().map(|r| argmax(logits.row(r.0))).collect();
    macro_prf(&gold, &pred, num_classes)
}

/// Train from a fresh seeded initialization.
///
/// The loss is cross entropy over labelled train questions minus a
/// validation carve-out; training stops after `patience` epochs without a
/// lower validation loss (measured on the fitted rows when the carve-out is
/// empty), and the parameters of the best epoch are returned.
pub fn train(bundle: &GraphBundle, config: &ModelConfig) -> Result<(PqGcnParams, TrainReport)> {
    let started = Instant::now();
    let inputs = ModelInputs::new(bundle, config)?;
    let (rows, labels) = labelled(bundle, &bundle.train_ids());
    if rows.is_empty() {
        return Err(Error::Validation("no labelled training questions".into()));
    }
    let (fit, val) = carve_validation(&rows, &labels, config);
    let mut present = vec![false; inputs.num_classes];
    fit.iter().for_each(|&(_, y)| present[y] = true);
    let missing: Vec<&str> = (0..inputs.num_classes)
        .filter(|&c| !present[c])
        .filter_map(|c| bundle.labels.name(c))
        .collect();
    if !missing.is_empty() {
        log::warn!("classes absent from the fitted training rows: {}", missing.join(", "));
    }
    let (fit_rows, fit_labels): (Vec<usize>, Vec<usize>) = fit.iter().copied().unzip();

    let init = init_params(&inputs, config);
    let mut params: Vec<Parameter> = init
        .names
        .iter()
        .zip(init.values)
        .map(|(n, v)| Parameter::new(n.clone(), v))
        .collect();
    let adam = AdamConfig {
        lr: config.lr,
        ..AdamConfig::default()
    };
    let mut opt = AdamState::new(adam, &params);
    let mut best: Option<(f64, usize, Vec<Tensor>)> = None;
    let mut since_best = 0;
    let mut epochs = Vec::new();

    for epoch in 0..config.max_epochs {
        let values: Vec<Tensor> = params.iter().map(|p| p.value.clone()).collect();
        let opts = ForwardOptions {
            dropout: epoch_dropout(&inputs, config, epoch)?,
            frozen: None,
        };
        let mut tape = Tape::new();
        let t = trace(&mut tape, &inputs, config, &values, &opts)?;
        let loss = tape.masked_softmax_cross_entropy(t.logits, &fit_labels, &fit_rows)?;
        let train_loss = tape.value(loss)?.item();
        if !train_loss.is_finite() {
            return Err(Error::Model(format!(
                "non-finite training loss at epoch {} (last finite: {:?})",
                epoch + 1,
                epochs.last().map(|e: &EpochRecord| e.train_loss)
            )));
        }
        let grads = tape.backward(loss)?;
        for (p, &v) in params.iter_mut().zip(&t.params) {
            p.grad = grads.get_or_zeros(v, p.value.shape());
            if is_first_layer(&p.name) && config.weight_decay > 0.0 {
                p.add_weight_decay(config.weight_decay);
            }
        }
        opt.step(&mut params)?;

        let values: Vec<Tensor> = params.iter().map(|p| p.value.clone()).collect();
        let logits = eval_logits(&inputs, config, &values)?;
        let train_accuracy = metrics_on(&logits, &fit, inputs.num_classes)?.accuracy;
        // Without a carve-out the fitted rows stand in for validation.
        let monitored = if val.is_empty() { &fit } else { &val };
        let val_loss = mean_ce(&logits, monitored);
        let val_macro_f1 = metrics_on(&logits, monitored, inputs.num_classes)?.macro_f1;
        if !val_loss.is_finite() {
            return Err(Error::Model(format!("non-finite validation loss at epoch {}", epoch + 1)));
        }
        epochs.push(EpochRecord {
            epoch: epoch + 1,
            train_loss,
            val_loss,
            val_macro_f1,
            train_accuracy,
        });
        log::debug!(
            "epoch {} train_loss {train_loss:.6} val_loss {val_loss:.6} val_f1 {val_macro_f1:.4} train_acc {train_accuracy:.4}",
            epoch + 1
        );
        if best.as_ref().is_none_or(|b| val_loss < b.0) {
            best = Some((val_loss, epoch + 1, values));
            since_best = 0;
        } else {
            since_best += 1;
        }
        if since_best >= config.patience {
            break;
        }
    }

    let Some((_, best_epoch, values)) = best else {
        return Err(Error::Validation("max_epochs is 0, nothing was trained".into()));
    };
    let trained = PqGcnParams {
        names: params.into_iter().map(|p| p.name).collect(),
        values,
    };
    let (test_rows, test_labels) = labelled(bundle, &bundle.test_ids());
    let test_metrics = if test_rows.is_empty() {
        None
    } else {
        let logits = eval_logits(&inputs, config, &trained.values)?;
        let pairs: Vec<(usize, usize)> = test_rows.into_iter().zip(test_labels).collect();
        Some(metrics_on(&logits, &pairs, inputs.num_classes)?.with_class_names(bundle.labels.names()))
    };
    let report = TrainReport {
        best_epoch,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        epochs,
        test_metrics,
    };
    log::info!(
        "trained {} epochs, best epoch {} in {:.1}s",
        report.epochs_run(),
        report.best_epoch,
        report.wall_clock_secs
    );
    Ok((trained, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub ids: Vec<usize>,
    pub labels: Vec<usize>,
    /// One row per id, summing to 1.
    pub probabilities: Tensor,
}

/// Class probabilities and labels for the questions in `ids` (all test
/// questions when `None`), in evaluation mode.
pub fn predict(
    params: &PqGcnParams,
    params_hash: &str,
    bundle: &GraphBundle,
    config: &ModelConfig,
    ids: Option<&[usize]>,
) -> Result<Prediction> {
    if params_hash != bundle.config_hash {
        return Err(Error::Validation(format!(
            "config hash mismatch: checkpoint was trained on {params_hash}, bundle is {}",
            bundle.config_hash
        )));
    }
    let inputs = ModelInputs::new(bundle, config)?;
    check_params(&inputs, config, params)?;
    let logits = eval_logits(&inputs, config, &params.values)?;
    let probs = crate::nn::softmax_rows(&logits);
    let ids: Vec<usize> = match ids {
        Some(ids) => ids.to_vec(),
        None => bundle.test_ids(),
    };
    if let Some(bad) = ids.iter().find(|&&i| i >= inputs.num_questions) {
        return Err(Error::Validation(format!("question id {bad} outside the bundle")));
    }
    let rows: Vec<&[f64]> = ids.iter().map(|&i| probs.row(i)).collect();
    Ok(Prediction {
        labels: ids.iter().map(|&i| argmax(logits.row(i))).collect(),
        probabilities: if rows.is_empty() {
            Tensor::zeros(0, inputs.num_classes)
        } else {
            Tensor::from_rows(&rows)?
        },
        ids,
    })
}

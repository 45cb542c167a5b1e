//! Training with the combined cross-entropy and energy loss, classification
//! with signed energies and perturbation agreement, and TPR/TNR evaluation.
//!
//! The loss of one sample is
//!
//! ```text
//! loss = BCE(logit, y) + mean_E_f(y) - min(E_f(0), E_f(1))
//! ```
//!
//! where `mean_E_f(y)` averages the observer frequency at the true label
//! over the top-k IG perturbations (and, by default, the original), and
//! `E_f(0)`, `E_f(1)` are taken on the original embedding. The energy terms
//! depend only on the data and the discrete feature selection, so the
//! parameter gradient is that of the BCE term alone.

use std::fmt;
use std::io::Write;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::attribution::{
    averaged_perturbed_energy, integrated_gradients_of, perturb, AttributionTarget, AveragedEnergy,
    DEFAULT_TOP_K,
};
use crate::bessel::BesselZeroTable;
use crate::dataio::{require_both_labels, EmbeddingRecord, QueryRecord};
use crate::energy::{energy_report, EnergyReport, Label, MediumSpeed};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::metrics::{table_rows, MetricsSummary};
use crate::network::{
    bce_with_logit, sigmoid, Gradients, ModelParameters, OptimizerState, DEFAULT_LEARNING_RATE,
};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Features zeroed one at a time to build perturbations; 0 disables them.
    pub k_features: usize,
    /// Midpoint steps of the Integrated Gradients path integral.
    pub ig_steps: usize,
    /// Multiply the variance by the first zero of `J0` in the medium speed.
    pub medium_includes_fundamental: bool,
    pub include_original_in_energy_mean: bool,
    pub split_ratio: f64,
    /// Probability at or above which a sample is called human (label 1).
    pub threshold: f64,
    pub attribution_target: AttributionTarget,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 12,
            learning_rate: DEFAULT_LEARNING_RATE,
            batch_size: 64,
            seed: 0,
            k_features: DEFAULT_TOP_K,
            ig_steps: 64,
            medium_includes_fundamental: true,
            include_original_in_energy_mean: true,
            split_ratio: 0.8,
            threshold: 0.5,
            attribution_target: AttributionTarget::Probability,
        }
    }
}

impl TrainingConfig {
    pub fn medium(&self) -> MediumSpeed {
        if self.medium_includes_fundamental {
            MediumSpeed::ScaledByFundamental
        } else {
            MediumSpeed::VarianceOnly
        }
    }

    pub fn validate(&self, input_dim: usize) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.epochs == 0 || self.batch_size == 0 || self.ig_steps == 0 {
            return fail("epochs, batch size and IG steps must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if self.k_features > input_dim {
            return fail(format!(
                "cannot select {} features from {input_dim}-dimensional embeddings",
                self.k_features
            ));
        }
        if self.k_features == 0 && !self.include_original_in_energy_mean {
            return fail("with no perturbations the original must enter the energy mean".into());
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return fail(format!(
                "split ratio must lie in (0, 1), got {}",
                self.split_ratio
            ));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return fail(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            ));
        }
        Ok(())
    }
}

/// Energy side of one sample's loss.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleEnergy {
    pub report: EnergyReport,
    pub averaged: AveragedEnergy,
    pub selected_features: Vec<usize>,
}

impl SampleEnergy {
    /// `mean_E_f(y) - min(E_f(0), E_f(1))`.
    pub fn energy_term(&self) -> f64 {
        self.averaged.mean - self.report.min_observer_frequency()
    }
}

fn top_features(params: &ModelParameters, x: &[f64], cfg: &TrainingConfig) -> Result<Vec<usize>> {
    if cfg.k_features == 0 {
        return Ok(Vec::new());
    }
    integrated_gradients_of(params, x, cfg.ig_steps, cfg.attribution_target)?.top_k(cfg.k_features)
}

pub fn sample_energy(
    params: &ModelParameters,
    x: &[f64],
    label: Label,
    cfg: &TrainingConfig,
    table: &BesselZeroTable,
) -> Result<SampleEnergy> {
    let report = energy_report(x, table, cfg.medium())?;
    let selected_features = top_features(params, x, cfg)?;
    let set = perturb(x, &selected_features)?;
    let averaged = averaged_perturbed_energy(
        &set,
        x,
        label,
        table,
        cfg.medium(),
        cfg.include_original_in_energy_mean,
    )?;
    Ok(SampleEnergy {
        report,
        averaged,
        selected_features,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleLoss {
    pub loss: f64,
    pub bce: f64,
    pub energy: SampleEnergy,
}

/// Loss of one sample and the gradient of its BCE term.
pub fn sample_loss(
    params: &ModelParameters,
    x: &[f64],
    label: Label,
    cfg: &TrainingConfig,
    table: &BesselZeroTable,
) -> Result<(SampleLoss, Gradients)> {
    let energy = sample_energy(params, x, label, cfg, table)?;
    let fwd = params.forward(x)?;
    let y = label.as_f64();
    let bce = bce_with_logit(fwd.logit, y);
    let grads = params.backward_params(&fwd.trace, fwd.probability - y)?;
    Ok((
        SampleLoss {
            loss: bce + energy.energy_term(),
            bce,
            energy,
        },
        grads,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Mean averaged energy of samples whose true label is 0.
    pub mean_energy_label0: f64,
    pub mean_energy_label1: f64,
    pub skipped: usize,
}

impl fmt::Display for EpochLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epoch={} mean_loss={} mean_energy_label0={} mean_energy_label1={} skipped={}",
            self.epoch,
            self.mean_loss,
            self.mean_energy_label0,
            self.mean_energy_label1,
            self.skipped
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
}

impl fmt::Display for TrainingLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for epoch in &self.epochs {
            writeln!(f, "{epoch}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub params: ModelParameters,
    pub optimizer: OptimizerState,
    pub log: TrainingLog,
}

fn uniform_dim<'a>(embeddings: impl IntoIterator<Item = &'a [f64]>) -> Result<usize> {
    let mut dim = None;
    for e in embeddings {
        match dim {
            None => dim = Some(e.len()),
            Some(d) if d != e.len() => {
                return Err(Error::shape(format!("embeddings of length {d}"), e.len()))
            }
            Some(_) => {}
        }
    }
    match dim {
        Some(d) if d > 0 => Ok(d),
        _ => Err(Error::Config("dataset is empty".into())),
    }
}

fn is_skippable(err: &Error) -> bool {
    matches!(
        err,
        Error::DegenerateEmbedding { .. } | Error::SingularDenominator { .. }
    )
}

#[derive(Default)]
struct Mean {
    sum: f64,
    count: usize,
}

impl Mean {
    fn add(&mut self, v: f64) {
        self.sum += v;
        self.count += 1;
    }

    fn value(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.sum / self.count as f64
        }
    }
}

/// Trains a fresh model on all of `dataset`.
///
/// Mini-batches follow a seeded shuffle per epoch. The energy side of each
/// sample is computed with `exec`; results are reduced in batch order, so
/// the outcome does not depend on the execution strategy.
pub fn train(
    dataset: &[EmbeddingRecord],
    cfg: &TrainingConfig,
    exec: Execution,
) -> Result<TrainedModel> {
    let dim = uniform_dim(dataset.iter().map(|r| r.embedding.as_slice()))?;
    require_both_labels(dataset)?;
    cfg.validate(dim)?;
    let table = BesselZeroTable::build(dim)?;
    let mut params = ModelParameters::init(cfg.seed, dim)?;
    let mut optimizer = OptimizerState::new(&params, cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);

    let mut log = TrainingLog::default();
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss = Mean::default();
        let mut energy = [Mean::default(), Mean::default()];
        let mut skipped = 0;
        for batch in order.chunks(cfg.batch_size) {
            let energies = exec.map(batch, |&i| {
                let r = &dataset[i];
                sample_energy(&params, &r.embedding, r.label, cfg, &table)
            });
            let mut kept = Vec::with_capacity(batch.len());
            for (&i, result) in batch.iter().zip(energies) {
                match result {
                    Ok(e) => kept.push((i, e)),
                    Err(err) if is_skippable(&err) => {
                        log::warn!("skipping sample {}: {err}", dataset[i].id);
                        skipped += 1;
                    }
                    Err(err) => {
                        return Err(Error::Sample {
                            id: dataset[i].id.clone(),
                            source: Box::new(err),
                        })
                    }
                }
            }
            if kept.is_empty() {
                continue;
            }
            let xs = Array2::from_shape_fn((kept.len(), dim), |(row, col)| {
                dataset[kept[row].0].embedding[col]
            });
            let targets: Vec<f64> = kept
                .iter()
                .map(|(i, _)| dataset[*i].label.as_f64())
                .collect();
            let (_, bce, grads) = params.bce_batch(xs.view(), &targets)?;
            for ((i, e), bce) in kept.iter().zip(bce) {
                loss.add(bce + e.energy_term());
                let label = dataset[*i].label;
                energy[u8::from(label) as usize].add(e.averaged.mean);
            }
            optimizer.adam_step(&mut params, &grads)?;
        }
        if loss.count == 0 {
            return Err(Error::Config(format!(
                "every sample was skipped in epoch {epoch}; no usable training data"
            )));
        }
        let entry = EpochLog {
            epoch,
            mean_loss: loss.value(),
            mean_energy_label0: energy[0].value(),
            mean_energy_label1: energy[1].value(),
            skipped,
        };
        log::info!("{entry}");
        log.epochs.push(entry);
    }
    Ok(TrainedModel {
        params,
        optimizer,
        log,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationVerdict {
    pub predicted_label: Label,
    pub probability: f64,
    /// Observer frequency of the predicted label, negative for label 0.
    pub signed_energy: f64,
    /// Perturbations whose prediction matches `predicted_label`.
    pub agreement_count: usize,
    pub energy_report: EnergyReport,
}

pub fn classify(
    params: &ModelParameters,
    x: &[f64],
    cfg: &TrainingConfig,
    table: &BesselZeroTable,
) -> Result<ClassificationVerdict> {
    let fwd = params.forward(x)?;
    let predicted_label = Label::from_probability(fwd.probability, cfg.threshold);
    let energy_report = energy_report(x, table, cfg.medium())?;
    let magnitude = energy_report.observer_frequency(predicted_label);
    let signed_energy = match predicted_label {
        Label::Generated => -magnitude,
        Label::Human => magnitude,
    };

    let selected = top_features(params, x, cfg)?;
    let agreement_count = if selected.is_empty() {
        0
    } else {
        let set = perturb(x, &selected)?;
        let xs = Array2::from_shape_fn((set.len(), x.len()), |(row, col)| set.perturbed[row][col]);
        params
            .logits(xs.view())?
            .iter()
            .filter(|&&z| Label::from_probability(sigmoid(z), cfg.threshold) == predicted_label)
            .count()
    };
    Ok(ClassificationVerdict {
        predicted_label,
        probability: fwd.probability,
        signed_energy,
        agreement_count,
        energy_report,
    })
}

/// One row of the per-sample energy table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyRow {
    pub id: String,
    pub true_label: Label,
    pub predicted_label: Label,
    pub probability: f64,
    pub signed_energy: f64,
    pub agreement_count: usize,
}

/// Classification output for unlabelled input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionRow {
    pub id: String,
    pub predicted_label: Label,
    pub probability: f64,
    pub signed_energy: f64,
    pub agreement_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub metrics: MetricsSummary,
    /// In order of first appearance.
    pub per_domain: Vec<(String, MetricsSummary)>,
    pub rows: Vec<EnergyRow>,
}

impl Evaluation {
    /// Per-domain and combined TPR/TNR rows.
    pub fn table(&self) -> String {
        table_rows(
            self.per_domain.iter().map(|(d, m)| (d.as_str(), m)),
            &self.metrics,
        )
    }

    pub fn write_energy_csv<W: Write>(&self, out: W) -> Result<()> {
        write_csv(out, &self.rows)
    }
}

pub fn write_csv<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

fn check_dim(params: &ModelParameters, id: &str, len: usize) -> Result<()> {
    if len != params.input_dim() {
        return Err(Error::Sample {
            id: id.to_string(),
            source: Box::new(Error::shape(
                format!("embedding of length {}", params.input_dim()),
                len,
            )),
        });
    }
    Ok(())
}

fn classify_all<'a>(
    params: &ModelParameters,
    samples: &[(&'a str, &'a [f64])],
    cfg: &TrainingConfig,
    exec: Execution,
) -> Result<Vec<ClassificationVerdict>> {
    for (id, x) in samples {
        check_dim(params, id, x.len())?;
    }
    cfg.validate(params.input_dim())?;
    let table = BesselZeroTable::build(params.input_dim())?;
    exec.try_map(samples, |(id, x)| {
        classify(params, x, cfg, &table).map_err(|source| Error::Sample {
            id: id.to_string(),
            source: Box::new(source),
        })
    })
}

/// Classifies every record and tallies confusion counts with label 0 as the
/// positive class.
pub fn evaluate(
    params: &ModelParameters,
    dataset: &[EmbeddingRecord],
    cfg: &TrainingConfig,
    exec: Execution,
) -> Result<Evaluation> {
    if dataset.is_empty() {
        return Err(Error::Config("evaluation dataset is empty".into()));
    }
    let samples: Vec<(&str, &[f64])> = dataset
        .iter()
        .map(|r| (r.id.as_str(), r.embedding.as_slice()))
        .collect();
    let verdicts = classify_all(params, &samples, cfg, exec)?;

    let mut metrics = MetricsSummary::default();
    let mut per_domain: Vec<(String, MetricsSummary)> = Vec::new();
    let mut rows = Vec::with_capacity(dataset.len());
    for (record, verdict) in dataset.iter().zip(verdicts) {
        metrics.record(record.label, verdict.predicted_label);
        match per_domain.iter_mut().find(|(d, _)| *d == record.domain) {
            Some((_, m)) => m.record(record.label, verdict.predicted_label),
            None => {
                let mut m = MetricsSummary::default();
                m.record(record.label, verdict.predicted_label);
                per_domain.push((record.domain.clone(), m));
            }
        }
        rows.push(EnergyRow {
            id: record.id.clone(),
            true_label: record.label,
            predicted_label: verdict.predicted_label,
            probability: verdict.probability,
            signed_energy: verdict.signed_energy,
            agreement_count: verdict.agreement_count,
        });
    }
    Ok(Evaluation {
        metrics,
        per_domain,
        rows,
    })
}

pub fn predict(
    params: &ModelParameters,
    queries: &[QueryRecord],
    cfg: &TrainingConfig,
    exec: Execution,
) -> Result<Vec<PredictionRow>> {
    let samples: Vec<(&str, &[f64])> = queries
        .iter()
        .map(|q| (q.id.as_str(), q.embedding.as_slice()))
        .collect();
    let verdicts = classify_all(params, &samples, cfg, exec)?;
    Ok(queries
        .iter()
        .zip(verdicts)
        .map(|(q, v)| PredictionRow {
            id: q.id.clone(),
            predicted_label: v.predicted_label,
            probability: v.probability,
            signed_energy: v.signed_energy,
            agreement_count: v.agreement_count,
        })
        .collect())
}

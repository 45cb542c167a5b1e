//! Drumhead source frequency and Doppler observer frequency of an embedding.
//!
//! The observer frequency `E_f` is the energy of an `(embedding, label)`
//! pair:
//!
//! ```text
//! E_f(y) = (c + v_r) / (c - v_s) * E_f0
//! c   = var(V) * alpha_1      (medium speed)
//! v_r = 0.8                   (receiver velocity)
//! v_s = y * var(V)            (source velocity)
//! E_f0 = alpha_n / alpha_1,   n = number of distinct values of the shifted V
//! ```
//!
//! where `alpha_n` is the `n`-th zero of `J0` and `var` is the population
//! variance.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bessel::BesselZeroTable;
use crate::error::{Error, Result};

pub const RECEIVER_VELOCITY: f64 = 0.8;

/// Variances at or below this are treated as constant embeddings.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Ground-truth or predicted origin of a text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Label {
    /// Machine (ChatGPT) generated, label `0`.
    Generated,
    /// Human written, label `1`.
    Human,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Generated, Label::Human];

    pub fn as_f64(self) -> f64 {
        match self {
            Label::Generated => 0.0,
            Label::Human => 1.0,
        }
    }

    pub fn from_probability(probability: f64, threshold: f64) -> Self {
        if probability >= threshold {
            Label::Human
        } else {
            Label::Generated
        }
    }
}

impl From<Label> for u8 {
    fn from(label: Label) -> u8 {
        match label {
            Label::Generated => 0,
            Label::Human => 1,
        }
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(value: u8) -> std::result::Result<Self, String> {
        match value {
            0 => Ok(Label::Generated),
            1 => Ok(Label::Human),
            other => Err(format!("label must be 0 or 1, got {other}")),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", u8::from(*self))
    }
}

/// How the Doppler medium speed is derived from the embedding variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MediumSpeed {
    /// `c = var * alpha_1`.
    #[default]
    ScaledByFundamental,
    /// `c = var`. With this choice `c - v_s = 0` for label 1 and the
    /// observer frequency is singular.
    VarianceOnly,
}

/// A validated embedding vector with its sample identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    id: String,
    values: Vec<f64>,
}

impl Embedding {
    pub fn new(id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("embedding must have at least one coordinate"));
        }
        if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(bad));
        }
        Ok(Embedding {
            id: id.into(),
            values,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl AsRef<[f64]> for Embedding {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Energies of one embedding under both labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub source_frequency: f64,
    pub observer_frequency_label0: f64,
    pub observer_frequency_label1: f64,
    pub variance: f64,
    pub unique_count: usize,
    pub medium_speed: f64,
}

impl EnergyReport {
    pub fn observer_frequency(&self, label: Label) -> f64 {
        match label {
            Label::Generated => self.observer_frequency_label0,
            Label::Human => self.observer_frequency_label1,
        }
    }

    /// `min(E_f(0), E_f(1))`.
    pub fn min_observer_frequency(&self) -> f64 {
        self.observer_frequency_label0
            .min(self.observer_frequency_label1)
    }
}

/// Moves the values so that a negative minimum is added to every element,
/// or, when nothing is negative, the maximum is subtracted.
pub fn shift_embedding(values: &[f64]) -> Vec<f64> {
    let (min, max) = min_max(values);
    if min < 0.0 {
        values.iter().map(|v| v + min).collect()
    } else {
        values.iter().map(|v| v - max).collect()
    }
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

/// Number of distinct values under `==` (so `0.0` and `-0.0` coincide).
pub fn unique_count(values: &[f64]) -> usize {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    sorted.dedup_by(|a, b| a == b);
    sorted.len()
}

/// Population variance (divides by the length).
pub fn population_variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Frequency of drumhead mode `(0, n)` relative to the fundamental.
pub fn drumhead_frequency(n: usize, table: &BesselZeroTable) -> Result<f64> {
    Ok(table.zero(n)? / table.fundamental())
}

pub fn source_frequency(values: &[f64], table: &BesselZeroTable) -> Result<f64> {
    let modes = unique_count(&shift_embedding(values));
    drumhead_frequency(modes, table)
}

/// Everything but the source frequency, which is label independent.
struct Doppler {
    variance: f64,
    medium: f64,
}

impl Doppler {
    fn new(values: &[f64], medium: MediumSpeed, table: &BesselZeroTable) -> Result<Self> {
        let variance = population_variance(values);
        if variance <= VARIANCE_FLOOR {
            return Err(Error::DegenerateEmbedding { variance });
        }
        let medium = match medium {
            MediumSpeed::ScaledByFundamental => variance * table.fundamental(),
            MediumSpeed::VarianceOnly => variance,
        };
        Ok(Doppler { variance, medium })
    }

    fn shift(&self, label: Label, source: f64) -> Result<f64> {
        let source_velocity = label.as_f64() * self.variance;
        let denominator = self.medium - source_velocity;
        if denominator <= 0.0 {
            return Err(Error::SingularDenominator {
                medium: self.medium,
                source_velocity,
            });
        }
        Ok((self.medium + RECEIVER_VELOCITY) / denominator * source)
    }
}

/// Observer frequency `E_f(label)`.
pub fn observer_frequency(
    values: &[f64],
    label: Label,
    table: &BesselZeroTable,
    medium: MediumSpeed,
) -> Result<f64> {
    let doppler = Doppler::new(values, medium, table)?;
    doppler.shift(label, source_frequency(values, table)?)
}

pub fn energy_report(
    values: &[f64],
    table: &BesselZeroTable,
    medium: MediumSpeed,
) -> Result<EnergyReport> {
    let doppler = Doppler::new(values, medium, table)?;
    let unique_count = unique_count(&shift_embedding(values));
    let source = drumhead_frequency(unique_count, table)?;
    Ok(EnergyReport {
        source_frequency: source,
        observer_frequency_label0: doppler.shift(Label::Generated, source)?,
        observer_frequency_label1: doppler.shift(Label::Human, source)?,
        variance: doppler.variance,
        unique_count,
        medium_speed: doppler.medium,
    })
}

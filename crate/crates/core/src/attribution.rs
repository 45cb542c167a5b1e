//! Integrated Gradients with a zero baseline, selection of the most
//! influential features, and single-feature-zeroed perturbations.

use crate::bessel::BesselZeroTable;
use crate::energy::{observer_frequency, Label, MediumSpeed};
use crate::error::{Error, Result};
use crate::network::ModelParameters;

pub use crate::network::Output as AttributionTarget;

/// Number of features zeroed per sample unless configured otherwise.
pub const DEFAULT_TOP_K: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct AttributionResult {
    pub attributions: Vec<f64>,
    /// `|sum(attributions) - (F(x) - F(0))|`.
    pub completeness_gap: f64,
    pub steps: usize,
}

impl AttributionResult {
    pub fn top_k(&self, k: usize) -> Result<Vec<usize>> {
        top_k(&self.attributions, k)
    }
}

/// Integrated Gradients of the probability output.
pub fn integrated_gradients(
    params: &ModelParameters,
    x: &[f64],
    steps: usize,
) -> Result<AttributionResult> {
    integrated_gradients_of(params, x, steps, AttributionTarget::Probability)
}

/// `x_i * mean_t dF/dx_i(alpha_t x)` over the midpoints
/// `alpha_t = (t - 1/2) / steps`, baseline `0`.
pub fn integrated_gradients_of(
    params: &ModelParameters,
    x: &[f64],
    steps: usize,
    target: AttributionTarget,
) -> Result<AttributionResult> {
    if steps == 0 {
        return Err(Error::domain(
            "integrated gradients needs at least one step",
        ));
    }
    let alphas: Vec<f64> = (0..steps)
        .map(|t| (t as f64 + 0.5) / steps as f64)
        .collect();
    let mean_grad = params.mean_gradient_along_ray(x, &alphas, target)?;
    let attributions: Vec<f64> = x.iter().zip(&mean_grad).map(|(xi, g)| xi * g).collect();

    let zero = vec![0.0; x.len()];
    let at = |v: &[f64]| -> Result<f64> {
        let out = params.forward(v)?;
        Ok(match target {
            AttributionTarget::Probability => out.probability,
            AttributionTarget::Logit => out.logit,
        })
    };
    let delta = at(x)? - at(&zero)?;
    let completeness_gap = (attributions.iter().sum::<f64>() - delta).abs();
    Ok(AttributionResult {
        attributions,
        completeness_gap,
        steps,
    })
}

/// Indices of the `k` largest `|attribution|`, largest first; ties go to
/// the lower index.
pub fn top_k(attributions: &[f64], k: usize) -> Result<Vec<usize>> {
    if k > attributions.len() {
        return Err(Error::domain(format!(
            "cannot select {k} features out of {}",
            attributions.len()
        )));
    }
    let mut order: Vec<usize> = (0..attributions.len()).collect();
    order.sort_by(|&a, &b| {
        attributions[b]
            .abs()
            .total_cmp(&attributions[a].abs())
            .then(a.cmp(&b))
    });
    order.truncate(k);
    Ok(order)
}

/// Copies of an embedding, the `j`-th with `selected_indices[j]` zeroed.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSet {
    pub perturbed: Vec<Vec<f64>>,
    pub selected_indices: Vec<usize>,
}

impl PerturbationSet {
    pub fn len(&self) -> usize {
        self.perturbed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perturbed.is_empty()
    }
}

pub fn perturb(x: &[f64], indices: &[usize]) -> Result<PerturbationSet> {
    let mut seen = vec![false; x.len()];
    for &i in indices {
        if i >= x.len() {
            return Err(Error::domain(format!(
                "feature index {i} out of range for length {}",
                x.len()
            )));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::domain(format!("feature index {i} selected twice")));
        }
    }
    let perturbed = indices
        .iter()
        .map(|&i| {
            let mut copy = x.to_vec();
            copy[i] = 0.0;
            copy
        })
        .collect();
    Ok(PerturbationSet {
        perturbed,
        selected_indices: indices.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragedEnergy {
    pub mean: f64,
    /// Embeddings that entered the mean.
    pub used: usize,
    /// Perturbed embeddings dropped for having no variance.
    pub skipped: usize,
}

/// Mean observer frequency at `label` over the perturbed embeddings, plus
/// the original when `include_original` is set. Degenerate members are
/// skipped; it is an error only if nothing remains.
pub fn averaged_perturbed_energy(
    set: &PerturbationSet,
    original: &[f64],
    label: Label,
    table: &BesselZeroTable,
    medium: MediumSpeed,
    include_original: bool,
) -> Result<AveragedEnergy> {
    let mut sum = 0.0;
    let mut used = 0;
    let mut skipped = 0;
    let mut last_degenerate = None;
    let members = include_original
        .then_some(original)
        .into_iter()
        .chain(set.perturbed.iter().map(Vec::as_slice));
    for member in members {
        match observer_frequency(member, label, table, medium) {
            Ok(e) => {
                sum += e;
                used += 1;
            }
            Err(err @ Error::DegenerateEmbedding { .. }) => {
                skipped += 1;
                last_degenerate = Some(err);
            }
            Err(err) => return Err(err),
        }
    }
    if used == 0 {
        return Err(last_degenerate.unwrap_or(Error::DegenerateEmbedding { variance: 0.0 }));
    }
    Ok(AveragedEnergy {
        mean: sum / used as f64,
        used,
        skipped,
    })
}

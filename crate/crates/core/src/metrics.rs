//! Confusion counts with label 0 (machine generated) as the positive class.

use std::fmt::Write as _;

use crate::energy::Label;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MetricsSummary {
    pub true_positives: usize,
    pub true_negatives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl MetricsSummary {
    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Generated, Label::Generated) => self.true_positives += 1,
            (Label::Generated, Label::Human) => self.false_negatives += 1,
            (Label::Human, Label::Human) => self.true_negatives += 1,
            (Label::Human, Label::Generated) => self.false_positives += 1,
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let mut m = MetricsSummary::default();
        for (truth, predicted) in pairs {
            m.record(truth, predicted);
        }
        m
    }

    pub fn total(&self) -> usize {
        self.true_positives + self.true_negatives + self.false_positives + self.false_negatives
    }

    /// `TP / (TP + FN)`; `None` without any generated samples.
    pub fn tpr(&self) -> Option<f64> {
        ratio(
            self.true_positives,
            self.true_positives + self.false_negatives,
        )
    }

    /// `TN / (TN + FP)`; `None` without any human samples.
    pub fn tnr(&self) -> Option<f64> {
        ratio(
            self.true_negatives,
            self.true_negatives + self.false_positives,
        )
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.true_positives + self.true_negatives, self.total())
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn percent(rate: Option<f64>) -> String {
    rate.map_or_else(|| "n/a".to_string(), |r| format!("{:.1}", 100.0 * r))
}

fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// One `name & samples & TPR & TNR \\` row per dataset followed by the
/// combined row, rates in percent.
pub fn table_rows<'a>(
    per_domain: impl IntoIterator<Item = (&'a str, &'a MetricsSummary)>,
    combined: &MetricsSummary,
) -> String {
    let mut out = String::from("Dataset & Samples & TPR & TNR \\\\\n");
    let row = |out: &mut String, name: &str, m: &MetricsSummary| {
        let _ = writeln!(
            out,
            "{name} & {} & {} & {} \\\\",
            thousands(m.total()),
            percent(m.tpr()),
            percent(m.tnr())
        );
    };
    for (name, m) in per_domain {
        row(&mut out, name, m);
    }
    row(&mut out, "Combined", combined);
    out
}

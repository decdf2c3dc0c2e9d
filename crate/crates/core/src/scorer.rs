//! Semantic precision/recall/F1 over predicate senses and argument arcs.
//!
//! Scored items are one sense item per predicate and one item per non-NULL
//! argument cell. A sense item is labeled-correct when the predicted sense
//! string equals the gold one (after trimming) and always unlabeled-correct,
//! since predicates are given. An argument item is labeled-correct when the
//! (predicate, position, label) triple matches gold and unlabeled-correct when
//! the (predicate, position) pair does.
//!
//! All scores are percentages. A ratio with a zero denominator scores 0.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::conll::{Corpus, Sentence};
use crate::{Error, Result};

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub correct: usize,
    pub predicted: usize,
    pub gold: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(correct: usize, predicted: usize, gold: usize) -> Self {
        let precision = ratio(correct, predicted);
        let recall = ratio(correct, gold);
        Prf {
            correct,
            predicted,
            gold,
            precision,
            recall,
            f1: harmonic(precision, recall),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub language: String,
    pub predicates: usize,
    pub labeled: Prf,
    pub unlabeled: Prf,
    /// Argument labels only; senses are not broken down.
    pub per_label: BTreeMap<String, Prf>,
    /// Fraction of predicates whose sense is correct, in [0, 1].
    pub sense_accuracy: f64,
}

#[derive(Default)]
struct Counts {
    labeled: usize,
    unlabeled: usize,
    predicted: usize,
    gold: usize,
    senses_correct: usize,
    predicates: usize,
    per_label: BTreeMap<String, (usize, usize, usize)>,
}

fn check_aligned(index: usize, gold: &Sentence, pred: &Sentence) -> Result<()> {
    let diverge = |what: &str| {
        Err(Error::Score(format!(
            "gold and predicted corpora diverge at sentence {}: {}",
            index + 1,
            what
        )))
    };
    if gold.len() != pred.len() {
        return diverge(&format!("{} vs {} tokens", gold.len(), pred.len()));
    }
    if let Some(t) = gold.forms().zip(pred.forms()).position(|(a, b)| a != b) {
        return diverge(&format!("token {} differs", t + 1));
    }
    if gold.predicate_positions() != pred.predicate_positions() {
        return diverge("predicate positions differ");
    }
    Ok(())
}

pub fn score(gold: &Corpus, pred: &Corpus) -> Result<EvalReport> {
    if gold.language != pred.language {
        return Err(Error::Score(format!(
            "language mismatch: gold {:?}, predicted {:?}",
            gold.language, pred.language
        )));
    }
    if gold.sentences.len() != pred.sentences.len() {
        let first = gold.sentences.len().min(pred.sentences.len());
        return Err(Error::Score(format!(
            "gold has {} sentences, predicted {}; first unmatched sentence is {}",
            gold.sentences.len(),
            pred.sentences.len(),
            first + 1
        )));
    }

    let mut c = Counts::default();
    for (i, (gs, ps)) in gold.sentences.iter().zip(&pred.sentences).enumerate() {
        check_aligned(i, gs, ps)?;
        for (k, &p) in gs.predicate_positions().iter().enumerate() {
            c.predicates += 1;
            c.gold += 1;
            c.predicted += 1;
            c.unlabeled += 1;
            let g_sense = gs.tokens[p].pred_sense.as_deref().unwrap_or("").trim();
            let p_sense = ps.tokens[p].pred_sense.as_deref().unwrap_or("").trim();
            if g_sense == p_sense {
                c.labeled += 1;
                c.senses_correct += 1;
            }

            for (gt, pt) in gs.tokens.iter().zip(&ps.tokens) {
                let g = gt.apreds[k].as_deref();
                let q = pt.apreds[k].as_deref();
                if let Some(l) = g {
                    c.gold += 1;
                    c.per_label.entry(l.to_string()).or_default().0 += 1;
                }
                if let Some(l) = q {
                    c.predicted += 1;
                    c.per_label.entry(l.to_string()).or_default().1 += 1;
                }
                if let (Some(a), Some(b)) = (g, q) {
                    c.unlabeled += 1;
                    if a == b {
                        c.labeled += 1;
                        c.per_label.entry(a.to_string()).or_default().2 += 1;
                    }
                }
            }
        }
    }

    Ok(EvalReport {
        language: gold.language.clone(),
        predicates: c.predicates,
        labeled: Prf::from_counts(c.labeled, c.predicted, c.gold),
        unlabeled: Prf::from_counts(c.unlabeled, c.predicted, c.gold),
        per_label: c
            .per_label
            .into_iter()
            .map(|(l, (g, p, ok))| (l, Prf::from_counts(ok, p, g)))
            .collect(),
        sense_accuracy: if c.predicates == 0 {
            0.0
        } else {
            c.senses_correct as f64 / c.predicates as f64
        },
    })
}

/// Labels ordered by gold count, most frequent first, ties by name.
fn labels_by_frequency(report: &EvalReport) -> Vec<&str> {
    let mut labels: Vec<&str> = report.per_label.keys().map(String::as_str).collect();
    labels.sort_by(|a, b| {
        report.per_label[*b]
            .gold
            .cmp(&report.per_label[*a].gold)
            .then(a.cmp(b))
    });
    labels
}

impl EvalReport {
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "language: {}  predicates: {}", self.language, self.predicates);
        for (name, m) in [("labeled", &self.labeled), ("unlabeled", &self.unlabeled)] {
            let _ = writeln!(
                out,
                "{:<10} P {:6.2}  R {:6.2}  F1 {:6.2}",
                name, m.precision, m.recall, m.f1
            );
        }
        let _ = writeln!(out, "sense accuracy: {:.2}", 100.0 * self.sense_accuracy);
        out
    }

    pub fn overall_csv(&self) -> String {
        let mut out = String::from("language,metric,precision,recall,f1\n");
        for (name, m) in [("labeled", &self.labeled), ("unlabeled", &self.unlabeled)] {
            let _ = writeln!(
                out,
                "{},{},{:.2},{:.2},{:.2}",
                self.language, name, m.precision, m.recall, m.f1
            );
        }
        out
    }
}

pub const PER_LABEL_HEADER: &str = "label,gold_count,precision,recall,f1";

/// Per-argument-label rows, most frequent gold label first.
pub fn per_label_table(report: &EvalReport) -> String {
    let mut out = format!("{}\n", PER_LABEL_HEADER);
    for label in labels_by_frequency(report) {
        let m = &report.per_label[label];
        let _ = writeln!(
            out,
            "{},{},{:.2},{:.2},{:.2}",
            label, m.gold, m.precision, m.recall, m.f1
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub name: String,
    pub gold_count: usize,
    pub f1_a: f64,
    pub f1_b: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub language: String,
    /// Overall labeled and unlabeled rows first, then labels by gold count in A.
    pub rows: Vec<DeltaRow>,
}

pub const COMPARE_HEADER: &str = "language,name,gold_count,f1_a,f1_b,delta_f1";

impl Comparison {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", COMPARE_HEADER);
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.2},{:.2},{:+.2}",
                self.language, r.name, r.gold_count, r.f1_a, r.f1_b, r.delta
            );
        }
        out
    }

    pub fn row(&self, name: &str) -> Option<&DeltaRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

/// ΔF1 = B − A overall and for every argument label seen in either report.
pub fn compare(a: &EvalReport, b: &EvalReport) -> Result<Comparison> {
    if a.language != b.language {
        return Err(Error::Score(format!(
            "cannot compare reports for different languages ({} vs {})",
            a.language, b.language
        )));
    }
    let delta = |name: &str, gold: usize, x: f64, y: f64| DeltaRow {
        name: name.to_string(),
        gold_count: gold,
        f1_a: x,
        f1_b: y,
        delta: y - x,
    };
    let mut rows = vec![
        delta("overall_labeled", a.labeled.gold, a.labeled.f1, b.labeled.f1),
        delta("overall_unlabeled", a.unlabeled.gold, a.unlabeled.f1, b.unlabeled.f1),
    ];
    let mut seen = BTreeSet::new();
    let labels = labels_by_frequency(a)
        .into_iter()
        .chain(labels_by_frequency(b))
        .filter(|l| seen.insert(*l))
        .collect::<Vec<_>>();
    for label in labels {
        let x = a.per_label.get(label);
        let y = b.per_label.get(label);
        rows.push(delta(
            label,
            x.or(y).map_or(0, |m| m.gold),
            x.map_or(0.0, |m| m.f1),
            y.map_or(0.0, |m| m.f1),
        ));
    }
    Ok(Comparison {
        language: a.language.clone(),
        rows,
    })
}

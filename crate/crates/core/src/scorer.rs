//! CRAG-style answer scoring.
//!
//! Each prediction is judged perfect, acceptable, missing or incorrect.
//! `crag_half` scores these 1 / 0.5 / 0 / -1. `full_weight` gives acceptable
//! answers full credit, so every total equals accuracy minus hallucination.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Domain;
use crate::gateway::{classify_answer, AnswerClass};
use crate::text::{answer_tokens, normalize_answer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringMode {
    CragHalf,
    #[default]
    FullWeight,
}

impl fmt::Display for ScoringMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoringMode::CragHalf => "crag_half",
            ScoringMode::FullWeight => "full_weight",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Perfect,
    Acceptable,
    Missing,
    Incorrect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub interaction_id: String,
    pub outcome: Outcome,
    pub points: f64,
    pub exact: bool,
}

impl Verdict {
    pub fn new(outcome: Outcome, mode: ScoringMode) -> Self {
        let points = match (outcome, mode) {
            (Outcome::Perfect, _) => 1.0,
            (Outcome::Acceptable, ScoringMode::CragHalf) => 0.5,
            (Outcome::Acceptable, ScoringMode::FullWeight) => 1.0,
            (Outcome::Missing, _) => 0.0,
            (Outcome::Incorrect, _) => -1.0,
        };
        Self {
            interaction_id: String::new(),
            outcome,
            points,
            exact: outcome == Outcome::Perfect,
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.interaction_id = id.into();
        self
    }
}

/// Every token of `reference` appears somewhere in `prediction`.
fn contains_all_tokens(prediction: &str, reference: &str) -> bool {
    let reference = answer_tokens(reference);
    if reference.is_empty() {
        return false;
    }
    let pred = answer_tokens(prediction);
    reference.iter().all(|t| pred.contains(t))
}

/// Judge one prediction against the ground truth and alternative answers.
/// Inputs are normalized here, so raw strings are fine.
pub fn judge(prediction: &str, truth: &str, alt: &[String], mode: ScoringMode) -> Verdict {
    let prediction = normalize_answer(prediction);
    let truth = normalize_answer(truth);
    let outcome = if prediction.is_empty() || classify_answer(&prediction) == AnswerClass::IDontKnow {
        Outcome::Missing
    } else if prediction == truth {
        Outcome::Perfect
    } else if std::iter::once(truth)
        .chain(alt.iter().map(|a| normalize_answer(a)))
        .any(|reference| prediction == reference || contains_all_tokens(&prediction, &reference))
    {
        Outcome::Acceptable
    } else {
        Outcome::Incorrect
    };
    Verdict::new(outcome, mode)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScoreError {
    #[error("cannot score an empty batch")]
    EmptyBatch,
}

/// The five metric columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub exact_accuracy: f64,
    pub accuracy: f64,
    pub hallucination: f64,
    pub missing: f64,
    pub total_score: f64,
    pub n: usize,
}

impl Metrics {
    fn compute<'a>(verdicts: impl Iterator<Item = &'a Verdict>, mode: ScoringMode) -> Self {
        let (mut n, mut exact, mut perfect, mut acceptable, mut incorrect, mut missing) = (0usize, 0, 0, 0, 0, 0);
        let mut points = 0.0;
        for v in verdicts {
            n += 1;
            exact += usize::from(v.exact);
            points += v.points;
            match v.outcome {
                Outcome::Perfect => perfect += 1,
                Outcome::Acceptable => acceptable += 1,
                Outcome::Missing => missing += 1,
                Outcome::Incorrect => incorrect += 1,
            }
        }
        let nf = n as f64;
        let accurate = match mode {
            ScoringMode::FullWeight => (perfect + acceptable) as f64,
            ScoringMode::CragHalf => perfect as f64 + 0.5 * acceptable as f64,
        };
        Self {
            exact_accuracy: exact as f64 / nf,
            accuracy: accurate / nf,
            hallucination: incorrect as f64 / nf,
            missing: missing as f64 / nf,
            total_score: points / nf,
            n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scorecard {
    pub mode: ScoringMode,
    /// Micro-averaged over every verdict.
    #[serde(flatten)]
    pub micro: Metrics,
    /// Unweighted mean of the per-domain total scores.
    pub macro_total_score: f64,
    pub per_domain: BTreeMap<Domain, Metrics>,
}

pub fn score_batch(verdicts: &[(Verdict, Domain)], mode: ScoringMode) -> Result<Scorecard, ScoreError> {
    if verdicts.is_empty() {
        return Err(ScoreError::EmptyBatch);
    }
    let micro = Metrics::compute(verdicts.iter().map(|(v, _)| v), mode);
    let mut groups: BTreeMap<Domain, Vec<&Verdict>> = BTreeMap::new();
    for (v, d) in verdicts {
        groups.entry(*d).or_default().push(v);
    }
    let per_domain: BTreeMap<Domain, Metrics> = groups
        .into_iter()
        .map(|(d, vs)| (d, Metrics::compute(vs.into_iter(), mode)))
        .collect();
    let macro_total_score = per_domain.values().map(|m| m.total_score).sum::<f64>() / per_domain.len() as f64;
    Ok(Scorecard {
        mode,
        micro,
        macro_total_score,
        per_domain,
    })
}

pub const TABLE_COLUMNS: [&str; 5] = ["Exact Accuracy", "Accuracy", "Hallucination", "Missing", "Total Score"];

impl Scorecard {
    /// Plain-text table: one row per domain, a micro row and the macro total.
    pub fn to_table(&self, label: &str) -> String {
        let label_width = self
            .per_domain
            .keys()
            .map(|d| d.as_str().len() + 2)
            .chain([label.len(), "macro (by domain)".len()])
            .max()
            .unwrap_or(0);
        let mut out = String::new();
        let _ = write!(out, "{:<label_width$}", "");
        for col in TABLE_COLUMNS {
            let _ = write!(out, " | {col:>14}");
        }
        let _ = writeln!(out, " | {:>5}", "n");
        let row = |out: &mut String, name: &str, m: &Metrics| {
            let _ = write!(out, "{name:<label_width$}");
            for v in [m.exact_accuracy, m.accuracy, m.hallucination, m.missing, m.total_score] {
                let _ = write!(out, " | {v:>14.3}");
            }
            let _ = writeln!(out, " | {:>5}", m.n);
        };
        row(&mut out, label, &self.micro);
        for (d, m) in &self.per_domain {
            row(&mut out, &format!("  {d}"), m);
        }
        let _ = writeln!(
            out,
            "{:<label_width$} | {:>14.3}",
            "macro (by domain)", self.macro_total_score
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FW: ScoringMode = ScoringMode::FullWeight;

    fn batch(counts: &[(Outcome, usize)], mode: ScoringMode) -> Vec<(Verdict, Domain)> {
        counts
            .iter()
            .flat_map(|&(o, c)| std::iter::repeat_n(o, c))
            .map(|o| (Verdict::new(o, mode), Domain::Movie))
            .collect()
    }

    #[test]
    fn judge_examples() {
        let v = judge("inception", "inception", &[], FW);
        assert_eq!((v.outcome, v.points, v.exact), (Outcome::Perfect, 1.0, true));
        let v = judge("i don't know", "inception", &[], FW);
        assert_eq!((v.outcome, v.points), (Outcome::Missing, 0.0));
        let v = judge(
            "michael bay was born on february 17, 1965.",
            "1965-02-17",
            &["february 17, 1965".into()],
            ScoringMode::CragHalf,
        );
        assert_eq!((v.outcome, v.points, v.exact), (Outcome::Acceptable, 0.5, false));
        assert_eq!(
            judge("michael bay was born on february 17, 1965.", "1965-02-17", &[], FW).outcome,
            Outcome::Incorrect
        );
    }

    #[test]
    fn containment_and_modes() {
        let v = judge("it is madison keys", "madison keys", &[], ScoringMode::CragHalf);
        assert_eq!((v.outcome, v.points), (Outcome::Acceptable, 0.5));
        let v = judge("it is madison keys", "madison keys", &[], FW);
        assert_eq!((v.outcome, v.points, v.exact), (Outcome::Acceptable, 1.0, false));
        assert_eq!(judge("keys", "madison keys", &[], FW).outcome, Outcome::Incorrect);
        assert_eq!(
            judge("the incredibles", "finding nemo", &[], FW).outcome,
            Outcome::Incorrect
        );
        assert_eq!(judge("I Don’t Know.", "x", &[], FW).outcome, Outcome::Missing);
        assert_eq!(judge("", "x", &[], FW).outcome, Outcome::Missing);
        assert_eq!(judge("Inception.", "inception", &[], FW).outcome, Outcome::Perfect);
    }

    #[test]
    fn all_perfect() {
        let s = score_batch(&batch(&[(Outcome::Perfect, 5)], FW), FW).unwrap();
        assert_eq!(
            (s.micro.accuracy, s.micro.hallucination, s.micro.total_score),
            (1.0, 0.0, 1.0)
        );
    }

    #[test]
    fn movie_spot_check() {
        let s = score_batch(&batch(&[(Outcome::Perfect, 54), (Outcome::Incorrect, 46)], FW), FW).unwrap();
        assert!((s.micro.total_score - 0.08).abs() < 1e-12);
    }

    #[test]
    fn half_credit_mode() {
        let b = batch(
            &[(Outcome::Perfect, 2), (Outcome::Acceptable, 2)],
            ScoringMode::CragHalf,
        );
        let s = score_batch(&b, ScoringMode::CragHalf).unwrap();
        assert!((s.micro.accuracy - 0.75).abs() < 1e-12);
        assert!((s.micro.total_score - 0.75).abs() < 1e-12);
        assert!((s.micro.exact_accuracy - 0.5).abs() < 1e-12);
    }

    #[test]
    fn macro_is_unweighted_domain_mean() {
        let mut b = batch(&[(Outcome::Perfect, 3)], FW);
        b.push((Verdict::new(Outcome::Incorrect, FW), Domain::Finance));
        let s = score_batch(&b, FW).unwrap();
        assert!((s.micro.total_score - 0.5).abs() < 1e-12);
        assert!((s.macro_total_score - 0.0).abs() < 1e-12);
        assert_eq!(s.per_domain.len(), 2);
    }

    #[test]
    fn empty_batch() {
        assert_eq!(score_batch(&[], FW), Err(ScoreError::EmptyBatch));
    }

    #[test]
    fn table_has_columns_in_order() {
        let s = score_batch(&batch(&[(Outcome::Perfect, 1)], FW), FW).unwrap();
        let t = s.to_table("run");
        let header = t.lines().next().unwrap();
        let pos: Vec<_> = TABLE_COLUMNS.iter().map(|c| header.find(c).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert!(t.contains("1.000"));
    }
}

//! Evaluation and audit reports: JSON structures plus text tables.

use std::fmt::Write as _;

use emsaudit_core::audit::{AuditReport, FrequencyRow, Verdict};
use emsaudit_core::entities::{spans_from_tags, Tag};
use emsaudit_core::eval::{
    muc5_categorize, muc5_scores, token_metrics, EvalError, MatchMode, MucCounts, MucScores,
    TokenClassReport,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub counts: MucCounts,
    pub scores: MucScores,
}

/// Entity-level scores under both modes plus token-level metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub documents: usize,
    pub strict: ModeReport,
    pub type_matching: ModeReport,
    pub token_level: TokenClassReport,
}

/// Score aligned per-document (gold, predicted) tag sequences.
pub fn evaluate_documents(docs: &[(Vec<Tag>, Vec<Tag>)]) -> Result<EvalReport, EvalError> {
    let mut strict = MucCounts::default();
    let mut typed = MucCounts::default();
    let mut gold_all = Vec::new();
    let mut pred_all = Vec::new();
    for (gold, pred) in docs {
        if gold.len() != pred.len() {
            return Err(EvalError::LengthMismatch {
                gold: gold.len(),
                pred: pred.len(),
            });
        }
        let gold_spans = spans_from_tags(gold);
        let pred_spans = spans_from_tags(pred);
        strict.add(&muc5_categorize(&gold_spans, &pred_spans, MatchMode::Strict)?);
        typed.add(&muc5_categorize(&gold_spans, &pred_spans, MatchMode::Type)?);
        gold_all.extend_from_slice(gold);
        pred_all.extend_from_slice(pred);
    }
    Ok(EvalReport {
        documents: docs.len(),
        strict: ModeReport {
            counts: strict,
            scores: muc5_scores(&strict),
        },
        type_matching: ModeReport {
            counts: typed,
            scores: muc5_scores(&typed),
        },
        token_level: token_metrics(&gold_all, &pred_all)?,
    })
}

fn mode_row(out: &mut String, label: &str, counts: &MucCounts, scores: &MucScores) {
    let _ = writeln!(
        out,
        "{label:<8} {:>6} {:>5} {:>5} {:>5} {:>5} {:>6} {:>6}  {:>6.3} {:>6.3} {:>6.3}",
        counts.cor,
        counts.inc,
        counts.par,
        counts.mis,
        counts.spu,
        scores.pos,
        scores.act,
        scores.precision,
        scores.recall,
        scores.f1
    );
}

/// Text table for the eval report; `mode` restricts the entity-level
/// section to one comparison mode.
pub fn render_eval_text(report: &EvalReport, mode: Option<MatchMode>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "entity level ({} documents)", report.documents);
    let _ = writeln!(
        out,
        "{:<8} {:>6} {:>5} {:>5} {:>5} {:>5} {:>6} {:>6}  {:>6} {:>6} {:>6}",
        "mode", "COR", "INC", "PAR", "MIS", "SPU", "POS", "ACT", "P", "R", "F1"
    );
    if mode != Some(MatchMode::Type) {
        mode_row(&mut out, "strict", &report.strict.counts, &report.strict.scores);
    }
    if mode != Some(MatchMode::Strict) {
        mode_row(
            &mut out,
            "type",
            &report.type_matching.counts,
            &report.type_matching.scores,
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "token level (non-O classes)");
    let _ = writeln!(
        out,
        "{:<30} {:>6} {:>6} {:>6} {:>8}",
        "tag", "P", "R", "F1", "support"
    );
    for class in &report.token_level.classes {
        let _ = writeln!(
            out,
            "{:<30} {:>6.3} {:>6.3} {:>6.3} {:>8}",
            class.tag.to_string(),
            class.precision,
            class.recall,
            class.f1,
            class.support
        );
    }
    let t = &report.token_level;
    let _ = writeln!(
        out,
        "{:<30} {:>6.3} {:>6.3} {:>6.3} {:>8}",
        "weighted avg", t.weighted_precision, t.weighted_recall, t.weighted_f1, t.total_support
    );
    out
}

fn frequency_table(out: &mut String, rows: &[FrequencyRow], indent: &str) {
    let _ = writeln!(
        out,
        "{indent}{:<24} {:<24} {:>8} {:>8} {:>9}",
        "scenario", "action", "required", "passed", "frequency"
    );
    for row in rows {
        let freq = match row.frequency() {
            Some(f) => format!("{f:.3}"),
            None => "N/A".to_string(),
        };
        let _ = writeln!(
            out,
            "{indent}{:<24} {:<24} {:>8} {:>8} {:>9}",
            row.scenario.to_string(),
            row.action_id,
            row.required,
            row.passed,
            freq
        );
    }
}

pub fn render_audit_text(report: &AuditReport) -> String {
    let mut out = String::new();
    match report {
        AuditReport::Case(results) => {
            for result in results {
                let _ = writeln!(
                    out,
                    "incident {} (provider {}, scenario {})",
                    result.incident_id, result.provider_id, result.scenario
                );
                for v in &result.verdicts {
                    let mark = match v.verdict {
                        Verdict::Pass => "pass",
                        Verdict::Fail => "FAIL",
                        Verdict::NotRequired => "not required",
                        Verdict::Indeterminate => "indeterminate (no SBP)",
                    };
                    let _ = writeln!(out, "  {:<24} {}", v.action_id, mark);
                }
            }
        }
        AuditReport::Provider(by_provider) => {
            for (provider, rows) in by_provider {
                let _ = writeln!(out, "provider {provider}");
                frequency_table(&mut out, rows, "  ");
            }
        }
        AuditReport::System(rows) => {
            let _ = writeln!(out, "system level");
            frequency_table(&mut out, rows, "  ");
        }
    }
    out
}

//! Entity-level MUC-5 scoring and token-level weighted metrics.
//!
//! Two entity-level modes are implemented: strict (type and exact span must
//! match) and entity-type matching (type matches and spans overlap). Neither
//! mode produces PAR. A gold span is scored once per overlapping prediction,
//! so POS can exceed the number of gold entities.

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::entities::{EntitySpan, Tag};

/// Entity-level comparison mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    Strict,
    Type,
}

/// MUC-5 category tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MucCounts {
    pub cor: u64,
    pub inc: u64,
    pub par: u64,
    pub mis: u64,
    pub spu: u64,
}

impl MucCounts {
    pub fn add(&mut self, other: &MucCounts) {
        self.cor += other.cor;
        self.inc += other.inc;
        self.par += other.par;
        self.mis += other.mis;
        self.spu += other.spu;
    }
}

/// Derived POS/ACT and precision/recall/F1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MucScores {
    pub pos: u64,
    pub act: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    OverlappingGold(EntitySpan, EntitySpan),
    LengthMismatch { gold: usize, pred: usize },
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::OverlappingGold(a, b) => write!(
                f,
                "gold spans must not overlap: {} [{}, {}] vs {} [{}, {}]",
                a.entity, a.start, a.end, b.entity, b.start, b.end
            ),
            EvalError::LengthMismatch { gold, pred } => {
                write!(f, "tag sequences differ in length: gold {gold}, pred {pred}")
            }
        }
    }
}

/// Classify predictions against gold spans for one document.
pub fn muc5_categorize(
    gold: &[EntitySpan],
    pred: &[EntitySpan],
    mode: MatchMode,
) -> Result<MucCounts, EvalError> {
    let mut sorted: Vec<&EntitySpan> = gold.iter().collect();
    sorted.sort_by_key(|s| s.start);
    for pair in sorted.windows(2) {
        if pair[0].overlaps(pair[1]) {
            return Err(EvalError::OverlappingGold(*pair[0], *pair[1]));
        }
    }

    let mut counts = MucCounts::default();
    for p in pred {
        let mut overlapped_any = false;
        for g in gold.iter().filter(|g| g.overlaps(p)) {
            overlapped_any = true;
            if p == g {
                counts.cor += 1;
            } else if p.entity == g.entity {
                match mode {
                    MatchMode::Type => counts.cor += 1,
                    MatchMode::Strict => counts.inc += 1,
                }
            } else {
                counts.inc += 1;
            }
        }
        if !overlapped_any {
            counts.spu += 1;
        }
    }
    for g in gold {
        if !pred.iter().any(|p| p.overlaps(g)) {
            counts.mis += 1;
        }
    }
    Ok(counts)
}

/// POS = COR+INC+PAR+MIS, ACT = COR+INC+PAR+SPU, P = COR/ACT, R = COR/POS,
/// F1 = 2PR/(P+R); zero denominators yield zero.
pub fn muc5_scores(counts: &MucCounts) -> MucScores {
    let pos = counts.cor + counts.inc + counts.par + counts.mis;
    let act = counts.cor + counts.inc + counts.par + counts.spu;
    let precision = ratio(counts.cor, act);
    let recall = ratio(counts.cor, pos);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    MucScores {
        pos,
        act,
        precision,
        recall,
        f1,
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class precision/recall/F1 for one non-O tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub tag: Tag,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Token-level report over all non-O classes, with support-weighted averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenClassReport {
    pub classes: Vec<ClassMetrics>,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub total_support: u64,
}

/// One-vs-rest token metrics on exact tag equality, O excluded.
///
/// The sequences must be aligned token-wise over the whole evaluation set.
pub fn token_metrics(gold: &[Tag], pred: &[Tag]) -> Result<TokenClassReport, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    // tp / fp / fn per tag id, skipping O (id 0).
    let mut tp = alloc::vec![0u64; Tag::COUNT];
    let mut fp = alloc::vec![0u64; Tag::COUNT];
    let mut fne = alloc::vec![0u64; Tag::COUNT];
    for (g, p) in gold.iter().zip(pred.iter()) {
        if g == p {
            tp[g.id()] += 1;
        } else {
            fne[g.id()] += 1;
            fp[p.id()] += 1;
        }
    }

    let mut classes = Vec::new();
    let mut w_p = 0.0;
    let mut w_r = 0.0;
    let mut w_f1 = 0.0;
    let mut total_support = 0u64;
    for id in 1..Tag::COUNT {
        let support = tp[id] + fne[id];
        let predicted = tp[id] + fp[id];
        if support == 0 && predicted == 0 {
            continue;
        }
        let precision = ratio(tp[id], predicted);
        let recall = ratio(tp[id], support);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        w_p += precision * support as f64;
        w_r += recall * support as f64;
        w_f1 += f1 * support as f64;
        total_support += support;
        classes.push(ClassMetrics {
            tag: Tag::from_id(id).unwrap(),
            precision,
            recall,
            f1,
            support,
        });
    }
    let denom = if total_support == 0 {
        1.0
    } else {
        total_support as f64
    };
    Ok(TokenClassReport {
        classes,
        weighted_precision: w_p / denom,
        weighted_recall: w_r / denom,
        weighted_f1: w_f1 / denom,
        total_support,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entities::EntityType;
    use alloc::format;
    use alloc::vec;

    fn span(e: EntityType, s: usize, t: usize) -> EntitySpan {
        EntitySpan::new(e, s, t)
    }

    #[test]
    fn overlap_is_inc_strict_cor_type() {
        let gold = vec![span(EntityType::Ecg, 2, 4)];
        let pred = vec![span(EntityType::Ecg, 3, 4)];
        let strict = muc5_categorize(&gold, &pred, MatchMode::Strict).unwrap();
        assert_eq!((strict.cor, strict.inc, strict.mis, strict.spu), (0, 1, 0, 0));
        let typed = muc5_categorize(&gold, &pred, MatchMode::Type).unwrap();
        assert_eq!((typed.cor, typed.inc, typed.mis, typed.spu), (1, 0, 0, 0));
    }

    #[test]
    fn unmatched_gold_is_mis() {
        for mode in [MatchMode::Strict, MatchMode::Type] {
            let c = muc5_categorize(&[span(EntityType::Gtn, 0, 1)], &[], mode).unwrap();
            assert_eq!((c.cor, c.inc, c.mis, c.spu), (0, 0, 1, 0));
        }
    }

    #[test]
    fn unmatched_pred_is_spu() {
        for mode in [MatchMode::Strict, MatchMode::Type] {
            let c = muc5_categorize(&[], &[span(EntityType::Ecg, 0, 0)], mode).unwrap();
            assert_eq!((c.cor, c.inc, c.mis, c.spu), (0, 0, 0, 1));
        }
    }

    #[test]
    fn gold_counted_once_per_overlapping_prediction() {
        let gold = vec![span(EntityType::Ecg, 0, 3)];
        let pred = vec![span(EntityType::Ecg, 0, 1), span(EntityType::Ecg, 3, 3)];
        let c = muc5_categorize(&gold, &pred, MatchMode::Type).unwrap();
        assert_eq!(c.cor, 2);
        assert_eq!(muc5_scores(&c).pos, 2);
    }

    #[test]
    fn rejects_overlapping_gold() {
        let gold = vec![span(EntityType::Ecg, 0, 2), span(EntityType::Gtn, 2, 3)];
        assert!(matches!(
            muc5_categorize(&gold, &[], MatchMode::Strict),
            Err(EvalError::OverlappingGold(_, _))
        ));
    }

    #[test]
    fn scores_match_reference_type_matching_row() {
        let scores = muc5_scores(&MucCounts {
            cor: 1336,
            inc: 0,
            par: 0,
            mis: 25,
            spu: 26,
        });
        assert_eq!(scores.pos, 1361);
        assert_eq!(scores.act, 1362);
        assert_eq!(format!("{:.3}", scores.precision), "0.981");
        assert_eq!(format!("{:.3}", scores.recall), "0.982");
        assert_eq!(format!("{:.3}", scores.f1), "0.981");
    }

    #[test]
    fn scores_match_reference_strict_row() {
        let scores = muc5_scores(&MucCounts {
            cor: 1329,
            inc: 7,
            par: 0,
            mis: 25,
            spu: 26,
        });
        assert_eq!(scores.pos, 1361);
        assert_eq!(scores.act, 1362);
        assert_eq!(format!("{:.3}", scores.precision), "0.976");
        assert_eq!(format!("{:.3}", scores.recall), "0.976");
        assert_eq!(format!("{:.3}", scores.f1), "0.976");
    }

    #[test]
    fn zero_counts_give_zero_scores() {
        let scores = muc5_scores(&MucCounts::default());
        assert_eq!((scores.precision, scores.recall, scores.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn token_f1_from_perfect_precision() {
        // 45 gold mentions of one class, 44 predicted and all correct.
        let mut gold = vec![Tag::Begin(EntityType::Aspirin); 45];
        gold.push(Tag::Outside);
        let mut pred = vec![Tag::Begin(EntityType::Aspirin); 44];
        pred.push(Tag::Outside);
        pred.push(Tag::Outside);
        let report = token_metrics(&gold, &pred).unwrap();
        let class = &report.classes[0];
        assert_eq!(format!("{:.3}", class.precision), "1.000");
        assert_eq!(format!("{:.3}", class.recall), "0.978");
        assert_eq!(format!("{:.3}", class.f1), "0.989");
        assert_eq!(class.support, 45);
    }

    #[test]
    fn perfect_predictions_score_one() {
        let gold = vec![
            Tag::Begin(EntityType::Ecg),
            Tag::Inside(EntityType::Ecg),
            Tag::Outside,
            Tag::Begin(EntityType::Gtn),
        ];
        let report = token_metrics(&gold, &gold).unwrap();
        for class in &report.classes {
            assert_eq!((class.precision, class.recall, class.f1), (1.0, 1.0, 1.0));
        }
        assert_eq!(report.weighted_f1, 1.0);
    }

    #[test]
    fn weighted_average_uses_support() {
        // Class X: support 1, P=1/3, R=1 -> F1 = 0.5. Class Y: support 3, perfect.
        let x = Tag::Begin(EntityType::Ecg);
        let y = Tag::Begin(EntityType::Gtn);
        let o = Tag::Outside;
        let gold = vec![x, o, o, y, y, y];
        let pred = vec![x, x, x, y, y, y];
        let report = token_metrics(&gold, &pred).unwrap();
        assert!((report.weighted_f1 - 0.875).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(matches!(
            token_metrics(&[Tag::Outside], &[]),
            Err(EvalError::LengthMismatch { gold: 1, pred: 0 })
        ));
    }
}

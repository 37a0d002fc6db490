//! Randomized invariants for the pure modules.

use emsaudit_core::audit::{
    aggregate, evaluate_case, ActionRule, ActionVerdict, AggregationLevel, AuditReport,
    AuditResult, EvidenceSpec, ProtocolRules, SbpCondition, ScenarioRules, ScenarioType,
    StructuredFlag, Verdict,
};
use emsaudit_core::records::CaseRecord;
use emsaudit_core::entities::{spans_from_tags, tags_from_spans, EntitySpan, EntityType};
use emsaudit_core::eval::{muc5_categorize, muc5_scores, MatchMode, MucCounts};
use emsaudit_core::gazetteer::{
    edit_distance, match_synonym, weak_label, weak_label_spans, Gazetteer, Synonym,
};
use emsaudit_core::preprocess::{normalize, tokenize};
use proptest::prelude::*;

/// Full-matrix Levenshtein, kept independent of the two-row implementation.
#[allow(clippy::needless_range_loop)]
fn levenshtein_reference(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut grid = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in grid.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        grid[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            grid[i][j] = (grid[i - 1][j] + 1)
                .min(grid[i][j - 1] + 1)
                .min(grid[i - 1][j - 1] + cost);
        }
    }
    grid[a.len()][b.len()]
}

fn arb_entity() -> impl Strategy<Value = EntityType> {
    (0..EntityType::COUNT).prop_map(|i| EntityType::ALL[i])
}

/// Random non-overlapping spans within a sentence of the given length.
fn arb_gold_spans(len: usize) -> impl Strategy<Value = Vec<EntitySpan>> {
    prop::collection::vec((arb_entity(), 0..len, 1..4usize), 0..5).prop_map(move |raw| {
        let mut spans: Vec<EntitySpan> = Vec::new();
        for (entity, start, width) in raw {
            let end = (start + width - 1).min(len - 1);
            let candidate = EntitySpan::new(entity, start, end);
            if !spans.iter().any(|s| s.overlaps(&candidate)) {
                spans.push(candidate);
            }
        }
        spans.sort_by_key(|s| s.start);
        spans
    })
}

fn arb_token() -> impl Strategy<Value = String> {
    "[a-z0-9%]{1,8}"
}

fn full_rules() -> ProtocolRules {
    let entity_action = |id: &str, e: EntityType, cond: Option<SbpCondition>| ActionRule {
        action_id: id.to_string(),
        description: String::new(),
        evidence: EvidenceSpec::EntityAnyOf(vec![e]),
        condition: cond,
    };
    ProtocolRules {
        scenarios: vec![
            ScenarioRules {
                scenario: ScenarioType::AcuteCoronarySyndrome,
                actions: vec![
                    entity_action("aspirin", EntityType::Aspirin, None),
                    entity_action("ecg", EntityType::Ecg, None),
                    entity_action("gtn", EntityType::Gtn, Some(SbpCondition::AtLeast(90))),
                ],
            },
            ScenarioRules {
                scenario: ScenarioType::Stroke,
                actions: vec![
                    entity_action("scale", EntityType::StrokeAssessment, None),
                    ActionRule {
                        action_id: "glucose".to_string(),
                        description: String::new(),
                        evidence: EvidenceSpec::StructuredFlag(
                            StructuredFlag::CapillaryGlucoseRecorded,
                        ),
                        condition: None,
                    },
                ],
            },
            ScenarioRules {
                scenario: ScenarioType::BleedingPatient,
                actions: vec![
                    ActionRule {
                        action_id: "control".to_string(),
                        description: String::new(),
                        evidence: EvidenceSpec::StructuredFlag(
                            StructuredFlag::BleedingControlApplied,
                        ),
                        condition: None,
                    },
                    entity_action("iv", EntityType::IvCannula, Some(SbpCondition::Below(80))),
                    entity_action(
                        "saline",
                        EntityType::NormalSaline,
                        Some(SbpCondition::Below(80)),
                    ),
                ],
            },
        ],
    }
}

fn arb_case() -> impl Strategy<Value = CaseRecord> {
    (
        prop::option::of(prop::sample::select(vec![
            "Chest Pain",
            "Suspected Stroke",
            "Abdominal Pain",
        ])),
        any::<bool>(),
        prop::option::of(40..200u16),
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(|(chief, active_bleeding, sbp, glucose, control)| CaseRecord {
            incident_id: "A1".to_string(),
            provider_id: "P1".to_string(),
            patient_encounter: true,
            chief_complaint: chief.map(String::from),
            physical_findings: active_bleeding.then(|| vec!["Active Bleeding".to_string()]),
            systolic_bp: sbp,
            capillary_glucose_recorded: glucose,
            bleeding_control_applied: control,
            report_text: "x".to_string(),
            timestamp: String::new(),
        })
}

fn arb_synonym() -> impl Strategy<Value = Synonym> {
    (
        prop::collection::vec(arb_token(), 1..3),
        arb_entity(),
        any::<bool>(),
    )
        .prop_map(|(words, entity, force_exact)| Synonym {
            phrase: words.join(" "),
            entity,
            force_exact,
        })
}

proptest! {
    #[test]
    fn normalize_is_idempotent(text in ".{0,200}") {
        let once = normalize(&text);
        prop_assert_eq!(normalize(&once), once);
    }

    #[test]
    fn normalized_ascii_alphabet_is_lowercase_alnum_percent(text in "[ -~]{0,200}") {
        let norm = normalize(&text);
        for c in norm.chars() {
            prop_assert!(
                c.is_ascii_lowercase() || c.is_ascii_digit() || c == '%' || c == ' ',
                "unexpected char {c:?} in {norm:?}"
            );
        }
        prop_assert!(!norm.starts_with(' '));
        prop_assert!(!norm.ends_with(' '));
        prop_assert!(!norm.contains("  "));
    }

    #[test]
    fn tokens_rejoin_to_normalized_text(text in ".{0,200}") {
        let norm = normalize(&text);
        prop_assert_eq!(tokenize(&norm).join(" "), norm);
    }

    #[test]
    fn iob2_round_trip(
        (len, spans) in (1..30usize).prop_flat_map(|len| (Just(len), arb_gold_spans(len))),
    ) {
        let tags = tags_from_spans(&spans, len).unwrap();
        prop_assert_eq!(spans_from_tags(&tags), spans);
    }

    #[test]
    fn edit_distance_matches_reference(a in "[a-z ]{0,12}", b in "[a-z ]{0,12}") {
        prop_assert_eq!(edit_distance(&a, &b), levenshtein_reference(&a, &b));
    }

    #[test]
    fn weak_label_preserves_length(
        tokens in prop::collection::vec(arb_token(), 0..25),
        synonyms in prop::collection::vec(arb_synonym(), 1..6),
        max_dist in 0..3usize,
    ) {
        let gaz = Gazetteer { synonyms, max_edit_distance: max_dist };
        prop_assert_eq!(weak_label(&tokens, &gaz).len(), tokens.len());
    }

    #[test]
    fn weak_label_spans_never_overlap(
        tokens in prop::collection::vec(arb_token(), 0..25),
        synonyms in prop::collection::vec(arb_synonym(), 1..6),
    ) {
        let gaz = Gazetteer { synonyms, max_edit_distance: 1 };
        let spans = weak_label_spans(&tokens, &gaz);
        for (i, a) in spans.iter().enumerate() {
            for b in &spans[i + 1..] {
                prop_assert!(!a.overlaps(b), "{a:?} overlaps {b:?}");
            }
        }
    }

    #[test]
    fn weak_label_round_trips_through_tags(
        tokens in prop::collection::vec(arb_token(), 0..25),
        synonyms in prop::collection::vec(arb_synonym(), 1..6),
    ) {
        let gaz = Gazetteer { synonyms, max_edit_distance: 1 };
        let tags = weak_label(&tokens, &gaz);
        prop_assert_eq!(spans_from_tags(&tags), weak_label_spans(&tokens, &gaz));
    }

    #[test]
    fn zero_budget_fuzzy_equals_exact(
        tokens in prop::collection::vec(arb_token(), 1..15),
        syn in arb_synonym(),
    ) {
        let fuzzy = Synonym { force_exact: false, ..syn.clone() };
        let exact = Synonym { force_exact: true, ..syn };
        prop_assert_eq!(
            match_synonym(&tokens, &fuzzy, 0),
            match_synonym(&tokens, &exact, 0)
        );
    }

    #[test]
    fn short_phrases_ignore_the_budget(
        tokens in prop::collection::vec(arb_token(), 1..15),
        phrase in "[a-z]{1,4}",
        entity_idx in 0..EntityType::COUNT,
    ) {
        let syn = Synonym {
            phrase,
            entity: EntityType::ALL[entity_idx],
            force_exact: false,
        };
        let none = match_synonym(&tokens, &syn, 0);
        for max_dist in 1..4 {
            prop_assert_eq!(match_synonym(&tokens, &syn, max_dist).clone(), none.clone());
        }
    }

    #[test]
    fn muc5_structural_invariants(
        len in 1..25usize,
        gold in prop::collection::vec((0..EntityType::COUNT, 0..25usize, 1..4usize), 0..5),
        pred in prop::collection::vec((0..EntityType::COUNT, 0..25usize, 1..4usize), 0..6),
    ) {
        let mut gold_spans: Vec<EntitySpan> = Vec::new();
        for (e, start, width) in gold {
            let start = start % len;
            let span = EntitySpan::new(EntityType::ALL[e], start, (start + width - 1).min(len - 1));
            if !gold_spans.iter().any(|s| s.overlaps(&span)) {
                gold_spans.push(span);
            }
        }
        let pred_spans: Vec<EntitySpan> = pred
            .into_iter()
            .map(|(e, start, width)| {
                let start = start % len;
                EntitySpan::new(EntityType::ALL[e], start, (start + width - 1).min(len - 1))
            })
            .collect();

        let strict = muc5_categorize(&gold_spans, &pred_spans, MatchMode::Strict).unwrap();
        let typed = muc5_categorize(&gold_spans, &pred_spans, MatchMode::Type).unwrap();

        prop_assert_eq!(strict.par, 0);
        prop_assert_eq!(typed.par, 0);
        prop_assert!(strict.cor <= typed.cor);
        prop_assert_eq!(strict.mis, typed.mis);
        prop_assert_eq!(strict.spu, typed.spu);
        prop_assert_eq!(strict.cor + strict.inc, typed.cor + typed.inc);

        let scores = muc5_scores(&strict);
        prop_assert_eq!(scores.act, strict.cor + strict.inc + strict.spu);
        prop_assert_eq!(scores.pos, strict.cor + strict.inc + strict.mis);

        // Identity predictions are perfect in both modes.
        let echo = muc5_categorize(&gold_spans, &gold_spans, MatchMode::Strict).unwrap();
        prop_assert_eq!(echo.cor, gold_spans.len() as u64);
        prop_assert_eq!((echo.inc, echo.mis, echo.spu), (0, 0, 0));
    }

    #[test]
    fn muc5_scores_monotone_in_cor(
        cor in 0..200u64, inc in 0..50u64, mis in 0..50u64, spu in 0..50u64,
    ) {
        let base = muc5_scores(&MucCounts { cor, inc, par: 0, mis, spu });
        let more = muc5_scores(&MucCounts { cor: cor + 1, inc, par: 0, mis, spu });
        prop_assert!(more.precision >= base.precision - 1e-12);
        prop_assert!(more.recall >= base.recall - 1e-12);
        prop_assert!(more.f1 >= base.f1 - 1e-12);
    }

    #[test]
    fn adding_evidence_never_flips_pass_to_fail(
        case in arb_case(),
        entities in prop::collection::vec(arb_entity(), 0..5),
        extra in arb_entity(),
    ) {
        let rules = full_rules();
        let spans: Vec<EntitySpan> = entities
            .iter()
            .enumerate()
            .map(|(i, e)| EntitySpan::new(*e, 2 * i, 2 * i))
            .collect();
        let before = evaluate_case(&case, &spans, &rules).unwrap();

        let mut more = spans.clone();
        more.push(EntitySpan::new(extra, 2 * spans.len(), 2 * spans.len()));
        let after = evaluate_case(&case, &more, &rules).unwrap();

        for b in &before {
            // The scenario set can only grow (bleeding may become eligible).
            let a = after
                .iter()
                .find(|r| r.scenario == b.scenario)
                .expect("scenario cannot disappear when evidence is added");
            for (vb, va) in b.verdicts.iter().zip(a.verdicts.iter()) {
                prop_assert_eq!(&vb.action_id, &va.action_id);
                if vb.verdict == Verdict::Pass {
                    prop_assert_eq!(va.verdict, Verdict::Pass);
                }
            }
        }
    }

    #[test]
    fn verdicts_ignore_span_positions(
        case in arb_case(),
        entities in prop::collection::vec(arb_entity(), 0..5),
        offsets in prop::collection::vec(0..40usize, 0..5),
    ) {
        let rules = full_rules();
        let spans: Vec<EntitySpan> = entities
            .iter()
            .enumerate()
            .map(|(i, e)| EntitySpan::new(*e, 2 * i, 2 * i))
            .collect();
        let moved: Vec<EntitySpan> = entities
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let start = 100 + 3 * i + offsets.get(i).copied().unwrap_or(0);
                EntitySpan::new(*e, start, start + 1)
            })
            .collect();
        prop_assert_eq!(
            evaluate_case(&case, &spans, &rules).unwrap(),
            evaluate_case(&case, &moved, &rules).unwrap()
        );
    }

    #[test]
    fn aggregation_partitions_by_provider(
        results_raw in prop::collection::vec(
            (0..6u8, 0..3u8, prop::collection::vec((0..4u8, any::<bool>()), 1..5)),
            1..30,
        ),
    ) {
        let results: Vec<AuditResult> = results_raw
            .into_iter()
            .enumerate()
            .map(|(i, (provider, scenario, verdicts))| AuditResult {
                incident_id: format!("I{i}"),
                provider_id: format!("P{provider}"),
                scenario: ScenarioType::ALL[scenario as usize % 3],
                verdicts: verdicts
                    .into_iter()
                    .map(|(action, pass)| ActionVerdict {
                        action_id: format!("a{action}"),
                        required: true,
                        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
                    })
                    .collect(),
            })
            .collect();

        let AuditReport::System(system) = aggregate(&results, AggregationLevel::System) else {
            panic!("expected system report");
        };
        let AuditReport::Provider(providers) = aggregate(&results, AggregationLevel::Provider)
        else {
            panic!("expected provider report");
        };

        for row in &system {
            let provider_required: u64 = providers
                .values()
                .flat_map(|rows| rows.iter())
                .filter(|r| r.scenario == row.scenario && r.action_id == row.action_id)
                .map(|r| r.required)
                .sum();
            let provider_passed: u64 = providers
                .values()
                .flat_map(|rows| rows.iter())
                .filter(|r| r.scenario == row.scenario && r.action_id == row.action_id)
                .map(|r| r.passed)
                .sum();
            prop_assert_eq!(row.required, provider_required);
            prop_assert_eq!(row.passed, provider_passed);
        }
    }
}

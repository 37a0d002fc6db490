//! Seeded synthetic corpus of paramedic-style reports with known gold
//! annotations.
//!
//! Reports are assembled token-first: filler fragments and gazetteer
//! phrases are laid down as a normalized token stream, gold spans are
//! recorded from construction, and only then is a raw surface form
//! rendered (random separators, optional all-caps) that normalizes back to
//! exactly the same tokens. Scenario branches cycle through a fixed
//! schedule so any reasonably sized corpus covers every protocol branch:
//! both sides of both SBP thresholds, missing SBP, bleeding eligibility by
//! structured finding and by report text, plus non-encounter and
//! missing-text records.
//!
//! The filler vocabulary is curated against the default gazetteer: no
//! filler word extends a mention into a longer synonym window and none
//! sits within one edit of a fuzzy synonym, so on clean text weak labeling
//! recovers every constructed span.

use emsaudit_core::entities::{tags_from_spans, EntitySpan, EntityType, Tag};
use emsaudit_core::gazetteer::Gazetteer;
use emsaudit_core::preprocess::{normalize, tokenize};
use emsaudit_core::records::CaseRecord;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Relative mention frequencies used when no profile is given.
pub fn default_entity_profile() -> Vec<(EntityType, f64)> {
    vec![
        (EntityType::Ecg, 0.506),
        (EntityType::StrokeAssessment, 0.125),
        (EntityType::IvCannula, 0.039),
        (EntityType::BurnsCooling, 0.001),
        (EntityType::Valsalva, 0.001),
        (EntityType::Bleeding, 0.141),
        (EntityType::ObviousDeath, 0.006),
        (EntityType::Gtn, 0.050),
        (EntityType::Aspirin, 0.031),
        (EntityType::NormalSaline, 0.026),
        (EntityType::Penthrox, 0.011),
        (EntityType::Dextrose, 0.008),
        (EntityType::Adrenaline, 0.008),
        (EntityType::Diazepam, 0.007),
        (EntityType::Salbutamol, 0.034),
        (EntityType::Tramadol, 0.006),
        (EntityType::Syntometrine, 0.001),
    ]
}

/// Narrative fragments; only words vetted against the gazetteer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplatePool {
    pub openings: Vec<&'static str>,
    pub fillers: Vec<&'static str>,
    pub closers: Vec<&'static str>,
}

impl Default for TemplatePool {
    fn default() -> Self {
        TemplatePool {
            openings: vec![
                "o a pt sitting alert conscious",
                "o e pt conscious alert no giddiness nausea",
                "hx from pt c o chest pain x 2 7 crushing in nature non radiating",
                "hx from family sudden onset left arm weakness since morning",
                "o a pt found on floor alert no trauma",
                "o e noted 3cm laceration over right arm",
                "hx from pt fall at scene no known allergies",
            ],
            fillers: vec![
                "pt", "alert", "conscious", "stable", "comfortable", "no", "denies",
                "giddiness", "nausea", "trauma", "fall", "afebrile", "noted", "was",
                "sitting", "from", "hx", "obs", "taken", "at", "scene", "on", "arrival",
                "assessed", "given", "administered", "done", "performed", "tolerated",
                "well", "by", "sn", "dr", "further", "review", "pupils", "equal",
                "reactive", "breath", "sounds", "clear", "abd", "soft", "non", "tender",
                "left", "right", "arm", "leg", "numbness", "since", "yesterday",
                "morning", "x", "c", "o", "e", "a",
            ],
            closers: vec![
                "nil acute distress conveyed to hospital",
                "pt stable conveyed to hospital for review",
                "obs taken pt comfortable during transport",
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_documents: usize,
    /// Probability that a mention receives a single-character edit.
    pub misspelling_rate: f64,
    pub seed: u64,
    /// Relative mention frequencies per entity; zero-weight entities never
    /// appear.
    pub entity_profile: Vec<(EntityType, f64)>,
    pub templates: TemplatePool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_documents: 1000,
            misspelling_rate: 0.05,
            seed: crate::DEFAULT_SEED,
            entity_profile: default_entity_profile(),
            templates: TemplatePool::default(),
        }
    }
}

/// One generated incident with its construction-time gold annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedCase {
    pub record: CaseRecord,
    /// Tokens of the normalized report; gold spans index into these.
    pub tokens: Vec<String>,
    pub gold: Vec<EntitySpan>,
}

impl GeneratedCase {
    pub fn gold_tags(&self) -> Vec<Tag> {
        tags_from_spans(&self.gold, self.tokens.len()).expect("gold spans are disjoint")
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("misspelling_rate must be in [0, 1], got {0}")]
    BadRate(f64),
    #[error("entity profile has no positive weight")]
    EmptyProfile,
    #[error("template pool is empty")]
    EmptyTemplates,
    #[error("gazetteer has no synonym for {0}")]
    NoSynonyms(EntityType),
}

/// Scenario schedule entry; the cycle covers every protocol branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DocKind {
    AcsBpHigh,
    AcsBpLow,
    AcsBpMissing,
    StrokeGlucose,
    StrokeNoGlucose,
    BleedFindingLow,
    BleedFindingHigh,
    BleedFindingMissing,
    BleedTextLow,
    BleedTextHigh,
    Other,
    NoEncounter,
    EmptyText,
}

const SCHEDULE: [DocKind; 20] = [
    DocKind::AcsBpHigh,
    DocKind::Other,
    DocKind::BleedFindingLow,
    DocKind::StrokeGlucose,
    DocKind::Other,
    DocKind::AcsBpLow,
    DocKind::BleedTextLow,
    DocKind::Other,
    DocKind::StrokeNoGlucose,
    DocKind::AcsBpMissing,
    DocKind::Other,
    DocKind::BleedFindingHigh,
    DocKind::NoEncounter,
    DocKind::Other,
    DocKind::AcsBpHigh,
    DocKind::BleedFindingMissing,
    DocKind::Other,
    DocKind::BleedTextHigh,
    DocKind::EmptyText,
    DocKind::Other,
];

impl DocKind {
    fn is_acs(self) -> bool {
        matches!(
            self,
            DocKind::AcsBpHigh | DocKind::AcsBpLow | DocKind::AcsBpMissing
        )
    }

    fn is_bleeding(self) -> bool {
        matches!(
            self,
            DocKind::BleedFindingLow
                | DocKind::BleedFindingHigh
                | DocKind::BleedFindingMissing
                | DocKind::BleedTextLow
                | DocKind::BleedTextHigh
        )
    }
}

struct DocBuilder {
    tokens: Vec<String>,
    gold: Vec<EntitySpan>,
}

impl DocBuilder {
    fn new() -> Self {
        DocBuilder {
            tokens: Vec::new(),
            gold: Vec::new(),
        }
    }

    fn push_filler_str(&mut self, fragment: &str) {
        self.tokens.extend(fragment.split(' ').map(String::from));
    }

    fn push_mention(&mut self, entity: EntityType, phrase_tokens: Vec<String>) {
        let start = self.tokens.len();
        let end = start + phrase_tokens.len() - 1;
        self.tokens.extend(phrase_tokens);
        self.gold.push(EntitySpan::new(entity, start, end));
    }
}

fn misspell(token: &str, rng: &mut ChaCha8Rng) -> String {
    let chars: Vec<char> = token.chars().collect();
    let letter = |rng: &mut ChaCha8Rng| (b'a' + rng.gen_range(0..26u8)) as char;
    let mut out = chars.clone();
    match rng.gen_range(0..3) {
        0 => {
            // substitute
            let pos = rng.gen_range(0..out.len());
            let old = out[pos];
            let mut new = letter(rng);
            while new == old {
                new = letter(rng);
            }
            out[pos] = new;
        }
        1 => {
            // insert
            let pos = rng.gen_range(0..=out.len());
            out.insert(pos, letter(rng));
        }
        _ => {
            // delete, falling back to substitute on short tokens
            if out.len() >= 4 {
                let pos = rng.gen_range(0..out.len());
                out.remove(pos);
            } else {
                let pos = rng.gen_range(0..out.len());
                let old = out[pos];
                let mut new = letter(rng);
                while new == old {
                    new = letter(rng);
                }
                out[pos] = new;
            }
        }
    }
    out.into_iter().collect()
}

/// Pick a synonym phrase for the entity and split it into tokens, applying
/// at most one single-character edit with the configured probability.
fn mention_tokens(
    entity: EntityType,
    gaz: &Gazetteer,
    rate: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<String>, SynthError> {
    let candidates: Vec<&str> = gaz
        .synonyms
        .iter()
        .filter(|s| s.entity == entity)
        .map(|s| s.phrase.as_str())
        .collect();
    if candidates.is_empty() {
        return Err(SynthError::NoSynonyms(entity));
    }
    let phrase = candidates[rng.gen_range(0..candidates.len())];
    let mut tokens: Vec<String> = phrase.split(' ').map(String::from).collect();
    if rate > 0.0 && rng.gen_bool(rate) {
        // Only edit alphabetic tokens of 3+ characters so digit/percent
        // tokens stay intact and nothing collapses to empty.
        let editable: Vec<usize> = tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| t.len() >= 3 && t.chars().all(|c| c.is_ascii_lowercase()))
            .map(|(i, _)| i)
            .collect();
        if !editable.is_empty() {
            let idx = editable[rng.gen_range(0..editable.len())];
            tokens[idx] = misspell(&tokens[idx], rng);
        }
    }
    Ok(tokens)
}

fn render_raw(tokens: &[String], rng: &mut ChaCha8Rng) -> String {
    let separators = [" ", " ", " ", " ", ", ", ". ", "/", " - "];
    let mut out = String::new();
    for (i, tok) in tokens.iter().enumerate() {
        if i > 0 {
            out.push_str(separators[rng.gen_range(0..separators.len())]);
        }
        out.push_str(tok);
    }
    out.push('.');
    if rng.gen_bool(0.5) {
        out = out.to_uppercase();
    }
    out
}

fn timestamp_for(index: usize) -> String {
    let minutes = index * 7;
    let day = 1 + (minutes / 1440) % 28;
    let hour = (minutes / 60) % 24;
    let minute = minutes % 60;
    format!("2019-04-{day:02}T{hour:02}:{minute:02}:00Z")
}

/// Generate the corpus. Deterministic for a fixed config.
pub fn generate_corpus(
    cfg: &SynthConfig,
    gaz: &Gazetteer,
) -> Result<Vec<GeneratedCase>, SynthError> {
    if !(0.0..=1.0).contains(&cfg.misspelling_rate) {
        return Err(SynthError::BadRate(cfg.misspelling_rate));
    }
    if cfg.templates.openings.is_empty()
        || cfg.templates.fillers.is_empty()
        || cfg.templates.closers.is_empty()
    {
        return Err(SynthError::EmptyTemplates);
    }
    let profile: Vec<(EntityType, f64)> = cfg
        .entity_profile
        .iter()
        .filter(|(_, w)| *w > 0.0)
        .copied()
        .collect();
    if profile.is_empty() {
        return Err(SynthError::EmptyProfile);
    }
    let weights = WeightedIndex::new(profile.iter().map(|(_, w)| *w))
        .map_err(|_| SynthError::EmptyProfile)?;
    let bleeding_in_profile = profile.iter().any(|(e, _)| *e == EntityType::Bleeding);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cases = Vec::with_capacity(cfg.n_documents);
    for index in 0..cfg.n_documents {
        let mut kind = SCHEDULE[index % SCHEDULE.len()];
        // Text-based bleeding eligibility needs a bleeding mention; fall
        // back to the structured finding when the profile excludes it.
        if matches!(kind, DocKind::BleedTextLow) && !bleeding_in_profile {
            kind = DocKind::BleedFindingLow;
        }
        if matches!(kind, DocKind::BleedTextHigh) && !bleeding_in_profile {
            kind = DocKind::BleedFindingHigh;
        }
        cases.push(build_case(
            index, kind, cfg, gaz, &profile, &weights, &mut rng,
        )?);
    }
    Ok(cases)
}

fn build_case(
    index: usize,
    kind: DocKind,
    cfg: &SynthConfig,
    gaz: &Gazetteer,
    profile: &[(EntityType, f64)],
    weights: &WeightedIndex<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<GeneratedCase, SynthError> {
    let incident_id = format!("SYN-{index:06}");
    let provider_id = format!("P{:02}", rng.gen_range(1..=8));
    let timestamp = timestamp_for(index);

    let patient_encounter = kind != DocKind::NoEncounter;
    let empty_text = matches!(kind, DocKind::NoEncounter | DocKind::EmptyText);

    let chief_complaint = if kind.is_acs() {
        Some("Chest Pain".to_string())
    } else if matches!(kind, DocKind::StrokeGlucose | DocKind::StrokeNoGlucose) {
        Some("Suspected Stroke".to_string())
    } else if kind.is_bleeding() {
        [None, Some("Injury"), Some("Fall")][rng.gen_range(0..3)].map(String::from)
    } else if kind == DocKind::NoEncounter {
        None
    } else {
        [None, Some("Abdominal Pain"), Some("Fever"), Some("Breathlessness")]
            [rng.gen_range(0..4)]
        .map(String::from)
    };

    let physical_findings = match kind {
        DocKind::BleedFindingLow | DocKind::BleedFindingHigh | DocKind::BleedFindingMissing => {
            let mut findings = vec!["Active Bleeding".to_string()];
            if rng.gen_bool(0.4) {
                findings.push("Laceration".to_string());
            }
            Some(findings)
        }
        _ => None,
    };

    let systolic_bp: Option<u16> = match kind {
        DocKind::AcsBpHigh => Some(rng.gen_range(90..=170)),
        DocKind::AcsBpLow => Some(rng.gen_range(55..=89)),
        DocKind::AcsBpMissing | DocKind::BleedFindingMissing => None,
        DocKind::BleedFindingLow | DocKind::BleedTextLow => Some(rng.gen_range(50..=79)),
        DocKind::BleedFindingHigh | DocKind::BleedTextHigh => Some(rng.gen_range(80..=150)),
        DocKind::StrokeGlucose | DocKind::StrokeNoGlucose => {
            if rng.gen_bool(0.8) {
                Some(rng.gen_range(100..=180))
            } else {
                None
            }
        }
        DocKind::NoEncounter | DocKind::EmptyText => None,
        DocKind::Other => {
            if rng.gen_bool(0.7) {
                Some(rng.gen_range(90..=160))
            } else {
                None
            }
        }
    };

    let capillary_glucose_recorded = match kind {
        DocKind::StrokeGlucose => true,
        DocKind::StrokeNoGlucose => false,
        _ => rng.gen_bool(0.15),
    };
    let bleeding_control_applied = kind.is_bleeding() && rng.gen_bool(0.6);

    let (report_text, tokens, gold) = if empty_text {
        (String::new(), Vec::new(), Vec::new())
    } else {
        let mut doc = DocBuilder::new();
        let pool = &cfg.templates;
        doc.push_filler_str(pool.openings[rng.gen_range(0..pool.openings.len())]);

        let mut mentions: Vec<EntityType> = Vec::new();
        if matches!(kind, DocKind::BleedTextLow | DocKind::BleedTextHigh) {
            mentions.push(EntityType::Bleeding);
        }
        let n_random = 1 + rng.gen_range(0..=2);
        for _ in 0..n_random {
            mentions.push(profile[weights.sample(rng)].0);
        }

        for entity in mentions {
            // At least one filler token separates consecutive mentions.
            for _ in 0..rng.gen_range(1..=3) {
                doc.push_filler_str(pool.fillers[rng.gen_range(0..pool.fillers.len())]);
            }
            let phrase = mention_tokens(entity, gaz, cfg.misspelling_rate, rng)?;
            doc.push_mention(entity, phrase);
        }

        // Vitals fragment.
        let mut vitals = String::new();
        if let Some(sbp) = systolic_bp {
            vitals.push_str(&format!("bp {sbp} {}", sbp.saturating_sub(30).max(20)));
        }
        if rng.gen_bool(0.8) {
            if !vitals.is_empty() {
                vitals.push(' ');
            }
            vitals.push_str(&format!("ra spo2 {}%", rng.gen_range(95..=100)));
        }
        if rng.gen_bool(0.5) {
            if !vitals.is_empty() {
                vitals.push(' ');
            }
            vitals.push_str("gcs 15");
        }
        if !vitals.is_empty() {
            doc.push_filler_str(&vitals);
        }
        doc.push_filler_str(pool.closers[rng.gen_range(0..pool.closers.len())]);

        let raw = render_raw(&doc.tokens, rng);
        debug_assert_eq!(tokenize(&normalize(&raw)), doc.tokens);
        (raw, doc.tokens, doc.gold)
    };

    Ok(GeneratedCase {
        record: CaseRecord {
            incident_id,
            provider_id,
            patient_encounter,
            chief_complaint,
            physical_findings,
            systolic_bp,
            capillary_glucose_recorded,
            bleeding_control_applied,
            report_text,
            timestamp,
        },
        tokens,
        gold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use emsaudit_core::gazetteer::weak_label_spans;

    fn default_gaz() -> Gazetteer {
        Gazetteer::parse(crate::DEFAULT_GAZETTEER, 1).unwrap()
    }

    #[test]
    fn default_gazetteer_covers_every_entity() {
        assert!(default_gaz().missing_entities().is_empty());
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig {
            n_documents: 60,
            ..SynthConfig::default()
        };
        let gaz = default_gaz();
        let a = generate_corpus(&cfg, &gaz).unwrap();
        let b = generate_corpus(&cfg, &gaz).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gold_spans_index_normalized_tokens() {
        let cfg = SynthConfig {
            n_documents: 120,
            ..SynthConfig::default()
        };
        let gaz = default_gaz();
        for case in generate_corpus(&cfg, &gaz).unwrap() {
            assert_eq!(tokenize(&normalize(&case.record.report_text)), case.tokens);
            for span in &case.gold {
                assert!(span.end < case.tokens.len());
            }
            let _ = case.gold_tags();
        }
    }

    #[test]
    fn clean_text_weak_labeling_recovers_every_gold_span() {
        let cfg = SynthConfig {
            n_documents: 250,
            misspelling_rate: 0.0,
            seed: 1234,
            ..SynthConfig::default()
        };
        let gaz = default_gaz();
        for case in generate_corpus(&cfg, &gaz).unwrap() {
            let found = weak_label_spans(&case.tokens, &gaz);
            for span in &case.gold {
                assert!(
                    found.contains(span),
                    "missing {span:?} in {:?} (found {found:?})",
                    case.tokens
                );
            }
        }
    }

    #[test]
    fn single_edit_misspellings_stay_within_the_fuzzy_budget() {
        // All-fuzzy gazetteer with phrases >= 5 chars and misspellings on
        // every mention: recall must still be perfect.
        let gaz = Gazetteer::parse(
            "ASPIRIN\taspirin\tfuzzy\nECG\t12 lead ecg\tfuzzy\nBLEEDING\tbleeding\tfuzzy\nSALBUTAMOL\tsalbutamol\tfuzzy\n",
            1,
        )
        .unwrap();
        let cfg = SynthConfig {
            n_documents: 200,
            misspelling_rate: 1.0,
            seed: 77,
            entity_profile: vec![
                (EntityType::Aspirin, 0.3),
                (EntityType::Ecg, 0.3),
                (EntityType::Bleeding, 0.2),
                (EntityType::Salbutamol, 0.2),
            ],
            ..SynthConfig::default()
        };
        for case in generate_corpus(&cfg, &gaz).unwrap() {
            let found = weak_label_spans(&case.tokens, &gaz);
            for span in &case.gold {
                assert!(
                    found.contains(span),
                    "missing {span:?} in {:?} (found {found:?})",
                    case.tokens
                );
            }
        }
    }

    #[test]
    fn profile_drives_mention_frequencies() {
        // Two-entity profile at 50/50: the ECG count over all mentions must
        // sit inside the 99% binomial interval.
        let cfg = SynthConfig {
            n_documents: 800,
            misspelling_rate: 0.0,
            seed: 5,
            entity_profile: vec![(EntityType::Ecg, 0.5), (EntityType::Gtn, 0.5)],
            ..SynthConfig::default()
        };
        let cases = generate_corpus(&cfg, &default_gaz()).unwrap();
        let total: usize = cases.iter().map(|c| c.gold.len()).sum();
        let ecg: usize = cases
            .iter()
            .flat_map(|c| c.gold.iter())
            .filter(|s| s.entity == EntityType::Ecg)
            .count();
        assert!(total > 1000, "only {total} mentions generated");
        let mean = total as f64 * 0.5;
        let bound = 2.576 * (total as f64 * 0.25).sqrt();
        assert!(
            (ecg as f64 - mean).abs() <= bound,
            "ecg count {ecg} outside {mean} +/- {bound}"
        );
    }

    #[test]
    fn every_protocol_branch_appears_in_100_documents() {
        for seed in [0, 9, 1731] {
            let cfg = SynthConfig {
                n_documents: 100,
                seed,
                ..SynthConfig::default()
            };
            let cases = generate_corpus(&cfg, &default_gaz()).unwrap();
            let has = |pred: &dyn Fn(&GeneratedCase) -> bool| cases.iter().any(pred);

            let acs =
                |c: &GeneratedCase| c.record.chief_complaint.as_deref() == Some("Chest Pain");
            assert!(has(&|c| acs(c) && c.record.systolic_bp.is_some_and(|b| b >= 90)));
            assert!(has(&|c| acs(c) && c.record.systolic_bp.is_some_and(|b| b < 90)));
            assert!(has(&|c| acs(c) && c.record.systolic_bp.is_none()));

            let stroke = |c: &GeneratedCase| {
                c.record.chief_complaint.as_deref() == Some("Suspected Stroke")
            };
            assert!(has(&|c| stroke(c) && c.record.capillary_glucose_recorded));
            assert!(has(&|c| stroke(c) && !c.record.capillary_glucose_recorded));

            let finding = |c: &GeneratedCase| {
                c.record
                    .physical_findings
                    .as_deref()
                    .unwrap_or(&[])
                    .iter()
                    .any(|f| f == "Active Bleeding")
            };
            assert!(has(&|c| finding(c)
                && c.record.systolic_bp.is_some_and(|b| b < 80)));
            assert!(has(&|c| finding(c)
                && c.record.systolic_bp.is_some_and(|b| b >= 80)));
            assert!(has(&|c| finding(c) && c.record.systolic_bp.is_none()));

            let text_bleed = |c: &GeneratedCase| {
                !finding(c) && c.gold.iter().any(|s| s.entity == EntityType::Bleeding)
            };
            assert!(has(&|c| text_bleed(c)
                && c.record.systolic_bp.is_some_and(|b| b < 80)));
            assert!(has(&|c| text_bleed(c)
                && c.record.systolic_bp.is_some_and(|b| b >= 80)));

            assert!(has(&|c| !c.record.patient_encounter));
            assert!(has(&|c| c.record.patient_encounter
                && c.record.report_text.is_empty()));
        }
    }
}

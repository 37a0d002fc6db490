//! Synonym inventory and weakly-supervised IOB2 labeling.
//!
//! Fuzzy matching runs against windows of whole tokens so every match maps
//! cleanly onto token-aligned spans. A synonym shorter than
//! [`MIN_FUZZY_PHRASE_CHARS`] characters is always matched exactly, as is
//! any synonym flagged `exact` in the gazetteer file.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Reverse;
use core::fmt;

use crate::entities::{tags_from_spans, EntitySpan, EntityType, Tag};
use crate::preprocess::normalize;

/// Phrases below this length (counting interior spaces) never match fuzzily.
pub const MIN_FUZZY_PHRASE_CHARS: usize = 5;

/// Default edit-distance budget for fuzzy synonym matches.
pub const DEFAULT_MAX_EDIT_DISTANCE: usize = 1;

/// One gazetteer entry: a normalized phrase naming an entity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Synonym {
    pub phrase: String,
    pub entity: EntityType,
    pub force_exact: bool,
}

/// The full synonym inventory plus the fuzzy budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gazetteer {
    pub synonyms: Vec<Synonym>,
    pub max_edit_distance: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GazetteerError {
    UnknownEntity { line: usize, name: String },
    EmptyPhrase { line: usize },
    DuplicatePhrase { line: usize, phrase: String },
    BadPolicy { line: usize, value: String },
    BadColumns { line: usize },
}

impl fmt::Display for GazetteerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GazetteerError::UnknownEntity { line, name } => {
                write!(f, "line {line}: unknown entity {name}")
            }
            GazetteerError::EmptyPhrase { line } => {
                write!(f, "line {line}: empty phrase after normalization")
            }
            GazetteerError::DuplicatePhrase { line, phrase } => {
                write!(f, "line {line}: duplicate phrase {phrase:?}")
            }
            GazetteerError::BadPolicy { line, value } => {
                write!(f, "line {line}: match policy must be 'fuzzy' or 'exact', got {value:?}")
            }
            GazetteerError::BadColumns { line } => {
                write!(f, "line {line}: expected ENTITY<TAB>phrase<TAB>fuzzy|exact")
            }
        }
    }
}

impl Gazetteer {
    /// Parse the tab-separated gazetteer format.
    ///
    /// Three columns per line: entity name, phrase, `fuzzy` or `exact`.
    /// Blank lines and lines starting with `#` are skipped. Phrases are
    /// normalized on load; duplicates are rejected.
    pub fn parse(text: &str, max_edit_distance: usize) -> Result<Self, GazetteerError> {
        let mut synonyms: Vec<Synonym> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut cols = raw.split('\t');
            let (name, phrase_col, policy) = match (cols.next(), cols.next(), cols.next()) {
                (Some(a), Some(b), Some(c)) if cols.next().is_none() => (a, b, c),
                _ => return Err(GazetteerError::BadColumns { line }),
            };
            let entity: EntityType = name
                .trim()
                .parse()
                .map_err(|_| GazetteerError::UnknownEntity {
                    line,
                    name: String::from(name.trim()),
                })?;
            let phrase = normalize(phrase_col);
            if phrase.is_empty() {
                return Err(GazetteerError::EmptyPhrase { line });
            }
            if synonyms.iter().any(|s| s.phrase == phrase) {
                return Err(GazetteerError::DuplicatePhrase { line, phrase });
            }
            let force_exact = match policy.trim() {
                "fuzzy" => false,
                "exact" => true,
                other => {
                    return Err(GazetteerError::BadPolicy {
                        line,
                        value: String::from(other),
                    })
                }
            };
            synonyms.push(Synonym {
                phrase,
                entity,
                force_exact,
            });
        }
        Ok(Gazetteer {
            synonyms,
            max_edit_distance,
        })
    }

    /// Entity types with no synonym in the inventory.
    pub fn missing_entities(&self) -> Vec<EntityType> {
        EntityType::ALL
            .iter()
            .copied()
            .filter(|e| !self.synonyms.iter().any(|s| s.entity == *e))
            .collect()
    }
}

/// Levenshtein distance with unit-cost insert/delete/substitute.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = alloc::vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// All windows of `tokens` matching the synonym, as spans.
///
/// Windows are the synonym's token count wide, joined with single spaces.
/// Fuzzy comparison applies only when the phrase is at least
/// [`MIN_FUZZY_PHRASE_CHARS`] characters and not flagged exact; otherwise
/// the window must equal the phrase.
pub fn match_synonym(tokens: &[String], syn: &Synonym, max_dist: usize) -> Vec<EntitySpan> {
    let width = syn.phrase.split(' ').count();
    if width == 0 || width > tokens.len() {
        return Vec::new();
    }
    let fuzzy = !syn.force_exact && syn.phrase.chars().count() >= MIN_FUZZY_PHRASE_CHARS;
    let mut spans = Vec::new();
    for start in 0..=tokens.len() - width {
        let window = tokens[start..start + width].join(" ");
        let hit = if fuzzy {
            // Cheap length prefilter before the DP.
            let diff = window.chars().count().abs_diff(syn.phrase.chars().count());
            diff <= max_dist && edit_distance(&window, &syn.phrase) <= max_dist
        } else {
            window == syn.phrase
        };
        if hit {
            spans.push(EntitySpan::new(syn.entity, start, start + width - 1));
        }
    }
    spans
}

/// Candidate spans from every synonym, resolved to a non-overlapping set.
///
/// Longer spans win; ties go to the leftmost start, then to gazetteer file
/// order.
pub fn weak_label_spans(tokens: &[String], gaz: &Gazetteer) -> Vec<EntitySpan> {
    let mut candidates: Vec<(EntitySpan, usize)> = Vec::new();
    for (order, syn) in gaz.synonyms.iter().enumerate() {
        for span in match_synonym(tokens, syn, gaz.max_edit_distance) {
            candidates.push((span, order));
        }
    }
    candidates.sort_by_key(|(span, order)| (Reverse(span.len()), span.start, *order));
    let mut resolved: Vec<EntitySpan> = Vec::new();
    for (span, _) in candidates {
        if !resolved.iter().any(|kept| kept.overlaps(&span)) {
            resolved.push(span);
        }
    }
    resolved.sort_by_key(|s| s.start);
    resolved
}

/// Weakly-supervised IOB2 labels for one tokenized report.
pub fn weak_label(tokens: &[String], gaz: &Gazetteer) -> Vec<Tag> {
    let spans = weak_label_spans(tokens, gaz);
    tags_from_spans(&spans, tokens.len()).expect("resolved spans are disjoint and in bounds")
}

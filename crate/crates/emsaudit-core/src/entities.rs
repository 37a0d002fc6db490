//! The clinical entity inventory, IOB2 tags, and token spans.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

/// Broad grouping of the entity inventory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Category {
    ClinicalProcedure,
    ClinicalFinding,
    Medication,
}

impl Category {
    /// Short token used when qualifying entity names, e.g. `PROCEDURE_ECG`.
    pub fn prefix(self) -> &'static str {
        match self {
            Category::ClinicalProcedure => "PROCEDURE",
            Category::ClinicalFinding => "FINDING",
            Category::Medication => "MEDICATION",
        }
    }
}

/// The 17 named clinical entities the system extracts.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "UPPERCASE")]
pub enum EntityType {
    Ecg,
    StrokeAssessment,
    IvCannula,
    BurnsCooling,
    Valsalva,
    Bleeding,
    ObviousDeath,
    Gtn,
    Aspirin,
    NormalSaline,
    Penthrox,
    Dextrose,
    Adrenaline,
    Diazepam,
    Salbutamol,
    Tramadol,
    Syntometrine,
}

impl EntityType {
    pub const COUNT: usize = 17;

    /// All entity types in canonical inventory order.
    pub const ALL: [EntityType; Self::COUNT] = [
        EntityType::Ecg,
        EntityType::StrokeAssessment,
        EntityType::IvCannula,
        EntityType::BurnsCooling,
        EntityType::Valsalva,
        EntityType::Bleeding,
        EntityType::ObviousDeath,
        EntityType::Gtn,
        EntityType::Aspirin,
        EntityType::NormalSaline,
        EntityType::Penthrox,
        EntityType::Dextrose,
        EntityType::Adrenaline,
        EntityType::Diazepam,
        EntityType::Salbutamol,
        EntityType::Tramadol,
        EntityType::Syntometrine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EntityType::Ecg => "ECG",
            EntityType::StrokeAssessment => "STROKEASSESSMENT",
            EntityType::IvCannula => "IVCANNULA",
            EntityType::BurnsCooling => "BURNSCOOLING",
            EntityType::Valsalva => "VALSALVA",
            EntityType::Bleeding => "BLEEDING",
            EntityType::ObviousDeath => "OBVIOUSDEATH",
            EntityType::Gtn => "GTN",
            EntityType::Aspirin => "ASPIRIN",
            EntityType::NormalSaline => "NORMALSALINE",
            EntityType::Penthrox => "PENTHROX",
            EntityType::Dextrose => "DEXTROSE",
            EntityType::Adrenaline => "ADRENALINE",
            EntityType::Diazepam => "DIAZEPAM",
            EntityType::Salbutamol => "SALBUTAMOL",
            EntityType::Tramadol => "TRAMADOL",
            EntityType::Syntometrine => "SYNTOMETRINE",
        }
    }

    pub fn category(self) -> Category {
        match self {
            EntityType::Ecg
            | EntityType::StrokeAssessment
            | EntityType::IvCannula
            | EntityType::BurnsCooling
            | EntityType::Valsalva => Category::ClinicalProcedure,
            EntityType::Bleeding | EntityType::ObviousDeath => Category::ClinicalFinding,
            _ => Category::Medication,
        }
    }

    /// Category-qualified name, e.g. `PROCEDURE_ECG` or `MEDICATION_GTN`.
    pub fn qualified_name(self) -> String {
        let mut s = String::from(self.category().prefix());
        s.push('_');
        s.push_str(self.name());
        s
    }

    /// Position in [`EntityType::ALL`].
    pub fn index(self) -> usize {
        Self::ALL.iter().position(|e| *e == self).unwrap()
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Error for unrecognized entity names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownEntity(pub String);

impl fmt::Display for UnknownEntity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown entity {}", self.0)
    }
}

impl FromStr for EntityType {
    type Err = UnknownEntity;

    /// Accepts both the short form (`ECG`) and the category-qualified form
    /// (`PROCEDURE_ECG`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bare = s
            .strip_prefix("PROCEDURE_")
            .or_else(|| s.strip_prefix("FINDING_"))
            .or_else(|| s.strip_prefix("MEDICATION_"))
            .unwrap_or(s);
        EntityType::ALL
            .iter()
            .copied()
            .find(|e| e.name() == bare)
            .ok_or_else(|| UnknownEntity(String::from(s)))
    }
}

/// One IOB2 tag: `O`, `B-<entity>`, or `I-<entity>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    Outside,
    Begin(EntityType),
    Inside(EntityType),
}

impl Tag {
    /// Size of the tag set: B- and I- per entity plus O.
    pub const COUNT: usize = 2 * EntityType::COUNT + 1;

    /// Dense id in `0..COUNT`; `O` is 0.
    pub fn id(self) -> usize {
        match self {
            Tag::Outside => 0,
            Tag::Begin(e) => 1 + 2 * e.index(),
            Tag::Inside(e) => 2 + 2 * e.index(),
        }
    }

    pub fn from_id(id: usize) -> Option<Tag> {
        match id {
            0 => Some(Tag::Outside),
            _ if id < Self::COUNT => {
                let entity = EntityType::ALL[(id - 1) / 2];
                if id % 2 == 1 {
                    Some(Tag::Begin(entity))
                } else {
                    Some(Tag::Inside(entity))
                }
            }
            _ => None,
        }
    }

    pub fn entity(self) -> Option<EntityType> {
        match self {
            Tag::Outside => None,
            Tag::Begin(e) | Tag::Inside(e) => Some(e),
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::Outside => f.write_str("O"),
            Tag::Begin(e) => write!(f, "B-{}", e.name()),
            Tag::Inside(e) => write!(f, "I-{}", e.name()),
        }
    }
}

/// Error for malformed tag strings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvalidTag(pub String);

impl fmt::Display for InvalidTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid IOB2 tag {}", self.0)
    }
}

impl FromStr for Tag {
    type Err = InvalidTag;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "O" {
            return Ok(Tag::Outside);
        }
        let (ctor, rest): (fn(EntityType) -> Tag, &str) = if let Some(r) = s.strip_prefix("B-") {
            (Tag::Begin, r)
        } else if let Some(r) = s.strip_prefix("I-") {
            (Tag::Inside, r)
        } else {
            return Err(InvalidTag(String::from(s)));
        };
        rest.parse::<EntityType>()
            .map(ctor)
            .map_err(|_| InvalidTag(String::from(s)))
    }
}

impl Serialize for Tag {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Tag {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A typed mention: inclusive token indices `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntitySpan {
    pub entity: EntityType,
    pub start: usize,
    pub end: usize,
}

impl EntitySpan {
    pub fn new(entity: EntityType, start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        EntitySpan { entity, start, end }
    }

    /// Token count; spans are inclusive so this is never zero.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    /// True when the two spans share at least one token index.
    pub fn overlaps(&self, other: &EntitySpan) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

/// Error returned by [`tags_from_spans`] for out-of-bounds or overlapping spans.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpanError {
    OutOfBounds { start: usize, end: usize, len: usize },
    Overlap(EntitySpan, EntitySpan),
}

impl fmt::Display for SpanError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpanError::OutOfBounds { start, end, len } => {
                write!(f, "span [{start}, {end}] out of bounds for {len} tokens")
            }
            SpanError::Overlap(a, b) => write!(
                f,
                "overlapping spans {} [{}, {}] and {} [{}, {}]",
                a.entity, a.start, a.end, b.entity, b.start, b.end
            ),
        }
    }
}

/// Encode non-overlapping spans as an IOB2 sequence of length `len`.
pub fn tags_from_spans(spans: &[EntitySpan], len: usize) -> Result<Vec<Tag>, SpanError> {
    let mut tags = alloc::vec![Tag::Outside; len];
    let mut owner: Vec<Option<usize>> = alloc::vec![None; len];
    for (i, span) in spans.iter().enumerate() {
        if span.start > span.end || span.end >= len {
            return Err(SpanError::OutOfBounds {
                start: span.start,
                end: span.end,
                len,
            });
        }
        for t in span.start..=span.end {
            if let Some(prev) = owner[t] {
                return Err(SpanError::Overlap(spans[prev], *span));
            }
            owner[t] = Some(i);
            tags[t] = if t == span.start {
                Tag::Begin(span.entity)
            } else {
                Tag::Inside(span.entity)
            };
        }
    }
    Ok(tags)
}

/// Decode an IOB2 sequence into spans.
///
/// The input may be ill-formed (raw model output): an `I-` with no
/// compatible preceding tag opens a new span, and a type change splits
/// the span.
pub fn spans_from_tags(tags: &[Tag]) -> Vec<EntitySpan> {
    let mut spans = Vec::new();
    let mut open: Option<(EntityType, usize)> = None;
    for (i, tag) in tags.iter().enumerate() {
        match *tag {
            Tag::Outside => {
                if let Some((e, start)) = open.take() {
                    spans.push(EntitySpan::new(e, start, i - 1));
                }
            }
            Tag::Begin(e) => {
                if let Some((prev, start)) = open.take() {
                    spans.push(EntitySpan::new(prev, start, i - 1));
                }
                open = Some((e, i));
            }
            Tag::Inside(e) => match open {
                Some((prev, _)) if prev == e => {}
                _ => {
                    if let Some((prev, start)) = open.take() {
                        spans.push(EntitySpan::new(prev, start, i - 1));
                    }
                    open = Some((e, i));
                }
            },
        }
    }
    if let Some((e, start)) = open {
        spans.push(EntitySpan::new(e, start, tags.len() - 1));
    }
    spans
}

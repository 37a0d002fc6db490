//! Protocol audit: scenario eligibility, per-action verdicts, aggregation.
//!
//! Eligibility follows the protocol table: acute coronary syndrome on a
//! "Chest Pain" chief complaint, stroke on "Suspected Stroke", and the
//! bleeding patient on an "Active Bleeding" physical finding or a bleeding
//! entity extracted from the report. Actions are checked against evidence
//! only — a documented attempt counts as a pass, and negation is not
//! modeled.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::entities::{EntitySpan, EntityType};
use crate::records::CaseRecord;

/// The three audited clinical scenarios.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum ScenarioType {
    AcuteCoronarySyndrome,
    Stroke,
    BleedingPatient,
}

impl ScenarioType {
    pub const ALL: [ScenarioType; 3] = [
        ScenarioType::AcuteCoronarySyndrome,
        ScenarioType::Stroke,
        ScenarioType::BleedingPatient,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioType::AcuteCoronarySyndrome => "AcuteCoronarySyndrome",
            ScenarioType::Stroke => "Stroke",
            ScenarioType::BleedingPatient => "BleedingPatient",
        }
    }
}

impl fmt::Display for ScenarioType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Boolean fields of [`CaseRecord`] usable as audit evidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructuredFlag {
    CapillaryGlucoseRecorded,
    BleedingControlApplied,
}

impl StructuredFlag {
    pub fn field_name(self) -> &'static str {
        match self {
            StructuredFlag::CapillaryGlucoseRecorded => "capillary_glucose_recorded",
            StructuredFlag::BleedingControlApplied => "bleeding_control_applied",
        }
    }

    fn value(self, rec: &CaseRecord) -> bool {
        match self {
            StructuredFlag::CapillaryGlucoseRecorded => rec.capillary_glucose_recorded,
            StructuredFlag::BleedingControlApplied => rec.bleeding_control_applied,
        }
    }
}

/// What counts as evidence that an action was performed or attempted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvidenceSpec {
    /// Any of these entity types extracted from the report.
    EntityAnyOf(Vec<EntityType>),
    /// A structured boolean field set on the record.
    StructuredFlag(StructuredFlag),
}

/// Gate for conditional actions, on systolic blood pressure in mmHg.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SbpCondition {
    AtLeast(u16),
    Below(u16),
}

impl SbpCondition {
    pub fn holds(self, sbp: u16) -> bool {
        match self {
            SbpCondition::AtLeast(t) => sbp >= t,
            SbpCondition::Below(t) => sbp < t,
        }
    }
}

impl fmt::Display for SbpCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SbpCondition::AtLeast(t) => write!(f, "SBP >= {t}"),
            SbpCondition::Below(t) => write!(f, "SBP < {t}"),
        }
    }
}

/// One protocol action with its evidence spec; `condition: None` means the
/// action is always required for the scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRule {
    pub action_id: String,
    pub description: String,
    pub evidence: EvidenceSpec,
    pub condition: Option<SbpCondition>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioRules {
    pub scenario: ScenarioType,
    pub actions: Vec<ActionRule>,
}

/// The loaded protocol table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolRules {
    pub scenarios: Vec<ScenarioRules>,
}

impl ProtocolRules {
    pub fn for_scenario(&self, scenario: ScenarioType) -> Option<&ScenarioRules> {
        self.scenarios.iter().find(|s| s.scenario == scenario)
    }
}

/// Outcome for one protocol action on one case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Condition evaluated false; the action was not indicated.
    NotRequired,
    /// Condition could not be evaluated (SBP missing).
    Indeterminate,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::NotRequired => "not_required",
            Verdict::Indeterminate => "indeterminate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionVerdict {
    pub action_id: String,
    pub required: bool,
    pub verdict: Verdict,
}

/// Verdicts for one (case, scenario) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditResult {
    pub incident_id: String,
    pub provider_id: String,
    pub scenario: ScenarioType,
    pub verdicts: Vec<ActionVerdict>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuditError {
    MissingScenarioRules(ScenarioType),
}

impl fmt::Display for AuditError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AuditError::MissingScenarioRules(s) => {
                write!(f, "protocol rules define no actions for scenario {s}")
            }
        }
    }
}

fn eq_ignore_case(a: &str, b: &str) -> bool {
    a.len() == b.len()
        && a.chars()
            .zip(b.chars())
            .all(|(x, y)| x.eq_ignore_ascii_case(&y))
}

/// Scenarios a case is eligible for. A record may match several.
pub fn determine_scenarios(rec: &CaseRecord, entities: &[EntitySpan]) -> Vec<ScenarioType> {
    let mut scenarios = Vec::new();
    if let Some(cc) = rec.chief_complaint.as_deref() {
        if eq_ignore_case(cc, "Chest Pain") {
            scenarios.push(ScenarioType::AcuteCoronarySyndrome);
        }
        if eq_ignore_case(cc, "Suspected Stroke") {
            scenarios.push(ScenarioType::Stroke);
        }
    }
    let bleeding_finding = rec
        .physical_findings
        .as_deref()
        .unwrap_or(&[])
        .iter()
        .any(|f| eq_ignore_case(f, "Active Bleeding"));
    let bleeding_entity = entities.iter().any(|s| s.entity == EntityType::Bleeding);
    if bleeding_finding || bleeding_entity {
        scenarios.push(ScenarioType::BleedingPatient);
    }
    scenarios
}

fn evidence_present(spec: &EvidenceSpec, rec: &CaseRecord, entities: &[EntitySpan]) -> bool {
    match spec {
        EvidenceSpec::EntityAnyOf(types) => {
            entities.iter().any(|s| types.contains(&s.entity))
        }
        EvidenceSpec::StructuredFlag(flag) => flag.value(rec),
    }
}

/// Audit one case against the protocol table.
///
/// Conditional actions with an unknown SBP are reported indeterminate and
/// excluded from the required set.
pub fn evaluate_case(
    rec: &CaseRecord,
    entities: &[EntitySpan],
    rules: &ProtocolRules,
) -> Result<Vec<AuditResult>, AuditError> {
    let mut results = Vec::new();
    for scenario in determine_scenarios(rec, entities) {
        let scenario_rules = rules
            .for_scenario(scenario)
            .ok_or(AuditError::MissingScenarioRules(scenario))?;
        let mut verdicts = Vec::with_capacity(scenario_rules.actions.len());
        for action in &scenario_rules.actions {
            let required = match action.condition {
                None => Some(true),
                Some(cond) => rec.systolic_bp.map(|sbp| cond.holds(sbp)),
            };
            let (required, verdict) = match required {
                Some(true) => {
                    let pass = evidence_present(&action.evidence, rec, entities);
                    (true, if pass { Verdict::Pass } else { Verdict::Fail })
                }
                Some(false) => (false, Verdict::NotRequired),
                None => (false, Verdict::Indeterminate),
            };
            verdicts.push(ActionVerdict {
                action_id: action.action_id.clone(),
                required,
                verdict,
            });
        }
        results.push(AuditResult {
            incident_id: rec.incident_id.clone(),
            provider_id: rec.provider_id.clone(),
            scenario,
            verdicts,
        });
    }
    Ok(results)
}

/// Aggregation granularity for audit reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationLevel {
    Case,
    Provider,
    System,
}

/// Pass frequency for one (scenario, action) cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyRow {
    pub scenario: ScenarioType,
    pub action_id: String,
    pub required: u64,
    pub passed: u64,
}

impl FrequencyRow {
    /// `None` when the action was never required (reported as N/A, not 0).
    pub fn frequency(&self) -> Option<f64> {
        if self.required == 0 {
            None
        } else {
            Some(self.passed as f64 / self.required as f64)
        }
    }
}

/// An aggregated audit report at one of the three levels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AuditReport {
    Case(Vec<AuditResult>),
    Provider(BTreeMap<String, Vec<FrequencyRow>>),
    System(Vec<FrequencyRow>),
}

fn frequency_rows<'a>(results: impl Iterator<Item = &'a AuditResult>) -> Vec<FrequencyRow> {
    let mut cells: BTreeMap<(ScenarioType, String), (u64, u64)> = BTreeMap::new();
    for result in results {
        for v in &result.verdicts {
            let cell = cells
                .entry((result.scenario, v.action_id.clone()))
                .or_insert((0, 0));
            if v.required {
                cell.0 += 1;
                if v.verdict == Verdict::Pass {
                    cell.1 += 1;
                }
            }
        }
    }
    cells
        .into_iter()
        .map(|((scenario, action_id), (required, passed))| FrequencyRow {
            scenario,
            action_id,
            required,
            passed,
        })
        .collect()
}

/// Aggregate per-case results to the requested level.
pub fn aggregate(results: &[AuditResult], level: AggregationLevel) -> AuditReport {
    match level {
        AggregationLevel::Case => AuditReport::Case(results.to_vec()),
        AggregationLevel::System => AuditReport::System(frequency_rows(results.iter())),
        AggregationLevel::Provider => {
            let mut by_provider: BTreeMap<String, Vec<&AuditResult>> = BTreeMap::new();
            for r in results {
                by_provider.entry(r.provider_id.clone()).or_default().push(r);
            }
            AuditReport::Provider(
                by_provider
                    .into_iter()
                    .map(|(p, rs)| (p, frequency_rows(rs.into_iter())))
                    .collect(),
            )
        }
    }
}

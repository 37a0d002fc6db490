//! Protocol-rules file loading (TOML) and validation.

use std::path::Path;

use emsaudit_core::audit::{
    ActionRule, EvidenceSpec, ProtocolRules, SbpCondition, ScenarioRules, ScenarioType,
    StructuredFlag,
};
use emsaudit_core::entities::EntityType;
use serde::Deserialize;
use thiserror::Error;

/// SBP thresholds the protocol table is allowed to use, mmHg.
const ALLOWED_THRESHOLDS: [u16; 2] = [80, 90];

#[derive(Debug, Deserialize)]
struct RulesFile {
    #[serde(default)]
    scenarios: Vec<ScenarioSection>,
}

#[derive(Debug, Deserialize)]
struct ScenarioSection {
    scenario: String,
    #[serde(default)]
    actions: Vec<ActionSection>,
}

#[derive(Debug, Deserialize)]
struct ActionSection {
    action_id: String,
    #[serde(default)]
    description: String,
    entities: Option<Vec<String>>,
    flag: Option<String>,
    sbp_at_least: Option<u16>,
    sbp_below: Option<u16>,
}

#[derive(Debug, Error)]
pub enum RulesError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("rules file does not parse: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("action {0:?}: unknown entity {1:?}")]
    UnknownEntity(String, String),
    #[error("action {0:?}: unknown structured flag {1:?}")]
    UnknownFlag(String, String),
    #[error("action {0:?} must name exactly one of `entities` or `flag`")]
    AmbiguousEvidence(String),
    #[error("action {0:?} sets both sbp_at_least and sbp_below")]
    ConflictingConditions(String),
    #[error("action {0:?}: SBP threshold {1} is not one of the protocol values {ALLOWED_THRESHOLDS:?}")]
    BadThreshold(String, u16),
    #[error("duplicate scenario {0}")]
    DuplicateScenario(ScenarioType),
}

pub fn parse_rules(text: &str) -> Result<ProtocolRules, RulesError> {
    let file: RulesFile = toml::from_str(text)?;
    let mut scenarios = Vec::new();
    for section in file.scenarios {
        let scenario = match section.scenario.as_str() {
            "AcuteCoronarySyndrome" => ScenarioType::AcuteCoronarySyndrome,
            "Stroke" => ScenarioType::Stroke,
            "BleedingPatient" => ScenarioType::BleedingPatient,
            other => return Err(RulesError::UnknownScenario(other.to_string())),
        };
        if scenarios.iter().any(|s: &ScenarioRules| s.scenario == scenario) {
            return Err(RulesError::DuplicateScenario(scenario));
        }
        let mut actions = Vec::new();
        for action in section.actions {
            let evidence = match (&action.entities, &action.flag) {
                (Some(names), None) => {
                    let mut types = Vec::new();
                    for name in names {
                        let entity: EntityType = name.parse().map_err(|_| {
                            RulesError::UnknownEntity(action.action_id.clone(), name.clone())
                        })?;
                        types.push(entity);
                    }
                    EvidenceSpec::EntityAnyOf(types)
                }
                (None, Some(flag)) => match flag.as_str() {
                    "capillary_glucose_recorded" => {
                        EvidenceSpec::StructuredFlag(StructuredFlag::CapillaryGlucoseRecorded)
                    }
                    "bleeding_control_applied" => {
                        EvidenceSpec::StructuredFlag(StructuredFlag::BleedingControlApplied)
                    }
                    other => {
                        return Err(RulesError::UnknownFlag(
                            action.action_id.clone(),
                            other.to_string(),
                        ))
                    }
                },
                _ => return Err(RulesError::AmbiguousEvidence(action.action_id.clone())),
            };
            let condition = match (action.sbp_at_least, action.sbp_below) {
                (None, None) => None,
                (Some(t), None) => Some(SbpCondition::AtLeast(t)),
                (None, Some(t)) => Some(SbpCondition::Below(t)),
                (Some(_), Some(_)) => {
                    return Err(RulesError::ConflictingConditions(action.action_id))
                }
            };
            if let Some(SbpCondition::AtLeast(t) | SbpCondition::Below(t)) = condition {
                if !ALLOWED_THRESHOLDS.contains(&t) {
                    return Err(RulesError::BadThreshold(action.action_id, t));
                }
            }
            actions.push(ActionRule {
                action_id: action.action_id,
                description: action.description,
                evidence,
                condition,
            });
        }
        scenarios.push(ScenarioRules { scenario, actions });
    }
    Ok(ProtocolRules { scenarios })
}

pub fn load_rules(path: &Path) -> Result<ProtocolRules, RulesError> {
    let text = std::fs::read_to_string(path).map_err(|source| RulesError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_rules(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::DEFAULT_RULES;

    #[test]
    fn default_rules_encode_the_protocol_table() {
        let rules = parse_rules(DEFAULT_RULES).unwrap();
        assert_eq!(rules.scenarios.len(), 3);

        let acs = rules
            .for_scenario(ScenarioType::AcuteCoronarySyndrome)
            .unwrap();
        assert_eq!(acs.actions.len(), 3);
        assert_eq!(acs.actions[0].condition, None);
        assert_eq!(acs.actions[1].condition, None);
        assert_eq!(acs.actions[2].condition, Some(SbpCondition::AtLeast(90)));

        let stroke = rules.for_scenario(ScenarioType::Stroke).unwrap();
        assert_eq!(stroke.actions.len(), 2);
        assert!(matches!(
            stroke.actions[1].evidence,
            EvidenceSpec::StructuredFlag(StructuredFlag::CapillaryGlucoseRecorded)
        ));

        let bleeding = rules.for_scenario(ScenarioType::BleedingPatient).unwrap();
        assert_eq!(bleeding.actions.len(), 3);
        assert_eq!(bleeding.actions[0].condition, None);
        assert_eq!(bleeding.actions[1].condition, Some(SbpCondition::Below(80)));
        assert_eq!(bleeding.actions[2].condition, Some(SbpCondition::Below(80)));
    }

    #[test]
    fn rejects_unknown_scenario() {
        let err = parse_rules("[[scenarios]]\nscenario = \"Sepsis\"\n").unwrap_err();
        assert!(matches!(err, RulesError::UnknownScenario(_)));
    }

    #[test]
    fn rejects_off_protocol_threshold() {
        let text = r#"
[[scenarios]]
scenario = "Stroke"
[[scenarios.actions]]
action_id = "x"
entities = ["ECG"]
sbp_at_least = 85
"#;
        assert!(matches!(
            parse_rules(text).unwrap_err(),
            RulesError::BadThreshold(_, 85)
        ));
    }

    #[test]
    fn rejects_ambiguous_evidence() {
        let text = r#"
[[scenarios]]
scenario = "Stroke"
[[scenarios.actions]]
action_id = "x"
entities = ["ECG"]
flag = "capillary_glucose_recorded"
"#;
        assert!(matches!(
            parse_rules(text).unwrap_err(),
            RulesError::AmbiguousEvidence(_)
        ));
    }
}

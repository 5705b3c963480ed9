use std::collections::BTreeMap;
use std::fmt;

use crate::model::Vocabulary;

use super::TransformError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CodeKind {
    IncidentType,
    Priority,
    Disposition,
}

impl CodeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CodeKind::IncidentType => "incidentType",
            CodeKind::Priority => "priority",
            CodeKind::Disposition => "disposition",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "incidentType" => Some(CodeKind::IncidentType),
            "priority" => Some(CodeKind::Priority),
            "disposition" => Some(CodeKind::Disposition),
            _ => None,
        }
    }
}

impl fmt::Display for CodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Result of looking up an agency code. Unknown codes are never dropped:
/// they come back as `Unmapped` with the caller's original text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mapping {
    Term(String),
    Priority(u8),
    Text(String),
    Unmapped { kind: CodeKind, code: String },
}

/// Agency code tables, loaded from `KIND<TAB>CODE<TAB>TARGET` lines.
/// Lookup is case-insensitive on trimmed codes.
#[derive(Debug, Clone, Default)]
pub struct MappingRegistry {
    incident_types: BTreeMap<String, String>,
    priorities: BTreeMap<String, u8>,
    dispositions: BTreeMap<String, String>,
}

fn fold(code: &str) -> String {
    code.trim().to_lowercase()
}

impl MappingRegistry {
    /// Parses the registry and checks every incident-type target against the vocabulary.
    pub fn parse(text: &str, vocabulary: &Vocabulary) -> Result<Self, TransformError> {
        let mut reg = MappingRegistry::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let bad = |msg: String| TransformError::Registry(format!("line {}: {msg}", idx + 1));
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(bad(format!("expected 3 tab-separated columns, found {}", cols.len())));
            }
            let kind = CodeKind::parse(cols[0].trim()).ok_or_else(|| bad(format!("unknown kind {:?}", cols[0])))?;
            let code = fold(cols[1]);
            if code.is_empty() {
                return Err(bad("empty code".into()));
            }
            let target = cols[2].trim();
            let dup = match kind {
                CodeKind::IncidentType => {
                    if !vocabulary.contains(target) {
                        return Err(bad(format!("target {target:?} is not a registry term")));
                    }
                    reg.incident_types.insert(code, target.to_string()).is_some()
                }
                CodeKind::Priority => {
                    let p: u8 = target
                        .parse()
                        .ok()
                        .filter(|p| (1..=5).contains(p))
                        .ok_or_else(|| bad(format!("priority target {target:?} outside 1..=5")))?;
                    reg.priorities.insert(code, p).is_some()
                }
                CodeKind::Disposition => {
                    if target.is_empty() {
                        return Err(bad("empty disposition text".into()));
                    }
                    reg.dispositions.insert(code, target.to_string()).is_some()
                }
            };
            if dup {
                return Err(bad(format!("duplicate {kind} code {:?}", cols[1].trim())));
            }
        }
        Ok(reg)
    }

    pub fn bundled(vocabulary: &Vocabulary) -> Self {
        Self::parse(crate::bundled::MAPPINGS, vocabulary).expect("bundled mappings are well-formed")
    }

    pub fn map_code(&self, kind: CodeKind, code: &str) -> Mapping {
        let key = fold(code);
        let hit = match kind {
            CodeKind::IncidentType => self.incident_types.get(&key).cloned().map(Mapping::Term),
            CodeKind::Priority => self.priorities.get(&key).copied().map(Mapping::Priority),
            CodeKind::Disposition => self.dispositions.get(&key).cloned().map(Mapping::Text),
        };
        hit.unwrap_or_else(|| Mapping::Unmapped { kind, code: code.to_string() })
    }

    pub fn len(&self) -> usize {
        self.incident_types.len() + self.priorities.len() + self.dispositions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

use std::collections::BTreeMap;
use std::path::Path;

use super::ModelError;

/// Controlled vocabulary for `incidentTypeCommonRegistryText`.
///
/// File format: one `TERM<TAB>description` per line; the description is
/// optional, blank lines and lines starting with `#` are ignored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    terms: BTreeMap<String, String>,
}

impl Vocabulary {
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let mut terms = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (term, desc) = match line.split_once('\t') {
                Some((t, d)) => (t.trim(), d.trim()),
                None => (line.trim(), ""),
            };
            if term.is_empty() {
                return Err(ModelError::Vocabulary(format!("line {}: empty term", idx + 1)));
            }
            if terms.insert(term.to_string(), desc.to_string()).is_some() {
                return Err(ModelError::Vocabulary(format!("line {}: duplicate term {term:?}", idx + 1)));
            }
        }
        Ok(Self { terms })
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ModelError::Vocabulary(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Registry terms shipped with the crate.
    pub fn bundled() -> Self {
        Self::parse(crate::bundled::REGISTRY).expect("bundled registry is well-formed")
    }

    pub fn contains(&self, term: &str) -> bool {
        self.terms.contains_key(term)
    }

    pub fn description(&self, term: &str) -> Option<&str> {
        self.terms.get(term).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.terms.keys().map(String::as_str)
    }
}

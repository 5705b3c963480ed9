use std::ops::Range;

use regex::Regex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntityKind {
    Person,
    Location,
    Organization,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    pub kind: EntityKind,
    pub value: String,
    /// Byte range of `value` within the input text.
    pub span: Range<usize>,
}

/// Pulls people, places and organizations out of free text.
///
/// Implementations must return spans that lie inside the input and slice
/// it on character boundaries.
pub trait Extractor: Send + Sync {
    fn extract(&self, text: &str) -> Vec<Entity>;
}

/// Extracts nothing.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoopExtractor;

impl Extractor for NoopExtractor {
    fn extract(&self, _text: &str) -> Vec<Entity> {
        Vec::new()
    }
}

/// Deterministic keyword and pattern extractor.
///
/// Places come from a list of known names (typically the gazetteer) plus
/// capitalised phrases after `at`/`near`/`on`/`in` that end in a street or
/// landmark word. People are titled names (`Officer Ramirez`). Organizations
/// are capitalised phrases ending in an institutional keyword.
#[derive(Debug, Clone)]
pub struct RuleExtractor {
    places: Vec<(String, Regex)>,
    place_pattern: Regex,
    person_pattern: Regex,
    org_pattern: Regex,
}

const PLACE_SUFFIXES: &str = "Street|St|Avenue|Ave|Road|Rd|Boulevard|Blvd|Drive|Dr|Way|Lane|Ln|Highway|Hwy|Freeway|Park|Plaza|Market|Mall|River|Creek|Bridge|School|Campus|Station|Pier|Beach";
const ORG_SUFFIXES: &str = "Department|Service|Agency|Authority|Police|Sheriff|Fire-Rescue|Hospital|Office|Patrol|Company|Utilities|Union-Tribune|District|University|Bureau|Center";

impl RuleExtractor {
    pub fn new<I, S>(known_places: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut places: Vec<(String, Regex)> = known_places
            .into_iter()
            .map(|p| p.as_ref().trim().to_string())
            .filter(|p| p.chars().count() >= 3)
            .map(|p| {
                let re = Regex::new(&format!(r"(?i)\b{}\b", regex::escape(&p))).expect("escaped literal");
                (p, re)
            })
            .collect();
        // longest names first so "San Diego River" wins over "San Diego"
        places.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        let cap = r"[A-Z][\w'\-]*";
        Self {
            places,
            place_pattern: Regex::new(&format!(
                r"\b(?:at|near|on|in|along|by)\s+((?:the\s+)?(?:{cap}\s+)*(?:{PLACE_SUFFIXES}))\b"
            ))
            .expect("valid pattern"),
            person_pattern: Regex::new(
                r"\b(?:Mr|Mrs|Ms|Dr|Officer|Deputy|Sgt|Sergeant|Capt|Captain|Lt|Chief)\.?\s+[A-Z][a-z]+(?:\s+[A-Z][a-z]+)?",
            )
            .expect("valid pattern"),
            org_pattern: Regex::new(&format!(r"\b(?:{cap}\s+)*(?:{ORG_SUFFIXES})\b")).expect("valid pattern"),
        }
    }
}

impl Default for RuleExtractor {
    fn default() -> Self {
        Self::new(std::iter::empty::<&str>())
    }
}

impl Extractor for RuleExtractor {
    fn extract(&self, text: &str) -> Vec<Entity> {
        let mut found: Vec<Entity> = Vec::new();
        let mut push = |kind: EntityKind, span: Range<usize>| {
            let overlaps = found.iter().any(|e| e.span.start < span.end && span.start < e.span.end);
            if !overlaps && !span.is_empty() {
                found.push(Entity { kind, value: text[span.clone()].to_string(), span });
            }
        };
        for m in self.person_pattern.find_iter(text) {
            push(EntityKind::Person, m.range());
        }
        for (_, re) in &self.places {
            for m in re.find_iter(text) {
                push(EntityKind::Location, m.range());
            }
        }
        for caps in self.place_pattern.captures_iter(text) {
            if let Some(m) = caps.get(1) {
                push(EntityKind::Location, m.range());
            }
        }
        for m in self.org_pattern.find_iter(text) {
            // a bare keyword ("the department") is not a name
            if m.as_str().contains(char::is_whitespace) || m.as_str().contains('-') {
                push(EntityKind::Organization, m.range());
            }
        }
        found.sort_by_key(|e| e.span.start);
        found
    }
}

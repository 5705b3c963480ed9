//! Reference data compiled into the binary so the tool runs without a data directory.

pub const REGISTRY: &str = include_str!("../data/registry.tsv");
pub const MAPPINGS: &str = include_str!("../data/mappings.tsv");
pub const TEMPLATES: &str = include_str!("../data/templates.json");
pub const GAZETTEER: &str = include_str!("../data/gazetteer.jsonl");
pub const GEOCODER_FIXTURES: &str = include_str!("../data/geocoder_fixtures.json");

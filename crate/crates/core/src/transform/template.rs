use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::{document_to_value, is_known_field_path, EidoDocument};

use super::TransformError;

/// Which components and fields a class of incidents is expected to carry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EidoTemplate {
    pub template_id: String,
    /// Registry terms this template covers; `"*"` matches any type.
    pub applies_to_types: Vec<String>,
    pub required_fields: Vec<String>,
    #[serde(default)]
    pub optional_fields: Vec<String>,
}

impl EidoTemplate {
    pub fn applies_to(&self, incident_type: Option<&str>) -> bool {
        self.applies_to_types.iter().any(|t| t == "*" || Some(t.as_str()) == incident_type)
    }

    fn check_paths(&self) -> Result<(), TransformError> {
        for p in self.required_fields.iter().chain(&self.optional_fields) {
            if !is_known_field_path(p) {
                return Err(TransformError::Template(format!(
                    "template {:?}: unknown field path {p:?}",
                    self.template_id
                )));
            }
        }
        Ok(())
    }

    /// Required paths with no value in `doc`, in template order.
    pub fn missing_required(&self, doc: &EidoDocument) -> Vec<String> {
        let value = document_to_value(doc);
        self.required_fields.iter().filter(|p| !path_present(&value, p)).cloned().collect()
    }
}

fn path_present(doc: &Value, path: &str) -> bool {
    let (head, tail) = match path.split_once('.') {
        Some((h, t)) => (h, Some(t)),
        None => (path, None),
    };
    match (doc.get(head), tail) {
        (None, _) => false,
        (Some(Value::Array(items)), None) => !items.is_empty(),
        (Some(Value::Array(items)), Some(field)) => items.iter().any(|i| i.get(field).is_some()),
        (Some(obj), Some(field)) => obj.get(field).is_some(),
        (Some(_), None) => true,
    }
}

pub fn parse_templates(text: &str) -> Result<Vec<EidoTemplate>, TransformError> {
    let templates: Vec<EidoTemplate> =
        serde_json::from_str(text).map_err(|e| TransformError::Template(e.to_string()))?;
    for t in &templates {
        t.check_paths()?;
    }
    Ok(templates)
}

pub fn bundled_templates() -> Vec<EidoTemplate> {
    parse_templates(crate::bundled::TEMPLATES).expect("bundled templates are well-formed")
}

/// First template covering the type, in file order.
pub fn select_template<'a>(templates: &'a [EidoTemplate], incident_type: Option<&str>) -> Option<&'a EidoTemplate> {
    templates.iter().find(|t| t.applies_to(incident_type))
}

//! Prompt vocabularies: per-class synonym lists for the detector and the
//! related/unrelated candidate list for the image-text scorer.
//!
//! Prompt files are TOML:
//!
//! ```toml
//! unrelated = ["ground", "grass"]
//!
//! [[classes]]
//! id = 1
//! name = "building"
//! synonyms = ["roof", "the roof of a building", "house"]
//! ```
//!
//! `synonyms` may be omitted, in which case the class name is the only
//! detector prompt.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ClassId;

/// Scorer template; `{name}` is replaced by the class or distractor name.
pub const DEFAULT_TEMPLATE: &str = "The satellite view of {name}";
const PLACEHOLDER: &str = "{name}";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub id: ClassId,
    pub name: String,
    #[serde(default)]
    pub synonyms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PromptFile {
    classes: Vec<ClassSpec>,
    #[serde(default)]
    unrelated: Vec<String>,
}

/// Validated, immutable prompt vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptSet {
    classes: Vec<ClassSpec>,
    unrelated: Vec<String>,
    lookup: HashMap<String, ClassId>,
}

/// One entry of the scorer's candidate list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub text: String,
    /// `None` for unrelated (distractor) prompts.
    pub class_id: Option<ClassId>,
}

fn norm(s: &str) -> String {
    s.trim().to_lowercase()
}

impl PromptSet {
    pub fn new(mut classes: Vec<ClassSpec>, unrelated: Vec<String>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::PromptSet("at least one class is required".into()));
        }
        if classes.len() > ClassId::MAX as usize {
            return Err(Error::PromptSet(format!(
                "{} classes exceed the 8-bit label range",
                classes.len()
            )));
        }
        classes.sort_by_key(|c| c.id);
        for (i, c) in classes.iter_mut().enumerate() {
            if c.id as usize != i + 1 {
                return Err(Error::PromptSet(format!(
                    "class ids must be unique and contiguous from 1 (found {} at position {})",
                    c.id,
                    i + 1
                )));
            }
            if c.name.trim().is_empty() {
                return Err(Error::PromptSet(format!(
                    "class {} has an empty name",
                    c.id
                )));
            }
            if c.synonyms.is_empty() {
                c.synonyms.push(c.name.clone());
            }
            if c.synonyms.iter().any(|s| s.trim().is_empty()) {
                return Err(Error::PromptSet(format!(
                    "class `{}` has an empty synonym",
                    c.name
                )));
            }
        }

        let mut lookup: HashMap<String, ClassId> = HashMap::new();
        for c in &classes {
            let mut own: Vec<String> = c.synonyms.iter().map(|s| norm(s)).collect();
            let name = norm(&c.name);
            if !own.contains(&name) {
                own.push(name);
            }
            for s in own {
                if let Some(prev) = lookup.insert(s.clone(), c.id) {
                    if prev != c.id {
                        return Err(Error::PromptSet(format!(
                            "synonym `{s}` is claimed by classes {prev} and {}",
                            c.id
                        )));
                    }
                    // repeated within the same class: harmless
                }
            }
        }

        let mut seen_unrelated = Vec::new();
        for u in &unrelated {
            let n = norm(u);
            if n.is_empty() {
                return Err(Error::PromptSet("empty unrelated prompt".into()));
            }
            if let Some(c) = lookup.get(&n) {
                return Err(Error::PromptSet(format!(
                    "unrelated prompt `{u}` collides with a synonym of class {c}"
                )));
            }
            if seen_unrelated.contains(&n) {
                return Err(Error::PromptSet(format!(
                    "duplicate unrelated prompt `{u}`"
                )));
            }
            seen_unrelated.push(n);
        }

        Ok(Self {
            classes,
            unrelated,
            lookup,
        })
    }

    pub fn from_toml_str(text: &str) -> std::result::Result<Self, String> {
        let file: PromptFile = toml::from_str(text).map_err(|e| e.to_string())?;
        PromptSet::new(file.classes, file.unrelated).map_err(|e| e.to_string())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|m| Error::parse(path, m))
    }

    pub fn to_toml_string(&self) -> String {
        let file = PromptFile {
            classes: self.classes.clone(),
            unrelated: self.unrelated.clone(),
        };
        toml::to_string_pretty(&file).expect("prompt set serializes")
    }

    pub fn classes(&self) -> &[ClassSpec] {
        &self.classes
    }

    pub fn unrelated(&self) -> &[String] {
        &self.unrelated
    }

    /// Highest class id, i.e. the label range of masks produced with this set.
    pub fn class_number(&self) -> ClassId {
        self.classes.len() as ClassId
    }

    pub fn class(&self, id: ClassId) -> Option<&ClassSpec> {
        self.classes.get((id as usize).checked_sub(1)?)
    }
}

/// Flattened `(synonym, class_id)` pairs in class order, then synonym order.
pub fn detector_vocabulary(ps: &PromptSet) -> Vec<(String, ClassId)> {
    ps.classes
        .iter()
        .flat_map(|c| c.synonyms.iter().map(move |s| (s.clone(), c.id)))
        .collect()
}

/// Case-insensitive exact match of a detector label against every synonym.
pub fn canonicalize(raw_label: &str, ps: &PromptSet) -> Option<ClassId> {
    ps.lookup.get(&norm(raw_label)).copied()
}

pub fn render_template(template: &str, name: &str) -> String {
    template.replace(PLACEHOLDER, name)
}

pub fn validate_template(template: &str) -> Result<()> {
    if template.contains(PLACEHOLDER) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "scorer template `{template}` lacks the {PLACEHOLDER} placeholder"
        )))
    }
}

/// Templated class names (tagged with their id) followed by templated
/// unrelated prompts (untagged).
pub fn scorer_candidates(ps: &PromptSet, template: &str) -> Vec<Candidate> {
    let related = ps.classes.iter().map(|c| Candidate {
        text: render_template(template, &c.name),
        class_id: Some(c.id),
    });
    let unrelated = ps.unrelated.iter().map(|u| Candidate {
        text: render_template(template, u),
        class_id: None,
    });
    related.chain(unrelated).collect()
}

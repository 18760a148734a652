//! Trait-specific prompt assembly: task description, then transcript, then
//! the subject's demographic block, one per line.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::hexaco::Trait;

const BUILTIN_BANK: &str = include_str!("variants.toml");
pub const NO_TRANSCRIPT: &str = "[no transcript]";
pub const UNKNOWN: &str = "unknown";

/// Demographic fields attached to an interview.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<String>,
    #[serde(default, deserialize_with = "de_age", skip_serializing_if = "Option::is_none")]
    pub age: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub education: Option<String>,
    #[serde(default, deserialize_with = "de_text", skip_serializing_if = "Option::is_none")]
    pub work_experience: Option<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TextOrNumber {
    Text(String),
    Int(i64),
    Float(f64),
}

fn de_age<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u32>, D::Error> {
    use serde::de::Error as _;
    let raw: Option<TextOrNumber> = Option::deserialize(d)?;
    let age = match raw {
        None => return Ok(None),
        Some(TextOrNumber::Text(s)) if s.trim().is_empty() => return Ok(None),
        Some(TextOrNumber::Text(s)) => s.trim().parse::<i64>().map_err(|_| D::Error::custom(format!("age `{s}` is not an integer")))?,
        Some(TextOrNumber::Int(i)) => i,
        Some(TextOrNumber::Float(f)) => return Err(D::Error::custom(format!("age {f} is not an integer"))),
    };
    if age <= 0 || age > u32::MAX as i64 {
        return Err(D::Error::custom(format!("age {age} is not a positive integer")));
    }
    Ok(Some(age as u32))
}

fn de_text<'de, D: Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    let raw: Option<TextOrNumber> = Option::deserialize(d)?;
    Ok(raw.map(|v| match v {
        TextOrNumber::Text(s) => s,
        TextOrNumber::Int(i) => i.to_string(),
        TextOrNumber::Float(f) => f.to_string(),
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaKey {
    Gender,
    Age,
    Education,
    WorkExperience,
}

impl SubjectMeta {
    fn value(&self, key: MetaKey) -> String {
        let v = match key {
            MetaKey::Gender => self.gender.clone(),
            MetaKey::Age => self.age.map(|a| a.to_string()),
            MetaKey::Education => self.education.clone(),
            MetaKey::WorkExperience => self.work_experience.clone(),
        };
        v.filter(|s| !s.trim().is_empty())
            .unwrap_or_else(|| UNKNOWN.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaField {
    pub field: MetaKey,
    pub label: String,
}

fn default_meta_fields() -> Vec<MetaField> {
    [
        (MetaKey::Gender, "Gender"),
        (MetaKey::Age, "Age"),
        (MetaKey::Education, "Education"),
        (MetaKey::WorkExperience, "Work experience"),
    ]
    .into_iter()
    .map(|(field, label)| MetaField {
        field,
        label: label.to_string(),
    })
    .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptTemplate {
    pub trait_id: Trait,
    pub task_description: String,
    pub meta_rendering: Vec<MetaField>,
}

impl PromptTemplate {
    pub fn validate(&self) -> Result<()> {
        if self.task_description.trim().is_empty() {
            return Err(Error::PromptBank(format!("empty task description for {}", self.trait_id)));
        }
        if !self.task_description.contains(self.trait_id.full_name()) {
            return Err(Error::PromptBank(format!(
                "task description for {} does not mention `{}`",
                self.trait_id,
                self.trait_id.full_name()
            )));
        }
        Ok(())
    }

    pub fn render_meta(&self, meta: &SubjectMeta) -> String {
        self.meta_rendering
            .iter()
            .map(|f| format!("{}: {}", f.label, meta.value(f.field)))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Description, transcript (or a placeholder), and meta block joined by
/// single newlines. Never truncates.
pub fn build_prompt(template: &PromptTemplate, asr_text: &str, meta: &SubjectMeta) -> String {
    let transcript = match asr_text.trim() {
        "" => NO_TRANSCRIPT,
        t => t,
    };
    format!(
        "{}\n{}\n{}",
        template.task_description.trim(),
        transcript,
        template.render_meta(meta)
    )
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct BankEntry {
    #[serde(rename = "trait")]
    trait_id: Trait,
    task_description: String,
}

/// The on-disk set of prompt variants.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBank {
    #[serde(default = "default_meta_fields")]
    meta_fields: Vec<MetaField>,
    variants: Vec<BankEntry>,
}

impl PromptBank {
    pub fn builtin() -> Self {
        Self::from_toml(BUILTIN_BANK).expect("built-in prompt bank is valid")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let bank: Self = toml::from_str(text).map_err(|e| Error::PromptBank(e.to_string()))?;
        for t in Trait::ALL {
            if !bank.variants.iter().any(|v| v.trait_id == t) {
                return Err(Error::PromptBank(format!("no variants for trait {t}")));
            }
        }
        for tpl in bank.all() {
            tpl.validate()?;
        }
        Ok(bank)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("prompt bank serialises")
    }

    pub fn from_templates(templates: &[PromptTemplate]) -> Result<Self> {
        let meta_fields = templates
            .first()
            .map(|t| t.meta_rendering.clone())
            .unwrap_or_else(default_meta_fields);
        let bank = Self {
            meta_fields,
            variants: templates
                .iter()
                .map(|t| BankEntry {
                    trait_id: t.trait_id,
                    task_description: t.task_description.clone(),
                })
                .collect(),
        };
        Self::from_toml(&bank.to_toml())
    }

    fn all(&self) -> impl Iterator<Item = PromptTemplate> + '_ {
        self.variants.iter().map(|v| PromptTemplate {
            trait_id: v.trait_id,
            task_description: v.task_description.clone(),
            meta_rendering: self.meta_fields.clone(),
        })
    }

    /// Up to `n` variants for `trait_id`, default first.
    pub fn variants(&self, trait_id: Trait, n: usize) -> Result<Vec<PromptTemplate>> {
        if n == 0 {
            return Err(Error::Config("number of prompt variants must be at least 1".into()));
        }
        Ok(self.all().filter(|t| t.trait_id == trait_id).take(n).collect())
    }

    pub fn count(&self, trait_id: Trait) -> usize {
        self.variants.iter().filter(|v| v.trait_id == trait_id).count()
    }

    pub fn default_template(&self, trait_id: Trait) -> PromptTemplate {
        self.variants(trait_id, 1).expect("n = 1").remove(0)
    }
}

/// Variants from the built-in bank.
pub fn prompt_variants(trait_id: Trait, n: usize) -> Result<Vec<PromptTemplate>> {
    PromptBank::builtin().variants(trait_id, n)
}

impl fmt::Display for PromptTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.trait_id, self.task_description)
    }
}

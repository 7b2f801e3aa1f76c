//! Slotted question templates gated by applicability conditions.
//!
//! A template verbalizes a triple when its condition matches: the property
//! is equal and the condition's subject/object type sets are contained in
//! the types of the triple's endpoints. Conditions over the same property
//! can be merged by intersecting their type sets, which only ever widens
//! applicability; the library also supports extracting new templates from
//! (triple, question) pairs and agglomerative merging of overly specific
//! conditions.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, PropertyId, Triple};

/// Slot marker that stands for the subject in template text.
pub const SLOT: &str = "{SUBJECT}";

/// Gate deciding whether a template may verbalize a triple. Empty type sets
/// mean "no constraint".
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ApplicabilityCondition {
    pub property: PropertyId,
    pub subject_types: BTreeSet<EntityId>,
    pub object_types: BTreeSet<EntityId>,
}

impl ApplicabilityCondition {
    /// Unconstrained condition for a property.
    pub fn for_property(property: PropertyId) -> Self {
        ApplicabilityCondition {
            property,
            subject_types: BTreeSet::new(),
            object_types: BTreeSet::new(),
        }
    }
}

/// Where a template came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateSource {
    SimpleQuestions,
    ZeroShot,
    New,
}

/// Grammatical tense of the template text, detected at load time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tense {
    Present,
    Past,
    Unknown,
}

/// A question template with exactly one subject slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub id: u64,
    pub text: String,
    pub condition: ApplicabilityCondition,
    pub source: TemplateSource,
    pub tense: Tense,
}

impl Template {
    pub fn new(
        id: u64,
        text: String,
        condition: ApplicabilityCondition,
        source: TemplateSource,
    ) -> Result<Self> {
        if text.matches(SLOT).count() != 1 || text.trim().is_empty() {
            return Err(Error::MissingSlot { id });
        }
        let tense = detect_tense(&text);
        Ok(Template {
            id,
            text,
            condition,
            source,
            tense,
        })
    }

    /// Fill the slot with an explicit subject mention.
    pub fn instantiate_with_label(&self, label: &str) -> Result<String> {
        if !self.text.contains(SLOT) {
            return Err(Error::MissingSlot { id: self.id });
        }
        Ok(self.text.replacen(SLOT, label, 1))
    }
}

/// Auxiliaries whose presence marks a template as past tense.
const PAST_MARKERS: &[&str] = &["was", "were", "did", "had"];

pub(crate) fn detect_tense(text: &str) -> Tense {
    let words: Vec<String> = text
        .split(|c: char| !c.is_alphanumeric() && c != '\'')
        .map(str::to_lowercase)
        .collect();
    if words.iter().any(|w| PAST_MARKERS.contains(&w.as_str())) {
        return Tense::Past;
    }
    // Present-tense auxiliaries and 3sg main verbs are exactly the keys of
    // the past-conversion table.
    if words.iter().any(|w| crate::lexicon::past_form(w).is_some()) {
        return Tense::Present;
    }
    Tense::Unknown
}

/// True iff the triple satisfies the condition: equal property and the
/// condition's type sets contained in the endpoint types. Literal objects
/// have an empty type set, so any object-type constraint rejects them.
pub fn matches(
    condition: &ApplicabilityCondition,
    triple: &Triple,
    graph: &KnowledgeGraph,
) -> bool {
    if condition.property != triple.property {
        return false;
    }
    let empty = BTreeSet::new();
    let subject_types = graph
        .entity(&triple.subject)
        .map(|e| &e.types)
        .unwrap_or(&empty);
    if !condition.subject_types.is_subset(subject_types) {
        return false;
    }
    let object_types = graph.node_types(&triple.object).unwrap_or(&empty);
    condition.object_types.is_subset(object_types)
}

/// Merge two conditions over the same property by intersecting their type
/// sets. Every triple matched by either input matches the result.
pub fn merge_conditions(
    c1: &ApplicabilityCondition,
    c2: &ApplicabilityCondition,
) -> Result<ApplicabilityCondition> {
    if c1.property != c2.property {
        return Err(Error::PropertyMismatch(
            c1.property.clone(),
            c2.property.clone(),
        ));
    }
    Ok(ApplicabilityCondition {
        property: c1.property.clone(),
        subject_types: c1
            .subject_types
            .intersection(&c2.subject_types)
            .cloned()
            .collect(),
        object_types: c1
            .object_types
            .intersection(&c2.object_types)
            .cloned()
            .collect(),
    })
}

/// Number of pool triples a condition matches.
fn support(condition: &ApplicabilityCondition, pool: &[Triple], graph: &KnowledgeGraph) -> usize {
    pool.iter().filter(|t| matches(condition, t, graph)).count()
}

/// Agglomeratively merge conditions per property and drop the ones with
/// insufficient support.
///
/// At each step the pair whose merge gains the most support over its inputs
/// is replaced by the merged condition; merging stops when every remaining
/// merge would erase both type sets. Conditions matched by fewer than
/// `min_support` pool triples are discarded at the end.
pub fn cluster_conditions(
    conditions: &[ApplicabilityCondition],
    pool: &[Triple],
    graph: &KnowledgeGraph,
    min_support: usize,
) -> Vec<ApplicabilityCondition> {
    let mut by_property: BTreeMap<PropertyId, Vec<ApplicabilityCondition>> = BTreeMap::new();
    for condition in conditions {
        by_property
            .entry(condition.property.clone())
            .or_default()
            .push(condition.clone());
    }

    let mut result = Vec::new();
    for (_, mut group) in by_property {
        group.sort();
        group.dedup();
        loop {
            if group.len() < 2 {
                break;
            }
            let mut best: Option<(usize, usize, ApplicabilityCondition, isize)> = None;
            for i in 0..group.len() {
                for j in (i + 1)..group.len() {
                    let merged = merge_conditions(&group[i], &group[j]).expect("same property");
                    let erases_both = merged.subject_types.is_empty()
                        && merged.object_types.is_empty()
                        && !(group[i].subject_types.is_empty() && group[i].object_types.is_empty())
                        && !(group[j].subject_types.is_empty() && group[j].object_types.is_empty());
                    if erases_both {
                        continue;
                    }
                    let gain = support(&merged, pool, graph) as isize
                        - support(&group[i], pool, graph).max(support(&group[j], pool, graph))
                            as isize;
                    if best.as_ref().is_none_or(|(_, _, _, g)| gain > *g) {
                        best = Some((i, j, merged, gain));
                    }
                }
            }
            match best {
                Some((i, j, merged, _)) => {
                    group.remove(j);
                    group.remove(i);
                    group.push(merged);
                    group.sort();
                    group.dedup();
                }
                None => break,
            }
        }
        for condition in group {
            if support(&condition, pool, graph) >= min_support {
                result.push(condition);
            }
        }
    }
    result.sort();
    result
}

/// Extract a template from a (triple, question) pair by replacing the
/// subject's label with the slot marker. The label must occur exactly once
/// (case insensitively); the retained text keeps its original casing.
pub fn template_from_qa_pair(
    id: u64,
    triple: &Triple,
    question: &str,
    graph: &KnowledgeGraph,
) -> Result<Template> {
    let label = graph
        .entity(&triple.subject)
        .map(|e| e.preferred_label.clone())
        .unwrap_or_else(|| triple.subject.0.clone());
    let haystack = question.to_lowercase();
    let needle = label.to_lowercase();
    let mut positions = haystack.match_indices(&needle).map(|(i, _)| i);
    let first = positions.next().ok_or_else(|| Error::LabelNotFound {
        label: label.clone(),
        question: question.to_owned(),
    })?;
    if positions.next().is_some() {
        return Err(Error::AmbiguousLabel {
            label,
            question: question.to_owned(),
        });
    }
    let text = format!(
        "{}{}{}",
        &question[..first],
        SLOT,
        &question[first + needle.len()..]
    );
    let empty = BTreeSet::new();
    let condition = ApplicabilityCondition {
        property: triple.property.clone(),
        subject_types: graph
            .entity(&triple.subject)
            .map(|e| e.types.clone())
            .unwrap_or_default(),
        object_types: graph.node_types(&triple.object).unwrap_or(&empty).clone(),
    };
    Template::new(id, text, condition, TemplateSource::SimpleQuestions)
}

/// Instantiate a template for a triple: the slot takes the subject's
/// preferred label. Returns the out-of-context question.
pub fn instantiate(template: &Template, triple: &Triple, graph: &KnowledgeGraph) -> Result<String> {
    let label = graph
        .entity(&triple.subject)
        .map(|e| e.preferred_label.as_str())
        .unwrap_or(triple.subject.as_str());
    template.instantiate_with_label(label)
}

/// Answer string paired with an instantiated question: the object's display
/// label.
pub fn answer_label<'g>(triple: &'g Triple, graph: &'g KnowledgeGraph) -> &'g str {
    graph.node_label(&triple.object)
}

/// Template collection indexed by property.
#[derive(Debug, Clone, Default)]
pub struct TemplateLibrary {
    templates: Vec<Template>,
    by_property: BTreeMap<PropertyId, Vec<usize>>,
}

impl TemplateLibrary {
    pub fn new(mut templates: Vec<Template>) -> Self {
        templates.sort_by_key(|t| t.id);
        let mut by_property: BTreeMap<PropertyId, Vec<usize>> = BTreeMap::new();
        for (i, template) in templates.iter().enumerate() {
            by_property
                .entry(template.condition.property.clone())
                .or_default()
                .push(i);
        }
        TemplateLibrary {
            templates,
            by_property,
        }
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    /// All templates whose condition matches the triple, ordered by id.
    pub fn select<'a>(&'a self, triple: &Triple, graph: &KnowledgeGraph) -> Vec<&'a Template> {
        self.by_property
            .get(&triple.property)
            .into_iter()
            .flatten()
            .map(|&i| &self.templates[i])
            .filter(|t| matches(&t.condition, triple, graph))
            .collect()
    }

    /// True iff at least one template covers the triple.
    pub fn covers(&self, triple: &Triple, graph: &KnowledgeGraph) -> bool {
        !self.select(triple, graph).is_empty()
    }
}

// ---------------------------------------------------------------------------
// Wire format.
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct TemplateRecord {
    id: u64,
    text: String,
    property: String,
    #[serde(default)]
    inverse: bool,
    #[serde(default)]
    subject_types: Vec<String>,
    #[serde(default)]
    object_types: Vec<String>,
    source: TemplateSource,
}

/// Load a template library from line-delimited JSON.
pub fn load_templates(reader: impl BufRead) -> Result<TemplateLibrary> {
    let mut templates = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TemplateRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno + 1,
            message: e.to_string(),
        })?;
        let condition = ApplicabilityCondition {
            property: PropertyId {
                id: record.property,
                inverse: record.inverse,
            },
            subject_types: record.subject_types.into_iter().map(EntityId).collect(),
            object_types: record.object_types.into_iter().map(EntityId).collect(),
        };
        templates.push(Template::new(
            record.id,
            record.text,
            condition,
            record.source,
        )?);
    }
    Ok(TemplateLibrary::new(templates))
}

/// Write templates as line-delimited JSON.
pub fn save_templates(templates: &[Template], mut writer: impl Write) -> Result<()> {
    for template in templates {
        let record = TemplateRecord {
            id: template.id,
            text: template.text.clone(),
            property: template.condition.property.id.clone(),
            inverse: template.condition.property.inverse,
            subject_types: template
                .condition
                .subject_types
                .iter()
                .map(|t| t.0.clone())
                .collect(),
            object_types: template
                .condition
                .object_types
                .iter()
                .map(|t| t.0.clone())
                .collect(),
            source: template.source,
        };
        serde_json::to_writer(&mut writer, &record)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct QaPairRecord {
    triple: crate::kg::TripleRecord,
    question: String,
}

/// Parse line-delimited `{"triple":{...},"question"}` extraction pairs.
pub fn load_qa_pairs(reader: impl BufRead) -> Result<Vec<(Triple, String)>> {
    let mut pairs = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: QaPairRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno + 1,
            message: e.to_string(),
        })?;
        pairs.push((record.triple.into_triple(), record.question));
    }
    Ok(pairs)
}

#[derive(Debug, Serialize, Deserialize)]
struct ConditionRecord {
    property: String,
    #[serde(default)]
    inverse: bool,
    #[serde(default)]
    subject_types: Vec<String>,
    #[serde(default)]
    object_types: Vec<String>,
}

/// Parse line-delimited applicability conditions.
pub fn load_conditions(reader: impl BufRead) -> Result<Vec<ApplicabilityCondition>> {
    let mut conditions = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ConditionRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno + 1,
            message: e.to_string(),
        })?;
        conditions.push(ApplicabilityCondition {
            property: PropertyId {
                id: record.property,
                inverse: record.inverse,
            },
            subject_types: record.subject_types.into_iter().map(EntityId).collect(),
            object_types: record.object_types.into_iter().map(EntityId).collect(),
        });
    }
    Ok(conditions)
}

/// Write conditions as line-delimited JSON.
pub fn save_conditions(
    conditions: &[ApplicabilityCondition],
    mut writer: impl Write,
) -> Result<()> {
    for condition in conditions {
        let record = ConditionRecord {
            property: condition.property.id.clone(),
            inverse: condition.property.inverse,
            subject_types: condition
                .subject_types
                .iter()
                .map(|t| t.0.clone())
                .collect(),
            object_types: condition.object_types.iter().map(|t| t.0.clone()).collect(),
        };
        serde_json::to_writer(&mut writer, &record)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

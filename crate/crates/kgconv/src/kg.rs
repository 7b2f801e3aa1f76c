//! Indexed triple store over a Wikidata-like subgraph.
//!
//! The graph is loaded from line-delimited JSON (one entity or triple record
//! per line), filtered against a property exclusion rule set, and augmented
//! with reversed triples so that questions can be asked about either endpoint
//! of a fact. After loading, the graph is immutable and all queries are
//! read-only.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wikidata-style entity identifier, e.g. `Q9592`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub String);

impl EntityId {
    pub fn new(id: impl Into<String>) -> Self {
        EntityId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        EntityId(s.to_owned())
    }
}

/// Property identifier with a direction flag. `inverse == true` denotes the
/// reversed property; inverting twice yields the original.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PropertyId {
    pub id: String,
    pub inverse: bool,
}

impl PropertyId {
    pub fn new(id: impl Into<String>) -> Self {
        PropertyId {
            id: id.into(),
            inverse: false,
        }
    }

    pub fn inverse_of(id: impl Into<String>) -> Self {
        PropertyId {
            id: id.into(),
            inverse: true,
        }
    }

    /// The property pointing the other way.
    pub fn inverted(&self) -> Self {
        PropertyId {
            id: self.id.clone(),
            inverse: !self.inverse,
        }
    }
}

impl fmt::Display for PropertyId {
    // "-P36" denotes the inverse of P36.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.inverse {
            write!(f, "-{}", self.id)
        } else {
            f.write_str(&self.id)
        }
    }
}

/// Grammatical gender used by the pronoun rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    Neutral,
    #[default]
    Unknown,
}

/// An entity with its labels and the metadata the contextualizer needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub preferred_label: String,
    #[serde(default)]
    pub alt_labels: Vec<String>,
    #[serde(default)]
    pub types: BTreeSet<EntityId>,
    #[serde(default)]
    pub gender: Gender,
    #[serde(default)]
    pub is_dead: bool,
    #[serde(default)]
    pub surname: Option<String>,
}

impl Entity {
    /// Every label that may refer to this entity: preferred label,
    /// alternative labels, and the surname for persons. Deduplicated,
    /// preferred label first.
    pub fn all_labels(&self) -> Vec<&str> {
        let mut pool: Vec<&str> = Vec::with_capacity(self.alt_labels.len() + 2);
        pool.push(self.preferred_label.as_str());
        pool.extend(self.alt_labels.iter().map(String::as_str));
        if let Some(surname) = &self.surname {
            pool.push(surname.as_str());
        }
        let mut seen = HashSet::new();
        pool.retain(|l| seen.insert(*l));
        pool
    }
}

/// Kind tag for literal values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LiteralKind {
    String,
    Number,
    Date,
}

/// A literal object node. Literals never appear as triple subjects.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub kind: LiteralKind,
    pub value: String,
    pub label: String,
}

/// Object position of a triple: an entity reference or a literal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Entity(EntityId),
    Literal(Literal),
}

impl Node {
    pub fn as_entity(&self) -> Option<&EntityId> {
        match self {
            Node::Entity(id) => Some(id),
            Node::Literal(_) => None,
        }
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Node::Literal(_))
    }
}

/// Triple qualifiers. Only `end_time` is interpreted (past-tense trigger).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Qualifiers {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_time: Option<NaiveDate>,
}

impl Qualifiers {
    pub fn is_empty(&self) -> bool {
        self.end_time.is_none()
    }
}

/// A (subject, property, object) fact. Identity is the (s, p, o) tuple;
/// qualifiers do not participate in equality or hashing.
#[derive(Debug, Clone)]
pub struct Triple {
    pub subject: EntityId,
    pub property: PropertyId,
    pub object: Node,
    pub qualifiers: Qualifiers,
}

impl Triple {
    pub fn new(subject: EntityId, property: PropertyId, object: Node) -> Self {
        Triple {
            subject,
            property,
            object,
            qualifiers: Qualifiers::default(),
        }
    }

    /// The (s, p, o) identity tuple.
    pub fn key(&self) -> (&EntityId, &PropertyId, &Node) {
        (&self.subject, &self.property, &self.object)
    }
}

impl PartialEq for Triple {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Triple {}

impl std::hash::Hash for Triple {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.key().hash(state);
    }
}

impl PartialOrd for Triple {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Triple {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

type TripleKey = (EntityId, PropertyId, Node);

/// Indexed, immutable-after-load triple store.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    entities: BTreeMap<EntityId, Entity>,
    triples: Vec<Triple>,
    by_subject: HashMap<EntityId, Vec<usize>>,
    by_subject_property: HashMap<(EntityId, PropertyId), Vec<usize>>,
    keys: HashSet<TripleKey>,
    root_ineligible: BTreeSet<EntityId>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entity(&self, id: &EntityId) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    pub fn contains_triple(
        &self,
        subject: &EntityId,
        property: &PropertyId,
        object: &Node,
    ) -> bool {
        self.keys
            .contains(&(subject.clone(), property.clone(), object.clone()))
    }

    pub fn find_triple(
        &self,
        subject: &EntityId,
        property: &PropertyId,
        object: &Node,
    ) -> Option<&Triple> {
        self.by_subject_property
            .get(&(subject.clone(), property.clone()))
            .into_iter()
            .flatten()
            .map(|&i| &self.triples[i])
            .find(|t| &t.object == object)
    }

    /// Outgoing triples of `subject`, in insertion order.
    pub fn outgoing(&self, subject: &EntityId) -> impl Iterator<Item = &Triple> {
        self.by_subject
            .get(subject)
            .into_iter()
            .flatten()
            .map(move |&i| &self.triples[i])
    }

    pub fn with_subject_property(
        &self,
        subject: &EntityId,
        property: &PropertyId,
    ) -> impl Iterator<Item = &Triple> {
        self.by_subject_property
            .get(&(subject.clone(), property.clone()))
            .into_iter()
            .flatten()
            .map(move |&i| &self.triples[i])
    }

    /// Types of a node; literals have no types.
    pub fn node_types(&self, node: &Node) -> Option<&BTreeSet<EntityId>> {
        node.as_entity()
            .and_then(|id| self.entity(id))
            .map(|e| &e.types)
    }

    /// Display label of a node: the entity's preferred label, or the
    /// literal's label. Falls back to the raw id for unresolved entities.
    pub fn node_label<'a>(&'a self, node: &'a Node) -> &'a str {
        match node {
            Node::Entity(id) => self
                .entity(id)
                .map(|e| e.preferred_label.as_str())
                .unwrap_or(id.as_str()),
            Node::Literal(lit) => &lit.label,
        }
    }

    /// Label of a property. Properties may be declared as entity records
    /// (Wikidata gives properties their own labeled pages); otherwise the
    /// raw id is used.
    pub fn property_label<'a>(&'a self, property: &'a PropertyId) -> &'a str {
        self.entities
            .get(&EntityId::new(property.id.clone()))
            .map(|e| e.preferred_label.as_str())
            .unwrap_or(property.id.as_str())
    }

    pub fn is_root_ineligible(&self, id: &EntityId) -> bool {
        self.root_ineligible.contains(id)
    }

    /// Label of the entity's most specific type, taking specificity as the
    /// extensional member count in this graph (fewest members wins, ties
    /// broken by id).
    pub fn most_specific_type_label(&self, entity: &Entity) -> Option<String> {
        entity
            .types
            .iter()
            .filter_map(|t| self.entity(t).map(|type_entity| (t, type_entity)))
            .map(|(t, type_entity)| {
                let members = self
                    .entities
                    .values()
                    .filter(|e| e.types.contains(t))
                    .count();
                (members, t.clone(), type_entity.preferred_label.clone())
            })
            .min()
            .map(|(_, _, label)| label)
    }

    fn insert_entity(&mut self, entity: Entity) {
        self.entities.insert(entity.id.clone(), entity);
    }

    /// Insert a triple unless its (s, p, o) key is already present.
    fn insert_triple(&mut self, triple: Triple) -> bool {
        let key = (
            triple.subject.clone(),
            triple.property.clone(),
            triple.object.clone(),
        );
        if !self.keys.insert(key) {
            return false;
        }
        let idx = self.triples.len();
        self.by_subject
            .entry(triple.subject.clone())
            .or_default()
            .push(idx);
        self.by_subject_property
            .entry((triple.subject.clone(), triple.property.clone()))
            .or_default()
            .push(idx);
        self.triples.push(triple);
        true
    }

    /// Remove every triple whose property matches the exclusion rules.
    /// Entities that no longer occur in any triple are retained but flagged
    /// root-ineligible.
    pub fn filter_properties(&self, rules: &ExclusionRules) -> KnowledgeGraph {
        let mut out = KnowledgeGraph::new();
        for entity in self.entities.values() {
            out.insert_entity(entity.clone());
        }
        for triple in &self.triples {
            if !rules.is_excluded(&triple.property) {
                out.insert_triple(triple.clone());
            }
        }
        let mut occurring: HashSet<&EntityId> = HashSet::new();
        for triple in &out.triples {
            occurring.insert(&triple.subject);
            if let Some(obj) = triple.object.as_entity() {
                occurring.insert(obj);
            }
        }
        out.root_ineligible = out
            .entities
            .keys()
            .filter(|id| !occurring.contains(id))
            .cloned()
            .collect();
        out.root_ineligible
            .extend(self.root_ineligible.iter().cloned());
        out
    }

    /// Add the reversed triple (o, -p, s) for every triple with an entity
    /// object. Qualifiers are copied onto the reverse. Idempotent.
    pub fn augment_reverse(&self) -> KnowledgeGraph {
        let mut out = self.clone();
        for triple in &self.triples {
            if let Node::Entity(object) = &triple.object {
                let reversed = Triple {
                    subject: object.clone(),
                    property: triple.property.inverted(),
                    object: Node::Entity(triple.subject.clone()),
                    qualifiers: triple.qualifiers.clone(),
                };
                out.insert_triple(reversed);
            }
        }
        out
    }

    /// All triples at most 2 edges from `root`: the outgoing triples
    /// (r, p, o1) plus their successors (o1, q, o2).
    pub fn neighborhood(&self, root: &EntityId) -> Result<Vec<Triple>> {
        if !self.entities.contains_key(root) {
            return Err(Error::UnknownRoot(root.clone()));
        }
        let mut seen: HashSet<(&EntityId, &PropertyId, &Node)> = HashSet::new();
        let mut result = Vec::new();
        let mut hop1_objects = Vec::new();
        for triple in self.outgoing(root) {
            if seen.insert(triple.key()) {
                result.push(triple.clone());
                if let Some(obj) = triple.object.as_entity() {
                    hop1_objects.push(obj);
                }
            }
        }
        for obj in hop1_objects {
            for triple in self.outgoing(obj) {
                if seen.insert(triple.key()) {
                    result.push(triple.clone());
                }
            }
        }
        Ok(result)
    }

    /// Roots per theme: entities carrying the theme class whose neighborhood
    /// holds at least `min_size` triples.
    pub fn eligible_roots(
        &self,
        theme_classes: &BTreeMap<String, EntityId>,
        min_size: usize,
    ) -> BTreeMap<String, Vec<EntityId>> {
        let mut result = BTreeMap::new();
        for (theme, class) in theme_classes {
            let mut roots = Vec::new();
            for entity in self.entities.values() {
                if !entity.types.contains(class) || self.root_ineligible.contains(&entity.id) {
                    continue;
                }
                let size = self.neighborhood(&entity.id).map(|n| n.len()).unwrap_or(0);
                if size >= min_size {
                    roots.push(entity.id.clone());
                }
            }
            result.insert(theme.clone(), roots);
        }
        result
    }
}

/// Property exclusion rules: explicit ids (e.g. external-database-ID linking
/// properties) and id prefixes (e.g. a meta-information namespace).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExclusionRules {
    #[serde(default)]
    pub excluded_ids: BTreeSet<String>,
    #[serde(default)]
    pub excluded_prefixes: Vec<String>,
}

impl ExclusionRules {
    pub fn is_excluded(&self, property: &PropertyId) -> bool {
        self.excluded_ids.contains(&property.id)
            || self
                .excluded_prefixes
                .iter()
                .any(|p| property.id.starts_with(p.as_str()))
    }

    pub fn from_reader(reader: impl std::io::Read) -> Result<Self> {
        serde_json::from_reader(reader).map_err(|e| Error::Parse {
            line: 0,
            message: e.to_string(),
        })
    }
}

// ---------------------------------------------------------------------------
// Wire format: line-delimited JSON records.
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum GraphRecord {
    Entity(EntityRecord),
    Triple(TripleRecord),
}

#[derive(Debug, Serialize, Deserialize)]
struct EntityRecord {
    id: String,
    #[serde(default)]
    preferred_label: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    alt_labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    types: Vec<String>,
    #[serde(default)]
    gender: Gender,
    #[serde(default)]
    is_dead: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    surname: Option<String>,
}

/// Triple record as stored on disk.
#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct TripleRecord {
    pub s: String,
    pub p: String,
    #[serde(default)]
    pub inverse: bool,
    pub o: ObjectRecord,
    #[serde(default, skip_serializing_if = "Qualifiers::is_empty")]
    pub qualifiers: Qualifiers,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub(crate) enum ObjectRecord {
    Entity(String),
    Literal(Literal),
}

impl TripleRecord {
    pub(crate) fn from_triple(t: &Triple) -> Self {
        TripleRecord {
            s: t.subject.0.clone(),
            p: t.property.id.clone(),
            inverse: t.property.inverse,
            o: match &t.object {
                Node::Entity(id) => ObjectRecord::Entity(id.0.clone()),
                Node::Literal(lit) => ObjectRecord::Literal(lit.clone()),
            },
            qualifiers: t.qualifiers.clone(),
        }
    }

    pub(crate) fn into_triple(self) -> Triple {
        Triple {
            subject: EntityId(self.s),
            property: PropertyId {
                id: self.p,
                inverse: self.inverse,
            },
            object: match self.o {
                ObjectRecord::Entity(id) => Node::Entity(EntityId(id)),
                ObjectRecord::Literal(lit) => Node::Literal(lit),
            },
            qualifiers: self.qualifiers,
        }
    }
}

/// Load a graph from line-delimited JSON. Entities without an English
/// preferred label are dropped together with their triples; references to
/// never-declared entities are an error.
pub fn load_graph(reader: impl BufRead) -> Result<KnowledgeGraph> {
    let mut entities = Vec::new();
    let mut triples = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: GraphRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno + 1,
            message: e.to_string(),
        })?;
        match record {
            GraphRecord::Entity(e) => entities.push(e),
            GraphRecord::Triple(t) => triples.push(t.into_triple()),
        }
    }

    let mut graph = KnowledgeGraph::new();
    let mut unlabeled: HashSet<String> = HashSet::new();
    for record in entities {
        match record.preferred_label {
            Some(label) if !label.trim().is_empty() => {
                graph.insert_entity(Entity {
                    id: EntityId(record.id),
                    preferred_label: label,
                    alt_labels: record.alt_labels,
                    types: record.types.into_iter().map(EntityId).collect(),
                    gender: record.gender,
                    is_dead: record.is_dead,
                    surname: record.surname,
                });
            }
            _ => {
                unlabeled.insert(record.id);
            }
        }
    }

    let mut dangling: BTreeSet<String> = BTreeSet::new();
    for triple in triples {
        let subject_dropped = unlabeled.contains(triple.subject.as_str());
        let object_dropped = triple
            .object
            .as_entity()
            .is_some_and(|id| unlabeled.contains(id.as_str()));
        if subject_dropped || object_dropped {
            continue;
        }
        if graph.entity(&triple.subject).is_none() {
            dangling.insert(triple.subject.0.clone());
        }
        if let Some(obj) = triple.object.as_entity() {
            if graph.entity(obj).is_none() {
                dangling.insert(obj.0.clone());
            }
        }
        if dangling.is_empty() {
            graph.insert_triple(triple);
        }
    }
    if !dangling.is_empty() {
        return Err(Error::DanglingReferences {
            ids: dangling.into_iter().collect(),
        });
    }
    Ok(graph)
}

/// Write a graph back out in the same record format, entities first.
pub fn save_graph(graph: &KnowledgeGraph, mut writer: impl Write) -> Result<()> {
    for entity in graph.entities() {
        let record = GraphRecord::Entity(EntityRecord {
            id: entity.id.0.clone(),
            preferred_label: Some(entity.preferred_label.clone()),
            alt_labels: entity.alt_labels.clone(),
            types: entity.types.iter().map(|t| t.0.clone()).collect(),
            gender: entity.gender,
            is_dead: entity.is_dead,
            surname: entity.surname.clone(),
        });
        serde_json::to_writer(&mut writer, &record).map_err(io_err)?;
        writer.write_all(b"\n")?;
    }
    for triple in graph.triples() {
        let record = GraphRecord::Triple(TripleRecord::from_triple(triple));
        serde_json::to_writer(&mut writer, &record).map_err(io_err)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

fn io_err(e: serde_json::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

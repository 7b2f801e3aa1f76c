//! Conversation assembly, the line-delimited dataset format, split
//! computation, and corpus statistics.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::context::{
    contextualize_question, infer_gender, select_reference, DeterminerOracle, MentionState,
};
use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, Literal, LiteralKind, Node, PropertyId, Triple};
use crate::rewrite::{
    classify_candidate, generate_candidates, select_rewrite_excluding, RewriteCategory,
    RewriterClient, TurnHints,
};
use crate::sampler::{TripleSequence, WalkConfig};
use crate::template::{answer_label, instantiate, TemplateLibrary};
use crate::util::derive_seed;

/// The up-to-three versions of one paraphrase. When present, `ic` differs
/// from `ooc`, and `sic` differs from `ic` (or from `ooc` when `ic` is
/// absent).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionVariantSet {
    pub ooc: String,
    pub ic: Option<String>,
    pub sic: Option<String>,
}

impl QuestionVariantSet {
    /// Normalize redundant variants away.
    pub fn new(ooc: String, ic: Option<String>, sic: Option<String>) -> Self {
        let ic = ic.filter(|t| t != &ooc);
        let in_context = ic.as_deref().unwrap_or(&ooc);
        let sic = sic.filter(|t| t != in_context);
        QuestionVariantSet { ooc, ic, sic }
    }

    pub fn versions(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.ooc.as_str())
            .chain(self.ic.as_deref())
            .chain(self.sic.as_deref())
    }
}

/// One question-answer turn grounded in a triple.
#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    pub triple: Triple,
    pub answer: String,
    pub paraphrases: Vec<QuestionVariantSet>,
}

/// A conversation anchored on a root entity.
#[derive(Debug, Clone, PartialEq)]
pub struct Conversation {
    pub id: String,
    pub root: EntityId,
    pub theme: String,
    pub turns: Vec<Turn>,
    pub seed: u64,
}

impl Conversation {
    /// Check the full invariant suite: walk invariants of the underlying
    /// triple sequence, non-empty paraphrases, answer consistency, variant
    /// distinctness, and within-turn uniqueness of question strings.
    pub fn validate(&self, walk: &WalkConfig) -> std::result::Result<(), String> {
        let sequence = TripleSequence {
            root: self.root.clone(),
            triples: self.turns.iter().map(|t| t.triple.clone()).collect(),
            seed: self.seed,
        };
        sequence.validate(walk)?;
        for (i, turn) in self.turns.iter().enumerate() {
            if turn.paraphrases.is_empty() {
                return Err(format!("turn {i} has no paraphrases"));
            }
            let mut seen: HashSet<&str> = HashSet::new();
            for (j, paraphrase) in turn.paraphrases.iter().enumerate() {
                if let Some(ic) = &paraphrase.ic {
                    if ic == &paraphrase.ooc {
                        return Err(format!("turn {i} paraphrase {j}: redundant ic"));
                    }
                }
                if let Some(sic) = &paraphrase.sic {
                    let in_context = paraphrase.ic.as_deref().unwrap_or(&paraphrase.ooc);
                    if sic == in_context {
                        return Err(format!("turn {i} paraphrase {j}: redundant sic"));
                    }
                }
                for version in paraphrase.versions() {
                    if !seen.insert(version) {
                        return Err(format!("turn {i}: question {version:?} at two coordinates"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Shared inputs for conversation assembly.
pub struct AssembleContext<'a> {
    pub graph: &'a KnowledgeGraph,
    pub library: &'a TemplateLibrary,
    pub determiner: &'a DeterminerOracle,
    pub rewriter: &'a RewriterClient,
    pub paraphrase_cap: usize,
}

impl<'a> AssembleContext<'a> {
    pub fn new(
        graph: &'a KnowledgeGraph,
        library: &'a TemplateLibrary,
        determiner: &'a DeterminerOracle,
        rewriter: &'a RewriterClient,
    ) -> Self {
        AssembleContext {
            graph,
            library,
            determiner,
            rewriter,
            paraphrase_cap: 10,
        }
    }
}

/// Build a full conversation from a sampled sequence: verbalization,
/// contextualization and synthetic rewriting in one pass.
pub fn assemble(
    sequence: &TripleSequence,
    theme: &str,
    id: String,
    ctx: &AssembleContext,
) -> Result<Conversation> {
    let mut conversation = verbalize(sequence, theme, id, ctx)?;
    contextualize_conversation(&mut conversation, ctx)?;
    rewrite_conversation(&mut conversation, ctx)?;
    Ok(conversation)
}

/// Verbalize a sequence into out-of-context questions only.
pub fn verbalize(
    sequence: &TripleSequence,
    theme: &str,
    id: String,
    ctx: &AssembleContext,
) -> Result<Conversation> {
    let mut turns = Vec::with_capacity(sequence.triples.len());
    for triple in &sequence.triples {
        let templates = selected_templates(ctx, triple)?;
        let answer = answer_label(triple, ctx.graph).to_owned();
        let mut seen: HashSet<String> = HashSet::new();
        let mut paraphrases = Vec::new();
        for template in templates {
            let ooc = instantiate(template, triple, ctx.graph)?;
            if seen.insert(ooc.clone()) {
                paraphrases.push(QuestionVariantSet {
                    ooc,
                    ic: None,
                    sic: None,
                });
            }
        }
        turns.push(Turn {
            triple: triple.clone(),
            answer,
            paraphrases,
        });
    }
    Ok(Conversation {
        id,
        root: sequence.root.clone(),
        theme: theme.to_owned(),
        turns,
        seed: sequence.seed,
    })
}

fn selected_templates<'t>(
    ctx: &'t AssembleContext,
    triple: &Triple,
) -> Result<Vec<&'t crate::template::Template>> {
    let mut templates = ctx.library.select(triple, ctx.graph);
    if templates.is_empty() {
        return Err(Error::NoTemplate(triple.property.clone()));
    }
    templates.truncate(ctx.paraphrase_cap);
    Ok(templates)
}

/// Add in-context variants to an out-of-context conversation. Deterministic
/// given the conversation seed; a failing determiner service degrades to the
/// offline lexicon.
pub fn contextualize_conversation(
    conversation: &mut Conversation,
    ctx: &AssembleContext,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(conversation.seed, "context", 0));
    let mut state = MentionState::new();
    let mut oracle = ctx.determiner.clone();
    // Conversations parsed from stage artifacts carry bare (s, p, o)
    // triples; resolve them in the graph to recover qualifiers.
    let triples: Vec<Triple> = conversation
        .turns
        .iter()
        .map(|t| {
            ctx.graph
                .find_triple(&t.triple.subject, &t.triple.property, &t.triple.object)
                .cloned()
                .unwrap_or_else(|| t.triple.clone())
        })
        .collect();

    for (i, turn) in conversation.turns.iter_mut().enumerate() {
        let triple = &triples[i];
        let subject = ctx
            .graph
            .entity(&triple.subject)
            .ok_or_else(|| Error::UnknownRoot(triple.subject.clone()))?;
        let mention = select_reference(subject, &mut state, &mut rng);
        let prev_triple = if i > 0 { Some(&triples[i - 1]) } else { None };
        let templates = selected_templates(ctx, triple)?;

        let mut seen: HashSet<String> = turn.paraphrases.iter().map(|p| p.ooc.clone()).collect();
        for paraphrase in &mut turn.paraphrases {
            let template = templates
                .iter()
                .find(|t| instantiate(t, triple, ctx.graph).is_ok_and(|q| q == paraphrase.ooc))
                .copied();
            let Some(template) = template else { continue };
            let ic = match contextualize_question(
                template,
                triple,
                prev_triple,
                &mention,
                ctx.graph,
                &oracle,
            ) {
                Ok(ic) => ic,
                Err(Error::ServiceUnreachable { url, message }) => {
                    log::warn!(
                        "determiner service unreachable ({url}: {message}); using lexicon fallback"
                    );
                    oracle = DeterminerOracle::default();
                    contextualize_question(
                        template,
                        triple,
                        prev_triple,
                        &mention,
                        ctx.graph,
                        &oracle,
                    )?
                }
                Err(e) => return Err(e),
            };
            paraphrase.ic = ic.filter(|text| text != &paraphrase.ooc && seen.insert(text.clone()));
        }
    }
    Ok(())
}

/// Add synthetic in-context variants. The previous turn's selected rewrite
/// categories are prohibited for the whole next turn.
pub fn rewrite_conversation(conversation: &mut Conversation, ctx: &AssembleContext) -> Result<()> {
    let mut client = ctx.rewriter.clone();
    let mut prev_categories: BTreeSet<RewriteCategory> = BTreeSet::new();
    let mut history: Vec<(String, String)> = Vec::new();
    let mut history_entities: Vec<String> = Vec::new();

    for turn in &mut conversation.turns {
        let subject = ctx
            .graph
            .entity(&turn.triple.subject)
            .ok_or_else(|| Error::UnknownRoot(turn.triple.subject.clone()))?;
        let hints = TurnHints {
            subject_labels: subject
                .all_labels()
                .into_iter()
                .map(str::to_owned)
                .collect(),
            gender: infer_gender(subject, ctx.graph),
            type_label: ctx.graph.most_specific_type_label(subject),
        };

        let mut turn_categories: BTreeSet<RewriteCategory> = BTreeSet::new();
        let mut seen: HashSet<String> = turn
            .paraphrases
            .iter()
            .flat_map(|p| p.versions().map(str::to_owned).collect::<Vec<_>>())
            .collect();
        for paraphrase in &mut turn.paraphrases {
            let input = paraphrase
                .ic
                .clone()
                .unwrap_or_else(|| paraphrase.ooc.clone());
            let mut candidates = match generate_candidates(&input, &history, &hints, &client) {
                Ok(c) => c,
                Err(Error::ServiceUnreachable { url, message }) => {
                    log::warn!(
                        "rewriter service unreachable ({url}: {message}); using fallback generator"
                    );
                    client = RewriterClient {
                        endpoint: None,
                        n_best: client.n_best,
                    };
                    generate_candidates(&input, &history, &hints, &client)?
                }
                Err(e) => return Err(e),
            };
            for candidate in &mut candidates {
                candidate.category = classify_candidate(&candidate.text, &input, &history_entities);
            }
            if let Some((text, category)) = select_rewrite_excluding(&candidates, &prev_categories)
            {
                if text != input && seen.insert(text.clone()) {
                    paraphrase.sic = Some(text);
                    turn_categories.insert(category);
                }
            }
        }
        prev_categories = turn_categories;

        if let Some(first) = turn.paraphrases.first() {
            let question = first.ic.clone().unwrap_or_else(|| first.ooc.clone());
            history.push((question, turn.answer.clone()));
        }
        history_entities.extend(subject.all_labels().into_iter().map(str::to_owned));
        match &turn.triple.object {
            Node::Entity(id) => {
                if let Some(object) = ctx.graph.entity(id) {
                    history_entities.extend(object.all_labels().into_iter().map(str::to_owned));
                }
            }
            Node::Literal(lit) => history_entities.push(lit.label.clone()),
        }
        history_entities.push(turn.answer.clone());
        history_entities.sort();
        history_entities.dedup();
    }
    Ok(())
}

/// Replay the reference choices the contextualize pass made for a
/// conversation: the subject mention used at each turn, in order. Uses the
/// same seed derivation and draw sequence, so the trace is exact.
pub fn mention_trace(
    conversation: &Conversation,
    graph: &KnowledgeGraph,
) -> Vec<(EntityId, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(conversation.seed, "context", 0));
    let mut state = MentionState::new();
    let mut trace = Vec::with_capacity(conversation.turns.len());
    for turn in &conversation.turns {
        if let Some(subject) = graph.entity(&turn.triple.subject) {
            let mention = select_reference(subject, &mut state, &mut rng);
            trace.push((turn.triple.subject.clone(), mention));
        }
    }
    trace
}

// ---------------------------------------------------------------------------
// Splits.
// ---------------------------------------------------------------------------

/// Train/dev/test proportions over seen-theme conversations.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.66,
            dev: 0.10,
            test: 0.24,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let sum = self.train + self.dev + self.test;
        if (sum - 1.0).abs() > 1e-9 || self.train < 0.0 || self.dev < 0.0 || self.test < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "split ratios must be nonnegative and sum to 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Dataset splits. Unseen-theme conversations and conversations touching an
/// unseen property land in test only; the latter are marked.
#[derive(Debug, Clone, Default)]
pub struct DatasetSplits {
    pub train: Vec<Conversation>,
    pub dev: Vec<Conversation>,
    pub test: Vec<Conversation>,
    pub unseen_themes: BTreeSet<String>,
    pub unseen_property_marked: BTreeSet<String>,
}

impl DatasetSplits {
    pub fn all(&self) -> impl Iterator<Item = &Conversation> {
        self.train
            .iter()
            .chain(self.dev.iter())
            .chain(self.test.iter())
    }
}

fn uses_unseen_property(conversation: &Conversation, unseen_properties: &BTreeSet<String>) -> bool {
    conversation
        .turns
        .iter()
        .any(|t| unseen_properties.contains(&t.triple.property.id))
}

/// Deterministic unit-interval draw for a root under a seed.
fn root_fraction(seed: u64, root: &EntityId) -> f64 {
    derive_seed(seed, root.as_str(), 0) as f64 / u64::MAX as f64
}

/// Partition conversations: unseen themes and unseen-property conversations
/// go to test; the rest is split by root so that all of a root's
/// conversations share a split.
pub fn split_dataset(
    conversations: Vec<Conversation>,
    unseen_themes: &BTreeSet<String>,
    unseen_properties: &BTreeSet<String>,
    ratios: &SplitRatios,
    seed: u64,
) -> Result<DatasetSplits> {
    ratios.validate()?;
    let mut splits = DatasetSplits {
        unseen_themes: unseen_themes.clone(),
        ..DatasetSplits::default()
    };
    for conversation in conversations {
        if unseen_themes.contains(&conversation.theme) {
            splits.test.push(conversation);
        } else if uses_unseen_property(&conversation, unseen_properties) {
            splits
                .unseen_property_marked
                .insert(conversation.id.clone());
            splits.test.push(conversation);
        } else {
            let u = root_fraction(seed, &conversation.root);
            if u < ratios.train {
                splits.train.push(conversation);
            } else if u < ratios.train + ratios.dev {
                splits.dev.push(conversation);
            } else {
                splits.test.push(conversation);
            }
        }
    }
    Ok(splits)
}

// ---------------------------------------------------------------------------
// Statistics.
// ---------------------------------------------------------------------------

/// Counts for one theme (or the deduplicated total).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThemeStats {
    pub theme: String,
    pub entities: usize,
    pub properties: usize,
    pub triples: usize,
    pub conversations: usize,
    pub turns_train: usize,
    pub turns_dev: usize,
    pub turns_test: usize,
    pub turns_total: usize,
    pub avg_templates_per_turn: f64,
    pub avg_references_per_turn: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub themes: Vec<ThemeStats>,
    pub total: ThemeStats,
}

#[derive(Default)]
struct StatsAccumulator {
    entities: BTreeSet<EntityId>,
    properties: BTreeSet<String>,
    triples: BTreeSet<(EntityId, PropertyId, String)>,
    conversations: usize,
    turns: [usize; 3],
    paraphrases: usize,
    references: usize,
}

impl StatsAccumulator {
    fn add(&mut self, conversation: &Conversation, split: usize) {
        self.conversations += 1;
        self.entities.insert(conversation.root.clone());
        for turn in &conversation.turns {
            self.turns[split] += 1;
            self.entities.insert(turn.triple.subject.clone());
            if let Some(obj) = turn.triple.object.as_entity() {
                self.entities.insert(obj.clone());
            }
            self.properties.insert(turn.triple.property.id.clone());
            self.triples.insert((
                turn.triple.subject.clone(),
                turn.triple.property.clone(),
                object_key(&turn.triple.object),
            ));
            self.paraphrases += turn.paraphrases.len();
            let distinct: BTreeSet<&str> =
                turn.paraphrases.iter().flat_map(|p| p.versions()).collect();
            self.references += distinct.len();
        }
    }

    fn finish(self, theme: String) -> ThemeStats {
        let turns_total = self.turns.iter().sum();
        let div = |n: usize| {
            if turns_total == 0 {
                0.0
            } else {
                n as f64 / turns_total as f64
            }
        };
        ThemeStats {
            theme,
            entities: self.entities.len(),
            properties: self.properties.len(),
            triples: self.triples.len(),
            conversations: self.conversations,
            turns_train: self.turns[0],
            turns_dev: self.turns[1],
            turns_test: self.turns[2],
            turns_total,
            avg_templates_per_turn: div(self.paraphrases),
            avg_references_per_turn: div(self.references),
        }
    }
}

fn object_key(node: &Node) -> String {
    match node {
        Node::Entity(id) => format!("e:{id}"),
        Node::Literal(lit) => format!("l:{}:{}", lit.value, lit.label),
    }
}

/// Per-theme and total statistics over the splits. Entities, properties and
/// triples recurring across themes are counted once in the total row;
/// reversed properties count as their base property.
pub fn stats(splits: &DatasetSplits) -> StatsReport {
    let mut per_theme: BTreeMap<String, StatsAccumulator> = BTreeMap::new();
    let mut total = StatsAccumulator::default();
    for (split, conversations) in [(0, &splits.train), (1, &splits.dev), (2, &splits.test)] {
        for conversation in conversations {
            per_theme
                .entry(conversation.theme.clone())
                .or_default()
                .add(conversation, split);
            total.add(conversation, split);
        }
    }
    StatsReport {
        themes: per_theme
            .into_iter()
            .map(|(theme, acc)| acc.finish(theme))
            .collect(),
        total: total.finish("total".to_owned()),
    }
}

// ---------------------------------------------------------------------------
// Wire format.
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct ConversationRecord {
    id: String,
    root: EndpointRecord,
    theme: String,
    seed: u64,
    turns: Vec<TurnRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EndpointRecord {
    qid: String,
    label: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct TurnRecord {
    triple: TripleRefRecord,
    answer: String,
    paraphrases: Vec<ParaphraseRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TripleRefRecord {
    s: EndpointRecord,
    p: PropertyRecord,
    o: ObjectRefRecord,
}

#[derive(Debug, Serialize, Deserialize)]
struct PropertyRecord {
    pid: String,
    label: String,
    inverse: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum ObjectRefRecord {
    Entity {
        qid: String,
        label: String,
    },
    Literal {
        literal: LiteralValueRecord,
        label: String,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct LiteralValueRecord {
    kind: LiteralKind,
    value: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ParaphraseRecord {
    ooc: String,
    ic: Option<String>,
    sic: Option<String>,
}

fn conversation_to_record(
    conversation: &Conversation,
    graph: &KnowledgeGraph,
) -> ConversationRecord {
    let entity_label = |id: &EntityId| {
        graph
            .entity(id)
            .map(|e| e.preferred_label.clone())
            .unwrap_or_else(|| id.0.clone())
    };
    ConversationRecord {
        id: conversation.id.clone(),
        root: EndpointRecord {
            qid: conversation.root.0.clone(),
            label: entity_label(&conversation.root),
        },
        theme: conversation.theme.clone(),
        seed: conversation.seed,
        turns: conversation
            .turns
            .iter()
            .map(|turn| TurnRecord {
                triple: TripleRefRecord {
                    s: EndpointRecord {
                        qid: turn.triple.subject.0.clone(),
                        label: entity_label(&turn.triple.subject),
                    },
                    p: PropertyRecord {
                        pid: turn.triple.property.id.clone(),
                        label: graph.property_label(&turn.triple.property).to_owned(),
                        inverse: turn.triple.property.inverse,
                    },
                    o: match &turn.triple.object {
                        Node::Entity(id) => ObjectRefRecord::Entity {
                            qid: id.0.clone(),
                            label: entity_label(id),
                        },
                        Node::Literal(lit) => ObjectRefRecord::Literal {
                            literal: LiteralValueRecord {
                                kind: lit.kind,
                                value: lit.value.clone(),
                            },
                            label: lit.label.clone(),
                        },
                    },
                },
                answer: turn.answer.clone(),
                paraphrases: turn
                    .paraphrases
                    .iter()
                    .map(|p| ParaphraseRecord {
                        ooc: p.ooc.clone(),
                        ic: p.ic.clone(),
                        sic: p.sic.clone(),
                    })
                    .collect(),
            })
            .collect(),
    }
}

fn conversation_from_record(record: ConversationRecord) -> Conversation {
    Conversation {
        id: record.id,
        root: EntityId(record.root.qid),
        theme: record.theme,
        seed: record.seed,
        turns: record
            .turns
            .into_iter()
            .map(|turn| Turn {
                triple: Triple::new(
                    EntityId(turn.triple.s.qid),
                    PropertyId {
                        id: turn.triple.p.pid,
                        inverse: turn.triple.p.inverse,
                    },
                    match turn.triple.o {
                        ObjectRefRecord::Entity { qid, .. } => Node::Entity(EntityId(qid)),
                        ObjectRefRecord::Literal { literal, label } => Node::Literal(Literal {
                            kind: literal.kind,
                            value: literal.value,
                            label,
                        }),
                    },
                ),
                answer: turn.answer,
                paraphrases: turn
                    .paraphrases
                    .into_iter()
                    .map(|p| QuestionVariantSet {
                        ooc: p.ooc,
                        ic: p.ic,
                        sic: p.sic,
                    })
                    .collect(),
            })
            .collect(),
    }
}

/// Write conversations as line-delimited JSON, one per line. Absent IC/SIC
/// variants serialize as explicit nulls.
pub fn serialize_conversations(
    conversations: &[Conversation],
    graph: &KnowledgeGraph,
    mut writer: impl Write,
) -> Result<()> {
    for conversation in conversations {
        let record = conversation_to_record(conversation, graph);
        serde_json::to_writer(&mut writer, &record)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Parse a line-delimited conversation file.
pub fn parse_conversations(reader: impl BufRead) -> Result<Vec<Conversation>> {
    let mut conversations = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ConversationRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno + 1,
            message: e.to_string(),
        })?;
        conversations.push(conversation_from_record(record));
    }
    Ok(conversations)
}

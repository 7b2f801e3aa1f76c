//! Rule-based transformation of out-of-context questions into in-context
//! questions: referring-expression variation, definite-article insertion,
//! past-tense rewriting, and pronominalization.
//!
//! All passes are deterministic given the per-conversation random source;
//! the only optional external dependency is a masked-LM scoring service for
//! the determiner decision, with an offline lexicon fallback.

use std::collections::HashMap;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kg::{Entity, EntityId, Gender, KnowledgeGraph, Node, Triple};
use crate::lexicon;
use crate::template::{detect_tense, instantiate, Template, Tense};
use crate::util::{find_mention, post_json, word_before, word_spans};

/// Wikidata class ids driving the gender inference rules.
pub const HUMAN_CLASS: &str = "Q5";
pub const FICTIONAL_CHARACTER_CLASS: &str = "Q95074";

// ---------------------------------------------------------------------------
// Referring expressions.
// ---------------------------------------------------------------------------

/// Per-conversation record of how each entity has been referred to.
#[derive(Debug, Clone, Default)]
pub struct MentionState {
    mentions: HashMap<EntityId, EntityMentions>,
}

#[derive(Debug, Clone)]
struct EntityMentions {
    first_reference: String,
    prior: Vec<String>,
}

impl MentionState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn first_reference(&self, id: &EntityId) -> Option<&str> {
        self.mentions.get(id).map(|m| m.first_reference.as_str())
    }

    pub fn prior_mentions(&self, id: &EntityId) -> &[String] {
        self.mentions
            .get(id)
            .map(|m| m.prior.as_slice())
            .unwrap_or(&[])
    }

    fn note(&mut self, id: &EntityId, label: String) {
        match self.mentions.get_mut(id) {
            Some(m) => m.prior.push(label),
            None => {
                self.mentions.insert(
                    id.clone(),
                    EntityMentions {
                        first_reference: label,
                        prior: Vec::new(),
                    },
                );
            }
        }
    }
}

/// Labels admissible as the first reference to an entity: those containing
/// the preferred label as a substring (always including the preferred label
/// itself).
pub fn first_mention_candidates(entity: &Entity) -> Vec<String> {
    entity
        .all_labels()
        .into_iter()
        .filter(|l| l.contains(entity.preferred_label.as_str()))
        .map(str::to_owned)
        .collect()
}

/// Labels admissible as later references: those that are substrings of the
/// first reference.
pub fn later_mention_candidates(entity: &Entity, first_reference: &str) -> Vec<String> {
    entity
        .all_labels()
        .into_iter()
        .filter(|l| first_reference.contains(l))
        .map(str::to_owned)
        .collect()
}

/// Choose the label to use for this mention and record it in the state.
pub fn select_reference(entity: &Entity, state: &mut MentionState, rng: &mut impl Rng) -> String {
    let candidates = match state.first_reference(&entity.id) {
        None => first_mention_candidates(entity),
        Some(first) => later_mention_candidates(entity, first),
    };
    let label = if candidates.is_empty() {
        entity.preferred_label.clone()
    } else {
        candidates[rng.random_range(0..candidates.len())].clone()
    };
    state.note(&entity.id, label.clone());
    label
}

// ---------------------------------------------------------------------------
// Determiners.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeterminerDecision {
    InsertThe,
    NoArticle,
}

/// Offline determiner rule: a label takes "the" when one of the configured
/// patterns is a prefix of it.
#[derive(Debug, Clone)]
pub struct DeterminerLexicon {
    pub prefixes: Vec<String>,
}

impl Default for DeterminerLexicon {
    fn default() -> Self {
        DeterminerLexicon {
            prefixes: lexicon::DEFINITE_ARTICLE_PREFIXES
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

/// Client for a masked-LM scoring service.
#[derive(Debug, Clone)]
pub struct MaskedLmClient {
    pub url: String,
}

pub const MASK_TOKEN: &str = "[MASK]";

#[derive(Serialize)]
struct MaskRequest<'a> {
    text: &'a str,
    candidates: [&'a str; 1],
}

impl MaskedLmClient {
    /// Probability of "the" at a mask inserted directly before `label` in
    /// `text`.
    pub fn the_probability(&self, text: &str, label: &str) -> Result<f64> {
        let masked = match text.find(label) {
            Some(pos) => format!("{}{} {}", &text[..pos], MASK_TOKEN, &text[pos..]),
            None => format!("{MASK_TOKEN} {text}"),
        };
        let response = post_json(
            &self.url,
            &MaskRequest {
                text: &masked,
                candidates: ["the"],
            },
        )?;
        response
            .get("probabilities")
            .and_then(|p| p.get("the"))
            .and_then(|v| v.as_f64())
            .ok_or_else(|| Error::MalformedResponse {
                url: self.url.clone(),
                message: "missing probabilities.the".into(),
            })
    }
}

#[derive(Debug, Clone)]
pub enum DeterminerKind {
    MaskedLm(MaskedLmClient),
    Lexicon(DeterminerLexicon),
}

/// Determiner decision source plus the acceptance threshold for the
/// masked-LM probability.
#[derive(Debug, Clone)]
pub struct DeterminerOracle {
    pub kind: DeterminerKind,
    pub threshold: f64,
}

impl Default for DeterminerOracle {
    fn default() -> Self {
        DeterminerOracle {
            kind: DeterminerKind::Lexicon(DeterminerLexicon::default()),
            threshold: 0.92,
        }
    }
}

impl DeterminerOracle {
    pub fn masked_lm(url: impl Into<String>) -> Self {
        DeterminerOracle {
            kind: DeterminerKind::MaskedLm(MaskedLmClient { url: url.into() }),
            threshold: 0.92,
        }
    }
}

/// Decide whether `label` takes a definite article in `sentence_context`.
pub fn decide_determiner(
    label: &str,
    sentence_context: &str,
    oracle: &DeterminerOracle,
) -> Result<DeterminerDecision> {
    match &oracle.kind {
        DeterminerKind::MaskedLm(client) => {
            let p = client.the_probability(sentence_context, label)?;
            if p >= oracle.threshold {
                Ok(DeterminerDecision::InsertThe)
            } else {
                Ok(DeterminerDecision::NoArticle)
            }
        }
        DeterminerKind::Lexicon(lexicon) => {
            if lexicon
                .prefixes
                .iter()
                .any(|p| label.starts_with(p.as_str()))
            {
                Ok(DeterminerDecision::InsertThe)
            } else {
                Ok(DeterminerDecision::NoArticle)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Tense.
// ---------------------------------------------------------------------------

fn entity_is_dead(graph: &KnowledgeGraph, node: &Node) -> bool {
    node.as_entity()
        .and_then(|id| graph.entity(id))
        .is_some_and(|e| e.is_dead)
}

/// True when the fact is no longer current: an end-time qualifier, or the
/// subject or object is a dead person.
pub fn past_trigger(triple: &Triple, graph: &KnowledgeGraph) -> bool {
    triple.qualifiers.end_time.is_some()
        || graph.entity(&triple.subject).is_some_and(|e| e.is_dead)
        || entity_is_dead(graph, &triple.object)
}

/// Rewrite a present-tense question into the past when the triple describes
/// a fact that no longer holds. Questions without a convertible auxiliary or
/// main verb pass through unchanged.
pub fn apply_tense(question: &str, triple: &Triple, graph: &KnowledgeGraph) -> String {
    if !past_trigger(triple, graph) || detect_tense(question) != Tense::Present {
        return question.to_owned();
    }
    for (start, word) in word_spans(question) {
        if let Some(past) = lexicon::past_form(word) {
            let replacement = match_capitalization(word, past);
            let mut out = String::with_capacity(question.len() + 2);
            out.push_str(&question[..start]);
            out.push_str(&replacement);
            out.push_str(&question[start + word.len()..]);
            return out;
        }
    }
    log::debug!("no convertible verb in question: {question}");
    question.to_owned()
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn match_capitalization(original: &str, replacement: &str) -> String {
    if original.chars().next().is_some_and(|c| c.is_uppercase()) {
        capitalize(replacement)
    } else {
        replacement.to_owned()
    }
}

// ---------------------------------------------------------------------------
// Gender and pronouns.
// ---------------------------------------------------------------------------

/// Gender used by the pronoun rules: neutral for anything that is neither
/// human nor a fictional character, otherwise the recorded gender, otherwise
/// unknown (which stops pronoun insertion).
pub fn infer_gender(entity: &Entity, _graph: &KnowledgeGraph) -> Gender {
    let humanlike = entity.types.contains(&EntityId::new(HUMAN_CLASS))
        || entity
            .types
            .contains(&EntityId::new(FICTIONAL_CHARACTER_CLASS));
    if !humanlike {
        return Gender::Neutral;
    }
    match entity.gender {
        Gender::Male => Gender::Male,
        Gender::Female => Gender::Female,
        Gender::Neutral | Gender::Unknown => Gender::Unknown,
    }
}

fn node_gender(node: &Node, graph: &KnowledgeGraph) -> Gender {
    match node {
        Node::Entity(id) => graph
            .entity(id)
            .map(|e| infer_gender(e, graph))
            .unwrap_or(Gender::Unknown),
        Node::Literal(_) => Gender::Neutral,
    }
}

fn subject_pronoun(gender: Gender) -> &'static str {
    match gender {
        Gender::Male => "he",
        Gender::Female => "she",
        _ => "it",
    }
}

fn object_pronoun(gender: Gender) -> &'static str {
    match gender {
        Gender::Male => "him",
        Gender::Female => "her",
        _ => "it",
    }
}

fn possessive_pronoun(gender: Gender) -> &'static str {
    match gender {
        Gender::Male => "his",
        Gender::Female => "her",
        _ => "its",
    }
}

/// Pronominalize the subject mention of a question, if the ambiguity gate
/// and the insertion rules allow it.
///
/// The gate: the subject must appear in the previous turn's triple, its
/// gender must be inferable, and it must differ from the gender of every
/// other endpoint of that triple (so the pronoun has a unique referent).
pub fn pronominalize(
    question: &str,
    triple: &Triple,
    prev_triple: &Triple,
    graph: &KnowledgeGraph,
    mention: &str,
) -> Option<String> {
    let subject = &triple.subject;
    let in_prev =
        prev_triple.subject == *subject || prev_triple.object.as_entity() == Some(subject);
    if !in_prev {
        return None;
    }
    let entity = graph.entity(subject)?;
    let gender = infer_gender(entity, graph);
    if gender == Gender::Unknown {
        return None;
    }
    if prev_triple.subject != *subject {
        let other = graph
            .entity(&prev_triple.subject)
            .map(|e| infer_gender(e, graph))?;
        if other == gender {
            return None;
        }
    }
    if prev_triple.object.as_entity() != Some(subject)
        && node_gender(&prev_triple.object, graph) == gender
    {
        return None;
    }

    let (start, end) = find_mention(question, mention)?;
    let preceding = word_before(question, start).map(str::to_lowercase);
    if let Some(prev_word) = &preceding {
        if prev_word == "a" || prev_word == "of" {
            return None;
        }
    }

    let after = &question[end..];
    let (pronoun, replace_end) = if after.starts_with("'s") {
        // Possessive marker: drop it and use a possessive pronoun.
        (possessive_pronoun(gender), end + 2)
    } else if preceding.as_deref().is_some_and(|w| {
        (lexicon::is_preposition(w) && w != "of")
            || (lexicon::is_conjunction(w) && w != "that")
            || lexicon::is_main_verb(w)
    }) {
        (object_pronoun(gender), end)
    } else {
        (subject_pronoun(gender), end)
    };

    let replacement = if start == 0 {
        capitalize(pronoun)
    } else {
        pronoun.to_owned()
    };
    let mut out = String::with_capacity(question.len());
    out.push_str(&question[..start]);
    out.push_str(&replacement);
    out.push_str(&question[replace_end..]);
    Some(out)
}

// ---------------------------------------------------------------------------
// Full in-context pass.
// ---------------------------------------------------------------------------

/// Build the in-context variant of one paraphrase. Returns `None` when no
/// pass changed the out-of-context text.
pub fn contextualize_question(
    template: &Template,
    triple: &Triple,
    prev_triple: Option<&Triple>,
    mention: &str,
    graph: &KnowledgeGraph,
    oracle: &DeterminerOracle,
) -> Result<Option<String>> {
    let ooc = instantiate(template, triple, graph)?;
    let mut ic = template.instantiate_with_label(mention)?;
    ic = apply_tense(&ic, triple, graph);

    let pronominalized =
        prev_triple.and_then(|prev| pronominalize(&ic, triple, prev, graph, mention));
    match pronominalized {
        Some(text) => ic = text,
        None => {
            if decide_determiner(mention, &ic, oracle)? == DeterminerDecision::InsertThe {
                if let Some((start, _)) = find_mention(&ic, mention) {
                    let already =
                        word_before(&ic, start).is_some_and(|w| w.eq_ignore_ascii_case("the"));
                    if !already {
                        let article = if start == 0 { "The " } else { "the " };
                        ic.insert_str(start, article);
                    }
                }
            }
        }
    }

    Ok(if ic != ooc { Some(ic) } else { None })
}

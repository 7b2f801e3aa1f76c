//! Conversational question generation evaluation: context serialization in
//! four formats and multi-reference sentence GLEU with per-theme
//! macro-averaging.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Conversation, Turn};
use crate::error::{Error, Result};
use crate::kg::KnowledgeGraph;

/// How the conversational history is rendered for a generation model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextFormat {
    Empty,
    Nl,
    Kg,
    #[serde(rename = "nl+kg")]
    NlPlusKg,
}

impl FromStr for ContextFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_lowercase().as_str() {
            "empty" => Ok(ContextFormat::Empty),
            "nl" => Ok(ContextFormat::Nl),
            "kg" => Ok(ContextFormat::Kg),
            "nl+kg" | "nlpluskg" | "nl_kg" => Ok(ContextFormat::NlPlusKg),
            other => Err(Error::InvalidConfig(format!(
                "unknown context format {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for ContextFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            ContextFormat::Empty => "empty",
            ContextFormat::Nl => "nl",
            ContextFormat::Kg => "kg",
            ContextFormat::NlPlusKg => "nl+kg",
        };
        f.write_str(name)
    }
}

fn triple_fragment(turn: &Turn, graph: &KnowledgeGraph) -> String {
    let triple = &turn.triple;
    let subject = graph
        .entity(&triple.subject)
        .map(|e| e.preferred_label.as_str())
        .unwrap_or(triple.subject.as_str());
    let base = graph.property_label(&triple.property);
    let property = if triple.property.inverse {
        format!("inverse of {base}")
    } else {
        base.to_owned()
    };
    let object = graph.node_label(&triple.object);
    format!("<{subject} | {property} | {object}>")
}

fn nl_fragment(turn: &Turn) -> String {
    let question = turn
        .paraphrases
        .first()
        .map(|p| p.ooc.as_str())
        .unwrap_or_default();
    format!("Q: {question} A: {}", turn.answer)
}

/// Render the history (oldest first) in the requested format. Fragments are
/// joined by single spaces; triples render as `<s | p | o>` and turns as
/// `Q: … A: …`.
pub fn serialize_context(
    history: &[Turn],
    format: ContextFormat,
    graph: &KnowledgeGraph,
) -> String {
    let fragments: Vec<String> = match format {
        ContextFormat::Empty => Vec::new(),
        ContextFormat::Nl => history.iter().map(nl_fragment).collect(),
        ContextFormat::Kg => history.iter().map(|t| triple_fragment(t, graph)).collect(),
        ContextFormat::NlPlusKg => history
            .iter()
            .map(|t| format!("{} {}", triple_fragment(t, graph), nl_fragment(t)))
            .collect(),
    };
    fragments.join(" ")
}

// ---------------------------------------------------------------------------
// GLEU.
// ---------------------------------------------------------------------------

/// Lowercased tokens with punctuation split off as separate tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            if !c.is_whitespace() {
                tokens.push(c.to_string());
            }
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

fn ngram_counts(tokens: &[String], max_n: usize) -> HashMap<&[String], usize> {
    let mut counts: HashMap<&[String], usize> = HashMap::new();
    for n in 1..=max_n {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

fn total_ngrams(len: usize, max_n: usize) -> usize {
    (1..=max_n).map(|n| len.saturating_sub(n - 1)).sum()
}

fn gleu_single(hypothesis: &[String], reference: &[String], max_n: usize) -> f64 {
    let hyp_counts = ngram_counts(hypothesis, max_n);
    let ref_counts = ngram_counts(reference, max_n);
    let matching: usize = hyp_counts
        .iter()
        .map(|(gram, count)| (*count).min(ref_counts.get(gram).copied().unwrap_or(0)))
        .sum();
    let hyp_total = total_ngrams(hypothesis.len(), max_n);
    let ref_total = total_ngrams(reference.len(), max_n);
    if hyp_total == 0 || ref_total == 0 {
        return 0.0;
    }
    let precision = matching as f64 / hyp_total as f64;
    let recall = matching as f64 / ref_total as f64;
    precision.min(recall)
}

/// Sentence GLEU: n-gram counts pooled over orders 1..=`max_n`, the score is
/// min(precision, recall) against a reference, max-pooled over references.
pub fn gleu(hypothesis: &str, references: &[String], max_n: usize) -> f64 {
    let hyp = tokenize(hypothesis);
    if hyp.is_empty() {
        return 0.0;
    }
    references
        .iter()
        .map(|r| gleu_single(&hyp, &tokenize(r), max_n))
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Dataset-level evaluation.
// ---------------------------------------------------------------------------

/// Pluggable sentence-level scorer. GLEU is bundled; embedding-based scorers
/// can be provided by callers.
pub trait Scorer: Sync {
    fn name(&self) -> &str;
    fn score(&self, hypothesis: &str, references: &[String]) -> f64;
}

/// Google-BLEU scorer over n-gram orders 1..=4.
#[derive(Debug, Clone, Default)]
pub struct GleuScorer;

impl Scorer for GleuScorer {
    fn name(&self) -> &str {
        "gleu"
    }

    fn score(&self, hypothesis: &str, references: &[String]) -> f64 {
        gleu(hypothesis, references, 4)
    }
}

/// One prediction read from a predictions file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Prediction {
    pub turn_id: String,
    pub hypothesis: String,
}

/// Parse line-delimited `{"turn_id","hypothesis"}` records.
pub fn parse_predictions(reader: impl BufRead) -> Result<Vec<Prediction>> {
    let mut predictions = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        predictions.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno + 1,
            message: e.to_string(),
        })?);
    }
    Ok(predictions)
}

/// Identifier of a turn inside a dataset file: `<conversation id>#<index>`.
pub fn turn_id(conversation: &Conversation, index: usize) -> String {
    format!("{}#{index}", conversation.id)
}

/// Evaluation report: per-theme means, seen/unseen group means, and the
/// macro average over themes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub scorer: String,
    pub format: ContextFormat,
    pub per_theme: BTreeMap<String, f64>,
    pub seen: Option<f64>,
    pub unseen: Option<f64>,
    pub macro_average: f64,
    pub scored: usize,
}

/// Score predictions against all question variants of their turns,
/// macro-averaging over themes. Every turn id must resolve.
pub fn evaluate(
    predictions: &[Prediction],
    dataset: &[Conversation],
    format: ContextFormat,
    unseen_themes: &BTreeSet<String>,
    scorer: &dyn Scorer,
) -> Result<EvalReport> {
    let mut turns: HashMap<String, (&str, Vec<String>)> = HashMap::new();
    for conversation in dataset {
        for (i, turn) in conversation.turns.iter().enumerate() {
            let references: Vec<String> = turn
                .paraphrases
                .iter()
                .flat_map(|p| p.versions().map(str::to_owned).collect::<Vec<_>>())
                .collect();
            turns.insert(
                turn_id(conversation, i),
                (conversation.theme.as_str(), references),
            );
        }
    }

    let mut theme_scores: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for prediction in predictions {
        let (theme, references) = turns
            .get(prediction.turn_id.as_str())
            .ok_or_else(|| Error::UnknownTurnId(prediction.turn_id.clone()))?;
        let score = scorer.score(&prediction.hypothesis, references);
        theme_scores.entry(theme).or_default().push(score);
    }

    let per_theme: BTreeMap<String, f64> = theme_scores
        .iter()
        .map(|(theme, scores)| {
            (
                theme.to_string(),
                scores.iter().sum::<f64>() / scores.len() as f64,
            )
        })
        .collect();
    let group_mean = |unseen: bool| -> Option<f64> {
        let values: Vec<f64> = per_theme
            .iter()
            .filter(|(theme, _)| unseen_themes.contains(*theme) == unseen)
            .map(|(_, v)| *v)
            .collect();
        if values.is_empty() {
            None
        } else {
            Some(values.iter().sum::<f64>() / values.len() as f64)
        }
    };
    let macro_average = if per_theme.is_empty() {
        0.0
    } else {
        per_theme.values().sum::<f64>() / per_theme.len() as f64
    };
    Ok(EvalReport {
        scorer: scorer.name().to_owned(),
        format,
        seen: group_mean(false),
        unseen: group_mean(true),
        per_theme,
        macro_average,
        scored: predictions.len(),
    })
}

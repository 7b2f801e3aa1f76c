//! Synthetic in-context rewrites: N-best candidate generation through an
//! external rewriting service (or a deterministic offline fallback), expert
//! rule classification into the three authorized categories, and selection
//! under the consecutive-category prohibition.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::Gender;
use crate::lexicon;
use crate::util::{find_mention, post_json, word_before, word_spans};

/// Rewrite categories accepted by the expert rules. `None` marks a filtered
/// candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewriteCategory {
    Pronoun,
    Demonstrative,
    Ellipsis,
    None,
}

/// A scored rewrite hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct RewriteCandidate {
    pub text: String,
    pub score: f64,
    pub category: RewriteCategory,
}

/// Rewriting service configuration. Without an endpoint the deterministic
/// fallback generator is used and the pipeline stays fully offline.
#[derive(Debug, Clone)]
pub struct RewriterClient {
    pub endpoint: Option<String>,
    pub n_best: usize,
}

impl Default for RewriterClient {
    fn default() -> Self {
        RewriterClient {
            endpoint: None,
            n_best: 20,
        }
    }
}

impl RewriterClient {
    pub fn with_endpoint(url: impl Into<String>) -> Self {
        RewriterClient {
            endpoint: Some(url.into()),
            n_best: 20,
        }
    }
}

/// Subject information the fallback generator substitutes with: the labels
/// that may mention the subject in the question, the subject gender, and the
/// label of its most specific type.
#[derive(Debug, Clone, Default)]
pub struct TurnHints {
    pub subject_labels: Vec<String>,
    pub gender: Gender,
    pub type_label: Option<String>,
}

#[derive(Serialize)]
struct RewriteRequest<'a> {
    question: &'a str,
    history: Vec<HistoryEntry<'a>>,
    n_best: usize,
}

#[derive(Serialize)]
struct HistoryEntry<'a> {
    q: &'a str,
    a: &'a str,
}

#[derive(Deserialize)]
struct RewriteResponse {
    candidates: Vec<WireCandidate>,
}

#[derive(Deserialize)]
struct WireCandidate {
    text: String,
    score: f64,
}

/// Produce up to `n_best` unclassified candidates, scores nonincreasing.
pub fn generate_candidates(
    question: &str,
    history: &[(String, String)],
    hints: &TurnHints,
    client: &RewriterClient,
) -> Result<Vec<RewriteCandidate>> {
    let mut candidates = match &client.endpoint {
        Some(url) => {
            let request = RewriteRequest {
                question,
                history: history.iter().map(|(q, a)| HistoryEntry { q, a }).collect(),
                n_best: client.n_best,
            };
            let value = post_json(url, &request)?;
            let response: RewriteResponse =
                serde_json::from_value(value).map_err(|e| Error::MalformedResponse {
                    url: url.clone(),
                    message: e.to_string(),
                })?;
            response
                .candidates
                .into_iter()
                .map(|c| RewriteCandidate {
                    text: c.text,
                    score: c.score,
                    category: RewriteCategory::None,
                })
                .collect()
        }
        None => fallback_candidates(question, hints),
    };
    candidates.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    candidates.truncate(client.n_best);
    Ok(candidates)
}

/// Deterministic template-driven rewriter used when no service is
/// configured: pronoun substitution of the subject mention, demonstrative
/// substitution with the subject's type label, and prefix truncation at the
/// mention.
fn fallback_candidates(question: &str, hints: &TurnHints) -> Vec<RewriteCandidate> {
    let mut labels: Vec<&String> = hints.subject_labels.iter().collect();
    labels.sort_by_key(|l| std::cmp::Reverse(l.len()));
    let mention = labels
        .iter()
        .find_map(|l| find_mention(question, l).map(|span| (l.as_str(), span)));

    let mut texts: Vec<String> = Vec::new();
    if let Some((_, (start, end))) = mention {
        let possessive = question[end..].starts_with("'s");
        let before = word_before(question, start).map(str::to_lowercase);
        if hints.gender != Gender::Unknown {
            let pronoun = if possessive {
                possessive_pronoun(hints.gender)
            } else if before.as_deref().is_some_and(|w| {
                lexicon::is_preposition(w)
                    || w == "of"
                    || lexicon::is_conjunction(w)
                    || lexicon::is_main_verb(w)
            }) {
                object_pronoun(hints.gender)
            } else {
                subject_pronoun(hints.gender)
            };
            texts.push(substitute(
                question,
                start,
                if possessive { end + 2 } else { end },
                pronoun,
            ));
        }
        if let Some(type_label) = &hints.type_label {
            let phrase = if possessive {
                format!("this {type_label}'s")
            } else {
                format!("this {type_label}")
            };
            texts.push(substitute(
                question,
                start,
                if possessive { end + 2 } else { end },
                &phrase,
            ));
        }
        if start > 0 {
            if let Some(truncated) = truncate_before(question, start) {
                texts.push(truncated);
            }
        }
    } else if let Some((start, word)) = first_pronoun_word(question) {
        if let Some(type_label) = &hints.type_label {
            let possessive = matches!(
                word.to_lowercase().as_str(),
                "his" | "its" | "their" | "hers"
            ) || (word.eq_ignore_ascii_case("her")
                && !question[start + word.len()..].trim_start().starts_with('?'));
            let phrase = if possessive {
                format!("this {type_label}'s")
            } else {
                format!("this {type_label}")
            };
            texts.push(substitute(question, start, start + word.len(), &phrase));
        }
    }

    texts
        .into_iter()
        .filter(|t| t != question)
        .enumerate()
        .map(|(i, text)| RewriteCandidate {
            text,
            score: -0.1 * (i as f64 + 1.0),
            category: RewriteCategory::None,
        })
        .collect()
}

fn substitute(question: &str, start: usize, end: usize, replacement: &str) -> String {
    let replacement = if start == 0 {
        capitalize(replacement)
    } else {
        replacement.to_owned()
    };
    format!("{}{}{}", &question[..start], replacement, &question[end..])
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Trailing function words dropped after truncating at the mention.
const TRUNCATION_DROP: &[&str] = &[
    "of", "the", "a", "an", "is", "are", "was", "were", "does", "did", "do", "has", "have", "had",
    "in", "at", "on", "for", "with", "by", "to", "from", "that",
];

fn truncate_before(question: &str, mention_start: usize) -> Option<String> {
    let mut words = word_spans(&question[..mention_start]);
    while let Some((_, w)) = words.last() {
        if TRUNCATION_DROP.contains(&w.to_lowercase().as_str()) {
            words.pop();
        } else {
            break;
        }
    }
    let (start, word) = *words.last()?;
    Some(format!("{}?", &question[..start + word.len()]))
}

fn first_pronoun_word(question: &str) -> Option<(usize, &str)> {
    word_spans(question)
        .into_iter()
        .find(|(_, w)| lexicon::is_pronoun_accept_word(w))
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

// ---------------------------------------------------------------------------
// Word alignment.
// ---------------------------------------------------------------------------

/// Minimal word-level edit alignment between two token lists.
/// `different_words` counts substitutions, insertions and deletions; the
/// fraction is relative to `b` (1.0 when `b` is empty).
pub fn word_alignment_distance<S: AsRef<str>>(a: &[S], b: &[S]) -> (usize, f64) {
    let n = a.len();
    let m = b.len();
    let mut dp = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in dp.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in dp[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let cost = usize::from(a[i - 1].as_ref() != b[j - 1].as_ref());
            dp[i][j] = (dp[i - 1][j] + 1)
                .min(dp[i][j - 1] + 1)
                .min(dp[i - 1][j - 1] + cost);
        }
    }
    let distance = dp[n][m];
    let fraction = if m == 0 {
        1.0
    } else {
        distance as f64 / m as f64
    };
    (distance, fraction)
}

/// Lowercased whitespace tokens of a question with entity labels removed.
///
/// Entity labels are removed as whole token spans, longest label first; a
/// possessive "'s" on the span's last token and an immediately preceding
/// "of" are absorbed into the removal (the pronominal rewrite of
/// "the X of some entity" has no surface trace of either word). The terminal
/// question mark is stripped before tokenizing.
pub fn tokens_without_entities(question: &str, entities: &[String]) -> Vec<String> {
    let trimmed = question.trim().trim_end_matches('?');
    let mut tokens: Vec<String> = trimmed.split_whitespace().map(str::to_lowercase).collect();

    let mut labels: Vec<Vec<String>> = entities
        .iter()
        .map(|e| {
            e.split_whitespace()
                .map(str::to_lowercase)
                .collect::<Vec<_>>()
        })
        .filter(|l| !l.is_empty())
        .collect();
    labels.sort_by_key(|l| std::cmp::Reverse((l.len(), l.iter().map(String::len).sum::<usize>())));

    for label in &labels {
        loop {
            let mut found = None;
            'scan: for i in 0..tokens.len() {
                if i + label.len() > tokens.len() {
                    break;
                }
                for (k, part) in label.iter().enumerate() {
                    let token = &tokens[i + k];
                    let matches_plain = token == part;
                    let matches_possessive =
                        k == label.len() - 1 && token.strip_suffix("'s").is_some_and(|t| t == part);
                    if !matches_plain && !matches_possessive {
                        continue 'scan;
                    }
                }
                found = Some(i);
                break;
            }
            match found {
                Some(i) => {
                    let mut start = i;
                    if start > 0 && tokens[start - 1] == "of" {
                        start -= 1;
                    }
                    tokens.drain(start..i + label.len());
                }
                None => break,
            }
        }
    }
    tokens
}

// ---------------------------------------------------------------------------
// Classification and selection.
// ---------------------------------------------------------------------------

fn question_words(text: &str) -> Vec<String> {
    word_spans(text)
        .into_iter()
        .map(|(_, w)| w.to_lowercase())
        .collect()
}

fn is_pronoun_rewrite(candidate: &str, original: &str, history_entities: &[String]) -> bool {
    if !question_words(candidate)
        .iter()
        .any(|w| lexicon::is_pronoun_accept_word(w))
    {
        return false;
    }
    let a = tokens_without_entities(original, history_entities);
    let b = tokens_without_entities(candidate, history_entities);
    let (different, fraction) = word_alignment_distance(&a, &b);
    different == 1 || fraction < 0.25
}

/// Minimum length of the head word after "this"/"these".
const MIN_HEAD_LEN: usize = 3;

fn is_demonstrative_rewrite(candidate: &str) -> bool {
    let words = question_words(candidate);
    for (i, w) in words.iter().enumerate() {
        if w != "this" && w != "these" {
            continue;
        }
        let Some(head) = words.get(i + 1) else {
            continue;
        };
        let head = head.trim_end_matches("'s");
        if head.len() < MIN_HEAD_LEN {
            continue;
        }
        let occurrences = words
            .iter()
            .filter(|other| other.trim_end_matches("'s") == head)
            .count();
        if occurrences == 1 {
            return true;
        }
    }
    false
}

fn is_ellipsis_rewrite(candidate: &str, original: &str, history_entities: &[String]) -> bool {
    let cand = candidate.trim().trim_end_matches('?').to_lowercase();
    let orig = original.trim().trim_end_matches('?').to_lowercase();
    if cand.is_empty() || cand.len() >= orig.len() || !orig.starts_with(&cand) {
        return false;
    }
    !history_entities
        .iter()
        .any(|e| !e.is_empty() && find_mention(&cand, &e.to_lowercase()).is_some())
}

/// Assign a category to a candidate rewrite of `original`, given the entity
/// labels of previous turns. First match wins in the order Pronoun,
/// Demonstrative, Ellipsis.
pub fn classify_candidate(
    candidate: &str,
    original: &str,
    history_entities: &[String],
) -> RewriteCategory {
    if candidate.trim().is_empty() {
        return RewriteCategory::None;
    }
    if is_pronoun_rewrite(candidate, original, history_entities) {
        RewriteCategory::Pronoun
    } else if is_demonstrative_rewrite(candidate) {
        RewriteCategory::Demonstrative
    } else if is_ellipsis_rewrite(candidate, original, history_entities) {
        RewriteCategory::Ellipsis
    } else {
        RewriteCategory::None
    }
}

/// Highest-scored candidate whose category is authorized and not in the
/// prohibited set. Returns `None` when every candidate is filtered.
pub fn select_rewrite_excluding(
    candidates: &[RewriteCandidate],
    prohibited: &BTreeSet<RewriteCategory>,
) -> Option<(String, RewriteCategory)> {
    candidates
        .iter()
        .filter(|c| c.category != RewriteCategory::None && !prohibited.contains(&c.category))
        .max_by(|a, b| {
            a.score
                .partial_cmp(&b.score)
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .map(|c| (c.text.clone(), c.category))
}

/// As [`select_rewrite_excluding`] with the previous turn's single category
/// prohibited.
pub fn select_rewrite(
    candidates: &[RewriteCandidate],
    prev_category: Option<RewriteCategory>,
) -> Option<(String, RewriteCategory)> {
    let prohibited: BTreeSet<RewriteCategory> = prev_category.into_iter().collect();
    select_rewrite_excluding(candidates, &prohibited)
}

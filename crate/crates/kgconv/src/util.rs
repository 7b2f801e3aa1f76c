//! Small internal helpers.

use serde::Serialize;

use crate::error::{Error, Result};

/// POST a JSON body and parse the JSON response. Transport failures map to
/// `ServiceUnreachable`, undecodable bodies to `MalformedResponse`.
pub(crate) fn post_json(url: &str, body: &impl Serialize) -> Result<serde_json::Value> {
    let mut response = ureq::post(url)
        .send_json(body)
        .map_err(|e| Error::ServiceUnreachable {
            url: url.to_owned(),
            message: e.to_string(),
        })?;
    response
        .body_mut()
        .read_json()
        .map_err(|e| Error::MalformedResponse {
            url: url.to_owned(),
            message: e.to_string(),
        })
}

/// Words of a string with their byte offsets. A word is a maximal run of
/// alphanumeric characters or apostrophes.
pub(crate) fn word_spans(text: &str) -> Vec<(usize, &str)> {
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() || c == '\'' {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(s) = start.take() {
            spans.push((s, &text[s..i]));
        }
    }
    if let Some(s) = start {
        spans.push((s, &text[s..]));
    }
    spans
}

/// First word-boundary occurrence of `mention` in `text`.
pub(crate) fn find_mention(text: &str, mention: &str) -> Option<(usize, usize)> {
    if mention.is_empty() {
        return None;
    }
    let mut from = 0;
    while let Some(rel) = text[from..].find(mention) {
        let start = from + rel;
        let end = start + mention.len();
        let before_ok = text[..start]
            .chars()
            .next_back()
            .is_none_or(|c| !c.is_alphanumeric());
        let after_ok = text[end..]
            .chars()
            .next()
            .is_none_or(|c| !c.is_alphanumeric());
        if before_ok && after_ok {
            return Some((start, end));
        }
        from = start + mention.len();
    }
    None
}

/// The word immediately preceding byte offset `pos`.
pub(crate) fn word_before(text: &str, pos: usize) -> Option<&str> {
    word_spans(&text[..pos]).into_iter().last().map(|(_, w)| w)
}

/// FNV-1a 64-bit hash. Used to derive per-conversation seeds and split
/// assignments; stable across platforms and runs, unlike `DefaultHasher`.
pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Mix a seed with a string discriminator and a counter.
pub(crate) fn derive_seed(seed: u64, tag: &str, index: u64) -> u64 {
    let mut bytes = Vec::with_capacity(tag.len() + 16);
    bytes.extend_from_slice(&seed.to_le_bytes());
    bytes.extend_from_slice(tag.as_bytes());
    bytes.extend_from_slice(&index.to_le_bytes());
    fnv1a64(&bytes)
}

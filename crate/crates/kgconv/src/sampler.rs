//! Root-anchored triple sequence sampling via a greedy stochastic walk.
//!
//! Starting from a root entity, triples are drawn uniformly from the
//! currently admissible candidates of the root's 2-hop neighborhood: the
//! next triple's subject must be the root or an endpoint of the previous
//! triple, and no triple may repeat. After each emitted triple the walk
//! stops with a probability that grows linearly with the step index,
//! overridden to continue below the minimum length and to stop at the
//! maximum.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, Triple};

/// Walk parameters. The stop probability at step `i` is
/// `slope * i + intercept`, clamped to [0, 1].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WalkConfig {
    pub min_len: usize,
    pub max_len: usize,
    pub per_root: usize,
    pub stop_slope: f64,
    pub stop_intercept: f64,
    pub max_resamples: usize,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            min_len: 5,
            max_len: 19,
            per_root: 3,
            stop_slope: 0.06,
            stop_intercept: -0.18,
            max_resamples: 10,
        }
    }
}

/// An ordered triple sequence anchored on `root`, with the seed that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleSequence {
    pub root: EntityId,
    pub triples: Vec<Triple>,
    pub seed: u64,
}

impl TripleSequence {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Check the walk invariants: anchoring, subject continuity, no
    /// repeated (s, p, o) tuple, and length bounds.
    pub fn validate(&self, config: &WalkConfig) -> std::result::Result<(), String> {
        if self.triples.len() < config.min_len || self.triples.len() > config.max_len {
            return Err(format!(
                "length {} outside [{}, {}]",
                self.triples.len(),
                config.min_len,
                config.max_len
            ));
        }
        if self.triples[0].subject != self.root {
            return Err(format!(
                "first subject {} is not the root {}",
                self.triples[0].subject, self.root
            ));
        }
        let mut seen: HashSet<&Triple> = HashSet::new();
        for (i, triple) in self.triples.iter().enumerate() {
            if !seen.insert(triple) {
                return Err(format!("triple repeated at position {i}"));
            }
            if i == 0 {
                continue;
            }
            let prev = &self.triples[i - 1];
            let continuous = triple.subject == self.root
                || triple.subject == prev.subject
                || Some(&triple.subject) == prev.object.as_entity();
            if !continuous {
                return Err(format!("subject discontinuity at position {i}"));
            }
        }
        Ok(())
    }
}

/// Probability of stopping after the `i`-th emitted triple.
pub fn stop_probability(i: usize, config: &WalkConfig) -> f64 {
    (config.stop_slope * i as f64 + config.stop_intercept).clamp(0.0, 1.0)
}

/// Sample one sequence. `neighborhood` must be the (deterministically
/// ordered) 2-hop neighborhood of `root` and hold at least `min_len`
/// triples.
pub fn sample_sequence(
    neighborhood: &[Triple],
    root: &EntityId,
    rng: &mut impl Rng,
    config: &WalkConfig,
) -> Result<TripleSequence> {
    sample_sequence_avoiding(neighborhood, root, rng, config, &HashSet::new())
}

/// As [`sample_sequence`], but avoiding the given opening triples when other
/// openings exist. Used to keep a root's sequences distinct.
fn sample_sequence_avoiding(
    neighborhood: &[Triple],
    root: &EntityId,
    rng: &mut impl Rng,
    config: &WalkConfig,
    banned_openings: &HashSet<Triple>,
) -> Result<TripleSequence> {
    if neighborhood.len() < config.min_len {
        return Err(Error::WalkExhausted {
            root: root.clone(),
            attempts: 0,
        });
    }
    let mut by_subject: HashMap<&EntityId, Vec<usize>> = HashMap::new();
    for (i, triple) in neighborhood.iter().enumerate() {
        by_subject.entry(&triple.subject).or_default().push(i);
    }

    let openings: Vec<usize> = {
        let all: Vec<usize> = by_subject.get(root).cloned().unwrap_or_default();
        let unbanned: Vec<usize> = all
            .iter()
            .copied()
            .filter(|&i| !banned_openings.contains(&neighborhood[i]))
            .collect();
        if unbanned.is_empty() {
            all
        } else {
            unbanned
        }
    };
    if openings.is_empty() {
        return Err(Error::WalkExhausted {
            root: root.clone(),
            attempts: 0,
        });
    }

    for _attempt in 0..=config.max_resamples {
        let mut used: HashSet<usize> = HashSet::new();
        let mut sequence: Vec<usize> = Vec::new();
        let first = openings[rng.random_range(0..openings.len())];
        used.insert(first);
        sequence.push(first);

        loop {
            let emitted = sequence.len();
            if emitted == config.max_len {
                break;
            }
            if emitted >= config.min_len {
                let p = stop_probability(emitted, config);
                if rng.random::<f64>() < p {
                    break;
                }
            }
            let prev = &neighborhood[*sequence.last().unwrap()];
            let mut candidates: Vec<usize> = Vec::new();
            let push_bucket = |subject: &EntityId, candidates: &mut Vec<usize>| {
                if let Some(bucket) = by_subject.get(subject) {
                    candidates.extend(bucket.iter().copied().filter(|i| !used.contains(i)));
                }
            };
            push_bucket(root, &mut candidates);
            if prev.subject != *root {
                push_bucket(&prev.subject, &mut candidates);
            }
            if let Some(obj) = prev.object.as_entity() {
                if obj != root && *obj != prev.subject {
                    push_bucket(obj, &mut candidates);
                }
            }
            if candidates.is_empty() {
                break;
            }
            let next = candidates[rng.random_range(0..candidates.len())];
            used.insert(next);
            sequence.push(next);
        }

        if sequence.len() >= config.min_len {
            return Ok(TripleSequence {
                root: root.clone(),
                triples: sequence
                    .into_iter()
                    .map(|i| neighborhood[i].clone())
                    .collect(),
                seed: 0,
            });
        }
    }
    Err(Error::WalkExhausted {
        root: root.clone(),
        attempts: config.max_resamples,
    })
}

/// Sample `config.per_root` sequences for a root, preferring distinct
/// opening triples when the neighborhood offers them.
pub fn sample_conversations(
    graph: &KnowledgeGraph,
    root: &EntityId,
    config: &WalkConfig,
    rng: &mut impl Rng,
) -> Result<Vec<TripleSequence>> {
    let neighborhood = graph.neighborhood(root)?;
    sample_conversations_from(&neighborhood, root, config, rng)
}

/// As [`sample_conversations`], over a precomputed neighborhood.
pub fn sample_conversations_from(
    neighborhood: &[Triple],
    root: &EntityId,
    config: &WalkConfig,
    rng: &mut impl Rng,
) -> Result<Vec<TripleSequence>> {
    let mut used_openings: HashSet<Triple> = HashSet::new();
    let mut sequences = Vec::with_capacity(config.per_root);
    for _ in 0..config.per_root {
        let seq = sample_sequence_avoiding(neighborhood, root, rng, config, &used_openings)?;
        used_openings.insert(seq.triples[0].clone());
        sequences.push(seq);
    }
    Ok(sequences)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{Node, PropertyId};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn triple(s: &str, p: &str, o: &str) -> Triple {
        Triple::new(
            EntityId::from(s),
            PropertyId::new(p),
            Node::Entity(EntityId::from(o)),
        )
    }

    /// Chain r -> a -> b -> c -> d -> e, one admissible choice per step.
    fn chain() -> Vec<Triple> {
        vec![
            triple("r", "P1", "a"),
            triple("a", "P2", "b"),
            triple("b", "P3", "c"),
            triple("c", "P4", "d"),
            triple("d", "P5", "e"),
        ]
    }

    /// Synthetic neighborhood that never runs out of candidates within the
    /// length bounds: `spokes` first-hop triples, each object with `spokes`
    /// successors.
    pub(crate) fn unbounded_neighborhood(spokes: usize) -> Vec<Triple> {
        let mut triples = Vec::new();
        for i in 0..spokes {
            let o1 = format!("h{i}");
            triples.push(triple("r", &format!("P{i}"), &o1));
            for j in 0..spokes {
                triples.push(triple(&o1, &format!("Q{j}"), &format!("t{i}_{j}")));
            }
        }
        triples
    }

    #[test]
    fn stop_probability_examples() {
        let cfg = WalkConfig::default();
        assert_eq!(stop_probability(1, &cfg), 0.0);
        assert_eq!(stop_probability(3, &cfg), 0.0);
        assert_eq!(stop_probability(10, &cfg), 0.42);
        assert_eq!(stop_probability(20, &cfg), 1.0);
    }

    #[test]
    fn stop_probability_is_monotone_and_bounded() {
        let cfg = WalkConfig::default();
        let mut prev = 0.0;
        for i in 1..100 {
            let p = stop_probability(i, &cfg);
            assert!((0.0..=1.0).contains(&p));
            assert!(p >= prev);
            prev = p;
        }
    }

    #[test]
    fn chain_yields_the_unique_sequence() {
        let neighborhood = chain();
        let root = EntityId::from("r");
        let cfg = WalkConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let seq = sample_sequence(&neighborhood, &root, &mut rng, &cfg).unwrap();
        assert_eq!(seq.triples, neighborhood);
        seq.validate(&cfg).unwrap();
    }

    #[test]
    fn sampling_is_deterministic_for_equal_seeds() {
        let neighborhood = unbounded_neighborhood(8);
        let root = EntityId::from("r");
        let cfg = WalkConfig::default();
        let a = sample_sequence(
            &neighborhood,
            &root,
            &mut ChaCha8Rng::seed_from_u64(42),
            &cfg,
        )
        .unwrap();
        let b = sample_sequence(
            &neighborhood,
            &root,
            &mut ChaCha8Rng::seed_from_u64(42),
            &cfg,
        )
        .unwrap();
        assert_eq!(a.triples, b.triples);
        let c = sample_sequence(
            &neighborhood,
            &root,
            &mut ChaCha8Rng::seed_from_u64(43),
            &cfg,
        )
        .unwrap();
        assert_ne!(a.triples, c.triples);
    }

    #[test]
    fn too_small_neighborhood_errors() {
        let neighborhood = vec![triple("r", "P1", "a")];
        let cfg = WalkConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            sample_sequence(&neighborhood, &EntityId::from("r"), &mut rng, &cfg),
            Err(Error::WalkExhausted { .. })
        ));
    }

    #[test]
    fn dead_end_before_min_len_errors_after_resampling() {
        // Five triples exist but only a 3-long path from the root.
        let neighborhood = vec![
            triple("r", "P1", "a"),
            triple("a", "P2", "b"),
            triple("b", "P3", "c"),
            triple("x", "P4", "y"),
            triple("y", "P5", "z"),
        ];
        let cfg = WalkConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            sample_sequence(&neighborhood, &EntityId::from("r"), &mut rng, &cfg),
            Err(Error::WalkExhausted { attempts: 10, .. })
        ));
    }

    #[test]
    fn per_root_one_gives_singleton() {
        let neighborhood = unbounded_neighborhood(6);
        let cfg = WalkConfig {
            per_root: 1,
            ..WalkConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let seqs =
            sample_conversations_from(&neighborhood, &EntityId::from("r"), &cfg, &mut rng).unwrap();
        assert_eq!(seqs.len(), 1);
    }

    #[test]
    fn three_openings_force_distinct_first_triples() {
        // Exactly 3 first-hop triples; each opening leads to enough
        // successors to finish a walk.
        let mut neighborhood = Vec::new();
        for i in 0..3 {
            let o1 = format!("h{i}");
            neighborhood.push(triple("r", &format!("P{i}"), &o1));
            for j in 0..8 {
                neighborhood.push(triple(&o1, &format!("Q{j}"), &format!("t{i}_{j}")));
            }
        }
        let cfg = WalkConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let seqs =
            sample_conversations_from(&neighborhood, &EntityId::from("r"), &cfg, &mut rng).unwrap();
        let openings: HashSet<&Triple> = seqs.iter().map(|s| &s.triples[0]).collect();
        assert_eq!(openings.len(), 3);
        for seq in &seqs {
            seq.validate(&cfg).unwrap();
        }
    }

    #[test]
    fn walk_lengths_match_the_stop_process() {
        // Monte-Carlo check of the emitted length distribution on an
        // unbounded neighborhood; the analytic mean of the stop process with
        // the min-length override is ~8.05.
        let neighborhood = unbounded_neighborhood(30);
        let root = EntityId::from("r");
        let cfg = WalkConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let runs = 2_000;
        let mut total = 0usize;
        for _ in 0..runs {
            let seq = sample_sequence(&neighborhood, &root, &mut rng, &cfg).unwrap();
            seq.validate(&cfg).unwrap();
            total += seq.len();
        }
        let mean = total as f64 / runs as f64;
        assert!((7.5..=9.5).contains(&mean), "mean length {mean}");
    }
}

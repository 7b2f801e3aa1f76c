//! End-to-end orchestration: root selection, sequence sampling, and the
//! verbalize / contextualize / rewrite stages, runnable separately or as one
//! deterministic pass.
//!
//! Determinism contract: per-conversation seeds are derived from the global
//! seed, the theme, the root and the sequence index, so results do not
//! depend on scheduling; running the stages individually equals running
//! [`emit`] end to end.

use std::collections::BTreeMap;
use std::io::BufRead;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::context::DeterminerOracle;
use crate::dataset::{
    contextualize_conversation, rewrite_conversation, verbalize, AssembleContext, Conversation,
    SplitRatios,
};
use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, Triple, TripleRecord};
use crate::rewrite::RewriterClient;
use crate::sampler::{sample_conversations_from, TripleSequence, WalkConfig};
use crate::template::TemplateLibrary;
use crate::util::derive_seed;

/// Everything a full generation run needs besides the graph and templates.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub seed: u64,
    pub walk: WalkConfig,
    /// Minimum neighborhood size for root eligibility.
    pub min_neighborhood: usize,
    /// Theme name to Wikidata class of the root entities.
    pub themes: BTreeMap<String, EntityId>,
    pub paraphrase_cap: usize,
    pub determiner: DeterminerOracle,
    pub rewriter: RewriterClient,
    pub split: SplitRatios,
}

impl PipelineConfig {
    pub fn new(seed: u64, themes: BTreeMap<String, EntityId>) -> Self {
        PipelineConfig {
            seed,
            walk: WalkConfig::default(),
            min_neighborhood: 20,
            themes,
            paraphrase_cap: 10,
            determiner: DeterminerOracle::default(),
            rewriter: RewriterClient::default(),
            split: SplitRatios::default(),
        }
    }
}

/// Parse a theme file: a JSON object mapping theme names to class ids.
pub fn load_themes(reader: impl std::io::Read) -> Result<BTreeMap<String, EntityId>> {
    let map: BTreeMap<String, String> =
        serde_json::from_reader(reader).map_err(|e| Error::Parse {
            line: 0,
            message: e.to_string(),
        })?;
    Ok(map
        .into_iter()
        .map(|(theme, class)| (theme, EntityId(class)))
        .collect())
}

/// A sampled sequence with its theme, as carried between stages.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSequence {
    pub theme: String,
    pub index: usize,
    pub sequence: TripleSequence,
}

impl SampledSequence {
    /// Stable conversation identifier: `<theme>/<root>/<index>`.
    pub fn conversation_id(&self) -> String {
        format!("{}/{}/{}", self.theme, self.sequence.root, self.index)
    }
}

/// Sample sequences for every eligible root of every theme. When a template
/// library is given, each root's neighborhood is restricted to triples some
/// template covers, so verbalization cannot hit an uncovered property.
/// Roots whose restricted neighborhood is too small to walk are skipped.
pub fn sample_stage(
    graph: &KnowledgeGraph,
    library: Option<&TemplateLibrary>,
    config: &PipelineConfig,
) -> Result<Vec<SampledSequence>> {
    let eligible = graph.eligible_roots(&config.themes, config.min_neighborhood);
    let mut sampled = Vec::new();
    for (theme, roots) in &eligible {
        for root in roots {
            let mut neighborhood: Vec<Triple> = graph.neighborhood(root)?;
            if let Some(library) = library {
                neighborhood.retain(|t| library.covers(t, graph));
            }
            if neighborhood.len() < config.walk.min_len {
                log::warn!(
                    "skipping root {root} ({theme}): {} coverable triples",
                    neighborhood.len()
                );
                continue;
            }
            let walk_seed = derive_seed(config.seed, &format!("{theme}/{root}"), 0);
            let mut rng = ChaCha8Rng::seed_from_u64(walk_seed);
            match sample_conversations_from(&neighborhood, root, &config.walk, &mut rng) {
                Ok(sequences) => {
                    for (index, mut sequence) in sequences.into_iter().enumerate() {
                        sequence.seed =
                            derive_seed(config.seed, &format!("{theme}/{root}"), index as u64 + 1);
                        sampled.push(SampledSequence {
                            theme: theme.clone(),
                            index,
                            sequence,
                        });
                    }
                }
                Err(Error::WalkExhausted { root, attempts }) => {
                    log::warn!(
                        "skipping root {root} ({theme}): walk exhausted after {attempts} attempts"
                    );
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(sampled)
}

/// Verbalize sampled sequences into out-of-context conversations.
pub fn verbalize_stage(
    sequences: &[SampledSequence],
    graph: &KnowledgeGraph,
    library: &TemplateLibrary,
    config: &PipelineConfig,
) -> Result<Vec<Conversation>> {
    let ctx = assemble_context(graph, library, config);
    sequences
        .par_iter()
        .map(|s| verbalize(&s.sequence, &s.theme, s.conversation_id(), &ctx))
        .collect()
}

/// Add in-context variants to every conversation, in parallel.
pub fn contextualize_stage(
    conversations: &mut [Conversation],
    graph: &KnowledgeGraph,
    library: &TemplateLibrary,
    config: &PipelineConfig,
) -> Result<()> {
    let ctx = assemble_context(graph, library, config);
    conversations
        .par_iter_mut()
        .map(|c| contextualize_conversation(c, &ctx))
        .collect()
}

/// Add synthetic in-context variants to every conversation, in parallel.
pub fn rewrite_stage(
    conversations: &mut [Conversation],
    graph: &KnowledgeGraph,
    library: &TemplateLibrary,
    config: &PipelineConfig,
) -> Result<()> {
    let ctx = assemble_context(graph, library, config);
    conversations
        .par_iter_mut()
        .map(|c| rewrite_conversation(c, &ctx))
        .collect()
}

fn assemble_context<'a>(
    graph: &'a KnowledgeGraph,
    library: &'a TemplateLibrary,
    config: &'a PipelineConfig,
) -> AssembleContext<'a> {
    AssembleContext {
        graph,
        library,
        determiner: &config.determiner,
        rewriter: &config.rewriter,
        paraphrase_cap: config.paraphrase_cap,
    }
}

/// Run all generation stages over an ingested graph.
pub fn emit(
    graph: &KnowledgeGraph,
    library: &TemplateLibrary,
    config: &PipelineConfig,
) -> Result<Vec<Conversation>> {
    let sequences = sample_stage(graph, Some(library), config)?;
    let mut conversations = verbalize_stage(&sequences, graph, library, config)?;
    contextualize_stage(&mut conversations, graph, library, config)?;
    rewrite_stage(&mut conversations, graph, library, config)?;
    Ok(conversations)
}

// ---------------------------------------------------------------------------
// Sequence artifact wire format.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct SequenceRecord {
    theme: String,
    index: usize,
    root: String,
    seed: u64,
    triples: Vec<TripleRecord>,
}

/// Write sampled sequences as line-delimited JSON.
pub fn save_sequences(
    sequences: &[SampledSequence],
    mut writer: impl std::io::Write,
) -> Result<()> {
    for s in sequences {
        let record = SequenceRecord {
            theme: s.theme.clone(),
            index: s.index,
            root: s.sequence.root.0.clone(),
            seed: s.sequence.seed,
            triples: s
                .sequence
                .triples
                .iter()
                .map(TripleRecord::from_triple)
                .collect(),
        };
        serde_json::to_writer(&mut writer, &record)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Parse a sequence artifact file.
pub fn load_sequences(reader: impl BufRead) -> Result<Vec<SampledSequence>> {
    let mut sequences = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SequenceRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno + 1,
            message: e.to_string(),
        })?;
        sequences.push(SampledSequence {
            theme: record.theme,
            index: record.index,
            sequence: TripleSequence {
                root: EntityId(record.root),
                triples: record
                    .triples
                    .into_iter()
                    .map(TripleRecord::into_triple)
                    .collect(),
                seed: record.seed,
            },
        });
    }
    Ok(sequences)
}

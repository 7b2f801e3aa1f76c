//! Command-line front end for the dataset generation pipeline.
//!
//! Each stage reads the previous stage's line-delimited JSON artifact and
//! writes its own atomically; `emit` chains every stage in one run. With
//! equal configuration and seed, outputs are byte-identical.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use kgconv::context::DeterminerOracle;
use kgconv::dataset::{
    parse_conversations, serialize_conversations, split_dataset, stats, SplitRatios,
};
use kgconv::eval::{evaluate, parse_predictions, ContextFormat, GleuScorer};
use kgconv::kg::{load_graph, save_graph, ExclusionRules, KnowledgeGraph};
use kgconv::pipeline::{
    contextualize_stage, emit, load_sequences, load_themes, rewrite_stage, sample_stage,
    save_sequences, verbalize_stage, PipelineConfig,
};
use kgconv::rewrite::RewriterClient;
use kgconv::template::{
    cluster_conditions, load_conditions, load_qa_pairs, load_templates, save_conditions,
    save_templates, template_from_qa_pair, TemplateLibrary,
};

#[derive(Parser)]
#[command(
    name = "kgconv",
    version,
    about = "Generate and evaluate conversational QA datasets grounded in a knowledge graph"
)]
struct Cli {
    /// Worker threads for parallel stages (default: available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct WalkArgs {
    /// Master random seed.
    #[arg(long)]
    seed: u64,
    /// Sequences sampled per eligible root.
    #[arg(long, default_value_t = 3)]
    per_root: usize,
    /// Minimum conversation length in turns.
    #[arg(long, default_value_t = 5)]
    min_len: usize,
    /// Maximum conversation length in turns.
    #[arg(long, default_value_t = 19)]
    max_len: usize,
}

#[derive(Args, Clone)]
struct SplitArgs {
    /// Themes whose conversations go to test only (comma separated).
    #[arg(long, value_delimiter = ',')]
    unseen_themes: Vec<String>,
    /// Properties marking a conversation as test-only (comma separated).
    #[arg(long, value_delimiter = ',')]
    unseen_properties: Vec<String>,
    /// Train,dev,test ratios over seen themes, e.g. 0.66,0.10,0.24.
    #[arg(long)]
    split: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Load a raw graph file, apply property exclusions, add reversed triples.
    Ingest {
        #[arg(long)]
        kg: PathBuf,
        /// JSON file with excluded_ids / excluded_prefixes.
        #[arg(long)]
        exclusions: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample triple sequences from an ingested graph.
    Sample {
        #[arg(long)]
        kg: PathBuf,
        /// Theme-to-class JSON map.
        #[arg(long)]
        themes: PathBuf,
        /// Restrict walks to template-covered triples.
        #[arg(long)]
        templates: Option<PathBuf>,
        #[command(flatten)]
        walk: WalkArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verbalize sampled sequences into out-of-context questions.
    Verbalize {
        #[arg(long)]
        kg: PathBuf,
        #[arg(long)]
        templates: PathBuf,
        #[arg(long)]
        sequences: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Add rule-based in-context variants.
    Contextualize {
        #[arg(long)]
        kg: PathBuf,
        #[arg(long)]
        templates: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Masked-LM determiner service URL (offline lexicon otherwise).
        #[arg(long)]
        determiner_url: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Add synthetic in-context variants via the rewriting service or the
    /// offline fallback.
    Rewrite {
        #[arg(long)]
        kg: PathBuf,
        #[arg(long)]
        templates: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Question rewriting service URL (offline fallback otherwise).
        #[arg(long)]
        rewriter_url: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full pipeline from a raw graph to a dataset file.
    Emit {
        #[arg(long)]
        kg: PathBuf,
        #[arg(long)]
        exclusions: Option<PathBuf>,
        #[arg(long)]
        themes: PathBuf,
        #[arg(long)]
        templates: PathBuf,
        #[command(flatten)]
        walk: WalkArgs,
        #[arg(long)]
        determiner_url: Option<String>,
        #[arg(long)]
        rewriter_url: Option<String>,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Report per-theme and total statistics for a dataset file.
    Stats {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        split: SplitArgs,
        /// Seed used for the split partition (match the emit seed).
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Score a predictions file against a dataset with multi-reference GLEU.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        /// Line-delimited {"turn_id","hypothesis"} records.
        #[arg(long)]
        predictions: PathBuf,
        /// Context representation the predictions were generated with.
        #[arg(long, default_value = "empty")]
        format: String,
        #[arg(long, value_delimiter = ',')]
        unseen_themes: Vec<String>,
    },
    /// Extract templates from (triple, question) pairs.
    ExtractTemplates {
        #[arg(long)]
        kg: PathBuf,
        /// Line-delimited {"triple","question"} records.
        #[arg(long)]
        qa: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge applicability conditions and drop low-support ones.
    ClusterConditions {
        #[arg(long)]
        kg: PathBuf,
        #[arg(long)]
        conditions: PathBuf,
        #[arg(long, default_value_t = 5)]
        min_support: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

impl Command {
    fn stage(&self) -> &'static str {
        match self {
            Command::Ingest { .. } => "ingest",
            Command::Sample { .. } => "sample",
            Command::Verbalize { .. } => "verbalize",
            Command::Contextualize { .. } => "contextualize",
            Command::Rewrite { .. } => "rewrite",
            Command::Emit { .. } => "emit",
            Command::Stats { .. } => "stats",
            Command::Evaluate { .. } => "evaluate",
            Command::ExtractTemplates { .. } => "extract-templates",
            Command::ClusterConditions { .. } => "cluster-conditions",
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let stage = cli.command.stage();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            log::warn!("could not configure {jobs} worker threads: {e}");
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let payload = serde_json::json!({ "error": format!("{e:#}"), "stage": stage });
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

/// Write a stage artifact atomically: the content lands in a temporary file
/// next to the target and is renamed into place.
fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    write(tmp.as_file_mut())?;
    tmp.flush()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn load_ingested_graph(path: &Path) -> Result<KnowledgeGraph> {
    Ok(load_graph(open(path)?)?)
}

fn load_library(path: &Path) -> Result<TemplateLibrary> {
    Ok(load_templates(open(path)?)?)
}

fn parse_split_ratios(spec: &str) -> Result<SplitRatios> {
    let parts: Vec<f64> = spec
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .with_context(|| format!("parsing split ratio {p:?}"))
        })
        .collect::<Result<_>>()?;
    anyhow::ensure!(
        parts.len() == 3,
        "--split needs three comma-separated ratios"
    );
    let ratios = SplitRatios {
        train: parts[0],
        dev: parts[1],
        test: parts[2],
    };
    ratios.validate()?;
    Ok(ratios)
}

fn pipeline_config(themes_path: &Path, walk: &WalkArgs) -> Result<PipelineConfig> {
    let themes = load_themes(open(themes_path)?)?;
    let mut config = PipelineConfig::new(walk.seed, themes);
    config.walk.per_root = walk.per_root;
    config.walk.min_len = walk.min_len;
    config.walk.max_len = walk.max_len;
    Ok(config)
}

/// Sibling path with a split name spliced in before the extension:
/// `data.jsonl` becomes `data.train.jsonl`.
fn split_path(out: &Path, split: &str) -> PathBuf {
    match out.extension().and_then(|e| e.to_str()) {
        Some(ext) => out.with_extension(format!("{split}.{ext}")),
        None => out.with_extension(split),
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest {
            kg,
            exclusions,
            out,
        } => {
            let raw = load_graph(open(&kg)?)?;
            let rules = match exclusions {
                Some(path) => ExclusionRules::from_reader(open(&path)?)?,
                None => ExclusionRules::default(),
            };
            let graph = raw.filter_properties(&rules).augment_reverse();
            write_atomic(&out, |w| Ok(save_graph(&graph, w)?))
        }
        Command::Sample {
            kg,
            themes,
            templates,
            walk,
            out,
        } => {
            let graph = load_ingested_graph(&kg)?;
            let library = templates.map(|p| load_library(&p)).transpose()?;
            let config = pipeline_config(&themes, &walk)?;
            let sequences = sample_stage(&graph, library.as_ref(), &config)?;
            write_atomic(&out, |w| Ok(save_sequences(&sequences, w)?))
        }
        Command::Verbalize {
            kg,
            templates,
            sequences,
            out,
        } => {
            let graph = load_ingested_graph(&kg)?;
            let library = load_library(&templates)?;
            let sequences = load_sequences(open(&sequences)?)?;
            let config = stageless_config();
            let conversations = verbalize_stage(&sequences, &graph, &library, &config)?;
            write_atomic(&out, |w| {
                Ok(serialize_conversations(&conversations, &graph, w)?)
            })
        }
        Command::Contextualize {
            kg,
            templates,
            data,
            determiner_url,
            out,
        } => {
            let graph = load_ingested_graph(&kg)?;
            let library = load_library(&templates)?;
            let mut conversations = parse_conversations(open(&data)?)?;
            let mut config = stageless_config();
            if let Some(url) = determiner_url {
                config.determiner = DeterminerOracle::masked_lm(url);
            }
            contextualize_stage(&mut conversations, &graph, &library, &config)?;
            write_atomic(&out, |w| {
                Ok(serialize_conversations(&conversations, &graph, w)?)
            })
        }
        Command::Rewrite {
            kg,
            templates,
            data,
            rewriter_url,
            out,
        } => {
            let graph = load_ingested_graph(&kg)?;
            let library = load_library(&templates)?;
            let mut conversations = parse_conversations(open(&data)?)?;
            let mut config = stageless_config();
            if let Some(url) = rewriter_url {
                config.rewriter = RewriterClient::with_endpoint(url);
            }
            rewrite_stage(&mut conversations, &graph, &library, &config)?;
            write_atomic(&out, |w| {
                Ok(serialize_conversations(&conversations, &graph, w)?)
            })
        }
        Command::Emit {
            kg,
            exclusions,
            themes,
            templates,
            walk,
            determiner_url,
            rewriter_url,
            split,
            out,
        } => {
            let raw = load_graph(open(&kg)?)?;
            let rules = match exclusions {
                Some(path) => ExclusionRules::from_reader(open(&path)?)?,
                None => ExclusionRules::default(),
            };
            let graph = raw.filter_properties(&rules).augment_reverse();
            let library = load_library(&templates)?;
            let mut config = pipeline_config(&themes, &walk)?;
            if let Some(url) = determiner_url {
                config.determiner = DeterminerOracle::masked_lm(url);
            }
            if let Some(url) = rewriter_url {
                config.rewriter = RewriterClient::with_endpoint(url);
            }
            if let Some(spec) = &split.split {
                config.split = parse_split_ratios(spec)?;
            }
            let conversations = emit(&graph, &library, &config)?;
            write_atomic(&out, |w| {
                Ok(serialize_conversations(&conversations, &graph, w)?)
            })?;

            let wants_splits = split.split.is_some()
                || !split.unseen_themes.is_empty()
                || !split.unseen_properties.is_empty();
            if wants_splits {
                let unseen_themes: BTreeSet<String> = split.unseen_themes.into_iter().collect();
                let unseen_properties: BTreeSet<String> =
                    split.unseen_properties.into_iter().collect();
                let splits = split_dataset(
                    conversations,
                    &unseen_themes,
                    &unseen_properties,
                    &config.split,
                    walk.seed,
                )?;
                for (name, part) in [
                    ("train", &splits.train),
                    ("dev", &splits.dev),
                    ("test", &splits.test),
                ] {
                    write_atomic(&split_path(&out, name), |w| {
                        Ok(serialize_conversations(part, &graph, w)?)
                    })?;
                }
            }
            Ok(())
        }
        Command::Stats { data, split, seed } => {
            let conversations = parse_conversations(open(&data)?)?;
            let unseen_themes: BTreeSet<String> = split.unseen_themes.into_iter().collect();
            let unseen_properties: BTreeSet<String> = split.unseen_properties.into_iter().collect();
            let ratios = match &split.split {
                Some(spec) => parse_split_ratios(spec)?,
                None => SplitRatios::default(),
            };
            let splits = split_dataset(
                conversations,
                &unseen_themes,
                &unseen_properties,
                &ratios,
                seed,
            )?;
            let report = stats(&splits);
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Evaluate {
            data,
            predictions,
            format,
            unseen_themes,
        } => {
            let conversations = parse_conversations(open(&data)?)?;
            let predictions = parse_predictions(open(&predictions)?)?;
            let format: ContextFormat = format.parse()?;
            let unseen: BTreeSet<String> = unseen_themes.into_iter().collect();
            let report = evaluate(&predictions, &conversations, format, &unseen, &GleuScorer)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::ExtractTemplates { kg, qa, out } => {
            let graph = load_ingested_graph(&kg)?;
            let pairs = load_qa_pairs(open(&qa)?)?;
            let templates: Vec<_> = pairs
                .iter()
                .enumerate()
                .map(|(i, (triple, question))| {
                    template_from_qa_pair(i as u64 + 1, triple, question, &graph)
                })
                .collect::<kgconv::Result<_>>()?;
            write_atomic(&out, |w| Ok(save_templates(&templates, w)?))
        }
        Command::ClusterConditions {
            kg,
            conditions,
            min_support,
            out,
        } => {
            let graph = load_ingested_graph(&kg)?;
            let input = load_conditions(open(&conditions)?)?;
            let merged = cluster_conditions(&input, graph.triples(), &graph, min_support);
            write_atomic(&out, |w| Ok(save_conditions(&merged, w)?))
        }
    }
}

/// Configuration for stages that re-derive their randomness from the
/// per-conversation seeds carried in the artifacts.
fn stageless_config() -> PipelineConfig {
    PipelineConfig::new(0, Default::default())
}

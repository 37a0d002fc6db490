//! Pipeline CLI: every stage as a subcommand, plus `pipeline` to chain
//! them end to end.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use emsaudit::config::PipelineConfig;
use emsaudit::jsonl::{
    apply_patches, load_record_docs, read_jsonl, write_atomic, write_jsonl, GoldDoc, RecordDoc,
    TagPatch,
};
use emsaudit::pipeline::run_pipeline;
use emsaudit::report::{evaluate_documents, render_audit_text, render_eval_text};
use emsaudit::rules::{load_rules, parse_rules};
use emsaudit::synth::{generate_corpus, SynthConfig};
use emsaudit::{checkpoint, DEFAULT_GAZETTEER, DEFAULT_RULES, DEFAULT_SEED};
use emsaudit_core::audit::{aggregate, evaluate_case, AggregationLevel, AuditResult};
use emsaudit_core::entities::spans_from_tags;
use emsaudit_core::gazetteer::{weak_label, Gazetteer, DEFAULT_MAX_EDIT_DISTANCE};
use emsaudit_core::preprocess::{normalize_with, tokenize};
use emsaudit_core::records::split_indices;
use emsaudit_core::tagger::{train, Hyperparams, TaggedSentence};

#[derive(Parser)]
#[command(
    name = "emsaudit",
    version,
    about = "Weakly-supervised NER and protocol audit over ambulance case records"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with gold annotations.
    Gen {
        #[arg(long, default_value = "records.jsonl")]
        out: PathBuf,
        #[arg(long, default_value = "gold.jsonl")]
        gold: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n_documents: usize,
        #[arg(long, default_value_t = 0.05)]
        misspelling_rate: f64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        gazetteer: Option<PathBuf>,
    },
    /// Normalize and tokenize report text, adding a `tokens` array.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Symbols to keep in addition to '%' (e.g. "&").
        #[arg(long, default_value = "")]
        extra_kept_symbols: String,
    },
    /// Weakly label tokens against the gazetteer, adding a `tags` array.
    Label {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        gazetteer: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MAX_EDIT_DISTANCE)]
        max_edit_distance: usize,
        /// JSONL of {incident_id, index, tag} corrections.
        #[arg(long)]
        overrides: Option<PathBuf>,
    },
    /// Filter non-encounters and split into train/dev/test files.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Comma-separated train,dev,test fractions.
        #[arg(long, default_value = "0.95,0.025,0.025")]
        fractions: String,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Train the tagger on labeled train/dev files.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        dev: PathBuf,
        #[arg(long, default_value = "model.ckpt")]
        model_out: PathBuf,
        #[arg(long, default_value = "training_log.csv")]
        log_out: PathBuf,
        #[arg(long, default_value_t = 100)]
        embed_dim: usize,
        #[arg(long, default_value_t = 64)]
        hidden_dim: usize,
        #[arg(long, default_value_t = 512)]
        batch_size: usize,
        #[arg(long, default_value_t = 0.001)]
        learning_rate: f64,
        #[arg(long, default_value_t = 5)]
        patience: usize,
        #[arg(long, default_value_t = 300)]
        max_epochs: usize,
        #[arg(long, default_value_t = 1)]
        min_token_count: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Tag documents with a trained model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Score predictions against gold annotations.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, value_enum, default_value_t = EvalMode::Both)]
        mode: EvalMode,
        #[arg(long)]
        out_json: Option<PathBuf>,
    },
    /// Audit labeled/predicted documents against the protocol rules.
    Audit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Level::All)]
        level: Level,
        #[arg(long)]
        out_json: Option<PathBuf>,
    },
    /// Run gen, preprocess, label, split, train, predict, eval, audit.
    Pipeline {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_documents: Option<usize>,
        #[arg(long)]
        misspelling_rate: Option<f64>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EvalMode {
    Strict,
    Type,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Level {
    Case,
    Provider,
    System,
    All,
}

fn load_gazetteer(path: Option<&Path>, max_dist: usize) -> Result<Gazetteer> {
    let text = match path {
        Some(path) => std::fs::read_to_string(path)
            .with_context(|| format!("cannot read gazetteer {}", path.display()))?,
        None => DEFAULT_GAZETTEER.to_string(),
    };
    Gazetteer::parse(&text, max_dist).map_err(|e| anyhow::anyhow!("gazetteer: {e}"))
}

fn load_docs_reporting_errors(path: &Path) -> Result<Vec<RecordDoc>> {
    let outcome = load_record_docs(path)?;
    for err in &outcome.errors {
        log::warn!("{}: {err}", path.display());
    }
    Ok(outcome.docs)
}

fn ensure_tokens(doc: &mut RecordDoc) -> Vec<String> {
    match &doc.tokens {
        Some(tokens) => tokens.clone(),
        None => {
            let tokens = tokenize(&normalize_with(&doc.record.report_text, ""));
            doc.tokens = Some(tokens.clone());
            tokens
        }
    }
}

fn to_sentences(docs: &[RecordDoc], path: &Path) -> Result<Vec<TaggedSentence>> {
    docs.iter()
        .map(|d| match (&d.tokens, &d.tags) {
            (Some(tokens), Some(tags)) => Ok(TaggedSentence {
                tokens: tokens.clone(),
                tags: tags.clone(),
            }),
            _ => bail!(
                "{}: document {} has no tokens/tags; run preprocess and label first",
                path.display(),
                d.record.incident_id
            ),
        })
        .collect()
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Gen {
            out,
            gold,
            n_documents,
            misspelling_rate,
            seed,
            gazetteer,
        } => {
            let gaz = load_gazetteer(gazetteer.as_deref(), DEFAULT_MAX_EDIT_DISTANCE)?;
            let cfg = SynthConfig {
                n_documents,
                misspelling_rate,
                seed,
                ..SynthConfig::default()
            };
            let corpus = generate_corpus(&cfg, &gaz)?;
            let records: Vec<RecordDoc> = corpus
                .iter()
                .map(|c| RecordDoc::bare(c.record.clone()))
                .collect();
            write_jsonl(&out, &records)?;
            let gold_docs: Vec<GoldDoc> = corpus
                .iter()
                .map(|c| GoldDoc {
                    incident_id: c.record.incident_id.clone(),
                    tokens: c.tokens.clone(),
                    tags: c.gold_tags(),
                    spans: c.gold.clone(),
                })
                .collect();
            write_jsonl(&gold, &gold_docs)?;
            println!("wrote {} records to {}", corpus.len(), out.display());
        }
        Command::Preprocess {
            input,
            output,
            extra_kept_symbols,
        } => {
            let mut docs = load_docs_reporting_errors(&input)?;
            for doc in &mut docs {
                doc.tokens = Some(tokenize(&normalize_with(
                    &doc.record.report_text,
                    &extra_kept_symbols,
                )));
            }
            write_jsonl(&output, &docs)?;
            println!("tokenized {} documents into {}", docs.len(), output.display());
        }
        Command::Label {
            input,
            output,
            gazetteer,
            max_edit_distance,
            overrides,
        } => {
            let gaz = load_gazetteer(gazetteer.as_deref(), max_edit_distance)?;
            let mut docs = load_docs_reporting_errors(&input)?;
            for doc in &mut docs {
                let tokens = ensure_tokens(doc);
                doc.tags = Some(weak_label(&tokens, &gaz));
            }
            if let Some(path) = overrides {
                let (patches, errors) = read_jsonl::<TagPatch>(&path)?;
                for err in errors {
                    log::warn!("{}: {err}", path.display());
                }
                for problem in apply_patches(&mut docs, &patches) {
                    log::warn!("override: {problem}");
                }
            }
            write_jsonl(&output, &docs)?;
            println!("labeled {} documents into {}", docs.len(), output.display());
        }
        Command::Split {
            input,
            out_dir,
            fractions,
            seed,
        } => {
            let parts: Vec<f64> = fractions
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .context("fractions must be three comma-separated numbers")?;
            let [f0, f1, f2] = parts.as_slice() else {
                bail!("fractions must be three comma-separated numbers");
            };
            let docs = load_docs_reporting_errors(&input)?;
            let total = docs.len();
            let kept: Vec<RecordDoc> = docs
                .into_iter()
                .filter(|d| emsaudit_core::records::is_auditable(&d.record))
                .collect();
            log::info!("{} of {total} documents kept after filtering", kept.len());
            let [train_idx, dev_idx, test_idx] =
                split_indices(kept.len(), [*f0, *f1, *f2], seed)
                    .map_err(|e| anyhow::anyhow!("split: {e}"))?;
            std::fs::create_dir_all(&out_dir)?;
            let pick =
                |idx: &[usize]| -> Vec<RecordDoc> { idx.iter().map(|&i| kept[i].clone()).collect() };
            write_jsonl(&out_dir.join("train.jsonl"), &pick(&train_idx))?;
            write_jsonl(&out_dir.join("dev.jsonl"), &pick(&dev_idx))?;
            write_jsonl(&out_dir.join("test.jsonl"), &pick(&test_idx))?;
            println!(
                "split {} documents into {}/{}/{} under {}",
                kept.len(),
                train_idx.len(),
                dev_idx.len(),
                test_idx.len(),
                out_dir.display()
            );
        }
        Command::Train {
            train: train_path,
            dev,
            model_out,
            log_out,
            embed_dim,
            hidden_dim,
            batch_size,
            learning_rate,
            patience,
            max_epochs,
            min_token_count,
            seed,
        } => {
            let train_docs = load_docs_reporting_errors(&train_path)?;
            let dev_docs = load_docs_reporting_errors(&dev)?;
            let train_set = to_sentences(&train_docs, &train_path)?;
            let dev_set = to_sentences(&dev_docs, &dev)?;
            let hp = Hyperparams {
                embed_dim,
                hidden_dim,
                batch_size,
                learning_rate,
                patience,
                max_epochs,
                min_token_count,
                seed,
            };
            let mut csv = String::from("epoch,train_loss,dev_loss,elapsed_ms\n");
            let mut last = std::time::Instant::now();
            let trained = train(&train_set, &dev_set, &hp, &mut |stats| {
                let ms = last.elapsed().as_millis();
                last = std::time::Instant::now();
                log::info!(
                    "epoch {:>3}  train {:.4}  dev {:.4}  {ms} ms",
                    stats.epoch,
                    stats.train_loss,
                    stats.dev_loss
                );
                csv.push_str(&format!(
                    "{},{},{},{ms}\n",
                    stats.epoch, stats.train_loss, stats.dev_loss
                ));
            })
            .map_err(|e| anyhow::anyhow!("train: {e}"))?;
            write_atomic(&log_out, csv.as_bytes())?;
            checkpoint::save(&trained.model, &model_out)?;
            println!(
                "trained {} epochs (best {}), model written to {}",
                trained.log.epochs.len(),
                trained.log.best_epoch,
                model_out.display()
            );
        }
        Command::Predict {
            model,
            input,
            output,
        } => {
            let model = checkpoint::load(&model)?;
            let mut docs = load_docs_reporting_errors(&input)?;
            for doc in &mut docs {
                let tokens = ensure_tokens(doc);
                doc.tags = Some(model.predict(&tokens));
            }
            write_jsonl(&output, &docs)?;
            println!("tagged {} documents into {}", docs.len(), output.display());
        }
        Command::Eval {
            gold,
            pred,
            mode,
            out_json,
        } => {
            let (gold_docs, gold_errors) = read_jsonl::<GoldDoc>(&gold)?;
            for err in gold_errors {
                log::warn!("{}: {err}", gold.display());
            }
            let pred_docs = load_docs_reporting_errors(&pred)?;
            let gold_by_id: HashMap<&str, &GoldDoc> = gold_docs
                .iter()
                .map(|g| (g.incident_id.as_str(), g))
                .collect();
            let mut pairs = Vec::new();
            for doc in &pred_docs {
                let Some(g) = gold_by_id.get(doc.record.incident_id.as_str()) else {
                    bail!("no gold annotations for {}", doc.record.incident_id);
                };
                let Some(tags) = &doc.tags else {
                    bail!("document {} has no tags", doc.record.incident_id);
                };
                pairs.push((g.tags.clone(), tags.clone()));
            }
            let report = evaluate_documents(&pairs).map_err(|e| anyhow::anyhow!("eval: {e}"))?;
            let mode = match mode {
                EvalMode::Strict => Some(emsaudit_core::eval::MatchMode::Strict),
                EvalMode::Type => Some(emsaudit_core::eval::MatchMode::Type),
                EvalMode::Both => None,
            };
            print!("{}", render_eval_text(&report, mode));
            if let Some(path) = out_json {
                write_atomic(&path, serde_json::to_string_pretty(&report)?.as_bytes())?;
            }
        }
        Command::Audit {
            input,
            rules,
            level,
            out_json,
        } => {
            let rules = match rules {
                Some(path) => load_rules(&path)?,
                None => parse_rules(DEFAULT_RULES)?,
            };
            let docs = load_docs_reporting_errors(&input)?;
            let mut results: Vec<AuditResult> = Vec::new();
            for doc in &docs {
                let spans = spans_from_tags(doc.tags.as_deref().unwrap_or(&[]));
                results.extend(
                    evaluate_case(&doc.record, &spans, &rules)
                        .map_err(|e| anyhow::anyhow!("audit: {e}"))?,
                );
            }
            let levels: Vec<AggregationLevel> = match level {
                Level::Case => vec![AggregationLevel::Case],
                Level::Provider => vec![AggregationLevel::Provider],
                Level::System => vec![AggregationLevel::System],
                Level::All => vec![
                    AggregationLevel::Case,
                    AggregationLevel::Provider,
                    AggregationLevel::System,
                ],
            };
            let reports: Vec<_> = levels.iter().map(|l| aggregate(&results, *l)).collect();
            for report in &reports {
                print!("{}", render_audit_text(report));
                println!();
            }
            if let Some(path) = out_json {
                write_atomic(&path, serde_json::to_string_pretty(&reports)?.as_bytes())?;
            }
        }
        Command::Pipeline {
            config,
            out_dir,
            seed,
            n_documents,
            misspelling_rate,
        } => {
            let mut cfg = PipelineConfig::load(config.as_deref())?;
            if let Some(seed) = seed {
                cfg.set_seed(seed);
            }
            if let Some(out_dir) = out_dir {
                cfg.out_dir = out_dir;
            }
            if let Some(n) = n_documents {
                cfg.n_documents = n;
            }
            if let Some(rate) = misspelling_rate {
                cfg.misspelling_rate = rate;
            }
            let summary = run_pipeline(&cfg)?;
            println!(
                "pipeline complete: {} test documents, {} epochs, {:.1}s training",
                summary.test_documents, summary.epochs_run, summary.train_seconds
            );
            print!("{}", render_eval_text(&summary.eval, None));
            println!("reports under {}", summary.out_dir.display());
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(
        env_logger::Env::default().filter_or("EMSAUDIT_LOG", "info"),
    )
    .format_timestamp(None)
    .init();
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

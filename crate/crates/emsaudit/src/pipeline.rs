//! End-to-end pipeline: gen, preprocess, label, split, train, predict,
//! eval, audit. Every stage writes its artifact into the output directory
//! so intermediate files can be inspected or replayed with the standalone
//! subcommands.

use std::collections::HashMap;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use emsaudit_core::audit::{aggregate, evaluate_case, AggregationLevel, AuditResult};
use emsaudit_core::entities::spans_from_tags;
use emsaudit_core::gazetteer::{weak_label, Gazetteer};
use emsaudit_core::preprocess::{normalize, tokenize};
use emsaudit_core::records::split_indices;
use emsaudit_core::tagger::{train, EpochStats, TaggedSentence};
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::jsonl::{write_atomic, write_jsonl, GoldDoc, RecordDoc};
use crate::report::{evaluate_documents, render_audit_text, render_eval_text, EvalReport};
use crate::rules::parse_rules;
use crate::synth::{generate_corpus, SynthConfig};
use crate::{checkpoint, DEFAULT_GAZETTEER, DEFAULT_RULES};

/// What the pipeline produced, for callers that assert on it.
pub struct PipelineSummary {
    pub eval: EvalReport,
    pub train_seconds: f64,
    pub epochs_run: usize,
    pub test_documents: usize,
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct AuditBundle {
    case: emsaudit_core::audit::AuditReport,
    provider: emsaudit_core::audit::AuditReport,
    system: emsaudit_core::audit::AuditReport,
}

pub fn load_gazetteer_or_default(cfg: &PipelineConfig) -> Result<Gazetteer> {
    let text = match &cfg.gazetteer_path {
        Some(path) => std::fs::read_to_string(path)
            .with_context(|| format!("cannot read gazetteer {}", path.display()))?,
        None => DEFAULT_GAZETTEER.to_string(),
    };
    Gazetteer::parse(&text, emsaudit_core::gazetteer::DEFAULT_MAX_EDIT_DISTANCE)
        .map_err(|e| anyhow::anyhow!("gazetteer: {e}"))
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineSummary> {
    cfg.validate_paths()
        .map_err(|e| anyhow::anyhow!("config: {e}"))?;
    std::fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("cannot create {}", cfg.out_dir.display()))?;
    let out = |name: &str| cfg.out_dir.join(name);

    let gazetteer = load_gazetteer_or_default(cfg)?;
    let rules_text = match &cfg.rules_path {
        Some(path) => std::fs::read_to_string(path)
            .with_context(|| format!("cannot read rules {}", path.display()))?,
        None => DEFAULT_RULES.to_string(),
    };
    let rules = parse_rules(&rules_text)?;

    // gen
    let synth_cfg = SynthConfig {
        n_documents: cfg.n_documents,
        misspelling_rate: cfg.misspelling_rate,
        seed: cfg.seed,
        ..SynthConfig::default()
    };
    let corpus = generate_corpus(&synth_cfg, &gazetteer)?;
    log::info!("generated {} documents", corpus.len());
    let records: Vec<RecordDoc> = corpus
        .iter()
        .map(|c| RecordDoc::bare(c.record.clone()))
        .collect();
    write_jsonl(&out("records.jsonl"), &records)?;
    let gold_docs: Vec<GoldDoc> = corpus
        .iter()
        .map(|c| GoldDoc {
            incident_id: c.record.incident_id.clone(),
            tokens: c.tokens.clone(),
            tags: c.gold_tags(),
            spans: c.gold.clone(),
        })
        .collect();
    write_jsonl(&out("gold.jsonl"), &gold_docs)?;

    // preprocess + label
    let mut labeled: Vec<RecordDoc> = records;
    for doc in &mut labeled {
        let tokens = tokenize(&normalize(&doc.record.report_text));
        let tags = weak_label(&tokens, &gazetteer);
        doc.tokens = Some(tokens);
        doc.tags = Some(tags);
    }
    write_jsonl(&out("labeled.jsonl"), &labeled)?;

    // split (after dropping non-encounters and text-less records)
    let kept: Vec<RecordDoc> = labeled
        .into_iter()
        .filter(|d| emsaudit_core::records::is_auditable(&d.record))
        .collect();
    log::info!("{} documents after encounter filtering", kept.len());
    let [train_idx, dev_idx, test_idx] = split_indices(kept.len(), cfg.fractions, cfg.seed)
        .map_err(|e| anyhow::anyhow!("split: {e}"))?;
    let pick = |idx: &[usize]| -> Vec<RecordDoc> {
        idx.iter().map(|&i| kept[i].clone()).collect()
    };
    let (train_docs, dev_docs, test_docs) = (pick(&train_idx), pick(&dev_idx), pick(&test_idx));
    write_jsonl(&out("train.jsonl"), &train_docs)?;
    write_jsonl(&out("dev.jsonl"), &dev_docs)?;
    write_jsonl(&out("test.jsonl"), &test_docs)?;

    // train
    let to_sentences = |docs: &[RecordDoc]| -> Vec<TaggedSentence> {
        docs.iter()
            .map(|d| TaggedSentence {
                tokens: d.tokens.clone().unwrap_or_default(),
                tags: d.tags.clone().unwrap_or_default(),
            })
            .collect()
    };
    let train_set = to_sentences(&train_docs);
    let dev_set = to_sentences(&dev_docs);

    let started = Instant::now();
    let mut log_rows: Vec<(EpochStats, u128)> = Vec::new();
    let mut last_epoch_end = Instant::now();
    let trained = train(&train_set, &dev_set, &cfg.hyperparams, &mut |stats| {
        let elapsed = last_epoch_end.elapsed().as_millis();
        last_epoch_end = Instant::now();
        log::info!(
            "epoch {:>3}  train {:.4}  dev {:.4}  {} ms",
            stats.epoch,
            stats.train_loss,
            stats.dev_loss,
            elapsed
        );
        log_rows.push((*stats, elapsed));
    })
    .map_err(|e| anyhow::anyhow!("train: {e}"))?;
    let train_seconds = started.elapsed().as_secs_f64();

    let mut csv = String::from("epoch,train_loss,dev_loss,elapsed_ms\n");
    for (stats, ms) in &log_rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            stats.epoch, stats.train_loss, stats.dev_loss, ms
        ));
    }
    write_atomic(&out("training_log.csv"), csv.as_bytes())?;
    checkpoint::save(&trained.model, &out("model.ckpt"))?;
    log::info!(
        "trained for {} epochs (best {}), {:.1}s",
        trained.log.epochs.len(),
        trained.log.best_epoch,
        train_seconds
    );

    // predict on the held-out test split
    let mut pred_docs = test_docs;
    for doc in &mut pred_docs {
        let tokens = doc.tokens.clone().unwrap_or_default();
        doc.tags = Some(trained.model.predict(&tokens));
    }
    write_jsonl(&out("pred.jsonl"), &pred_docs)?;

    // eval against construction gold
    let gold_by_id: HashMap<&str, &GoldDoc> = gold_docs
        .iter()
        .map(|g| (g.incident_id.as_str(), g))
        .collect();
    let mut pairs = Vec::with_capacity(pred_docs.len());
    for doc in &pred_docs {
        let Some(gold) = gold_by_id.get(doc.record.incident_id.as_str()) else {
            bail!("no gold annotations for {}", doc.record.incident_id);
        };
        pairs.push((
            gold.tags.clone(),
            doc.tags.clone().unwrap_or_default(),
        ));
    }
    let eval = evaluate_documents(&pairs).map_err(|e| anyhow::anyhow!("eval: {e}"))?;
    write_atomic(
        &out("eval_report.json"),
        serde_json::to_string_pretty(&eval)?.as_bytes(),
    )?;
    write_atomic(&out("eval_report.txt"), render_eval_text(&eval, None).as_bytes())?;
    log::info!(
        "test F1: type {:.3}, strict {:.3}",
        eval.type_matching.scores.f1,
        eval.strict.scores.f1
    );

    // audit the test split on predicted entities
    let mut results: Vec<AuditResult> = Vec::new();
    for doc in &pred_docs {
        let spans = spans_from_tags(doc.tags.as_deref().unwrap_or(&[]));
        results.extend(
            evaluate_case(&doc.record, &spans, &rules)
                .map_err(|e| anyhow::anyhow!("audit: {e}"))?,
        );
    }
    let bundle = AuditBundle {
        case: aggregate(&results, AggregationLevel::Case),
        provider: aggregate(&results, AggregationLevel::Provider),
        system: aggregate(&results, AggregationLevel::System),
    };
    write_atomic(
        &out("audit_report.json"),
        serde_json::to_string_pretty(&bundle)?.as_bytes(),
    )?;
    let mut text = render_audit_text(&bundle.system);
    text.push('\n');
    text.push_str(&render_audit_text(&bundle.provider));
    write_atomic(&out("audit_report.txt"), text.as_bytes())?;

    Ok(PipelineSummary {
        eval,
        train_seconds,
        epochs_run: trained.log.epochs.len(),
        test_documents: pred_docs.len(),
        out_dir: cfg.out_dir.clone(),
    })
}

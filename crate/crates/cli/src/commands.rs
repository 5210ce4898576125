use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use regimen::corpus::{corpus_stats, load_corpus, save_corpus, Document, SchemaMode, SchemaProfile, SAME_FRAME};
use regimen::frames::{build_frames, decode_frames, with_frame_relations};
use regimen::model::{Architecture, Prediction, TrainedModel};
use regimen::numerics::{GradCheckOptions, GradCheckReport};
use regimen::par::{self, Exec};
use regimen::synthgen::{corpus_split, generate_corpus_with, write_corpus, GenConfig, GeneratedCorpus};
use regimen::traineval::{
    cost_report, end_to_end, evaluate, frame_accuracy, model_grad_check, predict_corpus, prepare_documents, train,
    EvalReport, GradCheckSetup, MatchMode, TrainConfig,
};
use serde::{Deserialize, Serialize};

use crate::args::*;
use crate::report::{write_atomic, write_json, Failure, RunRecorder};

/// Optional tables of the `--config` TOML file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub generate: Option<GenConfig>,
    pub train: Option<TrainConfig>,
    pub grad_check: Option<GradCheckConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckConfig {
    pub setup: GradCheckSetup,
    pub eps: f64,
    pub samples_per_param: usize,
    pub abs_floor: f64,
    pub tolerance: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        let o = GradCheckOptions::default();
        GradCheckConfig {
            setup: GradCheckSetup::default(),
            eps: o.eps,
            samples_per_param: o.samples_per_param,
            abs_floor: o.abs_floor,
            tolerance: 1e-4,
        }
    }
}

pub struct Ctx {
    pub workdir: PathBuf,
}

impl Ctx {
    pub fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.workdir.join(p)
        }
    }

    fn existing(&self, p: &Path) -> Result<PathBuf> {
        let full = self.path(p);
        if !full.exists() {
            return Err(Failure::missing(&full).into());
        }
        Ok(full)
    }

    fn out_dir(&self, p: &Path) -> Result<PathBuf> {
        let full = self.path(p);
        fs::create_dir_all(&full).with_context(|| format!("creating {}", full.display()))?;
        Ok(full)
    }

    fn config(&self, p: Option<&Path>) -> Result<ConfigFile> {
        let Some(p) = p else {
            return Ok(ConfigFile::default());
        };
        let full = self.existing(p)?;
        let src = fs::read_to_string(&full).with_context(|| format!("reading {}", full.display()))?;
        let cfg = toml::from_str(&src).with_context(|| format!("parsing {}", full.display()))?;
        Ok(cfg)
    }
}

fn schema_of(args: &SchemaArgs) -> Result<(SchemaProfile, SchemaMode)> {
    let profile = SchemaProfile::resolve(&args.schema)?;
    let mode = if args.lax { SchemaMode::Lax } else { SchemaMode::Strict };
    Ok((profile, mode))
}

fn mode_of(lax: bool) -> SchemaMode {
    if lax {
        SchemaMode::Lax
    } else {
        SchemaMode::Strict
    }
}

fn load(ctx: &Ctx, dir: &Path, schema: &SchemaProfile, mode: SchemaMode) -> Result<(PathBuf, Vec<Document>)> {
    let full = ctx.existing(dir)?;
    let docs = load_corpus(&full, schema, mode)?;
    Ok((full, docs))
}

fn load_model(ctx: &Ctx, p: &Path) -> Result<(PathBuf, TrainedModel)> {
    let mut full = ctx.existing(p)?;
    if full.is_dir() {
        full = full.join("model.ckpt");
    }
    let model = TrainedModel::load(&full).with_context(|| format!("loading {}", full.display()))?;
    Ok((full, model))
}

fn check_threads(threads: Option<usize>) -> Result<()> {
    if threads == Some(0) {
        return Err(Failure::config("--threads must be at least 1").into());
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("config serializes")
}

pub fn generate(ctx: &Ctx, a: &GenerateArgs) -> Result<()> {
    let rec = RunRecorder::start("generate");
    check_threads(a.threads)?;
    let mut cfg = ctx.config(a.config.as_deref())?.generate.unwrap_or_default();
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.docs {
        cfg.doc_count = n;
    }
    if let Some(s) = &a.schema {
        cfg.schema = s.clone();
    }
    if let Some(r) = a.multi_frame_rate {
        cfg.multi_frame_rate = r;
    }
    let corpus = par::with_threads(a.threads, || generate_corpus_with(&cfg, Exec::default()))?;
    let out = ctx.out_dir(&a.out)?;
    let manifest = write_corpus(&out, &corpus, &cfg)?;
    if let Some(fraction) = a.split {
        let (tr, te) = corpus_split(&corpus.docs, fraction, cfg.seed)?;
        for (name, docs) in [("train", tr), ("test", te)] {
            let dir = ctx.out_dir(&out.join(name))?;
            let part = GeneratedCorpus { docs, frames: Vec::new() };
            write_corpus(&dir, &part, &cfg)?;
        }
    }
    say!(
        "generated {} documents ({} entities, {} relations, {:.1}% multi-frame drugs) in {}",
        manifest.stats.doc_count,
        manifest.stats.entity_total,
        manifest.stats.relation_total,
        100.0 * manifest.stats.multi_frame_drug_fraction,
        out.display()
    );
    rec.finish(&out, Some(cfg.seed), to_json(&cfg), vec![])
}

fn train_config(ctx: &Ctx, f: &TrainFlags) -> Result<TrainConfig> {
    let mut cfg = ctx.config(f.config.as_deref())?.train.unwrap_or_default();
    if let Some(s) = f.seed {
        cfg.seed = s;
    }
    if let Some(e) = f.epochs {
        cfg.epochs = e;
    }
    if let Some(b) = f.batch_size {
        cfg.batch_size = b;
    }
    if let Some(lr) = f.lr {
        cfg.peak_lr = lr;
    }
    if let Some(w) = f.window {
        cfg.window_chars = w;
        if f.stride.is_none() {
            cfg.stride_chars = (w / 2).max(1);
        }
    }
    if let Some(s) = f.stride {
        cfg.stride_chars = s;
    }
    if f.frame_augmentation {
        cfg.frame_augmentation = true;
    }
    cfg.check()?;
    Ok(cfg)
}

pub fn train_cmd(ctx: &Ctx, a: &TrainArgs) -> Result<()> {
    let rec = RunRecorder::start("train");
    let (schema, mode) = schema_of(&a.schema)?;
    let mut cfg = train_config(ctx, &a.train)?;
    match a.architecture {
        Some(ArchArg::Pairwise) => cfg.architecture = Architecture::Pairwise,
        Some(ArchArg::Baseline) => cfg.architecture = Architecture::Baseline,
        None => {}
    }
    let (data, docs) = load(ctx, &a.data, &schema, mode)?;
    let outcome = train(&docs, &schema, &cfg)?;
    let out = ctx.out_dir(&a.out)?;
    outcome
        .model
        .save(&out.join("model.ckpt"), Some(to_json(&cfg)))
        .context("writing checkpoint")?;
    write_atomic(&out.join("train_log.jsonl"), outcome.log.to_jsonl().as_bytes())?;
    let last = outcome.log.epochs.last().map(|e| e.mean_loss).unwrap_or(f64::NAN);
    say!(
        "trained {:?} on {} segments: {} epochs, {} steps, final loss {last:.4}, {} encoder passes, {:.1}s",
        cfg.architecture,
        outcome.log.segments,
        cfg.epochs,
        outcome.log.steps.len(),
        outcome.log.total_forwards,
        outcome.log.wall_seconds
    );
    rec.finish(&out, Some(cfg.seed), to_json(&cfg), vec![data])
}

fn predicted_docs(preds: &[Prediction], docs: &[Document]) -> Vec<Document> {
    preds.iter().zip(docs).map(|(p, d)| p.apply(d)).collect()
}

pub fn predict(ctx: &Ctx, a: &PredictArgs) -> Result<()> {
    let rec = RunRecorder::start("predict");
    check_threads(a.threads)?;
    let (model_path, model) = load_model(ctx, &a.model)?;
    let (data, docs) = load(ctx, &a.data, &model.schema, mode_of(a.lax))?;
    let preds = par::with_threads(a.threads, || predict_corpus(&model, &docs, Exec::default()))?;
    let out = ctx.out_dir(&a.out)?;
    save_corpus(&out, &predicted_docs(&preds, &docs))?;
    let frames: Vec<_> = preds.iter().map(|p| &p.frames).collect();
    write_json(&out.join("frames.json"), &frames)?;
    let n: usize = preds.iter().map(|p| p.relations.len()).sum();
    say!("predicted {n} relations over {} documents into {}", docs.len(), out.display());
    rec.finish(&out, None, serde_json::json!({ "lax": a.lax }), vec![model_path, data])
}

#[derive(Serialize)]
struct EvalOutput {
    strict: Option<EvalReport>,
    lenient: Option<EvalReport>,
    frame_accuracy: f64,
}

/// Frames of predicted documents, read back from their relations.
fn frames_of(docs: &[Document], schema: &SchemaProfile) -> Vec<Prediction> {
    docs.iter()
        .map(|d| Prediction {
            doc_id: d.doc_id.clone(),
            relations: Vec::new(),
            frames: decode_frames(&d.doc_id, &d.entities, &d.relations, schema),
        })
        .collect()
}

pub fn evaluate_cmd(ctx: &Ctx, a: &EvaluateArgs) -> Result<()> {
    let rec = RunRecorder::start("evaluate");
    check_threads(a.threads)?;
    let (mut schema, mode) = schema_of(&a.schema)?;
    let mut inputs = Vec::new();
    let (predicted, gold, frame_preds) = if let Some(m) = &a.model {
        let (model_path, model) = load_model(ctx, m)?;
        schema = model.schema.clone();
        let (gold_path, gold) = load(ctx, &a.gold, &schema, mode)?;
        let preds = par::with_threads(a.threads, || predict_corpus(&model, &gold, Exec::default()))?;
        inputs.extend([model_path, gold_path]);
        (predicted_docs(&preds, &gold), gold, preds)
    } else {
        let pred_dir = a.pred.as_deref().expect("clap requires --pred without --model");
        let (gold_path, gold) = load(ctx, &a.gold, &schema, mode)?;
        let (pred_path, predicted) = load(ctx, pred_dir, &schema, mode)?;
        inputs.extend([gold_path, pred_path]);
        let frames = frames_of(&predicted, &schema);
        (predicted, gold, frames)
    };
    let scored_gold = prepare_documents(&gold, &schema, false);
    let run = |m| par::with_threads(a.threads, || evaluate(&scored_gold, &predicted, m));
    let strict = matches!(a.mode, ModeArg::Strict | ModeArg::Both).then(|| run(MatchMode::Strict));
    let lenient = matches!(a.mode, ModeArg::Lenient | ModeArg::Both).then(|| run(MatchMode::Lenient));
    let frames = frame_accuracy(&gold, &frame_preds, &schema);
    for r in strict.iter().chain(&lenient) {
        say!("{}", r.table());
    }
    say!("frame accuracy: {frames:.4}");
    if let Some(o) = &a.out {
        let out = ctx.out_dir(o)?;
        let report = EvalOutput {
            strict,
            lenient,
            frame_accuracy: frames,
        };
        write_json(&out.join("report.json"), &report)?;
        rec.finish(&out, None, serde_json::json!({ "mode": format!("{:?}", a.mode).to_lowercase() }), inputs)?;
    }
    Ok(())
}

pub fn end_to_end_cmd(ctx: &Ctx, a: &EndToEndArgs) -> Result<()> {
    let rec = RunRecorder::start("end-to-end");
    check_threads(a.threads)?;
    let (model_path, model) = load_model(ctx, &a.model)?;
    let mode = mode_of(a.lax);
    let (ent_path, provided) = load(ctx, &a.entities, &model.schema, mode)?;
    let (gold_path, gold) = load(ctx, &a.gold, &model.schema, mode)?;
    let report = par::with_threads(a.threads, || end_to_end(&model, &provided, &gold, Exec::default()))?;
    say!("{}", report.strict.table());
    say!("{}", report.lenient.table());
    say!("frame accuracy: {:.4}", report.frame_accuracy);
    if let Some(o) = &a.out {
        let out = ctx.out_dir(o)?;
        save_corpus(&out, &predicted_docs(&report.predictions, &provided))?;
        write_json(&out.join("report.json"), &report)?;
        rec.finish(&out, None, serde_json::json!({ "lax": a.lax }), vec![model_path, ent_path, gold_path])?;
    }
    Ok(())
}

pub fn convert_frames(ctx: &Ctx, a: &ConvertArgs) -> Result<()> {
    let rec = RunRecorder::start("convert-frames");
    let (schema, mode) = schema_of(&a.schema)?;
    let (data, docs) = load(ctx, &a.data, &schema, mode)?;
    let out = ctx.out_dir(&a.out)?;
    match a.format {
        FrameFormat::Json => {
            let frames: Vec<_> = docs.iter().map(|d| build_frames(d, &schema)).collect();
            write_json(&out.join("frames.json"), &frames)?;
        }
        FrameFormat::Augmented => {
            let aug: Vec<_> = docs
                .iter()
                .map(|d| with_frame_relations(d, &build_frames(d, &schema), &schema))
                .collect();
            save_corpus(&out, &aug)?;
        }
        FrameFormat::Plain => {
            let plain: Vec<_> = docs.iter().map(|d| d.without_relation_type(SAME_FRAME)).collect();
            save_corpus(&out, &plain)?;
        }
    }
    say!("converted {} documents into {}", docs.len(), out.display());
    let fmt = format!("{:?}", a.format).to_lowercase();
    rec.finish(&out, None, serde_json::json!({ "format": fmt, "schema": schema.name }), vec![data])
}

pub fn cost(ctx: &Ctx, a: &CostArgs) -> Result<()> {
    let rec = RunRecorder::start("cost-report");
    let mut cfg = train_config(ctx, &a.train)?;
    if a.train.epochs.is_none() && ctx.config(a.train.config.as_deref())?.train.is_none() {
        // Cost per epoch is what is compared; one epoch suffices by default.
        cfg.epochs = 1;
    }
    let (schema, mode) = schema_of(&a.schema)?;
    let mut inputs = Vec::new();
    let docs = match &a.data {
        Some(d) => {
            let (p, docs) = load(ctx, d, &schema, mode)?;
            inputs.push(p);
            docs
        }
        None => {
            let gen = GenConfig {
                seed: cfg.seed,
                schema: schema.name.clone(),
                ..GenConfig::default()
            };
            generate_corpus_with(&gen, Exec::default())?.docs
        }
    };
    let report = cost_report(&docs, &schema, &cfg)?;
    say!("{}", report.table().trim_end());
    if let Some(o) = &a.out {
        let out = ctx.out_dir(o)?;
        write_json(&out.join("cost.json"), &report)?;
        rec.finish(&out, Some(cfg.seed), to_json(&cfg), inputs)?;
    }
    Ok(())
}

fn grad_check_config(ctx: &Ctx, name: &str) -> Result<GradCheckConfig> {
    match name {
        "small" => Ok(GradCheckConfig::default()),
        path => ctx
            .config(Some(Path::new(path)))?
            .grad_check
            .ok_or_else(|| Failure::config(format!("{path} has no [grad_check] table")).into()),
    }
}

#[derive(Serialize)]
struct GradCheckOutput<'a> {
    config: &'a GradCheckConfig,
    report: &'a GradCheckReport,
    passed: bool,
}

pub fn grad_check(ctx: &Ctx, a: &GradCheckArgs) -> Result<()> {
    let rec = RunRecorder::start("grad-check");
    check_threads(a.threads)?;
    let mut cfg = grad_check_config(ctx, &a.config)?;
    if let Some(s) = a.seed {
        cfg.setup.seed = s;
    }
    if let Some(n) = a.samples {
        cfg.samples_per_param = n;
    }
    if let Some(t) = a.tolerance {
        cfg.tolerance = t;
    }
    let opts = GradCheckOptions {
        eps: cfg.eps,
        samples_per_param: cfg.samples_per_param,
        seed: cfg.setup.seed,
        abs_floor: cfg.abs_floor,
        exec: Exec::default(),
    };
    let report = par::with_threads(a.threads, || model_grad_check(&cfg.setup, &opts))?;
    let passed = report.max_rel_error < cfg.tolerance;
    say!("max relative error: {:.3e}", report.max_rel_error);
    if let Some(w) = &report.worst {
        say!(
            "worst coordinate: {}[{}] analytic {:.6e} numeric {:.6e}",
            w.param, w.index, w.analytic, w.numeric
        );
    }
    say!(
        "checked {} coordinates in {} parameter tensors; tolerance {:.1e}: {}",
        report.coordinates_checked,
        report.parameters_checked,
        cfg.tolerance,
        if passed { "PASS" } else { "FAIL" }
    );
    if let Some(o) = &a.out {
        let out = ctx.out_dir(o)?;
        let output = GradCheckOutput {
            config: &cfg,
            report: &report,
            passed,
        };
        write_json(&out.join("gradcheck.json"), &output)?;
        rec.finish(&out, Some(cfg.setup.seed), to_json(&cfg), vec![])?;
    }
    if !passed {
        return Err(Failure::new(
            8,
            "grad-check",
            format!("max relative error {:.3e} >= {:.1e}", report.max_rel_error, cfg.tolerance),
        )
        .into());
    }
    Ok(())
}

pub fn stats(ctx: &Ctx, a: &StatsArgs) -> Result<()> {
    let rec = RunRecorder::start("stats");
    let (schema, mode) = schema_of(&a.schema)?;
    let (data, docs) = load(ctx, &a.data, &schema, mode)?;
    let s = corpus_stats(&docs, &schema);
    say!("{}", serde_json::to_string_pretty(&s)?);
    if let Some(o) = &a.out {
        let out = ctx.out_dir(o)?;
        write_json(&out.join("stats.json"), &s)?;
        rec.finish(&out, None, serde_json::json!({ "schema": schema.name }), vec![data])?;
    }
    Ok(())
}

//! `ragctl`: extract, classify, train, calc, answer, score and report.

mod config;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rag_core::attributes::{
    classify_icl, default_examples, train_linear, Attribute, Domain, Dynamism, FewShotExample, LinearClassifier,
    TrainOptions,
};
use rag_core::calculator::evaluate;
use rag_core::evalkit::{judge, load_dataset, report, score, Judgement, ReportFormat, ScoreReport};
use rag_core::ingest::{process_page, WebPage};
use rag_core::kg::{EndpointRegistry, HttpKgApi, KgApi, KgMode, StubKgApi, DEFAULT_KG_TIMEOUT};
use rag_core::orchestrator::{digest, AttributeSource, Pipeline, VerdictRecord};
use rag_core::provider::{Embedder, Generator, HashedBagOfWords, RemoteProvider, ScriptedGenerator, DEFAULT_TIMEOUT, OFFLINE_EMBED_DIM};
use serde::Serialize;
use serde_json::{json, Value};

use config::{Config, Overrides};

const EXIT_USAGE: u8 = 64;
const EXIT_INPUT: u8 = 2;

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

#[derive(Parser)]
#[command(name = "ragctl", version, about = "Retrieval-augmented question answering pipeline")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Use only offline providers: hashed embeddings, a completion script and a KG stub table.
    #[arg(long, global = true)]
    offline: bool,
    /// Completion script for the offline generator.
    #[arg(long, global = true)]
    script: Option<PathBuf>,
    /// Response table for the in-process KG stub.
    #[arg(long, global = true)]
    kg_stub: Option<PathBuf>,
    /// Mock-API endpoint registry (JSON).
    #[arg(long, global = true)]
    kg_registry: Option<PathBuf>,
    #[arg(long, global = true, env = "MODEL_ENDPOINT", hide_env_values = true)]
    model_endpoint: Option<String>,
    #[arg(long, global = true, env = "KG_ENDPOINT", hide_env_values = true)]
    kg_endpoint: Option<String>,
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Chunks and Markdown tables of one HTML page, as JSON.
    Extract {
        #[arg(long)]
        page: PathBuf,
        /// Defaults to the file stem.
        #[arg(long)]
        page_name: Option<String>,
    },
    /// Predict an attribute for one query or every record of a dataset.
    Classify {
        #[arg(long, value_enum)]
        attribute: AttrArg,
        #[arg(long, value_enum, default_value = "icl")]
        method: MethodArg,
        /// Linear model file, for `--method linear`.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, conflicts_with = "dataset", required_unless_present = "dataset")]
        query: Option<String>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a linear attribute classifier on a dataset's gold labels.
    Train {
        #[arg(long, value_enum)]
        attribute: AttrArg,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate an arithmetic expression in the calculator sandbox.
    Calc {
        /// Expression source; may also be given positionally.
        #[arg(long = "expr", value_name = "SOURCE", allow_hyphen_values = true, conflicts_with = "expression", required_unless_present = "expression")]
        expr: Option<String>,
        #[arg(allow_hyphen_values = true)]
        expression: Option<String>,
    },
    /// Answer every question of a dataset, writing verdict JSONL.
    Answer {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "icl")]
        attributes: AttrSourceArg,
        #[arg(long)]
        domain_model: Option<PathBuf>,
        #[arg(long)]
        dynamism_model: Option<PathBuf>,
        #[arg(long, value_parser = parse_kg_mode)]
        kg_mode: Option<KgMode>,
        /// Run the calculator for every static question.
        #[arg(long)]
        calc_always: bool,
    },
    /// Judge predictions against a dataset and write a report.
    Score {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_parser = parse_format, default_value = "md")]
        format: ReportFormat,
        /// Also save the score report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Render a saved JSON score report.
    Report {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, value_parser = parse_format, default_value = "md")]
        format: ReportFormat,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AttrArg {
    Domain,
    Dynamism,
}

impl From<AttrArg> for Attribute {
    fn from(a: AttrArg) -> Self {
        match a {
            AttrArg::Domain => Attribute::Domain,
            AttrArg::Dynamism => Attribute::Dynamism,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Icl,
    Linear,
}

#[derive(Clone, Copy, ValueEnum)]
enum AttrSourceArg {
    Icl,
    Linear,
    Gold,
}

fn parse_kg_mode(s: &str) -> Result<KgMode, String> {
    s.parse()
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse()
}

struct Providers {
    embedder: Box<dyn Embedder>,
    generator: Box<dyn Generator>,
    kg: Box<dyn KgApi>,
    kg_desc: String,
    registry: EndpointRegistry,
}

#[derive(Serialize)]
struct Header<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    offline: bool,
    config_digest: String,
    embedder: String,
    generator: String,
    kg: &'a str,
}

struct Ctx {
    global: Global,
    config: Config,
}

impl Ctx {
    fn providers(&self) -> Result<Providers> {
        let g = &self.global;
        let registry = match &g.kg_registry {
            Some(p) => EndpointRegistry::from_file(p)?,
            None => EndpointRegistry::default(),
        };
        let stub = |path: &Option<PathBuf>| -> Result<(Box<dyn KgApi>, String)> {
            Ok(match path {
                Some(p) => {
                    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    (Box::new(StubKgApi::from_json(&text)?), format!("stub:{}", digest(&text)))
                }
                None => (Box::new(StubKgApi::default()), "stub:empty".to_string()),
            })
        };
        if g.offline {
            let generator = match &g.script {
                Some(p) => ScriptedGenerator::from_file(p).with_context(|| format!("loading {}", p.display()))?,
                None => {
                    log::warn!("offline run without --script: every generation call will fail");
                    ScriptedGenerator::default()
                }
            };
            let (kg, kg_desc) = stub(&g.kg_stub)?;
            return Ok(Providers {
                embedder: Box::new(HashedBagOfWords::new(OFFLINE_EMBED_DIM)),
                generator: Box::new(generator),
                kg,
                kg_desc,
                registry,
            });
        }
        let endpoint = self
            .config
            .model_endpoint
            .clone()
            .ok_or_else(|| usage("no model endpoint: set MODEL_ENDPOINT, --model-endpoint, or pass --offline"))?;
        let remote = RemoteProvider::new(endpoint, DEFAULT_TIMEOUT);
        let (kg, kg_desc) = match &self.config.kg_endpoint {
            Some(url) => (
                Box::new(HttpKgApi::new(url.clone(), registry.clone(), DEFAULT_KG_TIMEOUT)) as Box<dyn KgApi>,
                format!("http:{url}"),
            ),
            None => stub(&g.kg_stub)?,
        };
        Ok(Providers { embedder: Box::new(remote.clone()), generator: Box::new(remote), kg, kg_desc, registry })
    }

    fn header(&self, command: &str, p: Option<&Providers>) -> Value {
        let cfg = serde_json::to_string(&self.config.for_digest(self.global.offline)).unwrap_or_default();
        let h = Header {
            tool: "ragctl",
            version: env!("CARGO_PKG_VERSION"),
            command,
            offline: self.global.offline,
            config_digest: digest(&cfg),
            embedder: p.map(|p| p.embedder.fingerprint()).unwrap_or_default(),
            generator: p.map(|p| p.generator.fingerprint()).unwrap_or_default(),
            kg: p.map(|p| p.kg_desc.as_str()).unwrap_or(""),
        };
        json!({ "header": h })
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn write_jsonl<T: Serialize>(out: &mut dyn Write, header: &Value, items: &[T]) -> Result<()> {
    writeln!(out, "{}", serde_json::to_string(header)?)?;
    for item in items {
        writeln!(out, "{}", serde_json::to_string(item)?)?;
    }
    out.flush()?;
    Ok(())
}

fn is_header(v: &Value) -> bool {
    v.as_object().is_some_and(|o| o.contains_key("header"))
}

fn load_predictions(path: &Path) -> Result<Vec<VerdictRecord>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?;
        if is_header(&v) {
            continue;
        }
        out.push(serde_json::from_value(v).with_context(|| format!("{}:{}: bad verdict", path.display(), i + 1))?);
    }
    Ok(out)
}

fn gold_label(record: &rag_core::evalkit::DatasetRecord, attribute: Attribute) -> Option<&'static str> {
    match attribute {
        Attribute::Domain => Domain::from_label(&record.domain.trim().to_lowercase()).map(Domain::as_str),
        Attribute::Dynamism => Dynamism::from_gold(&record.static_or_dynamic).map(Dynamism::as_str),
    }
}

fn load_model(path: Option<&PathBuf>, what: &str) -> Result<Arc<LinearClassifier>> {
    let path = path.ok_or_else(|| usage(format!("{what} is required for linear attributes")))?;
    Ok(Arc::new(LinearClassifier::load(path).with_context(|| format!("loading {}", path.display()))?))
}

fn run(cli: Cli) -> Result<()> {
    let overrides = Overrides {
        model_endpoint: cli.global.model_endpoint.clone(),
        kg_endpoint: cli.global.kg_endpoint.clone(),
        worker_count: cli.global.workers,
        kg_mode: match &cli.command {
            Command::Answer { kg_mode, .. } => *kg_mode,
            _ => None,
        },
        calc_always: matches!(&cli.command, Command::Answer { calc_always: true, .. }),
    };
    let config = Config::load(cli.global.config.as_deref(), &overrides)?;
    let ctx = Ctx { global: cli.global, config };

    match cli.command {
        Command::Extract { page, page_name } => {
            let bytes = std::fs::read(&page).with_context(|| format!("reading {}", page.display()))?;
            let name = page_name.unwrap_or_else(|| {
                page.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
            });
            let web = WebPage::from_bytes(&name, &page.to_string_lossy(), &bytes);
            let content = process_page(&web, &ctx.config.pipeline_settings().chunk);
            let mut doc = ctx.header("extract", None);
            doc["chunks"] = serde_json::to_value(&content.chunks)?;
            doc["tables"] = serde_json::to_value(&content.tables)?;
            let mut out = output(None)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&doc)?)?;
            out.flush()?;
        }
        Command::Classify { attribute, method, model, query, dataset, out } => {
            let attribute = Attribute::from(attribute);
            let p = ctx.providers()?;
            let linear = match method {
                MethodArg::Linear => Some(load_model(model.as_ref(), "--model")?),
                MethodArg::Icl => None,
            };
            let examples = default_examples(attribute);
            let items: Vec<(String, String)> = match (query, dataset) {
                (Some(q), _) => vec![(String::new(), q)],
                (None, Some(d)) => load_dataset(&d)?.into_iter().map(|r| (r.interaction_id, r.query)).collect(),
                (None, None) => return Err(usage("either --query or --dataset is required")),
            };
            let mut rows = Vec::new();
            for (id, q) in items {
                let label = match &linear {
                    Some(m) => m.predict(&q, p.embedder.as_ref()).map_err(|e| e.to_string()),
                    None => classify_icl(&q, attribute, &examples, p.generator.as_ref(), ctx.config.n_icl_samples)
                        .map(str::to_string)
                        .map_err(|e| e.to_string()),
                };
                let (label, error) = match label {
                    Ok(l) => (l, None),
                    Err(e) => (attribute.fallback().to_string(), Some(e)),
                };
                rows.push(json!({ "interaction_id": id, "query": q, "label": label, "error": error }));
            }
            write_jsonl(output(out.as_deref())?.as_mut(), &ctx.header("classify", Some(&p)), &rows)?;
        }
        Command::Train { attribute, dataset, out, epochs, seed } => {
            let attribute = Attribute::from(attribute);
            let p = ctx.providers()?;
            let records = load_dataset(&dataset)?;
            let examples: Vec<FewShotExample> = records
                .iter()
                .filter_map(|r| {
                    gold_label(r, attribute).map(|l| FewShotExample { query: r.query.clone(), label: l.into() })
                })
                .collect();
            let mut opts = TrainOptions::default();
            if let Some(e) = epochs {
                opts.epochs = e;
            }
            if let Some(s) = seed {
                opts.seed = s;
            }
            let model = train_linear(&examples, p.embedder.as_ref(), opts)?;
            std::fs::write(&out, model.to_json()).with_context(|| format!("writing {}", out.display()))?;
            eprintln!("trained on {} examples, wrote {}", examples.len(), out.display());
        }
        Command::Calc { expr, expression } => {
            let source = expr.or(expression).unwrap_or_default();
            let value = evaluate(rag_core::calculator::strip_fences(&source))?;
            println!("{}", value.render());
        }
        Command::Answer { dataset, out, attributes, domain_model, dynamism_model, .. } => {
            let records = load_dataset(&dataset)?;
            let p = ctx.providers()?;
            let source = match attributes {
                AttrSourceArg::Icl => AttributeSource::Icl,
                AttrSourceArg::Gold => AttributeSource::Gold,
                AttrSourceArg::Linear => AttributeSource::Linear {
                    domain: load_model(domain_model.as_ref(), "--domain-model")?,
                    dynamism: load_model(dynamism_model.as_ref(), "--dynamism-model")?,
                },
            };
            let pipeline = Pipeline {
                embedder: p.embedder.as_ref(),
                generator: p.generator.as_ref(),
                kg: p.kg.as_ref(),
                registry: p.registry.clone(),
                attributes: source,
                settings: ctx.config.pipeline_settings(),
            };
            let verdicts = pipeline.answer_all(&records, ctx.config.worker_count);
            write_jsonl(output(out.as_deref())?.as_mut(), &ctx.header("answer", Some(&p)), &verdicts)?;
        }
        Command::Score { dataset, predictions, report: report_path, format, json: json_path } => {
            let records = load_dataset(&dataset)?;
            let preds = load_predictions(&predictions)?;
            let by_id: std::collections::HashMap<&str, &VerdictRecord> =
                preds.iter().map(|v| (v.interaction_id.as_str(), v)).collect();
            let judgements: Vec<Judgement> = records
                .iter()
                .map(|r| match by_id.get(r.interaction_id.as_str()) {
                    Some(v) => judge(&v.verdict, r),
                    None => {
                        log::warn!("no prediction for {}, counted as missing", r.interaction_id);
                        Judgement::Missing
                    }
                })
                .collect();
            let sr = score(&judgements, &records)?;
            if let Some(path) = json_path {
                let mut doc = ctx.header("score", None);
                doc["report"] = serde_json::to_value(&sr)?;
                std::fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            write_report(&ctx, "score", &sr, format, report_path.as_deref())?;
        }
        Command::Report { scores, format } => {
            let text = std::fs::read_to_string(&scores).with_context(|| format!("reading {}", scores.display()))?;
            let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", scores.display()))?;
            let body = v.get("report").cloned().unwrap_or(v);
            let sr: ScoreReport = serde_json::from_value(body).context("not a score report")?;
            write_report(&ctx, "report", &sr, format, None)?;
        }
    }
    Ok(())
}

/// Markdown reports start with the reproducibility header as an HTML
/// comment; CSV reports carry only the data.
fn write_report(ctx: &Ctx, command: &str, sr: &ScoreReport, format: ReportFormat, path: Option<&Path>) -> Result<()> {
    let mut out = output(path)?;
    if format == ReportFormat::Markdown {
        writeln!(out, "<!-- {} -->\n", serde_json::to_string(&ctx.header(command, None))?)?;
    }
    write!(out, "{}", report(sr, format))?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::from(EXIT_INPUT)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_valid() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn unknown_mode_rejected() {
        assert!(parse_kg_mode("bogus").is_err());
        assert!(Cli::try_parse_from(["ragctl", "score", "--predictions", "p"]).is_err());
    }

    #[test]
    fn header_detection() {
        assert!(is_header(&json!({"header": {}})));
        assert!(!is_header(&json!({"interaction_id": "x"})));
    }

    #[test]
    fn usage_errors_are_tagged() {
        assert!(usage("y").downcast_ref::<UsageError>().is_some());
        assert!(anyhow::anyhow!("x").downcast_ref::<UsageError>().is_none());
    }
}

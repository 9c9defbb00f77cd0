//! Run configuration. Precedence: flags > environment > config file > defaults.

use std::path::Path;

use anyhow::{bail, Context, Result};
use rag_core::ingest::ChunkConfig;
use rag_core::kg::KgMode;
use rag_core::orchestrator::PipelineSettings;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub chunk_char_budget: usize,
    pub sentence_char_cap: usize,
    pub top_k_chunks: usize,
    pub table_budget_reasoning: usize,
    pub table_budget_calc: usize,
    pub kg_char_cap: usize,
    pub n_icl_samples: usize,
    pub calc_samples: usize,
    pub worker_count: usize,
    pub model_endpoint: Option<String>,
    pub kg_endpoint: Option<String>,
    pub kg_mode: KgMode,
    pub calc_always: bool,
    pub rank_tables: bool,
}

impl Default for Config {
    fn default() -> Self {
        let p = PipelineSettings::default();
        Self {
            chunk_char_budget: p.chunk.chunk_char_budget,
            sentence_char_cap: p.chunk.sentence_char_cap,
            top_k_chunks: p.top_k_chunks,
            table_budget_reasoning: p.table_budget_reasoning,
            table_budget_calc: p.table_budget_calc,
            kg_char_cap: p.kg_char_cap,
            n_icl_samples: p.n_icl_samples,
            calc_samples: p.calc_samples,
            worker_count: 4,
            model_endpoint: None,
            kg_endpoint: None,
            kg_mode: p.kg_mode,
            calc_always: p.calc_always,
            rank_tables: p.rank_tables,
        }
    }
}

/// Values given on the command line or through the environment.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub model_endpoint: Option<String>,
    pub kg_endpoint: Option<String>,
    pub worker_count: Option<usize>,
    pub kg_mode: Option<KgMode>,
    pub calc_always: bool,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(file: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => Self::default(),
        };
        let nonempty = |s: &Option<String>| s.clone().filter(|s| !s.trim().is_empty());
        if let Some(e) = nonempty(&overrides.model_endpoint) {
            cfg.model_endpoint = Some(e);
        }
        if let Some(e) = nonempty(&overrides.kg_endpoint) {
            cfg.kg_endpoint = Some(e);
        }
        if let Some(w) = overrides.worker_count {
            cfg.worker_count = w;
        }
        if let Some(m) = overrides.kg_mode {
            cfg.kg_mode = m;
        }
        cfg.calc_always |= overrides.calc_always;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("chunk_char_budget", self.chunk_char_budget),
            ("sentence_char_cap", self.sentence_char_cap),
            ("top_k_chunks", self.top_k_chunks),
            ("table_budget_reasoning", self.table_budget_reasoning),
            ("table_budget_calc", self.table_budget_calc),
            ("kg_char_cap", self.kg_char_cap),
            ("calc_samples", self.calc_samples),
            ("worker_count", self.worker_count),
        ];
        for (name, v) in positive {
            if v == 0 {
                bail!("{name} must be positive");
            }
        }
        if self.n_icl_samples.is_multiple_of(2) {
            bail!("n_icl_samples must be odd, got {}", self.n_icl_samples);
        }
        Ok(())
    }

    pub fn pipeline_settings(&self) -> PipelineSettings {
        PipelineSettings {
            chunk: ChunkConfig {
                sentence_char_cap: self.sentence_char_cap,
                chunk_char_budget: self.chunk_char_budget,
                ..ChunkConfig::default()
            },
            top_k_chunks: self.top_k_chunks,
            table_budget_reasoning: self.table_budget_reasoning,
            table_budget_calc: self.table_budget_calc,
            kg_char_cap: self.kg_char_cap,
            n_icl_samples: self.n_icl_samples,
            calc_samples: self.calc_samples,
            kg_mode: self.kg_mode,
            calc_always: self.calc_always,
            rank_tables: self.rank_tables,
            record_timing: false,
        }
    }

    /// Copy used for the reproducibility digest; offline runs never contact
    /// endpoints, so they are left out.
    pub fn for_digest(&self, offline: bool) -> Self {
        let mut c = self.clone();
        if offline {
            c.model_endpoint = None;
            c.kg_endpoint = None;
        }
        c
    }
}

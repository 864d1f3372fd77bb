use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const COLLECTION_STAGE: &str = "Initial collection";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    /// Raw input counts.
    Collection,
    /// Sequential filter over the previous collection/filter stage.
    Filter,
    /// A subset drawn from the last filter stage; selections do not chain.
    Selection,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRow {
    pub stage: String,
    pub kind: StageKind,
    pub counts: BTreeMap<String, usize>,
    pub total: usize,
}

impl StageRow {
    pub fn from_sources<'a, I>(stage: impl Into<String>, kind: StageKind, sources: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts = BTreeMap::new();
        let mut total = 0;
        for s in sources {
            *counts.entry(s.to_owned()).or_insert(0) += 1;
            total += 1;
        }
        Self {
            stage: stage.into(),
            kind,
            counts,
            total,
        }
    }

    pub fn from_counts(stage: impl Into<String>, kind: StageKind, counts: &[(&str, usize)]) -> Self {
        let counts: BTreeMap<String, usize> =
            counts.iter().map(|&(s, n)| (s.to_owned(), n)).collect();
        Self {
            stage: stage.into(),
            kind,
            total: counts.values().sum(),
            counts,
        }
    }

    pub fn count(&self, source: &str) -> usize {
        self.counts.get(source).copied().unwrap_or(0)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("stage {stage:?}: total {total} != per-source sum {sum}")]
    TotalMismatch { stage: String, total: usize, sum: usize },
    #[error("stage {stage:?}: total {total} exceeds preceding stage total {prev}")]
    Increasing { stage: String, total: usize, prev: usize },
    #[error("stage {stage:?}: source {source_name:?} count {count} exceeds preceding {prev}")]
    SourceIncreasing {
        stage: String,
        source_name: String,
        count: usize,
        prev: usize,
    },
    #[error("stage {stage:?} recorded {recorded} but {actual} records were produced")]
    RecordCount { stage: String, recorded: usize, actual: usize },
}

/// Stage-by-source count matrix with a provenance header.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CurationReport {
    pub header: BTreeMap<String, serde_json::Value>,
    pub stages: Vec<StageRow>,
}

impl CurationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_header(&mut self, key: &str, value: impl Serialize) {
        self.header.insert(
            key.to_owned(),
            serde_json::to_value(value).expect("serializable header value"),
        );
    }

    /// Adds a row, replacing an existing row of the same stage name.
    pub fn push(&mut self, row: StageRow) {
        match self.stages.iter_mut().find(|r| r.stage == row.stage) {
            Some(slot) => *slot = row,
            None => self.stages.push(row),
        }
    }

    /// Adds a row after checking it against the actual record count.
    pub fn record(&mut self, row: StageRow, actual: usize) -> Result<(), ReportError> {
        if row.total != actual {
            return Err(ReportError::RecordCount {
                stage: row.stage,
                recorded: row.total,
                actual,
            });
        }
        self.push(row);
        Ok(())
    }

    pub fn stage(&self, name: &str) -> Option<&StageRow> {
        self.stages.iter().find(|r| r.stage == name)
    }

    /// All sources in column order.
    pub fn sources(&self) -> Vec<String> {
        let mut all: Vec<String> = self
            .stages
            .iter()
            .flat_map(|r| r.counts.keys().cloned())
            .collect();
        all.sort();
        all.dedup();
        all
    }

    /// Checks that each total is its per-source sum, that the
    /// collection/filter chain never grows (per source and overall), and that
    /// each selection fits inside the filter stage before it.
    pub fn validate(&self) -> Result<(), ReportError> {
        let mut prev: Option<&StageRow> = None;
        for row in &self.stages {
            let sum: usize = row.counts.values().sum();
            if sum != row.total {
                return Err(ReportError::TotalMismatch {
                    stage: row.stage.clone(),
                    total: row.total,
                    sum,
                });
            }
            if let Some(p) = prev {
                if row.kind != StageKind::Collection {
                    if row.total > p.total {
                        return Err(ReportError::Increasing {
                            stage: row.stage.clone(),
                            total: row.total,
                            prev: p.total,
                        });
                    }
                    if row.kind == StageKind::Filter {
                        for (src, &n) in &row.counts {
                            let before = p.count(src);
                            if n > before {
                                return Err(ReportError::SourceIncreasing {
                                    stage: row.stage.clone(),
                                    source_name: src.clone(),
                                    count: n,
                                    prev: before,
                                });
                            }
                        }
                    }
                }
            }
            if row.kind != StageKind::Selection {
                prev = Some(row);
            }
        }
        Ok(())
    }

    /// Fixed-width text rendering of the stage/source matrix.
    pub fn render_table(&self) -> String {
        let sources = self.sources();
        let name_w = self
            .stages
            .iter()
            .map(|r| r.stage.len())
            .chain(std::iter::once(5))
            .max()
            .unwrap_or(5);
        let mut out = format!("{:<name_w$}", "Stage");
        for s in &sources {
            out.push_str(&format!(" | {s:>10}"));
        }
        out.push_str(&format!(" | {:>10}\n", "Total"));
        for r in &self.stages {
            out.push_str(&format!("{:<name_w$}", r.stage));
            for s in &sources {
                out.push_str(&format!(" | {:>10}", r.count(s)));
            }
            out.push_str(&format!(" | {:>10}\n", r.total));
        }
        out
    }
}

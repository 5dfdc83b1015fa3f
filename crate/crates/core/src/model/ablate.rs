//! Train and evaluate one model per view subset.

use std::fmt::Write as _;

use super::{train, ModelConfig};
use crate::eval::MetricsReport;
use crate::graphs::{GraphBundle, ViewKind};
use crate::nn::io::fmt_real;
use crate::{par, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub views: Vec<ViewKind>,
    pub best_epoch: usize,
    pub metrics: MetricsReport,
}

/// Independent runs sharing `config` (seed included) except for the view
/// set. Up to `jobs` subsets train concurrently.
pub fn ablate(bundle: &GraphBundle, config: &ModelConfig, subsets: &[Vec<ViewKind>], jobs: usize) -> Result<Vec<AblationRow>> {
    if subsets.is_empty() {
        return Err(Error::Validation("no view subsets to ablate".into()));
    }
    if subsets.iter().any(Vec::is_empty) {
        return Err(Error::Validation("view subsets must be non-empty".into()));
    }
    let run = |views: &Vec<ViewKind>| -> Result<AblationRow> {
        let cfg = ModelConfig {
            enabled_views: views.clone(),
            ..config.clone()
        };
        let (_, report) = train(bundle, &cfg)?;
        let metrics = report
            .test_metrics
            .ok_or_else(|| Error::Validation("ablation needs labelled test questions".into()))?;
        Ok(AblationRow {
            views: cfg.views(),
            best_epoch: report.best_epoch,
            metrics,
        })
    };
    par::with_jobs(jobs, || par::map_slice(subsets, run)).into_iter().collect()
}

pub fn ablation_to_tsv(rows: &[AblationRow]) -> String {
    let mut out = String::from("views\tmacro_precision\tmacro_recall\tmacro_f1\taccuracy\tbest_epoch\n");
    for r in rows {
        let views: Vec<&str> = r.views.iter().map(|v| v.as_str()).collect();
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            views.join("+"),
            fmt_real(r.metrics.macro_precision),
            fmt_real(r.metrics.macro_recall),
            fmt_real(r.metrics.macro_f1),
            fmt_real(r.metrics.accuracy),
            r.best_epoch
        );
    }
    out
}

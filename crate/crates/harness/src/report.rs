//! In-memory results and the metrics file layout.

use qhmc_core::diagnostics::{wasserstein1_to, Distribution1d, EscapeCurve, HistogramSummary};
use qhmc_core::samplers::Chain;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::Result;

/// Collected states in row-major order.
///
/// The first `index_columns` columns identify a row (path number, particle);
/// the rest are state coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleTable {
    pub columns: Vec<String>,
    pub index_columns: usize,
    pub values: Vec<f64>,
}

impl SampleTable {
    /// One row per collected path: `path` followed by the coordinates.
    pub fn from_chain(chain: &Chain, names: &[String]) -> Self {
        let mut columns = vec!["path".to_string()];
        columns.extend(names.iter().cloned());
        let mut values = Vec::with_capacity(chain.len() * columns.len());
        for (i, s) in chain.samples().enumerate() {
            values.push((chain.burn_in() + i) as f64);
            values.extend_from_slice(s);
        }
        Self {
            columns,
            index_columns: 1,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn n_rows(&self) -> usize {
        self.values.len() / self.width()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.width())
    }

    pub fn state_columns(&self) -> &[String] {
        &self.columns[self.index_columns..]
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows().map(|r| r[k]).collect()
    }
}

/// `x0, x1, …`, or plain `x` in one dimension.
pub fn coordinate_names(dim: usize) -> Vec<String> {
    if dim == 1 {
        vec!["x".into()]
    } else {
        (0..dim).map(|k| format!("x{k}")).collect()
    }
}

/// Statistics that depend on the samples file alone.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleStatistics {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub w1: Option<f64>,
}

/// Per-coordinate mean and unbiased variance, plus W1 of the first
/// coordinate against `reference` when one is given.
pub fn sample_statistics(table: &SampleTable, reference: Option<&dyn Distribution1d>) -> Result<SampleStatistics> {
    let n = table.n_rows() as f64;
    let mut mean = Vec::new();
    let mut variance = Vec::new();
    for k in table.index_columns..table.width() {
        let col = table.column(k);
        let m = col.iter().sum::<f64>() / n;
        let v = if col.len() > 1 {
            col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        mean.push(m);
        variance.push(v);
    }
    let w1 = match reference {
        Some(d) => Some(wasserstein1_to(&table.column(table.index_columns), d)?),
        None => None,
    };
    Ok(SampleStatistics { mean, variance, w1 })
}

/// Everything reported for one run.
///
/// Fields that do not apply to an experiment are omitted from the JSON.
/// Non-finite values are written as `null`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMetrics {
    pub n_samples: usize,
    pub acceptance_rate: Option<f64>,
    pub divergent_paths: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mean: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variance: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub escape: Option<EscapeCurve>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode_fractions: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_mse: Option<f64>,
    /// Mean over samples of each sample's own test MSE.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_mse_per_sample: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psnr: Option<f64>,
    /// PSNR of the corrupted input against the clean image.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_psnr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_mean: Option<f64>,
}

pub(crate) fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl RunMetrics {
    pub fn from_chain(chain: &Chain) -> Self {
        Self {
            n_samples: chain.len(),
            acceptance_rate: finite(chain.acceptance_rate()),
            divergent_paths: chain.divergent_count(),
            ..Self::default()
        }
    }

    pub fn set_statistics(&mut self, stats: &SampleStatistics) {
        self.mean = stats.mean.iter().copied().map(finite).collect();
        self.variance = stats.variance.iter().copied().map(finite).collect();
        self.w1 = stats.w1.and_then(finite);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub repetitions: usize,
    pub paper_scale: bool,
    pub config: ExperimentConfig,
}

impl Provenance {
    /// Echoes `config` with its runs filled in, so the echo is the complete run list.
    pub fn for_config(config: &ExperimentConfig) -> Self {
        let mut echo = config.clone();
        echo.runs = config.effective_runs();
        Self {
            tool: "qhmc-kit".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: config.seed,
            repetitions: config.repetitions,
            paper_scale: config.paper_scale,
            config: echo,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunEntry {
    pub label: String,
    pub repetition: usize,
    /// Random stream index under the experiment seed.
    pub stream: u64,
    pub samples_file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_file: Option<String>,
    pub metrics: RunMetrics,
}

/// Contents of `metrics.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub experiment: String,
    pub provenance: Provenance,
    pub runs: Vec<RunEntry>,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("metrics serialise");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| crate::error::HarnessError::Config(format!("metrics file: {e}")))
    }

    pub fn run(&self, label: &str, repetition: usize) -> Option<&RunEntry> {
        self.runs.iter().find(|r| r.label == label && r.repetition == repetition)
    }
}

/// Histogram of one sample column.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnHistogram {
    pub column: String,
    pub summary: HistogramSummary,
}

/// Histograms of every state column of `table`, over `[lower, upper]` or the column range.
pub fn column_histograms(table: &SampleTable, bins: usize, lower: Option<f64>, upper: Option<f64>) -> Result<Vec<ColumnHistogram>> {
    let mut out = Vec::new();
    for k in table.index_columns..table.width() {
        let col = table.column(k);
        let finite_values = col.iter().copied().filter(|v| v.is_finite());
        let (min, max) = finite_values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let mut lo = lower.unwrap_or(min);
        let mut hi = upper.unwrap_or(max);
        if !(lo.is_finite() && hi.is_finite()) {
            (lo, hi) = (0.0, 1.0);
        }
        if hi <= lo {
            // constant column: centre a unit-width range on it
            (lo, hi) = (lo - 0.5, lo + 0.5);
        }
        out.push(ColumnHistogram {
            column: table.columns[k].clone(),
            summary: HistogramSummary::new(&col, lo, hi, bins)?,
        });
    }
    Ok(out)
}

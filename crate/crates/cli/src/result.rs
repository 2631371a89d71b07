//! Machine-readable result documents.

use std::path::{Path, PathBuf};

use lcmix_core::estimation::Covariance;
use lcmix_core::layout::ParamLayout;
use lcmix_core::model::log_likelihood;
use lcmix_core::{FitConfig, FitResult, ModelSpec, Parameters, Variant};
use serde::{Deserialize, Serialize};

use crate::colspec::ColumnSpec;
use crate::error::{CliError, CliResult};
use crate::ingest::{ingest, Ingested};

pub const FORMAT: &str = "lcmix-result/1";

/// Where the fitted data came from, so a result can be re-scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSource {
    pub csv: PathBuf,
    pub colspec: PathBuf,
    pub log_external: bool,
    pub rows_read: usize,
    pub rows_used: usize,
    pub dropped_missing: usize,
    pub dropped_nonpositive: usize,
}

impl DataSource {
    pub fn new(csv: &Path, colspec: &Path, log_external: bool, ingested: &Ingested) -> Self {
        let abs = |p: &Path| std::fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
        DataSource {
            csv: abs(csv),
            colspec: abs(colspec),
            log_external,
            rows_read: ingested.rows_read,
            rows_used: ingested.data.n(),
            dropped_missing: ingested.dropped_missing,
            dropped_nonpositive: ingested.dropped_nonpositive,
        }
    }

    /// Reads the data again exactly as it was fitted.
    pub fn load(&self) -> CliResult<Ingested> {
        let text = std::fs::read_to_string(&self.colspec).map_err(|e| CliError::io(&self.colspec, e))?;
        let spec: ColumnSpec = text.parse()?;
        ingest(&self.csv, &spec, self.log_external)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub name: String,
    pub value: f64,
    pub se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub format: String,
    pub model: Variant,
    pub classes: usize,
    pub spec: ModelSpec,
    /// Indicator names, then the external variable.
    pub column_names: Vec<String>,
    pub params: Parameters,
    pub loglik: f64,
    pub bic: f64,
    pub n_params: usize,
    pub n_obs: usize,
    pub entropy_r2: f64,
    pub classification_error: f64,
    pub class_proportions: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub start_index: usize,
    pub config: FitConfig,
    /// Free parameters on their natural scale, in layout order.
    pub estimates: Vec<Estimate>,
    pub covariance: Option<Covariance>,
    pub data: Option<DataSource>,
    pub posteriors: Option<PathBuf>,
    pub warnings: Vec<String>,
}

/// Numerical warnings worth surfacing for a fit.
pub fn fit_warnings(fit: &FitResult) -> Vec<String> {
    let mut w = Vec::new();
    if !fit.converged {
        w.push(format!("EM did not converge in {} iterations", fit.n_iterations));
    }
    if fit.measurement.clamped > 0 {
        w.push(format!(
            "{} logit solves hit the coefficient bound (quasi-separation)",
            fit.measurement.clamped
        ));
    }
    if fit.measurement.nonconverged > 0 {
        w.push(format!("{} logit solves stopped before convergence", fit.measurement.nonconverged));
    }
    if fit.measurement.singular > 0 {
        w.push(format!("{} logit solves had a singular information matrix", fit.measurement.singular));
    }
    if fit.small_sample {
        w.push(format!("{} observations for {} free parameters", fit.n_obs, fit.n_params));
    }
    if fit.covariance.as_ref().is_some_and(|c| c.pseudo_inverse) {
        w.push("information matrix not positive definite; standard errors use a pseudo-inverse".into());
    }
    w
}

impl ResultDocument {
    /// `names` holds the indicator names followed by the external
    /// variable's name, as in [`lcmix_core::Dataset::column_names`].
    pub fn from_fit(
        fit: &FitResult,
        config: &FitConfig,
        names: &[String],
        data: Option<DataSource>,
        posteriors: Option<PathBuf>,
    ) -> Self {
        let layout = ParamLayout::new(&fit.spec);
        let values = layout.natural(&fit.params);
        let covariance = fit
            .covariance
            .clone()
            .filter(|c| c.matrix.iter().all(|v| v.is_finite()));
        let ses = covariance.as_ref().map(Covariance::standard_errors);
        let estimates = values
            .iter()
            .enumerate()
            .map(|(i, &value)| Estimate {
                name: layout.label(i, names),
                value,
                se: ses.as_ref().map(|s| s[i]),
            })
            .collect();
        let mut warnings = fit_warnings(fit);
        if fit.covariance.is_some() && covariance.is_none() {
            warnings.push("covariance matrix had non-finite entries and was dropped".into());
        }
        ResultDocument {
            format: FORMAT.into(),
            model: fit.spec.variant(),
            classes: fit.spec.n_classes(),
            spec: fit.spec.clone(),
            column_names: names.to_vec(),
            params: fit.params.clone(),
            loglik: fit.loglik,
            bic: fit.bic(),
            n_params: fit.n_params,
            n_obs: fit.n_obs,
            entropy_r2: fit.entropy_r2(),
            classification_error: fit.classification_error(),
            class_proportions: fit.class_proportions(),
            converged: fit.converged,
            iterations: fit.n_iterations,
            start_index: fit.start_index,
            config: config.clone(),
            estimates,
            covariance,
            data,
            posteriors,
            warnings,
        }
    }

    pub fn to_json(&self) -> CliResult<String> {
        serde_json::to_string_pretty(self).map_err(|e| CliError::input(format!("cannot serialize result: {e}")))
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let doc: ResultDocument = serde_json::from_str(&text)
            .map_err(|e| CliError::input(format!("{}: not a result document: {e}", path.display())))?;
        if doc.format != FORMAT {
            return Err(CliError::input(format!("{}: unsupported format `{}`", path.display(), doc.format)));
        }
        doc.params.validate(&doc.spec)?;
        Ok(doc)
    }

    /// Log-likelihood of the stored parameters on the stored data source.
    pub fn rescore(&self) -> CliResult<f64> {
        let source = self
            .data
            .as_ref()
            .ok_or_else(|| CliError::input("result document has no data source"))?;
        let ingested = source.load()?;
        Ok(log_likelihood(&self.params, &self.spec, &ingested.data)?)
    }
}

//! Simulated population studies: calibrate, generate, fit all three models,
//! sweep the number of classes and compare partitions.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use lcmix_core::diagnostics::adjusted_rand_index;
use lcmix_core::inference::attach_standard_errors;
use lcmix_core::simulation::{calibrate_separation, generate, Calibration, CalibrationOptions, StudyDesign};
use lcmix_core::{fit, Dataset, FitConfig, FitResult, ModelSpec, Partition, Variant};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::ingest::{spec_for, write_dataset, write_posteriors};
use crate::result::ResultDocument;
use crate::tables::{self, FitView, SweepRow};
use crate::truth::Truth;

/// Target entropy R² of the correctly specified model.
pub const TARGET_R2: f64 = 0.7;

#[derive(Debug, Clone)]
pub struct StudyOptions {
    pub n: usize,
    pub seed: u64,
    pub fit: FitConfig,
    /// Skip calibration and use this intercept magnitude.
    pub intercept: Option<f64>,
    pub calibration_n: usize,
    /// Seed of the calibration datasets; shared by all study seeds so one
    /// calibration serves every replication.
    pub calibration_seed: u64,
    /// JSON file holding calibrations from earlier runs.
    pub calibration_cache: Option<PathBuf>,
    /// Class counts of the BIC sweep; `None` skips it.
    pub sweep: Option<RangeInclusive<usize>>,
    /// Models swept; empty means all three.
    pub sweep_models: Vec<Variant>,
    /// Attach standard errors to the two-class fits.
    pub standard_errors: bool,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            n: 30_000,
            seed: 1,
            fit: study_fit_config(1),
            intercept: None,
            calibration_n: 20_000,
            calibration_seed: 0,
            calibration_cache: None,
            sweep: Some(1..=5),
            sweep_models: Vec::new(),
            standard_errors: true,
        }
    }
}

/// Fit settings used by studies: 20 random starts screened for 20 EM
/// iterations each.
pub fn study_fit_config(seed: u64) -> FitConfig {
    FitConfig {
        n_starts: 20,
        start_iterations: 20,
        rng_seed: seed,
        parallel_starts: true,
        ..FitConfig::default()
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct CalibrationCache {
    entries: BTreeMap<String, Calibration>,
}

fn cache_key(generator: Variant, options: &StudyOptions) -> String {
    format!(
        "{generator}:r2={TARGET_R2}:n={}:seed={}:starts={}x{}",
        options.calibration_n, options.calibration_seed, options.fit.n_starts, options.fit.start_iterations
    )
}

/// Intercept magnitude for `generator`: the override, a cached calibration,
/// or a fresh calibration (which is then cached).
pub fn resolve_intercept(generator: Variant, options: &StudyOptions) -> CliResult<(f64, Option<Calibration>)> {
    if let Some(b) = options.intercept {
        return Ok((b, None));
    }
    let key = cache_key(generator, options);
    let mut cache = match &options.calibration_cache {
        Some(path) if path.exists() => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            serde_json::from_str::<CalibrationCache>(&text)
                .map_err(|e| CliError::input(format!("{}: bad calibration cache: {e}", path.display())))?
        }
        _ => CalibrationCache::default(),
    };
    if let Some(c) = cache.entries.get(&key) {
        return Ok((c.intercept_magnitude, Some(c.clone())));
    }
    let design = StudyDesign::population(generator, options.calibration_n, 1.0);
    let cal_options = CalibrationOptions {
        n: options.calibration_n,
        fit: FitConfig { rng_seed: options.calibration_seed, ..options.fit.clone() },
        ..CalibrationOptions::default()
    };
    let calibration = calibrate_separation(&design, TARGET_R2, options.calibration_seed, &cal_options)
        .map_err(|e| CliError::Estimation(format!("calibrating {generator}: {e}")))?;
    if let Some(path) = &options.calibration_cache {
        cache.entries.insert(key, calibration.clone());
        let text = serde_json::to_string_pretty(&cache).map_err(|e| CliError::input(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| CliError::io(path, e))?;
    }
    Ok((calibration.intercept_magnitude, Some(calibration)))
}

/// Fits `variant` with `classes` classes, optionally with standard errors.
pub fn fit_model(
    data: &Dataset,
    variant: Variant,
    classes: usize,
    config: &FitConfig,
    standard_errors: bool,
) -> CliResult<FitResult> {
    let spec = ModelSpec::for_data(variant, classes, data)?;
    let mut result = fit(&spec, data, config)?;
    if standard_errors {
        attach_standard_errors(&mut result, data)?;
    }
    Ok(result)
}

fn sweep_row(classes: usize, outcome: CliResult<&FitResult>) -> SweepRow {
    match outcome {
        Ok(f) => SweepRow::Fitted {
            classes,
            loglik: f.loglik,
            bic: f.bic(),
            n_params: f.n_params,
            entropy_r2: f.entropy_r2(),
            classification_error: f.classification_error(),
            converged: f.converged,
        },
        Err(e) => SweepRow::Failed { classes, reason: e.to_string() },
    }
}

/// BIC sweep over `range`. A fit in `known` with a matching class count is
/// reused instead of refitted.
pub fn sweep(
    data: &Dataset,
    variant: Variant,
    range: RangeInclusive<usize>,
    config: &FitConfig,
    known: Option<&FitResult>,
) -> Vec<SweepRow> {
    range
        .map(|s| match known.filter(|k| k.spec.n_classes() == s && k.spec.variant() == variant) {
            Some(k) => sweep_row(s, Ok(k)),
            None => sweep_row(s, fit_model(data, variant, s, config, false).as_ref().map_err(clone_err)),
        })
        .collect()
}

fn clone_err(e: &CliError) -> CliError {
    match e {
        CliError::Input(m) => CliError::Input(m.clone()),
        CliError::Estimation(m) => CliError::Estimation(m.clone()),
        CliError::Strict(m) => CliError::Strict(m.clone()),
    }
}

/// Everything produced for one generating design.
#[derive(Debug, Clone)]
pub struct DesignStudy {
    pub design: StudyDesign,
    pub seed: u64,
    pub calibration: Option<Calibration>,
    pub data: Dataset,
    pub truth: Partition,
    pub true_params: lcmix_core::Parameters,
    /// Two-class fits in [`Variant::ALL`] order (LCreg, LCdist, LCcw).
    pub fits: Vec<FitResult>,
    pub sweeps: Vec<(Variant, Vec<SweepRow>)>,
    pub aris: Vec<(String, f64)>,
}

impl DesignStudy {
    pub fn fit_of(&self, variant: Variant) -> &FitResult {
        let i = Variant::ALL.iter().position(|&v| v == variant).expect("known variant");
        &self.fits[i]
    }

    pub fn sweep_of(&self, variant: Variant) -> Option<&[SweepRow]> {
        self.sweeps.iter().find(|(v, _)| *v == variant).map(|(_, r)| r.as_slice())
    }

    pub fn ari_vs_truth(&self, variant: Variant) -> CliResult<f64> {
        Ok(adjusted_rand_index(&self.fit_of(variant).modal_partition(), &self.truth)?)
    }
}

/// Runs the study for one generating model.
pub fn run_design(generator: Variant, options: &StudyOptions) -> CliResult<DesignStudy> {
    let (b, calibration) = resolve_intercept(generator, options)?;
    let design = StudyDesign::population(generator, options.n, b);
    let sim = generate(&design, options.seed)?;
    let config = FitConfig { rng_seed: options.seed, ..options.fit.clone() };
    let fits = Variant::ALL
        .iter()
        .map(|&v| fit_model(&sim.data, v, 2, &config, options.standard_errors))
        .collect::<CliResult<Vec<_>>>()?;

    let mut sweeps = Vec::new();
    if let Some(range) = &options.sweep {
        let models = if options.sweep_models.is_empty() { Variant::ALL.to_vec() } else { options.sweep_models.clone() };
        for v in models {
            let known = fits.iter().find(|f| f.spec.variant() == v);
            sweeps.push((v, sweep(&sim.data, v, range.clone(), &config, known)));
        }
    }

    let mut aris = Vec::new();
    let parts: Vec<Partition> = fits.iter().map(FitResult::modal_partition).collect();
    for (v, p) in Variant::ALL.iter().zip(&parts) {
        aris.push((format!("{} vs truth", v.label()), adjusted_rand_index(p, &sim.truth)?));
    }
    for i in 0..parts.len() {
        for j in i + 1..parts.len() {
            let label = format!("{} vs {}", Variant::ALL[i].label(), Variant::ALL[j].label());
            aris.push((label, adjusted_rand_index(&parts[i], &parts[j])?));
        }
    }
    Ok(DesignStudy {
        design,
        seed: options.seed,
        calibration,
        data: sim.data,
        truth: sim.truth,
        true_params: sim.params,
        fits,
        sweeps,
        aris,
    })
}

pub fn view<'a>(title: &'a str, fit: &'a FitResult, names: &'a [String]) -> FitView<'a> {
    FitView {
        title,
        spec: &fit.spec,
        params: &fit.params,
        covariance: fit.covariance.as_ref(),
        names,
        loglik: fit.loglik,
        bic: fit.bic(),
        n_params: fit.n_params,
        entropy_r2: fit.entropy_r2(),
        classification_error: fit.classification_error(),
    }
}

/// Text report: class tables with Wald tests and direct effects for every
/// model, the ARI table and the BIC sweeps.
pub fn render(study: &DesignStudy) -> String {
    let gen = study.design.generator.label();
    let mut out = String::new();
    let _ = writeln!(out, "=== {gen} data: n = {}, seed = {} ===", study.design.n, study.seed);
    let _ = write!(out, "intercept magnitude b = {}", tables::f4(study.design.intercept_magnitude));
    match &study.calibration {
        Some(c) => {
            let _ = writeln!(out, " (calibrated: R2 {} after {} evaluations)", tables::f4(c.achieved_r2), c.evaluations.len());
        }
        None => out.push_str(" (given)\n"),
    }
    out.push('\n');
    let names = study.data.column_names();
    for f in &study.fits {
        let title = format!("{} on {gen} data", f.spec.variant().label());
        let v = view(&title, f, names);
        out.push_str(&tables::class_table(&v));
        out.push('\n');
        let w = tables::wald_table(&v);
        if !w.is_empty() {
            out.push_str(&w);
            out.push('\n');
        }
        let d = tables::direct_effects_table(&v);
        if !d.is_empty() {
            out.push_str(&d);
            out.push('\n');
        }
    }
    out.push_str(&tables::ari_table(&format!("Adjusted Rand indexes, {gen} data"), &study.aris));
    out.push('\n');
    for (v, rows) in &study.sweeps {
        out.push_str(&tables::bic_table(&format!("BIC sweep: {} on {gen} data", v.label()), rows));
        out.push('\n');
    }
    out
}

/// Writes data, truth, per-model results and the report under `dir`.
pub fn write_artifacts(study: &DesignStudy, dir: &Path, config: &FitConfig) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let csv = dir.join("data.csv");
    let colspec = dir.join("data.colspec");
    write_dataset(&study.data, &csv)?;
    std::fs::write(&colspec, spec_for(&study.data).to_string()).map_err(|e| CliError::io(&colspec, e))?;
    Truth {
        design: study.design.clone(),
        seed: study.seed,
        params: study.true_params.clone(),
        labels: study.truth.clone(),
    }
    .write(&dir.join("truth.txt"))?;
    let ingested = crate::ingest::ingest(&csv, &spec_for(&study.data), false)?;
    for f in &study.fits {
        let name = f.spec.variant().as_str();
        let post = dir.join(format!("posteriors_{name}.csv"));
        write_posteriors(&f.posteriors, &post)?;
        let source = crate::result::DataSource::new(&csv, &colspec, false, &ingested);
        let doc = ResultDocument::from_fit(f, config, study.data.column_names(), Some(source), Some(post));
        doc.write(&dir.join(format!("result_{name}.json")))?;
    }
    let report = dir.join("report.txt");
    std::fs::write(&report, render(study)).map_err(|e| CliError::io(&report, e))
}

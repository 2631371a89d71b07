//! Argument parsing and subcommand handlers.

use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use lcmix_core::diagnostics::{adjusted_rand_index, modal_assignment};
use lcmix_core::inference::{direct_effects_test, equal_means_test, equal_variances_test};
use lcmix_core::model::evaluate;
use lcmix_core::simulation::{generate, StudyDesign};
use lcmix_core::{fit, FitConfig, ModelSpec, Partition, SlopeConstraint, VarianceMode, Variant};

use crate::colspec::ColumnSpec;
use crate::error::{CliError, CliResult};
use crate::ingest::{ingest, read_posteriors, spec_for, write_dataset, write_posteriors, Ingested};
use crate::result::{fit_warnings, DataSource, ResultDocument};
use crate::study::{self, StudyOptions};
use crate::tables::{self, TextTable};
use crate::truth::Truth;

#[derive(Debug, Parser)]
#[command(name = "lcmix", version, about = "Latent class models with a continuous external variable")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset from one of the two-class population designs.
    Simulate(SimulateArgs),
    /// Fit one model and write the result document, posteriors and tables.
    Fit(FitArgs),
    /// Fit a range of class counts and tabulate BIC.
    Select(SelectArgs),
    /// Adjusted Rand index between fitted partitions and the truth.
    Compare(CompareArgs),
    /// Wald tests from a result document's covariance matrix.
    Wald(WaldArgs),
    /// Run the simulated population studies end to end.
    Study(StudyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Lcreg,
    Lcdist,
    Lccw,
}

impl From<ModelArg> for Variant {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Lcreg => Variant::LcReg,
            ModelArg::Lcdist => Variant::LcDist,
            ModelArg::Lccw => Variant::LcCw,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VarianceArg {
    Hetero,
    Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StudyWhich {
    Lcreg,
    Lcdist,
    Lccw,
    All,
}

#[derive(Debug, Args)]
pub struct EstimationArgs {
    /// Random starts.
    #[arg(long, default_value_t = 50)]
    pub starts: usize,
    /// EM iterations every start receives before the best is continued.
    #[arg(long, default_value_t = 50)]
    pub start_iterations: usize,
    #[arg(long, default_value_t = 500)]
    pub max_iterations: usize,
    /// Seed of all random starts.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl EstimationArgs {
    fn config(&self) -> FitConfig {
        FitConfig {
            n_starts: self.starts,
            start_iterations: self.start_iterations,
            max_em_iterations: self.max_iterations,
            rng_seed: self.seed,
            parallel_starts: true,
            ..FitConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Comma-separated input file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Column specification file.
    #[arg(long)]
    pub spec: PathBuf,
    /// Take the natural log of the external variable (rows with values <= 0
    /// are dropped).
    #[arg(long)]
    pub log_external: bool,
}

impl DataArgs {
    fn load(&self) -> CliResult<Ingested> {
        let text = std::fs::read_to_string(&self.spec).map_err(|e| CliError::io(&self.spec, e))?;
        let spec: ColumnSpec = text.parse().map_err(|e| CliError::input(format!("{}: {e}", self.spec.display())))?;
        ingest(&self.data, &spec, self.log_external)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 30_000)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Intercept magnitude; calibrated to entropy R2 0.7 when omitted.
    #[arg(long)]
    pub intercept: Option<f64>,
    #[arg(long, default_value_t = 20_000)]
    pub calibration_n: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: DataArgs,
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    #[command(flatten)]
    pub estimation: EstimationArgs,
    #[arg(long, value_enum, default_value_t = VarianceArg::Hetero)]
    pub variance: VarianceArg,
    /// Per-item slope constraints, lines `item = free|equal|zero`.
    #[arg(long)]
    pub slopes: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Skip the observed-information standard errors.
    #[arg(long)]
    pub no_se: bool,
    /// Exit with code 3 if the fit raised a numerical warning.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub input: DataArgs,
    /// One or more models, comma-separated.
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    pub model: Vec<ModelArg>,
    /// Class counts: `S`, `A-B` or `A..B`.
    #[arg(long, default_value = "1-5")]
    pub classes: String,
    #[command(flatten)]
    pub estimation: EstimationArgs,
    #[arg(long, value_enum, default_value_t = VarianceArg::Hetero)]
    pub variance: VarianceArg,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Result documents; every pair is compared.
    #[arg(required = true)]
    pub results: Vec<PathBuf>,
    /// Truth sidecar written by `simulate`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WaldArgs {
    pub result: PathBuf,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[arg(long, value_enum, default_value_t = StudyWhich::All)]
    pub which: StudyWhich,
    #[arg(long, default_value_t = 30_000)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub starts: usize,
    #[arg(long, default_value_t = 20)]
    pub start_iterations: usize,
    /// Skip calibration and use this intercept magnitude for every design.
    #[arg(long)]
    pub intercept: Option<f64>,
    #[arg(long, default_value_t = 20_000)]
    pub calibration_n: usize,
    /// Largest class count of the BIC sweep (0 skips the sweep).
    #[arg(long, default_value_t = 5)]
    pub max_classes: usize,
    #[arg(long, default_value = "study")]
    pub out: PathBuf,
}

/// Runs one parsed command, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut dyn std::io::Write) -> CliResult<()> {
    match cli.command {
        Command::Simulate(a) => simulate(&a, out),
        Command::Fit(a) => fit_cmd(&a, out),
        Command::Select(a) => select(&a, out),
        Command::Compare(a) => compare(&a, out),
        Command::Wald(a) => wald(&a, out),
        Command::Study(a) => study_cmd(&a, out),
    }
}

fn emit(out: &mut dyn std::io::Write, text: &str) -> CliResult<()> {
    out.write_all(text.as_bytes()).map_err(|e| CliError::input(format!("cannot write output: {e}")))
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn simulate(a: &SimulateArgs, out: &mut dyn std::io::Write) -> CliResult<()> {
    create_dir(&a.out)?;
    let generator: Variant = a.model.into();
    let options = StudyOptions {
        intercept: a.intercept,
        calibration_n: a.calibration_n,
        calibration_cache: Some(a.out.join("calibration.json")),
        ..StudyOptions::default()
    };
    let (b, calibration) = study::resolve_intercept(generator, &options)?;
    let design = StudyDesign::population(generator, a.n, b);
    let sim = generate(&design, a.seed)?;
    let csv = a.out.join("data.csv");
    let colspec = a.out.join("data.colspec");
    write_dataset(&sim.data, &csv)?;
    std::fs::write(&colspec, spec_for(&sim.data).to_string()).map_err(|e| CliError::io(&colspec, e))?;
    Truth { design, seed: a.seed, params: sim.params, labels: sim.truth }.write(&a.out.join("truth.txt"))?;
    let mut msg = format!("wrote {} rows of {} data to {}\n", sim.data.n(), generator.label(), csv.display());
    msg.push_str(&format!("intercept magnitude {b}"));
    if let Some(c) = calibration {
        msg.push_str(&format!(" (calibrated, R2 {:.4})", c.achieved_r2));
    }
    msg.push('\n');
    emit(out, &msg)
}

fn read_slopes(path: &Path, names: &[String]) -> CliResult<Vec<SlopeConstraint>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let n_items = names.len() - 1;
    let mut slopes = vec![SlopeConstraint::Free; n_items];
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |m: String| CliError::input(format!("{}: line {}: {m}", path.display(), i + 1));
        let (item, value) = line.split_once('=').ok_or_else(|| bad("expected `item = free|equal|zero`".into()))?;
        let j = names[..n_items]
            .iter()
            .position(|n| n == item.trim())
            .ok_or_else(|| bad(format!("unknown item `{}`", item.trim())))?;
        slopes[j] = value.trim().parse().map_err(|e: lcmix_core::Error| bad(e.to_string()))?;
    }
    Ok(slopes)
}

fn build_spec(
    variant: Variant,
    classes: usize,
    data: &lcmix_core::Dataset,
    variance: VarianceArg,
    slopes: Option<Vec<SlopeConstraint>>,
) -> CliResult<ModelSpec> {
    let mode = match variance {
        VarianceArg::Hetero => VarianceMode::Heteroscedastic,
        VarianceArg::Common => VarianceMode::Common,
    };
    let slopes = slopes.unwrap_or_else(|| vec![SlopeConstraint::Free; data.n_items()]);
    Ok(ModelSpec::with_constraints(variant, classes, data.cardinalities().to_vec(), mode, slopes)?)
}

fn fit_cmd(a: &FitArgs, out: &mut dyn std::io::Write) -> CliResult<()> {
    let ingested = a.input.load()?;
    let data = &ingested.data;
    let slopes = a.slopes.as_deref().map(|p| read_slopes(p, data.column_names())).transpose()?;
    let spec = build_spec(a.model.into(), a.classes, data, a.variance, slopes)?;
    let config = a.estimation.config();
    let mut result = fit(&spec, data, &config)?;
    if !a.no_se {
        lcmix_core::inference::attach_standard_errors(&mut result, data)?;
    }

    create_dir(&a.out)?;
    let post_path = a.out.join("posteriors.csv");
    write_posteriors(&result.posteriors, &post_path)?;
    let source = DataSource::new(&a.input.data, &a.input.spec, a.input.log_external, &ingested);
    let doc = ResultDocument::from_fit(&result, &config, data.column_names(), Some(source), Some(post_path));
    doc.write(&a.out.join("result.json"))?;

    let title = format!("{}, S = {}", spec.variant().label(), spec.n_classes());
    let v = study::view(&title, &result, data.column_names());
    let mut report = format!("{}\n\n", ingested.summary());
    report.push_str(&tables::class_table(&v));
    for extra in [tables::wald_table(&v), tables::direct_effects_table(&v)] {
        if !extra.is_empty() {
            report.push('\n');
            report.push_str(&extra);
        }
    }
    let zbar = data.z_mean();
    report.push('\n');
    report.push_str(&tables::profile_table(&v, zbar));
    let profile = a.out.join("profile.csv");
    std::fs::write(&profile, tables::profile_csv(&v, zbar)).map_err(|e| CliError::io(&profile, e))?;
    let warnings = fit_warnings(&result);
    for w in &warnings {
        report.push_str(&format!("warning: {w}\n"));
    }
    let report_path = a.out.join("report.txt");
    std::fs::write(&report_path, &report).map_err(|e| CliError::io(&report_path, e))?;
    emit(out, &report)?;
    if a.strict && !warnings.is_empty() {
        return Err(CliError::Strict(warnings.join("; ")));
    }
    Ok(())
}

/// Parses `S`, `A-B` or `A..B`.
pub fn parse_class_range(text: &str) -> CliResult<RangeInclusive<usize>> {
    let bad = || CliError::input(format!("bad class range `{text}` (use S, A-B or A..B)"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let (lo, hi) = if let Some((a, b)) = text.split_once("..") {
        (num(a)?, num(b)?)
    } else if let Some((a, b)) = text.split_once('-') {
        (num(a)?, num(b)?)
    } else {
        let s = num(text)?;
        (s, s)
    };
    if lo == 0 || lo > hi {
        return Err(bad());
    }
    Ok(lo..=hi)
}

/// Caveat printed when LCreg is swept alongside models of the external
/// variable's density.
pub const LCREG_CAVEAT: &str = "note: LCreg does not model the distribution of the external variable, so its \
likelihood is on a different scale; its BIC is not ranked against LCdist or LCcw.";

fn select(a: &SelectArgs, out: &mut dyn std::io::Write) -> CliResult<()> {
    let ingested = a.input.load()?;
    let data = &ingested.data;
    let range = parse_class_range(&a.classes)?;
    let config = a.estimation.config();
    let mut models: Vec<Variant> = a.model.iter().map(|&m| m.into()).collect();
    models.dedup();
    let mut report = format!("{}\n\n", ingested.summary());
    let mut best: Vec<(Variant, usize, f64)> = Vec::new();
    for &v in &models {
        let rows: Vec<tables::SweepRow> = range
            .clone()
            .map(|s| {
                let outcome = build_spec(v, s, data, a.variance, None)
                    .and_then(|spec| fit(&spec, data, &config).map_err(CliError::from));
                match outcome {
                    Ok(f) => tables::SweepRow::Fitted {
                        classes: s,
                        loglik: f.loglik,
                        bic: f.bic(),
                        n_params: f.n_params,
                        entropy_r2: f.entropy_r2(),
                        classification_error: f.classification_error(),
                        converged: f.converged,
                    },
                    Err(e) => tables::SweepRow::Failed { classes: s, reason: e.to_string() },
                }
            })
            .collect();
        report.push_str(&tables::bic_table(&format!("BIC: {}", v.label()), &rows));
        report.push('\n');
        if let Some(s) = tables::bic_argmin(&rows) {
            let b = rows.iter().find(|r| r.classes() == s).and_then(tables::SweepRow::bic).unwrap_or(f64::NAN);
            best.push((v, s, b));
        }
    }
    if models.len() > 1 {
        let comparable: Vec<&(Variant, usize, f64)> = best.iter().filter(|(v, _, _)| v.models_external()).collect();
        if models.contains(&Variant::LcReg) {
            report.push_str(LCREG_CAVEAT);
            report.push('\n');
        }
        if comparable.len() > 1 {
            let (v, s, b) = comparable.iter().min_by(|x, y| x.2.total_cmp(&y.2)).expect("non-empty");
            report.push_str(&format!("lowest BIC among LCdist/LCcw: {} with S = {s} (BIC {b:.2})\n", v.label()));
        }
    }
    emit(out, &report)
}

fn partition_of(doc: &ResultDocument) -> CliResult<Partition> {
    if let Some(p) = doc.posteriors.as_ref().filter(|p| p.exists()) {
        return Ok(modal_assignment(&read_posteriors(p)?));
    }
    let source = doc
        .data
        .as_ref()
        .ok_or_else(|| CliError::input("result has neither posteriors nor a data source"))?;
    let ingested = source.load()?;
    let (post, _) = evaluate(&doc.params, &doc.spec, &ingested.data)?;
    Ok(modal_assignment(&post))
}

fn compare(a: &CompareArgs, out: &mut dyn std::io::Write) -> CliResult<()> {
    let docs = a.results.iter().map(|p| ResultDocument::read(p)).collect::<CliResult<Vec<_>>>()?;
    let parts = docs.iter().map(partition_of).collect::<CliResult<Vec<_>>>()?;
    let label = |i: usize| format!("{} ({})", docs[i].model.label(), a.results[i].display());
    let mut entries = Vec::new();
    for i in 0..parts.len() {
        for j in i + 1..parts.len() {
            entries.push((format!("{} vs {}", label(i), label(j)), adjusted_rand_index(&parts[i], &parts[j])?));
        }
    }
    if let Some(t) = &a.truth {
        let truth = Truth::read(t)?;
        for (i, p) in parts.iter().enumerate() {
            entries.push((format!("{} vs truth", label(i)), adjusted_rand_index(p, &truth.labels)?));
        }
    }
    if entries.is_empty() {
        return Err(CliError::input("nothing to compare: give two results or a truth file"));
    }
    emit(out, &tables::ari_table("Adjusted Rand indexes", &entries))
}

fn wald(a: &WaldArgs, out: &mut dyn std::io::Write) -> CliResult<()> {
    let doc = ResultDocument::read(&a.result)?;
    let cov = doc
        .covariance
        .as_ref()
        .ok_or_else(|| CliError::input(format!("{}: no covariance matrix (fitted with --no-se?)", a.result.display())))?;
    let mut t = TextTable::new(
        format!("Wald tests for {} with S = {}", doc.model.label(), doc.classes),
        ["Test", "Wald", "df", "p-value", ""].map(String::from).to_vec(),
    );
    let row = |label: String, w: &lcmix_core::inference::WaldResult| {
        vec![
            label,
            format!("{:.2}", w.statistic),
            w.df.to_string(),
            format!("{:.4}", w.p_value),
            lcmix_core::inference::significance_stars(w.p_value).to_string(),
        ]
    };
    let z = doc.column_names.last().cloned().unwrap_or_else(|| "z".into());
    if doc.classes > 1 && doc.model.models_external() {
        t.row(row(format!("Equal means of {z}"), &equal_means_test(&doc.spec, &doc.params, cov)?));
        if doc.spec.variance_mode() == VarianceMode::Heteroscedastic {
            t.row(row(format!("Equal variances of {z}"), &equal_variances_test(&doc.spec, &doc.params, cov)?));
        }
    }
    if doc.classes > 1 && doc.model.has_direct_effects() {
        for j in 0..doc.spec.n_items() {
            if doc.spec.slope(j) != SlopeConstraint::Free {
                continue;
            }
            let name = doc.column_names.get(j).cloned().unwrap_or_else(|| format!("y{}", j + 1));
            let (zero, eq) = direct_effects_test(&doc.spec, &doc.params, cov, j)?;
            t.row(row(format!("{name}: direct effects = 0"), &zero));
            t.row(row(format!("{name}: direct effects equal"), &eq));
        }
    }
    emit(out, &t.render())
}

fn study_cmd(a: &StudyArgs, out: &mut dyn std::io::Write) -> CliResult<()> {
    create_dir(&a.out)?;
    let generators: Vec<Variant> = match a.which {
        StudyWhich::Lcreg => vec![Variant::LcReg],
        StudyWhich::Lcdist => vec![Variant::LcDist],
        StudyWhich::Lccw => vec![Variant::LcCw],
        StudyWhich::All => Variant::ALL.to_vec(),
    };
    let fit = FitConfig { n_starts: a.starts, start_iterations: a.start_iterations, ..study::study_fit_config(a.seed) };
    let options = StudyOptions {
        n: a.n,
        seed: a.seed,
        fit: fit.clone(),
        intercept: a.intercept,
        calibration_n: a.calibration_n,
        calibration_cache: Some(a.out.join("calibration.json")),
        sweep: (a.max_classes > 0).then_some(1..=a.max_classes),
        ..StudyOptions::default()
    };
    for g in generators {
        let s = study::run_design(g, &options)?;
        study::write_artifacts(&s, &a.out.join(g.as_str()), &FitConfig { rng_seed: a.seed, ..fit.clone() })?;
        emit(out, &study::render(&s))?;
        let _ = out.flush();
    }
    Ok(())
}

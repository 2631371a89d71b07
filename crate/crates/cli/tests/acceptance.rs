//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails if any
//! criterion fails. The population studies take tens of minutes on one core.

use std::io::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use lcmix::study::{fit_model, run_design, study_fit_config, DesignStudy, StudyOptions};
use lcmix::tables::{bic_argmin, SweepRow};
use lcmix_core::diagnostics::{adjusted_rand_index, Partition};
use lcmix_core::inference::{wald_direct_effects, wald_equal_means, wald_equal_variances};
use lcmix_core::layout::ParamLayout;
use lcmix_core::model::{log_likelihood, posteriors};
use lcmix_core::simulation::{generate, StudyDesign};
use lcmix_core::special::chi_square_upper_tail;
use lcmix_core::spec::n_free_params;
use lcmix_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STUDY_SEEDS: u64 = 5;
const WALD_SEEDS: u64 = 20;
const N: usize = 30_000;

fn say(line: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
    let _ = err.flush();
}

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict { pass, detail: detail.into() }
    }
}

/// Records checks and the first few failure messages.
#[derive(Default)]
struct Checks {
    failed: Vec<String>,
    total: usize,
}

impl Checks {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.total += 1;
        if !ok {
            self.failed.push(what());
        }
    }

    fn verdict(self, summary: String) -> Verdict {
        if self.failed.is_empty() {
            Verdict::new(true, format!("{summary} ({} checks)", self.total))
        } else {
            let shown: Vec<&str> = self.failed.iter().take(4).map(String::as_str).collect();
            Verdict::new(false, format!("{summary}; {} of {} checks failed: {}", self.failed.len(), self.total, shown.join("; ")))
        }
    }
}

// ---------------------------------------------------------------------------
// Criterion 1: properties on small random data

fn random_dataset(seed: u64, n: usize, n_items: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cards: Vec<usize> = (0..n_items).map(|_| rng.random_range(2..=3)).collect();
    let mut rows = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for _ in 0..n {
        let group = rng.random_bool(0.6);
        let row: Vec<u32> = cards
            .iter()
            .map(|&k| match (rng.random_bool(0.7), group) {
                (true, true) => 0,
                (true, false) => (k - 1) as u32,
                _ => rng.random_range(0..k as u32),
            })
            .collect();
        rows.push(row);
        z.push(if group { -1.0 } else { 1.0 } + rng.random_range(-1.0..1.0));
    }
    Dataset::new(rows, cards, z, vec![]).unwrap()
}

fn random_params(spec: &ModelSpec, seed: u64) -> Parameters {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = Parameters::zeros(spec);
    for t in p.theta.iter_mut().skip(1) {
        *t = rng.random_range(-1.0..1.0);
    }
    if let Some(ext) = p.external.as_mut() {
        ext.mu.iter_mut().for_each(|m| *m = rng.random_range(-2.0..2.0));
        ext.sigma2.iter_mut().for_each(|v| *v = rng.random_range(0.3..3.0));
    }
    for (j, item) in p.items.iter_mut().enumerate() {
        for c in 0..spec.n_classes() {
            for k in 1..item.n_categories() {
                item.set_intercept(c, k, rng.random_range(-2.0..2.0));
                if spec.n_item_slopes(j) > 0 {
                    item.set_slope(c, k, rng.random_range(-1.0..1.0));
                }
            }
        }
    }
    p
}

/// Mixture likelihood computed in probability space.
fn direct_loglik(p: &Parameters, data: &Dataset) -> f64 {
    let total: f64 = p.theta.iter().map(|t| t.exp()).sum();
    (0..data.n())
        .map(|i| {
            let z = data.z()[i];
            (0..p.n_classes())
                .map(|c| {
                    let mut f = p.theta[c].exp() / total;
                    if let Some(ext) = &p.external {
                        let (m, v) = (ext.mu[c], ext.sigma2[c]);
                        f *= (-(z - m).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
                    }
                    for (j, item) in p.items.iter().enumerate() {
                        let odds: Vec<f64> = (0..item.n_categories())
                            .map(|k| if k == 0 { 1.0 } else { (item.intercept(c, k) + item.slope(c, k) * z).exp() })
                            .collect();
                        f *= odds[data.code(i, j)] / odds.iter().sum::<f64>();
                    }
                    f
                })
                .sum::<f64>()
                .ln()
        })
        .sum()
}

fn small_config(seed: u64) -> FitConfig {
    FitConfig { n_starts: 4, start_iterations: 20, rng_seed: seed, ..FitConfig::default() }
}

fn criterion_1() -> Verdict {
    let mut checks = Checks::default();
    let mut worst_decrease = 0.0f64;
    for seed in 0..20 {
        let data = random_dataset(seed, 60 + 7 * seed as usize, 4);
        for v in Variant::ALL {
            let spec = ModelSpec::for_data(v, 2, &data).unwrap();
            match fit(&spec, &data, &small_config(seed)) {
                Ok(res) => {
                    worst_decrease = worst_decrease.max(res.max_decrease());
                    checks.check(res.max_decrease() <= 1e-10, || format!("EM decrease {} ({v}, seed {seed})", res.max_decrease()));
                }
                Err(e) => checks.check(false, || format!("fit failed ({v}, seed {seed}): {e}")),
            }
        }
    }

    for seed in 0..40u64 {
        let n = 1 + (seed as usize * 7) % 50;
        let j = 1 + seed as usize % 4;
        let data = random_dataset(1000 + seed, n, j);
        for v in Variant::ALL {
            let spec = ModelSpec::for_data(v, 1 + seed as usize % 3, &data).unwrap();
            let p = random_params(&spec, seed);
            let post = posteriors(&p, &spec, &data).unwrap();
            let worst = post.rows().map(|r| (r.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
            checks.check(worst <= 1e-10, || format!("posterior row sum off by {worst}"));
            let ll = log_likelihood(&p, &spec, &data).unwrap();
            let oracle = direct_loglik(&p, &data);
            checks.check((ll - oracle).abs() <= 1e-8, || format!("loglik {ll} vs probability space {oracle}"));
        }
    }

    for seed in 0..5 {
        let data = random_dataset(500 + seed, 150, 4);
        let dist = ModelSpec::for_data(Variant::LcDist, 2, &data).unwrap();
        let cw = ModelSpec::with_constraints(
            Variant::LcCw,
            2,
            data.cardinalities().to_vec(),
            VarianceMode::Heteroscedastic,
            vec![SlopeConstraint::Zero; 4],
        )
        .unwrap();
        let a = fit(&dist, &data, &small_config(seed)).unwrap();
        let b = fit(&cw, &data, &small_config(seed)).unwrap();
        checks.check((a.loglik - b.loglik).abs() <= 1e-6, || format!("zero-slope LCcw {} vs LCdist {}", b.loglik, a.loglik));
    }

    let mut worst_gradient = 0.0f64;
    for seed in 0..3 {
        for v in Variant::ALL {
            let data = generate(&StudyDesign::population(v, 400, 1.5), 300 + seed).unwrap().data;
            let spec = ModelSpec::for_data(v, 2, &data).unwrap();
            let res = fit(&spec, &data, &small_config(seed)).unwrap();
            let layout = ParamLayout::new(&spec);
            let x = layout.pack(&res.params);
            let mut probe = x.clone();
            for i in 0..x.len() {
                let h = 1e-5 * (1.0 + x[i].abs());
                probe[i] = x[i] + h;
                let up = log_likelihood(&layout.unpack(&probe).unwrap(), &spec, &data).unwrap();
                probe[i] = x[i] - h;
                let down = log_likelihood(&layout.unpack(&probe).unwrap(), &spec, &data).unwrap();
                probe[i] = x[i];
                let g = (up - down) / (2.0 * h);
                worst_gradient = worst_gradient.max(g.abs());
                checks.check(g.abs() < 1e-3, || format!("gradient {g} at parameter {i} ({v}, seed {seed})"));
            }
        }
    }
    checks.verdict(format!("max EM decrease {worst_decrease:.1e}, max |gradient| {worst_gradient:.1e}"))
}

// ---------------------------------------------------------------------------
// Criteria 2, 3, 9: closed forms

fn criterion_2() -> Verdict {
    let mut checks = Checks::default();
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let data = random_dataset(70 + seed, 250, 4);
        let spec = ModelSpec::for_data(Variant::LcDist, 1, &data).unwrap();
        let res = fit(&spec, &data, &small_config(seed)).unwrap();
        let n = data.n() as f64;
        let mut oracle = 0.0;
        for j in 0..data.n_items() {
            for k in 0..data.cardinalities()[j] {
                let count = (0..data.n()).filter(|&i| data.code(i, j) == k).count() as f64;
                if count > 0.0 {
                    oracle += count * (count / n).ln();
                }
            }
        }
        let mean = data.z().iter().sum::<f64>() / n;
        let var = data.z().iter().map(|z| (z - mean).powi(2)).sum::<f64>() / n;
        oracle -= 0.5 * n * ((2.0 * std::f64::consts::PI * var).ln() + 1.0);
        worst = worst.max((res.loglik - oracle).abs());
        checks.check((res.loglik - oracle).abs() <= 1e-8, || format!("{} vs {oracle}", res.loglik));
    }
    checks.verdict(format!("max |difference| {worst:.1e}"))
}

fn criterion_3() -> Verdict {
    let expected = [(Variant::LcReg, 25), (Variant::LcDist, 17), (Variant::LcCw, 29)];
    let mut checks = Checks::default();
    let mut got = Vec::new();
    for (v, want) in expected {
        let count = n_free_params(v, 6, 2);
        let spec = ModelSpec::new(v, 2, vec![2; 6]).unwrap();
        got.push(format!("{}={count}", v.label()));
        checks.check(count == want && spec.n_free_params() == want && ParamLayout::new(&spec).len() == want, || {
            format!("{v}: {count}, expected {want}")
        });
    }
    checks.verdict(got.join(" "))
}

fn criterion_9() -> Verdict {
    let mut checks = Checks::default();
    let mut worst = 0.0f64;
    for i in 0..=400 {
        let x = i as f64 * 0.1;
        let diff = (chi_square_upper_tail(x, 2) - (-x / 2.0).exp()).abs();
        worst = worst.max(diff);
        checks.check(diff <= 1e-12, || format!("df 2 at x = {x}: off by {diff:e}"));
    }
    let critical = [(3.841459, 1, 0.05), (5.991465, 2, 0.05), (6.634897, 1, 0.01), (2.705543, 1, 0.10), (11.070498, 5, 0.05)];
    for (x, df, p) in critical {
        let q = chi_square_upper_tail(x, df);
        checks.check((q - p).abs() <= 1e-4, || format!("P(chi2_{df} > {x}) = {q}, expected {p}"));
    }
    checks.verdict(format!("df 2 max error {worst:.1e}; P(chi2_1 > 3.841459) = {:.6}", chi_square_upper_tail(3.841459, 1)))
}

// ---------------------------------------------------------------------------
// Criterion 4: ARI oracle

fn ari_by_pairs(a: &[usize], b: &[usize]) -> f64 {
    let (mut both, mut only_a, mut only_b, mut neither) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => both += 1.0,
                (true, false) => only_a += 1.0,
                (false, true) => only_b += 1.0,
                (false, false) => neither += 1.0,
            }
        }
    }
    let denom = (both + only_a) * (only_a + neither) + (both + only_b) * (only_b + neither);
    if denom == 0.0 {
        1.0
    } else {
        2.0 * (both * neither - only_a * only_b) / denom
    }
}

/// All set partitions of `n` elements as restricted growth strings.
fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn grow(labels: &mut Vec<usize>, max: usize, n: usize, out: &mut Vec<Vec<usize>>) {
        if labels.len() == n {
            out.push(labels.clone());
            return;
        }
        for v in 0..=max + 1 {
            labels.push(v);
            grow(labels, max.max(v), n, out);
            labels.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut vec![0], 0, n, &mut out);
    out
}

fn ari_oracle() -> (bool, String) {
    let mut worst = 0.0f64;
    let mut pairs = 0usize;
    for n in 2..=8 {
        let parts = set_partitions(n);
        let wrapped: Vec<Partition> = parts.iter().map(|p| Partition::new(p.clone())).collect();
        for (a, pa) in parts.iter().zip(&wrapped) {
            for (b, pb) in parts.iter().zip(&wrapped) {
                let formula = adjusted_rand_index(pa, pb).unwrap();
                worst = worst.max((formula - ari_by_pairs(a, b)).abs());
                pairs += 1;
            }
        }
    }
    (worst <= 1e-12, format!("{pairs} partition pairs for n <= 8, max error {worst:.1e}"))
}

// ---------------------------------------------------------------------------
// Population studies (criteria 4 to 8)

fn study_options(seed: u64, sweep_models: Vec<Variant>) -> StudyOptions {
    let fit = study_fit_config(seed);
    StudyOptions {
        n: N,
        seed,
        fit,
        calibration_cache: Some(PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-calibration.json")),
        sweep: Some(1..=5),
        sweep_models,
        standard_errors: true,
        ..StudyOptions::default()
    }
}

fn index(v: Variant) -> usize {
    Variant::ALL.iter().position(|&w| w == v).unwrap()
}

/// Fitted class to true class, by maximum agreement over all relabelings.
fn align(fitted: &Partition, truth: &Partition, s: usize) -> Vec<usize> {
    fn perms(s: usize) -> Vec<Vec<usize>> {
        if s == 1 {
            return vec![vec![0]];
        }
        let mut out = Vec::new();
        for p in perms(s - 1) {
            for pos in 0..s {
                let mut q = p.clone();
                q.insert(pos, s - 1);
                out.push(q);
            }
        }
        out
    }
    perms(s)
        .into_iter()
        .max_by_key(|map| fitted.labels.iter().zip(&truth.labels).filter(|(f, t)| map[**f] == **t).count())
        .unwrap()
}

/// External means and variances of `fit` in true-class order.
fn aligned_external(fit: &FitResult, truth: &Partition) -> (Vec<f64>, Vec<f64>) {
    let s = fit.spec.n_classes();
    let map = align(&fit.modal_partition(), truth, s);
    let ext = fit.params.external.as_ref().expect("model has an external part");
    let (mut mu, mut var) = (vec![0.0; s], vec![0.0; s]);
    for c in 0..s {
        mu[map[c]] = ext.mu[c];
        var[map[c]] = ext.sigma2[c];
    }
    (mu, var)
}

fn ari(a: &FitResult, b: &FitResult) -> f64 {
    adjusted_rand_index(&a.modal_partition(), &b.modal_partition()).unwrap()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

struct Studies {
    /// Indexed by generator (Variant::ALL order), then seed.
    runs: Vec<Vec<DesignStudy>>,
}

impl Studies {
    fn of(&self, generator: Variant) -> &[DesignStudy] {
        &self.runs[index(generator)]
    }
}

fn run_studies() -> Studies {
    let mut runs = Vec::new();
    for generator in Variant::ALL {
        let models = match generator {
            Variant::LcCw => Variant::ALL.to_vec(),
            _ => vec![Variant::LcCw],
        };
        let mut per_seed = Vec::new();
        for seed in 0..STUDY_SEEDS {
            let t = Instant::now();
            let study = run_design(generator, &study_options(seed, models.clone())).expect("study runs");
            say(&format!(
                "  {generator} data, seed {seed}: b = {:.4}, {:.0} s",
                study.design.intercept_magnitude,
                t.elapsed().as_secs_f64()
            ));
            per_seed.push(study);
        }
        runs.push(per_seed);
    }
    Studies { runs }
}

fn criterion_4(studies: &Studies) -> Verdict {
    let (oracle_ok, oracle_detail) = ari_oracle();
    let mut checks = Checks::default();
    checks.check(oracle_ok, || format!("closed form disagrees with pair counting: {oracle_detail}"));

    // (data, fitted model, correctly specified model, bound, upper?)
    let regimes = [
        (Variant::LcReg, Variant::LcCw, true, 0.95, "LCcw vs LCreg on LCreg data"),
        (Variant::LcDist, Variant::LcCw, true, 0.95, "LCcw vs LCdist on LCdist data"),
        (Variant::LcDist, Variant::LcReg, false, 0.35, "LCreg vs LCdist on LCdist data"),
        (Variant::LcCw, Variant::LcReg, false, 0.30, "LCreg vs LCcw on LCcw data"),
        (Variant::LcCw, Variant::LcDist, false, 0.50, "LCdist vs LCcw on LCcw data"),
    ];
    let mut parts = vec![oracle_detail];
    for (data, model, above, bound, label) in regimes {
        let runs = studies.of(data);
        let vs_correct: Vec<f64> = runs.iter().map(|s| ari(s.fit_of(model), s.fit_of(data))).collect();
        let vs_truth: Vec<f64> = runs.iter().map(|s| s.ari_vs_truth(model).unwrap()).collect();
        let avg = mean(&vs_correct);
        let ok = if above { avg > bound } else { avg < bound };
        checks.check(ok, || format!("{label}: mean ARI {avg:.4}"));
        parts.push(format!("{label} {avg:.4} (vs truth {:.4})", mean(&vs_truth)));
    }
    checks.verdict(parts.join("; "))
}

fn criterion_5(studies: &Studies) -> Verdict {
    let mut checks = Checks::default();
    let mut notes = Vec::new();
    for generator in Variant::ALL {
        for s in studies.of(generator) {
            let props = s.fit_of(generator).class_proportions();
            checks.check((props[0] - 0.7).abs() <= 0.02 && (props[1] - 0.3).abs() <= 0.02, || {
                format!("{generator} on {generator} data, seed {}: proportions {:.4}/{:.4}", s.seed, props[0], props[1])
            });
        }
        let first: Vec<f64> = studies.of(generator).iter().map(|s| s.fit_of(generator).class_proportions()[0]).collect();
        notes.push(format!("{} pi1 {:.4}", generator.label(), mean(&first)));
    }
    for model in [Variant::LcDist, Variant::LcCw] {
        let mut mus = (Vec::new(), Vec::new());
        for s in studies.of(Variant::LcDist) {
            let (mu, var) = aligned_external(s.fit_of(model), &s.truth);
            mus.0.push(mu[0]);
            mus.1.push(mu[1]);
            let ok = (mu[0] + 1.0).abs() <= 0.05
                && (mu[1] - 1.0).abs() <= 0.05
                && var.iter().all(|v| (v - 1.0).abs() <= 0.05);
            checks.check(ok, || format!("{model} on LCdist data, seed {}: mu {mu:.4?}, sigma2 {var:.4?}", s.seed));
        }
        notes.push(format!("{} mu on LCdist data {:.4}/{:.4}", model.label(), mean(&mus.0), mean(&mus.1)));
    }
    let mut biased = (Vec::new(), Vec::new());
    for s in studies.of(Variant::LcCw) {
        let (mu, _) = aligned_external(s.fit_of(Variant::LcDist), &s.truth);
        biased.0.push(mu[0]);
        biased.1.push(mu[1]);
        checks.check(mu[0] < -1.2 && mu[1] < 0.6, || format!("LCdist on LCcw data, seed {}: mu {mu:.4?}", s.seed));
    }
    notes.push(format!("LCdist mu on LCcw data {:.4}/{:.4}", mean(&biased.0), mean(&biased.1)));
    checks.verdict(notes.join("; "))
}

fn criterion_6(studies: &Studies) -> Verdict {
    let mut reg_means = 0;
    let mut reg_vars = 0;
    let mut dist_means = 0;
    let mut dist_vars = 0;
    let mut all_items = 0;
    let mut per_item = [0usize; 6];
    let mut tally = |reg_cw: &FitResult, cw_dist: &FitResult, cw_cw: &FitResult| {
        reg_means += usize::from(wald_equal_means(reg_cw).unwrap().p_value >= 0.05);
        reg_vars += usize::from(wald_equal_variances(reg_cw).unwrap().p_value >= 0.05);
        dist_means += usize::from(wald_equal_means(cw_dist).unwrap().p_value < 0.01);
        dist_vars += usize::from(wald_equal_variances(cw_dist).unwrap().p_value < 0.01);
        let mut every = true;
        for (j, hits) in per_item.iter_mut().enumerate() {
            let reject = wald_direct_effects(cw_cw, j).unwrap().0.p_value < 0.01;
            *hits += usize::from(reject);
            every &= reject;
        }
        all_items += usize::from(every);
    };
    for seed in 0..WALD_SEEDS {
        if seed < STUDY_SEEDS {
            let (r, c) = (&studies.of(Variant::LcReg)[seed as usize], &studies.of(Variant::LcCw)[seed as usize]);
            tally(r.fit_of(Variant::LcCw), c.fit_of(Variant::LcDist), c.fit_of(Variant::LcCw));
            continue;
        }
        let t = Instant::now();
        let b = |g: Variant| studies.of(g)[0].design.intercept_magnitude;
        let config = study_fit_config(seed);
        let reg = generate(&StudyDesign::population(Variant::LcReg, N, b(Variant::LcReg)), seed).unwrap().data;
        let cw = generate(&StudyDesign::population(Variant::LcCw, N, b(Variant::LcCw)), seed).unwrap().data;
        let reg_cw = fit_model(&reg, Variant::LcCw, 2, &config, true).unwrap();
        let cw_dist = fit_model(&cw, Variant::LcDist, 2, &config, true).unwrap();
        let cw_cw = fit_model(&cw, Variant::LcCw, 2, &config, true).unwrap();
        tally(&reg_cw, &cw_dist, &cw_cw);
        say(&format!("  Wald replication seed {seed}: {:.0} s", t.elapsed().as_secs_f64()));
    }
    let runs = WALD_SEEDS as usize;
    let keep = (runs * 9).div_ceil(10);
    let reject = (runs * 19).div_ceil(20);
    let mut checks = Checks::default();
    checks.check(reg_means >= keep, || format!("LCcw equal means kept on LCreg data in {reg_means}/{runs}"));
    checks.check(reg_vars >= keep, || format!("LCcw equal variances kept on LCreg data in {reg_vars}/{runs}"));
    checks.check(dist_means >= reject, || format!("LCdist equal means rejected on LCcw data in {dist_means}/{runs}"));
    checks.check(dist_vars >= reject, || format!("LCdist equal variances rejected on LCcw data in {dist_vars}/{runs}"));
    checks.check(all_items >= reject, || format!("all six Wald(0) rejected in {all_items}/{runs}"));
    checks.verdict(format!(
        "LCreg data, LCcw kept: means {reg_means}/{runs}, variances {reg_vars}/{runs}; \
         LCcw data, LCdist rejected: means {dist_means}/{runs}, variances {dist_vars}/{runs}; \
         Wald(0) rejected for all items {all_items}/{runs} (per item {per_item:?})"
    ))
}

fn argmin(study: &DesignStudy, model: Variant) -> Option<usize> {
    let rows: &[SweepRow] = study.sweep_of(model)?;
    bic_argmin(rows)
}

/// Generating model, swept model, accepted argmin and its description.
type Rule = (Variant, Variant, fn(usize) -> bool, &'static str);

fn criterion_7(studies: &Studies) -> Verdict {
    let mut checks = Checks::default();
    let mut notes = Vec::new();
    let rules: [Rule; 5] = [
        (Variant::LcReg, Variant::LcCw, |s| s == 2, "= 2"),
        (Variant::LcDist, Variant::LcCw, |s| s == 2, "= 2"),
        (Variant::LcCw, Variant::LcCw, |s| s == 2, "= 2"),
        (Variant::LcCw, Variant::LcDist, |s| s >= 4, ">= 4"),
        (Variant::LcCw, Variant::LcReg, |s| s >= 4, ">= 4"),
    ];
    for (data, model, rule, want) in rules {
        let picks: Vec<Option<usize>> = studies.of(data).iter().map(|s| argmin(s, model)).collect();
        for (seed, pick) in picks.iter().enumerate() {
            checks.check(pick.is_some_and(rule), || format!("{model} sweep on {data} data, seed {seed}: argmin {pick:?}, want {want}"));
        }
        let shown: Vec<String> = picks.iter().map(|p| p.map_or("-".into(), |s| s.to_string())).collect();
        notes.push(format!("{} on {} data [{}]", model.label(), data.label(), shown.join(",")));
    }
    checks.verdict(format!("BIC argmin per seed: {}", notes.join("; ")))
}

fn criterion_8(studies: &Studies) -> Verdict {
    let mut checks = Checks::default();
    let mut notes = Vec::new();
    for generator in Variant::ALL {
        let r2: Vec<f64> = studies.of(generator).iter().map(|s| s.fit_of(generator).entropy_r2()).collect();
        let m = mean(&r2);
        checks.check((0.65..=0.82).contains(&m), || format!("{generator} on its own data: mean R2 {m:.4}"));
        notes.push(format!("{} on own data {m:.4}", generator.label()));
    }
    let reg_on_dist: Vec<f64> = studies.of(Variant::LcDist).iter().map(|s| s.fit_of(Variant::LcReg).entropy_r2()).collect();
    let m = mean(&reg_on_dist);
    checks.check((m - 0.28).abs() <= 0.05, || format!("LCreg on LCdist data: mean R2 {m:.4}"));
    notes.push(format!("LCreg on LCdist data {m:.4}"));
    let mut pairs = Vec::new();
    for s in studies.of(Variant::LcReg) {
        let (dist, reg) = (s.fit_of(Variant::LcDist).entropy_r2(), s.fit_of(Variant::LcReg).entropy_r2());
        checks.check(dist > reg, || format!("LCreg data, seed {}: LCdist R2 {dist:.4} <= LCreg R2 {reg:.4}", s.seed));
        pairs.push(format!("{dist:.3}>{reg:.3}"));
    }
    notes.push(format!("LCdist vs LCreg on LCreg data {}", pairs.join(",")));
    checks.verdict(notes.join("; "))
}

#[test]
fn acceptance_criteria() {
    let started = Instant::now();
    let mut verdicts: Vec<(usize, Verdict)> = Vec::new();
    for (k, f) in [(1, criterion_1 as fn() -> Verdict), (2, criterion_2), (3, criterion_3), (9, criterion_9)] {
        let v = f();
        say(&format!("[criterion {k} computed: {}]", if v.pass { "pass" } else { "fail" }));
        verdicts.push((k, v));
    }
    say(&format!("running population studies at n = {N} ({STUDY_SEEDS} seeds per design)"));
    let studies = run_studies();
    for (k, f) in [(4, criterion_4 as fn(&Studies) -> Verdict), (5, criterion_5), (6, criterion_6), (7, criterion_7), (8, criterion_8)] {
        verdicts.push((k, f(&studies)));
    }
    verdicts.sort_by_key(|(k, _)| *k);

    say(&format!("\nacceptance summary ({:.0} s)", started.elapsed().as_secs_f64()));
    for (k, v) in &verdicts {
        say(&format!("criterion {k}: {} | {}", if v.pass { "PASS" } else { "FAIL" }, v.detail));
    }
    let failed: Vec<usize> = verdicts.iter().filter(|(_, v)| !v.pass).map(|(k, _)| *k).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

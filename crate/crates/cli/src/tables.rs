//! Aligned plain-text report tables.

use std::fmt::Write as _;

use lcmix_core::estimation::Covariance;
use lcmix_core::inference::{
    coefficient_p_value, direct_effects_test, equal_means_test, equal_variances_test, significance_stars,
    WaldResult,
};
use lcmix_core::layout::{ParamKind, ParamLayout};
use lcmix_core::model::item_response_prob;
use lcmix_core::{ModelSpec, Parameters, SlopeConstraint};

/// Minimal column-aligned table: first column left-aligned, the rest right.
#[derive(Debug, Clone, Default)]
pub struct TextTable {
    title: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    notes: Vec<String>,
}

impl TextTable {
    pub fn new(title: impl Into<String>, header: Vec<String>) -> Self {
        TextTable { title: title.into(), header, rows: Vec::new(), notes: Vec::new() }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn render(&self) -> String {
        let cols = self.rows.iter().map(Vec::len).chain([self.header.len()]).max().unwrap_or(0);
        let mut width = vec![0usize; cols];
        for r in std::iter::once(&self.header).chain(&self.rows) {
            for (i, c) in r.iter().enumerate() {
                width[i] = width[i].max(c.chars().count());
            }
        }
        let line = |r: &[String]| {
            let mut s = String::new();
            for (i, w) in width.iter().enumerate() {
                let c = r.get(i).map(String::as_str).unwrap_or("");
                let pad = w - c.chars().count();
                if i == 0 {
                    s.push_str(c);
                    s.push_str(&" ".repeat(pad));
                } else {
                    s.push_str("  ");
                    s.push_str(&" ".repeat(pad));
                    s.push_str(c);
                }
            }
            s.trim_end().to_string()
        };
        let total: usize = width.iter().sum::<usize>() + 2 * cols.saturating_sub(1);
        let mut out = String::new();
        if !self.title.is_empty() {
            let _ = writeln!(out, "{}", self.title);
        }
        let _ = writeln!(out, "{}", line(&self.header));
        let _ = writeln!(out, "{}", "-".repeat(total));
        for r in &self.rows {
            let _ = writeln!(out, "{}", line(r));
        }
        for n in &self.notes {
            let _ = writeln!(out, "{n}");
        }
        out
    }
}

pub fn f4(v: f64) -> String {
    format!("{v:.4}")
}

fn f2(v: f64) -> String {
    format!("{v:.2}")
}

fn starred(value: f64, se: Option<f64>) -> String {
    let stars = se.map_or("", |s| significance_stars(coefficient_p_value(value, s)));
    format!("{}{stars}", f4(value))
}

fn se_cell(se: Option<f64>) -> String {
    se.map_or_else(String::new, |s| format!("({})", f4(s)))
}

/// Everything the tables need about one fitted model.
#[derive(Debug, Clone, Copy)]
pub struct FitView<'a> {
    pub title: &'a str,
    pub spec: &'a ModelSpec,
    pub params: &'a Parameters,
    pub covariance: Option<&'a Covariance>,
    /// Indicator names followed by the external variable's name.
    pub names: &'a [String],
    pub loglik: f64,
    pub bic: f64,
    pub n_params: usize,
    pub entropy_r2: f64,
    pub classification_error: f64,
}

impl FitView<'_> {
    fn se_of(&self, kind: ParamKind) -> Option<f64> {
        let cov = self.covariance?;
        let idx = ParamLayout::new(self.spec).index_of(kind)?;
        Some(cov.get(idx, idx).max(0.0).sqrt())
    }

    fn external_name(&self) -> &str {
        self.names.last().map_or("z", String::as_str)
    }
}

/// Class proportions and the class-specific distribution of the external
/// variable, followed by the fit statistics.
pub fn class_table(view: &FitView<'_>) -> String {
    let s = view.spec.n_classes();
    let mut header = vec![view.title.to_string()];
    header.extend((1..=s).map(|c| format!("Class {c}")));
    let mut t = TextTable::new("", header);
    let props = view.params.class_proportions();
    t.row(std::iter::once("Proportion".to_string()).chain(props.iter().map(|&p| f4(p))).collect());
    if let Some(ext) = &view.params.external {
        let z = view.external_name();
        let mean_se: Vec<Option<f64>> = (0..s).map(|c| view.se_of(ParamKind::Mean { class: c })).collect();
        t.row(
            std::iter::once(format!("Mean of {z}"))
                .chain((0..s).map(|c| starred(ext.mu[c], mean_se[c])))
                .collect(),
        );
        if view.covariance.is_some() {
            t.row(std::iter::once(String::new()).chain(mean_se.iter().map(|&e| se_cell(e))).collect());
        }
        let var_se: Vec<Option<f64>> = (0..s)
            .map(|c| {
                view.se_of(ParamKind::Variance { class: Some(c) })
                    .or_else(|| view.se_of(ParamKind::Variance { class: None }))
            })
            .collect();
        t.row(
            std::iter::once(format!("Variance of {z}"))
                .chain((0..s).map(|c| f4(ext.sigma2[c])))
                .collect(),
        );
        if view.covariance.is_some() {
            t.row(std::iter::once(String::new()).chain(var_se.iter().map(|&e| se_cell(e))).collect());
        }
    }
    t.note(format!(
        "LL {}  BIC {}  #par {}  Entropy R2 {}  Class. error {}",
        f2(view.loglik),
        f2(view.bic),
        view.n_params,
        f4(view.entropy_r2),
        f4(view.classification_error)
    ));
    t.render()
}

fn wald_row(label: &str, w: &WaldResult) -> Vec<String> {
    vec![
        label.to_string(),
        f2(w.statistic),
        w.df.to_string(),
        f4(w.p_value),
        significance_stars(w.p_value).to_string(),
    ]
}

/// Wald(=) tests of equal means and equal variances. Empty when the model
/// has one class, no external density, or no covariance.
pub fn wald_table(view: &FitView<'_>) -> String {
    let Some(cov) = view.covariance else {
        return String::new();
    };
    if view.spec.n_classes() < 2 || !view.spec.variant().models_external() {
        return String::new();
    }
    let mut t = TextTable::new(
        format!("{}: Wald(=) tests", view.title),
        vec!["Test".into(), "Wald".into(), "df".into(), "p-value".into(), String::new()],
    );
    let z = view.external_name();
    if let Ok(w) = equal_means_test(view.spec, view.params, cov) {
        t.row(wald_row(&format!("Equal means of {z}"), &w));
    }
    if let Ok(w) = equal_variances_test(view.spec, view.params, cov) {
        t.row(wald_row(&format!("Equal variances of {z}"), &w));
    }
    t.render()
}

/// Per-item direct effects of the external variable with Wald(0) and
/// Wald(=) tests (coefficients only when there is a single class).
pub fn direct_effects_table(view: &FitView<'_>) -> String {
    if !view.spec.variant().has_direct_effects() {
        return String::new();
    }
    let s = view.spec.n_classes();
    let mut header = vec!["Item".to_string()];
    header.extend((1..=s).map(|c| format!("Class {c}")));
    if s > 1 {
        header.extend(["Wald(0)", "p", "Wald(=)", "p"].map(String::from));
    }
    let mut t = TextTable::new(format!("{}: direct effects of {}", view.title, view.external_name()), header);
    for j in 0..view.spec.n_items() {
        let k = view.spec.cardinalities()[j];
        let name = view.names.get(j).cloned().unwrap_or_else(|| format!("y{}", j + 1));
        let tests = match (view.covariance, view.spec.slope(j)) {
            (Some(cov), SlopeConstraint::Free) if s > 1 => direct_effects_test(view.spec, view.params, cov, j).ok(),
            _ => None,
        };
        for cat in 1..k {
            let label = if k == 2 { name.clone() } else { format!("{name}.{cat}") };
            let mut row = vec![label];
            let mut ses = vec![String::new()];
            for c in 0..s {
                let slope = view.params.items[j].slope(c, cat);
                let kind = match view.spec.slope(j) {
                    SlopeConstraint::Equal => ParamKind::Slope { item: j, class: None, category: cat },
                    _ => ParamKind::Slope { item: j, class: Some(c), category: cat },
                };
                let se = view.se_of(kind);
                row.push(if view.spec.slope(j) == SlopeConstraint::Zero { "0".into() } else { starred(slope, se) });
                ses.push(se_cell(se));
            }
            match (&tests, cat) {
                (Some((zero, eq)), 1) => {
                    row.extend([f2(zero.statistic), f4(zero.p_value), f2(eq.statistic), f4(eq.p_value)]);
                }
                _ if s > 1 => row.extend(std::iter::repeat_n(String::new(), 4)),
                _ => {}
            }
            t.row(row);
            if view.covariance.is_some() {
                t.row(ses);
            }
        }
    }
    t.note("*** p < 0.01, ** p < 0.05, * p < 0.1");
    t.render()
}

/// Category probabilities per class at `z = at` (the profile plot data).
pub fn profile_rows(spec: &ModelSpec, params: &Parameters, names: &[String], at: f64) -> Vec<(String, Vec<f64>)> {
    let mut rows = Vec::new();
    for j in 0..spec.n_items() {
        let k = spec.cardinalities()[j];
        let probs: Vec<Vec<f64>> = (0..spec.n_classes())
            .map(|c| item_response_prob(params, spec, j, c, at).unwrap_or_else(|_| vec![f64::NAN; k]))
            .collect();
        let name = names.get(j).cloned().unwrap_or_else(|| format!("y{}", j + 1));
        for cat in 0..k {
            rows.push((format!("{name}={cat}"), probs.iter().map(|p| p[cat]).collect()));
        }
    }
    rows
}

pub fn profile_table(view: &FitView<'_>, at: f64) -> String {
    let s = view.spec.n_classes();
    let mut header = vec!["Item=category".to_string()];
    header.extend((1..=s).map(|c| format!("Class {c}")));
    let mut t = TextTable::new(
        format!("{}: profile at {} = {}", view.title, view.external_name(), f4(at)),
        header,
    );
    for (label, probs) in profile_rows(view.spec, view.params, view.names, at) {
        t.row(std::iter::once(label).chain(probs.iter().map(|&p| f4(p))).collect());
    }
    t.render()
}

/// Profile data as CSV.
pub fn profile_csv(view: &FitView<'_>, at: f64) -> String {
    let s = view.spec.n_classes();
    let mut out = String::from("item_category");
    for c in 1..=s {
        let _ = write!(out, ",class{c}");
    }
    out.push('\n');
    for (label, probs) in profile_rows(view.spec, view.params, view.names, at) {
        out.push_str(&label);
        for p in probs {
            let _ = write!(out, ",{p}");
        }
        out.push('\n');
    }
    out
}

/// One row of a class-number sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepRow {
    Fitted {
        classes: usize,
        loglik: f64,
        bic: f64,
        n_params: usize,
        entropy_r2: f64,
        classification_error: f64,
        converged: bool,
    },
    Failed {
        classes: usize,
        reason: String,
    },
}

impl SweepRow {
    pub fn classes(&self) -> usize {
        match self {
            SweepRow::Fitted { classes, .. } | SweepRow::Failed { classes, .. } => *classes,
        }
    }

    pub fn bic(&self) -> Option<f64> {
        match self {
            SweepRow::Fitted { bic, .. } => Some(*bic),
            SweepRow::Failed { .. } => None,
        }
    }
}

/// Class count with the smallest BIC among successful fits.
pub fn bic_argmin(rows: &[SweepRow]) -> Option<usize> {
    rows.iter()
        .filter_map(|r| r.bic().map(|b| (r.classes(), b)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(s, _)| s)
}

pub fn bic_table(title: &str, rows: &[SweepRow]) -> String {
    let best = bic_argmin(rows);
    let mut t = TextTable::new(
        title,
        ["S", "LL", "BIC", "#par", "Entropy R2", "Class. err.", ""].map(String::from).to_vec(),
    );
    for r in rows {
        match r {
            SweepRow::Fitted { classes, loglik, bic, n_params, entropy_r2, classification_error, converged } => {
                let mut mark = String::new();
                if Some(*classes) == best {
                    mark.push('*');
                }
                if !converged {
                    mark.push_str(" (not converged)");
                }
                t.row(vec![
                    classes.to_string(),
                    f2(*loglik),
                    f2(*bic),
                    n_params.to_string(),
                    f4(*entropy_r2),
                    f4(*classification_error),
                    mark,
                ]);
            }
            SweepRow::Failed { classes, reason } => {
                t.row(vec![classes.to_string(), "failed".into(), reason.clone()]);
            }
        }
    }
    t.note("* smallest BIC");
    t.render()
}

pub fn ari_table(title: &str, entries: &[(String, f64)]) -> String {
    let mut t = TextTable::new(title, vec!["Comparison".into(), "ARI".into()]);
    for (label, ari) in entries {
        t.row(vec![label.clone(), f4(*ari)]);
    }
    t.render()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_aligns_columns() {
        let mut t = TextTable::new("T", vec!["a".into(), "bb".into()]);
        t.row(vec!["long".into(), "1".into()]);
        let out = t.render();
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[1], "a     bb");
        assert_eq!(lines[3], "long   1");
    }

    #[test]
    fn argmin_skips_failures() {
        let fitted = |classes, bic| SweepRow::Fitted {
            classes,
            loglik: 0.0,
            bic,
            n_params: 1,
            entropy_r2: 0.0,
            classification_error: 0.0,
            converged: true,
        };
        let rows = vec![fitted(1, 10.0), SweepRow::Failed { classes: 2, reason: "x".into() }, fitted(3, 5.0)];
        assert_eq!(bic_argmin(&rows), Some(3));
        assert!(bic_table("t", &rows).contains("failed"));
    }
}

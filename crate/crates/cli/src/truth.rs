//! Plain-text sidecar with the generating design, true parameters and true
//! class labels of a simulated dataset.
//!
//! Each line is `key = value`; lists are comma-separated; `#` starts a
//! comment. Keys:
//!
//! | key | value |
//! |-----|-------|
//! | `generator` | `lcreg`, `lcdist` or `lccw` |
//! | `seed`, `n`, `n_items` | integers |
//! | `mix`, `slopes` | one value per class |
//! | `intercept_magnitude` | real |
//! | `external` | `standard_normal` or `class_normal` |
//! | `external_means`, `external_variance` | class-normal design only |
//! | `theta`, `mu`, `sigma2` | true parameters (the latter two when `z` is modelled) |
//! | `item.<j>.intercepts`, `item.<j>.slopes` | class-major, non-reference categories |
//! | `labels` | true class (1-based) of every row |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use lcmix_core::simulation::{ExternalDesign, StudyDesign};
use lcmix_core::{Parameters, Partition, Variant};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub design: StudyDesign,
    pub seed: u64,
    pub params: Parameters,
    pub labels: Partition,
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",")
}

impl Truth {
    pub fn render(&self) -> String {
        let d = &self.design;
        let mut out = String::from("# true design, parameters and class labels\n");
        let _ = writeln!(out, "generator = {}", d.generator);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "n = {}", d.n);
        let _ = writeln!(out, "n_items = {}", d.n_items);
        let _ = writeln!(out, "mix = {}", join(d.mix.iter().copied()));
        let _ = writeln!(out, "slopes = {}", join(d.slopes.iter().copied()));
        let _ = writeln!(out, "intercept_magnitude = {}", d.intercept_magnitude);
        match &d.external {
            ExternalDesign::StandardNormal => {
                let _ = writeln!(out, "external = standard_normal");
            }
            ExternalDesign::ClassNormal { means, variance } => {
                let _ = writeln!(out, "external = class_normal");
                let _ = writeln!(out, "external_means = {}", join(means.iter().copied()));
                let _ = writeln!(out, "external_variance = {variance}");
            }
        }
        let p = &self.params;
        let _ = writeln!(out, "theta = {}", join(p.theta.iter().copied()));
        if let Some(ext) = &p.external {
            let _ = writeln!(out, "mu = {}", join(ext.mu.iter().copied()));
            let _ = writeln!(out, "sigma2 = {}", join(ext.sigma2.iter().copied()));
        }
        let s = p.n_classes();
        for (j, item) in p.items.iter().enumerate() {
            let k = item.n_categories();
            let b0 = (0..s).flat_map(|c| (1..k).map(move |cat| (c, cat))).map(|(c, cat)| item.intercept(c, cat));
            let b1 = (0..s).flat_map(|c| (1..k).map(move |cat| (c, cat))).map(|(c, cat)| item.slope(c, cat));
            let _ = writeln!(out, "item.{}.intercepts = {}", j + 1, join(b0));
            let _ = writeln!(out, "item.{}.slopes = {}", j + 1, join(b1));
        }
        let labels: Vec<String> = self.labels.labels.iter().map(|l| (l + 1).to_string()).collect();
        let _ = writeln!(out, "labels = {}", labels.join(","));
        out
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.render()).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        text.parse()
            .map_err(|e: CliError| CliError::input(format!("{}: {e}", path.display())))
    }
}

impl std::str::FromStr for Truth {
    type Err = CliError;

    fn from_str(text: &str) -> CliResult<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::input(format!("line {}: expected `key = value`", i + 1)))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |key: &str| map.get(key).ok_or_else(|| CliError::input(format!("missing key `{key}`")));
        let num = |key: &str| -> CliResult<f64> {
            get(key)?.parse().map_err(|_| CliError::input(format!("`{key}` is not a number")))
        };
        let int = |key: &str| -> CliResult<u64> {
            get(key)?.parse().map_err(|_| CliError::input(format!("`{key}` is not an integer")))
        };
        let list = |key: &str| -> CliResult<Vec<f64>> {
            let v = get(key)?;
            if v.is_empty() {
                return Ok(Vec::new());
            }
            v.split(',')
                .map(|s| s.trim().parse().map_err(|_| CliError::input(format!("bad number in `{key}`"))))
                .collect()
        };

        let generator: Variant = get("generator")?.parse()?;
        let external = match get("external")?.as_str() {
            "standard_normal" => ExternalDesign::StandardNormal,
            "class_normal" => ExternalDesign::ClassNormal {
                means: list("external_means")?,
                variance: num("external_variance")?,
            },
            other => return Err(CliError::input(format!("unknown external design `{other}`"))),
        };
        let design = StudyDesign {
            generator,
            n: int("n")? as usize,
            n_items: int("n_items")? as usize,
            mix: list("mix")?,
            external,
            slopes: list("slopes")?,
            intercept_magnitude: num("intercept_magnitude")?,
        };
        design.validate()?;

        let spec = design.spec()?;
        let mut params = Parameters::zeros(&spec);
        params.theta = list("theta")?;
        if let Some(ext) = params.external.as_mut() {
            ext.mu = list("mu")?;
            ext.sigma2 = list("sigma2")?;
        }
        let s = design.n_classes();
        for (j, item) in params.items.iter_mut().enumerate() {
            let k = item.n_categories();
            let b0 = list(&format!("item.{}.intercepts", j + 1))?;
            let b1 = list(&format!("item.{}.slopes", j + 1))?;
            if b0.len() != s * (k - 1) || b1.len() != s * (k - 1) {
                return Err(CliError::input(format!("item {} has the wrong number of coefficients", j + 1)));
            }
            for c in 0..s {
                for cat in 1..k {
                    item.set_intercept(c, cat, b0[c * (k - 1) + cat - 1]);
                    item.set_slope(c, cat, b1[c * (k - 1) + cat - 1]);
                }
            }
        }
        params.validate(&spec)?;

        let labels = get("labels")?
            .split(',')
            .map(|t| match t.trim().parse::<usize>() {
                Ok(l) if (1..=s).contains(&l) => Ok(l - 1),
                _ => Err(CliError::input(format!("bad class label `{t}`"))),
            })
            .collect::<CliResult<Vec<_>>>()?;
        if labels.len() != design.n {
            return Err(CliError::input(format!("{} labels for n = {}", labels.len(), design.n)));
        }
        Ok(Truth {
            design,
            seed: int("seed")?,
            params,
            labels: Partition::new(labels),
        })
    }
}

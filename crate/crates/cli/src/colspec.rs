//! Column specification files.
//!
//! One entry per line, `name = role,type[,options...]`:
//!
//! ```text
//! # comments start with '#'
//! owns_home = indicator,dichotomous,no,yes
//! region    = indicator,nominal(3),north,centre,south
//! wealth    = external,continuous,log
//! id        = ignore
//! ```
//!
//! For categorical columns the options are the category labels in code
//! order; without them the labels are `0..K-1`. For the external column the
//! only option is `log`.

use std::fmt;
use std::str::FromStr;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Indicator,
    External,
    Ignore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnType {
    Dichotomous,
    Nominal(usize),
    Continuous,
}

impl ColumnType {
    pub fn n_categories(self) -> Option<usize> {
        match self {
            ColumnType::Dichotomous => Some(2),
            ColumnType::Nominal(k) => Some(k),
            ColumnType::Continuous => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnDef {
    pub name: String,
    pub role: Role,
    pub kind: ColumnType,
    /// Category labels in code order (categorical columns only).
    pub labels: Vec<String>,
    /// Natural log applied to the external column.
    pub log: bool,
}

impl ColumnDef {
    /// Code of `label`, if it is one of the column's categories.
    pub fn code_of(&self, label: &str) -> Option<u32> {
        self.labels.iter().position(|l| l == label).map(|c| c as u32)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    pub columns: Vec<ColumnDef>,
}

impl ColumnSpec {
    pub fn indicators(&self) -> impl Iterator<Item = &ColumnDef> {
        self.columns.iter().filter(|c| c.role == Role::Indicator)
    }

    pub fn external(&self) -> &ColumnDef {
        self.columns
            .iter()
            .find(|c| c.role == Role::External)
            .expect("validated spec has an external column")
    }

    /// Spec for `n_items` binary indicators `y1..yJ` plus `z`, as written by
    /// the simulator.
    pub fn simulated(n_items: usize) -> Self {
        let mut columns: Vec<ColumnDef> = (1..=n_items)
            .map(|j| ColumnDef {
                name: format!("y{j}"),
                role: Role::Indicator,
                kind: ColumnType::Dichotomous,
                labels: vec!["0".into(), "1".into()],
                log: false,
            })
            .collect();
        columns.push(ColumnDef {
            name: "z".into(),
            role: Role::External,
            kind: ColumnType::Continuous,
            labels: Vec::new(),
            log: false,
        });
        ColumnSpec { columns }
    }

    fn validate(&self) -> CliResult<()> {
        if self.indicators().next().is_none() {
            return Err(CliError::input("column spec declares no indicator"));
        }
        let externals = self.columns.iter().filter(|c| c.role == Role::External).count();
        if externals != 1 {
            return Err(CliError::input(format!(
                "column spec needs exactly one external column, found {externals}"
            )));
        }
        for (i, c) in self.columns.iter().enumerate() {
            if self.columns[..i].iter().any(|d| d.name == c.name) {
                return Err(CliError::input(format!("column `{}` is declared twice", c.name)));
            }
        }
        Ok(())
    }
}

impl FromStr for ColumnSpec {
    type Err = CliError;

    fn from_str(text: &str) -> CliResult<Self> {
        let mut columns = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| CliError::input(format!("column spec line {}: {msg}", lineno + 1));
            let (name, rest) = line
                .split_once('=')
                .ok_or_else(|| at("expected `name = role,type[,...]`".into()))?;
            let name = name.trim();
            if name.is_empty() {
                return Err(at("empty column name".into()));
            }
            let fields: Vec<&str> = rest.split(',').map(str::trim).collect();
            let role = match fields[0].to_ascii_lowercase().as_str() {
                "indicator" => Role::Indicator,
                "external" => Role::External,
                "ignore" => Role::Ignore,
                other => return Err(at(format!("unknown role `{other}`"))),
            };
            let kind = match fields.get(1) {
                Some(t) => parse_type(t).map_err(at)?,
                None if role == Role::Ignore => ColumnType::Continuous,
                None => return Err(at("missing column type".into())),
            };
            let options: Vec<String> = fields.iter().skip(2).map(|s| s.to_string()).collect();
            let mut def = ColumnDef {
                name: name.to_string(),
                role,
                kind,
                labels: Vec::new(),
                log: false,
            };
            match (role, kind) {
                (Role::Indicator, ColumnType::Continuous) => {
                    return Err(at("indicators must be dichotomous or nominal".into()))
                }
                (Role::External, ColumnType::Continuous) => match options.as_slice() {
                    [] => {}
                    [opt] if opt.eq_ignore_ascii_case("log") => def.log = true,
                    _ => return Err(at(format!("unknown external options {options:?}"))),
                },
                (Role::External, _) => return Err(at("the external column must be continuous".into())),
                (Role::Indicator, _) => {
                    let k = kind.n_categories().unwrap_or(0);
                    def.labels = if options.is_empty() {
                        (0..k).map(|c| c.to_string()).collect()
                    } else if options.len() == k {
                        options
                    } else {
                        return Err(at(format!("{k} categories declared but {} labels given", options.len())));
                    };
                    if def.labels.iter().enumerate().any(|(i, l)| def.labels[..i].contains(l)) {
                        return Err(at("duplicate category label".into()));
                    }
                }
                (Role::Ignore, _) => {}
            }
            columns.push(def);
        }
        let spec = ColumnSpec { columns };
        spec.validate()?;
        Ok(spec)
    }
}

fn parse_type(t: &str) -> Result<ColumnType, String> {
    let lower = t.to_ascii_lowercase();
    match lower.as_str() {
        "dichotomous" => return Ok(ColumnType::Dichotomous),
        "continuous" => return Ok(ColumnType::Continuous),
        _ => {}
    }
    let k = lower
        .strip_prefix("nominal(")
        .and_then(|s| s.strip_suffix(')'))
        .and_then(|s| s.trim().parse::<usize>().ok())
        .ok_or_else(|| format!("unknown column type `{t}`"))?;
    if k < 2 {
        return Err(format!("nominal columns need at least 2 categories, got {k}"));
    }
    Ok(ColumnType::Nominal(k))
}

impl fmt::Display for ColumnSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.columns {
            write!(f, "{} = ", c.name)?;
            match c.role {
                Role::Indicator => {
                    let kind = match c.kind {
                        ColumnType::Dichotomous => "dichotomous".to_string(),
                        ColumnType::Nominal(k) => format!("nominal({k})"),
                        ColumnType::Continuous => unreachable!("indicators are categorical"),
                    };
                    writeln!(f, "indicator,{kind},{}", c.labels.join(","))?;
                }
                Role::External => writeln!(f, "external,continuous{}", if c.log { ",log" } else { "" })?,
                Role::Ignore => writeln!(f, "ignore")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_roles() {
        let spec: ColumnSpec = "# toy\nowns = indicator,dichotomous,no,yes\nregion = indicator,nominal(3)\n\
                                wealth = external,continuous,log  # household\nid = ignore\n"
            .parse()
            .unwrap();
        assert_eq!(spec.columns.len(), 4);
        assert_eq!(spec.columns[0].code_of("yes"), Some(1));
        assert_eq!(spec.columns[1].labels, vec!["0", "1", "2"]);
        assert!(spec.external().log);
        assert_eq!(spec.columns[3].role, Role::Ignore);
    }

    #[test]
    fn display_round_trips() {
        let spec = ColumnSpec::simulated(3);
        let again: ColumnSpec = spec.to_string().parse().unwrap();
        assert_eq!(spec, again);
    }

    #[test]
    fn rejects_bad_specs() {
        for bad in [
            "a = indicator,dichotomous\n",
            "z = external,continuous\n",
            "a = indicator,dichotomous,x\nz = external,continuous\n",
            "a = indicator,nominal(1)\nz = external,continuous\n",
            "a = indicator,continuous\nz = external,continuous\n",
            "a = indicator,dichotomous\nz = external,continuous\nw = external,continuous\n",
            "a = predictor,dichotomous\nz = external,continuous\n",
            "a = indicator,dichotomous\na = indicator,dichotomous\nz = external,continuous\n",
        ] {
            assert!(bad.parse::<ColumnSpec>().is_err(), "{bad}");
        }
    }
}

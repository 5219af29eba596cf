//! Loader for `.sps` system files.
//!
//! ```text
//! # comment
//! [system]
//! name = dcmotor
//! n = 1
//! m = 1
//! mu = 0.1
//!
//! [slow]
//! f1 = -6.39*x1 + 6.39*z1^2
//!
//! [fast]
//! g1 = -z1 + u
//!
//! [region]
//! x1 = 0, 2
//! z1 = 0, 2
//!
//! [control]          # optional
//! u1 = 1
//! u2 = 0
//! z_ds1 = 1
//!
//! [metric]           # optional, M as rows separated by ';'
//! slow = 1
//! fast = 1
//! ```
//!
//! `f` entries may use `x*`, `z*` and `u`; `g` entries also `mu`. `u1`,
//! `z_ds*` and `rho` depend on `x*` only, `u2` on `x*` and `z*`. Control
//! entries may also read `mu` as a fixed parameter, see
//! [`LoadedSystem::control_for`].

use std::collections::BTreeMap;
use std::sync::Arc;

use super::ast::{Compiled, Expr};
use super::parser::parse_expr_at;
use super::DslError;
use crate::contraction::Metric;
use crate::error::{Error, Result};
use crate::model::{BoxRegion, ControlLaw, ScalarMap, ScalarMap2, TwoTimescaleSystem, VectorMap};
use crate::numerics::Matrix;

/// Parsed contents of a system file.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemFile {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub mu: f64,
    pub f: Vec<Expr>,
    pub g: Vec<Expr>,
    pub slow_region: BoxRegion,
    pub fast_region: BoxRegion,
    pub u1: Option<Expr>,
    pub u2: Option<Expr>,
    pub z_ds: Option<Vec<Expr>>,
    pub rho: Option<Expr>,
    pub slow_metric: Option<Matrix>,
    pub fast_metric: Option<Matrix>,
}

/// A system file compiled into evaluators.
#[derive(Clone)]
pub struct LoadedSystem {
    pub file: SystemFile,
    pub system: TwoTimescaleSystem,
    pub control: Option<ControlLaw>,
    pub manifold: Option<VectorMap>,
    pub rho: Option<ScalarMap>,
    pub slow_metric: Option<Metric>,
    pub fast_metric: Option<Metric>,
}

impl std::fmt::Debug for LoadedSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LoadedSystem")
            .field("system", &self.system)
            .field("control", &self.control.is_some())
            .field("manifold", &self.manifold.is_some())
            .field("rho", &self.rho.is_some())
            .finish_non_exhaustive()
    }
}

struct Entry {
    value: String,
    line: usize,
    /// Column of the first character of `value`.
    col: usize,
}

const SECTIONS: [&str; 6] = ["system", "slow", "fast", "region", "control", "metric"];

type Sections = BTreeMap<String, (usize, BTreeMap<String, Entry>)>;

fn split_sections(src: &str) -> std::result::Result<Sections, DslError> {
    let mut sections: Sections = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in src.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        let content = match line.find('#') {
            Some(k) => &line[..k],
            None => line,
        };
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return Err(DslError::validation(
                    line_no,
                    "section header must end with ']'",
                ));
            };
            let name = name.trim().to_string();
            if !SECTIONS.contains(&name.as_str()) {
                return Err(DslError::validation(
                    line_no,
                    format!("unknown section [{name}]"),
                ));
            }
            if sections.contains_key(&name) {
                return Err(DslError::validation(
                    line_no,
                    format!("duplicate section [{name}]"),
                ));
            }
            sections.insert(name.clone(), (line_no, BTreeMap::new()));
            current = Some(name);
            continue;
        }
        let Some(eq) = content.find('=') else {
            return Err(DslError::validation(
                line_no,
                "expected 'key = value' or a [section] header",
            ));
        };
        let Some(section) = current.as_ref() else {
            return Err(DslError::validation(
                line_no,
                "entry appears before any [section] header",
            ));
        };
        let key = content[..eq].trim().to_string();
        if key.is_empty() {
            return Err(DslError::validation(line_no, "missing key before '='"));
        }
        let after = &content[eq + 1..];
        let lead = after.len() - after.trim_start().len();
        let col = content[..eq + 1 + lead].chars().count() + 1;
        let value = after.trim().to_string();
        let entries = &mut sections.get_mut(section).expect("section exists").1;
        if entries.contains_key(&key) {
            return Err(DslError::validation(
                line_no,
                format!("duplicate key '{key}' in [{section}]"),
            ));
        }
        entries.insert(
            key,
            Entry {
                value,
                line: line_no,
                col,
            },
        );
    }
    Ok(sections)
}

fn constant(e: &Entry, text: &str, offset: usize) -> std::result::Result<f64, DslError> {
    let expr = parse_expr_at(text, e.line, e.col + offset, &|_| false)?;
    let v = expr.eval_with(&|_| f64::NAN);
    if !v.is_finite() {
        return Err(DslError::validation(
            e.line,
            format!("'{}' is not a finite number", text.trim()),
        ));
    }
    Ok(v)
}

fn integer(e: &Entry, key: &str) -> std::result::Result<usize, DslError> {
    e.value
        .parse::<usize>()
        .ok()
        .filter(|&v| v >= 1)
        .ok_or_else(|| {
            DslError::validation(
                e.line,
                format!("{key} must be a positive integer, got '{}'", e.value),
            )
        })
}

// Splits `s` on `sep`, returning each piece with its character offset.
fn pieces(s: &str, sep: char) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, c) in s.char_indices() {
        if c == sep {
            out.push((s[..start].chars().count(), &s[start..i]));
            start = i + c.len_utf8();
        }
    }
    out.push((s[..start].chars().count(), &s[start..]));
    out
}

fn matrix_literal(e: &Entry, dim: usize, which: &str) -> std::result::Result<Matrix, DslError> {
    let mut data = Vec::new();
    let rows = pieces(&e.value, ';');
    for (roff, row) in &rows {
        let cols = pieces(row, ',');
        if cols.len() != dim {
            return Err(DslError::validation(
                e.line,
                format!(
                    "{which} metric rows must have {dim} entries, found {}",
                    cols.len()
                ),
            ));
        }
        for (coff, cell) in cols {
            data.push(constant(e, cell, roff + coff)?);
        }
    }
    if rows.len() != dim {
        return Err(DslError::validation(
            e.line,
            format!("{which} metric must have {dim} rows, found {}", rows.len()),
        ));
    }
    Matrix::from_row_major(dim, dim, data)
        .map_err(|err| DslError::validation(e.line, err.to_string()))
}

fn indexed(prefix: &str, key: &str) -> Option<usize> {
    let rest = key.strip_prefix(prefix)?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) || rest.starts_with('0') {
        return None;
    }
    rest.parse().ok()
}

/// Parses the text of a system file.
pub fn parse_system_file(src: &str) -> std::result::Result<SystemFile, DslError> {
    let sections = split_sections(src)?;
    for required in ["system", "slow", "fast", "region"] {
        if !sections.contains_key(required) {
            return Err(DslError::MissingSection(required.into()));
        }
    }
    let empty = BTreeMap::new();
    let get = |name: &str| sections.get(name).map(|s| &s.1).unwrap_or(&empty);

    let sys = get("system");
    let sys_line = sections["system"].0;
    let mut name = String::from("system");
    let (mut n, mut m, mut mu) = (None, None, 0.0);
    for (key, e) in sys {
        match key.as_str() {
            "name" => name = e.value.clone(),
            "n" => n = Some(integer(e, "n")?),
            "m" => m = Some(integer(e, "m")?),
            "mu" => {
                mu = constant(e, &e.value, 0)?;
                if !(0.0..=1.0).contains(&mu) {
                    return Err(DslError::validation(
                        e.line,
                        format!("mu = {mu} outside [0, 1]"),
                    ));
                }
            }
            other => {
                return Err(DslError::validation(
                    e.line,
                    format!("unknown key '{other}' in [system]"),
                ))
            }
        }
    }
    let n = n.ok_or_else(|| DslError::validation(sys_line, "[system] is missing n"))?;
    let m = m.ok_or_else(|| DslError::validation(sys_line, "[system] is missing m"))?;

    let is_x = |v: &str| indexed("x", v).is_some_and(|i| i <= n);
    let is_z = |v: &str| indexed("z", v).is_some_and(|i| i <= m);
    let slow_ok = |v: &str| is_x(v) || is_z(v) || v == "u";
    let fast_ok = |v: &str| slow_ok(v) || v == "mu";
    let x_only = |v: &str| is_x(v) || v == "mu";
    let xz = |v: &str| is_x(v) || is_z(v) || v == "mu";

    let vector = |section: &str,
                  prefix: &str,
                  len: usize,
                  dim_name: &str,
                  allowed: &dyn Fn(&str) -> bool| {
        let entries = get(section);
        let mut out: Vec<Option<Expr>> = vec![None; len];
        for (key, e) in entries {
            let Some(i) = indexed(prefix, key) else {
                return Err(DslError::validation(
                    e.line,
                    format!("unknown key '{key}' in [{section}]"),
                ));
            };
            if i > len {
                return Err(DslError::validation(
                    e.line,
                    format!("{key} exceeds {dim_name} = {len}"),
                ));
            }
            out[i - 1] = Some(parse_expr_at(&e.value, e.line, e.col, allowed)?);
        }
        out.into_iter()
            .enumerate()
            .map(|(i, v)| {
                v.ok_or_else(|| {
                    DslError::validation(None, format!("missing {prefix}{} in [{section}]", i + 1))
                })
            })
            .collect::<std::result::Result<Vec<_>, _>>()
    };
    let f = vector("slow", "f", n, "n", &slow_ok)?;
    let g = vector("fast", "g", m, "m", &fast_ok)?;

    let region = get("region");
    let mut x_iv = vec![None; n];
    let mut z_iv = vec![None; m];
    for (key, e) in region {
        let slot = match (indexed("x", key), indexed("z", key)) {
            (Some(i), _) if i <= n => &mut x_iv[i - 1],
            (_, Some(i)) if i <= m => &mut z_iv[i - 1],
            (Some(_), _) => {
                return Err(DslError::validation(
                    e.line,
                    format!("{key} exceeds n = {n}"),
                ))
            }
            (_, Some(_)) => {
                return Err(DslError::validation(
                    e.line,
                    format!("{key} exceeds m = {m}"),
                ))
            }
            _ => {
                return Err(DslError::validation(
                    e.line,
                    format!("unknown key '{key}' in [region]"),
                ))
            }
        };
        let parts = pieces(&e.value, ',');
        if parts.len() != 2 {
            return Err(DslError::validation(
                e.line,
                format!("{key} needs 'lower, upper'"),
            ));
        }
        let lo = constant(e, parts[0].1, parts[0].0)?;
        let hi = constant(e, parts[1].1, parts[1].0)?;
        if lo > hi {
            return Err(DslError::validation(
                e.line,
                format!("{key}: lower bound {lo} exceeds upper bound {hi}"),
            ));
        }
        *slot = Some((lo, hi));
    }
    let collect = |v: Vec<Option<(f64, f64)>>, p: &str| {
        v.into_iter()
            .enumerate()
            .map(|(i, iv)| {
                iv.ok_or_else(|| {
                    DslError::validation(None, format!("missing {p}{} in [region]", i + 1))
                })
            })
            .collect::<std::result::Result<Vec<_>, _>>()
    };
    let to_region = |iv: Vec<(f64, f64)>| {
        BoxRegion::from_intervals(&iv).map_err(|e| DslError::validation(None, e.to_string()))
    };
    let slow_region = to_region(collect(x_iv, "x")?)?;
    let fast_region = to_region(collect(z_iv, "z")?)?;

    let (mut u1, mut u2, mut rho) = (None, None, None);
    let mut z_ds: Vec<Option<Expr>> = vec![None; m];
    let mut any_zds = false;
    for (key, e) in get("control") {
        match key.as_str() {
            "u1" => u1 = Some(parse_expr_at(&e.value, e.line, e.col, &x_only)?),
            "u2" => u2 = Some(parse_expr_at(&e.value, e.line, e.col, &xz)?),
            "rho" => rho = Some(parse_expr_at(&e.value, e.line, e.col, &x_only)?),
            other => match indexed("z_ds", other) {
                Some(i) if i <= m => {
                    z_ds[i - 1] = Some(parse_expr_at(&e.value, e.line, e.col, &x_only)?);
                    any_zds = true;
                }
                Some(_) => {
                    return Err(DslError::validation(
                        e.line,
                        format!("{other} exceeds m = {m}"),
                    ))
                }
                None => {
                    return Err(DslError::validation(
                        e.line,
                        format!("unknown key '{other}' in [control]"),
                    ))
                }
            },
        }
    }
    let z_ds = if any_zds {
        Some(
            z_ds.into_iter()
                .enumerate()
                .map(|(i, v)| {
                    v.ok_or_else(|| {
                        DslError::validation(None, format!("missing z_ds{} in [control]", i + 1))
                    })
                })
                .collect::<std::result::Result<Vec<_>, _>>()?,
        )
    } else {
        None
    };

    let (mut slow_metric, mut fast_metric) = (None, None);
    for (key, e) in get("metric") {
        match key.as_str() {
            "slow" => slow_metric = Some(matrix_literal(e, n, "slow")?),
            "fast" => fast_metric = Some(matrix_literal(e, m, "fast")?),
            other => {
                return Err(DslError::validation(
                    e.line,
                    format!("unknown key '{other}' in [metric]"),
                ))
            }
        }
    }

    Ok(SystemFile {
        name,
        n,
        m,
        mu,
        f,
        g,
        slow_region,
        fast_region,
        u1,
        u2,
        z_ds,
        rho,
        slow_metric,
        fast_metric,
    })
}

fn symbols(n: usize, m: usize, extra: &[&str]) -> Vec<String> {
    (1..=n)
        .map(|i| format!("x{i}"))
        .chain((1..=m).map(|j| format!("z{j}")))
        .chain(extra.iter().map(|s| s.to_string()))
        .collect()
}

fn compile_all(exprs: &[Expr], syms: &[String]) -> Vec<Compiled> {
    exprs
        .iter()
        .map(|e| {
            e.compile(syms)
                .expect("variables were validated at parse time")
        })
        .collect()
}

/// Parses and compiles a system file from text.
pub fn load_system(src: &str) -> Result<LoadedSystem> {
    let file = parse_system_file(src)?;
    let (n, m) = (file.n, file.m);

    let fs = compile_all(&file.f, &symbols(n, m, &["u"]));
    let f = Arc::new(move |x: &[f64], z: &[f64], u: f64| {
        let mut env = Vec::with_capacity(n + m + 1);
        env.extend_from_slice(x);
        env.extend_from_slice(z);
        env.push(u);
        fs.iter().map(|c| c.eval(&env)).collect()
    });
    let gs = compile_all(&file.g, &symbols(n, m, &["u", "mu"]));
    let g = Arc::new(move |x: &[f64], z: &[f64], mu: f64, u: f64| {
        let mut env = Vec::with_capacity(n + m + 2);
        env.extend_from_slice(x);
        env.extend_from_slice(z);
        env.push(u);
        env.push(mu);
        gs.iter().map(|c| c.eval(&env)).collect()
    });
    let system = TwoTimescaleSystem::new(
        file.name.clone(),
        f,
        g,
        file.mu,
        file.slow_region.clone(),
        file.fast_region.clone(),
    )?;

    let control = build_control(&file, file.mu);
    let manifold = build_manifold(&file, file.mu);
    let rho: Option<ScalarMap> = file.rho.as_ref().map(|e| {
        let c = e.compile(&symbols(n, 0, &["mu"])).expect("validated");
        let mu = file.mu;
        Arc::new(move |x: &[f64]| {
            let mut env = x.to_vec();
            env.push(mu);
            c.eval(&env)
        }) as ScalarMap
    });
    let metric = |mm: &Option<Matrix>, which: &str| -> Result<Option<Metric>> {
        mm.as_ref()
            .map(|mat| {
                Metric::from_m(mat).map_err(|e| {
                    Error::Dsl(DslError::validation(
                        None,
                        format!("{which} metric is not positive definite: {e}"),
                    ))
                })
            })
            .transpose()
    };
    let slow_metric = metric(&file.slow_metric, "slow")?;
    let fast_metric = metric(&file.fast_metric, "fast")?;
    Ok(LoadedSystem {
        file,
        system,
        control,
        manifold,
        rho,
        slow_metric,
        fast_metric,
    })
}

fn build_control(file: &SystemFile, mu: f64) -> Option<ControlLaw> {
    if file.u1.is_none() && file.u2.is_none() {
        return None;
    }
    let (n, m) = (file.n, file.m);
    let u1c = file
        .u1
        .as_ref()
        .map(|e| e.compile(&symbols(n, 0, &["mu"])).expect("validated"));
    let u2c = file
        .u2
        .as_ref()
        .map(|e| e.compile(&symbols(n, m, &["mu"])).expect("validated"));
    let u1: ScalarMap = Arc::new(move |x: &[f64]| {
        u1c.as_ref().map_or(0.0, |c| {
            let mut env = Vec::with_capacity(x.len() + 1);
            env.extend_from_slice(x);
            env.push(mu);
            c.eval(&env)
        })
    });
    let u2: ScalarMap2 = Arc::new(move |x: &[f64], z: &[f64]| {
        u2c.as_ref().map_or(0.0, |c| {
            let mut env = Vec::with_capacity(x.len() + z.len() + 1);
            env.extend_from_slice(x);
            env.extend_from_slice(z);
            env.push(mu);
            c.eval(&env)
        })
    });
    Some(ControlLaw::new(u1, u2))
}

fn build_manifold(file: &SystemFile, mu: f64) -> Option<VectorMap> {
    file.z_ds.as_ref().map(|v| {
        let cs = compile_all(v, &symbols(file.n, 0, &["mu"]));
        Arc::new(move |x: &[f64]| {
            let mut env = x.to_vec();
            env.push(mu);
            cs.iter().map(|c| c.eval(&env)).collect()
        }) as VectorMap
    })
}

impl LoadedSystem {
    /// Control law and manifold with `mu` in the control entries bound to
    /// the given value instead of the file's.
    pub fn control_for(&self, mu: f64) -> (Option<ControlLaw>, Option<VectorMap>) {
        (
            build_control(&self.file, mu),
            build_manifold(&self.file, mu),
        )
    }
}

pub fn load_system_path(path: &std::path::Path) -> Result<LoadedSystem> {
    let src = std::fs::read_to_string(path).map_err(|e| DslError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    load_system(&src)
}

//! Parameter sweeps over one configuration variable.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use cocrn_core::model::{config_from_kv, ConfigError, KeyValues, Protocol, Sensing};
use cocrn_core::performance::{
    optimal_q, stability_check, su_throughput_aux, su_throughput_bound, DEFAULT_Q_STEP,
};
use cocrn_core::protocols::pu_throughput;
use cocrn_core::{Result, SystemConfig};

use crate::format::{sig12, sig12_short};

pub const CSV_HEADER: &str = "variable,value,protocol,sensing,mu_P,mu_S,mu_S_aux,stable";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepVariable {
    L,
    Q,
    PS,
    LambdaP,
}

impl SweepVariable {
    /// Configuration key of the variable.
    pub fn key(self) -> &'static str {
        match self {
            SweepVariable::L => "L",
            SweepVariable::Q => "q",
            SweepVariable::PS => "P_S",
            SweepVariable::LambdaP => "lambda_P",
        }
    }

    fn check(self, v: f64) -> std::result::Result<(), String> {
        let ok = match self {
            SweepVariable::L => v >= 1.0 && v.fract() == 0.0 && v <= 64.0,
            SweepVariable::Q | SweepVariable::LambdaP => (0.0..=1.0).contains(&v),
            SweepVariable::PS => v > 0.0 && v.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(format!("value {v} out of range for {}", self.key()))
        }
    }

    fn apply(self, cfg: &mut SystemConfig, v: f64) {
        match self {
            SweepVariable::L => cfg.su_count = v as usize,
            SweepVariable::Q => cfg.q = v,
            SweepVariable::PS => cfg.su_power = v,
            SweepVariable::LambdaP => cfg.lambda_p = v,
        }
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for SweepVariable {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "L" => Ok(SweepVariable::L),
            "q" => Ok(SweepVariable::Q),
            "P_S" => Ok(SweepVariable::PS),
            "lambda_P" => Ok(SweepVariable::LambdaP),
            other => Err(format!(
                "unknown sweep variable `{other}` (expected L, q, P_S or lambda_P)"
            )),
        }
    }
}

/// A parsed sweep-spec file.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub fixed: SystemConfig,
    pub protocols: Vec<Protocol>,
    pub sensing_modes: Vec<Sensing>,
    /// Replace `q` by its grid optimum in every cell.
    pub optimize_q: bool,
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub variable: SweepVariable,
    pub value: f64,
    pub protocol: Protocol,
    pub sensing: Sensing,
    pub mu_p: f64,
    pub mu_s: f64,
    pub mu_s_aux: f64,
    pub stable: bool,
}

/// Expands one `sweep.values` item: a number, `a:b:n` (n evenly spaced points
/// from a to b) or `log:a:b:n` (geometric spacing).
fn expand_item(item: &str) -> std::result::Result<Vec<f64>, String> {
    let num = |s: &str| -> std::result::Result<f64, String> {
        s.trim()
            .parse::<f64>()
            .map_err(|e| format!("bad number `{s}`: {e}"))
    };
    let count = |s: &str| -> std::result::Result<usize, String> {
        match s.trim().parse::<usize>() {
            Ok(n) if n >= 2 => Ok(n),
            _ => Err(format!("bad point count `{s}` (need an integer >= 2)")),
        }
    };
    let parts: Vec<&str> = item.split(':').collect();
    match parts.as_slice() {
        [x] => Ok(vec![num(x)?]),
        [a, b, n] => {
            let (a, b, n) = (num(a)?, num(b)?, count(n)?);
            Ok((0..n)
                .map(|i| {
                    if i + 1 == n {
                        b
                    } else {
                        a + (b - a) * i as f64 / (n - 1) as f64
                    }
                })
                .collect())
        }
        ["log", a, b, n] => {
            let (a, b, n) = (num(a)?, num(b)?, count(n)?);
            if !(a > 0.0 && b > 0.0) {
                return Err("log spacing needs positive endpoints".into());
            }
            let (la, lb) = (a.ln(), b.ln());
            Ok((0..n)
                .map(|i| match i {
                    0 => a,
                    _ if i + 1 == n => b,
                    _ => (la + (lb - la) * i as f64 / (n - 1) as f64).exp(),
                })
                .collect())
        }
        _ => Err(format!("cannot parse value item `{item}`")),
    }
}

fn list<T: FromStr>(
    kv: &mut KeyValues,
    key: &str,
) -> std::result::Result<Option<(usize, Vec<T>)>, ConfigError>
where
    T::Err: fmt::Display,
{
    let Some((line, raw)) = kv.take(key) else {
        return Ok(None);
    };
    let mut out = Vec::new();
    for item in raw.split(',') {
        let item = item.trim();
        if item.is_empty() {
            return Err(ConfigError {
                line: Some(line),
                message: format!("empty item in `{key}`"),
            });
        }
        out.push(item.parse::<T>().map_err(|e| ConfigError {
            line: Some(line),
            message: format!("bad item `{item}` in `{key}`: {e}"),
        })?);
    }
    Ok(Some((line, out)))
}

impl SweepSpec {
    /// Parses a sweep spec: configuration keys plus `sweep.variable`,
    /// `sweep.values`, `sweep.protocols`, `sweep.sensing` and optionally
    /// `sweep.optimize_q`. The swept key, `protocol` and `sensing` may be
    /// omitted from the fixed part.
    pub fn parse(text: &str) -> std::result::Result<Self, ConfigError> {
        let mut kv = KeyValues::parse(text)?;
        let global = |m: String| ConfigError {
            line: None,
            message: m,
        };
        let variable: SweepVariable = kv.require("sweep.variable")?;
        let (values_line, raw_values) = kv
            .take("sweep.values")
            .ok_or_else(|| global("missing required key `sweep.values`".into()))?;
        let at = |m: String| ConfigError {
            line: Some(values_line),
            message: m,
        };
        let mut values = Vec::new();
        for item in raw_values.split(',') {
            let item = item.trim();
            if item.is_empty() {
                return Err(at("empty item in `sweep.values`".into()));
            }
            for v in expand_item(item).map_err(at)? {
                variable.check(v).map_err(at)?;
                values.push(v);
            }
        }
        let protocols = list::<Protocol>(&mut kv, "sweep.protocols")?;
        let sensing = list::<Sensing>(&mut kv, "sweep.sensing")?;
        let optimize_q = kv.take_parsed::<bool>("sweep.optimize_q")?.unwrap_or(false);

        for (key, given) in [
            ("protocol", protocols.as_ref().map(|(l, _)| *l)),
            ("sensing", sensing.as_ref().map(|(l, _)| *l)),
        ] {
            if let (true, Some(line)) = (kv.contains(key), given) {
                return Err(ConfigError {
                    line: Some(line),
                    message: format!("`{key}` is swept; remove the fixed `{key}` key"),
                });
            }
        }
        // Placeholders keep the fixed-config parser happy; cells overwrite them.
        if protocols.is_some() {
            kv.insert("protocol", "ARC");
        }
        if sensing.is_some() {
            kv.insert("sensing", "IS");
        }
        if !kv.contains(variable.key()) {
            kv.insert(variable.key(), &values[0].to_string());
        }
        let loaded = config_from_kv(&mut kv)?;
        kv.finish()?;
        let fixed = loaded.config;
        let protocols = protocols.map_or_else(|| vec![fixed.protocol], |(_, v)| v);
        let sensing_modes = sensing.map_or_else(|| vec![fixed.sensing], |(_, v)| v);
        Ok(Self {
            variable,
            values,
            fixed,
            protocols,
            sensing_modes,
            optimize_q,
        })
    }

    /// Cells in output order: values, then protocols, then sensing modes.
    pub fn cells(&self) -> Vec<(f64, Protocol, Sensing)> {
        let mut out = Vec::new();
        for &v in &self.values {
            for &p in &self.protocols {
                for &s in &self.sensing_modes {
                    out.push((v, p, s));
                }
            }
        }
        out
    }
}

fn evaluate(
    spec: &SweepSpec,
    value: f64,
    protocol: Protocol,
    sensing: Sensing,
) -> Result<SweepRow> {
    let mut cfg = spec.fixed.with_protocol(protocol).with_sensing(sensing);
    spec.variable.apply(&mut cfg, value);
    cfg.validate()?;
    if spec.optimize_q {
        cfg.q = optimal_q(&cfg, DEFAULT_Q_STEP)?.0;
    }
    let mu_p = pu_throughput(&cfg)?;
    Ok(SweepRow {
        variable: spec.variable,
        value,
        protocol,
        sensing,
        mu_p,
        mu_s: su_throughput_bound(&cfg, mu_p),
        mu_s_aux: su_throughput_aux(&cfg)?,
        stable: stability_check(cfg.lambda_p, mu_p),
    })
}

/// Evaluates every cell (in parallel) and returns rows in spec order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.cells()
        .into_par_iter()
        .map(|(v, p, s)| evaluate(spec, v, p, s))
        .collect()
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let value = match r.variable {
            SweepVariable::L => format!("{}", r.value as usize),
            _ => sig12_short(r.value),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.variable,
            value,
            r.protocol,
            r.sensing,
            sig12(r.mu_p),
            sig12(r.mu_s),
            sig12(r.mu_s_aux),
            r.stable
        ));
    }
    out
}

//! System parameters shared by the analytic modules, the simulator and the CLI.
//!
//! Channel variances are held in linear scale; decibels only appear when a
//! configuration is read from or written to text.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocols::fuse_majority;
use crate::scalar::Real;

/// Converts decibels to a linear power ratio.
pub fn db_to_linear<T: Real>(x_db: T) -> T {
    T::lit(10.0).powf(x_db / T::lit(10.0))
}

pub fn linear_to_db<T: Real>(x: T) -> T {
    T::lit(10.0) * x.log10()
}

/// How secondary users decide whether the primary is on the air.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sensing {
    /// Each SU decides from its own detector.
    #[serde(rename = "IS")]
    Individual,
    /// Decisions are fused and shared by all SUs.
    #[serde(rename = "CS")]
    Cooperative,
    /// Ideal detector: `p_d = 1`, `p_f = 0`, evaluated through the individual path.
    #[serde(rename = "perfect")]
    Perfect,
}

impl Sensing {
    pub const ALL: [Sensing; 3] = [Sensing::Individual, Sensing::Cooperative, Sensing::Perfect];

    pub fn label(self) -> &'static str {
        match self {
            Sensing::Individual => "IS",
            Sensing::Cooperative => "CS",
            Sensing::Perfect => "perfect",
        }
    }
}

impl fmt::Display for Sensing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Sensing {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "IS" | "is" => Ok(Sensing::Individual),
            "CS" | "cs" => Ok(Sensing::Cooperative),
            "perfect" | "PERFECT" | "PS" => Ok(Sensing::Perfect),
            other => Err(format!(
                "unknown sensing mode `{other}` (expected IS, CS or perfect)"
            )),
        }
    }
}

/// Cooperation protocol run by the secondary network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    /// All SUs holding the failed packet join every retransmission.
    #[serde(rename = "ARC")]
    AllRelay,
    /// The strongest holder is re-selected on every retransmission.
    #[serde(rename = "RBRC")]
    RecurrentBestRelay,
    /// The strongest holder is selected once; the rest discard the packet.
    #[serde(rename = "NRBRC")]
    NonRecurrentBestRelay,
    /// Plain ARQ without SU assistance.
    #[serde(rename = "NC")]
    NoCooperation,
}

impl Protocol {
    pub const ALL: [Protocol; 4] = [
        Protocol::AllRelay,
        Protocol::RecurrentBestRelay,
        Protocol::NonRecurrentBestRelay,
        Protocol::NoCooperation,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Protocol::AllRelay => "ARC",
            Protocol::RecurrentBestRelay => "RBRC",
            Protocol::NonRecurrentBestRelay => "NRBRC",
            Protocol::NoCooperation => "NC",
        }
    }

    pub fn uses_best_relay(self) -> bool {
        matches!(
            self,
            Protocol::RecurrentBestRelay | Protocol::NonRecurrentBestRelay
        )
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().replace('-', "").as_str() {
            "ARC" => Ok(Protocol::AllRelay),
            "RBRC" => Ok(Protocol::RecurrentBestRelay),
            "NRBRC" => Ok(Protocol::NonRecurrentBestRelay),
            "NC" => Ok(Protocol::NoCooperation),
            _ => Err(format!(
                "unknown protocol `{}` (expected ARC, RBRC, NRBRC or NC)",
                s.trim()
            )),
        }
    }
}

/// Average power gains (linear) of the six link classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelProfile<T> {
    /// PU source to PU destination.
    pub sigma_pd2: T,
    /// PU source to SU destinations. Only the simulator consumes it.
    pub sigma_pr2: T,
    /// PU source to SU sources.
    pub sigma_ps2: T,
    /// SU sources to SU destinations.
    pub sigma_sr2: T,
    /// SU sources to the PU destination.
    pub sigma_sd2: T,
    /// SU source to other SU sources.
    pub sigma_ss2: T,
}

impl<T: Real> ChannelProfile<T> {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("sigma_PD2", self.sigma_pd2),
            ("sigma_PR2", self.sigma_pr2),
            ("sigma_PS2", self.sigma_ps2),
            ("sigma_SR2", self.sigma_sr2),
            ("sigma_SD2", self.sigma_sd2),
            ("sigma_SS2", self.sigma_ss2),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v > T::zero()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Full parameter set of one network scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig<T> {
    /// Number of secondary users `L`.
    pub su_count: usize,
    /// PU transmit power (W).
    pub pu_power: T,
    /// SU transmit power (W).
    pub su_power: T,
    /// Noise power (W).
    pub noise_power: T,
    pub channels: ChannelProfile<T>,
    /// SINR threshold.
    pub beta: T,
    /// Per-SU detection probability.
    pub p_d: T,
    /// Per-SU false-alarm probability.
    pub p_f: T,
    /// SU transmission probability in slots sensed idle.
    pub q: T,
    /// PU packet arrival rate (packets/slot).
    pub lambda_p: T,
    pub sensing: Sensing,
    pub protocol: Protocol,
    /// Fused detection probability override for cooperative sensing.
    pub p_d_star: Option<T>,
    /// Fused false-alarm probability override for cooperative sensing.
    pub p_f_star: Option<T>,
}

impl<T: Real> SystemConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.su_count < 1 {
            return Err(Error::InvalidConfig("L must be at least 1".into()));
        }
        let positive = [
            ("P_P", self.pu_power),
            ("P_S", self.su_power),
            ("sigma_N2", self.noise_power),
            ("beta", self.beta),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > T::zero()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and strictly positive, got {v}"
                )));
            }
        }
        let mut probs = vec![
            ("p_d", self.p_d),
            ("p_f", self.p_f),
            ("q", self.q),
            ("lambda_P", self.lambda_p),
        ];
        if let Some(v) = self.p_d_star {
            probs.push(("p_d_star", v));
        }
        if let Some(v) = self.p_f_star {
            probs.push(("p_f_star", v));
        }
        for (name, v) in probs {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        self.channels.validate()
    }

    /// Detection and false-alarm probabilities the analysis actually uses for
    /// the configured sensing mode: the per-SU pair for individual sensing,
    /// the fused pair (majority rule unless overridden) for cooperative
    /// sensing, and `(1, 0)` for perfect sensing.
    pub fn effective_sensing(&self) -> (T, T) {
        match self.sensing {
            Sensing::Individual => (self.p_d, self.p_f),
            Sensing::Cooperative => (
                self.p_d_star
                    .unwrap_or_else(|| fuse_majority(self.p_d, self.su_count)),
                self.p_f_star
                    .unwrap_or_else(|| fuse_majority(self.p_f, self.su_count)),
            ),
            Sensing::Perfect => (T::one(), T::zero()),
        }
    }

    /// `c = β·σ_N²`, the noise term after moving the threshold across.
    pub fn noise_threshold(&self) -> T {
        self.beta * self.noise_power
    }

    /// Interference-to-signal scale `β·P_S·σ_SD² / (P_P·σ_PD²)`.
    pub fn interference_scale(&self) -> T {
        self.beta * self.su_power * self.channels.sigma_sd2
            / (self.pu_power * self.channels.sigma_pd2)
    }

    pub fn with_protocol(mut self, protocol: Protocol) -> Self {
        self.protocol = protocol;
        self
    }

    pub fn with_sensing(mut self, sensing: Sensing) -> Self {
        self.sensing = sensing;
        self
    }

    pub fn with_su_count(mut self, l: usize) -> Self {
        self.su_count = l;
        self
    }

    pub fn with_q(mut self, q: T) -> Self {
        self.q = q;
        self
    }

    pub fn with_lambda(mut self, lambda_p: T) -> Self {
        self.lambda_p = lambda_p;
        self
    }
}

/// Baseline scenario of the numerical study: `P_P = P_S = σ_N² = 0.1 W`,
/// `σ_PD² = −13 dB`, `σ_PR² = 0 dB`, `σ_PS² = σ_SR² = σ_SD² = −10 dB`,
/// `β = 0.1`, `p_d = 0.8`, `p_f = 0.1`.
///
/// `σ_SS²` is not part of that baseline and is set to −10 dB like the other
/// SU-side links. `L`, `q` and `λ_P` are placeholders (`4`, `0.7`, `0.1`);
/// callers set them per experiment.
pub fn default_config<T: Real>() -> SystemConfig<T> {
    let db = |x: f64| db_to_linear(T::lit(x));
    SystemConfig {
        su_count: 4,
        pu_power: T::lit(0.1),
        su_power: T::lit(0.1),
        noise_power: T::lit(0.1),
        channels: ChannelProfile {
            sigma_pd2: db(-13.0),
            sigma_pr2: db(0.0),
            sigma_ps2: db(-10.0),
            sigma_sr2: db(-10.0),
            sigma_sd2: db(-10.0),
            sigma_ss2: db(DEFAULT_SIGMA_SS2_DB),
        },
        beta: T::lit(0.1),
        p_d: T::lit(0.8),
        p_f: T::lit(0.1),
        q: T::lit(0.7),
        lambda_p: T::lit(0.1),
        sensing: Sensing::Individual,
        protocol: Protocol::AllRelay,
        p_d_star: None,
        p_f_star: None,
    }
}

pub const DEFAULT_SIGMA_SS2_DB: f64 = -10.0;

/// Outcome / report of one analytic evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport<T> {
    #[serde(rename = "mu_P")]
    pub mu_p: T,
    #[serde(rename = "mu_S_bound")]
    pub mu_s_bound: T,
    pub stable: bool,
    #[serde(rename = "D_P", skip_serializing_if = "Option::is_none", default)]
    pub d_p: Option<T>,
    #[serde(rename = "q_star", skip_serializing_if = "Option::is_none", default)]
    pub q_star: Option<T>,
}

// ---------------------------------------------------------------------------
// Text configuration
// ---------------------------------------------------------------------------

/// Error from reading a key-value configuration, carrying the offending line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            message: message.into(),
        }
    }

    fn global(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Flat `key = value` file. `#` starts a comment; blank lines are ignored.
#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> std::result::Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::at(
                    line_no,
                    format!("expected `key = value`, got `{line}`"),
                ));
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(ConfigError::at(line_no, "empty key"));
            }
            if value.is_empty() {
                return Err(ConfigError::at(line_no, format!("empty value for `{key}`")));
            }
            if let Some((first, _)) = entries.get(key) {
                return Err(ConfigError::at(
                    line_no,
                    format!("duplicate key `{key}` (first set on line {first})"),
                ));
            }
            entries.insert(key.to_string(), (line_no, value.to_string()));
        }
        Ok(Self { entries })
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn insert(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), (0, value.to_string()));
    }

    /// Removes and returns `(line, value)` for `key`.
    pub fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    pub fn take_parsed<V: FromStr>(
        &mut self,
        key: &str,
    ) -> std::result::Result<Option<V>, ConfigError>
    where
        V::Err: fmt::Display,
    {
        match self.take(key) {
            None => Ok(None),
            Some((line, raw)) => raw
                .parse::<V>()
                .map(Some)
                .map_err(|e| ConfigError::at(line, format!("bad value `{raw}` for `{key}`: {e}"))),
        }
    }

    pub fn require<V: FromStr>(&mut self, key: &str) -> std::result::Result<V, ConfigError>
    where
        V::Err: fmt::Display,
    {
        self.take_parsed(key)?
            .ok_or_else(|| ConfigError::global(format!("missing required key `{key}`")))
    }

    /// Fails on the first key nobody consumed.
    pub fn finish(self) -> std::result::Result<(), ConfigError> {
        match self.entries.iter().min_by_key(|(_, (line, _))| *line) {
            None => Ok(()),
            Some((key, (line, _))) => Err(ConfigError::at(*line, format!("unknown key `{key}`"))),
        }
    }
}

/// A configuration read from text, with the keys that fell back to defaults.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: SystemConfig<f64>,
    pub defaulted: Vec<&'static str>,
}

/// Keys accepted in a configuration file.
pub const CONFIG_KEYS: [&str; 19] = [
    "L",
    "P_P",
    "P_S",
    "sigma_N2",
    "sigma_PD2_db",
    "sigma_PR2_db",
    "sigma_PS2_db",
    "sigma_SR2_db",
    "sigma_SD2_db",
    "sigma_SS2_db",
    "beta",
    "p_d",
    "p_f",
    "q",
    "lambda_P",
    "sensing",
    "protocol",
    "p_d_star",
    "p_f_star",
];

/// Builds a configuration by consuming the config keys from `kv`; leaves any
/// other keys in place for the caller.
pub fn config_from_kv(kv: &mut KeyValues) -> std::result::Result<LoadedConfig, ConfigError> {
    let mut defaulted = Vec::new();
    let db = |kv: &mut KeyValues, key: &str| -> std::result::Result<f64, ConfigError> {
        kv.require::<f64>(key).map(db_to_linear)
    };
    let su_count: usize = kv.require("L")?;
    let pu_power = kv.require("P_P")?;
    let su_power = kv.require("P_S")?;
    let noise_power = kv.require("sigma_N2")?;
    let channels = ChannelProfile {
        sigma_pd2: db(kv, "sigma_PD2_db")?,
        sigma_pr2: db(kv, "sigma_PR2_db")?,
        sigma_ps2: db(kv, "sigma_PS2_db")?,
        sigma_sr2: db(kv, "sigma_SR2_db")?,
        sigma_sd2: db(kv, "sigma_SD2_db")?,
        sigma_ss2: match kv.take_parsed::<f64>("sigma_SS2_db")? {
            Some(v) => db_to_linear(v),
            None => {
                defaulted.push("sigma_SS2_db");
                db_to_linear(DEFAULT_SIGMA_SS2_DB)
            }
        },
    };
    let config = SystemConfig {
        su_count,
        pu_power,
        su_power,
        noise_power,
        channels,
        beta: kv.require("beta")?,
        p_d: kv.require("p_d")?,
        p_f: kv.require("p_f")?,
        q: kv.require("q")?,
        lambda_p: kv.require("lambda_P")?,
        sensing: kv.require("sensing")?,
        protocol: kv.require("protocol")?,
        p_d_star: kv.take_parsed("p_d_star")?,
        p_f_star: kv.take_parsed("p_f_star")?,
    };
    config
        .validate()
        .map_err(|e| ConfigError::global(e.to_string()))?;
    Ok(LoadedConfig { config, defaulted })
}

/// Parses a complete configuration file; unknown keys are rejected.
pub fn parse_config(text: &str) -> std::result::Result<LoadedConfig, ConfigError> {
    let mut kv = KeyValues::parse(text)?;
    let loaded = config_from_kv(&mut kv)?;
    kv.finish()?;
    Ok(loaded)
}

/// Renders a configuration in the file format accepted by [`parse_config`].
pub fn render_config(cfg: &SystemConfig<f64>) -> String {
    let c = &cfg.channels;
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    line("L", cfg.su_count.to_string());
    line("P_P", cfg.pu_power.to_string());
    line("P_S", cfg.su_power.to_string());
    line("sigma_N2", cfg.noise_power.to_string());
    line("sigma_PD2_db", linear_to_db(c.sigma_pd2).to_string());
    line("sigma_PR2_db", linear_to_db(c.sigma_pr2).to_string());
    line("sigma_PS2_db", linear_to_db(c.sigma_ps2).to_string());
    line("sigma_SR2_db", linear_to_db(c.sigma_sr2).to_string());
    line("sigma_SD2_db", linear_to_db(c.sigma_sd2).to_string());
    line("sigma_SS2_db", linear_to_db(c.sigma_ss2).to_string());
    line("beta", cfg.beta.to_string());
    line("p_d", cfg.p_d.to_string());
    line("p_f", cfg.p_f.to_string());
    line("q", cfg.q.to_string());
    line("lambda_P", cfg.lambda_p.to_string());
    line("sensing", cfg.sensing.to_string());
    line("protocol", cfg.protocol.to_string());
    if let Some(v) = cfg.p_d_star {
        line("p_d_star", v.to_string());
    }
    if let Some(v) = cfg.p_f_star {
        line("p_f_star", v.to_string());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn db_conversion_examples() {
        assert_eq!(db_to_linear(0.0_f64), 1.0);
        assert!((db_to_linear(-10.0_f64) - 0.1).abs() < 1e-15);
        assert!((db_to_linear(-13.0_f64) - 0.050_118_723_362_727_22).abs() < 1e-15);
    }

    #[test]
    fn db_round_trip() {
        let mut x = 1e-6_f64;
        while x <= 1e6 {
            let back = db_to_linear(linear_to_db(x));
            assert!(((back - x) / x).abs() < 1e-12, "{x} -> {back}");
            x *= 1.37;
        }
    }

    #[test]
    fn default_config_matches_baseline() {
        let cfg = default_config::<f64>();
        cfg.validate().unwrap();
        assert_eq!(cfg.beta, 0.1);
        assert_eq!(cfg.p_d, 0.8);
        assert_eq!(cfg.p_f, 0.1);
        assert!((cfg.channels.sigma_pd2 - 0.050_118_7).abs() < 1e-7);
        assert!((cfg.channels.sigma_pr2 - 1.0).abs() < 1e-15);
        assert!((cfg.channels.sigma_ss2 - 0.1).abs() < 1e-15);
        let f32cfg = default_config::<f32>();
        f32cfg.validate().unwrap();
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut cfg = default_config::<f64>();
        cfg.p_d = 1.2;
        assert!(cfg.validate().is_err());
        let mut cfg = default_config::<f64>();
        cfg.su_count = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = default_config::<f64>();
        cfg.channels.sigma_ss2 = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = default_config::<f64>();
        cfg.beta = -0.1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn effective_sensing_modes() {
        let cfg = default_config::<f64>().with_su_count(3);
        assert_eq!(cfg.effective_sensing(), (0.8, 0.1));
        let cs = cfg.with_sensing(Sensing::Cooperative).effective_sensing();
        assert!((cs.0 - 0.896).abs() < 1e-12);
        assert!((cs.1 - 0.028).abs() < 1e-12);
        let mut over = cfg.with_sensing(Sensing::Cooperative);
        over.p_d_star = Some(0.99);
        assert_eq!(over.effective_sensing().0, 0.99);
        assert_eq!(
            cfg.with_sensing(Sensing::Perfect).effective_sensing(),
            (1.0, 0.0)
        );
    }

    #[test]
    fn config_text_round_trip() {
        let cfg = default_config::<f64>();
        let text = render_config(&cfg);
        let back = parse_config(&text).unwrap();
        assert!(back.defaulted.is_empty());
        let b = back.config;
        assert_eq!(b.su_count, cfg.su_count);
        assert_eq!(b.protocol, cfg.protocol);
        assert!((b.channels.sigma_pd2 - cfg.channels.sigma_pd2).abs() < 1e-15);
    }

    #[test]
    fn config_errors_carry_lines() {
        let text = render_config(&default_config::<f64>());
        let missing: String = text
            .lines()
            .filter(|l| !l.starts_with("beta"))
            .map(|l| format!("{l}\n"))
            .collect();
        let err = parse_config(&missing).unwrap_err();
        assert!(err.message.contains("beta"), "{err}");

        let unknown = format!("{text}bogus = 3\n");
        let err = parse_config(&unknown).unwrap_err();
        assert_eq!(err.line, Some(text.lines().count() + 1));

        let garbage = format!("{text}not a pair\n");
        assert!(parse_config(&garbage).unwrap_err().line.is_some());

        let dup = format!("{text}q = 0.5\n");
        assert!(parse_config(&dup)
            .unwrap_err()
            .message
            .contains("duplicate"));
    }

    #[test]
    fn sigma_ss2_defaults_are_reported() {
        let text: String = render_config(&default_config::<f64>())
            .lines()
            .filter(|l| !l.starts_with("sigma_SS2_db"))
            .map(|l| format!("{l}\n"))
            .collect();
        let loaded = parse_config(&text).unwrap();
        assert_eq!(loaded.defaulted, vec!["sigma_SS2_db"]);
        assert!((loaded.config.channels.sigma_ss2 - 0.1).abs() < 1e-15);
    }
}

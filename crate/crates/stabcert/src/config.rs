//! Run configuration: a flat `key = value` text format with typed extraction,
//! strict unknown-key rejection, and round-trip emission (parse -> emit ->
//! parse yields the same key/value map).
//!
//! The exact grammar (keys, gauge expressions, state expressions) is
//! documented in the [`crate::cli`] module.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use thiserror::Error;

use crate::certificate::{classical_auto, Certificate, DwellMap, GeneralCertificate,
    LinearRateCertificate};
use crate::checker::{CheckEntry, Sampling};
use crate::examples::{
    build_example41, build_example42, example41_system, example42_system, example42_window_entry,
    Example41Beta, Example42Params, SearchRanges,
};
use crate::expr::{parse as parse_expr, ScalarField};
use crate::gauge::{ClassTag, GaugeFunction, SmoothScalarMap};
use crate::system::{DisturbanceBox, Regularity, SignalStrategy, UncertainSystem};

#[derive(Debug, Error)]
#[error("config{}: {message}", line.map(|l| format!(" line {l}")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn at(line: usize, message: impl Into<String>) -> ConfigError {
        ConfigError { line: Some(line), message: message.into() }
    }

    pub fn plain(message: impl Into<String>) -> ConfigError {
        ConfigError { line: None, message: message.into() }
    }
}

/// Raw parsed configuration: ordered key -> (value text, source line).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawConfig {
    pairs: BTreeMap<String, (String, usize)>,
}

impl RawConfig {
    /// Parse `key = value` lines; `#` starts a comment, blank lines are
    /// ignored, duplicate keys are rejected with their line number.
    pub fn parse(text: &str) -> Result<RawConfig, ConfigError> {
        let mut pairs = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some(eq) = line.find('=') else {
                return Err(ConfigError::at(line_no, format!("expected `key = value`, got `{line}`")));
            };
            let key = line[..eq].trim().to_string();
            let value = line[eq + 1..].trim().to_string();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(ConfigError::at(line_no, format!("bad key `{key}`")));
            }
            if pairs.insert(key.clone(), (value, line_no)).is_some() {
                return Err(ConfigError::at(line_no, format!("duplicate key `{key}`")));
            }
        }
        Ok(RawConfig { pairs })
    }

    /// Canonical emission: sorted `key = value` lines.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        for (k, (v, _)) in &self.pairs {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.pairs.insert(key.to_string(), (value.to_string(), 0));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.pairs.get(key).map(|(v, _)| v.as_str())
    }

    pub fn same_pairs(&self, other: &RawConfig) -> bool {
        self.pairs.len() == other.pairs.len()
            && self
                .pairs
                .iter()
                .zip(other.pairs.iter())
                .all(|((ka, (va, _)), (kb, (vb, _)))| ka == kb && va == vb)
    }
}

/// Cursor over a raw config that records which keys were consumed, so unknown
/// keys can be rejected with their source line.
struct Reader<'a> {
    raw: &'a RawConfig,
    used: BTreeSet<String>,
}

impl<'a> Reader<'a> {
    fn new(raw: &'a RawConfig) -> Reader<'a> {
        Reader { raw, used: BTreeSet::new() }
    }

    fn line_of(&self, key: &str) -> Option<usize> {
        self.raw.pairs.get(key).map(|(_, l)| *l)
    }

    fn take(&mut self, key: &str) -> Option<&'a str> {
        let v = self.raw.pairs.get(key).map(|(v, _)| v.as_str());
        if v.is_some() {
            self.used.insert(key.to_string());
        }
        v
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                ConfigError { line: self.line_of(key), message: format!("`{key}` must be a number, got `{v}`") }
            }),
        }
    }

    fn require_f64(&mut self, key: &str) -> Result<f64, ConfigError> {
        match self.take(key) {
            None => Err(ConfigError::plain(format!("missing required key `{key}`"))),
            Some(v) => v.parse().map_err(|_| {
                ConfigError { line: self.line_of(key), message: format!("`{key}` must be a number, got `{v}`") }
            }),
        }
    }

    fn usize(&mut self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                ConfigError { line: self.line_of(key), message: format!("`{key}` must be a nonnegative integer") }
            }),
        }
    }

    fn u64(&mut self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                ConfigError { line: self.line_of(key), message: format!("`{key}` must be a nonnegative integer") }
            }),
        }
    }

    fn str(&mut self, key: &str, default: &str) -> String {
        self.take(key).unwrap_or(default).to_string()
    }

    fn finish(self) -> Result<(), ConfigError> {
        for (key, (_, line)) in &self.raw.pairs {
            if !self.used.contains(key) {
                return Err(ConfigError::at(*line, format!("unknown key `{key}`")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Certify,
    Simulate,
    Discretize,
    Optimize,
    Report,
}

impl std::str::FromStr for Command {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "certify" => Ok(Command::Certify),
            "simulate" => Ok(Command::Simulate),
            "discretize" => Ok(Command::Discretize),
            "optimize" => Ok(Command::Optimize),
            "report" => Ok(Command::Report),
            other => Err(format!(
                "unknown command `{other}` (expected certify|simulate|discretize|optimize|report)"
            )),
        }
    }
}

/// Everything a run needs: the model pair, sampling plan, tolerances and the
/// command-specific knobs.
#[derive(Debug)]
pub struct RunConfig {
    pub command: Command,
    pub model: Option<ModelPair>,
    pub sampling: Sampling,
    pub tol: f64,
    pub out_dir: PathBuf,
    pub horizon: f64,
    pub dwell: f64,
    pub strategy: SignalStrategy,
    pub mc_runs: usize,
    pub steps: usize,
    pub x0: Option<Vec<f64>>,
    pub x0_radius: f64,
    pub search: SearchRanges,
}

/// A system with its certificate and an optional precomputed scalar entry
/// (the built-in diagnostics record the threshold-window inequality here).
#[derive(Debug)]
pub struct ModelPair {
    pub system: UncertainSystem,
    pub certificate: Certificate,
    pub extra_entries: Vec<CheckEntry>,
}

impl RunConfig {
    pub fn from_raw(command: Command, raw: &RawConfig) -> Result<RunConfig, ConfigError> {
        let mut r = Reader::new(raw);

        let tol = r.f64("integrator_tol", 1e-8)?;
        let delta_strict = r.f64("delta_strict", 1e-9)?;
        if tol <= 0.0 || delta_strict <= 0.0 {
            return Err(ConfigError::plain("tolerances must be positive"));
        }
        let sampling = Sampling {
            shells: r.usize("shells", 40)?,
            directions: r.usize("directions", 128)?,
            fill: r.usize("fill", 1024)?,
            level_min: r.f64("level_min", 1e-3)?,
            level_max: r.f64("level_max", 1e3)?,
            seed: r.u64("seed", 0)?,
            delta_strict,
        };
        if sampling.level_min <= 0.0 || sampling.level_max <= sampling.level_min {
            return Err(ConfigError::plain("need 0 < level_min < level_max"));
        }

        let out_dir = PathBuf::from(r.str("out_dir", "out"));
        let horizon = r.f64("horizon", 10.0)?;
        let dwell = r.f64("dwell", 0.5)?;
        if horizon <= 0.0 || dwell <= 0.0 {
            return Err(ConfigError::plain("horizon and dwell must be positive"));
        }
        let strategy: SignalStrategy = r
            .str("strategy", "vertices")
            .parse()
            .map_err(ConfigError::plain)?;
        let mc_runs = r.usize("mc_runs", 100)?;
        let steps = r.usize("steps", 10)?;
        let x0 = match r.take("x0") {
            None => None,
            Some(v) => Some(parse_vector(v).map_err(ConfigError::plain)?),
        };
        let x0_radius = r.f64("x0_radius", 10.0)?;

        let search = SearchRanges {
            c1: (r.f64("c1_min", 2.5)?, r.f64("c1_max", 3.0)?),
            c2: (r.f64("c2_min", 2.5)?, r.f64("c2_max", 3.0)?),
            lambda: (r.f64("lambda_min", 0.99)?, r.f64("lambda_max", 1.0)?),
            resolution: r.usize("resolution", 16)?,
        };

        let model = match r.take("system") {
            None => {
                if command == Command::Report || command == Command::Optimize {
                    None
                } else {
                    return Err(ConfigError::plain("missing required key `system`"));
                }
            }
            Some(name) => Some(build_model(name.to_string(), &mut r)?),
        };

        r.finish()?;
        Ok(RunConfig {
            command,
            model,
            sampling,
            tol,
            out_dir,
            horizon,
            dwell,
            strategy,
            mc_runs,
            steps,
            x0,
            x0_radius,
            search,
        })
    }
}

fn parse_vector(text: &str) -> Result<Vec<f64>, String> {
    let inner = text.trim().trim_start_matches('(').trim_end_matches(')');
    inner
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad vector component `{p}`")))
        .collect()
}

fn parse_intervals(text: &str) -> Result<Vec<(f64, f64)>, String> {
    // "[a,b];[c,d]" — one closed interval per disturbance coordinate.
    text.split(';')
        .map(|part| {
            let p = part.trim().trim_start_matches('[').trim_end_matches(']');
            let mut it = p.split(',');
            let a = it
                .next()
                .ok_or_else(|| format!("bad interval `{part}`"))?
                .trim()
                .parse::<f64>()
                .map_err(|_| format!("bad interval `{part}`"))?;
            let b = it
                .next()
                .ok_or_else(|| format!("bad interval `{part}`"))?
                .trim()
                .parse::<f64>()
                .map_err(|_| format!("bad interval `{part}`"))?;
            if it.next().is_some() {
                return Err(format!("bad interval `{part}`"));
            }
            Ok((a, b))
        })
        .collect()
}

/// Parse a gauge declaration: `kind=linear coeff=3`,
/// `kind=power coeff=1 exp=2`, `kind=sum terms=[(1,1),(0.5,3)]`,
/// `kind=pwl points=[(0,0),(1,2),(2,5)]`.
pub fn parse_gauge(text: &str, tag: ClassTag) -> Result<GaugeFunction, String> {
    let mut kind = None;
    let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
    for part in text.split_whitespace() {
        let Some(eq) = part.find('=') else {
            return Err(format!("gauge field `{part}` is not key=value"));
        };
        let (k, v) = (&part[..eq], &part[eq + 1..]);
        if k == "kind" {
            kind = Some(v);
        } else {
            fields.insert(k, v);
        }
    }
    let kind = kind.ok_or("gauge declaration needs kind=...")?;
    let num = |k: &str| -> Result<f64, String> {
        fields
            .get(k)
            .ok_or(format!("gauge kind={kind} needs {k}=..."))?
            .parse::<f64>()
            .map_err(|_| format!("bad number for {k}"))
    };
    match kind {
        "linear" => Ok(GaugeFunction::linear(num("coeff")?, tag)),
        "power" => Ok(GaugeFunction::power(num("coeff")?, num("exp")?, tag)),
        "sum" => {
            let terms = parse_pairs(fields.get("terms").ok_or("kind=sum needs terms=[...]")?)?;
            Ok(GaugeFunction::sum(terms, tag))
        }
        "pwl" => {
            let points = parse_pairs(fields.get("points").ok_or("kind=pwl needs points=[...]")?)?;
            GaugeFunction::pwl(points, tag).map_err(|e| format!("{e}"))
        }
        other => Err(format!("unknown gauge kind `{other}`")),
    }
}

fn parse_pairs(text: &str) -> Result<Vec<(f64, f64)>, String> {
    let inner = text.trim().trim_start_matches('[').trim_end_matches(']');
    let mut out = Vec::new();
    let mut rest = inner;
    while let Some(start) = rest.find('(') {
        let end = rest[start..]
            .find(')')
            .ok_or("unbalanced parenthesis in pair list")?
            + start;
        let body = &rest[start + 1..end];
        let mut it = body.split(',');
        let a = it
            .next()
            .ok_or("empty pair")?
            .trim()
            .parse::<f64>()
            .map_err(|_| format!("bad pair `{body}`"))?;
        let b = it
            .next()
            .ok_or("pair needs two components")?
            .trim()
            .parse::<f64>()
            .map_err(|_| format!("bad pair `{body}`"))?;
        out.push((a, b));
        rest = &rest[end + 1..];
    }
    if out.is_empty() {
        return Err("empty pair list".into());
    }
    Ok(out)
}

fn build_model(name: String, r: &mut Reader) -> Result<ModelPair, ConfigError> {
    match name.as_str() {
        "example41" => {
            let p = r.f64("p", 1.0)?;
            let beta = Example41Beta {
                gain: r.f64("beta_gain", 1.0)?,
                exponent: r.usize("beta_exponent", 1)? as u32,
            };
            let c1 = r.f64("c1", 0.5)?;
            let lambda = r.f64("lambda", 0.5)?;
            let system =
                example41_system(&beta, p).map_err(|e| ConfigError::plain(format!("{e}")))?;
            let cert = build_example41(&beta, p, c1, lambda)
                .map_err(|e| ConfigError::plain(format!("{e}")))?;
            Ok(ModelPair {
                system,
                certificate: Certificate::General(cert),
                extra_entries: Vec::new(),
            })
        }
        "example42" => {
            let p = r.f64("p", crate::examples::example42_reference_amplitude())?;
            let c1 = r.f64("c1", 2.8594)?;
            let c2 = r.f64("c2", 2.6094)?;
            let lambda = r.f64("lambda", 0.9999)?;
            let system = example42_system(p).map_err(|e| ConfigError::plain(format!("{e}")))?;
            // Infeasible parameter windows fall back to the diagnostic
            // derivation so the checker can exhibit concrete witnesses; the
            // window inequality itself is recorded as a scalar entry.
            let params = match Example42Params::new(p, c1, c2, lambda) {
                Ok(params) => params,
                Err(_) => Example42Params::new_diagnostic(p, c1, c2, lambda)
                    .map_err(|e| ConfigError::plain(format!("{e}")))?,
            };
            let cert =
                build_example42(&params).map_err(|e| ConfigError::plain(format!("{e}")))?;
            Ok(ModelPair {
                system,
                certificate: Certificate::LinearRate(cert),
                extra_entries: vec![example42_window_entry(p, c2)],
            })
        }
        "custom" => build_custom_model(r),
        other => Err(ConfigError::plain(format!(
            "unknown system `{other}` (expected example41|example42|custom)"
        ))),
    }
}

fn build_custom_model(r: &mut Reader) -> Result<ModelPair, ConfigError> {
    let n = r.usize("state_dim", 0)?;
    if n == 0 {
        return Err(ConfigError::plain("custom system needs state_dim >= 1"));
    }
    let l = r.usize("dist_dim", 0)?;
    let mut fields = Vec::with_capacity(n);
    for i in 1..=n {
        let key = format!("field_{i}");
        let src = r
            .take(&key)
            .ok_or_else(|| ConfigError::plain(format!("custom system needs `{key}`")))?;
        let expr = parse_expr(src, n, l).map_err(|e| ConfigError {
            line: r.line_of(&key),
            message: format!("{key}: {e}"),
        })?;
        fields.push(expr);
    }
    let disturbance_box = if l == 0 {
        DisturbanceBox::empty()
    } else {
        let text = r
            .take("box")
            .ok_or_else(|| ConfigError::plain("custom system needs `box` intervals"))?;
        let ivs = parse_intervals(text).map_err(ConfigError::plain)?;
        if ivs.len() != l {
            return Err(ConfigError::plain(format!(
                "`box` has {} intervals, dist_dim is {l}",
                ivs.len()
            )));
        }
        DisturbanceBox::new(ivs).map_err(|e| ConfigError::plain(format!("{e}")))?
    };
    let system =
        UncertainSystem::from_exprs("custom", fields, disturbance_box, Regularity::default())
            .map_err(|e| ConfigError::plain(format!("{e}")))?;

    let v = match r.take("v") {
        None => ScalarField::norm_squared(n),
        Some(src) => ScalarField::parse(src, n).map_err(|e| ConfigError {
            line: r.line_of("v"),
            message: format!("v: {e}"),
        })?,
    };

    let kind = r.str("cert", "classical");
    let certificate = match kind.as_str() {
        "classical" => {
            let rho_text = r
                .take("rho")
                .ok_or_else(|| ConfigError::plain("classical certificate needs `rho`"))?;
            let rho = parse_gauge(rho_text, ClassTag::KInf).map_err(ConfigError::plain)?;
            let lambda = match r.take("lambda_gauge") {
                None => None,
                Some(t) => Some(parse_gauge(t, ClassTag::K).map_err(ConfigError::plain)?),
            };
            let cert = classical_auto(v, rho, lambda)
                .map_err(|e| ConfigError::plain(format!("{e}")))?;
            Certificate::General(cert)
        }
        "general" => {
            let k = r.usize("k", 0)?;
            let mut chain = Vec::new();
            for i in 0..=k {
                let key = format!("w_{i}");
                let src = r
                    .take(&key)
                    .ok_or_else(|| ConfigError::plain(format!("general certificate needs `{key}`")))?;
                chain.push(ScalarField::parse(src, n).map_err(|e| ConfigError {
                    line: r.line_of(&key),
                    message: format!("{key}: {e}"),
                })?);
            }
            let gauge = |r: &mut Reader, key: &str, tag| -> Result<GaugeFunction, ConfigError> {
                let t = r
                    .take(key)
                    .ok_or_else(|| ConfigError::plain(format!("general certificate needs `{key}`")))?;
                parse_gauge(t, tag).map_err(ConfigError::plain)
            };
            let rho = gauge(r, "rho", ClassTag::KInf)?;
            let c1 = gauge(r, "c1_gauge", ClassTag::KInf)?;
            let c2 = gauge(r, "c2_gauge", ClassTag::KInf)?;
            let g = gauge(r, "g_gauge", ClassTag::KInf)?;
            let g_tilde = match r.take("gtilde_gauge") {
                None => None,
                Some(t) => Some(parse_gauge(t, ClassTag::KInf).map_err(ConfigError::plain)?),
            };
            let lambda = gauge(r, "lambda_gauge", ClassTag::K)?;
            let gamma = gauge(r, "gamma_gauge", ClassTag::KInf)?;
            let mut b = Vec::new();
            for i in 0..=k {
                let key = format!("b_{i}");
                let t = r
                    .take(&key)
                    .ok_or_else(|| ConfigError::plain(format!("general certificate needs `{key}`")))?;
                b.push(parse_gauge(t, ClassTag::PositiveDefinite).map_err(ConfigError::plain)?);
            }
            let mu = match r.take("mu") {
                None | Some("zero") => SmoothScalarMap::zero(),
                Some(t) => {
                    let terms = parse_pairs(t).map_err(ConfigError::plain)?;
                    SmoothScalarMap::poly(terms).map_err(|e| ConfigError::plain(format!("{e}")))?
                }
            };
            let phi = match r.take("phi") {
                None => None,
                Some(src) => Some(ScalarField::parse(src, n).map_err(|e| ConfigError {
                    line: r.line_of("phi"),
                    message: format!("phi: {e}"),
                })?),
            };
            let r_spec = r.str("r", "auto");
            let mut cert = GeneralCertificate {
                v,
                chain,
                rho,
                c1,
                c2,
                g,
                g_tilde,
                lambda,
                gamma,
                b,
                r: DwellMap::Constant(1.0),
                mu,
                phi,
                w0_identically_zero: false,
            };
            cert.r = if r_spec == "auto" {
                crate::certificate::auto_dwell(&cert)
                    .map_err(|e| ConfigError::plain(format!("{e}")))?
            } else {
                let c: f64 = r_spec
                    .strip_prefix("const ")
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| {
                        ConfigError::plain("`r` must be `auto` or `const <value>`")
                    })?;
                DwellMap::Constant(c)
            };
            Certificate::General(cert)
        }
        "linear" => {
            let k = r.usize("k", 0)?;
            let mut chain = Vec::new();
            for i in 0..=k {
                let key = format!("w_{i}");
                let src = r
                    .take(&key)
                    .ok_or_else(|| ConfigError::plain(format!("linear certificate needs `{key}`")))?;
                chain.push(ScalarField::parse(src, n).map_err(|e| ConfigError {
                    line: r.line_of(&key),
                    message: format!("{key}: {e}"),
                })?);
            }
            let mut b = Vec::new();
            for i in 0..=k {
                b.push(r.require_f64(&format!("b_{i}"))?);
            }
            let k1 = r.f64("k1", 0.0)?;
            let k2 = r.f64("k2", 0.0)?;
            let phi = match r.take("phi") {
                None => None,
                Some(src) => Some(ScalarField::parse(src, n).map_err(|e| ConfigError {
                    line: r.line_of("phi"),
                    message: format!("phi: {e}"),
                })?),
            };
            let g_tilde = match r.take("gtilde") {
                None => None,
                Some(t) => Some(t.parse::<f64>().map_err(|_| {
                    ConfigError::plain("`gtilde` must be a number")
                })?),
            };
            let cert = LinearRateCertificate {
                v,
                chain,
                rho: r.require_f64("rho")?,
                c1: r.require_f64("c1")?,
                c2: r.require_f64("c2")?,
                g: r.require_f64("g")?,
                g_tilde,
                lambda: r.require_f64("lambda")?,
                gamma: r.require_f64("gamma")?,
                mu: r.f64("mu", 0.0)?,
                b,
                r: r.require_f64("r")?,
                phi,
                quad_envelope: if k1 > 0.0 || k2 > 0.0 { Some((k1, k2)) } else { None },
            };
            Certificate::LinearRate(cert)
        }
        other => {
            return Err(ConfigError::plain(format!(
                "unknown certificate kind `{other}` (expected classical|general|linear)"
            )))
        }
    };

    Ok(ModelPair { system, certificate, extra_entries: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_parse_emit_parse() {
        let text = "\n# comment\nsystem = example42\np = 0.75\nseed = 7 # trailing\n";
        let raw = RawConfig::parse(text).unwrap();
        let emitted = raw.emit();
        let again = RawConfig::parse(&emitted).unwrap();
        assert!(raw.same_pairs(&again));
        let twice = RawConfig::parse(&again.emit()).unwrap();
        assert!(again.same_pairs(&twice));
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(RawConfig::parse("novalue").is_err());
        assert!(RawConfig::parse("a = 1\na = 2").is_err());
        assert!(RawConfig::parse("bad key = 1").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected_with_line() {
        let raw = RawConfig::parse("system = example42\nnot_a_key = 3\n").unwrap();
        let err = RunConfig::from_raw(Command::Certify, &raw).unwrap_err();
        assert_eq!(err.line, Some(2));
        assert!(err.message.contains("not_a_key"));
    }

    #[test]
    fn negative_tolerance_is_rejected() {
        let raw = RawConfig::parse("system = example42\nintegrator_tol = -1e-6\n").unwrap();
        assert!(RunConfig::from_raw(Command::Certify, &raw).is_err());
    }

    #[test]
    fn example42_model_builds_from_config() {
        let raw = RawConfig::parse(
            "system = example42\np = 0.236643\nc1 = 2.8594\nc2 = 2.6094\nlambda = 0.9999\n",
        )
        .unwrap();
        let cfg = RunConfig::from_raw(Command::Certify, &raw).unwrap();
        let model = cfg.model.unwrap();
        assert_eq!(model.system.dim(), 2);
        assert!(matches!(model.certificate, Certificate::LinearRate(_)));
        assert_eq!(model.extra_entries.len(), 1);
    }

    #[test]
    fn custom_classical_model_builds() {
        let raw = RawConfig::parse(
            "system = custom\nstate_dim = 1\nfield_1 = -x1\ncert = classical\nrho = kind=linear coeff=2\n",
        )
        .unwrap();
        let cfg = RunConfig::from_raw(Command::Certify, &raw).unwrap();
        let model = cfg.model.unwrap();
        assert!(matches!(model.certificate, Certificate::General(_)));
    }

    #[test]
    fn gauge_grammar_parses() {
        let g = parse_gauge("kind=linear coeff=3", ClassTag::KInf).unwrap();
        assert_eq!(g.value(2.0), 6.0);
        let g = parse_gauge("kind=power coeff=1 exp=2", ClassTag::KInf).unwrap();
        assert_eq!(g.value(3.0), 9.0);
        let g = parse_gauge("kind=sum terms=[(1,1),(0.5,3)]", ClassTag::KInf).unwrap();
        assert_eq!(g.value(2.0), 6.0);
        let g = parse_gauge("kind=pwl points=[(0,0),(1,2),(2,5)]", ClassTag::K).unwrap();
        assert_eq!(g.value(1.5), 3.5);
        assert!(parse_gauge("kind=mystery", ClassTag::K).is_err());
    }

    #[test]
    fn vector_and_interval_parsing() {
        assert_eq!(parse_vector("(1.5, -2)").unwrap(), vec![1.5, -2.0]);
        assert_eq!(
            parse_intervals("[0,0.75];[-1,1]").unwrap(),
            vec![(0.0, 0.75), (-1.0, 1.0)]
        );
        assert!(parse_intervals("[0
        ,]").is_err());
    }
}

//! TOML run configuration.
//!
//! ```toml
//! mu = 1.0
//!
//! [grid]
//! extents = [1.0]
//! points = [201]
//!
//! [motility]
//! family = "exponential"
//! alpha = 0.1
//!
//! [u0]
//! kind = "cosine"
//! amplitude = 0.5
//! ```
//!
//! Every other section is optional. [`RunConfig::parse`] fills defaults and
//! [`RunConfig::to_toml`] writes the resolved document back out.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::comparison::{ComparisonError, Envelope};
use crate::grid::{Field, Grid};
use crate::motility::{MotilityFunction, MotilitySpec, DEFAULT_AUDIT_POINTS, DEFAULT_AUDIT_S_MAX};
use crate::pde::{Model, SchemeConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub message: String,
    pub line: Option<usize>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mu: f64,
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSection,
    pub motility: MotilitySection,
    pub u0: InitialSection,
    #[serde(default)]
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub envelope: EnvelopeSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    pub extents: Vec<f64>,
    /// Vertices per axis, boundaries included.
    pub points: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotilitySection {
    /// `exponential`, `inverse-power` or `constant`.
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    /// `u0 = value`
    Constant,
    /// `u0 = value + amplitude·cos(mode·π·x/Lx)`, times the same factor in `y` in 2D.
    Cosine,
    /// `u0 = value + amplitude·s(x)` with `s` a seeded cosine sum scaled to `max |s| = 1`.
    RandomSmooth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub kind: InitialKind,
    #[serde(default = "one")]
    pub value: f64,
    #[serde(default = "half")]
    pub amplitude: f64,
    #[serde(default = "one_u32")]
    pub mode: u32,
    /// Highest wavenumber in the random cosine sum.
    #[serde(default = "four_u32")]
    pub modes: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    #[default]
    Measured,
    ClosedBound,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvelopeSection {
    /// Margin for the automatic straddle around 1.
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    pub source: SourceKind,
    pub dt: f64,
    /// Defaults to the scheme's `t_end`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
}

impl Default for EnvelopeSection {
    fn default() -> Self {
        Self {
            delta: 0.01,
            lo: None,
            hi: None,
            source: SourceKind::Measured,
            dt: 1e-3,
            t_end: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSection {
    pub sandwich_c: f64,
    pub mass_c: f64,
    pub gradient_c: f64,
    pub lp_c: f64,
    /// Defaults to the scheme's `t_end`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_check: Option<f64>,
    pub eps: f64,
    /// Overrides the estimated `c_Ω`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_omega: Option<f64>,
    pub c_omega_safety: f64,
    pub constant_samples: usize,
    pub lp_p: f64,
    pub gap_monotone_from: f64,
    pub audit_s_max: f64,
    pub audit_points: usize,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self {
            sandwich_c: 10.0,
            mass_c: 10.0,
            gradient_c: 10.0,
            lp_c: 10.0,
            t_check: None,
            eps: 1e-3,
            c_omega: None,
            c_omega_safety: 1.5,
            constant_samples: 32,
            lp_p: 4.0,
            gap_monotone_from: 1.0,
            audit_s_max: DEFAULT_AUDIT_S_MAX,
            audit_points: DEFAULT_AUDIT_POINTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

/// Cartesian product of the listed values; an empty list keeps the base value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub mu: Vec<f64>,
    pub alpha: Vec<f64>,
    pub workers: usize,
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn one_u32() -> u32 {
    1
}
fn four_u32() -> u32 {
    4
}

/// 1-based line of `key` inside `[section]` (top level when `None`).
fn line_of(text: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.trim_end_matches(']').trim();
            current = Some(name.to_string());
            if key.is_empty() && section == Some(name) {
                return Some(i + 1);
            }
            continue;
        }
        if current.as_deref() != section || key.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix(key) {
            if rest.trim_start().starts_with('=') {
                return Some(i + 1);
            }
        }
    }
    None
}

fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

struct Locator<'a>(&'a str);

impl Locator<'_> {
    fn err(&self, section: Option<&str>, key: &str, message: impl Into<String>) -> ConfigError {
        let line = line_of(self.0, section, key).or_else(|| section.and_then(|s| line_of(self.0, Some(s), "")));
        ConfigError {
            message: message.into(),
            line,
        }
    }
}

fn positive(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError {
            message: e.message().to_string(),
            line: e.span().map(|s| line_at(text, s.start)),
        })?;
        cfg.resolve(&Locator(text))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Reseeds every random input.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        if self.u0.kind == InitialKind::RandomSmooth {
            self.u0.seed = Some(seed);
        }
        self
    }

    fn resolve(&mut self, loc: &Locator) -> Result<(), ConfigError> {
        if !positive(self.mu) {
            return Err(loc.err(None, "mu", format!("mu must be positive and finite, got {}", self.mu)));
        }

        let dims = self.grid.extents.len();
        if self.grid.points.len() != dims {
            return Err(loc.err(
                Some("grid"),
                "points",
                format!("points has {} entries but extents has {dims}", self.grid.points.len()),
            ));
        }
        if let Some(d) = self.grid.dimension {
            if d != dims {
                return Err(loc.err(
                    Some("grid"),
                    "dimension",
                    format!("dimension = {d} does not match {dims} extents"),
                ));
            }
        }
        self.grid.dimension = Some(dims);
        let grid = self
            .build_grid()
            .map_err(|e| loc.err(Some("grid"), "extents", e))?;

        self.motility_spec()
            .and_then(|s| MotilityFunction::from_spec(&s).map_err(|e| e.to_string()))
            .map_err(|e| loc.err(Some("motility"), "family", e))?;

        if self.u0.kind == InitialKind::RandomSmooth && self.u0.seed.is_none() {
            self.u0.seed = Some(self.seed);
        }
        if !self.u0.value.is_finite() || !self.u0.amplitude.is_finite() {
            return Err(loc.err(Some("u0"), "value", "u0 value and amplitude must be finite"));
        }
        let spread = match self.u0.kind {
            InitialKind::Constant => 0.0,
            _ => self.u0.amplitude.abs(),
        };
        if !(self.u0.value - spread > 0.0) {
            let key = if spread > 0.0 { "amplitude" } else { "value" };
            return Err(loc.err(
                Some("u0"),
                key,
                format!(
                    "initial density must stay positive: value - |amplitude| = {}",
                    self.u0.value - spread
                ),
            ));
        }
        if self.u0.kind == InitialKind::RandomSmooth && self.u0.modes == 0 {
            return Err(loc.err(Some("u0"), "modes", "modes must be at least 1"));
        }

        self.scheme.validate().map_err(|e| {
            let msg = e.to_string();
            let key = ["regularization", "cfl_safety", "t_end", "output_stride", "elliptic_tol"]
                .into_iter()
                .find(|k| msg.contains(k))
                .unwrap_or("");
            loc.err(Some("scheme"), key, msg)
        })?;

        let env = &mut self.envelope;
        if !(env.delta >= 0.0 && env.delta < 1.0) {
            return Err(loc.err(Some("envelope"), "delta", format!("delta must lie in [0, 1), got {}", env.delta)));
        }
        if !positive(env.dt) {
            return Err(loc.err(Some("envelope"), "dt", format!("dt must be positive, got {}", env.dt)));
        }
        if env.lo.is_some() != env.hi.is_some() {
            let key = if env.lo.is_some() { "lo" } else { "hi" };
            return Err(loc.err(Some("envelope"), key, "lo and hi must be given together"));
        }
        let t_end = self.scheme.t_end;
        let env_t_end = *env.t_end.get_or_insert(t_end);
        if !(env_t_end >= 0.0 && env_t_end.is_finite()) {
            return Err(loc.err(Some("envelope"), "t_end", "envelope t_end must be finite and non-negative"));
        }
        if env.source == SourceKind::Measured && env_t_end > t_end {
            return Err(loc.err(
                Some("envelope"),
                "t_end",
                format!("measured source covers [0, {t_end}] but envelope t_end = {env_t_end}"),
            ));
        }
        let u0 = self.initial_density(&grid);
        self.initial_envelope(&u0).map_err(|e| {
            let key = if self.envelope.lo.is_some() { "lo" } else { "delta" };
            loc.err(Some("envelope"), key, e.to_string())
        })?;

        let d = &mut self.diagnostics;
        d.t_check.get_or_insert(t_end);
        for (key, x) in [
            ("sandwich_c", d.sandwich_c),
            ("mass_c", d.mass_c),
            ("gradient_c", d.gradient_c),
            ("lp_c", d.lp_c),
            ("eps", d.eps),
            ("c_omega_safety", d.c_omega_safety),
            ("audit_s_max", d.audit_s_max),
        ] {
            if !positive(x) {
                return Err(loc.err(Some("diagnostics"), key, format!("{key} must be positive, got {x}")));
            }
        }
        if let Some(c) = d.c_omega {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(loc.err(Some("diagnostics"), "c_omega", format!("c_omega must be non-negative, got {c}")));
            }
        }
        if d.constant_samples == 0 {
            return Err(loc.err(Some("diagnostics"), "constant_samples", "constant_samples must be at least 1"));
        }
        if d.audit_points < 1000 {
            return Err(loc.err(Some("diagnostics"), "audit_points", "audit_points must be at least 1000"));
        }
        let p_min = 4f64.max(dims as f64 + 1.0);
        if !(d.lp_p >= p_min && d.lp_p.is_finite()) {
            return Err(loc.err(
                Some("diagnostics"),
                "lp_p",
                format!("lp_p must be at least max(4, N + 1) = {p_min}, got {}", d.lp_p),
            ));
        }

        if let Some(sweep) = &self.sweep {
            if let Some(bad) = sweep.mu.iter().find(|m| !positive(**m)) {
                return Err(loc.err(Some("sweep"), "mu", format!("sweep mu values must be positive, got {bad}")));
            }
            if !sweep.alpha.is_empty() && self.motility.family == "constant" {
                return Err(loc.err(Some("sweep"), "alpha", "constant motility has no alpha to sweep"));
            }
            if let Some(bad) = sweep.alpha.iter().find(|a| !positive(**a)) {
                return Err(loc.err(Some("sweep"), "alpha", format!("sweep alpha values must be positive, got {bad}")));
            }
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<Grid, String> {
        Grid::new(&self.grid.extents, &self.grid.points).map_err(|e| e.to_string())
    }

    pub fn motility_spec(&self) -> Result<MotilitySpec, String> {
        let m = &self.motility;
        let need = |name: &str, x: Option<f64>| x.ok_or_else(|| format!("{} motility needs '{name}'", m.family));
        let unused = |names: &[(&str, Option<f64>)]| match names.iter().find(|(_, x)| x.is_some()) {
            Some((n, _)) => Err(format!("{} motility does not take '{n}'", m.family)),
            None => Ok(()),
        };
        match m.family.as_str() {
            "exponential" => {
                unused(&[("epsilon", m.epsilon), ("c", m.c)])?;
                Ok(MotilitySpec::Exponential { alpha: need("alpha", m.alpha)? })
            }
            "inverse-power" => {
                unused(&[("c", m.c)])?;
                Ok(MotilitySpec::InversePower {
                    epsilon: need("epsilon", m.epsilon)?,
                    alpha: need("alpha", m.alpha)?,
                })
            }
            "constant" => {
                unused(&[("alpha", m.alpha), ("epsilon", m.epsilon)])?;
                Ok(MotilitySpec::Constant { c: need("c", m.c)? })
            }
            other => Err(format!(
                "unknown motility family '{other}' (expected exponential, inverse-power or constant)"
            )),
        }
    }

    pub fn motility(&self) -> MotilityFunction {
        let spec = self.motility_spec().expect("validated config");
        MotilityFunction::from_spec(&spec).expect("validated config")
    }

    pub fn model(&self) -> Model {
        Model::new(self.motility(), self.mu).expect("validated config")
    }

    pub fn initial_density(&self, grid: &Grid) -> Field {
        let u = &self.u0;
        let lx = grid.extents()[0];
        let ly = if grid.dim() == 2 { grid.extents()[1] } else { 1.0 };
        match u.kind {
            InitialKind::Constant => grid.constant(u.value),
            InitialKind::Cosine => {
                let k = u.mode as f64 * PI;
                let two_d = grid.dim() == 2;
                grid.sample(|x, y| {
                    let cy = if two_d { (k * y / ly).cos() } else { 1.0 };
                    u.value + u.amplitude * (k * x / lx).cos() * cy
                })
            }
            InitialKind::RandomSmooth => {
                let mut rng = ChaCha8Rng::seed_from_u64(u.seed.unwrap_or(self.seed));
                let two_d = grid.dim() == 2;
                let terms: Vec<(f64, f64, f64)> = (0..2 * u.modes)
                    .map(|_| {
                        let c = rng.random_range(-1.0..1.0);
                        let kx = rng.random_range(1..=u.modes) as f64;
                        let ky = if two_d { rng.random_range(0..=u.modes) as f64 } else { 0.0 };
                        (c, kx, ky)
                    })
                    .collect();
                let s = grid.sample(|x, y| {
                    terms
                        .iter()
                        .map(|&(c, kx, ky)| c * (kx * PI * x / lx).cos() * (ky * PI * y / ly).cos())
                        .sum()
                });
                let scale = s.sup_norm();
                let scale = if scale > 0.0 { scale } else { 1.0 };
                s.map(|z| u.value + u.amplitude * z / scale)
            }
        }
    }

    /// Explicit `(lo, hi)`, or `(min(min u0, 1−δ), max(max u0, 1+δ))`.
    pub fn initial_envelope(&self, u0: &Field) -> Result<Envelope, ComparisonError> {
        let (lo, hi) = match (self.envelope.lo, self.envelope.hi) {
            (Some(lo), Some(hi)) => (lo, hi),
            _ => (
                u0.min().min(1.0 - self.envelope.delta),
                u0.max().max(1.0 + self.envelope.delta),
            ),
        };
        let env = Envelope::new(0.0, lo, hi)?;
        if !env.in_rectangle() {
            return Err(ComparisonError::Straddle { lo, hi });
        }
        Ok(env)
    }

    pub fn envelope_t_end(&self) -> f64 {
        self.envelope.t_end.unwrap_or(self.scheme.t_end)
    }

    pub fn t_check(&self) -> f64 {
        self.diagnostics.t_check.unwrap_or(self.scheme.t_end)
    }

    /// One config per sweep point, labelled `mu=<μ>_alpha=<α>`.
    pub fn sweep_points(&self) -> Vec<(String, RunConfig)> {
        let Some(sweep) = &self.sweep else {
            return vec![(self.point_label(), self.clone())];
        };
        let mus = if sweep.mu.is_empty() { vec![self.mu] } else { sweep.mu.clone() };
        let alphas: Vec<Option<f64>> = if sweep.alpha.is_empty() {
            vec![None]
        } else {
            sweep.alpha.iter().copied().map(Some).collect()
        };
        let mut out = Vec::with_capacity(mus.len() * alphas.len());
        for &mu in &mus {
            for &alpha in &alphas {
                let mut point = self.clone();
                point.sweep = None;
                point.mu = mu;
                if let Some(a) = alpha {
                    point.motility.alpha = Some(a);
                }
                out.push((point.point_label(), point));
            }
        }
        out
    }

    fn point_label(&self) -> String {
        match self.motility.alpha {
            Some(a) => format!("mu={}_alpha={}", self.mu, a),
            None => format!("mu={}", self.mu),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
mu = 1.0

[grid]
extents = [1.0]
points = [201]

[motility]
family = "exponential"
alpha = 0.1

[u0]
kind = "cosine"
amplitude = 0.5
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.grid.dimension, Some(1));
        assert_eq!(cfg.scheme, SchemeConfig::default());
        assert_eq!(cfg.envelope.delta, 0.01);
        assert_eq!(cfg.envelope.source, SourceKind::Measured);
        assert_eq!(cfg.envelope.t_end, Some(cfg.scheme.t_end));
        assert_eq!(cfg.diagnostics.t_check, Some(cfg.scheme.t_end));
        assert_eq!(cfg.diagnostics.c_omega_safety, 1.5);
        assert_eq!(cfg.output.dir, "out");
        assert_eq!(cfg.u0.value, 1.0);
        assert_eq!(cfg.u0.mode, 1);
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        let again = RunConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn cosine_preset_and_auto_envelope() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        let grid = cfg.build_grid().unwrap();
        let u0 = cfg.initial_density(&grid);
        assert_eq!(u0.values()[0], 1.5);
        assert!((u0.values()[200] - 0.5).abs() < 1e-15);
        let env = cfg.initial_envelope(&u0).unwrap();
        assert!((env.lo() - 0.5).abs() < 1e-15 && (env.hi() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn constant_preset_straddle() {
        let text = MINIMAL.replace("kind = \"cosine\"", "kind = \"constant\"");
        let cfg = RunConfig::parse(&text).unwrap();
        let grid = cfg.build_grid().unwrap();
        let env = cfg.initial_envelope(&cfg.initial_density(&grid)).unwrap();
        assert!((env.lo() - 0.99).abs() < 1e-15 && (env.hi() - 1.01).abs() < 1e-15);

        let zero_delta = format!("{text}\n[envelope]\ndelta = 0.0\n");
        let err = RunConfig::parse(&zero_delta).unwrap_err();
        assert!(err.message.contains("straddle"), "{err}");
        assert_eq!(err.line, Some(zero_delta.lines().count()));
    }

    #[test]
    fn rejects_zero_regularization_with_line() {
        let text = format!("{MINIMAL}\n[scheme]\nt_end = 2.0\nregularization = 0\n");
        let err = RunConfig::parse(&text).unwrap_err();
        assert!(err.message.contains("regularization"));
        assert_eq!(err.line, Some(text.lines().count()));
    }

    #[test]
    fn unknown_and_missing_keys() {
        let text = MINIMAL.replace("alpha = 0.1", "alpha = 0.1\nbeta = 2.0");
        let err = RunConfig::parse(&text).unwrap_err();
        assert!(err.message.contains("beta"), "{err}");
        assert!(err.line.is_some());

        let text = MINIMAL.replace("mu = 1.0", "");
        let err = RunConfig::parse(&text).unwrap_err();
        assert!(err.message.contains("mu"), "{err}");

        let text = MINIMAL.replace("alpha = 0.1", "");
        let err = RunConfig::parse(&text).unwrap_err();
        assert!(err.message.contains("alpha"), "{err}");
        assert_eq!(err.line, Some(9));
    }

    #[test]
    fn rejects_nonpositive_initial_density() {
        let text = MINIMAL.replace("amplitude = 0.5", "amplitude = 1.0");
        let err = RunConfig::parse(&text).unwrap_err();
        assert!(err.message.contains("positive"));
        assert_eq!(err.line, Some(14));
    }

    #[test]
    fn random_smooth_is_seeded() {
        let text = MINIMAL.replace("kind = \"cosine\"", "kind = \"random-smooth\"");
        let cfg = RunConfig::parse(&text).unwrap();
        assert_eq!(cfg.u0.seed, Some(0));
        let grid = cfg.build_grid().unwrap();
        let a = cfg.initial_density(&grid);
        assert_eq!(a, cfg.initial_density(&grid));
        assert!((a.sup_dist_to(1.0) - 0.5).abs() < 1e-12);
        let b = cfg.clone().with_seed(7).initial_density(&grid);
        assert_ne!(a, b);
    }

    #[test]
    fn sweep_expansion() {
        let text = format!("{MINIMAL}\n[sweep]\nmu = [0.1, 0.5, 1.0]\nalpha = [0.05, 0.1]\n");
        let cfg = RunConfig::parse(&text).unwrap();
        let points = cfg.sweep_points();
        assert_eq!(points.len(), 6);
        assert_eq!(points[0].0, "mu=0.1_alpha=0.05");
        assert!(points.iter().all(|(_, c)| c.sweep.is_none()));
        assert_eq!(points[5].1.motility.alpha, Some(0.1));
    }

    #[test]
    fn explicit_envelope_and_measured_range() {
        let text = format!("{MINIMAL}\n[envelope]\nlo = 0.4\n");
        assert!(RunConfig::parse(&text).unwrap_err().message.contains("together"));
        let text = format!("{MINIMAL}\n[envelope]\nlo = 0.4\nhi = 1.6\nt_end = 5.0\n");
        assert!(RunConfig::parse(&text).unwrap_err().message.contains("measured"));
        let text = format!("{MINIMAL}\n[envelope]\nlo = 0.4\nhi = 1.6\nsource = \"closed-bound\"\nt_end = 5.0\n");
        let cfg = RunConfig::parse(&text).unwrap();
        assert_eq!(cfg.envelope_t_end(), 5.0);
    }

    #[test]
    fn lp_exponent_floor() {
        let text = format!("{MINIMAL}\n[diagnostics]\nlp_p = 3.0\n");
        assert!(RunConfig::parse(&text).unwrap_err().message.contains("lp_p"));
    }
}

//! Run configuration: flat dotted keys read from `key = value` documents
//! and command-line overrides.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use baroflow_core::newton::NewtonConfig;
use baroflow_core::{BarotropicEos, GaussianPulse, Rect, SchemeConfig, SchemeKind, StructuredTriMesh};

/// Environment variable supplying the default output directory.
pub const OUTPUT_DIR_ENV: &str = "BAROFLOW_OUTPUT_DIR";

const DEFAULT_OUTPUT_DIR: &str = "output";

/// Every recognised key, in serialization order.
pub const KEYS: &[&str] = &[
    "domain.xmin",
    "domain.xmax",
    "domain.ymin",
    "domain.ymax",
    "mesh.M",
    "time.tau",
    "time.T",
    "eos.a",
    "eos.gamma",
    "init.alpha",
    "init.beta",
    "scheme.kind",
    "scheme.K",
    "newton.tol",
    "newton.max_iter",
    "output.dir",
    "output.snapshot_times",
    "output.diag_every",
    "output.section_y",
];

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown key '{key}' ({origin})")]
    UnknownKey { key: String, origin: String },
    #[error("key '{key}' given twice ({origin})")]
    Duplicate { key: String, origin: String },
    #[error("{key}: cannot parse '{value}' ({origin}): {reason}")]
    Value {
        key: String,
        value: String,
        origin: String,
        reason: String,
    },
    #[error("argument '{0}': expected `--key value` or `key=value`")]
    Flag(String),
    #[error("{0} missing")]
    Missing(&'static str),
    #[error("{key}: {message}")]
    Invalid { key: &'static str, message: String },
}

/// Raw `key -> (value, origin)` assignments before typing.
#[derive(Debug, Default, Clone)]
pub struct Assignments {
    values: BTreeMap<String, (String, String)>,
}

impl Assignments {
    /// Parse a configuration document.
    ///
    /// Blank lines and lines whose first non-blank character is `#` are
    /// ignored. Keys may not repeat within a document.
    pub fn parse_document(text: &str) -> Result<Self, ConfigError> {
        let mut out = Assignments::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected `key = value`, got '{trimmed}'"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    message: "empty key".into(),
                });
            }
            out.insert(key, value.trim(), format!("line {line}"), false)?;
        }
        Ok(out)
    }

    /// Parse overrides given as `--key value` pairs or `key=value` words.
    pub fn parse_flags<S: AsRef<str>>(args: &[S]) -> Result<Self, ConfigError> {
        let mut out = Assignments::default();
        let mut iter = args.iter().map(AsRef::as_ref);
        while let Some(arg) = iter.next() {
            let (key, value) = if let Some(flag) = arg.strip_prefix("--") {
                match flag.split_once('=') {
                    Some((k, v)) => (k.to_string(), v.to_string()),
                    None => {
                        let v = iter.next().ok_or_else(|| ConfigError::Flag(arg.to_string()))?;
                        (flag.to_string(), v.to_string())
                    }
                }
            } else if let Some((k, v)) = arg.split_once('=') {
                (k.to_string(), v.to_string())
            } else {
                return Err(ConfigError::Flag(arg.to_string()));
            };
            // A repeated flag overrides the earlier one, as on most command lines.
            out.insert(key.trim(), value.trim(), format!("flag --{}", key.trim()), true)?;
        }
        Ok(out)
    }

    fn insert(&mut self, key: &str, value: &str, origin: String, replace: bool) -> Result<(), ConfigError> {
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey {
                key: key.to_string(),
                origin,
            });
        }
        if !replace && self.values.contains_key(key) {
            return Err(ConfigError::Duplicate {
                key: key.to_string(),
                origin,
            });
        }
        self.values.insert(key.to_string(), (value.to_string(), origin));
        Ok(())
    }

    /// Apply `other` on top of `self`; its values win.
    pub fn overlay(mut self, other: Assignments) -> Self {
        self.values.extend(other.values);
        self
    }

    fn take<T: FromStr>(&self, key: &'static str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some((value, origin)) => value.parse::<T>().map(Some).map_err(|e| ConfigError::Value {
                key: key.to_string(),
                value: value.clone(),
                origin: origin.clone(),
                reason: e.to_string(),
            }),
        }
    }

    fn take_list(&self, key: &'static str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some((value, origin)) = self.values.get(key) else {
            return Ok(None);
        };
        value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>().map_err(|e| ConfigError::Value {
                    key: key.to_string(),
                    value: value.clone(),
                    origin: origin.clone(),
                    reason: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }
}

/// Fully typed and validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub domain: Rect,
    pub segments: usize,
    pub tau: f64,
    pub t_end: f64,
    pub eos_a: f64,
    pub eos_gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub kind: SchemeKind,
    /// Passes per step; only set for the decoupled scheme.
    pub iterations: Option<usize>,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub output_dir: PathBuf,
    pub snapshot_times: Vec<f64>,
    pub diag_every: usize,
    pub section_y: f64,
}

impl RunConfig {
    /// Type the assignments, fill defaults and validate.
    pub fn from_assignments(a: &Assignments) -> Result<Self, ConfigError> {
        let newton = NewtonConfig::default();
        let kind = a.take::<String>("scheme.kind")?.map_or(Ok(SchemeKind::FullyImplicit), |s| {
            s.parse::<SchemeKind>().map_err(|e| ConfigError::Invalid {
                key: "scheme.kind",
                message: e.to_string(),
            })
        })?;
        let output_dir = match a.take::<String>("output.dir")? {
            Some(d) => PathBuf::from(d),
            None => std::env::var_os(OUTPUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
        };
        let cfg = RunConfig {
            domain: Rect::new(
                a.take("domain.xmin")?.unwrap_or(-5.0),
                a.take("domain.xmax")?.unwrap_or(5.0),
                a.take("domain.ymin")?.unwrap_or(-5.0),
                a.take("domain.ymax")?.unwrap_or(5.0),
            ),
            segments: a.take("mesh.M")?.ok_or(ConfigError::Missing("mesh.M"))?,
            tau: a.take("time.tau")?.unwrap_or(0.005),
            t_end: a.take("time.T")?.unwrap_or(5.0),
            eos_a: a.take("eos.a")?.unwrap_or(1.0),
            eos_gamma: a.take("eos.gamma")?.unwrap_or(1.4),
            alpha: a.take("init.alpha")?.unwrap_or(2.0),
            beta: a.take("init.beta")?.unwrap_or(20.0),
            kind,
            iterations: match (kind, a.take::<usize>("scheme.K")?) {
                (SchemeKind::Decoupled, k) => Some(k.unwrap_or(2)),
                (SchemeKind::Linearized, None | Some(1)) => None,
                (_, None) => None,
                (_, Some(_)) => {
                    return Err(ConfigError::Invalid {
                        key: "scheme.K",
                        message: format!("only applies to scheme.kind = decoupled, not {kind}"),
                    })
                }
            },
            newton_tol: a.take("newton.tol")?.unwrap_or(newton.tol),
            newton_max_iter: a.take("newton.max_iter")?.unwrap_or(newton.max_iter),
            output_dir,
            snapshot_times: a
                .take_list("output.snapshot_times")?
                .unwrap_or_else(|| vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]),
            diag_every: a.take("output.diag_every")?.unwrap_or(1),
            section_y: a.take("output.section_y")?.unwrap_or(0.0),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse a document and overlay flag overrides on it.
    pub fn parse(document: &str, flags: &[String]) -> Result<Self, ConfigError> {
        let merged = Assignments::parse_document(document)?.overlay(Assignments::parse_flags(flags)?);
        Self::from_assignments(&merged)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key: &'static str, e: baroflow_core::Error| ConfigError::Invalid {
            key,
            message: e.to_string(),
        };
        self.mesh().map_err(|e| invalid("mesh.M", e))?;
        self.eos().map_err(|e| invalid("eos", e))?;
        self.pulse().map_err(|e| invalid("init", e))?;
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(ConfigError::Invalid {
                key: "time.tau",
                message: format!("{} must be positive", self.tau),
            });
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(ConfigError::Invalid {
                key: "time.T",
                message: format!("{} must be non-negative", self.t_end),
            });
        }
        if self.iterations == Some(0) {
            return Err(ConfigError::Invalid {
                key: "scheme.K",
                message: "must be at least 1".into(),
            });
        }
        if self.newton_max_iter == 0 {
            return Err(ConfigError::Invalid {
                key: "newton.max_iter",
                message: "must be at least 1".into(),
            });
        }
        if !(self.newton_tol > 0.0) {
            return Err(ConfigError::Invalid {
                key: "newton.tol",
                message: format!("{} must be positive", self.newton_tol),
            });
        }
        if self.diag_every == 0 {
            return Err(ConfigError::Invalid {
                key: "output.diag_every",
                message: "must be at least 1".into(),
            });
        }
        if !(self.section_y >= self.domain.ymin && self.section_y <= self.domain.ymax) {
            return Err(ConfigError::Invalid {
                key: "output.section_y",
                message: format!("{} lies outside the domain", self.section_y),
            });
        }
        if self.snapshot_times.iter().any(|t| !t.is_finite()) {
            return Err(ConfigError::Invalid {
                key: "output.snapshot_times",
                message: "times must be finite".into(),
            });
        }
        // T / tau must be an integer; the remaining scheme checks repeat
        // the ones above.
        self.scheme().validate().map_err(|e| ConfigError::Invalid {
            key: "time.T",
            message: e.to_string(),
        })
    }

    pub fn mesh(&self) -> baroflow_core::Result<StructuredTriMesh> {
        StructuredTriMesh::new(self.domain, self.segments)
    }

    pub fn eos(&self) -> baroflow_core::Result<BarotropicEos> {
        BarotropicEos::new(self.eos_a, self.eos_gamma)
    }

    pub fn pulse(&self) -> baroflow_core::Result<GaussianPulse> {
        GaussianPulse::new(self.alpha, self.beta)
    }

    pub fn scheme(&self) -> SchemeConfig {
        let mut s = SchemeConfig::new(self.kind, self.tau, self.t_end).with_iterations(self.iterations.unwrap_or(1));
        s.newton.tol = self.newton_tol;
        s.newton.max_iter = self.newton_max_iter;
        s
    }

    pub fn num_nodes(&self) -> usize {
        (self.segments + 1) * (self.segments + 1)
    }

    /// Render as a document that parses back to `self`.
    pub fn serialize(&self) -> String {
        let times: Vec<String> = self.snapshot_times.iter().map(f64::to_string).collect();
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("domain.xmin", self.domain.xmin.to_string());
        put("domain.xmax", self.domain.xmax.to_string());
        put("domain.ymin", self.domain.ymin.to_string());
        put("domain.ymax", self.domain.ymax.to_string());
        put("mesh.M", self.segments.to_string());
        put("time.tau", self.tau.to_string());
        put("time.T", self.t_end.to_string());
        put("eos.a", self.eos_a.to_string());
        put("eos.gamma", self.eos_gamma.to_string());
        put("init.alpha", self.alpha.to_string());
        put("init.beta", self.beta.to_string());
        put("scheme.kind", self.kind.to_string());
        if let Some(k) = self.iterations {
            put("scheme.K", k.to_string());
        }
        put("newton.tol", self.newton_tol.to_string());
        put("newton.max_iter", self.newton_max_iter.to_string());
        put("output.dir", self.output_dir.display().to_string());
        put("output.snapshot_times", times.join(","));
        put("output.diag_every", self.diag_every.to_string());
        put("output.section_y", self.section_y.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn missing_mesh_size() {
        assert_eq!(RunConfig::parse("", &[]), Err(ConfigError::Missing("mesh.M")));
        assert_eq!(ConfigError::Missing("mesh.M").to_string(), "mesh.M missing");
    }

    #[test]
    fn reference_run() {
        let c = RunConfig::parse("", &flags("mesh.M=50 time.tau=0.005 time.T=5 scheme.kind=fully_implicit")).unwrap();
        assert_eq!(c.segments, 50);
        assert_eq!(c.scheme().num_steps(), 1000);
        assert_eq!(c.kind, SchemeKind::FullyImplicit);
        assert_eq!((c.eos_a, c.eos_gamma, c.alpha, c.beta), (1.0, 1.4, 2.0, 20.0));
        assert_eq!(c.snapshot_times, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn rejects_bad_values() {
        let err = RunConfig::parse("mesh.M = 10\ntime.tau = -1\n", &[]).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { key: "time.tau", .. }), "{err}");
        let err = RunConfig::parse("mesh.M = 10\ntime.tau = 0.3\ntime.T = 1\n", &[]).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { key: "time.T", .. }), "{err}");
        let err = RunConfig::parse("mesh.M = ten\n", &[]).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        let err = RunConfig::parse("mesh.M = 10\nmesh.N = 3\n", &[]).unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { .. }));
        let err = RunConfig::parse("mesh.M = 10\n\n  mesh.M = 3\n", &[]).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = RunConfig::parse("mesh.M 10\n", &[]).unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 1, .. }));
        assert!(RunConfig::parse("", &flags("--mesh.M")).is_err());
        assert!(RunConfig::parse("", &flags("mesh.M=4 scheme.kind=explicit")).is_err());
        assert!(RunConfig::parse("", &flags("mesh.M=4 scheme.K=3")).is_err());
        assert!(RunConfig::parse("", &flags("mesh.M=4 scheme.kind=decoupled scheme.K=0")).is_err());
        assert!(RunConfig::parse("", &flags("mesh.M=4 output.section_y=7")).is_err());
        assert!(RunConfig::parse("", &flags("mesh.M=0")).is_err());
    }

    #[test]
    fn flags_override_document() {
        let doc = "# reference\nmesh.M = 50\ntime.tau = 0.01\n";
        let c = RunConfig::parse(doc, &flags("--time.tau 0.005 --scheme.kind=decoupled")).unwrap();
        assert_eq!(c.tau, 0.005);
        assert_eq!(c.kind, SchemeKind::Decoupled);
        assert_eq!(c.iterations, Some(2));
        assert_eq!(c.segments, 50);
    }

    #[test]
    fn serialize_round_trip() {
        let c = RunConfig::parse(
            "",
            &flags("mesh.M=7 time.tau=0.1 time.T=0.3 scheme.kind=decoupled scheme.K=5 output.dir=/tmp/x output.snapshot_times=0.1,0.2"),
        )
        .unwrap();
        assert_eq!(RunConfig::parse(&c.serialize(), &[]).unwrap(), c);
        let empty = RunConfig::parse("", &flags("mesh.M=3 output.snapshot_times=")).unwrap();
        assert!(empty.snapshot_times.is_empty());
        assert_eq!(RunConfig::parse(&empty.serialize(), &[]).unwrap(), empty);
    }
}

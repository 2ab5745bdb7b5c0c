//! Flat `key = value` run configuration with dotted sections.
//!
//! ```text
//! # comment
//! n = 2
//! mode = interior
//! domain = square
//! grid.resolution = 512
//! schedule.alpha = 0.05
//! problem.f = gaussian
//! problem.f.amplitude = 2
//! problem.f.center = 0.5, 0.5
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::Domain;
use crate::problem::Preset;
use crate::scheduler::Mode;
use crate::stages::AssertionPolicy;

#[derive(Debug, Clone, Serialize)]
pub struct ScheduleConfig {
    pub alpha: f64,
    /// Defaults to `σ*/3` of the frame.
    pub sigma: Option<f64>,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "C_universal")]
    pub c_universal: f64,
    pub q_max: usize,
    /// Explicit `(a, b, c)`; skips the search when all three are given.
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub hat_mu_base: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub n: usize,
    pub mode: Mode,
    pub domain: Domain,
    pub seed: u64,
    pub resolution: usize,
    pub points_per_period: usize,
    /// Extension band around Ω; defaults to a tenth of the extent.
    pub pad: Option<f64>,
    pub schedule: ScheduleConfig,
    pub f: Preset,
    /// Dirichlet data; absent selects the background automatically.
    pub g: Option<Preset>,
    /// Initial `v^b` of the interior pipeline.
    pub vb: Preset,
    pub epsilon: Option<f64>,
    pub c_h: f64,
    pub policy: AssertionPolicy,
    pub residual_tests: usize,
    pub output_dir: PathBuf,
    pub dump_stages: bool,
    pub emit_plot_data: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 2,
            mode: Mode::Interior,
            domain: Domain::Square,
            seed: 0,
            resolution: 256,
            points_per_period: crate::corrugation::DEFAULT_POINTS_PER_PERIOD,
            pad: None,
            schedule: ScheduleConfig {
                alpha: 0.05,
                sigma: None,
                k: 4.0,
                c_universal: 2.0,
                q_max: 3,
                a: None,
                b: None,
                c: None,
                hat_mu_base: None,
            },
            f: Preset::Constant { value: 1.0 },
            g: None,
            vb: Preset::Constant { value: 0.0 },
            epsilon: None,
            c_h: 10.0,
            policy: AssertionPolicy::Strict,
            residual_tests: 16,
            output_dir: PathBuf::from("out"),
            dump_stages: false,
            emit_plot_data: false,
        }
    }
}

impl RunConfig {
    pub fn pad(&self) -> f64 {
        self.pad.unwrap_or(0.1 * self.domain.extent())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        text.parse()
    }
}

struct Entry {
    line: usize,
    value: String,
    used: bool,
}

struct Table {
    entries: BTreeMap<String, Entry>,
}

impl Table {
    fn parse(text: &str) -> Result<Table> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| Error::Config {
                line,
                key: body.to_string(),
                message: "expected `key = value`".into(),
            })?;
            let key = key.trim().to_string();
            if key.is_empty()
                || !key
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
            {
                return Err(Error::Config {
                    line,
                    key,
                    message: "keys use letters, digits, `_` and `.`".into(),
                });
            }
            let entry = Entry {
                line,
                value: value.trim().to_string(),
                used: false,
            };
            if let Some(prev) = entries.insert(key.clone(), entry) {
                return Err(Error::Config {
                    line,
                    key,
                    message: format!("duplicate key, first set on line {}", prev.line),
                });
            }
        }
        Ok(Table { entries })
    }

    fn error(&self, key: &str, message: impl Into<String>) -> Error {
        Error::Config {
            line: self.entries.get(key).map_or(0, |e| e.line),
            key: key.to_string(),
            message: message.into(),
        }
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            e.value.clone()
        })
    }

    fn get<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| self.error(key, format!("cannot parse `{v}`"))),
        }
    }

    fn list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|_| {
                    self.error(key, format!("expected comma-separated numbers, got `{v}`"))
                }),
        }
    }

    fn flag(&mut self, key: &str) -> Result<Option<bool>> {
        match self.raw(key).as_deref() {
            None => Ok(None),
            Some("true" | "yes" | "1") => Ok(Some(true)),
            Some("false" | "no" | "0") => Ok(Some(false)),
            Some(other) => Err(self.error(key, format!("expected true or false, got `{other}`"))),
        }
    }

    fn preset(&mut self, key: &str) -> Result<Option<Preset>> {
        let Some(kind) = self.raw(key) else {
            return Ok(None);
        };
        let sub = |s: &str| format!("{key}.{s}");
        let num = |t: &mut Table, s: &str, default: f64| -> Result<f64> {
            Ok(t.get::<f64>(&sub(s))?.unwrap_or(default))
        };
        let list = |t: &mut Table, s: &str| -> Result<Vec<f64>> {
            Ok(t.list(&sub(s))?.unwrap_or_default())
        };
        let preset = match kind.as_str() {
            "constant" => Preset::Constant {
                value: num(self, "value", 1.0)?,
            },
            "gaussian" => Preset::Gaussian {
                amplitude: num(self, "amplitude", 1.0)?,
                center: list(self, "center")?,
                width: num(self, "width", 0.2)?,
            },
            "polynomial" => Preset::Polynomial {
                c0: num(self, "c0", 0.0)?,
                lin: list(self, "lin")?,
                quad: list(self, "quad")?,
            },
            "trig" => Preset::Trig {
                amplitude: num(self, "amplitude", 1.0)?,
                freq: list(self, "freq")?,
                phase: num(self, "phase", 0.0)?,
            },
            "saddle" => Preset::Saddle {
                c: num(self, "c", 1.0)?,
            },
            "linear" => Preset::Linear {
                c0: num(self, "c0", 0.0)?,
                coeffs: list(self, "coeffs")?,
            },
            "file" => Preset::File {
                path: PathBuf::from(
                    self.raw(&sub("path"))
                        .ok_or_else(|| self.error(key, "file preset needs a `.path`"))?,
                ),
            },
            other => return Err(self.error(key, format!("unknown preset `{other}`"))),
        };
        Ok(Some(preset))
    }

    fn unused(&self) -> Option<(&String, &Entry)> {
        self.entries.iter().find(|(_, e)| !e.used)
    }
}

impl FromStr for RunConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut t = Table::parse(text)?;
        let mut cfg = RunConfig::default();
        if let Some(n) = t.get::<usize>("n")? {
            if !(2..=4).contains(&n) {
                return Err(t.error("n", "dimension must be 2, 3 or 4"));
            }
            cfg.n = n;
        }
        if let Some(m) = t.raw("mode") {
            cfg.mode = match m.as_str() {
                "interior" => Mode::Interior,
                "dirichlet" => Mode::Dirichlet,
                _ => {
                    return Err(
                        t.error("mode", format!("expected interior or dirichlet, got `{m}`"))
                    )
                }
            };
        }
        if let Some(d) = t.raw("domain") {
            cfg.domain = match d.as_str() {
                "square" => Domain::Square,
                "disc" => Domain::Disc,
                _ => return Err(t.error("domain", format!("expected square or disc, got `{d}`"))),
            };
        }
        if let Some(s) = t.get("seed")? {
            cfg.seed = s;
        }
        if let Some(r) = t.get("grid.resolution")? {
            cfg.resolution = r;
        }
        if let Some(p) = t.get("grid.points_per_period")? {
            cfg.points_per_period = p;
        }
        cfg.pad = t.get("grid.pad")?;
        let s = &mut cfg.schedule;
        if let Some(v) = t.get("schedule.alpha")? {
            s.alpha = v;
        }
        s.sigma = t.get("schedule.sigma")?;
        if let Some(v) = t.get("schedule.K")? {
            s.k = v;
        }
        if let Some(v) = t.get("schedule.C_universal")? {
            s.c_universal = v;
        }
        if let Some(v) = t.get("schedule.q_max")? {
            s.q_max = v;
        }
        s.a = t.get("schedule.a")?;
        s.b = t.get("schedule.b")?;
        s.c = t.get("schedule.c")?;
        s.hat_mu_base = t.get("schedule.hat_mu_base")?;
        let explicit = [s.a.is_some(), s.b.is_some(), s.c.is_some()];
        if explicit.iter().any(|&x| x) && !explicit.iter().all(|&x| x) {
            return Err(t.error(
                "schedule.a",
                "give all of schedule.a, schedule.b, schedule.c or none",
            ));
        }
        if let Some(f) = t.preset("problem.f")? {
            cfg.f = f;
        }
        cfg.g = t.preset("problem.g")?;
        if let Some(vb) = t.preset("problem.vb")? {
            cfg.vb = vb;
        }
        cfg.epsilon = t.get("problem.epsilon")?;
        if let Some(v) = t.get("stage.c_h")? {
            cfg.c_h = v;
        }
        if let Some(p) = t.raw("stage.policy") {
            cfg.policy = match p.as_str() {
                "strict" => AssertionPolicy::Strict,
                "record" => AssertionPolicy::Record,
                _ => {
                    return Err(t.error(
                        "stage.policy",
                        format!("expected strict or record, got `{p}`"),
                    ))
                }
            };
        }
        if let Some(v) = t.get("stage.residual_tests")? {
            cfg.residual_tests = v;
        }
        if let Some(d) = t.raw("output.dir") {
            cfg.output_dir = PathBuf::from(d);
        }
        if let Some(v) = t.flag("output.dump_stages")? {
            cfg.dump_stages = v;
        }
        if let Some(v) = t.flag("output.emit_plot_data")? {
            cfg.emit_plot_data = v;
        }
        if cfg.mode == Mode::Dirichlet && cfg.domain != Domain::Disc {
            return Err(t.error("mode", "dirichlet mode requires domain = disc"));
        }
        if cfg.g.is_some() && cfg.mode != Mode::Dirichlet {
            return Err(t.error("problem.g", "boundary data only applies in dirichlet mode"));
        }
        if let Some((key, e)) = t.unused() {
            return Err(Error::Config {
                line: e.line,
                key: key.clone(),
                message: "unknown key".into(),
            });
        }
        Ok(cfg)
    }
}

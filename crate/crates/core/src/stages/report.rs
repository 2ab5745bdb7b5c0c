use std::fmt;

use serde::Serialize;

use crate::scheduler::Mode;
use crate::verify::ResidualReport;

/// One measured inequality `value ≤ bound + allowance`.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub allowance: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: &str, value: f64, bound: f64, allowance: f64) -> Self {
        Check {
            name: name.to_string(),
            value,
            bound,
            allowance,
            pass: value <= bound + allowance,
        }
    }

    /// A yes/no condition, recorded as `0 ≤ 0` or `1 ≤ 0`.
    pub fn flag(name: &str, ok: bool) -> Self {
        Check::new(name, if ok { 0.0 } else { 1.0 }, 0.0, 0.0)
    }

    /// `bound + allowance − value`.
    pub fn margin(&self) -> f64 {
        self.bound + self.allowance - self.value
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub mollify_s: f64,
    pub decompose_s: f64,
    pub steps_s: f64,
    pub measure_s: f64,
}

/// Measurements for the stage producing `(V_q, W_q)`; `q = 0` is the
/// initialisation.
#[derive(Debug, Clone, Serialize)]
pub struct DeficitReport {
    pub q: usize,
    pub mode: Mode,
    pub deficit_norm: f64,
    pub deficit_bound: f64,
    pub eps_h: f64,
    pub checks: Vec<Check>,
    /// Active points where the normalised deficit left the σ*-ball.
    pub clamped_points: usize,
    pub warnings: Vec<String>,
    /// Very weak residual of the rescaled iterate, when computed.
    pub residual: Option<ResidualReport>,
    /// Measured norms, keyed by name.
    pub norms: Vec<(String, f64)>,
    pub timings: Timings,
}

impl DeficitReport {
    pub fn new(q: usize, mode: Mode) -> Self {
        DeficitReport {
            q,
            mode,
            deficit_norm: 0.0,
            deficit_bound: 0.0,
            eps_h: 0.0,
            checks: Vec::new(),
            clamped_points: 0,
            warnings: Vec::new(),
            residual: None,
            norms: Vec::new(),
            timings: Timings::default(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn norm(&self, name: &str) -> Option<f64> {
        self.norms.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    pub fn failure_summary(&self) -> String {
        let failed: Vec<String> = self
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| {
                format!(
                    "{} = {:.4e} > {:.4e} + {:.1e}",
                    c.name, c.value, c.bound, c.allowance
                )
            })
            .collect();
        if failed.is_empty() {
            "no failed checks".into()
        } else {
            failed.join("; ")
        }
    }

    /// Single-line JSON log record.
    pub fn log_line(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            q: usize,
            norms: &'a [(String, f64)],
            deficit: f64,
            bound: f64,
            margins: Vec<(&'a str, f64)>,
            timings: &'a Timings,
        }
        serde_json::to_string(&Line {
            q: self.q,
            norms: &self.norms,
            deficit: self.deficit_norm,
            bound: self.deficit_bound,
            margins: self
                .checks
                .iter()
                .map(|c| (c.name.as_str(), c.margin()))
                .collect(),
            timings: &self.timings,
        })
        .expect("report serialises")
    }
}

impl fmt::Display for DeficitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "stage q={} ({:?}): |D| = {:.4e}, bound {:.4e}, eps_h {:.1e}",
            self.q, self.mode, self.deficit_norm, self.deficit_bound, self.eps_h
        )?;
        for c in &self.checks {
            writeln!(
                f,
                "  {:<4} {:<28} {:>12.4e} <= {:>12.4e}",
                if c.pass { "ok" } else { "FAIL" },
                c.name,
                c.value,
                c.bound + c.allowance
            )?;
        }
        for w in &self.warnings {
            writeln!(f, "  warning: {w}")?;
        }
        Ok(())
    }
}

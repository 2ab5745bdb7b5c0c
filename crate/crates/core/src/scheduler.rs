//! Double-exponential parameter sequences and the inequality ledger they must
//! satisfy.
//!
//! A schedule is stored through `ln a`, and `ln δ_q = −b^q ln a`,
//! `ln λ_q = c b^q ln a`. The ledger is evaluated entirely in log form, so it
//! stays meaningful for schedules whose values do not fit in an `f64`.

use std::fmt;
use std::ops::RangeInclusive;

use serde::Serialize;

use crate::error::{Error, Result};

/// Natural log of the largest finite `f64`, with a little headroom.
pub const LN_FLOAT_MAX: f64 = 709.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Interior,
    Dirichlet,
}

#[derive(Debug, Clone, Serialize)]
pub struct Schedule {
    pub ln_a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub sigma: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "C_universal")]
    pub c_universal: f64,
    pub q_max: usize,
    pub n: usize,
    pub n_star: usize,
    pub sigma_star: f64,
    pub mode: Mode,
    /// `‖ψ‖₁`, only used in Dirichlet mode.
    pub psi_norm: f64,
    /// Replaces the base `C/(σδ₁)` of the initialisation frequencies.
    pub hat_mu_base: Option<f64>,
}

/// Quantities for the stage `q → q+1`.
#[derive(Debug, Clone, Serialize)]
pub struct StageParams {
    pub q: usize,
    pub delta_q: f64,
    pub delta_q1: f64,
    pub delta_q2: f64,
    pub lambda_q: f64,
    pub lambda_q1: f64,
    pub mu0: f64,
    pub l: f64,
    /// `μ_0, μ_1, …, μ_{N*}` with `μ_{N*} = λ_{q+1}`.
    pub mus: Vec<f64>,
}

impl Schedule {
    pub fn a(&self) -> f64 {
        self.ln_a.exp()
    }

    fn bq(&self, q: usize) -> f64 {
        self.b.powi(q as i32)
    }

    pub fn ln_delta(&self, q: usize) -> f64 {
        -self.bq(q) * self.ln_a
    }

    pub fn ln_lambda(&self, q: usize) -> f64 {
        self.c * self.bq(q) * self.ln_a
    }

    /// `ln(K δ_{q+1}^{−1/2} δ_q^{1/2} λ_q)`.
    pub fn ln_mu0(&self, q: usize) -> f64 {
        self.k.ln() - 0.5 * self.ln_delta(q + 1) + 0.5 * self.ln_delta(q) + self.ln_lambda(q)
    }

    /// `ln(σ / (C μ₀))`.
    pub fn ln_l(&self, q: usize) -> f64 {
        self.sigma.ln() - self.c_universal.ln() - self.ln_mu0(q)
    }

    /// `ln μ_i = (1 − i/N*) ln μ₀ + (i/N*) ln λ_{q+1}`.
    pub fn ln_mu(&self, q: usize, i: usize) -> f64 {
        let s = i as f64 / self.n_star as f64;
        (1.0 - s) * self.ln_mu0(q) + s * self.ln_lambda(q + 1)
    }

    pub fn ln_hat_base(&self) -> f64 {
        match self.hat_mu_base {
            Some(b) => b.ln(),
            None => self.c_universal.ln() - self.sigma.ln() - self.ln_delta(1),
        }
    }

    fn checked_exp(what: &str, q: usize, ln: f64) -> Result<f64> {
        if !(ln.abs() <= LN_FLOAT_MAX) {
            return Err(Error::ScheduleOverflow(format!(
                "{what} at q = {q} has natural log {ln:.4e}"
            )));
        }
        Ok(ln.exp())
    }

    pub fn delta(&self, q: usize) -> Result<f64> {
        Self::checked_exp("delta", q, self.ln_delta(q))
    }

    pub fn lambda(&self, q: usize) -> Result<f64> {
        Self::checked_exp("lambda", q, self.ln_lambda(q))
    }

    pub fn sequences(&self, q: usize) -> Result<StageParams> {
        let mus = (0..=self.n_star)
            .map(|i| Self::checked_exp("mu", q, self.ln_mu(q, i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(StageParams {
            q,
            delta_q: self.delta(q)?,
            delta_q1: self.delta(q + 1)?,
            delta_q2: self.delta(q + 2)?,
            lambda_q: self.lambda(q)?,
            lambda_q1: self.lambda(q + 1)?,
            mu0: mus[0],
            l: Self::checked_exp("l", q, self.ln_l(q))?,
            mus,
        })
    }

    /// Initialisation frequencies `μ̂_i = (C/(σδ₁))^i`, `i = 1..N*`.
    pub fn hat_mus(&self) -> Result<Vec<f64>> {
        let base = self.ln_hat_base();
        (1..=self.n_star)
            .map(|i| Self::checked_exp("hat mu", 0, i as f64 * base))
            .collect()
    }

    /// Log of the largest corrugation frequency `μ_i`, `i ≥ 1`, of a run up
    /// to `q_max`; −∞ when the run corrugates nothing.
    pub fn ln_max_frequency(&self) -> f64 {
        let mut ln = (0..self.q_max)
            .flat_map(|q| (1..=self.n_star).map(move |i| self.ln_mu(q, i)))
            .fold(f64::NEG_INFINITY, f64::max);
        if self.mode == Mode::Dirichlet {
            ln = ln.max(self.n_star as f64 * self.ln_hat_base());
        }
        ln
    }

    /// Discretisation allowance `C_h h² λ_{q+1}²`.
    pub fn eps_h(&self, c_h: f64, h: f64, q: usize) -> f64 {
        c_h * h * h * (2.0 * self.ln_lambda(q + 1)).exp()
    }

    /// Terms `δ_{q+1}^{1/2}` and `δ_{q+1}^{1/2} λ_{q+1}^α` for q = 0..terms,
    /// as natural logs.
    pub fn convergence_terms(&self, terms: usize) -> (Vec<f64>, Vec<f64>) {
        let c0 = (0..terms).map(|q| 0.5 * self.ln_delta(q + 1)).collect();
        let c1a = (0..terms)
            .map(|q| 0.5 * self.ln_delta(q + 1) + self.alpha * self.ln_lambda(q + 1))
            .collect();
        (c0, c1a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryKind {
    /// Part of the mathematical feasibility question.
    Proof,
    /// Needed only to materialise the schedule in floating point.
    Runtime,
}

#[derive(Debug, Clone, Serialize)]
pub struct LedgerEntry {
    pub name: String,
    pub statement: String,
    pub kind: EntryKind,
    pub q_from: usize,
    pub q_to: usize,
    /// Smallest `ln(rhs) − ln(lhs)` (or plain difference) over the range.
    pub worst_margin: f64,
    pub worst_q: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LedgerReport {
    pub entries: Vec<LedgerEntry>,
}

impl LedgerReport {
    /// All proof inequalities hold.
    pub fn feasible(&self) -> bool {
        self.entries
            .iter()
            .filter(|e| e.kind == EntryKind::Proof)
            .all(|e| e.pass)
    }

    /// Feasible and representable in `f64`.
    pub fn runnable(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    /// Every runtime entry holds, whatever the proof entries say.
    pub fn representable(&self) -> bool {
        self.entries
            .iter()
            .filter(|e| e.kind == EntryKind::Runtime)
            .all(|e| e.pass)
    }

    pub fn failures(&self) -> Vec<&LedgerEntry> {
        self.entries.iter().filter(|e| !e.pass).collect()
    }

    pub fn entry(&self, name: &str) -> Option<&LedgerEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

impl fmt::Display for LedgerReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = self.entries.iter().map(|e| e.name.len()).max().unwrap_or(4);
        writeln!(
            f,
            "{:<w$}  {:<7}  {:>5}  {:>13}  {:<4}  statement",
            "name", "kind", "q", "margin", "ok"
        )?;
        for e in &self.entries {
            let kind = match e.kind {
                EntryKind::Proof => "proof",
                EntryKind::Runtime => "runtime",
            };
            writeln!(
                f,
                "{:<w$}  {:<7}  {:>5}  {:>13.6e}  {:<4}  {}",
                e.name,
                kind,
                format!("{}-{}", e.q_from, e.q_to),
                e.worst_margin,
                if e.pass { "pass" } else { "FAIL" },
                e.statement
            )?;
        }
        Ok(())
    }
}

fn entry<F: Fn(usize) -> f64>(
    name: &str,
    statement: &str,
    kind: EntryKind,
    qs: RangeInclusive<usize>,
    margin: F,
) -> LedgerEntry {
    let (q_from, q_to) = (*qs.start(), *qs.end());
    let (worst_q, worst_margin) =
        qs.map(|q| (q, margin(q)))
            .fold((q_from, f64::INFINITY), |acc, x| {
                if x.1 < acc.1 || x.1.is_nan() {
                    x
                } else {
                    acc
                }
            });
    LedgerEntry {
        name: name.into(),
        statement: statement.into(),
        kind,
        q_from,
        q_to,
        worst_margin,
        worst_q,
        pass: worst_margin >= 0.0,
    }
}

/// Evaluates every inequality the construction relies on, for q = 0..=q_max.
pub fn check_ledger(s: &Schedule) -> LedgerReport {
    use EntryKind::*;
    let qs = || 0..=s.q_max;
    let ln_sigma = s.sigma.ln();
    let ln_c = s.c_universal.ln();
    let nstar = s.n_star as f64;
    let mut entries = vec![
        entry(
            "parameters",
            "a > 1, 1 < b < 2, c > 0, K > 1, C >= 1",
            Proof,
            0..=0,
            |_| {
                [
                    s.ln_a,
                    s.b - 1.0,
                    2.0 - s.b,
                    s.c,
                    s.k - 1.0,
                    s.c_universal - 1.0,
                ]
                .into_iter()
                .fold(f64::INFINITY, f64::min)
            },
        ),
        entry(
            "sigma_range",
            "0 < sigma <= sigma_star / 3",
            Proof,
            0..=0,
            |_| {
                if s.sigma > 0.0 {
                    s.sigma_star / 3.0 - s.sigma
                } else {
                    s.sigma
                }
            },
        ),
        entry("holder_window", "c * alpha < 1/2", Proof, 0..=0, |_| {
            // strict inequality
            let m = 0.5 - s.c * s.alpha;
            if m == 0.0 {
                -f64::MIN_POSITIVE
            } else {
                m
            }
        }),
        entry(
            "initial_frequency",
            "delta_1^(-N*) <= delta_0^(1/2) lambda_0",
            Proof,
            0..=0,
            |_| 0.5 * s.ln_delta(0) + s.ln_lambda(0) + nstar * s.ln_delta(1),
        ),
        entry("first_delta", "delta_1 <= sigma", Proof, 0..=0, |_| {
            ln_sigma - s.ln_delta(1)
        }),
        entry(
            "delta_ratio",
            "delta_(q+2) <= sigma delta_(q+1)",
            Proof,
            qs(),
            |q| ln_sigma + s.ln_delta(q + 1) - s.ln_delta(q + 2),
        ),
        entry(
            "mollification_length",
            "l <= sigma delta_(q+2) / C",
            Proof,
            qs(),
            |q| ln_sigma + s.ln_delta(q + 2) - ln_c - s.ln_l(q),
        ),
        entry(
            "frequency_ratio",
            "mu_0 / lambda_(q+1) <= (sigma delta_(q+2) / (C delta_(q+1)))^N*",
            Proof,
            qs(),
            |q| {
                nstar * (ln_sigma + s.ln_delta(q + 2) - ln_c - s.ln_delta(q + 1))
                    - (s.ln_mu0(q) - s.ln_lambda(q + 1))
            },
        ),
        entry(
            "first_step_frequency",
            "C mu_0 / sigma <= mu_1",
            Proof,
            qs(),
            |q| s.ln_mu(q, 1) - (ln_c + s.ln_mu0(q) - ln_sigma),
        ),
    ];
    if s.mode == Mode::Dirichlet {
        entries.push(entry(
            "cutoff_collar",
            "l <= delta_(q+2) / (4 |psi|_1 + 1)",
            Proof,
            qs(),
            |q| s.ln_delta(q + 2) - (4.0 * s.psi_norm + 1.0).ln() - s.ln_l(q),
        ));
        entries.push(entry(
            "cutoff_gradient",
            "sqrt(K) delta_(q+1)^(-1/2) l <= sigma delta_(q+2) / C",
            Proof,
            qs(),
            |q| {
                ln_sigma + s.ln_delta(q + 2)
                    - ln_c
                    - (0.5 * s.k.ln() - 0.5 * s.ln_delta(q + 1) + s.ln_l(q))
            },
        ));
    }
    let top = s.q_max;
    entries.push(entry(
        "float_range",
        "every sequence value up to q_max is a finite f64",
        Runtime,
        top..=top,
        |_| {
            let worst = s
                .ln_max_frequency()
                .max(s.ln_lambda(top + 1))
                .max(-s.ln_delta(top + 2))
                .max(-s.ln_l(top))
                .max(s.ln_a);
            LN_FLOAT_MAX - worst
        },
    ));
    LedgerReport { entries }
}

/// Inputs of the feasibility search.
#[derive(Debug, Clone)]
pub struct SearchInput {
    pub n: usize,
    pub alpha: f64,
    pub sigma: f64,
    pub k: f64,
    pub c_universal: f64,
    pub psi_norm: f64,
    pub sigma_star: f64,
    pub q_max: usize,
    pub mode: Mode,
}

#[derive(Debug, Clone)]
pub enum Feasibility {
    Feasible {
        schedule: Schedule,
        report: LedgerReport,
        candidates_tried: usize,
    },
    Infeasible {
        reason: String,
        /// Ledger entries that cannot hold together.
        violated: Vec<String>,
    },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible { .. })
    }

    pub fn schedule(&self) -> Option<&Schedule> {
        match self {
            Feasibility::Feasible { schedule, .. } => Some(schedule),
            Feasibility::Infeasible { .. } => None,
        }
    }
}

/// Exponent threshold `1/(1 + 2N*) = 1/(1 + n + n²)`.
pub fn alpha_threshold(n: usize) -> f64 {
    1.0 / (1.0 + (n * (n + 1)) as f64)
}

const B_GRID: [f64; 12] = [
    1.5, 1.3, 1.2, 1.1, 1.05, 1.02, 1.01, 1.005, 1.002, 1.001, 1.0005, 1.0002,
];
const C_FRACTIONS: [f64; 5] = [0.5, 0.25, 0.75, 0.1, 0.9];
const LN_A_CAP: f64 = 1e15;

/// Searches `(b, c)` over a grid with `N* b + 1/2 < c < 1/(2α)` and grows `a`
/// until the proof inequalities hold. Returns the passing candidate with the
/// smallest top frequency `λ_{q_max+1}`.
pub fn find_feasible(input: &SearchInput) -> Feasibility {
    let n_star = input.n * (input.n + 1) / 2;
    if !(input.alpha > 0.0 && input.alpha < 1.0) {
        return Feasibility::Infeasible {
            reason: format!("alpha = {} is outside (0, 1)", input.alpha),
            violated: vec!["holder_window".into()],
        };
    }
    let threshold = alpha_threshold(input.n);
    if input.alpha >= threshold {
        return Feasibility::Infeasible {
            reason: format!(
                "alpha = {} >= 1/(1+n+n^2) = {:.6}: c >= N* b + 1/2 > N* + 1/2 and c alpha < 1/2 are incompatible",
                input.alpha, threshold
            ),
            violated: vec!["initial_frequency".into(), "holder_window".into()],
        };
    }
    let base = Schedule {
        ln_a: std::f64::consts::LN_2,
        b: 1.5,
        c: 1.0,
        alpha: input.alpha,
        sigma: input.sigma,
        k: input.k,
        c_universal: input.c_universal,
        q_max: input.q_max,
        n: input.n,
        n_star,
        sigma_star: input.sigma_star,
        mode: input.mode,
        psi_norm: input.psi_norm,
        hat_mu_base: None,
    };
    let fixed = check_ledger(&base);
    if let Some(e) = fixed.entry("sigma_range").filter(|e| !e.pass) {
        return Feasibility::Infeasible {
            reason: format!("`{}` fails for every (a, b, c)", e.statement),
            violated: vec!["sigma_range".into()],
        };
    }
    if input.k <= 1.0 || input.c_universal < 1.0 {
        return Feasibility::Infeasible {
            reason: "K must exceed 1 and C_universal must be at least 1".into(),
            violated: vec!["parameters".into()],
        };
    }
    let c_max = 0.5 / input.alpha;
    let mut best: Option<(f64, Schedule, LedgerReport)> = None;
    let mut tried = 0;
    for &b in &B_GRID {
        let c_min = n_star as f64 * b + 0.5;
        if c_min >= c_max {
            continue;
        }
        for &frac in &C_FRACTIONS {
            let c = c_min + frac * (c_max - c_min);
            tried += 1;
            if let Some(s) = smallest_passing_a(Schedule {
                b,
                c,
                ..base.clone()
            }) {
                let top = s.ln_lambda(s.q_max + 1);
                if best.as_ref().map_or(true, |(t, _, _)| top < *t) {
                    let report = check_ledger(&s);
                    best = Some((top, s, report));
                }
            }
        }
    }
    match best {
        Some((_, schedule, report)) => Feasibility::Feasible {
            schedule,
            report,
            candidates_tried: tried,
        },
        None => Feasibility::Infeasible {
            reason: "no (a, b, c) on the search grid satisfies the ledger".into(),
            violated: fixed
                .failures()
                .iter()
                .filter(|e| e.kind == EntryKind::Proof)
                .map(|e| e.name.clone())
                .collect(),
        },
    }
}

/// Doubles `ln a` until the proof inequalities pass, then bisects back to
/// within a factor 2 of the smallest passing `a`.
fn smallest_passing_a(mut s: Schedule) -> Option<Schedule> {
    let passes = |s: &Schedule, ln_a: f64| check_ledger(&Schedule { ln_a, ..s.clone() }).feasible();
    let mut lo = 0.0f64;
    let mut hi = std::f64::consts::LN_2;
    while !passes(&s, hi) {
        lo = hi;
        hi *= 2.0;
        if hi > LN_A_CAP {
            return None;
        }
    }
    while hi - lo > std::f64::consts::LN_2 {
        let mid = 0.5 * (lo + hi);
        if passes(&s, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    s.ln_a = hi;
    Some(s)
}

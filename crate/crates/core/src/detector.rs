//! Analytic design model of the QND photodetector.
//!
//! Scaling laws, with calibration constants `C_ba`, `C_err`, `C_φ`:
//!
//! ```text
//! δn_ba  = C_ba · γ² ⟨n⟩ N / (Δ⁴ τ_p)
//! δn_err = C_err · Δ / (γ² √N)
//! φ₁     = C_φ · γ² τ_p / Δ          (single-photon electron phase)
//! ```
//!
//! The response range is `n_min = δn_err / ε_err` (relative error target;
//! `δn_err` does not depend on `⟨n⟩`) and `n_max = π / φ₁` (the electron
//! phase must stay below `π`). Because `δn_ba / ⟨n⟩` does not depend on
//! `⟨n⟩`, the relative-backaction target is a constraint on the design
//! parameters alone: it either holds over the whole range or nowhere.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack when comparing a design quantity against its target.
pub const CONSTRAINT_RTOL: f64 = 1e-9;

/// Relative distance within which a satisfied constraint counts as binding.
pub const BINDING_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub c_ba: f64,
    pub c_err: f64,
    pub c_phi: f64,
}

impl Default for Calibration {
    fn default() -> Self {
        Self { c_ba: 1.0, c_err: 1.0, c_phi: 1.0 }
    }
}

/// Operating-point values the calibration is solved from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationAnchors {
    /// `δn_ba / ⟨n⟩` at the reference design.
    pub backaction_ratio: f64,
    /// `δn_err` at the reference design.
    pub error: f64,
    /// `n_max` at the reference design.
    pub n_max: f64,
}

impl CalibrationAnchors {
    /// `δn_ba/⟨n⟩ ≈ 10⁻²`, `δn_err ≈ 10²`, `n_max ≈ 10⁶`.
    pub const REFERENCE: Self = Self { backaction_ratio: 1e-2, error: 1e2, n_max: 1e6 };
}

impl Calibration {
    /// Solves the three model equations for the three constants so that
    /// `reference` reproduces `anchors` exactly.
    pub fn from_anchors(reference: &DesignParameters, anchors: &CalibrationAnchors) -> Result<Self> {
        reference.validate()?;
        for (name, v) in
            [("backaction ratio", anchors.backaction_ratio), ("error", anchors.error), ("n_max", anchors.n_max)]
        {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("anchor {name} must be positive, got {v}")));
            }
        }
        let DesignParameters { gamma, delta, tau_p, electrons } = *reference;
        let n = electrons as f64;
        let g2 = gamma * gamma;
        Ok(Self {
            c_ba: anchors.backaction_ratio * delta.powi(4) * tau_p / (g2 * n),
            c_err: anchors.error * g2 * n.sqrt() / delta,
            c_phi: PI * delta / (anchors.n_max * g2 * tau_p),
        })
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("C_ba", self.c_ba), ("C_err", self.c_err), ("C_phi", self.c_phi)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// The free design parameters, without calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignParameters {
    pub gamma: f64,
    pub delta: f64,
    pub tau_p: f64,
    pub electrons: u64,
}

impl DesignParameters {
    /// `γ = Δ = τ_p = 1`, `N = 10⁴`: the point [`CalibrationAnchors::REFERENCE`]
    /// is attached to in the reference fixture.
    pub const REFERENCE: Self = Self { gamma: 1.0, delta: 1.0, tau_p: 1.0, electrons: 10_000 };

    fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma", self.gamma), ("delta", self.delta), ("tau_p", self.tau_p)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.electrons < 1 {
            return Err(Error::InvalidParameter("N must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorDesign {
    pub gamma: f64,
    pub delta: f64,
    pub tau_p: f64,
    pub electrons: u64,
    pub calibration: Calibration,
}

impl DetectorDesign {
    pub fn new(p: DesignParameters, calibration: Calibration) -> Result<Self> {
        p.validate()?;
        calibration.validate()?;
        Ok(Self { gamma: p.gamma, delta: p.delta, tau_p: p.tau_p, electrons: p.electrons, calibration })
    }

    pub fn parameters(&self) -> DesignParameters {
        DesignParameters { gamma: self.gamma, delta: self.delta, tau_p: self.tau_p, electrons: self.electrons }
    }

    /// `δn_ba / ⟨n⟩`.
    pub fn relative_backaction(&self) -> f64 {
        self.calibration.c_ba * self.gamma.powi(2) * self.electrons as f64 / (self.delta.powi(4) * self.tau_p)
    }

    /// `φ₁`.
    pub fn phase_per_photon(&self) -> f64 {
        self.calibration.c_phi * self.gamma.powi(2) * self.tau_p / self.delta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignTargets {
    pub eps_ba: f64,
    pub eps_err: f64,
    pub tau_p_min: f64,
}

impl DesignTargets {
    /// `ε_ba, ε_err ≲ 10⁻²` at `τ_p ≥ 1` (10 ps in the fixture's time unit).
    pub const REFERENCE: Self = Self { eps_ba: 1e-2, eps_err: 1e-2, tau_p_min: 1.0 };

    pub fn new(eps_ba: f64, eps_err: f64, tau_p_min: f64) -> Result<Self> {
        let t = Self { eps_ba, eps_err, tau_p_min };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("eps_ba", self.eps_ba), ("eps_err", self.eps_err)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParameter(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if !(self.tau_p_min.is_finite() && self.tau_p_min > 0.0) {
            return Err(Error::InvalidParameter(format!("tau_p_min must be positive, got {}", self.tau_p_min)));
        }
        Ok(())
    }
}

/// Design constraints, as labeled in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Constraint {
    /// `δn_ba/⟨n⟩ ≤ ε_ba`.
    Backaction,
    /// `φ₁ · n_max ≤ π`; defines `n_max`, so it always binds.
    PhaseShift,
    /// `n_min ≤ n_max`: the relative-error target is reachable below the
    /// phase limit.
    ErrorRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub n_min: f64,
    pub n_max: f64,
    pub delta_n_err: f64,
    pub entropy_bits: f64,
    pub feasible: bool,
    /// Active constraints when feasible, violated ones otherwise.
    pub binding_constraints: Vec<Constraint>,
    /// Constraint with the largest relative violation, when infeasible.
    pub most_violated: Option<Constraint>,
    /// `δn_err < √n_min`.
    pub below_standard_quantum_limit: bool,
}

/// `δn_ba = C_ba γ² ⟨n⟩ N / (Δ⁴ τ_p)`.
pub fn backaction_model(d: &DetectorDesign, n_mean: f64) -> Result<f64> {
    if !(n_mean >= 0.0) {
        return Err(Error::InvalidParameter(format!("mean photon number must be nonnegative, got {n_mean}")));
    }
    Ok(d.relative_backaction() * n_mean)
}

/// `δn_err = C_err Δ / (γ² √N)`.
pub fn error_model(d: &DetectorDesign) -> f64 {
    d.calibration.c_err * d.delta / (d.gamma.powi(2) * (d.electrons as f64).sqrt())
}

/// `(n_min, n_max)`; infeasible when the backaction target fails or the
/// range is empty.
pub fn response_range(d: &DetectorDesign, t: &DesignTargets) -> Result<(f64, f64)> {
    t.validate()?;
    let r = evaluate(d, t)?;
    if !r.feasible {
        let c = r.most_violated.expect("infeasible report names a constraint");
        return Err(Error::Infeasible(format!(
            "{c:?} violated (n_min = {}, n_max = {}, relative backaction = {})",
            r.n_min,
            r.n_max,
            d.relative_backaction()
        )));
    }
    Ok((r.n_min, r.n_max))
}

/// `log₂((n_max − n_min) / δn_err)`, clamped at zero when the range is below
/// one resolution element.
pub fn entropy_bits(n_min: f64, n_max: f64, delta_n_err: f64) -> Result<f64> {
    if !(n_max > n_min) {
        return Err(Error::InvalidParameter(format!("empty range [{n_min}, {n_max}]")));
    }
    if !(delta_n_err > 0.0) {
        return Err(Error::InvalidParameter(format!("resolution must be positive, got {delta_n_err}")));
    }
    let ratio = (n_max - n_min) / delta_n_err;
    Ok(if ratio <= 1.0 { 0.0 } else { ratio.log2() })
}

/// Number of distinguishable mean photon numbers, `(n_max − n_min)/δn_err`.
pub fn distinguishable_values(n_min: f64, n_max: f64, delta_n_err: f64) -> f64 {
    (n_max - n_min) / delta_n_err
}

/// `δn_err < √⟨n⟩` for every `⟨n⟩` in the range, i.e. at `n_min`.
pub fn sql_check(d: &DetectorDesign, n_range: (f64, f64)) -> bool {
    error_model(d) < n_range.0.sqrt()
}

fn within(value: f64, limit: f64) -> bool {
    value <= limit * (1.0 + CONSTRAINT_RTOL)
}

fn near(value: f64, limit: f64) -> bool {
    (value - limit).abs() <= BINDING_RTOL * limit.abs()
}

/// Full report for one design point.
pub fn evaluate(d: &DetectorDesign, t: &DesignTargets) -> Result<DesignReport> {
    t.validate()?;
    let delta_n_err = error_model(d);
    let n_min = delta_n_err / t.eps_err;
    let n_max = PI / d.phase_per_photon();
    let ba = d.relative_backaction();

    // Relative violations, positive when violated.
    let violations = [
        (Constraint::Backaction, ba / t.eps_ba - 1.0, within(ba, t.eps_ba)),
        (Constraint::ErrorRange, n_min / n_max - 1.0, within(n_min, n_max)),
    ];
    let feasible = violations.iter().all(|v| v.2);

    let (binding_constraints, most_violated, entropy) = if feasible {
        let mut b = vec![Constraint::PhaseShift];
        if near(ba, t.eps_ba) {
            b.push(Constraint::Backaction);
        }
        if near(n_min, n_max) {
            b.push(Constraint::ErrorRange);
        }
        b.sort();
        let e = if n_max > n_min { entropy_bits(n_min, n_max, delta_n_err)? } else { 0.0 };
        (b, None, e)
    } else {
        let violated: Vec<Constraint> = violations.iter().filter(|v| !v.2).map(|v| v.0).collect();
        let worst = violations.iter().filter(|v| !v.2).max_by(|a, b| a.1.total_cmp(&b.1)).map(|v| v.0);
        (violated, worst, 0.0)
    };

    Ok(DesignReport {
        n_min,
        n_max,
        delta_n_err,
        entropy_bits: entropy,
        feasible,
        binding_constraints,
        most_violated,
        below_standard_quantum_limit: sql_check(d, (n_min, n_max)),
    })
}

/// Inclusive log-spaced search range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRange {
    pub min: f64,
    pub max: f64,
}

impl LogRange {
    pub fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min > 0.0 && self.max >= self.min) {
            return Err(Error::InvalidParameter(format!(
                "{name} bounds [{}, {}] are not a positive range",
                self.min, self.max
            )));
        }
        Ok(())
    }

    /// `points` values evenly spaced in `ln`, endpoints included.
    fn grid(&self, points: usize) -> Vec<f64> {
        if points <= 1 || self.min == self.max {
            return vec![self.min];
        }
        let (a, b) = (self.min.ln(), self.max.ln());
        (0..points)
            .map(|i| match i {
                0 => self.min,
                i if i == points - 1 => self.max,
                i => (a + (b - a) * i as f64 / (points - 1) as f64).exp(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignBounds {
    pub gamma: LogRange,
    pub delta: LogRange,
    pub electrons: LogRange,
    /// Grid points per axis and stage.
    pub points: usize,
}

impl DesignBounds {
    /// Bounds used with the reference fixture: the reference design sits at
    /// the corner of largest feasible `N`.
    pub const REFERENCE: Self = Self {
        gamma: LogRange { min: 1.0, max: 10.0 },
        delta: LogRange { min: 0.1, max: 1.0 },
        electrons: LogRange { min: 1e2, max: 1e6 },
        points: 13,
    };

    fn validate(&self) -> Result<()> {
        self.gamma.validate("gamma")?;
        self.delta.validate("delta")?;
        self.electrons.validate("N")?;
        if self.electrons.max < 1.0 {
            return Err(Error::InvalidParameter("N bounds contain no integer ≥ 1".into()));
        }
        if self.points < 1 {
            return Err(Error::InvalidParameter("at least one grid point per axis".into()));
        }
        Ok(())
    }

    fn electron_grid(&self, range: LogRange) -> Vec<u64> {
        let mut ns: Vec<u64> = range
            .grid(self.points)
            .into_iter()
            .map(|x| {
                (x.round() as u64).clamp(self.electrons.min.ceil().max(1.0) as u64, self.electrons.max.floor() as u64)
            })
            .collect();
        ns.dedup();
        ns
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    design: DetectorDesign,
    report: DesignReport,
}

impl Candidate {
    fn key(&self) -> (f64, f64, u64) {
        (self.design.gamma, self.design.delta, self.design.electrons)
    }

    fn worst_violation(&self, t: &DesignTargets) -> f64 {
        let ba = self.design.relative_backaction() / t.eps_ba - 1.0;
        let range = self.report.n_min / self.report.n_max - 1.0;
        ba.max(range)
    }
}

fn lexicographically_before(a: &Candidate, b: &Candidate) -> bool {
    let (ka, kb) = (a.key(), b.key());
    ka.0.total_cmp(&kb.0).then(ka.1.total_cmp(&kb.1)).then(ka.2.cmp(&kb.2)).is_lt()
}

/// Picks the best candidate: highest entropy among feasible points (entropy
/// ties within 1e-12 relative broken by smallest `(γ, Δ, N)`), else the
/// least-violating point.
fn select(cands: &[Candidate], t: &DesignTargets) -> Option<Candidate> {
    let mut best: Option<&Candidate> = None;
    for c in cands {
        best = match best {
            None => Some(c),
            Some(b) => {
                let better = match (c.report.feasible, b.report.feasible) {
                    (true, false) => true,
                    (false, true) => false,
                    (true, true) => {
                        let (ec, eb) = (c.report.entropy_bits, b.report.entropy_bits);
                        let tie = (ec - eb).abs() <= 1e-12 * ec.abs().max(eb.abs()).max(1.0);
                        if tie {
                            lexicographically_before(c, b)
                        } else {
                            ec > eb
                        }
                    }
                    (false, false) => {
                        let (vc, vb) = (c.worst_violation(t), b.worst_violation(t));
                        vc < vb || (vc == vb && lexicographically_before(c, b))
                    }
                };
                Some(if better { c } else { b })
            }
        };
    }
    best.cloned()
}

fn evaluate_grid(
    gammas: &[f64],
    deltas: &[f64],
    ns: &[u64],
    tau_p: f64,
    calibration: Calibration,
    t: &DesignTargets,
) -> Result<Vec<Candidate>> {
    let points: Vec<(f64, f64, u64)> =
        gammas.iter().flat_map(|&g| deltas.iter().flat_map(move |&d| ns.iter().map(move |&n| (g, d, n)))).collect();
    points
        .into_par_iter()
        .map(|(gamma, delta, electrons)| {
            let design = DetectorDesign::new(DesignParameters { gamma, delta, tau_p, electrons }, calibration)?;
            let report = evaluate(&design, t)?;
            Ok(Candidate { design, report })
        })
        .collect()
}

/// Neighbouring grid values around `x` (one coarse step each side).
fn bracket(grid: &[f64], x: f64) -> LogRange {
    let i = grid.iter().position(|&g| g == x).unwrap_or(0);
    LogRange::new(grid[i.saturating_sub(1)], grid[(i + 1).min(grid.len() - 1)])
}

/// Two-stage log-grid search over `(γ, Δ, N)` at `τ_p = t.tau_p_min`,
/// maximizing information entropy subject to the design constraints.
///
/// Always returns a point; `report.feasible` is false (with
/// `report.most_violated` set) when nothing in the bounds meets the targets.
pub fn optimize_design(
    t: &DesignTargets,
    bounds: &DesignBounds,
    calibration: Calibration,
) -> Result<(DetectorDesign, DesignReport)> {
    t.validate()?;
    bounds.validate()?;
    calibration.validate()?;
    let tau_p = t.tau_p_min;

    let gammas = bounds.gamma.grid(bounds.points);
    let deltas = bounds.delta.grid(bounds.points);
    let ns = bounds.electron_grid(bounds.electrons);
    let mut cands = evaluate_grid(&gammas, &deltas, &ns, tau_p, calibration, t)?;
    let coarse = select(&cands, t).ok_or_else(|| Error::InvalidParameter("empty design grid".into()))?;

    // Refine around the incumbent.
    let (g0, d0, n0) = coarse.key();
    let nf: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let fine_g = bracket(&gammas, g0).grid(bounds.points);
    let fine_d = bracket(&deltas, d0).grid(bounds.points);
    let fine_n = bounds.electron_grid(bracket(&nf, n0 as f64));
    cands.extend(evaluate_grid(&fine_g, &fine_d, &fine_n, tau_p, calibration, t)?);

    let best = select(&cands, t).expect("candidate set is nonempty");
    Ok((best.design, best.report))
}

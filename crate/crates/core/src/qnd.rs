//! QND conditions on an interaction and the backaction it induces on the
//! photon-number distribution.
//!
//! * Strong condition: `[H, Q] = 0`.
//! * Generalized weak condition: for initial system amplitudes `a_k` and probe
//!   amplitudes `b_l`, the final system marginal
//!   `p'_i = Σ_j |Σ_kl a_k b_l u_ij^{kl}|²` satisfies
//!   `|p'_i − |a_i|²| ≤ (ε/2)(p'_i + |a_i|²)` for every `i`.
//!
//! [`epsilon_ba`] returns the tightest such `ε`, so the boolean and
//! quantitative forms agree by construction.

use serde::{Deserialize, Serialize};

use crate::dynamics::{commutator_norm, JointUnitaryTensor};
use crate::error::{Error, Result};
use crate::hilbert::{HermitianOperator, ProbabilityDistribution, StateVector};
use crate::tolerance;
use crate::C64;

/// True iff `‖[H, Q]‖ ≤ 1e-12`.
pub fn strong_condition(h: &HermitianOperator, q: &HermitianOperator) -> Result<bool> {
    Ok(commutator_norm(h, q)? <= tolerance::ALGEBRAIC)
}

fn check_inputs(u: &JointUnitaryTensor, a: &StateVector, b: &StateVector) -> Result<()> {
    let space = u.space();
    let sys = a.space().as_system()?;
    let probe = b.space().as_probe()?;
    if sys != space.system {
        return Err(Error::DimensionMismatch { expected: space.system.dim(), found: sys.dim() });
    }
    if probe != space.probe {
        return Err(Error::DimensionMismatch { expected: space.probe.dim(), found: probe.dim() });
    }
    for s in [a, b] {
        let norm = s.norm();
        if (norm - 1.0).abs() > tolerance::ALGEBRAIC {
            return Err(Error::NotNormalized { norm });
        }
    }
    Ok(())
}

/// System marginal after one application of `u` to `a ⊗ b`.
pub fn final_system_marginal(
    u: &JointUnitaryTensor,
    a: &StateVector,
    b: &StateVector,
) -> Result<ProbabilityDistribution> {
    check_inputs(u, a, b)?;
    let space = u.space();
    let input = a.amplitudes().kronecker(b.amplitudes());
    let out = u.matrix() * input;
    let mut p = vec![0.0; space.system.dim()];
    for (flat, amp) in out.iter().enumerate() {
        p[space.split(flat).0] += amp.norm_sqr();
    }
    ProbabilityDistribution::over_photon_numbers(p)
}

/// Tightest-ε evaluation of the weak condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakConditionReport {
    /// Smallest ε for which the weak condition holds at every index.
    pub epsilon_ba: f64,
    /// `2|p'_i − p_i| / (p'_i + p_i)` per index; `0` where both vanish.
    pub per_index_ratios: Vec<f64>,
    /// Outcome of the boolean test at each candidate ε.
    pub holds_at: Vec<(f64, bool)>,
}

impl WeakConditionReport {
    pub fn holds(&self, epsilon: f64) -> bool {
        epsilon >= self.epsilon_ba
    }
}

/// Candidate ε values reported in [`WeakConditionReport::holds_at`].
pub const DEFAULT_EPSILON_LADDER: [f64; 7] = [1e-12, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2, 1.0];

/// Relative deviation ratios and their maximum for two distributions over
/// the same labels.
pub fn epsilon_between(initial: &[f64], fin: &[f64]) -> Result<(f64, Vec<f64>)> {
    if initial.len() != fin.len() {
        return Err(Error::DimensionMismatch { expected: initial.len(), found: fin.len() });
    }
    let ratios: Vec<f64> = initial
        .iter()
        .zip(fin)
        .map(|(&p, &q)| {
            let s = p + q;
            if s > 0.0 {
                2.0 * (q - p).abs() / s
            } else {
                0.0
            }
        })
        .collect();
    let eps = ratios.iter().cloned().fold(0.0, f64::max);
    Ok((eps, ratios))
}

/// Boolean weak condition at a given `ε > 0`.
pub fn weak_condition(u: &JointUnitaryTensor, a: &StateVector, b: &StateVector, epsilon: f64) -> Result<bool> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    // Same per-index ratio as `epsilon_ba`, so `holds(ε) ⇔ ε ≥ ε_ba` exactly.
    let fin = final_system_marginal(u, a, b)?;
    let (_, ratios) = epsilon_between(&a.probabilities(), fin.probabilities())?;
    Ok(ratios.iter().all(|&r| r <= epsilon))
}

pub fn epsilon_ba(u: &JointUnitaryTensor, a: &StateVector, b: &StateVector) -> Result<WeakConditionReport> {
    let fin = final_system_marginal(u, a, b)?;
    let (epsilon_ba, per_index_ratios) = epsilon_between(&a.probabilities(), fin.probabilities())?;
    let holds_at = DEFAULT_EPSILON_LADDER.iter().map(|&e| (e, e >= epsilon_ba)).collect();
    Ok(WeakConditionReport { epsilon_ba, per_index_ratios, holds_at })
}

/// `Σ_i n_i |p'_i − p_i|`: photon-number-weighted L1 distance between two
/// number distributions.
pub fn number_weighted_shift(initial: &ProbabilityDistribution, fin: &ProbabilityDistribution) -> Result<f64> {
    if initial.len() != fin.len() {
        return Err(Error::DimensionMismatch { expected: initial.len(), found: fin.len() });
    }
    Ok(initial
        .labels()
        .iter()
        .zip(initial.probabilities().iter().zip(fin.probabilities()))
        .map(|(n, (p, q))| n * (q - p).abs())
        .sum())
}

/// Backaction `δn_ba` of one interaction on the photon-number distribution.
pub fn backaction_metric(u: &JointUnitaryTensor, a: &StateVector, b: &StateVector) -> Result<f64> {
    let fin = final_system_marginal(u, a, b)?;
    let init = ProbabilityDistribution::over_photon_numbers(a.probabilities())?;
    number_weighted_shift(&init, &fin)
}

/// `Σ_j |Σ_kl a_k b_l u_ij^{kl}|²` by direct nested loops over the tensor.
/// Slow; used to cross-check [`final_system_marginal`].
pub fn final_system_marginal_by_loops(u: &JointUnitaryTensor, a: &StateVector, b: &StateVector) -> Result<Vec<f64>> {
    check_inputs(u, a, b)?;
    let (ds, dp) = (u.space().system.dim(), u.space().probe.dim());
    let (aa, bb) = (a.amplitudes(), b.amplitudes());
    let mut p = vec![0.0; ds];
    for (i, pi) in p.iter_mut().enumerate() {
        for j in 0..dp {
            let mut s = C64::new(0.0, 0.0);
            for k in 0..ds {
                for l in 0..dp {
                    s += aa[k] * bb[l] * u.get(i, j, k, l);
                }
            }
            *pi += s.norm_sqr();
        }
    }
    Ok(p)
}

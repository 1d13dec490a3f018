//! Monte-Carlo simulation of interferometric photon-number readout.
//!
//! `N` probe electrons traverse a two-arm interferometer one at a time. Only
//! the W arm runs alongside the optical mode: there the electron sits in its
//! lower level `|↓⟩` and couples to the field through one of the
//! [`InteractionModel`]s, acquiring a photon-number-dependent phase. The N
//! arm is an uncoupled reference. Each electron exits through one of two
//! ports; the counts `(J₊, J₋)` are inverted into an estimate of `n`.
//!
//! Two branches:
//!
//! * [`Branch::Fast`]: binomial sampling of the port counts from the
//!   dispersive phase `φ(n) = (g²/Δ) τ_t n` at the state's mean photon number.
//! * [`Branch::Exact`]: per-electron quantum interaction with the system,
//!   projective port readout and conditional system-state update.
//!
//! Both branches report the ensemble-averaged final photon-number
//! distribution, computed exactly from the per-electron readout channel
//! rather than by averaging trajectories, and the backaction derived from it.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Binomial;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{build_effective, build_gauge_analog, unitary_tensor, EffectiveCoupling, GaugeAnalogCoupling};
use crate::error::{Error, Result};
use crate::hilbert::{
    pauli, FockSpace, HermitianOperator, JointSpace, ProbabilityDistribution, ProbeSpace, StateVector,
};
use crate::qnd::{epsilon_between, number_weighted_shift};
use crate::tolerance;
use crate::C64;

/// System–probe coupling used for the W arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InteractionModel {
    /// `−(g²/Δ) · n ⊗ |↓⟩⟨↓|`: the dispersive limit with the
    /// photon-exchanging part dropped. Commutes with `n`.
    Effective,
    /// Full Jaynes–Cummings coupling with detuning `Δ`.
    GaugeAnalog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Fast,
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub model: InteractionModel,
    pub branch: Branch,
    pub g: f64,
    pub detuning: f64,
    /// Interaction time per electron.
    pub tau_t: f64,
    pub electrons: u64,
    /// Photon state before the first electron.
    pub initial_state: StateVector,
    pub seed: u64,
    pub trials: usize,
    /// Interferometer bias added to the photon-induced phase. `π/2` puts the
    /// working point at maximum slope.
    pub bias_phase: f64,
}

pub const DEFAULT_TRIALS: usize = 200;

impl ProtocolConfig {
    /// Gauge-analog, exact branch, zero bias, [`DEFAULT_TRIALS`] trials.
    pub fn new(g: f64, detuning: f64, tau_t: f64, electrons: u64, initial_state: StateVector) -> Self {
        Self {
            model: InteractionModel::GaugeAnalog,
            branch: Branch::Exact,
            g,
            detuning,
            tau_t,
            electrons,
            initial_state,
            seed: 0,
            trials: DEFAULT_TRIALS,
            bias_phase: 0.0,
        }
    }

    pub fn system(&self) -> Result<FockSpace> {
        self.initial_state.space().as_system()
    }

    /// Dispersive phase per photon, `g² τ_t / Δ`.
    pub fn phase_per_photon(&self) -> f64 {
        self.g * self.g * self.tau_t / self.detuning
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.electrons < 1 {
            return bad("at least one electron is required".into());
        }
        if self.trials < 1 {
            return bad("at least one trial is required".into());
        }
        if !(self.g.is_finite() && self.detuning.is_finite() && self.bias_phase.is_finite()) {
            return bad("g, detuning and bias must be finite".into());
        }
        if self.detuning == 0.0 {
            return bad("detuning must be nonzero".into());
        }
        if !(self.tau_t.is_finite() && self.tau_t > 0.0) {
            return bad(format!("interaction time must be positive, got {}", self.tau_t));
        }
        let sys = self.system()?;
        let norm = self.initial_state.norm();
        if (norm - 1.0).abs() > tolerance::ALGEBRAIC {
            return Err(Error::NotNormalized { norm });
        }
        // arccos inversion is single-valued only while the total phase stays
        // inside [0, π] over every occupied level.
        let top = self
            .initial_state
            .probabilities()
            .iter()
            .rposition(|&p| p > tolerance::ALGEBRAIC)
            .unwrap_or(0)
            .min(sys.cutoff());
        let phi_top = self.bias_phase + self.phase_per_photon() * top as f64;
        let lo = self.bias_phase.min(phi_top);
        let hi = self.bias_phase.max(phi_top);
        if lo < 0.0 || hi > std::f64::consts::PI {
            return bad(format!(
                "interferometer phase range [{lo}, {hi}] leaves [0, π]; the estimator would be ambiguous"
            ));
        }
        Ok(())
    }
}

/// Analytic dispersive phase `φ(n) = (g²/Δ) τ_t n`.
pub fn single_probe_phase(g: f64, delta: f64, tau_t: f64, n: usize) -> Result<f64> {
    if delta == 0.0 {
        return Err(Error::InvalidParameter("dispersive phase needs nonzero detuning".into()));
    }
    Ok(g * g / delta * tau_t * n as f64)
}

/// Relative phase between the interferometer arms for `n` photons, from
/// exact Jaynes–Cummings evolution of the W-arm electron.
///
/// The W-arm amplitude is `⟨n,↓| U |n,↓⟩`; the N-arm amplitude evolves
/// freely, which equals the W-arm amplitude at `n = 0` (the vacuum does not
/// couple). Their phase ratio is the photon-induced shift.
pub fn single_probe_phase_quantum(g: f64, delta: f64, tau_t: f64, n: usize, cutoff: usize) -> Result<f64> {
    let space = JointSpace::with_qubit_probe(cutoff.max(n + 1))?;
    let h = build_gauge_analog(space, &GaugeAnalogCoupling { g, detuning: delta })?;
    let u = unitary_tensor(&h, tau_t)?;
    let w_n = u.get(n, pauli::LOWER, n, pauli::LOWER);
    let w_0 = u.get(0, pauli::LOWER, 0, pauli::LOWER);
    Ok((w_n / w_0).arg())
}

/// Kraus decomposition of one electron's passage and port readout, acting
/// on the photon mode.
///
/// With `A = ⟨↓|U|↓⟩` and `B = ⟨↑|U|↓⟩` (system blocks of the joint
/// unitary) and calibration phase `c`:
///
/// * coherent port `±`: `(I ± c·A)/2`
/// * W-arm electron left in `|↑⟩` (a real absorption): `B/2` for each port,
///   since it no longer interferes with the N arm.
#[derive(Debug, Clone)]
pub struct ReadoutChannel {
    a: DMatrix<C64>,
    b: DMatrix<C64>,
    calibration: C64,
}

impl ReadoutChannel {
    pub fn new(cfg: &ProtocolConfig) -> Result<Self> {
        let sys = cfg.system()?;
        let space = JointSpace::new(sys, ProbeSpace::qubit());
        let h = match cfg.model {
            InteractionModel::Effective => build_effective(
                space,
                &EffectiveCoupling {
                    g: -cfg.phase_per_photon() / cfg.tau_t,
                    probe_operator: HermitianOperator::new(ProbeSpace::qubit(), pauli::lower_projector())?,
                },
            )?,
            InteractionModel::GaugeAnalog => {
                build_gauge_analog(space, &GaugeAnalogCoupling { g: cfg.g, detuning: cfg.detuning })?
            }
        };
        let u = unitary_tensor(&h, cfg.tau_t)?;
        let a = u.system_block(pauli::LOWER, pauli::LOWER);
        let b = u.system_block(pauli::UPPER, pauli::LOWER);
        // Calibrate the readout on the vacuum so that n = 0 sits at the bias.
        let reference = a[(0, 0)].arg();
        let calibration = C64::from_polar(1.0, cfg.bias_phase - reference);
        let ch = Self { a, b, calibration };
        let defect = ch.completeness_defect();
        if !(defect <= tolerance::ACCUMULATED) {
            return Err(Error::NotUnitary { defect });
        }
        Ok(ch)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Kraus operators in the order `(+ coherent, − coherent, + absorbed,
    /// − absorbed)`.
    pub fn kraus(&self) -> [DMatrix<C64>; 4] {
        let d = self.dim();
        let id = DMatrix::<C64>::identity(d, d);
        let ca = &self.a * self.calibration;
        let half = C64::new(0.5, 0.0);
        let kb = &self.b * half;
        [(&id + &ca) * half, (&id - &ca) * half, kb.clone(), kb]
    }

    /// `max |Σ K†K − I|`.
    pub fn completeness_defect(&self) -> f64 {
        let d = self.dim();
        let sum = self.kraus().iter().fold(DMatrix::<C64>::zeros(d, d), |acc, k| acc + k.ad_mul(k));
        (sum - DMatrix::identity(d, d)).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Probability of the `+` port for a photon-number eigenstate.
    pub fn plus_probability(&self, n: usize) -> f64 {
        let psi = DVector::from_fn(self.dim(), |i, _| if i == n { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
        let ks = self.kraus();
        (&ks[0] * &psi).norm_squared() + (&ks[2] * &psi).norm_squared()
    }

    /// Final photon-number distribution averaged over all readout records
    /// after `electrons` passages, starting from `initial`.
    pub fn ensemble_distribution(&self, initial: &StateVector, electrons: u64) -> Result<ProbabilityDistribution> {
        let d = self.dim();
        if initial.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: initial.dim() });
        }
        // Row-major vec(ρ): vec(KρK†) = (K ⊗ conj(K)) vec(ρ).
        let step =
            self.kraus().iter().fold(DMatrix::<C64>::zeros(d * d, d * d), |acc, k| acc + k.kronecker(&k.conjugate()));
        let total = matrix_power(step, electrons);
        let psi = initial.amplitudes();
        let rho0 = DVector::from_fn(d * d, |r, _| psi[r / d] * psi[r % d].conj());
        let rho = total * rho0;
        let pops: Vec<f64> = (0..d).map(|i| rho[i * d + i].re).collect();
        let trace: f64 = pops.iter().sum();
        if (trace - 1.0).abs() > tolerance::ACCUMULATED || pops.iter().any(|&p| p < -tolerance::ACCUMULATED) {
            return Err(Error::NotNormalized { norm: trace });
        }
        ProbabilityDistribution::over_photon_numbers(pops.into_iter().map(|p| p.max(0.0) / trace).collect())
    }
}

fn matrix_power(mut base: DMatrix<C64>, mut exp: u64) -> DMatrix<C64> {
    let n = base.nrows();
    let mut acc = DMatrix::<C64>::identity(n, n);
    while exp > 0 {
        if exp & 1 == 1 {
            acc = &acc * &base;
        }
        exp >>= 1;
        if exp > 0 {
            base = &base * &base;
        }
    }
    acc
}

/// Port counts of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialCounts {
    pub j_plus: u64,
    pub j_minus: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolResult {
    /// Mean of the per-trial estimates `n̂`; `None` when the estimator
    /// diverges (`g = 0`).
    pub estimate_mean: Option<f64>,
    /// RMS of `n̂ − n_true` over trials; `+∞` when the estimator diverges.
    pub estimate_rms_error: f64,
    /// Mean photon number of the initial state.
    pub n_true: f64,
    pub final_number_distribution: ProbabilityDistribution,
    pub delta_n_ba: f64,
    pub epsilon_ba: f64,
    pub counts: Vec<TrialCounts>,
}

impl ProtocolResult {
    pub fn error_diverges(&self) -> bool {
        self.estimate_mean.is_none()
    }

    pub fn delta_n_err(&self) -> f64 {
        self.estimate_rms_error
    }
}

/// Inverts the `+` port frequency into a photon-number estimate.
pub fn estimate_photon_number(cfg: &ProtocolConfig, counts: TrialCounts) -> Option<f64> {
    let per_photon = cfg.phase_per_photon();
    if per_photon == 0.0 {
        return None;
    }
    let total = (counts.j_plus + counts.j_minus) as f64;
    let f_plus = counts.j_plus as f64 / total;
    let phase = (2.0 * f_plus - 1.0).clamp(-1.0, 1.0).acos() - cfg.bias_phase;
    Some(phase / per_photon)
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn fast_trial(cfg: &ProtocolConfig, p_plus: f64, trial: usize) -> Result<TrialCounts> {
    let mut rng = trial_rng(cfg.seed, trial);
    let dist = Binomial::new(cfg.electrons, p_plus.clamp(0.0, 1.0))
        .map_err(|e| Error::InvalidParameter(format!("binomial: {e}")))?;
    let j_plus = rng.sample(dist);
    Ok(TrialCounts { j_plus, j_minus: cfg.electrons - j_plus })
}

fn exact_trial(cfg: &ProtocolConfig, kraus: &[DMatrix<C64>; 4], trial: usize) -> Result<TrialCounts> {
    let mut rng = trial_rng(cfg.seed, trial);
    let mut psi = cfg.initial_state.amplitudes().clone();
    let d = psi.len();
    let (mut plus, mut minus) = (DVector::zeros(d), DVector::zeros(d));
    let mut absorbed = DVector::zeros(d);
    let mut j_plus = 0;
    for _ in 0..cfg.electrons {
        kraus[0].mul_to(&psi, &mut plus);
        kraus[1].mul_to(&psi, &mut minus);
        kraus[2].mul_to(&psi, &mut absorbed);
        let (pp, pm, pb) = (plus.norm_squared(), minus.norm_squared(), absorbed.norm_squared());
        let total = pp + pm + 2.0 * pb;
        if (total - 1.0).abs() > tolerance::ACCUMULATED {
            return Err(Error::NotNormalized { norm: total });
        }
        let r = rng.random::<f64>() * total;
        let (next, outcome_plus, weight) = if r < pp {
            (&plus, true, pp)
        } else if r < pp + pm {
            (&minus, false, pm)
        } else {
            (&absorbed, r < pp + pm + pb, pb)
        };
        psi.copy_from(next);
        psi.unscale_mut(weight.sqrt());
        j_plus += outcome_plus as u64;
    }
    Ok(TrialCounts { j_plus, j_minus: cfg.electrons - j_plus })
}

/// Runs every trial of the protocol. Trials draw from independent streams
/// of one seeded generator, so the result does not depend on scheduling.
pub fn run_protocol(cfg: &ProtocolConfig) -> Result<ProtocolResult> {
    cfg.validate()?;
    let channel = ReadoutChannel::new(cfg)?;
    let initial = ProbabilityDistribution::over_photon_numbers(cfg.initial_state.probabilities())?;
    let n_true = initial.mean();

    let counts: Vec<TrialCounts> = match cfg.branch {
        Branch::Fast => {
            let phase = cfg.bias_phase + cfg.phase_per_photon() * n_true;
            let p_plus = 0.5 * (1.0 + phase.cos());
            (0..cfg.trials).into_par_iter().map(|t| fast_trial(cfg, p_plus, t)).collect::<Result<_>>()?
        }
        Branch::Exact => {
            let kraus = channel.kraus();
            (0..cfg.trials).into_par_iter().map(|t| exact_trial(cfg, &kraus, t)).collect::<Result<_>>()?
        }
    };

    let estimates: Option<Vec<f64>> = counts.iter().map(|&c| estimate_photon_number(cfg, c)).collect();
    let (estimate_mean, estimate_rms_error) = match estimates {
        Some(est) => {
            let m = est.len() as f64;
            let mean = est.iter().sum::<f64>() / m;
            let mse = est.iter().map(|x| (x - n_true).powi(2)).sum::<f64>() / m;
            (Some(mean), mse.sqrt())
        }
        None => (None, f64::INFINITY),
    };

    let fin = channel.ensemble_distribution(&cfg.initial_state, cfg.electrons)?;
    let delta_n_ba = number_weighted_shift(&initial, &fin)?;
    let (epsilon_ba, _) = epsilon_between(initial.probabilities(), fin.probabilities())?;

    Ok(ProtocolResult {
        estimate_mean,
        estimate_rms_error,
        n_true,
        final_number_distribution: fin,
        delta_n_ba,
        epsilon_ba,
        counts,
    })
}

/// Mean photon number of the ensemble after the protocol, recomputed with
/// the Fock cutoff raised by [`tolerance::TRUNCATION_PROBE_EXTRA_LEVELS`];
/// returns the absolute drift.
pub fn truncation_drift(cfg: &ProtocolConfig) -> Result<f64> {
    let mean_at = |c: &ProtocolConfig| -> Result<f64> {
        Ok(ReadoutChannel::new(c)?.ensemble_distribution(&c.initial_state, c.electrons)?.mean())
    };
    let sys = cfg.system()?;
    let bigger = FockSpace::new(sys.cutoff() + tolerance::TRUNCATION_PROBE_EXTRA_LEVELS)?;
    let mut padded = DVector::zeros(bigger.dim());
    padded.rows_mut(0, sys.dim()).copy_from(cfg.initial_state.amplitudes());
    let wide = ProtocolConfig { initial_state: StateVector::new(bigger, padded)?, ..cfg.clone() };
    Ok((mean_at(cfg)? - mean_at(&wide)?).abs())
}

/// Swept protocol parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    Delta,
    N,
    G,
}

impl SweepParameter {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParameter::Delta => "delta",
            SweepParameter::N => "N",
            SweepParameter::G => "g",
        }
    }

    fn apply(&self, base: &ProtocolConfig, value: f64) -> Result<ProtocolConfig> {
        let mut cfg = base.clone();
        match self {
            SweepParameter::Delta => cfg.detuning = value,
            SweepParameter::G => cfg.g = value,
            SweepParameter::N => {
                if !(value >= 1.0 && value.fract() == 0.0 && value <= u64::MAX as f64) {
                    return Err(Error::InvalidParameter(format!(
                        "electron count must be a positive integer, got {value}"
                    )));
                }
                cfg.electrons = value as u64;
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: SweepParameter,
    pub value: f64,
    pub delta_n_err: f64,
    pub delta_n_ba: f64,
    pub epsilon_ba: f64,
}

/// One protocol run per value, all other parameters (seed included) held at
/// `base`.
pub fn sweep(base: &ProtocolConfig, param: SweepParameter, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::EmptySweep);
    }
    values
        .iter()
        .map(|&value| {
            let r = run_protocol(&param.apply(base, value)?)?;
            Ok(SweepRow {
                param,
                value,
                delta_n_err: r.delta_n_err(),
                delta_n_ba: r.delta_n_ba,
                epsilon_ba: r.epsilon_ba,
            })
        })
        .collect()
}

pub fn error_backaction_sweep(base: &ProtocolConfig, delta_values: &[f64]) -> Result<Vec<SweepRow>> {
    sweep(base, SweepParameter::Delta, delta_values)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn fock(cutoff: usize, n: usize) -> StateVector {
        StateVector::basis(FockSpace::new(cutoff).unwrap(), n).unwrap()
    }

    fn base(model: InteractionModel, branch: Branch) -> ProtocolConfig {
        ProtocolConfig {
            model,
            branch,
            bias_phase: FRAC_PI_2,
            trials: 64,
            seed: 7,
            ..ProtocolConfig::new(0.1, 10.0, 1.0, 2_000, fock(6, 1))
        }
    }

    #[test]
    fn dispersive_phase_examples() {
        assert_eq!(single_probe_phase(0.3, 2.0, 1.5, 0).unwrap(), 0.0);
        let p1 = single_probe_phase(0.3, 2.0, 1.5, 3).unwrap();
        let p2 = single_probe_phase(0.3, 2.0, 1.5, 6).unwrap();
        assert!((p2 - 2.0 * p1).abs() < 1e-15);
        assert!((single_probe_phase(0.1, 10.0, 1.0, 1).unwrap() - 1e-3).abs() < 1e-15);
        assert!(single_probe_phase(0.1, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn quantum_phase_agrees_with_dispersive_formula() {
        // g/Δ ≤ 0.01.
        for &(g, delta, n) in &[(0.1, 10.0, 1usize), (0.05, 20.0, 3), (0.2, 40.0, 5)] {
            let analytic = single_probe_phase(g, delta, 1.0, n).unwrap();
            let quantum = single_probe_phase_quantum(g, delta, 1.0, n, 6).unwrap();
            assert!(((quantum - analytic) / analytic).abs() < 0.10, "{g} {delta} {n}: {quantum} vs {analytic}");
        }
    }

    #[test]
    fn readout_channel_is_complete_and_biased() {
        for model in [InteractionModel::Effective, InteractionModel::GaugeAnalog] {
            let cfg = base(model, Branch::Exact);
            let ch = ReadoutChannel::new(&cfg).unwrap();
            assert!(ch.completeness_defect() < 1e-12);
            assert!((ch.plus_probability(0) - 0.5).abs() < 1e-12);
        }
        // Effective model reproduces (1 + cos(bias + φ(n)))/2 exactly.
        let cfg = ProtocolConfig {
            g: 1.0,
            detuning: 2.0,
            bias_phase: 0.3,
            ..base(InteractionModel::Effective, Branch::Exact)
        };
        let ch = ReadoutChannel::new(&cfg).unwrap();
        for n in 0..=6 {
            let want = 0.5 * (1.0 + (0.3 + 0.5 * n as f64).cos());
            assert!((ch.plus_probability(n) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn counts_add_up_and_runs_are_reproducible() {
        for branch in [Branch::Fast, Branch::Exact] {
            let cfg = base(InteractionModel::GaugeAnalog, branch);
            let a = run_protocol(&cfg).unwrap();
            let b = run_protocol(&cfg).unwrap();
            assert_eq!(a, b);
            assert!(a.counts.iter().all(|c| c.j_plus + c.j_minus == cfg.electrons));
            assert!(a.estimate_rms_error >= 0.0);
            let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run_protocol(&cfg));
            assert_eq!(a, serial.unwrap());
        }
    }

    #[test]
    fn zero_coupling_diverges_without_backaction() {
        let cfg = ProtocolConfig { g: 0.0, ..base(InteractionModel::Effective, Branch::Fast) };
        let r = run_protocol(&cfg).unwrap();
        assert!(r.error_diverges());
        assert_eq!(r.delta_n_err(), f64::INFINITY);
        assert!(r.delta_n_ba <= 1e-10);
    }

    #[test]
    fn symmetric_point_gives_balanced_ports() {
        // φ(n_true) = π/2 with no bias: g = 1, Δ = 1, τ = π/2, n = 1.
        let cfg = ProtocolConfig {
            g: 1.0,
            detuning: 1.0,
            tau_t: FRAC_PI_2,
            bias_phase: 0.0,
            electrons: 10_000,
            trials: 200,
            ..base(InteractionModel::Effective, Branch::Fast)
        };
        let r = run_protocol(&cfg).unwrap();
        let total: u64 = r.counts.iter().map(|c| c.j_plus).sum();
        let n = (cfg.electrons * cfg.trials as u64) as f64;
        let f = total as f64 / n;
        let sigma = (0.25 / n).sqrt();
        assert!((f - 0.5).abs() < 3.0 * sigma, "f+ = {f}");
    }

    #[test]
    fn exact_and_fast_branches_agree_on_effective_model() {
        let fast = run_protocol(&base(InteractionModel::Effective, Branch::Fast)).unwrap();
        let exact = run_protocol(&base(InteractionModel::Effective, Branch::Exact)).unwrap();
        let rel = (fast.delta_n_err() - exact.delta_n_err()).abs() / fast.delta_n_err();
        assert!(rel < 0.3, "{} vs {}", fast.delta_n_err(), exact.delta_n_err());
        assert!(exact.delta_n_ba <= 1e-10 && fast.delta_n_ba <= 1e-10);
    }

    #[test]
    fn ensemble_distribution_matches_trajectory_average() {
        // Strong coupling so absorption is frequent.
        let cfg = ProtocolConfig {
            g: 0.5,
            detuning: 4.0,
            electrons: 40,
            trials: 1,
            initial_state: fock(4, 3),
            bias_phase: 0.5,
            ..base(InteractionModel::GaugeAnalog, Branch::Exact)
        };
        let ch = ReadoutChannel::new(&cfg).unwrap();
        let exact = ch.ensemble_distribution(&cfg.initial_state, cfg.electrons).unwrap();

        // Trajectory oracle: average final populations over many unravelings.
        let kraus = ch.kraus();
        let runs = 4000;
        let mut avg = vec![0.0; 5];
        for t in 0..runs {
            let mut rng = trial_rng(99, t);
            let mut psi = cfg.initial_state.amplitudes().clone();
            for _ in 0..cfg.electrons {
                let outs: Vec<DVector<C64>> = kraus.iter().map(|k| k * &psi).collect();
                let w: Vec<f64> = outs.iter().map(|o| o.norm_squared()).collect();
                let mut r = rng.random::<f64>();
                let mut pick = 3;
                for (i, wi) in w.iter().enumerate() {
                    if r < *wi {
                        pick = i;
                        break;
                    }
                    r -= wi;
                }
                psi = outs[pick].unscale(w[pick].sqrt());
            }
            for (a, p) in avg.iter_mut().zip(psi.iter()) {
                *a += p.norm_sqr() / runs as f64;
            }
        }
        for (a, e) in avg.iter().zip(exact.probabilities()) {
            assert!((a - e).abs() < 0.03, "{avg:?} vs {:?}", exact.probabilities());
        }
    }

    #[test]
    fn gauge_analog_backaction_falls_with_detuning() {
        let rows = error_backaction_sweep(&base(InteractionModel::GaugeAnalog, Branch::Fast), &[5.0, 10.0, 20.0, 40.0])
            .unwrap();
        for w in rows.windows(2) {
            assert!(w[0].delta_n_ba > w[1].delta_n_ba);
            assert!(w[0].delta_n_err < w[1].delta_n_err);
        }
    }

    #[test]
    fn single_value_sweep_equals_run() {
        let cfg = base(InteractionModel::GaugeAnalog, Branch::Exact);
        let rows = error_backaction_sweep(&cfg, &[cfg.detuning]).unwrap();
        let r = run_protocol(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].delta_n_err, r.delta_n_err());
        assert_eq!(rows[0].delta_n_ba, r.delta_n_ba);
        assert_eq!(rows[0].epsilon_ba, r.epsilon_ba);
    }

    #[test]
    fn sweep_rejects_bad_input() {
        let cfg = base(InteractionModel::GaugeAnalog, Branch::Fast);
        assert!(matches!(sweep(&cfg, SweepParameter::Delta, &[]), Err(Error::EmptySweep)));
        assert!(sweep(&cfg, SweepParameter::N, &[10.5]).is_err());
        assert!(sweep(&cfg, SweepParameter::N, &[0.0]).is_err());
    }

    #[test]
    fn config_validation() {
        let ok = base(InteractionModel::GaugeAnalog, Branch::Fast);
        assert!(ok.validate().is_ok());
        assert!(ProtocolConfig { electrons: 0, ..ok.clone() }.validate().is_err());
        assert!(ProtocolConfig { trials: 0, ..ok.clone() }.validate().is_err());
        assert!(ProtocolConfig { detuning: 0.0, ..ok.clone() }.validate().is_err());
        assert!(ProtocolConfig { tau_t: -1.0, ..ok.clone() }.validate().is_err());
        // Total phase beyond π.
        assert!(ProtocolConfig { g: 3.0, detuning: 1.0, ..ok.clone() }.validate().is_err());
        assert!(ProtocolConfig { bias_phase: PI + 0.1, ..ok }.validate().is_err());
    }

    #[test]
    fn error_shrinks_with_electron_count() {
        let cfg = ProtocolConfig { trials: 200, ..base(InteractionModel::Effective, Branch::Fast) };
        let ns = [100.0, 1_000.0, 10_000.0, 100_000.0];
        let rows = sweep(&cfg, SweepParameter::N, &ns).unwrap();
        let errs: Vec<f64> = rows.iter().map(|r| r.delta_n_err).collect();
        assert!(errs.windows(2).all(|w| w[1] <= w[0]));
        let slope = log_log_slope(&ns, &errs);
        assert!((slope + 0.5).abs() < 0.05, "slope {slope}");
    }

    #[test]
    fn estimator_is_consistent_at_large_n() {
        let cfg = ProtocolConfig {
            g: 1.0,
            detuning: 2.0,
            bias_phase: 0.0,
            electrons: 100_000,
            trials: 200,
            initial_state: fock(6, 2),
            ..base(InteractionModel::Effective, Branch::Fast)
        };
        let r = run_protocol(&cfg).unwrap();
        let bound = 2.0 * r.delta_n_err() / (cfg.trials as f64).sqrt();
        assert!((r.estimate_mean.unwrap() - 2.0).abs() < bound);
    }

    #[test]
    fn truncation_is_converged_for_single_photon_input() {
        let cfg =
            ProtocolConfig { detuning: 5.0, electrons: 10_000, ..base(InteractionModel::GaugeAnalog, Branch::Exact) };
        assert!(truncation_drift(&cfg).unwrap() < tolerance::TRUNCATION_DRIFT);
    }

    #[test]
    fn log_log_slope_of_power_law() {
        let xs = [1.0, 10.0, 100.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.5)).collect();
        assert!((log_log_slope(&xs, &ys) + 0.5).abs() < 1e-12);
    }
}

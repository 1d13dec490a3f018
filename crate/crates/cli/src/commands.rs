//! Subcommand implementations and their defaults.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DVector;
use qndsim_core::detector::{
    distinguishable_values, entropy_bits, optimize_design, Calibration, CalibrationAnchors, DesignBounds,
    DesignParameters, DesignTargets, LogRange,
};
use qndsim_core::dynamics::{
    build_effective, build_gauge_analog, commutator_norm, photon_number_on_joint, unitary_tensor, EffectiveCoupling,
    GaugeAnalogCoupling,
};
use qndsim_core::hilbert::{pauli, FockSpace, HermitianOperator, JointSpace, ProbeSpace, StateVector};
use qndsim_core::metrology::{self, run_protocol, truncation_drift, InteractionModel, ProtocolConfig, SweepParameter};
use qndsim_core::qnd::{backaction_metric, epsilon_ba, strong_condition};
use qndsim_core::C64;
use serde_json::json;

use crate::config::{
    Branch, CalibrationPreset, DesignArgs, EntropyArgs, Hamiltonian, ModelArgs, ProbeState, ProtocolArgs, SweepArgs,
    SweepParam,
};
use crate::output::{Cell, Report};
use crate::CliError;

pub const DEFAULT_HAMILTONIAN: Hamiltonian = Hamiltonian::GaugeAnalog;
pub const DEFAULT_G: f64 = 0.1;
pub const DEFAULT_DELTA: f64 = 10.0;
pub const DEFAULT_T: f64 = 1.0;
pub const DEFAULT_CUTOFF: usize = 6;
pub const DEFAULT_FOCK: usize = 1;
pub const DEFAULT_PROBE: ProbeState = ProbeState::Plus;
pub const DEFAULT_BRANCH: Branch = Branch::Exact;
pub const DEFAULT_ELECTRONS: u64 = 10_000;
pub const DEFAULT_BIAS: f64 = 0.0;
pub const DEFAULT_ENTROPY_RANGE: (f64, f64, f64) = (1e4, 1e6, 1e2);

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn finite(name: &str, x: f64) -> Result<f64, CliError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(invalid(format!("{name} must be finite, got {x}")))
    }
}

fn hamiltonian_name(h: Hamiltonian) -> &'static str {
    match h {
        Hamiltonian::Effective => "effective",
        Hamiltonian::GaugeAnalog => "gauge-analog",
    }
}

/// Initial system state from `--fock` or `--amplitudes`.
fn system_state(m: &ModelArgs) -> Result<StateVector, CliError> {
    match &m.amplitudes {
        Some(amps) => {
            if amps.is_empty() {
                return Err(invalid("amplitudes must not be empty"));
            }
            if m.fock.is_some() {
                return Err(invalid("give either fock or amplitudes, not both"));
            }
            let cutoff = m.cutoff.unwrap_or(amps.len() - 1);
            if amps.len() != cutoff + 1 {
                return Err(invalid(format!("{} amplitudes do not match cutoff {cutoff}", amps.len())));
            }
            let space = FockSpace::new(cutoff).map_err(CliError::input)?;
            let v = DVector::from_iterator(amps.len(), amps.iter().map(|&a| C64::new(a, 0.0)));
            StateVector::new(space, v).map_err(CliError::input)
        }
        None => {
            let cutoff = m.cutoff.unwrap_or(DEFAULT_CUTOFF);
            let k = m.fock.unwrap_or(DEFAULT_FOCK);
            if k > cutoff {
                return Err(invalid(format!("Fock index {k} exceeds cutoff {cutoff}")));
            }
            StateVector::basis(FockSpace::new(cutoff).map_err(CliError::input)?, k).map_err(CliError::input)
        }
    }
}

fn probe_state(p: ProbeState) -> StateVector {
    let q = ProbeSpace::qubit();
    let (up, down) = match p {
        ProbeState::Ground => (0.0, 1.0),
        ProbeState::Excited => (1.0, 0.0),
        ProbeState::Plus => (FRAC_1_SQRT_2, FRAC_1_SQRT_2),
        ProbeState::Minus => (FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    };
    let mut v = DVector::zeros(2);
    v[pauli::UPPER] = C64::new(up, 0.0);
    v[pauli::LOWER] = C64::new(down, 0.0);
    StateVector::normalized(q, v).expect("probe presets are nonzero")
}

pub fn qnd_check(m: &ModelArgs) -> Result<Report, CliError> {
    let hamiltonian = m.hamiltonian.unwrap_or(DEFAULT_HAMILTONIAN);
    let g = finite("g", m.g.unwrap_or(DEFAULT_G))?;
    let delta = finite("delta", m.delta.unwrap_or(DEFAULT_DELTA))?;
    let t = finite("t", m.t.unwrap_or(DEFAULT_T))?;
    if t < 0.0 {
        return Err(invalid(format!("t must be nonnegative, got {t}")));
    }
    let a = system_state(m)?;
    let b = probe_state(m.probe.unwrap_or(DEFAULT_PROBE));
    let system = a.space().as_system().map_err(CliError::input)?;
    let joint = JointSpace::new(system, ProbeSpace::qubit());

    let h = match hamiltonian {
        Hamiltonian::Effective => {
            let p = HermitianOperator::new(ProbeSpace::qubit(), pauli::lower_projector())?;
            build_effective(joint, &EffectiveCoupling { g, probe_operator: p })?
        }
        Hamiltonian::GaugeAnalog => build_gauge_analog(joint, &GaugeAnalogCoupling { g, detuning: delta })?,
    };
    let q = photon_number_on_joint(joint);
    let strong = strong_condition(&h, &q)?;
    let norm = commutator_norm(&h, &q)?;
    let u = unitary_tensor(&h, t)?;
    let weak = epsilon_ba(&u, &a, &b)?;
    let dn_ba = backaction_metric(&u, &a, &b)?;

    let ladder: Vec<_> = weak.holds_at.iter().map(|(e, h)| json!({ "epsilon": e, "holds": h })).collect();
    let json = json!({
        "hamiltonian": hamiltonian_name(hamiltonian),
        "g": g,
        "delta": delta,
        "t": t,
        "cutoff": system.cutoff(),
        "strong": strong,
        "commutator_norm": norm,
        "epsilon_ba": weak.epsilon_ba,
        "delta_n_ba": dn_ba,
        "per_index_ratios": weak.per_index_ratios,
        "weak_condition": ladder,
    });
    Ok(Report {
        json,
        header: vec![
            "hamiltonian",
            "g",
            "delta",
            "t",
            "cutoff",
            "strong",
            "commutator_norm",
            "epsilon_ba",
            "delta_n_ba",
        ],
        rows: vec![vec![
            hamiltonian_name(hamiltonian).into(),
            g.into(),
            delta.into(),
            t.into(),
            (system.cutoff() as u64).into(),
            strong.into(),
            norm.into(),
            weak.epsilon_ba.into(),
            dn_ba.into(),
        ]],
    })
}

fn protocol_config(m: &ModelArgs, p: &ProtocolArgs, seed: u64) -> Result<ProtocolConfig, CliError> {
    let g = finite("g", m.g.unwrap_or(DEFAULT_G))?;
    let delta = finite("delta", m.delta.unwrap_or(DEFAULT_DELTA))?;
    let t = finite("t", m.t.unwrap_or(DEFAULT_T))?;
    let mut cfg = ProtocolConfig::new(g, delta, t, p.electrons.unwrap_or(DEFAULT_ELECTRONS), system_state(m)?);
    cfg.model = match m.hamiltonian.unwrap_or(DEFAULT_HAMILTONIAN) {
        Hamiltonian::Effective => InteractionModel::Effective,
        Hamiltonian::GaugeAnalog => InteractionModel::GaugeAnalog,
    };
    cfg.branch = match p.branch.unwrap_or(DEFAULT_BRANCH) {
        Branch::Fast => metrology::Branch::Fast,
        Branch::Exact => metrology::Branch::Exact,
    };
    cfg.trials = p.trials.unwrap_or(metrology::DEFAULT_TRIALS);
    cfg.bias_phase = p.bias_phase.unwrap_or(DEFAULT_BIAS);
    cfg.seed = seed;
    cfg.validate().map_err(CliError::input)?;
    Ok(cfg)
}

fn branch_name(b: metrology::Branch) -> &'static str {
    match b {
        metrology::Branch::Fast => "fast",
        metrology::Branch::Exact => "exact",
    }
}

fn model_name(m: InteractionModel) -> &'static str {
    match m {
        InteractionModel::Effective => "effective",
        InteractionModel::GaugeAnalog => "gauge-analog",
    }
}

pub fn simulate(m: &ModelArgs, p: &ProtocolArgs, seed: u64) -> Result<Report, CliError> {
    let cfg = protocol_config(m, p, seed)?;
    let r = run_protocol(&cfg)?;
    let drift = truncation_drift(&cfg)?;
    let json = json!({
        "model": model_name(cfg.model),
        "branch": branch_name(cfg.branch),
        "g": cfg.g,
        "delta": cfg.detuning,
        "t": cfg.tau_t,
        "electrons": cfg.electrons,
        "trials": cfg.trials,
        "seed": cfg.seed,
        "bias_phase": cfg.bias_phase,
        "n_true": r.n_true,
        "estimate_mean": r.estimate_mean,
        "delta_n_err": r.delta_n_err(),
        "error_diverges": r.error_diverges(),
        "delta_n_ba": r.delta_n_ba,
        "epsilon_ba": r.epsilon_ba,
        "final_number_distribution": r.final_number_distribution.probabilities(),
        "truncation_drift": drift,
    });
    Ok(Report {
        json,
        header: vec![
            "model",
            "branch",
            "g",
            "delta",
            "t",
            "electrons",
            "trials",
            "seed",
            "bias_phase",
            "n_true",
            "estimate_mean",
            "delta_n_err",
            "delta_n_ba",
            "epsilon_ba",
            "truncation_drift",
        ],
        rows: vec![vec![
            model_name(cfg.model).into(),
            branch_name(cfg.branch).into(),
            cfg.g.into(),
            cfg.detuning.into(),
            cfg.tau_t.into(),
            cfg.electrons.into(),
            (cfg.trials as u64).into(),
            cfg.seed.into(),
            cfg.bias_phase.into(),
            r.n_true.into(),
            r.estimate_mean.map_or(Cell::Text(String::new()), Cell::Num),
            r.delta_n_err().into(),
            r.delta_n_ba.into(),
            r.epsilon_ba.into(),
            drift.into(),
        ]],
    })
}

pub fn sweep(m: &ModelArgs, p: &ProtocolArgs, s: &SweepArgs, seed: u64) -> Result<Report, CliError> {
    let values = s.values.clone().unwrap_or_default();
    if values.is_empty() {
        return Err(invalid("sweep needs at least one value"));
    }
    let param = match s.param.unwrap_or(SweepParam::Delta) {
        SweepParam::Delta => SweepParameter::Delta,
        SweepParam::N => SweepParameter::N,
        SweepParam::G => SweepParameter::G,
    };
    let base = protocol_config(m, p, seed)?;
    // Each swept point must itself be a valid configuration.
    for &v in &values {
        let mut c = base.clone();
        match param {
            SweepParameter::Delta => c.detuning = v,
            SweepParameter::G => c.g = v,
            SweepParameter::N => {
                if !(v >= 1.0 && v.fract() == 0.0) {
                    return Err(invalid(format!("electron count must be a positive integer, got {v}")));
                }
                c.electrons = v as u64;
            }
        }
        c.validate().map_err(|e| invalid(format!("{} = {v}: {e}", param.name())))?;
    }
    let rows = metrology::sweep(&base, param, &values)?;
    let json = json!({
        "param": param.name(),
        "rows": rows.iter().map(|r| json!({
            "value": r.value,
            "delta_n_err": r.delta_n_err,
            "delta_n_ba": r.delta_n_ba,
            "epsilon_ba": r.epsilon_ba,
        })).collect::<Vec<_>>(),
    });
    Ok(Report {
        json,
        header: vec!["param", "value", "delta_n_err", "delta_n_ba", "epsilon_ba"],
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    param.name().into(),
                    r.value.into(),
                    r.delta_n_err.into(),
                    r.delta_n_ba.into(),
                    r.epsilon_ba.into(),
                ]
            })
            .collect(),
    })
}

/// Calibration from the preset, then anchors (missing ones taken from the
/// reference operating point), then explicit constants.
pub fn calibration(d: &DesignArgs) -> Result<Calibration, CliError> {
    let mut cal = match d.calibration.unwrap_or(CalibrationPreset::Unit) {
        CalibrationPreset::Unit => Calibration::default(),
        CalibrationPreset::Reference => {
            Calibration::from_anchors(&DesignParameters::REFERENCE, &CalibrationAnchors::REFERENCE)
                .map_err(CliError::input)?
        }
    };
    if d.ba_ratio.is_some() || d.err.is_some() || d.n_max.is_some() {
        let r = CalibrationAnchors::REFERENCE;
        let anchors = CalibrationAnchors {
            backaction_ratio: d.ba_ratio.unwrap_or(r.backaction_ratio),
            error: d.err.unwrap_or(r.error),
            n_max: d.n_max.unwrap_or(r.n_max),
        };
        cal = Calibration::from_anchors(&DesignParameters::REFERENCE, &anchors).map_err(CliError::input)?;
    }
    if let Some(c) = d.c_ba {
        cal.c_ba = c;
    }
    if let Some(c) = d.c_err {
        cal.c_err = c;
    }
    if let Some(c) = d.c_phi {
        cal.c_phi = c;
    }
    Ok(cal)
}

/// Report plus the exit status: infeasible designs are still reported.
pub fn design(d: &DesignArgs) -> Result<(Report, Result<(), CliError>), CliError> {
    let t0 = DesignTargets::REFERENCE;
    let targets = DesignTargets::new(
        d.eps_ba.unwrap_or(t0.eps_ba),
        d.eps_err.unwrap_or(t0.eps_err),
        d.tau_p_min.unwrap_or(t0.tau_p_min),
    )
    .map_err(CliError::input)?;
    let b0 = DesignBounds::REFERENCE;
    let bounds = DesignBounds {
        gamma: LogRange::new(d.gamma_min.unwrap_or(b0.gamma.min), d.gamma_max.unwrap_or(b0.gamma.max)),
        delta: LogRange::new(d.delta_min.unwrap_or(b0.delta.min), d.delta_max.unwrap_or(b0.delta.max)),
        electrons: LogRange::new(
            d.electrons_min.unwrap_or(b0.electrons.min),
            d.electrons_max.unwrap_or(b0.electrons.max),
        ),
        points: d.points.unwrap_or(b0.points),
    };
    let cal = calibration(d)?;
    let (design, r) = optimize_design(&targets, &bounds, cal).map_err(CliError::input)?;
    let count = distinguishable_values(r.n_min, r.n_max, r.delta_n_err);
    let label = |c: &qndsim_core::detector::Constraint| serde_json::to_value(c).expect("labels serialize");
    let binding: Vec<String> =
        r.binding_constraints.iter().map(|c| label(c).as_str().unwrap_or_default().to_owned()).collect();
    let most_violated = r.most_violated.as_ref().map(|c| label(c).as_str().unwrap_or_default().to_owned());

    let json = json!({
        "feasible": r.feasible,
        "design": {
            "gamma": design.gamma,
            "delta": design.delta,
            "tau_p": design.tau_p,
            "electrons": design.electrons,
        },
        "calibration": cal,
        "targets": targets,
        "n_min": r.n_min,
        "n_max": r.n_max,
        "delta_n_err": r.delta_n_err,
        "distinguishable_values": count,
        "entropy_bits": r.entropy_bits,
        "binding_constraints": binding,
        "most_violated": most_violated,
        "below_standard_quantum_limit": r.below_standard_quantum_limit,
    });
    let report = Report {
        json,
        header: vec![
            "feasible",
            "gamma",
            "delta",
            "tau_p",
            "electrons",
            "n_min",
            "n_max",
            "delta_n_err",
            "distinguishable_values",
            "entropy_bits",
            "binding_constraints",
            "most_violated",
            "below_standard_quantum_limit",
        ],
        rows: vec![vec![
            r.feasible.into(),
            design.gamma.into(),
            design.delta.into(),
            design.tau_p.into(),
            design.electrons.into(),
            r.n_min.into(),
            r.n_max.into(),
            r.delta_n_err.into(),
            count.into(),
            r.entropy_bits.into(),
            binding.join(";").into(),
            most_violated.clone().unwrap_or_default().into(),
            r.below_standard_quantum_limit.into(),
        ]],
    };
    let status = if r.feasible {
        Ok(())
    } else {
        Err(CliError::Infeasible(format!(
            "no design within bounds meets the targets; most violated constraint: {}",
            most_violated.unwrap_or_default()
        )))
    };
    Ok((report, status))
}

pub fn entropy(e: &EntropyArgs) -> Result<Report, CliError> {
    let (a, b, c) = DEFAULT_ENTROPY_RANGE;
    let n_min = finite("n_min", e.n_min.unwrap_or(a))?;
    let n_max = finite("n_max", e.n_max.unwrap_or(b))?;
    let err = finite("err", e.err.unwrap_or(c))?;
    let bits = entropy_bits(n_min, n_max, err).map_err(CliError::input)?;
    let count = distinguishable_values(n_min, n_max, err);
    Ok(Report {
        json: json!({
            "n_min": n_min,
            "n_max": n_max,
            "delta_n_err": err,
            "distinguishable_values": count,
            "entropy_bits": bits,
        }),
        header: vec!["n_min", "n_max", "delta_n_err", "distinguishable_values", "entropy_bits"],
        rows: vec![vec![n_min.into(), n_max.into(), err.into(), count.into(), bits.into()]],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(h: Hamiltonian, g: f64, delta: f64) -> ModelArgs {
        ModelArgs { hamiltonian: Some(h), g: Some(g), delta: Some(delta), ..Default::default() }
    }

    #[test]
    fn qnd_check_examples() {
        let r = qnd_check(&model(Hamiltonian::Effective, 1.0, 10.0)).unwrap();
        assert_eq!(r.json["strong"], true);
        assert!(r.json["epsilon_ba"].as_f64().unwrap() <= 1e-10);

        let r = qnd_check(&model(Hamiltonian::GaugeAnalog, 0.0, 10.0)).unwrap();
        assert_eq!(r.json["strong"], true);

        let r = qnd_check(&model(Hamiltonian::GaugeAnalog, 0.5, 5.0)).unwrap();
        assert_eq!(r.json["strong"], false);
        assert!(r.json["epsilon_ba"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn system_state_inputs() {
        let m = ModelArgs { amplitudes: Some(vec![0.6, 0.8]), ..Default::default() };
        assert_eq!(system_state(&m).unwrap().dim(), 2);
        let m = ModelArgs { amplitudes: Some(vec![0.6, 0.6]), ..Default::default() };
        assert_eq!(system_state(&m).unwrap_err().exit_code(), 2);
        let m = ModelArgs { amplitudes: Some(vec![0.6, 0.8]), cutoff: Some(3), ..Default::default() };
        assert!(system_state(&m).is_err());
        let m = ModelArgs { fock: Some(7), ..Default::default() };
        assert!(system_state(&m).is_err());
        assert_eq!(probe_state(ProbeState::Ground).probabilities()[pauli::LOWER], 1.0);
    }

    #[test]
    fn calibration_layers() {
        let unit = calibration(&DesignArgs::default()).unwrap();
        assert_eq!(unit, Calibration::default());
        let anchored = calibration(&DesignArgs { err: Some(100.0), ..Default::default() }).unwrap();
        let preset =
            calibration(&DesignArgs { calibration: Some(CalibrationPreset::Reference), ..Default::default() }).unwrap();
        assert_eq!(anchored, preset);
        let explicit = calibration(&DesignArgs { err: Some(100.0), c_ba: Some(5.0), ..Default::default() }).unwrap();
        assert_eq!(explicit.c_ba, 5.0);
        assert_eq!(explicit.c_err, preset.c_err);
    }

    #[test]
    fn reference_design_report() {
        let (r, status) = design(&DesignArgs { eps_err: Some(0.01), err: Some(100.0), ..Default::default() }).unwrap();
        assert!(status.is_ok());
        assert_eq!(r.json["n_min"].as_f64().unwrap(), 1e4);
        let bits = r.json["entropy_bits"].as_f64().unwrap();
        assert!((12.8..=13.8).contains(&bits));
    }

    #[test]
    fn unit_calibration_at_reference_targets_is_infeasible() {
        let (r, status) = design(&DesignArgs::default()).unwrap();
        assert_eq!(status.unwrap_err().exit_code(), 3);
        assert_eq!(r.json["feasible"], false);
        assert!(r.json["most_violated"].is_string());
    }

    #[test]
    fn empty_sweep_is_a_validation_error() {
        let e = sweep(&ModelArgs::default(), &ProtocolArgs::default(), &SweepArgs::default(), 0).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}

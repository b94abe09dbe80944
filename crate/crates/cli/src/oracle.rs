//! Closed forms against the master-equation and Monte Carlo oracles.

use std::f64::consts::TAU;

use libration::lindblad::{build_reduced, build_two_mode, steady_state_converged, FockSpace, DEFAULT_MAX_DIM};
use libration::rates::{phase_noise_heating, steady_state_occupation};
use libration::stochastic::{run_ensemble, EnsembleConfig};
use libration::OperatingPoint;
use serde::Serialize;
use serde_json::json;

use crate::commands::{load, require_seed, Output, MAX_TRAJECTORIES};
use crate::error::CliError;
use crate::{Cli, OracleArgs};

/// Above this G/κ adiabatic elimination is outside its validity range.
const ADIABATIC_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum Status {
    Pass,
    Fail,
    /// Outside the documented validity range; a failure is expected.
    ExpectedFail,
}

#[derive(Debug, Clone, Serialize)]
struct Check {
    name: String,
    status: Status,
    measured: f64,
    expected: f64,
    /// Largest accepted |measured − expected|.
    bound: f64,
}

impl Check {
    fn new(name: impl Into<String>, measured: f64, expected: f64, bound: f64) -> Self {
        let ok = (measured - expected).abs() <= bound;
        Self {
            name: name.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            measured,
            expected,
            bound,
        }
    }
}

fn reference_point(coupling_g: f64, gamma_ba: f64, psd_s: f64, ncav: f64) -> OperatingPoint {
    let (omega, kappa) = (TAU * 1.1e6, TAU * 330e3);
    OperatingPoint {
        omega_alpha: omega,
        kappa,
        detuning: omega,
        coupling_g,
        recoil_gamma_ba: gamma_ba,
        psd_s,
        drive_lambda: OperatingPoint::lambda_for_ncav(ncav, omega, kappa),
    }
}

pub fn run(cli: &Cli, a: &OracleArgs) -> Result<(Output, usize), CliError> {
    if a.max_dim > DEFAULT_MAX_DIM {
        return Err(CliError::Budget(format!("--max-dim {} exceeds {DEFAULT_MAX_DIM}", a.max_dim)));
    }
    if a.trajectories > MAX_TRAJECTORIES {
        return Err(CliError::Budget(format!("{} trajectories requested, limit {MAX_TRAJECTORIES}", a.trajectories)));
    }
    let seed = if a.no_stochastic { cli.global.seed } else { Some(require_seed(cli)?) };
    let run = load(cli)?;
    let mut checks = Vec::new();

    // reduced equation against detailed balance
    let base = steady_state_occupation(&reference_point(TAU * 10e3, 0.0, 0.0, 0.0))?;
    for &(ap, am, g) in &[(10.0, 1000.0, 50.0), (0.0, 2000.0, 300.0), (200.0, 900.0, 40.0)] {
        let mut r = base;
        r.a_plus = ap;
        r.a_minus = am;
        r.recoil_gamma_ba = g;
        r.gamma_phi = 0.0;
        let start = FockSpace::with_max_dim(10, 1, a.max_dim)?;
        let sol = steady_state_converged(|s| build_reduced(&r, TAU * 1.1e6, s), start, 1e-9)?;
        let want = (g + ap) / (am - ap);
        checks.push(Check::new(format!("reduced_balance(A+={ap},A-={am},Gamma={g})"), sol.n_lib, want, 1e-6 * want));
    }

    // two-mode equation against the backaction-limited occupation
    let kappa = TAU * 330e3;
    for &ratio in &a.g_over_kappa {
        if !(ratio > 0.0) || !ratio.is_finite() {
            return Err(CliError::Usage(format!("--g-over-kappa {ratio} must be > 0")));
        }
        let g = ratio * kappa;
        let op = reference_point(g, 0.3 * 4.0 * g * g / kappa, 0.0, 0.0);
        let want = steady_state_occupation(&op)?.n0;
        let start = FockSpace::with_max_dim(14, 4, a.max_dim)?;
        let mut c = match steady_state_converged(|s| build_two_mode(&op, s, 0.0), start, 1e-4) {
            Ok(sol) => Check::new(format!("adiabatic_elimination(G/kappa={ratio})"), sol.n_lib, want, 4.0 * ratio * want),
            Err(e) if ratio > ADIABATIC_LIMIT => Check {
                name: format!("adiabatic_elimination(G/kappa={ratio}): {e}"),
                status: Status::Fail,
                measured: f64::NAN,
                expected: want,
                bound: 4.0 * ratio * want,
            },
            Err(e) => return Err(e.into()),
        };
        if ratio > ADIABATIC_LIMIT {
            // agreement there is coincidental; the regime itself is the failed check
            checks.push(Check {
                name: format!("adiabatic_regime(G/kappa={ratio})"),
                status: Status::ExpectedFail,
                measured: ratio,
                expected: 0.0,
                bound: ADIABATIC_LIMIT,
            });
            if c.status == Status::Fail {
                c.status = Status::ExpectedFail;
            }
        }
        checks.push(c);
    }

    if let Some(seed) = seed.filter(|_| !a.no_stochastic) {
        let m = run.model_params();
        let cfg = EnsembleConfig {
            n_trajectories: a.trajectories,
            periods: a.periods,
            master_seed: seed,
            ..Default::default()
        };
        let op_a = reference_point(m.coupling_g0 * m.phase_phi.sin(), m.recoil_gamma_ba, kappa / 100.0, m.ncav0);
        let ens = run_ensemble(&op_a, &cfg)?;
        let e = ens.ncav_ensemble;
        // the weak-noise value op_a.ncav() sits about 1% (one standard error) below this
        checks.push(Check::new("cavity_occupation(S=kappa/100)", e.mean, op_a.ncav_phase_diffused(), 3.0 * e.std_error));

        let op_b = OperatingPoint { psd_s: kappa / 50.0, ..op_a };
        let cfg_b = EnsembleConfig { master_seed: seed.wrapping_add(1), ..cfg };
        let h = run_ensemble(&op_b, &cfg_b)?
            .heating
            .ok_or_else(|| CliError::Numeric("ensemble too small for a heating estimate".into()))?;
        let want = phase_noise_heating(&op_b)?;
        let sigma = (h.std_error.powi(2) + (want * op_b.psd_s / op_b.kappa).powi(2)).sqrt();
        checks.push(Check::new("phase_noise_heating(S=kappa/50)", h.gamma_phi, want, 3.0 * sigma));
    }

    let failures = checks.iter().filter(|c| c.status == Status::Fail).count();
    let json = json!({
        "seed": seed,
        "max_dim": a.max_dim,
        "trajectories": a.trajectories,
        "all_passed": failures == 0,
        "checks": checks,
    });
    Ok((Output { table: None, json }, failures))
}

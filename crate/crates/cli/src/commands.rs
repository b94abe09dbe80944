use std::f64::consts::{FRAC_PI_2, TAU};
use std::io::Write;

use libration::analysis::{self, ModelParams, ScanResult};
use libration::config::RunParams;
use libration::io::{to_json_pretty, write_atomic, Table};
use libration::lindblad::{build_reduced, build_two_mode, steady_state_converged, FockSpace, DEFAULT_MAX_DIM};
use libration::noise_eater::effective_psd_at_libration;
use libration::params::derive;
use libration::rates::steady_state_occupation;
use libration::stochastic::{run_ensemble, trajectory_rng, EnsembleConfig};
use libration::thermometry::{
    correct_detector_response, lorentzian, occupation_from_asymmetry, occupation_from_spectrum, synthesize_sidebands,
    DetectorResponse, Spectrum,
};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::{Cli, Command, Format, LindbladModel, ScanArgs, ScanKind, ThermometryCmd};

/// Largest accepted Monte Carlo ensemble.
pub const MAX_TRAJECTORIES: usize = 10_000;

/// Command result: JSON always, a table where the output is tabular.
pub struct Output {
    pub table: Option<Table>,
    pub json: Value,
}

impl Output {
    fn json(json: Value) -> Self {
        Self { table: None, json }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let (out, failures) = match &cli.command {
        Command::Oracle(a) => crate::oracle::run(cli, a)?,
        cmd => (dispatch(cli, cmd)?, 0),
    };
    emit(cli, &out)?;
    if failures > 0 {
        return Err(CliError::ChecksFailed(failures));
    }
    Ok(())
}

fn dispatch(cli: &Cli, cmd: &Command) -> Result<Output, CliError> {
    match cmd {
        Command::Derive => cmd_derive(cli),
        Command::Scan(a) => cmd_scan(cli, a),
        Command::LindbladSteady(a) => cmd_lindblad(cli, a),
        Command::StochasticSim(a) => cmd_stochastic(cli, a),
        Command::Thermometry(t) => cmd_thermometry(cli, t),
        Command::NoiseEater(a) => cmd_noise_eater(cli, a),
        Command::Transient(a) => cmd_transient(cli, a),
        Command::Oracle(_) => unreachable!("handled by run"),
    }
}

fn emit(cli: &Cli, out: &Output) -> Result<(), CliError> {
    let format = cli.global.format.unwrap_or(if out.table.is_some() { Format::Csv } else { Format::Json });
    let text = match format {
        Format::Json => to_json_pretty(&out.json),
        Format::Csv => match &out.table {
            Some(t) => t.to_csv_string(),
            None => return Err(CliError::Usage("this command has no CSV form; use --format json".into())),
        },
    };
    match &cli.global.out {
        Some(path) => write_atomic(path, text.as_bytes())?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn load(cli: &Cli) -> Result<RunParams, CliError> {
    Ok(RunParams::load(cli.global.preset.as_deref(), cli.global.params.as_deref())?)
}

pub fn require_seed(cli: &Cli) -> Result<u64, CliError> {
    cli.global
        .seed
        .ok_or_else(|| CliError::Usage("this command is stochastic and needs --seed".into()))
}

fn model(run: &RunParams, ky: Option<f64>) -> Result<ModelParams, CliError> {
    let mut m = run.model_params();
    if let Some(ky) = ky {
        m.phase_phi = ky;
        m.validate()?;
    }
    Ok(m)
}

fn linspace(from: f64, to: f64, points: usize) -> Result<Vec<f64>, CliError> {
    if points == 0 {
        return Err(CliError::Usage("empty grid: --points must be >= 1".into()));
    }
    if !from.is_finite() || !to.is_finite() {
        return Err(CliError::Usage("grid bounds must be finite".into()));
    }
    if points == 1 {
        return Ok(vec![from]);
    }
    let step = (to - from) / (points - 1) as f64;
    Ok((0..points).map(|k| if k + 1 == points { to } else { from + step * k as f64 }).collect())
}

fn cmd_derive(cli: &Cli) -> Result<Output, CliError> {
    let run = load(cli)?;
    let d = derive(&run.experiment_params())?;
    let rows: [(&str, &str, f64); 9] = [
        ("Omega_alpha/2pi", "Hz", d.omega_alpha / TAU),
        ("alpha_zpf", "rad", d.alpha_zpf),
        ("E0", "V/m", d.field_e0),
        ("E_c", "V/m", d.zp_field_ec),
        ("V_c", "m^3", d.mode_volume_vc),
        ("G/2pi", "Hz", d.coupling_g / TAU),
        ("Gamma_BA/2pi", "Hz", d.recoil_gamma_ba / TAU),
        ("Lambda", "rad/s", d.drive_lambda),
        ("n_cav", "1", d.ncav_ss),
    ];
    let mut table = Table::new(rows.iter().map(|(n, u, _)| format!("{n} [{u}]")));
    table.push(rows.iter().map(|r| r.2).collect());
    let quantities: Vec<Value> = rows
        .iter()
        .map(|(n, u, v)| json!({"name": n, "unit": u, "value": v}))
        .collect();
    Ok(Output {
        table: Some(table),
        json: json!({"name": run.name, "quantities": quantities, "derived": d}),
    })
}

fn scan_table(scan: &ScanResult, header: &str, scale: f64) -> Table {
    let mut t = Table::new([
        header,
        "n_ss [1]",
        "n0 [1]",
        "n_phi [1]",
        "n_exact [1]",
        "A_plus [rad/s]",
        "A_minus [rad/s]",
        "gamma_cool [rad/s]",
        "Gamma_phi [rad/s]",
        "n_cav [1]",
        "S [rad^2/s]",
    ]);
    for ((v, r), s) in scan.values.iter().zip(&scan.rates).zip(&scan.psd_s) {
        t.push(vec![
            v * scale,
            r.n_ss,
            r.n0,
            r.n_phi,
            r.n_exact,
            r.a_plus,
            r.a_minus,
            r.gamma_cool,
            r.gamma_phi,
            r.ncav,
            *s,
        ]);
    }
    t
}

fn cmd_scan(cli: &Cli, a: &ScanArgs) -> Result<Output, CliError> {
    let run = load(cli)?;
    let m = model(&run, a.ky)?;
    let (scan, header, scale) = match a.kind {
        ScanKind::Detuning => {
            let f_alpha = m.omega_alpha / TAU;
            let grid = linspace(a.from.unwrap_or(0.05 * f_alpha), a.to.unwrap_or(2.0 * f_alpha), a.points)?;
            let rad: Vec<f64> = grid.iter().map(|f| f * TAU).collect();
            (analysis::detuning_scan(&m, &rad)?, "Delta/2pi [Hz]", 1.0 / TAU)
        }
        ScanKind::Position => {
            let grid = linspace(a.from.unwrap_or(0.0), a.to.unwrap_or(FRAC_PI_2), a.points)?;
            // the end point can round past π/2 when given in decimal
            let grid: Vec<f64> = grid.into_iter().map(|v| if (v - FRAC_PI_2).abs() < 1e-12 { FRAC_PI_2 } else { v }).collect();
            (analysis::position_scan(&m, &grid, a.gain)?, "ky [rad]", 1.0)
        }
        ScanKind::Gain => {
            let grid = linspace(a.from.unwrap_or(0.0), a.to.unwrap_or(1.0), a.points)?;
            let fb = run.feedback_params(0.0)?;
            (analysis::gain_scan(&m, &grid, &fb)?, "g [1]", 1.0)
        }
    };
    let table = scan_table(&scan, header, scale);
    Ok(Output {
        table: Some(table),
        json: serde_json::to_value(&scan).expect("serializable scan"),
    })
}

fn cmd_lindblad(cli: &Cli, a: &crate::LindbladArgs) -> Result<Output, CliError> {
    let run = load(cli)?;
    let m = model(&run, a.ky)?;
    let fb = run.feedback_params(a.gain)?;
    let s = effective_psd_at_libration(&fb, m.psd_s, m.omega_alpha)?;
    let op = m.operating_point_at(m.phase_phi, m.detuning, s);
    let rates = steady_state_occupation(&op)?;
    let (n_cav, start) = match a.model {
        LindbladModel::TwoMode => (a.n_cav, FockSpace::with_max_dim(a.n_lib, a.n_cav, DEFAULT_MAX_DIM)?),
        LindbladModel::Reduced => (1, FockSpace::with_max_dim(a.n_lib, 1, DEFAULT_MAX_DIM)?),
    };
    let solved = match a.model {
        LindbladModel::TwoMode => steady_state_converged(|sp| build_two_mode(&op, sp, 0.0), start, a.tol)?,
        LindbladModel::Reduced => steady_state_converged(|sp| build_reduced(&rates, op.omega_alpha, sp), start, a.tol)?,
    };
    let closed = rates.n_exact;
    Ok(Output::json(json!({
        "model": match a.model { LindbladModel::TwoMode => "two-mode", LindbladModel::Reduced => "reduced" },
        "n_cav_cutoff": n_cav,
        "steady_state": solved.summary,
        "closed_form": {"n_exact": closed, "n_ss": rates.n_ss, "n0": rates.n0, "n_phi": rates.n_phi},
        "relative_difference": (solved.n_lib - closed).abs() / closed,
        "operating_point": op,
    })))
}

fn cmd_stochastic(cli: &Cli, a: &crate::StochasticArgs) -> Result<Output, CliError> {
    let seed = require_seed(cli)?;
    if a.trajectories > MAX_TRAJECTORIES {
        return Err(CliError::Budget(format!("{} trajectories requested, limit {MAX_TRAJECTORIES}", a.trajectories)));
    }
    let run = load(cli)?;
    let m = model(&run, a.ky)?;
    let s = match a.psd_over_kappa {
        Some(r) => r * m.kappa,
        None => m.psd_s,
    };
    let op = m.operating_point_at(m.phase_phi, m.detuning, s);
    let cfg = EnsembleConfig {
        n_trajectories: a.trajectories,
        periods: a.periods,
        steps_per_period: a.steps_per_period,
        master_seed: seed,
    };
    let res = run_ensemble(&op, &cfg)?;
    let rates = steady_state_occupation(&op)?;
    Ok(Output::json(json!({
        "config": cfg,
        "operating_point": op,
        "ensemble": res,
        "closed_form": {"n_cav": op.ncav(), "gamma_phi": rates.gamma_phi},
    })))
}

fn model_linewidth_hz(run: &RunParams) -> Result<f64, CliError> {
    let r = steady_state_occupation(&run.model_params().operating_point())?;
    let g = r.a_minus - r.a_plus;
    if !(g > 0.0) {
        return Err(CliError::Numeric("model has no optical damping at this operating point; pass --linewidth-hz".into()));
    }
    Ok(g / TAU)
}

fn cmd_thermometry(cli: &Cli, t: &ThermometryCmd) -> Result<Output, CliError> {
    match *t {
        ThermometryCmd::Synth { n, linewidth_hz, floor, noise, c_ratio } => {
            let run = load(cli)?;
            let resp = DetectorResponse::new(c_ratio)?;
            let fw = match linewidth_hz {
                Some(f) => f,
                None => model_linewidth_hz(&run)?,
            };
            let omega = run.model_params().omega_alpha;
            let mut spec = synthesize_sidebands(n, fw * TAU, omega, floor, resp)?;
            if noise > 0.0 {
                let seed = require_seed(cli)?;
                let peak = lorentzian(0.0, 0.0, fw, n + 1.0);
                spec = spec.with_noise(noise * peak, &mut trajectory_rng(seed, 0))?;
            } else if noise < 0.0 {
                return Err(CliError::Usage("--noise must be >= 0".into()));
            }
            let mut table = Table::new(["freq [Hz]", "psd [arb/Hz]"]);
            for (f, p) in spec.freq.iter().zip(&spec.psd) {
                table.push(vec![*f, *p]);
            }
            Ok(Output {
                table: Some(table),
                json: serde_json::to_value(&spec).expect("serializable spectrum"),
            })
        }
        ThermometryCmd::Fit { ref input, half_width_hz, floor, c_ratio } => {
            let run = load(cli)?;
            let resp = DetectorResponse::new(c_ratio)?;
            let file = std::fs::File::open(input)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", input.display())))?;
            let spec = Spectrum::read_csv(std::io::BufReader::new(file), floor)?;
            let hw = match half_width_hz {
                Some(h) => h,
                None => 10.0 * model_linewidth_hz(&run)?,
            };
            let occ = occupation_from_spectrum(&spec, run.model_params().omega_alpha, hw, resp)?;
            Ok(Output::json(serde_json::to_value(occ).expect("serializable")))
        }
        ThermometryCmd::Asymmetry { anti_stokes, stokes, c_ratio } => {
            let resp = DetectorResponse::new(c_ratio)?;
            let n_inf = occupation_from_asymmetry(anti_stokes, stokes)?;
            let n = correct_detector_response(n_inf, resp)?;
            Ok(Output::json(json!({"n_inf": n_inf, "n": n, "correction": if n_inf > 0.0 { n / n_inf } else { 1.0 }})))
        }
    }
}

fn cmd_noise_eater(cli: &Cli, a: &crate::NoiseEaterArgs) -> Result<Output, CliError> {
    let run = load(cli)?;
    let m = model(&run, a.ky)?;
    let gains = linspace(0.0, a.gain_max, a.points)?;
    let fb = run.feedback_params(0.0)?;
    let rows = libration::noise_eater::gain_scan(&fb, &m.operating_point(), m.psd_s, &gains)?;
    let mut table = Table::new(["g [1]", "S_fb [rad^2/s]", "Gamma_phi [rad/s]", "n_ss [1]"]);
    for r in &rows {
        table.push(vec![r.gain_g, r.s_fb, r.gamma_phi, r.n_ss]);
    }
    Ok(Output {
        table: Some(table),
        json: serde_json::to_value(&rows).expect("serializable rows"),
    })
}

fn cmd_transient(cli: &Cli, a: &crate::TransientArgs) -> Result<Output, CliError> {
    let gamma = match a.gamma_opt {
        Some(g) => g,
        None => {
            let run = load(cli)?;
            let r = steady_state_occupation(&run.model_params().operating_point())?;
            (r.a_minus - r.a_plus).max(0.0)
        }
    };
    if !(a.t_max >= 0.0) {
        return Err(CliError::Usage("--t-max must be >= 0".into()));
    }
    let t = linspace(0.0, a.t_max, a.points)?;
    let n = analysis::transient_occupation(a.n0, gamma, a.gamma_total, &t)?;
    let mut table = Table::new(["t [s]", "n [1]"]);
    for (t, n) in t.iter().zip(&n) {
        table.push(vec![*t, *n]);
    }
    Ok(Output {
        table: Some(table),
        json: json!({
            "gamma_opt": gamma,
            "gamma_total": a.gamma_total,
            "initial_slope": analysis::initial_slope(a.n0, gamma, a.gamma_total),
            "t": t,
            "n": n,
        }),
    })
}

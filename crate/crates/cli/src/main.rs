mod args;

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dtc_core::calibration::{
    append_run_log, curve_csv, solve_gate_time, tune_dc_ramp, CurvePoint, GateSimulator, PulseFamily, RunRecord, TuneOptions,
};
use dtc_core::constants::{angular_to_khz, angular_to_mhz, ghz_to_angular};
use dtc_core::dynamics::{BasisSpec, DressedModel, PropagationOptions, DEFAULT_ANCHOR_STATES, DEFAULT_IDLE_STATES};
use dtc_core::pulses::pulse_csv;
use dtc_core::spectrum::{default_sweep_grid, peak_bracket, sweep_csv, SpectrumSolver, SweepColumns, DEFAULT_LEVELS, IDLE_BRACKET};
use dtc_core::{DeviceParams, Error, HamiltonianModel};

use args::{parse_angle, parse_bracket, parse_grid, parse_list};

/// Bare levels kept per transmon when building the model.
const DEFAULT_BARE_LEVELS: usize = 7;

#[derive(Parser, Debug)]
#[command(name = "dtcsim", version, about = "Double-transmon coupler simulator")]
struct Cli {
    /// Device config (TOML). Without one the reference design is used.
    #[arg(long, env = "DTCSIM_CONFIG", global = true)]
    config: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Charge cutoff N, overriding the config.
    #[arg(long, global = true)]
    cutoff: Option<usize>,

    /// Bare eigenstates kept per transmon; 0 keeps the full charge basis.
    #[arg(long, global = true, default_value_t = DEFAULT_BARE_LEVELS)]
    bare_levels: usize,

    /// Print the derived parameters (TOML) before running any command.
    #[arg(long)]
    print_derived: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Spectrum, ZZ or coupling versus coupler flux, as CSV.
    Sweep(SweepArgs),
    /// Simulate one gate and report its metrics.
    Gate(GateArgs),
    /// Find the gate time that reaches a target angle.
    Calibrate(CalibrateArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum What {
    Spectrum,
    Zz,
    G,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Kind {
    Sqiswap,
    Cz,
}

#[derive(clap::Args, Debug)]
struct SweepArgs {
    #[arg(long, value_enum, default_value = "zz")]
    what: What,

    /// Flux grid in units of pi: `lo:hi:points` or a single value.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<::std::vec::Vec<f64>>,

    /// Output CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Eigenstates per flux point.
    #[arg(long, default_value_t = DEFAULT_LEVELS)]
    levels: usize,

    /// Idle flux in units of pi for the coupling column (searched when omitted).
    #[arg(long)]
    theta0: Option<f64>,
}

#[derive(clap::Args, Debug, Clone)]
struct PulseArgs {
    /// Idle flux in units of pi (searched when omitted).
    #[arg(long)]
    theta0: Option<f64>,

    /// Ac envelope amplitude in units of pi.
    #[arg(long, default_value_t = 0.1575)]
    alpha: f64,

    /// Ac edge rate (1/ns).
    #[arg(long, default_value_t = 0.3)]
    beta: f64,

    /// Ac carrier frequency in GHz (default: idle detuning).
    #[arg(long)]
    carrier_ghz: Option<f64>,

    /// Dc plateau flux in units of pi (default: |zeta_zz| maximum).
    #[arg(long)]
    peak: Option<f64>,

    /// Dc ramp length as a fraction of the gate time.
    #[arg(long, default_value_t = 0.4)]
    ramp_fraction: f64,

    /// Dc ramp corrections, comma separated.
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    ramp_coeffs: Option<::std::vec::Vec<f64>>,
}

#[derive(clap::Args, Debug, Clone)]
struct NumericArgs {
    /// Integrator error tolerance per ns.
    #[arg(long)]
    tol: Option<f64>,

    /// Idle eigenstates in the dressed basis.
    #[arg(long, default_value_t = DEFAULT_IDLE_STATES)]
    idle_states: usize,

    /// Eigenstates added per anchor flux.
    #[arg(long, default_value_t = DEFAULT_ANCHOR_STATES)]
    anchor_states: usize,
}

#[derive(clap::Args, Debug)]
struct GateArgs {
    #[arg(long, value_enum)]
    kind: Kind,

    /// Gate time (ns).
    #[arg(long = "T")]
    gate_time: f64,

    #[command(flatten)]
    pulse: PulseArgs,

    #[command(flatten)]
    numerics: NumericArgs,

    /// Write the gate report (JSON).
    #[arg(long)]
    report: Option<PathBuf>,

    /// Write the pulse samples (t, theta, theta_dot) as CSV.
    #[arg(long)]
    dump_pulse: Option<PathBuf>,

    /// Sample spacing for --dump-pulse (ns).
    #[arg(long, default_value_t = 0.01)]
    dump_dt: f64,
}

#[derive(clap::Args, Debug)]
struct CalibrateArgs {
    #[arg(long, value_enum)]
    kind: Kind,

    /// Target angle, e.g. `0.25pi`, `pi/4`, `pi` or radians.
    #[arg(long, value_parser = parse_angle)]
    target: Option<f64>,

    /// Gate-time bracket `lo:hi` in ns.
    #[arg(long, value_parser = parse_bracket)]
    bracket: Option<(f64, f64)>,

    /// Curve CSV output (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Run log (JSON lines); defaults to `calibration-runs.jsonl` next to --out.
    #[arg(long)]
    run_log: Option<PathBuf>,

    /// Simulations allowed for dc ramp tuning (cz only).
    #[arg(long, default_value_t = 40)]
    tune_budget: usize,

    /// Gate time at which the dc ramp is tuned (ns).
    #[arg(long, default_value_t = 18.0)]
    tune_time: f64,

    #[command(flatten)]
    pulse: PulseArgs,

    #[command(flatten)]
    numerics: NumericArgs,
}

/// Loaded device plus everything needed for provenance lines.
struct Session {
    model: HamiltonianModel,
    provenance: String,
    hash: String,
}

impl Session {
    fn load(cli: &Cli) -> Result<(Self, DeviceParams), Error> {
        let mut params = match &cli.config {
            Some(path) => DeviceParams::load(path)?,
            None => DeviceParams::paper_defaults(),
        };
        if let Some(n) = cli.cutoff {
            params = params.with_cutoff(n);
            params.validate()?;
        }
        let model = if cli.bare_levels == 0 {
            HamiltonianModel::full(&params)?
        } else {
            HamiltonianModel::truncated(&params, cli.bare_levels)?
        };
        let hash = params.config_hash();
        let provenance = format!(
            "config_hash={hash} charge_cutoff={} bare_levels={} dtcsim={}",
            params.charge_cutoff,
            cli.bare_levels,
            env!("CARGO_PKG_VERSION")
        );
        Ok((Self { model, provenance, hash }, params))
    }

    fn idle_point(&self, override_over_pi: Option<f64>) -> Result<(f64, f64), Error> {
        let solver = SpectrumSolver::new(&self.model);
        match override_over_pi {
            Some(t) => Ok((t, solver.spectrum_at(t)?.delta)),
            None => {
                let idle = solver.find_idle_point(IDLE_BRACKET)?;
                eprintln!(
                    "idle point {:.6} pi, zeta_zz {:.4} kHz, detuning {:.3} MHz",
                    idle.theta_over_pi,
                    angular_to_khz(idle.zz),
                    angular_to_mhz(idle.delta())
                );
                Ok((idle.theta_over_pi, idle.delta()))
            }
        }
    }

    fn family(&self, kind: Kind, pulse: &PulseArgs) -> Result<PulseFamily, Error> {
        let (theta0, delta) = self.idle_point(pulse.theta0)?;
        Ok(match kind {
            Kind::Sqiswap => PulseFamily::Ac {
                theta0: theta0 * PI,
                alpha: pulse.alpha * PI,
                beta: pulse.beta,
                carrier: pulse.carrier_ghz.map_or(delta, ghz_to_angular),
            },
            Kind::Cz => {
                let peak = match pulse.peak {
                    Some(p) => p,
                    None => {
                        let (bracket, points) = peak_bracket(theta0);
                        let (p, zz) = SpectrumSolver::new(&self.model).peak_from_zz_max(bracket, points)?;
                        eprintln!("|zeta_zz| peak {:.6} pi ({:.3} MHz)", p, angular_to_mhz(zz));
                        p
                    }
                };
                PulseFamily::Dc {
                    theta0: theta0 * PI,
                    theta_peak: peak * PI,
                    ramp_fraction: pulse.ramp_fraction,
                    ramp_coeffs: pulse.ramp_coeffs.clone().unwrap_or_default(),
                }
            }
        })
    }

    fn simulator(&self, family: &PulseFamily, numerics: &NumericArgs, default_tol: f64) -> Result<GateSimulator, Error> {
        let mut spec = family.basis_spec();
        spec.idle_states = numerics.idle_states;
        spec.anchor_states = numerics.anchor_states;
        if numerics.anchor_states == 0 {
            spec = BasisSpec::idle_only(numerics.idle_states);
        }
        let dressed = DressedModel::build(&self.model, family.theta0() / PI, &spec)?;
        let options = PropagationOptions::acceptance().with_tol(numerics.tol.unwrap_or(default_tol));
        Ok(GateSimulator::from_dressed(dressed, options).with_config_hash(self.hash.clone()))
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| Error::Io {
            path: p.display().to_string(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_sweep(session: &Session, a: &SweepArgs) -> Result<(), Error> {
    let grid = a.grid.clone().unwrap_or_else(default_sweep_grid);
    let solver = SpectrumSolver::new(&session.model).with_levels(a.levels);
    let sweep = solver.sweep(&grid)?;
    let (what, idle) = match a.what {
        What::Spectrum => (SweepColumns::Spectrum, None),
        What::Zz => (SweepColumns::Zz, None),
        What::G => {
            let theta0 = match a.theta0 {
                Some(t) => t,
                None => session.idle_point(None)?.0,
            };
            (SweepColumns::Coupling, Some(solver.spectrum_at(theta0)?))
        }
    };
    let csv = sweep_csv(&sweep, &session.model, idle.as_ref(), what, &session.provenance);
    write_output(a.out.as_deref(), &csv)
}

fn run_gate(session: &Session, a: &GateArgs) -> Result<(), Error> {
    let family = session.family(a.kind, &a.pulse)?;
    let pulse = family.pulse(a.gate_time)?;
    if let Some(path) = &a.dump_pulse {
        write_output(Some(path), &pulse_csv(pulse.as_pulse(), a.dump_dt, &session.provenance)?)?;
    }
    let sim = session.simulator(&family, &a.numerics, PropagationOptions::acceptance().control.tol)?;
    let report = sim.run(&family, a.gate_time)?;
    println!("{}", report.summary());
    if let Some(path) = &a.report {
        write_output(Some(path), &report.to_json())?;
    }
    Ok(())
}

fn run_calibrate(session: &Session, a: &CalibrateArgs) -> Result<(), Error> {
    let (default_target, default_bracket) = match a.kind {
        Kind::Sqiswap => (PI / 4.0, (20.0, 28.0)),
        Kind::Cz => (PI, (14.0, 22.0)),
    };
    let target = a.target.unwrap_or(default_target);
    let bracket = a.bracket.unwrap_or(default_bracket);
    let mut family = session.family(a.kind, &a.pulse)?;
    let sim = session.simulator(&family, &a.numerics, PropagationOptions::sweep().control.tol)?;

    if a.kind == Kind::Cz && a.tune_budget > 0 {
        if let PulseFamily::Dc { ramp_coeffs, .. } = &mut family {
            if ramp_coeffs.is_empty() {
                *ramp_coeffs = vec![0.0; dtc_core::calibration::DEFAULT_RAMP_TERMS];
            }
        }
        let options = TuneOptions {
            target_phase: Some(target),
            ..TuneOptions::default()
        };
        let tuned = tune_dc_ramp(&sim, &family, a.tune_time, a.tune_budget, &options)?;
        if let Some(r) = &tuned.report {
            eprintln!("tuned ramp after {} simulations: {}", tuned.evaluations, r.summary());
        }
        family = tuned.family;
    }

    let solution = solve_gate_time(&sim, &family, target, bracket)?;
    println!("T* = {:.6} ns", solution.gate_time);
    println!("{}", solution.report.summary());

    let mut curve: Vec<CurvePoint> = solution.curve.clone();
    curve.push(CurvePoint {
        gate_time_ns: solution.gate_time,
        angle: solution.angle,
        avg_fidelity: solution.report.avg_fidelity,
        total_leakage: solution.report.total_leakage(),
    });
    curve.sort_by(|x, y| x.gate_time_ns.total_cmp(&y.gate_time_ns));
    write_output(a.out.as_deref(), &curve_csv(&curve, &session.provenance))?;

    let log_path = match (&a.run_log, &a.out) {
        (Some(p), _) => p.clone(),
        (None, Some(out)) => out.with_file_name("calibration-runs.jsonl"),
        (None, None) => PathBuf::from("calibration-runs.jsonl"),
    };
    append_run_log(&log_path, &RunRecord::new(&family, target, &solution))
}

fn print_derived(session: &Session, params: &DeviceParams) -> Result<(), Error> {
    let derived = params.derive()?;
    let body = toml::to_string(&derived.summary()).map_err(|e| Error::Parse(e.to_string()))?;
    println!("# {}", session.provenance);
    print!("{body}");
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Parse(_) | Error::Io { .. } => 2,
        Error::Bracket { .. } => 4,
        Error::AtGateTime { source, .. } => exit_code(source),
        _ => 3,
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let (session, params) = Session::load(cli)?;
    if cli.print_derived {
        print_derived(&session, &params)?;
    }
    match &cli.command {
        Some(Command::Sweep(a)) => run_sweep(&session, a),
        Some(Command::Gate(a)) => run_gate(&session, a),
        Some(Command::Calibrate(a)) => run_calibrate(&session, a),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.command.is_none() && !cli.print_derived {
        eprintln!("nothing to do; see `dtcsim --help`");
        return ExitCode::from(2);
    }
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: cannot size thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

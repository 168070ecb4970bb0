//! Command-line front end: each subcommand loads a [`RunConfig`], runs one
//! piece of the simulation and returns a text report plus CSV tables.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod config;
pub mod error;
pub mod table;

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use dualgate::constants::angular_to_hz;
use dualgate::ms::{geometric_phase, PairType};
use dualgate::protocol::{
    bell_analysis, error_budget, fit_parity, offres_infidelity, parity_scan_postselected, run_gate, uniform_phases,
    GateConfig, GateRun, Shots,
};
use dualgate::zeeman::{
    find_sweet_spot, qubit_frequency, sensitivity, spectator_detunings, AtomicConstants, SpectatorReport,
    SpectatorTransition,
};

pub use config::RunConfig;
pub use error::CliError;
pub use table::{Metadata, Table};

#[derive(Debug, Parser)]
#[command(name = "dualgate", version, about = "Dual-type trapped-ion gate simulations")]
pub struct Cli {
    /// Configuration file (flat `key = value`); defaults apply without one.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Directory for CSV output.
    #[arg(long, global = true, value_name = "DIR", env = "DUALGATE_OUT_DIR", default_value = ".")]
    pub out: PathBuf,

    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Fock cutoff per mode.
    #[arg(long, global = true, value_name = "N")]
    pub nmax: Option<usize>,

    /// Shots per scan point; 0 selects analytic mode.
    #[arg(long, global = true, value_name = "N")]
    pub shots: Option<u64>,

    #[arg(long, global = true, value_parser = parse_pair)]
    pub pair: Option<PairType>,

    #[command(subcommand)]
    pub command: Command,
}

fn parse_pair(s: &str) -> Result<PairType, String> {
    s.parse::<PairType>().map_err(|e| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Qubit and spectator frequency shifts over a field range.
    Levels {
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        b_min: f64,
        #[arg(long, default_value_t = 20.0, allow_negative_numbers = true)]
        b_max: f64,
        #[arg(long, default_value_t = 201)]
        points: usize,
    },
    /// D-qubit sweet spot and qubit sensitivities at the working field.
    Sweetspot {
        #[arg(long, default_value_t = 5.0)]
        lo: f64,
        #[arg(long, default_value_t = 20.0)]
        hi: f64,
    },
    /// Transverse modes and Lamb-Dicke factors.
    Modes,
    /// Gate time, detuning and calibrated Rabi rates.
    Calibrate,
    /// One gate run with the Bell-state analysis.
    Gate,
    /// Parity scan of the gate output with the contrast fit.
    Parity,
    /// Per-channel error budget of the dual-type gate.
    Budget,
    /// Spectator detunings and the off-resonant excitation estimate.
    Offres,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Levels { .. } => "levels",
            Command::Sweetspot { .. } => "sweetspot",
            Command::Modes => "modes",
            Command::Calibrate => "calibrate",
            Command::Gate => "gate",
            Command::Parity => "parity",
            Command::Budget => "budget",
            Command::Offres => "offres",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub report: String,
    pub tables: Vec<Table>,
    pub metadata: Metadata,
}

/// Configuration file plus command-line overrides, validated.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.nmax {
        cfg.n_max = n;
    }
    if let Some(s) = cli.shots {
        cfg.shots = s;
    }
    if let Some(p) = cli.pair {
        cfg.pair = p;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs the command without touching the filesystem (besides reading the
/// configuration).
pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = resolve_config(cli)?;
    let metadata = Metadata { command: cli.command.name().into(), config_hash: cfg.hash()?, seed: cfg.seed };
    let (report, tables) = match &cli.command {
        Command::Levels { b_min, b_max, points } => levels(&cfg, *b_min, *b_max, *points)?,
        Command::Sweetspot { lo, hi } => sweetspot(&cfg, *lo, *hi)?,
        Command::Modes => modes(&cfg)?,
        Command::Calibrate => calibrate(&cfg)?,
        Command::Gate => gate(&cfg)?,
        Command::Parity => parity(&cfg)?,
        Command::Budget => budget(&cfg)?,
        Command::Offres => offres(&cfg)?,
    };
    Ok(Outcome { report, tables, metadata })
}

/// [`execute`] and write every table under `cli.out`. Returns the report
/// with the written paths appended.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    let outcome = execute(cli)?;
    let mut report = outcome.report;
    for t in &outcome.tables {
        let path = table::write(&cli.out, t, &outcome.metadata)?;
        let _ = writeln!(report, "wrote {}", path.display());
    }
    Ok(report)
}

type Output = (String, Vec<Table>);

fn num(x: f64) -> String {
    x.to_string()
}

fn levels(cfg: &RunConfig, b_min: f64, b_max: f64, points: usize) -> Result<Output, CliError> {
    let single = points == 1 && b_min == b_max;
    if !(b_min.is_finite() && b_max.is_finite()) || points == 0 || (!single && (points < 2 || b_min >= b_max)) {
        return Err(CliError::Usage(format!(
            "field range needs b_min < b_max and at least two points (or one point with b_min = b_max), got [{b_min}, {b_max}] with {points}"
        )));
    }
    let atomic = cfg.atomic()?;
    let (s, d) = (atomic.s_qubit(), atomic.d_qubit());
    let b_ref = cfg.field_gauss;
    let (s_ref, d_ref) = (qubit_frequency(&s, b_ref)?, qubit_frequency(&d, b_ref)?);

    let mut header = vec!["B_gauss".to_string(), "f_S_shift_hz".into(), "f_D_shift_hz".into()];
    header.extend(SpectatorTransition::D52_DEFAULT.iter().map(|t| format!("{}_shift_hz", t.key())));
    let mut t = Table { name: "levels.csv".into(), header, rows: Vec::new() };
    for k in 0..points {
        let b = if points == 1 { b_min } else { b_min + (b_max - b_min) * k as f64 / (points - 1) as f64 };
        let mut row = vec![num(b), num(qubit_frequency(&s, b)? - s_ref), num(qubit_frequency(&d, b)? - d_ref)];
        let spectators = spectator_detunings(&atomic.d52(), b, &[])?;
        row.extend(spectators.entries.iter().map(|e| num(e.spectator_hz - d_ref)));
        t.push(row);
    }
    let report = format!(
        "levels: {points} fields in [{b_min}, {b_max}] G, shifts relative to the qubit frequencies at {b_ref} G\n  f_S({b_ref} G) = {:.6} MHz\n  f_D({b_ref} G) = {:.6} MHz\n",
        s_ref / 1e6,
        d_ref / 1e6
    );
    Ok((report, vec![t]))
}

fn sweetspot(cfg: &RunConfig, lo: f64, hi: f64) -> Result<Output, CliError> {
    if !(lo < hi) {
        return Err(CliError::Usage(format!("bracket needs lo < hi, got [{lo}, {hi}]")));
    }
    let atomic = cfg.atomic()?;
    let d = atomic.d_qubit();
    let b_sweet = find_sweet_spot(&d, lo, hi)?;
    let mut t = Table::new("sweetspot.csv", &["qubit", "B_gauss", "frequency_hz", "sensitivity_hz_per_gauss"]);
    let mut report = String::new();
    let b = cfg.field_gauss;
    for (name, q, field) in [("S", atomic.s_qubit(), b), ("D", d, b), ("D_sweet_spot", d, b_sweet)] {
        let (f, slope) = (qubit_frequency(&q, field)?, sensitivity(&q, field)?);
        t.push(vec![name.into(), num(field), num(f), num(slope)]);
        let _ = writeln!(report, "{name:>12}: B = {field:.4} G, f = {:.6} MHz, df/dB = {:.1} Hz/G", f / 1e6, slope);
    }
    Ok((report, vec![t]))
}

fn modes(cfg: &RunConfig) -> Result<Output, CliError> {
    let (predicted, _) = cfg.normal_modes()?;
    let gc = cfg.gate_config()?;
    let mut t = Table::new(
        "modes.csv",
        &["mode", "predicted_mhz", "used_mhz", "participation_1", "participation_2", "eta_1", "eta_2", "eta_single_ion"],
    );
    let mut report = String::from("transverse modes:\n");
    for (p, m) in predicted.iter().zip(&gc.modes) {
        let (fp, fu) = (angular_to_hz(p.omega) / 1e6, angular_to_hz(m.omega) / 1e6);
        t.push(vec![
            m.kind.to_string(),
            num(fp),
            num(fu),
            num(m.participation[0]),
            num(m.participation[1]),
            num(m.eta[0]),
            num(m.eta[1]),
            num(m.single_ion_eta()),
        ]);
        let _ = writeln!(
            report,
            "  {:<8} predicted {fp:.6} MHz, used {fu:.6} MHz, eta = ({:+.5}, {:+.5})",
            m.kind.to_string(),
            m.eta[0],
            m.eta[1]
        );
    }
    Ok((report, vec![t]))
}

/// `(quantity, value, unit)`
type CalibrationRow = (String, f64, &'static str);

fn calibration_lines(gc: &GateConfig) -> Result<(String, Vec<CalibrationRow>), CliError> {
    let s = gc.schedule()?;
    let chi = geometric_phase(&s.drive(), &gc.modes, s.duration)?;
    let rows = vec![
        ("gate_time".to_string(), s.duration * 1e6, "us"),
        ("mu".into(), angular_to_hz(s.mu) / 1e3, "kHz"),
        ("rabi_1".into(), angular_to_hz(s.rabi[0]) / 1e3, "kHz"),
        ("rabi_2".into(), angular_to_hz(s.rabi[1]) / 1e3, "kHz"),
        ("chi".into(), chi, "rad"),
    ];
    let mut report = String::new();
    let _ = writeln!(report, "  T = {:.4} us, mu = 2pi x {:.3} kHz", s.duration * 1e6, angular_to_hz(s.mu) / 1e3);
    let _ = writeln!(
        report,
        "  Omega = 2pi x ({:.3}, {:.3}) kHz, chi(T) = {chi:.6} rad",
        angular_to_hz(s.rabi[0]) / 1e3,
        angular_to_hz(s.rabi[1]) / 1e3
    );
    for m in &gc.modes {
        let _ = writeln!(report, "  eta[{}] = ({:+.5}, {:+.5})", m.kind, m.eta[0], m.eta[1]);
    }
    Ok((report, rows))
}

fn calibrate(cfg: &RunConfig) -> Result<Output, CliError> {
    let gc = cfg.gate_config()?;
    let (body, rows) = calibration_lines(&gc)?;
    let mut t = Table::new("calibrate.csv", &["quantity", "value", "unit"]);
    for (q, v, u) in rows {
        t.push(vec![q, num(v), u.into()]);
    }
    Ok((format!("calibration:\n{body}"), vec![t]))
}

fn shots(cfg: &RunConfig) -> Shots {
    if cfg.shots == 0 { Shots::Analytic } else { Shots::Sampled(cfg.shots) }
}

fn simulate(cfg: &RunConfig) -> Result<(GateConfig, GateRun), CliError> {
    let gc = cfg.gate_config()?;
    let run = run_gate(cfg.pair, &cfg.noise(), &gc)?;
    Ok((gc, run))
}

fn parity_table(cfg: &RunConfig, run: &GateRun) -> Result<(Table, dualgate::protocol::ParityFit), CliError> {
    let scan = parity_scan_postselected(
        &run.rho,
        &uniform_phases(cfg.phase_points),
        cfg.pair,
        shots(cfg),
        cfg.seed,
        cfg.noise().effective_spam(),
        cfg.postselect_leak,
    )?;
    let fit = fit_parity(&scan)?;
    let mut t = Table::new("parity.csv", &["phase_rad", "parity", "stderr"]);
    for k in 0..scan.phases.len() {
        t.push(vec![num(scan.phases[k]), num(scan.parities[k]), num(scan.stderr[k])]);
    }
    Ok((t, fit))
}

fn gate(cfg: &RunConfig) -> Result<Output, CliError> {
    let (gc, run) = simulate(cfg)?;
    let (cal, _) = calibration_lines(&gc)?;
    let bell = bell_analysis(
        &run.rho,
        cfg.pair,
        &uniform_phases(cfg.phase_points),
        shots(cfg),
        cfg.seed,
        cfg.noise().effective_spam(),
    )?;
    let mut report = format!("gate {} (n_max = {}):\n{cal}", cfg.pair, cfg.n_max);
    let _ = writeln!(report, "  state fidelity before readout = {:.6}", run.fidelity);
    if let Some(shift) = run.truncation_shift {
        let _ = writeln!(report, "  truncation shift at n_max + 2 = {shift:.2e}");
    }
    let _ = writeln!(
        report,
        "  populations P = {:.5}, contrast C = {:.5}, Bell fidelity F = {:.5} +/- {:.5}",
        bell.p_pop.value, bell.contrast.value, bell.fidelity.value, bell.fidelity.stderr
    );
    let mut tables = Vec::new();
    if cfg.shots > 0 {
        tables.push(parity_table(cfg, &run)?.0);
    }
    Ok((report, tables))
}

fn parity(cfg: &RunConfig) -> Result<Output, CliError> {
    let (_, run) = simulate(cfg)?;
    let (t, fit) = parity_table(cfg, &run)?;
    let mode = if cfg.shots == 0 { "analytic".to_string() } else { format!("{} shots per point", cfg.shots) };
    let report = format!(
        "parity scan {} ({} points, {mode}):\n  contrast = {:.5} +/- {:.5}, phi0 = {:.4} +/- {:.4} rad, max residual = {:.2e}\n",
        cfg.pair,
        cfg.phase_points,
        fit.contrast.value,
        fit.contrast.stderr,
        fit.phi0.value,
        fit.phi0.stderr,
        fit.max_residual
    );
    Ok((report, vec![t]))
}

fn spectators(cfg: &RunConfig, atomic: &AtomicConstants, gc: &GateConfig) -> Result<SpectatorReport, CliError> {
    let freqs: Vec<f64> = gc.modes.iter().map(|m| angular_to_hz(m.omega)).collect();
    Ok(spectator_detunings(&atomic.d52(), cfg.field_gauss, &freqs)?)
}

fn budget(cfg: &RunConfig) -> Result<Output, CliError> {
    let atomic = cfg.atomic()?;
    let gc = cfg.gate_config()?;
    let noise = cfg.noise();
    let b = error_budget(&noise, &gc, &spectators(cfg, &atomic, &gc)?)?;
    let mut t = Table::new("budget.csv", &["channel", "infidelity", "tolerance_band"]);
    let mut report = format!("error budget ({} gate):\n", b.pair);
    for r in &b.rows {
        t.push(vec![r.channel.key().into(), num(r.infidelity), format!("{}:{}", r.band.0, r.band.1)]);
        let flag = if r.within_band() { "" } else { "  (outside reference band)" };
        let _ = writeln!(report, "  {:<20} {:>7.3} %{flag}", r.channel.key(), 100.0 * r.infidelity);
    }
    let _ = writeln!(report, "  {:<20} {:>7.3} %", "sum", 100.0 * b.sum());
    let run = run_gate(b.pair, &noise, &gc)?;
    let bell = bell_analysis(&run.rho, b.pair, &uniform_phases(cfg.phase_points), Shots::Analytic, cfg.seed, noise.effective_spam())?;
    // off-resonant excitation is estimated outside the master equation and
    // enters the total as an additive loss
    let offres = b.row(dualgate::open_system::Channel::OffResonant).map_or(0.0, |r| r.infidelity);
    let _ = writeln!(
        report,
        "  Bell fidelity with all enabled channels: {:.3} % (simulated {:.3} %, off-resonant {:.3} %)",
        100.0 * (bell.fidelity.value - offres),
        100.0 * bell.fidelity.value,
        100.0 * offres
    );
    Ok((report, vec![t]))
}

fn offres(cfg: &RunConfig) -> Result<Output, CliError> {
    let atomic = cfg.atomic()?;
    let gc = cfg.gate_config()?;
    let report_data = spectators(cfg, &atomic, &gc)?;
    let mut t = Table::new("offres.csv", &["transition", "line", "spectator_hz", "line_hz", "detuning_hz"]);
    for e in &report_data.entries {
        t.push(vec![e.transition.key(), e.line.to_string(), num(e.spectator_hz), num(e.line_hz), num(e.detuning_hz)]);
    }
    let d_rabi = gc.schedule()?.rabi[1];
    let error = offres_infidelity(&report_data, &gc.modes, d_rabi)?;
    let mut report = format!("spectators at {} G (D qubit at {:.6} MHz):\n", cfg.field_gauss, report_data.qubit_hz / 1e6);
    if let Some(m) = report_data.min_detuning() {
        let _ = writeln!(report, "  closest: {} vs {} at {:.1} kHz", m.transition, m.line, m.detuning_hz / 1e3);
    }
    let _ = writeln!(report, "  off-resonant excitation estimate: {:.3e}", error);
    Ok((report, vec![t]))
}

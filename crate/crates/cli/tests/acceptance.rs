//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use dualgate::constants::{mhz_to_angular, BOHR_MAGNETON_HZ_PER_GAUSS};
use dualgate::ms::{
    displacement_trajectory, gate_time, geometric_phase, ideal_output, max_step, LambDickeOrder, ModeSpec,
    MsHamiltonian, PairType,
};
use dualgate::open_system::{integrate_master, Channel, NoiseModel};
use dualgate::protocol::{
    bell_analysis, bell_fidelity, error_budget, fit_parity, parity_scan, run_gate, uniform_phases, Estimate,
    GateConfig, Shots,
};
use dualgate::quantum::{partial_trace_motion, state_fidelity, CompositeSpace, CompositeState, TwoQubitDensity, TwoQubitState, MODE_COM};
use dualgate::zeeman::{
    diagonalize_manifold, find_sweet_spot, sensitivity, spectator_detunings, AtomicConstants, LevelLabel,
};
use dualgate::C64;
use dualgate_cli::RunConfig;

struct Verdict {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn preset() -> RunConfig {
    RunConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("presets/operating-point.cfg")).expect("preset loads")
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

// 1 ---------------------------------------------------------------------

fn gate_timing() -> Verdict {
    let start = Instant::now();
    let t = gate_time(mhz_to_angular(1.601), mhz_to_angular(1.582)).unwrap();
    let elapsed = start.elapsed();
    // four significant figures in microseconds is one decimal place here
    let four_sig = format!("{:.1}", t * 1e6);
    let pass = four_sig == "105.3" && elapsed < Duration::from_millis(1);
    check(pass, format!("T = {four_sig} us ({:.4}), {:.3} ms", t * 1e6, ms(elapsed)))
}

// 2 ---------------------------------------------------------------------

fn fidelity_arithmetic() -> Verdict {
    let cases = [(0.982, 0.945, 0.9635), (0.976, 0.950, 0.963), (0.977, 0.950, 0.9635)];
    let mut worst = 0.0f64;
    for (p, c, f) in cases {
        let got = bell_fidelity(Estimate::exact(p), Estimate::exact(c)).unwrap().value;
        worst = worst.max((got - f).abs());
    }
    check(worst < 1e-12, format!("max |F - expected| = {worst:.1e}"))
}

// 3 ---------------------------------------------------------------------

fn branch(phi: f64, s: f64) -> [C64; 2] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    [C64::new(r, 0.0), C64::from_polar(s * r, phi)]
}

/// Largest difference between the analytic geometric phase and the phase
/// read off the propagator on spin-eigenstate branches, over 20 times.
fn phase_oracle(pair: PairType, modes: &[ModeSpec; 2], duration: f64) -> f64 {
    let cfg = GateConfig::operating_point();
    let mut drive = cfg.schedule().unwrap().drive();
    drive.spin_phase = [0.3, 0.5];
    let phases = drive.effective_spin_phases(pair);
    let space = CompositeSpace::new(8).unwrap();
    let ham = MsHamiltonian::new(space, &drive, modes, pair, LambDickeOrder::First).unwrap();
    let dt = max_step(&drive, modes) / 4.0;
    let amplitude = |signs: [f64; 2], t: f64| -> C64 {
        let (a, b) = (branch(phases[0], signs[0]), branch(phases[1], signs[1]));
        let q = TwoQubitState::new(a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]);
        let psi0 = space.with_motional_ground(&q);
        let out = ham.propagate(&CompositeState::pure(space, psi0.clone()).unwrap(), t, dt).unwrap();
        psi0.dotc(out.as_pure().unwrap())
    };
    let mut worst = 0.0f64;
    for k in 1..=20 {
        let t = duration * k as f64 / 20.0;
        let numeric = 0.5 * (amplitude([1.0, 1.0], t) * amplitude([1.0, -1.0], t).conj()).arg();
        let analytic = geometric_phase(&drive, modes, t).unwrap();
        let diff = (numeric - analytic + PI).rem_euclid(2.0 * PI) - PI;
        worst = worst.max(diff.abs());
    }
    worst
}

fn ideal_gates() -> Verdict {
    let cfg = GateConfig::operating_point();
    let duration = cfg.schedule().unwrap().duration;
    let mut pass = true;
    let mut parts = Vec::new();
    for pair in PairType::ALL {
        let start = Instant::now();
        let run = run_gate(pair, &NoiseModel::none(), &cfg).unwrap();
        let bell = bell_analysis(&run.rho, pair, &uniform_phases(16), Shots::Analytic, 0, 0.0).unwrap();
        let oracle = phase_oracle(pair, &cfg.modes, duration);
        let elapsed = start.elapsed();
        pass &= bell.fidelity.value >= 0.999 && oracle < 1e-4 && elapsed < Duration::from_secs(30);
        parts.push(format!("{pair}: F = {:.5}, phase err {oracle:.1e} rad, {:.1} s", bell.fidelity.value, elapsed.as_secs_f64()));
    }
    check(pass, parts.join("; "))
}

// 4 ---------------------------------------------------------------------

fn sweet_spot() -> Verdict {
    let start = Instant::now();
    let atomic = AtomicConstants::ba137();
    let b = find_sweet_spot(&atomic.d_qubit(), 5.0, 20.0).unwrap();
    let slope = sensitivity(&atomic.s_qubit(), 12.2).unwrap();
    let elapsed = start.elapsed();
    let pass = (b - 12.3).abs() <= 0.3 && (slope / 12e3 - 1.0).abs() <= 0.15 && elapsed < Duration::from_secs(5);
    check(pass, format!("D sweet spot {b:.3} G, S slope {:.2} kHz/G, {:.0} ms", slope / 1e3, ms(elapsed)))
}

// 5 ---------------------------------------------------------------------

fn error_budget_at_desk_scale() -> Verdict {
    let start = Instant::now();
    let cfg = preset();
    let gc = cfg.gate_config().unwrap();
    let noise = cfg.noise();
    let atomic = cfg.atomic().unwrap();
    let freqs: Vec<f64> = gc.modes.iter().map(|m| m.omega / (2.0 * PI)).collect();
    let spectators = spectator_detunings(&atomic.d52(), cfg.field_gauss, &freqs).unwrap();
    let budget = error_budget(&noise, &gc, &spectators).unwrap();
    let row = |c: Channel| budget.row(c).unwrap().infidelity;
    let (laser, motional, heating, offres) =
        (row(Channel::LaserDephasing), row(Channel::MotionalDephasing), row(Channel::Heating), row(Channel::OffResonant));

    let run = run_gate(PairType::SD, &noise, &gc).unwrap();
    let bell = bell_analysis(&run.rho, PairType::SD, &uniform_phases(cfg.phase_points), Shots::Analytic, 0, noise.effective_spam())
        .unwrap();
    // off-resonant excitation is not part of the master equation; it enters
    // the total as an additive loss
    let total = bell.fidelity.value - offres;
    let elapsed = start.elapsed();

    let pass = (laser / 0.018 - 1.0).abs() <= 0.5
        && (motional / 0.011 - 1.0).abs() <= 0.5
        && (heating / 0.004 - 1.0).abs() <= 0.15
        && (total - 0.963).abs() <= 0.015
        && elapsed < Duration::from_secs(300);
    check(
        pass,
        format!(
            "laser {:.2} %, motional {:.2} %, heating {:.3} %, total SD fidelity {:.2} % (before off-resonant {:.2} %), {:.0} s",
            100.0 * laser,
            100.0 * motional,
            100.0 * heating,
            100.0 * total,
            100.0 * bell.fidelity.value,
            elapsed.as_secs_f64()
        ),
    )
}

// 6 ---------------------------------------------------------------------

fn spectator_detunings_at_working_point() -> Verdict {
    let cfg = preset();
    let gc = cfg.gate_config().unwrap();
    let atomic = cfg.atomic().unwrap();
    let freqs: Vec<f64> = gc.modes.iter().map(|m| m.omega / (2.0 * PI)).collect();
    let report = spectator_detunings(&atomic.d52(), cfg.field_gauss, &freqs).unwrap();
    let closest = *report.min_detuning().unwrap();
    let offres = dualgate::protocol::offres_infidelity(&report, &gc.modes, gc.schedule().unwrap().rabi[1]).unwrap();
    let pass = closest.detuning_hz > 0.5e6 && (offres / 1e-3).log10().abs() <= 1.0;
    check(
        pass,
        format!(
            "closest {} vs {} at {:.3} MHz (needs > 0.5), off-resonant error {offres:.2e}",
            closest.transition.key(),
            closest.line,
            closest.detuning_hz / 1e6
        ),
    )
}

// 7 ---------------------------------------------------------------------

fn breit_rabi_worst() -> f64 {
    let m = AtomicConstants::ba137().s12();
    let (a, gj, gi, i) = (m.a_hf_hz(), m.g_j(), m.g_i(), 1.5);
    let de = a * (i + 0.5);
    let mut worst = 0.0f64;
    for b in [0.5, 5.0, 12.2, 30.0, 50.0] {
        let d = diagonalize_manifold(&m, b).unwrap();
        let mu = BOHR_MAGNETON_HZ_PER_GAUSS * b;
        let x = (gj - gi) * mu / de;
        for two_mf in [-2, 0, 2] {
            let mf = two_mf as f64 / 2.0;
            let root = (1.0 + 4.0 * mf * x / (2.0 * i + 1.0) + x * x).sqrt();
            let base = -de / (2.0 * (2.0 * i + 1.0)) + gi * mu * mf;
            for (two_f, e) in [(4, base + de / 2.0 * root), (2, base - de / 2.0 * root)] {
                let got = d.energy(LevelLabel { two_f, two_mf }).unwrap();
                worst = worst.max(((got - e) / e).abs());
            }
        }
    }
    worst
}

fn coverage() -> f64 {
    let c = 0.95;
    let mut rho = TwoQubitDensity::zeros();
    rho[(0, 0)] = C64::new(0.5, 0.0);
    rho[(3, 3)] = C64::new(0.5, 0.0);
    rho[(0, 3)] = C64::new(0.5 * c, 0.0);
    rho[(3, 0)] = C64::new(0.5 * c, 0.0);
    let phases = uniform_phases(16);
    let hits = (0..1000u64)
        .filter(|&seed| {
            let fit = fit_parity(&parity_scan(&rho, &phases, PairType::SS, Shots::Sampled(500), seed, 0.0).unwrap()).unwrap();
            (fit.contrast.value - c).abs() <= 3.0 * fit.contrast.stderr
        })
        .count();
    hits as f64 / 1000.0
}

fn cli_rerun_identical() -> bool {
    let run = |dir: &Path| {
        let out = Command::new(env!("CARGO_BIN_EXE_dualgate"))
            .args(["parity", "--shots", "300", "--seed", "9", "--nmax", "3", "--out"])
            .arg(dir)
            .env_remove("DUALGATE_OUT_DIR")
            .output()
            .unwrap();
        assert!(out.status.success());
        std::fs::read(dir.join("parity.csv")).unwrap()
    };
    let base: PathBuf = std::env::temp_dir().join(format!("dualgate-acceptance-{}", std::process::id()));
    let (a, b) = (base.join("a"), base.join("b"));
    let same = run(&a) == run(&b);
    let _ = std::fs::remove_dir_all(&base);
    same
}

fn property_suites() -> Verdict {
    let cfg = GateConfig { n_max: 3, ..GateConfig::operating_point() };
    let s = cfg.schedule().unwrap();
    let drive = s.drive();
    let dt = max_step(&drive, &cfg.modes);
    let pair = PairType::SD;
    let mut notes = Vec::new();
    let mut pass = true;

    // trace and Hermiticity of the noisy density matrix
    let space = CompositeSpace::new(cfg.n_max).unwrap();
    let psi0 = CompositeState::pure(space, space.with_motional_ground(&pair.initial_qubits())).unwrap();
    let rho0 = CompositeState::density(space, psi0.to_density()).unwrap();
    let noisy = NoiseModel { ndot: 500.0, ..NoiseModel::operating_point() };
    let out = integrate_master(&rho0, &drive, &cfg.modes, pair, &noisy, s.duration, dt).unwrap().to_density();
    let trace_err = (out.trace().re - 1.0).abs();
    let herm_err = (&out - out.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    pass &= trace_err < 1e-8 && herm_err < 1e-8;
    notes.push(format!("trace {trace_err:.0e}, herm {herm_err:.0e}"));

    // loop closure
    let mut alpha_end = 0.0f64;
    for m in &cfg.modes {
        for signs in [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0]] {
            alpha_end = alpha_end.max(displacement_trajectory(&drive, m, signs, s.duration).unwrap().alpha.norm());
        }
    }
    let unitary = {
        let ham = MsHamiltonian::new(CompositeSpace::new(6).unwrap(), &drive, &cfg.modes, pair, LambDickeOrder::First).unwrap();
        let sp = ham.space();
        let psi = CompositeState::pure(sp, sp.with_motional_ground(&pair.initial_qubits())).unwrap();
        ham.propagate(&psi, s.duration, dt).unwrap()
    };
    let purity = (0..2)
        .map(|k| {
            let m = unitary.reduced_mode(MODE_COM + k).unwrap();
            (&m * &m).trace().re
        })
        .fold(1.0, f64::min);
    pass &= alpha_end < 1e-12 && purity >= 1.0 - 1e-4;
    notes.push(format!("|alpha(T)| {alpha_end:.0e}, mode purity {purity:.6}"));

    // product scaling
    let base = geometric_phase(&drive, &cfg.modes, s.duration).unwrap();
    let scaling = [0.4, 2.5]
        .iter()
        .map(|c| {
            let d = drive.with_rabi([c * drive.rabi[0], drive.rabi[1] / c]);
            ((geometric_phase(&d, &cfg.modes, s.duration).unwrap() - base) / base).abs()
        })
        .fold(0.0, f64::max);
    pass &= scaling < 1e-12;
    notes.push(format!("scaling {scaling:.0e}"));

    let br = breit_rabi_worst();
    pass &= br < 1e-9;
    notes.push(format!("Breit-Rabi {br:.0e}"));

    // step halving of both integrators
    let fid = |noise: &NoiseModel, step: f64| {
        run_gate(pair, noise, &GateConfig { dt: Some(step), ..cfg }).unwrap().fidelity
    };
    let halving_u = (fid(&NoiseModel::none(), dt) - fid(&NoiseModel::none(), dt / 2.0)).abs();
    let halving_m = (fid(&NoiseModel::operating_point(), dt) - fid(&NoiseModel::operating_point(), dt / 2.0)).abs();
    pass &= halving_u < 1e-8 && halving_m < 1e-8;
    notes.push(format!("halving {halving_u:.0e}/{halving_m:.0e}"));

    let cov = coverage();
    pass &= cov >= 0.99;
    notes.push(format!("coverage {:.1} %", 100.0 * cov));

    let same = cli_rerun_identical();
    pass &= same;
    notes.push(format!("CLI rerun identical: {same}"));

    // sanity: the ideal SD target is what the unitary run reaches
    let f = state_fidelity(&partial_trace_motion(&unitary), &ideal_output(pair, &drive, base)).unwrap();
    pass &= f > 0.999;

    check(pass, notes.join(", "))
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Verdict);
    let criteria: [Criterion; 7] = [
        ("gate timing", gate_timing),
        ("fidelity arithmetic", fidelity_arithmetic),
        ("ideal-gate oracle", ideal_gates),
        ("sweet spot", sweet_spot),
        ("error budget", error_budget_at_desk_scale),
        ("spectator detunings", spectator_detunings_at_working_point),
        ("property suites", property_suites),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let v = f();
        if !v.pass {
            failed += 1;
        }
        println!("criterion {} {:<20} {}  {}", k + 1, name, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}

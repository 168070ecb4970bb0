use dualgate::ms::{max_step, DriveSpec, LambDickeOrder, MsHamiltonian, PairType};
use dualgate::open_system::{collapse_ops, integrate_master, lindblad_rhs, Channel, NoiseModel};
use dualgate::protocol::{error_budget, run_gate, GateConfig};
use dualgate::quantum::{partial_trace_motion, state_fidelity, CompositeSpace, CompositeState};
use dualgate::zeeman::{spectator_detunings, AtomicConstants, SpectatorReport};
use dualgate::C64;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn small() -> GateConfig {
    GateConfig { n_max: 4, ..GateConfig::operating_point() }
}

fn loss(noise: &NoiseModel, cfg: &GateConfig) -> f64 {
    let ideal = run_gate(PairType::SD, &NoiseModel::none(), cfg).unwrap().fidelity;
    ideal - run_gate(PairType::SD, noise, cfg).unwrap().fidelity
}

fn spectators(cfg: &GateConfig) -> SpectatorReport {
    let f = cfg.modes.map(|m| m.omega / (2.0 * std::f64::consts::PI));
    spectator_detunings(&AtomicConstants::ba137().d52(), 12.2, &f).unwrap()
}

fn random_density(space: CompositeSpace, seed: &[f64]) -> DMatrix<C64> {
    let d = space.total_dim();
    let a = DMatrix::from_fn(d, d, |i, j| {
        let k = (i * d + j) % seed.len();
        C64::new(seed[k] * (1.0 + i as f64).sin(), seed[(k + 1) % seed.len()] * (j as f64).cos())
    });
    let rho = &a * a.adjoint();
    let tr = rho.trace();
    rho / tr
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lindblad_rhs_is_traceless_and_hermitian(
        seed in prop::collection::vec(-1.0f64..1.0, 7..13),
        t in 0.0f64..1e-4,
        tau_s in 1e-4f64..1e-2,
        tau_m in 1e-4f64..1e-2,
        ndot in 0.0f64..1e3,
        pair_idx in 0usize..3,
    ) {
        let cfg = GateConfig::operating_point();
        let drive = cfg.schedule().unwrap().drive();
        let pair = PairType::ALL[pair_idx];
        let space = CompositeSpace::new(2).unwrap();
        let rho = random_density(space, &seed);
        let noise = NoiseModel { tau_s, tau_m, ndot, ..NoiseModel::operating_point() };
        let ham = MsHamiltonian::new(space, &drive, &cfg.modes, pair, LambDickeOrder::First).unwrap();
        let c = collapse_ops(&noise, space, pair).unwrap();
        let d = lindblad_rhs(&rho, &ham.at(t), &c).unwrap();
        let scale = 1.0 + d.iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(d.trace().norm() / scale < 1e-12);
        prop_assert!((&d - d.adjoint()).iter().all(|z| z.norm() / scale < 1e-12));
    }
}

#[test]
fn switched_off_noise_reproduces_unitary_run() {
    let cfg = small();
    let schedule = cfg.schedule().unwrap();
    let drive: DriveSpec = schedule.drive();
    let pair = PairType::SD;
    let unitary = run_gate(pair, &NoiseModel::none(), &cfg).unwrap();
    let space = CompositeSpace::new(cfg.n_max).unwrap();
    let psi0 = CompositeState::pure(space, space.with_motional_ground(&pair.initial_qubits())).unwrap();
    let rho0 = CompositeState::density(space, psi0.to_density()).unwrap();
    let dt = max_step(&drive, &cfg.modes);
    let out = integrate_master(&rho0, &drive, &cfg.modes, pair, &NoiseModel::none(), schedule.duration, dt).unwrap();
    let f = state_fidelity(&partial_trace_motion(&out), &unitary.target).unwrap();
    assert!((f - unitary.fidelity).abs() < 1e-8, "{f} vs {}", unitary.fidelity);
}

#[test]
fn master_equation_step_halving_converges() {
    let cfg = small();
    let dt = max_step(&cfg.schedule().unwrap().drive(), &cfg.modes);
    let noise = NoiseModel::operating_point();
    let coarse = run_gate(PairType::SD, &noise, &GateConfig { dt: Some(dt), ..cfg }).unwrap();
    let fine = run_gate(PairType::SD, &noise, &GateConfig { dt: Some(dt / 2.0), ..cfg }).unwrap();
    assert!((coarse.fidelity - fine.fidelity).abs() < 1e-8, "{} vs {}", coarse.fidelity, fine.fidelity);
}

#[test]
fn channels_add_up_to_the_combined_loss() {
    let cfg = small();
    let all = NoiseModel::operating_point();
    let dynamical: Vec<Channel> = Channel::ALL.into_iter().filter(|c| c.is_dynamical()).collect();
    let combined = loss(&all.with_only(&dynamical), &cfg);
    let sum: f64 = dynamical.iter().map(|&c| loss(&all.with_only(&[c]), &cfg)).sum();
    assert!((sum / combined - 1.0).abs() < 0.2, "sum {sum} vs combined {combined}");
}

#[test]
fn stronger_noise_costs_more_fidelity() {
    let cfg = small();
    let base = NoiseModel::operating_point();
    let laser: Vec<f64> = [5e-3, 2.6e-3, 1e-3]
        .iter()
        .map(|&tau_s| loss(&NoiseModel { tau_s, ..base }.with_only(&[Channel::LaserDephasing]), &cfg))
        .collect();
    assert!(laser[0] < laser[1] && laser[1] < laser[2], "{laser:?}");
    let motional: Vec<f64> = [8e-3, 4.1e-3, 2e-3]
        .iter()
        .map(|&tau_m| loss(&NoiseModel { tau_m, ..base }.with_only(&[Channel::MotionalDephasing]), &cfg))
        .collect();
    assert!(motional[0] < motional[1] && motional[1] < motional[2], "{motional:?}");
    let heating: Vec<f64> = [20.0, 76.0, 300.0]
        .iter()
        .map(|&ndot| loss(&NoiseModel { ndot, ..base }.with_only(&[Channel::Heating]), &cfg))
        .collect();
    assert!(heating[0] < heating[1] && heating[1] < heating[2], "{heating:?}");
}

#[test]
fn doubling_dephasing_time_halves_the_laser_row() {
    let cfg = small();
    let base = NoiseModel::operating_point().with_only(&[Channel::LaserDephasing]);
    let short = loss(&base, &cfg);
    let long = loss(&NoiseModel { tau_s: 2.0 * base.tau_s, ..base }, &cfg);
    assert!((short / long / 2.0 - 1.0).abs() < 0.15, "{short} vs {long}");
}

#[test]
fn disabled_channels_give_zero_rows() {
    let cfg = small();
    let budget = error_budget(&NoiseModel::none(), &cfg, &spectators(&cfg)).unwrap();
    assert_eq!(budget.rows.len(), Channel::ALL.len());
    assert!(budget.rows.iter().all(|r| r.infidelity == 0.0));
}

#[test]
fn noisy_final_state_is_a_valid_density_matrix() {
    let run = run_gate(PairType::DD, &NoiseModel { ndot: 2000.0, ..NoiseModel::operating_point() }, &small()).unwrap();
    let rho = run.rho;
    assert!((rho.trace().re - 1.0).abs() < 1e-9);
    assert!((rho - rho.adjoint()).iter().all(|z| z.norm() < 1e-12));
    let min = rho.symmetric_eigen().eigenvalues.min();
    assert!(min > -1e-6, "{min}");
}

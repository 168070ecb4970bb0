//! Run configuration: a flat `key = value` file whose keys are grouped by
//! dotted prefixes. Every key has a default at the measured operating point,
//! so an empty file is a valid configuration.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dualgate::constants::mhz_to_angular;
use dualgate::kv;
use dualgate::ms::{
    mode_spectrum, override_frequencies, raman_wavevector, LambDickeOrder, ModeSpec, NormalMode, PairType, TrapSpec,
};
use dualgate::open_system::{DephasingCorrelation, NoiseModel, DEFAULT_HEATING_RATE};
use dualgate::protocol::{GateConfig, TRUNCATION_TOL};
use dualgate::zeeman::AtomicConstants;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Atomic constants file; `None` uses the shipped ¹³⁷Ba⁺ set.
    pub constants_file: Option<PathBuf>,
    pub field_gauss: f64,
    /// Trap frequencies `(x, y, z)` in MHz (divided by 2π).
    pub trap_mhz: [f64; 3],
    /// Measured COM and rocking frequencies replacing the predicted ones.
    pub measured_modes_mhz: Option<[f64; 2]>,
    /// Drive detuning from the carrier; `None` centers it between the modes.
    pub mu_mhz: Option<f64>,
    pub rabi_ratio: f64,
    pub wavelength_nm: f64,
    pub beam_angle_deg: f64,
    pub lamb_dicke: LambDickeOrder,
    pub tau_s_ms: f64,
    pub tau_m_ms: f64,
    pub ndot: f64,
    pub eps_spam: f64,
    pub laser: bool,
    pub motional: bool,
    pub heating: bool,
    pub offres: bool,
    pub spam: bool,
    pub laser_correlation: DephasingCorrelation,
    /// Shots per scan point; zero selects the analytic (infinite-shot) mode.
    pub shots: u64,
    pub phase_points: usize,
    pub seed: u64,
    pub pair: PairType,
    /// Fraction of shots discarded by post-selection in sampled scans.
    pub postselect_leak: f64,
    pub n_max: usize,
    /// Integrator step; `None` picks the largest admissible one.
    pub dt_ns: Option<f64>,
    pub truncation_guard: bool,
    pub truncation_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            constants_file: None,
            field_gauss: 12.2,
            trap_mhz: [1.6, 1.7, 0.2],
            measured_modes_mhz: Some([1.601, 1.582]),
            mu_mhz: None,
            rabi_ratio: 1.0,
            wavelength_nm: 532.0,
            beam_angle_deg: 45.0,
            lamb_dicke: LambDickeOrder::First,
            tau_s_ms: 2.6,
            tau_m_ms: 4.1,
            ndot: DEFAULT_HEATING_RATE,
            eps_spam: 1e-3,
            laser: true,
            motional: true,
            heating: true,
            offres: true,
            spam: true,
            laser_correlation: DephasingCorrelation::Independent,
            shots: 0,
            phase_points: 16,
            seed: 1,
            pair: PairType::SD,
            postselect_leak: 0.0,
            n_max: 5,
            dt_ns: None,
            truncation_guard: false,
            truncation_tol: TRUNCATION_TOL,
        }
    }
}

/// Every accepted key, in the order used by [`RunConfig::canonical`].
pub const KEYS: [&str; 30] = [
    "atomic.constants_file",
    "field.b_gauss",
    "trap.omega_x_mhz",
    "trap.omega_y_mhz",
    "trap.omega_z_mhz",
    "modes.measured_mhz",
    "drive.mu_mhz",
    "drive.rabi_ratio",
    "drive.wavelength_nm",
    "drive.beam_angle_deg",
    "drive.lamb_dicke",
    "noise.tau_s_ms",
    "noise.tau_m_ms",
    "noise.ndot_per_s",
    "noise.eps_spam",
    "noise.laser",
    "noise.motional",
    "noise.heating",
    "noise.offres",
    "noise.spam",
    "noise.laser_correlation",
    "protocol.shots",
    "protocol.phase_points",
    "protocol.seed",
    "protocol.pair",
    "protocol.postselect_leak",
    "numerics.n_max",
    "numerics.dt_ns",
    "numerics.truncation_guard",
    "numerics.truncation_tol",
];

fn on_off(b: bool) -> &'static str {
    if b { "on" } else { "off" }
}

fn parse_optional_f64(e: &kv::Entry) -> Result<Option<f64>, dualgate::Error> {
    if e.value.eq_ignore_ascii_case("auto") || e.value.eq_ignore_ascii_case("none") {
        Ok(None)
    } else {
        e.parse_f64().map(Some)
    }
}

impl RunConfig {
    /// Parses configuration text. Relative file paths are resolved against
    /// `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        for e in kv::parse(text)? {
            cfg.apply(&e, base_dir)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|err| CliError::Config(format!("cannot read {}: {err}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|err| match err {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    fn apply(&mut self, e: &kv::Entry, base_dir: &Path) -> Result<(), CliError> {
        let f = || e.parse_f64();
        match e.key.as_str() {
            "atomic.constants_file" => {
                if e.value.is_empty() || e.value.eq_ignore_ascii_case("builtin") {
                    self.constants_file = None;
                } else {
                    let p = base_dir.join(&e.value);
                    if !p.is_file() {
                        return Err(CliError::Config(format!(
                            "line {}: constants file `{}` does not exist",
                            e.line,
                            p.display()
                        )));
                    }
                    self.constants_file = Some(p);
                }
            }
            "field.b_gauss" => self.field_gauss = f()?,
            "trap.omega_x_mhz" => self.trap_mhz[0] = f()?,
            "trap.omega_y_mhz" => self.trap_mhz[1] = f()?,
            "trap.omega_z_mhz" => self.trap_mhz[2] = f()?,
            "modes.measured_mhz" => {
                self.measured_modes_mhz = if e.value.eq_ignore_ascii_case("none") {
                    None
                } else {
                    let parts: Vec<&str> = e.value.split(',').map(str::trim).collect();
                    match parts.as_slice() {
                        [c, r] => match (c.parse::<f64>(), r.parse::<f64>()) {
                            (Ok(c), Ok(r)) if c.is_finite() && r.is_finite() => Some([c, r]),
                            _ => return Err(e.type_error("two numbers `com, rocking` or `none`").into()),
                        },
                        _ => return Err(e.type_error("two numbers `com, rocking` or `none`").into()),
                    }
                }
            }
            "drive.mu_mhz" => self.mu_mhz = parse_optional_f64(e)?,
            "drive.rabi_ratio" => self.rabi_ratio = f()?,
            "drive.wavelength_nm" => self.wavelength_nm = f()?,
            "drive.beam_angle_deg" => self.beam_angle_deg = f()?,
            "drive.lamb_dicke" => {
                self.lamb_dicke = match e.value.to_ascii_lowercase().as_str() {
                    "first" => LambDickeOrder::First,
                    "exact" => LambDickeOrder::Exact,
                    _ => return Err(e.type_error("`first` or `exact`").into()),
                }
            }
            "noise.tau_s_ms" => self.tau_s_ms = f()?,
            "noise.tau_m_ms" => self.tau_m_ms = f()?,
            "noise.ndot_per_s" => self.ndot = f()?,
            "noise.eps_spam" => self.eps_spam = f()?,
            "noise.laser" => self.laser = e.parse_bool()?,
            "noise.motional" => self.motional = e.parse_bool()?,
            "noise.heating" => self.heating = e.parse_bool()?,
            "noise.offres" => self.offres = e.parse_bool()?,
            "noise.spam" => self.spam = e.parse_bool()?,
            "noise.laser_correlation" => {
                self.laser_correlation = match e.value.to_ascii_lowercase().as_str() {
                    "independent" => DephasingCorrelation::Independent,
                    "collective" => DephasingCorrelation::Collective,
                    _ => return Err(e.type_error("`independent` or `collective`").into()),
                }
            }
            "protocol.shots" => self.shots = e.parse_u64()?,
            "protocol.phase_points" => self.phase_points = e.parse_u64()? as usize,
            "protocol.seed" => self.seed = e.parse_u64()?,
            "protocol.pair" => {
                self.pair = e.value.parse().map_err(|_| e.type_error("one of ss, dd, sd"))?;
            }
            "protocol.postselect_leak" => self.postselect_leak = f()?,
            "numerics.n_max" => self.n_max = e.parse_u64()? as usize,
            "numerics.dt_ns" => self.dt_ns = parse_optional_f64(e)?,
            "numerics.truncation_guard" => self.truncation_guard = e.parse_bool()?,
            "numerics.truncation_tol" => self.truncation_tol = f()?,
            _ => {
                return Err(CliError::Config(format!("line {}: unknown key `{}`", e.line, e.key)));
            }
        }
        Ok(())
    }

    /// Every setting in `KEYS` order, one `key = value` per line. Parsing
    /// the result gives back the same configuration.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let opt = |v: Option<f64>, none: &str| v.map_or(none.to_string(), |x| x.to_string());
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put(KEYS[0], self.constants_file.as_ref().map_or("builtin".into(), |p| p.display().to_string()));
        put(KEYS[1], self.field_gauss.to_string());
        for (i, v) in self.trap_mhz.iter().enumerate() {
            put(KEYS[2 + i], v.to_string());
        }
        put(KEYS[5], self.measured_modes_mhz.map_or("none".into(), |[c, r]| format!("{c}, {r}")));
        put(KEYS[6], opt(self.mu_mhz, "auto"));
        put(KEYS[7], self.rabi_ratio.to_string());
        put(KEYS[8], self.wavelength_nm.to_string());
        put(KEYS[9], self.beam_angle_deg.to_string());
        put(
            KEYS[10],
            match self.lamb_dicke {
                LambDickeOrder::First => "first",
                LambDickeOrder::Exact => "exact",
            }
            .into(),
        );
        put(KEYS[11], self.tau_s_ms.to_string());
        put(KEYS[12], self.tau_m_ms.to_string());
        put(KEYS[13], self.ndot.to_string());
        put(KEYS[14], self.eps_spam.to_string());
        for (i, b) in [self.laser, self.motional, self.heating, self.offres, self.spam].iter().enumerate() {
            put(KEYS[15 + i], on_off(*b).into());
        }
        put(
            KEYS[20],
            match self.laser_correlation {
                DephasingCorrelation::Independent => "independent",
                DephasingCorrelation::Collective => "collective",
            }
            .into(),
        );
        put(KEYS[21], self.shots.to_string());
        put(KEYS[22], self.phase_points.to_string());
        put(KEYS[23], self.seed.to_string());
        put(KEYS[24], self.pair.to_string());
        put(KEYS[25], self.postselect_leak.to_string());
        put(KEYS[26], self.n_max.to_string());
        put(KEYS[27], opt(self.dt_ns, "auto"));
        put(KEYS[28], on_off(self.truncation_guard).into());
        put(KEYS[29], self.truncation_tol.to_string());
        s
    }

    pub fn atomic_source(&self) -> Result<String, CliError> {
        match &self.constants_file {
            None => Ok(AtomicConstants::ba137_source().to_string()),
            Some(p) => std::fs::read_to_string(p)
                .map_err(|err| CliError::Config(format!("cannot read {}: {err}", p.display()))),
        }
    }

    pub fn atomic(&self) -> Result<AtomicConstants, CliError> {
        AtomicConstants::parse(&self.atomic_source()?).map_err(|err| {
            let file = self.constants_file.as_ref().map_or("builtin constants".into(), |p| p.display().to_string());
            CliError::Config(format!("{file}: {err}"))
        })
    }

    /// SHA-256 of the canonical settings and the atomic constants text.
    pub fn hash(&self) -> Result<String, CliError> {
        let mut h = Sha256::new();
        h.update(self.canonical().as_bytes());
        h.update(b"\n");
        h.update(self.atomic_source()?.as_bytes());
        Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Predicted transverse modes and the ones actually used.
    pub fn normal_modes(&self) -> Result<([NormalMode; 2], [NormalMode; 2]), CliError> {
        let [x, y, z] = self.trap_mhz.map(mhz_to_angular);
        let predicted = mode_spectrum(&TrapSpec::new(x, y, z).map_err(config)?).map_err(config)?;
        let used = match self.measured_modes_mhz {
            Some(m) => override_frequencies(predicted, m.map(mhz_to_angular)).map_err(config)?,
            None => predicted,
        };
        Ok((predicted, used))
    }

    pub fn gate_config(&self) -> Result<GateConfig, CliError> {
        let atomic = self.atomic()?;
        let (_, used) = self.normal_modes()?;
        let dk = raman_wavevector(self.wavelength_nm * 1e-9, self.beam_angle_deg * PI / 180.0).map_err(config)?;
        let mut modes = Vec::with_capacity(2);
        for m in used {
            modes.push(ModeSpec::new(m, dk, atomic.ion_mass_kg()).map_err(config)?);
        }
        Ok(GateConfig {
            modes: [modes[0], modes[1]],
            rabi_ratio: self.rabi_ratio,
            mu: self.mu_mhz.map(mhz_to_angular),
            n_max: self.n_max,
            dt: self.dt_ns.map(|ns| ns * 1e-9),
            truncation_guard: self.truncation_guard,
            truncation_tol: self.truncation_tol,
            order: self.lamb_dicke,
        })
    }

    pub fn noise(&self) -> NoiseModel {
        NoiseModel {
            tau_s: self.tau_s_ms * 1e-3,
            tau_m: self.tau_m_ms * 1e-3,
            ndot: self.ndot,
            eps_spam: self.eps_spam,
            laser: self.laser,
            motional: self.motional,
            heating: self.heating,
            offres: self.offres,
            spam: self.spam,
            laser_correlation: self.laser_correlation,
        }
    }

    /// Checks ranges that the simulation modules would otherwise reject
    /// mid-run.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.n_max < 1 {
            return Err(CliError::Config("numerics.n_max must be at least 1".into()));
        }
        if self.phase_points < 6 {
            return Err(CliError::Config("protocol.phase_points must be at least 6".into()));
        }
        if !(0.0..1.0).contains(&self.postselect_leak) {
            return Err(CliError::Config("protocol.postselect_leak must be in [0, 1)".into()));
        }
        if let Some(dt) = self.dt_ns {
            if !(dt > 0.0) {
                return Err(CliError::Config("numerics.dt_ns must be positive".into()));
            }
        }
        if !(self.truncation_tol > 0.0) {
            return Err(CliError::Config("numerics.truncation_tol must be positive".into()));
        }
        if !(self.rabi_ratio > 0.0) {
            return Err(CliError::Config("drive.rabi_ratio must be positive".into()));
        }
        self.noise().validate().map_err(config)?;
        self.gate_config()?.schedule().map_err(config)?;
        Ok(())
    }
}

fn config(err: dualgate::Error) -> CliError {
    CliError::Config(err.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_text_round_trips() {
        let cfg = RunConfig {
            mu_mhz: Some(0.0095),
            pair: PairType::DD,
            laser: false,
            measured_modes_mhz: None,
            ..RunConfig::default()
        };
        let back = RunConfig::parse(&cfg.canonical(), Path::new(".")).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(RunConfig::parse(&RunConfig::default().canonical(), Path::new(".")).unwrap(), RunConfig::default());
    }

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn type_errors_name_key_and_line() {
        let err = RunConfig::parse("# x\nnoise.tau_s_ms=abc\n", Path::new(".")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2") && msg.contains("noise.tau_s_ms"), "{msg}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse("noize.tau = 1\n", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("unknown key `noize.tau`"), "{err}");
    }

    #[test]
    fn hash_changes_with_settings() {
        let a = RunConfig::default();
        let b = RunConfig { seed: 2, ..a.clone() };
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
        assert_eq!(a.hash().unwrap(), a.clone().hash().unwrap());
    }
}

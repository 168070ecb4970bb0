//! Parity scans, contrast fits and the population + parity fidelity bound.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{Matrix2, Matrix4};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::ms::PairType;
use crate::open_system::apply_spam;
use crate::quantum::TwoQubitDensity;
use crate::{Error, Result, C64};

use super::populations;

/// A value with its one-sigma uncertainty.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0 }
    }
}

/// Infinite-shot expectation values or a finite multinomial sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shots {
    Analytic,
    Sampled(u64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParityScan {
    pub phases: Vec<f64>,
    pub parities: Vec<f64>,
    pub stderr: Vec<f64>,
    pub shots: Shots,
    pub seed: u64,
}

/// `n` phases spaced uniformly over `[0, π)`.
pub fn uniform_phases(n: usize) -> Vec<f64> {
    (0..n).map(|k| PI * k as f64 / n as f64).collect()
}

/// Random stream for scan point `index`: a fixed ChaCha8 key derived from
/// `seed`, one stream per point, so results do not depend on evaluation
/// order.
pub fn point_rng(seed: u64, index: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `R_φ(π/2) = (1 − iσ_φ)/√2`.
fn half_pi_rotation(phi: f64) -> Matrix2<C64> {
    let s = C64::new(FRAC_1_SQRT_2, 0.0);
    let off = |p: f64| C64::from_polar(FRAC_1_SQRT_2, p) * C64::new(0.0, -1.0);
    Matrix2::new(s, off(-phi), off(phi), s)
}

/// Outcome distribution `(p00, p01, p10, p11)` after analysis pulses at
/// phase `phi` (entering each ion with the pair's phase sense), before SPAM.
pub fn rotated_distribution(rho: &TwoQubitDensity, pair: PairType, phi: f64) -> [f64; 4] {
    let s = pair.phase_sense();
    let r: Matrix4<C64> = half_pi_rotation(s[0] * phi).kronecker(&half_pi_rotation(s[1] * phi));
    let out = r * rho * r.adjoint();
    let mut p = [0.0; 4];
    for (k, pk) in p.iter_mut().enumerate() {
        *pk = out[(k, k)].re.max(0.0);
    }
    let total: f64 = p.iter().sum();
    p.map(|x| x / total)
}

pub fn parity_of(p: &[f64; 4]) -> f64 {
    p[0] + p[3] - p[1] - p[2]
}

/// Multinomial draw of `shots` outcomes as a chain of binomials.
pub fn sample_counts<R: Rng>(p: &[f64; 4], shots: u64, rng: &mut R) -> Result<[u64; 4]> {
    let mut counts = [0u64; 4];
    let mut left = shots;
    let mut mass = 1.0;
    for k in 0..3 {
        if left == 0 {
            break;
        }
        let q = if mass > 0.0 { (p[k] / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(left, q).map_err(|e| Error::invalid(format!("binomial sampling: {e}")))?;
        counts[k] = draw.sample(rng);
        left -= counts[k];
        mass -= p[k];
    }
    counts[3] = left;
    Ok(counts)
}

/// Discards each shot independently with probability `leak`, as a
/// verification step that flags leaked ions would.
pub fn dd_postselect<R: Rng>(counts: [u64; 4], leak: f64, rng: &mut R) -> Result<[u64; 4]> {
    if !(0.0..1.0).contains(&leak) {
        return Err(Error::invalid(format!("leak probability must be in [0, 1), got {leak}")));
    }
    if leak == 0.0 {
        return Ok(counts);
    }
    let mut out = [0u64; 4];
    for (o, &c) in out.iter_mut().zip(&counts) {
        let keep = Binomial::new(c, 1.0 - leak).map_err(|e| Error::invalid(format!("binomial sampling: {e}")))?;
        *o = keep.sample(rng);
    }
    if out.iter().sum::<u64>() == 0 {
        return Err(Error::EmptyResult("post-selection discarded every shot".into()));
    }
    Ok(out)
}

/// Parity scan with no post-selection.
pub fn parity_scan(
    rho: &TwoQubitDensity,
    phases: &[f64],
    pair: PairType,
    shots: Shots,
    seed: u64,
    eps_spam: f64,
) -> Result<ParityScan> {
    parity_scan_postselected(rho, phases, pair, shots, seed, eps_spam, 0.0)
}

/// Parity scan where, in sampled mode, a fraction `leak` of shots is
/// discarded before each point is evaluated.
#[allow(clippy::too_many_arguments)]
pub fn parity_scan_postselected(
    rho: &TwoQubitDensity,
    phases: &[f64],
    pair: PairType,
    shots: Shots,
    seed: u64,
    eps_spam: f64,
    leak: f64,
) -> Result<ParityScan> {
    if let Shots::Sampled(0) = shots {
        return Err(Error::invalid("a sampled scan needs at least one shot per point"));
    }
    let mut parities = Vec::with_capacity(phases.len());
    let mut stderr = Vec::with_capacity(phases.len());
    for (idx, &phi) in phases.iter().enumerate() {
        let p = apply_spam(rotated_distribution(rho, pair, phi), eps_spam)?;
        match shots {
            Shots::Analytic => {
                parities.push(parity_of(&p));
                stderr.push(0.0);
            }
            Shots::Sampled(n) => {
                let mut rng = point_rng(seed, idx as u64);
                let counts = dd_postselect(sample_counts(&p, n, &mut rng)?, leak, &mut rng)?;
                let total = counts.iter().sum::<u64>() as f64;
                let par = (counts[0] + counts[3]) as f64 / total - (counts[1] + counts[2]) as f64 / total;
                parities.push(par);
                stderr.push(((1.0 - par * par).max(0.0) / total).sqrt());
            }
        }
    }
    Ok(ParityScan { phases: phases.to_vec(), parities, stderr, shots, seed })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParityFit {
    /// Non-negative contrast `C`.
    pub contrast: Estimate,
    /// Offset `φ₀` in `C cos(2φ + φ₀)`, in `(−π, π]`.
    pub phi0: Estimate,
    /// Largest absolute residual of the fitted model.
    pub max_residual: f64,
}

/// Weighted linear least squares of `Π(φ) = A cos 2φ + B sin 2φ`, reported as
/// `C cos(2φ + φ₀)` with `C = √(A² + B²)`.
///
/// Sampled scans are weighted by `1/σ²` with σ taken from the fitted fringe
/// (floored at one shot) and their covariance taken as absolute; analytic
/// scans use unit weights and a residual-scaled covariance.
pub fn fit_parity(scan: &ParityScan) -> Result<ParityFit> {
    let n = scan.phases.len();
    if n < 6 || scan.parities.len() != n || scan.stderr.len() != n {
        return Err(Error::invalid(format!("parity fit needs at least 6 consistent points, got {n}")));
    }
    let lo = scan.phases.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = scan.phases.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if (hi - lo) * n as f64 / (n as f64 - 1.0) < PI * (1.0 - 1e-9) {
        return Err(Error::invalid("parity scan does not cover one period (π) of the phase"));
    }

    let basis: Vec<(f64, f64)> = scan.phases.iter().map(|&p| (2.0 * p).sin_cos()).collect();
    let solve = |weights: &[f64]| -> Result<[f64; 5]> {
        let (mut scc, mut sss, mut scs, mut scy, mut ssy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (k, &(s, c)) in basis.iter().enumerate() {
            let (w, y) = (weights[k], scan.parities[k]);
            scc += w * c * c;
            sss += w * s * s;
            scs += w * c * s;
            scy += w * c * y;
            ssy += w * s * y;
        }
        let det = scc * sss - scs * scs;
        if !(det.abs() > 1e-12 * (scc * sss).max(f64::MIN_POSITIVE)) {
            return Err(Error::invalid("parity scan phases do not determine both quadratures"));
        }
        let a = (sss * scy - scs * ssy) / det;
        let b = (scc * ssy - scs * scy) / det;
        Ok([a, b, sss / det, scc / det, -scs / det])
    };
    let mut weights = vec![1.0; n];
    let mut sol = solve(&weights)?;
    if let Shots::Sampled(shots) = scan.shots {
        // Weights from the fitted fringe rather than from each point's own
        // sample, which would favour points that fluctuated outward.
        let floor = 1.0 / shots as f64;
        for _ in 0..3 {
            for (k, &(s, c)) in basis.iter().enumerate() {
                let m = (sol[0] * c + sol[1] * s).clamp(-1.0, 1.0);
                let sigma = ((1.0 - m * m) / shots as f64).sqrt().max(floor);
                weights[k] = 1.0 / (sigma * sigma);
            }
            sol = solve(&weights)?;
        }
    }
    let [a, b, mut vaa, mut vbb, mut vab] = sol;
    let mut rss = 0.0;
    let mut max_residual = 0.0f64;
    for (k, &(s, c)) in basis.iter().enumerate() {
        let r = scan.parities[k] - a * c - b * s;
        rss += weights[k] * r * r;
        max_residual = max_residual.max(r.abs());
    }
    if scan.shots == Shots::Analytic {
        let s2 = rss / (n as f64 - 2.0);
        vaa *= s2;
        vbb *= s2;
        vab *= s2;
    }

    let c = a.hypot(b);
    let phi0 = (-b).atan2(a);
    let (c_err, phi_err) = if c > 0.0 {
        let vc = (a * a * vaa + b * b * vbb + 2.0 * a * b * vab) / (c * c);
        let vp = (b * b * vaa + a * a * vbb - 2.0 * a * b * vab) / (c * c * c * c);
        (vc.max(0.0).sqrt(), vp.max(0.0).sqrt())
    } else {
        (vaa.max(vbb).sqrt(), PI)
    };
    Ok(ParityFit {
        contrast: Estimate { value: c, stderr: c_err },
        phi0: Estimate { value: phi0, stderr: phi_err },
        max_residual,
    })
}

/// `F = (P + C)/2` with `σ_F = ½√(σ_P² + σ_C²)`.
pub fn bell_fidelity(p_pop: Estimate, contrast: Estimate) -> Result<Estimate> {
    for (name, v) in [("population", p_pop.value), ("contrast", contrast.value)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!("{name} {v} outside [0, 1]")));
        }
    }
    Ok(Estimate {
        value: (p_pop.value + contrast.value) / 2.0,
        stderr: 0.5 * p_pop.stderr.hypot(contrast.stderr),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BellResult {
    pub pair: PairType,
    /// Population in the two computational states the Bell target lives on.
    pub p_pop: Estimate,
    pub contrast: Estimate,
    pub fidelity: Estimate,
    pub phi0: Estimate,
    pub scan: ParityScan,
}

/// Indices of the computational states spanned by the pair's Bell target:
/// `{00, 11}` for same-type pairs, `{01, 10}` for SD.
pub fn bell_support(pair: PairType) -> [usize; 2] {
    match pair {
        PairType::SS | PairType::DD => [0, 3],
        PairType::SD => [1, 2],
    }
}

/// Population measurement plus parity scan plus fit. In sampled mode the
/// population uses its own random stream after the scan points.
pub fn bell_analysis(
    rho: &TwoQubitDensity,
    pair: PairType,
    phases: &[f64],
    shots: Shots,
    seed: u64,
    eps_spam: f64,
) -> Result<BellResult> {
    let support = bell_support(pair);
    let p = populations(rho, eps_spam)?;
    let p_pop = match shots {
        Shots::Analytic => Estimate::exact(p[support[0]] + p[support[1]]),
        Shots::Sampled(n) => {
            let mut rng = point_rng(seed, phases.len() as u64);
            let counts = sample_counts(&p, n, &mut rng)?;
            let v = (counts[support[0]] + counts[support[1]]) as f64 / n as f64;
            Estimate { value: v, stderr: (v * (1.0 - v) / n as f64).sqrt() }
        }
    };
    let scan = parity_scan(rho, phases, pair, shots, seed, eps_spam)?;
    let fit = fit_parity(&scan)?;
    let contrast = Estimate { value: fit.contrast.value.min(1.0), stderr: fit.contrast.stderr };
    let fidelity = bell_fidelity(p_pop, contrast)?;
    Ok(BellResult { pair, p_pop, contrast, fidelity, phi0: fit.phi0, scan })
}

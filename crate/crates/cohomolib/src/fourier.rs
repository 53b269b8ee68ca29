//! Mode-by-mode solution of u(x + alpha) - u(x) = psi(x) and the
//! small-divisor bookkeeping around it.
//!
//! Dividing psi-hat_k by e^{2 pi i k alpha} - 1 is only as trustworthy as
//! the divisor: k alpha mod 1 is therefore computed in exact rational
//! arithmetic from the certified enclosure of alpha and rounded once at the
//! end. The report keeps every divisor next to the coefficient it scaled so
//! callers can audit where the solution's mass came from.

use crate::arithmetic::{liouville_levels, AlphaValue, ContinuedFraction, Rational};
use crate::periodic::PeriodicFunction;
use num_bigint::BigInt;
use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FourierError {
    #[error("divisor for mode {k} is {divisor}: below the underflow floor")]
    DivisorUnderflow { k: i64, divisor: f64 },
    #[error("mode cutoff {k_max} does not fit the grid of {n} samples")]
    ModeOutOfRange { k_max: usize, n: usize },
    #[error("only {have} qualifying levels, need {need}")]
    NotLiouvilleEnough { have: usize, need: usize },
    #[error("witness mode q_{level} = {q} does not fit any sane grid")]
    WitnessModeTooLarge { level: usize, q: u64 },
}

const UNDERFLOW_FLOOR: f64 = 1e-300;
const GROWTH_RATIO: f64 = 1e6;

/// One mode of the solve: the divisor that scaled it and both coefficient
/// magnitudes.
#[derive(Debug, Clone, Copy)]
pub struct SmallDivisorReport {
    pub k: i64,
    /// |e^{2 pi i k alpha} - 1| = 2 |sin(pi k alpha)|.
    pub divisor: f64,
    pub input_mag: f64,
    pub output_mag: f64,
}

#[derive(Debug, Clone)]
pub struct RotationSolve {
    pub u: PeriodicFunction,
    /// Mean of psi, removed before solving (the equation only determines u
    /// up to constants and only admits zero-mean right-hand sides).
    pub removed_mean: f64,
    /// sup |u(x + alpha) - u(x) - (psi(x) - mean)| on a dense grid.
    pub residual_c0: f64,
    pub max_input_coeff: f64,
    pub max_output_coeff: f64,
    /// Set when max |u-hat| > 1e6 max |psi-hat|: the solution's magnitude
    /// is dominated by near-resonant divisors.
    pub growth_flag: bool,
    pub divisors: Vec<SmallDivisorReport>,
}

/// e^{2 pi i k alpha} - 1, with |.| = 2|sin(pi k alpha)|.
///
/// The distance from k alpha to the nearest integer is taken in exact
/// rational arithmetic and rounded once; folding before rounding keeps
/// near-resonant divisors accurate down to the subnormal range (a frac
/// close to 1 would otherwise round to exactly 1.0 and erase the divisor).
fn divisor(alpha: &AlphaValue, k: u64) -> (Complex64, f64) {
    let mid = (alpha.lo() + alpha.hi()) / Rational::from(BigInt::from(2));
    let ka = mid * Rational::from(BigInt::from(k));
    let frac = &ka - ka.floor();
    let half = Rational::new(BigInt::from(1), BigInt::from(2));
    let upper = frac > half;
    let dist = if upper {
        Rational::from(BigInt::from(1)) - &frac
    } else {
        frac
    };
    let dist = crate::arithmetic::rational_to_f64(&dist);
    let pi = std::f64::consts::PI;
    let (s, c) = ((pi * dist).sin(), (pi * dist).cos());
    // e^{2 pi i theta} - 1 = -2 sin^2(pi theta) + 2 i sin(pi theta) cos(pi theta);
    // the imaginary part flips sign when theta was folded from above 1/2.
    let sign = if upper { -1.0 } else { 1.0 };
    let d = Complex64::new(-2.0 * s * s, sign * 2.0 * s * c);
    (d, 2.0 * s.abs())
}

/// Solve u(x + alpha) - u(x) = psi(x) - mean(psi) mode by mode up to k_max.
pub fn solve_rotation(
    psi: &PeriodicFunction,
    alpha: &AlphaValue,
    k_max: usize,
) -> Result<RotationSolve, FourierError> {
    let n = psi.len();
    if k_max >= n / 2 {
        return Err(FourierError::ModeOutOfRange { k_max, n });
    }
    let removed_mean = psi.mean();
    let mut modes = Vec::new();
    let mut divisors = Vec::new();
    let mut max_in = 0.0f64;
    let mut max_out = 0.0f64;
    for k in 1..=k_max as u64 {
        let c = psi.coeff(k as i64);
        let cm = c.norm();
        if cm == 0.0 {
            continue;
        }
        let (d, mag) = divisor(alpha, k);
        if mag < UNDERFLOW_FLOOR {
            return Err(FourierError::DivisorUnderflow {
                k: k as i64,
                divisor: mag,
            });
        }
        let uc = c / d;
        max_in = max_in.max(cm);
        max_out = max_out.max(uc.norm());
        divisors.push(SmallDivisorReport {
            k: k as i64,
            divisor: mag,
            input_mag: cm,
            output_mag: uc.norm(),
        });
        modes.push((k as i64, uc));
    }
    let u = PeriodicFunction::from_modes(n, psi.declared_order(), 0.0, &modes)
        .expect("modes bounded by k_max < n/2");
    // Residual against the exact-rational shift, evaluated densely.
    let alpha_f = crate::arithmetic::rational_to_f64(
        &((alpha.lo() + alpha.hi()) / Rational::from(BigInt::from(2))),
    );
    let dense = 4 * n;
    let mut residual = 0.0f64;
    for j in 0..dense {
        let x = j as f64 / dense as f64;
        let v = u.eval(x + alpha_f) - u.eval(x) - (psi.eval(x) - removed_mean);
        residual = residual.max(v.abs());
    }
    Ok(RotationSolve {
        u,
        removed_mean,
        residual_c0: residual,
        max_input_coeff: max_in,
        max_output_coeff: max_out,
        growth_flag: max_out > GROWTH_RATIO * max_in,
        divisors,
    })
}

/// A right-hand side that is spectrally tiny yet forces a unit-size
/// solution at every chosen mode: psi-hat_{q_m} = e^{2 pi i q_m alpha} - 1,
/// so u-hat_{q_m} = 1 exactly.
#[derive(Debug, Clone)]
pub struct LiouvilleWitness {
    pub psi: PeriodicFunction,
    pub u: PeriodicFunction,
    /// Continued-fraction levels whose denominators became modes.
    pub levels: Vec<usize>,
    pub modes: Vec<u64>,
    pub divisor_sizes: Vec<f64>,
    pub grid: usize,
}

/// Builds the witness from the first `want` qualifying levels of
/// L(alpha, tau): levels m with beta_m < beta_{m-1}^tau.
pub fn liouville_counterexample(
    cf: &ContinuedFraction,
    tau: &Rational,
    want: usize,
) -> Result<LiouvilleWitness, FourierError> {
    let report = liouville_levels(cf, tau);
    if report.levels.len() < want {
        return Err(FourierError::NotLiouvilleEnough {
            have: report.levels.len(),
            need: want,
        });
    }
    let levels: Vec<usize> = report.levels[..want].to_vec();
    let mut modes = Vec::with_capacity(want);
    for &m in &levels {
        let q = cf
            .q_u64(m)
            .filter(|&q| q <= (1u64 << 22))
            .ok_or(FourierError::WitnessModeTooLarge {
                level: m,
                q: cf.q_u64(m).unwrap_or(u64::MAX),
            })?;
        modes.push(q);
    }
    let q_max = *modes.iter().max().expect("want >= 1 checked above");
    let grid = ((4 * q_max).max(64) as usize).next_power_of_two();
    let mut psi_modes = Vec::with_capacity(want);
    let mut u_modes = Vec::with_capacity(want);
    let mut divisor_sizes = Vec::with_capacity(want);
    for &q in &modes {
        let (d, mag) = divisor(cf.alpha(), q);
        psi_modes.push((q as i64, d));
        u_modes.push((q as i64, Complex64::new(1.0, 0.0)));
        divisor_sizes.push(mag);
    }
    let psi = PeriodicFunction::from_modes(grid, usize::MAX, 0.0, &psi_modes)
        .expect("grid sized to fit the modes");
    let u = PeriodicFunction::from_modes(grid, usize::MAX, 0.0, &u_modes)
        .expect("grid sized to fit the modes");
    Ok(LiouvilleWitness {
        psi,
        u,
        levels,
        modes,
        divisor_sizes,
        grid,
    })
}

impl LiouvilleWitness {
    /// Ratio max|u-hat| / max|psi-hat| = 1 / min divisor.
    pub fn amplification(&self) -> f64 {
        let min_d = self
            .divisor_sizes
            .iter()
            .fold(f64::INFINITY, |m, &v| m.min(v));
        1.0 / min_d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::{expand, from_partial_quotients};

    fn golden(depth: usize) -> ContinuedFraction {
        expand(&AlphaValue::golden(256), depth).unwrap()
    }

    fn big(v: u64) -> BigInt {
        BigInt::from(v)
    }

    #[test]
    fn solve_recovers_known_solution() {
        let cf = golden(40);
        let alpha = cf.alpha();
        // Known u0 with a handful of modes.
        let u0_modes = vec![
            (1i64, Complex64::new(0.4, -0.1)),
            (3i64, Complex64::new(-0.2, 0.05)),
            (7i64, Complex64::new(0.01, 0.02)),
        ];
        let n = 512;
        // psi-hat_k = u0-hat_k * (e^{2 pi i k alpha} - 1), built with the
        // same exact-rational divisors the solver will use.
        let psi_modes: Vec<(i64, Complex64)> = u0_modes
            .iter()
            .map(|&(k, c)| (k, c * divisor(alpha, k as u64).0))
            .collect();
        let psi = PeriodicFunction::from_modes(n, 64, 0.0, &psi_modes).unwrap();
        let solve = solve_rotation(&psi, alpha, 255).unwrap();
        for &(k, c) in &u0_modes {
            let got = solve.u.coeff(k);
            assert!((got - c).norm() < 1e-13, "mode {k}: {got} vs {c}");
        }
        assert!(solve.residual_c0 < 1e-10, "residual {}", solve.residual_c0);
        assert!(!solve.growth_flag);
    }

    #[test]
    fn mean_is_removed_and_reported() {
        let cf = golden(40);
        let psi = PeriodicFunction::from_modes(
            256,
            64,
            0.3,
            &[(2, Complex64::new(0.1, 0.0))],
        )
        .unwrap();
        let solve = solve_rotation(&psi, cf.alpha(), 100).unwrap();
        assert!((solve.removed_mean - 0.3).abs() < 1e-15);
        assert!((solve.u.mean()).abs() < 1e-15);
        assert!(solve.residual_c0 < 1e-12);
    }

    #[test]
    fn golden_divisors_match_beta_scales() {
        // At k = q_n the divisor is 2 sin(pi beta_n).
        let cf = golden(30);
        for n in 2..8 {
            let q = cf.q_u64(n).unwrap();
            let (_, mag) = divisor(cf.alpha(), q);
            let beta = cf.beta_f64(n);
            let expect = 2.0 * (std::f64::consts::PI * beta).sin();
            assert!(
                (mag - expect).abs() < 1e-12,
                "n={n}: {mag} vs {expect}"
            );
        }
    }

    #[test]
    fn growth_flag_fires_on_strong_liouville_modes() {
        // alpha = [0; 2, 10^7, ...]: beta_1 ~ 5e-8, so mode 2 amplifies by
        // ~1/(2 pi beta_1) > 1e6.
        let cf = from_partial_quotients(&[big(0), big(2), big(10_000_000), big(2)]).unwrap();
        let psi_modes = vec![(2i64, divisor(cf.alpha(), 2).0)];
        let psi = PeriodicFunction::from_modes(64, 64, 0.0, &psi_modes).unwrap();
        let solve = solve_rotation(&psi, cf.alpha(), 30).unwrap();
        assert!(solve.growth_flag);
        assert!((solve.u.coeff(2) - Complex64::new(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn divisor_underflow_is_refused() {
        // beta_1 ~ 1e-306 pushes the mode-2 divisor under the floor.
        let a2 = BigInt::from(10u32).pow(306);
        let cf = from_partial_quotients(&[big(0), big(2), a2, big(2)]).unwrap();
        let psi = PeriodicFunction::from_modes(
            64,
            64,
            0.0,
            &[(2, Complex64::new(1.0, 0.0))],
        )
        .unwrap();
        let res = solve_rotation(&psi, cf.alpha(), 10);
        assert!(matches!(res, Err(FourierError::DivisorUnderflow { k: 2, .. })));
    }

    #[test]
    fn witness_modes_for_seeded_quotients() {
        // [0; 2, 4, 16, 256, 2]: q = 1, 2, 9, 146, 37385.
        let cf = from_partial_quotients(&[big(0), big(2), big(4), big(16), big(256), big(2)])
            .unwrap();
        let tau = Rational::from(BigInt::from(2));
        let w = liouville_counterexample(&cf, &tau, 3).unwrap();
        assert_eq!(w.modes, vec![2, 9, 146]);
        assert_eq!(w.levels, vec![1, 2, 3]);
        // u-hat = 1 exactly at each witness mode.
        for &q in &w.modes {
            assert!((w.u.coeff(q as i64) - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        }
        // Solving psi recovers u to near machine precision.
        let solve = solve_rotation(&w.psi, cf.alpha(), w.grid / 2 - 1).unwrap();
        for &q in &w.modes {
            assert!(
                (solve.u.coeff(q as i64) - Complex64::new(1.0, 0.0)).norm() < 1e-12,
                "mode {q}"
            );
        }
        // psi stays smaller than u, and the divisors shrink sharply with
        // depth (the level-3 mode is amplified by ~1/beta_3).
        assert!(w.psi.sup_norm() < w.u.sup_norm());
        assert!(w.divisor_sizes.windows(2).all(|p| p[1] < p[0]));
        assert!(w.divisor_sizes[2] < 1e-3);
        assert!(w.amplification() > 1e3);
    }

    #[test]
    fn witness_requires_enough_qualifying_levels() {
        // Golden has no levels with beta_m < beta_{m-1}^2 (it sits exactly
        // on the boundary), so any request must fail.
        let cf = golden(20);
        let tau = Rational::from(BigInt::from(2));
        let res = liouville_counterexample(&cf, &tau, 2);
        assert!(matches!(
            res,
            Err(FourierError::NotLiouvilleEnough { .. })
        ));
    }
}

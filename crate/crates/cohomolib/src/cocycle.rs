//! Birkhoff sums over circle-map orbits and the bounds they obey.
//!
//! Everything here reduces to one pattern: walk an orbit once, accumulate
//! observables, snapshot at return times. The observable is evaluated
//! through a dense lookup table with linear interpolation whose error is
//! bounded up front (spectral evaluation per step would be exact but costs
//! a factor of the mode count); every reported bound carries the
//! accumulated interpolation slack separately so a violation is never
//! hidden inside it.

use crate::arithmetic::ContinuedFraction;
use crate::circlemap::{CircleLift, CircleMapError};
use crate::periodic::PeriodicFunction;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CocycleError {
    #[error("level {level}: |S phi - q mu| = {deviation} exceeds Var + slack = {allowed}")]
    BoundViolated {
        level: usize,
        deviation: f64,
        allowed: f64,
    },
    #[error("level {level}: return scales too close or missing for theta")]
    DegenerateBetas { level: usize },
    #[error("continued fraction too shallow: need level {need}, have {have}")]
    DepthUnavailable { need: usize, have: usize },
    #[error("level requires q_n = {q}, over the budget {budget}")]
    BudgetExceeded { q: u64, budget: u64 },
    #[error(transparent)]
    Map(#[from] CircleMapError),
}

/// Dense lookup table for one observable: O(1) evaluation with a bounded
/// linear-interpolation error.
struct FastEval {
    dense: Vec<f64>,
    err: f64,
}

impl FastEval {
    fn build(phi: &PeriodicFunction) -> FastEval {
        if phi.declared_order() >= 2 {
            let len = (phi.len() * 8).clamp(1 << 16, 1 << 18).next_power_of_two();
            let dense = phi.dense_deriv_samples(0, len);
            let d2 = phi.dense_deriv_samples(2, phi.len().max(4096));
            let m2 = d2.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            let h = 1.0 / dense.len() as f64;
            let err = m2 * h * h / 8.0 + phi.eval_truncation_bound();
            FastEval { dense, err }
        } else {
            // Rough observable: no second derivative to bound the chord
            // error, so charge half the largest sample jump.
            let dense = phi.samples().to_vec();
            let mut jump = 0.0f64;
            for i in 0..dense.len() {
                let j = (i + 1) % dense.len();
                jump = jump.max((dense[j] - dense[i]).abs());
            }
            FastEval {
                dense,
                err: jump / 2.0 + phi.eval_truncation_bound(),
            }
        }
    }

    #[inline]
    fn eval(&self, x: f64) -> f64 {
        let n = self.dense.len();
        let t = (x - x.floor()) * n as f64;
        let i = t as usize;
        let frac = t - i as f64;
        let a = self.dense[i % n];
        let b = self.dense[(i + 1) % n];
        a + frac * (b - a)
    }
}

/// S^k phi (x): sum of phi over the forward orbit for k >= 0, and
/// -sum over the backward orbit for k < 0 (so S^{-k} = -S^k o f^{-k}).
/// Evaluates phi spectrally (exact up to truncation); intended for small k.
pub fn birkhoff_sum(f: &CircleLift, phi: &PeriodicFunction, k: i64, x: f64) -> f64 {
    let mut sum = 0.0;
    if k >= 0 {
        let mut xi = x;
        for _ in 0..k {
            sum += phi.eval(xi);
            xi = f.eval(xi);
        }
    } else {
        let mut xi = x;
        for _ in 0..(-k) {
            xi = f.inverse_eval(xi);
            sum -= phi.eval(xi);
        }
    }
    sum
}

/// S^{t}phi(x) for each t in `times` (sorted ascending), one orbit pass.
pub fn birkhoff_snapshots(
    f: &CircleLift,
    phi: &PeriodicFunction,
    x: f64,
    times: &[u64],
) -> Vec<f64> {
    debug_assert!(times.windows(2).all(|w| w[0] <= w[1]));
    let mut out = Vec::with_capacity(times.len());
    let mut sum = 0.0;
    let mut xi = x;
    let mut step = 0u64;
    for &t in times {
        while step < t {
            sum += phi.eval(xi);
            xi = f.eval(xi);
            step += 1;
        }
        out.push(sum);
    }
    out
}

/// x -> S^k phi(x) sampled on a power-of-two grid.
pub fn birkhoff_grid(
    f: &CircleLift,
    phi: &PeriodicFunction,
    k: u64,
    grid: usize,
) -> PeriodicFunction {
    let fe = FastEval::build(phi);
    let samples: Vec<f64> = (0..grid)
        .map(|j| {
            let mut xi = j as f64 / grid as f64;
            let mut sum = 0.0;
            for _ in 0..k {
                sum += fe.eval(xi);
                xi = f.eval(xi);
            }
            sum
        })
        .collect();
    PeriodicFunction::from_samples(samples, phi.declared_order())
        .expect("grid must be a power of two")
}

#[derive(Debug, Clone)]
pub struct AverageReport {
    pub value: f64,
    /// |value - mu(phi)| is at most this.
    pub error_bound: f64,
    pub q_used: u64,
    pub level_used: usize,
    pub var: f64,
}

/// Average of phi against the unique invariant measure, from one long
/// Birkhoff sum at the deepest return time within budget. The deviation of
/// (1/q_N) S^{q_N} phi from mu(phi) is bounded by Var(phi)/q_N.
pub fn invariant_average(
    f: &CircleLift,
    phi: &PeriodicFunction,
    cf: &ContinuedFraction,
    budget: u64,
) -> Result<AverageReport, CocycleError> {
    let mut level = None;
    for n in (1..=cf.depth()).rev() {
        match cf.q_u64(n) {
            Some(q) if q <= budget => {
                level = Some((n, q));
                break;
            }
            _ => {}
        }
    }
    let (n, q) = level.ok_or(CocycleError::BudgetExceeded {
        q: cf.q_u64(1).unwrap_or(u64::MAX),
        budget,
    })?;
    let fe = FastEval::build(phi);
    let mut sum = 0.0;
    let mut xi = 0.0f64;
    for _ in 0..q {
        sum += fe.eval(xi);
        xi = f.eval(xi);
    }
    let var = phi.total_variation();
    let value = sum / q as f64;
    Ok(AverageReport {
        value,
        error_bound: var / q as f64 + fe.err,
        q_used: q,
        level_used: n,
        var,
    })
}

#[derive(Debug, Clone)]
pub struct DkLevelReport {
    pub n: usize,
    pub q: u64,
    /// max over grid starts of |S^{q_n} phi (x) - q_n mu|.
    pub max_dev: f64,
    pub var_bound: f64,
    /// q_n * (interpolation error): accumulated lookup slack.
    pub slack_interp: f64,
    /// q_n * (mu estimation error bound).
    pub slack_mu: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct DkOptions {
    pub grid: usize,
    /// Budget for the q_n tested.
    pub level_budget: u64,
    /// Budget for the reference orbit estimating mu.
    pub mu_budget: u64,
}

impl Default for DkOptions {
    fn default() -> Self {
        DkOptions {
            grid: 4096,
            level_budget: 100_000,
            mu_budget: 50_000_000,
        }
    }
}

/// Checks |S^{q_n} phi - q_n mu| <= Var(phi) + slack at every grid start,
/// for each requested level. One orbit pass per start with snapshots at
/// all tested q_n.
pub fn denjoy_koksma_check(
    f: &CircleLift,
    cf: &ContinuedFraction,
    phi: &PeriodicFunction,
    levels: &[usize],
    opts: &DkOptions,
) -> Result<Vec<DkLevelReport>, CocycleError> {
    let mut qs = Vec::new();
    for &n in levels {
        if cf.depth() < n {
            return Err(CocycleError::DepthUnavailable {
                need: n,
                have: cf.depth(),
            });
        }
        let q = cf.q_u64(n).ok_or(CocycleError::BudgetExceeded {
            q: u64::MAX,
            budget: opts.level_budget,
        })?;
        if q > opts.level_budget {
            return Err(CocycleError::BudgetExceeded {
                q,
                budget: opts.level_budget,
            });
        }
        qs.push((n, q));
    }
    qs.sort_by_key(|&(_, q)| q);
    let mu = invariant_average(f, phi, cf, opts.mu_budget)?;
    let fe = FastEval::build(phi);
    let q_max = qs.last().map_or(0, |&(_, q)| q);
    let mut max_dev = vec![0.0f64; qs.len()];
    for j in 0..opts.grid {
        let x0 = j as f64 / opts.grid as f64;
        let mut xi = x0;
        let mut sum = 0.0;
        let mut step = 0u64;
        let mut slot = 0;
        while step < q_max {
            sum += fe.eval(xi);
            xi = f.eval(xi);
            step += 1;
            while slot < qs.len() && qs[slot].1 == step {
                let dev = (sum - step as f64 * mu.value).abs();
                if dev > max_dev[slot] {
                    max_dev[slot] = dev;
                }
                slot += 1;
            }
        }
    }
    let var = phi.total_variation();
    let mut out = Vec::with_capacity(qs.len());
    for (slot, &(n, q)) in qs.iter().enumerate() {
        let slack_interp = q as f64 * fe.err;
        let slack_mu = q as f64 * mu.error_bound;
        let allowed = var + slack_interp + slack_mu;
        let pass = max_dev[slot] <= allowed;
        if !pass {
            return Err(CocycleError::BoundViolated {
                level: n,
                deviation: max_dev[slot],
                allowed,
            });
        }
        out.push(DkLevelReport {
            n,
            q,
            max_dev: max_dev[slot],
            var_bound: var,
            slack_interp,
            slack_mu,
            pass,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct HermanLevel {
    pub n: usize,
    pub q: u64,
    /// sup over grid starts of |log Df^{q_n}|.
    pub sup_log_df: f64,
}

/// sup |log Df^{q_n}| for each requested level, by accumulating
/// log Df along one orbit per grid start and snapshotting at the q_n.
/// Denjoy's estimate bounds every value by Var(log Df).
pub fn herman_sequence(
    f: &CircleLift,
    cf: &ContinuedFraction,
    levels: &[usize],
    grid: usize,
    budget: u64,
) -> Result<Vec<HermanLevel>, CocycleError> {
    let mut qs = Vec::new();
    for &n in levels {
        if cf.depth() < n {
            return Err(CocycleError::DepthUnavailable {
                need: n,
                have: cf.depth(),
            });
        }
        let q = cf.q_u64(n).ok_or(CocycleError::BudgetExceeded {
            q: u64::MAX,
            budget,
        })?;
        if q > budget {
            return Err(CocycleError::BudgetExceeded { q, budget });
        }
        qs.push((n, q));
    }
    qs.sort_by_key(|&(_, q)| q);
    let q_max = qs.last().map_or(0, |&(_, q)| q);
    let mut sups = vec![0.0f64; qs.len()];
    for j in 0..grid {
        let mut xi = j as f64 / grid as f64;
        let mut sum = 0.0;
        let mut step = 0u64;
        let mut slot = 0;
        while step < q_max {
            sum += f.deriv(1, xi).ln();
            xi = f.eval(xi);
            step += 1;
            while slot < qs.len() && qs[slot].1 == step {
                if sum.abs() > sups[slot] {
                    sups[slot] = sum.abs();
                }
                slot += 1;
            }
        }
    }
    Ok(qs
        .iter()
        .zip(sups)
        .map(|(&(n, q), sup_log_df)| HermanLevel { n, q, sup_log_df })
        .collect())
}

/// Total variation of log Df, densely sampled (the distortion budget in
/// Denjoy's estimate).
pub fn var_log_df(f: &CircleLift, grid: usize) -> f64 {
    let mut prev = f.deriv(1, 0.0).ln();
    let first = prev;
    let mut var = 0.0;
    for j in 1..grid {
        let v = f.deriv(1, j as f64 / grid as f64).ln();
        var += (v - prev).abs();
        prev = v;
    }
    var + (first - prev).abs()
}

/// Geometric amplification factor sum_{i=0}^{r} t^i with
/// t = beta_{n-1} / (beta_{n-1} - beta_n).
pub fn theta(cf: &ContinuedFraction, n: usize, r: usize) -> Result<f64, CocycleError> {
    if n < 1 || cf.depth() < n {
        return Err(CocycleError::DepthUnavailable {
            need: n.max(1),
            have: cf.depth(),
        });
    }
    let b_prev = cf.beta_f64(n - 1);
    let b_cur = cf.beta_f64(n);
    if !(b_prev > b_cur && b_cur >= 0.0 && b_prev.is_finite()) {
        return Err(CocycleError::DegenerateBetas { level: n });
    }
    let t = b_prev / (b_prev - b_cur);
    let mut sum = 1.0;
    let mut pow = 1.0;
    for _ in 1..=r {
        pow *= t;
        sum += pow;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::{expand, AlphaValue};
    use crate::circlemap::{make_family, FamilySpec};
    use num_complex::Complex64;

    fn golden_cf(depth: usize) -> ContinuedFraction {
        expand(&AlphaValue::golden(256), depth).unwrap()
    }

    fn cos_mode(n: usize) -> PeriodicFunction {
        // cos(2 pi x): c_1 = 1/2
        PeriodicFunction::from_modes(n, 64, 0.0, &[(1, Complex64::new(0.5, 0.0))]).unwrap()
    }

    #[test]
    fn birkhoff_sum_matches_geometric_closed_form() {
        // For the rigid rotation and a single mode, the sum telescopes to a
        // geometric series.
        let alpha = 0.3819660112501051;
        let f = make_family(&FamilySpec::Rotation { a: alpha }, 64).unwrap();
        let phi = cos_mode(64);
        let tau = std::f64::consts::TAU;
        for &k in &[1i64, 2, 7, 55, 200] {
            for &x in &[0.0, 0.21, 0.77] {
                let got = birkhoff_sum(&f, &phi, k, x);
                let mut expect = 0.0;
                for i in 0..k {
                    expect += (tau * (x + i as f64 * alpha)).cos();
                }
                assert!((got - expect).abs() < 1e-9 * k as f64, "k={k} x={x}");
                // closed form via the unit-circle geometric sum
                let w = Complex64::from_polar(1.0, tau * alpha);
                let z0 = Complex64::from_polar(1.0, tau * x);
                let geom = (z0 * (w.powi(k as i32) - 1.0) / (w - 1.0)).re;
                assert!((got - geom).abs() < 1e-8 * k as f64);
            }
        }
    }

    #[test]
    fn cocycle_identity_under_composition() {
        let f = make_family(&FamilySpec::Arnold { a: 0.38, eps: 0.5 }, 256).unwrap();
        let phi = cos_mode(256);
        for &(a, b) in &[(3i64, 4i64), (10, 7), (1, 25)] {
            for &x in &[0.1, 0.5, 0.93] {
                let lhs = birkhoff_sum(&f, &phi, a + b, x);
                let rhs =
                    birkhoff_sum(&f, &phi, a, x) + birkhoff_sum(&f, &phi, b, f.iterate(x, a as usize));
                assert!((lhs - rhs).abs() < 1e-10, "a={a} b={b} x={x}");
            }
        }
    }

    #[test]
    fn negative_index_is_minus_sum_along_backward_orbit() {
        let f = make_family(&FamilySpec::Arnold { a: 0.38, eps: 0.5 }, 256).unwrap();
        let phi = cos_mode(256);
        for &k in &[1i64, 5, 12] {
            for &x in &[0.2, 0.8] {
                let back = birkhoff_sum(&f, &phi, -k, x);
                let y = f.iterate_back(x, k as usize);
                let fwd = birkhoff_sum(&f, &phi, k, y);
                assert!((back + fwd).abs() < 1e-9, "k={k} x={x}");
            }
        }
    }

    #[test]
    fn snapshots_agree_with_direct_sums() {
        let f = make_family(&FamilySpec::Arnold { a: 0.38, eps: 0.5 }, 256).unwrap();
        let phi = cos_mode(256);
        let times = [1u64, 2, 5, 13, 34];
        let snaps = birkhoff_snapshots(&f, &phi, 0.3, &times);
        for (i, &t) in times.iter().enumerate() {
            let direct = birkhoff_sum(&f, &phi, t as i64, 0.3);
            assert!((snaps[i] - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn birkhoff_grid_interpolates_single_starts() {
        let f = make_family(&FamilySpec::Arnold { a: 0.38, eps: 0.5 }, 256).unwrap();
        let phi = cos_mode(256);
        let g = birkhoff_grid(&f, &phi, 13, 512);
        for j in [0usize, 100, 300] {
            let x = j as f64 / 512.0;
            let direct = birkhoff_sum(&f, &phi, 13, x);
            assert!((g.samples()[j] - direct).abs() < 1e-7);
        }
    }

    #[test]
    fn invariant_average_of_rotation_is_the_mean() {
        let cf = golden_cf(30);
        let f = make_family(&FamilySpec::Rotation { a: cf.alpha_f64() }, 64).unwrap();
        let mut phi = cos_mode(256);
        phi = phi.add_const(0.25);
        let rep = invariant_average(&f, &phi, &cf, 200_000).unwrap();
        // Lebesgue is invariant: mu(phi) = mean = 0.25.
        assert!(
            (rep.value - 0.25).abs() <= rep.error_bound,
            "value {} err {}",
            rep.value,
            rep.error_bound
        );
        assert!(rep.error_bound < 1e-4);
    }

    #[test]
    fn dk_bound_holds_for_golden_rotation() {
        let cf = golden_cf(30);
        let f = make_family(&FamilySpec::Rotation { a: cf.alpha_f64() }, 64).unwrap();
        let phi = cos_mode(256);
        let reports = denjoy_koksma_check(
            &f,
            &cf,
            &phi,
            &[3, 5, 8],
            &DkOptions {
                grid: 256,
                level_budget: 1000,
                mu_budget: 100_000,
            },
        )
        .unwrap();
        for rep in &reports {
            assert!(rep.pass);
            assert!(rep.max_dev <= rep.var_bound + rep.slack_interp + rep.slack_mu);
            // Slack must stay a small fraction of the main bound.
            assert!(rep.slack_interp + rep.slack_mu < 0.01 * rep.var_bound);
        }
    }

    #[test]
    fn dk_check_rejects_wrong_return_times() {
        // Return times from an unrelated rotation number: for a near-zero
        // rotation the mode-1 sums grow linearly in q, blowing past
        // Var + slack at golden's return times.
        let cf = golden_cf(30);
        let f = make_family(&FamilySpec::Rotation { a: 0.001 }, 64).unwrap();
        let phi = cos_mode(256);
        let res = denjoy_koksma_check(
            &f,
            &cf,
            &phi,
            &[6, 8],
            &DkOptions {
                grid: 128,
                level_budget: 1000,
                mu_budget: 100_000,
            },
        );
        assert!(matches!(res, Err(CocycleError::BoundViolated { .. })));
    }

    #[test]
    fn herman_zero_for_rotation_and_bounded_for_arnold() {
        let cf = golden_cf(30);
        let rot = make_family(&FamilySpec::Rotation { a: cf.alpha_f64() }, 64).unwrap();
        let levels = [2usize, 3, 4, 5];
        let h = herman_sequence(&rot, &cf, &levels, 64, 1000).unwrap();
        for l in &h {
            assert!(l.sup_log_df < 1e-12);
        }

        let spec = FamilySpec::Arnold { a: 0.0, eps: 0.5 };
        let tuned = crate::circlemap::tune_to_rotation(
            &spec,
            &cf,
            &crate::circlemap::TuneOptions {
                tol: 1e-10,
                q_budget: 200_000,
                exhaust_level: None,
            },
        )
        .unwrap();
        let h = herman_sequence(&tuned.lift, &cf, &levels, 256, 1000).unwrap();
        let var = var_log_df(&tuned.lift, 4096);
        for l in &h {
            assert!(l.sup_log_df <= var + 1e-6, "level {}: {}", l.n, l.sup_log_df);
        }
        // Denjoy contraction: deeper levels must not grow.
        assert!(h[3].sup_log_df < h[1].sup_log_df);
    }

    #[test]
    fn theta_matches_hand_value_for_golden() {
        let cf = golden_cf(20);
        // Golden: beta_n ~ alpha^{n+1}, so t -> 1/(1 - alpha) = phi^2.
        let alpha = (5.0f64.sqrt() - 1.0) / 2.0;
        let t = 1.0 / (1.0 - alpha);
        let want = 1.0 + t + t * t;
        let got = theta(&cf, 6, 2).unwrap();
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        assert!(matches!(
            theta(&cf, 0, 2),
            Err(CocycleError::DepthUnavailable { .. })
        ));
    }
}

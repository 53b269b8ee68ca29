//! Lifts of orientation-preserving circle diffeomorphisms.
//!
//! A lift f satisfies f(x+1) = f(x)+1; we store the 1-periodic displacement
//! f - id spectrally and keep closed-form fast paths for the rotation and
//! arnold families (those are the tolerance-critical evaluators: high
//! iterates are always composed step by step, never resampled). On top of
//! the pointwise calculus this module computes rotation numbers from
//! closest-return records, tunes family parameters to hit a prescribed
//! rotation number, and assembles the return-map geometry used by the
//! cohomological constructions: f_{n-1} = f^{q_{n-1}} - p_{n-1},
//! f_n = f^{q_n} - p_n, the displacement sizes m/M, and the distinguished
//! point maximizing the level-(n-1) displacement.

use crate::arithmetic::{
    expand_available, AlphaValue, ContinuedFraction, ExpandOptions, Rational,
};
use crate::calculus;
use crate::periodic::PeriodicFunction;
use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CircleMapError {
    #[error("not a diffeomorphism: min Df = {min_df} on the grid")]
    NotADiffeomorphism { min_df: f64 },
    #[error("parameter search failed to bracket the target")]
    BracketFailure,
    #[error("periodic orbit detected: f^{q}(0) returns to 0 + {p} exactly")]
    PeriodicOrbitDetected { q: u64, p: i64 },
    #[error("target rotation number sits in a mode-locking plateau")]
    TargetInPlateau,
    #[error("level requires q_n = {q}, over the budget {budget}")]
    BudgetExceeded { q: u64, budget: u64 },
    #[error("rotation number is rational at the requested depth")]
    RationalRotation,
    #[error("derivative order {s} unavailable (map smoothness {r})")]
    DerivativeUnavailable { s: usize, r: usize },
    #[error("partition intervals overlap by {worst_overlap}")]
    PartitionViolation { worst_overlap: f64 },
    #[error("continued fraction too shallow: need level {need}, have {have}")]
    DepthUnavailable { need: usize, have: usize },
}

/// Map family selector; `a` is always the translation knob.
#[derive(Debug, Clone)]
pub enum FamilySpec {
    Rotation { a: f64 },
    Arnold { a: f64, eps: f64 },
    Spectral { a: f64, modes: Vec<(i64, Complex64)> },
}

impl FamilySpec {
    pub fn with_translation(&self, a: f64) -> FamilySpec {
        match self {
            FamilySpec::Rotation { .. } => FamilySpec::Rotation { a },
            FamilySpec::Arnold { eps, .. } => FamilySpec::Arnold { a, eps: *eps },
            FamilySpec::Spectral { modes, .. } => FamilySpec::Spectral {
                a,
                modes: modes.clone(),
            },
        }
    }

    pub fn translation(&self) -> f64 {
        match self {
            FamilySpec::Rotation { a }
            | FamilySpec::Arnold { a, .. }
            | FamilySpec::Spectral { a, .. } => *a,
        }
    }
}

/// Lift of an orientation-preserving circle diffeomorphism.
#[derive(Debug, Clone)]
pub struct CircleLift {
    family: FamilySpec,
    displacement: PeriodicFunction,
    r: usize,
    min_df: f64,
    disp_lo: f64,
    disp_hi: f64,
}

pub const DEFAULT_GRID: usize = 4096;
const DF_TOL: f64 = 1e-8;

/// Smoothness order assigned to the closed-form (analytic) families.
const ANALYTIC_ORDER: usize = 64;

pub fn make_family(spec: &FamilySpec, grid: usize) -> Result<CircleLift, CircleMapError> {
    let tau = std::f64::consts::TAU;
    let (displacement, min_df, disp_lo, disp_hi) = match spec {
        FamilySpec::Rotation { a } => {
            let d = PeriodicFunction::from_modes(grid, ANALYTIC_ORDER, *a, &[])
                .expect("grid must be a power of two");
            (d, 1.0, *a, *a)
        }
        FamilySpec::Arnold { a, eps } => {
            // x + a + (eps/2pi) sin(2pi x); Df = 1 + eps cos(2pi x).
            let c1 = Complex64::new(0.0, -0.5) * (eps / tau);
            let d = PeriodicFunction::from_modes(grid, ANALYTIC_ORDER, *a, &[(1, c1)])
                .expect("grid must be a power of two");
            (d, 1.0 - eps.abs(), a - eps.abs() / tau, a + eps.abs() / tau)
        }
        FamilySpec::Spectral { a, modes } => {
            let d = PeriodicFunction::from_modes(grid, ANALYTIC_ORDER, *a, modes)
                .map_err(|_| CircleMapError::NotADiffeomorphism { min_df: f64::NAN })?;
            let dense1 = d.dense_deriv_samples(1, 4 * grid);
            let min_df = dense1.iter().fold(f64::INFINITY, |m, &v| m.min(1.0 + v));
            let dense0 = d.dense_deriv_samples(0, 4 * grid);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &v in &dense0 {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            (d, min_df, lo, hi)
        }
    };
    if !(min_df > DF_TOL) {
        return Err(CircleMapError::NotADiffeomorphism { min_df });
    }
    Ok(CircleLift {
        family: spec.clone(),
        displacement,
        r: ANALYTIC_ORDER,
        min_df,
        disp_lo,
        disp_hi,
    })
}

impl CircleLift {
    pub fn family(&self) -> &FamilySpec {
        &self.family
    }

    pub fn displacement(&self) -> &PeriodicFunction {
        &self.displacement
    }

    pub fn grid_size(&self) -> usize {
        self.displacement.len()
    }

    pub fn smoothness(&self) -> usize {
        self.r
    }

    pub fn min_df(&self) -> f64 {
        self.min_df
    }

    /// f(x), exact closed form where the family has one.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match &self.family {
            FamilySpec::Rotation { a } => x + a,
            FamilySpec::Arnold { a, eps } => {
                let tau = std::f64::consts::TAU;
                x + a + eps / tau * (tau * x).sin()
            }
            FamilySpec::Spectral { a, .. } => {
                x + a + (self.displacement.eval(x) - self.displacement.mean())
            }
        }
    }

    /// D^s f (x) for s >= 1.
    pub fn deriv(&self, s: usize, x: f64) -> f64 {
        match &self.family {
            FamilySpec::Rotation { .. } => {
                if s == 1 {
                    1.0
                } else {
                    0.0
                }
            }
            FamilySpec::Arnold { eps, .. } => {
                let tau = std::f64::consts::TAU;
                if s == 1 {
                    1.0 + eps * (tau * x).cos()
                } else {
                    // D^s of (eps/2pi) sin(2pi x): phase-shifted cosine.
                    eps * tau.powi(s as i32 - 1)
                        * (tau * x + (s as f64 - 1.0) * std::f64::consts::FRAC_PI_2).cos()
                }
            }
            FamilySpec::Spectral { .. } => {
                let d = self.displacement.deriv_eval(x, s);
                if s == 1 {
                    1.0 + d
                } else {
                    d
                }
            }
        }
    }

    /// Jet (D^1 f .. D^s f) at x.
    pub fn derivs_jet(&self, x: f64, s: usize) -> Vec<f64> {
        (1..=s).map(|j| self.deriv(j, x)).collect()
    }

    /// Unique x with f(x) = y, via bracketed Newton.
    pub fn inverse_eval(&self, y: f64) -> f64 {
        if let FamilySpec::Rotation { a } = &self.family {
            return y - a;
        }
        let mut lo = y - self.disp_hi - 1e-9;
        let mut hi = y - self.disp_lo + 1e-9;
        let mut x = 0.5 * (lo + hi);
        for _ in 0..80 {
            let fx = self.eval(x) - y;
            if fx.abs() < 1e-14 {
                return x;
            }
            if fx > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let df = self.deriv(1, x);
            let next = x - fx / df;
            x = if next > lo && next < hi {
                next
            } else {
                0.5 * (lo + hi)
            };
        }
        x
    }

    /// (x0, f(x0), ..., f^k(x0)).
    pub fn iterate_orbit(&self, x0: f64, k: usize) -> Vec<f64> {
        let mut orbit = Vec::with_capacity(k + 1);
        let mut x = x0;
        orbit.push(x);
        for _ in 0..k {
            x = self.eval(x);
            orbit.push(x);
        }
        orbit
    }

    /// f^k(x0) without storing the orbit.
    pub fn iterate(&self, x0: f64, k: usize) -> f64 {
        let mut x = x0;
        for _ in 0..k {
            x = self.eval(x);
        }
        x
    }

    /// f^{-k}(y0).
    pub fn iterate_back(&self, y0: f64, k: usize) -> f64 {
        let mut y = y0;
        for _ in 0..k {
            y = self.inverse_eval(y);
        }
        y
    }
}

fn convergent(cf: &ContinuedFraction, n: usize) -> Option<(u64, i64)> {
    Some((cf.q_u64(n)?, cf.p_i64(n)?))
}

/// One record-breaking closest return: |f^q(0) - p| beat all earlier times.
#[derive(Debug, Clone, Copy)]
pub struct ClosestReturn {
    pub q: u64,
    pub p: i64,
    /// Signed displacement f^q(0) - p.
    pub disp: f64,
}

#[derive(Debug, Clone)]
pub struct RotationReport {
    pub alpha: f64,
    /// Quotients certified from the noise-widened enclosure of the estimate.
    pub cf: ContinuedFraction,
    pub records: Vec<ClosestReturn>,
    pub beta_estimate: f64,
    pub iterations: u64,
    pub hit_max_iter: bool,
}

const PERIODIC_TOL: f64 = 1e-13;

/// Rotation number from closest-return records along the orbit of 0.
///
/// Each new record time q (with nearest integer p) is a convergent
/// denominator of the rotation number; the estimate (p + disp)/q is exact
/// for rigid rotations and within 1/q^2 in general. The enclosure handed to
/// the continued-fraction expansion is widened by a floating-point noise
/// allowance sqrt(iterations) * ulp(|p|+1), so only quotients the orbit data
/// truly determines are certified.
pub fn rotation_number(
    f: &CircleLift,
    tol: f64,
    max_iter: u64,
) -> Result<RotationReport, CircleMapError> {
    let mut records: Vec<ClosestReturn> = Vec::new();
    let mut best = f64::INFINITY;
    let mut x = 0.0f64;
    let mut iterations = 0;
    let mut hit_max_iter = true;
    // The rigid rotation admits the noise-free orbit q*a directly.
    let rot_a = match f.family() {
        FamilySpec::Rotation { a } => Some(*a),
        _ => None,
    };
    for q in 1..=max_iter {
        x = match rot_a {
            Some(a) => q as f64 * a,
            None => f.eval(x),
        };
        iterations = q;
        let p = x.round();
        let d = x - p;
        if d.abs() < best {
            best = d.abs();
            records.push(ClosestReturn {
                q,
                p: p as i64,
                disp: d,
            });
            if d.abs() < PERIODIC_TOL {
                return Err(CircleMapError::PeriodicOrbitDetected { q, p: p as i64 });
            }
            if d.abs() < tol {
                hit_max_iter = false;
                break;
            }
        }
    }
    let last = *records.last().expect("q = 1 always records");
    let alpha = (last.p as f64 + last.disp) / last.q as f64;
    // One rounding per step accumulates at worst like a random walk; the
    // closed-form orbit carries a single rounding.
    let step_factor = if rot_a.is_some() {
        2.0
    } else {
        (iterations as f64).sqrt()
    };
    let noise = step_factor * f64::EPSILON * (last.p.unsigned_abs() as f64 + 1.0);
    let width = (2.0 / (last.q as f64).powi(2)).max(noise / last.q as f64) + noise;
    let enclosure = AlphaValue::interval(
        Rational::from_float(alpha - width).expect("finite"),
        Rational::from_float(alpha + width).expect("finite"),
    );
    let cf = expand_available(&enclosure, 64, ExpandOptions::default()).unwrap_or_else(|_| {
        // Even the integer part is ambiguous (estimate straddles an
        // integer): certify nothing beyond the rounded value.
        expand_available(
            &AlphaValue::from_f64(alpha.round()),
            1,
            ExpandOptions::default(),
        )
        .expect("integer expands")
    });
    Ok(RotationReport {
        alpha,
        cf,
        records,
        beta_estimate: best,
        iterations,
        hit_max_iter,
    })
}

#[derive(Debug, Clone)]
pub struct TuneOptions {
    /// Accept once the certified enclosure of rho is narrower than this.
    pub tol: f64,
    /// Largest convergent denominator of the target that probes will test.
    pub q_budget: u64,
    /// If set, after certification keep bisecting so the orbit displacement
    /// at this target level is driven as close to zero as the parameter
    /// resolution allows (pins the prefix through that level as sharply as
    /// f64 permits).
    pub exhaust_level: Option<usize>,
}

impl Default for TuneOptions {
    fn default() -> Self {
        TuneOptions {
            tol: 1e-9,
            q_budget: 1_000_000,
            exhaust_level: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TuneReport {
    pub lift: CircleLift,
    pub a: f64,
    /// Width of the certified Farey enclosure of rho around the target.
    pub certified_width: f64,
    /// Deepest target level whose convergent test passed.
    pub certified_level: usize,
    /// Signed displacement f^{q_m}(0) - p_m at the deepest tested level.
    pub deep_disp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Side {
    Below,
    Above,
    Within { width: f64, level: usize, disp: f64 },
}

/// Compare rho(f) with the target by walking one orbit of 0 and testing the
/// sign of f^{q_n}(0) - p_n at each target convergent: even convergents lie
/// below the target, odd ones above, so a wrong sign localizes rho outside
/// the target's Farey interval at that depth.
fn compare_to_target(
    f: &CircleLift,
    cf: &ContinuedFraction,
    q_budget: u64,
    max_level: Option<usize>,
) -> Side {
    let mut x = 0.0f64;
    let mut q_done = 0u64;
    let mut width = f64::INFINITY;
    let mut level = 0;
    let mut disp = f64::NAN;
    let mut prev_q = 1.0f64;
    let top = max_level.unwrap_or(cf.depth()).min(cf.depth());
    for n in 1..=top {
        let (qn, pn) = match convergent(cf, n) {
            Some(c) => c,
            None => break,
        };
        if qn > q_budget {
            break;
        }
        while q_done < qn {
            x = f.eval(x);
            q_done += 1;
        }
        let s = x - pn as f64;
        let odd = n % 2 == 1;
        if odd && s >= 0.0 {
            return Side::Above;
        }
        if !odd && s <= 0.0 {
            return Side::Below;
        }
        width = 1.0 / (prev_q * qn as f64);
        prev_q = qn as f64;
        level = n;
        disp = s;
    }
    Side::Within { width, level, disp }
}

/// Bisection on the translation parameter until rho(f_a) is certified inside
/// the target's Farey interval at the deepest level the budget reaches.
pub fn tune_to_rotation(
    spec: &FamilySpec,
    target: &ContinuedFraction,
    opts: &TuneOptions,
) -> Result<TuneReport, CircleMapError> {
    if target.is_rational() {
        return Err(CircleMapError::TargetInPlateau);
    }
    let alpha = target.alpha_f64();
    if let FamilySpec::Rotation { .. } = spec {
        // rho = a exactly; nothing to search.
        let lift = make_side(spec, alpha)?;
        let side = compare_to_target(&lift, target, opts.q_budget, None);
        let (width, level, disp) = match side {
            Side::Within { width, level, disp } => (width, level, disp),
            _ => (0.0, 0, 0.0),
        };
        return Ok(TuneReport {
            lift,
            a: alpha,
            certified_width: width,
            certified_level: level,
            deep_disp: disp,
        });
    }
    let amp = 1.0; // rho moves by at most the parameter shift
    let mut lo = alpha - amp;
    let mut hi = alpha + amp;
    for _ in 0..4 {
        match compare_to_target(&make_side(spec, lo)?, target, opts.q_budget, None) {
            Side::Below => break,
            _ => lo -= amp,
        }
    }
    for _ in 0..4 {
        match compare_to_target(&make_side(spec, hi)?, target, opts.q_budget, None) {
            Side::Above => break,
            _ => hi += amp,
        }
    }
    let mut accepted = None;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // parameter resolution exhausted
        }
        match compare_to_target(&make_side(spec, mid)?, target, opts.q_budget, None) {
            Side::Below => lo = mid,
            Side::Above => hi = mid,
            Side::Within { width, level, disp } => {
                accepted = Some((mid, width, level, disp));
                break;
            }
        }
    }
    let (mut a, mut width, mut level, mut disp) = match accepted {
        Some(t) => t,
        None => return Err(CircleMapError::BracketFailure),
    };
    if let Some(m) = opts.exhaust_level {
        // Drive the level-m displacement toward zero: find the parameter
        // edge where the prefix through m first holds. Just below the edge
        // the deepest sign flips, so the edge is where the level-m orbit
        // displacement crosses zero.
        let m = m.min(level);
        let mut glo = lo;
        let mut ghi = a;
        for _ in 0..200 {
            let mid = 0.5 * (glo + ghi);
            if mid <= glo || mid >= ghi {
                break;
            }
            match compare_to_target(&make_side(spec, mid)?, target, opts.q_budget, Some(m)) {
                Side::Below => glo = mid,
                _ => ghi = mid,
            }
        }
        a = ghi;
        match compare_to_target(&make_side(spec, a)?, target, opts.q_budget, None) {
            Side::Within {
                width: w,
                level: l,
                disp: d,
            } => {
                width = w;
                level = l;
                disp = d;
            }
            // The edge point must still satisfy the full prefix.
            _ => return Err(CircleMapError::BracketFailure),
        }
    }
    Ok(TuneReport {
        lift: make_side(spec, a)?,
        a,
        certified_width: width,
        certified_level: level,
        deep_disp: disp,
    })
}

fn make_side(spec: &FamilySpec, a: f64) -> Result<CircleLift, CircleMapError> {
    make_family(&spec.with_translation(a), DEFAULT_GRID)
}

#[derive(Debug, Clone)]
pub struct RenormOptions {
    /// Sample grid (power of two) for the displacement sizes m_{n-1}, m_n.
    pub grid: usize,
    pub budget: u64,
}

impl Default for RenormOptions {
    fn default() -> Self {
        RenormOptions {
            grid: 1024,
            budget: 1_000_000,
        }
    }
}

/// Geometry of one renormalization level: the return maps f_{n-1}, f_n,
/// their displacement sizes, and the point maximizing the previous level's
/// displacement.
#[derive(Debug, Clone)]
pub struct RenormGeometry {
    pub n: usize,
    pub q_prev: u64,
    pub p_prev: i64,
    pub q_cur: u64,
    pub p_cur: i64,
    pub m_prev: PeriodicFunction,
    pub m_cur: PeriodicFunction,
    /// M_{n-1} = max m_{n-1}, after refinement.
    pub big_m_prev: f64,
    pub big_m_cur: f64,
    pub x_star: f64,
    pub m_prev_at_star: f64,
    /// Achieved maximality: m_{n-1}(x_star) / best grid sample.
    pub star_ratio: f64,
    /// True when (-1)^n (f_n - id) < 0 and (-1)^n (f_{n-1} - id) > 0 held at
    /// every grid point (the alternation the combinatorics guarantees).
    pub sign_ok: bool,
    /// True when m_{n-1} is flat to 1e-12 (rigid rotation); x_star = 0 then.
    pub flat_max: bool,
    lift: CircleLift,
}

pub fn renorm_geometry(
    f: &CircleLift,
    cf: &ContinuedFraction,
    n: usize,
    opts: &RenormOptions,
) -> Result<RenormGeometry, CircleMapError> {
    if n < 1 || cf.depth() < n {
        return Err(CircleMapError::DepthUnavailable {
            need: n.max(1),
            have: cf.depth(),
        });
    }
    if let Some(end) = cf.rational_end() {
        if end <= n {
            return Err(CircleMapError::RationalRotation);
        }
    }
    let (q_prev, p_prev) = convergent(cf, n - 1).ok_or(CircleMapError::BudgetExceeded {
        q: u64::MAX,
        budget: opts.budget,
    })?;
    let (q_cur, p_cur) = convergent(cf, n).ok_or(CircleMapError::BudgetExceeded {
        q: u64::MAX,
        budget: opts.budget,
    })?;
    if q_cur > opts.budget {
        return Err(CircleMapError::BudgetExceeded {
            q: q_cur,
            budget: opts.budget,
        });
    }
    let grid = opts.grid;
    let mut mp = vec![0.0f64; grid];
    let mut mc = vec![0.0f64; grid];
    let mut sign_ok = true;
    let sign_cur = if n % 2 == 0 { 1.0 } else { -1.0 };
    for (j, (mp_j, mc_j)) in mp.iter_mut().zip(mc.iter_mut()).enumerate() {
        let x0 = j as f64 / grid as f64;
        let mut x = x0;
        for step in 1..=q_cur {
            x = f.eval(x);
            if step == q_prev {
                let d = x - p_prev as f64 - x0;
                *mp_j = d.abs();
                // f_{n-1} must displace with sign (-1)^{n-1}
                if sign_cur * d > 0.0 {
                    sign_ok = false;
                }
            }
        }
        let d = x - p_cur as f64 - x0;
        *mc_j = d.abs();
        if sign_cur * d <= 0.0 {
            sign_ok = false;
        }
    }
    let m_prev_exact = |x: f64| (f.iterate(x, q_prev as usize) - p_prev as f64 - x).abs();
    let m_cur_exact = |x: f64| (f.iterate(x, q_cur as usize) - p_cur as f64 - x).abs();

    let (gmax_prev, argmax_prev, gmin_prev) = grid_extrema(&mp);
    let (_, argmax_cur, _) = grid_extrema(&mc);
    let flat_max = gmax_prev - gmin_prev < 1e-12 * (1.0 + gmax_prev);
    let h = 1.0 / grid as f64;
    let (x_star, m_star, big_m_cur) = if flat_max {
        (0.0, m_prev_exact(0.0), m_cur_exact(0.0))
    } else {
        let (xs, ms) = refine_max(&m_prev_exact, argmax_prev as f64 * h, h);
        let (_, mc_max) = refine_max(&m_cur_exact, argmax_cur as f64 * h, h);
        (xs, ms, mc_max)
    };
    let m_prev = PeriodicFunction::from_samples(mp, f.r).expect("grid is a power of two");
    let m_cur = PeriodicFunction::from_samples(mc, f.r).expect("grid is a power of two");
    Ok(RenormGeometry {
        n,
        q_prev,
        p_prev,
        q_cur,
        p_cur,
        m_prev,
        m_cur,
        big_m_prev: m_star.max(gmax_prev),
        big_m_cur,
        x_star,
        m_prev_at_star: m_star,
        star_ratio: if gmax_prev > 0.0 {
            m_star / gmax_prev
        } else {
            1.0
        },
        sign_ok,
        flat_max,
        lift: f.clone(),
    })
}

fn grid_extrema(v: &[f64]) -> (f64, usize, f64) {
    let mut max = f64::NEG_INFINITY;
    let mut arg = 0;
    let mut min = f64::INFINITY;
    for (j, &x) in v.iter().enumerate() {
        if x > max {
            max = x;
            arg = j;
        }
        min = min.min(x);
    }
    (max, arg, min)
}

/// Golden-section refinement of a local maximum, bracketed one grid step
/// around the best sample. Ties resolve to the smaller representative by
/// the deterministic scan order.
fn refine_max(f: &impl Fn(f64) -> f64, x0: f64, h: f64) -> (f64, f64) {
    let inv_phi = 0.618_033_988_749_894_9_f64;
    let mut a = x0 - h;
    let mut b = x0 + h;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..60 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        if b - a < 1e-14 {
            break;
        }
    }
    let x = (0.5 * (a + b)).rem_euclid(1.0);
    (x, f(x))
}

impl RenormGeometry {
    pub fn lift(&self) -> &CircleLift {
        &self.lift
    }

    /// f_{n-1}(x) by exact orbit composition.
    pub fn f_prev_at(&self, x: f64) -> f64 {
        self.lift.iterate(x, self.q_prev as usize) - self.p_prev as f64
    }

    pub fn f_cur_at(&self, x: f64) -> f64 {
        self.lift.iterate(x, self.q_cur as usize) - self.p_cur as f64
    }

    pub fn f_prev_inv_at(&self, y: f64) -> f64 {
        self.lift
            .iterate_back(y + self.p_prev as f64, self.q_prev as usize)
    }

    pub fn f_cur_inv_at(&self, y: f64) -> f64 {
        self.lift
            .iterate_back(y + self.p_cur as f64, self.q_cur as usize)
    }

    /// [x, f_{n-1}(x)] as an ordered pair.
    pub fn interval_i_prev(&self, x: f64) -> (f64, f64) {
        order(x, self.f_prev_at(x))
    }

    pub fn interval_i_cur(&self, x: f64) -> (f64, f64) {
        order(x, self.f_cur_at(x))
    }

    /// J_{n-1}(x) = [f_n(x), f_{n-1}(x)] as an ordered pair.
    pub fn interval_j_prev(&self, x: f64) -> (f64, f64) {
        order(self.f_cur_at(x), self.f_prev_at(x))
    }

    /// K_{n-1}(x) = [f_{n-1}^{-2}(x), f_{n-1}(x)] as an ordered pair.
    pub fn interval_k_prev(&self, x: f64) -> (f64, f64) {
        let back2 = self.f_prev_inv_at(self.f_prev_inv_at(x));
        order(back2, self.f_prev_at(x))
    }
}

fn order(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone)]
pub struct PartitionReport {
    pub n: usize,
    pub q_next: u64,
    pub worst_overlap: f64,
    pub disjoint: bool,
    pub total_length: f64,
    pub j_decomposition_defect: f64,
    pub k_decomposition_defect: f64,
}

const OVERLAP_TOL: f64 = 1e-10;

/// Checks that the level-n intervals along one orbit tile the circle
/// without interior overlap, and that the two-level interval
/// decompositions close up at their shared endpoints.
pub fn check_partition(
    f: &CircleLift,
    cf: &ContinuedFraction,
    n: usize,
    x0: f64,
    budget: u64,
) -> Result<PartitionReport, CircleMapError> {
    if cf.depth() < n + 1 {
        return Err(CircleMapError::DepthUnavailable {
            need: n + 1,
            have: cf.depth(),
        });
    }
    let (q_n, p_n) = convergent(cf, n).ok_or(CircleMapError::BudgetExceeded {
        q: u64::MAX,
        budget,
    })?;
    let (q_next, p_next) = convergent(cf, n + 1).ok_or(CircleMapError::BudgetExceeded {
        q: u64::MAX,
        budget,
    })?;
    if q_next + q_n > budget {
        return Err(CircleMapError::BudgetExceeded {
            q: q_next + q_n,
            budget,
        });
    }
    let steps = (q_next + q_n) as usize;
    let orbit = f.iterate_orbit(x0, steps);
    // arcs (start mod 1, length) of I_n(F^j x) for j < q_{n+1}
    let mut arcs: Vec<(f64, f64)> = (0..q_next as usize)
        .map(|j| {
            let a = orbit[j];
            let b = orbit[j + q_n as usize] - p_n as f64;
            let (lo, hi) = order(a, b);
            (lo.rem_euclid(1.0), hi - lo)
        })
        .collect();
    arcs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut worst = 0.0f64;
    let mut total = 0.0f64;
    for i in 0..arcs.len() {
        let (s, l) = arcs[i];
        total += l;
        let next_start = if i + 1 < arcs.len() {
            arcs[i + 1].0
        } else {
            arcs[0].0 + 1.0
        };
        worst = worst.max(s + l - next_start);
    }
    // J_n(x) = I_{n+1}(x) u I_n(x): shared endpoint x, outer endpoints
    // f_{n+1}(x) and f_n(x).
    let fnx = orbit[q_n as usize] - p_n as f64;
    let fnextx = orbit[q_next as usize] - p_next as f64;
    let (jl, jh) = order(fnextx, fnx);
    let j_defect = {
        let (l1, h1) = order(x0, fnextx);
        let (l2, h2) = order(x0, fnx);
        (l1.min(l2) - jl).abs() + (h1.max(h2) - jh).abs()
    };
    // K_n(x) chain: f_n^{-2} x -> f_n^{-1} x -> x, each step one piece.
    let back1 = f.iterate_back(x0 + p_n as f64, q_n as usize);
    let back2 = f.iterate_back(back1 + p_n as f64, q_n as usize);
    let k_defect = (f.iterate(back2, q_n as usize) - p_n as f64 - back1).abs()
        + (f.iterate(back1, q_n as usize) - p_n as f64 - x0).abs();
    if worst > OVERLAP_TOL {
        return Err(CircleMapError::PartitionViolation {
            worst_overlap: worst,
        });
    }
    Ok(PartitionReport {
        n,
        q_next,
        worst_overlap: worst,
        disjoint: true,
        total_length: total,
        j_decomposition_defect: j_defect,
        k_decomposition_defect: k_defect,
    })
}

#[derive(Debug, Clone)]
pub struct IterDerivs {
    /// D^1 f^k .. D^s f^k at x.
    pub derivs: Vec<f64>,
    /// log D f^k at x (accumulated as a plain sum; stable for large k).
    pub log_d1: f64,
    /// D^1 .. D^{s-1} of log D f^k at x.
    pub dlog: Vec<f64>,
}

/// High-order derivatives of f^k at x.
///
/// Df^k accumulates as a log-sum along the orbit; each D^j log Df^k is the
/// sum over orbit points of the chain-ruled jet of log Df, and the top
/// orders of f^k are rebuilt from those sums through the log-derivative
/// polynomials. This keeps high iterates stable where direct repeated
/// composition of raw jets drifts.
pub fn iterate_derivatives(
    f: &CircleLift,
    k: usize,
    s: usize,
    x: f64,
) -> Result<IterDerivs, CircleMapError> {
    if s == 0 || s >= f.r {
        return Err(CircleMapError::DerivativeUnavailable { s, r: f.r });
    }
    let aux = s - 1; // order of the maintained jet of f^i and of the log sums
    let mut jet: Vec<f64> = std::iter::once(1.0)
        .chain(std::iter::repeat(0.0))
        .take(aux.max(1))
        .collect();
    let mut lsum = vec![0.0f64; aux];
    let mut logsum = 0.0f64;
    let mut xi = x;
    for _ in 0..k {
        let fj = f.derivs_jet(xi, s);
        if !(fj[0] > 0.0) {
            return Err(CircleMapError::NotADiffeomorphism { min_df: fj[0] });
        }
        logsum += fj[0].ln();
        if aux > 0 {
            let dlog_pt = calculus::log_derivs(&fj, aux)
                .map_err(|_| CircleMapError::NotADiffeomorphism { min_df: fj[0] })?;
            for j in 1..=aux {
                lsum[j - 1] +=
                    calculus::faa_di_bruno(&dlog_pt, &jet, j).expect("orders fixed above");
            }
            let step_jet: Vec<f64> = fj[..aux].to_vec();
            jet = calculus::compose_derivs(&step_jet, &jet, aux).expect("orders fixed above");
        }
        xi = f.eval(xi);
    }
    let d1 = logsum.exp();
    let mut derivs = Vec::with_capacity(s);
    derivs.push(d1);
    for m in 1..s {
        let v = calculus::dr1_from_log(&lsum, d1, m).expect("orders bounded above");
        derivs.push(v);
    }
    Ok(IterDerivs {
        derivs,
        log_d1: logsum,
        dlog: lsum,
    })
}

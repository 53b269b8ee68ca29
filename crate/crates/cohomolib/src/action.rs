//! Fibered actions on R x R: pairs (g, psi) acting by (x, t) -> (g x, t + psi(x)).
//!
//! Bases and fibers are held as evaluation closures, so group words, powers
//! and conjugations stay exact compositions of the original evaluators --
//! nothing is resampled onto a grid. Powers are built iteratively (one
//! closure looping n steps), never by nesting, so return times in the
//! hundred-thousands neither deepen the call stack nor lose accuracy beyond
//! the orbit's own rounding.

use crate::arithmetic::ContinuedFraction;
use crate::circlemap::CircleLift;
use crate::periodic::PeriodicFunction;
use std::rc::Rc;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ActionError {
    #[error("rebase matrix has determinant {det}, need +1 or -1")]
    NotUnimodular { det: i64 },
    #[error("conjugator does not commute with unit translation (defect {defect})")]
    NonPeriodicConjugator { defect: f64 },
    #[error("generators fail to commute: sampled defect {defect}")]
    CommutationFailure { defect: f64 },
    #[error("base map stalls near a fixed point at x = {x}")]
    FixedPointInWindow { x: f64 },
    #[error("continued fraction too shallow: need level {need}, have {have}")]
    DepthUnavailable { need: usize, have: usize },
}

/// Invertible orientation-preserving map of the line, as a closure pair.
#[derive(Clone)]
pub struct LineMapHandle {
    fwd: Rc<dyn Fn(f64) -> f64>,
    inv: Rc<dyn Fn(f64) -> f64>,
}

impl LineMapHandle {
    pub fn new(fwd: Rc<dyn Fn(f64) -> f64>, inv: Rc<dyn Fn(f64) -> f64>) -> Self {
        LineMapHandle { fwd, inv }
    }

    pub fn identity() -> Self {
        LineMapHandle {
            fwd: Rc::new(|x| x),
            inv: Rc::new(|x| x),
        }
    }

    /// x -> x + c.
    pub fn translation(c: f64) -> Self {
        LineMapHandle {
            fwd: Rc::new(move |x| x + c),
            inv: Rc::new(move |x| x - c),
        }
    }

    pub fn from_lift(f: &CircleLift) -> Self {
        let a = f.clone();
        let b = f.clone();
        LineMapHandle {
            fwd: Rc::new(move |x| a.eval(x)),
            inv: Rc::new(move |x| b.inverse_eval(x)),
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.fwd)(x)
    }

    #[inline]
    pub fn eval_inv(&self, x: f64) -> f64 {
        (self.inv)(x)
    }

    /// self after other: x -> self(other(x)).
    pub fn compose(&self, other: &Self) -> Self {
        let f = self.fwd.clone();
        let g = other.fwd.clone();
        let fi = self.inv.clone();
        let gi = other.inv.clone();
        LineMapHandle {
            fwd: Rc::new(move |x| f(g(x))),
            inv: Rc::new(move |x| gi(fi(x))),
        }
    }

    pub fn inverse(&self) -> Self {
        LineMapHandle {
            fwd: self.inv.clone(),
            inv: self.fwd.clone(),
        }
    }
}

impl std::fmt::Debug for LineMapHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "LineMapHandle(<closure>)")
    }
}

/// Fiber translation amount as a function of the base point.
#[derive(Clone)]
pub struct FiberHandle(Rc<dyn Fn(f64) -> f64>);

impl FiberHandle {
    pub fn new(f: Rc<dyn Fn(f64) -> f64>) -> Self {
        FiberHandle(f)
    }

    pub fn zero() -> Self {
        FiberHandle(Rc::new(|_| 0.0))
    }

    pub fn from_periodic(phi: &PeriodicFunction) -> Self {
        let p = phi.clone();
        FiberHandle(Rc::new(move |x| p.eval(x)))
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.0)(x)
    }
}

impl std::fmt::Debug for FiberHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FiberHandle(<closure>)")
    }
}

/// (g, psi): (x, t) -> (g x, t + psi x).
#[derive(Debug, Clone)]
pub struct FiberedPair {
    pub base: LineMapHandle,
    pub fiber: FiberHandle,
}

impl FiberedPair {
    pub fn new(base: LineMapHandle, fiber: FiberHandle) -> Self {
        FiberedPair { base, fiber }
    }

    pub fn identity() -> Self {
        FiberedPair {
            base: LineMapHandle::identity(),
            fiber: FiberHandle::zero(),
        }
    }

    pub fn apply(&self, x: f64, t: f64) -> (f64, f64) {
        (self.base.eval(x), t + self.fiber.eval(x))
    }

    /// (g, xi)(h, eta) = (g o h, eta + xi o h).
    pub fn compose(&self, other: &Self) -> Self {
        let base = self.base.compose(&other.base);
        let xi = self.fiber.clone();
        let eta = other.fiber.clone();
        let h = other.base.clone();
        let fiber = FiberHandle(Rc::new(move |x| eta.eval(x) + xi.eval(h.eval(x))));
        FiberedPair { base, fiber }
    }

    /// (g, xi)^{-1} = (g^{-1}, -xi o g^{-1}).
    pub fn inverse(&self) -> Self {
        let base = self.base.inverse();
        let xi = self.fiber.clone();
        let gi = self.base.inverse();
        let fiber = FiberHandle(Rc::new(move |x| -xi.eval(gi.eval(x))));
        FiberedPair { base, fiber }
    }

    /// n-th power as a single looping closure (no nesting).
    pub fn power(&self, n: i64) -> Self {
        if n == 0 {
            return FiberedPair::identity();
        }
        let steps = n.unsigned_abs();
        let src = self.clone();
        if n > 0 {
            let s1 = src.clone();
            let base_fwd = Rc::new(move |x: f64| {
                let mut y = x;
                for _ in 0..steps {
                    y = s1.base.eval(y);
                }
                y
            });
            let s2 = src.clone();
            let base_inv = Rc::new(move |x: f64| {
                let mut y = x;
                for _ in 0..steps {
                    y = s2.base.eval_inv(y);
                }
                y
            });
            let s3 = src;
            let fiber = FiberHandle(Rc::new(move |x: f64| {
                let mut y = x;
                let mut acc = 0.0;
                for _ in 0..steps {
                    acc += s3.fiber.eval(y);
                    y = s3.base.eval(y);
                }
                acc
            }));
            FiberedPair {
                base: LineMapHandle::new(base_fwd, base_inv),
                fiber,
            }
        } else {
            let s1 = src.clone();
            let base_fwd = Rc::new(move |x: f64| {
                let mut y = x;
                for _ in 0..steps {
                    y = s1.base.eval_inv(y);
                }
                y
            });
            let s2 = src.clone();
            let base_inv = Rc::new(move |x: f64| {
                let mut y = x;
                for _ in 0..steps {
                    y = s2.base.eval(y);
                }
                y
            });
            let s3 = src;
            let fiber = FiberHandle(Rc::new(move |x: f64| {
                let mut y = x;
                let mut acc = 0.0;
                for _ in 0..steps {
                    y = s3.base.eval_inv(y);
                    acc -= s3.fiber.eval(y);
                }
                acc
            }));
            FiberedPair {
                base: LineMapHandle::new(base_fwd, base_inv),
                fiber,
            }
        }
    }
}

/// An action of Z^2 given by two commuting fibered generators.
#[derive(Debug, Clone)]
pub struct FiberedAction {
    pub g10: FiberedPair,
    pub g01: FiberedPair,
    /// Sampled sup of base and fiber commutator defects.
    pub commutation_defect: f64,
    pub commutation_samples: usize,
}

impl FiberedAction {
    /// Wraps two generators after a sampled commutation check.
    pub fn new(
        g10: FiberedPair,
        g01: FiberedPair,
        samples: usize,
        tol: f64,
    ) -> Result<Self, ActionError> {
        let mut defect = 0.0f64;
        for j in 0..samples {
            let x = j as f64 / samples as f64;
            let t = 0.3;
            let (x1, t1) = {
                let (xa, ta) = g01.apply(x, t);
                g10.apply(xa, ta)
            };
            let (x2, t2) = {
                let (xb, tb) = g10.apply(x, t);
                g01.apply(xb, tb)
            };
            defect = defect.max((x1 - x2).abs()).max((t1 - t2).abs());
        }
        if defect > tol {
            return Err(ActionError::CommutationFailure { defect });
        }
        Ok(FiberedAction {
            g10,
            g01,
            commutation_defect: defect,
            commutation_samples: samples,
        })
    }

    /// The action induced by a circle pair: (1,0) -> (x - 1, 0) and
    /// (0,1) -> (f, phi).
    pub fn induced(f: &CircleLift, phi: &PeriodicFunction) -> Self {
        let g10 = FiberedPair::new(LineMapHandle::translation(-1.0), FiberHandle::zero());
        let g01 = FiberedPair::new(
            LineMapHandle::from_lift(f),
            FiberHandle::from_periodic(phi),
        );
        // Translation commutes with any lift and any 1-periodic fiber by
        // construction; record a token check.
        FiberedAction::new(g10, g01, 16, 1e-9).expect("induced generators commute")
    }

    /// Phi(m, n) = g01^n g10^m.
    pub fn act(&self, m: i64, n: i64) -> FiberedPair {
        match (m, n) {
            (0, 0) => FiberedPair::identity(),
            (m, 0) => self.g10.power(m),
            (0, n) => self.g01.power(n),
            (m, n) => self.g10.power(m).compose(&self.g01.power(n)),
        }
    }

    /// New generators Phi(U e1), Phi(U e2) for unimodular U (columns are
    /// images of the basis).
    pub fn rebase(&self, u: [[i64; 2]; 2], samples: usize) -> Result<FiberedAction, ActionError> {
        let det = u[0][0] * u[1][1] - u[0][1] * u[1][0];
        if det != 1 && det != -1 {
            return Err(ActionError::NotUnimodular { det });
        }
        let e1 = self.act(u[0][0], u[1][0]);
        let e2 = self.act(u[0][1], u[1][1]);
        FiberedAction::new(e1, e2, samples, 1e-7)
    }

    /// Conjugate every generator by (g, xi); g must commute with the unit
    /// translation (checked on samples) so the result is again an action of
    /// the same kind.
    pub fn conjugate(
        &self,
        conj: &FiberedPair,
        samples: usize,
    ) -> Result<FiberedAction, ActionError> {
        let mut defect = 0.0f64;
        for j in 0..samples {
            let x = j as f64 / samples as f64 - 0.5;
            let d = conj.base.eval(x + 1.0) - conj.base.eval(x) - 1.0;
            defect = defect.max(d.abs());
        }
        if defect > 1e-9 {
            return Err(ActionError::NonPeriodicConjugator { defect });
        }
        let inv = conj.inverse();
        let t = |p: &FiberedPair| conj.compose(p).compose(&inv);
        FiberedAction::new(t(&self.g10), t(&self.g01), samples, 1e-7)
    }
}

/// The matrix sending the standard basis to the level-n return pair:
/// columns (p_{n-1}, q_{n-1}) and (p_n, q_n); always determinant +1 or -1.
pub fn renorm_matrix(cf: &ContinuedFraction, n: usize) -> Result<[[i64; 2]; 2], ActionError> {
    if n < 1 || cf.depth() < n {
        return Err(ActionError::DepthUnavailable {
            need: n.max(1),
            have: cf.depth(),
        });
    }
    let p_prev = cf.p_i64(n - 1).ok_or(ActionError::NotUnimodular { det: 0 })?;
    let q_prev = cf.q_u64(n - 1).ok_or(ActionError::NotUnimodular { det: 0 })? as i64;
    let p_cur = cf.p_i64(n).ok_or(ActionError::NotUnimodular { det: 0 })?;
    let q_cur = cf.q_u64(n).ok_or(ActionError::NotUnimodular { det: 0 })? as i64;
    Ok([[p_prev, p_cur], [q_prev, q_cur]])
}

/// Level-n renormalization: generators become the return pairs
/// (f_{n-1}, S^{q_{n-1}} phi - fiberless shift) and (f_n, S^{q_n} phi).
pub fn renormalize(
    action: &FiberedAction,
    cf: &ContinuedFraction,
    n: usize,
    samples: usize,
) -> Result<FiberedAction, ActionError> {
    let u = renorm_matrix(cf, n)?;
    action.rebase(u, samples)
}

#[derive(Debug, Clone)]
pub struct FlatnessReport {
    /// sup |fiber of first pair| over its window.
    pub sup_first: f64,
    /// sup |fiber of second pair| over its window.
    pub sup_second: f64,
    pub tol: f64,
    pub flat: bool,
    pub samples: usize,
}

/// Measures how close two fibered pairs are to having identically zero
/// fiber on their respective windows. Reports, never errors: the caller
/// decides what a failure means.
pub fn flatness_test(
    first: &FiberedPair,
    first_window: (f64, f64),
    second: &FiberedPair,
    second_window: (f64, f64),
    samples: usize,
    tol: f64,
) -> FlatnessReport {
    let sup_on = |p: &FiberedPair, w: (f64, f64)| {
        let (lo, hi) = w;
        let mut sup = 0.0f64;
        for j in 0..=samples {
            let x = lo + (hi - lo) * j as f64 / samples as f64;
            sup = sup.max(p.fiber.eval(x).abs());
        }
        sup
    };
    let sup_first = sup_on(first, first_window);
    let sup_second = sup_on(second, second_window);
    FlatnessReport {
        sup_first,
        sup_second,
        tol,
        flat: sup_first <= tol && sup_second <= tol,
        samples,
    }
}

/// Solution of u(g x) - u(x) = psi(x) on the line for a fixed-point-free
/// base (g x > x everywhere it is evaluated).
///
/// u is pinned on the fundamental domain [x0, g x0) as
/// blend(3w - 1) * psi(g^{-1} t) -- identically zero in the first third and
/// exactly psi o g^{-1} in the last third, which makes the periodic
/// extension by the cocycle rule seamless -- and transported everywhere
/// else by u(x) = u(g^{-k} x) + sum of psi along the connecting orbit.
pub struct LineCocycleSolution {
    pair: FiberedPair,
    x0: f64,
    z: f64,
    blend: Rc<dyn Fn(f64) -> f64>,
    max_steps: usize,
}

pub fn solve_line_cohomology(
    pair: &FiberedPair,
    x0: f64,
    blend: Rc<dyn Fn(f64) -> f64>,
) -> Result<LineCocycleSolution, ActionError> {
    let z = pair.base.eval(x0);
    if !(z > x0) {
        return Err(ActionError::FixedPointInWindow { x: x0 });
    }
    Ok(LineCocycleSolution {
        pair: pair.clone(),
        x0,
        z,
        blend,
        max_steps: 1_000_000,
    })
}

impl LineCocycleSolution {
    /// Step budget for the connecting walk; exhausting it reports the walk
    /// as blocked. The default (1e6) covers any window a bounded-displacement
    /// base can legitimately need.
    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    fn in_domain(&self, t: f64) -> f64 {
        let w = (t - self.x0) / (self.z - self.x0);
        let b = (self.blend)(3.0 * w - 1.0);
        if b == 0.0 {
            0.0
        } else {
            b * self.pair.fiber.eval(self.pair.base.eval_inv(t))
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64, ActionError> {
        if x >= self.x0 && x < self.z {
            return Ok(self.in_domain(x));
        }
        let mut acc = 0.0;
        let mut y = x;
        if x >= self.z {
            for _ in 0..self.max_steps {
                let prev = self.pair.base.eval_inv(y);
                if !(prev < y) {
                    return Err(ActionError::FixedPointInWindow { x: y });
                }
                acc += self.pair.fiber.eval(prev);
                y = prev;
                if y < self.z {
                    return Ok(self.in_domain(y) + acc);
                }
            }
        } else {
            for _ in 0..self.max_steps {
                acc -= self.pair.fiber.eval(y);
                let next = self.pair.base.eval(y);
                if !(next > y) {
                    return Err(ActionError::FixedPointInWindow { x: y });
                }
                y = next;
                if y >= self.x0 {
                    return Ok(self.in_domain(y) + acc);
                }
            }
        }
        Err(ActionError::FixedPointInWindow { x: y })
    }

    /// sup of |u(g x) - u(x) - psi(x)| over sampled x in [lo, hi].
    pub fn residual_on(&self, lo: f64, hi: f64, samples: usize) -> Result<f64, ActionError> {
        let mut sup = 0.0f64;
        for j in 0..=samples {
            let x = lo + (hi - lo) * j as f64 / samples as f64;
            let v = self.eval(self.pair.base.eval(x))? - self.eval(x)?
                - self.pair.fiber.eval(x);
            sup = sup.max(v.abs());
        }
        Ok(sup)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FixedPointScan {
    pub m: i64,
    pub n: i64,
    /// min over the sample grid of the line displacement |base(x) - x|.
    pub min_disp: f64,
    pub fixed_point_free: bool,
}

/// Scans Phi(m, n) for |m|, |n| <= range for base fixed points on a sample
/// grid: an action all of whose nontrivial elements displace is the setting
/// every construction here assumes.
pub fn scan_fixed_point_free(
    action: &FiberedAction,
    range: i64,
    grid: usize,
    tol: f64,
) -> Vec<FixedPointScan> {
    let mut out = Vec::new();
    for m in -range..=range {
        for n in -range..=range {
            if m == 0 && n == 0 {
                continue;
            }
            let p = action.act(m, n);
            let mut min_disp = f64::INFINITY;
            for j in 0..grid {
                let x = j as f64 / grid as f64;
                let d = (p.base.eval(x) - x).abs();
                if d < min_disp {
                    min_disp = d;
                }
            }
            out.push(FixedPointScan {
                m,
                n,
                min_disp,
                fixed_point_free: min_disp > tol,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::{expand, AlphaValue};
    use crate::circlemap::{make_family, renorm_geometry, FamilySpec, RenormOptions};
    use num_complex::Complex64;

    fn cubic_blend() -> Rc<dyn Fn(f64) -> f64> {
        Rc::new(|t: f64| {
            if t <= 0.0 {
                0.0
            } else if t >= 1.0 {
                1.0
            } else {
                t * t * (3.0 - 2.0 * t)
            }
        })
    }

    fn cos_mode(n: usize) -> PeriodicFunction {
        PeriodicFunction::from_modes(n, 64, 0.0, &[(1, Complex64::new(0.5, 0.0))]).unwrap()
    }

    fn golden_cf(depth: usize) -> ContinuedFraction {
        expand(&AlphaValue::golden(256), depth).unwrap()
    }

    #[test]
    fn compose_inverse_and_power_identities() {
        let f = make_family(&FamilySpec::Arnold { a: 0.38, eps: 0.5 }, 256).unwrap();
        let phi = cos_mode(256);
        let p = FiberedPair::new(
            LineMapHandle::from_lift(&f),
            FiberHandle::from_periodic(&phi),
        );
        let id = p.compose(&p.inverse());
        for j in 0..40 {
            let x = j as f64 * 0.07 - 1.0;
            let (y, t) = id.apply(x, 0.2);
            assert!((y - x).abs() < 1e-11, "base at {x}");
            assert!((t - 0.2).abs() < 1e-11, "fiber at {x}");
        }
        // power(3) against explicit composition
        let p3 = p.power(3);
        let p3c = p.compose(&p).compose(&p);
        for j in 0..20 {
            let x = j as f64 * 0.05;
            let (y1, t1) = p3.apply(x, 0.0);
            let (y2, t2) = p3c.apply(x, 0.0);
            assert!((y1 - y2).abs() < 1e-12);
            assert!((t1 - t2).abs() < 1e-12);
        }
        // negative power: p^{-2} p^{2} = id
        let back = p.power(-2).compose(&p.power(2));
        for j in 0..20 {
            let x = j as f64 * 0.05;
            let (y, t) = back.apply(x, 1.0);
            assert!((y - x).abs() < 1e-10);
            assert!((t - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn induced_action_fiber_is_orbit_sum() {
        let f = make_family(&FamilySpec::Rotation { a: 0.3819660112501051 }, 64).unwrap();
        let phi = cos_mode(256);
        let act = FiberedAction::induced(&f, &phi);
        let p = act.act(2, 5);
        // base: f^5(x) - 2
        let x = 0.23;
        assert!((p.base.eval(x) - (f.iterate(x, 5) - 2.0)).abs() < 1e-12);
        // fiber: S^5 phi(x), independent of m
        let s5 = crate::cocycle::birkhoff_sum(&f, &phi, 5, x);
        assert!((p.fiber.eval(x) - s5).abs() < 1e-12);
        assert!(act.commutation_defect < 1e-12);
    }

    #[test]
    fn renormalized_generators_match_return_maps() {
        let cf = golden_cf(30);
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
        let phi = cos_mode(256);
        let act = FiberedAction::induced(&tuned.lift, &phi);
        let n = 5;
        let ren = renormalize(&act, &cf, n, 64).unwrap();
        let geo = renorm_geometry(
            &tuned.lift,
            &cf,
            n,
            &RenormOptions {
                grid: 64,
                budget: 10_000,
            },
        )
        .unwrap();
        for j in 0..16 {
            let x = j as f64 / 16.0;
            // Same orbit arithmetic on both sides: bitwise-equal results.
            assert_eq!(ren.g10.base.eval(x), geo.f_prev_at(x));
            assert_eq!(ren.g01.base.eval(x), geo.f_cur_at(x));
        }
        // Fibers are the return-time orbit sums.
        let x = 0.41;
        let s = crate::cocycle::birkhoff_sum(&tuned.lift, &phi, geo.q_prev as i64, x);
        assert!((ren.g10.fiber.eval(x) - s).abs() < 1e-11);
    }

    #[test]
    fn rebase_rejects_non_unimodular() {
        let f = make_family(&FamilySpec::Rotation { a: 0.3819660112501051 }, 64).unwrap();
        let phi = cos_mode(256);
        let act = FiberedAction::induced(&f, &phi);
        let res = act.rebase([[2, 0], [0, 1]], 16);
        assert!(matches!(res, Err(ActionError::NotUnimodular { det: 2 })));
    }

    #[test]
    fn renorm_matrix_is_unimodular_at_every_level() {
        let cf = golden_cf(20);
        for n in 1..=15 {
            let u = renorm_matrix(&cf, n).unwrap();
            let det = u[0][0] * u[1][1] - u[0][1] * u[1][0];
            assert!(det == 1 || det == -1, "level {n}: det {det}");
        }
    }

    #[test]
    fn conjugation_intertwines_the_action() {
        let f = make_family(&FamilySpec::Rotation { a: 0.3819660112501051 }, 64).unwrap();
        let phi = cos_mode(256);
        let act = FiberedAction::induced(&f, &phi);
        // Conjugator: small periodic perturbation of the identity, zero fiber.
        let tau = std::f64::consts::TAU;
        let g = make_family(
            &FamilySpec::Arnold { a: 0.0, eps: 0.3 },
            256,
        )
        .unwrap();
        let conj = FiberedPair::new(
            LineMapHandle::from_lift(&g),
            FiberHandle::new(Rc::new(move |x: f64| 0.1 * (tau * x).cos())),
        );
        let conjugated = act.conjugate(&conj, 64).unwrap();
        // T(p) o conj = conj o p on sample points.
        let p = act.act(1, 2);
        let tp = conjugated.act(1, 2);
        for j in 0..20 {
            let x = j as f64 * 0.05;
            let lhs = tp.apply(conj.apply(x, 0.1).0, conj.apply(x, 0.1).1);
            let via = p.apply(x, 0.1);
            let rhs = conj.apply(via.0, via.1);
            assert!((lhs.0 - rhs.0).abs() < 1e-10, "base at {x}");
            assert!((lhs.1 - rhs.1).abs() < 1e-10, "fiber at {x}");
        }
    }

    #[test]
    fn conjugation_rejects_non_periodic_base() {
        let f = make_family(&FamilySpec::Rotation { a: 0.3819660112501051 }, 64).unwrap();
        let phi = cos_mode(256);
        let act = FiberedAction::induced(&f, &phi);
        // x -> 2x does not commute with x -> x + 1.
        let bad = FiberedPair::new(
            LineMapHandle::new(Rc::new(|x| 2.0 * x), Rc::new(|x| 0.5 * x)),
            FiberHandle::zero(),
        );
        assert!(matches!(
            act.conjugate(&bad, 64),
            Err(ActionError::NonPeriodicConjugator { .. })
        ));
    }

    #[test]
    fn line_solver_solves_exactly_up_to_blend_smoothness() {
        // Base: rotation lift (fixed-point free); fiber: cos mode.
        let f = make_family(&FamilySpec::Rotation { a: 0.3819660112501051 }, 64).unwrap();
        let phi = cos_mode(256);
        let pair = FiberedPair::new(
            LineMapHandle::from_lift(&f),
            FiberHandle::from_periodic(&phi),
        );
        let sol = solve_line_cohomology(&pair, 0.1, cubic_blend()).unwrap();
        let res = sol.residual_on(-3.0, 3.0, 400).unwrap();
        assert!(res < 1e-11, "residual {res}");
    }

    #[test]
    fn line_solver_detects_stalling_base() {
        // x + (1 - cos 2 pi x)/8 has fixed points at the integers; walking
        // from beyond one can never reach the fundamental domain.
        let tau = std::f64::consts::TAU;
        let base = LineMapHandle::new(
            Rc::new(move |x: f64| x + (1.0 - (tau * x).cos()) / 8.0),
            Rc::new(move |x: f64| {
                // crude bracketed inverse, adequate for the test
                let mut lo = x - 0.3;
                let mut hi = x;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid + (1.0 - (tau * mid).cos()) / 8.0 > x {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                0.5 * (lo + hi)
            }),
        );
        let pair = FiberedPair::new(base, FiberHandle::new(Rc::new(|_| 1.0)));
        let sol = solve_line_cohomology(&pair, 0.25, cubic_blend())
            .unwrap()
            .with_max_steps(20_000);
        // From x = 1.5 the backward walk stalls at the fixed point x = 1.
        let res = sol.eval(1.5);
        assert!(matches!(res, Err(ActionError::FixedPointInWindow { .. })));
    }

    #[test]
    fn fixed_point_scan_flags_locking() {
        // Rigid golden rotation: every nonzero (m, n) displaces.
        let cf = golden_cf(20);
        let f = make_family(&FamilySpec::Rotation { a: cf.alpha_f64() }, 64).unwrap();
        let phi = cos_mode(64);
        let act = FiberedAction::induced(&f, &phi);
        let scan = scan_fixed_point_free(&act, 2, 32, 1e-9);
        assert!(scan.iter().all(|s| s.fixed_point_free));
        // Mode-locked map: f^2 - 1 has a fixed point.
        let locked = make_family(&FamilySpec::Arnold { a: 0.5, eps: 0.5 }, 64).unwrap();
        let act2 = FiberedAction::induced(&locked, &phi);
        let scan2 = scan_fixed_point_free(&act2, 2, 64, 1e-9);
        let hit = scan2
            .iter()
            .find(|s| (s.m, s.n) == (1, 2))
            .expect("scan covers the range");
        assert!(!hit.fixed_point_free, "min_disp = {}", hit.min_disp);
    }
}

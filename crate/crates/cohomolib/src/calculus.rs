//! High-order chain-rule combinatorics.
//!
//! Partial Bell polynomials drive everything here: composition (Faà di
//! Bruno), inversion (triangular solve against the identity), and the
//! polynomial family `P_r` that reconstructs `D^{r+1}g` from the derivatives
//! of `log Dg`. Index sets are enumerated once per `(r, j)` and cached;
//! coefficients are exact big integers (they outgrow `u64` past r = 20, and
//! the exact-rational evaluation path is used by homogeneity tests).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CalculusError {
    #[error("no Bell terms for r = {r}, j = {j}")]
    IndexOutOfRange { r: usize, j: usize },
    #[error("derivative slice has length {got}, need {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("first derivative must be positive, got {value}")]
    NonpositiveDerivative { value: f64 },
}

/// One monomial of a partial Bell polynomial: counts `c_i` with
/// `sum i*c_i = r`, `sum c_i = j`, and the exact multinomial coefficient.
#[derive(Debug, Clone)]
pub struct BellTerm {
    /// `counts[i]` is the multiplicity of the (i+1)-st derivative.
    pub counts: Vec<u32>,
    pub coeff: BigInt,
    coeff_f64: f64,
}

/// All monomials of `B_{r,j}`, enumerated in lexicographic count order.
#[derive(Debug, Clone)]
pub struct BellIndexSet {
    pub r: usize,
    pub j: usize,
    pub terms: Vec<BellTerm>,
}

fn bell_cache() -> &'static Mutex<HashMap<(usize, usize), Arc<BellIndexSet>>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<BellIndexSet>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// The index set of the partial Bell polynomial `B_{r,j}`, cached.
pub fn bell_index_set(r: usize, j: usize) -> Result<Arc<BellIndexSet>, CalculusError> {
    if j == 0 || j > r {
        return Err(CalculusError::IndexOutOfRange { r, j });
    }
    if let Some(hit) = bell_cache().lock().unwrap().get(&(r, j)) {
        return Ok(hit.clone());
    }
    let built = Arc::new(build_bell(r, j));
    bell_cache()
        .lock()
        .unwrap()
        .entry((r, j))
        .or_insert(built.clone());
    Ok(built)
}

fn factorial(n: usize) -> BigInt {
    let mut acc = BigInt::one();
    for k in 2..=n {
        acc *= BigInt::from(k);
    }
    acc
}

fn build_bell(r: usize, j: usize) -> BellIndexSet {
    let maxvar = r - j + 1;
    let mut terms = Vec::new();
    let mut counts = vec![0u32; maxvar];
    // Depth-first over c_1..c_maxvar with running weight and cardinality.
    fn rec(
        i: usize,
        weight_left: usize,
        parts_left: usize,
        counts: &mut Vec<u32>,
        out: &mut Vec<Vec<u32>>,
    ) {
        if i == counts.len() {
            if weight_left == 0 && parts_left == 0 {
                out.push(counts.clone());
            }
            return;
        }
        let istep = i + 1;
        let cmax = (weight_left / istep).min(parts_left);
        for c in 0..=cmax {
            counts[i] = c as u32;
            rec(i + 1, weight_left - istep * c, parts_left - c, counts, out);
        }
        counts[i] = 0;
    }
    let mut raw = Vec::new();
    rec(0, r, j, &mut counts, &mut raw);
    raw.sort();
    let r_fact = factorial(r);
    for counts in raw {
        let mut den = BigInt::one();
        for (i, &c) in counts.iter().enumerate() {
            if c > 0 {
                den *= factorial(c as usize);
                den *= pow_big(&factorial(i + 1), c);
            }
        }
        let coeff = &r_fact / den;
        let coeff_f64 = coeff.to_f64().unwrap_or(f64::INFINITY);
        terms.push(BellTerm {
            counts,
            coeff,
            coeff_f64,
        });
    }
    BellIndexSet { r, j, terms }
}

fn pow_big(x: &BigInt, e: u32) -> BigInt {
    let mut acc = BigInt::one();
    for _ in 0..e {
        acc *= x;
    }
    acc
}

/// Evaluate `B_{r,j}(x_1, ..., x_{r-j+1})`.
pub fn bell_eval(r: usize, j: usize, x: &[f64]) -> Result<f64, CalculusError> {
    let set = bell_index_set(r, j)?;
    let need = r - j + 1;
    if x.len() != need {
        return Err(CalculusError::LengthMismatch {
            expected: need,
            got: x.len(),
        });
    }
    let mut acc = 0.0;
    for term in &set.terms {
        let mut m = term.coeff_f64;
        for (i, &c) in term.counts.iter().enumerate() {
            for _ in 0..c {
                m *= x[i];
            }
        }
        acc += m;
    }
    Ok(acc)
}

/// `D^r (g o h)` from `dg[j-1] = D^j g` at `h(x)` and `dh[i-1] = D^i h` at `x`
/// (both slices of length `r`).
pub fn faa_di_bruno(dg_at_h: &[f64], dh: &[f64], r: usize) -> Result<f64, CalculusError> {
    if dg_at_h.len() < r {
        return Err(CalculusError::LengthMismatch {
            expected: r,
            got: dg_at_h.len(),
        });
    }
    if dh.len() < r {
        return Err(CalculusError::LengthMismatch {
            expected: r,
            got: dh.len(),
        });
    }
    let mut acc = 0.0;
    for j in 1..=r {
        acc += dg_at_h[j - 1] * bell_eval(r, j, &dh[..r - j + 1])?;
    }
    Ok(acc)
}

/// All derivatives `D^1..D^r (g o h)` in one pass.
pub fn compose_derivs(dg_at_h: &[f64], dh: &[f64], r: usize) -> Result<Vec<f64>, CalculusError> {
    (1..=r).map(|s| faa_di_bruno(dg_at_h, dh, s)).collect()
}

/// Derivatives `D^1..D^s (log Dg)` from `df[k-1] = D^k g` (length s+1),
/// requiring `Dg > 0`.
pub fn log_derivs(df: &[f64], s: usize) -> Result<Vec<f64>, CalculusError> {
    if df.len() < s + 1 {
        return Err(CalculusError::LengthMismatch {
            expected: s + 1,
            got: df.len(),
        });
    }
    let u = df[0];
    if u <= 0.0 {
        return Err(CalculusError::NonpositiveDerivative { value: u });
    }
    // D^j log at u: (-1)^{j-1} (j-1)! / u^j; compose with Dg.
    let mut dlog_at = Vec::with_capacity(s);
    let mut upow = u;
    let mut fact = 1.0;
    for j in 1..=s {
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        dlog_at.push(sign * fact / upow);
        upow *= u;
        fact *= j as f64;
    }
    // Derivatives of Dg are df shifted by one.
    let ddg: Vec<f64> = df[1..=s].to_vec();
    compose_derivs(&dlog_at, &ddg, s)
}

/// Derivatives of the inverse map at `y = f(x)` from `df[k-1] = D^k f` at x.
/// Triangular solve of `D^r (f^{-1} o f) = delta_{r,1}`.
pub fn inverse_derivs(df: &[f64]) -> Result<Vec<f64>, CalculusError> {
    let r = df.len();
    if r == 0 {
        return Err(CalculusError::LengthMismatch {
            expected: 1,
            got: 0,
        });
    }
    let d1 = df[0];
    if d1 <= 0.0 {
        return Err(CalculusError::NonpositiveDerivative { value: d1 });
    }
    let mut dg: Vec<f64> = Vec::with_capacity(r);
    dg.push(1.0 / d1);
    let mut d1pow = d1;
    for s in 2..=r {
        // sum_{j=1..s} dg[j] B_{s,j}(df) = 0, and B_{s,s} = (Df)^s.
        let mut rhs = 0.0;
        for j in 1..s {
            rhs -= dg[j - 1] * bell_eval(s, j, &df[..s - j + 1])?;
        }
        d1pow *= d1;
        dg.push(rhs / d1pow);
    }
    Ok(dg)
}

/// Sparse polynomial in variables `X_1..X_r` with integer coefficients;
/// keys are exponent vectors (trailing zeros trimmed).
#[derive(Debug, Clone, PartialEq)]
pub struct PrPolynomial {
    pub r: usize,
    pub terms: BTreeMap<Vec<u32>, BigInt>,
}

fn pr_cache() -> &'static Mutex<Vec<Arc<PrPolynomial>>> {
    static CACHE: OnceLock<Mutex<Vec<Arc<PrPolynomial>>>> = OnceLock::new();
    CACHE.get_or_init(|| {
        let p0 = PrPolynomial {
            r: 0,
            terms: BTreeMap::from([(vec![], BigInt::one())]),
        };
        Mutex::new(vec![Arc::new(p0)])
    })
}

/// The r-th log-derivative reconstruction polynomial, defined by
/// `P_0 = 1`, `P_{r+1} = X_1 P_r + sum_i X_{i+1} dP_r/dX_i`.
pub fn pr_polynomial(r: usize) -> Arc<PrPolynomial> {
    let mut cache = pr_cache().lock().unwrap();
    while cache.len() <= r {
        let prev = cache.last().unwrap().clone();
        let next = pr_step(&prev);
        cache.push(Arc::new(next));
    }
    cache[r].clone()
}

fn pr_step(p: &PrPolynomial) -> PrPolynomial {
    let mut terms: BTreeMap<Vec<u32>, BigInt> = BTreeMap::new();
    let mut add = |mut exps: Vec<u32>, coeff: BigInt| {
        while exps.last() == Some(&0) {
            exps.pop();
        }
        let e = terms.entry(exps).or_insert_with(BigInt::zero);
        *e += coeff;
        if e.is_zero() {
            // keep the map sparse
        }
    };
    for (exps, coeff) in &p.terms {
        // X_1 * term
        let mut e1 = exps.clone();
        if e1.is_empty() {
            e1.push(0);
        }
        e1[0] += 1;
        add(e1, coeff.clone());
        // X_{i+1} * d/dX_i term
        for i in 0..exps.len() {
            if exps[i] == 0 {
                continue;
            }
            let mut e = exps.clone();
            let c = coeff * BigInt::from(exps[i]);
            e[i] -= 1;
            if e.len() < i + 2 {
                e.resize(i + 2, 0);
            }
            e[i + 1] += 1;
            add(e, c);
        }
    }
    terms.retain(|_, c| !c.is_zero());
    PrPolynomial {
        r: p.r + 1,
        terms,
    }
}

impl PrPolynomial {
    pub fn eval(&self, x: &[f64]) -> Result<f64, CalculusError> {
        if x.len() < self.r {
            return Err(CalculusError::LengthMismatch {
                expected: self.r,
                got: x.len(),
            });
        }
        let mut acc = 0.0;
        for (exps, coeff) in &self.terms {
            let mut m = coeff.to_f64().unwrap_or(f64::INFINITY);
            for (i, &e) in exps.iter().enumerate() {
                for _ in 0..e {
                    m *= x[i];
                }
            }
            acc += m;
        }
        Ok(acc)
    }

    /// Exact-rational evaluation (used by homogeneity checks).
    pub fn eval_exact(&self, x: &[BigRational]) -> Result<BigRational, CalculusError> {
        if x.len() < self.r {
            return Err(CalculusError::LengthMismatch {
                expected: self.r,
                got: x.len(),
            });
        }
        let mut acc = BigRational::zero();
        for (exps, coeff) in &self.terms {
            let mut m = BigRational::from(coeff.clone());
            for (i, &e) in exps.iter().enumerate() {
                for _ in 0..e {
                    m *= &x[i];
                }
            }
            acc += m;
        }
        Ok(acc)
    }

    /// Total pseudo-weight `sum i * e_i` of every monomial must equal r.
    pub fn is_weight_homogeneous(&self) -> bool {
        self.terms.iter().all(|(exps, _)| {
            exps.iter()
                .enumerate()
                .map(|(i, &e)| (i + 1) * e as usize)
                .sum::<usize>()
                == self.r
        })
    }
}

/// Evaluate `P_r` at `x = (x_1..x_r)`.
pub fn pr_eval(r: usize, x: &[f64]) -> Result<f64, CalculusError> {
    pr_polynomial(r).eval(x)
}

/// `D^{r+1} g = P_r(D log Dg, ..., D^r log Dg) * Dg`.
///
/// `dlog[s-1] = D^s log Dg` (length r), `dg1 = Dg > 0`.
pub fn dr1_from_log(dlog: &[f64], dg1: f64, r: usize) -> Result<f64, CalculusError> {
    if dg1 <= 0.0 {
        return Err(CalculusError::NonpositiveDerivative { value: dg1 });
    }
    if dlog.len() < r {
        return Err(CalculusError::LengthMismatch {
            expected: r,
            got: dlog.len(),
        });
    }
    Ok(pr_eval(r, &dlog[..r])? * dg1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    /// Oracle: number of partitions of n into exactly k parts.
    fn partition_count(n: usize, k: usize) -> u64 {
        if k == 0 {
            return (n == 0) as u64;
        }
        if n < k {
            return 0;
        }
        partition_count(n - 1, k - 1) + partition_count(n - k, k)
    }

    /// Oracle: Stirling numbers of the second kind.
    fn stirling2(n: usize, k: usize) -> BigInt {
        if n == 0 && k == 0 {
            return BigInt::one();
        }
        if n == 0 || k == 0 || k > n {
            return BigInt::zero();
        }
        stirling2(n - 1, k - 1) + BigInt::from(k) * stirling2(n - 1, k)
    }

    /// Oracle: unsigned Stirling numbers of the first kind.
    fn stirling1(n: usize, k: usize) -> BigInt {
        if n == 0 && k == 0 {
            return BigInt::one();
        }
        if n == 0 || k == 0 || k > n {
            return BigInt::zero();
        }
        stirling1(n - 1, k - 1) + BigInt::from(n - 1) * stirling1(n - 1, k)
    }

    #[test]
    fn term_counts_match_partition_oracle() {
        for r in 1..=12 {
            for j in 1..=r {
                let set = bell_index_set(r, j).unwrap();
                assert_eq!(
                    set.terms.len() as u64,
                    partition_count(r, j),
                    "r={r} j={j}"
                );
                // Every term satisfies both index constraints.
                for t in &set.terms {
                    let weight: usize = t.counts.iter().enumerate().map(|(i, &c)| (i + 1) * c as usize).sum();
                    let parts: u32 = t.counts.iter().sum();
                    assert_eq!(weight, r);
                    assert_eq!(parts as usize, j);
                }
            }
        }
    }

    #[test]
    fn all_ones_gives_stirling2() {
        for r in 1..=12 {
            for j in 1..=r {
                let set = bell_index_set(r, j).unwrap();
                let total: BigInt = set.terms.iter().map(|t| t.coeff.clone()).sum();
                assert_eq!(total, stirling2(r, j), "r={r} j={j}");
            }
        }
    }

    #[test]
    fn factorial_arguments_give_stirling1() {
        // B_{r,j}(0!, 1!, 2!, ...) = |s(r, j)|.
        for r in 1..=10 {
            for j in 1..=r {
                let x: Vec<f64> = (0..r - j + 1)
                    .map(|i| (1..=i).map(|v| v as f64).product::<f64>())
                    .collect();
                let got = bell_eval(r, j, &x).unwrap();
                let want = stirling1(r, j).to_f64().unwrap();
                assert!((got - want).abs() <= 1e-9 * want.max(1.0), "r={r} j={j}");
            }
        }
    }

    #[test]
    fn hand_checked_small_cases() {
        // B_{2,1} = x_2, B_{2,2} = x_1^2, B_{3,2} = 3 x_1 x_2.
        assert_eq!(bell_eval(2, 1, &[7.0, 5.0]).unwrap(), 5.0);
        assert_eq!(bell_eval(2, 2, &[7.0]).unwrap(), 49.0);
        assert_eq!(bell_eval(3, 2, &[2.0, 10.0]).unwrap(), 60.0);
    }

    #[test]
    fn index_errors() {
        assert!(matches!(
            bell_index_set(3, 0),
            Err(CalculusError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            bell_index_set(3, 4),
            Err(CalculusError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            bell_eval(3, 2, &[1.0]),
            Err(CalculusError::LengthMismatch { expected: 2, got: 1 })
        ));
    }

    /// Central finite differences with one Richardson sweep.
    fn fd_deriv(f: &dyn Fn(f64) -> f64, x: f64, r: usize, h: f64) -> f64 {
        fn raw(f: &dyn Fn(f64) -> f64, x: f64, r: usize, h: f64) -> f64 {
            // r-th central difference / h^r.
            let mut acc = 0.0;
            let mut binom = 1.0f64;
            for k in 0..=r {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * binom * f(x + (r as f64 / 2.0 - k as f64) * h);
                binom = binom * (r as f64 - k as f64) / (k as f64 + 1.0);
            }
            acc / h.powi(r as i32)
        }
        let d1 = raw(f, x, r, h);
        let d2 = raw(f, x, r, h / 2.0);
        (4.0 * d2 - d1) / 3.0
    }

    #[test]
    fn faa_di_bruno_matches_finite_differences() {
        // g = exp, h = sin: derivatives of both are closed-form.
        let x0 = 0.3f64;
        let composed = |x: f64| x.sin().exp();
        for r in 1..=5 {
            let hx = x0.sin();
            let dg: Vec<f64> = (1..=r).map(|_| hx.exp()).collect();
            let dh: Vec<f64> = (1..=r)
                .map(|s| match s % 4 {
                    1 => x0.cos(),
                    2 => -x0.sin(),
                    3 => -x0.cos(),
                    _ => x0.sin(),
                })
                .collect();
            let got = faa_di_bruno(&dg, &dh, r).unwrap();
            let want = fd_deriv(&composed, x0, r, 0.05);
            assert!(
                (got - want).abs() <= 1e-5 * want.abs().max(1.0),
                "r={r}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn pr_weight_homogeneous_and_exact_scaling() {
        // P_r(t x_1, t^2 x_2, ..., t^r x_r) = t^r P_r(x), exactly on rationals.
        let xs: Vec<BigRational> = vec![
            rat(3, 2),
            rat(-1, 3),
            rat(7, 5),
            rat(2, 7),
            rat(-5, 4),
            rat(1, 6),
            rat(11, 9),
            rat(-3, 8),
        ];
        let t = rat(5, 3);
        for r in 0..=8 {
            let p = pr_polynomial(r);
            assert!(p.is_weight_homogeneous(), "r={r}");
            let base = p.eval_exact(&xs[..r]).unwrap();
            let scaled_args: Vec<BigRational> = xs[..r]
                .iter()
                .enumerate()
                .map(|(i, x)| {
                    let mut tp = BigRational::one();
                    for _ in 0..=i {
                        tp *= &t;
                    }
                    tp * x
                })
                .collect();
            let scaled = p.eval_exact(&scaled_args).unwrap();
            let mut tr = BigRational::one();
            for _ in 0..r {
                tr *= &t;
            }
            assert_eq!(scaled, tr * base, "r={r}");
        }
    }

    #[test]
    fn pr_low_orders_match_hand_expansion() {
        // P_1 = X_1, P_2 = X_1^2 + X_2, P_3 = X_1^3 + 3 X_1 X_2 + X_3.
        let x = [2.0, 5.0, 7.0];
        assert_eq!(pr_eval(1, &x).unwrap(), 2.0);
        assert_eq!(pr_eval(2, &x).unwrap(), 9.0);
        assert_eq!(pr_eval(3, &x).unwrap(), 45.0);
    }

    /// Taylor-series oracle: exact rational jets at 0 for g = x + c sin x.
    /// Returns D^k g(0) for k = 1..=kmax, plus D^s log Dg(0) for s = 1..=smax,
    /// computed by independent power-series arithmetic.
    fn series_oracle(c: BigRational, kmax: usize, smax: usize) -> (Vec<f64>, Vec<f64>) {
        let n = kmax.max(smax + 1) + 2;
        // Taylor coefficients of Dg = 1 + c cos x at 0.
        let mut dg = vec![BigRational::zero(); n];
        dg[0] = BigRational::one() + &c;
        let mut fact = BigInt::one();
        for k in 1..n {
            fact *= BigInt::from(k);
            if k % 2 == 0 {
                let sign = if k % 4 == 0 { 1 } else { -1 };
                dg[k] = &c * BigRational::new(BigInt::from(sign), fact.clone());
            }
        }
        // log(Dg) via series: L' = Dg'/Dg, solved coefficientwise.
        // Dg * L' = Dg' => sum_{i} dg[i] lp[k-i] = (k+1) dg[k+1].
        let mut lp = vec![BigRational::zero(); n - 1]; // coeffs of L'
        for k in 0..n - 1 {
            let mut rhs = BigRational::from(BigInt::from(k as u32 + 1)) * &dg[k + 1];
            for i in 1..=k {
                rhs -= &dg[i] * &lp[k - i];
            }
            lp[k] = rhs / &dg[0];
        }
        // D^k g(0): derivative coefficients of g = x + c sin x directly.
        let mut dgk = Vec::new();
        for k in 1..=kmax {
            dgk.push(match k % 4 {
                1 if k == 1 => 1.0 + rational_f64(&c),
                1 => rational_f64(&c),
                3 => -rational_f64(&c),
                _ => 0.0,
            });
        }
        // L = integral of L': [x^s] L = lp[s-1]/s, and D^s L(0) = s! [x^s] L.
        let mut dlog = Vec::new();
        let mut sfact = BigInt::one();
        for s in 1..=smax {
            sfact *= BigInt::from(s);
            let coef = &lp[s - 1] / BigRational::from(BigInt::from(s));
            let val = BigRational::from(sfact.clone()) * coef;
            dlog.push(rational_f64(&val));
        }
        (dgk, dlog)
    }

    fn rational_f64(x: &BigRational) -> f64 {
        x.numer().to_f64().unwrap() / x.denom().to_f64().unwrap()
    }

    #[test]
    fn dr1_from_log_matches_series_oracle() {
        let c = rat(2, 5);
        let (dg, dlog) = series_oracle(c, 9, 8);
        let dg1 = dg[0];
        for r in 0..=8 {
            let got = dr1_from_log(&dlog, dg1, r).unwrap();
            let want = dg[r]; // D^{r+1} g(0)
            assert!(
                (got - want).abs() <= 1e-10 * want.abs().max(1.0),
                "r={r}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn log_derivs_consistent_with_series_oracle() {
        let c = rat(2, 5);
        let (dg, dlog_want) = series_oracle(c, 9, 6);
        let got = log_derivs(&dg, 6).unwrap();
        for (s, (g, w)) in got.iter().zip(&dlog_want).enumerate() {
            assert!((g - w).abs() <= 1e-10 * w.abs().max(1.0), "s={}", s + 1);
        }
    }

    #[test]
    fn inverse_derivs_of_exp_is_log() {
        // f = exp at x = 0: f^{-1} = ln at y = 1, D^k ln(1) = (-1)^{k-1}(k-1)!.
        let df: Vec<f64> = vec![1.0; 8];
        let dg = inverse_derivs(&df).unwrap();
        let mut fact = 1.0;
        for (k, v) in dg.iter().enumerate() {
            let kk = k + 1;
            if kk >= 2 {
                fact *= (kk - 1) as f64;
            }
            let want = if kk % 2 == 1 { fact } else { -fact };
            assert!((v - want).abs() <= 1e-9 * fact, "k={kk}: {v} vs {want}");
        }
    }

    #[test]
    fn inverse_derivs_roundtrip_through_composition() {
        // Compose f and its inverse jets: the result must be the identity jet.
        let df = vec![1.7, -0.4, 0.9, 0.3, -1.1, 0.5];
        let dg = inverse_derivs(&df).unwrap();
        let composed = compose_derivs(&dg, &df, 6).unwrap();
        assert!((composed[0] - 1.0).abs() < 1e-12);
        for (s, v) in composed.iter().enumerate().skip(1) {
            assert!(v.abs() < 1e-9, "s={}: {v}", s + 1);
        }
    }

    #[test]
    fn nonpositive_derivative_rejected() {
        assert!(matches!(
            inverse_derivs(&[0.0, 1.0]),
            Err(CalculusError::NonpositiveDerivative { .. })
        ));
        assert!(matches!(
            dr1_from_log(&[1.0], -2.0, 1),
            Err(CalculusError::NonpositiveDerivative { .. })
        ));
        assert!(matches!(
            log_derivs(&[-1.0, 0.0], 1),
            Err(CalculusError::NonpositiveDerivative { .. })
        ));
    }

    #[test]
    fn big_orders_stay_exact() {
        // Above r = 12 coefficients leave u64 range; the big-int path must
        // keep row sums consistent with the Stirling recurrence.
        let r = 16;
        for j in [1usize, 2, 8, 15, 16] {
            let set = bell_index_set(r, j).unwrap();
            let total: BigInt = set.terms.iter().map(|t| t.coeff.clone()).sum();
            assert_eq!(total, stirling2(r, j), "j={j}");
        }
    }
}

//! Exact continued-fraction arithmetic over rational intervals.
//!
//! A real number is represented by an exact `BigRational` enclosure
//! `[lo, hi]`. The Gauss map is iterated on the enclosure; a partial quotient
//! is emitted only when both endpoints agree on `floor(1/x)`, so every
//! returned quotient is certified. For exactly rational input the enclosure
//! is degenerate and the expansion is plain Euclid.
//!
//! Denominator growth is unbounded by design: big integers are mandatory here
//! (rapidly growing quotient sequences overflow `u64` within a handful of
//! levels).

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ArithmeticError {
    /// The enclosure became too wide to certify the next quotient.
    #[error("precision exhausted at level {level}: ~{have_bits} certified bits remain (floor {floor_bits})")]
    PrecisionExhausted {
        level: usize,
        have_bits: i64,
        floor_bits: i64,
    },
    /// Input was exactly rational and the caller demanded an irrational.
    #[error("exactly rational input: expansion terminates at level {level}")]
    RationalInput { level: usize },
    /// Partial quotients must satisfy a_0 >= 0 and a_n >= 1 for n >= 1.
    #[error("invalid partial quotient a_{index} = {value}")]
    InvalidQuotient { index: usize, value: BigInt },
}

/// Minimum certified-width budget (in bits) below which expansion refuses to
/// continue even if the next floor still happens to be unambiguous.
pub const BUDGET_FLOOR_BITS: i64 = 16;

/// An exact rational enclosure of a real number.
///
/// `exact == true` means `lo == hi` and the value is the rational itself.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaValue {
    lo: Rational,
    hi: Rational,
    exact: bool,
}

impl AlphaValue {
    pub fn exact(value: Rational) -> Self {
        AlphaValue {
            lo: value.clone(),
            hi: value,
            exact: true,
        }
    }

    /// Enclosure `[lo, hi]`; panics if `lo > hi`.
    pub fn interval(lo: Rational, hi: Rational) -> Self {
        assert!(lo <= hi, "interval endpoints out of order");
        let exact = lo == hi;
        AlphaValue { lo, hi, exact }
    }

    /// Exact dyadic value of an `f64`.
    pub fn from_f64(x: f64) -> Self {
        AlphaValue::exact(Rational::from_float(x).expect("finite float"))
    }

    /// `(sqrt(5) - 1) / 2` enclosed to at least `bits` bits.
    pub fn golden(bits: u64) -> Self {
        let (lo, hi) = sqrt_enclosure(5u32.into(), bits + 4);
        let one = Rational::one();
        let half = Rational::new(BigInt::one(), BigInt::from(2));
        AlphaValue::interval((lo - &one) * &half, (hi - &one) * &half)
    }

    /// Fractional part of `sqrt(d)` enclosed to at least `bits` bits.
    /// `d` must not be a perfect square.
    pub fn sqrt_fract(d: u32, bits: u64) -> Self {
        let (lo, hi) = sqrt_enclosure(d.into(), bits + 4);
        let fl = lo.floor();
        assert!(
            hi.floor() == fl && lo != fl,
            "sqrt({d}) is an integer or enclosure straddles one"
        );
        AlphaValue::interval(lo - &fl, hi - fl)
    }

    /// `pi - 3` enclosed to at least `bits` bits (Machin's formula with
    /// alternating-series bracketing; every step is exact rational).
    pub fn pi_minus_3(bits: u64) -> Self {
        let (pi_lo, pi_hi) = pi_enclosure(bits + 8);
        let three = Rational::from(BigInt::from(3));
        AlphaValue::interval(pi_lo - &three, pi_hi - three)
    }

    /// Exact rational from a decimal string like `"0.6180339887"` or `"3/7"`.
    pub fn from_decimal_str(s: &str) -> Result<Self, String> {
        parse_rational(s).map(AlphaValue::exact)
    }

    /// Decimal string treated as a rounded prefix: enclosure is +/- half an
    /// ulp of the last given digit.
    pub fn from_decimal_prefix(s: &str) -> Result<Self, String> {
        let value = parse_rational(s)?;
        let places = s.split('.').nth(1).map_or(0, |t| t.len()) as u32;
        let half_ulp = Rational::new(BigInt::one(), BigInt::from(2) * BigInt::from(10u32).pow(places));
        Ok(AlphaValue::interval(&value - &half_ulp, value + half_ulp))
    }

    pub fn lo(&self) -> &Rational {
        &self.lo
    }

    pub fn hi(&self) -> &Rational {
        &self.hi
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    pub fn to_f64(&self) -> f64 {
        rational_to_f64(&self.lo)
    }

    /// Certified bits: `-log2(hi - lo)`, or `None` when exact.
    pub fn width_bits(&self) -> Option<i64> {
        if self.exact {
            None
        } else {
            Some(neg_log2_floor(&(&self.hi - &self.lo)))
        }
    }
}

/// One row of the precision ledger kept during expansion.
#[derive(Debug, Clone, serde::Serialize)]
pub struct LedgerEntry {
    pub level: usize,
    /// Estimated cost of this quotient: `log2(a_n) + 1` (spec estimate).
    pub estimated_bits: u64,
    /// Measured certified bits remaining after this step
    /// (`-log2 width` of the current Gauss iterate; `None` for exact input).
    pub remaining_bits: Option<i64>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExpandOptions {
    /// Error with `RationalInput` instead of flagging termination.
    pub strict_irrational: bool,
}

/// A certified continued-fraction expansion with convergents and return-time
/// scales.
///
/// Indexing follows the classical convention: `a[0] = floor(alpha)`,
/// `p[n]/q[n]` is the n-th convergent, `beta[n] = |q_n alpha - p_n|`
/// (stored as an exact rational enclosure).
#[derive(Debug, Clone)]
pub struct ContinuedFraction {
    alpha: AlphaValue,
    a: Vec<BigInt>,
    p: Vec<BigInt>,
    q: Vec<BigInt>,
    /// Gauss iterates: `alphas[n]` encloses the n-th iterate of frac(alpha).
    alphas: Vec<(Rational, Rational)>,
    /// `betas[n]` encloses `(-1)^n (q_n alpha - p_n) > 0`.
    betas: Vec<(Rational, Rational)>,
    /// `Some(n)`: input exactly rational, expansion terminated with `a_n`.
    rational_end: Option<usize>,
    ledger: Vec<LedgerEntry>,
    requested_depth: usize,
}

/// Expand to `depth` levels (quotients `a_0..a_depth`), erroring if the
/// enclosure cannot certify that many quotients.
pub fn expand(alpha: &AlphaValue, depth: usize) -> Result<ContinuedFraction, ArithmeticError> {
    expand_with(alpha, depth, ExpandOptions::default())
}

pub fn expand_with(
    alpha: &AlphaValue,
    depth: usize,
    opts: ExpandOptions,
) -> Result<ContinuedFraction, ArithmeticError> {
    let (cf, stopped) = expand_core(alpha, depth, opts)?;
    if let Some(err) = stopped {
        return Err(err);
    }
    Ok(cf)
}

/// Expand as deep as certifiable, up to `max_depth`; never errors for lack of
/// precision (the struct records where and why expansion stopped).
pub fn expand_available(
    alpha: &AlphaValue,
    max_depth: usize,
    opts: ExpandOptions,
) -> Result<ContinuedFraction, ArithmeticError> {
    let (cf, _) = expand_core(alpha, max_depth, opts)?;
    Ok(cf)
}

fn expand_core(
    alpha: &AlphaValue,
    depth: usize,
    opts: ExpandOptions,
) -> Result<(ContinuedFraction, Option<ArithmeticError>), ArithmeticError> {
    let a0_lo = alpha.lo.floor().to_integer();
    let a0_hi = alpha.hi.floor().to_integer();
    if a0_lo != a0_hi {
        return Err(ArithmeticError::PrecisionExhausted {
            level: 0,
            have_bits: alpha.width_bits().unwrap_or(i64::MAX),
            floor_bits: BUDGET_FLOOR_BITS,
        });
    }
    let a0 = a0_lo;
    let a0_rat = Rational::from(a0.clone());

    let mut cf = ContinuedFraction {
        alpha: alpha.clone(),
        a: vec![a0.clone()],
        p: vec![a0.clone()],
        q: vec![BigInt::one()],
        alphas: Vec::new(),
        betas: Vec::new(),
        rational_end: None,
        ledger: Vec::new(),
        requested_depth: depth,
    };

    // Gauss iterate enclosure, starting from frac(alpha).
    let mut lo = &alpha.lo - &a0_rat;
    let mut hi = &alpha.hi - &a0_rat;
    cf.alphas.push((lo.clone(), hi.clone()));
    cf.push_beta();

    // p_{n-2}, q_{n-2} sentinels behind (p_0, q_0) = (a_0, 1).
    let mut p_prev = BigInt::one(); // p_{-1}
    let mut q_prev = BigInt::zero(); // q_{-1}

    let mut stopped = None;
    for n in 1..=depth {
        if alpha.exact && lo.is_zero() {
            cf.rational_end = Some(n - 1);
            if opts.strict_irrational {
                return Err(ArithmeticError::RationalInput { level: n - 1 });
            }
            break;
        }
        if !alpha.exact {
            if lo.is_zero() || lo.is_negative() {
                stopped = Some(ArithmeticError::PrecisionExhausted {
                    level: n,
                    have_bits: 0,
                    floor_bits: BUDGET_FLOOR_BITS,
                });
                break;
            }
            let have = neg_log2_floor(&(&hi - &lo)) + neg_log2_floor(&lo.recip()).min(0);
            // `have` approximates certified bits of the current iterate,
            // relative to its own scale.
            if have < BUDGET_FLOOR_BITS {
                stopped = Some(ArithmeticError::PrecisionExhausted {
                    level: n,
                    have_bits: have,
                    floor_bits: BUDGET_FLOOR_BITS,
                });
                break;
            }
        }

        // 1/x reverses the enclosure.
        let inv_lo = hi.recip();
        let inv_hi = lo.recip();
        let fl = inv_lo.floor().to_integer();
        let fh = inv_hi.floor().to_integer();
        if fl != fh {
            stopped = Some(ArithmeticError::PrecisionExhausted {
                level: n,
                have_bits: neg_log2_floor(&(&inv_hi - &inv_lo)),
                floor_bits: BUDGET_FLOOR_BITS,
            });
            break;
        }
        let an = fl;
        debug_assert!(an >= BigInt::one());
        let an_rat = Rational::from(an.clone());
        lo = inv_lo - &an_rat;
        hi = inv_hi - an_rat;

        let pn = &an * &cf.p[n - 1] + &p_prev;
        let qn = &an * &cf.q[n - 1] + &q_prev;
        p_prev = cf.p[n - 1].clone();
        q_prev = cf.q[n - 1].clone();

        cf.ledger.push(LedgerEntry {
            level: n,
            estimated_bits: an.bits() + 1,
            remaining_bits: if alpha.exact {
                None
            } else if hi > lo {
                Some(neg_log2_floor(&(&hi - &lo)))
            } else {
                Some(i64::MAX)
            },
        });
        cf.a.push(an);
        cf.p.push(pn);
        cf.q.push(qn);
        cf.alphas.push((lo.clone(), hi.clone()));
        cf.push_beta();
    }

    Ok((cf, stopped))
}

/// Build a continued fraction from explicit partial quotients
/// `[a_0, a_1, ...]`. The value is enclosed between the final convergent and
/// the adjacent mediant, which pins every real continuation of the sequence.
pub fn from_partial_quotients(quotients: &[BigInt]) -> Result<ContinuedFraction, ArithmeticError> {
    if quotients.is_empty() {
        return Err(ArithmeticError::InvalidQuotient {
            index: 0,
            value: BigInt::zero(),
        });
    }
    if quotients[0].is_negative() {
        return Err(ArithmeticError::InvalidQuotient {
            index: 0,
            value: quotients[0].clone(),
        });
    }
    for (i, a) in quotients.iter().enumerate().skip(1) {
        if *a < BigInt::one() {
            return Err(ArithmeticError::InvalidQuotient {
                index: i,
                value: a.clone(),
            });
        }
    }

    let nlast = quotients.len() - 1;
    let mut p: Vec<BigInt> = Vec::with_capacity(quotients.len());
    let mut q: Vec<BigInt> = Vec::with_capacity(quotients.len());
    let (mut pm1, mut qm1) = (BigInt::one(), BigInt::zero());
    for (n, a) in quotients.iter().enumerate() {
        let (pn, qn) = if n == 0 {
            (a.clone(), BigInt::one())
        } else {
            (a * &p[n - 1] + &pm1, a * &q[n - 1] + &qm1)
        };
        if n > 0 {
            pm1 = p[n - 1].clone();
            qm1 = q[n - 1].clone();
        }
        p.push(pn);
        q.push(qn);
    }

    // Any real with these quotients lies strictly between the last convergent
    // and the mediant (p_N + p_{N-1}) / (q_N + q_{N-1}).
    let v = Rational::new(p[nlast].clone(), q[nlast].clone());
    let alpha = if nlast == 0 {
        // Single quotient: value in (a_0, a_0 + 1).
        let m = Rational::from(&p[0] + BigInt::one());
        AlphaValue::interval(v, m)
    } else {
        let m = Rational::new(&p[nlast] + &p[nlast - 1], &q[nlast] + &q[nlast - 1]);
        let (lo, hi) = if v < m { (v, m) } else { (m, v) };
        AlphaValue::interval(lo, hi)
    };

    let mut cf = ContinuedFraction {
        alpha,
        a: quotients.to_vec(),
        p,
        q,
        alphas: Vec::new(),
        betas: Vec::new(),
        rational_end: None,
        ledger: Vec::new(),
        requested_depth: nlast,
    };
    for n in 0..=nlast {
        cf.push_beta_at(n);
    }
    // Gauss iterates via alpha_n = beta_n / beta_{n-1}.
    for n in 0..=nlast {
        let (blo, bhi) = cf.betas[n].clone();
        if n == 0 {
            cf.alphas.push((blo, bhi));
        } else {
            let (plo, phi) = cf.betas[n - 1].clone();
            // Positive division: widest quotient interval.
            let lo = if phi.is_zero() { Rational::zero() } else { blo / phi };
            let hi = if plo.is_zero() {
                Rational::one()
            } else {
                (bhi / plo).min(Rational::one())
            };
            cf.alphas.push((lo, hi));
        }
    }
    Ok(cf)
}

impl ContinuedFraction {
    fn push_beta(&mut self) {
        let n = self.betas.len();
        self.push_beta_at(n);
    }

    /// beta_n = (-1)^n (q_n alpha - p_n), evaluated on the enclosure.
    fn push_beta_at(&mut self, n: usize) {
        let qn = Rational::from(self.q[n].clone());
        let pn = Rational::from(self.p[n].clone());
        let at = |x: &Rational| -> Rational {
            let v = &qn * x - &pn;
            if n % 2 == 0 {
                v
            } else {
                -v
            }
        };
        let b_at_lo = at(&self.alpha.lo);
        let b_at_hi = at(&self.alpha.hi);
        let (blo, bhi) = if b_at_lo <= b_at_hi {
            (b_at_lo, b_at_hi)
        } else {
            (b_at_hi, b_at_lo)
        };
        debug_assert!(!bhi.is_negative());
        let blo = if blo.is_negative() { Rational::zero() } else { blo };
        if self.betas.len() == n {
            self.betas.push((blo, bhi));
        } else {
            self.betas[n] = (blo, bhi);
        }
    }

    pub fn alpha(&self) -> &AlphaValue {
        &self.alpha
    }

    /// Deepest level with a certified quotient (quotients are `a_0..=a_depth`).
    pub fn depth(&self) -> usize {
        self.a.len() - 1
    }

    pub fn requested_depth(&self) -> usize {
        self.requested_depth
    }

    pub fn partial_quotients(&self) -> &[BigInt] {
        &self.a
    }

    pub fn numerators(&self) -> &[BigInt] {
        &self.p
    }

    pub fn denominators(&self) -> &[BigInt] {
        &self.q
    }

    pub fn p(&self, n: usize) -> &BigInt {
        &self.p[n]
    }

    pub fn q(&self, n: usize) -> &BigInt {
        &self.q[n]
    }

    pub fn a(&self, n: usize) -> &BigInt {
        &self.a[n]
    }

    pub fn q_u64(&self, n: usize) -> Option<u64> {
        self.q[n].to_u64()
    }

    pub fn p_i64(&self, n: usize) -> Option<i64> {
        self.p[n].to_i64()
    }

    /// Exactly rational input: level whose quotient completed Euclid.
    pub fn rational_end(&self) -> Option<usize> {
        self.rational_end
    }

    pub fn is_rational(&self) -> bool {
        self.rational_end.is_some()
    }

    pub fn ledger(&self) -> &[LedgerEntry] {
        &self.ledger
    }

    pub fn alpha_f64(&self) -> f64 {
        self.alpha.to_f64()
    }

    /// Enclosure of the n-th Gauss iterate of frac(alpha).
    pub fn gauss_iterate(&self, n: usize) -> (&Rational, &Rational) {
        (&self.alphas[n].0, &self.alphas[n].1)
    }

    /// Enclosure of beta_n (exact rational endpoints).
    pub fn beta(&self, n: usize) -> (&Rational, &Rational) {
        (&self.betas[n].0, &self.betas[n].1)
    }

    pub fn beta_f64(&self, n: usize) -> f64 {
        rational_to_f64(&self.betas[n].0)
    }

    /// Number of levels with beta available (== depth()).
    pub fn beta_levels(&self) -> usize {
        self.betas.len() - 1
    }

    /// Convergent p_n/q_n as f64.
    pub fn convergent_f64(&self, n: usize) -> f64 {
        rational_to_f64(&Rational::new(self.p[n].clone(), self.q[n].clone()))
    }

    /// `(-1)^n (q_n alpha - p_n) = beta_n` with sign: returns the signed
    /// displacement `q_n alpha - p_n` (enclosure midpoint) as f64.
    pub fn signed_beta_f64(&self, n: usize) -> f64 {
        let b = self.beta_f64(n);
        if n % 2 == 0 {
            b
        } else {
            -b
        }
    }
}

/// Outcome of a level-membership judgment on an enclosure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum LevelJudgment {
    In,
    Out,
    /// The enclosure straddles the comparison; no certified answer.
    Ambiguous,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct LiouvilleReport {
    /// Levels m >= 1 with beta_m < beta_{m-1}^tau, certified.
    pub levels: Vec<usize>,
    pub ambiguous: Vec<usize>,
    /// Levels judged: 1..=judged_to.
    pub judged_to: usize,
    /// |levels| / judged count.
    pub density: f64,
}

/// Certified membership in the fast-approximation level set
/// `{ m >= 1 : beta_m < beta_{m-1}^tau }` for rational `tau > 0`.
///
/// Comparisons are exact: with `tau = s/r`, `beta_m < beta_{m-1}^(s/r)`
/// iff `beta_m^r < beta_{m-1}^s` (both sides in (0,1), r > 0).
pub fn liouville_levels(cf: &ContinuedFraction, tau: &Rational) -> LiouvilleReport {
    assert!(tau.is_positive(), "tau must be positive");
    let judged_to = cf.beta_levels();
    let mut levels = Vec::new();
    let mut ambiguous = Vec::new();
    for m in 1..=judged_to {
        match judge_level(cf, m, tau) {
            LevelJudgment::In => levels.push(m),
            LevelJudgment::Ambiguous => ambiguous.push(m),
            LevelJudgment::Out => {}
        }
    }
    let density = if judged_to == 0 {
        0.0
    } else {
        levels.len() as f64 / judged_to as f64
    };
    LiouvilleReport {
        levels,
        ambiguous,
        judged_to,
        density,
    }
}

fn judge_level(cf: &ContinuedFraction, m: usize, tau: &Rational) -> LevelJudgment {
    let r = tau.denom().to_u32().expect("tau denominator too large");
    let s_big = tau.numer();
    let s = s_big.to_u32().expect("tau numerator too large");
    let (bm_lo, bm_hi) = cf.beta(m);
    let (bp_lo, bp_hi) = cf.beta(m - 1);
    // In: max(beta_m)^r < min(beta_{m-1})^s.
    if pow_rat(bm_hi, r) < pow_rat(bp_lo, s) {
        return LevelJudgment::In;
    }
    // Out: min(beta_m)^r >= max(beta_{m-1})^s.
    if pow_rat(bm_lo, r) >= pow_rat(bp_hi, s) {
        return LevelJudgment::Out;
    }
    LevelJudgment::Ambiguous
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct DiophantineReport {
    /// Levels n (0-based) where beta_{n+1} > c * beta_n^{1+tau} is certified.
    pub holds: Vec<usize>,
    pub fails: Vec<usize>,
    pub ambiguous: Vec<usize>,
    pub holds_all: bool,
}

/// Certified per-level test of `beta_{n+1} > c * beta_n^{1+tau}` (rational
/// `c > 0`, rational `tau >= 0`), the lower-bound counterpart of the level
/// set above.
pub fn diophantine_test(
    cf: &ContinuedFraction,
    c: &Rational,
    tau: &Rational,
) -> DiophantineReport {
    assert!(c.is_positive(), "c must be positive");
    assert!(!tau.is_negative(), "tau must be nonnegative");
    let one_plus = Rational::one() + tau;
    let r = one_plus.denom().to_u32().expect("tau denominator too large");
    let s = one_plus.numer().to_u32().expect("tau numerator too large");
    let cr = pow_rat(c, r);

    let mut holds = Vec::new();
    let mut fails = Vec::new();
    let mut ambiguous = Vec::new();
    for n in 0..cf.beta_levels() {
        let (bn_lo, bn_hi) = cf.beta(n);
        let (bn1_lo, bn1_hi) = cf.beta(n + 1);
        // Holds: min(beta_{n+1})^r > c^r * max(beta_n)^s.
        if pow_rat(bn1_lo, r) > &cr * pow_rat(bn_hi, s) {
            holds.push(n);
        } else if pow_rat(bn1_hi, r) <= &cr * pow_rat(bn_lo, s) {
            fails.push(n);
        } else {
            ambiguous.push(n);
        }
    }
    let holds_all = fails.is_empty() && ambiguous.is_empty();
    DiophantineReport {
        holds,
        fails,
        ambiguous,
        holds_all,
    }
}

/// Result of the exhaustive best-return scan.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ClosestReturnReport {
    /// q where `||q alpha||` strictly improved, in scan order (starts at 1).
    pub improvements: Vec<u64>,
    /// Convergent denominators `q_n <= cap` (n >= 1), deduplicated.
    pub expected: Vec<u64>,
    pub cap: u64,
    pub matches: bool,
}

/// Exhaustively scan `q = 1..=cap` computing `||q alpha||` in 192-bit fixed
/// point and record every strict improvement. For an irrational alpha the
/// improvement set must be exactly `{1} ∪ {q_n : n >= 1}`.
///
/// Requires the enclosure to be tighter than the fixed-point grid by a wide
/// margin (guarded by an assertion).
pub fn closest_return_scan(cf: &ContinuedFraction, cap: u64) -> ClosestReturnReport {
    const BITS: u64 = 192;
    if let Some(w) = cf.alpha.width_bits() {
        assert!(
            w > (BITS as i64) - 8,
            "enclosure too wide for fixed-point scan: {w} bits"
        );
    }
    let scale = BigUint::one() << BITS;
    let mask = &scale - BigUint::one();
    let half = BigUint::one() << (BITS - 1);

    // Fixed point of frac(alpha).
    let frac = &cf.alphas[0].0;
    let num = frac.numer().to_biguint().expect("alpha fraction negative");
    let den = frac.denom().to_biguint().unwrap();
    let afix = (num << BITS) / den;

    let mut acc = BigUint::zero();
    let mut best: Option<BigUint> = None;
    let mut improvements = Vec::new();
    for qq in 1..=cap {
        acc = (&acc + &afix) & &mask;
        let dist = if acc > half { &scale - &acc } else { acc.clone() };
        match &best {
            Some(b) if dist >= *b => {}
            _ => {
                improvements.push(qq);
                best = Some(dist);
            }
        }
    }

    let mut expected: Vec<u64> = Vec::new();
    expected.push(1);
    for n in 1..=cf.depth() {
        if let Some(qn) = cf.q_u64(n) {
            if qn <= cap && expected.last() != Some(&qn) {
                expected.push(qn);
            }
        }
    }
    let matches = improvements == expected;
    ClosestReturnReport {
        improvements,
        expected,
        cap,
        matches,
    }
}

// ---------------------------------------------------------------------------
// helpers

fn pow_rat(x: &Rational, e: u32) -> Rational {
    let mut acc = Rational::one();
    let mut base = x.clone();
    let mut e = e;
    while e > 0 {
        if e & 1 == 1 {
            acc *= &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    acc
}

/// floor(-log2(x)) for x > 0, clamped to +/- i64::MAX/2 extremes.
fn neg_log2_floor(x: &Rational) -> i64 {
    if x.is_zero() || x.is_negative() {
        return i64::MAX / 2;
    }
    let nb = x.numer().magnitude().bits() as i64;
    let db = x.denom().magnitude().bits() as i64;
    // 2^(nb-1) <= num < 2^nb, so log2(x) in [nb-db-1, nb-db+1).
    let approx = db - nb;
    // Refine by one-bit comparison: x <= 2^-k iff num * 2^k <= den.
    let k = approx;
    if k >= 0 {
        if x.numer().magnitude() << (k as u64) <= *x.denom().magnitude() {
            k
        } else {
            k - 1
        }
    } else {
        if *x.numer().magnitude() <= x.denom().magnitude() << ((-k) as u64) {
            k
        } else {
            k - 1
        }
    }
}

/// Safe rational -> f64 (num/denom may exceed f64 range; shift first).
pub fn rational_to_f64(x: &Rational) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let neg = x.is_negative();
    let num = x.numer().magnitude();
    let den = x.denom().magnitude();
    let nb = num.bits() as i64;
    let db = den.bits() as i64;
    // Keep both operands under ~2^900.
    let shift_n = (nb - 900).max(0) as u64;
    let shift_d = (db - 900).max(0) as u64;
    let nf = (num >> shift_n).to_f64().unwrap();
    let df = (den >> shift_d).to_f64().unwrap();
    let mut v = nf / df;
    let net = shift_n as i64 - shift_d as i64;
    if net != 0 {
        v *= 2f64.powi(net.clamp(-1060, 1060) as i32);
    }
    if neg {
        -v
    } else {
        v
    }
}

/// Enclosure `[s/2^m, (s+1)/2^m]` of sqrt(d) with `m = bits`.
fn sqrt_enclosure(d: BigUint, bits: u64) -> (Rational, Rational) {
    let shifted = d << (2 * bits);
    let s = shifted.sqrt();
    let den = BigInt::one() << bits;
    let lo = Rational::new(BigInt::from(s.clone()), den.clone());
    let hi = Rational::new(BigInt::from(s + BigUint::one()), den);
    (lo, hi)
}

/// Alternating-series bracket of arctan(1/x) for integer x >= 2: returns
/// (lower, upper) exact rationals with gap below the first omitted term.
fn atan_inv_enclosure(x: u64, terms: usize) -> (Rational, Rational) {
    let xb = BigInt::from(x);
    let x2 = &xb * &xb;
    let mut sum = Rational::zero();
    let mut power = xb.clone(); // x^(2k+1)
    let mut last_partial_hi = Rational::zero();
    let mut last_partial_lo = Rational::zero();
    for k in 0..=terms {
        let term = Rational::new(BigInt::one(), BigInt::from(2 * k as u64 + 1) * &power);
        if k % 2 == 0 {
            sum += &term;
            last_partial_hi = sum.clone();
        } else {
            sum -= &term;
            last_partial_lo = sum.clone();
        }
        power *= &x2;
    }
    (last_partial_lo, last_partial_hi)
}

/// Machin: pi = 16 atan(1/5) - 4 atan(1/239), bracketed exactly.
fn pi_enclosure(bits: u64) -> (Rational, Rational) {
    // Terms: (2k+1) log2(5) >= bits  and  (2k+1) log2(239) >= bits.
    let t5 = (bits as f64 / (2.0 * 2.3219)).ceil() as usize + 2;
    let t239 = (bits as f64 / (2.0 * 7.9009)).ceil() as usize + 2;
    let (a_lo, a_hi) = atan_inv_enclosure(5, t5);
    let (b_lo, b_hi) = atan_inv_enclosure(239, t239);
    let sixteen = Rational::from(BigInt::from(16));
    let four = Rational::from(BigInt::from(4));
    (&sixteen * &a_lo - &four * &b_hi, &sixteen * &a_hi - &four * &b_lo)
}

fn parse_rational(s: &str) -> Result<Rational, String> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let num: BigInt = n.trim().parse().map_err(|e| format!("bad numerator: {e}"))?;
        let den: BigInt = d.trim().parse().map_err(|e| format!("bad denominator: {e}"))?;
        if den.is_zero() {
            return Err("zero denominator".into());
        }
        return Ok(Rational::new(num, den));
    }
    let (int_part, frac_part) = match s.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s, ""),
    };
    let neg = int_part.starts_with('-');
    let int_digits = int_part.trim_start_matches(['-', '+']);
    if !int_digits.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err(format!("not a decimal or p/q rational: {s:?}"));
    }
    let int: BigInt = if int_digits.is_empty() {
        BigInt::zero()
    } else {
        int_digits.parse().map_err(|e| format!("{e}"))?
    };
    let mut v = Rational::from(int);
    if !frac_part.is_empty() {
        let f: BigInt = frac_part.parse().map_err(|e| format!("{e}"))?;
        v += Rational::new(f, BigInt::from(10u32).pow(frac_part.len() as u32));
    }
    Ok(if neg { -v } else { v })
}

impl fmt::Display for ContinuedFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}", self.a[0])?;
        for (i, a) in self.a.iter().enumerate().skip(1) {
            write!(f, "{}{}", if i == 1 { "; " } else { ", " }, a)?;
        }
        write!(f, "]")?;
        if self.is_rational() {
            write!(f, " (rational)")?;
        }
        Ok(())
    }
}

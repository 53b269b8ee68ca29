//! Grid-sampled 1-periodic functions with full trigonometric interpolation.
//!
//! A [`PeriodicFunction`] keeps three mutually consistent views: N uniform
//! samples (N a power of two), the full FFT spectrum, and a pruned list of
//! significant modes used for O(#modes) off-grid evaluation. Differentiation
//! is spectral; sup-norms and total variation are estimated on a 4x-dense
//! grid synthesized by zero-padding.

use num_complex::Complex64;
use num_traits::Zero;
use rustfft::FftPlanner;
use std::sync::Mutex;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PeriodicError {
    #[error("grid length {got} is not a power of two >= 2")]
    NonPowerOfTwoGrid { got: usize },
    #[error("mode {k} does not fit on a grid of {n} samples")]
    ModeOutOfRange { k: i64, n: usize },
    #[error("derivative order {requested} exceeds declared order {declared}")]
    OrderUnavailable { requested: usize, declared: usize },
    #[error("interval [{lo}, {hi}] is degenerate")]
    DegenerateInterval { lo: f64, hi: f64 },
}

// Modes with |c_k| below this fraction of the largest coefficient are left
// out of the point-evaluation list (they still live in `spectrum`).
const MODE_KEEP_REL: f64 = 1e-14;

fn fft_forward(data: &mut [Complex64]) {
    static PLANNER: Mutex<Option<FftPlanner<f64>>> = Mutex::new(None);
    let mut guard = PLANNER.lock().unwrap();
    let planner = guard.get_or_insert_with(FftPlanner::new);
    planner.plan_fft_forward(data.len()).process(data);
}

fn fft_inverse(data: &mut [Complex64]) {
    static PLANNER: Mutex<Option<FftPlanner<f64>>> = Mutex::new(None);
    let mut guard = PLANNER.lock().unwrap();
    let planner = guard.get_or_insert_with(FftPlanner::new);
    planner.plan_fft_inverse(data.len()).process(data);
}

/// Real 1-periodic function sampled on a power-of-two grid, with spectral
/// interpolation between samples.
#[derive(Clone)]
pub struct PeriodicFunction {
    samples: Vec<f64>,
    /// c_k = (1/N) sum_j samples[j] e^{-2pi i jk/N}, index k in FFT order.
    spectrum: Vec<Complex64>,
    /// Significant positive modes (k, c_k), 1 <= k < N/2; used by eval.
    modes: Vec<(i64, Complex64)>,
    mean: f64,
    nyquist: f64,
    /// Total spectral mass dropped from `modes` (eval error bound).
    dropped_mass: f64,
    declared_order: usize,
}

impl std::fmt::Debug for PeriodicFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PeriodicFunction")
            .field("n", &self.samples.len())
            .field("mean", &self.mean)
            .field("active_modes", &self.modes.len())
            .field("declared_order", &self.declared_order)
            .finish()
    }
}

fn check_grid(n: usize) -> Result<(), PeriodicError> {
    if n < 2 || !n.is_power_of_two() {
        return Err(PeriodicError::NonPowerOfTwoGrid { got: n });
    }
    Ok(())
}

impl PeriodicFunction {
    pub fn from_samples(samples: Vec<f64>, declared_order: usize) -> Result<Self, PeriodicError> {
        check_grid(samples.len())?;
        let n = samples.len();
        let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_forward(&mut buf);
        let scale = 1.0 / n as f64;
        for c in &mut buf {
            *c *= scale;
        }
        Ok(Self::assemble(samples, buf, declared_order))
    }

    fn assemble(samples: Vec<f64>, spectrum: Vec<Complex64>, declared_order: usize) -> Self {
        let n = samples.len();
        let half = n / 2;
        let peak = spectrum.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
        let keep = MODE_KEEP_REL * peak.max(1e-300);
        let mut modes = Vec::new();
        let mut dropped = 0.0;
        for k in 1..half {
            let c = spectrum[k];
            if c.norm() > keep {
                modes.push((k as i64, c));
            } else {
                dropped += 2.0 * c.norm();
            }
        }
        PeriodicFunction {
            mean: spectrum[0].re,
            nyquist: spectrum[half].re,
            samples,
            spectrum,
            modes,
            dropped_mass: dropped,
            declared_order,
        }
    }

    pub fn from_fn(
        n: usize,
        declared_order: usize,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self, PeriodicError> {
        check_grid(n)?;
        let samples: Vec<f64> = (0..n).map(|j| f(j as f64 / n as f64)).collect();
        Self::from_samples(samples, declared_order)
    }

    /// Exact constructor from a finite mode list: mean + positive modes
    /// (k, c_k) with the conjugate modes implied. No sampling error.
    pub fn from_modes(
        n: usize,
        declared_order: usize,
        mean: f64,
        modes: &[(i64, Complex64)],
    ) -> Result<Self, PeriodicError> {
        check_grid(n)?;
        let half = (n / 2) as i64;
        let mut spectrum = vec![Complex64::zero(); n];
        spectrum[0] = Complex64::new(mean, 0.0);
        for &(k, c) in modes {
            if k <= 0 || k >= half {
                return Err(PeriodicError::ModeOutOfRange { k, n });
            }
            spectrum[k as usize] += c;
            spectrum[n - k as usize] += c.conj();
        }
        let mut buf = spectrum.clone();
        fft_inverse(&mut buf);
        let samples: Vec<f64> = buf.iter().map(|c| c.re).collect();
        Ok(Self::assemble(samples, spectrum, declared_order))
    }

    pub fn zero(n: usize) -> Self {
        Self::from_samples(vec![0.0; n], usize::MAX).unwrap()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn declared_order(&self) -> usize {
        self.declared_order
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Spectral coefficient c_k (signed index).
    pub fn coeff(&self, k: i64) -> Complex64 {
        let n = self.samples.len() as i64;
        let idx = k.rem_euclid(n) as usize;
        self.spectrum[idx]
    }

    pub fn active_modes(&self) -> &[(i64, Complex64)] {
        &self.modes
    }

    /// Bound on |eval(x) - full interpolant| from the pruned modes.
    pub fn eval_truncation_bound(&self) -> f64 {
        self.dropped_mass
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.deriv_eval(x, 0)
    }

    /// D^s of the interpolant at x. s = 0 is plain evaluation.
    pub fn deriv_eval(&self, x: f64, s: usize) -> f64 {
        let two_pi = std::f64::consts::TAU;
        let mut acc = if s == 0 { self.mean } else { 0.0 };
        for &(k, c) in &self.modes {
            let theta = two_pi * k as f64 * x.fract();
            let (sin, cos) = theta.sin_cos();
            // c * (2 pi i k)^s * e^{i theta}, twice the real part.
            let w = pow_i_omega(two_pi * k as f64, s);
            let cs = c * w;
            acc += 2.0 * (cs.re * cos - cs.im * sin);
        }
        if self.nyquist != 0.0 {
            let half = (self.samples.len() / 2) as f64;
            let theta = two_pi * half * x.fract();
            // Nyquist mode differentiates as a pure cosine.
            let amp = match s % 4 {
                0 => theta.cos(),
                1 => -theta.sin(),
                2 => -theta.cos(),
                _ => theta.sin(),
            };
            acc += self.nyquist * (two_pi * half).powi(s as i32) * amp;
        }
        acc
    }

    /// Jet (D^1 .. D^s) at x.
    pub fn eval_jet(&self, x: f64, s: usize) -> Vec<f64> {
        (1..=s).map(|j| self.deriv_eval(x, j)).collect()
    }

    /// Spectral derivative of order s as a new grid function.
    pub fn derivative(&self, s: usize) -> Self {
        if s == 0 {
            return self.clone();
        }
        let n = self.samples.len();
        let half = n / 2;
        let two_pi = std::f64::consts::TAU;
        let mut spectrum = vec![Complex64::zero(); n];
        for k in 1..half {
            let w = pow_i_omega(two_pi * k as f64, s);
            spectrum[k] = self.spectrum[k] * w;
            spectrum[n - k] = spectrum[k].conj();
        }
        // Odd derivatives of the Nyquist cosine vanish at grid points; the
        // standard convention zeroes that bin for odd s.
        if s % 2 == 0 {
            let w = (two_pi * half as f64).powi(s as i32)
                * if (s / 2) % 2 == 0 { 1.0 } else { -1.0 };
            spectrum[half] = self.spectrum[half] * w;
        }
        let mut buf = spectrum.clone();
        fft_inverse(&mut buf);
        let samples: Vec<f64> = buf.iter().map(|c| c.re).collect();
        Self::assemble(samples, spectrum, self.declared_order.saturating_sub(s))
    }

    /// Samples of D^s on a dense grid (>= `min_len` points, power of two).
    pub fn dense_deriv_samples(&self, s: usize, min_len: usize) -> Vec<f64> {
        let n = self.samples.len();
        let m = min_len.max(n).next_power_of_two();
        let half = n / 2;
        let two_pi = std::f64::consts::TAU;
        let mut buf = vec![Complex64::zero(); m];
        buf[0] = if s == 0 {
            Complex64::new(self.mean, 0.0)
        } else {
            Complex64::zero()
        };
        for k in 1..half {
            let w = pow_i_omega(two_pi * k as f64, s);
            buf[k] = self.spectrum[k] * w;
            buf[m - k] = buf[k].conj();
        }
        if m > n || s % 2 == 0 {
            // On a strictly denser grid the old Nyquist bin is an ordinary
            // mode; keep it (split across +-N/2 when m > n).
            let w = pow_i_omega(two_pi * half as f64, s);
            let c = Complex64::new(self.nyquist, 0.0) * w;
            if m > n {
                buf[half] += c * 0.5;
                buf[m - half] += c.conj() * 0.5;
            } else {
                buf[half] = Complex64::new((c + c.conj()).re * 0.5, 0.0);
            }
        }
        fft_inverse(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.dense_deriv_samples(0, 4 * self.samples.len())
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// max_{0<=s<=r} sup |D^s|.
    pub fn cr_norm(&self, r: usize) -> Result<f64, PeriodicError> {
        if r > self.declared_order {
            return Err(PeriodicError::OrderUnavailable {
                requested: r,
                declared: self.declared_order,
            });
        }
        let mut best = 0.0f64;
        for s in 0..=r {
            let sup = self
                .dense_deriv_samples(s, 4 * self.samples.len())
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            best = best.max(sup);
        }
        Ok(best)
    }

    /// Interval C^r norm: grid points inside [lo, hi] plus a uniform probe
    /// set (intervals here are usually far narrower than the grid step).
    pub fn cr_norm_on_interval(&self, lo: f64, hi: f64, r: usize) -> Result<f64, PeriodicError> {
        if !(hi > lo) {
            return Err(PeriodicError::DegenerateInterval { lo, hi });
        }
        if r > self.declared_order {
            return Err(PeriodicError::OrderUnavailable {
                requested: r,
                declared: self.declared_order,
            });
        }
        let n = self.samples.len() as f64;
        let mut points: Vec<f64> = Vec::new();
        let probes = 64;
        for i in 0..=probes {
            points.push(lo + (hi - lo) * i as f64 / probes as f64);
        }
        let mut j = (lo * n).ceil() as i64;
        while (j as f64) / n <= hi {
            points.push(j as f64 / n);
            j += 1;
        }
        let mut best = 0.0f64;
        for s in 0..=r {
            for &x in &points {
                best = best.max(self.deriv_eval(x, s).abs());
            }
        }
        Ok(best)
    }

    /// Integral of |D phi| by dense-grid quadrature. For declared order 0
    /// falls back to the sample-difference sum (a lower bound for rough
    /// functions).
    pub fn total_variation(&self) -> f64 {
        if self.declared_order == 0 {
            return self.grid_variation();
        }
        let dense = self.dense_deriv_samples(1, (4 * self.samples.len()).max(16384));
        dense.iter().map(|v| v.abs()).sum::<f64>() / dense.len() as f64
    }

    /// Sum of |successive sample differences| around the circle.
    pub fn grid_variation(&self) -> f64 {
        let n = self.samples.len();
        (0..n)
            .map(|j| (self.samples[(j + 1) % n] - self.samples[j]).abs())
            .sum()
    }

    pub fn resample(&self, m: usize) -> Result<Self, PeriodicError> {
        check_grid(m)?;
        // Synthesis never shrinks the grid, so downsampling decimates the
        // dense samples; exact as long as the content fits the target band.
        let samples = self.dense_deriv_samples(0, m);
        if samples.len() == m {
            Self::from_samples(samples, self.declared_order)
        } else {
            let step = samples.len() / m;
            Self::from_samples(
                (0..m).map(|j| samples[j * step]).collect(),
                self.declared_order,
            )
        }
    }

    fn zip_with(&self, other: &Self, op: impl Fn(f64, f64) -> f64) -> Self {
        let n = self.samples.len().max(other.samples.len());
        let a = if self.samples.len() == n {
            self.clone()
        } else {
            self.resample(n).unwrap()
        };
        let b = if other.samples.len() == n {
            other.clone()
        } else {
            other.resample(n).unwrap()
        };
        let samples: Vec<f64> = a
            .samples
            .iter()
            .zip(&b.samples)
            .map(|(&x, &y)| op(x, y))
            .collect();
        Self::from_samples(samples, a.declared_order.min(b.declared_order)).unwrap()
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |x, y| x + y)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |x, y| x - y)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip_with(other, |x, y| x * y)
    }

    pub fn scale(&self, c: f64) -> Self {
        let samples: Vec<f64> = self.samples.iter().map(|&v| c * v).collect();
        Self::from_samples(samples, self.declared_order).unwrap()
    }

    pub fn add_const(&self, c: f64) -> Self {
        let samples: Vec<f64> = self.samples.iter().map(|&v| v + c).collect();
        Self::from_samples(samples, self.declared_order).unwrap()
    }

    /// Round-trip check: max |inverse-FFT(spectrum) - samples|.
    pub fn roundtrip_residual(&self) -> f64 {
        let mut buf = self.spectrum.clone();
        fft_inverse(&mut buf);
        buf.iter()
            .zip(&self.samples)
            .map(|(c, &s)| (c.re - s).abs().max(c.im.abs()))
            .fold(0.0, f64::max)
    }

    /// Max |interpolant - reference| over off-grid midpoints; an estimate of
    /// how faithfully the grid represents `reference`.
    pub fn interpolation_residual(&self, reference: impl Fn(f64) -> f64) -> f64 {
        let n = self.samples.len();
        let mut worst = 0.0f64;
        for j in 0..n {
            let x = (j as f64 + 0.5) / n as f64;
            worst = worst.max((self.eval(x) - reference(x)).abs());
        }
        worst
    }
}

/// (i w)^s as a complex factor.
fn pow_i_omega(w: f64, s: usize) -> Complex64 {
    let mag = w.powi(s as i32);
    match s % 4 {
        0 => Complex64::new(mag, 0.0),
        1 => Complex64::new(0.0, mag),
        2 => Complex64::new(-mag, 0.0),
        _ => Complex64::new(0.0, -mag),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn sin1(n: usize) -> PeriodicFunction {
        PeriodicFunction::from_fn(n, 32, |x| (TAU * x).sin()).unwrap()
    }

    #[test]
    fn rejects_bad_grid() {
        assert!(matches!(
            PeriodicFunction::from_samples(vec![0.0; 48], 4),
            Err(PeriodicError::NonPowerOfTwoGrid { got: 48 })
        ));
    }

    #[test]
    fn eval_reproduces_samples_and_interpolates() {
        let f = sin1(256);
        for j in [0usize, 17, 100, 255] {
            let x = j as f64 / 256.0;
            assert!((f.eval(x) - f.samples()[j]).abs() < 1e-13);
        }
        for &x in &[0.123, 0.456, 0.789, 0.999] {
            assert!((f.eval(x) - (TAU * x).sin()).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn spectral_derivatives_match_closed_form() {
        let f = sin1(256);
        for &x in &[0.1, 0.37, 0.92] {
            assert!((f.deriv_eval(x, 1) - TAU * (TAU * x).cos()).abs() < 1e-10);
            assert!((f.deriv_eval(x, 2) + TAU * TAU * (TAU * x).sin()).abs() < 1e-9);
            assert!((f.deriv_eval(x, 3) + TAU.powi(3) * (TAU * x).cos()).abs() < 1e-8);
        }
        let d = f.derivative(1);
        assert!((d.eval(0.25) - TAU * (TAU * 0.25).cos()).abs() < 1e-10);
    }

    #[test]
    fn from_modes_is_exact_for_trig_polys() {
        // sin(2 pi x) has c_1 = -i/2.
        let f = PeriodicFunction::from_modes(
            64,
            32,
            0.5,
            &[(1, Complex64::new(0.0, -0.5))],
        )
        .unwrap();
        for &x in &[0.0, 0.2, 0.61, 0.93] {
            assert!((f.eval(x) - (0.5 + (TAU * x).sin())).abs() < 1e-14);
        }
        assert_eq!(f.active_modes().len(), 1);
        assert!((f.mean() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn norms_of_sine() {
        let f = sin1(512);
        assert!((f.sup_norm() - 1.0).abs() < 1e-9);
        assert!((f.cr_norm(1).unwrap() - TAU).abs() < 1e-8);
        assert!((f.cr_norm(2).unwrap() - TAU * TAU).abs() < 1e-6);
        // Var(sin 2 pi x) = 4.
        assert!((f.total_variation() - 4.0).abs() < 1e-6);
    }

    #[test]
    fn interval_norm_sees_narrow_windows() {
        let f = sin1(64);
        // A window much narrower than the grid step around x = 0.25 where
        // sin peaks; plain grid points would miss it.
        let sup = f.cr_norm_on_interval(0.2499, 0.2501, 0).unwrap();
        assert!((sup - 1.0).abs() < 1e-6, "sup={sup}");
    }

    #[test]
    fn parseval_consistency() {
        let f = PeriodicFunction::from_fn(256, 8, |x| {
            0.3 + (TAU * x).sin() + 0.2 * (3.0 * TAU * x).cos()
        })
        .unwrap();
        let energy_time: f64 =
            f.samples().iter().map(|v| v * v).sum::<f64>() / f.len() as f64;
        let energy_freq: f64 = f
            .coeff(0)
            .norm_sqr()
            + (1..f.len() as i64 / 2)
                .map(|k| 2.0 * f.coeff(k).norm_sqr())
                .sum::<f64>()
            + f.coeff(f.len() as i64 / 2).norm_sqr();
        assert!((energy_time - energy_freq).abs() < 1e-12);
    }

    #[test]
    fn resample_is_exact_for_bandlimited() {
        let f = sin1(64);
        let up = f.resample(256).unwrap();
        for &x in &[0.11, 0.52, 0.87] {
            assert!((up.eval(x) - f.eval(x)).abs() < 1e-12);
        }
        let down = up.resample(64).unwrap();
        for (a, b) in down.samples().iter().zip(f.samples()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn arithmetic_ops() {
        let a = sin1(128);
        let b = PeriodicFunction::from_fn(128, 32, |x| (TAU * x).cos()).unwrap();
        let s = a.add(&b);
        assert!((s.eval(0.3) - ((TAU * 0.3).sin() + (TAU * 0.3).cos())).abs() < 1e-12);
        let d = a.sub(&a);
        assert!(d.sup_norm() < 1e-13);
        let p = a.mul(&b);
        // sin cos = sin(2.)/2
        assert!((p.eval(0.2) - 0.5 * (2.0 * TAU * 0.2).sin()).abs() < 1e-12);
        let sc = a.scale(-2.0).add_const(1.0);
        assert!((sc.eval(0.4) - (1.0 - 2.0 * (TAU * 0.4).sin())).abs() < 1e-12);
    }

    #[test]
    fn mixed_grid_ops_resample() {
        let a = sin1(64);
        let b = PeriodicFunction::from_fn(256, 32, |x| (TAU * x).cos()).unwrap();
        let s = a.add(&b);
        assert_eq!(s.len(), 256);
        assert!((s.eval(0.7) - ((TAU * 0.7).sin() + (TAU * 0.7).cos())).abs() < 1e-12);
    }

    #[test]
    fn roundtrip_and_truncation_reporting() {
        let f = PeriodicFunction::from_fn(512, 8, |x| (TAU * x).sin().exp()).unwrap();
        assert!(f.roundtrip_residual() < 1e-12);
        assert!(f.eval_truncation_bound() < 1e-10);
        assert!(f.interpolation_residual(|x| (TAU * x).sin().exp()) < 1e-11);
    }

    #[test]
    fn order_gating() {
        let f = PeriodicFunction::from_fn(64, 2, |x| (TAU * x).sin()).unwrap();
        assert!(f.cr_norm(2).is_ok());
        assert!(matches!(
            f.cr_norm(3),
            Err(PeriodicError::OrderUnavailable { requested: 3, declared: 2 })
        ));
        assert!(matches!(
            f.cr_norm_on_interval(0.1, 0.1, 0),
            Err(PeriodicError::DegenerateInterval { .. })
        ));
    }

    #[test]
    fn grid_variation_lower_bound_for_rough_input() {
        // Square-ish wave declared C^0: grid variation should be ~2 jumps.
        let f = PeriodicFunction::from_fn(256, 0, |x| if x < 0.5 { 0.0 } else { 1.0 }).unwrap();
        let v = f.total_variation();
        assert!((v - 2.0).abs() < 1e-12, "v={v}");
    }
}

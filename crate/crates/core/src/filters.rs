//! Discrete filters: the Butterworth state-variable filter that yields
//! band-limited signals together with their derivatives, and the lead-lag
//! element that drives the adaptive threshold.
//!
//! Both are discretized with the bilinear (trapezoidal) transform. The
//! Butterworth prototype is pre-warped so the digital -3 dB point lands
//! exactly on `omega_c`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::{count, lit, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ButterworthSpec<T> {
    pub order: usize,
    pub omega_c: T,
    pub dt: T,
}

impl<T: Scalar> ButterworthSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if self.order < 2 {
            return Err(Error::Design(format!("order must be >= 2, got {}", self.order)));
        }
        if !(self.omega_c.is_finite() && self.omega_c > T::zero()) {
            return Err(Error::Design(format!("omegaC must be > 0, got {}", self.omega_c)));
        }
        if !(self.dt.is_finite() && self.dt > T::zero()) {
            return Err(Error::Design(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.omega_c * self.dt < lit::<T>(std::f64::consts::PI)) {
            return Err(Error::Design(format!(
                "omegaC * dt = {} is at or above Nyquist (pi)",
                self.omega_c * self.dt
            )));
        }
        Ok(())
    }

    /// Analog cut-off that the bilinear transform maps onto `omega_c`.
    pub fn prewarped(&self) -> T {
        let two = lit::<T>(2.0);
        two / self.dt * (self.omega_c * self.dt / two).tan()
    }
}

/// Normalized Butterworth polynomial coefficients, lowest power first.
pub fn butterworth_polynomial<T: Scalar>(order: usize) -> Vec<T> {
    let mut poly = vec![T::one()];
    let n = count::<T>(order);
    for k in 1..=order / 2 {
        let theta = lit::<T>((2 * k - 1) as f64) * lit::<T>(std::f64::consts::PI) / (lit::<T>(2.0) * n);
        poly = poly_mul(&poly, &[T::one(), lit::<T>(2.0) * theta.sin(), T::one()]);
    }
    if order % 2 == 1 {
        poly = poly_mul(&poly, &[T::one(), T::one()]);
    }
    poly
}

fn poly_mul<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = out[i + j] + x * y;
        }
    }
    out
}

fn poly_pow<T: Scalar>(base: &[T], e: usize) -> Vec<T> {
    (0..e).fold(vec![T::one()], |acc, _| poly_mul(&acc, base))
}

/// Transfer function in `z^-1`: `H = Σ b_k z^-k / Σ a_k z^-k` with `a[0] = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DigitalFilterCoeffs<T> {
    pub b: Vec<T>,
    pub a: Vec<T>,
}

impl<T: Scalar> DigitalFilterCoeffs<T> {
    pub fn dc_gain(&self) -> T {
        let sb = self.b.iter().fold(T::zero(), |s, &v| s + v);
        let sa = self.a.iter().fold(T::zero(), |s, &v| s + v);
        sb / sa
    }

    fn normalized(mut self) -> Self {
        let a0 = self.a[0];
        self.b.iter_mut().for_each(|v| *v = *v / a0);
        self.a.iter_mut().for_each(|v| *v = *v / a0);
        self
    }
}

/// Digital Butterworth low-pass by the pre-warped bilinear transform.
pub fn design_butterworth<T: Scalar>(spec: &ButterworthSpec<T>) -> Result<DigitalFilterCoeffs<T>> {
    spec.validate()?;
    let n = spec.order;
    let wa = spec.prewarped();
    let k = lit::<T>(2.0) / spec.dt;
    let proto = butterworth_polynomial::<T>(n);
    let minus = [T::one(), -T::one()];
    let plus = [T::one(), T::one()];
    // Σ p_j wa^(n-j) s^j with s = k (1 - z^-1)/(1 + z^-1), cleared of (1 + z^-1)^n.
    let mut a = vec![T::zero(); n + 1];
    for (j, &p) in proto.iter().enumerate() {
        let coeff = p * wa.powi((n - j) as i32) * k.powi(j as i32);
        let term = poly_mul(&poly_pow(&minus, j), &poly_pow(&plus, n - j));
        for (acc, v) in a.iter_mut().zip(term) {
            *acc = *acc + coeff * v;
        }
    }
    let gain = wa.powi(n as i32);
    let b = poly_pow(&plus, n).into_iter().map(|v| v * gain).collect();
    Ok(DigitalFilterCoeffs { b, a }.normalized())
}

/// General IIR filter in transposed direct form II.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IirFilter<T> {
    coeffs: DigitalFilterCoeffs<T>,
    state: Vec<T>,
    index: u64,
}

impl<T: Scalar> IirFilter<T> {
    pub fn new(coeffs: DigitalFilterCoeffs<T>) -> Self {
        let n = coeffs.a.len().max(coeffs.b.len());
        let mut coeffs = coeffs;
        coeffs.a.resize(n, T::zero());
        coeffs.b.resize(n, T::zero());
        IirFilter {
            state: vec![T::zero(); n - 1],
            coeffs,
            index: 0,
        }
    }

    pub fn coeffs(&self) -> &DigitalFilterCoeffs<T> {
        &self.coeffs
    }

    /// Sets the memory to the steady state for a constant input `u0`.
    pub fn reset(&mut self, u0: T) {
        let y0 = u0 * self.coeffs.dc_gain();
        self.reset_with_output(u0, y0);
    }

    fn reset_with_output(&mut self, u0: T, y0: T) {
        let DigitalFilterCoeffs { b, a } = &self.coeffs;
        let m = self.state.len();
        let mut acc = T::zero();
        for j in (0..m).rev() {
            acc = b[j + 1] * u0 - a[j + 1] * y0 + acc;
            self.state[j] = acc;
        }
        self.index = 0;
    }

    pub fn step(&mut self, u: T) -> Result<T> {
        if !u.is_finite() {
            return Err(Error::NonFinite { index: self.index });
        }
        let DigitalFilterCoeffs { b, a } = &self.coeffs;
        let m = self.state.len();
        let y = b[0] * u + self.state.first().copied().unwrap_or_else(T::zero);
        for j in 0..m {
            let next = if j + 1 < m { self.state[j + 1] } else { T::zero() };
            self.state[j] = b[j + 1] * u - a[j + 1] * y + next;
        }
        self.index += 1;
        Ok(y)
    }
}

/// Output of one state-variable filter step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Filtered<T> {
    /// Low-pass filtered sample.
    pub value: T,
    /// Band-limited first derivative.
    pub derivative: T,
}

/// Butterworth low-pass realized in controllable canonical form, so the
/// state holds the filtered signal and its first `order - 1` derivatives.
///
/// The continuous structure is discretized with the trapezoidal rule, which
/// is the bilinear transform of the same transfer function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVariableFilter<T> {
    spec: ButterworthSpec<T>,
    ad: Vec<Vec<T>>,
    bd: Vec<T>,
    state: Vec<T>,
    prev_input: T,
    index: u64,
}

impl<T: Scalar> StateVariableFilter<T> {
    pub fn new(spec: ButterworthSpec<T>) -> Result<Self> {
        spec.validate()?;
        let n = spec.order;
        let wa = spec.prewarped();
        let proto = butterworth_polynomial::<T>(n);
        // y^(n) = wa^n (x - y) - Σ_{1 <= j < n} p_j wa^(n-j) y^(j)
        let mut a = vec![vec![T::zero(); n]; n];
        for i in 0..n - 1 {
            a[i][i + 1] = T::one();
        }
        for j in 0..n {
            a[n - 1][j] = -proto[j] * wa.powi((n - j) as i32);
        }
        let mut b = vec![T::zero(); n];
        b[n - 1] = wa.powi(n as i32);

        let half = spec.dt / lit(2.0);
        let eye = |i: usize, j: usize| if i == j { T::one() } else { T::zero() };
        let lhs: Vec<Vec<T>> = (0..n)
            .map(|i| (0..n).map(|j| eye(i, j) - a[i][j] * half).collect())
            .collect();
        let rhs: Vec<Vec<T>> = (0..n)
            .map(|i| (0..n).map(|j| eye(i, j) + a[i][j] * half).collect())
            .collect();
        let inv = linalg::invert(&lhs).map_err(|e| Error::Design(e.to_string()))?;
        let ad = linalg::mat_mul(&inv, &rhs);
        let bd = linalg::mat_vec(&inv, &b)
            .into_iter()
            .map(|v| v * spec.dt)
            .collect();
        Ok(StateVariableFilter {
            spec,
            ad,
            bd,
            state: vec![T::zero(); n],
            prev_input: T::zero(),
            index: 0,
        })
    }

    pub fn spec(&self) -> &ButterworthSpec<T> {
        &self.spec
    }

    /// DC initialization: output equals `x0`, all derivatives zero.
    pub fn reset(&mut self, x0: T) {
        self.state.iter_mut().for_each(|v| *v = T::zero());
        self.state[0] = x0;
        self.prev_input = x0;
        self.index = 0;
    }

    pub fn step(&mut self, x: T) -> Result<Filtered<T>> {
        if !x.is_finite() {
            return Err(Error::NonFinite { index: self.index });
        }
        let drive = (self.prev_input + x) / lit(2.0);
        let mut next = linalg::mat_vec(&self.ad, &self.state);
        for (v, &b) in next.iter_mut().zip(&self.bd) {
            *v = *v + b * drive;
        }
        self.state = next;
        self.prev_input = x;
        self.index += 1;
        Ok(self.output())
    }

    pub fn output(&self) -> Filtered<T> {
        Filtered {
            value: self.state[0],
            derivative: self.state[1],
        }
    }

    /// Filtered signal followed by its derivatives up to order `n - 1`.
    pub fn derivatives(&self) -> &[T] {
        &self.state
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LeadLagSpec<T> {
    #[serde(rename = "tD")]
    pub t_d: T,
    pub t1: T,
    pub t2: T,
}

impl<T: Scalar> Default for LeadLagSpec<T> {
    fn default() -> Self {
        LeadLagSpec {
            t_d: lit(1.0),
            t1: lit(2.0),
            t2: lit(2.0),
        }
    }
}

impl<T: Scalar> LeadLagSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.t1 > T::zero() && self.t2 > T::zero() && self.t1.is_finite() && self.t2.is_finite()) {
            return Err(Error::config("leadLag", "t1 and t2 must be finite and > 0"));
        }
        if !(self.t_d >= T::zero() && self.t_d.is_finite()) {
            return Err(Error::config("leadLag.tD", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Bilinear discretization of `tD s / ((1 + t1 s)(1 + t2 s))`.
    pub fn discretize(&self, dt: T) -> Result<DigitalFilterCoeffs<T>> {
        self.validate()?;
        let k = lit::<T>(2.0) / dt;
        let one = T::one();
        let f1 = [one + self.t1 * k, one - self.t1 * k];
        let f2 = [one + self.t2 * k, one - self.t2 * k];
        let a = poly_mul(&f1, &f2);
        let g = self.t_d * k;
        let b = vec![g, T::zero(), -g];
        Ok(DigitalFilterCoeffs { b, a }.normalized())
    }

    /// Peak of the continuous-time unit-step response.
    pub fn step_peak(&self) -> T {
        let (t1, t2) = (self.t1, self.t2);
        if (t1 - t2).abs() <= lit::<T>(1e-12) * t1.max(t2) {
            // y = tD t / T^2 e^(-t/T), peak at t = T.
            self.t_d / (t1 * T::one().exp())
        } else {
            // y = tD / (t1 - t2) (e^(-t/t1) - e^(-t/t2))
            let tp = t1 * t2 / (t1 - t2) * (t1 / t2).ln();
            self.t_d / (t1 - t2) * ((-tp / t1).exp() - (-tp / t2).exp())
        }
    }
}

/// Lead-lag element with zero DC gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadLagFilter<T> {
    spec: LeadLagSpec<T>,
    inner: IirFilter<T>,
}

impl<T: Scalar> LeadLagFilter<T> {
    pub fn new(spec: LeadLagSpec<T>, dt: T) -> Result<Self> {
        let coeffs = spec.discretize(dt)?;
        Ok(LeadLagFilter {
            spec,
            inner: IirFilter::new(coeffs),
        })
    }

    pub fn spec(&self) -> &LeadLagSpec<T> {
        &self.spec
    }

    pub fn coeffs(&self) -> &DigitalFilterCoeffs<T> {
        self.inner.coeffs()
    }

    /// Steady state for a constant input; the next output is exactly zero.
    pub fn reset(&mut self, u0: T) {
        self.inner.reset_with_output(u0, T::zero());
    }

    pub fn step(&mut self, u: T) -> Result<T> {
        self.inner.step(u)
    }
}

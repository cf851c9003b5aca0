//! Three-tank hydraulic process: linear state equations, fixed-step RK4
//! integration, additive fault injection and Gaussian sensor noise.
//!
//! Tank pressures (efforts) `de1..de3` are the state. The coupling flows are
//! algebraic: `df1 = (de1 - de2) / r12` and `df2 = (de3 - de2) / r23`. The
//! balances are implemented exactly as the redundancy relations are written,
//! including the sign with which `df2` enters the tank-2 balance, so that the
//! fault-free residuals vanish.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::{lit, Scalar};

/// The seven measured process variables, in canonical column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "MSf1", alias = "Msf1", alias = "msf1")]
    Msf1,
    #[serde(rename = "MSf2", alias = "Msf2", alias = "msf2")]
    Msf2,
    #[serde(rename = "De1", alias = "de1")]
    De1,
    #[serde(rename = "De2", alias = "de2")]
    De2,
    #[serde(rename = "De3", alias = "de3")]
    De3,
    #[serde(rename = "Df1", alias = "df1")]
    Df1,
    #[serde(rename = "Df2", alias = "df2")]
    Df2,
}

impl Channel {
    pub const ALL: [Channel; 7] = [
        Channel::Msf1,
        Channel::Msf2,
        Channel::De1,
        Channel::De2,
        Channel::De3,
        Channel::Df1,
        Channel::Df2,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Msf1 => "MSf1",
            Channel::Msf2 => "MSf2",
            Channel::De1 => "De1",
            Channel::De2 => "De2",
            Channel::De3 => "De3",
            Channel::Df1 => "Df1",
            Channel::Df2 => "Df2",
        }
    }

    pub fn is_input(self) -> bool {
        matches!(self, Channel::Msf1 | Channel::Msf2)
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Channel::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config("channel", format!("unknown channel `{s}`")))
    }
}

/// Hydraulic capacitances, valve resistances and the integration step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PlantParams<T> {
    pub c1: T,
    pub c2: T,
    pub c3: T,
    pub r1: T,
    pub r2: T,
    pub r3: T,
    pub r12: T,
    pub r23: T,
    pub dt: T,
}

impl<T: Scalar> Default for PlantParams<T> {
    fn default() -> Self {
        PlantParams {
            c1: lit(1.5e-2),
            c2: lit(1.5e-2),
            c3: lit(1.5e-2),
            r1: lit(2000.0),
            r2: lit(2000.0),
            r3: lit(2000.0),
            r12: lit(1500.0),
            r23: lit(1500.0),
            dt: lit(0.05),
        }
    }
}

impl<T: Scalar> PlantParams<T> {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
            ("r1", self.r1),
            ("r2", self.r2),
            ("r3", self.r3),
            ("r12", self.r12),
            ("r23", self.r23),
            ("dt", self.dt),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v > T::zero()) {
                return Err(Error::config(
                    format!("params.{name}"),
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        let tau = self.min_rc();
        if self.dt > tau * lit(0.1) {
            return Err(Error::config(
                "params.dt",
                format!("dt = {} exceeds 0.1 x smallest RC time constant ({tau})", self.dt),
            ));
        }
        Ok(())
    }

    /// Smallest RC product among the tank/valve pairs.
    pub fn min_rc(&self) -> T {
        [
            self.r1 * self.c1,
            self.r2 * self.c2,
            self.r3 * self.c3,
            self.r12 * self.c1,
            self.r12 * self.c2,
            self.r23 * self.c2,
            self.r23 * self.c3,
        ]
        .into_iter()
        .fold(T::infinity(), T::min)
    }

    /// Coupling flows `(df1, df2)` implied by the tank pressures.
    pub fn flows(&self, de: [T; 3]) -> (T, T) {
        ((de[0] - de[1]) / self.r12, (de[2] - de[1]) / self.r23)
    }

    /// Time derivative of the pressures for the given inputs.
    pub fn derivative(&self, de: [T; 3], u: Inputs<T>) -> [T; 3] {
        let (df1, df2) = self.flows(de);
        [
            (u.msf1 - de[0] / self.r1 - df1) / self.c1,
            (df1 - de[1] / self.r2 - df2) / self.c2,
            (u.msf2 - df2 - de[2] / self.r3) / self.c3,
        ]
    }

    /// State matrix `A` of `de' = A de + B u`.
    pub fn system_matrix(&self) -> [[T; 3]; 3] {
        let g12 = self.r12.recip();
        let g23 = self.r23.recip();
        [
            [
                (-self.r1.recip() - g12) / self.c1,
                g12 / self.c1,
                T::zero(),
            ],
            [
                g12 / self.c2,
                (-g12 - self.r2.recip() + g23) / self.c2,
                -g23 / self.c2,
            ],
            [T::zero(), g23 / self.c3, (-g23 - self.r3.recip()) / self.c3],
        ]
    }

    /// Eigenvalues of the state matrix as `(re, im)` pairs.
    pub fn eigenvalues(&self) -> Vec<(f64, f64)> {
        let a = self.system_matrix();
        let m = nalgebra::Matrix3::from_fn(|i, j| a[i][j].as_f64());
        m.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect()
    }

    /// Largest eigenvalue magnitude (rad/s): the fastest plant mode.
    pub fn fastest_eigenfrequency(&self) -> T {
        lit(self
            .eigenvalues()
            .into_iter()
            .map(|(re, im)| re.hypot(im))
            .fold(0.0, f64::max))
    }

    /// Slowest plant time constant (s), from the eigenvalue with smallest |Re|.
    pub fn slowest_time_constant(&self) -> T {
        let slowest = self
            .eigenvalues()
            .into_iter()
            .map(|(re, _)| re.abs())
            .fold(f64::INFINITY, f64::min);
        lit(1.0 / slowest)
    }
}

/// The two volumetric inflows (m³/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Inputs<T> {
    pub msf1: T,
    pub msf2: T,
}

impl<T: Scalar> Inputs<T> {
    pub fn new(msf1: T, msf2: T) -> Self {
        Inputs { msf1, msf2 }
    }

    fn lerp(self, other: Self, w: T) -> Self {
        Inputs {
            msf1: self.msf1 + (other.msf1 - self.msf1) * w,
            msf2: self.msf2 + (other.msf2 - self.msf2) * w,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlantState<T> {
    pub de1: T,
    pub de2: T,
    pub de3: T,
    pub t: T,
}

impl<T: Scalar> PlantState<T> {
    pub fn efforts(&self) -> [T; 3] {
        [self.de1, self.de2, self.de3]
    }

    fn from_efforts(de: [T; 3], t: T) -> Self {
        PlantState {
            de1: de[0],
            de2: de[1],
            de3: de[2],
            t,
        }
    }

    fn check_finite(&self) -> Result<()> {
        for (name, v) in [
            ("de1", self.de1),
            ("de2", self.de2),
            ("de3", self.de3),
            ("t", self.t),
        ] {
            if !v.is_finite() {
                return Err(Error::Divergence {
                    field: name,
                    t: self.t.as_f64(),
                });
            }
        }
        Ok(())
    }
}

fn axpy<T: Scalar>(x: [T; 3], h: T, k: [T; 3]) -> [T; 3] {
    [x[0] + h * k[0], x[1] + h * k[1], x[2] + h * k[2]]
}

/// Advances the state by `dt` with the inputs held constant.
pub fn step<T: Scalar>(state: &PlantState<T>, params: &PlantParams<T>, msf1: T, msf2: T) -> Result<PlantState<T>> {
    let u = Inputs::new(msf1, msf2);
    step_ramped(state, params, u, u)
}

/// Advances the state by `dt` with the inputs slewing linearly from `from`
/// (at the start of the step) to `to` (at its end).
///
/// Classical fourth-order Runge-Kutta; the midpoint stages see the average input.
pub fn step_ramped<T: Scalar>(
    state: &PlantState<T>,
    params: &PlantParams<T>,
    from: Inputs<T>,
    to: Inputs<T>,
) -> Result<PlantState<T>> {
    state.check_finite()?;
    let h = params.dt;
    let half = lit::<T>(0.5);
    let two = lit::<T>(2.0);
    let six = lit::<T>(6.0);
    let mid = from.lerp(to, half);
    let x = state.efforts();
    let k1 = params.derivative(x, from);
    let k2 = params.derivative(axpy(x, h * half, k1), mid);
    let k3 = params.derivative(axpy(x, h * half, k2), mid);
    let k4 = params.derivative(axpy(x, h, k3), to);
    let mut next = [T::zero(); 3];
    for i in 0..3 {
        next[i] = x[i] + h / six * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
    }
    let out = PlantState::from_efforts(next, state.t + h);
    out.check_finite()?;
    Ok(out)
}

/// Steady state for constant inputs: solves `A de = -B u`.
pub fn equilibrium<T: Scalar>(params: &PlantParams<T>, msf1: T, msf2: T) -> Result<PlantState<T>> {
    params.validate()?;
    let a = params.system_matrix();
    let a: Vec<Vec<T>> = a.iter().map(|row| row.to_vec()).collect();
    let b = vec![-msf1 / params.c1, T::zero(), -msf2 / params.c3];
    let x = linalg::solve(a, b).map_err(|e| match e {
        Error::Singular(msg) => Error::Singular(format!("steady-state system: {msg}")),
        other => other,
    })?;
    Ok(PlantState::from_efforts([x[0], x[1], x[2]], T::zero()))
}

/// One segment of a piecewise input: from `t` on, the input is
/// `value + slope · (t_now - t)` until the next segment starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, bound = "T: Scalar")]
pub struct ProfileStep<T> {
    pub t: T,
    pub value: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<T>,
}

/// Piecewise description of one input; zero before the first segment.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct ChannelProfile<T> {
    pub steps: Vec<ProfileStep<T>>,
}

impl<T: Scalar> ChannelProfile<T> {
    pub fn constant(value: T) -> Self {
        ChannelProfile {
            steps: vec![ProfileStep {
                t: T::zero(),
                value,
                slope: None,
            }],
        }
    }

    pub fn value(&self, t: T) -> T {
        match self.steps.iter().rev().find(|s| s.t <= t) {
            Some(s) => s.value + s.slope.unwrap_or_else(T::zero) * (t - s.t),
            None => T::zero(),
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        for (i, s) in self.steps.iter().enumerate() {
            let slope_ok = s.slope.is_none_or(|v| v.is_finite());
            if !(s.t.is_finite() && s.value.is_finite() && slope_ok) {
                return Err(Error::config(
                    format!("inputProfile.{name}.steps[{i}]"),
                    "values must be finite",
                ));
            }
            if i > 0 && !(s.t > self.steps[i - 1].t) {
                return Err(Error::config(
                    format!("inputProfile.{name}.steps[{i}].t"),
                    "step times must be strictly increasing",
                ));
            }
        }
        Ok(())
    }

    /// Times after `t = 0` at which the input stops being constant.
    fn change_times(&self) -> Vec<T> {
        let mut out = Vec::new();
        for s in &self.steps {
            if s.t > T::zero() {
                out.push(s.t);
            } else if s.slope.is_some_and(|v| v != T::zero()) {
                out.push(T::zero());
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct InputProfile<T> {
    pub msf1: ChannelProfile<T>,
    pub msf2: ChannelProfile<T>,
}

impl<T: Scalar> InputProfile<T> {
    pub fn constant(msf1: T, msf2: T) -> Self {
        InputProfile {
            msf1: ChannelProfile::constant(msf1),
            msf2: ChannelProfile::constant(msf2),
        }
    }

    pub fn at(&self, t: T) -> Inputs<T> {
        Inputs::new(self.msf1.value(t), self.msf2.value(t))
    }

    pub fn validate(&self) -> Result<()> {
        self.msf1.validate("msf1")?;
        self.msf2.validate("msf2")
    }

    /// Earliest time at which either input changes, if any.
    pub fn first_change(&self) -> Option<T> {
        self.msf1
            .change_times()
            .into_iter()
            .chain(self.msf2.change_times())
            .reduce(T::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", deny_unknown_fields)]
pub enum FaultProfile<T> {
    Step,
    Ramp { slope: T },
}

/// How an input fault acts: on what the plant receives (and is then measured),
/// or on the measurement only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum FaultSemantics {
    Actuator,
    Sensor,
}

/// Additive fault on one process variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, bound = "T: Scalar")]
pub struct FaultSpec<T> {
    pub target: Channel,
    pub onset: T,
    #[serde(default = "T::zero")]
    pub magnitude: T,
    #[serde(default = "default_fault_profile")]
    pub profile: FaultProfile<T>,
    /// Defaults to actuator for inputs; sensors only accept `sensor`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantics: Option<FaultSemantics>,
}

fn default_fault_profile<T>() -> FaultProfile<T> {
    FaultProfile::Step
}

impl<T: Scalar> FaultSpec<T> {
    pub fn step(target: Channel, onset: T, magnitude: T) -> Self {
        FaultSpec {
            target,
            onset,
            magnitude,
            profile: FaultProfile::Step,
            semantics: None,
        }
    }

    pub fn with_semantics(mut self, semantics: FaultSemantics) -> Self {
        self.semantics = Some(semantics);
        self
    }

    pub fn effective_semantics(&self) -> FaultSemantics {
        match self.semantics {
            Some(s) => s,
            None if self.target.is_input() => FaultSemantics::Actuator,
            None => FaultSemantics::Sensor,
        }
    }

    /// Additive offset contributed at time `t`.
    pub fn offset(&self, t: T) -> T {
        match self.profile {
            FaultProfile::Step if t >= self.onset => self.magnitude,
            FaultProfile::Step => T::zero(),
            FaultProfile::Ramp { slope } => slope * (t - self.onset).max(T::zero()),
        }
    }

    pub fn validate(&self, at: &str) -> Result<()> {
        if !(self.onset.is_finite() && self.onset >= T::zero()) {
            return Err(Error::config(format!("{at}.onset"), "must be finite and >= 0"));
        }
        if !self.magnitude.is_finite() {
            return Err(Error::config(format!("{at}.magnitude"), "must be finite"));
        }
        if let FaultProfile::Ramp { slope } = self.profile {
            if !slope.is_finite() {
                return Err(Error::config(format!("{at}.profile.slope"), "must be finite"));
            }
        }
        if !self.target.is_input() && self.effective_semantics() == FaultSemantics::Actuator {
            return Err(Error::config(
                format!("{at}.semantics"),
                format!("{} is a sensor; actuator semantics apply to MSf1/MSf2 only", self.target),
            ));
        }
        Ok(())
    }
}

/// Per-channel noise standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig<T> {
    pub msf1: T,
    pub msf2: T,
    pub de1: T,
    pub de2: T,
    pub de3: T,
    pub df1: T,
    pub df2: T,
}

impl<T: Scalar> Default for NoiseConfig<T> {
    fn default() -> Self {
        let flow = lit(2e-6);
        let effort = lit(20.0);
        NoiseConfig {
            msf1: flow,
            msf2: flow,
            de1: effort,
            de2: effort,
            de3: effort,
            df1: flow,
            df2: flow,
        }
    }
}

impl<T: Scalar> NoiseConfig<T> {
    pub fn zero() -> Self {
        Self::uniform(T::zero())
    }

    pub fn uniform(sigma: T) -> Self {
        NoiseConfig {
            msf1: sigma,
            msf2: sigma,
            de1: sigma,
            de2: sigma,
            de3: sigma,
            df1: sigma,
            df2: sigma,
        }
    }

    pub fn sigmas(&self) -> [T; 7] {
        [self.msf1, self.msf2, self.de1, self.de2, self.de3, self.df1, self.df2]
    }

    pub fn from_sigmas(s: [T; 7]) -> Self {
        NoiseConfig {
            msf1: s[0],
            msf2: s[1],
            de1: s[2],
            de2: s[3],
            de3: s[4],
            df1: s[5],
            df2: s[6],
        }
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self::from_sigmas(self.sigmas().map(|s| s * factor))
    }

    pub fn validate(&self) -> Result<()> {
        for (c, s) in Channel::ALL.iter().zip(self.sigmas()) {
            if !(s.is_finite() && s >= T::zero()) {
                return Err(Error::config(
                    format!("noise.{}", c.name().to_ascii_lowercase()),
                    format!("standard deviation must be finite and >= 0, got {s}"),
                ));
            }
        }
        Ok(())
    }
}

/// One sample of the seven channels as measured.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SensorFrame<T> {
    pub t: T,
    pub msf1: T,
    pub msf2: T,
    pub de1: T,
    pub de2: T,
    pub de3: T,
    pub df1: T,
    pub df2: T,
}

impl<T: Scalar> SensorFrame<T> {
    pub fn channels(&self) -> [T; 7] {
        [self.msf1, self.msf2, self.de1, self.de2, self.de3, self.df1, self.df2]
    }

    pub fn from_channels(t: T, v: [T; 7]) -> Self {
        SensorFrame {
            t,
            msf1: v[0],
            msf2: v[1],
            de1: v[2],
            de2: v[3],
            de3: v[4],
            df1: v[5],
            df2: v[6],
        }
    }

    pub fn get(&self, c: Channel) -> T {
        self.channels()[c.index()]
    }
}

/// Inputs the plant actually receives at `t`: profile plus active actuator faults.
pub fn applied_inputs<T: Scalar>(profile: &InputProfile<T>, faults: &[FaultSpec<T>], t: T) -> Inputs<T> {
    let mut u = profile.at(t);
    for f in faults {
        if f.effective_semantics() != FaultSemantics::Actuator {
            continue;
        }
        match f.target {
            Channel::Msf1 => u.msf1 = u.msf1 + f.offset(t),
            Channel::Msf2 => u.msf2 = u.msf2 + f.offset(t),
            _ => {}
        }
    }
    u
}

/// Samples every channel: true value, plus active sensor-fault offsets, plus noise.
///
/// `applied` are the inputs the plant receives at `state.t` (actuator faults
/// included). Exactly seven normal deviates are drawn per call, in channel
/// order, whatever the configured sigmas are.
pub fn measure<T: Scalar, R: Rng + ?Sized>(
    state: &PlantState<T>,
    params: &PlantParams<T>,
    applied: Inputs<T>,
    faults: &[FaultSpec<T>],
    noise: &NoiseConfig<T>,
    rng: &mut R,
) -> Result<SensorFrame<T>> {
    noise.validate()?;
    let t = state.t;
    let (df1, df2) = params.flows(state.efforts());
    let mut v = [applied.msf1, applied.msf2, state.de1, state.de2, state.de3, df1, df2];
    for f in faults {
        if f.effective_semantics() == FaultSemantics::Sensor {
            let i = f.target.index();
            v[i] = v[i] + f.offset(t);
        }
    }
    for (x, sigma) in v.iter_mut().zip(noise.sigmas()) {
        let z = T::standard_normal(rng);
        *x = *x + sigma * z;
    }
    Ok(SensorFrame::from_channels(t, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn zero_state_zero_input_stays_zero() {
        let p = PlantParams::<f64>::default();
        let s = step(&PlantState::default(), &p, 0.0, 0.0).unwrap();
        assert_eq!(s.efforts(), [0.0; 3]);
        assert_eq!(s.t, p.dt);
    }

    #[test]
    fn long_constant_input_converges_to_equilibrium() {
        let p = PlantParams::<f64>::default();
        let (u1, u2) = (1e-4, 1e-4);
        // Oracle: independent linear solve by Cramer's rule.
        let a = p.system_matrix();
        let b = [-u1 / p.c1, 0.0, -u2 / p.c3];
        let det = |m: [[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let d = det(a);
        let cramer: Vec<f64> = (0..3)
            .map(|j| {
                let mut m = a;
                for i in 0..3 {
                    m[i][j] = b[i];
                }
                det(m) / d
            })
            .collect();
        let tau = p.slowest_time_constant();
        let n = (12.0 * tau / p.dt) as usize;
        let mut s = PlantState::default();
        for _ in 0..n {
            s = step(&s, &p, u1, u2).unwrap();
        }
        // Symmetric inputs put de2 at zero, so compare against the largest effort.
        let scale = cramer.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (x, y) in s.efforts().iter().zip(&cramer) {
            assert!((x - y).abs() / scale < 1e-3, "{x} vs {y}");
        }
        let eq = equilibrium(&p, u1, u2).unwrap();
        for (x, y) in eq.efforts().iter().zip(&cramer) {
            assert!((x - y).abs() / scale < 1e-12);
        }
    }

    #[test]
    fn decoupled_tank_integrates_inflow() {
        let big = 1e12;
        let p = PlantParams {
            r1: big,
            r2: big,
            r3: big,
            r12: big,
            r23: big,
            ..PlantParams::<f64>::default()
        };
        let msf1 = 1e-4;
        let mut s = PlantState {
            de1: 10.0,
            ..Default::default()
        };
        let n = (10.0 / p.dt).round() as usize;
        for _ in 0..n {
            s = step(&s, &p, msf1, 0.0).unwrap();
        }
        let expected = 10.0 + msf1 / p.c1 * 10.0;
        assert!(rel(s.de1, expected) < 1e-4);
    }

    #[test]
    fn equilibrium_zero_inputs() {
        let eq = equilibrium(&PlantParams::<f64>::default(), 0.0, 0.0).unwrap();
        assert_eq!(eq.efforts(), [0.0; 3]);
    }

    #[test]
    fn equilibrium_symmetric_params() {
        let p = PlantParams::<f64>::default();
        let eq = equilibrium(&p, 3e-4, 3e-4).unwrap();
        assert_eq!(eq.de1, eq.de3);
    }

    #[test]
    fn equilibrium_matches_long_simulation() {
        let p = PlantParams::<f64>::default();
        let eq = equilibrium(&p, 1e-4, 1e-4).unwrap();
        let mut s = PlantState::default();
        let n = (40.0 * p.slowest_time_constant() / p.dt) as usize;
        for _ in 0..n {
            s = step(&s, &p, 1e-4, 1e-4).unwrap();
        }
        let scale = eq.efforts().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (x, y) in s.efforts().iter().zip(eq.efforts()) {
            assert!((x - y).abs() / scale < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn equilibrium_satisfies_balance_of_printed_equations() {
        // Summing the three balances: msf1 + msf2 = Σ de_i / r_i + 2·df2.
        let p = PlantParams::<f64> {
            r23: 900.0,
            r3: 2500.0,
            ..Default::default()
        };
        let (u1, u2) = (0.4, 0.7);
        let eq = equilibrium(&p, u1, u2).unwrap();
        let (_, df2) = p.flows(eq.efforts());
        let out = eq.de1 / p.r1 + eq.de2 / p.r2 + eq.de3 / p.r3 + 2.0 * df2;
        assert!(rel(out, u1 + u2) < 1e-9);
    }

    #[test]
    fn degenerate_resistances_rejected() {
        let p = PlantParams::<f64> {
            r1: 0.0,
            ..Default::default()
        };
        assert!(matches!(equilibrium(&p, 1.0, 1.0), Err(Error::Config { .. })));
    }

    #[test]
    fn divergence_names_field() {
        let p = PlantParams::<f64>::default();
        let s = PlantState {
            de2: f64::NAN,
            ..Default::default()
        };
        match step(&s, &p, 0.0, 0.0) {
            Err(Error::Divergence { field, .. }) => assert_eq!(field, "de2"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dt_bound_enforced() {
        let p = PlantParams::<f64> {
            dt: 5.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn measurement_without_noise_or_faults_is_exact() {
        let p = PlantParams::<f64>::default();
        let s = equilibrium(&p, 0.3, 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = Inputs::new(0.3, 0.2);
        let f = measure(&s, &p, u, &[], &NoiseConfig::zero(), &mut rng).unwrap();
        let (df1, df2) = p.flows(s.efforts());
        assert_eq!(f.channels(), [0.3, 0.2, s.de1, s.de2, s.de3, df1, df2]);
    }

    #[test]
    fn sensor_step_fault_adds_offset_after_onset() {
        let p = PlantParams::<f64>::default();
        let mut s = equilibrium(&p, 0.3, 0.2).unwrap();
        let fault = [FaultSpec::step(Channel::De2, 50.0, 500.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = Inputs::new(0.3, 0.2);
        s.t = 60.0;
        let f = measure(&s, &p, u, &fault, &NoiseConfig::zero(), &mut rng).unwrap();
        assert_eq!(f.de2, s.de2 + 500.0);
        s.t = 40.0;
        let f = measure(&s, &p, u, &fault, &NoiseConfig::zero(), &mut rng).unwrap();
        assert_eq!(f.de2, s.de2);
    }

    #[test]
    fn simultaneous_faults_offset_all_targets() {
        let p = PlantParams::<f64>::default();
        let mut s = equilibrium(&p, 0.3, 0.2).unwrap();
        s.t = 10.0;
        let faults = [
            FaultSpec::step(Channel::Msf1, 5.0, 0.1).with_semantics(FaultSemantics::Sensor),
            FaultSpec::step(Channel::Msf2, 5.0, -0.05).with_semantics(FaultSemantics::Sensor),
            FaultSpec::step(Channel::De2, 5.0, 200.0),
        ];
        let profile = InputProfile::constant(0.3, 0.2);
        let u = applied_inputs(&profile, &faults, s.t);
        assert_eq!(u, Inputs::new(0.3, 0.2));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = measure(&s, &p, u, &faults, &NoiseConfig::zero(), &mut rng).unwrap();
        assert_eq!(f.msf1, 0.3 + 0.1);
        assert_eq!(f.msf2, 0.2 - 0.05);
        assert_eq!(f.de2, s.de2 + 200.0);
        assert_eq!(f.de1, s.de1);
    }

    #[test]
    fn actuator_fault_reaches_plant_and_measurement() {
        let faults = [FaultSpec::step(Channel::Msf1, 1.0, 0.1)];
        let profile = InputProfile::constant(0.3, 0.2);
        assert_eq!(applied_inputs(&profile, &faults, 0.5).msf1, 0.3);
        assert_eq!(applied_inputs(&profile, &faults, 1.0).msf1, 0.3 + 0.1);
    }

    #[test]
    fn ramp_fault_offset() {
        let f = FaultSpec {
            profile: FaultProfile::Ramp { slope: 2.0 },
            ..FaultSpec::step(Channel::De1, 10.0, 0.0)
        };
        assert_eq!(f.offset(5.0), 0.0);
        assert_eq!(f.offset(12.5), 5.0);
    }

    #[test]
    fn negative_sigma_rejected() {
        let p = PlantParams::<f64>::default();
        let noise = NoiseConfig {
            de1: -1.0,
            ..NoiseConfig::zero()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = measure(&PlantState::default(), &p, Inputs::default(), &[], &noise, &mut rng).unwrap_err();
        assert!(err.to_string().contains("noise.de1"));
    }

    #[test]
    fn sensor_fault_cannot_be_actuator() {
        let f = FaultSpec::step(Channel::De1, 0.0, 1.0).with_semantics(FaultSemantics::Actuator);
        assert!(f.validate("faults[0]").is_err());
    }

    #[test]
    fn profile_steps_must_increase() {
        let mut p = InputProfile::<f64>::constant(1.0, 1.0);
        p.msf1.steps.push(ProfileStep {
            t: 0.0,
            value: 2.0,
            slope: None,
        });
        assert!(p.validate().is_err());
    }

    #[test]
    fn profile_value_with_ramp() {
        let c = ChannelProfile {
            steps: vec![
                ProfileStep { t: 0.0, value: 1.0, slope: None },
                ProfileStep { t: 10.0, value: 2.0, slope: Some(0.5) },
            ],
        };
        assert_eq!(c.value(-1.0), 0.0);
        assert_eq!(c.value(5.0), 1.0);
        assert_eq!(c.value(12.0), 3.0);
    }

    #[test]
    fn eigenfrequencies_of_default_plant() {
        let p = PlantParams::<f64>::default();
        let w = p.fastest_eigenfrequency();
        assert!((w - 0.077_777_777).abs() < 1e-6, "{w}");
        assert!((p.slowest_time_constant() - 30.0).abs() < 1e-6);
    }

    #[test]
    fn runs_in_f32() {
        let p = PlantParams::<f32>::default();
        let eq = equilibrium(&p, 0.5, 0.5).unwrap();
        let s = step(&eq, &p, 0.5, 0.5).unwrap();
        assert!((s.de1 - eq.de1).abs() / eq.de1 < 1e-4);
    }
}

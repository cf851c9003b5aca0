//! Scenario runner, calibration and the false-alarm experiment.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::detector::{DetectionMode, PersistenceRule, SystemVerdict, VariableStateMap};
use crate::error::{Error, Result};
use crate::filters::{ButterworthSpec, Filtered, LeadLagFilter, LeadLagSpec};
use crate::fuzzy::{InputPartition, OutputPartition};
use crate::pipeline::{samples, Pipeline, PipelineOutput};
use crate::plant::{
    applied_inputs, equilibrium, measure, step_ramped, Channel, ChannelProfile, FaultSpec, InputProfile, Inputs,
    NoiseConfig, PlantParams, PlantState, ProfileStep, SensorFrame,
};
use crate::residuals::{compute_residuals, ResidualGenerator, ResidualVector, RESIDUAL_COUNT};
use crate::scalar::{count, lit, Scalar};
use crate::threshold::{allowance_gain, calibrate, FloorStatistic, ThresholdConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, bound = "T: Scalar")]
pub struct Scenario<T> {
    #[serde(default)]
    pub params: PlantParams<T>,
    pub input_profile: InputProfile<T>,
    #[serde(default)]
    pub faults: Vec<FaultSpec<T>>,
    #[serde(default)]
    pub noise: NoiseConfig<T>,
    pub duration: T,
    #[serde(default)]
    pub seed: u64,
}

impl<T: Scalar> Scenario<T> {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.input_profile.validate()?;
        self.noise.validate()?;
        for (i, f) in self.faults.iter().enumerate() {
            f.validate(&format!("faults[{i}]"))?;
        }
        if !(self.duration.is_finite() && self.duration > T::zero()) {
            return Err(Error::config("duration", "must be finite and > 0"));
        }
        Ok(())
    }

    /// Number of samples including `t = 0`.
    pub fn sample_count(&self) -> usize {
        samples(self.duration, self.params.dt) as usize + 1
    }

    /// Largest `|msf1| + |msf2|` of the nominal profile over the run.
    pub fn input_scale(&self) -> T {
        (0..self.sample_count())
            .map(|k| {
                let u = self.input_profile.at(count::<T>(k) * self.params.dt);
                u.msf1.abs() + u.msf2.abs()
            })
            .fold(T::zero(), T::max)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = crate::error::from_json(text)?;
        s.validate()?;
        Ok(s)
    }
}

/// Tunables of the diagnosis chain that are not learned from data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct DetectorSettings<T> {
    pub butterworth_order: usize,
    /// Filter cut-off; `None` means ten times the fastest plant eigenfrequency.
    pub omega_c: Option<T>,
    /// `None` means `10 / omega_c`.
    pub warm_up: Option<T>,
    pub k: T,
    pub lead_lag: LeadLagSpec<T>,
    /// Lead-lag allowance as a multiple of the noise-free transient peak.
    pub allowance_factor: T,
    pub floor_statistic: FloorStatistic<T>,
    /// a1..a4 as multiples of the residual's noise deviation.
    pub partition_multiples: [T; 4],
    pub output: OutputPartition<T>,
    pub persistence: PersistenceRule<T>,
    /// Seconds the system verdict stays faulty after the last confirmation.
    pub verdict_hold: T,
    /// Minimum constant-input segment after warm-up, in slowest time constants.
    pub calibration_time_constants: T,
}

impl<T: Scalar> Default for DetectorSettings<T> {
    fn default() -> Self {
        DetectorSettings {
            butterworth_order: 2,
            omega_c: None,
            warm_up: None,
            k: lit(4.0 / 3.0),
            lead_lag: LeadLagSpec::default(),
            allowance_factor: lit(3.0),
            floor_statistic: FloorStatistic::Max,
            partition_multiples: [lit(2.0), lit(3.0), lit(4.0), lit(6.0)],
            output: OutputPartition::default(),
            persistence: PersistenceRule::default(),
            verdict_hold: lit(5.0),
            calibration_time_constants: lit(20.0),
        }
    }
}

impl<T: Scalar> DetectorSettings<T> {
    pub fn validate(&self) -> Result<()> {
        if self.butterworth_order < 2 {
            return Err(Error::config("settings.butterworthOrder", "must be >= 2"));
        }
        if let Some(w) = self.omega_c {
            if !(w.is_finite() && w > T::zero()) {
                return Err(Error::config("settings.omegaC", "must be finite and > 0"));
            }
        }
        if let Some(w) = self.warm_up {
            if !(w.is_finite() && w >= T::zero()) {
                return Err(Error::config("settings.warmUp", "must be finite and >= 0"));
            }
        }
        if !(self.k.is_finite() && self.k > T::zero()) {
            return Err(Error::config("settings.k", "must be finite and > 0"));
        }
        if !(self.allowance_factor.is_finite() && self.allowance_factor >= T::zero()) {
            return Err(Error::config("settings.allowanceFactor", "must be finite and >= 0"));
        }
        let m = self.partition_multiples;
        if !(m[0] > T::zero() && m[0] < m[1] && m[1] < m[2] && m[2] < m[3] && m[3].is_finite()) {
            return Err(Error::config(
                "settings.partitionMultiples",
                "must satisfy 0 < m1 < m2 < m3 < m4",
            ));
        }
        if !(self.verdict_hold.is_finite() && self.verdict_hold >= T::zero()) {
            return Err(Error::config("settings.verdictHold", "must be finite and >= 0"));
        }
        if !(self.calibration_time_constants.is_finite() && self.calibration_time_constants > T::zero()) {
            return Err(Error::config("settings.calibrationTimeConstants", "must be finite and > 0"));
        }
        self.lead_lag.validate()?;
        self.output.validate()?;
        self.persistence.validate()
    }

    pub fn omega_c(&self, params: &PlantParams<T>) -> T {
        self.omega_c
            .unwrap_or_else(|| lit::<T>(10.0) * params.fastest_eigenfrequency())
    }

    pub fn warm_up(&self, params: &PlantParams<T>) -> T {
        self.warm_up.unwrap_or_else(|| lit::<T>(10.0) / self.omega_c(params))
    }
}

/// Learned artifacts: threshold floor and gains, noise level and partitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Calibration<T> {
    pub omega_c: T,
    pub warmup: T,
    pub threshold: ThresholdConfig<T>,
    pub sigma_hat: [T; RESIDUAL_COUNT],
    pub partitions: [InputPartition<T>; RESIDUAL_COUNT],
}

impl<T: Scalar> Calibration<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_c.is_finite() && self.omega_c > T::zero()) {
            return Err(Error::config("calibration.omegaC", "must be finite and > 0"));
        }
        if !(self.warmup.is_finite() && self.warmup >= T::zero()) {
            return Err(Error::config("calibration.warmup", "must be finite and >= 0"));
        }
        self.threshold.validate()?;
        self.threshold.floor()?;
        for p in &self.partitions {
            p.validate()?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = crate::error::from_json(text)?;
        c.validate()?;
        Ok(c)
    }
}

/// Seeded plant plus sensors. Sample `k` sits at `t = k dt`; inputs are
/// interpolated linearly between samples.
#[derive(Debug, Clone)]
pub struct Simulator<T> {
    params: PlantParams<T>,
    profile: InputProfile<T>,
    faults: Vec<FaultSpec<T>>,
    noise: NoiseConfig<T>,
    rng: ChaCha8Rng,
    state: PlantState<T>,
    applied: Inputs<T>,
    index: u64,
}

impl<T: Scalar> Simulator<T> {
    /// Starts at the steady state of the inputs applied at `t = 0`.
    pub fn new(scenario: &Scenario<T>) -> Result<Self> {
        scenario.validate()?;
        let applied = applied_inputs(&scenario.input_profile, &scenario.faults, T::zero());
        let state = equilibrium(&scenario.params, applied.msf1, applied.msf2)?;
        Ok(Simulator {
            params: scenario.params,
            profile: scenario.input_profile.clone(),
            faults: scenario.faults.clone(),
            noise: scenario.noise,
            rng: ChaCha8Rng::seed_from_u64(scenario.seed),
            state,
            applied,
            index: 0,
        })
    }

    pub fn params(&self) -> &PlantParams<T> {
        &self.params
    }

    pub fn state(&self) -> &PlantState<T> {
        &self.state
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn time(&self) -> T {
        self.state.t
    }

    pub fn faults(&self) -> &[FaultSpec<T>] {
        &self.faults
    }

    pub fn add_fault(&mut self, f: FaultSpec<T>) -> Result<()> {
        f.validate("fault")?;
        self.faults.push(f);
        Ok(())
    }

    pub fn clear_faults(&mut self) {
        self.faults.clear();
    }

    /// Holds `channel` at `value` from time `t` on.
    pub fn set_input(&mut self, channel: Channel, value: T, t: T) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::config("value", "must be finite"));
        }
        let profile = match channel {
            Channel::Msf1 => &mut self.profile.msf1,
            Channel::Msf2 => &mut self.profile.msf2,
            other => {
                return Err(Error::config(
                    "channel",
                    format!("{other} is not an input; expected MSf1 or MSf2"),
                ))
            }
        };
        // Keep the value in force up to `t`, then switch.
        let now = profile.value(t);
        profile.steps.retain(|s| s.t < t);
        if profile.steps.last().is_some_and(|s| s.slope.is_some()) {
            profile.steps.push(ProfileStep {
                t: t - self.params.dt * lit(1e-3),
                value: now,
                slope: None,
            });
        }
        profile.steps.push(ProfileStep { t, value, slope: None });
        Ok(())
    }

    /// Measures the current sample (seven normal draws).
    pub fn measure(&mut self) -> Result<SensorFrame<T>> {
        measure(&self.state, &self.params, self.applied, &self.faults, &self.noise, &mut self.rng)
    }

    pub fn advance(&mut self) -> Result<()> {
        let next_index = self.index + 1;
        let t_next = count::<T>(next_index as usize) * self.params.dt;
        let next = applied_inputs(&self.profile, &self.faults, t_next);
        let mut state = step_ramped(&self.state, &self.params, self.applied, next)?;
        state.t = t_next;
        self.state = state;
        self.applied = next;
        self.index = next_index;
        Ok(())
    }
}

/// Simulates the whole scenario; stops at the first divergence.
pub fn simulate<T: Scalar>(scenario: &Scenario<T>) -> (Vec<SensorFrame<T>>, Option<Error>) {
    let mut sim = match Simulator::new(scenario) {
        Ok(s) => s,
        Err(e) => return (Vec::new(), Some(e)),
    };
    let n = scenario.sample_count();
    let mut frames = Vec::with_capacity(n);
    for k in 0..n {
        if k > 0 {
            if let Err(e) = sim.advance() {
                return (frames, Some(e));
            }
        }
        match sim.measure() {
            Ok(f) => frames.push(f),
            Err(e) => return (frames, Some(e)),
        }
    }
    (frames, None)
}

fn residual_run<T: Scalar>(
    frames: &[SensorFrame<T>],
    params: &PlantParams<T>,
    spec: ButterworthSpec<T>,
) -> Result<Vec<ResidualVector<T>>> {
    let mut gen = ResidualGenerator::new(*params, spec)?;
    let mut out = Vec::with_capacity(frames.len());
    for (k, f) in frames.iter().enumerate() {
        if k == 0 {
            gen.reset(f);
            out.push(gen.current()?);
        } else {
            out.push(gen.step(f)?);
        }
    }
    Ok(out)
}

/// Fault-free calibration run derived from `base`: a long constant segment at
/// the initial inputs, then one step on each input.
pub fn calibration_scenario<T: Scalar>(base: &Scenario<T>, settings: &DetectorSettings<T>, seed: u64) -> Scenario<T> {
    let p = &base.params;
    let u0 = base.input_profile.at(T::zero());
    let level = u0.msf1.abs().max(u0.msf2.abs());
    let delta = if level > T::zero() { lit::<T>(0.2) * level } else { lit(0.1) };
    let quiet = settings.warm_up(p) + settings.calibration_time_constants * p.slowest_time_constant();
    let t_c = (quiet / lit::<T>(10.0)).ceil() * lit(10.0) + lit(10.0);
    let settle = lit::<T>(60.0);
    let profile = InputProfile {
        msf1: ChannelProfile {
            steps: vec![
                ProfileStep { t: T::zero(), value: u0.msf1, slope: None },
                ProfileStep { t: t_c, value: u0.msf1 + delta, slope: None },
            ],
        },
        msf2: ChannelProfile {
            steps: vec![
                ProfileStep { t: T::zero(), value: u0.msf2, slope: None },
                ProfileStep { t: t_c + settle, value: u0.msf2 - delta, slope: None },
            ],
        },
    };
    Scenario {
        params: *p,
        input_profile: profile,
        faults: Vec::new(),
        noise: base.noise,
        duration: t_c + settle + settle,
        seed,
    }
}

/// Learns threshold floor, lead-lag gains, noise levels and partitions from a
/// fault-free scenario with a constant segment followed by input steps.
pub fn calibrate_all<T: Scalar>(scenario: &Scenario<T>, settings: &DetectorSettings<T>) -> Result<Calibration<T>> {
    scenario.validate()?;
    settings.validate()?;
    if !scenario.faults.is_empty() {
        return Err(Error::Calibration("calibration scenario must be fault-free".into()));
    }
    let p = &scenario.params;
    let omega_c = settings.omega_c(p);
    let warmup = settings.warm_up(p);
    let spec = ButterworthSpec {
        order: settings.butterworth_order,
        omega_c,
        dt: p.dt,
    };
    spec.validate()?;

    let t_c = scenario
        .input_profile
        .first_change()
        .filter(|&t| t < scenario.duration)
        .ok_or_else(|| Error::Calibration("step segment missing: the inputs never change".into()))?;
    let needed = settings.calibration_time_constants * p.slowest_time_constant();
    if t_c - warmup < needed {
        return Err(Error::Calibration(format!(
            "constant-input segment missing or too short: {} s after the {} s warm-up, need {} s",
            (t_c - warmup).max(T::zero()),
            warmup,
            needed
        )));
    }
    let step_len = scenario.duration - t_c;
    let ll_span = settings.lead_lag.t1.max(settings.lead_lag.t2);
    if step_len < lit::<T>(5.0) * ll_span {
        return Err(Error::Calibration(format!(
            "step segment too short: {step_len} s, need {} s",
            lit::<T>(5.0) * ll_span
        )));
    }

    let warm_n = samples(warmup, p.dt) as usize;
    let change_n = (t_c / p.dt).floor().to_usize().unwrap_or(0);

    let (frames, failure) = simulate(scenario);
    if let Some(e) = failure {
        return Err(e);
    }
    let residuals = residual_run(&frames, p, spec)?;
    let constant = &residuals[..change_n.min(residuals.len())];
    let min_samples = samples(needed, p.dt) as usize;
    let r_bar = calibrate(constant, warm_n, min_samples, settings.floor_statistic)?;

    let usable = &constant[warm_n..];
    let n = count::<T>(usable.len());
    let mut sigma_hat = [T::zero(); RESIDUAL_COUNT];
    for (i, s) in sigma_hat.iter_mut().enumerate() {
        let mean = usable.iter().fold(T::zero(), |a, r| a + r[i]) / n;
        let var = usable.iter().fold(T::zero(), |a, r| a + (r[i] - mean).powi(2)) / n;
        *s = var.sqrt();
    }
    let scale = scenario.input_scale().max(T::min_positive_value());
    let bound = lit::<T>(1e-6) * scale;
    if let Some(i) = (0..RESIDUAL_COUNT).find(|&i| sigma_hat[i] <= bound) {
        return Err(Error::Calibration(format!(
            "degenerate calibration: residual r{} has noise deviation {} (bound {}); \
             partitions need measurement noise",
            i + 1,
            sigma_hat[i],
            bound
        )));
    }
    let mut partitions = [InputPartition::new(lit(1.0), lit(2.0), lit(3.0), lit(4.0))?; RESIDUAL_COUNT];
    for (part, s) in partitions.iter_mut().zip(sigma_hat) {
        *part = InputPartition::from_sigma(s, settings.partition_multiples)?;
    }

    // Transient allowance: noise-free replay of the step segment.
    let clean = Scenario {
        noise: NoiseConfig::zero(),
        ..scenario.clone()
    };
    let (clean_frames, failure) = simulate(&clean);
    if let Some(e) = failure {
        return Err(e);
    }
    let clean_res = residual_run(&clean_frames, p, spec)?;
    let mut ll = [
        LeadLagFilter::new(settings.lead_lag, p.dt)?,
        LeadLagFilter::new(settings.lead_lag, p.dt)?,
    ];
    let u0 = scenario.input_profile.at(T::zero());
    ll[0].reset(u0.msf1);
    ll[1].reset(u0.msf2);
    let mut ll_peak = T::zero();
    let mut transient = [T::zero(); RESIDUAL_COUNT];
    for (k, f) in clean_frames.iter().enumerate().skip(1) {
        let y = ll[0].step(f.msf1)?.abs() + ll[1].step(f.msf2)?.abs();
        if k >= change_n {
            ll_peak = ll_peak.max(y);
            for (i, tp) in transient.iter_mut().enumerate() {
                *tp = tp.max(clean_res[k][i].abs());
            }
        }
    }
    let mut gains = [[T::zero(); 2]; RESIDUAL_COUNT];
    for (g, tp) in gains.iter_mut().zip(transient) {
        let v = allowance_gain(tp, ll_peak, settings.allowance_factor);
        *g = [v, v];
    }

    let calibration = Calibration {
        omega_c,
        warmup,
        threshold: ThresholdConfig {
            k: settings.k,
            r_bar: Some(r_bar),
            gains,
            lead_lag: settings.lead_lag,
        },
        sigma_hat,
        partitions,
    };
    calibration.validate()?;
    Ok(calibration)
}

/// Static gain of each residual to a unit offset on `channel`.
pub fn static_sensitivity<T: Scalar>(params: &PlantParams<T>, channel: Channel) -> [T; RESIDUAL_COUNT] {
    let mut filtered = [Filtered::default(); 7];
    filtered[channel.index()].value = T::one();
    let r = compute_residuals(&filtered, params).expect("seven channels");
    r.to_array()
}

/// Deviation of one variable's fault that is "one sigma": the larger of the
/// channel's own noise and the smallest offset that moves some residual by
/// its calibrated deviation.
pub fn sigma_equivalent<T: Scalar>(
    channel: Channel,
    params: &PlantParams<T>,
    noise: &NoiseConfig<T>,
    calibration: &Calibration<T>,
) -> T {
    let gains = static_sensitivity(params, channel);
    let referred = (0..RESIDUAL_COUNT)
        .filter(|&i| gains[i] != T::zero())
        .map(|i| calibration.sigma_hat[i] / gains[i].abs())
        .fold(T::infinity(), T::min);
    let own = noise.sigmas()[channel.index()];
    if referred.is_finite() {
        own.max(referred)
    } else {
        own
    }
}

/// Full time-series record of one run.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunLog<T> {
    pub mode: DetectionMode,
    pub calibration: Calibration<T>,
    pub frames: Vec<SensorFrame<T>>,
    pub outputs: Vec<PipelineOutput<T>>,
    pub failure: Option<String>,
}

impl<T: Scalar> RunLog<T> {
    /// Faulty if the selected mode confirmed anything during the run.
    pub fn verdict(&self) -> SystemVerdict {
        self.verdict_for(self.mode)
    }

    pub fn verdict_for(&self, mode: DetectionMode) -> SystemVerdict {
        if self.confirmed_samples(mode) > 0 {
            SystemVerdict::Faulty
        } else {
            SystemVerdict::Normal
        }
    }

    /// Samples with at least one confirmed residual.
    pub fn confirmed_samples(&self, mode: DetectionMode) -> usize {
        self.outputs
            .iter()
            .filter(|o| o.confirmations.get(mode).iter().any(|&c| c))
            .count()
    }

    pub fn first_confirmation(&self, mode: DetectionMode) -> Option<T> {
        self.outputs
            .iter()
            .find(|o| o.confirmations.get(mode).iter().any(|&c| c))
            .map(|o| o.t)
    }

    /// Residuals confirmed at least once in `[from, to]`.
    pub fn confirmed_between(&self, mode: DetectionMode, from: T, to: T) -> [bool; RESIDUAL_COUNT] {
        let mut out = [false; RESIDUAL_COUNT];
        for o in self.outputs.iter().filter(|o| o.t >= from && o.t <= to) {
            for (acc, c) in out.iter_mut().zip(o.confirmations.get(mode)) {
                *acc |= c;
            }
        }
        out
    }

    /// Post-warm-up samples that were assessed.
    pub fn assessed_samples(&self) -> usize {
        self.outputs.iter().filter(|o| !o.warming_up).count()
    }

    /// Per-variable suspicion averaged over samples with `t >= from`.
    pub fn mean_suspicions(&self, from: T) -> VariableStateMap<T> {
        let tail: Vec<_> = self.outputs.iter().filter(|o| o.t >= from).collect();
        let mut acc = [T::zero(); 7];
        for o in &tail {
            for (a, s) in acc.iter_mut().zip(o.variables.suspicions()) {
                *a = *a + s;
            }
        }
        let n = count::<T>(tail.len().max(1));
        VariableStateMap::from_suspicions(acc.map(|a| a / n))
    }

    pub fn last_variables(&self) -> Option<VariableStateMap<T>> {
        self.outputs.last().map(|o| o.variables)
    }
}

/// Runs a scenario through the diagnosis chain with given calibration.
pub fn run_scenario<T: Scalar>(
    scenario: &Scenario<T>,
    calibration: &Calibration<T>,
    settings: &DetectorSettings<T>,
    mode: DetectionMode,
) -> Result<RunLog<T>> {
    scenario.validate()?;
    settings.validate()?;
    calibration.validate()?;
    if scenario.duration <= calibration.warmup {
        return Err(Error::config(
            "duration",
            format!("must exceed the {} s warm-up", calibration.warmup),
        ));
    }
    let mut pipeline = Pipeline::new(&scenario.params, calibration, settings, mode)?;
    let mut sim = Simulator::new(scenario)?;
    let n = scenario.sample_count();
    let mut log = RunLog {
        mode,
        calibration: *calibration,
        frames: Vec::with_capacity(n),
        outputs: Vec::with_capacity(n),
        failure: None,
    };
    for k in 0..n {
        let step = (|| -> Result<(SensorFrame<T>, PipelineOutput<T>)> {
            if k > 0 {
                sim.advance()?;
            }
            let frame = sim.measure()?;
            let out = if k == 0 { pipeline.start(&frame)? } else { pipeline.step(&frame)? };
            Ok((frame, out))
        })();
        match step {
            Ok((frame, out)) => {
                log.frames.push(frame);
                log.outputs.push(out);
            }
            Err(e) => {
                log.failure = Some(e.to_string());
                break;
            }
        }
    }
    Ok(log)
}

/// Calibrates on the derived fault-free scenario, then runs.
pub fn run_auto<T: Scalar>(
    scenario: &Scenario<T>,
    settings: &DetectorSettings<T>,
    mode: DetectionMode,
) -> Result<RunLog<T>> {
    let cal = calibrate_all(&calibration_scenario(scenario, settings, calibration_seed(scenario.seed)), settings)?;
    run_scenario(scenario, &cal, settings, mode)
}

/// Seed of the calibration run belonging to a scenario seed.
pub fn calibration_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

/// Built-in fault-free template for the false-alarm experiment: nominal
/// inputs with one step on each input.
pub fn default_template<T: Scalar>() -> Scenario<T> {
    let step = |t0: f64, v0: f64, t1: f64, v1: f64| ChannelProfile {
        steps: vec![
            ProfileStep { t: lit(t0), value: lit(v0), slope: None },
            ProfileStep { t: lit(t1), value: lit(v1), slope: None },
        ],
    };
    Scenario {
        params: PlantParams::default(),
        input_profile: InputProfile {
            msf1: step(0.0, 0.5, 60.0, 0.6),
            msf2: step(0.0, 0.5, 120.0, 0.4),
        },
        faults: Vec::new(),
        noise: NoiseConfig::default(),
        duration: lit(200.0),
        seed: 0,
    }
}

/// `(pT - pH) / pT`, or "n/a" when nothing false-alarmed in threshold-only mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reduction<T> {
    Value(T),
    NotApplicable,
}

impl<T: Scalar> Reduction<T> {
    pub fn from_rates(p_threshold: T, p_hybrid: T) -> Self {
        if p_threshold > T::zero() {
            Reduction::Value((p_threshold - p_hybrid) / p_threshold)
        } else {
            Reduction::NotApplicable
        }
    }
}

impl<T: Scalar> std::fmt::Display for Reduction<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Reduction::Value(v) => write!(f, "{:.1}%", v.as_f64() * 100.0),
            Reduction::NotApplicable => f.write_str("n/a"),
        }
    }
}

impl<T: Scalar> Serialize for Reduction<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Reduction::Value(v) => v.serialize(s),
            Reduction::NotApplicable => s.serialize_str("n/a"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunDetail<T> {
    pub seed: u64,
    pub threshold_only_alarm: bool,
    pub hybrid_alarm: bool,
    pub threshold_only_confirmed_samples: usize,
    pub hybrid_confirmed_samples: usize,
    pub assessed_samples: usize,
    pub first_threshold_only_alarm: Option<T>,
    pub first_hybrid_alarm: Option<T>,
    /// Hybrid confirmations were a subset of threshold-only ones at every sample.
    pub dominance: bool,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase", bound = "T: Scalar")]
pub struct FalseAlarmReport<T> {
    pub n_runs: usize,
    pub base_seed: u64,
    /// Percent of runs with a faulty verdict.
    pub p_threshold_only: T,
    pub p_hybrid: T,
    pub reduction: Reduction<T>,
    /// Percent of assessed samples carrying a confirmation.
    pub per_sample_threshold_only: T,
    pub per_sample_hybrid: T,
    pub dominance_holds: bool,
    pub calibration: Calibration<T>,
    pub per_run_detail: Vec<RunDetail<T>>,
}

/// Fault-free runs of `template` under seeds `base_seed + 1 ..= base_seed + n_runs`,
/// scored in both modes. Calibration uses `base_seed`; nothing is
/// calibrated for fewer than 20 runs.
pub fn monte_carlo_false_alarms<T: Scalar>(
    template: &Scenario<T>,
    settings: &DetectorSettings<T>,
    n_runs: usize,
    base_seed: u64,
) -> Result<FalseAlarmReport<T>> {
    if n_runs < 20 {
        return Err(Error::config("runs", format!("must be >= 20, got {n_runs}")));
    }
    template.validate()?;
    let cal = calibrate_all(&calibration_scenario(template, settings, base_seed), settings)?;
    monte_carlo_with_calibration(template, &cal, settings, n_runs, base_seed)
}

/// Same experiment with a given calibration (e.g. for a noise-free template,
/// whose own calibration would be degenerate).
pub fn monte_carlo_with_calibration<T: Scalar>(
    template: &Scenario<T>,
    calibration: &Calibration<T>,
    settings: &DetectorSettings<T>,
    n_runs: usize,
    base_seed: u64,
) -> Result<FalseAlarmReport<T>> {
    if n_runs < 20 {
        return Err(Error::config("runs", format!("must be >= 20, got {n_runs}")));
    }
    template.validate()?;
    if !template.faults.is_empty() {
        return Err(Error::config("faults", "false-alarm template must be fault-free"));
    }
    let cal = *calibration;
    let details: Vec<Result<RunDetail<T>>> = (0..n_runs)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed.wrapping_add(1 + i as u64);
            let scenario = Scenario {
                seed,
                ..template.clone()
            };
            let log = run_scenario(&scenario, &cal, settings, DetectionMode::Hybrid)?;
            let dominance = log.outputs.iter().all(|o| {
                o.confirmations
                    .hybrid
                    .iter()
                    .zip(o.confirmations.threshold_only)
                    .all(|(&h, t)| !h || t)
            });
            let t_count = log.confirmed_samples(DetectionMode::ThresholdOnly);
            let h_count = log.confirmed_samples(DetectionMode::Hybrid);
            Ok(RunDetail {
                seed,
                threshold_only_alarm: t_count > 0,
                hybrid_alarm: h_count > 0,
                threshold_only_confirmed_samples: t_count,
                hybrid_confirmed_samples: h_count,
                assessed_samples: log.assessed_samples(),
                first_threshold_only_alarm: log.first_confirmation(DetectionMode::ThresholdOnly),
                first_hybrid_alarm: log.first_confirmation(DetectionMode::Hybrid),
                dominance,
                failure: log.failure,
            })
        })
        .collect();
    let details: Vec<RunDetail<T>> = details.into_iter().collect::<Result<_>>()?;
    let hundred = lit::<T>(100.0);
    let n = count::<T>(n_runs);
    let p_t = count::<T>(details.iter().filter(|d| d.threshold_only_alarm).count()) * hundred / n;
    let p_h = count::<T>(details.iter().filter(|d| d.hybrid_alarm).count()) * hundred / n;
    let assessed = count::<T>(details.iter().map(|d| d.assessed_samples).sum::<usize>().max(1));
    let s_t = count::<T>(details.iter().map(|d| d.threshold_only_confirmed_samples).sum()) * hundred / assessed;
    let s_h = count::<T>(details.iter().map(|d| d.hybrid_confirmed_samples).sum()) * hundred / assessed;
    Ok(FalseAlarmReport {
        n_runs,
        base_seed,
        p_threshold_only: p_t,
        p_hybrid: p_h,
        reduction: Reduction::from_rates(p_t, p_h),
        per_sample_threshold_only: s_t,
        per_sample_hybrid: s_h,
        dominance_holds: details.iter().all(|d| d.dominance),
        calibration: cal,
        per_run_detail: details,
    })
}

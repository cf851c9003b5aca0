//! Deterministic session state: one simulator and diagnosis pipeline stepped
//! tick by tick, with commands applied at tick boundaries.

use serde::{Deserialize, Serialize};

use hydrodiag_core::fuzzy::color_of;
use hydrodiag_core::harness::{calibrate_all, calibration_scenario, calibration_seed};
use hydrodiag_core::{
    AlarmIndex, Calibration, Channel, DetectionMode, DetectorSettings, Error, FaultSpec, InputPartition, Pipeline,
    PipelineOutput, ResidualVector, Result, Scenario, SensorFrame, Simulator, SystemVerdict, VariableStateMap,
    RESIDUAL_COUNT,
};

pub const MAX_SPEED: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", deny_unknown_fields)]
pub enum SessionCommand {
    SetInput {
        channel: Channel,
        value: f64,
    },
    InjectFault {
        fault: FaultSpec,
    },
    ClearFaults,
    /// `residual` counts from 1.
    #[serde(rename_all = "camelCase")]
    SetFuzzyPartition {
        residual: usize,
        a1: f64,
        a2: f64,
        a3: f64,
        a4: f64,
    },
    SetThresholdFactor {
        k: f64,
    },
    SetSpeed {
        multiplier: f64,
    },
    Pause,
    Resume,
    Reset {
        scenario: Box<Scenario>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Ack {
    /// Tick at whose boundary the command takes effect.
    pub tick: u64,
    /// Session time of that tick.
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LoggedCommand {
    pub tick: u64,
    pub command: SessionCommand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TelemetryFrame {
    pub tick: u64,
    /// Session time; strictly increasing, also across resets.
    pub t: f64,
    pub sensor_frame: SensorFrame,
    pub residual_vector: ResidualVector,
    pub thresholds: [f64; RESIDUAL_COUNT],
    pub alarm_indices: [AlarmIndex; RESIDUAL_COUNT],
    pub confirmed: [bool; RESIDUAL_COUNT],
    pub variable_state_map: VariableStateMap,
    pub system_verdict: SystemVerdict,
    pub warming_up: bool,
}

impl TelemetryFrame {
    fn build(tick: u64, t: f64, sensor: SensorFrame, out: &PipelineOutput) -> Self {
        let v = &out.verdict;
        let alarm_indices = std::array::from_fn(|i| AlarmIndex {
            value: v.alarm_index[i],
            color_rgb: color_of(v.alarm_index[i]),
            indeterminate: v.indeterminate[i],
        });
        TelemetryFrame {
            tick,
            t,
            sensor_frame: SensorFrame { t, ..sensor },
            residual_vector: out.residuals,
            thresholds: out.thresholds,
            alarm_indices,
            confirmed: out.verdict.confirmed,
            variable_state_map: out.variables,
            system_verdict: out.system,
            warming_up: out.warming_up,
        }
    }
}

/// Everything that is rebuilt on `reset`.
struct Run {
    scenario: Scenario,
    calibration: Calibration,
    sim: Simulator,
    pipeline: Pipeline,
    /// Session tick at which this run's sample 0 was taken.
    origin: u64,
}

impl Run {
    fn start(scenario: Scenario, calibration: Calibration, settings: &DetectorSettings, mode: DetectionMode, origin: u64) -> Result<(Self, TelemetryFrame)> {
        let mut sim = Simulator::new(&scenario)?;
        let mut pipeline = Pipeline::new(&scenario.params, &calibration, settings, mode)?;
        let sensor = sim.measure()?;
        let out = pipeline.start(&sensor)?;
        let dt = scenario.params.dt;
        let frame = TelemetryFrame::build(origin, origin as f64 * dt, sensor, &out);
        let run = Run {
            scenario,
            calibration,
            sim,
            pipeline,
            origin,
        };
        Ok((run, frame))
    }

    fn local_time(&self, session_t: f64) -> f64 {
        session_t - self.origin as f64 * self.scenario.params.dt
    }
}

/// Command checked against the current state, ready to apply.
enum Prepared {
    SetInput(Channel, f64),
    InjectFault(FaultSpec),
    ClearFaults,
    SetPartition(usize, InputPartition),
    SetThresholdFactor(f64),
    Host,
    Reset(Box<Scenario>, Box<Calibration>),
}

pub struct SessionEngine {
    settings: DetectorSettings,
    mode: DetectionMode,
    run: Run,
    tick: u64,
    latest: TelemetryFrame,
    pending: Vec<Prepared>,
    log: Vec<LoggedCommand>,
    initial: Scenario,
    paused: bool,
    speed: f64,
}

fn calibrate_for(scenario: &Scenario, settings: &DetectorSettings) -> Result<Calibration> {
    calibrate_all(
        &calibration_scenario(scenario, settings, calibration_seed(scenario.seed)),
        settings,
    )
}

impl SessionEngine {
    /// Validates and calibrates for the scenario, then takes sample 0.
    pub fn new(scenario: Scenario, settings: DetectorSettings, mode: DetectionMode) -> Result<Self> {
        scenario.validate()?;
        settings.validate()?;
        let calibration = calibrate_for(&scenario, &settings)?;
        let (run, latest) = Run::start(scenario.clone(), calibration, &settings, mode, 0)?;
        Ok(SessionEngine {
            settings,
            mode,
            run,
            tick: 0,
            latest,
            pending: Vec::new(),
            log: Vec::new(),
            initial: scenario,
            paused: false,
            speed: 1.0,
        })
    }

    pub fn dt(&self) -> f64 {
        self.run.scenario.params.dt
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn latest(&self) -> &TelemetryFrame {
        &self.latest
    }

    pub fn paused(&self) -> bool {
        self.paused
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn mode(&self) -> DetectionMode {
        self.mode
    }

    pub fn calibration(&self) -> &Calibration {
        &self.run.calibration
    }

    pub fn initial_scenario(&self) -> &Scenario {
        &self.initial
    }

    pub fn command_log(&self) -> &[LoggedCommand] {
        &self.log
    }

    /// Validates `cmd` and schedules it for the next tick boundary. Invalid
    /// commands leave the session untouched.
    pub fn submit(&mut self, cmd: SessionCommand) -> Result<Ack> {
        let prepared = match &cmd {
            SessionCommand::SetInput { channel, value } => {
                if !channel.is_input() {
                    return Err(config("channel", format!("{channel} is not an input; expected MSf1 or MSf2")));
                }
                if !value.is_finite() {
                    return Err(config("value", "must be finite"));
                }
                Prepared::SetInput(*channel, *value)
            }
            SessionCommand::InjectFault { fault } => {
                fault.validate("fault")?;
                Prepared::InjectFault(*fault)
            }
            SessionCommand::ClearFaults => Prepared::ClearFaults,
            SessionCommand::SetFuzzyPartition { residual, a1, a2, a3, a4 } => {
                if !(1..=RESIDUAL_COUNT).contains(residual) {
                    return Err(config("residual", format!("must be 1..={RESIDUAL_COUNT}, got {residual}")));
                }
                Prepared::SetPartition(*residual - 1, InputPartition::new(*a1, *a2, *a3, *a4)?)
            }
            SessionCommand::SetThresholdFactor { k } => {
                if !(k.is_finite() && *k > 0.0) {
                    return Err(config("k", "must be finite and > 0"));
                }
                Prepared::SetThresholdFactor(*k)
            }
            SessionCommand::SetSpeed { multiplier } => {
                if !(multiplier.is_finite() && *multiplier > 0.0 && *multiplier <= MAX_SPEED) {
                    return Err(config("multiplier", format!("must lie in (0, {MAX_SPEED}]")));
                }
                self.speed = *multiplier;
                Prepared::Host
            }
            SessionCommand::Pause => {
                self.paused = true;
                Prepared::Host
            }
            SessionCommand::Resume => {
                self.paused = false;
                Prepared::Host
            }
            SessionCommand::Reset { scenario } => {
                scenario.validate()?;
                let calibration = calibrate_for(scenario, &self.settings)?;
                // Dry run so a reset can never fail at the boundary.
                Pipeline::new(&scenario.params, &calibration, &self.settings, self.mode)?;
                Prepared::Reset(scenario.clone(), Box::new(calibration))
            }
        };
        self.pending.push(prepared);
        let tick = self.tick + 1;
        self.log.push(LoggedCommand { tick, command: cmd });
        Ok(Ack {
            tick,
            t: tick as f64 * self.dt(),
        })
    }

    fn apply_pending(&mut self, boundary: u64) -> Result<Option<TelemetryFrame>> {
        let t = boundary as f64 * self.dt();
        let mut restarted = None;
        for p in std::mem::take(&mut self.pending) {
            match p {
                Prepared::SetInput(c, v) => {
                    let local = self.run.local_time(t);
                    self.run.sim.set_input(c, v, local)?;
                }
                Prepared::InjectFault(mut f) => {
                    f.onset = self.run.local_time(f.onset).max(0.0);
                    self.run.sim.add_fault(f)?;
                }
                Prepared::ClearFaults => self.run.sim.clear_faults(),
                Prepared::SetPartition(i, part) => self.run.pipeline.set_partition(i, part)?,
                Prepared::SetThresholdFactor(k) => self.run.pipeline.set_threshold_factor(k)?,
                Prepared::Host => {}
                Prepared::Reset(scenario, calibration) => {
                    let (run, frame) = Run::start(*scenario, *calibration, &self.settings, self.mode, boundary)?;
                    self.run = run;
                    restarted = Some(frame);
                }
            }
        }
        Ok(restarted)
    }

    /// Advances one tick and returns its frame.
    pub fn step(&mut self) -> Result<TelemetryFrame> {
        let next = self.tick + 1;
        let frame = match self.apply_pending(next)? {
            Some(frame) => frame,
            None => {
                self.run.sim.advance()?;
                let sensor = self.run.sim.measure()?;
                let out = self.run.pipeline.step(&sensor)?;
                TelemetryFrame::build(next, next as f64 * self.dt(), sensor, &out)
            }
        };
        self.tick = next;
        self.latest = frame.clone();
        Ok(frame)
    }
}

fn config(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Rebuilds the frames of ticks `0..=ticks` from the initial scenario and a
/// command log.
pub fn replay(
    scenario: Scenario,
    settings: DetectorSettings,
    mode: DetectionMode,
    log: &[LoggedCommand],
    ticks: u64,
) -> Result<Vec<TelemetryFrame>> {
    let mut engine = SessionEngine::new(scenario, settings, mode)?;
    let mut frames = vec![engine.latest().clone()];
    let mut cursor = 0;
    for tick in 1..=ticks {
        while cursor < log.len() && log[cursor].tick == tick {
            engine.submit(log[cursor].command.clone())?;
            cursor += 1;
        }
        frames.push(engine.step()?);
    }
    Ok(frames)
}

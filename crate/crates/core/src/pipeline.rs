//! Sample-by-sample diagnosis: filters and relations, adaptive threshold,
//! two-stage decision and the variable-state map.

use serde::{Deserialize, Serialize};

use crate::detector::{
    variable_states, DetectionMode, DetectionVerdict, Detector, ModeConfirmations, SystemVerdict, VariableStateMap,
};
use crate::error::Result;
use crate::filters::ButterworthSpec;
use crate::fuzzy::{FuzzyEvaluator, InputPartition};
use crate::harness::{Calibration, DetectorSettings};
use crate::plant::{Inputs, PlantParams, SensorFrame};
use crate::residuals::{signature, ResidualGenerator, ResidualVector, SignatureMatrix, RESIDUAL_COUNT};
use crate::scalar::Scalar;
use crate::threshold::AdaptiveThreshold;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PipelineOutput<T> {
    pub t: T,
    pub residuals: ResidualVector<T>,
    pub thresholds: [T; RESIDUAL_COUNT],
    /// Assessment of this sample; `confirmed` holds the flags of the selected mode.
    pub verdict: DetectionVerdict<T>,
    pub confirmations: ModeConfirmations,
    pub variables: VariableStateMap<T>,
    pub system: SystemVerdict,
    pub warming_up: bool,
}

#[derive(Debug, Clone)]
pub struct Pipeline<T> {
    generator: ResidualGenerator<T>,
    threshold: AdaptiveThreshold<T>,
    detector: Detector<T>,
    sig: SignatureMatrix,
    mode: DetectionMode,
    warmup_samples: u64,
    hold_samples: u64,
    sample: u64,
    last_confirmed: Option<u64>,
}

impl<T: Scalar> Pipeline<T> {
    pub fn new(
        params: &PlantParams<T>,
        calibration: &Calibration<T>,
        settings: &DetectorSettings<T>,
        mode: DetectionMode,
    ) -> Result<Self> {
        params.validate()?;
        let spec = ButterworthSpec {
            order: settings.butterworth_order,
            omega_c: calibration.omega_c,
            dt: params.dt,
        };
        let generator = ResidualGenerator::new(*params, spec)?;
        let threshold = AdaptiveThreshold::new(calibration.threshold, params.dt)?;
        let fuzzy = FuzzyEvaluator::new(calibration.partitions, settings.output)?;
        let detector = Detector::new(settings.persistence, fuzzy)?;
        Ok(Pipeline {
            generator,
            threshold,
            detector,
            sig: signature(),
            mode,
            warmup_samples: samples(calibration.warmup, params.dt),
            hold_samples: samples(settings.verdict_hold, params.dt).max(1),
            sample: 0,
            last_confirmed: None,
        })
    }

    pub fn mode(&self) -> DetectionMode {
        self.mode
    }

    pub fn set_threshold_factor(&mut self, k: T) -> Result<()> {
        self.threshold.set_factor(k)
    }

    pub fn set_partition(&mut self, residual: usize, p: InputPartition<T>) -> Result<()> {
        self.detector.fuzzy_mut().set_partition(residual, p)
    }

    pub fn partitions(&self) -> [InputPartition<T>; RESIDUAL_COUNT] {
        self.detector.fuzzy().partitions
    }

    /// DC-initializes every filter on the first frame and reports it.
    pub fn start(&mut self, frame: &SensorFrame<T>) -> Result<PipelineOutput<T>> {
        self.generator.reset(frame);
        self.threshold.reset(Inputs::new(frame.msf1, frame.msf2));
        self.sample = 0;
        self.last_confirmed = None;
        let residuals = self.generator.current()?;
        let thresholds = self.threshold.last();
        Ok(self.decide(frame.t, residuals, thresholds))
    }

    pub fn step(&mut self, frame: &SensorFrame<T>) -> Result<PipelineOutput<T>> {
        self.sample += 1;
        let residuals = self.generator.step(frame)?;
        let thresholds = self.threshold.step(Inputs::new(frame.msf1, frame.msf2))?;
        Ok(self.decide(frame.t, residuals, thresholds))
    }

    fn decide(&mut self, t: T, residuals: ResidualVector<T>, thresholds: [T; RESIDUAL_COUNT]) -> PipelineOutput<T> {
        let warming_up = self.sample < self.warmup_samples;
        let (mut verdict, confirmations) = if warming_up {
            self.detector.idle(t)
        } else {
            // Finite residuals are guaranteed by the filters.
            self.detector
                .step(t, &residuals, &thresholds)
                .unwrap_or_else(|_| self.detector.idle(t))
        };
        verdict.confirmed = confirmations.get(self.mode);
        if verdict.confirmed.iter().any(|&c| c) {
            self.last_confirmed = Some(self.sample);
        }
        let system = match self.last_confirmed {
            Some(s) if self.sample - s < self.hold_samples => SystemVerdict::Faulty,
            _ => SystemVerdict::Normal,
        };
        PipelineOutput {
            t,
            residuals,
            thresholds,
            verdict,
            confirmations,
            variables: variable_states(&verdict, &self.sig),
            system,
            warming_up,
        }
    }
}

/// Number of whole samples covering `seconds`.
pub fn samples<T: Scalar>(seconds: T, dt: T) -> u64 {
    (seconds / dt).ceil().to_u64().unwrap_or(0)
}

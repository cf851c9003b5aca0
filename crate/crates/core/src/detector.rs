//! Two-stage decision: the adaptive threshold gates, the fuzzy alarm index
//! confirms, and an m-of-n persistence rule turns both into confirmed
//! residual alarms. Alarm indices are mapped onto the process variables
//! through the signature matrix for display.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::{color_of, FuzzyEvaluator};
use crate::plant::Channel;
use crate::residuals::{ResidualVector, SignatureMatrix, RESIDUAL_COUNT};
use crate::scalar::{lit, Scalar};
use crate::threshold::exceeds;

/// Confirmation needs `m` qualifying samples among the last `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersistenceRule<T> {
    pub m: usize,
    pub n: usize,
    pub gamma: T,
}

impl<T: Scalar> Default for PersistenceRule<T> {
    fn default() -> Self {
        PersistenceRule {
            m: 5,
            n: 8,
            gamma: lit(0.5),
        }
    }
}

impl<T: Scalar> PersistenceRule<T> {
    pub fn validate(&self) -> Result<()> {
        if !(1 <= self.m && self.m <= self.n) {
            return Err(Error::config(
                "persistence",
                format!("need 1 <= m <= n, got m = {}, n = {}", self.m, self.n),
            ));
        }
        if !(self.gamma > T::zero() && self.gamma < T::one()) {
            return Err(Error::config("persistence.gamma", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DetectionMode {
    /// Persistent threshold exceedance alone confirms.
    ThresholdOnly,
    /// Exceedance and alarm index >= gamma must hold together.
    Hybrid,
}

impl std::str::FromStr for DetectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "threshold" | "thresholdOnly" | "threshold-only" => Ok(DetectionMode::ThresholdOnly),
            "hybrid" => Ok(DetectionMode::Hybrid),
            other => Err(Error::config("mode", format!("expected `threshold` or `hybrid`, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DetectionVerdict<T> {
    pub t: T,
    pub exceeded: [bool; RESIDUAL_COUNT],
    pub alarm_index: [T; RESIDUAL_COUNT],
    /// Index held from the previous sample because no rule fired.
    pub indeterminate: [bool; RESIDUAL_COUNT],
    pub confirmed: [bool; RESIDUAL_COUNT],
}

/// Runs both stages on one sample; `confirmed` is left false.
pub fn assess<T: Scalar>(
    t: T,
    r: &ResidualVector<T>,
    thr: &[T; RESIDUAL_COUNT],
    fuzzy: &mut FuzzyEvaluator<T>,
) -> Result<DetectionVerdict<T>> {
    let exceeded = exceeds(r, thr);
    let idx = fuzzy.evaluate(&r.to_array())?;
    Ok(DetectionVerdict {
        t,
        exceeded,
        alarm_index: idx.map(|a| a.value),
        indeterminate: idx.map(|a| a.indeterminate),
        confirmed: [false; RESIDUAL_COUNT],
    })
}

fn qualifies<T: Scalar>(v: &DetectionVerdict<T>, i: usize, rule: &PersistenceRule<T>, mode: DetectionMode) -> bool {
    match mode {
        DetectionMode::ThresholdOnly => v.exceeded[i],
        DetectionMode::Hybrid => v.exceeded[i] && v.alarm_index[i] >= rule.gamma,
    }
}

/// m-of-n persistence over the most recent `n` verdicts (fewer if the history is shorter).
pub fn confirm<T: Scalar>(
    history: &[DetectionVerdict<T>],
    rule: &PersistenceRule<T>,
    mode: DetectionMode,
) -> [bool; RESIDUAL_COUNT] {
    let window = &history[history.len().saturating_sub(rule.n)..];
    let mut out = [false; RESIDUAL_COUNT];
    for (i, o) in out.iter_mut().enumerate() {
        let hits = window.iter().filter(|v| qualifies(v, i, rule, mode)).count();
        *o = hits >= rule.m;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VariableState<T> {
    pub variable: Channel,
    pub suspicion: T,
    pub rgb: [u8; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VariableStateMap<T> {
    pub variables: [VariableState<T>; 7],
}

impl<T: Scalar> VariableStateMap<T> {
    pub fn suspicion(&self, c: Channel) -> T {
        self.variables[c.index()].suspicion
    }

    pub fn suspicions(&self) -> [T; 7] {
        self.variables.map(|v| v.suspicion)
    }

    pub fn from_suspicions(s: [T; 7]) -> Self {
        let mut i = 0;
        let variables = s.map(|suspicion| {
            let variable = Channel::ALL[i];
            i += 1;
            VariableState {
                variable,
                suspicion,
                rgb: color_of(suspicion),
            }
        });
        VariableStateMap { variables }
    }
}

/// Suspicion of a variable is the smallest alarm index among the residuals it enters.
pub fn variable_states<T: Scalar>(verdict: &DetectionVerdict<T>, sig: &SignatureMatrix) -> VariableStateMap<T> {
    let s = Channel::ALL.map(|c| {
        sig.column(c)
            .map(|i| verdict.alarm_index[i])
            .reduce(T::min)
            .unwrap_or_else(T::zero)
    });
    VariableStateMap::from_suspicions(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SystemVerdict {
    Normal,
    Faulty,
}

impl std::fmt::Display for SystemVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SystemVerdict::Normal => "normal",
            SystemVerdict::Faulty => "faulty",
        })
    }
}

/// Faulty as soon as any residual is confirmed in the window.
pub fn system_verdict<T: Scalar>(window: &[DetectionVerdict<T>]) -> SystemVerdict {
    if window.iter().any(|v| v.confirmed.iter().any(|&c| c)) {
        SystemVerdict::Faulty
    } else {
        SystemVerdict::Normal
    }
}

/// Confirmation flags of both modes for the same assessed sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModeConfirmations {
    pub threshold_only: [bool; RESIDUAL_COUNT],
    pub hybrid: [bool; RESIDUAL_COUNT],
}

impl ModeConfirmations {
    pub fn get(&self, mode: DetectionMode) -> [bool; RESIDUAL_COUNT] {
        match mode {
            DetectionMode::ThresholdOnly => self.threshold_only,
            DetectionMode::Hybrid => self.hybrid,
        }
    }
}

/// Per-stream decision state: the fuzzy evaluator and a bounded history.
#[derive(Debug, Clone)]
pub struct Detector<T> {
    rule: PersistenceRule<T>,
    fuzzy: FuzzyEvaluator<T>,
    history: VecDeque<DetectionVerdict<T>>,
}

impl<T: Scalar> Detector<T> {
    pub fn new(rule: PersistenceRule<T>, fuzzy: FuzzyEvaluator<T>) -> Result<Self> {
        rule.validate()?;
        Ok(Detector {
            rule,
            fuzzy,
            history: VecDeque::with_capacity(rule.n),
        })
    }

    pub fn rule(&self) -> &PersistenceRule<T> {
        &self.rule
    }

    pub fn fuzzy(&self) -> &FuzzyEvaluator<T> {
        &self.fuzzy
    }

    pub fn fuzzy_mut(&mut self) -> &mut FuzzyEvaluator<T> {
        &mut self.fuzzy
    }

    fn push(&mut self, v: DetectionVerdict<T>) -> ModeConfirmations {
        if self.history.len() == self.rule.n {
            self.history.pop_front();
        }
        self.history.push_back(v);
        let window = self.history.make_contiguous();
        ModeConfirmations {
            threshold_only: confirm(window, &self.rule, DetectionMode::ThresholdOnly),
            hybrid: confirm(window, &self.rule, DetectionMode::Hybrid),
        }
    }

    /// Assesses one sample and confirms it under both modes.
    pub fn step(
        &mut self,
        t: T,
        r: &ResidualVector<T>,
        thr: &[T; RESIDUAL_COUNT],
    ) -> Result<(DetectionVerdict<T>, ModeConfirmations)> {
        let v = assess(t, r, thr, &mut self.fuzzy)?;
        let conf = self.push(v);
        Ok((v, conf))
    }

    /// Records a sample that is not assessed (filter warm-up).
    pub fn idle(&mut self, t: T) -> (DetectionVerdict<T>, ModeConfirmations) {
        let v = DetectionVerdict {
            t,
            ..Default::default()
        };
        let conf = self.push(v);
        (v, conf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuzzy::{InputPartition, OutputPartition};
    use crate::residuals::signature;

    fn verdict(exc: bool, idx: f64) -> DetectionVerdict<f64> {
        DetectionVerdict {
            t: 0.0,
            exceeded: [exc, false, false, false, false],
            alarm_index: [idx, 0.0, 0.0, 0.0, 0.0],
            indeterminate: [false; 5],
            confirmed: [false; 5],
        }
    }

    fn evaluator(a: [f64; 4]) -> FuzzyEvaluator<f64> {
        let p = InputPartition::new(a[0], a[1], a[2], a[3]).unwrap();
        FuzzyEvaluator::new([p; 5], OutputPartition::default()).unwrap()
    }

    #[test]
    fn assess_zero_residuals() {
        let mut fz = evaluator([1.0, 2.0, 3.0, 4.0]);
        let v = assess(0.0, &ResidualVector::default(), &[0.5; 5], &mut fz).unwrap();
        assert_eq!(v.exceeded, [false; 5]);
        assert_eq!(v.alarm_index, [0.0; 5]);
    }

    #[test]
    fn assess_saturated_residual() {
        let mut fz = evaluator([1.0, 2.0, 3.0, 4.0]);
        let r = ResidualVector::from_array([0.0, 9.0, 0.0, 0.0, 0.0]);
        let v = assess(0.0, &r, &[0.5; 5], &mut fz).unwrap();
        assert_eq!(v.exceeded, [false, true, false, false, false]);
        assert_eq!(v.alarm_index[1], 1.0);
    }

    #[test]
    fn fuzzy_vetoes_small_exceedance() {
        // Threshold below a1: crossing with zero alarm index.
        let mut fz = evaluator([1.0, 2.0, 3.0, 4.0]);
        let r = ResidualVector::from_array([0.0, 0.8, 0.0, 0.0, 0.0]);
        let v = assess(0.0, &r, &[0.5; 5], &mut fz).unwrap();
        assert!(v.exceeded[1]);
        assert_eq!(v.alarm_index[1], 0.0);
        let history = vec![v; 8];
        let rule = PersistenceRule::default();
        assert!(confirm(&history, &rule, DetectionMode::ThresholdOnly)[1]);
        assert!(!confirm(&history, &rule, DetectionMode::Hybrid)[1]);
    }

    #[test]
    fn single_spike_never_confirms() {
        let rule = PersistenceRule::default();
        let mut h = vec![verdict(false, 0.0); 7];
        h.insert(3, verdict(true, 1.0));
        for end in 1..=h.len() {
            assert!(!confirm(&h[..end], &rule, DetectionMode::Hybrid)[0]);
            assert!(!confirm(&h[..end], &rule, DetectionMode::ThresholdOnly)[0]);
        }
    }

    #[test]
    fn persistent_fault_confirms() {
        let rule = PersistenceRule::default();
        let h = vec![verdict(true, 1.0); 5];
        assert!(confirm(&h, &rule, DetectionMode::Hybrid)[0]);
        assert!(!confirm(&h[..4], &rule, DetectionMode::Hybrid)[0]);
    }

    #[test]
    fn index_without_exceedance_never_confirms() {
        let rule = PersistenceRule::default();
        let h = vec![verdict(false, 1.0); 8];
        assert!(!confirm(&h, &rule, DetectionMode::Hybrid)[0]);
    }

    #[test]
    fn all_green_when_indices_zero() {
        let v = verdict(false, 0.0);
        let map = variable_states(&v, &signature());
        assert!(map.variables.iter().all(|s| s.rgb == [0, 255, 0] && s.suspicion == 0.0));
    }

    #[test]
    fn de2_signature_exonerates_neighbors() {
        // Hand enumeration: r2, r4, r5 saturated, r1, r3 quiet.
        let v = DetectionVerdict {
            t: 0.0,
            exceeded: [false, true, false, true, true],
            alarm_index: [0.0, 1.0, 0.0, 1.0, 1.0],
            indeterminate: [false; 5],
            confirmed: [false; 5],
        };
        let map = variable_states(&v, &signature());
        for c in Channel::ALL {
            let expected = if c == Channel::De2 { 1.0 } else { 0.0 };
            assert_eq!(map.suspicion(c), expected, "{c}");
        }
        assert_eq!(map.variables[Channel::De2.index()].rgb, [255, 0, 0]);
    }

    #[test]
    fn verdicts() {
        let mut v = verdict(true, 1.0);
        assert_eq!(system_verdict(&[v]), SystemVerdict::Normal);
        v.confirmed[3] = true;
        assert_eq!(system_verdict(&[verdict(false, 0.0), v]), SystemVerdict::Faulty);
    }

    #[test]
    fn rule_validation() {
        assert!(PersistenceRule { m: 0, n: 3, gamma: 0.5 }.validate().is_err());
        assert!(PersistenceRule { m: 4, n: 3, gamma: 0.5 }.validate().is_err());
        assert!(PersistenceRule { m: 2, n: 3, gamma: 1.0 }.validate().is_err());
    }

    #[test]
    fn detector_keeps_bounded_history() {
        let mut d = Detector::new(PersistenceRule::default(), evaluator([1.0, 2.0, 3.0, 4.0])).unwrap();
        let r = ResidualVector::from_array([9.0, 0.0, 0.0, 0.0, 0.0]);
        let mut confirmed_at = None;
        for k in 0..20 {
            let (_, c) = d.step(k as f64, &r, &[1.0; 5]).unwrap();
            if c.hybrid[0] && confirmed_at.is_none() {
                confirmed_at = Some(k);
            }
        }
        assert_eq!(confirmed_at, Some(4));
        assert_eq!(d.history.len(), 8);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("threshold".parse::<DetectionMode>().unwrap(), DetectionMode::ThresholdOnly);
        assert_eq!("hybrid".parse::<DetectionMode>().unwrap(), DetectionMode::Hybrid);
        assert!("fuzzy".parse::<DetectionMode>().is_err());
    }
}

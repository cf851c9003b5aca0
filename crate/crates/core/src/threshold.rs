//! Adaptive thresholds: a constant floor of `k` times the largest fault-free
//! residual, widened during input transients by lead-lag filtered inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{LeadLagFilter, LeadLagSpec};
use crate::plant::Inputs;
use crate::residuals::{ResidualVector, RESIDUAL_COUNT};
use crate::scalar::{count, lit, Scalar};

/// Persisted threshold calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ThresholdConfig<T> {
    /// Floor factor applied to `r_bar`.
    pub k: T,
    /// Per-residual calibrated maximum `|r|`; `None` until calibrated.
    pub r_bar: Option<[T; RESIDUAL_COUNT]>,
    /// `gains[i][j]`: weight of input `j`'s lead-lag output in threshold `i`.
    pub gains: [[T; 2]; RESIDUAL_COUNT],
    pub lead_lag: LeadLagSpec<T>,
}

impl<T: Scalar> Default for ThresholdConfig<T> {
    fn default() -> Self {
        ThresholdConfig {
            k: lit(4.0 / 3.0),
            r_bar: None,
            gains: [[T::zero(); 2]; RESIDUAL_COUNT],
            lead_lag: LeadLagSpec::default(),
        }
    }
}

impl<T: Scalar> ThresholdConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.k.is_finite() && self.k > T::zero()) {
            return Err(Error::config("threshold.k", "must be finite and > 0"));
        }
        if let Some(r_bar) = self.r_bar {
            if r_bar.iter().any(|v| !(v.is_finite() && *v >= T::zero())) {
                return Err(Error::config("threshold.rBar", "entries must be finite and >= 0"));
            }
        }
        let gains_ok = self
            .gains
            .iter()
            .flatten()
            .all(|g| g.is_finite() && *g >= T::zero());
        if !gains_ok {
            return Err(Error::config("threshold.gains", "entries must be finite and >= 0"));
        }
        self.lead_lag.validate()
    }

    /// `k · r_bar_i`, or an error when uncalibrated.
    pub fn floor(&self) -> Result<[T; RESIDUAL_COUNT]> {
        let r_bar = self
            .r_bar
            .ok_or_else(|| Error::Calibration("threshold config is uncalibrated (rBar missing)".into()))?;
        Ok(r_bar.map(|r| self.k * r))
    }
}

/// Statistic used to turn a fault-free run into `r_bar`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum FloorStatistic<T> {
    #[default]
    Max,
    Quantile {
        q: T,
    },
}

/// Per-residual `r_bar` from a fault-free, constant-input run.
///
/// The first `warmup` samples are discarded; at least `min_samples` must remain.
pub fn calibrate<T: Scalar>(
    run: &[ResidualVector<T>],
    warmup: usize,
    min_samples: usize,
    statistic: FloorStatistic<T>,
) -> Result<[T; RESIDUAL_COUNT]> {
    if run.len() <= warmup {
        return Err(Error::Calibration(format!(
            "run of {} samples does not extend past the {warmup}-sample warm-up",
            run.len()
        )));
    }
    let usable = &run[warmup..];
    if usable.len() < min_samples {
        return Err(Error::Calibration(format!(
            "only {} samples past warm-up, need at least {min_samples}",
            usable.len()
        )));
    }
    let mut out = [T::zero(); RESIDUAL_COUNT];
    for (i, slot) in out.iter_mut().enumerate() {
        let mut mags: Vec<T> = usable.iter().map(|r| r[i].abs()).collect();
        *slot = match statistic {
            FloorStatistic::Max => mags.iter().fold(T::zero(), |m, &v| m.max(v)),
            FloorStatistic::Quantile { q } => {
                if !(q > T::zero() && q <= T::one()) {
                    return Err(Error::config("calibration.quantile", "must lie in (0, 1]"));
                }
                mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let pos = (q * count::<T>(mags.len() - 1)).ceil().to_usize().unwrap_or(0);
                mags[pos.min(mags.len() - 1)]
            }
        };
    }
    Ok(out)
}

/// Gain that makes `gain · lead_lag_peak` equal `factor · transient_peak`.
pub fn allowance_gain<T: Scalar>(transient_peak: T, lead_lag_peak: T, factor: T) -> T {
    if lead_lag_peak > T::zero() {
        factor * transient_peak / lead_lag_peak
    } else {
        T::zero()
    }
}

/// Running threshold generator for one scenario stream.
#[derive(Debug, Clone)]
pub struct AdaptiveThreshold<T> {
    cfg: ThresholdConfig<T>,
    floor: [T; RESIDUAL_COUNT],
    filters: [LeadLagFilter<T>; 2],
    last: [T; RESIDUAL_COUNT],
}

impl<T: Scalar> AdaptiveThreshold<T> {
    pub fn new(cfg: ThresholdConfig<T>, dt: T) -> Result<Self> {
        cfg.validate()?;
        let floor = cfg.floor()?;
        let f = LeadLagFilter::new(cfg.lead_lag, dt)?;
        Ok(AdaptiveThreshold {
            cfg,
            floor,
            filters: [f.clone(), f],
            last: floor,
        })
    }

    pub fn config(&self) -> &ThresholdConfig<T> {
        &self.cfg
    }

    pub fn floor(&self) -> [T; RESIDUAL_COUNT] {
        self.floor
    }

    pub fn last(&self) -> [T; RESIDUAL_COUNT] {
        self.last
    }

    /// Changes the floor factor without touching filter memory.
    pub fn set_factor(&mut self, k: T) -> Result<()> {
        let cfg = ThresholdConfig { k, ..self.cfg };
        cfg.validate()?;
        self.floor = cfg.floor()?;
        self.cfg = cfg;
        Ok(())
    }

    /// DC-initializes the lead-lag filters on constant inputs.
    pub fn reset(&mut self, inputs: Inputs<T>) {
        self.filters[0].reset(inputs.msf1);
        self.filters[1].reset(inputs.msf2);
        self.last = self.floor;
    }

    pub fn step(&mut self, inputs: Inputs<T>) -> Result<[T; RESIDUAL_COUNT]> {
        let y = [
            self.filters[0].step(inputs.msf1)?.abs(),
            self.filters[1].step(inputs.msf2)?.abs(),
        ];
        let mut thr = self.floor;
        for (i, t) in thr.iter_mut().enumerate() {
            let g = self.cfg.gains[i];
            *t = *t + g[0] * y[0] + g[1] * y[1];
        }
        self.last = thr;
        Ok(thr)
    }
}

/// Strict crossing test: `|r_i| > thr_i`.
pub fn exceeds<T: Scalar>(r: &ResidualVector<T>, thr: &[T; RESIDUAL_COUNT]) -> [bool; RESIDUAL_COUNT] {
    let mut out = [false; RESIDUAL_COUNT];
    for (i, o) in out.iter_mut().enumerate() {
        *o = r[i].abs() > thr[i];
    }
    out
}

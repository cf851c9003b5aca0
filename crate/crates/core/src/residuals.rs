//! The five analytical redundancy relations of the three-tank process and
//! their structural signature.
//!
//! Relations 1-3 are tank balances, multiplied through by `C_i s` so they
//! can be evaluated with the band-limited derivatives from the
//! state-variable filters instead of integrating noisy signals. Relations 4
//! and 5 are the valve laws.

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{ButterworthSpec, Filtered, StateVariableFilter};
use crate::plant::{Channel, PlantParams, SensorFrame};
use crate::scalar::Scalar;

pub const RESIDUAL_COUNT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ResidualVector<T> {
    pub r1: T,
    pub r2: T,
    pub r3: T,
    pub r4: T,
    pub r5: T,
}

impl<T: Scalar> ResidualVector<T> {
    pub fn from_array(v: [T; 5]) -> Self {
        ResidualVector {
            r1: v[0],
            r2: v[1],
            r3: v[2],
            r4: v[3],
            r5: v[4],
        }
    }

    pub fn to_array(&self) -> [T; 5] {
        [self.r1, self.r2, self.r3, self.r4, self.r5]
    }

    pub fn max_abs(&self) -> T {
        self.to_array().iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

impl<T: Scalar> Index<usize> for ResidualVector<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.r1,
            1 => &self.r2,
            2 => &self.r3,
            3 => &self.r4,
            4 => &self.r5,
            _ => panic!("residual index {i} out of range"),
        }
    }
}

/// Evaluates the five relations on filtered channels given in [`Channel`] order.
pub fn compute_residuals<T: Scalar>(filtered: &[Filtered<T>], params: &PlantParams<T>) -> Result<ResidualVector<T>> {
    if filtered.len() != Channel::ALL.len() {
        return Err(Error::Structural(format!(
            "expected {} filtered channels, got {}",
            Channel::ALL.len(),
            filtered.len()
        )));
    }
    let v = |c: Channel| filtered[c.index()].value;
    let d = |c: Channel| filtered[c.index()].derivative;
    let p = params;
    let (msf1, msf2) = (v(Channel::Msf1), v(Channel::Msf2));
    let (de1, de2, de3) = (v(Channel::De1), v(Channel::De2), v(Channel::De3));
    let (df1, df2) = (v(Channel::Df1), v(Channel::Df2));
    Ok(ResidualVector {
        r1: msf1 - p.c1 * d(Channel::De1) - de1 / p.r1 - df1,
        r2: df1 - p.c2 * d(Channel::De2) - de2 / p.r2 - df2,
        r3: msf2 - df2 - p.c3 * d(Channel::De3) - de3 / p.r3,
        r4: (de3 - de2) / p.r23 - df2,
        r5: (de1 - de2) / p.r12 - df1,
    })
}

/// Boolean incidence of the seven variables in the five relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureMatrix {
    pub rows: [[bool; 7]; RESIDUAL_COUNT],
}

impl SignatureMatrix {
    pub fn get(&self, residual: usize, channel: Channel) -> bool {
        self.rows[residual][channel.index()]
    }

    pub fn row(&self, residual: usize) -> impl Iterator<Item = Channel> + '_ {
        Channel::ALL
            .into_iter()
            .filter(move |c| self.rows[residual][c.index()])
    }

    /// Residual indices in which `channel` appears.
    pub fn column(&self, channel: Channel) -> impl Iterator<Item = usize> + '_ {
        (0..RESIDUAL_COUNT).filter(move |&i| self.rows[i][channel.index()])
    }
}

pub fn signature() -> SignatureMatrix {
    use Channel::*;
    let incidence: [&[Channel]; RESIDUAL_COUNT] = [
        &[Msf1, De1, Df1],
        &[Df1, De2, Df2],
        &[Msf2, Df2, De3],
        &[De3, De2, Df2],
        &[De1, De2, Df1],
    ];
    let mut rows = [[false; 7]; RESIDUAL_COUNT];
    for (row, vars) in rows.iter_mut().zip(incidence) {
        for v in vars {
            row[v.index()] = true;
        }
    }
    SignatureMatrix { rows }
}

/// Seven identical state-variable filters feeding the relations.
#[derive(Debug, Clone)]
pub struct ResidualGenerator<T> {
    params: PlantParams<T>,
    filters: Vec<StateVariableFilter<T>>,
}

impl<T: Scalar> ResidualGenerator<T> {
    pub fn new(params: PlantParams<T>, spec: ButterworthSpec<T>) -> Result<Self> {
        let filter = StateVariableFilter::new(spec)?;
        Ok(ResidualGenerator {
            params,
            filters: vec![filter; Channel::ALL.len()],
        })
    }

    /// DC-initializes every channel filter on `frame`.
    pub fn reset(&mut self, frame: &SensorFrame<T>) {
        for (f, x) in self.filters.iter_mut().zip(frame.channels()) {
            f.reset(x);
        }
    }

    pub fn step(&mut self, frame: &SensorFrame<T>) -> Result<ResidualVector<T>> {
        let mut filtered = [Filtered::default(); 7];
        for ((f, x), out) in self.filters.iter_mut().zip(frame.channels()).zip(filtered.iter_mut()) {
            *out = f.step(x)?;
        }
        compute_residuals(&filtered, &self.params)
    }

    /// Residuals of the current filter outputs without advancing.
    pub fn current(&self) -> Result<ResidualVector<T>> {
        let filtered: Vec<_> = self.filters.iter().map(|f| f.output()).collect();
        compute_residuals(&filtered, &self.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::equilibrium;

    #[test]
    fn signature_rows() {
        let s = signature();
        let row1: Vec<_> = s.row(0).collect();
        assert_eq!(row1, vec![Channel::Msf1, Channel::De1, Channel::Df1]);
        for i in 0..RESIDUAL_COUNT {
            assert_eq!(s.row(i).count(), 3);
        }
    }

    #[test]
    fn signature_column_de2() {
        let cols: Vec<_> = signature().column(Channel::De2).collect();
        assert_eq!(cols, vec![1, 3, 4]);
    }

    #[test]
    fn channel_count_mismatch() {
        let p = PlantParams::<f64>::default();
        let err = compute_residuals(&[Filtered::default(); 6], &p).unwrap_err();
        assert!(matches!(err, Error::Structural(_)));
    }

    #[test]
    fn steady_state_residuals_vanish() {
        let p = PlantParams::<f64>::default();
        let (u1, u2) = (0.5, 0.3);
        let eq = equilibrium(&p, u1, u2).unwrap();
        let (df1, df2) = p.flows(eq.efforts());
        let values = [u1, u2, eq.de1, eq.de2, eq.de3, df1, df2];
        let filtered: Vec<_> = values
            .iter()
            .map(|&value| Filtered { value, derivative: 0.0 })
            .collect();
        let r = compute_residuals(&filtered, &p).unwrap();
        assert!(r.max_abs() < 1e-9 * (u1 + u2), "{r:?}");
    }

    #[test]
    fn de2_offset_substitution() {
        // Static substitution of de2 + delta into relations 2, 4, 5.
        let p = PlantParams::<f64>::default();
        let eq = equilibrium(&p, 0.5, 0.3).unwrap();
        let (df1, df2) = p.flows(eq.efforts());
        let delta = 250.0;
        let values = [0.5, 0.3, eq.de1, eq.de2 + delta, eq.de3, df1, df2];
        let filtered: Vec<_> = values
            .iter()
            .map(|&value| Filtered { value, derivative: 0.0 })
            .collect();
        let r = compute_residuals(&filtered, &p).unwrap();
        assert!((r.r2 + delta / p.r2).abs() < 1e-12);
        assert!((r.r4 + delta / p.r23).abs() < 1e-12);
        assert!((r.r5 + delta / p.r12).abs() < 1e-12);
        assert!(r.r1.abs() < 1e-12 && r.r3.abs() < 1e-12);
    }
}

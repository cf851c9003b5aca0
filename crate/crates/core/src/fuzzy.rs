//! Fuzzy residual evaluation: symmetric trapezoidal partition over
//! {NB, N, Z, P, PB}, a two-rule base (Z → OK, otherwise AL), scaled output
//! sets and a normalized centroid giving an alarm index in `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::residuals::RESIDUAL_COUNT;
use crate::scalar::{lit, Scalar};

/// Trapezoid rising on `[p, q]`, flat on `[q, r]`, falling on `[r, s]`.
/// Infinite `p`/`q` or `r`/`s` give open shoulders.
pub fn trapezoid<T: Scalar>(x: T, p: T, q: T, r: T, s: T) -> T {
    if x >= q && x <= r {
        T::one()
    } else if x < q {
        if x <= p {
            T::zero()
        } else {
            (x - p) / (q - p)
        }
    } else if x >= s {
        T::zero()
    } else {
        (s - x) / (s - r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPartition<T> {
    pub a1: T,
    pub a2: T,
    pub a3: T,
    pub a4: T,
}

impl<T: Scalar> InputPartition<T> {
    pub fn new(a1: T, a2: T, a3: T, a4: T) -> Result<Self> {
        let p = InputPartition { a1, a2, a3, a4 };
        p.validate()?;
        Ok(p)
    }

    /// Breakpoints at fixed multiples of a residual spread `sigma`.
    pub fn from_sigma(sigma: T, multiples: [T; 4]) -> Result<Self> {
        let [m1, m2, m3, m4] = multiples.map(|m| m * sigma);
        Self::new(m1, m2, m3, m4)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.a1, self.a2, self.a3, self.a4].iter().all(|v| v.is_finite())
            && T::zero() < self.a1
            && self.a1 < self.a2
            && self.a2 < self.a3
            && self.a3 < self.a4;
        if ok {
            Ok(())
        } else {
            Err(Error::config(
                "fuzzy.partition",
                format!(
                    "need 0 < a1 < a2 < a3 < a4, got ({}, {}, {}, {})",
                    self.a1, self.a2, self.a3, self.a4
                ),
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPartition<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
}

impl<T: Scalar> Default for OutputPartition<T> {
    fn default() -> Self {
        OutputPartition {
            a: lit(0.3),
            b: lit(0.45),
            c: lit(0.55),
            d: lit(0.7),
        }
    }
}

impl<T: Scalar> OutputPartition<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = T::zero() <= self.a
            && self.a <= self.b
            && self.b < self.c
            && self.c <= self.d
            && self.d <= T::one();
        if ok {
            Ok(())
        } else {
            Err(Error::config(
                "fuzzy.output",
                "need 0 <= a <= b < c <= d <= 1",
            ))
        }
    }

    pub fn ok_membership(&self, y: T) -> T {
        trapezoid(y, T::neg_infinity(), T::neg_infinity(), self.a, self.b)
    }

    pub fn al_membership(&self, y: T) -> T {
        trapezoid(y, self.c, self.d, T::infinity(), T::infinity())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MembershipVector<T> {
    pub nb: T,
    pub n: T,
    pub z: T,
    pub p: T,
    pub pb: T,
}

impl<T: Scalar> MembershipVector<T> {
    pub fn sum(&self) -> T {
        self.nb + self.n + self.z + self.p + self.pb
    }
}

fn positive<T: Scalar>(x: T, p: &InputPartition<T>) -> T {
    trapezoid(x, p.a1, p.a2, p.a3, p.a4)
}

fn positive_big<T: Scalar>(x: T, p: &InputPartition<T>) -> T {
    trapezoid(x, p.a3, p.a4, T::infinity(), T::infinity())
}

pub fn fuzzify<T: Scalar>(r: T, p: &InputPartition<T>) -> Result<MembershipVector<T>> {
    if !r.is_finite() {
        return Err(Error::config("residual", format!("cannot fuzzify non-finite value {r}")));
    }
    let m = r.abs();
    Ok(MembershipVector {
        nb: positive_big(-r, p),
        n: positive(-r, p),
        z: trapezoid(m, -p.a2, -p.a1, p.a1, p.a2),
        p: positive(r, p),
        pb: positive_big(r, p),
    })
}

/// Rule base: Z → OK; NB, N, P, PB → AL. Returns `(ok, al)` activation degrees.
pub fn infer<T: Scalar>(m: &MembershipVector<T>) -> (T, T) {
    let al = m.nb.max(m.n).max(m.p).max(m.pb);
    (m.z, al)
}

/// Area and first moment of the aggregated output set over `[0, 1]`.
fn aggregate_moments<T: Scalar>(ok: T, al: T, out: &OutputPartition<T>) -> (T, T) {
    let f = |y: T| (ok * out.ok_membership(y)).max(al * out.al_membership(y));
    let mut knots = vec![T::zero(), out.a, out.b, out.c, out.d, T::one()];
    knots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    knots.dedup();
    // Each piece is linear between knots except where the two scaled sets
    // cross; split there as well.
    let mut pts = Vec::with_capacity(knots.len() * 2);
    for w in knots.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        pts.push(x0);
        let g0 = ok * out.ok_membership(x0) - al * out.al_membership(x0);
        let g1 = ok * out.ok_membership(x1) - al * out.al_membership(x1);
        if g0 * g1 < T::zero() {
            pts.push(x0 + (x1 - x0) * g0 / (g0 - g1));
        }
    }
    pts.push(T::one());
    let (mut area, mut moment) = (T::zero(), T::zero());
    let (two, six) = (lit::<T>(2.0), lit::<T>(6.0));
    for w in pts.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let h = x1 - x0;
        if h <= T::zero() {
            continue;
        }
        let (f0, f1) = (f(x0), f(x1));
        area = area + h * (f0 + f1) / two;
        // ∫ x f(x) dx for linear f on [x0, x1]
        moment = moment + h * (f0 * (two * x0 + x1) + f1 * (x0 + two * x1)) / six;
    }
    (area, moment)
}

/// Raw centroid of the aggregated output set, or `None` when it is empty.
pub fn centroid<T: Scalar>(ok: T, al: T, out: &OutputPartition<T>) -> Option<T> {
    let (area, moment) = aggregate_moments(ok, al, out);
    (area > T::zero()).then(|| moment / area)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind", content = "value")]
pub enum Defuzzified<T> {
    Value(T),
    /// Both rule activations were zero.
    Indeterminate,
}

/// Normalized centroid: full OK maps to exactly 0, full AL to exactly 1.
pub fn defuzzify<T: Scalar>(ok: T, al: T, out: &OutputPartition<T>) -> Defuzzified<T> {
    // A single scaled set has the centroid of the unscaled one.
    match (ok > T::zero(), al > T::zero()) {
        (false, false) => return Defuzzified::Indeterminate,
        (true, false) => return Defuzzified::Value(T::zero()),
        (false, true) => return Defuzzified::Value(T::one()),
        (true, true) => {}
    }
    let Some(raw) = centroid(ok, al, out) else {
        return Defuzzified::Indeterminate;
    };
    let lo = centroid(T::one(), T::zero(), out).unwrap_or_else(T::zero);
    let hi = centroid(T::zero(), T::one(), out).unwrap_or_else(T::one);
    let v = ((raw - lo) / (hi - lo)).max(T::zero()).min(T::one());
    Defuzzified::Value(v)
}

/// Green (0) to red (1) color map, rounding half up.
pub fn color_of<T: Scalar>(value: T) -> [u8; 3] {
    let v = value.max(T::zero()).min(T::one()).as_f64();
    let round = |x: f64| (x + 0.5).floor().clamp(0.0, 255.0) as u8;
    [round(255.0 * v), round(255.0 * (1.0 - v)), 0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AlarmIndex<T> {
    pub value: T,
    #[serde(rename = "colorRGB")]
    pub color_rgb: [u8; 3],
    pub indeterminate: bool,
}

/// Complete residual evaluation for one residual.
pub fn evaluate<T: Scalar>(r: T, input: &InputPartition<T>, out: &OutputPartition<T>) -> Result<Defuzzified<T>> {
    let m = fuzzify(r, input)?;
    let (ok, al) = infer(&m);
    Ok(defuzzify(ok, al, out))
}

/// Per-residual evaluator that holds the last valid index through
/// indeterminate samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FuzzyEvaluator<T> {
    pub partitions: [InputPartition<T>; RESIDUAL_COUNT],
    pub output: OutputPartition<T>,
    #[serde(skip)]
    last: [T; RESIDUAL_COUNT],
}

impl<T: Scalar> FuzzyEvaluator<T> {
    pub fn new(partitions: [InputPartition<T>; RESIDUAL_COUNT], output: OutputPartition<T>) -> Result<Self> {
        for p in &partitions {
            p.validate()?;
        }
        output.validate()?;
        Ok(FuzzyEvaluator {
            partitions,
            output,
            last: [T::zero(); RESIDUAL_COUNT],
        })
    }

    pub fn set_partition(&mut self, residual: usize, p: InputPartition<T>) -> Result<()> {
        if residual >= RESIDUAL_COUNT {
            return Err(Error::config("residual", format!("index {residual} out of range")));
        }
        p.validate()?;
        self.partitions[residual] = p;
        Ok(())
    }

    pub fn evaluate(&mut self, r: &[T; RESIDUAL_COUNT]) -> Result<[AlarmIndex<T>; RESIDUAL_COUNT]> {
        let mut out = [AlarmIndex {
            value: T::zero(),
            color_rgb: color_of(T::zero()),
            indeterminate: false,
        }; RESIDUAL_COUNT];
        for i in 0..RESIDUAL_COUNT {
            let (value, indeterminate) = match evaluate(r[i], &self.partitions[i], &self.output)? {
                Defuzzified::Value(v) => (v, false),
                Defuzzified::Indeterminate => (self.last[i], true),
            };
            self.last[i] = value;
            out[i] = AlarmIndex {
                value,
                color_rgb: color_of(value),
                indeterminate,
            };
        }
        Ok(out)
    }
}

//! Plateau cutoffs `χ(t)` with a rising transition on `[x/R − 1, x/R]` and a
//! falling one on `[y/R, y/R + 1]`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Shape of the unit transition `s: [0,1] → [0,1]`, `s(0) = 0`, `s(1) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionShape {
    /// `35t⁴ − 84t⁵ + 70t⁶ − 20t⁷`, flat to third order at both ends.
    #[default]
    SmoothstepC3,
    /// `e^{−1/t} / (e^{−1/t} + e^{−1/(1−t)})`.
    BumpCinf,
}

impl TransitionShape {
    /// `sup |s′|`.
    pub fn c1(self) -> f64 {
        match self {
            TransitionShape::SmoothstepC3 => 35.0 / 16.0,
            TransitionShape::BumpCinf => 2.0,
        }
    }

    /// `sup |s″|`, attained at `t = (5 ∓ √5)/10` for the smoothstep.
    pub fn c2(self) -> f64 {
        match self {
            TransitionShape::SmoothstepC3 => 84.0 * 5f64.sqrt() / 25.0,
            // maximum near t ≈ 0.21826, rounded up
            TransitionShape::BumpCinf => 9.841_042_301_9,
        }
    }

    /// `(s, s′, s″)` at `t`, clamped to the constant extensions outside `[0,1]`.
    pub fn eval(self, t: f64) -> (f64, f64, f64) {
        if t <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        if t >= 1.0 {
            return (1.0, 0.0, 0.0);
        }
        match self {
            TransitionShape::SmoothstepC3 => {
                let u = 1.0 - t;
                let t2 = t * t;
                let s = t2 * t2 * (35.0 - 84.0 * t + 70.0 * t2 - 20.0 * t2 * t);
                let ds = 140.0 * t2 * t * u * u * u;
                let dds = 420.0 * t2 * u * u * (1.0 - 2.0 * t);
                (s, ds, dds)
            }
            TransitionShape::BumpCinf => {
                let u = 1.0 - t;
                let q = 1.0 / t - 1.0 / u;
                let p = 1.0 / (1.0 + q.exp());
                let pc = 1.0 / (1.0 + (-q).exp());
                let pq = p * pc;
                let big_q = 1.0 / (t * t) + 1.0 / (u * u);
                let ds = pq * big_q;
                let dbig_q = -2.0 / (t * t * t) + 2.0 / (u * u * u);
                let dds = ds * (1.0 - 2.0 * p) * big_q + pq * dbig_q;
                (p, ds, dds)
            }
        }
    }
}

/// Cutoff layout in radius units: plateau `[x, y]`, transitions of width `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub x: f64,
    pub y: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(default)]
    pub shape: TransitionShape,
}

impl CutoffSpec {
    pub fn new(x: f64, y: f64, r: f64, shape: TransitionShape) -> Result<Self> {
        let spec = Self { x, y, r, shape };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let Self { x, y, r, .. } = *self;
        if !(x.is_finite() && y.is_finite() && r.is_finite()) {
            return Err(Error::Parameter(format!("cutoff parameters must be finite: x={x}, y={y}, R={r}")));
        }
        if !(2.0 * r > 4.0 && x > 2.0 * r) {
            return Err(Error::Parameter(format!("cutoff needs x > 2R > 4, got x={x}, R={r}")));
        }
        if !(y > x + 2.0 * r) {
            return Err(Error::Parameter(format!("cutoff needs y > x + 2R, got x={x}, y={y}, R={r}")));
        }
        Ok(())
    }

    /// `[x − R, y + R]`.
    pub fn support(&self) -> (f64, f64) {
        (self.x - self.r, self.y + self.r)
    }

    /// Radii where the cutoff switches between constant and transition pieces.
    pub fn breakpoints(&self) -> [f64; 4] {
        [self.x - self.r, self.x, self.y, self.y + self.r]
    }

    pub fn build(&self) -> Result<Cutoff> {
        self.validate()?;
        Ok(Cutoff { spec: *self })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    spec: CutoffSpec,
}

impl Cutoff {
    pub fn spec(&self) -> &CutoffSpec {
        &self.spec
    }

    pub fn c1(&self) -> f64 {
        self.spec.shape.c1()
    }

    pub fn c2(&self) -> f64 {
        self.spec.shape.c2()
    }

    /// `(χ, χ′, χ″)` in the scaled variable `t = r/R`.
    pub fn eval_scaled(&self, t: f64) -> (f64, f64, f64) {
        let CutoffSpec { x, y, r, shape } = self.spec;
        let (lo, hi) = (x / r, y / r);
        if t < lo {
            shape.eval(t - (lo - 1.0))
        } else if t > hi {
            let (s, ds, dds) = shape.eval(hi + 1.0 - t);
            (s, -ds, dds)
        } else {
            (1.0, 0.0, 0.0)
        }
    }

    /// `(χ(r/R), d/dr, d²/dr²)`.
    pub fn eval(&self, radius: f64) -> (f64, f64, f64) {
        let r = self.spec.r;
        let CutoffSpec { x, y, .. } = self.spec;
        // Evaluate transitions in radius offsets to avoid cancellation in r/R − x/R.
        let (s, ds, dds) = if radius < x {
            self.spec.shape.eval((radius - (x - r)) / r)
        } else if radius > y {
            let (s, ds, dds) = self.spec.shape.eval((y + r - radius) / r);
            (s, -ds, dds)
        } else {
            (1.0, 0.0, 0.0)
        };
        (s, ds / r, dds / (r * r))
    }
}

//! Rotationally symmetric model manifolds `dr² + f(r)² g_{S^{n-1}}`.
//!
//! A [`ModelManifold`] pairs a dimension with a [`WarpingProfile`] and a pole
//! cutoff `r₀`. All radial geometry needed downstream lives here: the warping
//! function and its derivatives, `Δr = (n−1) f′/f`, the radial Ricci
//! curvature `−(n−1) f″/f`, ball volumes, tail volumes of finite-volume ends,
//! the Riccati comparison envelope for `Δr`, and the asymptotic report used
//! as the hypothesis check before any certification.
//!
//! Singular profiles (the cusps) are only defined for `r ≥ r₀`; asking for a
//! smaller radius is a domain error. Pole-regular profiles (Euclidean,
//! hyperbolic, flat soliton) are defined down to `r = 0`, and their volumes
//! are measured from the pole.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::quadrature::Quadrature;
use crate::{Error, Result};

const VOLUME_REL_TOL: f64 = 1e-12;
const REPORT_REL_TOL: f64 = 1e-9;
const REPORT_SAMPLES: usize = 1000;
const MIN_REPORT_SPAN: f64 = 10.0;
const LIMSUP_WINDOW: f64 = 0.10;
const EXP_DECAY_MIN_R2: f64 = 0.99;
const EXP_DECAY_MIN_SLOPE: f64 = 0.05;

/// Monotone cubic (Fritsch–Carlson) interpolant of sampled `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledProfile {
    radii: Vec<f64>,
    values: Vec<f64>,
    #[serde(skip)]
    slopes: Vec<f64>,
}

impl SampledProfile {
    pub fn new(radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if radii.len() != values.len() || radii.len() < 2 {
            return Err(Error::Input(format!(
                "custom profile needs at least two (r, f) pairs, got {} radii and {} values",
                radii.len(),
                values.len()
            )));
        }
        if radii.windows(2).any(|w| !(w[1] > w[0])) || radii.iter().any(|r| !r.is_finite()) {
            return Err(Error::Input("custom profile radii must be strictly increasing".into()));
        }
        if values.iter().any(|&f| !(f > 0.0 && f.is_finite())) {
            return Err(Error::Input("custom profile values must be strictly positive".into()));
        }
        let slopes = pchip_slopes(&radii, &values);
        Ok(Self {
            radii,
            values,
            slopes,
        })
    }

    /// Reads a two-column `r,f` CSV; non-numeric rows (headers) are skipped.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut radii = Vec::new();
        let mut values = Vec::new();
        for record in reader.records() {
            let record = record?;
            if record.len() < 2 {
                continue;
            }
            match (record[0].parse::<f64>(), record[1].parse::<f64>()) {
                (Ok(r), Ok(f)) => {
                    radii.push(r);
                    values.push(f);
                }
                _ if radii.is_empty() => continue,
                _ => {
                    return Err(Error::Input(format!(
                        "non-numeric row in custom profile {}",
                        path.display()
                    )))
                }
            }
        }
        Self::new(radii, values)
    }

    pub fn range(&self) -> (f64, f64) {
        (self.radii[0], *self.radii.last().unwrap())
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.radii.iter().copied().zip(self.values.iter().copied())
    }

    fn eval(&self, r: f64) -> Result<WarpValues> {
        let (lo, hi) = self.range();
        if !(r >= lo && r <= hi) {
            return Err(Error::Domain(format!(
                "r = {r} outside custom profile range [{lo}, {hi}]"
            )));
        }
        let k = match self.radii.partition_point(|&x| x <= r) {
            0 => 0,
            i => (i - 1).min(self.radii.len() - 2),
        };
        let h = self.radii[k + 1] - self.radii[k];
        let t = (r - self.radii[k]) / h;
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (d0, d1) = (self.slopes[k] * h, self.slopes[k + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let f = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * d1;
        let df = ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * d1)
            / h;
        let ddf = ((12.0 * t - 6.0) * y0
            + (6.0 * t - 4.0) * d0
            + (-12.0 * t + 6.0) * y1
            + (6.0 * t - 2.0) * d1)
            / (h * h);
        Ok(WarpValues { f, df, ddf })
    }

    fn ensure_slopes(&mut self) {
        if self.slopes.len() != self.radii.len() {
            self.slopes = pchip_slopes(&self.radii, &self.values);
        }
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    let mut d = vec![0.0; n];
    d[0] = delta[0];
    d[n - 1] = delta[n - 2];
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    d
}

/// Warping function family. Cusp parameters describe `f^{n−1}` directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WarpingProfile {
    /// `f(r) = r`.
    Euclidean,
    /// `f(r) = sinh(√k r)/√k`.
    Hyperbolic { curvature: f64 },
    /// `f(r)^{n−1} = (1+r)^{−p}`, finite volume for `p > 1`.
    PowerCusp { exponent: f64 },
    /// `f(r)^{n−1} = e^{−a r}`.
    ExpCusp { rate: f64 },
    /// Flat space carrying the Gaussian shrinking soliton potential `|x|²/4`.
    SolitonFlat,
    Custom(SampledProfile),
}

impl WarpingProfile {
    pub fn is_pole_regular(&self) -> bool {
        matches!(
            self,
            WarpingProfile::Euclidean | WarpingProfile::Hyperbolic { .. } | WarpingProfile::SolitonFlat
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            WarpingProfile::Euclidean => "euclidean",
            WarpingProfile::Hyperbolic { .. } => "hyperbolic",
            WarpingProfile::PowerCusp { .. } => "power_cusp",
            WarpingProfile::ExpCusp { .. } => "exp_cusp",
            WarpingProfile::SolitonFlat => "soliton_flat",
            WarpingProfile::Custom(_) => "custom",
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::Parameter(format!("{what} = {v} is not admissible")));
        match *self {
            WarpingProfile::Hyperbolic { curvature } if !(curvature > 0.0 && curvature.is_finite()) => {
                bad("hyperbolic curvature", curvature)
            }
            WarpingProfile::PowerCusp { exponent } if !(exponent > 1.0 && exponent.is_finite()) => {
                bad("power cusp exponent", exponent)
            }
            WarpingProfile::ExpCusp { rate } if !(rate > 0.0 && rate.is_finite()) => bad("exp cusp rate", rate),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WarpValues {
    pub f: f64,
    pub df: f64,
    pub ddf: f64,
}

fn ln_sinh(x: f64) -> f64 {
    if x > 20.0 {
        x - std::f64::consts::LN_2 + (-(-2.0 * x).exp()).ln_1p()
    } else {
        x.sinh().ln()
    }
}

/// Area of the unit `(n−1)`-sphere, `2π^{n/2}/Γ(n/2)`, by the two-step recurrence.
pub fn unit_sphere_area(n: usize) -> f64 {
    match n {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI / (n as f64 - 2.0) * unit_sphere_area(n - 2),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelManifold {
    dimension: usize,
    profile: WarpingProfile,
    r0: f64,
    sphere_area: f64,
}

impl ModelManifold {
    pub fn new(dimension: usize, profile: WarpingProfile, r0: f64) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::Parameter(format!("dimension must be at least 2, got {dimension}")));
        }
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(Error::Parameter(format!("pole cutoff r0 must be positive, got {r0}")));
        }
        profile.validate()?;
        let mut profile = profile;
        if let WarpingProfile::Custom(samples) = &mut profile {
            samples.ensure_slopes();
            let (lo, hi) = samples.range();
            if r0 < lo || r0 >= hi {
                return Err(Error::Parameter(format!(
                    "r0 = {r0} must lie inside the custom sample range [{lo}, {hi})"
                )));
            }
        }
        Ok(Self {
            dimension,
            profile,
            r0,
            sphere_area: unit_sphere_area(dimension),
        })
    }

    pub fn from_spec(spec: &ManifoldSpec) -> Result<Self> {
        spec.build()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn profile(&self) -> &WarpingProfile {
        &self.profile
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn sphere_area(&self) -> f64 {
        self.sphere_area
    }

    fn m(&self) -> f64 {
        (self.dimension - 1) as f64
    }

    /// Radius from which ball volumes are measured: the pole for regular
    /// profiles, `r₀` otherwise.
    pub fn volume_origin(&self) -> f64 {
        if self.profile.is_pole_regular() {
            0.0
        } else {
            self.r0
        }
    }

    fn check_radius(&self, r: f64) -> Result<()> {
        if !r.is_finite() {
            return Err(Error::Domain(format!("radius {r} is not finite")));
        }
        let min = self.volume_origin();
        if r < min {
            return Err(Error::Domain(format!(
                "r = {r} below the domain start {min} of the {} profile",
                self.profile.name()
            )));
        }
        Ok(())
    }

    fn check_away_from_pole(&self, r: f64) -> Result<()> {
        if !(r >= self.r0) {
            return Err(Error::Domain(format!("r = {r} is below the pole cutoff r0 = {}", self.r0)));
        }
        Ok(())
    }

    /// `(f, f′, f″)` at `r`.
    pub fn warp_eval(&self, r: f64) -> Result<WarpValues> {
        self.check_radius(r)?;
        let m = self.m();
        Ok(match &self.profile {
            WarpingProfile::Euclidean | WarpingProfile::SolitonFlat => WarpValues { f: r, df: 1.0, ddf: 0.0 },
            WarpingProfile::Hyperbolic { curvature } => {
                let s = curvature.sqrt();
                let f = (s * r).sinh() / s;
                WarpValues {
                    f,
                    df: (s * r).cosh(),
                    ddf: curvature * f,
                }
            }
            WarpingProfile::PowerCusp { exponent } => {
                let q = exponent / m;
                let f = (1.0 + r).powf(-q);
                WarpValues {
                    f,
                    df: -q * f / (1.0 + r),
                    ddf: q * (q + 1.0) * f / ((1.0 + r) * (1.0 + r)),
                }
            }
            WarpingProfile::ExpCusp { rate } => {
                let q = rate / m;
                let f = (-q * r).exp();
                WarpValues {
                    f,
                    df: -q * f,
                    ddf: q * q * f,
                }
            }
            WarpingProfile::Custom(samples) => samples.eval(r)?,
        })
    }

    /// `ln f(r)`, stable where `f` itself over- or underflows.
    pub fn log_warp(&self, r: f64) -> Result<f64> {
        self.check_radius(r)?;
        let m = self.m();
        Ok(match &self.profile {
            WarpingProfile::Euclidean | WarpingProfile::SolitonFlat => r.ln(),
            WarpingProfile::Hyperbolic { curvature } => {
                let s = curvature.sqrt();
                ln_sinh(s * r) - s.ln()
            }
            WarpingProfile::PowerCusp { exponent } => -exponent / m * r.ln_1p(),
            WarpingProfile::ExpCusp { rate } => -rate / m * r,
            WarpingProfile::Custom(samples) => samples.eval(r)?.f.ln(),
        })
    }

    /// `ln f(r)^{n−1}`, the log of the radial volume density without `ω_{n−1}`.
    pub fn log_density(&self, r: f64) -> Result<f64> {
        Ok(self.m() * self.log_warp(r)?)
    }

    /// `f′/f`, falling back to closed forms when the ratio of evaluator
    /// outputs is not representable.
    pub fn log_derivative(&self, r: f64) -> Result<f64> {
        let w = self.warp_eval(r)?;
        let ratio = w.df / w.f;
        if ratio.is_finite() {
            return Ok(ratio);
        }
        let m = self.m();
        match &self.profile {
            WarpingProfile::Hyperbolic { curvature } => {
                let s = curvature.sqrt();
                Ok(s / (s * r).tanh())
            }
            WarpingProfile::PowerCusp { exponent } => Ok(-exponent / m / (1.0 + r)),
            WarpingProfile::ExpCusp { rate } => Ok(-rate / m),
            _ => Err(Error::Domain(format!("f′/f is not finite at r = {r}"))),
        }
    }

    /// Laplacian of the distance to the pole, `(n−1) f′(r)/f(r)`.
    pub fn delta_r(&self, r: f64) -> Result<f64> {
        self.check_away_from_pole(r)?;
        Ok(self.m() * self.log_derivative(r)?)
    }

    /// `Ric(∂r, ∂r) = −(n−1) f″/f`.
    pub fn radial_ricci(&self, r: f64) -> Result<f64> {
        self.check_away_from_pole(r)?;
        let m = self.m();
        let ratio = match &self.profile {
            WarpingProfile::Custom(_) => {
                return Err(Error::Capability(
                    "custom sampled profiles carry no second-derivative data".into(),
                ))
            }
            WarpingProfile::Hyperbolic { curvature } => *curvature,
            _ => {
                let w = self.warp_eval(r)?;
                w.ddf / w.f
            }
        };
        Ok(-m * ratio)
    }

    pub fn has_finite_volume(&self) -> bool {
        matches!(
            self.profile,
            WarpingProfile::PowerCusp { .. } | WarpingProfile::ExpCusp { .. }
        )
    }

    fn volume_breakpoints(&self) -> Vec<f64> {
        match &self.profile {
            WarpingProfile::Custom(samples) => samples.radii.clone(),
            _ => Vec::new(),
        }
    }

    fn volume_between(&self, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        // integrate relative to the largest density at a few probes so that
        // the panel sums themselves cannot overflow
        let mut shift = f64::NEG_INFINITY;
        for r in [a, 0.5 * (a + b), b] {
            if r > 0.0 || !self.profile.is_pole_regular() {
                shift = shift.max(self.log_density(r)?);
            }
        }
        let q = Quadrature::relative(rel_tol)
            .with_breakpoints(self.volume_breakpoints())
            .integrate(
                |r| match self.log_density(r) {
                    Ok(ld) if r > 0.0 || !self.profile.is_pole_regular() => (ld - shift).exp(),
                    Ok(_) => 0.0,
                    Err(_) => f64::NAN,
                },
                a,
                b,
            )?;
        Ok(q.value * (self.sphere_area.ln() + shift).exp())
    }

    /// `(V(R), A(R))`: ball volume from [`Self::volume_origin`] and sphere area.
    pub fn volume_area(&self, radius: f64) -> Result<(f64, f64)> {
        if !self.profile.is_pole_regular() {
            self.check_away_from_pole(radius)?;
        }
        self.check_radius(radius)?;
        let area = self.area(radius)?;
        let volume = self.volume_between(self.volume_origin(), radius, VOLUME_REL_TOL)?;
        Ok((volume, area))
    }

    pub fn area(&self, radius: f64) -> Result<f64> {
        if radius == 0.0 && self.profile.is_pole_regular() {
            return Ok(0.0);
        }
        Ok((self.sphere_area.ln() + self.log_density(radius)?).exp())
    }

    /// Volume between the spheres of radius `s ≤ t`.
    pub fn annulus_volume(&self, s: f64, t: f64) -> Result<f64> {
        self.check_radius(s)?;
        self.check_radius(t)?;
        if s > t {
            return Err(Error::Domain(format!("annulus bounds out of order: {s} > {t}")));
        }
        self.volume_between(s, t, VOLUME_REL_TOL)
    }

    /// `ln(vol(M) − V(r))` for finite-volume ends, computed relative to the
    /// density at `r` so deep tails do not underflow.
    pub fn log_tail_volume(&self, r: f64) -> Result<f64> {
        if !self.has_finite_volume() {
            return Err(Error::Domain(format!(
                "the {} profile has infinite volume",
                self.profile.name()
            )));
        }
        self.check_away_from_pole(r)?;
        let base = self.log_density(r)?;
        let q = Quadrature::relative(VOLUME_REL_TOL).integrate_to_infinity(
            |t| match self.log_density(r + t) {
                Ok(ld) => (ld - base).exp(),
                Err(_) => f64::NAN,
            },
            0.0,
        )?;
        Ok(self.sphere_area.ln() + base + q.value.ln())
    }

    pub fn total_volume(&self) -> Option<f64> {
        if !self.has_finite_volume() {
            return None;
        }
        self.log_tail_volume(self.r0).ok().map(f64::exp)
    }

    /// Integrates the Riccati comparison `u′ = (n−1)δ(r) − u²/(n−1)` from
    /// `u(a) = Δr(a)` with classical RK4 at the given step. The returned
    /// upper envelope adds the step-doubling error estimate to the raw
    /// solution so that it dominates `Δr` at every sample.
    pub fn riccati_envelope<D>(&self, delta: D, a: f64, b: f64, step: f64) -> Result<RiccatiEnvelope>
    where
        D: Fn(f64) -> f64,
    {
        if !(step > 0.0 && step.is_finite()) || !(b > a) {
            return Err(Error::Parameter(format!(
                "need a < b and a positive step, got [{a}, {b}] with step {step}"
            )));
        }
        self.check_away_from_pole(a)?;
        let m = self.m();
        let steps = ((b - a) / step).round().max(2.0) as usize;
        let h = (b - a) / steps as f64;

        let verified = match self.radial_ricci(a) {
            Ok(_) => {
                for i in 0..=steps {
                    let r = a + h * i as f64;
                    let needed = -self.radial_ricci(r)? / m;
                    if delta(r) < needed - 1e-12 * needed.abs().max(1.0) {
                        return Err(Error::Input(format!(
                            "δ({r}) = {} is below −Ric(∂r,∂r)/(n−1) = {needed}",
                            delta(r)
                        )));
                    }
                }
                true
            }
            Err(Error::Capability(_)) => false,
            Err(e) => return Err(e),
        };

        let u0 = self.delta_r(a)?;
        let rhs = |r: f64, u: f64| m * delta(r) - u * u / m;
        let fine = rk4_path(&rhs, a, u0, h, steps);
        let coarse = rk4_path(&rhs, a, u0, 2.0 * h, steps / 2);

        let len = fine.len();
        let blowup_at = (len <= steps).then_some(a + h * len as f64);
        let mut radii = Vec::with_capacity(len);
        let mut upper = Vec::with_capacity(len);
        let mut doubling_change: f64 = 0.0;
        for (i, &u) in fine.iter().enumerate() {
            let j = i / 2;
            let est = if j < coarse.len() && (i % 2 == 0) {
                (u - coarse[j]).abs()
            } else {
                let lo = coarse.get(j).map(|c| (fine[(2 * j).min(len - 1)] - c).abs());
                let hi = coarse.get(j + 1).and_then(|c| fine.get(2 * j + 2).map(|f| (f - c).abs()));
                lo.into_iter().chain(hi).fold(0.0, f64::max)
            };
            if i % 2 == 0 && j < coarse.len() {
                doubling_change = doubling_change.max(est);
            }
            radii.push(a + h * i as f64);
            upper.push(u + est / 15.0 + 1e-12 * (1.0 + u.abs()));
        }

        Ok(RiccatiEnvelope {
            radii,
            raw: fine,
            upper,
            step: h,
            doubling_change,
            blowup_at,
            precondition_verified: verified,
        })
    }

    /// Samples radial geometry and volume on `[r₀, r_max]` and classifies the
    /// end: `limsup Δr` over the last tenth of the range, `C(ε)` for each
    /// requested `ε`, and the volume decay class for finite-volume ends.
    pub fn asymptotic_report(&self, r_max: f64, epsilons: &[f64]) -> Result<AsymptoticReport> {
        if !(r_max >= self.r0 + MIN_REPORT_SPAN) {
            return Err(Error::Parameter(format!(
                "r_max = {r_max} leaves fewer than 100 samples above r0 = {}",
                self.r0
            )));
        }
        let n = REPORT_SAMPLES;
        let radii: Vec<f64> = (0..n)
            .map(|i| self.r0 + (r_max - self.r0) * i as f64 / (n - 1) as f64)
            .collect();
        let delta_r = radii.iter().map(|&r| self.delta_r(r)).collect::<Result<Vec<_>>>()?;

        let mut envelope = vec![0.0; n];
        let mut running: f64 = 0.0;
        for i in (0..n).rev() {
            running = running.max(delta_r[i]);
            envelope[i] = running;
        }

        let window_start = self.r0 + (1.0 - LIMSUP_WINDOW) * (r_max - self.r0);
        let limsup_delta_r = radii
            .iter()
            .zip(&delta_r)
            .filter(|(r, _)| **r >= window_start)
            .map(|(_, d)| *d)
            .fold(f64::NEG_INFINITY, f64::max);

        let mut volume = Vec::with_capacity(n);
        let mut acc = match self.volume_between(self.volume_origin(), radii[0], REPORT_REL_TOL) {
            Ok(v) => v,
            Err(Error::Evaluation { .. }) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        volume.push(acc);
        for pair in radii.windows(2) {
            if acc.is_finite() {
                acc = match self.volume_between(pair[0], pair[1], REPORT_REL_TOL) {
                    Ok(dv) if (acc + dv).is_finite() => acc + dv,
                    Ok(_) | Err(Error::Evaluation { .. }) => f64::INFINITY,
                    Err(e) => return Err(e),
                };
            }
            volume.push(acc);
        }

        let subexp_constants = epsilons
            .iter()
            .map(|&eps| {
                let c = radii
                    .iter()
                    .zip(&volume)
                    .map(|(r, v)| (v.ln() - eps * r).exp())
                    .fold(0.0, f64::max);
                SubexpConstant { epsilon: eps, constant: c }
            })
            .collect();

        let volume_finite = self.has_finite_volume();
        let (decay_class, decay_fit) = if volume_finite {
            let (class, fit) = self.classify_decay(&radii)?;
            (class, Some(fit))
        } else {
            (DecayClass::None, None)
        };

        Ok(AsymptoticReport {
            r_max,
            radii,
            delta_r,
            envelope,
            volume,
            limsup_delta_r,
            subexp_constants,
            volume_finite,
            total_volume: self.total_volume(),
            decay_class,
            decay_fit,
        })
    }

    fn classify_decay(&self, radii: &[f64]) -> Result<(DecayClass, DecayFit)> {
        let half = radii.len() / 2;
        let window = &radii[half..];
        let log_tail = window
            .iter()
            .map(|&r| self.log_tail_volume(r))
            .collect::<Result<Vec<_>>>()?;
        let (slope, r_squared) = linear_fit(window, &log_tail);
        let logs: Vec<f64> = window.iter().map(|r| r.ln()).collect();
        let (loglog_slope, loglog_r2) = linear_fit(&logs, &log_tail);
        let threshold = window[0];

        let exp_rate = window
            .iter()
            .zip(&log_tail)
            .map(|(r, lt)| -lt / r)
            .fold(f64::INFINITY, f64::min)
            .min(-slope);
        let class = if r_squared >= EXP_DECAY_MIN_R2 && slope <= -EXP_DECAY_MIN_SLOPE && exp_rate > 0.0 {
            DecayClass::Exponential { epsilon0: exp_rate }
        } else {
            DecayClass::Polynomial { rate: -loglog_slope }
        };
        Ok((
            class,
            DecayFit {
                slope,
                r_squared,
                loglog_slope,
                loglog_r_squared: loglog_r2,
                threshold,
            },
        ))
    }
}

fn rk4_path<F: Fn(f64, f64) -> f64>(rhs: &F, a: f64, u0: f64, h: f64, steps: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut u = u0;
    out.push(u);
    for i in 0..steps {
        let r = a + h * i as f64;
        let k1 = rhs(r, u);
        let k2 = rhs(r + 0.5 * h, u + 0.5 * h * k1);
        let k3 = rhs(r + 0.5 * h, u + 0.5 * h * k2);
        let k4 = rhs(r + h, u + h * k3);
        u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !u.is_finite() || u < -1e12 {
            break;
        }
        out.push(u);
    }
    out
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (xi, yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
        syy += (yi - my) * (yi - my);
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

#[derive(Debug, Clone, Serialize)]
pub struct RiccatiEnvelope {
    pub radii: Vec<f64>,
    /// RK4 solution at the requested step.
    pub raw: Vec<f64>,
    /// Raw solution plus the step-doubling error bound.
    pub upper: Vec<f64>,
    pub step: f64,
    /// Largest change in `u` between step `h` and `2h` at shared samples.
    pub doubling_change: f64,
    /// Radius where `u → −∞` (a conjugate point); samples stop there.
    pub blowup_at: Option<f64>,
    pub precondition_verified: bool,
}

impl RiccatiEnvelope {
    /// Largest envelope value over the last tenth of the integrated range.
    pub fn tail_limsup(&self) -> f64 {
        let a = self.radii[0];
        let end = *self.radii.last().unwrap();
        let start = a + (1.0 - LIMSUP_WINDOW) * (end - a);
        self.radii
            .iter()
            .zip(&self.upper)
            .filter(|(r, _)| **r >= start)
            .map(|(_, u)| *u)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubexpConstant {
    pub epsilon: f64,
    pub constant: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum DecayClass {
    None,
    Polynomial { rate: f64 },
    Exponential { epsilon0: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Slope of `ln(vol(M) − V(r))` against `r` over the last half of the range.
    pub slope: f64,
    pub r_squared: f64,
    /// Slope of `ln(vol(M) − V(r))` against `ln r`.
    pub loglog_slope: f64,
    pub loglog_r_squared: f64,
    /// Start of the fitted window.
    pub threshold: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticReport {
    pub r_max: f64,
    #[serde(skip)]
    pub radii: Vec<f64>,
    #[serde(skip)]
    pub delta_r: Vec<f64>,
    /// Nonincreasing, nonnegative upper envelope `m(r) ≥ Δr`.
    #[serde(skip)]
    pub envelope: Vec<f64>,
    #[serde(skip)]
    pub volume: Vec<f64>,
    pub limsup_delta_r: f64,
    pub subexp_constants: Vec<SubexpConstant>,
    pub volume_finite: bool,
    pub total_volume: Option<f64>,
    pub decay_class: DecayClass,
    pub decay_fit: Option<DecayFit>,
}

/// JSON form of a manifold: `{"kind": "...", "params": {...}, "dimension": n, "r0": x}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    pub kind: String,
    #[serde(default)]
    pub params: Map<String, Value>,
    pub dimension: usize,
    #[serde(default = "default_r0")]
    pub r0: f64,
}

fn default_r0() -> f64 {
    1.0
}

impl ManifoldSpec {
    pub fn new(kind: &str, dimension: usize, r0: f64) -> Self {
        Self {
            kind: kind.to_string(),
            params: Map::new(),
            dimension,
            r0,
        }
    }

    pub fn with_param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    fn number(&self, key: &str, default: Option<f64>) -> Result<f64> {
        match self.params.get(key) {
            Some(v) => v
                .as_f64()
                .ok_or_else(|| Error::Config(format!("param {key} of {} must be a number", self.kind))),
            None => default.ok_or_else(|| Error::Config(format!("{} requires param {key}", self.kind))),
        }
    }

    pub fn build(&self) -> Result<ModelManifold> {
        let profile = match self.kind.as_str() {
            "euclidean" => WarpingProfile::Euclidean,
            "hyperbolic" => WarpingProfile::Hyperbolic {
                curvature: self.number("curvature", Some(1.0))?,
            },
            "power_cusp" => WarpingProfile::PowerCusp {
                exponent: self.number("exponent", None)?,
            },
            "exp_cusp" => WarpingProfile::ExpCusp {
                rate: self.number("rate", Some(1.0))?,
            },
            "soliton_flat" => WarpingProfile::SolitonFlat,
            "custom" => {
                if let Some(path) = self.params.get("csv").and_then(Value::as_str) {
                    WarpingProfile::Custom(SampledProfile::from_csv(Path::new(path))?)
                } else if let Some(rows) = self.params.get("samples").and_then(Value::as_array) {
                    let mut radii = Vec::with_capacity(rows.len());
                    let mut values = Vec::with_capacity(rows.len());
                    for row in rows {
                        let pair = row.as_array().filter(|p| p.len() == 2).ok_or_else(|| {
                            Error::Config("custom samples must be [r, f] pairs".into())
                        })?;
                        match (pair[0].as_f64(), pair[1].as_f64()) {
                            (Some(r), Some(f)) => {
                                radii.push(r);
                                values.push(f);
                            }
                            _ => return Err(Error::Config("custom samples must be numeric".into())),
                        }
                    }
                    WarpingProfile::Custom(SampledProfile::new(radii, values)?)
                } else {
                    return Err(Error::Config("custom profile needs params.csv or params.samples".into()));
                }
            }
            other => return Err(Error::Config(format!("unknown manifold kind {other:?}"))),
        };
        ModelManifold::new(self.dimension, profile, self.r0)
    }
}

impl From<&ModelManifold> for ManifoldSpec {
    fn from(m: &ModelManifold) -> Self {
        let spec = ManifoldSpec::new(m.profile.name(), m.dimension, m.r0);
        match &m.profile {
            WarpingProfile::Hyperbolic { curvature } => spec.with_param("curvature", *curvature),
            WarpingProfile::PowerCusp { exponent } => spec.with_param("exponent", *exponent),
            WarpingProfile::ExpCusp { rate } => spec.with_param("rate", *rate),
            WarpingProfile::Custom(s) => spec.with_param(
                "samples",
                Value::Array(
                    s.samples()
                        .map(|(r, f)| Value::Array(vec![r.into(), f.into()]))
                        .collect(),
                ),
            ),
            _ => spec,
        }
    }
}

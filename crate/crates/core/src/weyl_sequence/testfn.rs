//! Radial test functions: cutoff times a complex exponential, the soliton
//! variant through `ρ = 2√f`, and piecewise-linear tents.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::cutoff::{Cutoff, CutoffSpec};
use crate::model_manifold::ModelManifold;
use crate::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFnKind {
    Phase,
    Weighted { c: f64, lambda_c: f64 },
    Soliton { b: f64, l: f64, span: f64 },
    Tent { center: f64, half_width: f64 },
}

/// Potential of a shrinking gradient soliton.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    /// `f(x) = |x|²/4` on flat space.
    GaussianFlat,
    /// Cigar-type potentials; the construction needs `f` as a radial function.
    Other,
}

/// A jump of `u′` at a sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kink {
    pub radius: f64,
    /// `u′(r⁺) − u′(r⁻)`.
    pub jump: f64,
}

/// `u, u′, u″` at one radius, stored as `e^{log_scale + i·phase}` times
/// bounded mantissas so that large weights and fast phases never enter the
/// mantissas themselves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub log_scale: f64,
    pub phase: f64,
    pub value: Complex64,
    pub d1: Complex64,
    pub d2: Complex64,
}

impl Jet {
    fn factor(&self) -> Complex64 {
        Complex64::from_polar(self.log_scale.exp(), self.phase)
    }

    pub fn u(&self) -> Complex64 {
        self.factor() * self.value
    }

    pub fn du(&self) -> Complex64 {
        self.factor() * self.d1
    }

    pub fn ddu(&self) -> Complex64 {
        self.factor() * self.d2
    }

    pub fn modulus(&self) -> f64 {
        self.log_scale.exp() * self.value.norm()
    }
}

/// A compactly supported radial function with analytic derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialTestFunction {
    kind: TestFnKind,
    lambda: f64,
    cutoff: Option<Cutoff>,
    support: (f64, f64),
    kinks: Vec<Kink>,
    /// Exponent `z` of `e^{z r}` for phase and weighted kinds.
    z: Complex64,
    /// `z² + λ`, kept exact rather than recomputed from `z`.
    z2_plus_lambda: Complex64,
    /// Normalizing shift of `ln|u|`.
    log_amplitude: f64,
    /// Radius at which `e^{Re z · (r − r_ref)}` is one.
    r_ref: f64,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Parameter(format!("λ must be finite and nonnegative, got {lambda}")));
    }
    Ok(())
}

fn check_support(manifold: &ModelManifold, lo: f64) -> Result<()> {
    if lo < manifold.r0() {
        return Err(Error::Parameter(format!(
            "test function support starts at {lo}, inside the pole region [0, {})",
            manifold.r0()
        )));
    }
    Ok(())
}

/// `u(r) = χ(r/R)·e^{i√λ r}`.
pub fn build_phase_testfn(manifold: &ModelManifold, lambda: f64, spec: &CutoffSpec) -> Result<RadialTestFunction> {
    check_lambda(lambda)?;
    let cutoff = spec.build()?;
    let support = spec.support();
    check_support(manifold, support.0)?;
    Ok(RadialTestFunction {
        kind: TestFnKind::Phase,
        lambda,
        cutoff: Some(cutoff),
        support,
        kinks: Vec::new(),
        z: Complex64::new(0.0, lambda.sqrt()),
        z2_plus_lambda: Complex64::new(0.0, 0.0),
        log_amplitude: 0.0,
        r_ref: support.0,
    })
}

/// `u(r) = χ(r/R)·e^{(iλ_c − c/2) r}` with `λ_c = √(λ − c²/4)`, rescaled so
/// that `sup |u| ≤ 1`.
pub fn build_weighted_testfn(
    manifold: &ModelManifold,
    lambda: f64,
    c: f64,
    spec: &CutoffSpec,
) -> Result<RadialTestFunction> {
    check_lambda(lambda)?;
    if !c.is_finite() {
        return Err(Error::Parameter(format!("weight exponent c = {c} is not finite")));
    }
    let threshold = c * c / 4.0;
    if lambda < threshold {
        return Err(Error::Parameter(format!(
            "weighted construction needs λ ≥ c²/4 = {threshold}, got λ = {lambda}"
        )));
    }
    let cutoff = spec.build()?;
    let support = spec.support();
    check_support(manifold, support.0)?;
    let lambda_c = (lambda - threshold).sqrt();
    let kind = TestFnKind::Weighted { c, lambda_c };
    Ok(RadialTestFunction {
        kind,
        lambda,
        cutoff: Some(cutoff),
        support,
        kinks: Vec::new(),
        z: Complex64::new(-c / 2.0, lambda_c),
        z2_plus_lambda: Complex64::new(c * c / 2.0, -lambda_c * c),
        log_amplitude: 0.0,
        // |u| = χ e^{−c(r − r_ref)/2} ≤ 1 when r_ref is the support end where the weight peaks
        r_ref: if c >= 0.0 { support.0 } else { support.1 },
    })
}

/// `φ(ρ) = χ((ρ − b)/l)·e^{i√λ ρ}` with plateau `[b + l, b + (span + 1) l]`
/// and `ρ = 2√f` for the soliton potential `f`.
pub fn build_soliton_testfn(
    manifold: &ModelManifold,
    potential: PotentialKind,
    lambda: f64,
    b: f64,
    l: f64,
    span: f64,
) -> Result<RadialTestFunction> {
    if potential != PotentialKind::GaussianFlat {
        return Err(Error::Capability(format!("soliton potential {potential:?} is not supported")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Parameter(format!("soliton construction needs λ > 0, got {lambda}")));
    }
    if !(l >= 10.0 && b >= 2.0 * l) {
        return Err(Error::Parameter(format!("soliton layout needs l ≥ 10 and b ≥ 2l, got b = {b}, l = {l}")));
    }
    let spec = CutoffSpec::new(b + l, b + (span + 1.0) * l, l, Default::default())?;
    let cutoff = spec.build()?;
    let support = spec.support();
    check_support(manifold, support.0)?;
    Ok(RadialTestFunction {
        kind: TestFnKind::Soliton { b, l, span },
        lambda,
        cutoff: Some(cutoff),
        support,
        kinks: Vec::new(),
        z: Complex64::new(0.0, lambda.sqrt()),
        z2_plus_lambda: Complex64::new(0.0, 0.0),
        log_amplitude: 0.0,
        r_ref: support.0,
    })
}

/// `u(r) = max(0, 1 − |r − a|/w)`.
pub fn build_tent_testfn(
    manifold: &ModelManifold,
    lambda: f64,
    center: f64,
    half_width: f64,
) -> Result<RadialTestFunction> {
    check_lambda(lambda)?;
    if !(half_width > 0.0 && center.is_finite() && half_width.is_finite()) {
        return Err(Error::Parameter(format!("tent needs w > 0, got a = {center}, w = {half_width}")));
    }
    let support = (center - half_width, center + half_width);
    check_support(manifold, support.0)?;
    let slope = 1.0 / half_width;
    Ok(RadialTestFunction {
        kind: TestFnKind::Tent { center, half_width },
        lambda,
        cutoff: None,
        support,
        kinks: vec![
            Kink { radius: support.0, jump: slope },
            Kink { radius: center, jump: -2.0 * slope },
            Kink { radius: support.1, jump: slope },
        ],
        z: Complex64::new(0.0, 0.0),
        z2_plus_lambda: Complex64::new(lambda, 0.0),
        log_amplitude: 0.0,
        r_ref: support.0,
    })
}

/// `ρ = 2√f`, `ρ′`, `ρ″` for `f = r²/4`.
fn soliton_distance(r: f64) -> (f64, f64, f64) {
    let f = r * r / 4.0;
    let df = r / 2.0;
    let ddf = 0.5;
    let sf = f.sqrt();
    (2.0 * sf, df / sf, ddf / sf - df * df / (2.0 * f * sf))
}

impl RadialTestFunction {
    pub fn kind(&self) -> &TestFnKind {
        &self.kind
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn kinks(&self) -> &[Kink] {
        &self.kinks
    }

    pub fn cutoff_spec(&self) -> Option<&CutoffSpec> {
        self.cutoff.as_ref().map(Cutoff::spec)
    }

    pub fn is_tent(&self) -> bool {
        matches!(self.kind, TestFnKind::Tent { .. })
    }

    /// Oscillation wavenumber of the phase factor.
    pub fn wavenumber(&self) -> f64 {
        self.z.im.abs()
    }

    /// Radii where some derivative of `u` is discontinuous or where the
    /// cutoff changes piece.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self.kinks.iter().map(|k| k.radius).collect();
        if let Some(c) = &self.cutoff {
            pts.extend(c.spec().breakpoints());
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// `α·u` for `α > 0`.
    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Parameter(format!("scale factor must be positive, got {alpha}")));
        }
        Ok(self.scaled_log(alpha.ln()))
    }

    /// `e^{log_alpha}·u`, for factors outside the `f64` range.
    pub fn scaled_log(&self, log_alpha: f64) -> Self {
        let mut out = self.clone();
        out.log_amplitude += log_alpha;
        out
    }

    /// `ln` of the modulus of `u` on the plateau, before the cutoff.
    pub fn log_scale(&self, r: f64) -> f64 {
        self.log_amplitude + self.z.re * (r - self.r_ref)
    }

    /// `u`, `u′`, `u″` at `r`; zero outside the support. At a kink the
    /// right-hand derivative is returned.
    pub fn jet(&self, r: f64) -> Jet {
        let zero = Complex64::new(0.0, 0.0);
        let outside = Jet {
            log_scale: 0.0,
            phase: 0.0,
            value: zero,
            d1: zero,
            d2: zero,
        };
        if r < self.support.0 || r > self.support.1 {
            return outside;
        }
        match self.kind {
            TestFnKind::Tent { center, half_width } => {
                let d = r - center;
                let slope = if d >= 0.0 { -1.0 / half_width } else { 1.0 / half_width };
                Jet {
                    log_scale: self.log_amplitude,
                    phase: 0.0,
                    value: Complex64::new(1.0 - d.abs() / half_width, 0.0),
                    d1: Complex64::new(slope, 0.0),
                    d2: zero,
                }
            }
            TestFnKind::Soliton { .. } => {
                let cutoff = self.cutoff.as_ref().expect("soliton carries a cutoff");
                let (rho, drho, ddrho) = soliton_distance(r);
                let (chi, dchi, ddchi) = cutoff.eval(rho);
                let k = self.z.im;
                let p1 = dchi + I * k * chi;
                let p2 = ddchi + 2.0 * I * k * dchi - k * k * chi;
                Jet {
                    log_scale: self.log_amplitude,
                    phase: k * rho,
                    value: Complex64::new(chi, 0.0),
                    d1: p1 * drho,
                    d2: p2 * drho * drho + p1 * ddrho,
                }
            }
            TestFnKind::Phase | TestFnKind::Weighted { .. } => {
                let cutoff = self.cutoff.as_ref().expect("phase kinds carry a cutoff");
                let (chi, dchi, ddchi) = cutoff.eval(r);
                let z = self.z;
                Jet {
                    log_scale: self.log_scale(r),
                    phase: z.im * r,
                    value: Complex64::new(chi, 0.0),
                    d1: dchi + z * chi,
                    d2: ddchi + 2.0 * z * dchi + z * z * chi,
                }
            }
        }
    }

    pub fn value(&self, r: f64) -> Complex64 {
        self.jet(r).u()
    }

    /// `ln|(Δ + λ)u|(r)` split as `(log_scale, |mantissa|)` on smooth pieces,
    /// with `Δr` supplied by the caller.
    pub fn defect_parts(&self, r: f64, delta_r: f64) -> (f64, f64) {
        if r < self.support.0 || r > self.support.1 {
            return (0.0, 0.0);
        }
        match self.kind {
            TestFnKind::Phase | TestFnKind::Weighted { .. } => {
                let cutoff = self.cutoff.as_ref().expect("phase kinds carry a cutoff");
                let (chi, dchi, ddchi) = cutoff.eval(r);
                let z = self.z;
                let m = ddchi + 2.0 * z * dchi + self.z2_plus_lambda * chi + delta_r * (dchi + z * chi);
                (self.log_scale(r), m.norm())
            }
            TestFnKind::Soliton { .. } => {
                let cutoff = self.cutoff.as_ref().expect("soliton carries a cutoff");
                let (rho, drho, ddrho) = soliton_distance(r);
                let (chi, dchi, ddchi) = cutoff.eval(rho);
                let k = self.z.im;
                let p1 = dchi + I * k * chi;
                let p2 = ddchi + 2.0 * I * k * dchi;
                let m = p2 * drho * drho
                    + self.lambda * chi * (1.0 - drho * drho)
                    + p1 * (ddrho + delta_r * drho);
                (self.log_amplitude, m.norm())
            }
            TestFnKind::Tent { .. } => {
                let j = self.jet(r);
                let m = j.d2 + delta_r * j.d1 + self.lambda * j.value;
                (j.log_scale, m.norm())
            }
        }
    }

    /// Pointwise `|(Δ + λ)u|(r)` away from kinks.
    pub fn defect_modulus(&self, manifold: &ModelManifold, r: f64) -> Result<f64> {
        let (ls, m) = self.defect_parts(r, manifold.delta_r(r)?);
        Ok(ls.exp() * m)
    }

    /// Construction metadata recorded in certificates.
    pub fn construction(&self) -> serde_json::Value {
        json!({
            "testfn": self.kind,
            "lambda": self.lambda,
            "support": [self.support.0, self.support.1],
            "cutoff": self.cutoff.as_ref().map(Cutoff::spec),
            "kinks": self.kinks,
        })
    }
}

//! The norms entering the certification criteria.

use serde::{Deserialize, Serialize};

use super::testfn::RadialTestFunction;
use crate::model_manifold::ModelManifold;
use crate::quadrature::Quadrature;
use crate::{Error, Result};

const NORM_REL_TOL: f64 = 1e-6;
const SUP_SAMPLES: usize = 4000;

/// Absolute quadrature error estimates for the integrated norms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NormErrors {
    pub l1_defect: f64,
    pub l2_sq: f64,
    pub l2_defect_sq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectNorms {
    pub sup_norm: f64,
    /// `‖(Δ + λ)u‖_{L¹}`, including kink jump masses.
    pub l1_defect: f64,
    pub l2_sq: f64,
    /// `‖(Δ + λ)u‖_{L²}`; infinite when `u′` jumps.
    pub l2_defect: f64,
    /// `‖∇u‖_{L¹}` over the boundary spheres of the support.
    pub boundary_grad: f64,
    pub errors: NormErrors,
}

impl DefectNorms {
    /// `‖u‖_∞ ‖(Δ + λ)u‖_{L¹} / ‖u‖²_{L²}` with its propagated error.
    pub fn sigma_thm00(&self) -> (f64, f64) {
        let s = self.sup_norm * self.l1_defect / self.l2_sq;
        if !s.is_finite() {
            return (f64::INFINITY, f64::INFINITY);
        }
        let rel = self.errors.l1_defect / self.l1_defect.max(f64::MIN_POSITIVE) + self.errors.l2_sq / self.l2_sq;
        (s, s * rel)
    }

    /// `‖(Δ + λ)u‖_{L²} / ‖u‖_{L²}` with its propagated error.
    pub fn sigma_l2(&self) -> (f64, f64) {
        let s = self.l2_defect / self.l2_sq.sqrt();
        let d2 = self.l2_defect * self.l2_defect;
        let rel = 0.5 * (self.errors.l2_defect_sq / d2.max(f64::MIN_POSITIVE) + self.errors.l2_sq / self.l2_sq);
        (s, s * rel)
    }

    /// `‖u‖_∞ (‖(Δ + λ)u‖_{L¹} + ‖∇u‖_{L¹(∂D)}) / ‖u‖²_{L²}`.
    pub fn sigma_boundary(&self) -> (f64, f64) {
        let total = self.l1_defect + self.boundary_grad;
        let s = self.sup_norm * total / self.l2_sq;
        let rel = self.errors.l1_defect / total.max(f64::MIN_POSITIVE) + self.errors.l2_sq / self.l2_sq;
        (s, s * rel)
    }
}

/// Computes every norm of `u` on `manifold`. Integrands are evaluated as
/// `exp(log terms − shift)` so that large volume densities or weights never
/// overflow before the final rescaling.
pub fn defect_norms(manifold: &ModelManifold, u: &RadialTestFunction) -> Result<DefectNorms> {
    let (lo, hi) = u.support();
    if lo < manifold.r0() {
        return Err(Error::Domain(format!(
            "support [{lo}, {hi}] reaches below r0 = {}",
            manifold.r0()
        )));
    }
    let log_omega = manifold.sphere_area().ln();
    let breaks = u.breakpoints();

    // log of the integrand's envelope at a few probes, for `|u|^k` weighting
    let probes = [lo, 0.5 * (lo + hi), hi];
    let shift_for = |k: f64| -> Result<f64> {
        let mut best = f64::NEG_INFINITY;
        for &r in &probes {
            best = best.max(k * u.jet(r).log_scale + manifold.log_density(r)?);
        }
        Ok(best)
    };
    let shift1 = shift_for(1.0)?;
    let shift2 = shift_for(2.0)?;

    let quad = Quadrature::relative(NORM_REL_TOL)
        .with_breakpoints(breaks.iter().copied())
        .with_max_evaluations(20_000_000);

    let l2 = quad.integrate(
        |r| match manifold.log_density(r) {
            Ok(ld) => {
                let j = u.jet(r);
                let m = j.value.norm();
                if m == 0.0 {
                    0.0
                } else {
                    (2.0 * j.log_scale + ld - shift2).exp() * m * m
                }
            }
            Err(_) => f64::NAN,
        },
        lo,
        hi,
    )?;

    // (log_scale, |mantissa|) of (Δ + λ)u together with ln f^{n−1}
    let defect = |r: f64| -> Option<(f64, f64, f64)> {
        match (manifold.log_density(r), manifold.delta_r(r)) {
            (Ok(ld), Ok(dr)) => {
                let (ls, m) = u.defect_parts(r, dr);
                Some((ls, m, ld))
            }
            _ => None,
        }
    };
    let l1 = quad.integrate(
        |r| match defect(r) {
            Some((_, 0.0, _)) => 0.0,
            Some((ls, m, ld)) => (ls + ld - shift1).exp() * m,
            None => f64::NAN,
        },
        lo,
        hi,
    )?;

    let mut kink_mass = 0.0;
    for k in u.kinks() {
        let j = u.jet(k.radius);
        kink_mass += k.jump.abs() * (j.log_scale + log_omega + manifold.log_density(k.radius)?).exp();
    }

    let (l2_defect, l2_defect_sq_err) = if u.kinks().is_empty() {
        let q = quad.integrate(
            |r| match defect(r) {
                Some((_, 0.0, _)) => 0.0,
                Some((ls, m, ld)) => (2.0 * ls + ld - shift2).exp() * m * m,
                None => f64::NAN,
            },
            lo,
            hi,
        )?;
        let scale = (log_omega + shift2).exp();
        ((q.value * scale).sqrt(), q.abs_error_estimate * scale)
    } else {
        (f64::INFINITY, 0.0)
    };

    let boundary_grad = if u.is_tent() {
        let mut total = 0.0;
        for r in [lo, hi] {
            let probe = if r == lo { lo } else { hi - (hi - lo) * 1e-12 };
            let j = u.jet(probe);
            total += (j.log_scale + log_omega + manifold.log_density(r)?).exp() * j.d1.norm();
        }
        total
    } else {
        0.0
    };

    let scale1 = (log_omega + shift1).exp();
    let scale2 = (log_omega + shift2).exp();
    let sup_norm = sup_norm(u, &breaks);

    let norms = DefectNorms {
        sup_norm,
        l1_defect: rescale(l1.value, scale1) + kink_mass,
        l2_sq: l2.value * scale2,
        l2_defect,
        boundary_grad,
        errors: NormErrors {
            l1_defect: rescale(l1.abs_error_estimate, scale1),
            l2_sq: l2.abs_error_estimate * scale2,
            l2_defect_sq: l2_defect_sq_err,
        },
    };
    // the L¹ defect of a weighted function may legitimately exceed f64
    if !(norms.l2_sq > 0.0 && norms.l2_sq.is_finite() && !norms.l1_defect.is_nan()) {
        return Err(Error::Internal(format!(
            "norms of the test function on [{lo}, {hi}] are not representable: {norms:?}"
        )));
    }
    Ok(norms)
}

/// `v·scale` with `0·∞ = 0`.
fn rescale(v: f64, scale: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v * scale
    }
}

/// `sup |u|` from dense sampling plus golden-section refinement of the best sample.
fn sup_norm(u: &RadialTestFunction, breaks: &[f64]) -> f64 {
    let (lo, hi) = u.support();
    let modulus = |r: f64| u.jet(r).modulus();
    let step = (hi - lo) / SUP_SAMPLES as f64;
    let mut best = (lo, modulus(lo));
    let candidates = (0..=SUP_SAMPLES)
        .map(|i| lo + step * i as f64)
        .chain(breaks.iter().copied());
    for r in candidates {
        let m = modulus(r);
        if m > best.1 {
            best = (r, m);
        }
    }
    let (mut a, mut b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if modulus(c) > modulus(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best.1.max(modulus(0.5 * (a + b)))
}

/// `U_c(s, t) = ω ∫_s^t e^{−c r} f(r)^{n−1} dr`.
pub fn weighted_volume(manifold: &ModelManifold, c: f64, s: f64, t: f64) -> Result<f64> {
    if !(s >= manifold.r0() && t >= s) {
        return Err(Error::Domain(format!(
            "weighted volume needs r0 ≤ s ≤ t, got s = {s}, t = {t}, r0 = {}",
            manifold.r0()
        )));
    }
    if s == t {
        return Ok(0.0);
    }
    let log_w = |r: f64| manifold.log_density(r).map(|ld| ld - c * r);
    let shift = log_w(s)?.max(log_w(t)?).max(log_w(0.5 * (s + t))?);
    let q = Quadrature::relative(1e-10).integrate(
        |r| match log_w(r) {
            Ok(v) => (v - shift).exp(),
            Err(_) => f64::NAN,
        },
        s,
        t,
    )?;
    Ok(q.value * (manifold.sphere_area().ln() + shift).exp())
}

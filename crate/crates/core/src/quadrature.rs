//! Adaptive Simpson quadrature with Richardson error control.
//!
//! A panel is accepted once two consecutive bisection levels agree to
//! tolerance.
//!
//! Every volume, norm and weighted volume in the crate goes through
//! [`Quadrature`]. Caller-declared breakpoints are always panel boundaries,
//! and a declared oscillation wavenumber `k` forces at least eight initial
//! panels per period `2π/k`.

use serde::{Deserialize, Serialize};

use crate::model_manifold::ModelManifold;
use crate::{Error, Result};

const PANELS_PER_PERIOD: f64 = 8.0;
const DEFAULT_MAX_DEPTH: u32 = 50;
const DEFAULT_MAX_EVALUATIONS: usize = 200_000_000;
const MAX_TAIL_PANELS: usize = 400;
const MAX_REBASES: usize = 6;
const REBASE_CHECK_EVERY: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
}

impl QuadratureResult {
    fn zero() -> Self {
        Self {
            value: 0.0,
            abs_error_estimate: 0.0,
            evaluations: 0,
        }
    }

    fn accumulate(&mut self, other: &QuadratureResult) {
        self.value += other.value;
        self.abs_error_estimate += other.abs_error_estimate;
        self.evaluations += other.evaluations;
    }
}

/// Integration settings. The accepted error is `max(abs_tol, rel_tol·∫|g|)`.
#[derive(Debug, Clone)]
pub struct Quadrature {
    abs_tol: f64,
    rel_tol: f64,
    breakpoints: Vec<f64>,
    wavenumber: Option<f64>,
    max_depth: u32,
    max_evaluations: usize,
}

enum Pass {
    Done(QuadratureResult, f64),
    /// The running `∫|g|` estimate outgrew the tolerance's basis.
    Rebase(f64),
}

#[derive(Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
    /// The parent already met its tolerance.
    parent_ok: bool,
}

impl Quadrature {
    pub fn new(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol: 0.0,
            breakpoints: Vec::new(),
            wavenumber: None,
            max_depth: DEFAULT_MAX_DEPTH,
            max_evaluations: DEFAULT_MAX_EVALUATIONS,
        }
    }

    pub fn relative(rel_tol: f64) -> Self {
        Self::new(0.0).with_rel_tol(rel_tol)
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_breakpoints(mut self, points: impl IntoIterator<Item = f64>) -> Self {
        self.breakpoints.extend(points);
        self
    }

    /// Declares an oscillation `e^{ikr}` in the integrand.
    pub fn with_wavenumber(mut self, k: f64) -> Self {
        self.wavenumber = (k > 0.0 && k.is_finite()).then_some(k);
        self
    }

    pub fn with_max_evaluations(mut self, cap: usize) -> Self {
        self.max_evaluations = cap;
        self
    }

    pub fn with_max_depth(mut self, depth: u32) -> Self {
        self.max_depth = depth;
        self
    }

    fn validate(&self, a: f64, b: f64) -> Result<()> {
        if !(a.is_finite() && b.is_finite()) || a > b {
            return Err(Error::Parameter(format!(
                "integration interval [{a}, {b}] is not a finite ordered interval"
            )));
        }
        let ok = |t: f64| t.is_finite() && t >= 0.0;
        if !(ok(self.abs_tol) && ok(self.rel_tol)) || (self.abs_tol == 0.0 && self.rel_tol == 0.0) {
            return Err(Error::Parameter(format!(
                "tolerance must be positive (abs {}, rel {})",
                self.abs_tol, self.rel_tol
            )));
        }
        Ok(())
    }

    fn nodes(&self, a: f64, b: f64) -> Vec<f64> {
        let mut cuts: Vec<f64> = self
            .breakpoints
            .iter()
            .copied()
            .filter(|&p| p > a && p < b)
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();

        let mut nodes = Vec::with_capacity(cuts.len() + 2);
        nodes.push(a);
        nodes.extend(cuts);
        nodes.push(b);

        let Some(k) = self.wavenumber else {
            return nodes;
        };
        let max_width = 2.0 * std::f64::consts::PI / k / PANELS_PER_PERIOD;
        let mut refined = Vec::with_capacity(nodes.len());
        refined.push(a);
        for pair in nodes.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            let pieces = ((hi - lo) / max_width).ceil().max(1.0) as usize;
            for j in 1..pieces {
                refined.push(lo + (hi - lo) * j as f64 / pieces as f64);
            }
            refined.push(hi);
        }
        refined
    }

    pub fn integrate<F>(&self, g: F, a: f64, b: f64) -> Result<QuadratureResult>
    where
        F: Fn(f64) -> f64,
    {
        self.validate(a, b)?;
        let eval = |x: f64| -> Result<f64> {
            let v = g(x);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Evaluation { x, value: v })
            }
        };

        if a == b {
            eval(a)?;
            return Ok(QuadratureResult {
                value: 0.0,
                abs_error_estimate: 0.0,
                evaluations: 1,
            });
        }

        let nodes = self.nodes(a, b);
        let mut evaluations = 0usize;
        let mut panels = Vec::with_capacity(nodes.len() - 1);
        let mut f_left = eval(a)?;
        evaluations += 1;
        let mut abs_mass = 0.0;
        for pair in nodes.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            let mid = 0.5 * (lo + hi);
            let fm = eval(mid)?;
            let fb = eval(hi)?;
            evaluations += 2;
            let h = hi - lo;
            let whole = h / 6.0 * (f_left + 4.0 * fm + fb);
            abs_mass += h / 6.0 * (f_left.abs() + 4.0 * fm.abs() + fb.abs());
            panels.push(Panel {
                a: lo,
                b: hi,
                fa: f_left,
                fm,
                fb,
                whole,
                eps: 0.0,
                depth: 0,
                parent_ok: false,
            });
            f_left = fb;
        }

        // The coarse mass can overstate ∫|g| badly for steep integrands, so
        // the relative part of the tolerance is re-based on the refined mass.
        // A coarse grid that misses a narrow peak understates it the other
        // way, so a pass is abandoned once its running mass shows the
        // tolerance is far too strict.
        let mut tol = self.abs_tol.max(self.rel_tol * abs_mass);
        let mut total_evaluations = evaluations;
        for pass in 0..=MAX_REBASES {
            let ceiling = (self.rel_tol > 0.0 && pass < MAX_REBASES).then(|| 4.0 * tol / self.rel_tol);
            let (result, refined_mass) = match self.refine(&eval, &panels, b - a, tol, ceiling, &mut total_evaluations)? {
                Pass::Done(result, mass) => (result, mass),
                Pass::Rebase(mass) => {
                    tol = self.abs_tol.max(self.rel_tol * mass);
                    continue;
                }
            };
            let wanted = self.abs_tol.max(self.rel_tol * refined_mass);
            if wanted >= 0.5 * tol || pass == MAX_REBASES {
                return Ok(QuadratureResult {
                    evaluations: total_evaluations,
                    ..result
                });
            }
            tol = wanted;
        }
        unreachable!("the last pass always returns")
    }

    fn refine<E>(
        &self,
        eval: &E,
        panels: &[Panel],
        span: f64,
        tol: f64,
        mass_ceiling: Option<f64>,
        evaluations: &mut usize,
    ) -> Result<Pass>
    where
        E: Fn(f64) -> Result<f64>,
    {
        let mut value = 0.0;
        let mut err = 0.0;
        let mut mass = 0.0;
        let mut stack: Vec<Panel> = Vec::with_capacity(64);
        let mut next_check = *evaluations + REBASE_CHECK_EVERY;

        for &panel in panels {
            let mut panel = panel;
            panel.eps = tol * (panel.b - panel.a) / span;
            stack.push(panel);
            while let Some(p) = stack.pop() {
                let mid = 0.5 * (p.a + p.b);
                let lm = 0.5 * (p.a + mid);
                let rm = 0.5 * (mid + p.b);
                let flm = eval(lm)?;
                let frm = eval(rm)?;
                *evaluations += 2;
                if let Some(ceiling) = mass_ceiling.filter(|_| *evaluations >= next_check) {
                    next_check = *evaluations + REBASE_CHECK_EVERY;
                    let pending: f64 = stack.iter().map(|q| q.whole.abs()).sum();
                    let running = mass + pending + p.whole.abs();
                    if running > ceiling {
                        return Ok(Pass::Rebase(running));
                    }
                }
                // actual child widths: the rounded midpoint need not bisect exactly
                let (hl, hr) = (mid - p.a, p.b - mid);
                let left = hl / 6.0 * (p.fa + 4.0 * flm + p.fm);
                let right = hr / 6.0 * (p.fm + 4.0 * frm + p.fb);
                let delta = left + right - p.whole;
                // Simpson differences can vanish by cancellation on a coarse
                // panel, so a panel is accepted only when its parent passed too.
                let ok = delta.abs() <= 15.0 * p.eps;
                if ok && p.parent_ok {
                    value += left + right + delta / 15.0;
                    err += delta.abs() / 15.0;
                    mass += hl / 6.0 * (p.fa.abs() + 4.0 * flm.abs() + p.fm.abs())
                        + hr / 6.0 * (p.fm.abs() + 4.0 * frm.abs() + p.fb.abs());
                    continue;
                }
                if p.depth >= self.max_depth || *evaluations >= self.max_evaluations {
                    let pending: f64 = stack.iter().map(|q| q.whole).sum();
                    let pending_err: f64 = stack.iter().map(|q| q.eps).sum();
                    return Err(Error::Convergence {
                        best: value + left + right + pending,
                        error: err + delta.abs() / 15.0 + pending_err,
                        evaluations: *evaluations,
                    });
                }
                let depth = p.depth + 1;
                let eps = 0.5 * p.eps;
                stack.push(Panel {
                    a: mid,
                    b: p.b,
                    fa: p.fm,
                    fm: frm,
                    fb: p.fb,
                    whole: right,
                    eps,
                    depth,
                    parent_ok: ok,
                });
                stack.push(Panel {
                    a: p.a,
                    b: mid,
                    fa: p.fa,
                    fm: flm,
                    fb: p.fm,
                    whole: left,
                    eps,
                    depth,
                    parent_ok: ok,
                });
            }
        }

        Ok(Pass::Done(
            QuadratureResult {
                value,
                abs_error_estimate: err,
                evaluations: *evaluations,
            },
            mass,
        ))
    }

    /// Integrates `g(r)·ω_{n−1}·f(r)^{n−1}` over `[a, b]`.
    pub fn integrate_weighted<F>(
        &self,
        g: F,
        a: f64,
        b: f64,
        manifold: &ModelManifold,
    ) -> Result<QuadratureResult>
    where
        F: Fn(f64) -> f64,
    {
        let log_omega = manifold.sphere_area().ln();
        // Density errors (out-of-range radii) surface as NaN, which the
        // integrator reports as an evaluation error at that radius.
        self.integrate(
            |r| match manifold.log_density(r) {
                Ok(ld) => {
                    let gv = g(r);
                    if gv == 0.0 {
                        0.0
                    } else {
                        gv * (log_omega + ld).exp()
                    }
                }
                Err(_) => f64::NAN,
            },
            a,
            b,
        )
    }

    /// Integrates over `[a, ∞)` with geometrically growing panels, stopping
    /// once three consecutive panels contribute below the tolerance.
    pub fn integrate_to_infinity<F>(&self, g: F, a: f64) -> Result<QuadratureResult>
    where
        F: Fn(f64) -> f64,
    {
        self.validate(a, a)?;
        let mut total = QuadratureResult::zero();
        let mut width = 1.0;
        let mut lo = a;
        let mut quiet = 0;
        for _ in 0..MAX_TAIL_PANELS {
            let hi = lo + width;
            let piece = self.integrate(&g, lo, hi)?;
            total.accumulate(&piece);
            let small = piece.value.abs() <= self.abs_tol.max(self.rel_tol * total.value.abs());
            quiet = if small { quiet + 1 } else { 0 };
            if quiet >= 3 {
                return Ok(total);
            }
            lo = hi;
            width *= 2.0;
            if !lo.is_finite() {
                break;
            }
        }
        Err(Error::Convergence {
            best: total.value,
            error: total.abs_error_estimate,
            evaluations: total.evaluations,
        })
    }
}

/// Plain absolute-tolerance integration of `g` over `[a, b]`.
pub fn integrate<F>(g: F, a: f64, b: f64, tol: f64) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    Quadrature::new(tol).integrate(g, a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_manifold::{ModelManifold, WarpingProfile};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x| x * x, 0.0, 1.0, 1e-10).unwrap();
        assert!((q.value - 1.0 / 3.0).abs() <= 1e-10);
        assert!(q.evaluations >= 1);
    }

    #[test]
    fn disk_area_with_manifold_weight() {
        let m = ModelManifold::new(2, WarpingProfile::Euclidean, 1.0).unwrap();
        let q = Quadrature::new(1e-10)
            .integrate_weighted(|_| 1.0, 0.0, 2.0, &m)
            .unwrap();
        assert!((q.value - 4.0 * PI).abs() <= 1e-8);
    }

    #[test]
    fn declared_kink_is_integrated_exactly() {
        let q = Quadrature::new(1e-10)
            .with_breakpoints([0.3])
            .integrate(|x| (x - 0.3f64).abs(), 0.0, 1.0)
            .unwrap();
        assert!((q.value - 0.29).abs() <= 1e-10, "{}", q.value);
    }

    #[test]
    fn non_finite_integrand_reports_the_point() {
        let err = integrate(|x| if x > 0.5 { f64::NAN } else { x }, 0.0, 1.0, 1e-8).unwrap_err();
        match err {
            Error::Evaluation { x, .. } => assert!(x > 0.5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn iteration_cap_returns_best_estimate() {
        let err = Quadrature::new(1e-14)
            .with_max_evaluations(20)
            .integrate(|x| (50.0 * x).sin().abs(), 0.0, 3.0)
            .unwrap_err();
        assert!(matches!(err, Error::Convergence { best, .. } if best.is_finite()));
    }

    #[test]
    fn wavenumber_hint_forces_panels() {
        let q = Quadrature::new(1e-9)
            .with_wavenumber(40.0)
            .integrate(|x| (40.0 * x).cos(), 0.0, 10.0)
            .unwrap();
        assert!((q.value - (400.0f64).sin() / 40.0).abs() < 1e-8);
        // eight panels per period, at least three evaluations each
        let periods = 10.0 * 40.0 / (2.0 * PI);
        assert!(q.evaluations as f64 >= 3.0 * 8.0 * periods);
    }

    #[test]
    fn tail_integral_of_exponential() {
        let q = Quadrature::relative(1e-12)
            .integrate_to_infinity(|x| (-x).exp(), 1.0)
            .unwrap();
        assert!((q.value - (-1.0f64).exp()).abs() < 1e-12);
        let q = Quadrature::relative(1e-10)
            .integrate_to_infinity(|x| (1.0 + x).powi(-2), 0.0)
            .unwrap();
        assert!((q.value - 1.0).abs() < 1e-8, "{}", q.value);
    }

    #[test]
    fn rejects_reversed_interval_and_zero_tol() {
        assert!(matches!(integrate(|x| x, 1.0, 0.0, 1e-8), Err(Error::Parameter(_))));
        assert!(matches!(integrate(|x| x, 0.0, 1.0, 0.0), Err(Error::Parameter(_))));
    }

    proptest! {
        #[test]
        fn linearity(alpha in -3.0f64..3.0, beta in -3.0f64..3.0, w in 0.5f64..6.0) {
            let tol = 1e-10;
            let g = |x: f64| (w * x).sin() + x * x;
            let h = |x: f64| (-x).exp();
            let ig = integrate(g, 0.0, 2.0, tol).unwrap().value;
            let ih = integrate(h, 0.0, 2.0, tol).unwrap().value;
            let both = integrate(|x| alpha * g(x) + beta * h(x), 0.0, 2.0, tol).unwrap().value;
            let combined = tol * (1.0 + alpha.abs() + beta.abs());
            prop_assert!((both - alpha * ig - beta * ih).abs() <= 3.0 * combined);
        }

        #[test]
        fn interval_additivity(a in -2.0f64..0.0, mid in 0.0f64..1.0, b in 1.0f64..3.0) {
            let tol = 1e-10;
            let g = |x: f64| (x * x).cos() + 0.3 * x;
            let whole = integrate(g, a, b, tol).unwrap().value;
            let parts = integrate(g, a, mid, tol).unwrap().value + integrate(g, mid, b, tol).unwrap().value;
            prop_assert!((whole - parts).abs() <= 3.0 * 2.0 * tol);
        }

        #[test]
        fn piecewise_linear_with_kinks_is_exact(
            kinks in proptest::collection::vec(0.01f64..0.99, 1..6),
            slopes in proptest::collection::vec(-5.0f64..5.0, 7),
        ) {
            let mut ks = kinks.clone();
            ks.sort_by(f64::total_cmp);
            ks.dedup();
            // continuous piecewise-linear g with g(0) = 1
            let eval = |x: f64| {
                let mut v = 1.0;
                let mut prev = 0.0;
                for (i, &k) in ks.iter().enumerate() {
                    if x <= k {
                        return v + slopes[i] * (x - prev);
                    }
                    v += slopes[i] * (k - prev);
                    prev = k;
                }
                v + slopes[ks.len()] * (x - prev)
            };
            let mut exact = 0.0;
            let mut nodes = vec![0.0];
            nodes.extend(ks.iter().copied());
            nodes.push(1.0);
            for pair in nodes.windows(2) {
                exact += 0.5 * (eval(pair[0]) + eval(pair[1])) * (pair[1] - pair[0]);
            }
            let q = Quadrature::new(1e-12).with_breakpoints(ks.iter().copied()).integrate(eval, 0.0, 1.0).unwrap();
            prop_assert!((q.value - exact).abs() <= 1e-12 * exact.abs().max(1.0));
        }
    }
}

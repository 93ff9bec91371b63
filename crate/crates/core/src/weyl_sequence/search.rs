//! Constructive choice of cutoff parameters so that the criterion quantity
//! falls below a target on a sequence of disjointly supported test functions.

use log::debug;
use serde::{Deserialize, Serialize};

use super::cutoff::{CutoffSpec, TransitionShape};
use super::norms::{defect_norms, weighted_volume, DefectNorms};
use super::testfn::{build_phase_testfn, build_weighted_testfn};
use crate::model_manifold::{AsymptoticReport, DecayClass, ModelManifold};
use crate::{Error, Result};

const MAX_DOUBLINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchBranch {
    /// Doubling scan with `V(y + R + 1) ≤ 2V(y)`.
    InfiniteVolume,
    /// Scan on the tail volume `h(r) = vol(M) − V(r)`.
    FiniteVolume,
    /// `L²` search for `e^{(iλ_c − c/2) r}` test functions.
    Weighted { c: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchStep {
    pub spec: CutoffSpec,
    pub sigma: f64,
    pub sigma_error: f64,
    pub norms: DefectNorms,
    /// `U_c(y, y + R + 1) / U_c(x, y)` for weighted steps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weighted_growth: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchOutcome {
    pub branch: SearchBranch,
    pub lambda: f64,
    pub sigma_target: f64,
    pub steps: Vec<SearchStep>,
    pub requested: usize,
    /// Fewer specs than requested were found within the step budget.
    pub exhausted: bool,
    pub budget_used: usize,
}

impl SearchOutcome {
    pub fn specs(&self) -> Vec<CutoffSpec> {
        self.steps.iter().map(|s| s.spec).collect()
    }

    /// Supports escape every compact set: at least two disjoint specs with
    /// strictly increasing inner radius.
    pub fn essential(&self) -> bool {
        self.steps.len() >= 2
            && self
                .steps
                .windows(2)
                .all(|w| w[1].spec.support().0 > w[0].spec.support().1)
    }
}

/// Radius range of the hypothesis check for a given target.
pub fn hypothesis_radius(sigma_target: f64) -> f64 {
    (100.0 / sigma_target).clamp(1e3, 1e5)
}

/// Verifies the asymptotic hypotheses of the unweighted criterion:
/// `limsup Δr ≤ σ_target/10`, and no exponential volume decay.
pub fn check_hypotheses(manifold: &ModelManifold, sigma_target: f64) -> Result<AsymptoticReport> {
    let r_max = hypothesis_radius(sigma_target).max(manifold.r0() + 100.0);
    let report = manifold.asymptotic_report(r_max, &[0.1, 0.01])?;
    if report.limsup_delta_r > sigma_target / 10.0 {
        return Err(Error::CertificationImpossible {
            hypothesis: format!(
                "limsup Δr = {:.6} exceeds σ_target/10 = {} (volume growth is exponential)",
                report.limsup_delta_r,
                sigma_target / 10.0
            ),
        });
    }
    if let DecayClass::Exponential { epsilon0 } = report.decay_class {
        return Err(Error::CertificationImpossible {
            hypothesis: format!("volume decays exponentially at infinity (ε₀ ≈ {epsilon0:.4})"),
        });
    }
    Ok(report)
}

fn check_target(lambda: f64, sigma_target: f64) -> Result<()> {
    if !(sigma_target > 0.0 && sigma_target.is_finite()) {
        return Err(Error::Parameter(format!("σ_target must be positive, got {sigma_target}")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Parameter(format!("λ must be nonnegative, got {lambda}")));
    }
    Ok(())
}

/// Transition width used by both unweighted branches.
pub fn transition_width(shape: TransitionShape, lambda: f64, sigma_target: f64) -> f64 {
    (shape.c1() * 4.0 * (1.0 + lambda) / sigma_target).max(2.5)
}

fn first_x(manifold: &ModelManifold, r: f64, prev: Option<&CutoffSpec>) -> f64 {
    let mut x = (3.0 * r).max(manifold.r0() + r + 1.0);
    if let Some(p) = prev {
        x = x.max(p.y + 2.0 * r + 1.0);
    }
    x
}

fn phase_sigma(manifold: &ModelManifold, lambda: f64, spec: &CutoffSpec) -> Result<SearchStep> {
    let u = build_phase_testfn(manifold, lambda, spec)?;
    let norms = defect_norms(manifold, &u)?;
    let (sigma, sigma_error) = norms.sigma_thm00();
    Ok(SearchStep {
        spec: *spec,
        sigma,
        sigma_error,
        norms,
        weighted_growth: None,
    })
}

/// Finds up to `count` cutoff specs whose phase test functions satisfy
/// `σ + σ_err ≤ σ_target`, with pairwise disjoint supports moving outward
/// and nonincreasing `σ`. `budget` bounds the number of candidate
/// evaluations.
pub fn search_parameters(
    manifold: &ModelManifold,
    lambda: f64,
    sigma_target: f64,
    count: usize,
    budget: usize,
) -> Result<SearchOutcome> {
    search_parameters_with(manifold, lambda, sigma_target, count, budget, TransitionShape::default())
}

pub fn search_parameters_with(
    manifold: &ModelManifold,
    lambda: f64,
    sigma_target: f64,
    count: usize,
    budget: usize,
    shape: TransitionShape,
) -> Result<SearchOutcome> {
    check_target(lambda, sigma_target)?;
    check_hypotheses(manifold, sigma_target)?;
    let r = transition_width(shape, lambda, sigma_target);
    let finite = manifold.has_finite_volume();
    let mut outcome = SearchOutcome {
        branch: if finite {
            SearchBranch::FiniteVolume
        } else {
            SearchBranch::InfiniteVolume
        },
        lambda,
        sigma_target,
        steps: Vec::new(),
        requested: count,
        exhausted: false,
        budget_used: 0,
    };

    'specs: while outcome.steps.len() < count {
        let prev = outcome.steps.last().map(|s| s.spec);
        let prev_sigma = outcome.steps.last().map(|s| s.sigma);
        let mut x = first_x(manifold, r, prev.as_ref());

        if finite {
            // tail inequality ε h(x − R) − 2C h′(x − R) ≤ 2ε h(x), with h′ = −A
            let eps = sigma_target / 4.0;
            let c = shape.c1() * (1.0 + lambda.sqrt() + lambda);
            loop {
                if outcome.budget_used >= budget {
                    outcome.exhausted = true;
                    break 'specs;
                }
                outcome.budget_used += 1;
                let h_in = manifold.log_tail_volume(x - r)?.exp();
                let a_in = manifold.area(x - r)?;
                let h_x = manifold.log_tail_volume(x)?.exp();
                if eps * h_in + 2.0 * c * a_in <= 2.0 * eps * h_x {
                    break;
                }
                x += r;
            }
        }

        let log_tail_x = if finite { Some(manifold.log_tail_volume(x)?) } else { None };
        let mut y = 2.0 * x;
        for _ in 0..MAX_DOUBLINGS {
            if outcome.budget_used >= budget {
                outcome.exhausted = true;
                break 'specs;
            }
            outcome.budget_used += 1;
            let growth_ok = match log_tail_x {
                Some(lt) => manifold.log_tail_volume(y)? <= lt - std::f64::consts::LN_2,
                None => {
                    let (vy, _) = manifold.volume_area(y)?;
                    let (vyr, _) = manifold.volume_area(y + r + 1.0)?;
                    vyr <= 2.0 * vy
                }
            };
            if growth_ok {
                let spec = CutoffSpec::new(x, y, r, shape)?;
                let step = phase_sigma(manifold, lambda, &spec)?;
                debug!(
                    "λ = {lambda}: x = {x:.1}, y = {y:.1}, R = {r:.1}, σ = {:.3e} ± {:.1e}",
                    step.sigma, step.sigma_error
                );
                let monotone = prev_sigma.is_none_or(|p| step.sigma <= p);
                if step.sigma + step.sigma_error <= sigma_target && monotone {
                    outcome.steps.push(step);
                    continue 'specs;
                }
            }
            y *= 2.0;
        }
        outcome.exhausted = true;
        break;
    }
    if outcome.steps.len() < count {
        outcome.exhausted = true;
    }
    Ok(outcome)
}

/// `L²` search for the weighted construction: `R` and the plateau length
/// double together until `σ_{L²} + err ≤ σ_target`. Requires `λ ≥ c²/4` and
/// `Δr → c` on the sampled range.
pub fn search_weighted(
    manifold: &ModelManifold,
    lambda: f64,
    c: f64,
    sigma_target: f64,
    count: usize,
    budget: usize,
) -> Result<SearchOutcome> {
    check_target(lambda, sigma_target)?;
    if lambda < c * c / 4.0 {
        return Err(Error::Parameter(format!(
            "weighted construction needs λ ≥ c²/4 = {}, got λ = {lambda}",
            c * c / 4.0
        )));
    }
    let report = manifold.asymptotic_report(manifold.r0() + 1e3, &[])?;
    let window_start = report.radii.len() * 9 / 10;
    let drift = report.delta_r[window_start..]
        .iter()
        .map(|d| (d - c).abs())
        .fold(0.0, f64::max);
    if drift > sigma_target {
        return Err(Error::CertificationImpossible {
            hypothesis: format!("Δr does not approach c = {c} (deviation {drift:.4} on the sampled tail)"),
        });
    }

    let shape = TransitionShape::default();
    let mut outcome = SearchOutcome {
        branch: SearchBranch::Weighted { c },
        lambda,
        sigma_target,
        steps: Vec::new(),
        requested: count,
        exhausted: false,
        budget_used: 0,
    };
    let mut r = 4.0;
    let mut span = 8.0 * r;
    'specs: while outcome.steps.len() < count {
        let prev = outcome.steps.last().map(|s| s.spec);
        loop {
            if outcome.budget_used >= budget {
                outcome.exhausted = true;
                break 'specs;
            }
            outcome.budget_used += 1;
            let x = first_x(manifold, r, prev.as_ref());
            let y = x + span;
            let spec = CutoffSpec::new(x, y, r, shape)?;
            // |u|² f^{n−1} ≈ 1 mid-plateau keeps ‖u‖² representable for any layout
            let u = build_weighted_testfn(manifold, lambda, c, &spec)?;
            let mid = 0.5 * (x + y);
            let u = u.scaled_log(-u.log_scale(mid) - 0.5 * manifold.log_density(mid)?);
            let norms = defect_norms(manifold, &u)?;
            let (sigma, sigma_error) = norms.sigma_l2();
            debug!("weighted λ = {lambda}, c = {c}: x = {x:.1}, R = {r}, σ = {sigma:.3e}");
            if sigma + sigma_error <= sigma_target {
                let growth = weighted_volume(manifold, c, y, y + r + 1.0)? / weighted_volume(manifold, c, x, y)?;
                outcome.steps.push(SearchStep {
                    spec,
                    sigma,
                    sigma_error,
                    norms,
                    weighted_growth: Some(growth),
                });
                continue 'specs;
            }
            r *= 2.0;
            span *= 2.0;
        }
    }
    Ok(outcome)
}

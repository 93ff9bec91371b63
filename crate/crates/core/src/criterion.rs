//! Certification criteria.
//!
//! Three function-level criteria turn [`DefectNorms`] into spectral
//! intervals:
//!
//! * `thm00`: `‖u‖_∞ ‖(Δ + λ)u‖_{L¹} ≤ σ ‖u‖²_{L²}` gives a point of
//!   `σ(−Δ)` within `ε = min(1, (λ + 1)σ^{1/3})` of `λ`;
//! * `donnelly_l2`: `‖(Δ + λ)u‖_{L²} ≤ σ ‖u‖_{L²}` gives one within `σ`;
//! * `boundary`: the `L¹` criterion for continuous, piecewise smooth `u`,
//!   with the boundary gradient flux added to the defect.
//!
//! [`weyl_matrix_check`] evaluates the two quadratic forms of the
//! generalized Weyl criterion for a symmetric matrix and a unit vector.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model_manifold::ModelManifold;
use crate::oracle::TridiagonalOperator;
use crate::weyl_sequence::{defect_norms, DefectNorms, RadialTestFunction};
use crate::{Error, Result};

const REFINE_STEPS: usize = 6;
const REFINE_RESIDUAL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "thm00")]
    Thm00,
    #[serde(rename = "donnelly_l2")]
    DonnellyL2,
    #[serde(rename = "boundary")]
    Boundary,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Thm00 => "thm00",
            Method::DonnellyL2 => "donnelly_l2",
            Method::Boundary => "boundary",
        }
    }
}

/// `min(1, (λ + 1)σ^{1/3})`.
pub fn thm00_epsilon(lambda: f64, sigma: f64) -> f64 {
    ((lambda + 1.0) * sigma.cbrt()).min(1.0)
}

/// The bound the `L¹` argument actually closes with,
/// `(λ(λ + 1)(λ + ε)/ε² + 1)σ`; the interval is certified by that argument
/// whenever this stays below `ε`.
pub fn proof_side_bound(lambda: f64, sigma: f64, epsilon: f64) -> f64 {
    (lambda * (lambda + 1.0) * (lambda + epsilon) / (epsilon * epsilon) + 1.0) * sigma
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub proof_side_bound: f64,
    pub sup_norm: f64,
    pub l1_defect: f64,
    pub l2_sq: f64,
    pub l2_defect: f64,
    pub boundary_grad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub lambda: f64,
    pub sigma: f64,
    pub epsilon: f64,
    /// `(λ − ε, λ + ε)` with the left end clipped at zero.
    pub interval: (f64, f64),
    pub method: Method,
    pub essential: bool,
    pub construction: serde_json::Value,
    /// Propagated quadrature error on `sigma`.
    pub sigma_error: f64,
    pub diagnostic: Diagnostic,
}

impl CriterionReport {
    fn new(norms: &DefectNorms, lambda: f64, sigma: f64, sigma_error: f64, epsilon: f64, method: Method) -> Self {
        Self {
            lambda,
            sigma,
            epsilon,
            interval: ((lambda - epsilon).max(0.0), lambda + epsilon),
            method,
            essential: false,
            construction: serde_json::Value::Null,
            sigma_error,
            diagnostic: Diagnostic {
                proof_side_bound: proof_side_bound(lambda, sigma, epsilon),
                sup_norm: norms.sup_norm,
                l1_defect: norms.l1_defect,
                l2_sq: norms.l2_sq,
                l2_defect: norms.l2_defect,
                boundary_grad: norms.boundary_grad,
            },
        }
    }

    pub fn with_construction(mut self, construction: serde_json::Value) -> Self {
        self.construction = construction;
        self
    }

    pub fn with_essential(mut self, essential: bool) -> Self {
        self.essential = essential;
        self
    }

    /// `ε` recomputed from `σ` by the method's formula.
    pub fn expected_epsilon(&self) -> f64 {
        match self.method {
            Method::Thm00 | Method::Boundary => thm00_epsilon(self.lambda, self.sigma),
            Method::DonnellyL2 => self.sigma,
        }
    }

    /// True when `σ` plus its quadrature error still meets `target`.
    pub fn certifies(&self, sigma_target: f64) -> bool {
        self.sigma + self.sigma_error <= sigma_target
    }

    /// Test-function support recorded in the construction, if any.
    pub fn support(&self) -> Option<(f64, f64)> {
        let s = self.construction.get("support")?.as_array()?;
        Some((s.first()?.as_f64()?, s.get(1)?.as_f64()?))
    }
}

fn check_norms(norms: &DefectNorms, lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Parameter(format!("lambda must be nonnegative, got {lambda}")));
    }
    if !(norms.l2_sq > 0.0 && norms.l2_sq.is_finite()) {
        return Err(Error::Input(format!("test function has ||u||^2 = {}", norms.l2_sq)));
    }
    Ok(())
}

/// The `L∞·L¹` criterion.
pub fn certify_thm00(norms: &DefectNorms, lambda: f64, essential: bool) -> Result<CriterionReport> {
    check_norms(norms, lambda)?;
    let (sigma, err) = norms.sigma_thm00();
    if sigma == 0.0 {
        return Err(Error::Rejected(
            "sigma = 0: a compactly supported exact eigenfunction indicates an upstream bug".into(),
        ));
    }
    if !sigma.is_finite() {
        return Err(Error::Input(format!("sigma is not finite ({sigma})")));
    }
    let eps = thm00_epsilon(lambda, sigma);
    Ok(CriterionReport::new(norms, lambda, sigma, err, eps, Method::Thm00).with_essential(essential))
}

/// The `L²` criterion; inapplicable when `Δu` has a singular part.
pub fn donnelly_l2(norms: &DefectNorms, lambda: f64) -> Result<CriterionReport> {
    check_norms(norms, lambda)?;
    if !norms.l2_defect.is_finite() {
        return Err(Error::Inapplicable(
            "(Delta + lambda)u is not in L^2: u' jumps, so Delta u carries a measure on the kink spheres".into(),
        ));
    }
    let (sigma, err) = norms.sigma_l2();
    Ok(CriterionReport::new(norms, lambda, sigma, err, sigma, Method::DonnellyL2))
}

/// The `L¹` criterion for a tent function, boundary flux included.
pub fn boundary_criterion(manifold: &ModelManifold, u: &RadialTestFunction, lambda: f64) -> Result<CriterionReport> {
    if !u.is_tent() {
        return Err(Error::Input("boundary criterion needs a tent test function".into()));
    }
    let (lo, _) = u.support();
    let origin = manifold.r0().max(manifold.volume_origin());
    if lo <= origin {
        return Err(Error::Domain(format!("tent support starts at {lo}, touching r0 = {origin}")));
    }
    let norms = defect_norms(manifold, u)?;
    check_norms(&norms, lambda)?;
    let (sigma, err) = norms.sigma_boundary();
    let eps = thm00_epsilon(lambda, sigma);
    Ok(CriterionReport::new(&norms, lambda, sigma, err, eps, Method::Boundary).with_construction(u.construction()))
}

/// `f` in `(f(H)(H − λ)ψ, (H − λ)ψ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FSpec {
    /// `f(x) = (x + 1)⁻¹`.
    ResolventShift1,
    /// `f(x) = (x + α)^{−(N+1)}`, `α > 1`.
    Power { alpha: f64, n: u32 },
}

impl FSpec {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            FSpec::ResolventShift1 => 1.0 / (x + 1.0),
            FSpec::Power { alpha, n } => (x + alpha).powi(-(n as i32 + 1)),
        }
    }

    fn shift(self) -> f64 {
        match self {
            FSpec::ResolventShift1 => 1.0,
            FSpec::Power { alpha, .. } => alpha,
        }
    }

    fn validate(self) -> Result<()> {
        if let FSpec::Power { alpha, .. } = self {
            if !(alpha > 1.0 && alpha.is_finite()) {
                return Err(Error::Parameter(format!("power spec needs alpha > 1, got {alpha}")));
            }
        }
        Ok(())
    }
}

/// Symmetric nonnegative operator on `ℝ^m`.
#[derive(Debug, Clone)]
pub enum SymmetricOperator {
    Dense(DMatrix<f64>),
    Tridiagonal(TridiagonalOperator),
}

impl SymmetricOperator {
    fn size(&self) -> usize {
        match self {
            SymmetricOperator::Dense(a) => a.nrows(),
            SymmetricOperator::Tridiagonal(t) => t.size(),
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            SymmetricOperator::Dense(a) => (a * DVector::from_column_slice(x)).as_slice().to_vec(),
            SymmetricOperator::Tridiagonal(t) => t.apply(x),
        }
    }

    fn norm_bound(&self) -> f64 {
        match self {
            SymmetricOperator::Dense(a) => a.iter().map(|v| v.abs()).fold(0.0, f64::max) * a.nrows() as f64,
            SymmetricOperator::Tridiagonal(t) => {
                let (lo, hi) = t.gershgorin();
                lo.abs().max(hi.abs())
            }
        }
    }

    fn check_symmetric(&self) -> Result<()> {
        if let SymmetricOperator::Dense(a) = self {
            if !a.is_square() {
                return Err(Error::Input("operator matrix is not square".into()));
            }
            let scale = a.iter().map(|v| v.abs()).fold(1.0, f64::max);
            for i in 0..a.nrows() {
                for j in 0..i {
                    if (a[(i, j)] - a[(j, i)]).abs() > SYMMETRY_TOL * scale {
                        return Err(Error::Input(format!("operator is not symmetric at ({i}, {j})")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Solver for `(H + shift)x = b` with iterative refinement.
enum ShiftedSolver<'a> {
    Dense {
        h: &'a DMatrix<f64>,
        shift: f64,
        chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    },
    Tridiagonal {
        t: &'a TridiagonalOperator,
        shift: f64,
    },
}

impl<'a> ShiftedSolver<'a> {
    fn new(op: &'a SymmetricOperator, shift: f64) -> Result<Self> {
        Ok(match op {
            SymmetricOperator::Dense(h) => {
                let shifted = h + DMatrix::identity(h.nrows(), h.ncols()) * shift;
                let chol = shifted.cholesky().ok_or_else(|| {
                    Error::Internal(format!("H + {shift} is not positive definite; H must be nonnegative"))
                })?;
                ShiftedSolver::Dense { h, shift, chol }
            }
            SymmetricOperator::Tridiagonal(t) => ShiftedSolver::Tridiagonal { t, shift },
        })
    }

    fn raw(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            ShiftedSolver::Dense { chol, .. } => Ok(chol.solve(&DVector::from_column_slice(b)).as_slice().to_vec()),
            ShiftedSolver::Tridiagonal { t, shift } => t.solve_shifted(*shift, b),
        }
    }

    fn residual(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        let hx = match self {
            ShiftedSolver::Dense { h, .. } => (*h * DVector::from_column_slice(x)).as_slice().to_vec(),
            ShiftedSolver::Tridiagonal { t, .. } => t.apply(x),
        };
        let shift = match self {
            ShiftedSolver::Dense { shift, .. } | ShiftedSolver::Tridiagonal { shift, .. } => *shift,
        };
        b.iter().zip(hx.iter().zip(x)).map(|(bi, (hi, xi))| bi - hi - shift * xi).collect()
    }

    /// Solution and final residual norm.
    fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, f64)> {
        let target = REFINE_RESIDUAL * norm(b);
        let mut x = self.raw(b)?;
        let mut r = self.residual(&x, b);
        for _ in 0..REFINE_STEPS {
            if norm(&r) <= target {
                break;
            }
            let dx = self.raw(&r)?;
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
            r = self.residual(&x, b);
        }
        Ok((x, norm(&r)))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixWeylReport {
    /// `(ψ, (H − λ)ψ)`.
    pub q_lin: f64,
    /// `(f(H)(H − λ)ψ, (H − λ)ψ)`.
    pub q_f: f64,
    pub f_spec: FSpec,
    pub psi_norm: f64,
    pub q_lin_error: f64,
    pub q_f_error: f64,
    /// `((H + α)^{−i}ψ, (H − λ)ψ)` for the exponents of the corollary
    /// form: `i = 1` for the resolvent, `i = N, N + 1` for powers.
    pub corollary_forms: Vec<(u32, f64)>,
}

impl MatrixWeylReport {
    /// Both forms below `t`.
    pub fn both_below(&self, t: f64) -> bool {
        self.q_lin.abs() < t && self.q_f < t
    }
}

/// Evaluates the generalized Weyl quadratic forms at `ψ` (normalized here).
pub fn weyl_matrix_check(op: &SymmetricOperator, psi: &[f64], lambda: f64, f_spec: FSpec) -> Result<MatrixWeylReport> {
    op.check_symmetric()?;
    f_spec.validate()?;
    let m = op.size();
    if psi.len() != m {
        return Err(Error::Input(format!("psi has length {}, operator has size {m}", psi.len())));
    }
    let n0 = norm(psi);
    if !(n0 > 0.0 && n0.is_finite()) {
        return Err(Error::Input("psi must be a nonzero finite vector".into()));
    }
    let psi: Vec<f64> = psi.iter().map(|v| v / n0).collect();
    let hpsi = op.apply(&psi);
    let w: Vec<f64> = hpsi.iter().zip(&psi).map(|(h, p)| h - lambda * p).collect();
    let q_lin = dot(&psi, &w);
    let q_lin_error = 4.0 * f64::EPSILON * (op.norm_bound() + lambda.abs()) * m as f64;

    let alpha = f_spec.shift();
    let solver = ShiftedSolver::new(op, alpha)?;
    // ‖(H + α)⁻¹‖ ≤ 1/α for H ⪰ 0
    let inv_bound = 1.0 / alpha;
    let wn = norm(&w);
    let (q_f, q_f_error, corollary_forms) = match f_spec {
        FSpec::ResolventShift1 => {
            let (x, res) = solver.solve(&w)?;
            let (y, _) = solver.solve(&psi)?;
            (dot(&x, &w), res * inv_bound * wn, vec![(1, dot(&y, &w))])
        }
        FSpec::Power { n, .. } => {
            // x_k = (H + α)^{−k} w by repeated solves; the error of each
            // stage is amplified by at most 1/α per later stage
            let mut x = w.clone();
            let mut err = 0.0;
            for _ in 0..=n {
                let (next, res) = solver.solve(&x)?;
                err = err * inv_bound + res * inv_bound;
                x = next;
            }
            let q_f = dot(&x, &w);
            let mut y = psi.clone();
            let mut forms = Vec::with_capacity(2);
            for i in 1..=n + 1 {
                y = solver.solve(&y)?.0;
                if i >= n {
                    forms.push((i, dot(&y, &w)));
                }
            }
            (q_f, err * wn, forms)
        }
    };
    Ok(MatrixWeylReport {
        q_lin,
        q_f,
        f_spec,
        psi_norm: norm(&psi),
        q_lin_error,
        q_f_error: q_f_error + 4.0 * f64::EPSILON * q_f.abs() * m as f64,
        corollary_forms,
    })
}

/// `min over unit ψ of max(|q_lin|, q_f)` from an eigendecomposition.
///
/// Both forms are linear in the spectral weights `p_k = (ψ, v_k)²`, so the
/// minimum over the simplex sits on an edge; every edge is scanned at its
/// ends and at the kinks of `max(|a·p|, b·p)`.
pub fn min_max_forms(eigenvalues: &[f64], lambda: f64, f_spec: FSpec) -> f64 {
    let a: Vec<f64> = eigenvalues.iter().map(|&mu| mu - lambda).collect();
    let b: Vec<f64> = eigenvalues.iter().map(|&mu| f_spec.eval(mu) * (mu - lambda).powi(2)).collect();
    let value = |t: f64, i: usize, j: usize| {
        let qa = (1.0 - t) * a[i] + t * a[j];
        let qb = (1.0 - t) * b[i] + t * b[j];
        qa.abs().max(qb)
    };
    let mut best = f64::INFINITY;
    for i in 0..a.len() {
        best = best.min(a[i].abs().max(b[i]));
        for j in i + 1..a.len() {
            let da = a[j] - a[i];
            let db = b[j] - b[i];
            let mut cands = Vec::with_capacity(3);
            if da != 0.0 {
                cands.push(-a[i] / da);
            }
            // a·p = b·p and −a·p = b·p
            if da != db {
                cands.push((b[i] - a[i]) / (da - db));
            }
            if da != -db {
                cands.push(-(a[i] + b[i]) / (da + db));
            }
            for t in cands {
                if (0.0..=1.0).contains(&t) {
                    best = best.min(value(t, i, j));
                }
            }
        }
    }
    best
}

/// Random `H = QΛQᵀ ⪰ 0` with eigenvalues uniform in `[0, 5)`; returns
/// `(H, Λ, Q)`.
pub fn random_psd(n: usize, rng: &mut impl Rng) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let q = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)).qr().q();
    let evals: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
    let h = &q * DMatrix::from_diagonal(&DVector::from_vec(evals.clone())) * q.transpose();
    let h = (&h + h.transpose()) * 0.5;
    (h, evals, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_manifold::WarpingProfile;
    use crate::quadrature::integrate;
    use crate::weyl_sequence::{build_phase_testfn, build_tent_testfn, CutoffSpec, NormErrors, TransitionShape};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn norms_with(sup: f64, l1: f64, l2_sq: f64) -> DefectNorms {
        DefectNorms {
            sup_norm: sup,
            l1_defect: l1,
            l2_sq,
            l2_defect: 0.0,
            boundary_grad: 0.0,
            errors: NormErrors::default(),
        }
    }

    #[test]
    fn epsilon_formula() {
        let r = certify_thm00(&norms_with(1.0, 1e-3, 1.0), 1.0, false).unwrap();
        assert!((r.epsilon - 0.2).abs() < 1e-12);
        let r = certify_thm00(&norms_with(1.0, 1.0, 1.0), 5.0, true).unwrap();
        assert_eq!(r.epsilon, 1.0);
        assert!(r.essential);
        let r = certify_thm00(&norms_with(2.0, 4e-3, 1.0), 3.0, false).unwrap();
        assert!((r.sigma - 8e-3).abs() < 1e-15);
        assert!((r.epsilon - 0.8).abs() < 1e-12);
        assert_eq!(r.interval, (2.2, 3.8));
    }

    #[test]
    fn zero_sigma_is_rejected() {
        assert!(matches!(certify_thm00(&norms_with(1.0, 0.0, 1.0), 1.0, false), Err(Error::Rejected(_))));
        assert!(matches!(certify_thm00(&norms_with(1.0, 1.0, 0.0), 1.0, false), Err(Error::Input(_))));
    }

    #[test]
    fn interval_clipped_for_display() {
        let r = certify_thm00(&norms_with(1.0, 0.5, 1.0), 0.1, false).unwrap();
        assert_eq!(r.interval.0, 0.0);
        assert!(r.interval.1 > 0.1);
    }

    #[test]
    fn exact_dirichlet_eigenfunction_has_zero_l2_sigma() {
        // u = sin r on [0, π]: (d²/dr² + 1)u = 0 identically
        let l2_sq = integrate(|r| r.sin().powi(2), 0.0, PI, 1e-12).unwrap().value;
        let defect_sq = integrate(|r: f64| (-r.sin() + r.sin()).powi(2), 0.0, PI, 1e-12).unwrap().value;
        let norms = DefectNorms {
            sup_norm: 1.0,
            l1_defect: 0.0,
            l2_sq,
            l2_defect: defect_sq.sqrt(),
            boundary_grad: 0.0,
            errors: NormErrors::default(),
        };
        let r = donnelly_l2(&norms, 1.0).unwrap();
        assert_eq!(r.sigma, 0.0);
        assert_eq!(r.epsilon, 0.0);
    }

    #[test]
    fn euclidean_phase_function_l2_sigma() {
        let m = ModelManifold::new(2, WarpingProfile::Euclidean, 1.0).unwrap();
        let spec = CutoffSpec::new(100.0, 1000.0, 10.0, TransitionShape::SmoothstepC3).unwrap();
        let u = build_phase_testfn(&m, 1.0, &spec).unwrap();
        let norms = defect_norms(&m, &u).unwrap();
        let r = donnelly_l2(&norms, 1.0).unwrap();
        // plateau defect |Δr|√λ = 1/r, so ‖·‖² ≈ 2π ln(10) against ‖u‖² ≈ π(1000² − 100²)
        let plateau = (2.0 * PI * 10f64.ln() / (PI * (1000.0f64.powi(2) - 100.0f64.powi(2)))).sqrt();
        assert!(r.sigma >= plateau);
        assert!(r.sigma <= 1.0 / 100.0 + 1.0 / 10.0, "{}", r.sigma);
        assert_eq!(r.epsilon, r.sigma);
        assert_eq!(r.method, Method::DonnellyL2);
    }

    #[test]
    fn tent_example() {
        let m = ModelManifold::new(2, WarpingProfile::Euclidean, 1.0).unwrap();
        let u = build_tent_testfn(&m, 0.0, 100.0, 50.0).unwrap();
        let r = boundary_criterion(&m, &u, 0.0).unwrap();
        // l1 = 20π (kinks 2π, 8π, 6π plus 4π smooth), boundary flux 8π,
        // ‖u‖² = 200π·100/3
        let expected = (20.0 * PI + 8.0 * PI) / (200.0 * PI * 100.0 / 3.0);
        assert!((r.sigma - expected).abs() <= 1e-6 * expected, "{} vs {expected}", r.sigma);
        assert!((r.epsilon - expected.cbrt()).abs() < 1e-6);
        assert!((r.diagnostic.l1_defect - 20.0 * PI).abs() < 1e-4);
        assert!((r.diagnostic.boundary_grad - 8.0 * PI).abs() < 1e-6);
        let five = boundary_criterion(&m, &u.scaled(5.0).unwrap(), 0.0).unwrap();
        assert!((five.sigma - r.sigma).abs() <= 1e-12 * r.sigma);
        let norms = defect_norms(&m, &u).unwrap();
        assert!(matches!(donnelly_l2(&norms, 0.0), Err(Error::Inapplicable(_))));
    }

    #[test]
    fn tent_touching_origin_is_a_domain_error() {
        let m = ModelManifold::new(2, WarpingProfile::PowerCusp { exponent: 2.0 }, 1.0).unwrap();
        let u = build_tent_testfn(&m, 0.0, 3.0, 2.0);
        match u {
            Ok(u) => assert!(matches!(boundary_criterion(&m, &u, 0.0), Err(Error::Domain(_)))),
            Err(e) => assert!(matches!(e, Error::Domain(_) | Error::Parameter(_))),
        }
    }

    #[test]
    fn tent_sequence_sigma_decays_like_inverse_square() {
        let m = ModelManifold::new(2, WarpingProfile::Euclidean, 1.0).unwrap();
        let sig: Vec<f64> = (2..5)
            .map(|k| {
                let a = 4f64.powi(k);
                let u = build_tent_testfn(&m, 0.0, a, a / 2.0).unwrap();
                let r = boundary_criterion(&m, &u, 0.0).unwrap();
                assert!((r.sigma * a * a - 42.0).abs() < 1e-4, "a={a}: {}", r.sigma * a * a);
                r.sigma
            })
            .collect();
        assert!(sig.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn report_json_shape() {
        let r = certify_thm00(&norms_with(1.0, 1e-3, 1.0), 1.0, true)
            .unwrap()
            .with_construction(serde_json::json!({"support": [10.0, 20.0]}));
        let v = serde_json::to_value(&r).unwrap();
        for key in ["lambda", "sigma", "epsilon", "interval", "method", "essential", "construction"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["method"], "thm00");
        assert_eq!(r.support(), Some((10.0, 20.0)));
        assert_eq!(r.expected_epsilon(), r.epsilon);
    }

    #[test]
    fn diag_examples() {
        let h = SymmetricOperator::Dense(DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 2.0])));
        let r = weyl_matrix_check(&h, &[0.0, 1.0, 0.0], 1.0, FSpec::ResolventShift1).unwrap();
        assert_eq!(r.q_lin, 0.0);
        assert_eq!(r.q_f, 0.0);

        let h = SymmetricOperator::Dense(DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 2.0])));
        let s = 0.5f64.sqrt();
        let r = weyl_matrix_check(&h, &[s, s], 1.0, FSpec::ResolventShift1).unwrap();
        assert!(r.q_lin.abs() < 1e-15);
        assert!((r.q_f - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.psi_norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn three_point_operator_against_spectral_sums() {
        let t = TridiagonalOperator::toeplitz(3, 2.0, -1.0).unwrap();
        let psi = [1.0, 0.0, 0.0];
        let r = weyl_matrix_check(&SymmetricOperator::Tridiagonal(t.clone()), &psi, 2.0, FSpec::ResolventShift1).unwrap();
        assert!(r.q_lin.abs() < 1e-15);
        // spectral sum over the closed-form eigenpairs μ_k = 2 − 2cos(kπ/4)
        let mut expected = 0.0;
        for k in 1..=3 {
            let mu = 2.0 - 2.0 * (k as f64 * PI / 4.0).cos();
            let v1 = (k as f64 * PI / 4.0).sin() / 2f64.sqrt();
            expected += v1 * v1 * (mu - 2.0).powi(2) / (mu + 1.0);
        }
        assert!(r.q_f > 0.0);
        assert!((r.q_f - expected).abs() < 1e-14);
        let dense = weyl_matrix_check(&SymmetricOperator::Dense(t.to_dense()), &psi, 2.0, FSpec::ResolventShift1).unwrap();
        assert!((dense.q_f - r.q_f).abs() < 1e-14);
    }

    #[test]
    fn power_forms_match_spectral_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (h, evals, evecs) = random_psd(6, &mut rng);
        let psi: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let spec = FSpec::Power { alpha: 1.5, n: 2 };
        let lambda = 0.7;
        let r = weyl_matrix_check(&SymmetricOperator::Dense(h), &psi, lambda, spec).unwrap();
        let pn = norm(&psi);
        let (mut qf, mut c2, mut c3) = (0.0, 0.0, 0.0);
        for (k, &mu) in evals.iter().enumerate().take(6) {
            let p = (evecs.column(k).dot(&DVector::from_column_slice(&psi)) / pn).powi(2);
            qf += p * spec.eval(mu) * (mu - lambda).powi(2);
            c2 += p * (mu + 1.5f64).powi(-2) * (mu - lambda);
            c3 += p * (mu + 1.5f64).powi(-3) * (mu - lambda);
        }
        assert!((r.q_f - qf).abs() < 1e-12);
        assert_eq!(r.corollary_forms.len(), 2);
        assert!((r.corollary_forms[0].1 - c2).abs() < 1e-12);
        assert!((r.corollary_forms[1].1 - c3).abs() < 1e-12);
        // f(H)(H−λ) = (H+α)^{−N} − (λ+α)(H+α)^{−(N+1)}
        assert!((qf - (c2 - (lambda + 1.5) * c3)).abs() < 1e-12);
    }

    #[test]
    fn input_checks() {
        let h = SymmetricOperator::Dense(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]));
        assert!(matches!(weyl_matrix_check(&h, &[1.0, 0.0], 1.0, FSpec::ResolventShift1), Err(Error::Input(_))));
        let h = SymmetricOperator::Dense(DMatrix::identity(2, 2));
        assert!(matches!(
            weyl_matrix_check(&h, &[1.0, 0.0], 1.0, FSpec::Power { alpha: 0.5, n: 1 }),
            Err(Error::Parameter(_))
        ));
        assert!(weyl_matrix_check(&h, &[0.0, 0.0], 1.0, FSpec::ResolventShift1).is_err());
    }

    #[test]
    fn min_max_forms_on_diag_example() {
        // diag(0, 2), λ = 1: q_lin = p₂ − p₁ = 0 at p = ½, q_f = ½(1 + 1/3)
        let t = min_max_forms(&[0.0, 2.0], 1.0, FSpec::ResolventShift1);
        assert!(t > 0.0);
        let at_eig = min_max_forms(&[0.0, 1.0, 2.0], 1.0, FSpec::ResolventShift1);
        assert_eq!(at_eig, 0.0);
    }

    #[test]
    fn necessity_on_random_eigenpairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..50 {
            let n = rng.random_range(2..12);
            let (h, _, _) = random_psd(n, &mut rng);
            let eig = h.clone().symmetric_eigen();
            let op = SymmetricOperator::Dense(h);
            for k in 0..n {
                let v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
                let mu = eig.eigenvalues[k].max(0.0);
                for spec in [FSpec::ResolventShift1, FSpec::Power { alpha: 2.0, n: 1 }] {
                    let r = weyl_matrix_check(&op, &v, mu, spec).unwrap();
                    assert!(r.q_lin.abs() <= 1e-10 && r.q_f <= 1e-10, "{r:?}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn sufficiency_sweep(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(2..8);
            let (h, evals, _) = random_psd(n, &mut rng);
            let lambda = rng.random_range(0.0..5.0);
            let gap = evals.iter().map(|e| (e - lambda).abs()).fold(f64::INFINITY, f64::min);
            prop_assume!(gap >= 0.05);
            let op = SymmetricOperator::Dense(h);
            for spec in [FSpec::ResolventShift1, FSpec::Power { alpha: 1.5, n: 1 }] {
                let t = min_max_forms(&evals, lambda, spec);
                prop_assert!(t > 0.0);
                for _ in 0..50 {
                    let psi: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let r = weyl_matrix_check(&op, &psi, lambda, spec).unwrap();
                    prop_assert!(!r.both_below(t * (1.0 - 1e-9)));
                }
            }
        }

        #[test]
        fn thm00_scale_invariance(alpha in 0.01f64..100.0) {
            let m = ModelManifold::new(3, WarpingProfile::Euclidean, 1.0).unwrap();
            let spec = CutoffSpec::new(60.0, 200.0, 8.0, TransitionShape::SmoothstepC3).unwrap();
            let u = build_phase_testfn(&m, 0.5, &spec).unwrap();
            let a = certify_thm00(&defect_norms(&m, &u).unwrap(), 0.5, false).unwrap();
            let b = certify_thm00(&defect_norms(&m, &u.scaled(alpha).unwrap()).unwrap(), 0.5, false).unwrap();
            prop_assert!((a.sigma - b.sigma).abs() <= 1e-12 * a.sigma);
            prop_assert_eq!(a.epsilon, thm00_epsilon(0.5, a.sigma));
        }
    }

    #[test]
    fn donnelly_dominance() {
        for n in [2usize, 3] {
            let m = ModelManifold::new(n, WarpingProfile::Euclidean, 1.0).unwrap();
            let spec = CutoffSpec::new(40.0, 160.0, 6.0, TransitionShape::SmoothstepC3).unwrap();
            let u = build_phase_testfn(&m, 1.0, &spec).unwrap();
            let norms = defect_norms(&m, &u).unwrap();
            let l1 = certify_thm00(&norms, 1.0, false).unwrap();
            let l2 = donnelly_l2(&norms, 1.0).unwrap();
            let (s, e) = u.support();
            let vol = m.annulus_volume(s, e).unwrap();
            let bound = l2.sigma * vol.sqrt() * norms.sup_norm / norms.l2_sq.sqrt();
            assert!(l1.sigma <= bound * (1.0 + 1e-6), "{} > {bound}", l1.sigma);
        }
    }
}

//! Independent spectral ground truth.
//!
//! The radial part of `−Δ` on a model manifold is the Sturm–Liouville
//! operator `−w⁻¹(w u′)′` with `w = f^{n−1}`. [`discretize_radial`] truncates
//! it to `[r_min, L]` with Dirichlet ends and a conservative three-point
//! scheme, symmetrized by `s_i = √(w_i h)`. Eigenvalues are then located by
//! Sturm-sequence bisection, which needs neither eigenvectors nor dense
//! storage.

use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::criterion::CriterionReport;
use crate::model_manifold::ModelManifold;
use crate::{Error, Result};

/// Largest `h·√λ` for which the three-point scheme still resolves `e^{i√λ r}`.
pub const MAX_RESOLVED_PHASE_STEP: f64 = 0.5;
const MIN_GRID: usize = 100;
const BISECTION_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    DirichletDirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    /// Left end of the truncated interval.
    pub r_min: f64,
    #[serde(rename = "L")]
    pub length: f64,
    pub m: usize,
    pub h: f64,
    /// The left end is a pole: node 0 sits on it with a zero-flux
    /// condition instead of a Dirichlet node.
    pub pole: bool,
}

impl Grid {
    /// Radius of the `i`-th unknown, `0 ≤ i < m`.
    pub fn node(&self, i: usize) -> f64 {
        let offset = if self.pole { 0.0 } else { 1.0 };
        self.r_min + (i as f64 + offset) * self.h
    }
}

/// Symmetric tridiagonal matrix, optionally carrying the grid it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator {
    diag: Vec<f64>,
    off: Vec<f64>,
    grid: Option<Grid>,
    boundary: Boundary,
    /// `s_i = √(w_i h)`; ones for matrices given directly.
    weights: Vec<f64>,
}

impl TridiagonalOperator {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::Input("tridiagonal operator needs at least one row".into()));
        }
        if off.len() + 1 != diag.len() {
            return Err(Error::Input(format!(
                "off-diagonal length {} does not match size {}",
                off.len(),
                diag.len()
            )));
        }
        if diag.iter().chain(&off).any(|v| !v.is_finite()) {
            return Err(Error::Input("tridiagonal entries must be finite".into()));
        }
        let weights = vec![1.0; diag.len()];
        Ok(Self {
            diag,
            off,
            grid: None,
            boundary: Boundary::DirichletDirichlet,
            weights,
        })
    }

    /// `tridiag(off, diag, off)` of size `m`.
    pub fn toeplitz(m: usize, diag: f64, off: f64) -> Result<Self> {
        Self::new(vec![diag; m], vec![off; m.saturating_sub(1)])
    }

    pub fn size(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off_diag(&self) -> &[f64] {
        &self.off
    }

    pub fn grid(&self) -> Option<&Grid> {
        self.grid.as_ref()
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn similarity_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let m = self.size();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..m {
            let mut rad = 0.0;
            if i > 0 {
                rad += self.off[i - 1].abs();
            }
            if i + 1 < m {
                rad += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - rad);
            hi = hi.max(self.diag[i] + rad);
        }
        (lo, hi)
    }

    /// `T·x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let m = self.size();
        (0..m)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < m {
                    y += self.off[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// Solves `(T + shift)x = b` by the Thomas algorithm. Stable without
    /// pivoting whenever `T + shift` is positive definite.
    pub fn solve_shifted(&self, shift: f64, b: &[f64]) -> Result<Vec<f64>> {
        let m = self.size();
        if b.len() != m {
            return Err(Error::Input(format!("right-hand side has length {}, expected {m}", b.len())));
        }
        let mut c = vec![0.0; m];
        let mut x = vec![0.0; m];
        let mut pivot = self.diag[0] + shift;
        for i in 0..m {
            if i > 0 {
                pivot = self.diag[i] + shift - self.off[i - 1] * c[i - 1];
            }
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::Internal(format!("zero pivot at row {i} of shifted tridiagonal system")));
            }
            if i + 1 < m {
                c[i] = self.off[i] / pivot;
            }
            let prev = if i > 0 { self.off[i - 1] * x[i - 1] } else { 0.0 };
            x[i] = (b[i] - prev) / pivot;
        }
        for i in (0..m.saturating_sub(1)).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        Ok(x)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let m = self.size();
        let mut a = DMatrix::zeros(m, m);
        for i in 0..m {
            a[(i, i)] = self.diag[i];
            if i + 1 < m {
                a[(i, i + 1)] = self.off[i];
                a[(i + 1, i)] = self.off[i];
            }
        }
        a
    }

    /// The operator in the original (unweighted) coordinates,
    /// `S⁻¹ T S` with `S = diag(s)`. Row sums of a discretized Laplacian
    /// are nonnegative there, which is the setting of the `L∞` bound.
    pub fn natural_coordinates(&self) -> MMatrixOperator {
        let m = self.size();
        let s = &self.weights;
        let mut lower = vec![0.0; m.saturating_sub(1)];
        let mut upper = vec![0.0; m.saturating_sub(1)];
        for i in 0..m.saturating_sub(1) {
            upper[i] = self.off[i] * s[i + 1] / s[i];
            lower[i] = self.off[i] * s[i] / s[i + 1];
        }
        MMatrixOperator::Tridiagonal {
            lower,
            diag: self.diag.clone(),
            upper,
        }
    }

    /// Warning when `h·√λ_max` exceeds [`MAX_RESOLVED_PHASE_STEP`].
    pub fn resolution_warning(&self, lambda_max: f64) -> Option<String> {
        let grid = self.grid?;
        let step = grid.h * lambda_max.max(0.0).sqrt();
        (step > MAX_RESOLVED_PHASE_STEP).then(|| {
            format!(
                "grid spacing h = {} under-resolves oscillation at lambda = {lambda_max} (h*sqrt(lambda) = {step:.3} > {MAX_RESOLVED_PHASE_STEP})",
                grid.h
            )
        })
    }
}

/// Discretizes the radial operator on `[r_min, L]`, where `r_min` is the
/// manifold's volume origin. An end at `r₀` gets a Dirichlet node; a pole
/// is a coordinate singularity, so it carries an unknown whose control
/// volume is `[0, h/2]` and no flux through `r = 0`.
pub fn discretize_radial(manifold: &ModelManifold, length: f64, m: usize) -> Result<TridiagonalOperator> {
    let r0 = manifold.r0();
    if !(length.is_finite() && length > 10.0 * r0) {
        return Err(Error::Parameter(format!("truncation length must exceed 10*r0 = {}, got {length}", 10.0 * r0)));
    }
    if m < MIN_GRID {
        return Err(Error::Parameter(format!("need at least {MIN_GRID} grid points, got {m}")));
    }
    let r_min = manifold.volume_origin();
    let pole = manifold.profile().is_pole_regular();
    let h = if pole { length / m as f64 } else { (length - r_min) / (m + 1) as f64 };
    let grid = Grid {
        r_min,
        length,
        m,
        h,
        pole,
    };

    // logs of the lumped masses and face weights; ratios are formed in log
    // space so that exponentially growing densities never overflow
    let mut log_mass: Vec<f64> = Vec::with_capacity(m);
    for i in 0..m {
        let r = grid.node(i);
        log_mass.push(if pole && i == 0 {
            (manifold.annulus_volume(0.0, 0.5 * h)? / manifold.sphere_area()).ln()
        } else {
            manifold.log_density(r)? + h.ln()
        });
    }
    // face i + 1/2 lies between nodes i and i + 1; face −1/2 is the pole
    // (no flux) or the Dirichlet boundary at r_min
    let face = |i: isize| grid.node(0) + (i as f64 + 0.5) * h;
    let log_face: Vec<f64> = (-1..m as isize)
        .map(|i| {
            if pole && i < 0 {
                Ok(f64::NEG_INFINITY)
            } else {
                manifold.log_density(face(i))
            }
        })
        .collect::<Result<_>>()?;

    let mut diag = Vec::with_capacity(m);
    let mut off = Vec::with_capacity(m - 1);
    for i in 0..m {
        let left = (log_face[i] - log_mass[i]).exp();
        let right = (log_face[i + 1] - log_mass[i]).exp();
        diag.push((left + right) / h);
        if i + 1 < m {
            let mean_log = 0.5 * (log_mass[i] + log_mass[i + 1]);
            off.push(-(log_face[i + 1] - mean_log).exp() / h);
        }
    }
    // s_i = √(mass_i), reported relative to the largest
    let top = log_mass.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights = log_mass.iter().map(|&l| (0.5 * (l - top)).exp()).collect();

    Ok(TridiagonalOperator {
        diag,
        off,
        grid: Some(grid),
        boundary: Boundary::DirichletDirichlet,
        weights,
    })
}

/// Number of eigenvalues of `T` strictly below `lambda`, from the signs of
/// the pivots of `T − λ = LDLᵀ`.
pub fn sturm_count(t: &TridiagonalOperator, lambda: f64) -> usize {
    let max_e2 = t.off.iter().map(|e| e * e).fold(1.0, f64::max);
    let pivmin = f64::MIN_POSITIVE * max_e2;
    let mut count = 0;
    let mut q = t.diag[0] - lambda;
    for i in 0..t.size() {
        if i > 0 {
            q = t.diag[i] - lambda - t.off[i - 1] * t.off[i - 1] / q;
        }
        // a zero pivot is nudged upward, i.e. evaluated just below λ, so
        // an eigenvalue exactly at λ is not counted
        if q.abs() <= pivmin {
            q = pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Eigenvalue with zero-based index `k` (ascending), to within `tol`.
pub fn kth_eigenvalue(t: &TridiagonalOperator, k: usize, tol: f64) -> Result<f64> {
    if k >= t.size() {
        return Err(Error::Parameter(format!("index {k} out of range for size {}", t.size())));
    }
    let (lo, hi) = t.gershgorin();
    Ok(bisect_index(t, k, lo - 1.0, hi + 1.0, tol))
}

/// Bisection for the `k`-th eigenvalue known to lie in `[lo, hi)`.
fn bisect_index(t: &TridiagonalOperator, k: usize, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    for _ in 0..BISECTION_MAX_ITER {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(t, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// All eigenvalues in `[a, b)`, each within `±tol`.
pub fn eigenvalues_in(t: &TridiagonalOperator, a: f64, b: f64, tol: f64) -> Result<Vec<f64>> {
    if !(a <= b) || !(tol > 0.0) {
        return Err(Error::Parameter(format!("need a <= b and tol > 0, got [{a}, {b}], tol {tol}")));
    }
    let (ca, cb) = (sturm_count(t, a), sturm_count(t, b));
    let mut out = Vec::with_capacity(cb - ca);
    split_bisect(t, a, b, ca, cb, tol, &mut out);
    Ok(out)
}

/// Recursive bisection that isolates eigenvalues before refining them, so
/// clusters cost one count per split instead of one full bisection each.
fn split_bisect(t: &TridiagonalOperator, lo: f64, hi: f64, clo: usize, chi: usize, tol: f64, out: &mut Vec<f64>) {
    if chi == clo {
        return;
    }
    if chi - clo == 1 || hi - lo <= tol {
        if chi - clo == 1 {
            out.push(bisect_index(t, clo, lo, hi, tol));
        } else {
            out.extend(std::iter::repeat_n(0.5 * (lo + hi), chi - clo));
        }
        return;
    }
    let mid = 0.5 * (lo + hi);
    let cm = sturm_count(t, mid);
    split_bisect(t, lo, mid, clo, cm, tol, out);
    split_bisect(t, mid, hi, cm, chi, tol, out);
}

/// Eigenvalue closest to `lambda` within `[a, b)`, if any.
pub fn nearest_eigenvalue_in(t: &TridiagonalOperator, lambda: f64, a: f64, b: f64, tol: f64) -> Option<f64> {
    let (ca, cb) = (sturm_count(t, a), sturm_count(t, b));
    if ca == cb {
        return None;
    }
    let k = sturm_count(t, lambda.clamp(a, b)).clamp(ca, cb);
    let below = (k > ca).then(|| bisect_index(t, k - 1, a, lambda.clamp(a, b), tol));
    let above = (k < cb).then(|| bisect_index(t, k, lambda.clamp(a, b), b, tol));
    match (below, above) {
        (Some(x), Some(y)) => Some(if lambda - x <= y - lambda { x } else { y }),
        (x, y) => x.or(y),
    }
}

/// Writes `(index, eigenvalue)` rows.
pub fn write_spectrum_csv(path: &Path, eigenvalues: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "eigenvalue"])?;
    for (i, ev) in eigenvalues.iter().enumerate() {
        w.write_record([i.to_string(), format!("{ev:.12e}")])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Operators for the `L∞` resolvent check: nonpositive off-diagonals and
/// nonnegative row sums.
#[derive(Debug, Clone, PartialEq)]
pub enum MMatrixOperator {
    Tridiagonal { lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64> },
    Dense(DMatrix<f64>),
}

impl From<&TridiagonalOperator> for MMatrixOperator {
    fn from(t: &TridiagonalOperator) -> Self {
        MMatrixOperator::Tridiagonal {
            lower: t.off.clone(),
            diag: t.diag.clone(),
            upper: t.off.clone(),
        }
    }
}

impl MMatrixOperator {
    pub fn size(&self) -> usize {
        match self {
            MMatrixOperator::Tridiagonal { diag, .. } => diag.len(),
            MMatrixOperator::Dense(a) => a.nrows(),
        }
    }

    fn check(&self) -> Result<()> {
        const SLACK: f64 = 1e-12;
        let bad = |what: &str, i: usize, v: f64| {
            Err(Error::Input(format!("not an M-matrix Laplacian: {what} at row {i} is {v}")))
        };
        match self {
            MMatrixOperator::Tridiagonal { lower, diag, upper } => {
                let m = diag.len();
                for i in 0..m {
                    let l = if i > 0 { lower[i - 1] } else { 0.0 };
                    let u = if i + 1 < m { upper[i] } else { 0.0 };
                    if l > 0.0 || u > 0.0 {
                        return bad("positive off-diagonal", i, l.max(u));
                    }
                    let sum = diag[i] + l + u;
                    if sum < -SLACK * diag[i].abs().max(1.0) {
                        return bad("row sum", i, sum);
                    }
                }
            }
            MMatrixOperator::Dense(a) => {
                if !a.is_square() {
                    return Err(Error::Input("matrix is not square".into()));
                }
                for i in 0..a.nrows() {
                    let mut sum = 0.0;
                    for j in 0..a.ncols() {
                        let v = a[(i, j)];
                        if i != j && v > 0.0 {
                            return bad("positive off-diagonal", i, v);
                        }
                        sum += v;
                    }
                    if sum < -SLACK * a[(i, i)].abs().max(1.0) {
                        return bad("row sum", i, sum);
                    }
                }
            }
        }
        Ok(())
    }

    /// `(A + I)⁻¹ v`.
    fn resolvent(&self, v: &[f64]) -> Result<Vec<f64>> {
        match self {
            MMatrixOperator::Tridiagonal { lower, diag, upper } => {
                let m = diag.len();
                let mut c = vec![0.0; m];
                let mut x = vec![0.0; m];
                for i in 0..m {
                    let pivot = diag[i] + 1.0 - if i > 0 { lower[i - 1] * c[i - 1] } else { 0.0 };
                    if pivot <= 0.0 {
                        return Err(Error::Internal(format!("nonpositive pivot at row {i}")));
                    }
                    if i + 1 < m {
                        c[i] = upper[i] / pivot;
                    }
                    let prev = if i > 0 { lower[i - 1] * x[i - 1] } else { 0.0 };
                    x[i] = (v[i] - prev) / pivot;
                }
                for i in (0..m.saturating_sub(1)).rev() {
                    x[i] -= c[i] * x[i + 1];
                }
                Ok(x)
            }
            MMatrixOperator::Dense(a) => {
                let shifted = a + DMatrix::identity(a.nrows(), a.ncols());
                let rhs = nalgebra::DVector::from_column_slice(v);
                shifted
                    .lu()
                    .solve(&rhs)
                    .map(|x| x.as_slice().to_vec())
                    .ok_or_else(|| Error::Internal("singular resolvent system".into()))
            }
        }
    }
}

/// Weighted graph Laplacian `L = D − W`, plus an optional nonnegative
/// potential on the vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    pub vertices: usize,
    pub edges: Vec<(usize, usize, f64)>,
    pub potential: Vec<f64>,
}

impl WeightedGraph {
    pub fn laplacian(&self) -> Result<DMatrix<f64>> {
        let n = self.vertices;
        let mut a = DMatrix::zeros(n, n);
        for &(i, j, w) in &self.edges {
            if i >= n || j >= n || i == j {
                return Err(Error::Input(format!("invalid edge ({i}, {j})")));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Input(format!("edge weight must be nonnegative, got {w}")));
            }
            a[(i, j)] -= w;
            a[(j, i)] -= w;
            a[(i, i)] += w;
            a[(j, j)] += w;
        }
        for (i, &p) in self.potential.iter().enumerate().take(n) {
            if p < 0.0 {
                return Err(Error::Input(format!("potential must be nonnegative, got {p} at {i}")));
            }
            a[(i, i)] += p;
        }
        Ok(a)
    }

    /// Random weighted path graph on `n` vertices with a few extra chords.
    pub fn random(n: usize, rng: &mut impl Rng) -> Self {
        let mut edges: Vec<(usize, usize, f64)> = (1..n).map(|i| (i - 1, i, rng.random_range(0.01..10.0))).collect();
        for _ in 0..n / 4 {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i != j {
                edges.push((i, j, rng.random_range(0.01..10.0)));
            }
        }
        let potential = (0..n)
            .map(|_| if rng.random_bool(0.3) { rng.random_range(0.0..2.0) } else { 0.0 })
            .collect();
        Self {
            vertices: n,
            edges,
            potential,
        }
    }
}

/// Largest observed `‖(A + 1)⁻¹v‖_∞ / ‖v‖_∞` over random sign vectors.
pub fn resolvent_linf_check(a: &MMatrixOperator, trials: usize, seed: u64) -> Result<f64> {
    a.check()?;
    let n = a.size();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let v: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let x = a.resolvent(&v)?;
        let ratio = x.iter().fold(0.0f64, |m, xi| m.max(xi.abs()));
        worst = worst.max(ratio);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationEntry {
    pub certificate: String,
    pub lambda: f64,
    /// Certified interval widened by the slack.
    pub window: (f64, f64),
    pub eigenvalue_count: usize,
    pub nearest_eigenvalue: Option<f64>,
    pub distance: Option<f64>,
    pub validated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub entries: Vec<ValidationEntry>,
    pub slack: f64,
    pub valid: bool,
    /// Only the radial sector of `−Δ` is discretized, so a match confirms
    /// intersection with the radial spectrum.
    pub sector: String,
    pub warnings: Vec<String>,
}

/// Checks that each certified interval, widened by `slack`, contains an
/// eigenvalue of `t`.
pub fn cross_validate(certificates: &[CriterionReport], t: &TridiagonalOperator, slack: f64) -> Result<ValidationReport> {
    let mut warnings = Vec::new();
    let mut entries = Vec::with_capacity(certificates.len());
    let grid = t.grid();
    for (i, cert) in certificates.iter().enumerate() {
        let label = format!("#{i} {} lambda={}", cert.method.name(), cert.lambda);
        if let Some(w) = t.resolution_warning(cert.lambda + cert.epsilon) {
            warnings.push(format!("{label}: {w}"));
        }
        if let (Some(g), Some((s, e))) = (grid, cert.support()) {
            if s < g.r_min || e > g.length {
                warnings.push(format!(
                    "{label}: support [{s}, {e}] leaves the oracle interval [{}, {}]",
                    g.r_min, g.length
                ));
            }
        }
        let lo = cert.lambda - cert.epsilon - slack;
        let hi = cert.lambda + cert.epsilon + slack;
        let count = sturm_count(t, hi) - sturm_count(t, lo);
        let nearest = nearest_eigenvalue_in(t, cert.lambda, lo, hi, 1e-10);
        entries.push(ValidationEntry {
            certificate: label,
            lambda: cert.lambda,
            window: (lo, hi),
            eigenvalue_count: count,
            nearest_eigenvalue: nearest,
            distance: nearest.map(|x| (x - cert.lambda).abs()),
            validated: count > 0,
        });
    }
    let report = ValidationReport {
        valid: entries.iter().all(|e| e.validated),
        entries,
        slack,
        sector: "radial".into(),
        warnings,
    };
    if let Some(bad) = report.entries.iter().find(|e| !e.validated) {
        return Err(Error::ValidationFailed {
            certificate: bad.certificate.clone(),
            report: Box::new(report),
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use crate::model_manifold::{SampledProfile, WarpingProfile};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn lap3() -> TridiagonalOperator {
        TridiagonalOperator::toeplitz(3, 2.0, -1.0).unwrap()
    }

    #[test]
    fn sturm_counts() {
        let t = lap3();
        assert_eq!(sturm_count(&t, 2.5), 2);
        assert_eq!(sturm_count(&t, -1.0), 0);
        assert_eq!(sturm_count(&t, 10.0), 3);
        let d = TridiagonalOperator::new(vec![1.0, 2.0, 3.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(sturm_count(&d, 2.0), 1);
    }

    #[test]
    fn three_point_spectrum() {
        let t = lap3();
        let ev = eigenvalues_in(&t, 0.0, 3.0, 1e-10).unwrap();
        assert_eq!(ev.len(), 2);
        assert!((ev[0] - (2.0 - 2f64.sqrt())).abs() < 1e-10);
        assert!((ev[1] - 2.0).abs() < 1e-10);
        assert!((kth_eigenvalue(&t, 2, 1e-12).unwrap() - (2.0 + 2f64.sqrt())).abs() < 1e-11);
    }

    fn flat_interval(m: usize) -> TridiagonalOperator {
        // f ≡ 1 in dimension 2 is not a model manifold, so build the flat
        // Dirichlet problem on [0, π] directly: h = π/(m+1)
        let h = PI / (m + 1) as f64;
        TridiagonalOperator::toeplitz(m, 2.0 / (h * h), -1.0 / (h * h)).unwrap()
    }

    #[test]
    fn flat_dirichlet_eigenvalues() {
        let t = flat_interval(10_000);
        let ev = eigenvalues_in(&t, 0.5, 4.5, 1e-6).unwrap();
        assert_eq!(ev.len(), 2);
        assert!((ev[0] - 1.0).abs() < 1e-3 && (ev[1] - 4.0).abs() < 1e-3);
    }

    #[test]
    fn flat_convergence_order() {
        let err = |m: usize| (kth_eigenvalue(&flat_interval(m), 0, 1e-14).unwrap() - 1.0).abs();
        let order = (err(200) / err(400)).log2();
        assert!(order >= 1.9, "order {order}");
    }

    fn flat_weight(r0: f64, length: f64) -> ModelManifold {
        // n = 2 with f ≡ 1 gives w ≡ 1: the plain interval problem
        let samples = SampledProfile::new(vec![r0, length + 1.0], vec![1.0, 1.0]).unwrap();
        ModelManifold::new(2, WarpingProfile::Custom(samples), r0).unwrap()
    }

    #[test]
    fn flat_weight_gives_the_standard_stencil() {
        let r0 = 0.1;
        let t = discretize_radial(&flat_weight(r0, r0 + 101.0), r0 + 101.0, 100).unwrap();
        assert_eq!(t.grid().unwrap().h, 1.0);
        assert!(t.diag().iter().all(|&d| (d - 2.0).abs() < 1e-14));
        assert!(t.off_diag().iter().all(|&e| (e + 1.0).abs() < 1e-14));
    }

    #[test]
    fn flat_weight_lowest_eigenvalue() {
        let r0 = 0.1;
        let t = discretize_radial(&flat_weight(r0, r0 + PI), r0 + PI, 2000).unwrap();
        assert!((kth_eigenvalue(&t, 0, 1e-13).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn hyperbolic_bottom_of_spectrum() {
        let m = ModelManifold::new(2, WarpingProfile::Hyperbolic { curvature: 1.0 }, 1.0).unwrap();
        let t = discretize_radial(&m, 40.0, 4000).unwrap();
        assert_eq!(sturm_count(&t, -1e-8), 0);
        assert!(t.off_diag().iter().all(|&e| e < 0.0));
        let low: Vec<f64> = (0..5).map(|k| kth_eigenvalue(&t, k, 1e-10).unwrap()).collect();
        assert!(low.iter().all(|&e| e >= 0.25 - 0.05), "{low:?}");
        assert!(eigenvalues_in(&t, 0.0, 0.2, 1e-8).unwrap().is_empty());
    }

    #[test]
    fn radial_discretization_is_second_order() {
        let m = ModelManifold::new(3, WarpingProfile::Euclidean, 1.0).unwrap();
        // radial Dirichlet problem on the ball of radius 20: λ_k = (kπ/20)²
        let lows = |n: usize| -> Vec<f64> {
            let t = discretize_radial(&m, 20.0, n).unwrap();
            (0..10).map(|k| kth_eigenvalue(&t, k, 1e-13).unwrap()).collect()
        };
        let (a, b) = (lows(400), lows(800));
        for k in 0..10 {
            let exact = ((k + 1) as f64 * PI / 20.0).powi(2);
            let (ea, eb) = ((a[k] - exact).abs(), (b[k] - exact).abs());
            assert!(eb * 3.5 <= ea, "k={k}: {ea} -> {eb}");
        }
    }

    #[test]
    fn resolution_warning_threshold() {
        let m = ModelManifold::new(2, WarpingProfile::Euclidean, 1.0).unwrap();
        let t = discretize_radial(&m, 100.0, 199).unwrap();
        assert!(t.resolution_warning(0.2).is_none());
        assert!(t.resolution_warning(2.0).is_some());
    }

    #[test]
    fn rejects_short_or_coarse_grids() {
        let m = ModelManifold::new(2, WarpingProfile::Euclidean, 1.0).unwrap();
        assert!(discretize_radial(&m, 5.0, 1000).is_err());
        assert!(discretize_radial(&m, 50.0, 50).is_err());
    }

    #[test]
    fn resolvent_contractive_examples() {
        let t = lap3();
        let r = resolvent_linf_check(&MMatrixOperator::from(&t), 20, 7).unwrap();
        assert!(r <= 1.0 + 1e-12);
        let zero = MMatrixOperator::Dense(DMatrix::zeros(4, 4));
        assert_eq!(resolvent_linf_check(&zero, 5, 1).unwrap(), 1.0);
        let bad = MMatrixOperator::Dense(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]));
        assert!(matches!(resolvent_linf_check(&bad, 1, 1), Err(Error::Input(_))));
    }

    #[test]
    fn resolvent_inverse_is_substochastic() {
        // brute force: (A + I)⁻¹ entrywise nonnegative with row sums ≤ 1
        for n in 2..=10 {
            let a = TridiagonalOperator::toeplitz(n, 2.0, -1.0).unwrap().to_dense();
            let inv = (a + DMatrix::identity(n, n)).try_inverse().unwrap();
            assert!(inv.iter().all(|&v| v >= 0.0));
            for i in 0..n {
                assert!(inv.row(i).sum() <= 1.0 + 1e-14);
            }
        }
    }

    #[test]
    fn natural_coordinates_have_zero_interior_row_sums() {
        let m = ModelManifold::new(3, WarpingProfile::Hyperbolic { curvature: 1.0 }, 1.0).unwrap();
        let t = discretize_radial(&m, 30.0, 300).unwrap();
        let MMatrixOperator::Tridiagonal { lower, diag, upper } = t.natural_coordinates() else {
            unreachable!()
        };
        for i in 1..diag.len() - 1 {
            let s = lower[i - 1] + diag[i] + upper[i];
            assert!(s.abs() <= 1e-9 * diag[i], "row {i}: {s}");
        }
        let r = resolvent_linf_check(&t.natural_coordinates(), 50, 3).unwrap();
        assert!(r <= 1.0 + 1e-10);
    }

    #[test]
    fn random_graph_laplacians_are_contractive() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let n = rng.random_range(5..60);
            let g = WeightedGraph::random(n, &mut rng);
            let a = MMatrixOperator::Dense(g.laplacian().unwrap());
            assert!(resolvent_linf_check(&a, 100, 9).unwrap() <= 1.0 + 1e-10);
        }
    }

    #[test]
    fn spectrum_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spectrum.csv");
        write_spectrum_csv(&path, &[0.25, 1.5]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "index,eigenvalue");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("1,1.5"));
    }

    /// Characteristic polynomial by the three-term recurrence.
    fn char_poly(t: &TridiagonalOperator, x: f64) -> f64 {
        let (mut p0, mut p1) = (1.0, t.diag()[0] - x);
        for i in 1..t.size() {
            let p2 = (t.diag()[i] - x) * p1 - t.off_diag()[i - 1].powi(2) * p0;
            p0 = p1;
            p1 = p2;
        }
        p1
    }

    proptest! {
        #[test]
        fn sturm_count_is_monotone(
            d in proptest::collection::vec(-5.0f64..5.0, 1..30),
            e in proptest::collection::vec(-3.0f64..3.0, 29),
            xs in proptest::collection::vec(-20.0f64..20.0, 2..10),
        ) {
            let t = TridiagonalOperator::new(d.clone(), e[..d.len() - 1].to_vec()).unwrap();
            let mut xs = xs;
            xs.sort_by(f64::total_cmp);
            let counts: Vec<usize> = xs.iter().map(|&x| sturm_count(&t, x)).collect();
            prop_assert!(counts.windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(sturm_count(&t, 1e6), d.len());
        }

        #[test]
        fn bisection_matches_characteristic_roots(
            d in proptest::collection::vec(-5.0f64..5.0, 1..=12),
            e in proptest::collection::vec(0.05f64..3.0, 11),
        ) {
            let t = TridiagonalOperator::new(d.clone(), e[..d.len() - 1].iter().map(|v| -v).collect()).unwrap();
            let (lo, hi) = t.gershgorin();
            let ev = eigenvalues_in(&t, lo - 1.0, hi + 1.0, 1e-12).unwrap();
            prop_assert_eq!(ev.len(), d.len());
            // sign changes of the characteristic polynomial bracket each root
            for &x in &ev {
                let scale = 1e-8;
                let (a, b) = (char_poly(&t, x - scale), char_poly(&t, x + scale));
                prop_assert!(a * b <= 0.0, "no sign change around {}", x);
            }
            // and the dense symmetric eigensolver agrees
            let mut dense: Vec<f64> = t.to_dense().symmetric_eigenvalues().iter().copied().collect();
            dense.sort_by(f64::total_cmp);
            for (x, y) in ev.iter().zip(&dense) {
                prop_assert!((x - y).abs() <= 1e-8);
            }
        }

        #[test]
        fn random_tridiagonal_m_matrices_are_contractive(
            w in proptest::collection::vec(0.01f64..10.0, 4..200),
            extra in proptest::collection::vec(0.0f64..1.0, 200),
        ) {
            let n = w.len() + 1;
            let mut diag = vec![0.0; n];
            let mut off = vec![0.0; n - 1];
            for (i, &wi) in w.iter().enumerate() {
                off[i] = -wi;
                diag[i] += wi;
                diag[i + 1] += wi;
            }
            for i in 0..n {
                diag[i] += extra[i];
            }
            let t = TridiagonalOperator::new(diag, off).unwrap();
            prop_assert!(resolvent_linf_check(&MMatrixOperator::from(&t), 20, 5).unwrap() <= 1.0 + 1e-10);
        }
    }
}

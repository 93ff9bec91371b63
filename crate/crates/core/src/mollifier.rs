//! Mollification of piecewise-linear Lipschitz functions in one dimension,
//! partition-of-unity blending with an `η` budget, and the cylinder cut-locus
//! demonstration.
//!
//! A piecewise-linear `g` is written as `ℓ(x) + Σ J_k (x − k)₊` with kinks `k`
//! and slope jumps `J_k`. Convolution with the bump kernel then has the
//! closed form `g_ε = ℓ + Σ J_k ε Ψ((x − k)/ε)`, `Ψ(s) = sΦ(s) − Φ₁(s)`,
//! where `Φ` and `Φ₁` are the kernel's distribution function and first
//! partial moment. Only those two tables are ever integrated numerically.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::OnceLock;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::quadrature::Quadrature;
use crate::weyl_sequence::TransitionShape;
use crate::{Error, Result};

/// `∫_{−1}^{1} exp(1/(t²−1)) dt`, to 12 digits.
pub const KERNEL_MASS: f64 = 0.443_993_816_168;

const TABLE_CELLS: usize = 4096;
const WINDOW_SAMPLES: usize = 128;
const CHECK_SAMPLES: usize = 400;
const MAX_HALVINGS: u32 = 40;
const PARTITION_TOL: f64 = 1e-10;
const L1_TOL: f64 = 1e-11;

/// Unnormalized bump `exp(1/(t²−1))` on `(−1, 1)`.
pub fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (1.0 / (t * t - 1.0)).exp()
    }
}

struct KernelTable {
    mass: f64,
    cdf: Vec<f64>,
    moment: Vec<f64>,
}

fn gauss5(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let r = (10.0f64 / 7.0).sqrt();
    let x1 = (5.0 - 2.0 * r).sqrt() / 3.0;
    let x2 = (5.0 + 2.0 * r).sqrt() / 3.0;
    let s70 = 70f64.sqrt();
    let w1 = (322.0 + 13.0 * s70) / 900.0;
    let w2 = (322.0 - 13.0 * s70) / 900.0;
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    h * (128.0 / 225.0 * f(c)
        + w1 * (f(c - h * x1) + f(c + h * x1))
        + w2 * (f(c - h * x2) + f(c + h * x2)))
}

fn table() -> &'static KernelTable {
    static TABLE: OnceLock<KernelTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let h = 2.0 / TABLE_CELLS as f64;
        let mut cdf = vec![0.0; TABLE_CELLS + 1];
        let mut moment = vec![0.0; TABLE_CELLS + 1];
        for j in 0..TABLE_CELLS {
            let (a, b) = (-1.0 + j as f64 * h, -1.0 + (j + 1) as f64 * h);
            cdf[j + 1] = cdf[j] + gauss5(bump, a, b);
            moment[j + 1] = moment[j] + gauss5(|t| t * bump(t), a, b);
        }
        let mass = cdf[TABLE_CELLS];
        cdf.iter_mut().for_each(|v| *v /= mass);
        moment.iter_mut().for_each(|v| *v /= mass);
        KernelTable { mass, cdf, moment }
    })
}

/// Normalization of the bump, computed once.
pub fn kernel_mass() -> f64 {
    table().mass
}

/// Normalized kernel density `ξ(t)` with `∫ξ = 1`.
pub fn kernel(t: f64) -> f64 {
    bump(t) / kernel_mass()
}

fn hermite(values: &[f64], slope: impl Fn(f64) -> f64, s: f64) -> f64 {
    let h = 2.0 / TABLE_CELLS as f64;
    let u = (s + 1.0) / h;
    let j = (u.floor() as usize).min(TABLE_CELLS - 1);
    let t = u - j as f64;
    let (x0, x1) = (-1.0 + j as f64 * h, -1.0 + (j + 1) as f64 * h);
    let (t2, t3) = (t * t, t * t * t);
    values[j] * (2.0 * t3 - 3.0 * t2 + 1.0)
        + h * slope(x0) * (t3 - 2.0 * t2 + t)
        + values[j + 1] * (3.0 * t2 - 2.0 * t3)
        + h * slope(x1) * (t3 - t2)
}

/// `Φ(s) = ∫_{−1}^{s} ξ`.
pub fn kernel_cdf(s: f64) -> f64 {
    if s <= -1.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else if s > 0.0 {
        1.0 - kernel_cdf(-s)
    } else {
        hermite(&table().cdf, kernel, s)
    }
}

/// `Φ₁(s) = ∫_{−1}^{s} t ξ(t) dt`, even in `s`.
pub fn kernel_moment(s: f64) -> f64 {
    let s = -s.abs();
    if s <= -1.0 {
        0.0
    } else {
        hermite(&table().moment, |t| t * kernel(t), s)
    }
}

/// `(ρ, ρ′, ρ″)` for `ρ = (·)₊ * ξ_ε` at `y`.
fn smoothed_ramp(y: f64, eps: f64) -> (f64, f64, f64) {
    let s = y / eps;
    if s >= 1.0 {
        (y, 1.0, 0.0)
    } else if s <= -1.0 {
        (0.0, 0.0, 0.0)
    } else {
        let phi = kernel_cdf(s);
        (eps * (s * phi - kernel_moment(s)), phi, kernel(s) / eps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kink {
    pub at: f64,
    /// Slope to the right minus slope to the left.
    pub jump: f64,
}

#[derive(Debug, Clone, Deserialize)]
struct RawPiecewiseLinear {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

/// Continuous piecewise-linear function, extended linearly past its ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPiecewiseLinear")]
pub struct PiecewiseLinearFn {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    #[serde(skip_serializing)]
    lipschitz: f64,
}

impl TryFrom<RawPiecewiseLinear> for PiecewiseLinearFn {
    type Error = Error;

    fn try_from(raw: RawPiecewiseLinear) -> Result<Self> {
        Self::new(raw.breakpoints, raw.values)
    }
}

impl PiecewiseLinearFn {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 || breakpoints.len() != values.len() {
            return Err(Error::Input(format!(
                "need at least two breakpoints with one value each (got {} and {})",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::Input("breakpoints and values must be finite".into()));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input("breakpoints must be strictly increasing".into()));
        }
        let lipschitz = breakpoints
            .windows(2)
            .zip(values.windows(2))
            .map(|(x, y)| ((y[1] - y[0]) / (x[1] - x[0])).abs())
            .fold(0.0, f64::max);
        if !lipschitz.is_finite() {
            return Err(Error::Input("Lipschitz constant is not finite".into()));
        }
        Ok(Self {
            breakpoints,
            values,
            lipschitz,
        })
    }

    /// Samples `f` at the given breakpoints.
    pub fn from_fn(breakpoints: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = breakpoints.iter().map(|&x| f(x)).collect();
        Self::new(breakpoints, values)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.breakpoints.len();
        self.breakpoints.partition_point(|&b| b <= x).clamp(1, n - 1) - 1
    }

    fn slope_of(&self, j: usize) -> f64 {
        (self.values[j + 1] - self.values[j]) / (self.breakpoints[j + 1] - self.breakpoints[j])
    }

    pub fn eval(&self, x: f64) -> f64 {
        let j = self.segment(x);
        self.values[j] + self.slope_of(j) * (x - self.breakpoints[j])
    }

    /// Right derivative.
    pub fn slope(&self, x: f64) -> f64 {
        self.slope_of(self.segment(x))
    }

    /// Interior breakpoints where the slope actually changes.
    pub fn kinks(&self) -> Vec<Kink> {
        (1..self.breakpoints.len() - 1)
            .map(|j| Kink {
                at: self.breakpoints[j],
                jump: self.slope_of(j) - self.slope_of(j - 1),
            })
            .filter(|k| k.jump != 0.0)
            .collect()
    }

    /// `n` breakpoints uniform in `domain` (at least `1e-3·width` apart)
    /// with values uniform in `[−3, 3]`.
    pub fn random(rng: &mut impl Rng, n: usize, domain: (f64, f64)) -> Result<Self> {
        let (a, b) = domain;
        let gap = 1e-3 * (b - a);
        let mut xs: Vec<f64> = (0..n.max(2)).map(|_| rng.random_range(a..b)).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup_by(|x, y| *x - *y < gap);
        let ys = xs.iter().map(|_| rng.random_range(-3.0..3.0)).collect();
        Self::new(xs, ys)
    }

    pub fn is_convex(&self) -> bool {
        self.kinks().iter().all(|k| k.jump >= 0.0)
    }

    pub fn is_concave(&self) -> bool {
        self.kinks().iter().all(|k| k.jump <= 0.0)
    }
}

/// `g * ξ_ε` for one piecewise-linear `g`, in closed form.
#[derive(Debug, Clone)]
struct SmoothPiece {
    g: PiecewiseLinearFn,
    eps: f64,
    slope0: f64,
    kinks: Vec<Kink>,
}

impl SmoothPiece {
    fn new(g: PiecewiseLinearFn, eps: f64) -> Self {
        let slope0 = g.slope_of(0);
        let kinks = g.kinks();
        Self {
            g,
            eps,
            slope0,
            kinks,
        }
    }

    fn domain(&self) -> (f64, f64) {
        let (a, b) = self.g.domain();
        (a + self.eps, b - self.eps)
    }

    fn jet(&self, x: f64) -> (f64, f64, f64) {
        let x0 = self.g.breakpoints[0];
        let mut v = self.g.values[0] + self.slope0 * (x - x0);
        let mut d = self.slope0;
        let mut dd = 0.0;
        for k in &self.kinks {
            let (r, dr, ddr) = smoothed_ramp(x - k.at, self.eps);
            v += k.jump * r;
            d += k.jump * dr;
            dd += k.jump * ddr;
        }
        (v, d, dd)
    }

    /// Kink neighbourhoods `[k − ε, k + ε]`, merged and clipped to `[lo, hi]`.
    fn windows(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for k in &self.kinks {
            let (a, b) = ((k.at - self.eps).max(lo), (k.at + self.eps).min(hi));
            if a >= b {
                continue;
            }
            match out.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        out
    }

    fn sup_diff_on(&self, lo: f64, hi: f64) -> f64 {
        let mut sup = 0.0f64;
        for (a, b) in self.windows(lo, hi) {
            for i in 0..=WINDOW_SAMPLES {
                let x = a + (b - a) * i as f64 / WINDOW_SAMPLES as f64;
                sup = sup.max((self.jet(x).0 - self.g.eval(x)).abs());
            }
        }
        for k in &self.kinks {
            if (lo..=hi).contains(&k.at) {
                sup = sup.max((self.jet(k.at).0 - self.g.eval(k.at)).abs());
            }
        }
        sup
    }

    fn grad_l1_diff_on(&self, lo: f64, hi: f64) -> Result<f64> {
        let cuts: Vec<f64> = self.kinks.iter().map(|k| k.at).collect();
        let mut total = 0.0;
        for (a, b) in self.windows(lo, hi) {
            total += l1_split(&cuts, a, b, |x| self.g.slope(x), |x, s| self.jet(x).1 - s)?;
        }
        Ok(total)
    }
}

/// `∫_lo^hi |f(x, g′)|` with `g′` frozen on each interval between `cuts`,
/// so the integrand never sees the wrong one-sided slope at an endpoint.
fn l1_split(
    cuts: &[f64],
    lo: f64,
    hi: f64,
    slope: impl Fn(f64) -> f64,
    f: impl Fn(f64, f64) -> f64,
) -> Result<f64> {
    let mut pts: Vec<f64> = cuts.iter().copied().filter(|c| *c > lo && *c < hi).collect();
    pts.extend([lo, hi]);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let q = Quadrature::new(L1_TOL);
    let mut total = 0.0;
    for w in pts.windows(2) {
        let s = slope(0.5 * (w[0] + w[1]));
        total += q.integrate(|x| f(x, s).abs(), w[0], w[1])?.value;
    }
    Ok(total)
}

/// Partition-of-unity member: a smooth rise on `rise`, a smooth fall on
/// `fall`, and `1` in between. `None` means the member extends to that end of
/// the domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionFn {
    pub rise: Option<(f64, f64)>,
    pub fall: Option<(f64, f64)>,
    #[serde(default)]
    pub shape: TransitionShape,
}

impl PartitionFn {
    pub fn one() -> Self {
        Self {
            rise: None,
            fall: None,
            shape: TransitionShape::default(),
        }
    }

    fn step(&self, span: Option<(f64, f64)>, x: f64) -> (f64, f64, f64) {
        match span {
            None => (1.0, 0.0, 0.0),
            Some((a, b)) => {
                let w = b - a;
                let (s, ds, dds) = self.shape.eval((x - a) / w);
                (s, ds / w, dds / (w * w))
            }
        }
    }

    /// `(ψ, ψ′, ψ″)`.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let (r, dr, ddr) = self.step(self.rise, x);
        let (s, ds, dds) = self.step(self.fall, x);
        let (f, df, ddf) = if self.fall.is_some() {
            (1.0 - s, -ds, -dds)
        } else {
            (1.0, 0.0, 0.0)
        };
        (r * f, dr * f + r * df, ddr * f + 2.0 * dr * df + r * ddf)
    }

    pub fn support(&self) -> (f64, f64) {
        (
            self.rise.map_or(f64::NEG_INFINITY, |s| s.0),
            self.fall.map_or(f64::INFINITY, |s| s.1),
        )
    }

    fn transitions(&self) -> impl Iterator<Item = f64> + '_ {
        self.rise.into_iter().chain(self.fall).flat_map(|(a, b)| [a, b])
    }

    /// Cutoffs for consecutive overlapping pieces: each hand-over happens on
    /// the middle half of the overlap.
    pub fn standard(pieces: &[PiecewiseLinearFn]) -> Result<Vec<PartitionFn>> {
        let mut spans = Vec::with_capacity(pieces.len().saturating_sub(1));
        for (i, w) in pieces.windows(2).enumerate() {
            let (lo, hi) = (w[1].domain().0, w[0].domain().1);
            if hi <= lo {
                return Err(Error::Input(format!("pieces {i} and {} do not overlap", i + 1)));
            }
            let q = 0.25 * (hi - lo);
            spans.push((lo + q, hi - q));
        }
        if spans.windows(2).any(|s| s[1].0 < s[0].1) {
            return Err(Error::Input("overlaps of consecutive pieces intersect".into()));
        }
        Ok((0..pieces.len())
            .map(|i| PartitionFn {
                rise: i.checked_sub(1).map(|j| spans[j]),
                fall: spans.get(i).copied(),
                shape: TransitionShape::default(),
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierErrors {
    /// `sup |g_ε − g|` over the domain.
    pub sup_diff: f64,
    /// `∫ |g_ε′ − g′|` over the domain.
    pub grad_l1_diff: f64,
}

/// Worst ratios `lhs / η` seen by the blend checks; all `≤ 1` on success.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BlendChecks {
    /// `‖b‖_{L¹(x ≥ R)} / η(R − 1)`.
    pub b_tail: f64,
    /// `‖r̃′ − g′‖_{L¹(x ≥ R)} / η(R)`.
    pub grad_tail: f64,
    /// `|r̃ − g|(x) / η(x)` for `x > 2`.
    pub value: f64,
    /// `|r̃′|(x) / (2 Lip)` for `x > 2`.
    pub gradient: f64,
    /// `Σ |g_i,ε − g| (|ψ_i″| + 4|ψ_i′| + ψ_i) / η`, the per-piece budget.
    pub budget: f64,
}

impl BlendChecks {
    pub fn passed(&self) -> bool {
        [self.b_tail, self.grad_tail, self.value, self.gradient, self.budget]
            .iter()
            .all(|&r| r <= 1.0)
    }

    fn worst(&self) -> f64 {
        [self.b_tail, self.grad_tail, self.value, self.gradient, self.budget]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlendRecord {
    pub halvings: u32,
    pub b_l1: f64,
    pub checks: BlendChecks,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceComparison {
    pub lhs: f64,
    /// `+∞` when a convex kink lies within `ε` of `x`.
    pub rhs: f64,
}

impl LaplaceComparison {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

/// `r̃ = Σ ψ_i g_{i,ε_i}` with its error record.
#[derive(Debug, Clone)]
pub struct MollifiedFunction {
    pieces: Vec<SmoothPiece>,
    cutoffs: Vec<PartitionFn>,
    domain: (f64, f64),
    lipschitz: f64,
    errors: MollifierErrors,
    blend: Option<BlendRecord>,
}

impl MollifiedFunction {
    fn assemble(pieces: Vec<SmoothPiece>, cutoffs: Vec<PartitionFn>) -> Self {
        let domain = (pieces[0].domain().0, pieces.last().unwrap().domain().1);
        let lipschitz = pieces.iter().map(|p| p.g.lipschitz).fold(0.0, f64::max);
        Self {
            pieces,
            cutoffs,
            domain,
            lipschitz,
            errors: MollifierErrors {
                sup_diff: 0.0,
                grad_l1_diff: 0.0,
            },
            blend: None,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    /// Largest kernel width in use.
    pub fn epsilon(&self) -> f64 {
        self.pieces.iter().map(|p| p.eps).fold(0.0, f64::max)
    }

    pub fn epsilons(&self) -> Vec<f64> {
        self.pieces.iter().map(|p| p.eps).collect()
    }

    pub fn errors(&self) -> MollifierErrors {
        self.errors
    }

    pub fn blend(&self) -> Option<&BlendRecord> {
        self.blend.as_ref()
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn active(&self, x: f64) -> impl Iterator<Item = (&SmoothPiece, (f64, f64, f64))> {
        self.pieces
            .iter()
            .zip(&self.cutoffs)
            .map(move |(p, c)| (p, c.eval(x)))
            .filter(|(_, (v, d, dd))| *v != 0.0 || *d != 0.0 || *dd != 0.0)
    }

    /// `(r̃, r̃′, r̃″)`.
    pub fn jet(&self, x: f64) -> (f64, f64, f64) {
        let (mut v, mut d, mut dd) = (0.0, 0.0, 0.0);
        for (p, (psi, dpsi, ddpsi)) in self.active(x) {
            let (g, dg, ddg) = p.jet(x);
            v += psi * g;
            d += dpsi * g + psi * dg;
            dd += ddpsi * g + 2.0 * dpsi * dg + psi * ddg;
        }
        (v, d, dd)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.jet(x).0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.jet(x).1
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        self.jet(x).2
    }

    /// The unsmoothed function (pieces agree on overlaps).
    pub fn original(&self, x: f64) -> f64 {
        self.owner(x).g.eval(x)
    }

    pub fn original_slope(&self, x: f64) -> f64 {
        self.owner(x).g.slope(x)
    }

    fn owner(&self, x: f64) -> &SmoothPiece {
        self.pieces
            .iter()
            .find(|p| {
                let (a, b) = p.g.domain();
                (a..=b).contains(&x)
            })
            .unwrap_or(&self.pieces[0])
    }

    /// `b = 2 Σ ψ_i′ (g_{i,ε_i}′ − g′)`.
    pub fn b(&self, x: f64) -> f64 {
        let g1 = self.original_slope(x);
        2.0 * self.active(x).map(|(p, (_, dpsi, _))| dpsi * (p.jet(x).1 - g1)).sum::<f64>()
    }

    fn kink_points(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .pieces
            .iter()
            .flat_map(|p| p.kinks.iter().flat_map(move |k| [k.at - p.eps, k.at, k.at + p.eps]))
            .collect();
        pts.extend(self.cutoffs.iter().flat_map(|c| c.transitions().collect::<Vec<_>>()));
        pts
    }

    /// `sup |r̃ − g|` over `[lo, hi]`, sampled densely near every kink.
    pub fn sup_diff_on(&self, lo: f64, hi: f64) -> f64 {
        match self.pieces.as_slice() {
            [p] => p.sup_diff_on(lo, hi),
            _ => self
                .samples()
                .into_iter()
                .filter(|x| (lo..=hi).contains(x))
                .map(|x| (self.eval(x) - self.original(x)).abs())
                .fold(0.0, f64::max),
        }
    }

    /// `∫_lo^hi |r̃′ − g′|`.
    pub fn grad_l1_diff_on(&self, lo: f64, hi: f64) -> Result<f64> {
        l1_split(
            &self.kink_points(),
            lo,
            hi,
            |x| self.original_slope(x),
            |x, s| self.derivative(x) - s,
        )
    }

    pub fn b_l1_on(&self, lo: f64, hi: f64) -> Result<f64> {
        l1_split(&self.kink_points(), lo, hi, |_| 0.0, |x, _| self.b(x))
    }

    /// Checks `r̃″(x) ≤ max_{[x−ε, x+ε]} g″ + η(x) + |b(x)|`, where the
    /// absolutely continuous part of `g″` vanishes and a convex kink makes
    /// the maximum infinite.
    pub fn laplace_comparison(&self, x: f64, eta: impl Fn(f64) -> f64) -> LaplaceComparison {
        let eps = self.epsilon();
        let convex_near = self
            .pieces
            .iter()
            .flat_map(|p| &p.kinks)
            .any(|k| k.jump > 0.0 && (k.at - x).abs() <= eps);
        let rate = if convex_near { f64::INFINITY } else { 0.0 };
        LaplaceComparison {
            lhs: self.second_derivative(x),
            rhs: rate + eta(x) + self.b(x).abs(),
        }
    }

    fn samples(&self) -> Vec<f64> {
        let (a, b) = self.domain;
        let mut xs: Vec<f64> = (0..=CHECK_SAMPLES)
            .map(|i| a + (b - a) * i as f64 / CHECK_SAMPLES as f64)
            .collect();
        xs.extend(self.kink_points().into_iter().filter(|x| (a..=b).contains(x)));
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs
    }

    /// `∫_{x_i}^{end} |f|` for every sample; samples include all kinks.
    fn suffix_l1(&self, xs: &[f64], f: impl Fn(f64, f64) -> f64) -> Result<Vec<f64>> {
        let mut tail = vec![0.0; xs.len()];
        for i in (0..xs.len() - 1).rev() {
            let seg = l1_split(&[], xs[i], xs[i + 1], |x| self.original_slope(x), &f)?;
            tail[i] = tail[i + 1] + seg;
        }
        Ok(tail)
    }

    fn check(&self, eta: &impl Fn(f64) -> f64) -> Result<(BlendChecks, f64, f64)> {
        let xs = self.samples();
        let b_tail = self.suffix_l1(&xs, |x, _| self.b(x))?;
        let g_tail = self.suffix_l1(&xs, |x, s| self.derivative(x) - s)?;
        let mut c = BlendChecks::default();
        let mut sup = 0.0f64;
        for (i, &x) in xs.iter().enumerate() {
            let (v, d, _) = self.jet(x);
            let diff = (v - self.original(x)).abs();
            sup = sup.max(diff);
            c.b_tail = c.b_tail.max(b_tail[i] / eta(x - 1.0));
            c.grad_tail = c.grad_tail.max(g_tail[i] / eta(x));
            if x > 2.0 {
                c.value = c.value.max(diff / eta(x));
                c.gradient = c.gradient.max(d.abs() / (2.0 * self.lipschitz));
            }
            let budget: f64 = self
                .active(x)
                .map(|(p, (psi, dpsi, ddpsi))| {
                    (p.jet(x).0 - p.g.eval(x)).abs() * (ddpsi.abs() + 4.0 * dpsi.abs() + psi)
                })
                .sum();
            c.budget = c.budget.max(budget / eta(x));
        }
        Ok((c, sup, b_tail[0]))
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Parameter(format!("ε must be positive and finite, got {eps}")));
    }
    Ok(())
}

/// Convolves `g` with the bump kernel of half-width `ε`. The result lives on
/// `[a + ε, b − ε]`.
pub fn mollify(g: &PiecewiseLinearFn, eps: f64) -> Result<MollifiedFunction> {
    check_eps(eps)?;
    let (a, b) = g.domain();
    if b - a <= 2.0 * eps {
        return Err(Error::Domain(format!(
            "domain [{a}, {b}] is too narrow for kernel half-width {eps}"
        )));
    }
    let piece = SmoothPiece::new(g.clone(), eps);
    let (lo, hi) = piece.domain();
    let errors = MollifierErrors {
        sup_diff: piece.sup_diff_on(lo, hi),
        grad_l1_diff: piece.grad_l1_diff_on(lo, hi)?,
    };
    let mut out = MollifiedFunction::assemble(vec![piece], vec![PartitionFn::one()]);
    out.errors = errors;
    Ok(out)
}

/// Blends per-piece mollifications with a partition of unity, halving every
/// `ε_i` until the `η` budget holds.
pub fn partition_blend(
    pieces: &[PiecewiseLinearFn],
    cutoffs: &[PartitionFn],
    eps: &[f64],
    eta: impl Fn(f64) -> f64,
) -> Result<MollifiedFunction> {
    if pieces.is_empty() || pieces.len() != cutoffs.len() || pieces.len() != eps.len() {
        return Err(Error::Input(format!(
            "need matching non-empty lists of pieces, cutoffs and widths (got {}, {}, {})",
            pieces.len(),
            cutoffs.len(),
            eps.len()
        )));
    }
    for &e in eps {
        check_eps(e)?;
    }
    let mut margins = Vec::with_capacity(pieces.len());
    for (i, (g, c)) in pieces.iter().zip(cutoffs).enumerate() {
        let (a, b) = g.domain();
        let (s, t) = c.support();
        let left = if i == 0 { f64::INFINITY } else { s - a };
        let right = if i + 1 == pieces.len() { f64::INFINITY } else { b - t };
        let margin = left.min(right);
        if margin <= 0.0 {
            return Err(Error::Input(format!(
                "cutoff {i} is not supported inside its piece's domain [{a}, {b}]"
            )));
        }
        margins.push(margin.min(0.5 * (b - a)));
    }

    let mut eps = eps.to_vec();
    for halvings in 0..=MAX_HALVINGS {
        if eps.iter().zip(&margins).any(|(e, m)| e >= m) {
            eps.iter_mut().for_each(|e| *e *= 0.5);
            continue;
        }
        let smooth = pieces
            .iter()
            .zip(&eps)
            .map(|(g, &e)| SmoothPiece::new(g.clone(), e))
            .collect();
        let mut out = MollifiedFunction::assemble(smooth, cutoffs.to_vec());
        if halvings == 0 {
            check_partition(&out)?;
        }
        let (checks, sup_diff, b_l1) = out.check(&eta)?;
        if checks.passed() {
            let (lo, hi) = out.domain;
            out.errors = MollifierErrors {
                sup_diff,
                grad_l1_diff: out.grad_l1_diff_on(lo, hi)?,
            };
            out.blend = Some(BlendRecord {
                halvings,
                b_l1,
                checks,
            });
            return Ok(out);
        }
        log::debug!("blend check failed at ε = {eps:?}: worst ratio {}", checks.worst());
        eps.iter_mut().for_each(|e| *e *= 0.5);
    }
    Err(Error::Parameter(format!(
        "η schedule not met after {MAX_HALVINGS} halvings of ε"
    )))
}

fn check_partition(out: &MollifiedFunction) -> Result<()> {
    for x in out.samples() {
        let total: f64 = out.cutoffs.iter().map(|c| c.eval(x).0).sum();
        if (total - 1.0).abs() > PARTITION_TOL {
            return Err(Error::Input(format!(
                "cutoffs sum to {total} at x = {x}, not 1"
            )));
        }
    }
    Ok(())
}

/// Rectangle `θ ∈ theta`, `x ∈ x` on the cylinder `S¹ × ℝ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderWindow {
    pub theta: (f64, f64),
    pub x: (f64, f64),
}

impl Default for CylinderWindow {
    fn default() -> Self {
        Self {
            theta: (PI - 1.0, PI + 1.0),
            x: (-1.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpSample {
    pub x: f64,
    pub integral: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderReport {
    /// Spacing actually used: `2π/N` with `N` even.
    pub h: f64,
    pub l1_norm: f64,
    pub l2_norm: f64,
    pub jump_profile: Vec<JumpSample>,
}

impl CylinderReport {
    /// Cross-cut integral at the grid row nearest `x`.
    pub fn jump_at(&self, x: f64) -> f64 {
        self.jump_profile
            .iter()
            .min_by(|a, b| (a.x - x).abs().total_cmp(&(b.x - x).abs()))
            .map_or(f64::NAN, |s| s.integral)
    }

    pub fn write_jump_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for s in &self.jump_profile {
            w.serialize(s)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn cylinder_distance(theta: f64, x: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    let t = t.min(2.0 * PI - t);
    (x * x + t * t).sqrt()
}

/// Five-point Laplacian of the distance from `(0, 0)` on `S¹ × ℝ`, whose cut
/// locus is the line `θ = π`.
pub fn cylinder_demo(h: f64, window: CylinderWindow) -> Result<CylinderReport> {
    if !(h > 0.0 && h <= 0.05) {
        return Err(Error::Parameter(format!("grid spacing must lie in (0, 0.05], got {h}")));
    }
    let (t0, t1) = window.theta;
    let (x0, x1) = window.x;
    if !(t0 < t1 && x0 < x1) || [t0, t1, x0, x1].iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("window must be a non-degenerate finite rectangle".into()));
    }
    if t1 - t0 >= 2.0 * PI {
        return Err(Error::Parameter("window wraps around the circle".into()));
    }
    let wraps_pole = (t0..=t1).contains(&0.0)
        || (t0..=t1).contains(&(2.0 * PI))
        || (t0..=t1).contains(&(-2.0 * PI));
    if wraps_pole && x0 <= 0.0 && x1 >= 0.0 {
        return Err(Error::Domain("window contains the pole (θ, x) = (0, 0)".into()));
    }
    if !(t0 < PI && PI < t1) {
        return Err(Error::Parameter("window must straddle the cut line θ = π".into()));
    }

    let half = (PI / h).ceil() as i64;
    let h = PI / half as f64;
    let cut = half;
    let (j0, j1) = ((t0 / h).ceil() as i64, (t1 / h).floor() as i64);
    let (i0, i1) = ((x0 / h).ceil() as i64, (x1 / h).floor() as i64);
    let lap = |j: i64, i: i64| {
        let (t, x) = (j as f64 * h, i as f64 * h);
        let c = cylinder_distance(t, x);
        (cylinder_distance(t - h, x)
            + cylinder_distance(t + h, x)
            + cylinder_distance(t, x - h)
            + cylinder_distance(t, x + h)
            - 4.0 * c)
            / (h * h)
    };
    // column sums are combined in a fixed order so the result does not
    // depend on the thread count
    let columns: Vec<(f64, f64)> = (j0..=j1)
        .into_par_iter()
        .map(|j| {
            (i0..=i1).fold((0.0, 0.0), |(a, b), i| {
                let v = lap(j, i);
                (a + v.abs(), b + v * v)
            })
        })
        .collect();
    let (l1, l2) = columns.iter().fold((0.0, 0.0), |a, c| (a.0 + c.0, a.1 + c.1));
    let jump_profile = (i0..=i1)
        .map(|i| JumpSample {
            x: i as f64 * h,
            integral: h * lap(cut, i),
        })
        .collect();
    Ok(CylinderReport {
        h,
        l1_norm: h * h * l1,
        l2_norm: (h * h * l2).sqrt(),
        jump_profile,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // E[max(T, 0)] for T with density ξ, from an independent high-precision run.
    const HALF_ABS_MOMENT: f64 = 0.167_226_998_854_987_66;

    fn abs_at(c: f64, a: f64, b: f64) -> PiecewiseLinearFn {
        PiecewiseLinearFn::from_fn(vec![a, c, b], |x| (x - c).abs()).unwrap()
    }

    fn random_pl(rng: &mut ChaCha8Rng) -> PiecewiseLinearFn {
        let n = rng.random_range(3..12);
        PiecewiseLinearFn::random(rng, n, (-5.0, 5.0)).unwrap()
    }

    #[test]
    fn kernel_mass_matches_recorded_digits() {
        assert!((kernel_mass() - KERNEL_MASS).abs() < 1e-12);
        let z = Quadrature::new(1e-15).integrate(bump, -1.0, 1.0).unwrap().value;
        assert!((z - kernel_mass()).abs() < 1e-12);
    }

    #[test]
    fn kernel_tables_match_direct_quadrature() {
        let q = Quadrature::new(1e-15);
        for s in [-0.99, -0.7, -0.3, -0.01, 0.0, 0.2, 0.55, 0.93] {
            let cdf = q.integrate(kernel, -1.0, s).unwrap().value;
            let mom = q.integrate(|t| t * kernel(t), -1.0, s).unwrap().value;
            assert!((kernel_cdf(s) - cdf).abs() < 1e-12, "{s}");
            assert!((kernel_moment(s) - mom).abs() < 1e-12, "{s}");
        }
        assert!((kernel_moment(0.0) + HALF_ABS_MOMENT).abs() < 1e-12);
    }

    #[test]
    fn scaled_kernel_has_unit_mass() {
        for eps in [1e-3, 0.05, 0.1, 0.7, 3.0] {
            let m = Quadrature::new(1e-14)
                .integrate(|x| kernel(x / eps) / eps, -eps, eps)
                .unwrap()
                .value;
            assert!((m - 1.0).abs() < 1e-10, "{eps}: {m}");
        }
    }

    #[test]
    fn rejects_bad_breakpoints() {
        assert!(PiecewiseLinearFn::new(vec![0.0, 0.0, 1.0], vec![0.0; 3]).is_err());
        assert!(PiecewiseLinearFn::new(vec![0.0, 1.0], vec![0.0]).is_err());
        assert!(PiecewiseLinearFn::new(vec![0.0, f64::NAN], vec![0.0, 1.0]).is_err());
        let g: Result<PiecewiseLinearFn> =
            serde_json::from_str(r#"{"breakpoints":[1,0],"values":[0,0]}"#).map_err(Into::into);
        assert!(g.is_err());
    }

    #[test]
    fn piecewise_linear_basics() {
        let g = PiecewiseLinearFn::new(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 1.0]).unwrap();
        assert_eq!(g.lipschitz(), 2.0);
        assert_eq!(g.eval(0.5), 1.0);
        assert_eq!(g.eval(2.0), 1.5);
        assert_eq!(g.eval(-1.0), -2.0);
        assert_eq!(g.eval(5.0), 0.0);
        let k = g.kinks();
        assert_eq!(k.len(), 1);
        assert_eq!(k[0].jump, -2.5);
        assert!(g.is_concave() && !g.is_convex());
    }

    #[test]
    fn absolute_value_example() {
        let g = abs_at(0.0, -2.0, 2.0);
        let m = mollify(&g, 0.1).unwrap();
        let v0 = m.eval(0.0);
        assert!(v0 > 0.0 && v0 <= 0.1);
        assert!((v0 - 0.2 * HALF_ABS_MOMENT).abs() < 1e-12);
        assert!(m.errors().sup_diff <= 0.1);
        let l1 = m.grad_l1_diff_on(-1.0, 1.0).unwrap();
        assert!(l1 <= 0.2);
        // ∫|Φ(x/ε) − H(x)|·2 dx = 4ε E[T₊]
        assert!((l1 - 0.4 * HALF_ABS_MOMENT).abs() < 1e-10, "{l1}");
        assert!((m.errors().grad_l1_diff - l1).abs() < 1e-10);
    }

    #[test]
    fn smooth_jet_matches_direct_convolution() {
        let g = PiecewiseLinearFn::new(vec![-1.0, 0.0, 0.05, 1.0], vec![0.0, 1.0, 0.5, 2.0]).unwrap();
        let eps = 0.2;
        let m = mollify(&g, eps).unwrap();
        let q = Quadrature::new(1e-13).with_breakpoints([-0.05, 0.0, 0.05, 0.25, 0.2, -0.2]);
        for x in [-0.5, -0.1, 0.0, 0.03, 0.12, 0.5] {
            let direct = q
                .integrate(|y| g.eval(y) * kernel((x - y) / eps) / eps, x - eps, x + eps)
                .unwrap()
                .value;
            let (v, d, _) = m.jet(x);
            assert!((v - direct).abs() < 1e-11, "{x}: {v} vs {direct}");
            let dh = 1e-5;
            let fd = (m.eval(x + dh) - m.eval(x - dh)) / (2.0 * dh);
            assert!((d - fd).abs() < 1e-7);
            let fd2 = (m.derivative(x + dh) - m.derivative(x - dh)) / (2.0 * dh);
            assert!((m.second_derivative(x) - fd2).abs() < 1e-5);
        }
    }

    #[test]
    fn affine_functions_are_preserved() {
        let g = PiecewiseLinearFn::new(vec![-3.0, 0.0, 2.0], vec![-5.5, 0.5, 4.5]).unwrap();
        assert!(g.kinks().is_empty());
        let m = mollify(&g, 0.4).unwrap();
        for x in [-2.6, -1.0, 0.0, 1.5] {
            assert_eq!(m.eval(x), g.eval(x));
            assert_eq!(m.derivative(x), 2.0);
        }
        assert_eq!(m.errors().sup_diff, 0.0);
    }

    #[test]
    fn narrow_domain_is_rejected() {
        let g = abs_at(0.0, -0.1, 0.1);
        assert!(matches!(mollify(&g, 0.1), Err(Error::Domain(_))));
        assert!(matches!(mollify(&g, 0.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn random_functions_respect_kink_budgets() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..40 {
            let g = random_pl(&mut rng);
            let eps = rng.random_range(0.01..0.2);
            let Ok(m) = mollify(&g, eps) else { continue };
            let lip = g.lipschitz();
            assert!(m.errors().sup_diff <= lip * eps);
            let (lo, hi) = m.domain();
            let kinks = g.kinks().iter().filter(|k| k.at > lo && k.at < hi).count();
            assert!(m.errors().grad_l1_diff <= kinks as f64 * 2.0 * lip * eps + 1e-12);
            let half = mollify(&g, eps / 2.0).unwrap();
            let coarse = m.errors().sup_diff;
            let fine = half.sup_diff_on(lo, hi);
            assert!(fine <= coarse + 1e-14, "{fine} > {coarse}");
        }
    }

    #[test]
    fn single_piece_blend_has_no_correction() {
        let g = abs_at(5.0, 0.0, 10.0);
        let m = partition_blend(std::slice::from_ref(&g), &[PartitionFn::one()], &[0.1], |_| 1.0).unwrap();
        for x in [1.0, 4.95, 5.0, 7.3] {
            assert_eq!(m.b(x), 0.0);
        }
        assert_eq!(m.blend().unwrap().b_l1, 0.0);
        assert_eq!(m.eval(5.0), mollify(&g, 0.1).unwrap().eval(5.0));
    }

    fn two_pieces(f: impl Fn(f64) -> f64) -> Vec<PiecewiseLinearFn> {
        vec![
            PiecewiseLinearFn::from_fn(vec![0.0, 5.0, 6.0], &f).unwrap(),
            PiecewiseLinearFn::from_fn(vec![4.0, 5.0, 10.0], &f).unwrap(),
        ]
    }

    #[test]
    fn two_piece_blend_meets_eta() {
        let eta = |r: f64| 2f64.powf(-r);
        let pieces = two_pieces(|x| (x - 5.0).abs());
        let cutoffs = PartitionFn::standard(&pieces).unwrap();
        let m = partition_blend(&pieces, &cutoffs, &[0.5, 0.5], eta).unwrap();
        let rec = m.blend().unwrap();
        assert!(rec.checks.passed());
        assert!(rec.b_l1 <= eta(3.0));
        // b lives where the cutoffs move
        assert_eq!(m.b(4.2), 0.0);
        assert_eq!(m.b(5.8), 0.0);
        let (lo, hi) = m.domain();
        let b_outside = m.b_l1_on(lo, 4.5).unwrap() + m.b_l1_on(5.5, hi).unwrap();
        assert_eq!(b_outside, 0.0);
        // b ≤ 2 sup|ψ′| ∫|g_ε′ − g′|
        let bound = 2.0 * TransitionShape::default().c1() * m.errors().grad_l1_diff;
        assert!(rec.b_l1 <= bound + 1e-14);
        for i in 0..=200 {
            let x = lo + (hi - lo) * i as f64 / 200.0;
            let diff = (m.eval(x) - m.original(x)).abs();
            assert!(diff <= 1.0, "{x}");
            if x > 2.0 {
                assert!(diff <= eta(x), "{x}");
                assert!(m.derivative(x).abs() <= 2.0);
            }
        }
    }

    #[test]
    fn concave_blend_satisfies_laplace_comparison() {
        let eta = |r: f64| 2f64.powf(-r);
        let pieces = two_pieces(|x| 5.0 - (x - 5.0).abs());
        let cutoffs = PartitionFn::standard(&pieces).unwrap();
        let m = partition_blend(&pieces, &cutoffs, &[0.5, 0.5], eta).unwrap();
        let (lo, hi) = m.domain();
        let mut tested = 0;
        for i in 0..=1000 {
            let x = lo + (hi - lo) * i as f64 / 1000.0;
            let c = m.laplace_comparison(x, eta);
            assert!(c.rhs.is_finite());
            assert!(c.holds(), "{x}: {} > {}", c.lhs, c.rhs);
            tested += 1;
        }
        assert_eq!(tested, 1001);
    }

    #[test]
    fn convex_kinks_make_the_comparison_vacuous() {
        let g = abs_at(0.0, -1.0, 1.0);
        let m = mollify(&g, 0.1).unwrap();
        assert!(m.laplace_comparison(0.05, |_| 0.0).rhs.is_infinite());
        assert_eq!(m.laplace_comparison(0.5, |_| 0.0).rhs, 0.0);
    }

    #[test]
    fn broken_partition_is_an_input_error() {
        let pieces = two_pieces(|x| (x - 5.0).abs());
        let mut cutoffs = PartitionFn::standard(&pieces).unwrap();
        cutoffs[1].rise = Some((4.6, 5.5));
        let r = partition_blend(&pieces, &cutoffs, &[0.1, 0.1], |_| 1.0);
        assert!(matches!(r, Err(Error::Input(_))));
        let outside = vec![PartitionFn::one(), PartitionFn::one()];
        assert!(matches!(
            partition_blend(&pieces, &outside, &[0.1, 0.1], |_| 1.0),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn standard_partition_sums_to_one() {
        let pieces = vec![
            abs_at(1.0, 0.0, 3.0),
            PiecewiseLinearFn::from_fn(vec![2.0, 6.0], |x| x - 1.0).unwrap(),
            abs_at(7.0, 5.0, 9.0),
        ];
        let cutoffs = PartitionFn::standard(&pieces).unwrap();
        for i in 0..=900 {
            let x = i as f64 / 100.0;
            let (s, ds, dds) = cutoffs.iter().fold((0.0, 0.0, 0.0), |acc, c| {
                let (a, b, d) = c.eval(x);
                (acc.0 + a, acc.1 + b, acc.2 + d)
            });
            assert!((s - 1.0).abs() < 1e-14);
            assert!(ds.abs() < 1e-12 && dds.abs() < 1e-10);
        }
        assert!(PartitionFn::standard(&[abs_at(0.5, 0.0, 1.0), abs_at(2.5, 2.0, 3.0)]).is_err());
    }

    #[test]
    fn cylinder_jump_profile_approaches_the_delta_weight() {
        let rep = cylinder_demo(0.01, CylinderWindow::default()).unwrap();
        for x in [0.0, 0.5, 1.0] {
            let want = -2.0 * PI / (x * x + PI * PI).sqrt();
            let got = rep.jump_at(x);
            assert!((got - want).abs() <= 0.01 * want.abs(), "{x}: {got} vs {want}");
        }
    }

    #[test]
    fn cylinder_l2_blows_up_like_inverse_root_h() {
        let a = cylinder_demo(0.02, CylinderWindow::default()).unwrap();
        let b = cylinder_demo(0.01, CylinderWindow::default()).unwrap();
        assert!(b.l2_norm / a.l2_norm >= 1.3);
        assert!((b.l1_norm / a.l1_norm - 1.0).abs() <= 0.05);
        let pa = a.l2_norm * a.h.sqrt();
        let pb = b.l2_norm * b.h.sqrt();
        assert!((pa / pb - 1.0).abs() < 0.1);
    }

    #[test]
    fn cylinder_smooth_region_has_laplacian_one_over_r() {
        // away from the cut, r is a Euclidean distance and Δr = 1/r
        let w = CylinderWindow {
            theta: (1.0, 2.0),
            x: (0.5, 1.0),
        };
        assert!(matches!(cylinder_demo(0.01, w), Err(Error::Parameter(_))));
        let h = 0.01;
        let lap = |t: f64, x: f64| {
            (cylinder_distance(t - h, x) + cylinder_distance(t + h, x) + cylinder_distance(t, x - h)
                + cylinder_distance(t, x + h)
                - 4.0 * cylinder_distance(t, x))
                / (h * h)
        };
        let r = cylinder_distance(2.0, 0.5);
        assert!((lap(2.0, 0.5) - 1.0 / r).abs() < 1e-4);
    }

    #[test]
    fn cylinder_rejects_pole_and_coarse_grids() {
        let w = CylinderWindow {
            theta: (-0.5, 3.5),
            x: (-1.0, 1.0),
        };
        assert!(matches!(cylinder_demo(0.02, w), Err(Error::Domain(_))));
        assert!(matches!(
            cylinder_demo(0.1, CylinderWindow::default()),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn cylinder_csv_round_trip() {
        let rep = cylinder_demo(0.05, CylinderWindow::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("jump_profile.csv");
        rep.write_jump_csv(&path).unwrap();
        let mut rd = csv::Reader::from_path(&path).unwrap();
        let rows: Vec<JumpSample> = rd.deserialize().map(|r| r.unwrap()).collect();
        assert_eq!(rows, rep.jump_profile);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn sup_diff_is_at_most_lipschitz_times_eps(
            seed in any::<u64>(),
            eps in 0.005f64..0.3,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_pl(&mut rng);
            if let Ok(m) = mollify(&g, eps) {
                prop_assert!(m.errors().sup_diff <= g.lipschitz() * eps);
                let (lo, hi) = m.domain();
                for i in 0..=50 {
                    let x = lo + (hi - lo) * i as f64 / 50.0;
                    prop_assert!((m.eval(x) - g.eval(x)).abs() <= g.lipschitz() * eps);
                    prop_assert!(m.derivative(x).abs() <= g.lipschitz() + 1e-12);
                }
            }
        }
    }
}

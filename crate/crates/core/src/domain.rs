//! Domain types for the one-dimensional controlled heat equation.
//!
//! The spatial domain is the interval `(0, ell)` discretized by `n` interior
//! nodes with homogeneous Dirichlet data at both ends. Spatial vectors are
//! plain `[f64]` slices of length `n`; the discrete L² inner product is the
//! rectangle rule `h * sum(a_i * b_i)` over interior nodes.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Uniform interior grid on `(0, ell)` together with the indicator of the
/// control region `omega = (a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    n: usize,
    h: f64,
    ell: f64,
    omega: (f64, f64),
    omega_mask: Vec<f64>,
}

impl SpatialGrid {
    /// Grid with `n` interior nodes on `(0, ell)` and control region `(a, b)`.
    ///
    /// Node `i` (zero based) sits at `x = (i + 1) * h`; it belongs to the
    /// control region when `a < x < b`.
    pub fn new(ell: f64, n: usize, a: f64, b: f64) -> Result<Self> {
        if !(ell.is_finite() && ell > 0.0) {
            return Err(Error::Argument(format!(
                "domain length must be positive, got {ell}"
            )));
        }
        if n == 0 {
            return Err(Error::Argument(
                "grid needs at least one interior node".into(),
            ));
        }
        if !(a.is_finite() && b.is_finite() && 0.0 <= a && a < b && b <= ell) {
            return Err(Error::Argument(format!(
                "control region ({a}, {b}) must be a nonempty subinterval of (0, {ell})"
            )));
        }
        let h = ell / (n as f64 + 1.0);
        let omega_mask: Vec<f64> = (0..n)
            .map(|i| {
                let x = (i as f64 + 1.0) * h;
                if a < x && x < b {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        if omega_mask.iter().all(|&m| m == 0.0) {
            return Err(Error::Argument(format!(
                "control region ({a}, {b}) contains no grid node at spacing {h}"
            )));
        }
        Ok(Self {
            n,
            h,
            ell,
            omega: (a, b),
            omega_mask,
        })
    }

    /// Grid whose control region is the whole domain.
    pub fn whole_domain(ell: f64, n: usize) -> Result<Self> {
        Self::new(ell, n, 0.0, ell)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn omega(&self) -> (f64, f64) {
        self.omega
    }

    pub fn mask(&self) -> &[f64] {
        &self.omega_mask
    }

    /// Position of interior node `i`.
    pub fn node(&self, i: usize) -> f64 {
        (i as f64 + 1.0) * self.h
    }

    /// True when every interior node lies in the control region.
    pub fn is_global_control(&self) -> bool {
        self.omega_mask.iter().all(|&m| m == 1.0)
    }

    /// Discrete L² inner product.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        check_len(a, self.n)?;
        check_len(b, self.n)?;
        Ok(self.h * dot(a, b))
    }

    /// Zeroes every entry outside the control region.
    pub fn apply_mask(&self, v: &mut [f64]) {
        for (x, m) in v.iter_mut().zip(&self.omega_mask) {
            *x *= m;
        }
    }

    pub(crate) fn norm_unchecked(&self, v: &[f64]) -> f64 {
        (self.h * dot(v, v)).sqrt()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Discrete L²(Ω) norm `sqrt(h * sum v_i^2)`.
pub fn l2_norm(v: &[f64], g: &SpatialGrid) -> Result<f64> {
    check_len(v, g.n)?;
    Ok(g.norm_unchecked(v))
}

/// A scalar nonlinearity `f` acting pointwise on the state.
pub trait Nonlinearity {
    fn value(&self, y: f64) -> f64;
    fn derivative(&self, y: f64) -> f64;
    /// Claimed bound on `|f'|`.
    fn lipschitz(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityKind {
    /// `f = 0`.
    Zero,
    /// `f(y) = L tanh(y)`.
    ScaledTanh,
    /// `f(y) = L y / (1 + y^2)`; its derivative peaks at `y = 0`.
    BoundedOddRational,
}

/// One of the built-in nonlinearities with its derivative bound `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    pub kind: NonlinearityKind,
    pub lipschitz: f64,
}

impl NonlinearitySpec {
    pub fn new(kind: NonlinearityKind, lipschitz: f64) -> Result<Self> {
        if !(lipschitz.is_finite() && lipschitz >= 0.0) {
            return Err(Error::Argument(format!(
                "Lipschitz bound must be finite and nonnegative, got {lipschitz}"
            )));
        }
        let lipschitz = if kind == NonlinearityKind::Zero {
            0.0
        } else {
            lipschitz
        };
        Ok(Self { kind, lipschitz })
    }

    pub fn zero() -> Self {
        Self {
            kind: NonlinearityKind::Zero,
            lipschitz: 0.0,
        }
    }

    pub fn scaled_tanh(lipschitz: f64) -> Result<Self> {
        Self::new(NonlinearityKind::ScaledTanh, lipschitz)
    }

    pub fn bounded_odd_rational(lipschitz: f64) -> Result<Self> {
        Self::new(NonlinearityKind::BoundedOddRational, lipschitz)
    }

    /// True when `f` vanishes identically, i.e. the state equation is linear.
    pub fn is_zero(&self) -> bool {
        self.kind == NonlinearityKind::Zero || self.lipschitz == 0.0
    }
}

impl Nonlinearity for NonlinearitySpec {
    #[inline]
    fn value(&self, y: f64) -> f64 {
        match self.kind {
            NonlinearityKind::Zero => 0.0,
            NonlinearityKind::ScaledTanh => self.lipschitz * y.tanh(),
            NonlinearityKind::BoundedOddRational => self.lipschitz * y / (1.0 + y * y),
        }
    }

    #[inline]
    fn derivative(&self, y: f64) -> f64 {
        match self.kind {
            NonlinearityKind::Zero => 0.0,
            NonlinearityKind::ScaledTanh => {
                let t = y.tanh();
                self.lipschitz * (1.0 - t * t)
            }
            NonlinearityKind::BoundedOddRational => {
                let y2 = y * y;
                let d = 1.0 + y2;
                self.lipschitz * (1.0 - y2) / (d * d)
            }
        }
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

/// Outcome of sampling the smoothness and sign hypotheses on `f`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct H1Report {
    pub samples: usize,
    pub lipschitz: f64,
    pub max_abs_derivative: f64,
    pub min_sign_product: f64,
    pub value_at_zero: f64,
    /// Whether the samples cover `[-10, 10]`.
    pub spans_reference_interval: bool,
}

impl H1Report {
    pub fn derivative_ok(&self) -> bool {
        self.max_abs_derivative <= self.lipschitz * (1.0 + 1e-12)
    }

    pub fn sign_ok(&self) -> bool {
        self.min_sign_product >= 0.0
    }

    pub fn passes(&self) -> bool {
        self.derivative_ok() && self.sign_ok() && self.value_at_zero == 0.0
    }
}

/// Checks `|f'(y)| <= L`, `f(y) y >= 0` and `f(0) = 0` on the given samples.
pub fn validate_h1<F: Nonlinearity + ?Sized>(f: &F, samples: &[f64]) -> Result<H1Report> {
    if samples.is_empty() {
        return Err(Error::Argument(
            "validate_h1 needs at least one sample".into(),
        ));
    }
    let mut max_abs_derivative = 0.0_f64;
    let mut min_sign_product = f64::INFINITY;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &y in samples {
        max_abs_derivative = max_abs_derivative.max(f.derivative(y).abs());
        min_sign_product = min_sign_product.min(f.value(y) * y);
        lo = lo.min(y);
        hi = hi.max(y);
    }
    Ok(H1Report {
        samples: samples.len(),
        lipschitz: f.lipschitz(),
        max_abs_derivative,
        min_sign_product,
        value_at_zero: f.value(0.0),
        spans_reference_interval: lo <= -10.0 && hi >= 10.0,
    })
}

/// `count` equally spaced points covering `[lo, hi]`.
pub fn uniform_samples(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => {
            let step = (hi - lo) / (count as f64 - 1.0);
            (0..count).map(|i| lo + step * i as f64).collect()
        }
    }
}

/// Closed target ball `B(0, r)` in L²(Ω).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetBall {
    r: f64,
}

impl TargetBall {
    pub fn new(r: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::Argument(format!(
                "target radius must be positive, got {r}"
            )));
        }
        Ok(Self { r })
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    pub fn contains_norm(&self, norm: f64) -> bool {
        norm <= self.r
    }
}

/// Checks that `y0` lies strictly outside the closed target ball and returns
/// its norm.
pub fn validate_h2(y0: &[f64], ball: &TargetBall, g: &SpatialGrid) -> Result<f64> {
    let norm = l2_norm(y0, g)?;
    if norm > ball.r {
        Ok(norm)
    } else {
        Err(Error::InsideTarget {
            norm,
            radius: ball.r,
        })
    }
}

/// Piecewise-constant-in-time control: step `k` acts on `[k dt, (k+1) dt)`.
///
/// Every stored profile vanishes outside the control region.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal {
    dt: f64,
    nt: usize,
    n: usize,
    data: Vec<f64>,
}

impl ControlSignal {
    pub fn zeros(g: &SpatialGrid, dt: f64, nt: usize) -> Self {
        Self {
            dt,
            nt,
            n: g.n,
            data: vec![0.0; g.n * nt],
        }
    }

    /// Builds a control from per-step profiles, zeroing entries off the
    /// control region.
    pub fn from_steps(g: &SpatialGrid, dt: f64, steps: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(steps.len() * g.n);
        for s in steps {
            check_len(s, g.n)?;
            data.extend(s.iter().zip(&g.omega_mask).map(|(v, m)| v * m));
        }
        Ok(Self {
            dt,
            nt: steps.len(),
            n: g.n,
            data,
        })
    }

    /// Samples `value(k, x)` at every step and node, masked to the control
    /// region.
    pub fn from_fn(
        g: &SpatialGrid,
        dt: f64,
        nt: usize,
        mut value: impl FnMut(usize, f64) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(nt * g.n);
        for k in 0..nt {
            for i in 0..g.n {
                data.push(value(k, g.node(i)) * g.omega_mask[i]);
            }
        }
        Self {
            dt,
            nt,
            n: g.n,
            data,
        }
    }

    /// Caller guarantees the support invariant.
    pub(crate) fn from_raw(dt: f64, nt: usize, n: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), nt * n);
        Self { dt, nt, n, data }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.nt as f64
    }

    pub fn step(&self, k: usize) -> &[f64] {
        &self.data[k * self.n..(k + 1) * self.n]
    }

    pub fn steps(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.n.max(1))
    }

    pub(crate) fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub(crate) fn steps_mut(&mut self) -> std::slice::ChunksExactMut<'_, f64> {
        self.data.chunks_exact_mut(self.n.max(1))
    }

    /// `‖u(t_k)‖_{L²(Ω)}` for every step.
    pub fn pointwise_norms(&self, g: &SpatialGrid) -> Vec<f64> {
        self.steps().map(|s| g.norm_unchecked(s)).collect()
    }

    /// Largest pointwise norm; zero for an empty signal.
    pub fn sup_norm(&self, g: &SpatialGrid) -> f64 {
        self.steps()
            .map(|s| g.norm_unchecked(s))
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            data: self.data.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    /// Same profiles reinterpreted on a different step size.
    pub fn with_dt(&self, dt: f64) -> Self {
        Self { dt, ..self.clone() }
    }

    /// Appends `extra` steps of zero control.
    pub fn extended_by_zero(&self, extra: usize) -> Self {
        let mut data = self.data.clone();
        data.resize((self.nt + extra) * self.n, 0.0);
        Self {
            dt: self.dt,
            nt: self.nt + extra,
            n: self.n,
            data,
        }
    }

    pub fn is_supported_in(&self, g: &SpatialGrid) -> bool {
        self.steps().all(|s| {
            s.iter()
                .zip(&g.omega_mask)
                .all(|(v, m)| *m != 0.0 || *v == 0.0)
        })
    }
}

/// States `y(t_k)`, `k = 0..=nt`, with their cached L² norms.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    dt: f64,
    nt: usize,
    n: usize,
    data: Vec<f64>,
    norms: Vec<f64>,
}

impl StateTrajectory {
    pub(crate) fn from_raw(g: &SpatialGrid, dt: f64, nt: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), (nt + 1) * g.n);
        let norms = data
            .chunks_exact(g.n)
            .map(|s| g.norm_unchecked(s))
            .collect();
        Self {
            dt,
            nt,
            n: g.n,
            data,
            norms,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.nt as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.dt * k as f64
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.data[k * self.n..(k + 1) * self.n]
    }

    pub fn initial(&self) -> &[f64] {
        self.state(0)
    }

    pub fn terminal(&self) -> &[f64] {
        self.state(self.nt)
    }

    pub fn terminal_norm(&self) -> f64 {
        self.norms[self.nt]
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn states(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.n)
    }
}

//! Extremal equations `u_t + P±(D²u) ± μ|Du|^m - f = 0` and their admissibility conditions.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::pucci::{Branch, PucciPair};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("unsupported dimension {0}")]
    Dimension(usize),
    #[error("gradient growth power m must satisfy m >= 1, got {0}")]
    GrowthPower(f64),
    #[error("gradient has dimension {got}, equation has dimension {expected}")]
    GradientDimension { expected: usize, got: usize },
    #[error("{0}")]
    Inadmissible(String),
}

/// A real-valued function of `(x, t)`, shared between threads.
#[derive(Clone)]
pub struct Field {
    label: String,
    f: Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>,
}

impl Field {
    pub fn new(label: impl Into<String>, f: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        Field { label: label.into(), f: Arc::new(f) }
    }

    pub fn zero() -> Self {
        Field::constant(0.0)
    }

    pub fn constant(c: f64) -> Self {
        Field::new(format!("const({c})"), move |_, _| c)
    }

    #[inline]
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        (self.f)(x, t)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `c · self`.
    pub fn scaled(&self, c: f64) -> Field {
        let inner = self.clone();
        Field::new(format!("{c}*({})", self.label), move |x, t| c * inner.eval(x, t))
    }
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Field({})", self.label)
    }
}

/// Shape of the gradient coefficient μ.
#[derive(Clone, Debug)]
pub enum MuShape {
    Constant(f64),
    /// `scale · d((x,t),(x₀,t₀))^{-exponent}` with the parabolic distance
    /// `d = sqrt(|x-x₀|² + |t-t₀|)`; lies in `L^q` iff `exponent·q < n+2`.
    PowerSingularity { center: Vec<f64>, center_time: f64, exponent: f64, scale: f64 },
    Sampled(Field),
}

/// The gradient coefficient μ: a sampling rule plus an optional pointwise cap.
#[derive(Clone, Debug)]
pub struct Coefficient {
    shape: MuShape,
    cap: Option<f64>,
}

impl Coefficient {
    pub fn zero() -> Self {
        Coefficient::constant(0.0)
    }

    pub fn constant(c: f64) -> Self {
        Coefficient { shape: MuShape::Constant(c), cap: None }
    }

    pub fn power_singularity(center: Vec<f64>, center_time: f64, exponent: f64, scale: f64) -> Self {
        Coefficient { shape: MuShape::PowerSingularity { center, center_time, exponent, scale }, cap: None }
    }

    pub fn from_field(field: Field) -> Self {
        Coefficient { shape: MuShape::Sampled(field), cap: None }
    }

    pub fn with_cap(mut self, cap: f64) -> Self {
        self.cap = Some(cap);
        self
    }

    pub fn cap(&self) -> Option<f64> {
        self.cap
    }

    pub fn shape(&self) -> &MuShape {
        &self.shape
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.shape, MuShape::Constant(c) if c == 0.0) || self.cap == Some(0.0)
    }

    pub fn describe(&self) -> String {
        let base = match &self.shape {
            MuShape::Constant(c) => format!("constant({c})"),
            MuShape::PowerSingularity { center, center_time, exponent, scale } => {
                format!("power_singularity(center={center:?}, t0={center_time}, a={exponent}, scale={scale})")
            }
            MuShape::Sampled(f) => format!("field({})", f.label()),
        };
        match self.cap {
            Some(c) => format!("{base} capped at {c}"),
            None => base,
        }
    }

    /// `c · μ` (the cap is scaled too).
    pub fn scaled(&self, c: f64) -> Coefficient {
        let shape = match &self.shape {
            MuShape::Constant(v) => MuShape::Constant(c * v),
            MuShape::PowerSingularity { center, center_time, exponent, scale } => MuShape::PowerSingularity {
                center: center.clone(),
                center_time: *center_time,
                exponent: *exponent,
                scale: c * scale,
            },
            MuShape::Sampled(f) => MuShape::Sampled(f.scaled(c)),
        };
        Coefficient { shape, cap: self.cap.map(|v| c * v) }
    }

    /// Pointwise value; infinite exactly at a singular point unless capped.
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        let v = match &self.shape {
            MuShape::Constant(c) => *c,
            MuShape::PowerSingularity { center, center_time, exponent, scale } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                let d2 = r2 + (t - center_time).abs();
                if d2 == 0.0 {
                    f64::INFINITY
                } else {
                    scale * d2.powf(-0.5 * exponent)
                }
            }
            MuShape::Sampled(f) => f.eval(x, t),
        };
        self.apply_cap(v)
    }

    /// Value used at a grid node with spacing `(h, dt)`. For a power
    /// singularity the node whose cell contains the singular point gets the
    /// cell average instead of the point value.
    pub fn sample(&self, x: &[f64], t: f64, h: f64, dt: f64) -> f64 {
        if let MuShape::PowerSingularity { center, center_time, exponent, scale } = &self.shape {
            let near = x.iter().zip(center).all(|(a, b)| (a - b).abs() <= 0.5 * h)
                && (t - center_time).abs() <= 0.5 * dt;
            if near {
                let offset: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
                let avg = scale * power_cell_average(&offset, t - center_time, h, dt, *exponent);
                return self.apply_cap(avg);
            }
        }
        self.eval(x, t)
    }

    fn apply_cap(&self, v: f64) -> f64 {
        match self.cap {
            Some(c) => v.min(c),
            None => v,
        }
    }
}

/// Average of `(|y|² + |s|)^{-a/2}` over the cell `offset + [-h/2,h/2]^n × [s₀-dt/2, s₀+dt/2]`.
///
/// The time integral is done in closed form; the remaining (bounded for
/// `a < 2`) spatial integrand uses a 64-point-per-axis midpoint rule.
pub fn power_cell_average(offset: &[f64], s0: f64, h: f64, dt: f64, a: f64) -> f64 {
    const SUB: usize = 64;
    let n = offset.len();
    let e = 1.0 - 0.5 * a;
    // Antiderivative of (r² + |s|)^{-a/2} in s, odd around s = 0.
    let anti = |r2: f64, s: f64| -> f64 {
        let g = |v: f64| if e.abs() < 1e-12 { v.ln() } else { v.powf(e) / e };
        s.signum() * (g(r2 + s.abs()) - g(r2))
    };
    let (s_lo, s_hi) = (s0 - 0.5 * dt, s0 + 0.5 * dt);
    let total = SUB.pow(n as u32);
    let mut acc = 0.0;
    let mut idx = vec![0usize; n];
    for _ in 0..total {
        let mut r2 = 0.0;
        for k in 0..n {
            let y = offset[k] - 0.5 * h + (idx[k] as f64 + 0.5) * h / SUB as f64;
            r2 += y * y;
        }
        acc += (anti(r2, s_hi) - anti(r2, s_lo)) / dt;
        for k in 0..n {
            idx[k] += 1;
            if idx[k] < SUB {
                break;
            }
            idx[k] = 0;
        }
    }
    acc / total as f64
}

/// Which case of the superlinear existence conditions holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PqmCase {
    I,
    II,
    III,
    IV,
}

impl PqmCase {
    /// The gradient integrability exponent `r` paired with the case.
    pub fn gradient_exponent(self, p: f64, q: f64, m: f64) -> f64 {
        match self {
            PqmCase::I | PqmCase::II => p * m,
            PqmCase::III => f64::INFINITY,
            PqmCase::IV => m * p * q / (q - p),
        }
    }
}

impl fmt::Display for PqmCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PqmCase::I => "i",
            PqmCase::II => "ii",
            PqmCase::III => "iii",
            PqmCase::IV => "iv",
        };
        f.write_str(s)
    }
}

/// `q > n+2`, `(n+2)/2 < p ≤ q`.
pub fn check_apq1(n: usize, p: f64, q: f64) -> Result<(), SpecError> {
    let d = (n + 2) as f64;
    if !(q > d) {
        return Err(SpecError::Inadmissible(format!("q > n+2 violated (q={q}, n+2={d})")));
    }
    if !(p > 0.5 * d) {
        return Err(SpecError::Inadmissible(format!("p > (n+2)/2 violated (p={p}, (n+2)/2={})", 0.5 * d)));
    }
    if !(p <= q) {
        return Err(SpecError::Inadmissible(format!("p <= q violated (p={p}, q={q})")));
    }
    Ok(())
}

/// The four-case condition for superlinear gradient growth `m > 1`.
pub fn check_pqm(n: usize, p: f64, q: f64, m: f64) -> Result<PqmCase, SpecError> {
    let d = (n + 2) as f64;
    let fail = |msg: String| Err(SpecError::Inadmissible(msg));
    if !(p > d - 1.0) {
        return fail(format!("pqm: n+1 < p violated (p={p}, n+1={})", d - 1.0));
    }
    if q.is_infinite() {
        if p >= d {
            return Ok(PqmCase::II);
        }
        if m * (d - p) < d {
            return Ok(PqmCase::I);
        }
        return fail(format!("pqm case i: m(n+2-p) < n+2 violated (m={m}, p={p}, n={n})"));
    }
    if p == q {
        if p > d {
            return Ok(PqmCase::III);
        }
        return fail(format!("pqm case iii: n+2 < p = q violated (p=q={p}, n+2={d})"));
    }
    if p > q {
        return fail(format!("pqm: p <= q violated (p={p}, q={q})"));
    }
    if !(q > d) {
        return fail(format!("pqm case iv: q > n+2 violated (q={q}, n+2={d})"));
    }
    if m * q * (d - p) < d * (q - p) {
        return Ok(PqmCase::IV);
    }
    fail(format!("pqm case iv: mq(n+2-p) < (n+2)(q-p) violated (m={m}, p={p}, q={q}, n={n})"))
}

/// `p > (m-1)q(n+2) / (mq - n - 2)`, the exponent condition of the superlinear ABP bound.
pub fn check_apqm1(n: usize, p: f64, q: f64, m: f64) -> Result<(), SpecError> {
    let d = (n + 2) as f64;
    let threshold = if q.is_infinite() { (m - 1.0) * d / m } else { (m - 1.0) * q * d / (m * q - d) };
    if m * q <= d && q.is_finite() {
        return Err(SpecError::Inadmissible(format!("mq > n+2 required (m={m}, q={q})")));
    }
    if p > threshold {
        Ok(())
    } else {
        Err(SpecError::Inadmissible(format!(
            "p > (m-1)q(n+2)/(mq-n-2) violated (p={p}, threshold={threshold})"
        )))
    }
}

/// `u_t + P±(D²u) ± μ|Du|^m - f = 0` on an `n`-dimensional spatial domain.
///
/// The plus branch is `u_t + P⁺(D²u) + μ|Du|^m - f = 0`, the minus branch
/// `u_t + P⁻(D²u) - μ|Du|^m - f = 0`.
#[derive(Clone, Debug)]
pub struct EquationSpec {
    pub dim: usize,
    pub branch: Branch,
    pub pucci: PucciPair,
    pub mu: Coefficient,
    pub q: f64,
    pub m: f64,
    pub f: Field,
    pub p: f64,
}

impl EquationSpec {
    /// `μ ≡ 0`, `f ≡ 0`, `m = 1`, `q = ∞`, `p = 2(n+2)`.
    pub fn new(dim: usize, branch: Branch, pucci: PucciPair) -> Self {
        EquationSpec {
            dim,
            branch,
            pucci,
            mu: Coefficient::zero(),
            q: f64::INFINITY,
            m: 1.0,
            f: Field::zero(),
            p: 2.0 * (dim + 2) as f64,
        }
    }

    pub fn with_mu(mut self, mu: Coefficient, q: f64) -> Self {
        self.mu = mu;
        self.q = q;
        self
    }

    pub fn with_source(mut self, f: Field, p: f64) -> Self {
        self.f = f;
        self.p = p;
        self
    }

    pub fn with_growth(mut self, m: f64) -> Self {
        self.m = m;
        self
    }

    pub fn with_branch(mut self, branch: Branch) -> Self {
        self.branch = branch;
        self
    }

    /// Checks dimension, `m ≥ 1`, the `m = 1` exponent window and the
    /// superlinear case analysis.
    pub fn validate(&self) -> Result<(), SpecError> {
        if !(1..=3).contains(&self.dim) {
            return Err(SpecError::Dimension(self.dim));
        }
        if !(self.m >= 1.0) {
            return Err(SpecError::GrowthPower(self.m));
        }
        check_apq1(self.dim, self.p, self.q)?;
        if self.m > 1.0 {
            check_pqm(self.dim, self.p, self.q, self.m)?;
        }
        Ok(())
    }

    /// A short, stable textual digest for reports.
    pub fn digest(&self) -> String {
        format!(
            "n={} branch={} lambda={} Lambda={} mu={} q={} m={} f={} p={}",
            self.dim,
            self.branch,
            self.pucci.lambda(),
            self.pucci.big_lambda(),
            self.mu.describe(),
            self.q,
            self.m,
            self.f.label(),
            self.p
        )
    }
}

/// `±μ(x,t)|grad|^m`, signed by the branch.
pub fn gradient_term(spec: &EquationSpec, grad: &[f64], x: &[f64], t: f64) -> Result<f64, SpecError> {
    if !(spec.m >= 1.0) {
        return Err(SpecError::GrowthPower(spec.m));
    }
    if grad.len() != spec.dim {
        return Err(SpecError::GradientDimension { expected: spec.dim, got: grad.len() });
    }
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(0.0);
    }
    Ok(spec.branch.sign() * spec.mu.eval(x, t) * pow_m(norm, spec.m))
}

#[inline]
pub(crate) fn pow_m(v: f64, m: f64) -> f64 {
    if m == 1.0 {
        v
    } else if m == 2.0 {
        v * v
    } else {
        v.powf(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(dim: usize, branch: Branch) -> EquationSpec {
        EquationSpec::new(dim, branch, PucciPair::new(1.0, 2.0).unwrap())
    }

    #[test]
    fn gradient_term_examples() {
        let s = spec(2, Branch::Plus);
        assert_eq!(gradient_term(&s, &[3.0, 4.0], &[0.0, 0.0], 0.0).unwrap(), 0.0);

        let s = spec(2, Branch::Plus).with_mu(Coefficient::constant(2.0), 8.0);
        assert_eq!(gradient_term(&s, &[3.0, 4.0], &[0.0, 0.0], 0.0).unwrap(), 10.0);
        let s = s.with_branch(Branch::Minus);
        assert_eq!(gradient_term(&s, &[3.0, 4.0], &[0.0, 0.0], 0.0).unwrap(), -10.0);

        let s = spec(2, Branch::Plus).with_mu(Coefficient::constant(1.0), 8.0).with_growth(2.0);
        assert_eq!(gradient_term(&s, &[3.0, 4.0], &[0.0, 0.0], 0.0).unwrap(), 25.0);
        let s = s.with_branch(Branch::Minus);
        assert_eq!(gradient_term(&s, &[3.0, 4.0], &[0.0, 0.0], 0.0).unwrap(), -25.0);
    }

    #[test]
    fn gradient_term_rejects_sublinear_growth() {
        let s = spec(1, Branch::Plus).with_growth(0.5);
        assert_eq!(gradient_term(&s, &[1.0], &[0.0], 0.0), Err(SpecError::GrowthPower(0.5)));
        assert!(s.validate().is_err());
    }

    #[test]
    fn apq1_window() {
        assert!(check_apq1(1, 4.0, 4.0).is_ok());
        assert!(check_apq1(1, 4.0, 3.0).is_err());
        assert!(check_apq1(1, 1.5, 8.0).is_err());
        assert!(check_apq1(1, 5.0, 4.0).is_err());
    }

    #[test]
    fn pqm_cases() {
        assert_eq!(check_pqm(1, 5.0, 5.0, 2.0).unwrap(), PqmCase::III);
        assert_eq!(check_pqm(1, 3.0, f64::INFINITY, 5.0).unwrap(), PqmCase::II);
        assert_eq!(check_pqm(1, 2.5, f64::INFINITY, 1.5).unwrap(), PqmCase::I);
        assert!(check_pqm(1, 2.5, f64::INFINITY, 6.0).is_err());
        // n=1, p=2.5, q=4: mq(n+2-p) = 2m, (n+2)(q-p) = 4.5.
        assert_eq!(check_pqm(1, 2.5, 4.0, 2.0).unwrap(), PqmCase::IV);
        let err = check_pqm(1, 2.5, 4.0, 3.0).unwrap_err().to_string();
        assert!(err.contains("pqm case iv: mq(n+2-p) < (n+2)(q-p) violated"), "{err}");
        assert!(check_pqm(1, 2.0, 4.0, 2.0).is_err());
    }

    #[test]
    fn pqm_gradient_exponents() {
        assert_eq!(PqmCase::II.gradient_exponent(4.0, f64::INFINITY, 2.0), 8.0);
        assert!(PqmCase::III.gradient_exponent(5.0, 5.0, 2.0).is_infinite());
        assert_eq!(PqmCase::IV.gradient_exponent(2.5, 5.0, 2.0), 10.0);
    }

    #[test]
    fn apqm1_matches_pqm_iv_rearrangement() {
        // p > (m-1)q(n+2)/(mq-n-2)  <=>  mq(n+2-p) < (n+2)(q-p) for mq > n+2.
        for &(p, q, m) in &[(2.5, 4.0, 2.0), (2.5, 4.0, 3.0), (3.5, 6.0, 1.5), (2.2, 10.0, 1.2)] {
            let lhs = check_apqm1(1, p, q, m).is_ok();
            let rhs = m * q * (3.0 - p) < 3.0 * (q - p);
            assert_eq!(lhs, rhs, "p={p} q={q} m={m}");
        }
    }

    #[test]
    fn power_singularity_is_capped_and_cell_averaged() {
        let mu = Coefficient::power_singularity(vec![0.0], 0.5, 0.5, 1.0);
        assert!(mu.eval(&[0.0], 0.5).is_infinite());
        assert_eq!(mu.clone().with_cap(7.0).eval(&[0.0], 0.5), 7.0);
        let h = 0.1;
        let dt = 0.01;
        let avg = mu.sample(&[0.0], 0.5, h, dt);
        // Midpoint oracle in both variables on a 2000×2000 cell grid.
        let k = 2000;
        let mut acc = 0.0;
        for i in 0..k {
            let y = -0.5 * h + (i as f64 + 0.5) * h / k as f64;
            for j in 0..k {
                let s = -0.5 * dt + (j as f64 + 0.5) * dt / k as f64;
                acc += (y * y + s.abs()).powf(-0.25);
            }
        }
        let oracle = acc / (k * k) as f64;
        assert!((avg - oracle).abs() < 1e-2 * oracle, "{avg} vs {oracle}");
        // Away from the singular cell the point value is used.
        assert_eq!(mu.sample(&[0.3], 0.5, h, dt), mu.eval(&[0.3], 0.5));
    }

    #[test]
    fn cell_average_of_flat_profile() {
        // a = 0 gives the constant 1.
        let v = power_cell_average(&[0.01, -0.02], 0.003, 0.1, 0.01, 0.0);
        assert!((v - 1.0).abs() < 1e-12);
    }
}

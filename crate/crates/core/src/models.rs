//! Ground-truth energy densities used to synthesize measurements.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::density::{minors, minors_len, PolyaffinePiece, SquareMatrix, StretchDomain};
use crate::error::{invalid, Error, Result};
use crate::profile::ConvexProfile;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type MinorsFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type MinorsGradientFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Smallest stretch at which the Neo-Hookean family is evaluated.
pub const NEO_HOOKEAN_FLOOR: f64 = 1e-6;
/// Slack on `ξ₁ξ₂ξ₃ = 1`.
pub const INCOMPRESSIBILITY_TOLERANCE: f64 = 1e-9;

const CONVEXITY_PROBES: usize = 100;
const CONVEXITY_SLACK: f64 = 1e-10;

/// A user-supplied one-dimensional density.
#[derive(Clone)]
pub struct CustomDensity {
    pub name: String,
    pub value: ScalarFn,
    pub derivative: Option<ScalarFn>,
    /// Lipschitz bound asserted by the caller, valid on the whole validity
    /// interval.
    pub lipschitz: f64,
    /// Optional bound on `max(sup|w|, sup|w'|, sup|w''|)`.
    pub c2_norm: Option<f64>,
    pub convex: bool,
    pub validity: (f64, f64),
}

impl CustomDensity {
    pub fn new(
        name: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lipschitz: f64,
        convex: bool,
    ) -> Self {
        CustomDensity {
            name: name.into(),
            value: Arc::new(value),
            derivative: None,
            lipschitz,
            c2_norm: None,
            convex,
            validity: (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn with_derivative(mut self, d: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.derivative = Some(Arc::new(d));
        self
    }

    pub fn with_validity(mut self, lo: f64, hi: f64) -> Self {
        self.validity = (lo, hi);
        self
    }

    pub fn with_c2_norm(mut self, bound: f64) -> Self {
        self.c2_norm = Some(bound);
        self
    }
}

/// The incompressible Neo-Hookean density in principal stretches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrincipalStretchModel {
    mu: f64,
}

impl PrincipalStretchModel {
    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn evaluate(&self, stretches: [f64; 3]) -> Result<f64> {
        let product = stretches[0] * stretches[1] * stretches[2];
        if !((product - 1.0).abs() <= INCOMPRESSIBILITY_TOLERANCE) {
            return Err(Error::Incompressibility { product });
        }
        let sq: f64 = stretches.iter().map(|s| s * s).sum();
        Ok(0.5 * self.mu * (sq - 3.0))
    }

    /// Partial derivatives with respect to each principal stretch.
    pub fn gradient(&self, stretches: [f64; 3]) -> [f64; 3] {
        stretches.map(|s| self.mu * s)
    }
}

pub fn neo_hookean_principal(mu: f64) -> Result<PrincipalStretchModel> {
    positive("shear modulus", mu)?;
    Ok(PrincipalStretchModel { mu })
}

#[derive(Clone)]
enum ModelKind {
    Quadratic { modulus: f64 },
    NeoHookean { mu: f64 },
    Uniaxial(PrincipalStretchModel),
    Custom(CustomDensity),
}

/// A one-dimensional ground-truth energy density w(ξ).
#[derive(Clone)]
pub struct DensityModel {
    kind: ModelKind,
}

impl fmt::Debug for DensityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityModel")
            .field("name", &self.name())
            .field("validity", &self.validity())
            .finish()
    }
}

fn positive(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{what} must be positive and finite, got {v}")))
    }
}

/// `w(ξ) = (ℂ/2)(ξ − 1)²`, the linear-elastic bar.
pub fn quadratic_density(modulus: f64) -> Result<DensityModel> {
    positive("elastic modulus", modulus)?;
    Ok(DensityModel {
        kind: ModelKind::Quadratic { modulus },
    })
}

/// `w(ξ) = (μ/2)(2/ξ + ξ² − 3)`, the uniaxial incompressible Neo-Hookean bar.
pub fn reduced_neo_hookean(mu: f64) -> Result<DensityModel> {
    positive("shear modulus", mu)?;
    Ok(DensityModel {
        kind: ModelKind::NeoHookean { mu },
    })
}

/// `ξ ↦ full(ξ, ξ^{-1/2}, ξ^{-1/2})`.
pub fn uniaxial_reduction(full: &PrincipalStretchModel) -> DensityModel {
    DensityModel {
        kind: ModelKind::Uniaxial(*full),
    }
}

/// Wraps a user density. When the convex flag is set, midpoint convexity is
/// spot-checked on random pairs and a violation is rejected with its witness.
pub fn custom_density(spec: CustomDensity) -> Result<DensityModel> {
    positive("Lipschitz bound", spec.lipschitz)?;
    let (lo, hi) = spec.validity;
    if !(lo < hi) {
        return Err(invalid(format!("empty validity interval ({lo}, {hi})")));
    }
    if spec.convex {
        let (a0, b0) = (lo.max(-10.0), hi.min(10.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0DE);
        for _ in 0..CONVEXITY_PROBES {
            let a = rng.gen_range(a0..=b0);
            let b = rng.gen_range(a0..=b0);
            let m = 0.5 * (a + b);
            let avg = 0.5 * ((spec.value)(a) + (spec.value)(b));
            let mid = (spec.value)(m);
            if mid > avg + CONVEXITY_SLACK * (1.0 + avg.abs()) {
                return Err(Error::ConvexityViolation(format!(
                    "{}: w({m}) = {mid} exceeds (w({a}) + w({b}))/2 = {avg}",
                    spec.name
                )));
            }
        }
    }
    Ok(DensityModel {
        kind: ModelKind::Custom(spec),
    })
}

impl DensityModel {
    pub fn name(&self) -> String {
        match &self.kind {
            ModelKind::Quadratic { modulus } => format!("quadratic(C={modulus})"),
            ModelKind::NeoHookean { mu } => format!("neo_hookean(mu={mu})"),
            ModelKind::Uniaxial(p) => format!("uniaxial(neo_hookean_principal(mu={}))", p.mu),
            ModelKind::Custom(c) => c.name.clone(),
        }
    }

    /// Open or closed interval on which the model may be evaluated.
    pub fn validity(&self) -> (f64, f64) {
        match &self.kind {
            ModelKind::Quadratic { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            ModelKind::NeoHookean { .. } => (NEO_HOOKEAN_FLOOR, f64::INFINITY),
            ModelKind::Uniaxial(_) => (f64::MIN_POSITIVE, f64::INFINITY),
            ModelKind::Custom(c) => c.validity,
        }
    }

    pub fn is_convex(&self) -> bool {
        match &self.kind {
            ModelKind::Custom(c) => c.convex,
            _ => true,
        }
    }

    pub fn covers(&self, domain: &StretchDomain) -> bool {
        let (lo, hi) = self.validity();
        domain.xi_min() >= lo && domain.xi_max() <= hi
    }

    fn in_validity(&self, xi: f64) -> bool {
        let (lo, hi) = self.validity();
        xi >= lo && xi <= hi
    }

    pub fn evaluate(&self, xi: f64) -> Result<f64> {
        if !self.in_validity(xi) {
            let (lo, hi) = self.validity();
            return Err(Error::DomainViolation {
                point: format!("stretch {xi}"),
                domain: format!("{} validity [{lo}, {hi}]", self.name()),
            });
        }
        Ok(self.raw_value(xi))
    }

    fn raw_value(&self, xi: f64) -> f64 {
        match &self.kind {
            ModelKind::Quadratic { modulus } => 0.5 * modulus * (xi - 1.0) * (xi - 1.0),
            ModelKind::NeoHookean { mu } => 0.5 * mu * (2.0 / xi + xi * xi - 3.0),
            ModelKind::Uniaxial(p) => {
                let t = xi.powf(-0.5);
                p.evaluate([xi, t, t]).unwrap_or(f64::NAN)
            }
            ModelKind::Custom(c) => (c.value)(xi),
        }
    }

    /// Value of the model, NaN outside its validity interval.
    pub fn value(&self, xi: f64) -> f64 {
        if self.in_validity(xi) {
            self.raw_value(xi)
        } else {
            f64::NAN
        }
    }

    /// Analytic derivative, when the model has one.
    pub fn derivative(&self, xi: f64) -> Option<f64> {
        if !self.in_validity(xi) {
            return Some(f64::NAN);
        }
        match &self.kind {
            ModelKind::Quadratic { modulus } => Some(modulus * (xi - 1.0)),
            ModelKind::NeoHookean { mu } => Some(0.5 * mu * (2.0 * xi - 2.0 / (xi * xi))),
            ModelKind::Uniaxial(p) => {
                let t = xi.powf(-0.5);
                let g = p.gradient([xi, t, t]);
                Some(g[0] + (g[1] + g[2]) * (-0.5 * xi.powf(-1.5)))
            }
            ModelKind::Custom(c) => c.derivative.as_ref().map(|d| d(xi)),
        }
    }

    /// Derivative, falling back to central differences with step
    /// `1e-6·(1 + |ξ|)` (one-sided at the edge of the validity interval).
    pub fn slope(&self, xi: f64) -> f64 {
        if let Some(d) = self.derivative(xi) {
            return d;
        }
        let h = 1e-6 * (1.0 + xi.abs());
        let (lo, hi) = (xi - h, xi + h);
        match (self.in_validity(lo), self.in_validity(hi)) {
            (true, true) => (self.raw_value(hi) - self.raw_value(lo)) / (2.0 * h),
            (false, true) => (self.raw_value(hi) - self.raw_value(xi)) / h,
            (true, false) => (self.raw_value(xi) - self.raw_value(lo)) / h,
            (false, false) => f64::NAN,
        }
    }

    /// Lipschitz bound on `domain`. For convex models with a derivative this
    /// is `max(|w'(a)|, |w'(b)|)`, exact because w' is monotone.
    pub fn lipschitz_bound_on(&self, domain: &StretchDomain) -> f64 {
        let (a, b) = (domain.xi_min(), domain.xi_max());
        match &self.kind {
            ModelKind::Quadratic { modulus } => modulus * (a - 1.0).abs().max((b - 1.0).abs()),
            ModelKind::Custom(c) => c.lipschitz,
            _ => self
                .derivative(a)
                .unwrap_or(f64::NAN)
                .abs()
                .max(self.derivative(b).unwrap_or(f64::NAN).abs()),
        }
    }

    /// `sup |w''|` on `domain`, when known.
    pub fn second_derivative_bound_on(&self, domain: &StretchDomain) -> Option<f64> {
        let a = domain.xi_min();
        match &self.kind {
            ModelKind::Quadratic { modulus } => Some(*modulus),
            ModelKind::NeoHookean { mu } => Some(0.5 * mu * (2.0 + 4.0 / (a * a * a))),
            ModelKind::Uniaxial(p) => Some(0.5 * p.mu * (2.0 + 4.0 / (a * a * a))),
            ModelKind::Custom(_) => None,
        }
    }

    /// `‖w‖_{C²} = max(sup|w|, sup|w'|, sup|w''|)` on `domain`, when known.
    pub fn c2_norm_on(&self, domain: &StretchDomain) -> Option<f64> {
        if let ModelKind::Custom(c) = &self.kind {
            return c.c2_norm;
        }
        // built-in models are nonnegative with their minimum at ξ = 1
        let sup_w = self
            .value(domain.xi_min())
            .abs()
            .max(self.value(domain.xi_max()).abs());
        let w2 = self.second_derivative_bound_on(domain)?;
        Some(sup_w.max(self.lipschitz_bound_on(domain)).max(w2))
    }
}

impl ConvexProfile for DensityModel {
    fn value(&self, x: f64) -> f64 {
        DensityModel::value(self, x)
    }

    fn slope(&self, x: f64) -> Option<f64> {
        self.derivative(x)
    }
}

/// A polyconvex density `w(ξ) = g(Minors(ξ))` with g convex and ℓ-Lipschitz.
#[derive(Clone)]
pub struct PolyconvexModel {
    name: String,
    n: usize,
    g: MinorsFn,
    gradient: Option<MinorsGradientFn>,
    ell: f64,
}

impl fmt::Debug for PolyconvexModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PolyconvexModel")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("ell", &self.ell)
            .finish()
    }
}

impl PolyconvexModel {
    pub fn new(
        name: impl Into<String>,
        n: usize,
        g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        ell: f64,
    ) -> Result<Self> {
        minors_len(n)?;
        positive("Lipschitz budget", ell)?;
        Ok(PolyconvexModel {
            name: name.into(),
            n,
            g: Arc::new(g),
            gradient: None,
            ell,
        })
    }

    pub fn with_gradient(mut self, grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(grad));
        self
    }

    /// `w(ξ) = |Minors(ξ)|`, polyconvex with ℓ = 1.
    pub fn minors_norm(n: usize) -> Result<Self> {
        Ok(Self::new(
            "minors_norm",
            n,
            |m: &[f64]| m.iter().map(|x| x * x).sum::<f64>().sqrt(),
            1.0,
        )?
        .with_gradient(|m: &[f64]| {
            let r = m.iter().map(|x| x * x).sum::<f64>().sqrt();
            if r == 0.0 {
                vec![0.0; m.len()]
            } else {
                m.iter().map(|x| x / r).collect()
            }
        }))
    }

    /// A single polyaffine piece as a ground-truth density.
    pub fn polyaffine(n: usize, piece: PolyaffinePiece) -> Result<Self> {
        let tau = minors_len(n)?;
        if piece.coeffs.len() != tau {
            return Err(Error::DimensionMismatch {
                expected: format!("{tau} coefficients"),
                found: format!("{} coefficients", piece.coeffs.len()),
            });
        }
        let ell = piece.coeff_norm().max(f64::EPSILON);
        let coeffs = piece.coeffs.clone();
        Ok(Self::new("polyaffine", n, move |m: &[f64]| piece.value_minors(m), ell)?
            .with_gradient(move |_m: &[f64]| coeffs.clone()))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn value_minors(&self, m: &[f64]) -> f64 {
        (self.g)(m)
    }

    pub fn evaluate(&self, xi: &SquareMatrix) -> Result<f64> {
        if xi.dim() != self.n {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0} matrix", self.n),
                found: format!("{0}x{0} matrix", xi.dim()),
            });
        }
        Ok(self.value_minors(minors(xi)?.entries()))
    }

    /// Gradient in minors space: analytic when supplied, otherwise central
    /// differences with step `1e-6·(1 + |m_j|)`.
    pub fn gradient_minors(&self, m: &[f64]) -> Vec<f64> {
        if let Some(g) = &self.gradient {
            return g(m);
        }
        let mut probe = m.to_vec();
        (0..m.len())
            .map(|j| {
                let h = 1e-6 * (1.0 + m[j].abs());
                probe[j] = m[j] + h;
                let up = (self.g)(&probe);
                probe[j] = m[j] - h;
                let down = (self.g)(&probe);
                probe[j] = m[j];
                (up - down) / (2.0 * h)
            })
            .collect()
    }
}

//! Constitutive data: bond potential `f`, hydrostatic potential `g`, influence
//! function `J`, their moments, and calibration from engineering constants.

use crate::error::{Error, Result};
use crate::integrate::integrate;
use crate::scalar::Real;

/// Radial influence function `J(r)` on the unit horizon, zero for `r >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfluenceFunction {
    /// `J(r) = 1 - r`
    OneMinusR,
    /// `J(r) = 1`
    Constant,
    /// `J(r) = r`
    Linear,
}

impl InfluenceFunction {
    #[inline(always)]
    pub fn eval<T: Real>(self, r: T) -> T {
        if r >= T::one() || r < T::zero() {
            return T::zero();
        }
        match self {
            InfluenceFunction::OneMinusR => T::one() - r,
            InfluenceFunction::Constant => T::one(),
            InfluenceFunction::Linear => r,
        }
    }

    /// `sup J`.
    pub fn bound<T: Real>(self) -> T {
        T::one()
    }

    pub fn name(self) -> &'static str {
        match self {
            InfluenceFunction::OneMinusR => "one_minus_r",
            InfluenceFunction::Constant => "const",
            InfluenceFunction::Linear => "linear",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "one_minus_r" => Some(Self::OneMinusR),
            "const" => Some(Self::Constant),
            "linear" => Some(Self::Linear),
            _ => None,
        }
    }
}

/// `J̄_α = (1/ω_d) ∫_{|ξ|<1} J(|ξ|) |ξ|^{-α} dξ = d ∫_0^1 J(r) r^{d-1-α} dr`.
pub fn moment<T: Real>(j: InfluenceFunction, alpha: T, dim: usize) -> Result<T> {
    let d = T::from_usize_lossy(dim);
    if alpha >= d {
        return Err(Error::Divergent(format!(
            "moment of order {alpha} is not integrable in dimension {dim}"
        )));
    }
    let p = d - T::one() - alpha;
    let v = integrate(
        &|r: T| j.eval(r) * r.powf(p),
        T::zero(),
        T::one(),
        T::lit(1e-12),
    )?;
    Ok(d * v)
}

/// `M_J = ∫_0^1 J(r) r^2 dr`.
pub fn shape_moment_mj<T: Real>(j: InfluenceFunction) -> T {
    integrate(
        &|r: T| j.eval(r) * r * r,
        T::zero(),
        T::one(),
        T::lit(1e-14),
    )
    .expect("bounded integrand on [0, 1]")
}

/// Exponential well `c (1 - exp(-β r²))`, with separate `(c, β)` for negative
/// arguments. The two branches share `c β` so the second derivative is continuous
/// at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpWell<T> {
    pub c_pos: T,
    pub beta_pos: T,
    pub c_neg: T,
    pub beta_neg: T,
}

impl<T: Real> ExpWell<T> {
    pub fn symmetric(c: T, beta: T) -> Self {
        Self {
            c_pos: c,
            beta_pos: beta,
            c_neg: c,
            beta_neg: beta,
        }
    }

    /// Softer in compression when `beta_neg < beta_pos`.
    pub fn asymmetric(c_pos: T, beta_pos: T, beta_neg: T) -> Self {
        Self {
            c_pos,
            beta_pos,
            c_neg: c_pos * beta_pos / beta_neg,
            beta_neg,
        }
    }

    #[inline(always)]
    fn branch(&self, r: T) -> (T, T) {
        if r >= T::zero() {
            (self.c_pos, self.beta_pos)
        } else {
            (self.c_neg, self.beta_neg)
        }
    }

    #[inline(always)]
    pub fn value(&self, r: T) -> T {
        let (c, b) = self.branch(r);
        c * (T::one() - (-b * r * r).exp())
    }

    #[inline(always)]
    pub fn d1(&self, r: T) -> T {
        let (c, b) = self.branch(r);
        T::lit(2.0) * c * b * r * (-b * r * r).exp()
    }

    #[inline(always)]
    pub fn d2(&self, r: T) -> T {
        let (c, b) = self.branch(r);
        let br2 = b * r * r;
        T::lit(2.0) * c * b * (-br2).exp() * (T::one() - T::lit(2.0) * br2)
    }

    /// Length scale of the wider branch; everything interesting happens within a
    /// few multiples of it.
    fn scale(&self) -> T {
        T::one() / self.beta_pos.min(self.beta_neg).sqrt()
    }

    /// Inflection points `(r⁺, r⁻)`: roots of the second derivative, bracketed in
    /// `(0, 10/√β]` on each side and found by bisection.
    pub fn inflections(&self) -> (T, T) {
        let pos = bisect_sign_change(
            |r| self.d2(r),
            T::zero(),
            T::lit(10.0) / self.beta_pos.sqrt(),
        );
        let neg = bisect_sign_change(
            |r| self.d2(-r),
            T::zero(),
            T::lit(10.0) / self.beta_neg.sqrt(),
        );
        (pos, -neg)
    }

    /// `sup |f''|` by dense sampling followed by golden-section refinement.
    pub fn sup_abs_d2(&self) -> T {
        sup_abs(|r| self.d2(r), T::lit(10.0) * self.scale())
    }
}

fn bisect_sign_change<T: Real>(f: impl Fn(T) -> T, lo: T, hi: T) -> T {
    // f(lo) > 0 for a convex-near-zero potential; scan for the first sign change
    let n = 1000;
    let step = (hi - lo) / T::from_usize_lossy(n);
    let mut a = lo;
    let mut b = lo + step;
    let mut fa = f(a);
    for _ in 0..n {
        let fb = f(b);
        if fa > T::zero() && fb <= T::zero() {
            break;
        }
        a = b;
        fa = fb;
        b = b + step;
    }
    for _ in 0..200 {
        let m = (a + b) * T::lit(0.5);
        if m <= a || m >= b {
            break;
        }
        if f(m) > T::zero() {
            a = m;
        } else {
            b = m;
        }
    }
    (a + b) * T::lit(0.5)
}

fn sup_abs<T: Real>(f: impl Fn(T) -> T, half_width: T) -> T {
    let n = 4000;
    let step = T::lit(2.0) * half_width / T::from_usize_lossy(n);
    let mut best_x = -half_width;
    let mut best = f(best_x).abs();
    for k in 1..=n {
        let x = -half_width + step * T::from_usize_lossy(k);
        let v = f(x).abs();
        if v > best {
            best = v;
            best_x = x;
        }
    }
    // golden-section refinement of |f| around the best sample
    let g = T::lit(0.618_033_988_749_894_8);
    let (mut a, mut b) = (best_x - step, best_x + step);
    for _ in 0..100 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c).abs() > f(d).abs() {
            b = d;
        } else {
            a = c;
        }
    }
    best.max(f((a + b) * T::lit(0.5)).abs())
}

/// Which inflection point reports damage. The bond potential's analytic
/// inflection is `1/√(2β)`; `OneOverSqrtBeta` uses `1/√β` instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InflectionRule {
    Analytic,
    OneOverSqrtBeta,
}

impl InflectionRule {
    pub fn name(self) -> &'static str {
        match self {
            InflectionRule::Analytic => "analytic",
            InflectionRule::OneOverSqrtBeta => "one_over_sqrt_beta",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "analytic" => Some(Self::Analytic),
            "one_over_sqrt_beta" => Some(Self::OneOverSqrtBeta),
            _ => None,
        }
    }
}

/// Bond potential `f(r) = c (1 - exp(-β r²))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwisePotential<T> {
    pub well: ExpWell<T>,
    /// Inflection points used for critical strains, `r⁺ > 0 > r⁻`.
    pub r_plus: T,
    pub r_minus: T,
    /// `C_2^f = sup |f''|`
    pub c2: T,
}

impl<T: Real> PairwisePotential<T> {
    pub fn new(c: T, beta: T, rule: InflectionRule) -> Result<Self> {
        if !(c > T::zero()) || !(beta > T::zero()) {
            return Err(Error::Material(
                "bond potential needs c > 0 and beta > 0".into(),
            ));
        }
        let well = ExpWell::symmetric(c, beta);
        let (r_plus, r_minus) = match rule {
            InflectionRule::Analytic => well.inflections(),
            InflectionRule::OneOverSqrtBeta => {
                let r = T::one() / beta.sqrt();
                (r, -r)
            }
        };
        Ok(Self {
            well,
            r_plus,
            r_minus,
            c2: well.sup_abs_d2(),
        })
    }

    #[inline(always)]
    pub fn f(&self, r: T) -> T {
        self.well.value(r)
    }

    #[inline(always)]
    pub fn df(&self, r: T) -> T {
        self.well.d1(r)
    }

    #[inline(always)]
    pub fn d2f(&self, r: T) -> T {
        self.well.d2(r)
    }

    /// `f''(0) = 2cβ`.
    pub fn d2f_at_zero(&self) -> T {
        self.well.d2(T::zero())
    }

    /// Critical strains `(S_c⁺, S_c⁻) = (r⁺, r⁻) / √|y - x|`.
    pub fn critical_bond_strain(&self, bond_length: T) -> Result<(T, T)> {
        if !(bond_length > T::zero()) {
            return Err(Error::Material("bond length must be positive".into()));
        }
        let s = bond_length.sqrt();
        Ok((self.r_plus / s, self.r_minus / s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HydrostaticKind {
    Quadratic,
    ConvexConcave,
}

impl HydrostaticKind {
    pub fn name(self) -> &'static str {
        match self {
            HydrostaticKind::Quadratic => "quadratic",
            HydrostaticKind::ConvexConcave => "convex_concave",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "quadratic" => Some(Self::Quadratic),
            "convex_concave" => Some(Self::ConvexConcave),
            _ => None,
        }
    }
}

/// Hydrostatic potential `g(θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HydrostaticPotential<T> {
    /// `g(r) = C̄ r² / 2`
    Quadratic { c_bar: T },
    /// Exponential well, softer in compression. Critical hydrostatic strains are
    /// the inflection points.
    ConvexConcave {
        well: ExpWell<T>,
        theta_plus: T,
        theta_minus: T,
        c2: T,
    },
}

impl<T: Real> HydrostaticPotential<T> {
    pub fn quadratic(c_bar: T) -> Self {
        HydrostaticPotential::Quadratic { c_bar }
    }

    /// `g(r) = c (1 - exp(-β± r²))` with `β⁻ < β⁺`, so `θ_c⁺ < |θ_c⁻|`.
    pub fn convex_concave(c: T, beta_plus: T, beta_minus: T) -> Result<Self> {
        if !(c > T::zero()) || !(beta_plus > T::zero()) || !(beta_minus > T::zero()) {
            return Err(Error::Material(
                "hydrostatic well needs positive c and betas".into(),
            ));
        }
        if beta_minus >= beta_plus {
            return Err(Error::Material(
                "compressive critical hydrostatic strain must exceed the tensile one (beta_minus < beta_plus)".into(),
            ));
        }
        let well = ExpWell::asymmetric(c, beta_plus, beta_minus);
        let (theta_plus, theta_minus) = well.inflections();
        Ok(HydrostaticPotential::ConvexConcave {
            well,
            theta_plus,
            theta_minus,
            c2: well.sup_abs_d2(),
        })
    }

    pub fn kind(&self) -> HydrostaticKind {
        match self {
            HydrostaticPotential::Quadratic { .. } => HydrostaticKind::Quadratic,
            HydrostaticPotential::ConvexConcave { .. } => HydrostaticKind::ConvexConcave,
        }
    }

    #[inline(always)]
    pub fn g(&self, r: T) -> T {
        match self {
            HydrostaticPotential::Quadratic { c_bar } => *c_bar * r * r * T::lit(0.5),
            HydrostaticPotential::ConvexConcave { well, .. } => well.value(r),
        }
    }

    #[inline(always)]
    pub fn dg(&self, r: T) -> T {
        match self {
            HydrostaticPotential::Quadratic { c_bar } => *c_bar * r,
            HydrostaticPotential::ConvexConcave { well, .. } => well.d1(r),
        }
    }

    #[inline(always)]
    pub fn d2g(&self, r: T) -> T {
        match self {
            HydrostaticPotential::Quadratic { c_bar } => *c_bar,
            HydrostaticPotential::ConvexConcave { well, .. } => well.d2(r),
        }
    }

    pub fn d2g_at_zero(&self) -> T {
        self.d2g(T::zero())
    }

    /// Bound on `|g''|` entering the Lipschitz constant. For the quadratic branch
    /// this is `|g''(0)| = |C̄|`; the calibrated `C̄` can be negative.
    pub fn c2(&self) -> T {
        match self {
            HydrostaticPotential::Quadratic { c_bar } => c_bar.abs(),
            HydrostaticPotential::ConvexConcave { c2, .. } => *c2,
        }
    }
}

/// Everything the nonlocal kernel needs to know about the material.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialModel<T> {
    pub density: T,
    pub horizon: T,
    pub influence: InfluenceFunction,
    pub pairwise: PairwisePotential<T>,
    pub hydrostatic: HydrostaticPotential<T>,
    pub dim: usize,
}

impl<T: Real> MaterialModel<T> {
    pub fn new(
        density: T,
        horizon: T,
        influence: InfluenceFunction,
        pairwise: PairwisePotential<T>,
        hydrostatic: HydrostaticPotential<T>,
    ) -> Result<Self> {
        if !(density > T::zero()) {
            return Err(Error::Material("density must be positive".into()));
        }
        if !(horizon > T::zero()) {
            return Err(Error::Material("horizon must be positive".into()));
        }
        Ok(Self {
            density,
            horizon,
            influence,
            pairwise,
            hydrostatic,
            dim: 2,
        })
    }

    /// Volume of the unit ball, `ω_d`.
    pub fn unit_ball_volume(&self) -> T {
        match self.dim {
            2 => T::PI(),
            3 => T::lit(4.0) / T::lit(3.0) * T::PI(),
            _ => unreachable!("only 2-d and 3-d are meaningful"),
        }
    }

    /// Returns `L / ε²` with `L = 4 (C_2^f J̄_1 + C_2^g J̄_0²)`.
    pub fn lipschitz_constant(&self) -> Result<T> {
        let j1 = moment(self.influence, T::one(), self.dim)?;
        let j0 = moment(self.influence, T::zero(), self.dim)?;
        let l = T::lit(4.0) * (self.pairwise.c2 * j1 + self.hydrostatic.c2() * j0 * j0);
        Ok(l / (self.horizon * self.horizon))
    }
}

/// Peridynamic parameters from bulk modulus, Poisson ratio and fracture
/// toughness (2-d relations).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration<T> {
    pub lambda: T,
    pub mu: T,
    pub m_j: T,
    pub c: T,
    pub beta: T,
    pub c_bar: T,
}

pub fn lame_from_bulk<T: Real>(bulk: T, nu: T) -> (T, T) {
    let three = T::lit(3.0);
    let lambda = three * bulk * nu / (T::one() + nu);
    let mu = three * bulk * (T::one() - T::lit(2.0) * nu) / (T::lit(2.0) * (T::one() + nu));
    (lambda, mu)
}

/// `c = π G_c / (4 M_J)`, `β = 4 μ / (c M_J)`, `C̄ = 2 (λ - μ) / M_J²`.
pub fn calibrate<T: Real>(bulk: T, nu: T, g_c: T, j: InfluenceFunction) -> Result<Calibration<T>> {
    if !(bulk > T::zero()) {
        return Err(Error::Material("bulk modulus must be positive".into()));
    }
    if !(nu > -T::one() && nu < T::lit(0.5)) {
        return Err(Error::Material(
            "Poisson ratio must lie in (-1, 0.5)".into(),
        ));
    }
    if !(g_c > T::zero()) {
        return Err(Error::Material(
            "fracture toughness must be positive".into(),
        ));
    }
    let (lambda, mu) = lame_from_bulk(bulk, nu);
    let m_j = shape_moment_mj::<T>(j);
    let c = T::PI() * g_c / (T::lit(4.0) * m_j);
    let beta = T::lit(4.0) * mu / (c * m_j);
    let c_bar = T::lit(2.0) * (lambda - mu) / (m_j * m_j);
    Ok(Calibration {
        lambda,
        mu,
        m_j,
        c,
        beta,
        c_bar,
    })
}

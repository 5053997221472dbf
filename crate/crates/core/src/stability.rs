//! Time-step bound for the linearized model and the discrete energy that the
//! central-difference scheme conserves.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fem::Discretization;
use crate::kernel::ForceLaw;
use crate::scalar::Real;

/// Which operator produced the bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CflBranch {
    /// The linearized operator itself, found positive semidefinite on the probes.
    Assembled,
    /// The majorant with `|g''(0)|`, used when a probe gave a negative quotient.
    AbsoluteValue,
}

impl CflBranch {
    pub fn name(self) -> &'static str {
        match self {
            CflBranch::Assembled => "assembled",
            CflBranch::AbsoluteValue => "absolute_value",
        }
    }
}

/// Largest generalized eigenvalue of `K x = λ M̂ x` and the step bound it implies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CflReport<T> {
    pub lambda_max: T,
    /// `2 / √λ_max`, infinite when `λ_max ≤ 0`.
    pub dt_max: T,
    pub iterations: usize,
    /// Relative eigen-residual `‖A x − λ x‖ / |λ|` of the final iterate.
    pub residual: T,
    pub branch: CflBranch,
}

impl<T: Real> CflReport<T> {
    pub fn is_unbounded(&self) -> bool {
        self.dt_max.is_infinite()
    }

    pub fn to_json(&self) -> String {
        let dt = if self.is_unbounded() {
            "\"infinite\"".to_string()
        } else {
            format!("{:e}", self.dt_max)
        };
        format!(
            "{{\"lambda_max\":{:e},\"dt_max\":{},\"iterations\":{},\"residual\":{:e},\"branch\":\"{}\"}}",
            self.lambda_max,
            dt,
            self.iterations,
            self.residual,
            self.branch.name()
        )
    }
}

/// Power iteration settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIteration<T> {
    pub rel_tol: T,
    pub max_iter: usize,
    pub seed: u64,
}

impl<T: Real> Default for PowerIteration<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::lit(1e-8),
            max_iter: 5000,
            seed: 0x5eed,
        }
    }
}

fn norm<T: Real>(x: &[T]) -> T {
    x.iter().map(|&v| v * v).sum::<T>().sqrt()
}

fn random_vector<T: Real>(n: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect()
}

/// Largest eigenvalue of `M̂^{-1/2} K M̂^{-1/2}` by power iteration, with `K`
/// given as an operator and `M̂` as its diagonal.
pub fn power_iteration<T: Real>(
    apply: &dyn Fn(&[T]) -> Result<Vec<T>>,
    mass: &[T],
    settings: &PowerIteration<T>,
) -> Result<(T, usize, T)> {
    let n = mass.len();
    if let Some(i) = mass.iter().position(|&m| !(m > T::zero())) {
        return Err(Error::Invalid(format!("mass entry {i} is not positive")));
    }
    let inv_sqrt: Vec<T> = mass.iter().map(|&m| T::one() / m.sqrt()).collect();
    let scaled = |x: &[T]| -> Result<Vec<T>> {
        let y: Vec<T> = x.iter().zip(&inv_sqrt).map(|(&a, &s)| a * s).collect();
        let ky = apply(&y)?;
        Ok(ky.iter().zip(&inv_sqrt).map(|(&a, &s)| a * s).collect())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut x: Vec<T> = random_vector(n, &mut rng);
    let nx = norm(&x);
    x.iter_mut().for_each(|v| *v = *v / nx);
    let mut lambda = T::zero();
    let mut ax = scaled(&x)?;
    for it in 1..=settings.max_iter {
        let rq: T = x.iter().zip(&ax).map(|(&a, &b)| a * b).sum();
        let na = norm(&ax);
        if na == T::zero() {
            return Ok((T::zero(), it, T::zero()));
        }
        let converged = it > 1 && (rq - lambda).abs() <= settings.rel_tol * rq.abs();
        lambda = rq;
        if converged {
            let res: Vec<T> = ax.iter().zip(&x).map(|(&a, &b)| a - rq * b).collect();
            return Ok((lambda, it, norm(&res) / rq.abs()));
        }
        x = ax.iter().map(|&v| v / na).collect();
        ax = scaled(&x)?;
    }
    let res: Vec<T> = ax.iter().zip(&x).map(|(&a, &b)| a - lambda * b).collect();
    Ok((
        lambda,
        settings.max_iter,
        norm(&res) / lambda.abs().max(T::min_positive_value()),
    ))
}

/// Rayleigh quotients `xᵀ K x / xᵀ M̂ x` of seeded random probes.
pub fn rayleigh_probes<T: Real>(
    apply: &dyn Fn(&[T]) -> Result<Vec<T>>,
    mass: &[T],
    count: usize,
    seed: u64,
) -> Result<Vec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    (0..count)
        .map(|_| {
            let x: Vec<T> = random_vector(mass.len(), &mut rng);
            let kx = apply(&x)?;
            let num: T = x.iter().zip(&kx).map(|(&a, &b)| a * b).sum();
            let den: T = x.iter().zip(mass).map(|(&a, &m)| a * a * m).sum();
            Ok(num / den)
        })
        .collect()
}

/// Step bound from an explicit operator, without the probe check.
pub fn cfl_from_operator<T: Real>(
    apply: &dyn Fn(&[T]) -> Result<Vec<T>>,
    mass: &[T],
    settings: &PowerIteration<T>,
    branch: CflBranch,
) -> Result<CflReport<T>> {
    let (lambda, iterations, residual) = power_iteration(apply, mass, settings)?;
    let dt_max = if lambda > T::zero() {
        T::lit(2.0) / lambda.sqrt()
    } else {
        T::infinity()
    };
    Ok(CflReport {
        lambda_max: lambda,
        dt_max,
        iterations,
        residual,
        branch,
    })
}

/// Step bound for the linearized peridynamic operator of a discretization.
/// Falls back to the absolute-value majorant if any probe quotient is negative.
pub fn estimate_cfl<T: Real>(
    disc: &Discretization<T>,
    settings: &PowerIteration<T>,
) -> Result<CflReport<T>> {
    let op = |u: &[T]| disc.apply_stiffness(u, ForceLaw::Linearized);
    let probes = rayleigh_probes(&op, &disc.lumped, 8, settings.seed)?;
    if probes.iter().all(|&q| q >= T::zero()) {
        let report = cfl_from_operator(&op, &disc.lumped, settings, CflBranch::Assembled)?;
        // a negative dominant eigenvalue also means the operator is indefinite
        if report.lambda_max >= T::zero() {
            return Ok(report);
        }
    }
    log::info!("linearized operator is indefinite; bounding with |g''(0)|");
    let majorant = |u: &[T]| disc.apply_stiffness(u, ForceLaw::LinearizedMajorant);
    cfl_from_operator(&majorant, &disc.lumped, settings, CflBranch::AbsoluteValue)
}

/// `E = ½[‖w‖² − (Δt²/4) a(w, w) + a(ū, ū)]` with `w = (U_{k+1} − U_k)/Δt`,
/// `ū = (U_k + U_{k+1})/2` and the lumped-mass norm.
pub fn discrete_energy<T: Real>(
    u_k: &[T],
    u_kp1: &[T],
    dt: T,
    apply: &dyn Fn(&[T]) -> Result<Vec<T>>,
    mass: &[T],
) -> Result<T> {
    let half = T::lit(0.5);
    let w: Vec<T> = u_kp1.iter().zip(u_k).map(|(&a, &b)| (a - b) / dt).collect();
    let mid: Vec<T> = u_kp1
        .iter()
        .zip(u_k)
        .map(|(&a, &b)| (a + b) * half)
        .collect();
    let form = |x: &[T]| -> Result<T> { Ok(x.iter().zip(&apply(x)?).map(|(&a, &b)| a * b).sum()) };
    let kinetic: T = w.iter().zip(mass).map(|(&a, &m)| m * a * a).sum();
    Ok(half * (kinetic - dt * dt * T::lit(0.25) * form(&w)? + form(&mid)?))
}

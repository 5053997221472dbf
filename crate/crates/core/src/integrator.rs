//! Central-difference explicit dynamics with a lumped mass matrix.

use crate::error::{Error, Result};
use crate::fem::Discretization;
use crate::kernel::ForceLaw;
use crate::mesh::Mesh;
use crate::scalar::Real;
use crate::vec2::Vec2;

/// Body force density `b(x, t)`.
pub type BodyForce<'a, T> = dyn Fn(Vec2<T>, T) -> Vec2<T> + Send + Sync + 'a;

/// Supplies the nodal force vector and the lumped mass for the integrator.
pub trait ForceModel<T: Real> {
    fn dofs(&self) -> usize;
    /// Diagonal of the lumped mass matrix.
    fn lumped_mass(&self) -> &[T];
    /// Total nodal force at displacement `u` and time `t`.
    fn force(&self, u: &[T], t: T) -> Result<Vec<T>>;
}

/// Peridynamic force plus an optional body force on a discretization.
pub struct PeridynamicModel<'a, T: Real> {
    pub disc: &'a Discretization<T>,
    pub law: ForceLaw,
    pub body: Option<&'a BodyForce<'a, T>>,
}

impl<'a, T: Real> PeridynamicModel<'a, T> {
    pub fn new(disc: &'a Discretization<T>, law: ForceLaw) -> Self {
        Self {
            disc,
            law,
            body: None,
        }
    }

    pub fn with_body(mut self, body: &'a BodyForce<'a, T>) -> Self {
        self.body = Some(body);
        self
    }
}

impl<T: Real> ForceModel<T> for PeridynamicModel<'_, T> {
    fn dofs(&self) -> usize {
        self.disc.dofs()
    }

    fn lumped_mass(&self) -> &[T] {
        &self.disc.lumped
    }

    fn force(&self, u: &[T], t: T) -> Result<Vec<T>> {
        match self.body {
            Some(b) => self
                .disc
                .assemble_force(u, t, Some(&|x, t| b(x, t)), self.law),
            None => self.disc.assemble_pd_force(u, self.law),
        }
    }
}

/// Independent linear springs `F_i = -k_i u_i`, a closed-form test bed.
#[derive(Debug, Clone)]
pub struct SpringModel<T> {
    pub mass: Vec<T>,
    pub stiffness: Vec<T>,
}

impl<T: Real> ForceModel<T> for SpringModel<T> {
    fn dofs(&self) -> usize {
        self.mass.len()
    }

    fn lumped_mass(&self) -> &[T] {
        &self.mass
    }

    fn force(&self, u: &[T], _t: T) -> Result<Vec<T>> {
        Ok(u.iter()
            .zip(&self.stiffness)
            .map(|(&u, &k)| -k * u)
            .collect())
    }
}

/// Prescribed nodal values of the crack experiment: a clamped collar and two
/// bottom strips pulled apart along x.
#[derive(Debug, Clone, PartialEq)]
pub struct BcSpec<T> {
    /// Nodes with both displacement components held at zero.
    pub collar: Vec<usize>,
    /// Nodes whose x-velocity is `-speed`.
    pub bottom_left: Vec<usize>,
    /// Nodes whose x-velocity is `+speed`.
    pub bottom_right: Vec<usize>,
    pub speed: T,
}

impl<T: Real> BcSpec<T> {
    pub fn none() -> Self {
        Self {
            collar: Vec::new(),
            bottom_left: Vec::new(),
            bottom_right: Vec::new(),
            speed: T::zero(),
        }
    }

    /// Collar: nodes with `y ≥ height - collar`. Strips: nodes with
    /// `y ≤ strip`, split at `x = width / 2`; nodes on the split line stay free.
    pub fn crack_experiment(mesh: &Mesh<T>, collar: T, strip: T, speed: T) -> Result<Self> {
        let (w, h) = (mesh.domain.width, mesh.domain.height);
        if !(collar >= T::zero() && strip >= T::zero()) || collar + strip >= h {
            return Err(Error::Invalid(
                "collar and bottom strips must be nonnegative and must not overlap".into(),
            ));
        }
        let tol = mesh.h() * T::lit(1e-9);
        let mid = w * T::lit(0.5);
        let mut bc = Self::none();
        bc.speed = speed;
        for (i, x) in mesh.nodes.iter().enumerate() {
            if x.y >= h - collar - tol {
                bc.collar.push(i);
            } else if x.y <= strip + tol {
                if x.x < mid - tol {
                    bc.bottom_left.push(i);
                } else if x.x > mid + tol {
                    bc.bottom_right.push(i);
                }
            }
        }
        Ok(bc)
    }

    pub fn is_empty(&self) -> bool {
        self.collar.is_empty() && self.bottom_left.is_empty() && self.bottom_right.is_empty()
    }

    /// Overwrites the prescribed values at time `t`. Strip y-components are untouched.
    pub fn apply(&self, u: &mut [T], v: &mut [T], t: T) {
        for &i in &self.collar {
            u[2 * i] = T::zero();
            u[2 * i + 1] = T::zero();
            v[2 * i] = T::zero();
            v[2 * i + 1] = T::zero();
        }
        for (nodes, sign) in [
            (&self.bottom_left, -T::one()),
            (&self.bottom_right, T::one()),
        ] {
            for &i in nodes {
                u[2 * i] = sign * self.speed * t;
                v[2 * i] = sign * self.speed;
            }
        }
    }
}

/// Time loop settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeLoopConfig<T> {
    pub dt: T,
    pub t_end: T,
    /// Emit every `cadence` steps, always including step 0.
    pub cadence: usize,
}

impl<T: Real> TimeLoopConfig<T> {
    pub fn new(dt: T, t_end: T, cadence: usize) -> Result<Self> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::Invalid(format!(
                "time step must be positive, got {dt}"
            )));
        }
        if !(t_end >= dt) {
            return Err(Error::Invalid(format!(
                "final time {t_end} is below the time step {dt}"
            )));
        }
        if cadence == 0 {
            return Err(Error::Invalid("output cadence must be at least 1".into()));
        }
        Ok(Self { dt, t_end, cadence })
    }

    /// Number of steps, counting the startup step: `round(t_end / dt)`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round().to_usize().unwrap_or(0)
    }
}

/// Displacement at the current and previous step, velocity, time and step index.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState<T> {
    pub u: Vec<T>,
    pub u_prev: Vec<T>,
    pub v: Vec<T>,
    pub t: T,
    pub k: usize,
}

impl<T: Real> SimState<T> {
    /// Swaps the current and previous displacement, so that stepping runs the
    /// motion backwards.
    pub fn reversed(&self) -> Self {
        let mut s = self.clone();
        std::mem::swap(&mut s.u, &mut s.u_prev);
        for v in &mut s.v {
            *v = -*v;
        }
        s
    }
}

/// Central-difference integrator over a force model.
pub struct CentralDifference<'a, T: Real, M: ForceModel<T>> {
    pub model: &'a M,
    pub bc: BcSpec<T>,
    pub dt: T,
    /// Displacements above this magnitude are treated as blow-up.
    pub blowup_limit: T,
}

impl<'a, T: Real, M: ForceModel<T>> CentralDifference<'a, T, M> {
    pub fn new(model: &'a M, bc: BcSpec<T>, dt: T, domain_size: T) -> Self {
        Self {
            model,
            bc,
            dt,
            blowup_limit: T::lit(1e3) * domain_size,
        }
    }

    /// State at step 0 with the prescribed values imposed.
    pub fn initial(&self, u0: Vec<T>, v0: Vec<T>) -> Result<SimState<T>> {
        let n = self.model.dofs();
        if u0.len() != n || v0.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: if u0.len() != n { u0.len() } else { v0.len() },
            });
        }
        let mut s = SimState {
            u_prev: u0.clone(),
            u: u0,
            v: v0,
            t: T::zero(),
            k: 0,
        };
        self.bc.apply(&mut s.u, &mut s.v, T::zero());
        s.u_prev.clone_from(&s.u);
        Ok(s)
    }

    fn time_at(&self, k: usize) -> T {
        T::from_usize_lossy(k) * self.dt
    }

    fn check(&self, u: &[T], k: usize) -> Result<()> {
        for (i, &x) in u.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::BlowUp {
                    step: k,
                    reason: format!("non-finite displacement at dof {i}"),
                });
            }
            if x.abs() > self.blowup_limit {
                return Err(Error::BlowUp {
                    step: k,
                    reason: format!("|u| = {x:e} at dof {i} exceeds {:e}", self.blowup_limit),
                });
            }
        }
        Ok(())
    }

    fn finish(&self, state: &SimState<T>, mut next: Vec<T>) -> Result<SimState<T>> {
        let k = state.k + 1;
        let t = self.time_at(k);
        let inv_dt = T::one() / self.dt;
        let mut v: Vec<T> = next
            .iter()
            .zip(&state.u)
            .map(|(&a, &b)| (a - b) * inv_dt)
            .collect();
        self.bc.apply(&mut next, &mut v, t);
        self.check(&next, k)?;
        Ok(SimState {
            u_prev: state.u.clone(),
            u: next,
            v,
            t,
            k,
        })
    }

    /// `U¹ = U⁰ + Δt V⁰ + (Δt²/2) M̂⁻¹ F(U⁰, 0)`.
    pub fn startup(&self, state: &SimState<T>) -> Result<SimState<T>> {
        let f = self.model.force(&state.u, state.t)?;
        let m = self.model.lumped_mass();
        let dt = self.dt;
        let half_dt2 = T::lit(0.5) * dt * dt;
        let next = (0..f.len())
            .map(|i| state.u[i] + dt * state.v[i] + half_dt2 * f[i] / m[i])
            .collect();
        self.finish(state, next)
    }

    /// `U^{k+1} = Δt² M̂⁻¹ F^k + 2U^k − U^{k−1}`.
    pub fn step(&self, state: &SimState<T>) -> Result<SimState<T>> {
        let f = self.model.force(&state.u, state.t)?;
        let m = self.model.lumped_mass();
        let dt2 = self.dt * self.dt;
        let next = (0..f.len())
            .map(|i| dt2 * f[i] / m[i] + (state.u[i] + state.u[i]) - state.u_prev[i])
            .collect();
        self.finish(state, next)
    }

    /// Startup then steps to `t_end`, calling `observe` on step 0 and every
    /// `cadence` steps. Returns the final state.
    pub fn run(
        &self,
        initial: SimState<T>,
        config: &TimeLoopConfig<T>,
        mut observe: impl FnMut(&SimState<T>) -> Result<()>,
    ) -> Result<SimState<T>> {
        let steps = config.steps();
        observe(&initial)?;
        let mut state = initial;
        for k in 0..steps {
            state = if k == 0 {
                self.startup(&state)?
            } else {
                self.step(&state)?
            };
            if state.k.is_multiple_of(config.cadence) {
                observe(&state)?;
            }
        }
        Ok(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn springs(k: f64) -> SpringModel<f64> {
        SpringModel {
            mass: vec![1.0],
            stiffness: vec![k],
        }
    }

    struct ConstantForce(Vec<f64>);

    impl ForceModel<f64> for ConstantForce {
        fn dofs(&self) -> usize {
            self.0.len()
        }
        fn lumped_mass(&self) -> &[f64] {
            static ONES: [f64; 4] = [1.0; 4];
            &ONES[..self.0.len()]
        }
        fn force(&self, _u: &[f64], _t: f64) -> Result<Vec<f64>> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn startup_examples() {
        let free = ConstantForce(vec![0.0, 0.0]);
        let cd = CentralDifference::new(&free, BcSpec::none(), 0.1, 1.0);
        let s0 = cd.initial(vec![0.0; 2], vec![0.0; 2]).unwrap();
        assert_eq!(cd.startup(&s0).unwrap().u, vec![0.0, 0.0]);

        let s0 = cd.initial(vec![0.0; 2], vec![2.0, -1.0]).unwrap();
        let s1 = cd.startup(&s0).unwrap();
        assert!((s1.u[0] - 0.2).abs() < 1e-15 && (s1.u[1] + 0.1).abs() < 1e-15);

        let pushed = ConstantForce(vec![3.0]);
        let cd = CentralDifference::new(&pushed, BcSpec::none(), 0.1, 1.0);
        let s1 = cd
            .startup(&cd.initial(vec![0.0], vec![0.0]).unwrap())
            .unwrap();
        assert!((s1.u[0] - 0.01 * 3.0 / 2.0).abs() < 1e-16);
    }

    #[test]
    fn free_flight_is_exact() {
        let free = ConstantForce(vec![0.0, 0.0]);
        let cd = CentralDifference::new(&free, BcSpec::none(), 0.125, 1e6);
        let mut s = cd.initial(vec![1.0, -2.0], vec![0.5, 0.25]).unwrap();
        s = cd.startup(&s).unwrap();
        for _ in 1..40 {
            s = cd.step(&s).unwrap();
        }
        let t = 40.0 * 0.125;
        assert_eq!(s.u, vec![1.0 + 0.5 * t, -2.0 + 0.25 * t]);
        assert_eq!(s.v, vec![0.5, 0.25]);
        assert_eq!(s.t, t);

        let s = cd.initial(vec![0.5; 2], vec![0.0; 2]).unwrap();
        let cfg = TimeLoopConfig::new(0.125, 10.0, 7).unwrap();
        let end = cd.run(s, &cfg, |st| {
            assert_eq!(st.u, vec![0.5; 2]);
            Ok(())
        });
        assert_eq!(end.unwrap().k, 80);
    }

    #[test]
    fn oscillator_phase_error_is_second_order() {
        let omega = 2.0;
        let model = springs(omega * omega);
        let t_end = 10.0;
        let err = |dt: f64| {
            let cd = CentralDifference::new(&model, BcSpec::none(), dt, 1.0);
            let cfg = TimeLoopConfig::new(dt, t_end, 1).unwrap();
            let end = cd
                .run(cd.initial(vec![1.0], vec![0.0]).unwrap(), &cfg, |_| Ok(()))
                .unwrap();
            (end.u[0] - (omega * end.t).cos()).abs()
        };
        let (e1, e2) = (err(0.01), err(0.005));
        let ratio = e1 / e2;
        assert!((3.6..4.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn loop_arithmetic() {
        let model = springs(1.0);
        let cd = CentralDifference::new(&model, BcSpec::none(), 0.1, 1.0);
        let cfg = TimeLoopConfig::new(0.1, 0.3, 1).unwrap();
        let mut seen = Vec::new();
        cd.run(cd.initial(vec![1.0], vec![0.0]).unwrap(), &cfg, |s| {
            seen.push(s.k);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![0, 1, 2, 3]);

        let cfg = TimeLoopConfig::new(0.1, 1.0, 3).unwrap();
        let mut seen = Vec::new();
        cd.run(cd.initial(vec![1.0], vec![0.0]).unwrap(), &cfg, |s| {
            seen.push(s.k);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![0, 3, 6, 9]);

        assert!(TimeLoopConfig::new(0.0, 1.0, 1).is_err());
        assert!(TimeLoopConfig::new(0.1, 0.05, 1).is_err());
        assert!(TimeLoopConfig::new(0.1, 1.0, 0).is_err());
    }

    #[test]
    fn time_reversal() {
        let model = SpringModel {
            mass: vec![1.0, 2.0, 0.5],
            stiffness: vec![3.0, 1.0, 7.0],
        };
        let cd = CentralDifference::new(&model, BcSpec::none(), 0.05, 10.0);
        let s0 = cd
            .initial(vec![1.0f64, -0.5, 0.25], vec![0.3, 0.0, -1.0])
            .unwrap();
        let mut s = cd.startup(&s0).unwrap();
        for _ in 0..200 {
            s = cd.step(&s).unwrap();
        }
        let mut back = s.reversed();
        for _ in 0..200 {
            back = cd.step(&back).unwrap();
        }
        for (a, b) in back.u.iter().zip(&s0.u) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0f64));
        }
    }

    #[test]
    fn blow_up_is_reported() {
        // far beyond the stability limit 2/ω
        let model = springs(1e4);
        let cd = CentralDifference::new(&model, BcSpec::none(), 0.1, 1.0);
        let cfg = TimeLoopConfig::new(0.1, 100.0, 1).unwrap();
        let err = cd
            .run(cd.initial(vec![1.0], vec![0.0]).unwrap(), &cfg, |_| Ok(()))
            .unwrap_err();
        match err {
            Error::BlowUp { step, .. } => assert!(step > 0 && step < 20),
            e => panic!("unexpected {e}"),
        }
        assert_eq!(
            Error::BlowUp {
                step: 1,
                reason: String::new()
            }
            .exit_code(),
            3
        );
    }

    #[test]
    fn boundary_overwrite() {
        let mesh = crate::mesh::build_uniform_mesh(1.0, 1.0, 0.25, None).unwrap();
        let bc = BcSpec::crack_experiment(&mesh, 0.25, 0.25, 1.0).unwrap();
        // rows y = 0.75, 1 and y = 0, 0.25 (x = 0.5 excluded)
        assert_eq!(bc.collar.len(), 10);
        assert_eq!(bc.bottom_left.len(), 4);
        assert_eq!(bc.bottom_right.len(), 4);
        assert!(BcSpec::crack_experiment(&mesh, 0.5, 0.5, 1.0).is_err());

        let n = 2 * mesh.node_count();
        let mut u = vec![0.7; n];
        let mut v = vec![0.3; n];
        bc.apply(&mut u, &mut v, 2.0);
        for &i in &bc.collar {
            assert_eq!([u[2 * i], u[2 * i + 1], v[2 * i], v[2 * i + 1]], [0.0; 4]);
        }
        for &i in &bc.bottom_left {
            assert_eq!(
                [u[2 * i], u[2 * i + 1], v[2 * i], v[2 * i + 1]],
                [-2.0, 0.7, -1.0, 0.3]
            );
        }
        for &i in &bc.bottom_right {
            assert_eq!([u[2 * i], v[2 * i]], [2.0, 1.0]);
        }
    }
}

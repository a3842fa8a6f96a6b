//! Reduced and full-order dynamic systems and implicit Newmark integration
//! with a Newton–Raphson inner loop.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fe::{FeModel, StructuralModel};
use crate::linalg::{BandedCholesky, SparseMatrix};
use crate::modal::ModeSet;
use crate::reduced::{BasisTag, TensorSet};

/// `M ẍ + C ẋ + f(x) = a(t) p`.
pub trait DynamicSystem {
    type Tangent;

    fn size(&self) -> usize;
    fn load_shape(&self) -> &DVector<f64>;
    /// Internal force at `x`.
    fn force(&self, x: &DVector<f64>) -> Result<DVector<f64>>;
    /// `∂f/∂x` at `x`.
    fn tangent(&self, x: &DVector<f64>) -> Result<Self::Tangent>;
    fn mass_mul(&self, v: &DVector<f64>) -> DVector<f64>;
    fn damping_mul(&self, v: &DVector<f64>) -> DVector<f64>;
    /// Solves `(c_m M + c_c C + K_t) dx = rhs`.
    fn solve_effective(&self, c_m: f64, c_c: f64, tangent: &Self::Tangent, rhs: &DVector<f64>) -> Result<DVector<f64>>;
    fn solve_mass(&self, rhs: &DVector<f64>) -> Result<DVector<f64>>;
}

/// Galerkin-projected equations of motion with polynomial internal forces.
#[derive(Debug, Clone)]
pub struct RomModel {
    pub mass: DMatrix<f64>,
    pub damping: DMatrix<f64>,
    pub tensors: TensorSet,
    pub load_shape: DVector<f64>,
    /// Columns mapping reduced to nodal displacements.
    pub basis: DMatrix<f64>,
}

impl RomModel {
    /// `M̃ = BᵀMB`, `C̃ = αM̃ + βK̃1`, load `Bᵀp`.
    pub fn build(
        basis: DMatrix<f64>,
        mass: &SparseMatrix,
        tensors: TensorSet,
        load: &DVector<f64>,
        rayleigh: (f64, f64),
    ) -> Result<Self> {
        let m = tensors.size();
        if basis.ncols() != m || basis.nrows() != mass.nrows() || load.len() != mass.nrows() {
            return Err(Error::Dimension(format!(
                "basis {}x{}, mass {}, load {}, tensors {m}",
                basis.nrows(),
                basis.ncols(),
                mass.nrows(),
                load.len()
            )));
        }
        let mr = mass.project(&basis);
        let damping = &mr * rayleigh.0 + &tensors.k1 * rayleigh.1;
        let load_shape = basis.tr_mul(load);
        Ok(Self {
            mass: mr,
            damping,
            tensors,
            load_shape,
            basis,
        })
    }

    pub fn reconstruct(&self, eta: &DVector<f64>) -> DVector<f64> {
        &self.basis * eta
    }

    fn lu_solve(a: DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        a.lu()
            .solve(rhs)
            .ok_or_else(|| Error::Decomposition("singular reduced system matrix".into()))
    }
}

impl DynamicSystem for RomModel {
    type Tangent = DMatrix<f64>;

    fn size(&self) -> usize {
        self.tensors.size()
    }

    fn load_shape(&self) -> &DVector<f64> {
        &self.load_shape
    }

    fn force(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.tensors.force(x))
    }

    fn tangent(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.tensors.jacobian(x))
    }

    fn mass_mul(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.mass * v
    }

    fn damping_mul(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.damping * v
    }

    fn solve_effective(&self, c_m: f64, c_c: f64, tangent: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        Self::lu_solve(&self.mass * c_m + &self.damping * c_c + tangent, rhs)
    }

    fn solve_mass(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        Self::lu_solve(self.mass.clone(), rhs)
    }
}

/// Reduced model with only the linear tensor, built from the first `k` modes.
pub fn linear_rom(
    model: &FeModel,
    modes: &ModeSet,
    k: usize,
    load: &DVector<f64>,
    rayleigh: (f64, f64),
) -> Result<RomModel> {
    if k == 0 || k > modes.len() {
        return Err(Error::Argument(format!("need 1..={} modes, got {k}", modes.len())));
    }
    let basis = modes.shapes.columns(0, k).into_owned();
    let tensors = TensorSet::new(model.linear_stiffness().project(&basis), BasisTag::V)?;
    RomModel::build(basis, &model.assemble_mass(), tensors, load, rayleigh)
}

/// The assembled finite-element equations with `C = αM + βK1`.
#[derive(Debug, Clone)]
pub struct FullOrderSystem<'a> {
    model: &'a FeModel,
    mass: SparseMatrix,
    damping: SparseMatrix,
    mass_factor: BandedCholesky,
    load_shape: DVector<f64>,
}

impl<'a> FullOrderSystem<'a> {
    pub fn new(model: &'a FeModel, load: DVector<f64>, rayleigh: (f64, f64)) -> Result<Self> {
        if load.len() != model.n_dofs() {
            return Err(Error::Dimension(format!(
                "load has {} entries, model {} dofs",
                load.len(),
                model.n_dofs()
            )));
        }
        let mass = model.assemble_mass();
        let k1 = model.linear_stiffness();
        let damping = SparseMatrix::linear_combination(&[(rayleigh.0, &mass), (rayleigh.1, &k1)])?;
        let mass_factor = BandedCholesky::factor(&mass)?;
        Ok(Self {
            model,
            mass,
            damping,
            mass_factor,
            load_shape: load,
        })
    }

    pub fn model(&self) -> &FeModel {
        self.model
    }
}

impl DynamicSystem for FullOrderSystem<'_> {
    type Tangent = SparseMatrix;

    fn size(&self) -> usize {
        self.model.n_dofs()
    }

    fn load_shape(&self) -> &DVector<f64> {
        &self.load_shape
    }

    fn force(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.model.internal_force(x)
    }

    fn tangent(&self, x: &DVector<f64>) -> Result<SparseMatrix> {
        self.model.tangent_stiffness(x)
    }

    fn mass_mul(&self, v: &DVector<f64>) -> DVector<f64> {
        self.mass.mul_vec(v)
    }

    fn damping_mul(&self, v: &DVector<f64>) -> DVector<f64> {
        self.damping.mul_vec(v)
    }

    fn solve_effective(&self, c_m: f64, c_c: f64, tangent: &SparseMatrix, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let factor = BandedCholesky::factor_combination(&[(c_m, &self.mass), (c_c, &self.damping), (1.0, tangent)])?;
        Ok(factor.solve(rhs))
    }

    fn solve_mass(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.mass_factor.solve(rhs))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewmarkParams {
    pub beta: f64,
    pub gamma: f64,
    /// Residual tolerance relative to the external force norm.
    pub tolerance: f64,
    /// Used when the external force vanishes.
    pub absolute_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for NewmarkParams {
    fn default() -> Self {
        Self {
            beta: 0.25,
            gamma: 0.5,
            tolerance: 1e-8,
            absolute_tolerance: 1e-12,
            max_iterations: 25,
        }
    }
}

/// Kinematic state at step `step` (time `step · dt`); doubles as a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub step: usize,
    pub displacement: DVector<f64>,
    pub velocity: DVector<f64>,
    pub acceleration: DVector<f64>,
}

impl State {
    /// Consistent initial acceleration from `M a = a_0 p − C v − f(x)`.
    pub fn initial<S: DynamicSystem>(system: &S, x: DVector<f64>, v: DVector<f64>, load0: f64) -> Result<Self> {
        let n = system.size();
        if x.len() != n || v.len() != n {
            return Err(Error::Dimension(format!("initial state must have {n} entries")));
        }
        let f = system.force(&x)?;
        let rhs = system.load_shape() * load0 - system.damping_mul(&v) - f;
        let a = system.solve_mass(&rhs)?;
        Ok(Self {
            step: 0,
            displacement: x,
            velocity: v,
            acceleration: a,
        })
    }

    pub fn at_rest(n: usize) -> Self {
        Self {
            step: 0,
            displacement: DVector::zeros(n),
            velocity: DVector::zeros(n),
            acceleration: DVector::zeros(n),
        }
    }
}

/// Per-step Newton residual norms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NewtonLog {
    pub residuals: Vec<Vec<f64>>,
}

impl NewtonLog {
    pub fn iterations(&self) -> impl Iterator<Item = usize> + '_ {
        self.residuals.iter().map(|r| r.len().saturating_sub(1))
    }
}

/// Advances `state` through `amplitude[state.step + 1 ..]`, calling
/// `observer` after every step. `amplitude[n]` is the load factor at `n · dt`.
pub fn newmark_observe<S, F>(
    system: &S,
    amplitude: &[f64],
    dt: f64,
    params: &NewmarkParams,
    mut state: State,
    mut observer: F,
) -> Result<(State, NewtonLog)>
where
    S: DynamicSystem,
    F: FnMut(&State),
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Argument(format!("time step must be positive, got {dt}")));
    }
    if !(params.beta > 0.0 && params.gamma >= 0.0 && params.max_iterations > 0) {
        return Err(Error::Argument(format!("invalid Newmark parameters {params:?}")));
    }
    let n = system.size();
    if state.displacement.len() != n || state.velocity.len() != n || state.acceleration.len() != n {
        return Err(Error::Dimension(format!("state must have {n} entries")));
    }
    let (beta, gamma) = (params.beta, params.gamma);
    let c_m = 1.0 / (beta * dt * dt);
    let c_c = gamma / (beta * dt);
    let mut log = NewtonLog::default();

    for step in (state.step + 1)..amplitude.len() {
        let State {
            displacement: x0,
            velocity: v0,
            acceleration: a0,
            ..
        } = &state;
        let p = system.load_shape() * amplitude[step];
        let p_norm = p.norm();
        let tol = if p_norm > 0.0 {
            params.tolerance * p_norm
        } else {
            params.absolute_tolerance
        };
        // x-independent parts of the Newmark relations
        let a_base = -(x0 + v0 * dt) * c_m - a0 * ((0.5 - beta) / beta);
        let v_base = v0 + a0 * (dt * (1.0 - gamma));
        let m_base = system.mass_mul(&a_base);

        // constant-acceleration predictor
        let mut x = x0 + v0 * dt + a0 * (0.5 * dt * dt);
        let mut history = Vec::new();
        let mut converged = false;
        for it in 0..=params.max_iterations {
            let a = &x * c_m + &a_base;
            let v = &v_base + &a * (gamma * dt);
            let f = system.force(&x)?;
            let m_x = system.mass_mul(&x) * c_m;
            let damping = system.damping_mul(&v);
            // scale of the terms being cancelled, for the roundoff floor
            let scale = m_x.norm() + m_base.norm() + damping.norm() + f.norm() + p_norm;
            let r = m_x + &m_base + damping + f - &p;
            let r_norm = r.norm();
            history.push(r_norm);
            if !r_norm.is_finite() {
                break;
            }
            if r_norm <= tol || r_norm <= 64.0 * f64::EPSILON * scale {
                state = State {
                    step,
                    displacement: x,
                    velocity: v,
                    acceleration: a,
                };
                converged = true;
                break;
            }
            if it == params.max_iterations {
                break;
            }
            let kt = system.tangent(&x)?;
            let dx = system.solve_effective(c_m, c_c, &kt, &r)?;
            x -= dx;
        }
        if !converged {
            return Err(Error::NewtonDivergence {
                step,
                residuals: history,
            });
        }
        log.residuals.push(history);
        observer(&state);
    }
    Ok((state, log))
}

/// Full trajectory of displacements and velocities, including the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub first_step: usize,
    pub displacements: Vec<DVector<f64>>,
    pub velocities: Vec<DVector<f64>>,
    pub newton: NewtonLog,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        (0..self.displacements.len())
            .map(|k| (self.first_step + k) as f64 * self.dt)
            .collect()
    }

    /// Time history of one coordinate.
    pub fn series(&self, index: usize) -> Vec<f64> {
        self.displacements.iter().map(|x| x[index]).collect()
    }
}

pub fn newmark_integrate<S: DynamicSystem>(
    system: &S,
    amplitude: &[f64],
    dt: f64,
    params: &NewmarkParams,
    initial: State,
) -> Result<Trajectory> {
    let first_step = initial.step;
    let mut displacements = vec![initial.displacement.clone()];
    let mut velocities = vec![initial.velocity.clone()];
    let (_, newton) = newmark_observe(system, amplitude, dt, params, initial, |s| {
        displacements.push(s.displacement.clone());
        velocities.push(s.velocity.clone());
    })?;
    Ok(Trajectory {
        dt,
        first_step,
        displacements,
        velocities,
        newton,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe::Material;
    use crate::modal::solve_vibration_modes;
    use std::f64::consts::PI;

    fn scalar_rom(k: f64, m: f64, c: f64, p: f64) -> RomModel {
        let tensors = TensorSet::new(DMatrix::from_element(1, 1, k), BasisTag::V).unwrap();
        RomModel {
            mass: DMatrix::from_element(1, 1, m),
            damping: DMatrix::from_element(1, 1, c),
            tensors,
            load_shape: DVector::from_element(1, p),
            basis: DMatrix::identity(1, 1),
        }
    }

    #[test]
    fn undamped_linear_energy_is_conserved() {
        let rom = scalar_rom(4.0 * PI * PI, 1.0, 0.0, 0.0);
        let init = State::initial(&rom, DVector::from_element(1, 1.0), DVector::from_element(1, 0.3), 0.0).unwrap();
        let amp = vec![0.0; 1001];
        let traj = newmark_integrate(&rom, &amp, 0.013, &NewmarkParams::default(), init).unwrap();
        let energy = |k: usize| {
            let (x, v) = (traj.displacements[k][0], traj.velocities[k][0]);
            0.5 * v * v + 0.5 * 4.0 * PI * PI * x * x
        };
        let e0 = energy(0);
        let drift = (0..=1000).map(|k| (energy(k) - e0).abs() / e0).fold(0.0, f64::max);
        assert!(drift <= 1e-6, "{drift:e}");
    }

    #[test]
    fn zero_load_from_rest_stays_at_rest() {
        let rom = scalar_rom(3.0, 2.0, 0.1, 1.0);
        let traj = newmark_integrate(&rom, &[0.0; 50], 0.01, &NewmarkParams::default(), State::at_rest(1)).unwrap();
        assert!(traj.displacements.iter().all(|x| x[0] == 0.0));
    }

    fn harmonic_amplitude(omega: f64, dt: f64, steps: usize) -> Vec<f64> {
        (0..=steps).map(|k| (omega * k as f64 * dt).sin()).collect()
    }

    #[test]
    fn harmonic_steady_state_matches_frequency_response() {
        // three uncoupled-by-construction modes rotated into a full basis
        let omegas = [20.0, 55.0, 140.0];
        let zeta = 0.05;
        let q = DMatrix::from_fn(3, 3, |i, j| ((i * 3 + j) as f64 * 0.7).sin()).qr().q();
        let kd = DMatrix::from_diagonal(&DVector::from_iterator(3, omegas.iter().map(|w| w * w)));
        let cd = DMatrix::from_diagonal(&DVector::from_iterator(3, omegas.iter().map(|w| 2.0 * zeta * w)));
        let p = DVector::from_vec(vec![1.0, -0.5, 2.0]);
        let tensors = TensorSet::new(&q * &kd * q.transpose(), BasisTag::V).unwrap();
        let rom = RomModel {
            mass: DMatrix::identity(3, 3),
            damping: &q * cd * q.transpose(),
            tensors,
            load_shape: p.clone(),
            basis: DMatrix::identity(3, 3),
        };
        let w = 40.0;
        let period = 2.0 * PI / w;
        let dt = period / 50.0;
        let periods = 120;
        let amp = harmonic_amplitude(w, dt, 50 * periods);
        let traj = newmark_integrate(&rom, &amp, dt, &NewmarkParams::default(), State::at_rest(3)).unwrap();
        // exact steady-state amplitude of each physical coordinate
        let pm = q.transpose() * &p;
        for dof in 0..3 {
            let (mut re, mut im) = (0.0, 0.0);
            for (k, wk) in omegas.iter().enumerate() {
                let den_re = wk * wk - w * w;
                let den_im = 2.0 * zeta * wk * w;
                let d2 = den_re * den_re + den_im * den_im;
                re += q[(dof, k)] * pm[k] * den_re / d2;
                im -= q[(dof, k)] * pm[k] * den_im / d2;
            }
            let exact = (re * re + im * im).sqrt();
            let tail = &traj.series(dof)[50 * (periods - 10)..];
            let peak = tail.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
            assert!((peak - exact).abs() <= 0.005 * exact, "dof {dof}: {peak} vs {exact}");
        }
    }

    fn arch() -> FeModel {
        let mat = Material::rectangular(70e9, 2700.0, 0.25, 2e-3).unwrap();
        FeModel::clamped_arch(20, 0.4, 0.008, mat).unwrap()
    }

    #[test]
    fn linear_rom_equals_independent_modal_recursions() {
        let model = arch();
        let modes = solve_vibration_modes(&model.linear_stiffness(), &model.assemble_mass(), 4).unwrap();
        let p = model.unit_transverse_load();
        let zeta_ab = (5.0, 1e-6);
        let rom = linear_rom(&model, &modes, 4, &p, zeta_ab).unwrap();
        assert!((&rom.mass - DMatrix::identity(4, 4)).norm() <= 1e-8);
        assert_eq!(rom.tensors.norms()[1..], [0.0, 0.0]);

        let dt = 2e-5;
        let amp = harmonic_amplitude(2.0 * PI * 300.0, dt, 2000);
        let traj = newmark_integrate(&rom, &amp, dt, &NewmarkParams::default(), State::at_rest(4)).unwrap();

        let global = traj.displacements.iter().map(|x| x.amax()).fold(0.0, f64::max);
        // scalar average-acceleration recursion per mode
        for k in 0..4 {
            let w = modes.frequencies[k];
            let c = zeta_ab.0 + zeta_ab.1 * w * w;
            let pk = modes.shape(k).dot(&p);
            let (mut x, mut v, mut a) = (0.0, 0.0, 0.0);
            let keff = 4.0 / (dt * dt) + 2.0 * c / dt + w * w;
            let mut worst: f64 = 0.0;
            for (n, &an) in amp.iter().enumerate().skip(1) {
                let rhs = pk * an + (4.0 / (dt * dt)) * x + (4.0 / dt) * v + a + c * ((2.0 / dt) * x + v);
                let xn = rhs / keff;
                let a_new = 4.0 / (dt * dt) * (xn - x) - 4.0 / dt * v - a;
                v += 0.5 * dt * (a + a_new);
                a = a_new;
                x = xn;
                worst = worst.max((traj.displacements[n][k] - x).abs());
            }
            assert!(worst <= 1e-6 * global, "mode {k}: {worst:e} vs {global:e}");
        }
    }

    #[test]
    fn restart_from_checkpoint_is_seamless() {
        let model = arch();
        let modes = solve_vibration_modes(&model.linear_stiffness(), &model.assemble_mass(), 3).unwrap();
        let rom = linear_rom(&model, &modes, 3, &model.unit_transverse_load(), (1.0, 0.0)).unwrap();
        let amp = harmonic_amplitude(1500.0, 1e-5, 200);
        let params = NewmarkParams::default();
        let full = newmark_integrate(&rom, &amp, 1e-5, &params, State::at_rest(3)).unwrap();
        let (mid, _) = newmark_observe(&rom, &amp[..=120], 1e-5, &params, State::at_rest(3), |_| {}).unwrap();
        assert_eq!(mid.step, 120);
        let rest = newmark_integrate(&rom, &amp, 1e-5, &params, mid).unwrap();
        assert_eq!(rest.first_step, 120);
        assert_eq!(rest.displacements.last(), full.displacements.last());
    }

    #[test]
    fn newton_converges_quadratically_on_hardening_spring() {
        let mut tensors = TensorSet::new(DMatrix::from_element(1, 1, 1.0), BasisTag::V).unwrap();
        tensors.set_k2(0, 0, 0, 0.5).unwrap();
        tensors.set_k3(0, 0, 0, 0, 4.0).unwrap();
        let rom = RomModel {
            mass: DMatrix::from_element(1, 1, 1.0),
            damping: DMatrix::from_element(1, 1, 0.02),
            tensors,
            load_shape: DVector::from_element(1, 3.0),
            basis: DMatrix::identity(1, 1),
        };
        let amp = harmonic_amplitude(1.3, 0.2, 400);
        let traj = newmark_integrate(&rom, &amp, 0.2, &NewmarkParams::default(), State::at_rest(1)).unwrap();
        let mut checked = 0;
        for h in &traj.newton.residuals {
            if h.len() >= 4 {
                // last two corrections, ignoring a final roundoff-level residual
                let r = &h[h.len() - 3..];
                if r[2] > 1e3 * f64::EPSILON * r[0] {
                    assert!(r[2] / r[1] <= 0.5, "{h:?}");
                }
                assert!(r[1] / r[0] <= 0.5, "{h:?}");
                checked += 1;
            }
        }
        assert!(checked > 10);
    }

    #[test]
    fn divergence_is_reported_with_history() {
        // softening cubic with a large load: no equilibrium beyond the fold
        let mut tensors = TensorSet::new(DMatrix::from_element(1, 1, 1.0), BasisTag::V).unwrap();
        tensors.set_k3(0, 0, 0, 0, -1.0).unwrap();
        let rom = RomModel {
            mass: DMatrix::from_element(1, 1, 1e-6),
            damping: DMatrix::zeros(1, 1),
            tensors,
            load_shape: DVector::from_element(1, 10.0),
            basis: DMatrix::identity(1, 1),
        };
        let params = NewmarkParams {
            max_iterations: 5,
            ..Default::default()
        };
        match newmark_integrate(&rom, &[0.0, 1.0, 1.0], 1.0, &params, State::at_rest(1)) {
            Err(Error::NewtonDivergence { step, residuals }) => {
                assert_eq!(step, 1);
                assert!(!residuals.is_empty() && residuals.len() <= 6);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
        assert!(newmark_integrate(&rom, &[0.0, 1.0], 0.0, &params, State::at_rest(1)).is_err());
    }

    #[test]
    fn full_order_linear_limit_matches_reduced_on_all_modes() {
        // tiny load: nonlinear HFM vs linear ROM on the full modal basis
        let model = arch();
        let n = model.n_dofs();
        let modes = solve_vibration_modes(&model.linear_stiffness(), &model.assemble_mass(), n).unwrap();
        let p = model.unit_transverse_load() * 1e-6;
        let hfm = FullOrderSystem::new(&model, p.clone(), (2.0, 1e-7)).unwrap();
        let rom = linear_rom(&model, &modes, n, &p, (2.0, 1e-7)).unwrap();
        let dt = 2e-5;
        let amp = harmonic_amplitude(2.0 * PI * 200.0, dt, 300);
        let params = NewmarkParams::default();
        let a = newmark_integrate(&hfm, &amp, dt, &params, State::at_rest(n)).unwrap();
        let b = newmark_integrate(&rom, &amp, dt, &params, State::at_rest(n)).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for (xa, eta) in a.displacements.iter().zip(&b.displacements) {
            num += (xa - rom.reconstruct(eta)).norm_squared();
            den += xa.norm_squared();
        }
        assert!((num / den).sqrt() <= 1e-4, "{}", (num / den).sqrt());
    }
}

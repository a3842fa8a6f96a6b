//! Static quadratic manifold sampling and simulation-free training snapshots
//! for the reduced-mesh solve.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fe::{StructuralModel, Vec6};
use crate::modal::{max_translational, ModalDerivatives};

/// Samples `Γ(γ) = Σ γ_i φ_i + ½ Σ_i Σ_j γ_i γ_j θ_ij` with `|γ_i| ≤ δ_i`.
#[derive(Debug, Clone)]
pub struct SqmSampler {
    vms: DMatrix<f64>,
    smds: ModalDerivatives,
    bounds: Vec<f64>,
    alpha: f64,
}

impl SqmSampler {
    /// `δ_i = α / max_translational |φ_i|`.
    pub fn new(vms: DMatrix<f64>, smds: ModalDerivatives, translational: &[bool], alpha: f64) -> Result<Self> {
        if smds.n_modes() != vms.ncols() {
            return Err(Error::Dimension(format!(
                "{} derivative modes for {} vibration modes",
                smds.n_modes(),
                vms.ncols()
            )));
        }
        if translational.len() != vms.nrows() {
            return Err(Error::Dimension("translational mask length".into()));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Argument(format!("alpha must be non-negative, got {alpha}")));
        }
        let bounds = vms
            .column_iter()
            .map(|c| {
                let peak = max_translational(&c.into_owned(), translational);
                if peak > 0.0 {
                    Ok(alpha / peak)
                } else {
                    Err(Error::Argument("mode without translational content".into()))
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            vms,
            smds,
            bounds,
            alpha,
        })
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n_modes(&self) -> usize {
        self.vms.ncols()
    }

    pub fn eval(&self, gamma: &DVector<f64>) -> Result<DVector<f64>> {
        let k = self.n_modes();
        if gamma.len() != k {
            return Err(Error::Dimension(format!("γ has {} entries, expected {k}", gamma.len())));
        }
        let mut q = &self.vms * gamma;
        for i in 0..k {
            // off-diagonal terms appear twice in the double sum
            q.axpy(0.5 * gamma[i] * gamma[i], self.smds.get(i, i), 1.0);
            for j in (i + 1)..k {
                q.axpy(gamma[i] * gamma[j], self.smds.get(i, j), 1.0);
            }
        }
        Ok(q)
    }
}

/// Latin hypercube design on the box `[−δ_i, δ_i]`: every coordinate has
/// exactly one sample in each of `n` equal bins.
pub fn lhs_sample(bounds: &[f64], n: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
    if n < 1 {
        return Err(Error::Argument("need at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = vec![DVector::zeros(bounds.len()); n];
    let mut bins: Vec<usize> = (0..n).collect();
    for (i, &d) in bounds.iter().enumerate() {
        bins.shuffle(&mut rng);
        for (s, &bin) in samples.iter_mut().zip(&bins) {
            let u: f64 = rng.random();
            s[i] = -d + 2.0 * d * (bin as f64 + u) / n as f64;
        }
    }
    Ok(samples)
}

/// Reduced coordinates uniformly distributed (by volume) in the ball
/// `max_translational |Vη| ≤ α`.
pub fn alpha_ball_samples(
    v: &DMatrix<f64>,
    translational: &[bool],
    alpha: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<DVector<f64>>> {
    if translational.len() != v.nrows() {
        return Err(Error::Dimension("translational mask length".into()));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Argument(format!("alpha must be positive, got {alpha}")));
    }
    let m = v.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let dir = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let peak = max_translational(&(v * &dir), translational);
        if peak == 0.0 {
            continue;
        }
        let u: f64 = rng.random();
        out.push(dir * (alpha / peak * u.powf(1.0 / m as f64)));
    }
    Ok(out)
}

/// Displacement snapshots and their nonlinear element forces
/// `f_e(q_e) − K_e q_e`; the first `n_train` are for training.
#[derive(Debug, Clone)]
pub struct TrainingSets {
    /// Manifold coordinates of each snapshot.
    pub gammas: Vec<DVector<f64>>,
    pub seed: u64,
    pub displacements: Vec<DVector<f64>>,
    /// `[snapshot][element]`.
    pub nonlinear_forces: Vec<Vec<Vec6>>,
    pub n_train: usize,
    pub n_validate: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validate,
}

impl TrainingSets {
    pub fn range(&self, split: Split) -> std::ops::Range<usize> {
        match split {
            Split::Train => 0..self.n_train,
            Split::Validate => self.n_train..self.n_train + self.n_validate,
        }
    }
}

pub fn build_training_sets<S: StructuralModel>(
    model: &S,
    sampler: &SqmSampler,
    n_train: usize,
    n_validate: usize,
    seed: u64,
) -> Result<TrainingSets> {
    let gammas = lhs_sample(sampler.bounds(), n_train + n_validate, seed)?;
    let linear: Vec<_> = (0..model.n_elements())
        .map(|e| model.element_linear_stiffness(e))
        .collect::<Result<_>>()?;
    let mut displacements = Vec::with_capacity(gammas.len());
    let mut nonlinear_forces = Vec::with_capacity(gammas.len());
    for g in &gammas {
        let q = sampler.eval(g)?;
        let mut forces = Vec::with_capacity(model.n_elements());
        for (e, ke) in linear.iter().enumerate() {
            let qe = gather(model, e, &q)?;
            forces.push(model.element_internal_force(e, &qe)? - ke * qe);
        }
        displacements.push(q);
        nonlinear_forces.push(forces);
    }
    Ok(TrainingSets {
        gammas,
        seed,
        displacements,
        nonlinear_forces,
        n_train,
        n_validate,
    })
}

/// Element dofs of a global free-dof vector, zeros where constrained.
pub fn gather<S: StructuralModel>(model: &S, e: usize, q: &DVector<f64>) -> Result<Vec6> {
    let dofs = model.element_dofs(e)?;
    Ok(Vec6::from_fn(|a, _| dofs[a].map_or(0.0, |d| q[d])))
}

/// Rows of `V` at the element dofs (zero rows where constrained), `6 × m`.
pub fn element_basis<S: StructuralModel>(model: &S, e: usize, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dofs = model.element_dofs(e)?;
    Ok(DMatrix::from_fn(6, v.ncols(), |a, c| {
        dofs[a].map_or(0.0, |d| v[(d, c)])
    }))
}

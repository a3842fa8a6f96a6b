//! Energy-conserving sampling and weighting: training matrix assembly, the
//! greedy sparse NNLS reduced-mesh solve, and hyper-reduced evaluation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fe::StructuralModel;
use crate::manifold::{element_basis, gather, Split, TrainingSets};

/// Reduced mesh: element indices (into the model it was trained on) with
/// strictly positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EcswModel {
    pub elements: Vec<usize>,
    pub weights: Vec<f64>,
    pub tolerance: f64,
    /// `‖Gξ − b‖ / ‖b‖` on the training set.
    pub training_residual: f64,
    pub validation_error: Option<f64>,
    /// Residual norm after every accepted greedy step, starting from `‖b‖`.
    pub residual_history: Vec<f64>,
}

impl EcswModel {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Weight vector over all `n_elements` training columns.
    pub fn dense_weights(&self, n_elements: usize) -> DVector<f64> {
        let mut xi = DVector::zeros(n_elements);
        for (&e, &w) in self.elements.iter().zip(&self.weights) {
            xi[e] = w;
        }
        xi
    }

    /// Every element with unit weight; reproduces the full reduced force.
    pub fn full_mesh(n_elements: usize) -> Self {
        Self {
            elements: (0..n_elements).collect(),
            weights: vec![1.0; n_elements],
            tolerance: 0.0,
            training_residual: 0.0,
            validation_error: Some(0.0),
            residual_history: Vec::new(),
        }
    }
}

/// Column `e` stacks `V_eᵀ f_nl,e` over the snapshots of `split`; `b = G·1`.
pub fn assemble_g_b<S: StructuralModel>(
    model: &S,
    v: &DMatrix<f64>,
    training: &TrainingSets,
    split: Split,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let m = v.ncols();
    let ne = model.n_elements();
    let range = training.range(split);
    if range.is_empty() {
        return Err(Error::Argument(format!("no {split:?} snapshots")));
    }
    let bases: Vec<DMatrix<f64>> = (0..ne).map(|e| element_basis(model, e, v)).collect::<Result<_>>()?;
    let mut g = DMatrix::zeros(range.len() * m, ne);
    for (row, s) in range.enumerate() {
        let forces = &training.nonlinear_forces[s];
        if forces.len() != ne {
            return Err(Error::Dimension(format!(
                "snapshot {s} has {} element forces, model has {ne}",
                forces.len()
            )));
        }
        for (e, (ve, f)) in bases.iter().zip(forces).enumerate() {
            let proj = ve.tr_mul(f);
            g.view_mut((row * m, e), (m, 1)).copy_from(&proj);
        }
    }
    let b = g.column_sum();
    Ok((g, b))
}

fn least_squares(g: &DMatrix<f64>, active: &[usize], b: &DVector<f64>) -> Result<DVector<f64>> {
    let a = g.select_columns(active);
    let qr = a.qr();
    let rhs = qr.q().tr_mul(b);
    qr.r()
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::Decomposition("active columns are linearly dependent".into()))
}

/// Greedy sparse non-negative least squares: stops as soon as
/// `‖Gξ − b‖ ≤ τ‖b‖`. Gives up after `3·N_e` activations.
pub fn snnls(g: &DMatrix<f64>, b: &DVector<f64>, tau: f64) -> Result<EcswModel> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Argument(format!("tolerance must lie in (0, 1), got {tau}")));
    }
    if g.nrows() != b.len() {
        return Err(Error::Dimension(format!("G has {} rows, b has {}", g.nrows(), b.len())));
    }
    let ne = g.ncols();
    let bnorm = b.norm();
    if bnorm == 0.0 {
        return Ok(EcswModel {
            elements: Vec::new(),
            weights: Vec::new(),
            tolerance: tau,
            training_residual: 0.0,
            validation_error: None,
            residual_history: vec![0.0],
        });
    }
    let target = tau * bnorm;
    let max_activations = 3 * ne;

    let mut x = DVector::<f64>::zeros(ne);
    let mut active: Vec<usize> = Vec::new();
    let mut blocked = vec![false; ne];
    let mut r = b.clone();
    let mut rnorm = bnorm;
    let mut history = vec![bnorm];
    let mut activations = 0;

    while rnorm > target {
        let fail = |activations| Error::NonConvergence {
            activations,
            relative_residual: rnorm / bnorm,
            target: tau,
        };
        if activations >= max_activations {
            return Err(fail(activations));
        }
        let corr = g.tr_mul(&r);
        let mut pick: Option<usize> = None;
        for e in 0..ne {
            if x[e] > 0.0 || blocked[e] || active.contains(&e) || !(corr[e] > 0.0) {
                continue;
            }
            if pick.is_none_or(|p| corr[e] > corr[p]) {
                pick = Some(e);
            }
        }
        let Some(j) = pick else {
            return Err(fail(activations));
        };
        active.push(j);
        activations += 1;

        loop {
            let z = least_squares(g, &active, b)?;
            if z.iter().all(|&v| v > 0.0) {
                for (k, &e) in active.iter().enumerate() {
                    x[e] = z[k];
                }
                break;
            }
            // move from x toward z until the first weight reaches zero
            let mut step = 1.0_f64;
            for (k, &e) in active.iter().enumerate() {
                if z[k] <= 0.0 {
                    step = step.min(x[e] / (x[e] - z[k]));
                }
            }
            for (k, &e) in active.iter().enumerate() {
                x[e] += step * (z[k] - x[e]);
            }
            let floor = 16.0 * f64::EPSILON * x.amax();
            active.retain(|&e| {
                let keep = x[e] > floor;
                if !keep {
                    x[e] = 0.0;
                }
                keep
            });
            if active.is_empty() {
                break;
            }
        }

        let new_r = b - g * &x;
        let new_norm = new_r.norm();
        if !active.contains(&j) || new_norm >= rnorm {
            // the new column cannot enter with a positive weight from here
            blocked[j] = true;
            if new_norm < rnorm {
                r = new_r;
                rnorm = new_norm;
                history.push(rnorm);
            }
            continue;
        }
        blocked.iter_mut().for_each(|b| *b = false);
        r = new_r;
        rnorm = new_norm;
        history.push(rnorm);
    }

    let mut elements: Vec<usize> = (0..ne).filter(|&e| x[e] > 0.0).collect();
    elements.sort_unstable();
    let weights = elements.iter().map(|&e| x[e]).collect();
    Ok(EcswModel {
        elements,
        weights,
        tolerance: tau,
        training_residual: rnorm / bnorm,
        validation_error: None,
        residual_history: history,
    })
}

/// `‖G_v ξ − b_v‖ / ‖b_v‖`, stored in the model.
pub fn validate(ecsw: &mut EcswModel, g_v: &DMatrix<f64>, b_v: &DVector<f64>) -> Result<f64> {
    if g_v.nrows() != b_v.len() {
        return Err(Error::Dimension("validation G and b differ in rows".into()));
    }
    if let Some(&bad) = ecsw.elements.iter().find(|&&e| e >= g_v.ncols()) {
        return Err(Error::index("element", bad, g_v.ncols()));
    }
    let xi = ecsw.dense_weights(g_v.ncols());
    let bn = b_v.norm();
    let err = if bn == 0.0 {
        (g_v * xi).norm()
    } else {
        (g_v * xi - b_v).norm() / bn
    };
    ecsw.validation_error = Some(err);
    Ok(err)
}

fn check_reduced<S: StructuralModel>(model: &S, ecsw: &EcswModel, v: &DMatrix<f64>, eta: &DVector<f64>) -> Result<()> {
    if v.nrows() != model.n_dofs() || v.ncols() != eta.len() {
        return Err(Error::Dimension(
            "basis does not match model or reduced coordinates".into(),
        ));
    }
    if let Some(&bad) = ecsw.elements.iter().find(|&&e| e >= model.n_elements()) {
        return Err(Error::index("element", bad, model.n_elements()));
    }
    Ok(())
}

/// `Σ_{e∈Ẽ} ξ_e V_eᵀ f_e(V_e η)`.
pub fn hyper_reduced_force<S: StructuralModel>(
    model: &S,
    ecsw: &EcswModel,
    v: &DMatrix<f64>,
    eta: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_reduced(model, ecsw, v, eta)?;
    let q = v * eta;
    let mut f = DVector::zeros(v.ncols());
    for (&e, &w) in ecsw.elements.iter().zip(&ecsw.weights) {
        let fe = model.element_internal_force(e, &gather(model, e, &q)?)?;
        f += element_basis(model, e, v)?.tr_mul(&fe) * w;
    }
    Ok(f)
}

/// `Σ_{e∈Ẽ} ξ_e V_eᵀ (K_e^t(V_e η) − K_e) V_e`.
pub fn hyper_reduced_tangent<S: StructuralModel>(
    model: &S,
    ecsw: &EcswModel,
    v: &DMatrix<f64>,
    eta: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    check_reduced(model, ecsw, v, eta)?;
    let q = v * eta;
    let m = v.ncols();
    let mut k = DMatrix::zeros(m, m);
    for (&e, &w) in ecsw.elements.iter().zip(&ecsw.weights) {
        let kt = model.element_tangent_stiffness(e, &gather(model, e, &q)?)? - model.element_linear_stiffness(e)?;
        let ve = element_basis(model, e, v)?;
        k += ve.tr_mul(&(kt * &ve)) * w;
    }
    Ok(k)
}

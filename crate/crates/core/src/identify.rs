//! Enhanced enforced-displacement identification of reduced tensors from
//! tangent stiffness queries, with exact or hyper-reduced tangents.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::ecsw::EcswModel;
use crate::error::{Error, Result};
use crate::fe::{Mat6, StructuralModel};
use crate::manifold::element_basis;
use crate::modal::max_translational;
use crate::reduced::{BasisTag, TensorSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlanCase {
    /// `η = amplitude · e_r`.
    Single { r: usize, amplitude: f64 },
    /// `η = λ_r e_r + λ_s e_s`, `r < s`.
    Pair { r: usize, s: usize },
}

/// Imposed reduced displacements: `±λ_r e_r` for every basis vector, then
/// `λ_r e_r + λ_s e_s` for every pair `r < s`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationPlan {
    amplitudes: Vec<f64>,
    cases: Vec<PlanCase>,
}

/// `2m + m(m−1)/2`.
pub fn plan_size(m: usize) -> usize {
    2 * m + m * m.saturating_sub(1) / 2
}

impl IdentificationPlan {
    pub fn from_cases(amplitudes: Vec<f64>, cases: Vec<PlanCase>) -> Self {
        Self { amplitudes, cases }
    }

    pub fn size(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn cases(&self) -> &[PlanCase] {
        &self.cases
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn displacement(&self, case: &PlanCase) -> DVector<f64> {
        let mut eta = DVector::zeros(self.size());
        match *case {
            PlanCase::Single { r, amplitude } => eta[r] = amplitude,
            PlanCase::Pair { r, s } => {
                eta[r] = self.amplitudes[r];
                eta[s] = self.amplitudes[s];
            }
        }
        eta
    }
}

/// `λ_r = alpha_id / max_translational |v_r|`.
pub fn plan_displacements(v: &DMatrix<f64>, translational: &[bool], alpha_id: f64) -> Result<IdentificationPlan> {
    if !(alpha_id > 0.0 && alpha_id.is_finite()) {
        return Err(Error::Argument(format!(
            "identification amplitude must be positive, got {alpha_id}"
        )));
    }
    if translational.len() != v.nrows() {
        return Err(Error::Dimension("translational mask length".into()));
    }
    let m = v.ncols();
    let amplitudes: Vec<f64> = v
        .column_iter()
        .map(|c| {
            let peak = max_translational(&c.into_owned(), translational);
            if peak > 0.0 {
                Ok(alpha_id / peak)
            } else {
                Err(Error::Amplitude("basis vector without translational content".into()))
            }
        })
        .collect::<Result<_>>()?;
    let mut cases = Vec::with_capacity(plan_size(m));
    for (r, &l) in amplitudes.iter().enumerate() {
        cases.push(PlanCase::Single { r, amplitude: l });
        cases.push(PlanCase::Single { r, amplitude: -l });
    }
    for r in 0..m {
        for s in (r + 1)..m {
            cases.push(PlanCase::Pair { r, s });
        }
    }
    Ok(IdentificationPlan { amplitudes, cases })
}

/// Source of the nonlinear reduced tangent `Vᵀ K^t(Vη) V − K̃1`.
pub trait TangentProvider {
    fn nonlinear_tangent(&mut self, eta: &DVector<f64>) -> Result<DMatrix<f64>>;
    /// Time spent inside black-box queries.
    fn query_time(&self) -> Duration;
    /// Time spent projecting query results onto the basis.
    fn projection_time(&self) -> Duration;
}

/// Full-mesh assembled tangent, projected.
pub struct ExactTangent<'a, S: StructuralModel> {
    model: &'a S,
    v: &'a DMatrix<f64>,
    k1r: DMatrix<f64>,
    query: Duration,
    projection: Duration,
}

impl<'a, S: StructuralModel> ExactTangent<'a, S> {
    pub fn new(model: &'a S, v: &'a DMatrix<f64>, k1r: DMatrix<f64>) -> Self {
        Self {
            model,
            v,
            k1r,
            query: Duration::ZERO,
            projection: Duration::ZERO,
        }
    }
}

impl<S: StructuralModel> TangentProvider for ExactTangent<'_, S> {
    fn nonlinear_tangent(&mut self, eta: &DVector<f64>) -> Result<DMatrix<f64>> {
        let q = self.v * eta;
        let t0 = Instant::now();
        let kt = self.model.tangent_stiffness(&q)?;
        let t1 = Instant::now();
        let out = kt.project(self.v) - &self.k1r;
        self.query += t1 - t0;
        self.projection += t1.elapsed();
        Ok(out)
    }

    fn query_time(&self) -> Duration {
        self.query
    }

    fn projection_time(&self) -> Duration {
        self.projection
    }
}

/// Weighted element tangents of a model restricted to the reduced mesh:
/// `Σ_e ξ_e V_eᵀ (K_e^t − K_e) V_e`.
pub struct EcswTangent<'a, S: StructuralModel> {
    restricted: S,
    v: &'a DMatrix<f64>,
    weights: Vec<f64>,
    bases: Vec<DMatrix<f64>>,
    linear: Vec<Mat6>,
    query: Duration,
    projection: Duration,
}

impl<'a, S: StructuralModel> EcswTangent<'a, S> {
    pub fn new(model: &S, ecsw: &EcswModel, v: &'a DMatrix<f64>) -> Result<Self> {
        let restricted = model.restrict(&ecsw.elements)?;
        let n = restricted.n_elements();
        let bases = (0..n)
            .map(|e| element_basis(&restricted, e, v))
            .collect::<Result<_>>()?;
        let linear = (0..n)
            .map(|e| restricted.element_linear_stiffness(e))
            .collect::<Result<_>>()?;
        Ok(Self {
            restricted,
            v,
            weights: ecsw.weights.clone(),
            bases,
            linear,
            query: Duration::ZERO,
            projection: Duration::ZERO,
        })
    }

    /// The model actually queried.
    pub fn restricted(&self) -> &S {
        &self.restricted
    }
}

impl<S: StructuralModel> TangentProvider for EcswTangent<'_, S> {
    fn nonlinear_tangent(&mut self, eta: &DVector<f64>) -> Result<DMatrix<f64>> {
        let q = self.v * eta;
        let t0 = Instant::now();
        let kts = self.restricted.element_tangents(&q)?;
        let t1 = Instant::now();
        let m = self.v.ncols();
        let mut out = DMatrix::zeros(m, m);
        for (((kt, k), ve), w) in kts.iter().zip(&self.linear).zip(&self.bases).zip(&self.weights) {
            out += ve.tr_mul(&((kt - k) * ve)) * *w;
        }
        self.query += t1 - t0;
        self.projection += t1.elapsed();
        Ok(out)
    }

    fn query_time(&self) -> Duration {
        self.query
    }

    fn projection_time(&self) -> Duration {
        self.projection
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IdentificationStats {
    pub tangent_queries: usize,
    pub query_time: Duration,
    pub projection_time: Duration,
    /// Time spent solving for coefficients.
    pub solve_time: Duration,
}

fn solve2(a1: f64, a2: f64, p: [f64; 2], y: [f64; 2]) -> Result<Vector2<f64>> {
    // rows: c_A a + c_B a²
    let m = Matrix2::new(p[0] * a1, p[1] * a1 * a1, p[0] * a2, p[1] * a2 * a2);
    let scale = m.abs().max();
    if !(m.determinant().abs() > 1e-12 * scale * scale) {
        return Err(Error::Amplitude(format!(
            "amplitudes {a1:e} and {a2:e} do not separate terms"
        )));
    }
    m.lu()
        .solve(&Vector2::new(y[0], y[1]))
        .ok_or_else(|| Error::Amplitude(format!("amplitudes {a1:e} and {a2:e} do not separate terms")))
}

/// Identifies the quadratic and cubic reduced tensors from
/// `2m + m(m−1)/2` tangent queries. `k1r` is the reduced linear stiffness.
pub fn identify_tensors<P: TangentProvider>(
    k1r: &DMatrix<f64>,
    plan: &IdentificationPlan,
    provider: &mut P,
) -> Result<(TensorSet, IdentificationStats)> {
    let m = plan.size();
    if k1r.nrows() != m || k1r.ncols() != m {
        return Err(Error::Dimension(format!(
            "K1 is {}x{}, plan has {m} vectors",
            k1r.nrows(),
            k1r.ncols()
        )));
    }
    // locate the required cases before querying anything
    let mut singles: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut pairs: Vec<Option<usize>> = vec![None; m * m];
    for (c, case) in plan.cases().iter().enumerate() {
        match *case {
            PlanCase::Single { r, .. } if r < m => singles[r].push(c),
            PlanCase::Pair { r, s } if r < s && s < m => pairs[r * m + s] = Some(c),
            _ => return Err(Error::Plan(format!("malformed case {case:?}"))),
        }
    }
    for (r, s) in singles.iter().enumerate() {
        if s.len() != 2 {
            return Err(Error::Plan(format!(
                "vector {r} needs exactly two single-vector cases, has {}",
                s.len()
            )));
        }
    }
    for r in 0..m {
        for s in (r + 1)..m {
            if pairs[r * m + s].is_none() {
                return Err(Error::Plan(format!("missing pair case ({r}, {s})")));
            }
        }
    }

    let mut stats = IdentificationStats::default();
    let mut responses: Vec<DMatrix<f64>> = Vec::with_capacity(plan.len());
    for case in plan.cases() {
        responses.push(provider.nonlinear_tangent(&plan.displacement(case))?);
        stats.tangent_queries += 1;
    }
    stats.query_time = provider.query_time();
    stats.projection_time = provider.projection_time();

    let t0 = Instant::now();
    let mut out = TensorSet::new(k1r.clone(), BasisTag::V)?;
    // two-index quadratic terms are seen from both directions; average them
    let mut quad_sum = vec![0.0; m * m * m];
    let mut quad_count = vec![0u8; m * m];

    // stage 1: K^nl_ij(a e_r) = A a + B a²
    for r in 0..m {
        let (c1, c2) = (singles[r][0], singles[r][1]);
        let amp = |c: usize| match plan.cases()[c] {
            PlanCase::Single { amplitude, .. } => amplitude,
            PlanCase::Pair { .. } => unreachable!(),
        };
        let (a1, a2) = (amp(c1), amp(c2));
        for j in 0..m {
            let p = if j == r { [2.0, 3.0] } else { [1.0, 1.0] };
            let (lo, hi) = (j.min(r), j.max(r));
            quad_count[lo * m + hi] += 1;
            for i in 0..m {
                let x = solve2(a1, a2, p, [responses[c1][(i, j)], responses[c2][(i, j)]])?;
                quad_sum[(lo * m + hi) * m + i] += x[0];
                out.set_k3(i, j, r, r, x[1])?;
            }
        }
    }
    for lo in 0..m {
        for hi in lo..m {
            let n = quad_count[lo * m + hi] as f64;
            for i in 0..m {
                out.set_k2(i, lo, hi, quad_sum[(lo * m + hi) * m + i] / n)?;
            }
        }
    }

    // stage 2: for η = λ_r e_r + λ_s e_s and j ∉ {r, s}, the only unknown
    // in K^nl_ij is the coefficient of η_r η_s η_j
    let mut tri_sum = vec![0.0; m * m * m * m];
    let mut tri_count = vec![0u8; m * m * m];
    let lam = plan.amplitudes();
    for r in 0..m {
        for s in (r + 1)..m {
            let k = &responses[pairs[r * m + s].expect("checked above")];
            let (lr, ls) = (lam[r], lam[s]);
            for j in (0..m).filter(|&j| j != r && j != s) {
                let mut key = [r, s, j];
                key.sort_unstable();
                let t = (key[0] * m + key[1]) * m + key[2];
                tri_count[t] += 1;
                for i in 0..m {
                    let known = out.k2(i, j, r) * lr
                        + out.k2(i, j, s) * ls
                        + out.k3(i, j, r, r) * lr * lr
                        + out.k3(i, j, s, s) * ls * ls;
                    tri_sum[t * m + i] += (k[(i, j)] - known) / (lr * ls);
                }
            }
        }
    }
    for a in 0..m {
        for b in (a + 1)..m {
            for c in (b + 1)..m {
                let t = (a * m + b) * m + c;
                let n = tri_count[t] as f64;
                for i in 0..m {
                    out.set_k3(i, a, b, c, tri_sum[t * m + i] / n)?;
                }
            }
        }
    }
    stats.solve_time = t0.elapsed();
    Ok((out, stats))
}

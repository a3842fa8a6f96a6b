//! Vibration modes, static modal derivatives, load-driven basis selection and
//! the mass-orthonormal reduction basis.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fe::StructuralModel;
use crate::linalg::{BandedCholesky, SparseMatrix};

/// Mass-normalized eigenpairs of `(K1, M)`, ascending in frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    pub shapes: DMatrix<f64>,
    /// Angular frequencies in rad/s.
    pub frequencies: DVector<f64>,
}

impl ModeSet {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn shape(&self, i: usize) -> DVector<f64> {
        self.shapes.column(i).into_owned()
    }

    /// Subset of modes, in the order given.
    pub fn select(&self, indices: &[usize]) -> Result<ModeSet> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::index("mode", bad, self.len()));
        }
        Ok(ModeSet {
            shapes: self.shapes.select_columns(indices),
            frequencies: DVector::from_iterator(indices.len(), indices.iter().map(|&i| self.frequencies[i])),
        })
    }
}

/// The `count` lowest eigenpairs of `K1 φ = ω² M φ`.
///
/// Solved as the standard symmetric problem `L⁻¹ M L⁻ᵀ y = ω⁻² y` with
/// `K1 = L Lᵀ`, which resolves the low end of the spectrum to full relative
/// precision regardless of how stiff the membrane modes are.
pub fn solve_vibration_modes(k1: &SparseMatrix, mass: &SparseMatrix, count: usize) -> Result<ModeSet> {
    let n = k1.nrows();
    if k1.ncols() != n || mass.nrows() != n || mass.ncols() != n {
        return Err(Error::Dimension(
            "stiffness and mass must be square and equal-sized".into(),
        ));
    }
    if count == 0 || count > n {
        return Err(Error::Argument(format!("mode count {count} outside 1..={n}")));
    }
    let m = mass.to_dense();
    if m.clone().cholesky().is_none() {
        return Err(Error::Decomposition("mass matrix is not positive definite".into()));
    }
    let l = k1
        .to_dense()
        .cholesky()
        .ok_or_else(|| Error::Decomposition("linear stiffness is not positive definite".into()))?
        .l();
    // B = L⁻¹ M L⁻ᵀ
    let linv_m = l
        .solve_lower_triangular(&m)
        .ok_or_else(|| Error::Decomposition("singular stiffness factor".into()))?;
    let b = l
        .solve_lower_triangular(&linv_m.transpose())
        .ok_or_else(|| Error::Decomposition("singular stiffness factor".into()))?;
    let b = (&b + b.transpose()) * 0.5;
    let eig = b.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]));
    let lt = l.transpose();
    let mut shapes = DMatrix::zeros(n, count);
    let mut frequencies = DVector::zeros(count);
    for (k, &idx) in order.iter().take(count).enumerate() {
        let mu = eig.eigenvalues[idx];
        if !(mu > 0.0) {
            return Err(Error::Decomposition(format!("non-positive eigenvalue {mu:e}")));
        }
        let mut phi = lt
            .solve_upper_triangular(&eig.eigenvectors.column(idx).into_owned())
            .ok_or_else(|| Error::Decomposition("singular stiffness factor".into()))?;
        let mnorm = phi.dot(&mass.mul_vec(&phi)).sqrt();
        phi /= mnorm;
        orient(&mut phi);
        frequencies[k] = (1.0 / mu).sqrt();
        shapes.set_column(k, &phi);
    }
    Ok(ModeSet { shapes, frequencies })
}

/// Fixes the arbitrary eigenvector sign: the largest-magnitude entry
/// (first one on ties) is made positive.
fn orient(v: &mut DVector<f64>) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
}

/// Static modal participation factors `(φᵀp)/(φᵀK1φ)·‖φ‖₂`.
pub fn static_mpf(modes: &ModeSet, k1: &SparseMatrix, p: &DVector<f64>) -> Result<DVector<f64>> {
    if p.len() != modes.shapes.nrows() {
        return Err(Error::Dimension("load length differs from mode length".into()));
    }
    Ok(DVector::from_iterator(
        modes.len(),
        modes.shapes.column_iter().map(|phi| {
            let phi = phi.into_owned();
            phi.dot(p) / phi.dot(&k1.mul_vec(&phi)) * phi.norm()
        }),
    ))
}

/// Indices of the `k` modes with largest `|sMPF|` (lowest index on ties),
/// returned in ascending mode order.
pub fn select_by_smpf(smpf: &DVector<f64>, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..smpf.len()).collect();
    idx.sort_by(|&a, &b| smpf[b].abs().total_cmp(&smpf[a].abs()).then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// Maximum absolute value over the translational dofs.
pub fn max_translational(v: &DVector<f64>, translational: &[bool]) -> f64 {
    v.iter()
        .zip(translational)
        .filter(|(_, &t)| t)
        .fold(0.0, |m, (x, _)| m.max(x.abs()))
}

/// Static modal derivatives of a set of modes, stored for `i ≤ j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalDerivatives {
    n_modes: usize,
    vectors: Vec<DVector<f64>>,
}

impl ModalDerivatives {
    /// `vectors` in [`pairs`](Self::pairs) order.
    pub fn from_vectors(n_modes: usize, vectors: Vec<DVector<f64>>) -> Result<Self> {
        if vectors.len() != n_modes * (n_modes + 1) / 2 {
            return Err(Error::Dimension(format!(
                "{} derivative vectors for {n_modes} modes",
                vectors.len()
            )));
        }
        if vectors.windows(2).any(|w| w[0].len() != w[1].len()) {
            return Err(Error::Dimension("derivative vectors differ in length".into()));
        }
        Ok(Self { n_modes, vectors })
    }

    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.vectors
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        a * self.n_modes - a * (a + 1) / 2 + b
    }

    /// `θ_ij = θ_ji`.
    pub fn get(&self, i: usize, j: usize) -> &DVector<f64> {
        assert!(i < self.n_modes && j < self.n_modes, "modal derivative index");
        &self.vectors[self.slot(i, j)]
    }

    /// All pairs `(i, j)` with `i ≤ j`, lexicographic.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        upper_pairs(self.n_modes)
    }
}

fn upper_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect()
}

/// Perturbation amplitude used for the tangent finite difference along `φ`:
/// the one that moves the largest translational dof by `fraction · length`.
pub fn default_smd_step(phi: &DVector<f64>, translational: &[bool], length: f64, fraction: f64) -> f64 {
    fraction * length / max_translational(phi, translational)
}

/// Static modal derivatives by central differences of the black-box tangent.
pub struct SmdSolver<'a, S: StructuralModel> {
    model: &'a S,
    k1: BandedCholesky,
}

impl<'a, S: StructuralModel> SmdSolver<'a, S> {
    pub fn new(model: &'a S) -> Result<Self> {
        Ok(Self {
            model,
            k1: BandedCholesky::factor(&model.linear_stiffness())?,
        })
    }

    /// Solves `K1 θ = −[(Kt(hφ_i) − Kt(−hφ_i)) / 2h] φ_j`.
    pub fn compute(&self, phi_i: &DVector<f64>, phi_j: &DVector<f64>, h: f64) -> Result<DVector<f64>> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Argument(format!("step must be positive, got {h}")));
        }
        let plus = self.model.tangent_stiffness(&(phi_i * h))?;
        let minus = self.model.tangent_stiffness(&(phi_i * -h))?;
        let dk = (plus.mul_vec(phi_j) - minus.mul_vec(phi_j)) / (2.0 * h);
        Ok(-self.k1.solve(&dk))
    }

    /// `θ_ij` for all `i ≤ j` over the columns of `modes`, differentiating
    /// along `φ_i` with step `steps[i]`.
    pub fn compute_all(&self, modes: &DMatrix<f64>, steps: &[f64]) -> Result<ModalDerivatives> {
        let k = modes.ncols();
        if steps.len() != k {
            return Err(Error::Dimension(format!("{} steps for {k} modes", steps.len())));
        }
        let mut vectors = Vec::with_capacity(k * (k + 1) / 2);
        for (i, j) in upper_pairs(k) {
            let phi_i = modes.column(i).into_owned();
            let phi_j = modes.column(j).into_owned();
            vectors.push(self.compute(&phi_i, &phi_j, steps[i])?);
        }
        Ok(ModalDerivatives { n_modes: k, vectors })
    }
}

/// SMD pairs ranked by `|sMPF_i · sMPF_j|`, descending, lexicographic on
/// ties. Pairs are `(i, j)` with `i ≤ j`, indices into `smpf`.
pub fn mdpf_rank(smpf: &[f64]) -> Vec<(usize, usize)> {
    let mut pairs = upper_pairs(smpf.len());
    pairs.sort_by(|&(a, b), &(c, d)| {
        let x = (smpf[a] * smpf[b]).abs();
        let y = (smpf[c] * smpf[d]).abs();
        y.total_cmp(&x).then((a, b).cmp(&(c, d)))
    });
    pairs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmdSelection {
    All,
    TopK(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisLabel {
    Mode(usize),
    Derivative(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionBasis {
    /// Physical basis, modes then derivatives; columns scaled to unit max
    /// translational entry.
    pub v: DMatrix<f64>,
    /// Mass-orthonormal basis spanning the same space.
    pub w: DMatrix<f64>,
    /// `V U = W`.
    pub u: DMatrix<f64>,
    pub labels: Vec<BasisLabel>,
}

impl ReductionBasis {
    pub fn size(&self) -> usize {
        self.v.ncols()
    }

    /// Builds `V = [φ…, θ…]` from the chosen modes (indices into `modes`,
    /// also used as labels) and their derivatives, then `W` and `U`.
    pub fn build(
        modes: &ModeSet,
        selected: &[usize],
        smds: &ModalDerivatives,
        smpf: &DVector<f64>,
        selection: SmdSelection,
        mass: &SparseMatrix,
        translational: &[bool],
    ) -> Result<Self> {
        if smds.n_modes() != selected.len() {
            return Err(Error::Dimension(format!(
                "{} derivative modes for {} selected modes",
                smds.n_modes(),
                selected.len()
            )));
        }
        let sel_smpf: Vec<f64> = selected
            .iter()
            .map(|&i| smpf.get(i).copied().ok_or_else(|| Error::index("mode", i, smpf.len())))
            .collect::<Result<_>>()?;
        let mut pairs = match selection {
            SmdSelection::All => smds.pairs(),
            SmdSelection::TopK(k) => {
                let mut ranked = mdpf_rank(&sel_smpf);
                ranked.truncate(k);
                ranked
            }
        };
        pairs.sort_unstable();

        let mut columns = Vec::with_capacity(selected.len() + pairs.len());
        let mut labels = Vec::with_capacity(columns.capacity());
        for &i in selected {
            columns.push(modes.shapes.column(i).into_owned());
            labels.push(BasisLabel::Mode(i));
        }
        for &(a, b) in &pairs {
            columns.push(smds.get(a, b).clone());
            labels.push(BasisLabel::Derivative(selected[a], selected[b]));
        }
        for c in &mut columns {
            let s = max_translational(c, translational);
            if s == 0.0 {
                return Err(Error::Argument("basis vector without translational content".into()));
            }
            *c /= s;
        }
        let v = DMatrix::from_columns(&columns);
        let w = mass_orthonormalize(&v, mass);
        let u = compute_u(&v, &w)?;
        Ok(Self { v, w, u, labels })
    }
}

/// Two-pass modified Gram–Schmidt in the `M` inner product. Columns whose
/// norm collapses below `1e-8` of their original norm are dropped.
pub fn mass_orthonormalize(v: &DMatrix<f64>, mass: &SparseMatrix) -> DMatrix<f64> {
    let mut kept: Vec<DVector<f64>> = Vec::with_capacity(v.ncols());
    let mut mkept: Vec<DVector<f64>> = Vec::with_capacity(v.ncols());
    for (c, col) in v.column_iter().enumerate() {
        let mut x = col.into_owned();
        let pre = x.dot(&mass.mul_vec(&x)).sqrt();
        for _ in 0..2 {
            for (q, mq) in kept.iter().zip(&mkept) {
                let r = mq.dot(&x);
                x.axpy(-r, q, 1.0);
            }
        }
        let mx = mass.mul_vec(&x);
        let post = x.dot(&mx).sqrt();
        if !(post > 1e-8 * pre) {
            log::warn!("basis column {c} is numerically dependent and was dropped");
            continue;
        }
        kept.push(x / post);
        mkept.push(mx / post);
    }
    DMatrix::from_columns(&kept)
}

/// Least-squares change of basis `U = (VᵀV)⁻¹ VᵀW`, via QR of `V`.
pub fn compute_u(v: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if v.nrows() != w.nrows() {
        return Err(Error::Dimension("V and W differ in row count".into()));
    }
    if v.ncols() > v.nrows() {
        return Err(Error::Dimension("V has more columns than rows".into()));
    }
    let qr = v.clone().qr();
    let rhs = qr.q().transpose() * w;
    qr.r()
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::Decomposition("V is rank deficient".into()))
}

/// Rayleigh coefficients `(α, β)` minimizing `Σ (½(α/ω + βω) − ζ)²`. With a
/// single frequency the minimum-norm solution is returned.
pub fn rayleigh_fit(frequencies: &[f64], zeta: f64) -> Result<(f64, f64)> {
    if frequencies.is_empty() {
        return Err(Error::Argument("no frequencies to fit".into()));
    }
    if let Some(w) = frequencies.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::Argument(format!("frequency must be positive, got {w}")));
    }
    if let [w] = frequencies {
        let (a, b) = (0.5 / w, 0.5 * w);
        let s = zeta / (a * a + b * b);
        return Ok((a * s, b * s));
    }
    let k = frequencies.len();
    let mut a = DMatrix::from_fn(k, 2, |i, j| {
        if j == 0 {
            0.5 / frequencies[i]
        } else {
            0.5 * frequencies[i]
        }
    });
    // equilibrate columns, they differ by ω²
    let scales = [a.column(0).norm(), a.column(1).norm()];
    for (j, s) in scales.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / s);
    }
    let rhs = DVector::from_element(k, zeta);
    let x = a
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::Decomposition(e.to_string()))?;
    Ok((x[0] / scales[0], x[1] / scales[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe::{extract_full_tensors, Dof, FeModel, Material};

    fn material() -> Material {
        Material::rectangular(70e9, 2700.0, 0.25, 2e-3).unwrap()
    }

    fn modes_of(model: &FeModel, k: usize) -> ModeSet {
        solve_vibration_modes(&model.linear_stiffness(), &model.assemble_mass(), k).unwrap()
    }

    #[test]
    fn clamped_beam_fundamental_frequency() {
        let mat = material();
        let span = 0.4;
        let model = FeModel::clamped_arch(40, span, 0.0, mat).unwrap();
        let modes = modes_of(&model, 3);
        let exact = 4.730_040_744_862_704_f64.powi(2)
            * (mat.youngs_modulus * mat.second_moment / (mat.density * mat.area * span.powi(4))).sqrt();
        assert!((modes.frequencies[0] - exact).abs() <= 0.01 * exact);
        assert!(modes.frequencies.iter().all(|w| *w > 0.0));
        assert!(modes.frequencies.as_slice().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn eigen_residual_and_mass_orthogonality() {
        let model = FeModel::clamped_arch(30, 0.4, 0.01, material()).unwrap();
        let k1 = model.linear_stiffness();
        let m = model.assemble_mass();
        let modes = modes_of(&model, 20);
        for i in 0..modes.len() {
            let phi = modes.shape(i);
            let kphi = k1.mul_vec(&phi);
            let res = &kphi - m.mul_vec(&phi) * modes.frequencies[i].powi(2);
            assert!(
                res.norm() <= 1e-8 * kphi.norm(),
                "mode {i}: {}",
                res.norm() / kphi.norm()
            );
            for j in 0..i {
                assert!(modes.shape(j).dot(&m.mul_vec(&phi)).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn non_spd_mass_rejected() {
        let k = SparseMatrix::identity(2);
        let m = SparseMatrix::from_triplets(2, 2, [(0, 0, 1.0), (1, 1, -1.0)]).unwrap();
        assert!(matches!(solve_vibration_modes(&k, &m, 1), Err(Error::Decomposition(_))));
    }

    #[test]
    fn symmetric_load_ignores_antisymmetric_modes() {
        let model = FeModel::clamped_arch(20, 0.4, 0.0, material()).unwrap();
        let modes = modes_of(&model, 4);
        let p = model.unit_transverse_load();
        let smpf = static_mpf(&modes, &model.linear_stiffness(), &p).unwrap();
        // modes 1 and 3 of a clamped beam are antisymmetric
        let scale = smpf.amax();
        assert!(smpf[1].abs() <= 1e-10 * scale);
        assert!(smpf[3].abs() <= 1e-10 * scale);
        assert_eq!(select_by_smpf(&smpf, 2), vec![0, 2]);
    }

    #[test]
    fn appendix_identity_reconstructs_static_solution() {
        let model = FeModel::clamped_arch(16, 0.4, 0.01, material()).unwrap();
        let n = model.n_dofs();
        let k1 = model.linear_stiffness();
        let modes = modes_of(&model, n);
        let p = model.unit_transverse_load();
        let smpf = static_mpf(&modes, &k1, &p).unwrap();
        let mut sum = DVector::zeros(n);
        for i in 0..n {
            let phi = modes.shape(i);
            sum += &phi / phi.norm() * smpf[i];
        }
        let exact = k1.to_dense().cholesky().unwrap().solve(&p);
        assert!((sum - &exact).norm() <= 1e-8 * exact.norm());
    }

    #[test]
    fn smpf_scale_invariance() {
        let model = FeModel::clamped_arch(12, 0.4, 0.01, material()).unwrap();
        let k1 = model.linear_stiffness();
        let original = modes_of(&model, 3);
        let p = model.unit_transverse_load();
        let a = static_mpf(&original, &k1, &p).unwrap();
        let k = a.iamax();
        let mut modes = original.clone();
        modes.shapes.column_mut(k).scale_mut(-3.5);
        let b = static_mpf(&modes, &k1, &p).unwrap();
        let va = original.shape(k) / original.shape(k).norm() * a[k];
        let vb = modes.shape(k) / modes.shape(k).norm() * b[k];
        assert!((&va - vb).norm() <= 1e-12 * va.norm());
    }

    fn smd_setup(rise: f64) -> (FeModel, ModeSet) {
        let model = FeModel::clamped_arch(16, 0.4, rise, material()).unwrap();
        let modes = modes_of(&model, 3);
        (model, modes)
    }

    #[test]
    fn smds_are_symmetric() {
        let (model, modes) = smd_setup(0.008);
        let solver = SmdSolver::new(&model).unwrap();
        let mask = model.translational_dofs();
        let t = model.material().thickness_equivalent();
        for i in 0..3 {
            for j in 0..3 {
                let (pi, pj) = (modes.shape(i), modes.shape(j));
                let tij = solver.compute(&pi, &pj, default_smd_step(&pi, &mask, t, 0.1)).unwrap();
                let tji = solver.compute(&pj, &pi, default_smd_step(&pj, &mask, t, 0.1)).unwrap();
                assert!((&tij - &tji).norm() <= 1e-6 * tij.norm());
            }
        }
    }

    #[test]
    fn smd_matches_quadratic_tensor() {
        let (model, modes) = smd_setup(0.008);
        let full = extract_full_tensors(&model).unwrap();
        let solver = SmdSolver::new(&model).unwrap();
        let n = model.n_dofs();
        let k1 = model.linear_stiffness().to_dense().cholesky().unwrap();
        let (pi, pj) = (modes.shape(0), modes.shape(2));
        let theta = solver.compute(&pi, &pj, 1e-3).unwrap();
        // θ = −2 K1⁻¹ K2(φ_i, φ_j)
        let mut k2 = DVector::zeros(n);
        for el in full.elements() {
            for a in 0..6 {
                let Some(da) = el.dofs[a] else { continue };
                for b in 0..6 {
                    let Some(db) = el.dofs[b] else { continue };
                    for c in 0..6 {
                        if let Some(dc) = el.dofs[c] {
                            k2[da] += el.k2(a, b, c) * pi[db] * pj[dc];
                        }
                    }
                }
            }
        }
        let oracle = -k1.solve(&k2) * 2.0;
        assert!((&theta - &oracle).norm() <= 1e-8 * oracle.norm());
    }

    #[test]
    fn flat_beam_smd_is_membrane() {
        let (model, modes) = smd_setup(0.0);
        let solver = SmdSolver::new(&model).unwrap();
        let theta = solver.compute(&modes.shape(0), &modes.shape(0), 1e-3).unwrap();
        let mut transverse = 0.0;
        for node in 0..=16 {
            for dof in [Dof::Transverse, Dof::Rotation] {
                if let Some(d) = model.free_dof(node, dof) {
                    transverse += theta[d] * theta[d];
                }
            }
        }
        assert!(transverse.sqrt() <= 0.05 * theta.norm());
    }

    #[test]
    fn mdpf_ranking_rules() {
        assert_eq!(mdpf_rank(&[2.0]), vec![(0, 0)]);
        assert_eq!(mdpf_rank(&[1.0, 1.0]), vec![(0, 0), (0, 1), (1, 1)]);
        assert_eq!(
            mdpf_rank(&[0.5, -2.0, 1.0]),
            vec![(1, 1), (1, 2), (0, 1), (2, 2), (0, 2), (0, 0)]
        );
        // positive rescaling of the load keeps the order
        let s = [0.3, -1.7, 0.9, 0.05];
        let scaled: Vec<f64> = s.iter().map(|x| x * 42.0).collect();
        assert_eq!(mdpf_rank(&s), mdpf_rank(&scaled));
        // 15 modes give 120 pairs
        assert_eq!(mdpf_rank(&[1.0; 15]).len(), 120);
    }

    fn basis_for(n_modes: usize, selection: SmdSelection) -> (FeModel, ReductionBasis) {
        let model = FeModel::clamped_arch(24, 0.4, 0.008, material()).unwrap();
        let modes = modes_of(&model, n_modes);
        let mask = model.translational_dofs();
        let t = model.material().thickness_equivalent();
        let steps: Vec<f64> = (0..n_modes)
            .map(|i| default_smd_step(&modes.shape(i), &mask, t, 0.1))
            .collect();
        let smds = SmdSolver::new(&model)
            .unwrap()
            .compute_all(&modes.shapes, &steps)
            .unwrap();
        let smpf = static_mpf(&modes, &model.linear_stiffness(), &model.unit_transverse_load()).unwrap();
        let selected: Vec<usize> = (0..n_modes).collect();
        let basis = ReductionBasis::build(
            &modes,
            &selected,
            &smds,
            &smpf,
            selection,
            &model.assemble_mass(),
            &mask,
        )
        .unwrap();
        (model, basis)
    }

    #[test]
    fn basis_sizes_and_orthonormality() {
        let (model, basis) = basis_for(7, SmdSelection::All);
        assert_eq!(basis.size(), 35);
        let (_, single) = basis_for(1, SmdSelection::All);
        assert_eq!(single.size(), 2);
        assert_eq!(single.labels, vec![BasisLabel::Mode(0), BasisLabel::Derivative(0, 0)]);

        let (_, b) = basis_for(4, SmdSelection::TopK(3));
        assert_eq!(b.size(), 7);

        let m = model.assemble_mass();
        let wtmw = m.project(&basis.w);
        let err = (wtmw - DMatrix::identity(basis.w.ncols(), basis.w.ncols())).amax();
        assert!(err <= 1e-8, "{err}");
        assert!((&basis.v * &basis.u - &basis.w).norm() <= 1e-10 * basis.w.norm());
    }

    #[test]
    fn u_recovers_known_transformations() {
        let v = DMatrix::from_fn(9, 3, |i, j| {
            ((i * 7 + j * 3) as f64).sin() + if i == j { 2.0 } else { 0.0 }
        });
        assert!((compute_u(&v, &v).unwrap() - DMatrix::identity(3, 3)).norm() <= 1e-12);
        let r = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, -1.0, 0.1, 1.5, 0.2, 0.7, -0.4, 3.0]);
        assert!((compute_u(&v, &(&v * &r)).unwrap() - &r).norm() <= 1e-10 * r.norm());
        let perm = v.select_columns(&[2, 0, 1]);
        let u = compute_u(&v, &perm).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        assert!((u - expected).norm() <= 1e-12);
    }

    #[test]
    fn rayleigh_fit_cases() {
        let z = |a: f64, b: f64, w: f64| 0.5 * (a / w + b * w);
        let (a, b) = rayleigh_fit(&[200.0, 3000.0], 0.02).unwrap();
        assert!((z(a, b, 200.0) - 0.02).abs() <= 1e-12);
        assert!((z(a, b, 3000.0) - 0.02).abs() <= 1e-12);

        let (a, b) = rayleigh_fit(&[500.0], 0.03).unwrap();
        assert!((z(a, b, 500.0) - 0.03).abs() <= 1e-14);
        // minimum norm: (α, β) parallel to the row (1/2ω, ω/2)
        assert!((a * 250.0 - b * 0.001).abs() <= 1e-9 * a.abs().max(b.abs()));

        let ws = [600.0, 1100.0, 1900.0, 2500.0, 4000.0];
        let (a, b) = rayleigh_fit(&ws, 0.02).unwrap();
        let grad_a: f64 = ws.iter().map(|w| (z(a, b, *w) - 0.02) / w).sum();
        let grad_b: f64 = ws.iter().map(|w| (z(a, b, *w) - 0.02) * w).sum();
        assert!(grad_a.abs() <= 1e-12 && grad_b.abs() <= 1e-9);
        assert!(rayleigh_fit(&[], 0.02).is_err());
    }
}

//! Reduced cubic force tensors stored as one coefficient per unique monomial,
//! their evaluation, direct projection of full tensors, and change of basis.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fe::FullTensors;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisTag {
    V,
    W,
}

impl std::fmt::Display for BasisTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BasisTag::V => "V",
            BasisTag::W => "W",
        })
    }
}

/// Index tables for the monomials `η_j η_k` (`j ≤ k`) and `η_j η_k η_l`
/// (`j ≤ k ≤ l`), in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
struct Monomials {
    m: usize,
    pairs: Vec<[usize; 2]>,
    triples: Vec<[usize; 3]>,
    pair_index: Vec<usize>,
    triple_index: Vec<usize>,
}

impl Monomials {
    fn new(m: usize) -> Self {
        let mut pairs = Vec::new();
        let mut pair_index = vec![0; m * m];
        for j in 0..m {
            for k in j..m {
                pair_index[j * m + k] = pairs.len();
                pair_index[k * m + j] = pairs.len();
                pairs.push([j, k]);
            }
        }
        let mut triples = Vec::new();
        let mut triple_index = vec![0; m * m * m];
        for j in 0..m {
            for k in j..m {
                for l in k..m {
                    let p = triples.len();
                    for [a, b, c] in [[j, k, l], [j, l, k], [k, j, l], [k, l, j], [l, j, k], [l, k, j]] {
                        triple_index[(a * m + b) * m + c] = p;
                    }
                    triples.push([j, k, l]);
                }
            }
        }
        Self {
            m,
            pairs,
            triples,
            pair_index,
            triple_index,
        }
    }

    fn pair(&self, j: usize, k: usize) -> usize {
        self.pair_index[j * self.m + k]
    }

    fn triple(&self, j: usize, k: usize, l: usize) -> usize {
        self.triple_index[(j * self.m + k) * self.m + l]
    }
}

/// Number of distinct orderings of a sorted index tuple.
fn permutations2([j, k]: [usize; 2]) -> f64 {
    if j == k {
        1.0
    } else {
        2.0
    }
}

fn permutations3([j, k, l]: [usize; 3]) -> f64 {
    match (j == k, k == l) {
        (true, true) => 1.0,
        (false, false) if j != l => 6.0,
        _ => 3.0,
    }
}

/// `f̃_i(η) = Σ_j K1_ij η_j + Σ_{j≤k} K2_ijk η_j η_k + Σ_{j≤k≤l} K3_ijkl η_j η_k η_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSet {
    pub k1: DMatrix<f64>,
    pub basis: BasisTag,
    mono: Monomials,
    /// `[pair][i]`
    k2: Vec<f64>,
    /// `[triple][i]`
    k3: Vec<f64>,
}

impl TensorSet {
    pub fn new(k1: DMatrix<f64>, basis: BasisTag) -> Result<Self> {
        if !k1.is_square() {
            return Err(Error::Dimension("reduced linear stiffness must be square".into()));
        }
        let m = k1.nrows();
        let mono = Monomials::new(m);
        Ok(Self {
            k2: vec![0.0; mono.pairs.len() * m],
            k3: vec![0.0; mono.triples.len() * m],
            k1,
            basis,
            mono,
        })
    }

    pub fn size(&self) -> usize {
        self.mono.m
    }

    fn check(&self, idx: &[usize]) -> Result<()> {
        match idx.iter().find(|&&i| i >= self.mono.m) {
            Some(&bad) => Err(Error::index("reduced coordinate", bad, self.mono.m)),
            None => Ok(()),
        }
    }

    /// Coefficient of `η_j η_k` in `f̃_i` (any index order).
    pub fn k2(&self, i: usize, j: usize, k: usize) -> f64 {
        self.k2[self.mono.pair(j, k) * self.mono.m + i]
    }

    /// Coefficient of `η_j η_k η_l` in `f̃_i` (any index order).
    pub fn k3(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.k3[self.mono.triple(j, k, l) * self.mono.m + i]
    }

    pub fn set_k2(&mut self, i: usize, j: usize, k: usize, value: f64) -> Result<()> {
        self.check(&[i, j, k])?;
        let p = self.mono.pair(j, k);
        self.k2[p * self.mono.m + i] = value;
        Ok(())
    }

    pub fn set_k3(&mut self, i: usize, j: usize, k: usize, l: usize, value: f64) -> Result<()> {
        self.check(&[i, j, k, l])?;
        let p = self.mono.triple(j, k, l);
        self.k3[p * self.mono.m + i] = value;
        Ok(())
    }

    /// Stored quadratic coefficients `(i, j, k, value)` with `j ≤ k`,
    /// sorted by `(i, j, k)`.
    pub fn quadratic_entries(&self) -> Vec<(usize, usize, usize, f64)> {
        let m = self.mono.m;
        let mut out = Vec::with_capacity(self.k2.len());
        for i in 0..m {
            for (p, &[j, k]) in self.mono.pairs.iter().enumerate() {
                out.push((i, j, k, self.k2[p * m + i]));
            }
        }
        out
    }

    /// Stored cubic coefficients `(i, j, k, l, value)` with `j ≤ k ≤ l`,
    /// sorted by `(i, j, k, l)`.
    pub fn cubic_entries(&self) -> Vec<(usize, usize, usize, usize, f64)> {
        let m = self.mono.m;
        let mut out = Vec::with_capacity(self.k3.len());
        for i in 0..m {
            for (p, &[j, k, l]) in self.mono.triples.iter().enumerate() {
                out.push((i, j, k, l, self.k3[p * m + i]));
            }
        }
        out
    }

    /// Frobenius norms of the linear, quadratic and cubic coefficient sets.
    pub fn norms(&self) -> [f64; 3] {
        let n = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        [self.k1.norm(), n(&self.k2), n(&self.k3)]
    }

    /// Relative Frobenius distance per order, `‖self − other‖ / ‖other‖`.
    pub fn relative_difference(&self, other: &TensorSet) -> Result<[f64; 3]> {
        if self.size() != other.size() {
            return Err(Error::Dimension("tensor sets differ in size".into()));
        }
        let rel = |a: &[f64], b: &[f64]| {
            let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            let s: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
            if s == 0.0 {
                d
            } else {
                d / s
            }
        };
        Ok([
            rel(self.k1.as_slice(), other.k1.as_slice()),
            rel(&self.k2, &other.k2),
            rel(&self.k3, &other.k3),
        ])
    }

    /// Reduced internal force.
    pub fn force(&self, eta: &DVector<f64>) -> DVector<f64> {
        let m = self.mono.m;
        assert_eq!(eta.len(), m, "reduced force dimension");
        let mut f = &self.k1 * eta;
        let out = f.as_mut_slice();
        for (p, &[j, k]) in self.mono.pairs.iter().enumerate() {
            let x = eta[j] * eta[k];
            if x != 0.0 {
                for (o, c) in out.iter_mut().zip(&self.k2[p * m..(p + 1) * m]) {
                    *o += c * x;
                }
            }
        }
        for (p, &[j, k, l]) in self.mono.triples.iter().enumerate() {
            let x = eta[j] * eta[k] * eta[l];
            if x != 0.0 {
                for (o, c) in out.iter_mut().zip(&self.k3[p * m..(p + 1) * m]) {
                    *o += c * x;
                }
            }
        }
        f
    }

    /// `∂f̃/∂η`.
    pub fn jacobian(&self, eta: &DVector<f64>) -> DMatrix<f64> {
        let mut jac = self.k1.clone();
        self.add_nonlinear_jacobian(eta, &mut jac);
        jac
    }

    /// `∂f̃/∂η − K1`.
    pub fn nonlinear_jacobian(&self, eta: &DVector<f64>) -> DMatrix<f64> {
        let m = self.mono.m;
        let mut jac = DMatrix::zeros(m, m);
        self.add_nonlinear_jacobian(eta, &mut jac);
        jac
    }

    fn add_nonlinear_jacobian(&self, eta: &DVector<f64>, jac: &mut DMatrix<f64>) {
        let m = self.mono.m;
        assert_eq!(eta.len(), m, "reduced jacobian dimension");
        let out = jac.as_mut_slice();
        let mut add = |col: usize, coeffs: &[f64], x: f64| {
            if x != 0.0 {
                for (o, c) in out[col * m..(col + 1) * m].iter_mut().zip(coeffs) {
                    *o += c * x;
                }
            }
        };
        for (p, &[j, k]) in self.mono.pairs.iter().enumerate() {
            let c = &self.k2[p * m..(p + 1) * m];
            add(j, c, eta[k]);
            add(k, c, eta[j]);
        }
        for (p, &[j, k, l]) in self.mono.triples.iter().enumerate() {
            let c = &self.k3[p * m..(p + 1) * m];
            add(j, c, eta[k] * eta[l]);
            add(k, c, eta[j] * eta[l]);
            add(l, c, eta[j] * eta[k]);
        }
    }

    /// Folds a dense tensor `D[i][j][k]` into unique-monomial coefficients.
    fn fold2(&mut self, dense: &[f64]) {
        let m = self.mono.m;
        for (p, &[j, k]) in self.mono.pairs.iter().enumerate() {
            for i in 0..m {
                let mut v = dense[(i * m + j) * m + k];
                if j != k {
                    v += dense[(i * m + k) * m + j];
                }
                self.k2[p * m + i] = v;
            }
        }
    }

    fn fold3(&mut self, dense: &[f64]) {
        let m = self.mono.m;
        for (p, &[j, k, l]) in self.mono.triples.iter().enumerate() {
            let mut perms = vec![[j, k, l], [j, l, k], [k, j, l], [k, l, j], [l, j, k], [l, k, j]];
            perms.sort_unstable();
            perms.dedup();
            for i in 0..m {
                self.k3[p * m + i] = perms
                    .iter()
                    .map(|&[a, b, c]| dense[((i * m + a) * m + b) * m + c])
                    .sum();
            }
        }
    }

    /// Dense tensors symmetric in the trailing indices.
    fn densify(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.mono.m;
        let mut d2 = vec![0.0; m * m * m];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let p = self.mono.pair(j, k);
                    d2[(i * m + j) * m + k] = self.k2[p * m + i] / permutations2(self.mono.pairs[p]);
                }
            }
        }
        let mut d3 = vec![0.0; m * m * m * m];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let p = self.mono.triple(j, k, l);
                        d3[((i * m + j) * m + k) * m + l] = self.k3[p * m + i] / permutations3(self.mono.triples[p]);
                    }
                }
            }
        }
        (d2, d3)
    }
}

/// Mode-`axis` product of a dense tensor with all dimensions `dims`:
/// `out[.., a, ..] = Σ_i u[i, a] · t[.., i, ..]`.
fn mode_product(t: &[f64], dims: &[usize], axis: usize, u: &DMatrix<f64>) -> (Vec<f64>, Vec<usize>) {
    let inner: usize = dims[axis + 1..].iter().product();
    let outer: usize = dims[..axis].iter().product();
    let (n_in, n_out) = (dims[axis], u.ncols());
    let mut out = vec![0.0; outer * n_out * inner];
    for o in 0..outer {
        for i in 0..n_in {
            let src = &t[(o * n_in + i) * inner..(o * n_in + i + 1) * inner];
            for a in 0..n_out {
                let w = u[(i, a)];
                if w == 0.0 {
                    continue;
                }
                let dst = &mut out[(o * n_out + a) * inner..(o * n_out + a + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
    }
    let mut new_dims = dims.to_vec();
    new_dims[axis] = n_out;
    (out, new_dims)
}

fn contract_all(t: &[f64], dims: &[usize], u: &DMatrix<f64>) -> Vec<f64> {
    let (mut data, mut d) = (t.to_vec(), dims.to_vec());
    for axis in 0..dims.len() {
        let (nd, ndims) = mode_product(&data, &d, axis, u);
        data = nd;
        d = ndims;
    }
    data
}

/// Projects full-order tensors onto `V` and folds them to unique monomials.
pub fn direct_projection(full: &FullTensors, v: &DMatrix<f64>) -> Result<TensorSet> {
    if v.nrows() != full.n_dofs() {
        return Err(Error::Dimension(format!(
            "basis has {} rows, model has {} dofs",
            v.nrows(),
            full.n_dofs()
        )));
    }
    let m = v.ncols();
    let mut k1 = DMatrix::zeros(m, m);
    let mut d2 = vec![0.0; m * m * m];
    let mut d3 = vec![0.0; m * m * m * m];
    for el in full.elements() {
        let ve = DMatrix::from_fn(6, m, |a, c| el.dofs[a].map_or(0.0, |d| v[(d, c)]));
        k1 += ve.tr_mul(&(el.k1 * &ve));
        let p2 = contract_all(&el.k2, &[6, 6, 6], &ve);
        let p3 = contract_all(&el.k3, &[6, 6, 6, 6], &ve);
        d2.iter_mut().zip(&p2).for_each(|(d, p)| *d += p);
        d3.iter_mut().zip(&p3).for_each(|(d, p)| *d += p);
    }
    let mut out = TensorSet::new(k1, BasisTag::V)?;
    out.fold2(&d2);
    out.fold3(&d3);
    Ok(out)
}

/// Rewrites tensors identified in `V` for coordinates `ζ` with `η = U ζ`:
/// `f̃_W(ζ) = Uᵀ f̃_V(U ζ)`.
pub fn transform_tensors(tensors: &TensorSet, u: &DMatrix<f64>, basis: BasisTag) -> Result<TensorSet> {
    let m = tensors.size();
    if u.nrows() != m {
        return Err(Error::Dimension(format!(
            "U has {} rows, tensors have size {m}",
            u.nrows()
        )));
    }
    let mw = u.ncols();
    let (d2, d3) = tensors.densify();
    let mut out = TensorSet::new(u.tr_mul(&(&tensors.k1 * u)), basis)?;
    out.fold2(&contract_all(&d2, &[m, m, m], u));
    out.fold3(&contract_all(&d3, &[m, m, m, m], u));
    debug_assert_eq!(out.size(), mw);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe::{extract_full_tensors, FeModel, Material, StructuralModel};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(m: usize, seed: u64) -> TensorSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(m, m, |_, _| rng.random::<f64>() - 0.5);
        let mut t = TensorSet::new(&a * a.transpose() + DMatrix::identity(m, m), BasisTag::V).unwrap();
        for v in t.k2.iter_mut().chain(t.k3.iter_mut()) {
            *v = rng.random::<f64>() - 0.5;
        }
        t
    }

    fn random_vec(m: usize, seed: u64, scale: f64) -> DVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DVector::from_fn(m, |_, _| (rng.random::<f64>() - 0.5) * scale)
    }

    #[test]
    fn monomial_counts() {
        let t = TensorSet::new(DMatrix::identity(4, 4), BasisTag::V).unwrap();
        assert_eq!(t.quadratic_entries().len(), 4 * 10);
        assert_eq!(t.cubic_entries().len(), 4 * 20);
        assert!(t.quadratic_entries().iter().all(|&(_, j, k, _)| j <= k));
        assert!(t.cubic_entries().iter().all(|&(_, j, k, l, _)| j <= k && k <= l));
    }

    #[test]
    fn zero_input_and_linear_limit() {
        let t = random_set(5, 1);
        assert_eq!(t.force(&DVector::zeros(5)).norm(), 0.0);
        assert_eq!(t.jacobian(&DVector::zeros(5)), t.k1);
        let eta = random_vec(5, 2, 1.0);
        let e1 = (t.force(&(&eta * 1e-3)) - &t.k1 * &eta * 1e-3).norm();
        let e2 = (t.force(&(&eta * 5e-4)) - &t.k1 * &eta * 5e-4).norm();
        // quadratic leading error: halving ε quarters it
        assert!((e1 / e2 - 4.0).abs() < 0.05);
    }

    proptest! {
        #[test]
        fn jacobian_matches_finite_differences(seed in any::<u64>()) {
            let t = random_set(6, seed);
            let eta = random_vec(6, seed ^ 1, 2.0);
            let jac = t.jacobian(&eta);
            let h = 1e-6;
            for c in 0..6 {
                let mut p = eta.clone();
                let mut q = eta.clone();
                p[c] += h;
                q[c] -= h;
                let fd = (t.force(&p) - t.force(&q)) / (2.0 * h);
                prop_assert!((fd - jac.column(c)).norm() <= 1e-6 * jac.column(c).norm());
            }
        }

        #[test]
        fn transformation_preserves_evaluation(seed in any::<u64>()) {
            let t = random_set(5, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 7);
            let u = DMatrix::from_fn(5, 5, |i, j| rng.random::<f64>() - 0.5 + if i == j { 2.0 } else { 0.0 });
            let w = transform_tensors(&t, &u, BasisTag::W).unwrap();
            let zeta = random_vec(5, seed ^ 3, 1.0);
            let expected = u.tr_mul(&t.force(&(&u * &zeta)));
            prop_assert!((w.force(&zeta) - &expected).norm() <= 1e-10 * expected.norm());
        }
    }

    #[test]
    fn identity_transformation_is_noop() {
        let t = random_set(4, 9);
        let w = transform_tensors(&t, &DMatrix::identity(4, 4), BasisTag::V).unwrap();
        let d = w.relative_difference(&t).unwrap();
        assert!(d.iter().all(|&x| x <= 1e-14));
    }

    fn arch() -> FeModel {
        let mat = Material::rectangular(70e9, 2700.0, 0.25, 2e-3).unwrap();
        FeModel::clamped_arch(10, 0.4, 0.006, mat).unwrap()
    }

    fn smooth_basis(n: usize, m: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, m, |i, j| 1e-3 * ((i + 1) as f64 * (j + 1) as f64 * 0.37).sin())
    }

    #[test]
    fn projection_reproduces_projected_force() {
        let model = arch();
        let full = extract_full_tensors(&model).unwrap();
        let v = smooth_basis(model.n_dofs(), 4);
        let t = direct_projection(&full, &v).unwrap();
        for seed in 0..10 {
            let eta = random_vec(4, seed, 4.0);
            let exact = v.tr_mul(&model.internal_force(&(&v * &eta)).unwrap());
            assert!((t.force(&eta) - &exact).norm() <= 1e-10 * exact.norm());
        }
    }

    #[test]
    fn single_column_projection_is_a_cubic_fit() {
        let model = arch();
        let full = extract_full_tensors(&model).unwrap();
        let v = smooth_basis(model.n_dofs(), 1);
        let t = direct_projection(&full, &v).unwrap();
        // g(a) = vᵀ f(a v) = c1 a + c2 a² + c3 a³, recovered from 3 samples
        let g = |a: f64| v.column(0).dot(&model.internal_force(&(v.column(0) * a)).unwrap());
        let amps = [1.0_f64, -1.0, 2.0];
        let lhs = nalgebra::Matrix3::from_fn(|r, c| amps[r].powi(c as i32 + 1));
        let c = lhs
            .lu()
            .solve(&nalgebra::Vector3::new(g(1.0), g(-1.0), g(2.0)))
            .unwrap();
        assert!((t.k1[(0, 0)] - c[0]).abs() <= 1e-9 * c[0].abs());
        assert!((t.k2(0, 0, 0) - c[1]).abs() <= 1e-8 * c[1].abs());
        assert!((t.k3(0, 0, 0, 0) - c[2]).abs() <= 1e-8 * c[2].abs());
    }

    #[test]
    fn scaled_basis_scales_coefficients() {
        let model = arch();
        let full = extract_full_tensors(&model).unwrap();
        let v = smooth_basis(model.n_dofs(), 3);
        let t = direct_projection(&full, &v).unwrap();
        let c = 1.7;
        let scaled = transform_tensors(&t, &(DMatrix::identity(3, 3) * c), BasisTag::W).unwrap();
        let direct = direct_projection(&full, &(&v * c)).unwrap();
        let d = scaled.relative_difference(&direct).unwrap();
        assert!(d.iter().all(|&x| x <= 1e-12), "{d:?}");
        assert!(
            (scaled.k3(1, 0, 2, 2) - t.k3(1, 0, 2, 2) * c.powi(4)).abs() <= 1e-12 * t.k3(1, 0, 2, 2).abs() * c.powi(4)
        );
    }

    #[test]
    fn two_dof_folding() {
        // V = identity on a 2-dof restriction: entries fold as sums of permutations
        let model = arch();
        let full = extract_full_tensors(&model).unwrap();
        let (a, b) = (4, 5);
        let mut v = DMatrix::zeros(model.n_dofs(), 2);
        v[(a, 0)] = 1.0;
        v[(b, 1)] = 1.0;
        let t = direct_projection(&full, &v).unwrap();
        assert!((t.k2(0, 0, 1) - (full.k2(a, a, b) + full.k2(a, b, a))).abs() <= 1e-9 * t.norms()[1]);
        assert!((t.k3(1, 0, 0, 1) - 3.0 * full.k3(b, a, a, b)).abs() <= 1e-9 * t.norms()[2]);
        assert!((t.k1[(0, 1)] - model.linear_stiffness().get(a, b)).abs() <= 1e-12 * t.k1.norm());
    }
}

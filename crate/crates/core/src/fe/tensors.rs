//! Full-order cubic force tensors, extracted element by element from the
//! black-box element force by polynomial-exact divided differences.

use std::collections::HashMap;

use nalgebra::DVector;

use super::{FeModel, Mat6, StructuralModel, Vec6};
use crate::error::Result;
use crate::linalg::SparseMatrix;

/// Cubic expansion of one element's internal force,
/// `f_e(q) = K1 q + K2(q, q) + K3(q, q, q)`, with `K2`/`K3` symmetric in
/// their trailing indices and stored densely (`6³`, `6⁴`, row-major).
#[derive(Debug, Clone)]
pub struct ElementTensors {
    pub dofs: [Option<usize>; 6],
    pub k1: Mat6,
    pub k2: Vec<f64>,
    pub k3: Vec<f64>,
}

impl ElementTensors {
    #[inline]
    pub fn k2(&self, i: usize, a: usize, b: usize) -> f64 {
        self.k2[(i * 6 + a) * 6 + b]
    }

    #[inline]
    pub fn k3(&self, i: usize, a: usize, b: usize, c: usize) -> f64 {
        self.k3[((i * 6 + a) * 6 + b) * 6 + c]
    }

    pub fn force(&self, q: &Vec6) -> Vec6 {
        let mut f = self.k1 * q;
        for i in 0..6 {
            let mut s = 0.0;
            for a in 0..6 {
                for b in 0..6 {
                    let qab = q[a] * q[b];
                    s += self.k2(i, a, b) * qab;
                    for c in 0..6 {
                        s += self.k3(i, a, b, c) * qab * q[c];
                    }
                }
            }
            f[i] += s;
        }
        f
    }
}

#[derive(Debug, Clone)]
pub struct FullTensors {
    n: usize,
    elements: Vec<ElementTensors>,
}

impl FullTensors {
    pub fn n_dofs(&self) -> usize {
        self.n
    }

    pub fn elements(&self) -> &[ElementTensors] {
        &self.elements
    }

    pub fn k1(&self) -> SparseMatrix {
        let mut t = Vec::new();
        for el in &self.elements {
            for (a, da) in el.dofs.iter().enumerate() {
                let Some(da) = da else { continue };
                for (b, db) in el.dofs.iter().enumerate() {
                    if let Some(db) = db {
                        t.push((*da, *db, el.k1[(a, b)]));
                    }
                }
            }
        }
        SparseMatrix::from_triplets(self.n, self.n, t).expect("dofs in range")
    }

    fn local(el: &ElementTensors, global: &[usize]) -> Option<Vec<usize>> {
        global
            .iter()
            .map(|g| el.dofs.iter().position(|d| *d == Some(*g)))
            .collect()
    }

    /// Global `K2[i][j][k]`.
    pub fn k2(&self, i: usize, j: usize, k: usize) -> f64 {
        self.elements
            .iter()
            .filter_map(|el| Self::local(el, &[i, j, k]).map(|l| el.k2(l[0], l[1], l[2])))
            .sum()
    }

    /// Global `K3[i][j][k][l]`.
    pub fn k3(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.elements
            .iter()
            .filter_map(|el| Self::local(el, &[i, j, k, l]).map(|x| el.k3(x[0], x[1], x[2], x[3])))
            .sum()
    }

    /// `K1 q + K2(q, q) + K3(q, q, q)`.
    pub fn force(&self, q: &DVector<f64>) -> DVector<f64> {
        assert_eq!(q.len(), self.n, "tensor force dimension");
        let mut f = DVector::zeros(self.n);
        for el in &self.elements {
            let qe = Vec6::from_fn(|a, _| el.dofs[a].map_or(0.0, |d| q[d]));
            let fe = el.force(&qe);
            for (a, d) in el.dofs.iter().enumerate() {
                if let Some(d) = d {
                    f[*d] += fe[a];
                }
            }
        }
        f
    }
}

/// Extracts `K1`, `K2`, `K3` for every element. Steps are one section
/// thickness-equivalent on translations and that over the element length on
/// rotations, so all probed monomials are of comparable size.
pub fn extract_full_tensors(model: &FeModel) -> Result<FullTensors> {
    let r = model.material().thickness_equivalent();
    let mut elements = Vec::with_capacity(model.n_elements());
    for e in 0..model.n_elements() {
        let el = model.element(e)?;
        let dofs = model.element_dofs(e)?;
        let k1 = model.element_linear_stiffness(e)?;
        let scale: [f64; 6] = std::array::from_fn(|a| if a % 3 == 2 { r / el.length } else { r });

        // force evaluations keyed by integer multiples of the scaled steps
        let mut cache: HashMap<[i8; 6], (Vec6, Vec6)> = HashMap::new();
        let mut parts = |c: [i8; 6]| -> Result<(Vec6, Vec6)> {
            if let Some(v) = cache.get(&c) {
                return Ok(*v);
            }
            let x = Vec6::from_fn(|a, _| c[a] as f64 * scale[a]);
            let fp = model.element_internal_force(e, &x)?;
            let fm = model.element_internal_force(e, &-x)?;
            let even = (fp + fm) * 0.5;
            let cubic = (fp - fm) * 0.5 - k1 * x;
            cache.insert(c, (even, cubic));
            Ok((even, cubic))
        };
        let combo = |idx: &[usize]| {
            let mut c = [0i8; 6];
            for &a in idx {
                c[a] += 1;
            }
            c
        };

        let mut k2 = vec![0.0; 216];
        for a in 0..6 {
            for b in a..6 {
                // K2(x_a, x_b) = [s(x_a + x_b) − s(x_a) − s(x_b)] / 2
                let v = (parts(combo(&[a, b]))?.0 - parts(combo(&[a]))?.0 - parts(combo(&[b]))?.0) * 0.5
                    / (scale[a] * scale[b]);
                for i in 0..6 {
                    k2[(i * 6 + a) * 6 + b] = v[i];
                    k2[(i * 6 + b) * 6 + a] = v[i];
                }
            }
        }

        let mut k3 = vec![0.0; 1296];
        for a in 0..6 {
            for b in a..6 {
                for c in b..6 {
                    let mut cub = |idx: &[usize]| -> Result<Vec6> { Ok(parts(combo(idx))?.1) };
                    let v = (cub(&[a, b, c])? - cub(&[a, b])? - cub(&[a, c])? - cub(&[b, c])?
                        + cub(&[a])?
                        + cub(&[b])?
                        + cub(&[c])?)
                        / (6.0 * scale[a] * scale[b] * scale[c]);
                    for [p, s, t] in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
                        for i in 0..6 {
                            k3[((i * 6 + p) * 6 + s) * 6 + t] = v[i];
                        }
                    }
                }
            }
        }
        elements.push(ElementTensors { dofs, k1, k2, k3 });
    }
    Ok(FullTensors {
        n: model.n_dofs(),
        elements,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe::Material;
    use std::collections::BTreeSet;

    fn material() -> Material {
        Material::rectangular(70e9, 2700.0, 0.25, 2e-3).unwrap()
    }

    fn arch() -> FeModel {
        FeModel::clamped_arch(12, 0.4, 0.006, material()).unwrap()
    }

    fn sample(n: usize, seed: u64, t: f64) -> DVector<f64> {
        let mut s = seed.wrapping_add(0x2545_F491_4F6C_DD1D);
        DVector::from_fn(n, |i, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let r = ((s >> 11) as f64) / ((1u64 << 53) as f64) - 0.5;
            // rotations are displacement over element length scale
            if i % 3 == 2 {
                r * t * 20.0
            } else {
                r * t
            }
        })
    }

    #[test]
    fn reconstructs_internal_force() {
        let model = arch();
        let full = extract_full_tensors(&model).unwrap();
        let t = model.material().thickness_equivalent();
        let mut worst: f64 = 0.0;
        for seed in 0..200 {
            let q = sample(model.n_dofs(), seed, 3.0 * t);
            let f = model.internal_force(&q).unwrap();
            worst = worst.max((full.force(&q) - &f).norm() / f.norm());
        }
        assert!(worst <= 1e-10, "{worst}");
    }

    #[test]
    fn k1_is_linear_stiffness() {
        let model = arch();
        let full = extract_full_tensors(&model).unwrap();
        assert_eq!(full.k1(), model.linear_stiffness());
    }

    #[test]
    fn flat_axial_block_has_no_quadratic_term() {
        let model = FeModel::new(vec![(0.0, 0.0), (0.1, 0.0)], vec![[0, 1]], material(), BTreeSet::new()).unwrap();
        let full = extract_full_tensors(&model).unwrap();
        let scale = full.elements()[0].k3.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for &i in &[0, 3] {
            for &a in &[0, 3] {
                for &b in &[0, 3] {
                    assert!(full.k2(i, a, b).abs() <= 1e-12 * scale);
                }
            }
        }
    }

    #[test]
    fn entries_are_permutation_symmetric() {
        let model = arch();
        let full = extract_full_tensors(&model).unwrap();
        let el = &full.elements()[5];
        let k2max = el.k2.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let k3max = el.k3.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for i in 0..6 {
            for a in 0..6 {
                for b in 0..6 {
                    assert!((el.k2(i, a, b) - el.k2(a, i, b)).abs() <= 1e-12 * k2max);
                    for c in 0..6 {
                        assert!((el.k3(i, a, b, c) - el.k3(b, a, i, c)).abs() <= 1e-12 * k3max);
                        assert!((el.k3(i, a, b, c) - el.k3(c, a, b, i)).abs() <= 1e-12 * k3max);
                    }
                }
            }
        }
    }
}

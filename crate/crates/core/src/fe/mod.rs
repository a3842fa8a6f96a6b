//! Exactly-cubic geometrically nonlinear beam model and its black-box query
//! surface (element forces, element/assembled tangent stiffness, mass).

mod element;
mod tensors;

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

pub use element::{BeamElement, Mat6, Vec6};
pub use tensors::{extract_full_tensors, ElementTensors, FullTensors};

pub const DOFS_PER_NODE: usize = 3;

/// Nodal degree of freedom kinds, in per-node storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dof {
    Axial = 0,
    Transverse = 1,
    Rotation = 2,
}

impl Dof {
    pub fn is_translational(self) -> bool {
        !matches!(self, Dof::Rotation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub youngs_modulus: f64,
    pub density: f64,
    pub area: f64,
    pub second_moment: f64,
}

impl Material {
    pub fn new(youngs_modulus: f64, density: f64, area: f64, second_moment: f64) -> Result<Self> {
        let m = Self {
            youngs_modulus,
            density,
            area,
            second_moment,
        };
        m.validate()?;
        Ok(m)
    }

    /// Rectangular `width × thickness` section.
    pub fn rectangular(youngs_modulus: f64, density: f64, width: f64, thickness: f64) -> Result<Self> {
        Self::new(
            youngs_modulus,
            density,
            width * thickness,
            width * thickness.powi(3) / 12.0,
        )
    }

    fn validate(&self) -> Result<()> {
        let fields = [
            ("youngs_modulus", self.youngs_modulus),
            ("density", self.density),
            ("area", self.area),
            ("second_moment", self.second_moment),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidModel(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Thickness of the rectangular section with the same `I/A`, `√(12 I / A)`.
    pub fn thickness_equivalent(&self) -> f64 {
        (12.0 * self.second_moment / self.area).sqrt()
    }
}

/// Black-box query counters.
#[derive(Debug, Default)]
struct Counters {
    element_evaluations: AtomicUsize,
    tangent_queries: AtomicUsize,
}

/// Snapshot of how often the model was queried.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueryStats {
    /// Element-level force or tangent evaluations.
    pub element_evaluations: usize,
    /// Tangent-stiffness queries at an imposed displacement (assembled or
    /// element-wise over the whole model).
    pub tangent_queries: usize,
}

/// The black-box surface a non-intrusive method is allowed to use.
pub trait StructuralModel {
    /// Number of unconstrained dofs.
    fn n_dofs(&self) -> usize;
    fn n_elements(&self) -> usize;
    /// Identifier of local element `e` in the mesh it was cut from.
    fn element_id(&self, e: usize) -> Result<usize>;
    /// Free-dof index of each local element dof, `None` where constrained.
    fn element_dofs(&self, e: usize) -> Result<[Option<usize>; 6]>;
    fn translational_dofs(&self) -> Vec<bool>;
    fn element_internal_force(&self, e: usize, q_e: &Vec6) -> Result<Vec6>;
    fn element_tangent_stiffness(&self, e: usize, q_e: &Vec6) -> Result<Mat6>;
    fn element_linear_stiffness(&self, e: usize) -> Result<Mat6>;
    /// Element tangent stiffness of every element at the imposed global
    /// displacement `q`; counts as one tangent query.
    fn element_tangents(&self, q: &DVector<f64>) -> Result<Vec<Mat6>>;
    /// Assembled tangent stiffness at `q`; counts as one tangent query.
    fn tangent_stiffness(&self, q: &DVector<f64>) -> Result<SparseMatrix>;
    fn linear_stiffness(&self) -> SparseMatrix;
    /// A model containing only the listed elements (same dof numbering).
    fn restrict(&self, elements: &[usize]) -> Result<Self>
    where
        Self: Sized;
}

#[derive(Debug)]
pub struct FeModel {
    nodes: Vec<(f64, f64)>,
    connectivity: Vec<[usize; 2]>,
    element_ids: Vec<usize>,
    elements: Vec<BeamElement>,
    material: Material,
    constrained: BTreeSet<usize>,
    dof_map: Vec<[Option<usize>; DOFS_PER_NODE]>,
    n_free: usize,
    counters: Counters,
}

impl Clone for FeModel {
    fn clone(&self) -> Self {
        Self {
            nodes: self.nodes.clone(),
            connectivity: self.connectivity.clone(),
            element_ids: self.element_ids.clone(),
            elements: self.elements.clone(),
            material: self.material,
            constrained: self.constrained.clone(),
            dof_map: self.dof_map.clone(),
            n_free: self.n_free,
            counters: Counters::default(),
        }
    }
}

impl FeModel {
    /// `nodes` are `(x, elevation)` pairs; `constrained_dofs` index the full
    /// `3 × n_nodes` dof vector (`3 * node + Dof`).
    pub fn new(
        nodes: Vec<(f64, f64)>,
        connectivity: Vec<[usize; 2]>,
        material: Material,
        constrained_dofs: BTreeSet<usize>,
    ) -> Result<Self> {
        material.validate()?;
        let n_nodes = nodes.len();
        let n_full = n_nodes * DOFS_PER_NODE;
        if let Some(&bad) = constrained_dofs.iter().find(|&&d| d >= n_full) {
            return Err(Error::InvalidModel(format!(
                "constrained dof {bad} outside 0..{n_full}"
            )));
        }
        let mut elements = Vec::with_capacity(connectivity.len());
        for (e, &[a, b]) in connectivity.iter().enumerate() {
            if a >= n_nodes || b >= n_nodes {
                return Err(Error::InvalidModel(format!(
                    "element {e} references node outside 0..{n_nodes}"
                )));
            }
            let (xa, za) = nodes[a];
            let (xb, zb) = nodes[b];
            let length = xb - xa;
            if !(length > 0.0 && length.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "element {e} has non-positive length {length}"
                )));
            }
            elements.push(BeamElement {
                length,
                slope: (zb - za) / length,
                axial_rigidity: material.youngs_modulus * material.area,
                bending_rigidity: material.youngs_modulus * material.second_moment,
            });
        }

        let mut dof_map = vec![[None; DOFS_PER_NODE]; n_nodes];
        let mut n_free = 0;
        for (node, dofs) in dof_map.iter_mut().enumerate() {
            for (k, slot) in dofs.iter_mut().enumerate() {
                if !constrained_dofs.contains(&(node * DOFS_PER_NODE + k)) {
                    *slot = Some(n_free);
                    n_free += 1;
                }
            }
        }
        if n_free == 0 {
            return Err(Error::InvalidModel("no free dofs".into()));
        }

        Ok(Self {
            nodes,
            element_ids: (0..connectivity.len()).collect(),
            connectivity,
            elements,
            material,
            constrained: constrained_dofs,
            dof_map,
            n_free,
            counters: Counters::default(),
        })
    }

    /// Uniformly meshed clamped-clamped arch with parabolic rise `rise`
    /// (zero for a flat beam).
    pub fn clamped_arch(n_elements: usize, span: f64, rise: f64, material: Material) -> Result<Self> {
        if n_elements == 0 {
            return Err(Error::InvalidModel("need at least one element".into()));
        }
        let nodes: Vec<(f64, f64)> = (0..=n_elements)
            .map(|i| {
                let x = span * i as f64 / n_elements as f64;
                (x, 4.0 * rise * x * (span - x) / (span * span))
            })
            .collect();
        let connectivity = (0..n_elements).map(|e| [e, e + 1]).collect();
        let mut constrained = BTreeSet::new();
        for node in [0, n_elements] {
            for k in 0..DOFS_PER_NODE {
                constrained.insert(node * DOFS_PER_NODE + k);
            }
        }
        Self::new(nodes, connectivity, material, constrained)
    }

    pub fn nodes(&self) -> &[(f64, f64)] {
        &self.nodes
    }

    pub fn connectivity(&self) -> &[[usize; 2]] {
        &self.connectivity
    }

    pub fn material(&self) -> &Material {
        &self.material
    }

    pub fn constrained_dofs(&self) -> &BTreeSet<usize> {
        &self.constrained
    }

    pub fn element(&self, e: usize) -> Result<&BeamElement> {
        self.elements
            .get(e)
            .ok_or_else(|| Error::index("element", e, self.elements.len()))
    }

    /// Free-dof index of `dof` at `node`, `None` when constrained.
    pub fn free_dof(&self, node: usize, dof: Dof) -> Option<usize> {
        self.dof_map.get(node).and_then(|d| d[dof as usize])
    }

    pub fn stats(&self) -> QueryStats {
        QueryStats {
            element_evaluations: self.counters.element_evaluations.load(Ordering::Relaxed),
            tangent_queries: self.counters.tangent_queries.load(Ordering::Relaxed),
        }
    }

    pub fn reset_stats(&self) {
        self.counters.element_evaluations.store(0, Ordering::Relaxed);
        self.counters.tangent_queries.store(0, Ordering::Relaxed);
    }

    fn count_elements(&self, n: usize) {
        self.counters.element_evaluations.fetch_add(n, Ordering::Relaxed);
    }

    fn local_dofs(&self, e: usize) -> [Option<usize>; 6] {
        let [a, b] = self.connectivity[e];
        let (da, db) = (self.dof_map[a], self.dof_map[b]);
        [da[0], da[1], da[2], db[0], db[1], db[2]]
    }

    fn check_len(&self, q: &DVector<f64>) -> Result<()> {
        if q.len() != self.n_free {
            return Err(Error::Dimension(format!(
                "displacement has {} entries, model has {} free dofs",
                q.len(),
                self.n_free
            )));
        }
        Ok(())
    }

    /// Restriction of the global free-dof vector `q` to element `e`
    /// (zeros on constrained dofs).
    pub fn gather(&self, e: usize, q: &DVector<f64>) -> Vec6 {
        let dofs = self.local_dofs(e);
        Vec6::from_fn(|i, _| dofs[i].map_or(0.0, |d| q[d]))
    }

    fn scatter_vec(&self, e: usize, fe: &Vec6, out: &mut DVector<f64>) {
        for (i, d) in self.local_dofs(e).iter().enumerate() {
            if let Some(d) = d {
                out[*d] += fe[i];
            }
        }
    }

    fn scatter_mat(&self, e: usize, ke: &Mat6, triplets: &mut Vec<(usize, usize, f64)>) {
        let dofs = self.local_dofs(e);
        for (i, di) in dofs.iter().enumerate() {
            let Some(di) = di else { continue };
            for (j, dj) in dofs.iter().enumerate() {
                if let Some(dj) = dj {
                    triplets.push((*di, *dj, ke[(i, j)]));
                }
            }
        }
    }

    /// Global internal force and assembled tangent stiffness.
    pub fn assemble(&self, q: &DVector<f64>) -> Result<(DVector<f64>, SparseMatrix)> {
        self.check_len(q)?;
        let mut f = DVector::zeros(self.n_free);
        let mut triplets = Vec::with_capacity(self.elements.len() * 36);
        for (e, el) in self.elements.iter().enumerate() {
            let qe = self.gather(e, q);
            self.scatter_vec(e, &el.internal_force(&qe), &mut f);
            self.scatter_mat(e, &el.tangent_stiffness(&qe), &mut triplets);
        }
        self.count_elements(2 * self.elements.len());
        Ok((f, SparseMatrix::from_triplets(self.n_free, self.n_free, triplets)?))
    }

    pub fn internal_force(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(q)?;
        let mut f = DVector::zeros(self.n_free);
        for (e, el) in self.elements.iter().enumerate() {
            self.scatter_vec(e, &el.internal_force(&self.gather(e, q)), &mut f);
        }
        self.count_elements(self.elements.len());
        Ok(f)
    }

    pub fn strain_energy(&self, q: &DVector<f64>) -> Result<f64> {
        self.check_len(q)?;
        Ok(self
            .elements
            .iter()
            .enumerate()
            .map(|(e, el)| el.strain_energy(&self.gather(e, q)))
            .sum())
    }

    /// Consistent mass on the free dofs.
    pub fn assemble_mass(&self) -> SparseMatrix {
        let rho_a = self.material.density * self.material.area;
        let mut triplets = Vec::with_capacity(self.elements.len() * 36);
        for (e, el) in self.elements.iter().enumerate() {
            self.scatter_mat(e, &el.consistent_mass(rho_a), &mut triplets);
        }
        SparseMatrix::from_triplets(self.n_free, self.n_free, triplets).expect("dofs in range")
    }

    /// Consistent nodal load of a uniform transverse line load with unit
    /// intensity along `+w`.
    pub fn unit_transverse_load(&self) -> DVector<f64> {
        let mut p = DVector::zeros(self.n_free);
        for (e, el) in self.elements.iter().enumerate() {
            self.scatter_vec(e, &el.unit_transverse_load(), &mut p);
        }
        p
    }
}

impl StructuralModel for FeModel {
    fn n_dofs(&self) -> usize {
        self.n_free
    }

    fn n_elements(&self) -> usize {
        self.elements.len()
    }

    fn element_id(&self, e: usize) -> Result<usize> {
        self.element_ids
            .get(e)
            .copied()
            .ok_or_else(|| Error::index("element", e, self.elements.len()))
    }

    fn element_dofs(&self, e: usize) -> Result<[Option<usize>; 6]> {
        self.element(e)?;
        Ok(self.local_dofs(e))
    }

    fn translational_dofs(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n_free];
        for dofs in &self.dof_map {
            for (k, d) in dofs.iter().enumerate() {
                if let Some(d) = d {
                    mask[*d] = k != Dof::Rotation as usize;
                }
            }
        }
        mask
    }

    fn element_internal_force(&self, e: usize, q_e: &Vec6) -> Result<Vec6> {
        let el = self.element(e)?;
        self.count_elements(1);
        Ok(el.internal_force(q_e))
    }

    fn element_tangent_stiffness(&self, e: usize, q_e: &Vec6) -> Result<Mat6> {
        let el = self.element(e)?;
        self.count_elements(1);
        Ok(el.tangent_stiffness(q_e))
    }

    fn element_linear_stiffness(&self, e: usize) -> Result<Mat6> {
        Ok(self.element(e)?.linear_stiffness())
    }

    fn element_tangents(&self, q: &DVector<f64>) -> Result<Vec<Mat6>> {
        self.check_len(q)?;
        self.counters.tangent_queries.fetch_add(1, Ordering::Relaxed);
        self.count_elements(self.elements.len());
        Ok(self
            .elements
            .iter()
            .enumerate()
            .map(|(e, el)| el.tangent_stiffness(&self.gather(e, q)))
            .collect())
    }

    fn tangent_stiffness(&self, q: &DVector<f64>) -> Result<SparseMatrix> {
        self.check_len(q)?;
        self.counters.tangent_queries.fetch_add(1, Ordering::Relaxed);
        let mut triplets = Vec::with_capacity(self.elements.len() * 36);
        for (e, el) in self.elements.iter().enumerate() {
            self.scatter_mat(e, &el.tangent_stiffness(&self.gather(e, q)), &mut triplets);
        }
        self.count_elements(self.elements.len());
        SparseMatrix::from_triplets(self.n_free, self.n_free, triplets)
    }

    fn linear_stiffness(&self) -> SparseMatrix {
        let mut triplets = Vec::with_capacity(self.elements.len() * 36);
        for (e, el) in self.elements.iter().enumerate() {
            self.scatter_mat(e, &el.linear_stiffness(), &mut triplets);
        }
        SparseMatrix::from_triplets(self.n_free, self.n_free, triplets).expect("dofs in range")
    }

    fn restrict(&self, elements: &[usize]) -> Result<Self> {
        let mut out = self.clone();
        out.element_ids.clear();
        out.elements.clear();
        out.connectivity.clear();
        for &e in elements {
            let el = *self.element(e)?;
            out.element_ids.push(self.element_ids[e]);
            out.elements.push(el);
            out.connectivity.push(self.connectivity[e]);
        }
        Ok(out)
    }
}

//! Two-node von Kármán shallow-arch beam.
//!
//! Local dofs are `[u1, w1, θ1, u2, w2, θ2]` with linear axial and cubic
//! Hermite transverse interpolation. The membrane strain is
//! `ε = u' + ½ w'² + w0' w'` where `w0'` is the (constant) slope of the chord
//! between the two nodal elevations, so forces are exactly cubic in the dofs.

use nalgebra::{SMatrix, SVector};

pub type Vec6 = SVector<f64, 6>;
pub type Mat6 = SMatrix<f64, 6, 6>;

/// 5-point Gauss–Legendre rule on `[0, 1]`; exact through degree 9.
const GAUSS_POINTS: [f64; 5] = [
    0.046_910_077_030_668_004,
    0.230_765_344_947_158_45,
    0.5,
    0.769_234_655_052_841_6,
    0.953_089_922_969_332,
];
const GAUSS_WEIGHTS: [f64; 5] = [
    0.118_463_442_528_094_54,
    0.239_314_335_249_683_23,
    0.284_444_444_444_444_44,
    0.239_314_335_249_683_23,
    0.118_463_442_528_094_54,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamElement {
    pub length: f64,
    /// Chord slope of the stress-free geometry, `w0'`.
    pub slope: f64,
    pub axial_rigidity: f64,
    pub bending_rigidity: f64,
}

/// Strain-displacement rows at one integration point.
struct PointOperators {
    /// linear membrane row: `u' + w0' w'`
    membrane: Vec6,
    /// slope row: `w'`
    slope: Vec6,
    /// curvature row: `w''`
    curvature: Vec6,
    /// quadrature weight times length
    weight: f64,
}

impl BeamElement {
    fn points(&self) -> impl Iterator<Item = PointOperators> + '_ {
        let l = self.length;
        GAUSS_POINTS.iter().zip(GAUSS_WEIGHTS.iter()).map(move |(&xi, &wgt)| {
            let du = Vec6::new(-1.0 / l, 0.0, 0.0, 1.0 / l, 0.0, 0.0);
            let slope = Vec6::new(
                0.0,
                (-6.0 * xi + 6.0 * xi * xi) / l,
                1.0 - 4.0 * xi + 3.0 * xi * xi,
                0.0,
                (6.0 * xi - 6.0 * xi * xi) / l,
                -2.0 * xi + 3.0 * xi * xi,
            );
            let curvature = Vec6::new(
                0.0,
                (-6.0 + 12.0 * xi) / (l * l),
                (-4.0 + 6.0 * xi) / l,
                0.0,
                (6.0 - 12.0 * xi) / (l * l),
                (-2.0 + 6.0 * xi) / l,
            );
            PointOperators {
                membrane: du + slope * self.slope,
                slope,
                curvature,
                weight: wgt * l,
            }
        })
    }

    pub fn strain_energy(&self, q: &Vec6) -> f64 {
        self.points()
            .map(|p| {
                let g = p.slope.dot(q);
                let eps = p.membrane.dot(q) + 0.5 * g * g;
                let kappa = p.curvature.dot(q);
                p.weight * 0.5 * (self.axial_rigidity * eps * eps + self.bending_rigidity * kappa * kappa)
            })
            .sum()
    }

    pub fn internal_force(&self, q: &Vec6) -> Vec6 {
        let mut f = Vec6::zeros();
        for p in self.points() {
            let g = p.slope.dot(q);
            let eps = p.membrane.dot(q) + 0.5 * g * g;
            let kappa = p.curvature.dot(q);
            let b = p.membrane + p.slope * g;
            f += b * (p.weight * self.axial_rigidity * eps) + p.curvature * (p.weight * self.bending_rigidity * kappa);
        }
        f
    }

    pub fn tangent_stiffness(&self, q: &Vec6) -> Mat6 {
        let mut k = Mat6::zeros();
        for p in self.points() {
            let g = p.slope.dot(q);
            let eps = p.membrane.dot(q) + 0.5 * g * g;
            let b = p.membrane + p.slope * g;
            let ea = p.weight * self.axial_rigidity;
            k += b * b.transpose() * ea
                + p.slope * p.slope.transpose() * (ea * eps)
                + p.curvature * p.curvature.transpose() * (p.weight * self.bending_rigidity);
        }
        k
    }

    pub fn linear_stiffness(&self) -> Mat6 {
        self.tangent_stiffness(&Vec6::zeros())
    }

    /// Consistent mass: linear axial and cubic Hermite transverse shape
    /// functions, no rotary inertia.
    pub fn consistent_mass(&self, mass_per_length: f64) -> Mat6 {
        let l = self.length;
        let mut m = Mat6::zeros();
        let axial = mass_per_length * l / 6.0;
        m[(0, 0)] = 2.0 * axial;
        m[(3, 3)] = 2.0 * axial;
        m[(0, 3)] = axial;
        m[(3, 0)] = axial;

        let c = mass_per_length * l / 420.0;
        let idx = [1, 2, 4, 5];
        let hermite = [
            [156.0, 22.0 * l, 54.0, -13.0 * l],
            [22.0 * l, 4.0 * l * l, 13.0 * l, -3.0 * l * l],
            [54.0, 13.0 * l, 156.0, -22.0 * l],
            [-13.0 * l, -3.0 * l * l, -22.0 * l, 4.0 * l * l],
        ];
        for (a, &ia) in idx.iter().enumerate() {
            for (b, &ib) in idx.iter().enumerate() {
                m[(ia, ib)] = c * hermite[a][b];
            }
        }
        m
    }

    /// Consistent nodal load for a uniform transverse line load of unit
    /// intensity acting along `+w`.
    pub fn unit_transverse_load(&self) -> Vec6 {
        let l = self.length;
        Vec6::new(0.0, l / 2.0, l * l / 12.0, 0.0, l / 2.0, -l * l / 12.0)
    }
}

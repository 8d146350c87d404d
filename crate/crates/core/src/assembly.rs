//! Finite-element assembly of the discrete operators on P1 elements.
//!
//! All nonlinear and product terms are evaluated at quadrature points from
//! the P1 interpolants of the nodal fields. Element contributions are
//! accumulated in ascending element order, so assembled values are
//! bit-reproducible.

use std::ops::{Deref, DerefMut};
use std::sync::{Arc, OnceLock};

use crate::eos::BarotropicEos;
use crate::error::{Error, Result};
use crate::linsolve;
use crate::mesh::{ElementGeometry, StructuredTriMesh};
use crate::quadrature::QuadratureRule;
use crate::sparse::{Pattern, SparseMatrix};

/// One scalar per mesh node.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodalField(Vec<f64>);

impl NodalField {
    pub fn zeros(n: usize) -> Self {
        NodalField(vec![0.0; n])
    }

    pub fn constant(n: usize, value: f64) -> Self {
        NodalField(vec![value; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl From<Vec<f64>> for NodalField {
    fn from(v: Vec<f64>) -> Self {
        NodalField(v)
    }
}

impl Deref for NodalField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for NodalField {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Value of a P1 function at barycentric point `l` from its vertex values.
///
/// Anchoring at the first vertex reproduces constant fields exactly.
#[inline]
pub fn p1_value(v: [f64; 3], l: &[f64; 3]) -> f64 {
    v[0] + l[1] * (v[1] - v[0]) + l[2] * (v[2] - v[0])
}

/// Constant gradient of a P1 function on one element.
#[inline]
pub fn p1_gradient(v: [f64; 3], g: &ElementGeometry) -> [f64; 2] {
    let (d1, d2) = (v[1] - v[0], v[2] - v[0]);
    [
        d1 * g.grads[1][0] + d2 * g.grads[2][0],
        d1 * g.grads[1][1] + d2 * g.grads[2][1],
    ]
}

#[inline]
pub(crate) fn gather(field: &[f64], tri: &[usize; 3]) -> [f64; 3] {
    [field[tri[0]], field[tri[1]], field[tri[2]]]
}

/// P1 space on a structured mesh together with its quadrature rule.
#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: StructuredTriMesh,
    pattern: Arc<Pattern>,
    coupled_pattern: OnceLock<Arc<Pattern>>,
    rule: QuadratureRule,
    /// `\int psi_i dx`, the row sums of the consistent mass matrix.
    basis_integrals: Vec<f64>,
}

impl FeSpace {
    pub fn new(mesh: StructuredTriMesh) -> Self {
        Self::with_rule(mesh, QuadratureRule::default())
    }

    pub fn with_rule(mesh: StructuredTriMesh, rule: QuadratureRule) -> Self {
        let pattern = Arc::new(Pattern::for_mesh(&mesh));
        let mut basis_integrals = vec![0.0; mesh.num_nodes()];
        for (tri, g) in mesh.elements().iter().zip(mesh.geometries()) {
            for &i in tri {
                basis_integrals[i] += g.area / 3.0;
            }
        }
        FeSpace {
            mesh,
            pattern,
            coupled_pattern: OnceLock::new(),
            rule,
            basis_integrals,
        }
    }

    pub fn mesh(&self) -> &StructuredTriMesh {
        &self.mesh
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    /// Pattern of the 3x3 block system over density and both velocity
    /// components, stacked in that order.
    pub fn coupled_pattern(&self) -> &Arc<Pattern> {
        self.coupled_pattern
            .get_or_init(|| Arc::new(self.pattern.blocked(3)))
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn num_nodes(&self) -> usize {
        self.mesh.num_nodes()
    }

    pub fn basis_integrals(&self) -> &[f64] {
        &self.basis_integrals
    }

    fn check_len(&self, what: &'static str, v: &[f64]) -> Result<()> {
        if v.len() != self.num_nodes() {
            return Err(Error::LengthMismatch {
                what,
                got: v.len(),
                expected: self.num_nodes(),
            });
        }
        Ok(())
    }

    /// Consistent mass matrix `\int phi_j psi_i dx`.
    pub fn assemble_mass(&self) -> SparseMatrix {
        self.mass_kernel(None)
    }

    /// `\int w phi_j psi_i dx` with `w` interpolated at quadrature points.
    pub fn assemble_weighted_mass(&self, w: &[f64]) -> Result<SparseMatrix> {
        self.check_len("weight", w)?;
        let wmin = w.iter().copied().fold(f64::INFINITY, f64::min);
        if wmin <= 0.0 {
            log::warn!("weighted mass: minimum nodal weight {wmin:e} is not positive");
        }
        Ok(self.mass_kernel(Some(w)))
    }

    fn mass_kernel(&self, w: Option<&[f64]>) -> SparseMatrix {
        let mut k = SparseMatrix::zeros(self.pattern.clone());
        for (tri, g) in self.mesh.elements().iter().zip(self.mesh.geometries()) {
            let wl = w.map(|w| gather(w, tri));
            let mut local = [[0.0; 3]; 3];
            for (l, wq) in self.rule.iter() {
                let weight = g.area * wq * wl.map_or(1.0, |v| p1_value(v, l));
                for a in 0..3 {
                    for b in a..3 {
                        local[a][b] += weight * l[a] * l[b];
                    }
                }
            }
            for a in 1..3 {
                for b in 0..a {
                    local[a][b] = local[b][a];
                }
            }
            scatter(&mut k, tri, &local);
        }
        k
    }

    /// Divergent-form advection `\int div(u phi_j) psi_i dx`.
    pub fn assemble_advection(&self, u: [&[f64]; 2]) -> Result<SparseMatrix> {
        self.check_len("velocity x", u[0])?;
        self.check_len("velocity y", u[1])?;
        Ok(self.advection_kernel(u, None))
    }

    /// `\int div(u w phi_j) psi_i dx`: advection of the product of the
    /// weight `w` and the unknown.
    pub fn assemble_weighted_advection(&self, u: [&[f64]; 2], w: &[f64]) -> Result<SparseMatrix> {
        self.check_len("velocity x", u[0])?;
        self.check_len("velocity y", u[1])?;
        self.check_len("weight", w)?;
        Ok(self.advection_kernel(u, Some(w)))
    }

    fn advection_kernel(&self, u: [&[f64]; 2], w: Option<&[f64]>) -> SparseMatrix {
        let mut k = SparseMatrix::zeros(self.pattern.clone());
        for (tri, g) in self.mesh.elements().iter().zip(self.mesh.geometries()) {
            let ux = gather(u[0], tri);
            let uy = gather(u[1], tri);
            let div_u = p1_gradient(ux, g)[0] + p1_gradient(uy, g)[1];
            let wl = w.map(|w| gather(w, tri));
            let grad_w = wl.map_or([0.0, 0.0], |v| p1_gradient(v, g));
            let mut local = [[0.0; 3]; 3];
            for (l, wq) in self.rule.iter() {
                let uq = [p1_value(ux, l), p1_value(uy, l)];
                let wv = wl.map_or(1.0, |v| p1_value(v, l));
                // div(u w phi_j) = (u.grad w + w div u) phi_j + w u.grad phi_j
                let coef = uq[0] * grad_w[0] + uq[1] * grad_w[1] + wv * div_u;
                let s = g.area * wq;
                for b in 0..3 {
                    let col = coef * l[b] + wv * (uq[0] * g.grads[b][0] + uq[1] * g.grads[b][1]);
                    for a in 0..3 {
                        local[a][b] += s * col * l[a];
                    }
                }
            }
            scatter(&mut k, tri, &local);
        }
        k
    }

    /// Load vectors `\int p'(rho) d(rho)/dx_c psi_i dx` for `c = 0, 1`.
    pub fn assemble_pressure_gradient(
        &self,
        rho: &[f64],
        eos: &BarotropicEos,
    ) -> Result<[NodalField; 2]> {
        self.check_len("density", rho)?;
        let n = self.num_nodes();
        let mut gx = NodalField::zeros(n);
        let mut gy = NodalField::zeros(n);
        for (e, (tri, g)) in self
            .mesh
            .elements()
            .iter()
            .zip(self.mesh.geometries())
            .enumerate()
        {
            let rl = gather(rho, tri);
            let grad = p1_gradient(rl, g);
            let mut local = [[0.0; 2]; 3];
            for (q, (l, wq)) in self.rule.iter().enumerate() {
                let (dp, _) = eos
                    .pressure_derivatives(p1_value(rl, l))
                    .map_err(|err| err.at_quadrature_point(e, q))?;
                let s = g.area * wq * dp;
                for a in 0..3 {
                    local[a][0] += s * grad[0] * l[a];
                    local[a][1] += s * grad[1] * l[a];
                }
            }
            for a in 0..3 {
                gx[tri[a]] += local[a][0];
                gy[tri[a]] += local[a][1];
            }
        }
        Ok([gx, gy])
    }

    /// `rhs_i = \int f psi_i dx` by quadrature.
    pub fn load_vector(&self, f: impl Fn([f64; 2]) -> f64) -> NodalField {
        let mut rhs = NodalField::zeros(self.num_nodes());
        for (tri, g) in self.mesh.elements().iter().zip(self.mesh.geometries()) {
            let p = tri.map(|i| self.mesh.node(i));
            for (l, wq) in self.rule.iter() {
                let x = [
                    l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
                    l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
                ];
                let fq = g.area * wq * f(x);
                for a in 0..3 {
                    rhs[tri[a]] += fq * l[a];
                }
            }
        }
        rhs
    }

    /// L2 projection of a pointwise-evaluable function onto the P1 space.
    pub fn l2_project(&self, f: impl Fn([f64; 2]) -> f64) -> Result<NodalField> {
        let rhs = self.load_vector(f);
        if let Some(i) = rhs.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "projected function is not finite near node {i}"
            )));
        }
        let (x, _) = linsolve::solve(&self.assemble_mass(), &rhs)?;
        Ok(x.into())
    }

    /// Quadrature sum of `f(element, barycentric point)` over the domain.
    pub fn integrate<F>(&self, mut f: F) -> Result<f64>
    where
        F: FnMut(usize, usize, &[f64; 3]) -> Result<f64>,
    {
        let mut total = 0.0;
        for (e, g) in self.mesh.geometries().iter().enumerate() {
            let mut local = 0.0;
            for (q, (l, wq)) in self.rule.iter().enumerate() {
                local += wq * f(e, q, l)?;
            }
            total += g.area * local;
        }
        Ok(total)
    }
}

#[inline]
fn scatter(k: &mut SparseMatrix, tri: &[usize; 3], local: &[[f64; 3]; 3]) {
    for a in 0..3 {
        for b in 0..3 {
            k.add(tri[a], tri[b], local[a][b]);
        }
    }
}

//! Newton's method for the fully implicit (backward Euler) step.
//!
//! Unknowns are stacked as `[rho, u1, u2]`, one block of nodal values each.
//! The residual is evaluated element by element at quadrature points; the
//! Jacobian is its exact derivative with respect to the nodal unknowns.
//! Rows of wall-normal velocity components are replaced by the constraint
//! `u_c = 0`.

use crate::assembly::{gather, p1_gradient, p1_value, FeSpace};
use crate::eos::BarotropicEos;
use crate::error::{Error, Result};
use crate::linsolve::{self, norm, SymbolicCache};
use crate::schemes::State;
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Stopping threshold on the relative error.
    pub tol: f64,
    pub max_iter: usize,
    /// Abort when the residual exceeds this multiple of the initial one.
    pub divergence_factor: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol: 1e-12,
            max_iter: 10,
            divergence_factor: 1e6,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!("newton.tol = {} must be positive", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("newton.max_iter must be at least 1".into()));
        }
        if !(self.divergence_factor > 1.0) {
            return Err(Error::InvalidConfig("divergence factor must exceed 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonIteration {
    /// `|R(x_k)| / |R(x_0)|`.
    pub relative_error: f64,
    /// `|x_k - x_{k-1}| / |x_k|` over the stacked unknowns.
    pub relative_increment: f64,
    /// `|R(x_k)|`.
    pub residual_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NewtonHistory {
    pub initial_residual_norm: f64,
    pub iterations: Vec<NewtonIteration>,
}

impl NewtonHistory {
    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    pub fn final_residual_norm(&self) -> f64 {
        self.iterations
            .last()
            .map_or(self.initial_residual_norm, |it| it.residual_norm)
    }
}

/// Nonlinear system of one backward Euler step from `old`.
pub struct ImplicitStep<'a> {
    space: &'a FeSpace,
    eos: &'a BarotropicEos,
    old: &'a State,
    tau: f64,
}

/// Per-quadrature-point values shared by the residual and the Jacobian.
struct PointValues {
    rho: f64,
    rho_old: f64,
    u: [f64; 2],
    u_old: [f64; 2],
}

struct ElementValues {
    tri: [usize; 3],
    rho: [f64; 3],
    rho_old: [f64; 3],
    u: [[f64; 3]; 2],
    u_old: [[f64; 3]; 2],
    grad_rho: [f64; 2],
    /// `grad_u[c]` is the gradient of component `c`.
    grad_u: [[f64; 2]; 2],
    div_u: f64,
}

impl ElementValues {
    fn at(&self, l: &[f64; 3]) -> PointValues {
        PointValues {
            rho: p1_value(self.rho, l),
            rho_old: p1_value(self.rho_old, l),
            u: [p1_value(self.u[0], l), p1_value(self.u[1], l)],
            u_old: [p1_value(self.u_old[0], l), p1_value(self.u_old[1], l)],
        }
    }
}

impl<'a> ImplicitStep<'a> {
    pub fn new(space: &'a FeSpace, eos: &'a BarotropicEos, old: &'a State, tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::InvalidConfig(format!("time step {tau} must be positive")));
        }
        old.check_len(space.num_nodes())?;
        Ok(ImplicitStep { space, eos, old, tau })
    }

    fn element(&self, e: usize, x: &State) -> ElementValues {
        let mesh = self.space.mesh();
        let tri = mesh.element(e);
        let g = &mesh.geometries()[e];
        let rho = gather(&x.rho, &tri);
        let u = [gather(&x.u[0], &tri), gather(&x.u[1], &tri)];
        let grad_u = [p1_gradient(u[0], g), p1_gradient(u[1], g)];
        ElementValues {
            tri,
            rho,
            rho_old: gather(&self.old.rho, &tri),
            u,
            u_old: [gather(&self.old.u[0], &tri), gather(&self.old.u[1], &tri)],
            grad_rho: p1_gradient(rho, g),
            grad_u,
            div_u: grad_u[0][0] + grad_u[1][1],
        }
    }

    fn pressure_derivatives(&self, rho: f64, e: usize, q: usize) -> Result<(f64, f64)> {
        self.eos
            .pressure_derivatives(rho)
            .map_err(|err| err.at_quadrature_point(e, q))
    }

    /// Stacked residual `[R_rho, R_u1, R_u2]` at the candidate state `x`.
    pub fn residual(&self, x: &State) -> Result<Vec<f64>> {
        let n = self.space.num_nodes();
        x.check_len(n)?;
        let inv_tau = 1.0 / self.tau;
        let mut r = vec![0.0; 3 * n];
        let geometries = self.space.mesh().geometries();
        for (e, g) in geometries.iter().enumerate() {
            let ev = self.element(e, x);
            let gr = ev.grad_rho;
            let mut local = [[0.0; 3]; 3];
            for (q, (l, wq)) in self.space.rule().iter().enumerate() {
                let pv = ev.at(l);
                let (dp, _) = self.pressure_derivatives(pv.rho, e, q)?;
                let u_grad_rho = pv.u[0] * gr[0] + pv.u[1] * gr[1];
                let mut f = [0.0; 3];
                f[0] = (pv.rho - pv.rho_old) * inv_tau + u_grad_rho + pv.rho * ev.div_u;
                for c in 0..2 {
                    let u_grad_uc = pv.u[0] * ev.grad_u[c][0] + pv.u[1] * ev.grad_u[c][1];
                    f[c + 1] = (pv.rho * pv.u[c] - pv.rho_old * pv.u_old[c]) * inv_tau
                        + pv.rho * pv.u[c] * ev.div_u
                        + pv.u[c] * u_grad_rho
                        + pv.rho * u_grad_uc
                        + dp * gr[c];
                }
                let s = g.area * wq;
                for (lv, fv) in local.iter_mut().zip(f) {
                    for a in 0..3 {
                        lv[a] += s * fv * l[a];
                    }
                }
            }
            for (v, lv) in local.iter().enumerate() {
                for a in 0..3 {
                    r[v * n + ev.tri[a]] += lv[a];
                }
            }
        }
        let mesh = self.space.mesh();
        for c in 0..2 {
            for (i, &pinned) in mesh.normal_velocity_mask(c).iter().enumerate() {
                if pinned {
                    r[(c + 1) * n + i] = x.u[c][i];
                }
            }
        }
        Ok(r)
    }

    /// Exact Jacobian of [`Self::residual`] at `x`.
    pub fn jacobian(&self, x: &State) -> Result<SparseMatrix> {
        let n = self.space.num_nodes();
        x.check_len(n)?;
        let inv_tau = 1.0 / self.tau;
        let mut jac = SparseMatrix::zeros(self.space.coupled_pattern().clone());
        let geometries = self.space.mesh().geometries();
        for (e, g) in geometries.iter().enumerate() {
            let ev = self.element(e, x);
            let gr = ev.grad_rho;
            // local[v][a][w][b] = d(row v, test a) / d(unknown w, node b)
            let mut local = [[[[0.0; 3]; 3]; 3]; 3];
            for (q, (l, wq)) in self.space.rule().iter().enumerate() {
                let pv = ev.at(l);
                let (dp, d2p) = self.pressure_derivatives(pv.rho, e, q)?;
                let u = pv.u;
                let u_grad_rho = u[0] * gr[0] + u[1] * gr[1];
                let u_grad_uc = [
                    u[0] * ev.grad_u[0][0] + u[1] * ev.grad_u[0][1],
                    u[0] * ev.grad_u[1][0] + u[1] * ev.grad_u[1][1],
                ];
                let s = g.area * wq;
                for b in 0..3 {
                    let lb = l[b];
                    let gb = g.grads[b];
                    let u_gb = u[0] * gb[0] + u[1] * gb[1];
                    let mut d = [[0.0; 3]; 3];
                    // continuity row
                    d[0][0] = lb * inv_tau + u_gb + lb * ev.div_u;
                    d[0][1] = lb * gr[0] + pv.rho * gb[0];
                    d[0][2] = lb * gr[1] + pv.rho * gb[1];
                    // momentum rows
                    for c in 0..2 {
                        let uc = u[c];
                        d[c + 1][0] = lb * uc * inv_tau
                            + lb * uc * ev.div_u
                            + uc * u_gb
                            + lb * u_grad_uc[c]
                            + d2p * lb * gr[c]
                            + dp * gb[c];
                        for dd in 0..2 {
                            let mut v = pv.rho * uc * gb[dd]
                                + uc * lb * gr[dd]
                                + lb * pv.rho * ev.grad_u[c][dd];
                            if dd == c {
                                v += pv.rho * lb * inv_tau
                                    + pv.rho * lb * ev.div_u
                                    + lb * u_grad_rho
                                    + pv.rho * u_gb;
                            }
                            d[c + 1][dd + 1] = v;
                        }
                    }
                    for a in 0..3 {
                        let sa = s * l[a];
                        for v in 0..3 {
                            for w in 0..3 {
                                local[v][a][w][b] += sa * d[v][w];
                            }
                        }
                    }
                }
            }
            for v in 0..3 {
                for a in 0..3 {
                    let row = v * n + ev.tri[a];
                    for w in 0..3 {
                        for b in 0..3 {
                            jac.add(row, w * n + ev.tri[b], local[v][a][w][b]);
                        }
                    }
                }
            }
        }
        let mesh = self.space.mesh();
        for c in 0..2 {
            jac.set_identity_rows(mesh.normal_velocity_mask(c), (c + 1) * n);
        }
        Ok(jac)
    }
}

/// Advance `old` by one backward Euler step of length `tau`.
///
/// The iteration starts from `old` and stops once the residual has dropped
/// by `config.tol` relative to its initial value, or the Newton increment
/// has fallen below `config.tol` relative to the iterate.
pub fn newton_solve(
    space: &FeSpace,
    eos: &BarotropicEos,
    old: &State,
    tau: f64,
    config: &NewtonConfig,
) -> Result<(State, NewtonHistory)> {
    newton_solve_cached(space, eos, old, tau, config, &SymbolicCache::new())
}

/// [`newton_solve`] sharing symbolic factorizations through `cache`.
pub fn newton_solve_cached(
    space: &FeSpace,
    eos: &BarotropicEos,
    old: &State,
    tau: f64,
    config: &NewtonConfig,
    cache: &SymbolicCache,
) -> Result<(State, NewtonHistory)> {
    config.validate()?;
    let system = ImplicitStep::new(space, eos, old, tau)?;
    let n = space.num_nodes();
    let mut x = old.clone();
    x.t = old.t + tau;

    let mut r = system.residual(&x)?;
    let r0 = norm(&r);
    let mut history = NewtonHistory {
        initial_residual_norm: r0,
        iterations: Vec::new(),
    };
    // Scale of the accumulation term, used to recognise an initial guess
    // that already solves the step.
    let scale = norm(&space.assemble_mass().matvec(&old.rho)) / tau;
    if r0 <= config.tol * scale {
        return Ok((x, history));
    }

    let limit = config.divergence_factor * r0;
    for k in 1..=config.max_iter {
        let jac = system.jacobian(&x)?;
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let (delta, _) = linsolve::solve_cached(&jac, &rhs, cache)?;
        let mut stacked = x.stacked();
        for (xi, di) in stacked.iter_mut().zip(&delta) {
            *xi += di;
        }
        x.set_stacked(&stacked, n);
        // Constraint rows read u_c = 0; pin them exactly instead of keeping
        // the round-off left by the factorization.
        for c in 0..2 {
            for (v, &fixed) in x.u[c].iter_mut().zip(space.mesh().normal_velocity_mask(c)) {
                if fixed {
                    *v = 0.0;
                }
            }
        }

        r = system.residual(&x)?;
        let rn = norm(&r);
        let it = NewtonIteration {
            relative_error: rn / r0,
            relative_increment: norm(&delta) / norm(&stacked),
            residual_norm: rn,
        };
        history.iterations.push(it);
        if !rn.is_finite() || rn > limit {
            return Err(Error::NewtonDiverged {
                iteration: k,
                residual: rn,
                limit,
            });
        }
        if it.relative_error <= config.tol || it.relative_increment <= config.tol {
            return Ok((x, history));
        }
    }
    Err(Error::NewtonNotConverged {
        iterations: config.max_iter,
        last: history.iterations.last().map_or(f64::NAN, |it| it.relative_error),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::NodalField;
    use crate::mesh::{Rect, StructuredTriMesh};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn space(m: usize) -> FeSpace {
        FeSpace::new(StructuredTriMesh::new(Rect::new(-5.0, 5.0, -5.0, 5.0), m).unwrap())
    }

    fn random_state(sp: &FeSpace, rng: &mut ChaCha8Rng) -> State {
        let n = sp.num_nodes();
        let rho: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let mut u = [NodalField::zeros(n), NodalField::zeros(n)];
        for c in 0..2 {
            for i in 0..n {
                if !sp.mesh().normal_velocity_mask(c)[i] {
                    u[c][i] = rng.gen_range(-0.5..0.5);
                }
            }
        }
        State {
            rho: rho.into(),
            u,
            t: 0.0,
        }
    }

    /// Residual rebuilt from the assembled operators of the assembly module.
    fn residual_from_operators(
        sp: &FeSpace,
        eos: &BarotropicEos,
        old: &State,
        new: &State,
        tau: f64,
    ) -> Vec<f64> {
        let n = sp.num_nodes();
        let u = [&new.u[0][..], &new.u[1][..]];
        let mass = sp.assemble_mass();
        let adv = sp.assemble_advection(u).unwrap();
        let wm_new = sp.assemble_weighted_mass(&new.rho).unwrap();
        let wm_old = sp.assemble_weighted_mass(&old.rho).unwrap();
        let wadv = sp.assemble_weighted_advection(u, &new.rho).unwrap();
        let grad_p = sp.assemble_pressure_gradient(&new.rho, eos).unwrap();
        let mut r = vec![0.0; 3 * n];
        let drho: Vec<f64> = new.rho.iter().zip(old.rho.iter()).map(|(a, b)| a - b).collect();
        let m_drho = mass.matvec(&drho);
        let a_rho = adv.matvec(&new.rho);
        for i in 0..n {
            r[i] = m_drho[i] / tau + a_rho[i];
        }
        for c in 0..2 {
            let m_new = wm_new.matvec(&new.u[c]);
            let m_old = wm_old.matvec(&old.u[c]);
            let a_u = wadv.matvec(&new.u[c]);
            for i in 0..n {
                r[(c + 1) * n + i] = if sp.mesh().normal_velocity_mask(c)[i] {
                    new.u[c][i]
                } else {
                    (m_new[i] - m_old[i]) / tau + a_u[i] + grad_p[c][i]
                };
            }
        }
        r
    }

    #[test]
    fn rest_state_is_a_fixed_point() {
        let sp = space(4);
        let eos = BarotropicEos::default();
        let old = State::rest(NodalField::constant(sp.num_nodes(), 1.0), 0.0);
        let step = ImplicitStep::new(&sp, &eos, &old, 0.01).unwrap();
        let r = step.residual(&old).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-15));
        let (x, hist) = newton_solve(&sp, &eos, &old, 0.01, &NewtonConfig::default()).unwrap();
        assert!(hist.is_empty());
        assert_eq!(x.rho, old.rho);
        assert_eq!(x.t, 0.01);
    }

    #[test]
    fn pulse_at_rest_residual_structure() {
        let sp = space(10);
        let eos = BarotropicEos::default();
        let rho = sp
            .l2_project(|p| 1.0 + 2.0 * (-20.0 * (p[0] * p[0] + p[1] * p[1])).exp())
            .unwrap();
        let old = State::rest(rho, 0.0);
        let r = ImplicitStep::new(&sp, &eos, &old, 0.005)
            .unwrap()
            .residual(&old)
            .unwrap();
        let n = sp.num_nodes();
        assert!(r[..n].iter().all(|&v| v == 0.0));
        let gp = sp.assemble_pressure_gradient(&old.rho, &eos).unwrap();
        for c in 0..2 {
            for i in 0..n {
                let expected = if sp.mesh().normal_velocity_mask(c)[i] { 0.0 } else { gp[c][i] };
                assert!((r[(c + 1) * n + i] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn residual_matches_operator_assembly() {
        let sp = space(4);
        let eos = BarotropicEos::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..3 {
            let old = random_state(&sp, &mut rng);
            let new = random_state(&sp, &mut rng);
            let tau = 0.01;
            let r = ImplicitStep::new(&sp, &eos, &old, tau)
                .unwrap()
                .residual(&new)
                .unwrap();
            let oracle = residual_from_operators(&sp, &eos, &old, &new, tau);
            let scale = oracle.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (a, b) in r.iter().zip(&oracle) {
                assert!((a - b).abs() <= 1e-13 * scale, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let sp = space(4);
        let eos = BarotropicEos::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let old = random_state(&sp, &mut rng);
        let x = random_state(&sp, &mut rng);
        let n = sp.num_nodes();
        let step = ImplicitStep::new(&sp, &eos, &old, 0.01).unwrap();
        let jac = step.jacobian(&x).unwrap().to_dense();
        let eps = 1e-6;
        let base = x.stacked();
        let mut worst = 0.0f64;
        let mut jmax = 0.0f64;
        for j in 0..3 * n {
            let mut xp = base.clone();
            let mut xm = base.clone();
            xp[j] += eps;
            xm[j] -= eps;
            let rp = step.residual(&State::from_stacked(&xp, n, 0.0)).unwrap();
            let rm = step.residual(&State::from_stacked(&xm, n, 0.0)).unwrap();
            for i in 0..3 * n {
                let fd = (rp[i] - rm[i]) / (2.0 * eps);
                worst = worst.max((fd - jac[i][j]).abs());
                jmax = jmax.max(jac[i][j].abs());
            }
        }
        assert!(worst / jmax <= 1e-5, "{:e}", worst / jmax);
    }

    #[test]
    fn jacobian_at_rest_reduces_to_mass_over_tau_and_pins_walls() {
        let sp = space(3);
        let eos = BarotropicEos::default();
        let n = sp.num_nodes();
        let old = State::rest(NodalField::constant(n, 1.3), 0.0);
        let tau = 0.02;
        let jac = ImplicitStep::new(&sp, &eos, &old, tau).unwrap().jacobian(&old).unwrap();
        let mass = sp.assemble_mass();
        for i in 0..n {
            for (j, v) in mass.row(i) {
                assert!((jac.get(i, j) - v / tau).abs() < 1e-12 * v.abs() / tau);
            }
        }
        for c in 0..2 {
            for (i, &pinned) in sp.mesh().normal_velocity_mask(c).iter().enumerate() {
                if pinned {
                    let row = (c + 1) * n + i;
                    let entries: Vec<_> = jac.row(row).filter(|(_, v)| *v != 0.0).collect();
                    assert_eq!(entries, vec![(row, 1.0)]);
                }
            }
        }
    }

    #[test]
    fn positivity_breach_is_reported() {
        let sp = space(3);
        let eos = BarotropicEos::default();
        let mut old = State::rest(NodalField::constant(sp.num_nodes(), 1.0), 0.0);
        old.rho[5] = -1.0;
        let step = ImplicitStep::new(&sp, &eos, &old, 0.01).unwrap();
        assert!(matches!(step.residual(&old), Err(Error::Positivity { .. })));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let bad = NewtonConfig {
            max_iter: 0,
            ..NewtonConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = NewtonConfig {
            tol: -1.0,
            ..NewtonConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}

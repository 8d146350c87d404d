//! Monitored quantities of a discrete state: mass, momentum, mechanical
//! energy, density extrema, sections through the domain and the deviation
//! from point symmetry.

use crate::assembly::{gather, p1_value, FeSpace};
use crate::eos::BarotropicEos;
use crate::error::{Error, Result};
use crate::quadrature::gauss_edge_3;
use crate::schemes::State;

/// `\int rho dx`, exact for P1 through the basis integrals.
pub fn total_mass(space: &FeSpace, rho: &[f64]) -> f64 {
    space
        .basis_integrals()
        .iter()
        .zip(rho)
        .map(|(w, r)| w * r)
        .sum()
}

/// `\int rho u dx` by volume quadrature.
pub fn total_momentum(space: &FeSpace, state: &State) -> Result<[f64; 2]> {
    state.check_len(space.num_nodes())?;
    let elements = space.mesh().elements();
    let mut out = [0.0; 2];
    for (c, slot) in out.iter_mut().enumerate() {
        *slot = space.integrate(|e, _, l| {
            let tri = &elements[e];
            Ok(p1_value(gather(&state.rho, tri), l) * p1_value(gather(&state.u[c], tri), l))
        })?;
    }
    Ok(out)
}

/// `\oint p(rho) n ds` by three-point Gauss quadrature on each wall edge.
pub fn boundary_pressure_flux(space: &FeSpace, eos: &BarotropicEos, rho: &[f64]) -> Result<[f64; 2]> {
    let mesh = space.mesh();
    if rho.len() != mesh.num_nodes() {
        return Err(Error::LengthMismatch {
            what: "density",
            got: rho.len(),
            expected: mesh.num_nodes(),
        });
    }
    let mut flux = [0.0; 2];
    for (side, a, b) in mesh.boundary_edges() {
        let (pa, pb) = (mesh.node(a), mesh.node(b));
        let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
        let mut s = 0.0;
        for (t, w) in gauss_edge_3() {
            s += w * eos.pressure(rho[a] + t * (rho[b] - rho[a]))?;
        }
        let n = side.normal();
        flux[0] += len * s * n[0];
        flux[1] += len * s * n[1];
    }
    Ok(flux)
}

/// Momentum balance over one step:
/// `I(next) - I(prev) + tau * \oint p(rho_next) n ds`, returned together
/// with the scale `max(1, |I(prev)|)` the defect is judged against.
pub fn momentum_defect(
    space: &FeSpace,
    eos: &BarotropicEos,
    prev: &State,
    next: &State,
    tau: f64,
) -> Result<([f64; 2], f64)> {
    let i0 = total_momentum(space, prev)?;
    let i1 = total_momentum(space, next)?;
    let flux = boundary_pressure_flux(space, eos, &next.rho)?;
    let defect = [i1[0] - i0[0] + tau * flux[0], i1[1] - i0[1] + tau * flux[1]];
    Ok((defect, 1f64.max(i0[0].hypot(i0[1]))))
}

/// `\int (rho |u|^2 / 2 + Pi(rho)) dx` by volume quadrature.
pub fn total_energy(space: &FeSpace, eos: &BarotropicEos, state: &State) -> Result<f64> {
    state.check_len(space.num_nodes())?;
    let elements = space.mesh().elements();
    space.integrate(|e, q, l| {
        let tri = &elements[e];
        let r = p1_value(gather(&state.rho, tri), l);
        let u1 = p1_value(gather(&state.u[0], tri), l);
        let u2 = p1_value(gather(&state.u[1], tri), l);
        let pi = eos.potential(r).map_err(|err| err.at_quadrature_point(e, q))?;
        Ok(0.5 * r * (u1 * u1 + u2 * u2) + pi)
    })
}

/// Smallest density over all quadrature points.
pub fn min_quadrature_density(space: &FeSpace, rho: &[f64]) -> f64 {
    let mut m = f64::INFINITY;
    for tri in space.mesh().elements() {
        let v = gather(rho, tri);
        for (l, _) in space.rule().iter() {
            m = m.min(p1_value(v, l));
        }
    }
    m
}

/// Density interpolated at the center of the domain.
pub fn center_density(space: &FeSpace, rho: &[f64]) -> Result<f64> {
    let mesh = space.mesh();
    mesh.interpolate(rho, mesh.bounds().center())
}

/// Largest `|rho(x) - rho(-x)|` over mirrored node pairs.
pub fn symmetry_error(space: &FeSpace, rho: &[f64]) -> f64 {
    let mesh = space.mesh();
    (0..rho.len())
        .map(|i| (rho[i] - rho[mesh.mirror_node(i)]).abs())
        .fold(0.0, f64::max)
}

/// Density along the horizontal line `x2 = y`, ordered by `x1`.
///
/// With `samples = None` the line is sampled wherever it crosses a mesh
/// edge; otherwise at `samples` equally spaced points spanning the domain.
pub fn section_profile(
    space: &FeSpace,
    rho: &[f64],
    y: f64,
    samples: Option<usize>,
) -> Result<Vec<(f64, f64)>> {
    let mesh = space.mesh();
    let b = mesh.bounds();
    if !(y >= b.ymin && y <= b.ymax) {
        return Err(Error::OutsideDomain { x: b.center()[0], y });
    }
    let m = mesh.segments();
    let xs: Vec<f64> = match samples {
        Some(count) => {
            if count < 2 {
                return Err(Error::InvalidConfig(format!(
                    "a section needs at least 2 samples, got {count}"
                )));
            }
            (0..count)
                .map(|k| b.xmin + b.width() * k as f64 / (count - 1) as f64)
                .collect()
        }
        None => {
            let h = mesh.h();
            let iy = (((y - b.ymin) / h).floor() as usize).min(m - 1);
            let y0 = mesh.node(iy * (m + 1))[1];
            let dy = y - y0;
            let crosses_diagonal = dy > 1e-12 * h && dy < h * (1.0 - 1e-12);
            let mut xs = Vec::with_capacity(2 * m + 1);
            for ix in 0..=m {
                let x = mesh.node(ix)[0];
                xs.push(x);
                if crosses_diagonal && ix < m {
                    xs.push(x + dy);
                }
            }
            xs
        }
    };
    xs.into_iter()
        .map(|x| Ok((x, mesh.interpolate(rho, [x, y])?)))
        .collect()
}

/// Everything recorded about a state at one output time.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub momentum: [f64; 2],
    pub energy: f64,
    pub rho_center: f64,
    pub rho_max: f64,
    pub rho_min: f64,
    pub rho_min_quad: f64,
    pub symmetry_err: f64,
    /// Newton iterations or decoupling passes of the step that produced the
    /// state (0 for the initial state).
    pub iterations: usize,
}

impl DiagnosticsRecord {
    pub fn compute(space: &FeSpace, eos: &BarotropicEos, state: &State, iterations: usize) -> Result<Self> {
        state.check_len(space.num_nodes())?;
        let rec = DiagnosticsRecord {
            t: state.t,
            mass: total_mass(space, &state.rho),
            momentum: total_momentum(space, state)?,
            energy: total_energy(space, eos, state)?,
            rho_center: center_density(space, &state.rho)?,
            rho_max: state.rho.max(),
            rho_min: state.rho.min(),
            rho_min_quad: min_quadrature_density(space, &state.rho),
            symmetry_err: symmetry_error(space, &state.rho),
            iterations,
        };
        if rec.rho_min <= 0.0 {
            log::warn!("non-positive nodal density {:e} at t = {}", rec.rho_min, rec.t);
        }
        Ok(rec)
    }
}

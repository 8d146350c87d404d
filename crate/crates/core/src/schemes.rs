//! Time-stepping schemes and the run driver.
//!
//! Three schemes advance a [`State`] by one step:
//!
//! * fully implicit: backward Euler in all terms, solved with Newton's method;
//! * linearized: density first with the advecting velocity lagged from the
//!   previous level, then each velocity component from its own linear system;
//! * decoupled: the linearized step repeated `K` times, each pass advecting
//!   with the velocity of the previous pass. `K = 1` is the linearized scheme.
//!
//! Velocity components are solved independently, which is valid because
//! every wall is parallel to a coordinate axis.

use crate::assembly::{FeSpace, NodalField};
use crate::diagnostics::DiagnosticsRecord;
use crate::eos::BarotropicEos;
use crate::error::{Error, Result};
use crate::linsolve::{self, norm, SymbolicCache};
use crate::newton::{newton_solve, newton_solve_cached, NewtonConfig, NewtonHistory};
use crate::sparse::SparseMatrix;

/// Nodal density and velocity at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub rho: NodalField,
    pub u: [NodalField; 2],
    pub t: f64,
}

impl State {
    /// Fluid at rest with the given density.
    pub fn rest(rho: NodalField, t: f64) -> Self {
        let n = rho.len();
        State {
            rho,
            u: [NodalField::zeros(n), NodalField::zeros(n)],
            t,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.rho.len()
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        for (what, f) in [("density", &self.rho), ("velocity x", &self.u[0]), ("velocity y", &self.u[1])] {
            if f.len() != n {
                return Err(Error::LengthMismatch {
                    what,
                    got: f.len(),
                    expected: n,
                });
            }
        }
        Ok(())
    }

    /// `[rho, u1, u2]` concatenated.
    pub fn stacked(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(3 * self.num_nodes());
        v.extend_from_slice(&self.rho);
        v.extend_from_slice(&self.u[0]);
        v.extend_from_slice(&self.u[1]);
        v
    }

    pub fn from_stacked(v: &[f64], n: usize, t: f64) -> Self {
        State {
            rho: v[..n].to_vec().into(),
            u: [v[n..2 * n].to_vec().into(), v[2 * n..3 * n].to_vec().into()],
            t,
        }
    }

    pub(crate) fn set_stacked(&mut self, v: &[f64], n: usize) {
        self.rho.copy_from_slice(&v[..n]);
        self.u[0].copy_from_slice(&v[n..2 * n]);
        self.u[1].copy_from_slice(&v[2 * n..3 * n]);
    }

    fn velocity(&self) -> [&[f64]; 2] {
        [&self.u[0], &self.u[1]]
    }
}

/// `|a - b| / |a|` over the stacked unknowns.
pub fn relative_change(a: &State, b: &State) -> f64 {
    let (va, vb) = (a.stacked(), b.stacked());
    let diff: Vec<f64> = va.iter().zip(&vb).map(|(x, y)| x - y).collect();
    let scale = norm(&va);
    if scale == 0.0 {
        norm(&diff)
    } else {
        norm(&diff) / scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    FullyImplicit,
    Linearized,
    Decoupled,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::FullyImplicit => "fully_implicit",
            SchemeKind::Linearized => "linearized",
            SchemeKind::Decoupled => "decoupled",
        }
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fully_implicit" => Ok(SchemeKind::FullyImplicit),
            "linearized" => Ok(SchemeKind::Linearized),
            "decoupled" => Ok(SchemeKind::Decoupled),
            other => Err(Error::InvalidConfig(format!(
                "unknown scheme '{other}' (expected fully_implicit, linearized or decoupled)"
            ))),
        }
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    /// Passes per step of the decoupled scheme.
    pub iterations: usize,
    pub tau: f64,
    pub t_end: f64,
    pub newton: NewtonConfig,
}

impl SchemeConfig {
    pub fn new(kind: SchemeKind, tau: f64, t_end: f64) -> Self {
        SchemeConfig {
            kind,
            iterations: 1,
            tau,
            t_end,
            newton: NewtonConfig::default(),
        }
    }

    pub fn with_iterations(mut self, k: usize) -> Self {
        self.iterations = k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidConfig(format!("time.tau = {} must be positive", self.tau)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidConfig(format!("time.T = {} must be non-negative", self.t_end)));
        }
        let ratio = self.t_end / self.tau;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "time.T / time.tau = {ratio} is not an integer"
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("scheme.K must be at least 1".into()));
        }
        self.newton.validate()
    }

    /// Number of time steps `N = T / tau`.
    pub fn num_steps(&self) -> usize {
        (self.t_end / self.tau).round() as usize
    }
}

/// What a single step reports besides the new state.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Newton(NewtonHistory),
    /// Relative change of each decoupling pass.
    Decoupled(Vec<f64>),
}

impl StepOutcome {
    pub fn iterations(&self) -> usize {
        match self {
            StepOutcome::Newton(h) => h.len(),
            StepOutcome::Decoupled(v) => v.len(),
        }
    }
}

/// Scheme driver bound to one discretization; caches the mass matrix and
/// the symbolic factorizations of its linear systems.
pub struct Stepper<'a> {
    space: &'a FeSpace,
    eos: BarotropicEos,
    mass: SparseMatrix,
    symbolic: SymbolicCache,
}

impl<'a> Stepper<'a> {
    pub fn new(space: &'a FeSpace, eos: BarotropicEos) -> Self {
        Stepper {
            space,
            eos,
            mass: space.assemble_mass(),
            symbolic: SymbolicCache::new(),
        }
    }

    pub fn space(&self) -> &FeSpace {
        self.space
    }

    pub fn eos(&self) -> &BarotropicEos {
        &self.eos
    }

    pub fn fully_implicit(
        &self,
        state: &State,
        tau: f64,
        config: &NewtonConfig,
    ) -> Result<(State, NewtonHistory)> {
        newton_solve_cached(self.space, &self.eos, state, tau, config, &self.symbolic)
    }

    pub fn linearized(&self, state: &State, tau: f64) -> Result<State> {
        self.decoupled(state, tau, 1).map(|(s, _)| s)
    }

    /// `k` decoupling passes; returns the final pass and the relative change
    /// of every pass.
    pub fn decoupled(&self, state: &State, tau: f64, k: usize) -> Result<(State, Vec<f64>)> {
        if k == 0 {
            return Err(Error::InvalidConfig("decoupled scheme needs at least one pass".into()));
        }
        if !(tau > 0.0) {
            return Err(Error::InvalidConfig(format!("time step {tau} must be positive")));
        }
        state.check_len(self.space.num_nodes())?;
        let inv_tau = 1.0 / tau;
        let rho_rhs: Vec<f64> = self.mass.matvec(&state.rho).iter().map(|v| v * inv_tau).collect();
        let wm_old = self.space.assemble_weighted_mass(&state.rho)?;
        let momentum_old = [wm_old.matvec(&state.u[0]), wm_old.matvec(&state.u[1])];

        let mut iterate = state.clone();
        iterate.t = state.t + tau;
        let mut changes = Vec::with_capacity(k);
        for _ in 0..k {
            let next = self.pass(&iterate, &rho_rhs, &momentum_old, inv_tau)?;
            changes.push(relative_change(&next, &iterate));
            iterate = next;
        }
        Ok((iterate, changes))
    }

    /// One linear density solve followed by the two velocity solves, with
    /// the advecting velocity taken from `advect`.
    fn pass(
        &self,
        advect: &State,
        rho_rhs: &[f64],
        momentum_old: &[Vec<f64>; 2],
        inv_tau: f64,
    ) -> Result<State> {
        let u_adv = advect.velocity();
        let mut k_rho = self.mass.clone().scaled(inv_tau);
        k_rho.axpy(1.0, &self.space.assemble_advection(u_adv)?)?;
        let (rho, _) = linsolve::solve_cached(&k_rho, rho_rhs, &self.symbolic)?;

        let min_rho = rho.iter().copied().fold(f64::INFINITY, f64::min);
        if min_rho <= 0.0 {
            log::warn!("decoupled pass produced non-positive nodal density {min_rho:e}");
        }

        let mut k_u = self.space.assemble_weighted_mass(&rho)?.scaled(inv_tau);
        k_u.axpy(1.0, &self.space.assemble_weighted_advection(u_adv, &rho)?)?;
        let grad_p = self.space.assemble_pressure_gradient(&rho, &self.eos)?;
        let mesh = self.space.mesh();
        let mut u = [NodalField::default(), NodalField::default()];
        for c in 0..2 {
            let mask = mesh.normal_velocity_mask(c);
            let mut kc = k_u.clone();
            kc.set_identity_rows(mask, 0);
            let rhs: Vec<f64> = (0..rho.len())
                .map(|i| {
                    if mask[i] {
                        0.0
                    } else {
                        momentum_old[c][i] * inv_tau - grad_p[c][i]
                    }
                })
                .collect();
            let (mut uc, _) = linsolve::solve_cached(&kc, &rhs, &self.symbolic)?;
            // Constraint rows: exact zero rather than factorization round-off.
            for (v, &fixed) in uc.iter_mut().zip(mask) {
                if fixed {
                    *v = 0.0;
                }
            }
            u[c] = uc.into();
        }
        Ok(State {
            rho: rho.into(),
            u,
            t: advect.t,
        })
    }

    /// Advance one step with the configured scheme.
    pub fn step(&self, state: &State, config: &SchemeConfig) -> Result<(State, StepOutcome)> {
        match config.kind {
            SchemeKind::FullyImplicit => self
                .fully_implicit(state, config.tau, &config.newton)
                .map(|(s, h)| (s, StepOutcome::Newton(h))),
            SchemeKind::Linearized => self
                .decoupled(state, config.tau, 1)
                .map(|(s, c)| (s, StepOutcome::Decoupled(c))),
            SchemeKind::Decoupled => self
                .decoupled(state, config.tau, config.iterations)
                .map(|(s, c)| (s, StepOutcome::Decoupled(c))),
        }
    }
}

pub fn step_fully_implicit(
    space: &FeSpace,
    eos: &BarotropicEos,
    state: &State,
    tau: f64,
    config: &NewtonConfig,
) -> Result<(State, NewtonHistory)> {
    newton_solve(space, eos, state, tau, config)
}

pub fn step_linearized(space: &FeSpace, eos: &BarotropicEos, state: &State, tau: f64) -> Result<State> {
    Stepper::new(space, *eos).linearized(state, tau)
}

pub fn step_decoupled(
    space: &FeSpace,
    eos: &BarotropicEos,
    state: &State,
    tau: f64,
    k: usize,
) -> Result<(State, Vec<f64>)> {
    Stepper::new(space, *eos).decoupled(state, tau, k)
}

/// Output cadence of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSchedule {
    /// Diagnostics every this many steps (the final step always reports).
    pub diag_every: usize,
    pub snapshot_times: Vec<f64>,
}

impl Default for RunSchedule {
    fn default() -> Self {
        RunSchedule {
            diag_every: 1,
            snapshot_times: vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
        }
    }
}

/// Everything known about one completed step.
pub struct StepReport<'s> {
    /// Zero-based index of the step (it advances `previous` to `current`).
    pub step: usize,
    pub previous: &'s State,
    pub current: &'s State,
    pub outcome: &'s StepOutcome,
}

/// Receives the products of a run as they are produced.
pub trait RunSink {
    fn on_record(&mut self, _record: &DiagnosticsRecord) -> Result<()> {
        Ok(())
    }

    fn on_step(&mut self, _report: &StepReport<'_>) -> Result<()> {
        Ok(())
    }

    fn on_snapshot(&mut self, _state: &State) -> Result<()> {
        Ok(())
    }
}

/// Sink that discards everything.
pub struct NullSink;

impl RunSink for NullSink {}

/// Advance `initial` over `[0, T]`, streaming diagnostics and snapshots.
pub fn run(
    space: &FeSpace,
    eos: &BarotropicEos,
    config: &SchemeConfig,
    schedule: &RunSchedule,
    initial: State,
    sink: &mut dyn RunSink,
) -> Result<State> {
    config.validate()?;
    if schedule.diag_every == 0 {
        return Err(Error::InvalidConfig("output.diag_every must be at least 1".into()));
    }
    initial.check_len(space.num_nodes())?;
    let stepper = Stepper::new(space, *eos);
    let steps = config.num_steps();
    let mut snapshots = schedule.snapshot_times.clone();
    snapshots.sort_by(f64::total_cmp);
    let mut pending = snapshots.into_iter().peekable();

    let mut emit_snapshots = |state: &State, sink: &mut dyn RunSink| -> Result<()> {
        while let Some(&ts) = pending.peek() {
            if ts < state.t - 0.5 * config.tau {
                pending.next();
            } else if ts <= state.t + 0.5 * config.tau {
                pending.next();
                sink.on_snapshot(state)?;
            } else {
                break;
            }
        }
        Ok(())
    };

    let mut state = initial;
    let record = DiagnosticsRecord::compute(space, eos, &state, 0).map_err(|e| e.at_step(0, state.t))?;
    sink.on_record(&record)?;
    emit_snapshots(&state, sink)?;

    for n in 0..steps {
        let (mut next, outcome) = stepper
            .step(&state, config)
            .map_err(|e| e.at_step(n, state.t))?;
        next.t = (n + 1) as f64 * config.tau;
        sink.on_step(&StepReport {
            step: n,
            previous: &state,
            current: &next,
            outcome: &outcome,
        })?;
        if (n + 1) % schedule.diag_every == 0 || n + 1 == steps {
            let record = DiagnosticsRecord::compute(space, eos, &next, outcome.iterations())
                .map_err(|e| e.at_step(n, next.t))?;
            sink.on_record(&record)?;
        }
        emit_snapshots(&next, sink)?;
        state = next;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::total_mass;
    use crate::mesh::{Rect, StructuredTriMesh};
    use crate::problem::GaussianPulse;

    fn space(m: usize) -> FeSpace {
        FeSpace::new(StructuredTriMesh::new(Rect::new(-5.0, 5.0, -5.0, 5.0), m).unwrap())
    }

    #[test]
    fn rest_state_is_fixed_for_every_scheme() {
        let sp = space(6);
        let eos = BarotropicEos::default();
        let rest = State::rest(NodalField::constant(sp.num_nodes(), 1.0), 0.0);
        let stepper = Stepper::new(&sp, eos);
        let (s, _) = stepper.fully_implicit(&rest, 0.01, &NewtonConfig::default()).unwrap();
        assert_eq!(s.rho, rest.rho);
        assert_eq!(s.t, 0.01);
        for k in [1, 3] {
            let (s, _) = stepper.decoupled(&rest, 0.01, k).unwrap();
            assert!(s.rho.iter().all(|v| (v - 1.0).abs() < 1e-14));
            assert!(s.u.iter().flat_map(|f| f.iter()).all(|v| v.abs() < 1e-14));
        }
    }

    #[test]
    fn single_pass_equals_linearized_bitwise() {
        let sp = space(8);
        let eos = BarotropicEos::default();
        let init = GaussianPulse::default().initial_state(&sp).unwrap();
        let stepper = Stepper::new(&sp, eos);
        let (s1, _) = stepper.decoupled(&init, 0.01, 2).unwrap();
        let a = stepper.linearized(&s1, 0.01).unwrap();
        let (b, changes) = stepper.decoupled(&s1, 0.01, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(changes.len(), 1);
        assert_eq!(step_linearized(&sp, &eos, &s1, 0.01).unwrap(), a);
    }

    #[test]
    fn linearized_first_step_keeps_density() {
        let sp = space(10);
        let eos = BarotropicEos::default();
        let init = GaussianPulse::default().initial_state(&sp).unwrap();
        let s = Stepper::new(&sp, eos).linearized(&init, 0.005).unwrap();
        for (a, b) in s.rho.iter().zip(init.rho.iter()) {
            assert!((a - b).abs() < 1e-14 * b);
        }
        assert!(s.u[0].iter().any(|v| v.abs() > 1e-4));
    }

    #[test]
    fn all_schemes_conserve_mass_per_step() {
        let sp = space(12);
        let eos = BarotropicEos::default();
        let init = GaussianPulse::default().initial_state(&sp).unwrap();
        let m0 = total_mass(&sp, &init.rho);
        let stepper = Stepper::new(&sp, eos);
        let mut states = vec![init.clone(), init.clone(), init];
        for _ in 0..5 {
            states[0] = stepper.fully_implicit(&states[0], 0.01, &NewtonConfig::default()).unwrap().0;
            states[1] = stepper.linearized(&states[1], 0.01).unwrap();
            states[2] = stepper.decoupled(&states[2], 0.01, 3).unwrap().0;
        }
        for s in &states {
            assert!((total_mass(&sp, &s.rho) - m0).abs() <= 1e-10 * m0);
        }
    }

    #[test]
    fn config_validation() {
        assert!(SchemeConfig::new(SchemeKind::FullyImplicit, 0.005, 5.0).validate().is_ok());
        assert_eq!(SchemeConfig::new(SchemeKind::FullyImplicit, 0.005, 5.0).num_steps(), 1000);
        assert!(SchemeConfig::new(SchemeKind::FullyImplicit, -1.0, 5.0).validate().is_err());
        assert!(SchemeConfig::new(SchemeKind::FullyImplicit, 0.3, 1.0).validate().is_err());
        assert!(SchemeConfig::new(SchemeKind::Decoupled, 0.1, 1.0)
            .with_iterations(0)
            .validate()
            .is_err());
        assert_eq!("decoupled".parse::<SchemeKind>().unwrap(), SchemeKind::Decoupled);
        assert!("explicit".parse::<SchemeKind>().is_err());
    }

    #[derive(Default)]
    struct Collect {
        records: Vec<DiagnosticsRecord>,
        steps: usize,
        snapshots: Vec<f64>,
    }

    impl RunSink for Collect {
        fn on_record(&mut self, r: &DiagnosticsRecord) -> Result<()> {
            self.records.push(r.clone());
            Ok(())
        }
        fn on_step(&mut self, _: &StepReport<'_>) -> Result<()> {
            self.steps += 1;
            Ok(())
        }
        fn on_snapshot(&mut self, s: &State) -> Result<()> {
            self.snapshots.push(s.t);
            Ok(())
        }
    }

    #[test]
    fn zero_horizon_run_emits_one_record() {
        let sp = space(6);
        let eos = BarotropicEos::default();
        let init = GaussianPulse::default().initial_state(&sp).unwrap();
        let mut sink = Collect::default();
        let cfg = SchemeConfig::new(SchemeKind::FullyImplicit, 0.005, 0.0);
        let out = run(&sp, &eos, &cfg, &RunSchedule::default(), init.clone(), &mut sink).unwrap();
        assert_eq!(out, init);
        assert_eq!(sink.records.len(), 1);
        assert_eq!(sink.snapshots, vec![0.0]);
    }

    #[test]
    fn run_honours_schedule() {
        let sp = space(6);
        let eos = BarotropicEos::default();
        let init = GaussianPulse::default().initial_state(&sp).unwrap();
        let mut sink = Collect::default();
        let cfg = SchemeConfig::new(SchemeKind::Decoupled, 0.05, 0.5).with_iterations(2);
        let schedule = RunSchedule {
            diag_every: 3,
            snapshot_times: vec![0.25, 0.0, 0.5],
        };
        let out = run(&sp, &eos, &cfg, &schedule, init, &mut sink).unwrap();
        assert_eq!(sink.steps, 10);
        // t = 0, steps 3, 6, 9 and the final step 10
        assert_eq!(sink.records.len(), 5);
        assert_eq!(sink.records.last().unwrap().iterations, 2);
        assert_eq!(sink.snapshots.len(), 3);
        assert!((out.t - 0.5).abs() < 1e-15);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(12))]
        #[test]
        fn decoupled_step_conserves_mass(seed in 0u64..1000, k in 1usize..4, tau in 0.001f64..0.05) {
            use rand::{Rng, SeedableRng};
            let sp = space(6);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = sp.num_nodes();
            let mut s = State::rest((0..n).map(|_| rng.gen_range(0.8..1.5)).collect::<Vec<_>>().into(), 0.0);
            for c in 0..2 {
                for i in 0..n {
                    if !sp.mesh().normal_velocity_mask(c)[i] {
                        s.u[c][i] = rng.gen_range(-0.3..0.3);
                    }
                }
            }
            let (next, _) = Stepper::new(&sp, BarotropicEos::default()).decoupled(&s, tau, k).unwrap();
            let (m0, m1) = (total_mass(&sp, &s.rho), total_mass(&sp, &next.rho));
            proptest::prop_assert!((m1 - m0).abs() <= 1e-12 * m0);
            for c in 0..2 {
                let mask = sp.mesh().normal_velocity_mask(c);
                proptest::prop_assert!((0..n).filter(|&i| mask[i]).all(|i| next.u[c][i] == 0.0));
            }
        }
    }
}

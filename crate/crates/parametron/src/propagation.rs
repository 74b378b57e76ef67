//! Fixed-step RK4 propagation of the Schrödinger equation (with or without
//! the rapidly oscillating terms) and of the single-photon-loss master
//! equation, plus step-size convergence verification.
//!
//! The per-step Hamiltonian application exploits the band structure of the
//! phase-grouped decomposition: every term lives on a handful of diagonals
//! with real entries, so a stage costs a few hundred multiply-adds instead of
//! a dense matrix-vector product. No renormalization is applied mid-run; norm
//! drift is the error monitor.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fockspace::{DensityMatrix, EigenSystem, OperatorMatrix, StateVector};
use crate::model::{h_rot_at, ModelParams, TermSet};
use crate::observables::{self, FidelityStats};
use crate::schedules::Schedule;

/// Norm tolerance for pure-state propagation.
pub const NORM_TOL: f64 = 1e-6;
/// Trace tolerance for density-matrix propagation.
pub const TRACE_TOL: f64 = 1e-8;
/// Step-halving agreement required of a converged run.
pub const CONVERGENCE_TOL: f64 = 1e-5;

/// A time-dependent Hermitian operator that can be applied to a state.
pub trait HamiltonianOp {
    fn dim(&self) -> usize;

    /// `out = H(t)·psi`.
    fn apply_into(&self, t: f64, psi: &[Complex64], out: &mut [Complex64]);

    /// Dense matrix at time `t`. Diagnostic path; not used while stepping.
    fn matrix_at(&self, t: f64) -> OperatorMatrix;

    /// `out = H(t)·rho`, column by column.
    fn apply_mat_into(&self, t: f64, rho: &DMatrix<Complex64>, out: &mut DMatrix<Complex64>) {
        let dim = self.dim();
        let src = rho.as_slice();
        let dst = out.as_mut_slice();
        for c in 0..dim {
            self.apply_into(t, &src[c * dim..(c + 1) * dim], &mut dst[c * dim..(c + 1) * dim]);
        }
    }
}

/// Real values along one diagonal of an operator, read as entries
/// `(r, r + shift)` for `r = max(0, -shift) ..`.
fn band_values(m: &OperatorMatrix, shift: i32) -> Vec<f64> {
    let dim = m.dim() as i32;
    let r_start = (-shift).max(0);
    let len = (dim - shift.abs()) as usize;
    (0..len)
        .map(|i| {
            let r = (r_start + i as i32) as usize;
            let c = (r as i32 + shift) as usize;
            let z = m.entry(r, c);
            debug_assert!(z.im == 0.0, "band entry ({r},{c}) is not real");
            z.re
        })
        .collect()
}

#[inline]
fn clear(out: &mut [Complex64]) {
    for z in out.iter_mut() {
        *z = Complex64::new(0.0, 0.0);
    }
}

/// RWA Hamiltonian `Δ(t)·n̂ - (χ/2)·a†a†aa + β(t)·(a² + a†²)` as a banded
/// operator (three diagonals, all real).
#[derive(Clone, Debug)]
pub struct RwaHamiltonian {
    dim: usize,
    chi: f64,
    beta: Schedule,
    delta: Schedule,
    diag_n: Vec<f64>,
    kerr_diag: Vec<f64>,
    squeeze: Vec<f64>,
}

impl RwaHamiltonian {
    pub fn new(chi: f64, beta: Schedule, delta: Schedule, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension { dim });
        }
        let diag_n = (0..dim).map(|n| n as f64).collect();
        let kerr_diag = (0..dim)
            .map(|n| -0.5 * chi * (n as f64) * (n as f64 - 1.0))
            .collect();
        let squeeze = (0..dim - 2)
            .map(|n| (((n + 1) * (n + 2)) as f64).sqrt())
            .collect();
        Ok(Self {
            dim,
            chi,
            beta,
            delta,
            diag_n,
            kerr_diag,
            squeeze,
        })
    }

    pub fn schedules(&self) -> (&Schedule, &Schedule) {
        (&self.beta, &self.delta)
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }
}

impl HamiltonianOp for RwaHamiltonian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_into(&self, t: f64, psi: &[Complex64], out: &mut [Complex64]) {
        let delta = self.delta.value(t);
        let beta = self.beta.value(t);
        for r in 0..self.dim {
            let d = delta * self.diag_n[r] + self.kerr_diag[r];
            out[r] = Complex64::new(d * psi[r].re, d * psi[r].im);
        }
        for (n, &s) in self.squeeze.iter().enumerate() {
            let w = beta * s;
            out[n + 2] += Complex64::new(w * psi[n].re, w * psi[n].im);
            out[n] += Complex64::new(w * psi[n + 2].re, w * psi[n + 2].im);
        }
    }

    fn matrix_at(&self, t: f64) -> OperatorMatrix {
        crate::model::build_h_rwa(self.delta.value(t), self.chi, self.beta.value(t), self.dim)
            .expect("dim validated at construction")
    }
}

/// Full rotating-frame Hamiltonian (NROTs included) as a banded operator:
/// five diagonals at offsets 0, ±2, ±4 whose complex coefficients are the
/// eight phase factors `e^{ik ωp t/2}` plus the pump modulation.
#[derive(Clone, Debug)]
pub struct RotatingFrameHamiltonian {
    params: ModelParams,
    terms: TermSet,
    diag_n: Vec<f64>,
    kerr0: Vec<f64>,
    pump0: Vec<f64>,
    kerr2: Vec<f64>,
    pump2: Vec<f64>,
    kerr4: Vec<f64>,
}

impl RotatingFrameHamiltonian {
    pub fn new(params: ModelParams, terms: &TermSet) -> Result<Self> {
        if terms.dim() != params.dim {
            return Err(Error::DimensionMismatch {
                left: terms.dim(),
                right: params.dim,
            });
        }
        if terms.chi() != params.chi {
            return Err(Error::InvalidArgument {
                reason: "term set and params disagree on chi".to_string(),
            });
        }
        let diag_n = (0..params.dim).map(|n| n as f64).collect();
        let kerr0 = band_values(terms.kerr_group(0), 0);
        let pump0 = band_values(terms.pump_group(0), 0);
        // net-creation groups act two (four) levels up: row = col + 2 (4)
        let kerr2 = band_values(terms.kerr_group(2), -2);
        let pump2 = band_values(terms.pump_group(2), -2);
        let kerr4 = band_values(terms.kerr_group(4), -4);
        Ok(Self {
            params,
            terms: terms.clone(),
            diag_n,
            kerr0,
            pump0,
            kerr2,
            pump2,
            kerr4,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }
}

impl HamiltonianOp for RotatingFrameHamiltonian {
    fn dim(&self) -> usize {
        self.params.dim
    }

    fn apply_into(&self, t: f64, psi: &[Complex64], out: &mut [Complex64]) {
        let dim = self.params.dim;
        let (sin2, cos2) = (self.params.omega_p * t).sin_cos();
        let ph2 = Complex64::new(cos2, sin2); // e^{i ωp t} = e^{2i ωp t/2}
        let ph4 = ph2 * ph2;
        let g = 2.0 * self.params.beta.value(t) * cos2;
        let dcoef = self.params.delta.value(t) + self.params.chi;

        for r in 0..dim {
            let d = dcoef * self.diag_n[r] + self.kerr0[r] + g * self.pump0[r];
            out[r] = Complex64::new(d * psi[r].re, d * psi[r].im);
        }
        for n in 0..dim - 2 {
            let w = self.kerr2[n] + g * self.pump2[n];
            // raising part (k = +2) carries e^{+iωp t}; lowering its conjugate
            let up = psi[n] * w;
            let down = psi[n + 2] * w;
            out[n + 2] += ph2 * up;
            out[n] += Complex64::new(
                ph2.re * down.re + ph2.im * down.im,
                ph2.re * down.im - ph2.im * down.re,
            );
        }
        for n in 0..dim - 4 {
            let w = self.kerr4[n];
            let up = psi[n] * w;
            let down = psi[n + 4] * w;
            out[n + 4] += ph4 * up;
            out[n] += Complex64::new(
                ph4.re * down.re + ph4.im * down.im,
                ph4.re * down.im - ph4.im * down.re,
            );
        }
    }

    fn matrix_at(&self, t: f64) -> OperatorMatrix {
        h_rot_at(t, &self.params, &self.terms).expect("validated at construction")
    }
}

/// Adds a microwave drive `E(t)·(a + a†)` on top of another Hamiltonian.
#[derive(Clone, Debug)]
pub struct DrivenHamiltonian<H> {
    inner: H,
    envelope: Schedule,
    drive: Vec<f64>,
}

impl<H: HamiltonianOp> DrivenHamiltonian<H> {
    pub fn new(inner: H, envelope: Schedule) -> Self {
        let dim = inner.dim();
        let drive = (0..dim - 1).map(|n| ((n + 1) as f64).sqrt()).collect();
        Self {
            inner,
            envelope,
            drive,
        }
    }
}

impl<H: HamiltonianOp> HamiltonianOp for DrivenHamiltonian<H> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply_into(&self, t: f64, psi: &[Complex64], out: &mut [Complex64]) {
        self.inner.apply_into(t, psi, out);
        let e = self.envelope.value(t);
        if e != 0.0 {
            for (n, &v) in self.drive.iter().enumerate() {
                let w = e * v;
                out[n] += Complex64::new(w * psi[n + 1].re, w * psi[n + 1].im);
                out[n + 1] += Complex64::new(w * psi[n].re, w * psi[n].im);
            }
        }
    }

    fn matrix_at(&self, t: f64) -> OperatorMatrix {
        let drive = crate::model::build_drive(self.dim()).expect("dim validated");
        self.inner
            .matrix_at(t)
            .add(&drive.scale(Complex64::new(self.envelope.value(t), 0.0)))
    }
}

/// A fixed dense Hamiltonian.
#[derive(Clone, Debug)]
pub struct FrozenHamiltonian {
    m: OperatorMatrix,
}

impl FrozenHamiltonian {
    pub fn new(m: OperatorMatrix) -> Self {
        Self { m }
    }
}

impl HamiltonianOp for FrozenHamiltonian {
    fn dim(&self) -> usize {
        self.m.dim()
    }

    fn apply_into(&self, _t: f64, psi: &[Complex64], out: &mut [Complex64]) {
        let dim = self.m.dim();
        clear(out);
        let m = self.m.as_matrix().as_slice(); // column-major
        for c in 0..dim {
            let x = psi[c];
            let col = &m[c * dim..(c + 1) * dim];
            for r in 0..dim {
                out[r] += col[r] * x;
            }
        }
    }

    fn matrix_at(&self, _t: f64) -> OperatorMatrix {
        self.m.clone()
    }
}

/// Uniform step grid with a sampling cadence for observables.
#[derive(Clone, Debug)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    pub sample_stride: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, dt: f64, sample_stride: usize) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidTimeGrid {
                reason: format!("dt must be positive, got {dt}"),
            });
        }
        if !(t_end > t_start) {
            return Err(Error::InvalidTimeGrid {
                reason: format!("empty span [{t_start}, {t_end}]"),
            });
        }
        if sample_stride == 0 {
            return Err(Error::InvalidTimeGrid {
                reason: "sample stride must be at least 1".to_string(),
            });
        }
        let span = t_end - t_start;
        let steps = (span / dt).round();
        if steps < 1.0 || ((steps * dt - span) / span).abs() > 1e-6 {
            return Err(Error::InvalidTimeGrid {
                reason: format!("span {span} ns is not an integer number of dt = {dt} ns steps"),
            });
        }
        if (steps as usize) % sample_stride != 0 {
            return Err(Error::InvalidTimeGrid {
                reason: format!(
                    "step count {} is not a multiple of the sample stride {sample_stride}",
                    steps as usize
                ),
            });
        }
        Ok(Self {
            t_start,
            t_end,
            dt,
            sample_stride,
        })
    }

    pub fn n_steps(&self) -> usize {
        ((self.t_end - self.t_start) / self.dt).round() as usize
    }

    pub fn n_samples(&self) -> usize {
        self.n_steps() / self.sample_stride + 1
    }

    /// Observable cadence in ns.
    pub fn sample_interval(&self) -> f64 {
        self.sample_stride as f64 * self.dt
    }

    pub fn time_at_step(&self, step: usize) -> f64 {
        self.t_start + step as f64 * self.dt
    }
}

/// A propagated state snapshot.
#[derive(Clone, Debug)]
pub enum Snapshot {
    Pure(StateVector),
    Density(DensityMatrix),
}

/// Time-sampled series of norms, tracked populations and optional snapshots.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `‖ψ‖` for pure-state runs, `Re tr ρ` for density runs.
    pub norms: Vec<f64>,
    /// `populations[s][k]`: tracked population `k` at sample `s`.
    pub populations: Vec<Vec<f64>>,
    pub snapshots: Vec<(f64, Snapshot)>,
    /// Largest Hermiticity deviation seen at a sample (density runs only).
    pub max_hermiticity_deviation: f64,
}

impl Trajectory {
    /// Series of one tracked population over time.
    pub fn population_series(&self, level: usize) -> Vec<f64> {
        self.populations.iter().map(|p| p[level]).collect()
    }
}

/// What to record along a trajectory.
#[derive(Clone, Debug)]
pub struct SamplerConfig {
    pub tracker: PopulationTracker,
    /// Snapshot requests, matched to the nearest sample time.
    pub snapshot_times: Vec<f64>,
}

impl SamplerConfig {
    pub fn none() -> Self {
        Self {
            tracker: PopulationTracker::None,
            snapshot_times: Vec::new(),
        }
    }

    pub fn instantaneous(beta: Schedule, delta: Schedule, chi: f64, count: usize) -> Self {
        Self {
            tracker: PopulationTracker::InstantaneousRwa {
                beta,
                delta,
                chi,
                count,
            },
            snapshot_times: Vec::new(),
        }
    }

    pub fn fixed_states(states: Vec<StateVector>) -> Self {
        Self {
            tracker: PopulationTracker::FixedStates { states },
            snapshot_times: Vec::new(),
        }
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }
}

/// How tracked populations are defined.
#[derive(Clone, Debug)]
pub enum PopulationTracker {
    /// Populations of the `count` highest instantaneous eigenlevels of the
    /// RWA Hamiltonian built from these schedules (top near-degenerate pair
    /// ordered even before odd).
    InstantaneousRwa {
        beta: Schedule,
        delta: Schedule,
        chi: f64,
        count: usize,
    },
    /// `|⟨s_k|ψ⟩|²` (or `⟨s_k|ρ|s_k⟩`) against fixed states.
    FixedStates { states: Vec<StateVector> },
    None,
}

/// Caches the RWA eigenbasis between samples; schedules are piecewise and
/// constant after their window, so the tail of a run reuses one decomposition.
struct EigenCache {
    key: Option<(f64, f64)>,
    system: Option<EigenSystem>,
}

impl EigenCache {
    fn new() -> Self {
        Self {
            key: None,
            system: None,
        }
    }

    fn get(
        &mut self,
        beta: &Schedule,
        delta: &Schedule,
        chi: f64,
        dim: usize,
        t: f64,
    ) -> Result<&EigenSystem> {
        let key = (beta.value(t), delta.value(t));
        if self.key != Some(key) {
            let h = crate::model::build_h_rwa(key.1, chi, key.0, dim)?;
            self.system = Some(observables::parity_ordered_eigh(&h)?);
            self.key = Some(key);
        }
        Ok(self.system.as_ref().expect("populated above"))
    }
}

struct Rk4Workspace {
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    stage: Vec<Complex64>,
}

impl Rk4Workspace {
    fn new(dim: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); dim];
        Self {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            stage: z,
        }
    }
}

/// One in-place RK4 step of `dψ/dt = -i H(t) ψ`.
#[inline]
fn rk4_step_inplace<H: HamiltonianOp>(
    h: &H,
    t: f64,
    dt: f64,
    psi: &mut [Complex64],
    ws: &mut Rk4Workspace,
) {
    let half = Complex64::new(0.0, -0.5 * dt);
    let full = Complex64::new(0.0, -dt);
    let sixth = Complex64::new(0.0, -dt / 6.0);
    let n = psi.len();

    h.apply_into(t, psi, &mut ws.k1);
    for i in 0..n {
        ws.stage[i] = psi[i] + ws.k1[i] * half;
    }
    h.apply_into(t + 0.5 * dt, &ws.stage, &mut ws.k2);
    for i in 0..n {
        ws.stage[i] = psi[i] + ws.k2[i] * half;
    }
    h.apply_into(t + 0.5 * dt, &ws.stage, &mut ws.k3);
    for i in 0..n {
        ws.stage[i] = psi[i] + ws.k3[i] * full;
    }
    h.apply_into(t + dt, &ws.stage, &mut ws.k4);
    for i in 0..n {
        psi[i] += (ws.k1[i] + (ws.k2[i] + ws.k3[i]) * 2.0 + ws.k4[i]) * sixth;
    }
}

/// Single classic RK4 update of `dψ/dt = -i H(t) ψ` with stage evaluations at
/// `t`, `t + dt/2` and `t + dt`. Local error is O(dt⁵).
pub fn rk4_step<H: HamiltonianOp>(
    state: &StateVector,
    t: f64,
    dt: f64,
    h: &H,
) -> Result<StateVector> {
    if state.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            left: state.dim(),
            right: h.dim(),
        });
    }
    let mut psi: Vec<Complex64> = state.as_slice().to_vec();
    let mut ws = Rk4Workspace::new(psi.len());
    rk4_step_inplace(h, t, dt, &mut psi, &mut ws);
    if psi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Divergence { t_ns: t });
    }
    Ok(StateVector::from_amplitudes(psi))
}

fn track_populations_pure(
    tracker: &PopulationTracker,
    cache: &mut EigenCache,
    dim: usize,
    t: f64,
    psi: &StateVector,
) -> Result<Vec<f64>> {
    match tracker {
        PopulationTracker::InstantaneousRwa {
            beta,
            delta,
            chi,
            count,
        } => {
            let es = cache.get(beta, delta, *chi, dim, t)?;
            Ok(es.states[..(*count).min(dim)]
                .iter()
                .map(|phi| phi.overlap_probability(psi))
                .collect())
        }
        PopulationTracker::FixedStates { states } => {
            Ok(states.iter().map(|s| s.overlap_probability(psi)).collect())
        }
        PopulationTracker::None => Ok(Vec::new()),
    }
}

fn track_populations_density(
    tracker: &PopulationTracker,
    cache: &mut EigenCache,
    dim: usize,
    t: f64,
    rho: &DensityMatrix,
) -> Result<Vec<f64>> {
    match tracker {
        PopulationTracker::InstantaneousRwa {
            beta,
            delta,
            chi,
            count,
        } => {
            let es = cache.get(beta, delta, *chi, dim, t)?;
            Ok(es.states[..(*count).min(dim)]
                .iter()
                .map(|phi| rho.expectation(phi))
                .collect())
        }
        PopulationTracker::FixedStates { states } => {
            Ok(states.iter().map(|s| rho.expectation(s)).collect())
        }
        PopulationTracker::None => Ok(Vec::new()),
    }
}

/// Sample indices (multiples of the stride) at which snapshots are requested.
fn snapshot_sample_indices(grid: &TimeGrid, times: &[f64]) -> Vec<usize> {
    let interval = grid.sample_interval();
    let n = grid.n_samples();
    let mut idx: Vec<usize> = times
        .iter()
        .map(|t| (((t - grid.t_start) / interval).round() as i64).clamp(0, n as i64 - 1) as usize)
        .collect();
    idx.sort_unstable();
    idx.dedup();
    idx
}

/// Propagate a pure state across the grid, recording samples every stride.
///
/// The state is never renormalized; drift of `‖ψ‖` beyond [`NORM_TOL`] aborts
/// with a step-size error.
pub fn propagate_state<H: HamiltonianOp>(
    psi0: &StateVector,
    grid: &TimeGrid,
    h: &H,
    samplers: &SamplerConfig,
) -> Result<Trajectory> {
    let dim = h.dim();
    if psi0.dim() != dim {
        return Err(Error::DimensionMismatch {
            left: psi0.dim(),
            right: dim,
        });
    }
    if (psi0.norm() - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument {
            reason: format!("initial state norm {} is not 1", psi0.norm()),
        });
    }

    let n_steps = grid.n_steps();
    let stride = grid.sample_stride;
    let snapshot_at = snapshot_sample_indices(grid, &samplers.snapshot_times);

    let mut psi: Vec<Complex64> = psi0.as_slice().to_vec();
    let mut ws = Rk4Workspace::new(dim);
    let mut cache = EigenCache::new();

    let mut traj = Trajectory {
        times: Vec::with_capacity(grid.n_samples()),
        norms: Vec::with_capacity(grid.n_samples()),
        populations: Vec::with_capacity(grid.n_samples()),
        snapshots: Vec::new(),
        max_hermiticity_deviation: 0.0,
    };

    let mut sample = |step: usize, psi: &[Complex64], cache: &mut EigenCache| -> Result<()> {
        let t = grid.time_at_step(step);
        let state = StateVector::from_amplitudes(psi.to_vec());
        let norm = state.norm();
        if !norm.is_finite() {
            return Err(Error::Divergence { t_ns: t });
        }
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NormDrift {
                t_ns: t,
                norm,
                tolerance: NORM_TOL,
            });
        }
        let pops = track_populations_pure(&samplers.tracker, cache, dim, t, &state)?;
        let sample_idx = step / stride;
        if snapshot_at.binary_search(&sample_idx).is_ok() {
            traj.snapshots.push((t, Snapshot::Pure(state)));
        }
        traj.times.push(t);
        traj.norms.push(norm);
        traj.populations.push(pops);
        Ok(())
    };

    sample(0, &psi, &mut cache)?;
    for step in 0..n_steps {
        let t = grid.time_at_step(step);
        rk4_step_inplace(h, t, grid.dt, &mut psi, &mut ws);
        if (step + 1) % stride == 0 {
            sample(step + 1, &psi, &mut cache)?;
        }
    }
    Ok(traj)
}

/// Right-hand side of the master equation with single-photon loss:
/// `-i[H,ρ] + (κ/2)([aρ, a†] + [a, ρa†])`.
pub fn lindblad_rhs(rho: &DensityMatrix, h: &OperatorMatrix, kappa: f64) -> DensityMatrix {
    let hm = h.as_matrix();
    let rm = rho.as_matrix();
    let dim = rho.dim();
    let commutator = hm * rm - rm * hm;
    let mut out = commutator * Complex64::new(0.0, -1.0);
    for r in 0..dim {
        for c in 0..dim {
            let mut d = -0.5 * (r + c) as f64 * rm[(r, c)];
            if r + 1 < dim && c + 1 < dim {
                d += (((r + 1) * (c + 1)) as f64).sqrt() * rm[(r + 1, c + 1)];
            }
            out[(r, c)] += kappa * d;
        }
    }
    DensityMatrix::from_matrix(out).expect("square by construction")
}

/// Banded master-equation RHS used inside the stepper; matches
/// [`lindblad_rhs`] with `H = h.matrix_at(t)`.
fn lindblad_rhs_into<H: HamiltonianOp>(
    h: &H,
    t: f64,
    kappa: f64,
    rho: &DMatrix<Complex64>,
    out: &mut DMatrix<Complex64>,
    scratch: &mut DMatrix<Complex64>,
    adj: &mut DMatrix<Complex64>,
) {
    let dim = h.dim();
    // H ρ
    h.apply_mat_into(t, rho, scratch);
    // ρ H = (H ρ†)† for Hermitian H
    rho.adjoint_to(adj);
    let rho_dag = adj.clone();
    h.apply_mat_into(t, &rho_dag, adj);
    let mi = Complex64::new(0.0, -1.0);
    for c in 0..dim {
        for r in 0..dim {
            let commutator = scratch[(r, c)] - adj[(c, r)].conj();
            let mut d = -0.5 * (r + c) as f64 * rho[(r, c)];
            if r + 1 < dim && c + 1 < dim {
                d += (((r + 1) * (c + 1)) as f64).sqrt() * rho[(r + 1, c + 1)];
            }
            out[(r, c)] = mi * commutator + kappa * d;
        }
    }
}

/// Propagate a density matrix under `H(t)` with single-photon loss `κ`.
///
/// Mirrors [`propagate_state`]; the trace is the drift monitor (tolerance
/// [`TRACE_TOL`]) and sampled Hermiticity deviations are recorded.
pub fn propagate_density<H: HamiltonianOp>(
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    h: &H,
    kappa: f64,
    samplers: &SamplerConfig,
) -> Result<Trajectory> {
    let dim = h.dim();
    if rho0.dim() != dim {
        return Err(Error::DimensionMismatch {
            left: rho0.dim(),
            right: dim,
        });
    }
    if (rho0.trace().re - 1.0).abs() > 1e-8 || rho0.trace().im.abs() > 1e-12 {
        return Err(Error::InvalidArgument {
            reason: format!("initial trace {} is not 1", rho0.trace()),
        });
    }
    if rho0.hermiticity_deviation() > 1e-10 {
        return Err(Error::InvalidArgument {
            reason: "initial density matrix is not Hermitian".to_string(),
        });
    }
    if kappa < 0.0 {
        return Err(Error::InvalidArgument {
            reason: format!("negative decay rate {kappa}"),
        });
    }

    let n_steps = grid.n_steps();
    let stride = grid.sample_stride;
    let snapshot_at = snapshot_sample_indices(grid, &samplers.snapshot_times);

    let mut rho = rho0.as_matrix().clone();
    let zeros = DMatrix::<Complex64>::zeros(dim, dim);
    let (mut k1, mut k2, mut k3, mut k4) =
        (zeros.clone(), zeros.clone(), zeros.clone(), zeros.clone());
    let (mut stage, mut scratch, mut adj) = (zeros.clone(), zeros.clone(), zeros);
    let mut cache = EigenCache::new();

    let mut traj = Trajectory {
        times: Vec::with_capacity(grid.n_samples()),
        norms: Vec::with_capacity(grid.n_samples()),
        populations: Vec::with_capacity(grid.n_samples()),
        snapshots: Vec::new(),
        max_hermiticity_deviation: 0.0,
    };

    let sample = |step: usize,
                  rho: &DMatrix<Complex64>,
                  cache: &mut EigenCache,
                  traj: &mut Trajectory|
     -> Result<()> {
        let t = grid.time_at_step(step);
        let dm = DensityMatrix::from_matrix(rho.clone()).expect("square");
        let trace = dm.trace().re;
        if !trace.is_finite() {
            return Err(Error::Divergence { t_ns: t });
        }
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::TraceDrift {
                t_ns: t,
                trace,
                tolerance: TRACE_TOL,
            });
        }
        let dev = dm.hermiticity_deviation();
        traj.max_hermiticity_deviation = traj.max_hermiticity_deviation.max(dev);
        let pops = track_populations_density(&samplers.tracker, cache, dim, t, &dm)?;
        let sample_idx = step / stride;
        if snapshot_at.binary_search(&sample_idx).is_ok() {
            traj.snapshots.push((t, Snapshot::Density(dm)));
        }
        traj.times.push(t);
        traj.norms.push(trace);
        traj.populations.push(pops);
        Ok(())
    };

    // stage = rho + w·k, elementwise
    fn stage_combine(
        stage: &mut DMatrix<Complex64>,
        rho: &DMatrix<Complex64>,
        k: &DMatrix<Complex64>,
        w: f64,
    ) {
        let s = stage.as_mut_slice();
        let r = rho.as_slice();
        let kk = k.as_slice();
        for i in 0..s.len() {
            s[i] = r[i] + kk[i] * w;
        }
    }

    sample(0, &rho, &mut cache, &mut traj)?;
    for step in 0..n_steps {
        let t = grid.time_at_step(step);
        let dt = grid.dt;
        lindblad_rhs_into(h, t, kappa, &rho, &mut k1, &mut scratch, &mut adj);
        stage_combine(&mut stage, &rho, &k1, 0.5 * dt);
        lindblad_rhs_into(h, t + 0.5 * dt, kappa, &stage, &mut k2, &mut scratch, &mut adj);
        stage_combine(&mut stage, &rho, &k2, 0.5 * dt);
        lindblad_rhs_into(h, t + 0.5 * dt, kappa, &stage, &mut k3, &mut scratch, &mut adj);
        stage_combine(&mut stage, &rho, &k3, dt);
        lindblad_rhs_into(h, t + dt, kappa, &stage, &mut k4, &mut scratch, &mut adj);
        {
            let r = rho.as_mut_slice();
            let (a, b, cc, d) = (k1.as_slice(), k2.as_slice(), k3.as_slice(), k4.as_slice());
            let w = dt / 6.0;
            for i in 0..r.len() {
                r[i] += (a[i] + (b[i] + cc[i]) * 2.0 + d[i]) * w;
            }
        }
        if (step + 1) % stride == 0 {
            sample(step + 1, &rho, &mut cache, &mut traj)?;
        }
    }
    Ok(traj)
}

/// Outcome of one dt-halving comparison.
#[derive(Clone, Debug)]
pub struct ConvergenceStage {
    pub dt_coarse: f64,
    pub dt_fine: f64,
    /// Largest pointwise difference of the tracked p₀ series.
    pub max_p0_diff: f64,
    /// Largest difference among the summary statistics.
    pub stats_diff: f64,
    pub passed: bool,
}

/// Result of [`convergence_check`]: up to two halvings.
#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub stages: Vec<ConvergenceStage>,
    pub passed: bool,
}

/// Rerun an experiment at `dt/2` and compare the fidelity series; one more
/// halving is attempted on failure, after which the report comes back
/// flagged. `run` maps a step size to the p₀ series (on a fixed ns cadence)
/// and its summary statistics.
pub fn convergence_check<F>(run: F, dt: f64) -> Result<ConvergenceReport>
where
    F: Fn(f64) -> Result<(Vec<f64>, FidelityStats)>,
{
    let compare = |coarse: &(Vec<f64>, FidelityStats),
                   fine: &(Vec<f64>, FidelityStats),
                   dt_coarse: f64,
                   dt_fine: f64|
     -> Result<ConvergenceStage> {
        if coarse.0.len() != fine.0.len() {
            return Err(Error::InvalidArgument {
                reason: format!(
                    "convergence runs sampled {} vs {} points; use a fixed ns cadence",
                    coarse.0.len(),
                    fine.0.len()
                ),
            });
        }
        let max_p0_diff = coarse
            .0
            .iter()
            .zip(&fine.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let stats_diff = [
            (coarse.1.value_at_t - fine.1.value_at_t).abs(),
            (coarse.1.tail_mean - fine.1.tail_mean).abs(),
            (coarse.1.tail_std - fine.1.tail_std).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        let passed = max_p0_diff < CONVERGENCE_TOL;
        Ok(ConvergenceStage {
            dt_coarse,
            dt_fine,
            max_p0_diff,
            stats_diff,
            passed,
        })
    };

    let base = run(dt)?;
    let half = run(dt / 2.0)?;
    let first = compare(&base, &half, dt, dt / 2.0)?;
    if first.passed {
        return Ok(ConvergenceReport {
            stages: vec![first],
            passed: true,
        });
    }
    let quarter = run(dt / 4.0)?;
    let second = compare(&half, &quarter, dt / 2.0, dt / 4.0)?;
    let passed = second.passed;
    Ok(ConvergenceReport {
        stages: vec![first, second],
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::{annihilation, hermitian_eigh, number_operator};
    use crate::mhz_to_rad_per_ns;
    use crate::model::{build_h_rwa, build_term_set};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn fig2_model(dim: usize) -> (ModelParams, TermSet) {
        let chi = mhz_to_rad_per_ns(68.0);
        let params = ModelParams::new(
            mhz_to_rad_per_ns(16_000.0),
            chi,
            Schedule::linear_ramp_hold(mhz_to_rad_per_ns(200.0), 50.0).unwrap(),
            Schedule::constant(mhz_to_rad_per_ns(-6.7)),
            dim,
        )
        .unwrap();
        let terms = build_term_set(chi, dim).unwrap();
        (params, terms)
    }

    #[test]
    fn banded_rwa_apply_matches_dense_matrix() {
        let dim = 24;
        let chi = mhz_to_rad_per_ns(68.0);
        let h = RwaHamiltonian::new(
            chi,
            Schedule::linear_ramp_hold(mhz_to_rad_per_ns(200.0), 50.0).unwrap(),
            Schedule::linear_decay_to_zero(mhz_to_rad_per_ns(-67.0), 50.0).unwrap(),
            dim,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let t = rng.gen_range(0.0..80.0);
            let psi: Vec<Complex64> = (0..dim)
                .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let mut out = vec![c(0.0, 0.0); dim];
            h.apply_into(t, &psi, &mut out);
            let dense = h
                .matrix_at(t)
                .apply(&StateVector::from_amplitudes(psi.clone()));
            for r in 0..dim {
                assert!((out[r] - dense.amplitude(r)).norm() < 1e-12 * dense.norm());
            }
        }
    }

    #[test]
    fn banded_rotating_frame_apply_matches_dense_matrix() {
        let dim = 30;
        let (params, terms) = fig2_model(dim);
        let h = RotatingFrameHamiltonian::new(params, &terms).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let t = rng.gen_range(0.0..80.0);
            let psi: Vec<Complex64> = (0..dim)
                .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let mut out = vec![c(0.0, 0.0); dim];
            h.apply_into(t, &psi, &mut out);
            let dense = h
                .matrix_at(t)
                .apply(&StateVector::from_amplitudes(psi.clone()));
            let scale = dense.norm().max(1.0);
            for r in 0..dim {
                assert!(
                    (out[r] - dense.amplitude(r)).norm() < 1e-11 * scale,
                    "row {r}: {} vs {}",
                    out[r],
                    dense.amplitude(r)
                );
            }
        }
    }

    #[test]
    fn driven_apply_matches_dense_matrix() {
        let dim = 18;
        let chi = mhz_to_rad_per_ns(68.0);
        let beta = mhz_to_rad_per_ns(200.0);
        let inner = RwaHamiltonian::new(
            chi,
            Schedule::constant(beta),
            Schedule::constant(0.0),
            dim,
        )
        .unwrap();
        let h = DrivenHamiltonian::new(inner, Schedule::rz_envelope(beta, chi, 10.0).unwrap());
        let psi: Vec<Complex64> = (0..dim).map(|n| c(0.3 / (n as f64 + 1.0), 0.1)).collect();
        let mut out = vec![c(0.0, 0.0); dim];
        h.apply_into(3.3, &psi, &mut out);
        let dense = h
            .matrix_at(3.3)
            .apply(&StateVector::from_amplitudes(psi.clone()));
        for r in 0..dim {
            assert!((out[r] - dense.amplitude(r)).norm() < 1e-13);
        }
    }

    #[test]
    fn rk4_single_step_phase_accuracy() {
        // constant diagonal ω·n̂: |1⟩ acquires exactly e^{-iω dt}
        let dim = 4;
        let omega = 2.0;
        let h = FrozenHamiltonian::new(
            number_operator(dim).unwrap().scale(c(omega, 0.0)),
        );
        let psi0 = StateVector::basis_state(dim, 1).unwrap();
        let dt = 1e-2;
        let psi1 = rk4_step(&psi0, 0.0, dt, &h).unwrap();
        let exact = Complex64::cis(-omega * dt);
        let err = (psi1.amplitude(1) - exact).norm();
        assert!(err < (omega * dt).powi(5) / 100.0, "one-step error {err:.3e}");
        assert!((psi1.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rk4_two_level_truncation_norm() {
        let beta = 0.8;
        let h = FrozenHamiltonian::new(build_h_rwa(0.0, 1e-12, beta, 2).unwrap());
        let mut psi = StateVector::basis_state(2, 0).unwrap();
        let dt = 1e-3;
        for k in 0..1000 {
            psi = rk4_step(&psi, k as f64 * dt, dt, &h).unwrap();
        }
        assert!((psi.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rk4_matches_rabi_closed_form() {
        // H = Ω σ_x on two levels: ψ(t) = cos(Ωt)|0⟩ - i sin(Ωt)|1⟩
        let omega = 1.0;
        let mut m = OperatorMatrix::zeros(2);
        m.set_entry(0, 1, c(omega, 0.0));
        m.set_entry(1, 0, c(omega, 0.0));
        let h = FrozenHamiltonian::new(m);
        let dt = 1e-3 / omega;
        let steps = 10_000;
        let mut psi = StateVector::basis_state(2, 0).unwrap();
        let mut max_err: f64 = 0.0;
        for k in 0..steps {
            psi = rk4_step(&psi, k as f64 * dt, dt, &h).unwrap();
            let t = (k + 1) as f64 * dt;
            let exact0 = c((omega * t).cos(), 0.0);
            let exact1 = c(0.0, -(omega * t).sin());
            max_err = max_err
                .max((psi.amplitude(0) - exact0).norm())
                .max((psi.amplitude(1) - exact1).norm());
        }
        assert!(max_err < 1e-10, "max error {max_err:.3e}");
    }

    #[test]
    fn rk4_divergence_is_detected() {
        let h = FrozenHamiltonian::new(
            number_operator(4).unwrap().scale(c(1e300, 0.0)),
        );
        let psi0 = StateVector::basis_state(4, 1).unwrap();
        let result = rk4_step(&psi0, 0.0, 1e10, &h);
        assert!(matches!(result, Err(Error::Divergence { .. })));
    }

    #[test]
    fn time_grid_validation() {
        assert!(TimeGrid::new(0.0, 10.0, 1e-3, 100).is_ok());
        assert!(TimeGrid::new(0.0, 10.0, -1.0, 1).is_err());
        assert!(TimeGrid::new(0.0, 0.0, 1e-3, 1).is_err());
        assert!(TimeGrid::new(0.0, 10.0, 3e-3, 1).is_err()); // non-integer step count
        assert!(TimeGrid::new(0.0, 10.0, 1e-3, 0).is_err());
        let g = TimeGrid::new(0.0, 10.0, 1e-3, 100).unwrap();
        assert_eq!(g.n_steps(), 10_000);
        assert_eq!(g.n_samples(), 101);
        assert_relative_eq!(g.sample_interval(), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn stationary_eigenstate_keeps_constant_populations() {
        let dim = 30;
        let chi = mhz_to_rad_per_ns(68.0);
        let beta0 = mhz_to_rad_per_ns(200.0);
        let delta = mhz_to_rad_per_ns(-6.7);
        let h_m = build_h_rwa(delta, chi, beta0, dim).unwrap();
        let es = hermitian_eigh(&h_m).unwrap();
        let psi0 = es.states[0].clone();
        let h = RwaHamiltonian::new(
            chi,
            Schedule::constant(beta0),
            Schedule::constant(delta),
            dim,
        )
        .unwrap();
        let grid = TimeGrid::new(0.0, 10.0, 1e-3, 1000).unwrap();
        let samplers = SamplerConfig::instantaneous(
            Schedule::constant(beta0),
            Schedule::constant(delta),
            chi,
            3,
        );
        let traj = propagate_state(&psi0, &grid, &h, &samplers).unwrap();
        for pops in &traj.populations {
            assert!((pops[0] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn parity_is_conserved_exactly_for_even_initial_states() {
        let dim = 24;
        let (params, terms) = fig2_model(dim);
        let h = RotatingFrameHamiltonian::new(params, &terms).unwrap();
        let psi0 = StateVector::vacuum(dim);
        let grid = TimeGrid::new(0.0, 0.1, 1e-5, 100).unwrap();
        let traj = propagate_state(
            &psi0,
            &grid,
            &h,
            &SamplerConfig::none().with_snapshots(vec![0.1]),
        )
        .unwrap();
        match &traj.snapshots[0].1 {
            Snapshot::Pure(psi) => {
                let (_, odd) = psi.parity_weights();
                assert_eq!(odd, 0.0);
            }
            _ => panic!("expected pure snapshot"),
        }
    }

    #[test]
    fn lindblad_rhs_closed_system_matches_von_neumann() {
        let dim = 12;
        let h = build_h_rwa(
            mhz_to_rad_per_ns(-6.7),
            mhz_to_rad_per_ns(68.0),
            mhz_to_rad_per_ns(100.0),
            dim,
        )
        .unwrap();
        let psi = crate::fockspace::coherent_state(c(1.0, 0.3), dim)
            .unwrap()
            .state;
        let rho = DensityMatrix::from_pure(&psi);
        let rhs = lindblad_rhs(&rho, &h, 0.0);
        // dρ/dt = -i(Hψ)(ψ†) + i ψ(Hψ)† for a pure state
        let hpsi = h.apply(&psi);
        for r in 0..dim {
            for col in 0..dim {
                let expect = c(0.0, -1.0)
                    * (hpsi.amplitude(r) * psi.amplitude(col).conj()
                        - psi.amplitude(r) * hpsi.amplitude(col).conj());
                assert!((rhs.entry(r, col) - expect).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn lindblad_rhs_is_traceless() {
        let dim = 16;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = build_h_rwa(-0.1, 0.4, 0.9, dim).unwrap();
        for _ in 0..10 {
            let psi: Vec<Complex64> = (0..dim)
                .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let psi = StateVector::from_amplitudes(psi).normalized();
            let rho = DensityMatrix::from_pure(&psi);
            let rhs = lindblad_rhs(&rho, &h, 0.37);
            assert!(rhs.trace().norm() < 1e-12);
        }
    }

    #[test]
    fn lindblad_decay_of_fock_one_matches_exponential() {
        // H = 0, ρ = |1⟩⟨1|: ⟨n̂⟩(t) = e^{-κt}
        let dim = 4;
        let kappa = 0.25;
        let h = FrozenHamiltonian::new(OperatorMatrix::zeros(dim));
        let rho0 = DensityMatrix::from_pure(&StateVector::basis_state(dim, 1).unwrap());
        let grid = TimeGrid::new(0.0, 4.0, 1e-3, 400).unwrap();
        let traj = propagate_density(
            &rho0,
            &grid,
            &h,
            kappa,
            &SamplerConfig::none().with_snapshots(vec![2.0, 4.0]),
        )
        .unwrap();
        for (t, snap) in &traj.snapshots {
            let rho = match snap {
                Snapshot::Density(d) => d,
                _ => panic!(),
            };
            let n_op = number_operator(dim).unwrap();
            let n_mean = (n_op.as_matrix() * rho.as_matrix()).trace().re;
            assert_relative_eq!(n_mean, (-kappa * t).exp(), epsilon = 1e-8);
        }
        assert!(traj.max_hermiticity_deviation < 1e-12);
        for trace in &traj.norms {
            assert!((trace - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn banded_density_rhs_matches_dense_reference() {
        let dim = 14;
        let chi = mhz_to_rad_per_ns(68.0);
        let h = RwaHamiltonian::new(
            chi,
            Schedule::linear_ramp_hold(mhz_to_rad_per_ns(200.0), 10.0).unwrap(),
            Schedule::constant(mhz_to_rad_per_ns(-6.7)),
            dim,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let psi: Vec<Complex64> = (0..dim)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let psi = StateVector::from_amplitudes(psi).normalized();
        let rho = DensityMatrix::from_pure(&psi);
        let kappa = 0.11;
        let t = 3.7;

        let mut out = DMatrix::zeros(dim, dim);
        let mut scratch = DMatrix::zeros(dim, dim);
        let mut adj = DMatrix::zeros(dim, dim);
        lindblad_rhs_into(&h, t, kappa, rho.as_matrix(), &mut out, &mut scratch, &mut adj);
        let reference = lindblad_rhs(&rho, &h.matrix_at(t), kappa);
        for r in 0..dim {
            for col in 0..dim {
                assert!((out[(r, col)] - reference.entry(r, col)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn density_and_pure_propagation_agree_without_decay() {
        let dim = 20;
        let chi = mhz_to_rad_per_ns(68.0);
        let beta = Schedule::linear_ramp_hold(mhz_to_rad_per_ns(200.0), 2.0).unwrap();
        let delta = Schedule::constant(mhz_to_rad_per_ns(-6.7));
        let h = RwaHamiltonian::new(chi, beta.clone(), delta.clone(), dim).unwrap();
        let grid = TimeGrid::new(0.0, 2.0, 1e-3, 200).unwrap();
        let samplers = SamplerConfig::instantaneous(beta, delta, chi, 3);
        let psi0 = StateVector::vacuum(dim);
        let pure = propagate_state(&psi0, &grid, &h, &samplers).unwrap();
        let dens =
            propagate_density(&DensityMatrix::from_pure(&psi0), &grid, &h, 0.0, &samplers).unwrap();
        for (p, d) in pure.populations.iter().zip(&dens.populations) {
            for (a, b) in p.iter().zip(d) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn convergence_check_passes_fine_and_flags_coarse() {
        // smooth problem: two-level Rabi; p0(t) series converges rapidly
        let runner = |dt: f64| -> Result<(Vec<f64>, FidelityStats)> {
            let omega = 1.0;
            let mut m = OperatorMatrix::zeros(2);
            m.set_entry(0, 1, c(omega, 0.0));
            m.set_entry(1, 0, c(omega, 0.0));
            let h = FrozenHamiltonian::new(m);
            let stride = (0.5 / dt).round() as usize;
            let grid = TimeGrid::new(0.0, 4.0, dt, stride)?;
            let samplers =
                SamplerConfig::fixed_states(vec![StateVector::basis_state(2, 0).unwrap()]);
            let traj = propagate_state(
                &StateVector::basis_state(2, 0).unwrap(),
                &grid,
                &h,
                &samplers,
            )?;
            let series = traj.population_series(0);
            let stats = observables::fidelity_stats(&traj, 2.0, 2.0)?;
            Ok((series, stats))
        };
        let report = convergence_check(runner, 1e-3).unwrap();
        assert!(report.passed);
        assert!(report.stages[0].max_p0_diff < 1e-10);

        // a deliberately coarse step dies on the norm monitor before any
        // comparison can be made; the error advises a smaller step
        let err = convergence_check(runner, 0.5).unwrap_err();
        assert!(matches!(err, Error::NormDrift { .. }));
    }

    #[test]
    fn convergence_check_flags_runs_that_do_not_settle() {
        // synthetic series with an O(dt) offset: no halving converges
        let runner = |dt: f64| -> Result<(Vec<f64>, FidelityStats)> {
            let series: Vec<f64> = (0..40).map(|k| 0.9 + dt * (k as f64).sin()).collect();
            Ok((
                series,
                FidelityStats {
                    value_at_t: 0.9,
                    tail_mean: 0.9 + dt,
                    tail_std: 0.0,
                    tail_window: (0.0, 1.0),
                },
            ))
        };
        let report = convergence_check(runner, 0.3).unwrap();
        assert!(!report.passed);
        assert_eq!(report.stages.len(), 2);
        assert!(report.stages[1].max_p0_diff > CONVERGENCE_TOL);
    }

    #[test]
    fn norm_drift_raises_step_size_error() {
        // large ‖H‖·dt: RK4 is unstable and the norm grows
        let dim = 2;
        let mut m = OperatorMatrix::zeros(dim);
        m.set_entry(0, 1, c(30.0, 0.0));
        m.set_entry(1, 0, c(30.0, 0.0));
        let h = FrozenHamiltonian::new(m);
        let grid = TimeGrid::new(0.0, 10.0, 0.1, 1).unwrap();
        let err = propagate_state(
            &StateVector::basis_state(dim, 0).unwrap(),
            &grid,
            &h,
            &SamplerConfig::none(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NormDrift { .. } | Error::Divergence { .. }));
    }

    #[test]
    fn annihilation_band_agrees_with_dissipator_indexing() {
        // spot-check the closed-form dissipator against explicit operators
        let dim = 6;
        let a = annihilation(dim).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let psi: Vec<Complex64> = (0..dim)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let psi = StateVector::from_amplitudes(psi).normalized();
        let rho = DensityMatrix::from_pure(&psi);
        let kappa = 1.3;
        let rhs = lindblad_rhs(&rho, &OperatorMatrix::zeros(dim), kappa);
        let rm = rho.as_matrix();
        let am = a.as_matrix();
        let expect = (am * rm * am.adjoint()
            - (am.adjoint() * am * rm + rm * am.adjoint() * am).scale(0.5))
            * Complex64::new(kappa, 0.0);
        for r in 0..dim {
            for col in 0..dim {
                assert!((rhs.entry(r, col) - expect[(r, col)]).norm() < 1e-12);
            }
        }
    }
}

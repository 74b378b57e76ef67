//! Derived quantities: instantaneous-eigenbasis populations, fidelity
//! statistics, adiabatic coefficients, Wigner functions and the analytic
//! parametron relations.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fockspace::{
    creation, hermitian_eigh, DensityMatrix, EigenSystem, OperatorMatrix, Parity, StateVector,
};
use crate::propagation::Trajectory;

/// Absolute energy gap (rad/ns) below which two levels are treated as
/// degenerate by [`adiabatic_h`].
pub const DEGENERACY_GAP: f64 = 1e-9;

/// Eigendecomposition ordered for level tracking: descending in energy, but
/// near-degenerate adjacent pairs of opposite parity always put the even
/// member first. Level identity under the quasi-degeneracy of the top cat
/// pair is thereby resolved by parity rather than by an energy comparison at
/// rounding scale.
///
/// Operators with the structural parity form (exact zeros wherever row and
/// column parity differ — every in-scope Hamiltonian) are diagonalized per
/// parity sector, which makes the parity labels exact and leaves the
/// eigenvectors with hard zeros in the opposite sector.
pub fn parity_ordered_eigh(h: &OperatorMatrix) -> Result<EigenSystem> {
    let mut es = if is_parity_structured(h) {
        parity_block_eigh(h)?
    } else {
        hermitian_eigh(h)?
    };
    let scale = es
        .energies
        .iter()
        .fold(0.0_f64, |m, e| m.max(e.abs()))
        .max(1e-300);
    let tol = 1e-10 * scale;
    for i in 0..es.energies.len().saturating_sub(1) {
        let near = (es.energies[i] - es.energies[i + 1]).abs() <= tol;
        if near && es.parities[i] == Parity::Odd && es.parities[i + 1] == Parity::Even {
            es.energies.swap(i, i + 1);
            es.states.swap(i, i + 1);
            es.parities.swap(i, i + 1);
        }
    }
    Ok(es)
}

/// Exact structural test: no coupling between the parity sectors.
fn is_parity_structured(h: &OperatorMatrix) -> bool {
    let dim = h.dim();
    for r in 0..dim {
        for c in 0..dim {
            if (r + c) % 2 == 1 && h.entry(r, c) != Complex64::new(0.0, 0.0) {
                return false;
            }
        }
    }
    true
}

fn parity_block_eigh(h: &OperatorMatrix) -> Result<EigenSystem> {
    let dim = h.dim();
    let mut levels: Vec<(f64, StateVector, Parity)> = Vec::with_capacity(dim);
    for (parity, offset) in [(Parity::Even, 0usize), (Parity::Odd, 1usize)] {
        let indices: Vec<usize> = (offset..dim).step_by(2).collect();
        if indices.len() < 2 {
            // a 1x1 sector: the entry is its own eigenvalue
            if let Some(&i) = indices.first() {
                let mut v = vec![Complex64::new(0.0, 0.0); dim];
                v[i] = Complex64::new(1.0, 0.0);
                levels.push((h.entry(i, i).re, StateVector::from_amplitudes(v), parity));
            }
            continue;
        }
        let block =
            OperatorMatrix::from_fn(indices.len(), |i, j| h.entry(indices[i], indices[j]));
        let es = hermitian_eigh(&block)?;
        for (energy, state) in es.energies.iter().zip(&es.states) {
            let mut v = vec![Complex64::new(0.0, 0.0); dim];
            for (b, &full_index) in indices.iter().enumerate() {
                v[full_index] = state.amplitude(b);
            }
            levels.push((*energy, StateVector::from_amplitudes(v), parity));
        }
    }
    // descending energy; even first on exact ties
    levels.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("finite energies")
            .then_with(|| {
                let rank = |p: Parity| if p == Parity::Even { 0 } else { 1 };
                rank(a.2).cmp(&rank(b.2))
            })
    });
    let mut energies = Vec::with_capacity(dim);
    let mut states = Vec::with_capacity(dim);
    let mut parities = Vec::with_capacity(dim);
    for (e, s, p) in levels {
        energies.push(e);
        states.push(s);
        parities.push(p);
    }
    Ok(EigenSystem {
        energies,
        states,
        parities,
    })
}

/// Populations `p_n = |⟨φ_n|ψ⟩|²` of the `count` highest levels of the given
/// RWA Hamiltonian, in the parity-stabilized level order.
pub fn instantaneous_populations(
    psi: &StateVector,
    h_rwa_now: &OperatorMatrix,
    count: usize,
) -> Result<Vec<f64>> {
    let es = parity_ordered_eigh(h_rwa_now)?;
    Ok(es.states[..count.min(es.dim())]
        .iter()
        .map(|phi| phi.overlap_probability(psi))
        .collect())
}

/// Fidelity summary over the hold window after a control.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FidelityStats {
    /// p₀ at the end of the control, t = T.
    pub value_at_t: f64,
    /// Mean of p₀ over samples with t > T.
    pub tail_mean: f64,
    /// Population standard deviation of p₀ over the same samples.
    pub tail_std: f64,
    /// The window (T, T + window] the tail statistics cover, in ns.
    pub tail_window: (f64, f64),
}

/// Mean and population standard deviation of the tracked p₀ over the samples
/// with `T < t ≤ T + window`, plus the value at `t = T`.
pub fn fidelity_stats(traj: &Trajectory, t_end_of_control: f64, window: f64) -> Result<FidelityStats> {
    if traj.times.len() < 2 {
        return Err(Error::InvalidArgument {
            reason: "trajectory has fewer than two samples".to_string(),
        });
    }
    if traj.populations.iter().any(|p| p.is_empty()) {
        return Err(Error::InvalidArgument {
            reason: "trajectory carries no tracked populations".to_string(),
        });
    }
    if !(window > 0.0) {
        return Err(Error::EmptyWindow {
            from_ns: t_end_of_control,
            to_ns: t_end_of_control + window,
        });
    }
    let interval = traj.times[1] - traj.times[0];
    let idx_t = ((t_end_of_control - traj.times[0]) / interval).round() as i64;
    if idx_t < 0 || idx_t as usize >= traj.times.len() {
        return Err(Error::InvalidArgument {
            reason: format!("t = {t_end_of_control} ns is outside the sampled range"),
        });
    }
    let idx_t = idx_t as usize;
    let idx_end = (idx_t + (window / interval).round() as usize).min(traj.times.len() - 1);
    if idx_end <= idx_t {
        return Err(Error::EmptyWindow {
            from_ns: t_end_of_control,
            to_ns: t_end_of_control + window,
        });
    }
    let tail: Vec<f64> = (idx_t + 1..=idx_end)
        .map(|s| traj.populations[s][0])
        .collect();
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let var = tail.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / tail.len() as f64;
    Ok(FidelityStats {
        value_at_t: traj.populations[idx_t][0],
        tail_mean: mean,
        tail_std: var.sqrt(),
        tail_window: (t_end_of_control, t_end_of_control + window),
    })
}

/// Adiabatic coefficient between levels `m` and `n` of `h_now`:
/// `|⟨φ_n|Ḣ|φ_m⟩| / (E_n - E_m)²`, the nondegenerate evaluation of
/// `|⟨φ_n|φ̇_m⟩| / |E_n - E_m|`.
///
/// `h_dot_now` is the analytic time derivative of the Hamiltonian. Levels
/// closer than [`DEGENERACY_GAP`] are rejected; resolve such pairs by parity.
pub fn adiabatic_h(
    h_now: &OperatorMatrix,
    h_dot_now: &OperatorMatrix,
    m: usize,
    n: usize,
) -> Result<f64> {
    if m == n {
        return Err(Error::InvalidArgument {
            reason: "adiabatic coefficient requires two distinct levels".to_string(),
        });
    }
    let es = parity_ordered_eigh(h_now)?;
    if m >= es.dim() || n >= es.dim() {
        return Err(Error::InvalidArgument {
            reason: format!("level index out of range: ({m}, {n}) with dim {}", es.dim()),
        });
    }
    let gap = es.energies[n] - es.energies[m];
    if gap.abs() < DEGENERACY_GAP {
        return Err(Error::DegenerateLevels {
            m,
            n,
            gap: gap.abs(),
        });
    }
    // evaluate in canonical index order so h(m,n) == h(n,m) bit-for-bit
    let (lo, hi) = (m.min(n), m.max(n));
    let element = h_dot_now.matrix_element(&es.states[hi], &es.states[lo]);
    Ok(element.norm() / (gap * gap))
}

/// Steady-state coherent amplitude `α = √((2β + Δ)/χ)`.
pub fn alpha_amplitude(beta: f64, delta: f64, chi: f64) -> Result<f64> {
    if !(chi > 0.0) {
        return Err(Error::InvalidArgument {
            reason: format!("Kerr nonlinearity must be positive, got {chi}"),
        });
    }
    let radicand = (2.0 * beta + delta) / chi;
    if radicand < 0.0 {
        return Err(Error::InvalidRegime { radicand });
    }
    Ok(radicand.sqrt())
}

/// Parametron phase-decay rate `γ = 2κ|α|²` induced by single-photon loss.
pub fn dephasing_rate(kappa: f64, alpha: f64) -> f64 {
    2.0 * kappa * alpha * alpha
}

/// Rectangular grid specification for Wigner evaluation, in the dimensionless
/// quadratures `x = Re γ`, `p = Im γ` of the displacement argument.
#[derive(Clone, Copy, Debug)]
pub struct WignerGridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub np: usize,
}

impl Default for WignerGridSpec {
    fn default() -> Self {
        Self {
            x_min: -4.0,
            x_max: 4.0,
            nx: 81,
            p_min: -4.0,
            p_max: 4.0,
            np: 81,
        }
    }
}

impl WignerGridSpec {
    fn validate(&self) -> Result<()> {
        let ok = self.nx >= 1
            && self.np >= 1
            && self.x_min.is_finite()
            && self.x_max.is_finite()
            && self.p_min.is_finite()
            && self.p_max.is_finite()
            && (self.nx == 1 || self.x_max > self.x_min)
            && (self.np == 1 || self.p_max > self.p_min);
        if !ok {
            return Err(Error::InvalidArgument {
                reason: "degenerate Wigner grid specification".to_string(),
            });
        }
        Ok(())
    }

    pub fn xs(&self) -> Vec<f64> {
        axis(self.x_min, self.x_max, self.nx)
    }

    pub fn ps(&self) -> Vec<f64> {
        axis(self.p_min, self.p_max, self.np)
    }
}

fn axis(min: f64, max: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![min];
    }
    (0..n)
        .map(|i| min + (max - min) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Wigner function samples `W(x + ip)` on a rectangular grid.
#[derive(Clone, Debug)]
pub struct WignerGrid {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    values: Vec<f64>,
    pub truncation_warning: bool,
}

impl WignerGrid {
    pub fn value(&self, ix: usize, ip: usize) -> f64 {
        self.values[ip * self.xs.len() + ix]
    }

    /// Riemann-sum approximation of `∫ W dx dp` on this grid.
    pub fn riemann_sum(&self) -> f64 {
        let dx = if self.xs.len() > 1 {
            self.xs[1] - self.xs[0]
        } else {
            1.0
        };
        let dp = if self.ps.len() > 1 {
            self.ps[1] - self.ps[0]
        } else {
            1.0
        };
        self.values.iter().sum::<f64>() * dx * dp
    }

    /// `(x, p, W)` triples in row order (p outer, x inner).
    pub fn records(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.ps.iter().enumerate().flat_map(move |(ip, &p)| {
            self.xs
                .iter()
                .enumerate()
                .map(move |(ix, &x)| (x, p, self.value(ix, ip)))
        })
    }
}

/// State input for [`wigner`].
pub enum WignerInput<'a> {
    Pure(&'a StateVector),
    Density(&'a DensityMatrix),
}

impl<'a> From<&'a StateVector> for WignerInput<'a> {
    fn from(s: &'a StateVector) -> Self {
        WignerInput::Pure(s)
    }
}

impl<'a> From<&'a DensityMatrix> for WignerInput<'a> {
    fn from(r: &'a DensityMatrix) -> Self {
        WignerInput::Density(r)
    }
}

/// Matrix exponential by scaling and squaring with a Taylor expansion of the
/// scaled matrix.
fn expm(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let dim = m.nrows();
    let norm = m.norm();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = m / Complex64::new((2.0_f64).powi(squarings as i32), 0.0);
    let mut result = DMatrix::<Complex64>::identity(dim, dim);
    let mut term = DMatrix::<Complex64>::identity(dim, dim);
    let mut k = 1.0;
    loop {
        term = (&term * &scaled) / Complex64::new(k, 0.0);
        result += &term;
        if term.norm() < 1e-18 {
            break;
        }
        k += 1.0;
        debug_assert!(k < 60.0, "Taylor series failed to converge");
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Displacement operator `D(γ) = exp(γ a† - γ* a)` on the truncated space.
pub fn displacement(gamma: Complex64, dim: usize) -> Result<OperatorMatrix> {
    let adag = creation(dim)?;
    let generator = adag
        .scale(gamma)
        .sub(&adag.dagger().scale(gamma.conj()));
    Ok(OperatorMatrix::from_matrix(expm(generator.as_matrix())).expect("square"))
}

/// Squared-norm weight on the top few Fock levels; a proxy for truncation
/// inadequacy of the state.
fn cutoff_weight_pure(psi: &StateVector) -> f64 {
    let dim = psi.dim();
    (dim.saturating_sub(4)..dim)
        .map(|n| psi.amplitude(n).norm_sqr())
        .sum()
}

fn cutoff_weight_density(rho: &DensityMatrix) -> f64 {
    let dim = rho.dim();
    (dim.saturating_sub(4)..dim)
        .map(|n| rho.entry(n, n).re)
        .sum()
}

fn mean_photon_number(state: &WignerInput<'_>) -> f64 {
    match state {
        WignerInput::Pure(psi) => (0..psi.dim())
            .map(|n| n as f64 * psi.amplitude(n).norm_sqr())
            .sum(),
        WignerInput::Density(rho) => (0..rho.dim())
            .map(|n| n as f64 * rho.entry(n, n).re)
            .sum(),
    }
}

/// Truncation needed so that the state displaced to the farthest grid corner
/// still fits: effective amplitude `√n̄ + r_max` with a coherent-tail margin.
fn embedding_dim(state: &WignerInput<'_>, r_max: f64) -> usize {
    let dim = match state {
        WignerInput::Pure(psi) => psi.dim(),
        WignerInput::Density(rho) => rho.dim(),
    };
    let a = mean_photon_number(state).max(0.0).sqrt() + r_max;
    dim.max((a * a + 6.0 * a + 10.0).ceil() as usize)
}

/// Wigner function `W(γ) = (2/π)·Tr[D†(γ) ρ D(γ) Π]` evaluated per grid node
/// `γ = x + ip`, with `Π` the photon-number parity operator.
///
/// The state is zero-padded so displacements to the grid edge stay inside the
/// truncation, and the node displacements factorize exactly as
/// `D(x + ip) = D(x)·D(ip)·e^{ixp}` (the global phase cancels in the trace),
/// so only one matrix exponential per axis value is needed.
pub fn wigner<'a>(state: impl Into<WignerInput<'a>>, spec: &WignerGridSpec) -> Result<WignerGrid> {
    let state = state.into();
    spec.validate()?;
    let truncation_warning = match &state {
        WignerInput::Pure(psi) => cutoff_weight_pure(psi) > 1e-6,
        WignerInput::Density(rho) => cutoff_weight_density(rho) > 1e-6,
    };
    let xs = spec.xs();
    let ps = spec.ps();
    let r_max = xs
        .iter()
        .map(|x| x.abs())
        .fold(0.0, f64::max)
        .hypot(ps.iter().map(|p| p.abs()).fold(0.0, f64::max));
    let dim = embedding_dim(&state, r_max);

    let adag = creation(dim)?;
    let a = adag.dagger();
    // D(x) = exp(x(a† - a)), D(ip) = exp(ip(a† + a))
    let gen_x = adag.sub(&a);
    let gen_p = adag.add(&a);
    let dx_adj: Vec<DMatrix<Complex64>> = crate::parallel::map(xs.clone(), |x| {
        expm(&(gen_x.as_matrix() * Complex64::new(-x, 0.0)))
    });
    let dp: Vec<DMatrix<Complex64>> = crate::parallel::map(ps.clone(), |p| {
        expm(&(gen_p.as_matrix() * Complex64::new(0.0, p)))
    });

    let parity_trace = |v: &DMatrix<Complex64>, col: usize| -> f64 {
        let mut sum = 0.0;
        for n in 0..dim {
            let w = v[(n, col)].norm_sqr();
            sum += if n % 2 == 0 { w } else { -w };
        }
        sum
    };

    // columns[ix][ip]
    let columns: Vec<Vec<f64>> = match &state {
        WignerInput::Pure(psi) => {
            let mut padded = DMatrix::<Complex64>::zeros(dim, 1);
            for n in 0..psi.dim() {
                padded[(n, 0)] = psi.amplitude(n);
            }
            crate::parallel::map((0..xs.len()).collect(), |ix| {
                let u = &dx_adj[ix] * &padded;
                ps.iter()
                    .enumerate()
                    .map(|(ip, _)| {
                        let v = dp[ip].adjoint() * &u;
                        2.0 / PI * parity_trace(&v, 0)
                    })
                    .collect()
            })
        }
        WignerInput::Density(rho) => {
            let mut padded = DMatrix::<Complex64>::zeros(dim, dim);
            for r in 0..rho.dim() {
                for c in 0..rho.dim() {
                    padded[(r, c)] = rho.entry(r, c);
                }
            }
            // Q_p = D(ip) Π D(ip)†; then W = (2/π)·Tr[(D_x† ρ D_x)·Q_p]
            let qs: Vec<DMatrix<Complex64>> = crate::parallel::map(
                (0..ps.len()).collect(),
                |ip| {
                    let mut pi_dp_adj = dp[ip].adjoint();
                    for r in 0..dim {
                        if r % 2 == 1 {
                            for c in 0..dim {
                                pi_dp_adj[(r, c)] = -pi_dp_adj[(r, c)];
                            }
                        }
                    }
                    &dp[ip] * pi_dp_adj
                },
            );
            crate::parallel::map((0..xs.len()).collect(), |ix| {
                let m = &dx_adj[ix] * &padded * dx_adj[ix].adjoint();
                qs.iter()
                    .map(|q| {
                        let mut tr = Complex64::new(0.0, 0.0);
                        for r in 0..dim {
                            for c in 0..dim {
                                tr += m[(r, c)] * q[(c, r)];
                            }
                        }
                        2.0 / PI * tr.re
                    })
                    .collect()
            })
        }
    };

    let mut values = vec![0.0; xs.len() * ps.len()];
    for (ix, col) in columns.iter().enumerate() {
        for (ip, w) in col.iter().enumerate() {
            values[ip * xs.len() + ix] = *w;
        }
    }
    Ok(WignerGrid {
        xs,
        ps,
        values,
        truncation_warning,
    })
}

/// Single-point Wigner evaluation.
pub fn wigner_at<'a>(state: impl Into<WignerInput<'a>>, gamma: Complex64) -> Result<f64> {
    let spec = WignerGridSpec {
        x_min: gamma.re,
        x_max: gamma.re,
        nx: 1,
        p_min: gamma.im,
        p_max: gamma.im,
        np: 1,
    };
    Ok(wigner(state, &spec)?.value(0, 0))
}

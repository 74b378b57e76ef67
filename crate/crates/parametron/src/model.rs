//! Parametron Hamiltonians in the frame rotating at half the pump frequency.
//!
//! The full rotating-frame Hamiltonian is handled as a phase-grouped
//! decomposition `H(t) = Σ_k c_k(t)·M_k` with fixed precomputed matrices: the
//! quartic (Kerr) term splits into five groups by net phase index
//! `k ∈ {-4,-2,0,2,4}` and the pump term into three groups `k ∈ {-2,0,2}`.
//! Keeping only the time-independent pieces recovers the usual
//! `Δ a†a - (χ/2) a†a†aa + β(a² + a†²)` form.
//!
//! The time-dependent detuning is realized by letting the bare resonator
//! frequency `ωc⁰(t) = ωp/2 + Δ(t) + χ` vary while `ωp` stays fixed, so the
//! rotating frame itself never moves.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fockspace::{annihilation, creation, number_operator, OperatorMatrix};
use crate::schedules::Schedule;

/// Model parameters for one propagation run. All angular frequencies (rad/ns).
#[derive(Clone, Debug)]
pub struct ModelParams {
    /// Pump angular frequency ωp.
    pub omega_p: f64,
    /// Kerr nonlinearity χ.
    pub chi: f64,
    /// Pump strength β(t).
    pub beta: Schedule,
    /// Detuning Δ(t) = ωc⁰(t) - χ - ωp/2.
    pub delta: Schedule,
    /// Fock truncation.
    pub dim: usize,
}

impl ModelParams {
    pub fn new(
        omega_p: f64,
        chi: f64,
        beta: Schedule,
        delta: Schedule,
        dim: usize,
    ) -> Result<Self> {
        if !(omega_p > 0.0) {
            return Err(Error::InvalidArgument {
                reason: format!("pump frequency must be positive, got {omega_p}"),
            });
        }
        if !(chi > 0.0) {
            return Err(Error::InvalidArgument {
                reason: format!("Kerr nonlinearity must be positive, got {chi}"),
            });
        }
        if dim < 2 {
            return Err(Error::InvalidDimension { dim });
        }
        let (delta_min, _) = delta.bounds();
        if omega_p / 2.0 + delta_min + chi <= 0.0 {
            return Err(Error::InvalidArgument {
                reason: format!(
                    "implied resonator frequency omega_p/2 + delta + chi goes non-positive \
                     (omega_p = {omega_p}, min delta = {delta_min}, chi = {chi})"
                ),
            });
        }
        Ok(Self {
            omega_p,
            chi,
            beta,
            delta,
            dim,
        })
    }
}

/// Phase-grouped term decomposition of the rotating-frame Hamiltonian.
///
/// `kerr_group(k)` sums all 4-letter operator words in `{a, a†}` whose
/// creation count minus annihilation count is `k`, scaled by `-χ/12`;
/// `pump_group(k)` is the analogue for 2-letter words at unit scale.
/// Opposite-`k` groups are exact adjoints of each other.
#[derive(Clone, Debug)]
pub struct TermSet {
    dim: usize,
    chi: f64,
    number: OperatorMatrix,
    kerr: [OperatorMatrix; 5],
    pump: [OperatorMatrix; 3],
}

impl TermSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn number_term(&self) -> &OperatorMatrix {
        &self.number
    }

    /// Kerr group for `k ∈ {-4, -2, 0, 2, 4}`.
    pub fn kerr_group(&self, k: i32) -> &OperatorMatrix {
        assert!(k % 2 == 0 && k.abs() <= 4, "kerr phase index {k}");
        &self.kerr[(k / 2 + 2) as usize]
    }

    /// Pump group for `k ∈ {-2, 0, 2}`.
    pub fn pump_group(&self, k: i32) -> &OperatorMatrix {
        assert!(k % 2 == 0 && k.abs() <= 2, "pump phase index {k}");
        &self.pump[(k / 2 + 1) as usize]
    }
}

/// Sum of all length-`len` operator words with net creation count `k`,
/// computed as products of the truncated ladder matrices.
fn word_group(a: &OperatorMatrix, adag: &OperatorMatrix, len: u32, k: i32) -> OperatorMatrix {
    let dim = a.dim();
    let mut sum = OperatorMatrix::zeros(dim);
    for mask in 0u32..(1 << len) {
        let creations = mask.count_ones() as i32;
        if 2 * creations - len as i32 != k {
            continue;
        }
        let mut word = OperatorMatrix::identity(dim);
        for pos in 0..len {
            let factor = if mask & (1 << pos) != 0 { adag } else { a };
            word = word.matmul(factor);
        }
        sum = sum.add(&word);
    }
    sum
}

/// Exact Hermitian symmetrization `(M + M†)/2`.
fn symmetrize(m: &OperatorMatrix) -> OperatorMatrix {
    m.add(&m.dagger()).scale(Complex64::new(0.5, 0.0))
}

/// Build the fixed matrices of the phase-grouped decomposition.
pub fn build_term_set(chi: f64, dim: usize) -> Result<TermSet> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim });
    }
    if !(chi > 0.0) {
        return Err(Error::InvalidArgument {
            reason: format!("Kerr nonlinearity must be positive, got {chi}"),
        });
    }
    let a = annihilation(dim)?;
    let adag = creation(dim)?;
    let kerr_scale = Complex64::new(-chi / 12.0, 0.0);

    // k = 0 groups are symmetrized; negative-k groups are exact adjoints of
    // the positive-k ones so that M_{-k} = M_k† holds bit-for-bit.
    let kerr0 = symmetrize(&word_group(&a, &adag, 4, 0)).scale(kerr_scale);
    let kerr2 = word_group(&a, &adag, 4, 2).scale(kerr_scale);
    let kerr4 = word_group(&a, &adag, 4, 4).scale(kerr_scale);
    let pump0 = symmetrize(&word_group(&a, &adag, 2, 0));
    let pump2 = word_group(&a, &adag, 2, 2);

    Ok(TermSet {
        dim,
        chi,
        number: number_operator(dim)?,
        kerr: [kerr4.dagger(), kerr2.dagger(), kerr0, kerr2, kerr4],
        pump: [pump2.dagger(), pump0, pump2],
    })
}

/// Rotating-wave-approximation Hamiltonian
/// `Δ a†a - (χ/2) a†a†aa + β(a² + a†²)`.
pub fn build_h_rwa(delta: f64, chi: f64, beta: f64, dim: usize) -> Result<OperatorMatrix> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim });
    }
    let mut h = OperatorMatrix::zeros(dim);
    for n in 0..dim {
        let nf = n as f64;
        h.set_entry(n, n, Complex64::new(delta * nf - 0.5 * chi * nf * (nf - 1.0), 0.0));
    }
    for n in 0..dim.saturating_sub(2) {
        let v = beta * (((n + 1) * (n + 2)) as f64).sqrt();
        h.set_entry(n, n + 2, Complex64::new(v, 0.0));
        h.set_entry(n + 2, n, Complex64::new(v, 0.0));
    }
    Ok(h)
}

/// Full rotating-frame Hamiltonian at time `t`, assembled from the term set:
///
/// `(ωc⁰(t) - ωp/2)·n̂ + Σ_k e^{ik ωp t/2}·M4_k + 2β(t)cos(ωp t)·Σ_k e^{ik ωp t/2}·M2_k`
///
/// with `ωc⁰(t) = ωp/2 + Δ(t) + χ`.
pub fn h_rot_at(t: f64, params: &ModelParams, terms: &TermSet) -> Result<OperatorMatrix> {
    if terms.dim() != params.dim {
        return Err(Error::DimensionMismatch {
            left: terms.dim(),
            right: params.dim,
        });
    }
    if terms.chi() != params.chi {
        return Err(Error::InvalidArgument {
            reason: format!(
                "term set built for chi = {}, params have chi = {}",
                terms.chi(),
                params.chi
            ),
        });
    }
    let theta = 0.5 * params.omega_p * t;
    let phase = Complex64::cis(theta);
    let phase2 = phase * phase;
    let phase4 = phase2 * phase2;
    let cos_pump = phase2.re; // cos(ωp t)
    let pump_amp = 2.0 * params.beta.value(t) * cos_pump;
    let n_coeff = params.delta.value(t) + params.chi;

    let mut h = terms.number_term().scale(Complex64::new(n_coeff, 0.0));
    for (k, ph) in [(-4, phase4.conj()), (-2, phase2.conj()), (2, phase2), (4, phase4)] {
        h = h.add(&terms.kerr_group(k).scale(ph));
    }
    h = h.add(terms.kerr_group(0));
    for (k, ph) in [(-2, phase2.conj()), (0, Complex64::new(1.0, 0.0)), (2, phase2)] {
        h = h.add(&terms.pump_group(k).scale(ph * pump_amp));
    }
    Ok(h)
}

/// Microwave drive operator `a + a†`.
pub fn build_drive(dim: usize) -> Result<OperatorMatrix> {
    let a = annihilation(dim)?;
    Ok(a.add(&a.dagger()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::{coherent_state, even_cat, hermitian_eigh, parity_projectors};
    use crate::mhz_to_rad_per_ns;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn fig2_params() -> (f64, f64, f64, f64) {
        // (beta0, delta, chi, omega_p) in rad/ns
        (
            mhz_to_rad_per_ns(200.0),
            mhz_to_rad_per_ns(-6.7),
            mhz_to_rad_per_ns(68.0),
            mhz_to_rad_per_ns(16_000.0),
        )
    }

    /// `a e^{-iθ} + a† e^{iθ}` as a dense matrix.
    fn rotating_quadrature(theta: f64, dim: usize) -> OperatorMatrix {
        let a = annihilation(dim).unwrap();
        a.scale(Complex64::cis(-theta))
            .add(&a.dagger().scale(Complex64::cis(theta)))
    }

    #[test]
    fn pump_groups_have_commutator_structure() {
        let dim = 12;
        let terms = build_term_set(1.0, dim).unwrap();
        let a = annihilation(dim).unwrap();
        // M2_0 = aa† + a†a = 2a†a + 1
        let expected = number_operator(dim)
            .unwrap()
            .scale(c(2.0, 0.0))
            .add(&OperatorMatrix::identity(dim));
        let m20 = terms.pump_group(0);
        // the identity picks up the truncation edge: aa† has a zero where
        // 2n+1 expects 2(dim-1)+1, so compare away from the last row
        for r in 0..dim - 1 {
            for col in 0..dim - 1 {
                assert_relative_eq!(
                    m20.entry(r, col).re,
                    expected.entry(r, col).re,
                    epsilon = 1e-13
                );
            }
        }
        assert!(terms.pump_group(-2).sub(&a.matmul(&a)).frobenius_norm() < 1e-14);
        assert!(terms
            .pump_group(2)
            .sub(&a.dagger().matmul(&a.dagger()))
            .frobenius_norm()
            < 1e-14);
    }

    #[test]
    fn groups_are_mutual_adjoints() {
        let terms = build_term_set(0.4, 16).unwrap();
        for k in [2, 4] {
            let diff = terms.kerr_group(-k).sub(&terms.kerr_group(k).dagger());
            assert_eq!(diff.frobenius_norm(), 0.0);
        }
        let diff = terms.pump_group(-2).sub(&terms.pump_group(2).dagger());
        assert_eq!(diff.frobenius_norm(), 0.0);
        assert_eq!(terms.kerr_group(0).hermiticity_deviation(), 0.0);
        assert_eq!(terms.pump_group(0).hermiticity_deviation(), 0.0);
    }

    #[test]
    fn reconstruction_identity_against_matrix_powers() {
        let dim = 30;
        let (_, _, chi, omega_p) = fig2_params();
        let terms = build_term_set(chi, dim).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let t = rng.gen_range(0.0..50.0);
            let beta = rng.gen_range(0.0..2.0);
            let delta = rng.gen_range(-1.0..0.0);
            let params = ModelParams::new(
                omega_p,
                chi,
                Schedule::constant(beta),
                Schedule::constant(delta),
                dim,
            )
            .unwrap();
            let h = h_rot_at(t, &params, &terms).unwrap();

            let theta = 0.5 * omega_p * t;
            let m = rotating_quadrature(theta, dim);
            let m2 = m.matmul(&m);
            let m4 = m2.matmul(&m2);
            let brute = number_operator(dim)
                .unwrap()
                .scale(c(delta + chi, 0.0))
                .add(&m4.scale(c(-chi / 12.0, 0.0)))
                .add(&m2.scale(c(2.0 * beta * (omega_p * t).cos(), 0.0)));
            let rel = h.sub(&brute).frobenius_norm() / brute.frobenius_norm();
            assert!(rel < 1e-12, "reconstruction deviation {rel:.3e} at t = {t}");
        }
    }

    #[test]
    fn h_rot_is_hermitian_at_random_times() {
        let dim = 24;
        let (beta0, delta, chi, omega_p) = fig2_params();
        let terms = build_term_set(chi, dim).unwrap();
        let params = ModelParams::new(
            omega_p,
            chi,
            Schedule::constant(beta0),
            Schedule::constant(delta),
            dim,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let t = rng.gen_range(0.0..200.0);
            let h = h_rot_at(t, &params, &terms).unwrap();
            assert!(h.hermiticity_deviation() < 1e-12);
        }
    }

    #[test]
    fn h_rwa_diagonal_limit_and_pump_entry() {
        let (_, delta, chi, _) = fig2_params();
        let h0 = build_h_rwa(delta, chi, 0.0, 10).unwrap();
        for n in 0..10 {
            let nf = n as f64;
            assert_relative_eq!(
                h0.entry(n, n).re,
                delta * nf - 0.5 * chi * nf * (nf - 1.0),
                epsilon = 1e-14
            );
            for m in 0..10 {
                if m != n {
                    assert_eq!(h0.entry(n, m), c(0.0, 0.0));
                }
            }
        }
        let beta = 0.9;
        let h = build_h_rwa(delta, chi, beta, 10).unwrap();
        assert_relative_eq!(h.entry(0, 2).re, beta * 2.0_f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn h_rwa_vacuum_is_highest_level_at_zero_pump() {
        let (_, delta, chi, _) = fig2_params();
        let h = build_h_rwa(delta, chi, 0.0, 20).unwrap();
        let es = hermitian_eigh(&h).unwrap();
        assert_relative_eq!(es.energies[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(es.states[0].amplitude(0).re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn h_rwa_top_level_is_even_cat() {
        let (beta0, delta, chi, _) = fig2_params();
        let h = build_h_rwa(delta, chi, beta0, 40).unwrap();
        let es = hermitian_eigh(&h).unwrap();
        let alpha = ((2.0 * beta0 + delta) / chi).sqrt();
        assert_relative_eq!(alpha, 2.405, epsilon = 5e-4);
        let cat = even_cat(alpha, 40).unwrap();
        let overlap = cat.overlap_probability(&es.states[0]);
        assert!(overlap >= 0.99, "overlap {overlap}");
    }

    #[test]
    fn h_rot_reduces_to_number_and_kerr_diagonal_without_pump() {
        let dim = 14;
        let (_, delta, chi, omega_p) = fig2_params();
        let terms = build_term_set(chi, dim).unwrap();
        let params = ModelParams::new(
            omega_p,
            chi,
            Schedule::constant(0.0),
            Schedule::constant(delta),
            dim,
        )
        .unwrap();
        let h = h_rot_at(0.37, &params, &terms).unwrap();
        for n in 0..dim {
            let expected = (delta + chi) * n as f64 + terms.kerr_group(0).entry(n, n).re;
            assert_relative_eq!(h.entry(n, n).re, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn pump_period_average_recovers_rwa_hamiltonian() {
        let dim = 24;
        let (beta0, delta, chi, omega_p) = fig2_params();
        let terms = build_term_set(chi, dim).unwrap();
        let params = ModelParams::new(
            omega_p,
            chi,
            Schedule::constant(beta0),
            Schedule::constant(delta),
            dim,
        )
        .unwrap();
        let period = 2.0 * std::f64::consts::PI / omega_p;
        let n = 512;
        let mut avg = OperatorMatrix::zeros(dim);
        for k in 0..n {
            let t = period * k as f64 / n as f64;
            avg = avg.add(&h_rot_at(t, &params, &terms).unwrap());
        }
        avg = avg.scale(c(1.0 / n as f64, 0.0));

        let h_rwa = build_h_rwa(delta, chi, beta0, dim).unwrap();
        // compare away from the truncation edge (the quartic built from
        // truncated products deviates in the top two rows) and modulo the
        // the c-number left behind by normal ordering
        let shift = avg.entry(0, 0).re - h_rwa.entry(0, 0).re;
        assert_relative_eq!(shift, -chi / 4.0, max_relative = 1e-10);
        let mut max_dev: f64 = 0.0;
        for r in 0..dim - 2 {
            for col in 0..dim - 2 {
                let expect = h_rwa.entry(r, col) + if r == col { c(shift, 0.0) } else { c(0.0, 0.0) };
                max_dev = max_dev.max((avg.entry(r, col) - expect).norm());
            }
        }
        let rel = max_dev / h_rwa.frobenius_norm();
        assert!(rel < chi / omega_p, "interior deviation {rel:.3e}");
    }

    #[test]
    fn emitted_hamiltonians_commute_with_parity() {
        let dim = 20;
        let (beta0, delta, chi, omega_p) = fig2_params();
        let (p_even, _) = parity_projectors(dim);
        let h_rwa = build_h_rwa(delta, chi, beta0, dim).unwrap();
        let comm = h_rwa.matmul(&p_even).sub(&p_even.matmul(&h_rwa));
        assert!(comm.frobenius_norm() <= 1e-12 * h_rwa.frobenius_norm());

        let terms = build_term_set(chi, dim).unwrap();
        let params = ModelParams::new(
            omega_p,
            chi,
            Schedule::constant(beta0),
            Schedule::constant(delta),
            dim,
        )
        .unwrap();
        for &t in &[0.0, 0.123, 7.7] {
            let h = h_rot_at(t, &params, &terms).unwrap();
            let comm = h.matmul(&p_even).sub(&p_even.matmul(&h));
            assert!(comm.frobenius_norm() <= 1e-12 * h.frobenius_norm());
        }
    }

    #[test]
    fn eigenvectors_of_model_hamiltonians_have_definite_parity() {
        let (beta0, delta, chi, _) = fig2_params();
        let h = build_h_rwa(delta, chi, beta0, 40).unwrap();
        let es = hermitian_eigh(&h).unwrap();
        for v in &es.states {
            let (even, odd) = v.parity_weights();
            assert!(even.max(odd) >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn drive_operator_structure() {
        let d = build_drive(2).unwrap();
        assert_eq!(d.entry(0, 1), c(1.0, 0.0));
        assert_eq!(d.entry(1, 0), c(1.0, 0.0));
        let d = build_drive(9).unwrap();
        for n in 0..8 {
            let v = ((n + 1) as f64).sqrt();
            assert_relative_eq!(d.entry(n, n + 1).re, v, epsilon = 1e-15);
            assert_relative_eq!(d.entry(n + 1, n).re, v, epsilon = 1e-15);
        }
        // coherent expectation ⟨α|(a+a†)|α⟩ = 2α
        let alpha = 1.7;
        let psi = coherent_state(c(alpha, 0.0), 40).unwrap().state;
        let d = build_drive(40).unwrap();
        assert_relative_eq!(d.matrix_element(&psi, &psi).re, 2.0 * alpha, epsilon = 1e-8);
    }

    #[test]
    fn term_set_rejects_mismatched_params() {
        let terms = build_term_set(0.4, 10).unwrap();
        let params = ModelParams::new(
            100.0,
            0.4,
            Schedule::constant(0.1),
            Schedule::constant(0.0),
            12,
        )
        .unwrap();
        assert!(matches!(
            h_rot_at(0.0, &params, &terms),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}

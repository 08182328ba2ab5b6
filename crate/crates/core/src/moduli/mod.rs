//! Jacobians of the RDM map and of Hamiltonian families, cokernel
//! certification of eigenstates, minor sampling, variety embeddings with
//! their residuals, filtration span tests, and strata probes.

mod embed;
mod scan;

pub use embed::{
    orbital_orthogonality_residual, plucker_residual, slater_embed, symmetric_product_embed,
    symmetrized_product_state, veronese_residual,
};
pub use scan::{
    eigenstate_scan, strata_probe, ControlRecord, EigenRecord, ScanConfig, ScanReport,
    StrataReport, StrataSample, DEGENERACY_GAP,
};

use rand::SeedableRng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{
    determinant, left_nullspace, svd_spectrum, C64, CMatrix, CVector, TolerancePolicy,
};
use crate::operators::{HamiltonianFamily, ProjectorSet};
use crate::rdm::PureState;
use crate::fock::Basis;

/// What a Jacobian's rows mean.
#[derive(Clone, Debug, PartialEq)]
pub enum JacobianKind {
    /// Rows are ordered pairs (I, J) of m-particle index sets; columns are
    /// the psi-block then the conjugate block.
    ManyBody {
        q: u32,
        n: u32,
        m: u32,
        statistics: crate::fock::Statistics,
    },
    /// Rows are family operators. With an all-real family and state the
    /// redundant conjugate block is dropped (`real_reduced`).
    Family {
        names: Vec<String>,
        real_reduced: bool,
    },
    /// Rows are ordered pairs (i, j) of subsystem-A indices.
    Bipartite { n_a: usize, n_b: usize },
}

/// A Jacobian with the amplitude snapshot it was built from.
#[derive(Clone, Debug)]
pub struct JacobianMatrix {
    pub matrix: CMatrix,
    pub state: CVector,
    pub kind: JacobianKind,
}

impl JacobianMatrix {
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    /// Shape-forced cokernel floor `max(0, rows - cols)`.
    pub fn coker_floor(&self) -> usize {
        self.rows().saturating_sub(self.cols())
    }
}

/// Jacobian of the m-RDM map at an amplitude vector (projective: any nonzero
/// scale). Row (I,J) carries, per environment set K, the value
/// `sigma_{I,K} sigma_{J,K} / C(n,m)` times `conj(psi_(IK))` at psi-column
/// (JK) and times `psi_(JK)` at conjugate-column (IK); zeros elsewhere.
pub fn jacobian_of_amplitudes(
    basis: &Basis,
    amplitudes: &CVector,
    p: &ProjectorSet,
) -> Result<JacobianMatrix> {
    if basis != p.basis_n() {
        return Err(Error::BasisMismatch {
            context: format!(
                "state basis (q={}, k={}) vs projector basis (q={}, n={})",
                basis.q(),
                basis.k(),
                p.q(),
                p.n()
            ),
        });
    }
    if amplitudes.len() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: amplitudes.len(),
        });
    }
    let n_a = p.dim_m();
    let n = p.dim_n();
    let mut jac = CMatrix::zeros(n_a * n_a, 2 * n);
    for i in 0..n_a {
        for j in 0..n_a {
            let row = i * n_a + j;
            for &(alpha, beta, v) in p.triplets(i, j) {
                let (alpha, beta) = (alpha as usize, beta as usize);
                let w = C64::new(v, 0.0);
                jac[(row, beta)] += w * amplitudes[alpha].conj();
                jac[(row, n + alpha)] += w * amplitudes[beta];
            }
        }
    }
    Ok(JacobianMatrix {
        matrix: jac,
        state: amplitudes.clone(),
        kind: JacobianKind::ManyBody {
            q: p.q(),
            n: p.n(),
            m: p.m(),
            statistics: p.statistics(),
        },
    })
}

/// Jacobian of the m-RDM map at a pure state.
pub fn build_jacobian(psi: &PureState, p: &ProjectorSet) -> Result<JacobianMatrix> {
    jacobian_of_amplitudes(psi.basis(), psi.amplitudes(), p)
}

fn is_real_matrix(m: &CMatrix, tol: f64) -> bool {
    m.iter().all(|c| c.im.abs() <= tol)
}

/// Jacobian of a Hamiltonian family at an amplitude vector: row alpha is
/// `[psi^dag H_alpha, psi^t H_alpha^t]`. When every operator and the state
/// are real to 1e-12, the redundant conjugate block is dropped and rows are
/// the N-dimensional `(H_alpha psi)^t`.
pub fn family_jacobian(amplitudes: &CVector, family: &HamiltonianFamily) -> Result<JacobianMatrix> {
    let n = family.dim();
    if amplitudes.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: amplitudes.len(),
        });
    }
    let real = amplitudes.iter().all(|c| c.im.abs() <= 1e-12)
        && family.operators().iter().all(|op| is_real_matrix(op, 1e-12));
    let rows = family.len();
    let mut jac = CMatrix::zeros(rows, if real { n } else { 2 * n });
    for (r, op) in family.operators().iter().enumerate() {
        let h_psi = op * amplitudes; // psi^t H^t = (H psi)^t
        if real {
            for c in 0..n {
                jac[(r, c)] = h_psi[c];
            }
        } else {
            let left = amplitudes.adjoint() * op; // psi^dag H
            for c in 0..n {
                jac[(r, c)] = left[(0, c)];
                jac[(r, n + c)] = h_psi[c];
            }
        }
    }
    Ok(JacobianMatrix {
        matrix: jac,
        state: amplitudes.clone(),
        kind: JacobianKind::Family {
            names: family.names().to_vec(),
            real_reduced: real,
        },
    })
}

/// Numeric-rank diagnostics of a Jacobian's left-nullspace.
#[derive(Clone, Debug, Serialize)]
pub struct CokernelReport {
    pub dim: usize,
    /// `dim - max(0, rows - cols)`: what exceeds the shape-forced floor.
    pub excess: usize,
    pub singular_values: Vec<f64>,
    #[serde(skip)]
    pub basis: Vec<CVector>,
    pub tolerance: TolerancePolicy,
}

/// Left-nullspace report of a Jacobian under a tolerance policy. Every basis
/// vector eta satisfies `||eta^t J|| <= 10 * tau * sigma_1`.
pub fn cokernel(jac: &JacobianMatrix, policy: &TolerancePolicy) -> Result<CokernelReport> {
    let spectrum = svd_spectrum(&jac.matrix)?;
    let basis = left_nullspace(&jac.matrix, policy)?;
    let dim = basis.len();
    Ok(CokernelReport {
        dim,
        excess: dim.saturating_sub(jac.coker_floor()),
        singular_values: spectrum.values().to_vec(),
        basis,
        tolerance: *policy,
    })
}

/// A left-null vector reshaped to an m-particle operator, Hermitized.
#[derive(Clone, Debug)]
pub struct EtaRecovery {
    /// Unit-Frobenius Hermitian N_A x N_A matrix.
    pub eta: CMatrix,
    pub coker_dim: usize,
    /// `|| (sum eta_{I,J} P_{I,J}) psi ||`.
    pub right_residual: f64,
    /// `|| psi^dag (sum eta_{I,J} P_{I,J}) ||`.
    pub left_residual: f64,
}

/// Recover the m-particle operator annihilating the state from the cokernel
/// of its Jacobian. For a non-degenerate eigenpair (H, E) of the assembled
/// Hamiltonian this reproduces `H - E*I` up to scale.
pub fn recover_eta(
    psi: &PureState,
    p: &ProjectorSet,
    policy: &TolerancePolicy,
) -> Result<EtaRecovery> {
    let jac = build_jacobian(psi, p)?;
    let report = cokernel(&jac, policy)?;
    if report.dim == 0 {
        return Err(Error::TrivialCokernel);
    }
    let n_a = p.dim_m();
    let raw = &report.basis[0];
    let mut eta = CMatrix::zeros(n_a, n_a);
    for i in 0..n_a {
        for j in 0..n_a {
            eta[(i, j)] = raw[i * n_a + j];
        }
    }
    // The cokernel is closed under conjugate-transpose reshaping, so the
    // Hermitian and anti-Hermitian parts are both left-null vectors; keep
    // the larger one.
    let herm = (&eta + eta.adjoint()) * C64::new(0.5, 0.0);
    let anti = (&eta - eta.adjoint()) * C64::new(0.0, -0.5);
    let mut eta = if herm.norm() >= anti.norm() { herm } else { anti };
    let norm = eta.norm();
    eta /= C64::new(norm, 0.0);

    // Apply sum eta_{I,J} P_{I,J} to the state from the sparse triplets.
    let n = p.dim_n();
    let mut applied = CVector::zeros(n);
    for i in 0..n_a {
        for j in 0..n_a {
            let w = eta[(i, j)];
            if w == C64::new(0.0, 0.0) {
                continue;
            }
            for &(a, b, v) in p.triplets(i, j) {
                applied[a as usize] += w * C64::new(v, 0.0) * psi.amplitudes()[b as usize];
            }
        }
    }
    let right_residual = applied.norm() / psi.amplitudes().norm();
    let mut applied_left = CVector::zeros(n);
    for i in 0..n_a {
        for j in 0..n_a {
            let w = eta[(i, j)];
            if w == C64::new(0.0, 0.0) {
                continue;
            }
            for &(a, b, v) in p.triplets(i, j) {
                applied_left[b as usize] += w.conj() * C64::new(v, 0.0) * psi.amplitudes()[a as usize];
            }
        }
    }
    let left_residual = applied_left.norm() / psi.amplitudes().norm();
    Ok(EtaRecovery {
        eta,
        coker_dim: report.dim,
        right_residual,
        left_residual,
    })
}

/// Overlap between the cokernel and the row-major vectorization of
/// `target`: the norm of the projection of vec(target) onto the span of the
/// (orthonormal) cokernel basis, over its norm. 1 means the target operator
/// lies in the cokernel.
pub fn eta_alignment(coker_basis: &[CVector], target: &CMatrix) -> f64 {
    let t = vec_row_major(target);
    let t_norm = t.norm();
    if t_norm == 0.0 {
        return 0.0;
    }
    let mut proj_sq = 0.0f64;
    for u in coker_basis {
        let overlap = u.dotc(&t); // <u, t>
        proj_sq += overlap.norm_sqr();
    }
    proj_sq.sqrt() / t_norm
}

/// Hadamard-normalized absolute determinants of randomly sampled square
/// column subsets of a Jacobian.
#[derive(Clone, Debug, Serialize)]
pub struct MinorSampleReport {
    pub sample_count: usize,
    pub normalized_abs_dets: Vec<f64>,
    pub max: f64,
    pub median: f64,
    pub seed: u64,
}

/// Sample `count` column subsets of size `rows` (without replacement) and
/// report |det| divided by the product of the submatrix row norms, a
/// scale-free vanishing measure in [0, 1]. A sampled row that is zero, or
/// negligible (1e-12 relative) against the full Jacobian row it came from,
/// gives the value 0: such rows already certify rank deficiency, and
/// normalizing rounding noise by its own norm would only amplify it.
pub fn sample_minors(jac: &JacobianMatrix, count: usize, seed: u64) -> Result<MinorSampleReport> {
    if count < 1 {
        return Err(Error::EmptySample);
    }
    let rows = jac.rows();
    let cols = jac.cols();
    if cols < rows {
        return Err(Error::InfeasibleShape { rows, cols });
    }
    let full_row_norms: Vec<f64> = (0..rows).map(|r| jac.matrix.row(r).norm()).collect();
    let max_row_norm = full_row_norms.iter().cloned().fold(0.0f64, f64::max);
    // A whole row at rounding level (or a sampled row negligible against the
    // row it came from) already certifies the vanishing of its minors.
    let zero_row = |r: usize, sampled_norm: f64| {
        full_row_norms[r] <= 1e-12 * max_row_norm || sampled_norm <= 1e-12 * full_row_norms[r]
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut dets = Vec::with_capacity(count);
    for _ in 0..count {
        let mut chosen = rand::seq::index::sample(&mut rng, cols, rows).into_vec();
        chosen.sort_unstable();
        let mut sub = CMatrix::zeros(rows, rows);
        for (c_new, &c_old) in chosen.iter().enumerate() {
            for r in 0..rows {
                sub[(r, c_new)] = jac.matrix[(r, c_old)];
            }
        }
        let mut hadamard = 1.0f64;
        let mut negligible_row = false;
        for r in 0..rows {
            let row_norm = sub.row(r).norm();
            if zero_row(r, row_norm) {
                negligible_row = true;
                break;
            }
            hadamard *= row_norm;
        }
        let value = if negligible_row {
            0.0
        } else {
            determinant(&sub)?.norm() / hadamard
        };
        dets.push(value.min(1.0));
    }
    let max = dets.iter().cloned().fold(0.0f64, f64::max);
    let mut sorted = dets.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    Ok(MinorSampleReport {
        sample_count: count,
        normalized_abs_dets: dets,
        max,
        median,
        seed,
    })
}

/// Largest relative least-squares residual of the rows of `j_low` against the
/// row space of `j_high`. Both Jacobians must come from the same state.
pub fn span_inclusion(j_low: &JacobianMatrix, j_high: &JacobianMatrix) -> Result<f64> {
    if j_low.state != j_high.state {
        return Err(Error::StateMismatch);
    }
    if j_low.cols() != j_high.cols() {
        return Err(Error::DimensionMismatch {
            expected: j_high.cols(),
            got: j_low.cols(),
        });
    }
    // Row space of j_high = column space of its transpose; project with the
    // leading left singular vectors of J^t.
    let jt = j_high.matrix.transpose();
    let svd = jt.clone().svd(true, false);
    let u = svd.u.as_ref().expect("requested U");
    let policy = TolerancePolicy::default();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap()
    });
    let sigma_max = order
        .first()
        .map(|&i| svd.singular_values[i])
        .unwrap_or(0.0);
    let cut = policy.cutoff(sigma_max);
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&i| svd.singular_values[i] > cut)
        .collect();
    let mut worst: f64 = 0.0;
    for r in 0..j_low.rows() {
        let row = j_low.matrix.row(r).transpose();
        let row_norm = row.norm();
        if row_norm == 0.0 {
            continue;
        }
        let mut residual = row.clone();
        for &k in &kept {
            let uk = u.column(k);
            let overlap = uk.dotc(&row);
            residual -= CVector::from_iterator(row.len(), uk.iter().map(|&c| c * overlap));
        }
        worst = worst.max(residual.norm() / row_norm);
    }
    Ok(worst)
}

/// Row-major vectorization, matching the (I,J) row order of Jacobians.
pub fn vec_row_major(m: &CMatrix) -> CVector {
    let (r, c) = m.shape();
    let mut v = CVector::zeros(r * c);
    for i in 0..r {
        for j in 0..c {
            v[i * c + j] = m[(i, j)];
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::Statistics;
    use crate::kernel::{hermitian_eig, random_hermitian, random_state, substream};
    use crate::operators::{assemble_hamiltonian, build_projectors, MParticleHamiltonian};
    use crate::rdm::rdm_quadratic;
    use rand::Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_pure_state(basis: &Basis, seed: u64) -> PureState {
        PureState::new(basis.clone(), random_state(basis.dim(), seed)).unwrap()
    }

    fn eigenstate(
        p: &ProjectorSet,
        seed: u64,
        index: usize,
    ) -> (PureState, MParticleHamiltonian, f64) {
        let hm = MParticleHamiltonian::new(p.m(), random_hermitian(p.dim_m(), seed)).unwrap();
        let h = assemble_hamiltonian(&hm, p).unwrap();
        let eig = hermitian_eig(&h).unwrap();
        let psi = PureState::new(
            p.basis_n().clone(),
            eig.eigenvectors.column(index).into_owned(),
        )
        .unwrap();
        (psi, hm, eig.eigenvalues[index])
    }

    #[test]
    fn jacobian_row_structure() {
        let p = build_projectors(2, 4, 2, Statistics::Bose).unwrap();
        let psi = random_pure_state(p.basis_n(), 3);
        let jac = build_jacobian(&psi, &p).unwrap();
        let n_a = p.dim_m();
        let n = p.dim_n();
        assert_eq!(jac.rows(), n_a * n_a);
        assert_eq!(jac.cols(), 2 * n);
        // Conjugate block of row (I,J) equals conj(psi-block of row (J,I)).
        for i in 0..n_a {
            for j in 0..n_a {
                for col in 0..n {
                    let a = jac.matrix[(i * n_a + j, n + col)];
                    let b = jac.matrix[(j * n_a + i, col)].conj();
                    assert_eq!(a, b);
                }
            }
        }
    }

    #[test]
    fn global_phase_vector_in_right_kernel() {
        for &(q, n, m, stat) in &[
            (2u32, 4u32, 2u32, Statistics::Bose),
            (3, 4, 2, Statistics::Bose),
            (4, 2, 1, Statistics::Fermi),
        ] {
            let p = build_projectors(q, n, m, stat).unwrap();
            let psi = random_pure_state(p.basis_n(), 9);
            let jac = build_jacobian(&psi, &p).unwrap();
            let dim = p.dim_n();
            let mut phase = CVector::zeros(2 * dim);
            for k in 0..dim {
                phase[k] = c(0.0, 1.0) * psi.amplitudes()[k];
                phase[dim + k] = c(0.0, -1.0) * psi.amplitudes()[k].conj();
            }
            let resid = (&jac.matrix * phase).norm();
            assert!(resid <= 1e-12, "U(1) kernel residual {resid}");
        }
    }

    #[test]
    fn jacobian_finite_difference() {
        let configs = [
            (2u32, 4u32, 1u32, Statistics::Bose),
            (2, 4, 2, Statistics::Bose),
            (2, 6, 2, Statistics::Bose),
            (3, 4, 2, Statistics::Bose),
            (4, 2, 1, Statistics::Fermi),
            (5, 3, 2, Statistics::Fermi),
        ];
        for (ci, &(q, n, m, stat)) in configs.iter().enumerate() {
            let p = build_projectors(q, n, m, stat).unwrap();
            let psi = random_pure_state(p.basis_n(), 40 + ci as u64);
            let jac = build_jacobian(&psi, &p).unwrap();
            let dim = p.dim_n();
            let mut rng = substream(41, ci as u64);
            let mut delta = CVector::from_fn(dim, |_, _| {
                c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            let dn = delta.norm();
            delta *= c(1e-6 / dn, 0.0);

            let rho0 = rdm_quadratic(psi.basis(), psi.amplitudes(), m).unwrap();
            let moved = psi.amplitudes() + &delta;
            let rho1 = rdm_quadratic(psi.basis(), &moved, m).unwrap();
            let actual = vec_row_major(&(&rho1 - &rho0));

            let mut dvec = CVector::zeros(2 * dim);
            for k in 0..dim {
                dvec[k] = delta[k];
                dvec[dim + k] = delta[k].conj();
            }
            let predicted = &jac.matrix * dvec;
            let err = (actual - predicted).norm();
            assert!(err <= 1e-9, "FD residual {err} at q={q} n={n} m={m}");
        }
    }

    #[test]
    fn m_equals_n_reduces_to_trivial_environment_form() {
        // K empty, sigma = 1, C(n,n) = 1: row (I,J) has conj(psi_I) in
        // psi-column J and psi_J in conjugate-column I, exactly the
        // bipartite Jacobian with a one-dimensional environment.
        let p = build_projectors(3, 2, 2, Statistics::Bose).unwrap();
        let psi = random_pure_state(p.basis_n(), 8);
        let jac = build_jacobian(&psi, &p).unwrap();
        let n = p.dim_n();
        assert_eq!(jac.rows(), n * n);
        assert_eq!(jac.cols(), 2 * n);
        let mut expected = CMatrix::zeros(n * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                expected[(i * n + j, j)] += psi.amplitudes()[i].conj();
                expected[(i * n + j, n + i)] += psi.amplitudes()[j];
            }
        }
        assert!((&jac.matrix - expected).norm() <= 1e-14);
    }

    #[test]
    fn cokernel_dims_random_vs_eigenstate() {
        let policy = TolerancePolicy::default();
        let p = build_projectors(2, 6, 2, Statistics::Bose).unwrap();

        let psi = random_pure_state(p.basis_n(), 21);
        let report = cokernel(&build_jacobian(&psi, &p).unwrap(), &policy).unwrap();
        assert_eq!(report.dim, 0);
        assert_eq!(report.excess, 0);

        let (psi, _, _) = eigenstate(&p, 22, 3);
        let report = cokernel(&build_jacobian(&psi, &p).unwrap(), &policy).unwrap();
        assert_eq!(report.dim, 1);
        assert_eq!(report.excess, 1);
        let sigma1 = report.singular_values[0];
        for eta in &report.basis {
            let resid = (jacobian_transpose_apply(&build_jacobian(&psi, &p).unwrap(), eta)).norm();
            assert!(resid <= 10.0 * policy.relative_threshold * sigma1);
        }
    }

    fn jacobian_transpose_apply(jac: &JacobianMatrix, eta: &CVector) -> CVector {
        jac.matrix.transpose() * eta
    }

    #[test]
    fn infeasible_regime_baseline() {
        // q=3, n=4, m=2 Bose: 36 rows > 30 cols. The shape floor rows - cols
        // is 6, but the global-phase direction [psi; -conj(psi)] is an exact
        // right-kernel vector of every RDM-map Jacobian, capping the rank at
        // 2N - 1 = 29: generic states measure dim 36 - 29 = 7, one above the
        // naive rank-nullity floor.
        let policy = TolerancePolicy::default();
        let p = build_projectors(3, 4, 2, Statistics::Bose).unwrap();
        assert_eq!(p.dim_m() * p.dim_m(), 36);
        assert_eq!(2 * p.dim_n(), 30);

        let psi = random_pure_state(p.basis_n(), 70);
        let jac = build_jacobian(&psi, &p).unwrap();
        // The forced kernel vector, verified directly.
        let n = p.dim_n();
        let mut phase = CVector::zeros(2 * n);
        for k in 0..n {
            phase[k] = psi.amplitudes()[k];
            phase[n + k] = -psi.amplitudes()[k].conj();
        }
        assert!((&jac.matrix * phase).norm() <= 1e-12);
        let rank = crate::kernel::numeric_rank(&jac.matrix, &policy).unwrap();
        assert_eq!(rank, 29, "generic rank is 2N - 1");

        let report = cokernel(&jac, &policy).unwrap();
        assert_eq!(report.dim, 7);
        assert_eq!(report.excess, 1);

        // Eigenstates saturate at the same generic dimension; their
        // signature is the shifted Hamiltonian lying inside the cokernel.
        let (psi, hm, e) = eigenstate(&p, 71, 2);
        let report = cokernel(&build_jacobian(&psi, &p).unwrap(), &policy).unwrap();
        assert_eq!(report.dim, 7);
        assert!(report.excess >= 1);
        let target = hm.matrix() - CMatrix::identity(6, 6) * c(e, 0.0);
        assert!(eta_alignment(&report.basis, &target) >= 1.0 - 1e-8);
    }

    #[test]
    fn recover_eta_matches_shifted_hamiltonian() {
        let policy = TolerancePolicy::default();
        let p = build_projectors(2, 6, 2, Statistics::Bose).unwrap();
        let (psi, hm, e) = eigenstate(&p, 33, 4);
        let rec = recover_eta(&psi, &p, &policy).unwrap();
        assert_eq!(rec.coker_dim, 1);
        assert!(rec.right_residual <= 1e-8, "{}", rec.right_residual);
        assert!(rec.left_residual <= 1e-8, "{}", rec.left_residual);
        // Hermitian after reshaping.
        assert!(crate::kernel::max_asymmetry(&rec.eta) <= 1e-8);

        let n_a = p.dim_m();
        let target = hm.matrix() - CMatrix::identity(n_a, n_a) * c(e, 0.0);
        let jac = build_jacobian(&psi, &p).unwrap();
        let report = cokernel(&jac, &policy).unwrap();
        let alignment = eta_alignment(&report.basis, &target);
        assert!(alignment >= 1.0 - 1e-8, "alignment {alignment}");

        // Direct cosine with the recovered (Hermitized) eta.
        let ev = vec_row_major(&rec.eta);
        let tv = vec_row_major(&target);
        let cosine = ev.dotc(&tv).norm() / (ev.norm() * tv.norm());
        assert!(cosine >= 1.0 - 1e-8, "cosine {cosine}");
    }

    #[test]
    fn recover_eta_full_hamiltonian_limit() {
        // m = n: vec(H - E*I) lies in the cokernel exactly (the squared
        // shape N^2 x 2N makes the cokernel large, so test by projection).
        let policy = TolerancePolicy::default();
        let p = build_projectors(2, 3, 3, Statistics::Bose).unwrap();
        let (psi, hm, e) = eigenstate(&p, 44, 1);
        let rec = recover_eta(&psi, &p, &policy).unwrap();
        assert!(rec.right_residual <= 1e-8);
        let n_a = p.dim_m();
        let target = hm.matrix() - CMatrix::identity(n_a, n_a) * c(e, 0.0);
        let jac = build_jacobian(&psi, &p).unwrap();
        let report = cokernel(&jac, &policy).unwrap();
        assert!(eta_alignment(&report.basis, &target) >= 1.0 - 1e-10);
    }

    #[test]
    fn recover_eta_rejects_trivial_cokernel() {
        let policy = TolerancePolicy::default();
        let p = build_projectors(2, 6, 2, Statistics::Bose).unwrap();
        let psi = random_pure_state(p.basis_n(), 50);
        assert!(matches!(
            recover_eta(&psi, &p, &policy),
            Err(Error::TrivialCokernel)
        ));
    }

    #[test]
    fn minor_samples_separate_eigenstates_from_controls() {
        let p = build_projectors(2, 6, 2, Statistics::Bose).unwrap();
        let (psi, _, _) = eigenstate(&p, 55, 2);
        let jac = build_jacobian(&psi, &p).unwrap();
        let report = sample_minors(&jac, 100, 7).unwrap();
        assert_eq!(report.normalized_abs_dets.len(), 100);
        assert!(report.max <= 1e-8, "eigenstate max minor {}", report.max);

        let psi = random_pure_state(p.basis_n(), 56);
        let jac = build_jacobian(&psi, &p).unwrap();
        let report = sample_minors(&jac, 100, 7).unwrap();
        assert!(report.median >= 1e-3, "control median {}", report.median);
        assert!(report.normalized_abs_dets.iter().all(|&d| (0.0..=1.0).contains(&d)));

        // Determinism under the seed.
        let again = sample_minors(&jac, 100, 7).unwrap();
        assert_eq!(report.normalized_abs_dets, again.normalized_abs_dets);

        assert!(sample_minors(&jac, 0, 1).is_err());
        let p_bad = build_projectors(3, 4, 2, Statistics::Bose).unwrap();
        let psi = random_pure_state(p_bad.basis_n(), 57);
        let jac = build_jacobian(&psi, &p_bad).unwrap();
        assert!(matches!(
            sample_minors(&jac, 10, 1),
            Err(Error::InfeasibleShape { .. })
        ));
    }

    #[test]
    fn family_jacobian_shapes_and_duality() {
        // {I} alone: rank 1, trivial cokernel.
        let policy = TolerancePolicy::default();
        let fam = HamiltonianFamily::new(vec!["identity".into()], vec![CMatrix::identity(5, 5)])
            .unwrap();
        let psi = random_state(5, 3);
        let jac = family_jacobian(&psi, &fam).unwrap();
        assert_eq!(jac.rows(), 1);
        let report = cokernel(&jac, &policy).unwrap();
        assert_eq!(report.dim, 0);

        // Eigenstate duality: eta = (-E, coefficients) annihilates the rows.
        let h1 = random_hermitian(6, 61);
        let h2 = random_hermitian(6, 62);
        let combined = &h1 * c(0.8, 0.0) + &h2 * c(-1.7, 0.0);
        let eig = hermitian_eig(&combined).unwrap();
        let fam = HamiltonianFamily::schrodinger(
            vec!["a".into(), "b".into()],
            vec![h1.clone(), h2.clone()],
        )
        .unwrap();
        for k in [0usize, 3, 5] {
            let psi = eig.eigenvectors.column(k).into_owned();
            let jac = family_jacobian(&psi, &fam).unwrap();
            assert_eq!(jac.cols(), 12, "complex family keeps both blocks");
            let eta = CVector::from_vec(vec![
                c(-eig.eigenvalues[k], 0.0),
                c(0.8, 0.0),
                c(-1.7, 0.0),
            ]);
            let resid = (jac.matrix.transpose() * eta).norm();
            assert!(resid <= 1e-10, "duality residual {resid}");
        }
    }

    #[test]
    fn family_jacobian_real_reduction() {
        let t = CMatrix::from_row_slice(
            3,
            3,
            &[
                c(0.0, 0.0),
                c(1.0, 0.0),
                c(0.0, 0.0),
                c(1.0, 0.0),
                c(0.0, 0.0),
                c(1.0, 0.0),
                c(0.0, 0.0),
                c(1.0, 0.0),
                c(0.0, 0.0),
            ],
        );
        let fam = HamiltonianFamily::schrodinger(vec!["t".into()], vec![t]).unwrap();
        let psi = CVector::from_vec(vec![c(0.6, 0.0), c(0.0, 0.0), c(0.8, 0.0)]);
        let jac = family_jacobian(&psi, &fam).unwrap();
        match &jac.kind {
            JacobianKind::Family { real_reduced, .. } => assert!(*real_reduced),
            _ => panic!("wrong kind"),
        }
        assert_eq!(jac.cols(), 3);

        let psi_complex = CVector::from_vec(vec![c(0.6, 0.1), c(0.0, 0.0), c(0.8, 0.0)]);
        let jac = family_jacobian(&psi_complex, &fam).unwrap();
        assert_eq!(jac.cols(), 6);
    }

    #[test]
    fn generator_family_is_row_equivalent_to_rdm_jacobian() {
        // (H^(m))^t J' = eta^t J and matching left-nullspace dimensions.
        let policy = TolerancePolicy::default();
        let p = build_projectors(2, 4, 2, Statistics::Bose).unwrap();
        let gen_family = crate::operators::hermitian_generator_basis(&p);
        let hm = MParticleHamiltonian::new(2, random_hermitian(p.dim_m(), 77)).unwrap();
        let eta = crate::operators::encode_eta(&hm);

        let psi = random_pure_state(p.basis_n(), 78);
        let j_rdm = build_jacobian(&psi, &p).unwrap();
        let j_fam = family_jacobian(psi.amplitudes(), &gen_family).unwrap();
        assert_eq!(j_fam.rows(), p.dim_m() * p.dim_m());

        // eta^t J_family == (H vec)^t J_rdm; both equal the row of the
        // combined operator.
        // Both paths use the same normalized projectors, so the contracted
        // rows agree without rescaling.
        let eta_c = CVector::from_iterator(eta.len(), eta.iter().map(|&x| c(x, 0.0)));
        let lhs = j_fam.matrix.transpose() * eta_c;
        let hvec = vec_row_major(hm.matrix());
        let rhs = j_rdm.matrix.transpose() * hvec;
        assert!((lhs - rhs).norm() <= 1e-10);

        let dim_fam = cokernel(&j_fam, &policy).unwrap().dim;
        let dim_rdm = cokernel(&j_rdm, &policy).unwrap().dim;
        assert_eq!(dim_fam, dim_rdm);

        // Same comparison at an eigenstate, where both are nontrivial.
        let (psi, _, _) = eigenstate(&p, 79, 1);
        let j_rdm = build_jacobian(&psi, &p).unwrap();
        let j_fam = family_jacobian(psi.amplitudes(), &gen_family).unwrap();
        assert_eq!(
            cokernel(&j_fam, &policy).unwrap().dim,
            cokernel(&j_rdm, &policy).unwrap().dim
        );
    }

    #[test]
    fn span_inclusion_filtration() {
        let p1 = build_projectors(2, 6, 1, Statistics::Bose).unwrap();
        let p2 = build_projectors(2, 6, 2, Statistics::Bose).unwrap();
        let psi = random_pure_state(p1.basis_n(), 91);
        let j1 = build_jacobian(&psi, &p1).unwrap();
        let j2 = build_jacobian(&psi, &p2).unwrap();
        let resid = span_inclusion(&j1, &j2).unwrap();
        assert!(resid <= 1e-10, "span residual {resid}");
        // Self-inclusion is exact.
        let self_resid = span_inclusion(&j2, &j2).unwrap();
        assert!(self_resid <= 1e-12);
        // Mismatched states are rejected.
        let other = random_pure_state(p1.basis_n(), 92);
        let j_other = build_jacobian(&other, &p2).unwrap();
        assert!(matches!(
            span_inclusion(&j1, &j_other),
            Err(Error::StateMismatch)
        ));
    }

    #[test]
    fn projective_invariance_of_cokernel() {
        let policy = TolerancePolicy::default();
        let p = build_projectors(2, 6, 2, Statistics::Bose).unwrap();
        let (psi, _, _) = eigenstate(&p, 95, 3);
        let base = cokernel(&build_jacobian(&psi, &p).unwrap(), &policy)
            .unwrap()
            .dim;
        for &(re, im) in &[(0.1, 0.0), (10.0, 0.0), (0.3, -0.4), (0.0, 2.0)] {
            let scaled = psi.scaled(c(re, im)).unwrap();
            let jac =
                jacobian_of_amplitudes(scaled.basis(), scaled.amplitudes(), &p).unwrap();
            assert_eq!(cokernel(&jac, &policy).unwrap().dim, base);
        }
    }
}

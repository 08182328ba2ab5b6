//! The pure-state to m-RDM mapping, its unfolding-matrix form, energies, and
//! the bipartite warm-up system (reshaped states, their Jacobian, and the
//! commutant of the subsystem projectors).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fock::{binomial, concat_index, sigma, Basis};
use crate::kernel::{C64, CMatrix, CVector};
use crate::moduli::{JacobianKind, JacobianMatrix};
use crate::operators::{MParticleHamiltonian, ProjectorSet};

/// A normalized pure state over a symmetrized basis, treated projectively:
/// rescaling never changes any cokernel result downstream.
#[derive(Clone, Debug)]
pub struct PureState {
    basis: Basis,
    amplitudes: CVector,
}

impl PureState {
    /// A state with unit norm (to 1e-12).
    pub fn new(basis: Basis, amplitudes: CVector) -> Result<Self> {
        let state = Self::new_unnormalized(basis, amplitudes)?;
        let norm = state.amplitudes.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidStateNorm {
                norm,
                reason: "expected unit norm".into(),
            });
        }
        Ok(state)
    }

    /// A state with any nonzero norm, for projective experiments.
    pub fn new_unnormalized(basis: Basis, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                got: amplitudes.len(),
            });
        }
        if amplitudes.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm = amplitudes.norm();
        if norm < 1e-300 {
            return Err(Error::InvalidStateNorm {
                norm,
                reason: "state is numerically zero".into(),
            });
        }
        Ok(Self { basis, amplitudes })
    }

    /// Basis vector `e_pos`.
    pub fn basis_state(basis: Basis, pos: usize) -> Self {
        let mut amplitudes = CVector::zeros(basis.dim());
        amplitudes[pos] = C64::new(1.0, 0.0);
        Self { basis, amplitudes }
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// A rescaled copy (projective representative).
    pub fn scaled(&self, factor: C64) -> Result<Self> {
        Self::new_unnormalized(self.basis.clone(), &self.amplitudes * factor)
    }
}

/// The N_A x N_B matrix `A[I,K] = sigma_{I,K} psi_{(IK)}`; the m-RDM is
/// `conj(A) A^t / C(n,m)`.
#[derive(Clone, Debug)]
pub struct UnfoldingMatrix {
    pub m: u32,
    pub matrix: CMatrix,
}

/// An m-particle reduced density matrix: Hermitian, PSD, unit trace.
#[derive(Clone, Debug)]
pub struct ReducedDensityMatrix {
    pub m: u32,
    pub matrix: CMatrix,
}

impl ReducedDensityMatrix {
    /// Check Hermiticity, positive semidefiniteness, and unit trace.
    pub fn validate(&self) -> Result<()> {
        let asym = crate::kernel::max_asymmetry(&self.matrix);
        if asym > 1e-12 {
            return Err(Error::NonHermitian {
                max_asymmetry: asym,
            });
        }
        let trace: C64 = self.matrix.diagonal().iter().sum();
        if (trace.re - 1.0).abs() > 1e-12 || trace.im.abs() > 1e-12 {
            return Err(Error::InvalidStateNorm {
                norm: trace.re,
                reason: "RDM trace must be 1".into(),
            });
        }
        let eig = crate::kernel::hermitian_eig(&self.matrix)?;
        if eig.eigenvalues.iter().any(|&l| l < -1e-12) {
            return Err(Error::InvalidStateNorm {
                norm: eig.eigenvalues[0],
                reason: "RDM has a negative eigenvalue".into(),
            });
        }
        Ok(())
    }
}

/// Split the n-particle basis against (m, n-m) subsystem bases, caching the
/// concatenation position and symmetry factor for every (I or J, K) pair.
struct SectorSplit {
    basis_m: Basis,
    basis_env: Basis,
    /// weight[i][k] = (position of (I_i K_k), sigma_{I_i,K_k}) or None.
    weight: Vec<Vec<Option<(usize, f64)>>>,
}

fn split_sector(basis_n: &Basis, m: u32) -> Result<SectorSplit> {
    let n = basis_n.k();
    if m < 1 || m > n {
        return Err(Error::InvalidSector { m, n });
    }
    let stat = basis_n.statistics();
    let basis_m = Basis::new(basis_n.q(), m, stat)?;
    let basis_env = Basis::new(basis_n.q(), n - m, stat)?;
    let mut weight = vec![Vec::with_capacity(basis_env.dim()); basis_m.dim()];
    for (i, set_i) in basis_m.sets().iter().enumerate() {
        for set_k in basis_env.sets() {
            let s = sigma(set_i, set_k, stat)?;
            if s == 0.0 {
                weight[i].push(None);
                continue;
            }
            let cat = concat_index(set_i, set_k, stat)?;
            let pos = basis_n
                .position(&cat.sorted)
                .expect("concatenation stays in the n-particle basis");
            weight[i].push(Some((pos, s)));
        }
    }
    Ok(SectorSplit {
        basis_m,
        basis_env,
        weight,
    })
}

/// Unfold a state into the N_A x N_B matrix A. Fermionic exclusions are
/// exact structural zeros.
pub fn unfold(psi: &PureState, m: u32) -> Result<UnfoldingMatrix> {
    let split = split_sector(psi.basis(), m)?;
    let mut a = CMatrix::zeros(split.basis_m.dim(), split.basis_env.dim());
    for i in 0..split.basis_m.dim() {
        for k in 0..split.basis_env.dim() {
            if let Some((pos, s)) = split.weight[i][k] {
                a[(i, k)] = psi.amplitudes()[pos] * C64::new(s, 0.0);
            }
        }
    }
    Ok(UnfoldingMatrix { m, matrix: a })
}

/// The raw quadratic map `rho_{I,J} = <psi|P_{I,J}|psi>` evaluated through the
/// unfolding matrix, without any norm validation: the trace equals the squared
/// state norm. Exactly Hermitian by construction.
pub fn rdm_quadratic(basis: &Basis, amplitudes: &CVector, m: u32) -> Result<CMatrix> {
    if amplitudes.len() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: amplitudes.len(),
        });
    }
    let split = split_sector(basis, m)?;
    let n_a = split.basis_m.dim();
    let n_b = split.basis_env.dim();
    let norm = 1.0 / binomial(basis.k() as u64, m as u64) as f64;
    let mut rho = CMatrix::zeros(n_a, n_a);
    for i in 0..n_a {
        for j in i..n_a {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..n_b {
                if let (Some((pa, si)), Some((pb, sj))) = (split.weight[i][k], split.weight[j][k])
                {
                    acc += amplitudes[pa].conj() * amplitudes[pb] * C64::new(si * sj, 0.0);
                }
            }
            acc *= C64::new(norm, 0.0);
            rho[(i, j)] = acc;
            rho[(j, i)] = acc.conj();
        }
    }
    Ok(rho)
}

fn check_compatible(psi: &PureState, p: &ProjectorSet) -> Result<()> {
    if psi.basis() != p.basis_n() {
        return Err(Error::BasisMismatch {
            context: format!(
                "state basis (q={}, k={}, {:?}) vs projector basis (q={}, n={}, {:?})",
                psi.basis().q(),
                psi.basis().k(),
                psi.basis().statistics(),
                p.q(),
                p.n(),
                p.statistics()
            ),
        });
    }
    Ok(())
}

/// The m-RDM of a normalized state, through the unfolding fast path; the
/// projector path [`rdm_via_projectors`] is retained as a cross-check.
pub fn compute_rdm(psi: &PureState, p: &ProjectorSet) -> Result<ReducedDensityMatrix> {
    check_compatible(psi, p)?;
    let norm = psi.amplitudes().norm();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidStateNorm {
            norm,
            reason: "RDM of a non-unit state has trace != 1".into(),
        });
    }
    Ok(ReducedDensityMatrix {
        m: p.m(),
        matrix: rdm_quadratic(psi.basis(), psi.amplitudes(), p.m())?,
    })
}

/// The m-RDM evaluated entry by entry as projector expectations.
pub fn rdm_via_projectors(psi: &PureState, p: &ProjectorSet) -> Result<ReducedDensityMatrix> {
    check_compatible(psi, p)?;
    let n_a = p.dim_m();
    let mut rho = CMatrix::zeros(n_a, n_a);
    for i in 0..n_a {
        for j in 0..n_a {
            rho[(i, j)] = p.expectation(i, j, psi.amplitudes());
        }
    }
    Ok(ReducedDensityMatrix {
        m: p.m(),
        matrix: rho,
    })
}

/// `E = sum_{I,J} H_{I,J} rho_{I,J} = tr(H^t rho)`, the expectation of the
/// assembled Hamiltonian. With `rho_{I,J} = <P_{I,J}>`, pairing H against the
/// plain (not conjugated) entries is what reproduces `<psi|H_full|psi>`.
/// The imaginary part is checked against 1e-10 and discarded.
pub fn energy(psi: &PureState, hm: &MParticleHamiltonian, p: &ProjectorSet) -> Result<f64> {
    let rho = compute_rdm(psi, p)?;
    if hm.matrix().nrows() != rho.matrix.nrows() {
        return Err(Error::DimensionMismatch {
            expected: rho.matrix.nrows(),
            got: hm.matrix().nrows(),
        });
    }
    let mut trace = C64::new(0.0, 0.0);
    for i in 0..rho.matrix.nrows() {
        for j in 0..rho.matrix.ncols() {
            trace += hm.matrix()[(i, j)] * rho.matrix[(i, j)];
        }
    }
    if trace.im.abs() > 1e-10 {
        return Err(Error::EnergyNotReal {
            imaginary: trace.im,
        });
    }
    Ok(trace.re)
}

/// The warm-up system: a pure state on a plain A x B tensor product, stored
/// as the reshaped N_A x N_B matrix.
#[derive(Clone, Debug)]
pub struct BipartiteState {
    psi: CMatrix,
}

impl BipartiteState {
    pub fn new(psi: CMatrix) -> Result<Self> {
        if psi.nrows() == 0 || psi.ncols() == 0 {
            return Err(Error::EmptyMatrix);
        }
        if psi.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm = psi.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidStateNorm {
                norm,
                reason: "bipartite state needs unit Frobenius norm".into(),
            });
        }
        Ok(Self { psi })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.psi
    }

    pub fn n_a(&self) -> usize {
        self.psi.nrows()
    }

    pub fn n_b(&self) -> usize {
        self.psi.ncols()
    }
}

/// Subsystem-A RDM `Psi Psi^dag`.
pub fn bipartite_rdm(state: &BipartiteState) -> CMatrix {
    state.matrix() * state.matrix().adjoint()
}

/// A random normalized bipartite state of exactly the given Schmidt rank,
/// built as a product of two Gaussian factors.
pub fn planted_bipartite_state(
    n_a: usize,
    n_b: usize,
    rank: usize,
    seed: u64,
) -> Result<BipartiteState> {
    if rank < 1 || rank > n_a.min(n_b) {
        return Err(Error::DimensionMismatch {
            expected: n_a.min(n_b),
            got: rank,
        });
    }
    let mut rng = crate::kernel::substream(seed, 0);
    let a = CMatrix::from_fn(n_a, rank, |_, _| {
        C64::new(
            crate::kernel::gaussian_sample(&mut rng),
            crate::kernel::gaussian_sample(&mut rng),
        )
    });
    let b = CMatrix::from_fn(rank, n_b, |_, _| {
        C64::new(
            crate::kernel::gaussian_sample(&mut rng),
            crate::kernel::gaussian_sample(&mut rng),
        )
    });
    let mut m = a * b;
    let norm = m.norm();
    m /= C64::new(norm, 0.0);
    BipartiteState::new(m)
}

/// The N_A^2 x 2N Jacobian of the bipartite RDM map: row (i,j) has
/// `conj(Psi[i,b])` in psi-column (j,b) and `Psi[j,b]` in conjugate-column
/// (i,b), zeros elsewhere.
pub fn bipartite_jacobian(state: &BipartiteState) -> Result<JacobianMatrix> {
    let n_a = state.n_a();
    let n_b = state.n_b();
    if n_a > n_b {
        return Err(Error::DimensionMismatch {
            expected: n_a,
            got: n_b,
        });
    }
    let n = n_a * n_b;
    let psi = state.matrix();
    let mut jac = CMatrix::zeros(n_a * n_a, 2 * n);
    for i in 0..n_a {
        for j in 0..n_a {
            let row = i * n_a + j;
            for b in 0..n_b {
                jac[(row, j * n_b + b)] += psi[(i, b)].conj();
                jac[(row, n + i * n_b + b)] += psi[(j, b)];
            }
        }
    }
    // Row-major vec(Psi) doubles as the state snapshot.
    let mut flat = CVector::zeros(n);
    for a in 0..n_a {
        for b in 0..n_b {
            flat[a * n_b + b] = psi[(a, b)];
        }
    }
    Ok(JacobianMatrix {
        matrix: jac,
        state: flat,
        kind: JacobianKind::Bipartite { n_a, n_b },
    })
}

/// Dimension of `{L : [L, e^{ij} x I_B] = 0 for all i,j}`, computed by
/// stacking the vectorized commutator constraints and counting the nullity
/// of their Gram matrix. Equals N_B^2.
pub fn commutant_dimension(n_a: usize, n_b: usize) -> Result<usize> {
    let n = n_a * n_b;
    if n == 0 {
        return Err(Error::EmptyMatrix);
    }
    if n > 64 {
        return Err(Error::SizeCap {
            context: format!("commutant solve needs N_A*N_B <= 64, got {n}"),
        });
    }
    let nn = n * n;
    // Every scalar equation of [L, P_ij] = 0 touches at most two entries of
    // vec(L) with coefficients +1/-1; accumulate the Gram matrix directly.
    let mut gram = DMatrix::<f64>::zeros(nn, nn);
    let lvec = |r: usize, c: usize| r * n + c;
    for i in 0..n_a {
        for j in 0..n_a {
            for a in 0..n_a {
                for s in 0..n_b {
                    for a2 in 0..n_a {
                        for s2 in 0..n_b {
                            // (L P)_{(a,s),(a2,s2)} = L_{(a,s),(i,s2)} delta_{a2,j}
                            // (P L)_{(a,s),(a2,s2)} = delta_{a,i} L_{(j,s),(a2,s2)}
                            let plus = (a2 == j).then(|| lvec(a * n_b + s, i * n_b + s2));
                            let minus = (a == i).then(|| lvec(j * n_b + s, a2 * n_b + s2));
                            match (plus, minus) {
                                (Some(p), Some(q)) if p == q => {}
                                (Some(p), Some(q)) => {
                                    gram[(p, p)] += 1.0;
                                    gram[(q, q)] += 1.0;
                                    gram[(p, q)] -= 1.0;
                                    gram[(q, p)] -= 1.0;
                                }
                                (Some(p), None) => gram[(p, p)] += 1.0,
                                (None, Some(q)) => gram[(q, q)] += 1.0,
                                (None, None) => {}
                            }
                        }
                    }
                }
            }
        }
    }
    let eig = gram.symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let cut = 1e-7 * max.max(1.0);
    Ok(eig.eigenvalues.iter().filter(|&&l| l < cut).count())
}

//! Projection operators onto m-particle sectors, assembly of full
//! Hamiltonians from m-particle Hamiltonians, Hermitian generator encodings,
//! and the Hubbard operator family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{binomial, concat_index, sigma, Basis, Statistics};
use crate::kernel::{max_asymmetry, C64, CMatrix, CVector};

/// The sparse operators `P^(m)_{I,J}` on the n-particle basis, stored as
/// `(alpha, beta, value)` triplets per ordered pair `(I, J)` of m-particle
/// index sets. Values carry the `1/C(n,m)` normalization, which makes the
/// diagonal sum close to the identity and gives unit-trace RDMs; the physics
/// convention with trace `C(n,m)` is recovered by multiplying back with
/// [`ProjectorSet::normalization`].
#[derive(Clone, Debug)]
pub struct ProjectorSet {
    q: u32,
    n: u32,
    m: u32,
    statistics: Statistics,
    basis_n: Basis,
    basis_m: Basis,
    basis_env: Basis,
    entries: Vec<Vec<(u32, u32, f64)>>,
    normalization: f64,
}

impl ProjectorSet {
    /// Build all `P^(m)_{I,J}` for the given sector.
    pub fn build(q: u32, n: u32, m: u32, statistics: Statistics) -> Result<Self> {
        if m < 1 || m > n {
            return Err(Error::InvalidProjector {
                q,
                n,
                m,
                reason: "m must satisfy 1 <= m <= n".into(),
            });
        }
        if statistics == Statistics::Fermi && n > q {
            return Err(Error::InvalidProjector {
                q,
                n,
                m,
                reason: "fermions need n <= q".into(),
            });
        }
        let basis_n = Basis::new(q, n, statistics)?;
        let basis_m = Basis::new(q, m, statistics)?;
        let basis_env = Basis::new(q, n - m, statistics)?;
        let n_a = basis_m.dim();
        let normalization = 1.0 / binomial(n as u64, m as u64) as f64;

        // sigma_{I,K} and the position of (IK), precomputed per (I, K).
        let mut weight = vec![Vec::with_capacity(basis_env.dim()); n_a];
        for (i, set_i) in basis_m.sets().iter().enumerate() {
            for set_k in basis_env.sets() {
                let s = sigma(set_i, set_k, statistics)?;
                if s == 0.0 {
                    weight[i].push(None);
                    continue;
                }
                let cat = concat_index(set_i, set_k, statistics)?;
                let pos = basis_n
                    .position(&cat.sorted)
                    .expect("concatenation stays inside the n-particle basis");
                weight[i].push(Some((pos as u32, s)));
            }
        }

        let mut entries = Vec::with_capacity(n_a * n_a);
        for i in 0..n_a {
            for j in 0..n_a {
                let mut triplets = Vec::new();
                for k in 0..basis_env.dim() {
                    if let (Some((alpha, si)), Some((beta, sj))) = (weight[i][k], weight[j][k]) {
                        triplets.push((alpha, beta, si * sj * normalization));
                    }
                }
                entries.push(triplets);
            }
        }
        Ok(Self {
            q,
            n,
            m,
            statistics,
            basis_n,
            basis_m,
            basis_env,
            entries,
            normalization,
        })
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    /// n-particle Hilbert dimension N.
    pub fn dim_n(&self) -> usize {
        self.basis_n.dim()
    }

    /// m-particle dimension N_A.
    pub fn dim_m(&self) -> usize {
        self.basis_m.dim()
    }

    /// Environment dimension N_B.
    pub fn dim_env(&self) -> usize {
        self.basis_env.dim()
    }

    pub fn basis_n(&self) -> &Basis {
        &self.basis_n
    }

    pub fn basis_m(&self) -> &Basis {
        &self.basis_m
    }

    pub fn basis_env(&self) -> &Basis {
        &self.basis_env
    }

    /// The applied normalization constant 1/C(n,m).
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    fn pair_index(&self, i: usize, j: usize) -> usize {
        i * self.dim_m() + j
    }

    /// Sparse triplets of `P_{I,J}` (normalized values).
    pub fn triplets(&self, i: usize, j: usize) -> &[(u32, u32, f64)] {
        &self.entries[self.pair_index(i, j)]
    }

    /// Dense `P_{I,J}` on demand.
    pub fn dense(&self, i: usize, j: usize) -> CMatrix {
        let n = self.dim_n();
        let mut out = CMatrix::zeros(n, n);
        for &(a, b, v) in self.triplets(i, j) {
            out[(a as usize, b as usize)] = C64::new(v, 0.0);
        }
        out
    }

    /// `P_{I,J} |psi>` without materializing the dense matrix.
    pub fn apply(&self, i: usize, j: usize, psi: &CVector) -> CVector {
        let mut out = CVector::zeros(self.dim_n());
        for &(a, b, v) in self.triplets(i, j) {
            out[a as usize] += psi[b as usize] * C64::new(v, 0.0);
        }
        out
    }

    /// `<psi| P_{I,J} |psi>`.
    pub fn expectation(&self, i: usize, j: usize, psi: &CVector) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for &(a, b, v) in self.triplets(i, j) {
            acc += psi[a as usize].conj() * psi[b as usize] * C64::new(v, 0.0);
        }
        acc
    }
}

/// Build the projector set for an m-particle sector (alias for
/// [`ProjectorSet::build`]).
pub fn build_projectors(q: u32, n: u32, m: u32, statistics: Statistics) -> Result<ProjectorSet> {
    ProjectorSet::build(q, n, m, statistics)
}

/// An m-particle Hamiltonian: a Hermitian N_A x N_A matrix.
#[derive(Clone, Debug)]
pub struct MParticleHamiltonian {
    m: u32,
    matrix: CMatrix,
}

impl MParticleHamiltonian {
    pub fn new(m: u32, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        let scale = matrix.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
        let asym = max_asymmetry(&matrix);
        if asym > 1e-12 * scale.max(1.0) {
            return Err(Error::NonHermitian {
                max_asymmetry: asym,
            });
        }
        Ok(Self { m, matrix })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
}

/// `H = sum_{I,J} H^(m)_{I,J} P_{I,J}` on the n-particle space.
pub fn assemble_hamiltonian(hm: &MParticleHamiltonian, p: &ProjectorSet) -> Result<CMatrix> {
    let n_a = p.dim_m();
    if hm.matrix.nrows() != n_a {
        return Err(Error::DimensionMismatch {
            expected: n_a,
            got: hm.matrix.nrows(),
        });
    }
    let n = p.dim_n();
    let mut out = CMatrix::zeros(n, n);
    for i in 0..n_a {
        for j in 0..n_a {
            let coeff = hm.matrix[(i, j)];
            if coeff == C64::new(0.0, 0.0) {
                continue;
            }
            for &(a, b, v) in p.triplets(i, j) {
                out[(a as usize, b as usize)] += coeff * C64::new(v, 0.0);
            }
        }
    }
    Ok(out)
}

/// A named list of Hermitian operators, optionally with real parameters.
/// Schrodinger-style families put the identity first so that the leading
/// parameter plays the role of `-E`.
#[derive(Clone, Debug)]
pub struct HamiltonianFamily {
    names: Vec<String>,
    operators: Vec<CMatrix>,
    parameters: Option<Vec<f64>>,
}

impl HamiltonianFamily {
    pub fn new(names: Vec<String>, operators: Vec<CMatrix>) -> Result<Self> {
        assert_eq!(names.len(), operators.len());
        let dim = operators.first().map(|o| o.nrows()).unwrap_or(0);
        for op in &operators {
            if op.nrows() != dim || op.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: op.nrows(),
                });
            }
            let scale = op.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
            let asym = max_asymmetry(op);
            if asym > 1e-12 * scale.max(1.0) {
                return Err(Error::NonHermitian {
                    max_asymmetry: asym,
                });
            }
        }
        Ok(Self {
            names,
            operators,
            parameters: None,
        })
    }

    /// Prepend the identity operator, making the family suitable as the dual
    /// form of a Schrodinger equation with leading parameter `-E`.
    pub fn schrodinger(names: Vec<String>, operators: Vec<CMatrix>) -> Result<Self> {
        let dim = operators
            .first()
            .map(|o| o.nrows())
            .ok_or(Error::EmptyMatrix)?;
        let mut all_names = vec!["identity".to_string()];
        all_names.extend(names);
        let mut all_ops = vec![CMatrix::identity(dim, dim)];
        all_ops.extend(operators);
        Self::new(all_names, all_ops)
    }

    pub fn with_parameters(mut self, parameters: Vec<f64>) -> Result<Self> {
        if parameters.len() != self.operators.len() {
            return Err(Error::ParameterMismatch {
                expected: self.operators.len(),
                got: parameters.len(),
            });
        }
        self.parameters = Some(parameters);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.operators.first().map(|o| o.nrows()).unwrap_or(0)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    pub fn parameters(&self) -> Option<&[f64]> {
        self.parameters.as_deref()
    }

    /// `sum_alpha eta_alpha H_alpha` for a real parameter vector.
    pub fn combine(&self, eta: &[f64]) -> Result<CMatrix> {
        if eta.len() != self.operators.len() {
            return Err(Error::ParameterMismatch {
                expected: self.operators.len(),
                got: eta.len(),
            });
        }
        let dim = self.dim();
        let mut out = CMatrix::zeros(dim, dim);
        for (coeff, op) in eta.iter().zip(&self.operators) {
            out += op * C64::new(*coeff, 0.0);
        }
        Ok(out)
    }
}

/// The N_A^2 Hermitian generators spanning `{sum H_{I,J} P_{I,J} : H Hermitian}`
/// over the reals: each diagonal `P_{I,I}`, and for every pair I < J the
/// symmetric `P_{I,J} + P_{J,I}` and antisymmetric `i(P_{I,J} - P_{J,I})`
/// combinations. Ordered diagonals-first, then pairs in lexicographic order;
/// [`encode_eta`] produces the matching coefficients.
pub fn hermitian_generator_basis(p: &ProjectorSet) -> HamiltonianFamily {
    let n_a = p.dim_m();
    let n = p.dim_n();
    let mut names = Vec::with_capacity(n_a * n_a);
    let mut ops = Vec::with_capacity(n_a * n_a);
    for i in 0..n_a {
        names.push(format!("diag[{i}]"));
        ops.push(p.dense(i, i));
    }
    for i in 0..n_a {
        for j in (i + 1)..n_a {
            let pij = p.dense(i, j);
            let pji = p.dense(j, i);
            names.push(format!("sym[{i},{j}]"));
            ops.push(&pij + &pji);
            names.push(format!("asym[{i},{j}]"));
            let mut anti = CMatrix::zeros(n, n);
            for r in 0..n {
                for c in 0..n {
                    anti[(r, c)] = C64::new(0.0, 1.0) * (pij[(r, c)] - pji[(r, c)]);
                }
            }
            ops.push(anti);
        }
    }
    HamiltonianFamily::new(names, ops).expect("generators are Hermitian by construction")
}

/// Real coefficients eta such that `sum eta_alpha G_alpha = sum H_{I,J} P_{I,J}`
/// for the generator ordering of [`hermitian_generator_basis`].
pub fn encode_eta(hm: &MParticleHamiltonian) -> Vec<f64> {
    let n_a = hm.matrix.nrows();
    let mut eta = Vec::with_capacity(n_a * n_a);
    for i in 0..n_a {
        eta.push(hm.matrix[(i, i)].re);
    }
    for i in 0..n_a {
        for j in (i + 1)..n_a {
            eta.push(hm.matrix[(i, j)].re);
            eta.push(hm.matrix[(i, j)].im);
        }
    }
    eta
}

/// Chain boundary condition for the Hubbard model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

/// A 1D Hubbard chain: spin-orbital label = 2*site + spin + 1 with spin 0 = up,
/// 1 = down, so q = 2L on the fermionic n-electron basis.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HubbardSpec {
    pub sites: usize,
    pub electrons: usize,
    pub boundary: Boundary,
    pub t: f64,
    pub u: f64,
}

/// The assembled Hubbard system: fermionic basis plus the Schrodinger family
/// {identity, hopping, interaction}.
#[derive(Clone, Debug)]
pub struct HubbardSystem {
    pub spec: HubbardSpec,
    pub basis: Basis,
    pub family: HamiltonianFamily,
}

impl HubbardSystem {
    /// Concrete Hamiltonian `t*T + U*V` from the spec's couplings.
    pub fn hamiltonian(&self) -> CMatrix {
        let t = self.family.operators()[1].clone() * C64::new(self.spec.t, 0.0);
        let v = self.family.operators()[2].clone() * C64::new(self.spec.u, 0.0);
        t + v
    }
}

fn spin_orbital(site: usize, spin: usize) -> u32 {
    (2 * site + spin) as u32 + 1
}

/// Build the Hubbard family {identity, T, V} on the n-electron basis.
pub fn hubbard_operators(spec: HubbardSpec) -> Result<HubbardSystem> {
    let l = spec.sites;
    if l == 0 || spec.electrons == 0 || spec.electrons > 2 * l {
        return Err(Error::InvalidFilling {
            electrons: spec.electrons,
            sites: l,
        });
    }
    let q = 2 * l as u32;
    let basis = Basis::new(q, spec.electrons as u32, Statistics::Fermi)?;
    let dim = basis.dim();

    // Nearest-neighbour bonds, deduplicated so a 2-site ring does not double.
    let mut bonds: Vec<(usize, usize)> = Vec::new();
    for i in 0..l.saturating_sub(1) {
        bonds.push((i, i + 1));
    }
    if spec.boundary == Boundary::Periodic && l > 2 {
        bonds.push((l - 1, 0));
    }

    let mut t_op = CMatrix::zeros(dim, dim);
    for (pos, alpha) in basis.sets().iter().enumerate() {
        let occupied = alpha.labels();
        for &(s1, s2) in &bonds {
            for spin in 0..2 {
                let o1 = spin_orbital(s1, spin);
                let o2 = spin_orbital(s2, spin);
                for &(dst, src) in &[(o1, o2), (o2, o1)] {
                    if !occupied.contains(&src) || occupied.contains(&dst) {
                        continue;
                    }
                    // Fermionic string: parity of occupied labels strictly
                    // between the two orbitals of the hop.
                    let (lo, hi) = if dst < src { (dst, src) } else { (src, dst) };
                    let between = occupied.iter().filter(|&&p| p > lo && p < hi).count();
                    let sign = if between % 2 == 0 { 1.0 } else { -1.0 };
                    let mut new_labels: Vec<u32> = occupied
                        .iter()
                        .copied()
                        .filter(|&p| p != src)
                        .collect();
                    new_labels.push(dst);
                    new_labels.sort_unstable();
                    let target = basis
                        .position(&new_labels)
                        .expect("hop stays in the n-electron sector");
                    t_op[(target, pos)] += C64::new(sign, 0.0);
                }
            }
        }
    }

    let mut v_op = CMatrix::zeros(dim, dim);
    for (pos, alpha) in basis.sets().iter().enumerate() {
        let occupied = alpha.labels();
        let mut doublons = 0u32;
        for site in 0..l {
            if occupied.contains(&spin_orbital(site, 0)) && occupied.contains(&spin_orbital(site, 1))
            {
                doublons += 1;
            }
        }
        v_op[(pos, pos)] = C64::new(doublons as f64, 0.0);
    }

    let family = HamiltonianFamily::schrodinger(
        vec!["hopping".into(), "interaction".into()],
        vec![t_op, v_op],
    )?;
    Ok(HubbardSystem { spec, basis, family })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::IndexSet;
    use crate::kernel::random_hermitian;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Dense oracle for P_{I,J}: loop over all (alpha, beta) pairs and check
    /// whether alpha splits as (I, K) and beta as (J, K) for the same K,
    /// evaluating the symmetry factors from the occupation formula directly.
    fn dense_projector_oracle(
        p: &ProjectorSet,
        i: usize,
        j: usize,
    ) -> CMatrix {
        let n = p.dim_n();
        let set_i = p.basis_m().set(i);
        let set_j = p.basis_m().set(j);
        let stat = p.statistics();
        let mut out = CMatrix::zeros(n, n);
        for (ai, alpha) in p.basis_n().sets().iter().enumerate() {
            for (bi, beta) in p.basis_n().sets().iter().enumerate() {
                let Some(k_from_alpha) = set_i.complement_in(alpha) else {
                    continue;
                };
                let Some(k_from_beta) = set_j.complement_in(beta) else {
                    continue;
                };
                if k_from_alpha != k_from_beta {
                    continue;
                }
                let k = IndexSet::new(k_from_alpha, p.q(), stat).unwrap();
                let si = sigma(set_i, &k, stat).unwrap();
                let sj = sigma(set_j, &k, stat).unwrap();
                out[(ai, bi)] = c(si * sj * p.normalization(), 0.0);
            }
        }
        out
    }

    #[test]
    fn sparse_matches_dense_oracle_on_small_systems() {
        let configs = [
            (2u32, 4u32, 2u32, Statistics::Bose),
            (2, 4, 1, Statistics::Bose),
            (3, 3, 2, Statistics::Bose),
            (2, 2, 2, Statistics::Bose),
            (4, 2, 1, Statistics::Fermi),
            (4, 3, 2, Statistics::Fermi),
            (5, 3, 1, Statistics::Fermi),
            (6, 3, 3, Statistics::Fermi),
        ];
        for &(q, n, m, stat) in &configs {
            let p = ProjectorSet::build(q, n, m, stat).unwrap();
            assert!(p.dim_n() <= 50);
            for i in 0..p.dim_m() {
                for j in 0..p.dim_m() {
                    let dense = p.dense(i, j);
                    let oracle = dense_projector_oracle(&p, i, j);
                    assert!(
                        (dense - oracle).norm() <= 1e-13,
                        "mismatch at q={q} n={n} m={m} {stat:?} pair ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn projector_invariants() {
        for &(q, n, m, stat) in &[
            (2u32, 4u32, 2u32, Statistics::Bose),
            (3, 4, 2, Statistics::Bose),
            (4, 2, 1, Statistics::Fermi),
            (4, 3, 2, Statistics::Fermi),
        ] {
            let p = ProjectorSet::build(q, n, m, stat).unwrap();
            // Adjoint pairing (P_{I,J})^dag = P_{J,I}.
            for i in 0..p.dim_m() {
                for j in 0..p.dim_m() {
                    let diff = (p.dense(i, j).adjoint() - p.dense(j, i)).norm();
                    assert!(diff == 0.0);
                }
            }
            // Diagonal sum closes to the identity.
            let mut total = CMatrix::zeros(p.dim_n(), p.dim_n());
            for i in 0..p.dim_m() {
                total += p.dense(i, i);
            }
            let err = (total - CMatrix::identity(p.dim_n(), p.dim_n())).norm();
            assert!(err <= 1e-12, "trace identity failed: {err}");
        }
    }

    #[test]
    fn m_equals_n_gives_unit_matrices() {
        let p = ProjectorSet::build(3, 2, 2, Statistics::Bose).unwrap();
        assert_eq!(p.dim_m(), p.dim_n());
        for i in 0..p.dim_m() {
            for j in 0..p.dim_m() {
                let dense = p.dense(i, j);
                for a in 0..p.dim_n() {
                    for b in 0..p.dim_n() {
                        let expect = if a == i && b == j { 1.0 } else { 0.0 };
                        assert_eq!(dense[(a, b)], c(expect, 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn fermi_one_body_diagonal_counts_occupation() {
        // P_{1,1} for (q=4, n=2, m=1, Fermi) is diagonal with n_1(alpha)/2.
        let p = ProjectorSet::build(4, 2, 1, Statistics::Fermi).unwrap();
        let d = p.dense(0, 0);
        for (ai, alpha) in p.basis_n().sets().iter().enumerate() {
            let expected = if alpha.labels().contains(&1) { 0.5 } else { 0.0 };
            assert_eq!(d[(ai, ai)], c(expected, 0.0));
            for bi in 0..p.dim_n() {
                if bi != ai {
                    assert_eq!(d[(ai, bi)], c(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn invalid_projector_parameters() {
        assert!(ProjectorSet::build(2, 4, 0, Statistics::Bose).is_err());
        assert!(ProjectorSet::build(2, 4, 5, Statistics::Bose).is_err());
        assert!(ProjectorSet::build(2, 3, 1, Statistics::Fermi).is_err());
    }

    #[test]
    fn assemble_identity_and_diagonal_example() {
        let p = ProjectorSet::build(2, 2, 1, Statistics::Bose).unwrap();
        let id = MParticleHamiltonian::new(1, CMatrix::identity(2, 2)).unwrap();
        let h = assemble_hamiltonian(&id, &p).unwrap();
        assert!((h - CMatrix::identity(3, 3)).norm() <= 1e-14);

        let (e1, e2) = (0.7, -1.3);
        let hm = MParticleHamiltonian::new(
            1,
            CMatrix::from_row_slice(2, 2, &[c(e1, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(e2, 0.0)]),
        )
        .unwrap();
        let h = assemble_hamiltonian(&hm, &p).unwrap();
        // Basis order [11], [12], [22].
        let expected = [e1, (e1 + e2) / 2.0, e2];
        for (i, &e) in expected.iter().enumerate() {
            assert!((h[(i, i)] - c(e, 0.0)).norm() <= 1e-14);
        }
        assert!((h.clone() - CMatrix::from_diagonal(&h.diagonal())).norm() == 0.0);
    }

    #[test]
    fn assembled_hamiltonian_stays_hermitian() {
        let p = ProjectorSet::build(3, 4, 2, Statistics::Bose).unwrap();
        let hm = MParticleHamiltonian::new(2, random_hermitian(p.dim_m(), 2)).unwrap();
        let h = assemble_hamiltonian(&hm, &p).unwrap();
        assert!(max_asymmetry(&h) <= 1e-12);
    }

    #[test]
    fn assembly_order_independent() {
        // Summation order over (I,J) pairs must not move the result.
        let p = ProjectorSet::build(2, 4, 2, Statistics::Bose).unwrap();
        let hm = MParticleHamiltonian::new(2, random_hermitian(p.dim_m(), 5)).unwrap();
        let forward = assemble_hamiltonian(&hm, &p).unwrap();
        let n = p.dim_n();
        let n_a = p.dim_m();
        let mut reversed = CMatrix::zeros(n, n);
        for i in (0..n_a).rev() {
            for j in (0..n_a).rev() {
                for &(a, b, v) in p.triplets(i, j) {
                    reversed[(a as usize, b as usize)] += hm.matrix()[(i, j)] * c(v, 0.0);
                }
            }
        }
        assert!((forward - reversed).norm() <= 1e-13);
    }

    #[test]
    fn generator_basis_counts_and_reconstruction() {
        let p = ProjectorSet::build(2, 4, 2, Statistics::Bose).unwrap();
        let n_a = p.dim_m();
        let family = hermitian_generator_basis(&p);
        assert_eq!(family.len(), n_a * n_a);
        for op in family.operators() {
            assert!(max_asymmetry(op) <= 1e-14);
        }
        // Random Hermitian H^(m): direct double-sum equals the eta encoding.
        let hm = MParticleHamiltonian::new(2, random_hermitian(n_a, 31)).unwrap();
        let eta = encode_eta(&hm);
        let via_generators = family.combine(&eta).unwrap();
        let direct = assemble_hamiltonian(&hm, &p).unwrap();
        assert!((via_generators - direct).norm() <= 1e-12);
    }

    #[test]
    fn hubbard_dimensions_and_hermiticity() {
        let spec = HubbardSpec {
            sites: 4,
            electrons: 3,
            boundary: Boundary::Periodic,
            t: 1.0,
            u: 2.0,
        };
        let sys = hubbard_operators(spec).unwrap();
        assert_eq!(sys.basis.dim(), 56);
        let t_op = &sys.family.operators()[1];
        assert!((t_op - t_op.transpose()).norm() == 0.0);
        assert!(t_op.iter().all(|v| v.im == 0.0));
        // Hopping conserves total particle number (diagonal in this sector).
        let n_op = CMatrix::identity(56, 56) * c(3.0, 0.0);
        assert!((t_op * &n_op - &n_op * t_op).norm() <= 1e-12);
    }

    #[test]
    fn hubbard_doublon_count() {
        let spec = HubbardSpec {
            sites: 2,
            electrons: 2,
            boundary: Boundary::Open,
            t: 1.0,
            u: 1.0,
        };
        let sys = hubbard_operators(spec).unwrap();
        // Spin-orbitals on site 0 are labels 1 (up) and 2 (down).
        let pos = sys.basis.position(&[1, 2]).unwrap();
        let v_op = &sys.family.operators()[2];
        assert_eq!(v_op[(pos, pos)], c(1.0, 0.0));
        // A state with electrons on different sites has no doublon.
        let pos13 = sys.basis.position(&[1, 3]).unwrap();
        assert_eq!(v_op[(pos13, pos13)], c(0.0, 0.0));
    }

    #[test]
    fn hubbard_hop_signs_against_operator_oracle() {
        // Single-particle sector: no string signs, T is the plain adjacency.
        let spec = HubbardSpec {
            sites: 3,
            electrons: 1,
            boundary: Boundary::Open,
            t: 1.0,
            u: 0.0,
        };
        let sys = hubbard_operators(spec).unwrap();
        let t_op = &sys.family.operators()[1];
        let up0 = sys.basis.position(&[1]).unwrap();
        let up1 = sys.basis.position(&[3]).unwrap();
        let dn2 = sys.basis.position(&[6]).unwrap();
        assert_eq!(t_op[(up0, up1)], c(1.0, 0.0));
        assert_eq!(t_op[(up1, up0)], c(1.0, 0.0));
        assert_eq!(t_op[(up0, dn2)], c(0.0, 0.0));

        // Two-particle sector with a spectator between the hop endpoints:
        // hopping up: site0 -> site1 over an occupied down orbital on site 0?
        // labels: [2,3] -> hop 3->1 passes label 2 => sign -1.
        let spec = HubbardSpec {
            sites: 2,
            electrons: 2,
            boundary: Boundary::Open,
            t: 1.0,
            u: 0.0,
        };
        let sys = hubbard_operators(spec).unwrap();
        let t_op = &sys.family.operators()[1];
        let from = sys.basis.position(&[2, 3]).unwrap();
        let to = sys.basis.position(&[1, 2]).unwrap();
        assert_eq!(t_op[(to, from)], c(-1.0, 0.0));
        // Same hop without a spectator in between: [3,4] -> [1,4] has label
        // 4 outside the (1,3) interval => sign +1.
        let from = sys.basis.position(&[3, 4]).unwrap();
        let to = sys.basis.position(&[1, 4]).unwrap();
        assert_eq!(t_op[(to, from)], c(1.0, 0.0));
    }

    #[test]
    fn hubbard_invalid_filling() {
        let spec = HubbardSpec {
            sites: 2,
            electrons: 5,
            boundary: Boundary::Open,
            t: 1.0,
            u: 1.0,
        };
        assert!(hubbard_operators(spec).is_err());
    }

    #[test]
    fn family_constructors() {
        let ops = vec![random_hermitian(4, 1), random_hermitian(4, 2)];
        let fam = HamiltonianFamily::schrodinger(vec!["a".into(), "b".into()], ops.clone()).unwrap();
        assert_eq!(fam.len(), 3);
        assert_eq!(fam.names()[0], "identity");
        assert!((fam.operators()[0].clone() - CMatrix::identity(4, 4)).norm() == 0.0);

        let fam = HamiltonianFamily::new(vec!["a".into(), "b".into()], ops).unwrap();
        assert_eq!(fam.len(), 2);
        assert!(fam.clone().with_parameters(vec![1.0]).is_err());
        assert!(fam.with_parameters(vec![1.0, 2.0]).is_ok());

        let mut bad = random_hermitian(3, 3);
        bad[(0, 1)] += c(0.5, 0.0);
        assert!(HamiltonianFamily::new(vec!["x".into()], vec![bad]).is_err());
    }
}

//! Decomposable-state embeddings and their quadratic-relation residuals:
//! Slater determinants against the Plucker relations, bosonic condensates
//! against the Veronese relations, and symmetrized rank-r product states.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::fock::{multinomial, Basis, IndexSet, Statistics};
use crate::kernel::{C64, CMatrix, CVector};
use crate::rdm::PureState;

fn orbital_matrix(orbitals: &[CVector]) -> Result<CMatrix> {
    let n = orbitals.len();
    if n == 0 {
        return Err(Error::EmptyMatrix);
    }
    let q = orbitals[0].len();
    for orb in orbitals {
        if orb.len() != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                got: orb.len(),
            });
        }
        if orb.norm() < 1e-300 {
            return Err(Error::ZeroOrbital);
        }
    }
    Ok(CMatrix::from_fn(q, n, |r, c| orbitals[c][r]))
}

/// Largest off-diagonal Gram entry of a set of orbitals.
pub fn orbital_orthogonality_residual(orbitals: &[CVector]) -> Result<f64> {
    let m = orbital_matrix(orbitals)?;
    let gram = m.adjoint() * &m;
    let mut worst = 0.0f64;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            if i != j {
                worst = worst.max(gram[(i, j)].norm());
            }
        }
    }
    Ok(worst)
}

/// Slater determinant of n orthonormal q-dimensional orbitals: the amplitude
/// on index set I is the minor of the orbital matrix on rows I.
pub fn slater_embed(orbitals: &[CVector]) -> Result<PureState> {
    let m = orbital_matrix(orbitals)?;
    let (q, n) = (m.nrows() as u32, m.ncols() as u32);
    if n > q {
        return Err(Error::EmptyFermiBasis { q, k: n });
    }
    let gram = m.adjoint() * &m;
    let dev = (&gram - CMatrix::identity(n as usize, n as usize)).norm();
    if dev > 1e-10 {
        return Err(Error::NonOrthonormalOrbitals { deviation: dev });
    }
    let basis = Basis::new(q, n, Statistics::Fermi)?;
    let mut amplitudes = CVector::zeros(basis.dim());
    for (pos, set) in basis.sets().iter().enumerate() {
        let sub = CMatrix::from_fn(n as usize, n as usize, |r, c| {
            m[((set.labels()[r] - 1) as usize, c)]
        });
        amplitudes[pos] = sub.determinant();
    }
    let norm = amplitudes.norm();
    amplitudes /= C64::new(norm, 0.0);
    PureState::new(basis, amplitudes)
}

/// Amplitude of the index set `sorted(I + {i})` with the antisymmetric
/// insertion sign, or 0 when the label is already present.
fn signed_insert(psi: &PureState, base: &[u32], label: u32) -> C64 {
    if base.contains(&label) {
        return C64::new(0.0, 0.0);
    }
    let mut labels: Vec<u32> = base.to_vec();
    let above = labels.iter().filter(|&&l| l > label).count();
    labels.push(label);
    labels.sort_unstable();
    let pos = psi
        .basis()
        .position(&labels)
        .expect("insertion stays inside the basis");
    let sign = if above % 2 == 0 { 1.0 } else { -1.0 };
    psi.amplitudes()[pos] * C64::new(sign, 0.0)
}

/// Largest violation of the quadratic Plucker relations over all
/// (n-1)-index and (n+1)-index pairs. Zero (to rounding) exactly on
/// decomposable fermionic states.
pub fn plucker_residual(psi: &PureState) -> Result<f64> {
    let basis = psi.basis();
    if basis.statistics() != Statistics::Fermi {
        return Err(Error::BasisMismatch {
            context: "Plucker relations apply to fermionic states".into(),
        });
    }
    let q = basis.q();
    let n = basis.k();
    if n + 1 > q {
        // The Grassmannian has no quadratic relations in this range.
        return Ok(0.0);
    }
    let lower = Basis::new(q, n - 1, Statistics::Fermi)?;
    let upper = Basis::new(q, n + 1, Statistics::Fermi)?;
    let mut worst = 0.0f64;
    for set_i in lower.sets() {
        for set_j in upper.sets() {
            let mut acc = C64::new(0.0, 0.0);
            for (ord, &label) in set_j.labels().iter().enumerate() {
                let mut rest: Vec<u32> = set_j.labels().to_vec();
                rest.remove(ord);
                let pos = psi.basis().position(&rest).expect("removal stays inside");
                let term = signed_insert(psi, set_i.labels(), label) * psi.amplitudes()[pos];
                if ord % 2 == 0 {
                    acc += term;
                } else {
                    acc -= term;
                }
            }
            worst = worst.max(acc.norm());
        }
    }
    Ok(worst)
}

fn multiplicity_weight(n: u32, set: &IndexSet) -> f64 {
    (multinomial(n, &set.occupations()) as f64).sqrt()
}

/// Bosonic condensate of a single orbital: amplitudes are
/// `sqrt(multinomial) * prod_k orbital[i_k]`, normalized.
pub fn symmetric_product_embed(orbital: &CVector, n: u32) -> Result<PureState> {
    let q = orbital.len() as u32;
    if orbital.norm() < 1e-300 {
        return Err(Error::ZeroOrbital);
    }
    let orb = orbital / C64::new(orbital.norm(), 0.0);
    let basis = Basis::new(q, n, Statistics::Bose)?;
    let mut amplitudes = CVector::zeros(basis.dim());
    for (pos, set) in basis.sets().iter().enumerate() {
        let mut prod = C64::new(1.0, 0.0);
        for &l in set.labels() {
            prod *= orb[(l - 1) as usize];
        }
        amplitudes[pos] = prod * C64::new(multiplicity_weight(n, set), 0.0);
    }
    let norm = amplitudes.norm();
    amplitudes /= C64::new(norm, 0.0);
    PureState::new(basis, amplitudes)
}

/// Largest violation of the Veronese relations after de-normalizing the
/// multiplicity weights: products of de-normalized amplitudes depend only on
/// the concatenated occupation.
pub fn veronese_residual(psi: &PureState) -> Result<f64> {
    let basis = psi.basis();
    if basis.statistics() != Statistics::Bose {
        return Err(Error::BasisMismatch {
            context: "Veronese relations apply to bosonic states".into(),
        });
    }
    let n = basis.k();
    let mut tilde = Vec::with_capacity(basis.dim());
    for (pos, set) in basis.sets().iter().enumerate() {
        tilde.push(psi.amplitudes()[pos] / C64::new(multiplicity_weight(n, set), 0.0));
    }
    // Group products by the summed occupation vector of the two factors.
    let mut groups: HashMap<Vec<u32>, Vec<C64>> = HashMap::new();
    for (i, set_i) in basis.sets().iter().enumerate() {
        for (j, set_j) in basis.sets().iter().enumerate().skip(i) {
            let occ: Vec<u32> = set_i
                .occupations()
                .iter()
                .zip(set_j.occupations().iter())
                .map(|(a, b)| a + b)
                .collect();
            groups.entry(occ).or_default().push(tilde[i] * tilde[j]);
        }
    }
    let mut worst = 0.0f64;
    for values in groups.values() {
        for a in 0..values.len() {
            for b in (a + 1)..values.len() {
                worst = worst.max((values[a] - values[b]).norm());
            }
        }
    }
    Ok(worst)
}

/// Normalized symmetrized product of orbitals with multiplicities: the state
/// `prod_j (sum_a phi_j[a] a^dag_a)^{m_j} |0>` expressed on the bosonic
/// n-particle basis.
pub fn symmetrized_product_state(orbitals: &[(CVector, u32)]) -> Result<PureState> {
    if orbitals.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let q = orbitals[0].0.len();
    let n: u32 = orbitals.iter().map(|(_, m)| *m).sum();
    for (orb, _) in orbitals {
        if orb.len() != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                got: orb.len(),
            });
        }
        if orb.norm() < 1e-300 {
            return Err(Error::ZeroOrbital);
        }
    }
    // Expand the creation-operator polynomial over occupation multi-indices.
    let mut poly: HashMap<Vec<u32>, C64> = HashMap::new();
    poly.insert(vec![0u32; q], C64::new(1.0, 0.0));
    for (orb, mult) in orbitals {
        for _ in 0..*mult {
            let mut next: HashMap<Vec<u32>, C64> = HashMap::with_capacity(poly.len() * q);
            for (occ, coef) in &poly {
                for a in 0..q {
                    if orb[a] == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let mut occ2 = occ.clone();
                    occ2[a] += 1;
                    *next.entry(occ2).or_insert(C64::new(0.0, 0.0)) += coef * orb[a];
                }
            }
            poly = next;
        }
    }
    let basis = Basis::new(q as u32, n, Statistics::Bose)?;
    let mut amplitudes = CVector::zeros(basis.dim());
    for (pos, set) in basis.sets().iter().enumerate() {
        if let Some(&coef) = poly.get(&set.occupations()) {
            // (a^dag)^occ |0> has norm sqrt(prod occ_a!).
            let weight: f64 = set
                .occupations()
                .iter()
                .map(|&c| (1..=c as u64).product::<u64>() as f64)
                .product::<f64>()
                .sqrt();
            amplitudes[pos] = coef * C64::new(weight, 0.0);
        }
    }
    let norm = amplitudes.norm();
    if norm < 1e-300 {
        return Err(Error::ZeroOrbital);
    }
    amplitudes /= C64::new(norm, 0.0);
    PureState::new(basis, amplitudes)
}

//! File formats: states, m-particle Hamiltonians, operator families, RDMs,
//! and the flat CSV export of scan reports. Complex numbers serialize as
//! `[re, im]` pairs; all matrices are row-major against the canonical
//! lexicographic basis order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{Basis, Statistics, SIGMA_CONVENTION};
use crate::kernel::{C64, CMatrix, CVector};
use crate::moduli::ScanReport;
use crate::operators::{HamiltonianFamily, MParticleHamiltonian};
use crate::rdm::{PureState, ReducedDensityMatrix};

pub type ComplexPair = [f64; 2];

pub fn to_pair(c: C64) -> ComplexPair {
    [c.re, c.im]
}

pub fn from_pair(p: ComplexPair) -> C64 {
    C64::new(p[0], p[1])
}

pub fn matrix_to_pairs(m: &CMatrix) -> Vec<Vec<ComplexPair>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| to_pair(m[(i, j)])).collect())
        .collect()
}

pub fn matrix_from_pairs(rows: &[Vec<ComplexPair>]) -> Result<CMatrix> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(Error::EmptyMatrix);
    }
    let ncols = rows[0].len();
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::EmptyMatrix);
    }
    Ok(CMatrix::from_fn(nrows, ncols, |i, j| from_pair(rows[i][j])))
}

/// On-disk pure state: `{q, n, statistics, amplitudes: [[re, im], ...]}` in
/// canonical basis order.
#[derive(Debug, Serialize, Deserialize)]
pub struct StateFile {
    pub q: u32,
    pub n: u32,
    pub statistics: Statistics,
    pub amplitudes: Vec<ComplexPair>,
}

impl StateFile {
    pub fn from_state(psi: &PureState) -> Self {
        Self {
            q: psi.basis().q(),
            n: psi.basis().k(),
            statistics: psi.basis().statistics(),
            amplitudes: psi.amplitudes().iter().map(|&c| to_pair(c)).collect(),
        }
    }

    pub fn into_state(self) -> Result<PureState> {
        let basis = Basis::new(self.q, self.n, self.statistics)?;
        let amplitudes = CVector::from_iterator(
            self.amplitudes.len(),
            self.amplitudes.iter().map(|&p| from_pair(p)),
        );
        PureState::new(basis, amplitudes)
    }
}

/// On-disk m-particle Hamiltonian with enough header to re-derive shapes.
#[derive(Debug, Serialize, Deserialize)]
pub struct HamiltonianFile {
    pub q: u32,
    pub n: u32,
    pub m: u32,
    pub statistics: Statistics,
    /// The projector scale 1/C(n,m) that will be applied on assembly.
    pub normalization: f64,
    pub sigma_convention: String,
    pub matrix: Vec<Vec<ComplexPair>>,
}

impl HamiltonianFile {
    pub fn new(q: u32, n: u32, statistics: Statistics, hm: &MParticleHamiltonian) -> Self {
        let c = crate::fock::binomial(n as u64, hm.m() as u64) as f64;
        Self {
            q,
            n,
            m: hm.m(),
            statistics,
            normalization: 1.0 / c,
            sigma_convention: SIGMA_CONVENTION.to_string(),
            matrix: matrix_to_pairs(hm.matrix()),
        }
    }

    pub fn into_hamiltonian(self) -> Result<MParticleHamiltonian> {
        MParticleHamiltonian::new(self.m, matrix_from_pairs(&self.matrix)?)
    }
}

/// On-disk Hamiltonian family.
#[derive(Debug, Serialize, Deserialize)]
pub struct FamilyFile {
    pub dim: usize,
    pub names: Vec<String>,
    pub operators: Vec<Vec<Vec<ComplexPair>>>,
    pub parameters: Option<Vec<f64>>,
}

impl FamilyFile {
    pub fn from_family(f: &HamiltonianFamily) -> Self {
        Self {
            dim: f.dim(),
            names: f.names().to_vec(),
            operators: f.operators().iter().map(matrix_to_pairs).collect(),
            parameters: f.parameters().map(|p| p.to_vec()),
        }
    }

    pub fn into_family(self) -> Result<HamiltonianFamily> {
        let ops = self
            .operators
            .iter()
            .map(|o| matrix_from_pairs(o))
            .collect::<Result<Vec<_>>>()?;
        let fam = HamiltonianFamily::new(self.names, ops)?;
        match self.parameters {
            Some(p) => fam.with_parameters(p),
            None => Ok(fam),
        }
    }
}

/// On-disk RDM with its trace convention.
#[derive(Debug, Serialize, Deserialize)]
pub struct RdmFile {
    pub m: u32,
    pub trace_convention: String,
    pub sigma_convention: String,
    pub matrix: Vec<Vec<ComplexPair>>,
}

impl RdmFile {
    pub fn from_rdm(rho: &ReducedDensityMatrix) -> Self {
        Self {
            m: rho.m,
            trace_convention: "unit".to_string(),
            sigma_convention: SIGMA_CONVENTION.to_string(),
            matrix: matrix_to_pairs(&rho.matrix),
        }
    }
}

/// Flat CSV of a scan report: one line per eigenstate record.
pub fn scan_to_csv(report: &ScanReport) -> String {
    let mut out = String::from("trial,index,energy,gap,coker_dim,excess,eta_alignment\n");
    for r in &report.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.trial, r.index, r.energy, r.gap_to_nearest, r.coker_dim, r.excess, r.eta_alignment
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::random_state;

    #[test]
    fn state_file_roundtrip() {
        let basis = Basis::new(3, 4, Statistics::Bose).unwrap();
        let psi = PureState::new(basis.clone(), random_state(basis.dim(), 5)).unwrap();
        let file = StateFile::from_state(&psi);
        let json = serde_json::to_string(&file).unwrap();
        let back: StateFile = serde_json::from_str(&json).unwrap();
        let psi2 = back.into_state().unwrap();
        assert_eq!(psi.amplitudes(), psi2.amplitudes());
    }

    #[test]
    fn state_file_rejects_bad_norm() {
        let file = StateFile {
            q: 2,
            n: 2,
            statistics: Statistics::Bose,
            amplitudes: vec![[0.0, 0.0]; 3],
        };
        assert!(file.into_state().is_err());
    }

    #[test]
    fn hamiltonian_file_roundtrip() {
        let hm = MParticleHamiltonian::new(2, crate::kernel::random_hermitian(3, 9)).unwrap();
        let file = HamiltonianFile::new(2, 6, Statistics::Bose, &hm);
        assert!((file.normalization - 1.0 / 15.0).abs() < 1e-15);
        let json = serde_json::to_string(&file).unwrap();
        let back: HamiltonianFile = serde_json::from_str(&json).unwrap();
        let hm2 = back.into_hamiltonian().unwrap();
        assert_eq!(hm.matrix(), hm2.matrix());
    }

    #[test]
    fn family_file_roundtrip() {
        let fam = HamiltonianFamily::schrodinger(
            vec!["a".into()],
            vec![crate::kernel::random_hermitian(4, 2)],
        )
        .unwrap()
        .with_parameters(vec![-1.0, 0.5])
        .unwrap();
        let file = FamilyFile::from_family(&fam);
        let json = serde_json::to_string(&file).unwrap();
        let back: FamilyFile = serde_json::from_str(&json).unwrap();
        let fam2 = back.into_family().unwrap();
        assert_eq!(fam.names(), fam2.names());
        assert_eq!(fam.operators()[1], fam2.operators()[1]);
        assert_eq!(fam.parameters(), fam2.parameters());
    }
}

//! Combinatorics of symmetrized occupation bases: ordered index sets,
//! lexicographic enumeration with inverse lookup, ordered concatenation with
//! signs/multiplicities, and the symmetry factors weighting them.
//!
//! Labels are 1-based externally; positions into a [`Basis`] are 0-based.
//! Lexicographic order over index tuples is the canonical basis order used by
//! every matrix and file in this crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Human-readable statement of the bosonic symmetry-factor convention,
/// embedded in every report and output file.
pub const SIGMA_CONVENTION: &str =
    "bosonic sigma_{I,K} = sqrt(prod_a n_a^(IK)!/(n_a^I! n_a^K!)); \
     projectors scaled by 1/C(n,m) so sum_I P_{I,I} = identity and tr rho = 1";

/// Particle exchange statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistics {
    Bose,
    Fermi,
}

impl std::fmt::Display for Statistics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Statistics::Bose => write!(f, "bose"),
            Statistics::Fermi => write!(f, "fermi"),
        }
    }
}

/// Convention for the bosonic symmetry factor.
///
/// `TraceConsistent` puts the concatenated occupations' factorials in the
/// numerator, which makes the diagonal projector sum proportional to the
/// identity. `PrintedAlternate` is the reciprocal; it is kept only so
/// validation tooling can demonstrate that the trace identity singles out
/// the first convention.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SigmaConvention {
    TraceConsistent,
    PrintedAlternate,
}

/// An ordered multi-index `[i_1, ..., i_k]` of 1-based single-particle labels,
/// non-decreasing for bosons and strictly increasing for fermions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IndexSet {
    labels: Vec<u32>,
    q: u32,
}

impl IndexSet {
    /// Validate labels against the single-particle dimension and ordering rule.
    pub fn new(labels: Vec<u32>, q: u32, statistics: Statistics) -> Result<Self> {
        for &l in &labels {
            if l < 1 || l > q {
                return Err(Error::LabelOutOfRange { label: l, q });
            }
        }
        let ordered = match statistics {
            Statistics::Bose => labels.windows(2).all(|w| w[0] <= w[1]),
            Statistics::Fermi => labels.windows(2).all(|w| w[0] < w[1]),
        };
        if !ordered {
            return Err(Error::UnorderedIndexSet { labels, statistics });
        }
        Ok(Self { labels, q })
    }

    /// The vacuum index set (k = 0).
    pub fn empty(q: u32) -> Self {
        Self { labels: Vec::new(), q }
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    /// Particle count k.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Occupation numbers `n_a` for a = 1..=q.
    pub fn occupations(&self) -> Vec<u32> {
        let mut occ = vec![0u32; self.q as usize];
        for &l in &self.labels {
            occ[(l - 1) as usize] += 1;
        }
        occ
    }

    /// Multiset inclusion: every occupation of `self` fits inside `other`.
    pub fn is_subset_of(&self, other: &IndexSet) -> bool {
        if self.q != other.q {
            return false;
        }
        let a = self.occupations();
        let b = other.occupations();
        a.iter().zip(b.iter()).all(|(x, y)| x <= y)
    }

    /// Multiset difference `other \ self`, if `self` is contained in `other`.
    pub fn complement_in(&self, other: &IndexSet) -> Option<Vec<u32>> {
        if !self.is_subset_of(other) {
            return None;
        }
        let mut occ = other.occupations();
        for &l in &self.labels {
            occ[(l - 1) as usize] -= 1;
        }
        let mut rest = Vec::with_capacity(other.len() - self.len());
        for (a, &c) in occ.iter().enumerate() {
            for _ in 0..c {
                rest.push(a as u32 + 1);
            }
        }
        Some(rest)
    }
}

impl Serialize for IndexSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.labels.serialize(s)
    }
}

/// Ordered concatenation of two index sets.
///
/// The coefficient is the fermionic permutation sign (0 on overlap) or 1 for
/// bosons; bosonic multiplicity lives in [`sigma`], not here.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcatResult {
    pub sorted: Vec<u32>,
    pub coefficient: f64,
}

/// The full symmetrized basis for k particles in q single-particle states.
#[derive(Clone, Debug)]
pub struct Basis {
    q: u32,
    k: u32,
    statistics: Statistics,
    sets: Vec<IndexSet>,
}

impl PartialEq for Basis {
    fn eq(&self, other: &Self) -> bool {
        self.q == other.q && self.k == other.k && self.statistics == other.statistics
    }
}

impl Basis {
    /// Enumerate all index sets in lexicographic order.
    pub fn new(q: u32, k: u32, statistics: Statistics) -> Result<Self> {
        if q == 0 && k > 0 {
            return Err(Error::InvalidBasis { q, k });
        }
        if statistics == Statistics::Fermi && k > q {
            return Err(Error::EmptyFermiBasis { q, k });
        }
        let mut sets = Vec::new();
        if k == 0 {
            sets.push(IndexSet::empty(q));
        } else {
            // Odometer over ordered tuples; successor keeps lexicographic order.
            let strict = statistics == Statistics::Fermi;
            let mut cur: Vec<u32> = match statistics {
                Statistics::Bose => vec![1; k as usize],
                Statistics::Fermi => (1..=k).collect(),
            };
            loop {
                sets.push(IndexSet {
                    labels: cur.clone(),
                    q,
                });
                // Find rightmost position that can still be incremented.
                let ku = k as usize;
                let mut pos = ku;
                for i in (0..ku).rev() {
                    let cap = if strict { q - (k - 1 - i as u32) } else { q };
                    if cur[i] < cap {
                        pos = i;
                        break;
                    }
                }
                if pos == ku {
                    break;
                }
                cur[pos] += 1;
                for i in (pos + 1)..ku {
                    cur[i] = if strict { cur[i - 1] + 1 } else { cur[pos] };
                }
            }
        }
        debug_assert_eq!(sets.len() as u64, basis_size(q, k, statistics));
        Ok(Self {
            q,
            k,
            statistics,
            sets,
        })
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    pub fn dim(&self) -> usize {
        self.sets.len()
    }

    pub fn sets(&self) -> &[IndexSet] {
        &self.sets
    }

    pub fn set(&self, pos: usize) -> &IndexSet {
        &self.sets[pos]
    }

    /// Inverse lookup: position of an index set given by its labels.
    pub fn position(&self, labels: &[u32]) -> Option<usize> {
        self.sets
            .binary_search_by(|s| s.labels.as_slice().cmp(labels))
            .ok()
    }
}

impl Serialize for Basis {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Basis", 4)?;
        st.serialize_field("q", &self.q)?;
        st.serialize_field("k", &self.k)?;
        st.serialize_field("statistics", &self.statistics)?;
        st.serialize_field("sets", &self.sets)?;
        st.end()
    }
}

/// Closed-form basis cardinality: C(q+k-1, k) for bosons, C(q, k) for fermions.
pub fn basis_size(q: u32, k: u32, statistics: Statistics) -> u64 {
    match statistics {
        Statistics::Bose => binomial((q + k).saturating_sub(1) as u64, k as u64),
        Statistics::Fermi => binomial(q as u64, k as u64),
    }
}

/// Enumerate the symmetrized k-particle basis (alias for [`Basis::new`]).
pub fn enumerate_basis(q: u32, k: u32, statistics: Statistics) -> Result<Basis> {
    Basis::new(q, k, statistics)
}

/// Ordered concatenation `(IK)` with its fermionic sign or bosonic merge.
pub fn concat_index(i: &IndexSet, k: &IndexSet, statistics: Statistics) -> Result<ConcatResult> {
    if i.q != k.q {
        return Err(Error::QMismatch {
            left: i.q,
            right: k.q,
        });
    }
    let mut merged: Vec<u32> = Vec::with_capacity(i.len() + k.len());
    merged.extend_from_slice(&i.labels);
    merged.extend_from_slice(&k.labels);
    match statistics {
        Statistics::Bose => {
            merged.sort_unstable();
            Ok(ConcatResult {
                sorted: merged,
                coefficient: 1.0,
            })
        }
        Statistics::Fermi => {
            // Both halves are sorted, so the permutation parity is the count
            // of pairs (x in I, y in K) with x > y.
            let mut inversions = 0u64;
            let mut overlap = false;
            for &x in &i.labels {
                for &y in &k.labels {
                    if x == y {
                        overlap = true;
                    } else if x > y {
                        inversions += 1;
                    }
                }
            }
            merged.sort_unstable();
            let coefficient = if overlap {
                0.0
            } else if inversions % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            Ok(ConcatResult {
                sorted: merged,
                coefficient,
            })
        }
    }
}

/// Symmetry factor weighting the concatenation `(IK)`.
///
/// Fermions: the Levi-Civita sign of the sort (0 on overlap). Bosons:
/// `sqrt(prod_a C(n_a^(IK), n_a^I))`, the multiplicity factor that makes the
/// diagonal projector sum close to the identity.
pub fn sigma(i: &IndexSet, k: &IndexSet, statistics: Statistics) -> Result<f64> {
    sigma_with_convention(i, k, statistics, SigmaConvention::TraceConsistent)
}

/// [`sigma`] with an explicit bosonic convention; see [`SigmaConvention`].
pub fn sigma_with_convention(
    i: &IndexSet,
    k: &IndexSet,
    statistics: Statistics,
    convention: SigmaConvention,
) -> Result<f64> {
    match statistics {
        Statistics::Fermi => Ok(concat_index(i, k, statistics)?.coefficient),
        Statistics::Bose => {
            if i.q != k.q {
                return Err(Error::QMismatch {
                    left: i.q,
                    right: k.q,
                });
            }
            let occ_i = i.occupations();
            let occ_k = k.occupations();
            let mut prod = 1.0f64;
            for a in 0..i.q as usize {
                let total = (occ_i[a] + occ_k[a]) as u64;
                prod *= binomial(total, occ_i[a] as u64) as f64;
            }
            let value = prod.sqrt();
            Ok(match convention {
                SigmaConvention::TraceConsistent => value,
                SigmaConvention::PrintedAlternate => 1.0 / value,
            })
        }
    }
}

/// Binomial coefficient in exact integer arithmetic.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

/// n!/(prod_a occ_a!) as an exact integer (arguments stay desk-scale).
pub fn multinomial(n: u32, occupations: &[u32]) -> u64 {
    debug_assert_eq!(occupations.iter().sum::<u32>(), n);
    let mut acc: u128 = 1;
    let mut used = 0u64;
    for &c in occupations {
        for j in 1..=c as u64 {
            used += 1;
            acc = acc * used as u128 / j as u128;
        }
    }
    acc as u64
}

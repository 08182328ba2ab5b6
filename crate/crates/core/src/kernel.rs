//! Dense complex linear-algebra contracts: Hermitian eigendecomposition,
//! SVD-based rank and left-nullspace with an explicit tolerance policy,
//! determinants, and seeded random matrix generation.
//!
//! All operations are pure; callers needing parallel randomness derive
//! independent substreams via [`substream`]. Dense algorithms only, intended
//! for dimensions up to a couple of thousand.

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Numeric-rank thresholding: a singular value counts toward the rank when it
/// exceeds `max(relative_threshold * sigma_max, absolute_floor)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TolerancePolicy {
    pub relative_threshold: f64,
    pub absolute_floor: f64,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        Self {
            relative_threshold: 1e-9,
            absolute_floor: 1e-14,
        }
    }
}

impl TolerancePolicy {
    pub fn new(relative_threshold: f64, absolute_floor: f64) -> Result<Self> {
        if !(relative_threshold > 0.0) || !(absolute_floor > 0.0) {
            return Err(Error::InvalidTolerance);
        }
        Ok(Self {
            relative_threshold,
            absolute_floor,
        })
    }

    pub fn cutoff(&self, sigma_max: f64) -> f64 {
        (self.relative_threshold * sigma_max).max(self.absolute_floor)
    }
}

/// Descending singular spectrum of a matrix.
#[derive(Clone, Debug, Serialize)]
pub struct SvdSpectrum {
    singular_values: Vec<f64>,
}

impl SvdSpectrum {
    pub fn values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn largest(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn rank_at(&self, policy: &TolerancePolicy) -> usize {
        let cut = policy.cutoff(self.largest());
        self.singular_values.iter().filter(|&&s| s > cut).count()
    }
}

/// Ascending eigenvalues with matching orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct HermitianEig {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

fn check_finite(m: &CMatrix) -> Result<()> {
    if m.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

fn check_nonempty(m: &CMatrix) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::EmptyMatrix);
    }
    Ok(())
}

/// Largest entrywise deviation from Hermiticity.
pub fn max_asymmetry(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn check_hermitian(m: &CMatrix, rel_tol: f64) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let scale = m.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    let asym = max_asymmetry(m);
    if asym > rel_tol * scale.max(1.0) {
        return Err(Error::NonHermitian {
            max_asymmetry: asym,
        });
    }
    Ok(())
}

/// Hermitian eigendecomposition with ascending eigenvalues.
///
/// Cyclic Jacobi with unitary plane rotations: unconditionally convergent
/// and accurate to machine rounding, which the cokernel certifications
/// downstream rely on.
pub fn hermitian_eig(h: &CMatrix) -> Result<HermitianEig> {
    check_nonempty(h)?;
    check_finite(h)?;
    check_hermitian(h, 1e-12)?;
    let n = h.nrows();
    let mut a = h.clone();
    // Work on an exactly Hermitian copy.
    for p in 0..n {
        a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
        for q in (p + 1)..n {
            let avg = (a[(p, q)] + a[(q, p)].conj()) / C64::new(2.0, 0.0);
            a[(p, q)] = avg;
            a[(q, p)] = avg.conj();
        }
    }
    let mut v = CMatrix::identity(n, n);
    let tol = 1e-15 * h.norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if (2.0 * off).sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let z = a[(p, q)];
                let r = z.norm();
                if r == 0.0 {
                    continue;
                }
                // Unitary rotation U = [[c, -s*w], [s*conj(w), c]] with
                // w = z/|z| zeroes the (p,q) entry. Componentwise division
                // by the real modulus stays finite even for denormal |z|,
                // where complex division would underflow its denominator.
                let w = C64::new(z.re / r, z.im / r);
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                // Smaller root of t^2 - 2*tau*t - 1 = 0 for a bounded angle.
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    -1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let cs = C64::new(c, 0.0);
                let sw = C64::new(s, 0.0) * w;
                let sw_conj = C64::new(s, 0.0) * w.conj();

                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    let new_kp = cs * akp + sw_conj * akq;
                    let new_kq = cs * akq - sw * akp;
                    a[(k, p)] = new_kp;
                    a[(p, k)] = new_kp.conj();
                    a[(k, q)] = new_kq;
                    a[(q, k)] = new_kq.conj();
                }
                let shift = 2.0 * c * s * r;
                a[(p, p)] = C64::new(app * c * c + aqq * s * s + shift, 0.0);
                a[(q, q)] = C64::new(app * s * s + aqq * c * c - shift, 0.0);
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = cs * vkp + sw_conj * vkq;
                    v[(k, q)] = cs * vkq - sw * vkp;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut eigenvectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.column_mut(dst).copy_from(&v.column(src));
    }
    Ok(HermitianEig {
        eigenvalues,
        eigenvectors,
    })
}

fn singular_values_desc(m: &CMatrix) -> Vec<f64> {
    let svd = m.clone().svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().cloned().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Full singular spectrum, descending.
pub fn svd_spectrum(m: &CMatrix) -> Result<SvdSpectrum> {
    check_nonempty(m)?;
    check_finite(m)?;
    Ok(SvdSpectrum {
        singular_values: singular_values_desc(m),
    })
}

/// Number of singular values above the policy cutoff.
pub fn numeric_rank(m: &CMatrix, policy: &TolerancePolicy) -> Result<usize> {
    Ok(svd_spectrum(m)?.rank_at(policy))
}

/// Orthonormal basis of `{eta : eta^t M = 0}` (plain transpose, not the
/// conjugate transpose), with dimension `rows - numeric_rank`.
pub fn left_nullspace(m: &CMatrix, policy: &TolerancePolicy) -> Result<Vec<CVector>> {
    check_nonempty(m)?;
    check_finite(m)?;
    let rows = m.nrows();
    let cols = m.ncols();
    // eta^t M = 0 <=> M^t eta = 0. A thin SVD of a wide matrix omits the
    // right singular vectors spanning the kernel, so pad M^t with zero rows
    // up to square; the kernel and spectrum are unchanged.
    let mt = m.transpose();
    let padded = if cols < rows {
        let mut p = CMatrix::zeros(rows, rows);
        p.view_mut((0, 0), (cols, rows)).copy_from(&mt);
        p
    } else {
        mt
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^t");
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
    let mut basis = Vec::new();
    for &i in &order {
        if svd.singular_values[i] <= cut {
            basis.push(v_t.row(i).adjoint());
        }
    }
    Ok(basis)
}

/// LU-based determinant of a square matrix.
pub fn determinant(m: &CMatrix) -> Result<C64> {
    check_nonempty(m)?;
    check_finite(m)?;
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.clone().determinant())
}

/// Deterministic substream derivation: one master seed, one stream per index.
/// Serial and parallel consumers of the same (seed, index) see identical bits.
pub fn substream(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// One standard normal draw from the given stream.
pub fn gaussian_sample(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    gaussian_sample(rng)
}

/// GUE-style sample: (G + G^dag)/2 with iid complex Gaussian entries of G.
/// Hermiticity is exact by construction.
pub fn random_hermitian_with(rng: &mut impl Rng, dim: usize) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| C64::new(gaussian(rng), gaussian(rng)));
    let mut h = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        h[(i, i)] = C64::new((g[(i, i)] + g[(i, i)].conj()).re / 2.0, 0.0);
        for j in (i + 1)..dim {
            let v = (g[(i, j)] + g[(j, i)].conj()) / C64::new(2.0, 0.0);
            h[(i, j)] = v;
            h[(j, i)] = v.conj();
        }
    }
    h
}

pub fn random_hermitian(dim: usize, seed: u64) -> CMatrix {
    random_hermitian_with(&mut ChaCha8Rng::seed_from_u64(seed), dim)
}

/// Normalized complex Gaussian vector.
pub fn random_state_with(rng: &mut impl Rng, dim: usize) -> CVector {
    let v = CVector::from_fn(dim, |_, _| C64::new(gaussian(rng), gaussian(rng)));
    let norm = v.norm();
    v / C64::new(norm, 0.0)
}

pub fn random_state(dim: usize, seed: u64) -> CVector {
    random_state_with(&mut ChaCha8Rng::seed_from_u64(seed), dim)
}

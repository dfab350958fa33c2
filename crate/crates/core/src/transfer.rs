//! Fejér-mollified transfer operator on the truncated Fourier basis, its
//! leading eigenvector (the SRB density estimate), and resolvent solves on
//! the mean-zero subspace.
//!
//! The matrix acts on coefficient vectors: entry `(k, j)` is the coefficient
//! at output mode `k` of the pushed-forward mode `e_j`,
//!
//! ```text
//! M[k][j] = K̂_n(k) · ∫ e_j · (e_{−k} ∘ T)
//! ```
//!
//! which is the duality `∫ (L f)·g = ∫ f·(g∘T)` followed by the Fejér
//! multiplier of the output mode.

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, DenseMatrix, LuFactors};
use crate::maps::TorusMap;
use crate::par;
use crate::spectral::{fejer_weight, Fft2, ModeSet, SpectralConfig, SpectralField};

pub const POWER_TOL: f64 = 1e-13;
pub const POWER_MAX_ITER: usize = 5000;
pub const PIVOT_FLOOR: f64 = 1e-14;
pub const MEAN_ZERO_TOL: f64 = 1e-10;
const DEGENERATE_TOL: f64 = 1e-8;
const START_SEED: u64 = 0x5eed_1e55;

const MATRIX_MAGIC: &[u8; 8] = b"ANRSPMAT";

#[derive(Debug, Clone)]
pub struct TransferMatrix {
    pub entries: DenseMatrix,
    pub config: SpectralConfig,
    pub map_label: String,
}

impl TransferMatrix {
    pub fn order(&self) -> usize {
        self.config.n
    }

    pub fn modes(&self) -> ModeSet {
        self.config.modes()
    }

    /// Entry at output mode `k`, input mode `j`.
    pub fn entry(&self, k: crate::spectral::ModeIndex, j: crate::spectral::ModeIndex) -> Complex64 {
        let m = self.modes();
        self.entries[(m.index_of(k).expect("k in F_n"), m.index_of(j).expect("j in F_n"))]
    }

    pub fn apply(&self, f: &SpectralField) -> SpectralField {
        assert_eq!(f.order(), self.order());
        SpectralField::from_coeffs(self.order(), self.entries.matvec(&f.coeffs))
    }

    /// Little-endian dump: `ANRSPMAT`, `u32 n`, `u32 0`, then `n⁴` complex
    /// doubles (re, im) in column-major canonical mode order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.order();
        w.write_all(MATRIX_MAGIC)?;
        w.write_all(&(n as u32).to_le_bytes())?;
        w.write_all(&0u32.to_le_bytes())?;
        let dim = n * n;
        for j in 0..dim {
            for i in 0..dim {
                let c = self.entries[(i, j)];
                w.write_all(&c.re.to_le_bytes())?;
                w.write_all(&c.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads the matrix dump; returns `(n, entries)`.
    pub fn read_binary<R: Read>(mut r: R) -> Result<(usize, DenseMatrix)> {
        let mut head = [0u8; 16];
        r.read_exact(&mut head)?;
        if &head[..8] != MATRIX_MAGIC {
            return Err(Error::format("matrix dump", "bad magic"));
        }
        let n = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
        let dim = n * n;
        let mut m = DenseMatrix::zeros(dim, dim);
        let mut buf = [0u8; 16];
        for j in 0..dim {
            for i in 0..dim {
                r.read_exact(&mut buf)?;
                m[(i, j)] = Complex64::new(
                    f64::from_le_bytes(buf[..8].try_into().unwrap()),
                    f64::from_le_bytes(buf[8..].try_into().unwrap()),
                );
            }
        }
        Ok((n, m))
    }
}

/// Builds `M` by sampling `e_{−k}∘T` on the fine grid for every output mode
/// `k` and reading its DFT at the frequencies `−j`.
pub fn build_transfer_matrix(map: &dyn TorusMap, config: &SpectralConfig) -> Result<TransferMatrix> {
    config.validate()?;
    let n = config.n;
    let n_fine = config.n_fine;
    let modes = config.modes();
    let dim = modes.len();
    let images = map.lifted_on_grid(n_fine);
    let fft = Fft2::new(n_fine);
    let scale = 1.0 / (n_fine * n_fine) as f64;
    let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
    par::for_each_chunk_mut(&mut data, dim, |row_idx, row| {
        let k = modes.mode(row_idx);
        let w = fejer_weight(k, n);
        if w == 0.0 {
            return;
        }
        let mut samples: Vec<Complex64> = images
            .iter()
            .map(|y| Complex64::from_polar(1.0, -2.0 * PI * k.dot(*y)))
            .collect();
        fft.forward(&mut samples);
        for (slot, j) in row.iter_mut().zip(modes.iter()) {
            *slot = samples[fft.bin(-j.k1) * n_fine + fft.bin(-j.k2)] * (w * scale);
        }
    });
    Ok(TransferMatrix {
        entries: DenseMatrix::from_rows(dim, dim, data),
        config: *config,
        map_label: map.label(),
    })
}

#[derive(Debug, Clone)]
pub struct SrbEstimate {
    /// Phase-fixed, mass-normalized and symmetrized density coefficients.
    pub density: SpectralField,
    pub eigenvalue: Complex64,
    pub iterations: usize,
    /// Hermitian defect of the eigenvector before symmetrization.
    pub hermitian_defect: f64,
}

impl SrbEstimate {
    /// Density values on the `N×N` fine grid (real parts).
    pub fn grid_values(&self, n_fine: usize) -> Vec<f64> {
        crate::spectral::synthesize(&self.density, n_fine).iter().map(|c| c.re).collect()
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Power iteration with per-step normalization. The converged vector is
/// scaled so that its `(0,0)` coefficient is exactly 1, which fixes both the
/// phase and the total mass.
pub fn leading_eigenpair(matrix: &TransferMatrix) -> Result<SrbEstimate> {
    let modes = matrix.modes();
    let dim = modes.len();
    let zero = modes.zero_index();
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut v: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    v[zero] = Complex64::new(1.0, 0.0);
    let vn = norm(&v);
    v.iter_mut().for_each(|c| *c /= vn);

    let mut lambda_prev: Option<Complex64> = None;
    let mut last_change = f64::INFINITY;
    for it in 1..=POWER_MAX_ITER {
        let w = matrix.entries.matvec(&v);
        let lambda = dot(&v.iter().map(|c| c.conj()).collect::<Vec<_>>(), &w);
        if it == 1 {
            let resid: f64 = w.iter().zip(&v).map(|(a, b)| (a - lambda * b).norm_sqr()).sum::<f64>().sqrt();
            if resid < DEGENERATE_TOL {
                return Err(Error::NonUniqueLeading);
            }
        }
        let wn = norm(&w);
        if !(wn > 0.0) {
            return Err(Error::NoConvergence {
                iterations: it,
                last_change,
            });
        }
        v = w.into_iter().map(|c| c / wn).collect();
        if let Some(prev) = lambda_prev {
            last_change = (lambda - prev).norm();
            if last_change < POWER_TOL {
                return finish_eigenpair(matrix, v, lambda, it);
            }
        }
        lambda_prev = Some(lambda);
    }
    Err(Error::NoConvergence {
        iterations: POWER_MAX_ITER,
        last_change,
    })
}

fn finish_eigenpair(matrix: &TransferMatrix, v: Vec<Complex64>, lambda: Complex64, iterations: usize) -> Result<SrbEstimate> {
    let n = matrix.order();
    let zero = matrix.modes().zero_index();
    let mass = v[zero];
    if mass.norm() < 1e-12 {
        // the leading eigenvector of a transfer operator always carries mass
        return Err(Error::NoConvergence {
            iterations,
            last_change: f64::NAN,
        });
    }
    let mut density = SpectralField::from_coeffs(n, v.into_iter().map(|c| c / mass).collect());
    let hermitian_defect = density.hermitian_defect();
    density.symmetrize_real();
    density.coeffs[zero] = Complex64::new(1.0, 0.0);
    Ok(SrbEstimate {
        density,
        eigenvalue: lambda,
        iterations,
        hermitian_defect,
    })
}

/// Factorization of `I − M` restricted to the mean-zero modes.
#[derive(Debug, Clone)]
pub struct ResolventSolver {
    n: usize,
    lu: LuFactors,
}

pub fn build_resolvent(matrix: &TransferMatrix) -> Result<ResolventSolver> {
    let modes = matrix.modes();
    let dim = modes.len();
    let zero = modes.zero_index();
    let keep: Vec<usize> = (0..dim).filter(|&i| i != zero).collect();
    let m = keep.len();
    let mut a = DenseMatrix::zeros(m, m);
    for (ri, &i) in keep.iter().enumerate() {
        let row = matrix.entries.row(i);
        for (ci, &j) in keep.iter().enumerate() {
            let delta = if i == j { 1.0 } else { 0.0 };
            a[(ri, ci)] = Complex64::new(delta, 0.0) - row[j];
        }
    }
    Ok(ResolventSolver {
        n: matrix.order(),
        lu: LuFactors::factor(a, PIVOT_FLOOR)?,
    })
}

impl ResolventSolver {
    pub fn order(&self) -> usize {
        self.n
    }

    /// Solves `(I − M)x = b` on the mean-zero subspace.
    pub fn apply(&self, b: &SpectralField) -> Result<SpectralField> {
        if b.order() != self.n {
            return Err(Error::OrderMismatch {
                expected: self.n,
                found: b.order(),
            });
        }
        let zero = b.modes().zero_index();
        let mean = b.coeffs[zero].norm();
        if mean > MEAN_ZERO_TOL {
            return Err(Error::NotMeanZero(mean));
        }
        let rhs: Vec<Complex64> = b
            .coeffs
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != zero)
            .map(|(_, c)| *c)
            .collect();
        let mut x = self.lu.solve(&rhs);
        x.insert(zero, Complex64::new(0.0, 0.0));
        Ok(SpectralField::from_coeffs(self.n, x))
    }
}

pub fn apply_resolvent(solver: &ResolventSolver, b: &SpectralField) -> Result<SpectralField> {
    solver.apply(b)
}

//! Fourier bookkeeping on the 2-torus: the mode set `F_n`, Fejér and
//! Sobolev weights, the fine sampling grid, and the normalized 2-D DFT that
//! maps grid samples to coefficients `f̂(k) = ∫ f·conj(e_k)`.
//!
//! Coefficient vectors are always stored in the canonical mode order: modes
//! `(k1, k2)` with components in `{−n/2+1, …, n/2}`, row-major by `k1` then
//! `k2`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::maps::{Jacobian2, TorusPoint};

/// Order `m` of the Sobolev space `H^m` used for the feasible set.
pub const SOBOLEV_ORDER: u32 = 7;

pub const DEFAULT_ORDER: usize = 32;
pub const DEFAULT_GAMMA: f64 = 0.02;

/// Discretization parameters: coarse order `n`, fine grid size `n_fine`
/// (the `N` of an `N×N` grid) and Sobolev scale `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConfig {
    pub n: usize,
    pub n_fine: usize,
    pub gamma: f64,
}

impl SpectralConfig {
    pub fn new(n: usize, n_fine: usize, gamma: f64) -> Result<Self> {
        let cfg = Self { n, n_fine, gamma };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `N = 4n`.
    pub fn with_order(n: usize, gamma: f64) -> Result<Self> {
        Self::new(n, 4 * n, gamma)
    }

    pub fn validate(&self) -> Result<()> {
        check_order(self.n)?;
        if self.n_fine < 4 * self.n {
            return Err(Error::GridTooCoarse {
                order: self.n,
                fine: self.n_fine,
            });
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config(None, "gamma", format!("gamma = {} must lie in (0, 1]", self.gamma)));
        }
        Ok(())
    }

    pub fn sobolev_order(&self) -> u32 {
        SOBOLEV_ORDER
    }

    pub fn modes(&self) -> ModeSet {
        ModeSet::new(self.n)
    }
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            n: DEFAULT_ORDER,
            n_fine: 4 * DEFAULT_ORDER,
            gamma: DEFAULT_GAMMA,
        }
    }
}

pub fn check_order(n: usize) -> Result<()> {
    if n < 4 || n % 2 != 0 {
        return Err(Error::BadOrder(n));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeIndex {
    pub k1: i64,
    pub k2: i64,
}

impl ModeIndex {
    pub const ZERO: ModeIndex = ModeIndex { k1: 0, k2: 0 };

    pub const fn new(k1: i64, k2: i64) -> Self {
        Self { k1, k2 }
    }

    pub fn neg(self) -> Self {
        Self::new(-self.k1, -self.k2)
    }

    pub fn norm_sq(self) -> i64 {
        self.k1 * self.k1 + self.k2 * self.k2
    }

    pub fn inf_norm(self) -> i64 {
        self.k1.abs().max(self.k2.abs())
    }

    pub fn dot(self, x: [f64; 2]) -> f64 {
        self.k1 as f64 * x[0] + self.k2 as f64 * x[1]
    }
}

/// The index set `F_n = {−n/2+1, …, n/2}²` with its canonical enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeSet {
    n: usize,
}

impl ModeSet {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn lo(&self) -> i64 {
        -(self.n as i64) / 2 + 1
    }

    fn hi(&self) -> i64 {
        self.n as i64 / 2
    }

    pub fn contains(&self, k: ModeIndex) -> bool {
        let (lo, hi) = (self.lo(), self.hi());
        (lo..=hi).contains(&k.k1) && (lo..=hi).contains(&k.k2)
    }

    pub fn index_of(&self, k: ModeIndex) -> Option<usize> {
        if !self.contains(k) {
            return None;
        }
        let lo = self.lo();
        Some((k.k1 - lo) as usize * self.n + (k.k2 - lo) as usize)
    }

    pub fn mode(&self, idx: usize) -> ModeIndex {
        let lo = self.lo();
        ModeIndex::new(lo + (idx / self.n) as i64, lo + (idx % self.n) as i64)
    }

    pub fn zero_index(&self) -> usize {
        self.index_of(ModeIndex::ZERO).expect("F_n always contains (0,0)")
    }

    /// Whether `−k` is also in `F_n`; false exactly on the rows `k1 = n/2`
    /// or `k2 = n/2`.
    pub fn is_paired(&self, k: ModeIndex) -> bool {
        self.contains(k.neg())
    }

    pub fn iter(&self) -> impl Iterator<Item = ModeIndex> + '_ {
        (0..self.len()).map(move |i| self.mode(i))
    }
}

pub fn mode_set(n: usize) -> Result<Vec<ModeIndex>> {
    check_order(n)?;
    Ok(ModeSet::new(n).iter().collect())
}

/// Fourier multiplier of the 2-D Fejér kernel of order `n`:
/// `∏ max(0, 1 − |k_i|/(n+1))`.
pub fn fejer_weight(k: ModeIndex, n: usize) -> f64 {
    let f = |v: i64| (1.0 - v.abs() as f64 / (n as f64 + 1.0)).max(0.0);
    f(k.k1) * f(k.k2)
}

/// `‖e_k‖²` in the γ-scaled `H^7` norm: `Σ_{m=0}^{7} ((2πγ)²|k|²)^m`.
pub fn sobolev_weight(k: ModeIndex, gamma: f64) -> f64 {
    let r = (2.0 * PI * gamma).powi(2) * k.norm_sq() as f64;
    // Horner form of the geometric sum
    (0..=SOBOLEV_ORDER).fold(0.0, |acc, _| acc * r + 1.0)
}

pub fn fine_grid(n_fine: usize) -> Vec<TorusPoint> {
    fine_grid_coords(n_fine).map(|x| TorusPoint { x1: x[0], x2: x[1] }).collect()
}

/// Points `(i/N, j/N)`, row-major in `i`.
pub fn fine_grid_coords(n_fine: usize) -> impl Iterator<Item = [f64; 2]> {
    let h = 1.0 / n_fine as f64;
    (0..n_fine * n_fine).map(move |idx| [(idx / n_fine) as f64 * h, (idx % n_fine) as f64 * h])
}

/// Fourier coefficients of a scalar field, one per mode of `F_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    n: usize,
    pub coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            coeffs: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn from_coeffs(n: usize, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), n * n, "coefficient vector must have n² entries");
        Self { n, coeffs }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(ModeIndex) -> Complex64) -> Self {
        let modes = ModeSet::new(n);
        Self {
            n,
            coeffs: modes.iter().map(&mut f).collect(),
        }
    }

    pub fn single_mode(n: usize, k: ModeIndex, value: Complex64) -> Self {
        let mut f = Self::zeros(n);
        f.set(k, value);
        f
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn modes(&self) -> ModeSet {
        ModeSet::new(self.n)
    }

    /// Coefficient at `k`; zero for modes outside `F_n`.
    pub fn get(&self, k: ModeIndex) -> Complex64 {
        self.modes()
            .index_of(k)
            .map(|i| self.coeffs[i])
            .unwrap_or_default()
    }

    pub fn set(&mut self, k: ModeIndex, value: Complex64) {
        let idx = self.modes().index_of(k).expect("mode outside F_n");
        self.coeffs[idx] = value;
    }

    pub fn mean(&self) -> Complex64 {
        self.coeffs[self.modes().zero_index()]
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self {
            n: self.n,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &SpectralField, s: Complex64) {
        assert_eq!(self.n, other.n);
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * s;
        }
    }

    /// `Σ_k f̂(k)·conj(ĝ(k))`, the `L²` inner product of band-limited fields.
    pub fn inner(&self, other: &SpectralField) -> Complex64 {
        assert_eq!(self.n, other.n);
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b.conj()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &SpectralField) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `max |f̂(k) − conj(f̂(−k))|` over paired modes.
    pub fn hermitian_defect(&self) -> f64 {
        let modes = self.modes();
        modes
            .iter()
            .zip(&self.coeffs)
            .filter_map(|(k, c)| modes.index_of(k.neg()).map(|j| (c - self.coeffs[j].conj()).norm()))
            .fold(0.0, f64::max)
    }

    /// Projects onto real-valued fields: averages each paired coefficient with
    /// the conjugate of its partner and zeroes the unpaired Nyquist modes.
    pub fn symmetrize_real(&mut self) {
        let modes = self.modes();
        let old = self.coeffs.clone();
        for (i, k) in modes.iter().enumerate() {
            self.coeffs[i] = match modes.index_of(k.neg()) {
                Some(j) => (old[i] + old[j].conj()) * 0.5,
                None => Complex64::new(0.0, 0.0),
            };
        }
    }

    /// Coefficients of `∂f/∂x1` and `∂f/∂x2`.
    pub fn gradient_fields(&self) -> [SpectralField; 2] {
        let modes = self.modes();
        let mut d = [Self::zeros(self.n), Self::zeros(self.n)];
        for (i, k) in modes.iter().enumerate() {
            let c = self.coeffs[i] * Complex64::new(0.0, 2.0 * PI);
            d[0].coeffs[i] = c * k.k1 as f64;
            d[1].coeffs[i] = c * k.k2 as f64;
        }
        d
    }

    /// Direct evaluation of `Σ_k f̂(k) e^{2πi k·x}`.
    pub fn evaluate(&self, x: [f64; 2]) -> Complex64 {
        self.modes()
            .iter()
            .zip(&self.coeffs)
            .filter(|(_, c)| c.re != 0.0 || c.im != 0.0)
            .map(|(k, c)| c * Complex64::from_polar(1.0, 2.0 * PI * k.dot(x)))
            .sum()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "k1,k2,re,im")?;
        for (k, c) in self.modes().iter().zip(&self.coeffs) {
            writeln!(w, "{},{},{},{}", k.k1, k.k2, c.re, c.im)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut rows = Vec::new();
        let mut lines = r.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != "k1,k2,re,im" {
            return Err(Error::format("spectral field CSV", format!("unexpected header {header:?}")));
        }
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 4 {
                return Err(Error::format("spectral field CSV", format!("line {}: expected 4 fields", lineno + 2)));
            }
            let bad = |e: String| Error::format("spectral field CSV", format!("line {}: {e}", lineno + 2));
            let k1: i64 = parts[0].trim().parse().map_err(|e| bad(format!("{e}")))?;
            let k2: i64 = parts[1].trim().parse().map_err(|e| bad(format!("{e}")))?;
            let re: f64 = parts[2].trim().parse().map_err(|e| bad(format!("{e}")))?;
            let im: f64 = parts[3].trim().parse().map_err(|e| bad(format!("{e}")))?;
            rows.push((ModeIndex::new(k1, k2), Complex64::new(re, im)));
        }
        let n = (rows.len() as f64).sqrt().round() as usize;
        if n * n != rows.len() {
            return Err(Error::format("spectral field CSV", format!("{} rows is not a square count", rows.len())));
        }
        check_order(n)?;
        let modes = ModeSet::new(n);
        for (i, (k, _)) in rows.iter().enumerate() {
            if modes.mode(i) != *k {
                return Err(Error::format("spectral field CSV", format!("row {} has mode ({},{}) out of canonical order", i + 2, k.k1, k.k2)));
            }
        }
        Ok(Self {
            n,
            coeffs: rows.into_iter().map(|(_, c)| c).collect(),
        })
    }
}

/// A vector field `(Σ a1(k) e_k, Σ a2(k) e_k)` on the torus.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub a1: SpectralField,
    pub a2: SpectralField,
}

impl VectorField {
    pub fn zeros(n: usize) -> Self {
        Self {
            a1: SpectralField::zeros(n),
            a2: SpectralField::zeros(n),
        }
    }

    pub fn order(&self) -> usize {
        self.a1.order()
    }

    pub fn component(&self, c: usize) -> &SpectralField {
        match c {
            1 => &self.a1,
            2 => &self.a2,
            _ => panic!("component must be 1 or 2"),
        }
    }

    pub fn component_mut(&mut self, c: usize) -> &mut SpectralField {
        match c {
            1 => &mut self.a1,
            2 => &mut self.a2,
            _ => panic!("component must be 1 or 2"),
        }
    }

    pub fn negated(&self) -> Self {
        let m = Complex64::new(-1.0, 0.0);
        Self {
            a1: self.a1.scaled(m),
            a2: self.a2.scaled(m),
        }
    }

    /// `Σ_c Σ_k |a_c(k)|² w_γ(k)`.
    pub fn sobolev_norm_sq(&self, gamma: f64) -> f64 {
        let modes = self.a1.modes();
        modes
            .iter()
            .enumerate()
            .map(|(i, k)| (self.a1.coeffs[i].norm_sqr() + self.a2.coeffs[i].norm_sqr()) * sobolev_weight(k, gamma))
            .sum()
    }

    /// Real value at `x`; the imaginary residue is dropped.
    pub fn evaluate(&self, x: [f64; 2]) -> [f64; 2] {
        [self.a1.evaluate(x).re, self.a2.evaluate(x).re]
    }

    /// `D_xṪ`, row `c` holding the gradient of component `c`.
    pub fn jacobian(&self, x: [f64; 2]) -> Jacobian2 {
        let g1 = self.a1.gradient_fields();
        let g2 = self.a2.gradient_fields();
        Jacobian2([
            [g1[0].evaluate(x).re, g1[1].evaluate(x).re],
            [g2[0].evaluate(x).re, g2[1].evaluate(x).re],
        ])
    }
}

/// Planned forward and inverse transforms for `N×N` grids. Cheap to share
/// between threads; every call brings its own scratch space.
#[derive(Clone)]
pub struct Fft2 {
    n_fine: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("n_fine", &self.n_fine).finish()
    }
}

impl Fft2 {
    pub fn new(n_fine: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n_fine,
            forward: planner.plan_fft_forward(n_fine),
            inverse: planner.plan_fft_inverse(n_fine),
        }
    }

    pub fn size(&self) -> usize {
        self.n_fine
    }

    fn transform(&self, fft: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        let n = self.n_fine;
        assert_eq!(data.len(), n * n, "grid must hold N² samples");
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(data, &mut scratch);
        let mut t = vec![Complex64::new(0.0, 0.0); n * n];
        transpose(data, &mut t, n);
        fft.process_with_scratch(&mut t, &mut scratch);
        transpose(&t, data, n);
    }

    /// Unnormalized `Σ_x g(x) e^{−2πi k·x}` over the grid, in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(&self.forward, data)
    }

    /// Unnormalized `Σ_k ĝ(k) e^{+2πi k·x}`, in place.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(&self.inverse, data)
    }

    /// DFT bin that holds signed frequency `k`.
    #[inline]
    pub fn bin(&self, k: i64) -> usize {
        k.rem_euclid(self.n_fine as i64) as usize
    }

    /// Forward transform of `samples` (destroyed) restricted to `F_n`,
    /// normalized by `1/N²`.
    pub fn analyze_in_place(&self, samples: &mut [Complex64], n: usize) -> Result<SpectralField> {
        if self.n_fine < 4 * n {
            return Err(Error::GridTooCoarse {
                order: n,
                fine: self.n_fine,
            });
        }
        self.forward(samples);
        let scale = 1.0 / (self.n_fine * self.n_fine) as f64;
        Ok(SpectralField::from_fn(n, |k| samples[self.bin(k.k1) * self.n_fine + self.bin(k.k2)] * scale))
    }

    pub fn synthesize(&self, field: &SpectralField) -> Vec<Complex64> {
        let n_fine = self.n_fine;
        let mut grid = vec![Complex64::new(0.0, 0.0); n_fine * n_fine];
        for (k, c) in field.modes().iter().zip(&field.coeffs) {
            grid[self.bin(k.k1) * n_fine + self.bin(k.k2)] += c;
        }
        self.inverse(&mut grid);
        grid
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    const BLOCK: usize = 16;
    for ib in (0..n).step_by(BLOCK) {
        for jb in (0..n).step_by(BLOCK) {
            for i in ib..(ib + BLOCK).min(n) {
                for j in jb..(jb + BLOCK).min(n) {
                    dst[j * n + i] = src[i * n + j];
                }
            }
        }
    }
}

fn grid_side(len: usize) -> Result<usize> {
    let side = (len as f64).sqrt().round() as usize;
    if side * side != len || side == 0 {
        return Err(Error::format("sample grid", format!("{len} samples is not an N×N grid")));
    }
    Ok(side)
}

/// Fourier coefficients on `F_n` of samples taken on the `N×N` fine grid.
pub fn analyze(samples: &[Complex64], n: usize) -> Result<SpectralField> {
    let n_fine = grid_side(samples.len())?;
    let mut buf = samples.to_vec();
    Fft2::new(n_fine).analyze_in_place(&mut buf, n)
}

pub fn analyze_real(samples: &[f64], n: usize) -> Result<SpectralField> {
    let buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    analyze(&buf, n)
}

/// Values of the trigonometric polynomial on the `N×N` fine grid.
pub fn synthesize(field: &SpectralField, n_fine: usize) -> Vec<Complex64> {
    Fft2::new(n_fine).synthesize(field)
}

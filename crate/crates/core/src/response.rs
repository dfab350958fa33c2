//! Optimal linear response: the divergence terms of the derivative operator,
//! the per-mode response integrals, and the Sobolev-unit-norm field that
//! maximizes the response of an observable's expectation.
//!
//! For an elementary field `V` the response of `∫c·f` is
//!
//! ```text
//! J(V) = −∫ c · (I − M)⁻¹ M ∇·(f₀ (DT₀)⁻¹ V)
//! ```
//!
//! and the stored "raw numerator" of a mode is `conj(J(V))`, i.e.
//! `−Σ_{k≠0} ĉ(k)·conj(r̂(k))` with `r = (I − M)⁻¹ M ∇·(f₀ (DT₀)⁻¹ V)`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::maps::{div_inverse_jacobian_lifted, inverse_jacobian, TorusMap, TorusMapSpec, TorusPoint};
use crate::par;
use crate::spectral::{
    analyze_real, fine_grid_coords, sobolev_weight, Fft2, ModeIndex, SpectralConfig, SpectralField, VectorField,
};
use crate::transfer::{ResolventSolver, SrbEstimate, TransferMatrix};

/// Magnitude below which every raw numerator counts as zero.
pub const DEGENERATE_FLOOR: f64 = 1e-14;
/// Allowed imaginary residue of `J` for a real field.
pub const IMAGINARY_TOL: f64 = 1e-8;

pub const GAUSSIAN_WIDTH: f64 = 0.1;
/// Centres of the two Gaussians of the built-in `gaussian_pair` observable.
pub const GAUSSIAN_CENTRES: [[f64; 2]; 2] = [[0.1796, 0.4023], [0.7877, 0.5852]];

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveKind {
    /// `cos 2πx1 + cos 2πx2`.
    CosineSum,
    /// Sum of two periodized Gaussians `exp(−‖x − p‖²/σ²)`.
    GaussianPair { p1: TorusPoint, p2: TorusPoint, sigma: f64 },
    /// Samples `x1,x2,value` on the fine grid.
    GridFile { path: PathBuf },
    /// Constant observable (degenerate; useful as a check).
    Constant { value: f64 },
}

/// A real observable `c` and its Fourier coefficients on `F_n`.
///
/// The coefficients are Hermitian-symmetrized with the unpaired Nyquist modes
/// zeroed, so pairing against real densities is exact.
#[derive(Debug, Clone)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    pub coeffs: SpectralField,
}

fn periodic_gaussian(x: [f64; 2], p: TorusPoint, sigma: f64) -> f64 {
    let mut s = 0.0;
    for m1 in -1..=1 {
        for m2 in -1..=1 {
            let d1 = x[0] - p.x1 - m1 as f64;
            let d2 = x[1] - p.x2 - m2 as f64;
            s += (-(d1 * d1 + d2 * d2) / (sigma * sigma)).exp();
        }
    }
    s
}

impl ObjectiveSpec {
    pub fn new(kind: ObjectiveKind, config: &SpectralConfig) -> Result<Self> {
        config.validate()?;
        let samples: Vec<f64> = match &kind {
            ObjectiveKind::CosineSum => fine_grid_coords(config.n_fine)
                .map(|x| (2.0 * PI * x[0]).cos() + (2.0 * PI * x[1]).cos())
                .collect(),
            ObjectiveKind::GaussianPair { p1, p2, sigma } => {
                if !(*sigma > 0.0) {
                    return Err(Error::config(None, "sigma", "Gaussian width must be positive"));
                }
                fine_grid_coords(config.n_fine)
                    .map(|x| periodic_gaussian(x, *p1, *sigma) + periodic_gaussian(x, *p2, *sigma))
                    .collect()
            }
            ObjectiveKind::GridFile { path } => read_grid_file(path, config.n_fine)?,
            ObjectiveKind::Constant { value } => vec![*value; config.n_fine * config.n_fine],
        };
        Self::from_samples(kind, &samples, config.n)
    }

    pub fn from_samples(kind: ObjectiveKind, samples: &[f64], n: usize) -> Result<Self> {
        let mut coeffs = analyze_real(samples, n)?;
        coeffs.symmetrize_real();
        Ok(Self { kind, coeffs })
    }

    pub fn cosine_sum(config: &SpectralConfig) -> Result<Self> {
        Self::new(ObjectiveKind::CosineSum, config)
    }

    pub fn gaussian_pair(config: &SpectralConfig) -> Result<Self> {
        let [p1, p2] = GAUSSIAN_CENTRES;
        Self::new(
            ObjectiveKind::GaussianPair {
                p1: TorusPoint::new(p1[0], p1[1]),
                p2: TorusPoint::new(p2[0], p2[1]),
                sigma: GAUSSIAN_WIDTH,
            },
            config,
        )
    }

    pub fn label(&self) -> String {
        match &self.kind {
            ObjectiveKind::CosineSum => "cosine_sum".into(),
            ObjectiveKind::GaussianPair { p1, p2, sigma } => {
                format!("gaussian_pair(({},{}),({},{}),{})", p1.x1, p1.x2, p2.x1, p2.x2, sigma)
            }
            ObjectiveKind::GridFile { path } => format!("grid_file({})", path.display()),
            ObjectiveKind::Constant { value } => format!("constant({value})"),
        }
    }

    pub fn order(&self) -> usize {
        self.coeffs.order()
    }

    /// Same observable multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            kind: self.kind.clone(),
            coeffs: self.coeffs.scaled(Complex64::new(s, 0.0)),
        }
    }

    /// `∫ c·f` for a real density `f` given by its coefficients.
    pub fn expectation(&self, density: &SpectralField) -> f64 {
        self.coeffs.inner(density).re
    }

    /// `−Σ_{k≠0} ĉ(k)·conj(r̂(k))`.
    fn pair_mean_zero(&self, r: &SpectralField) -> Complex64 {
        let zero = r.modes().zero_index();
        -self
            .coeffs
            .coeffs
            .iter()
            .zip(&r.coeffs)
            .enumerate()
            .filter(|&(i, _)| i != zero)
            .map(|(_, (c, x))| c * x.conj())
            .sum::<Complex64>()
    }
}

/// Reads `x1,x2,value` samples laid out on the `N×N` grid in row-major order.
pub fn read_grid_file(path: &Path, n_fine: usize) -> Result<Vec<f64>> {
    let file = std::fs::File::open(path)?;
    read_grid_samples(std::io::BufReader::new(file), n_fine, &path.display().to_string())
}

pub fn read_grid_samples<R: BufRead>(r: R, n_fine: usize, what: &str) -> Result<Vec<f64>> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != "x1,x2,value" {
        return Err(Error::format(what, format!("unexpected header {header:?}")));
    }
    let h = 1.0 / n_fine as f64;
    let mut values = Vec::with_capacity(n_fine * n_fine);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: String| Error::format(what, format!("line {}: {m}", i + 2));
        let parts: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| bad(e.to_string())))
            .collect::<Result<_>>()?;
        if parts.len() != 3 {
            return Err(bad("expected 3 fields".into()));
        }
        let idx = values.len();
        let expect = [(idx / n_fine) as f64 * h, (idx % n_fine) as f64 * h];
        if (parts[0] - expect[0]).abs() > 1e-9 || (parts[1] - expect[1]).abs() > 1e-9 {
            return Err(bad(format!("point ({}, {}) is not grid point ({}, {})", parts[0], parts[1], expect[0], expect[1])));
        }
        values.push(parts[2]);
    }
    if values.len() != n_fine * n_fine {
        return Err(Error::format(what, format!("{} samples, expected {}", values.len(), n_fine * n_fine)));
    }
    Ok(values)
}

/// Grid data shared by every divergence-term evaluation: for component `c`,
/// `∇·(f₀ B (e_k δ_c)) = e_k · (P_c + 2πi Σ_i k_i Q_{c,i})` with
/// `B = (DT₀)⁻¹`, `P_c = Σ_i ∂_i f₀ B[i][c] + f₀ Σ_i ∂_i B[i][c]` and
/// `Q_{c,i} = f₀ B[i][c]`.
#[derive(Debug, Clone)]
pub struct DivergenceGrids {
    n: usize,
    fft: Fft2,
    p: [Vec<f64>; 2],
    q: [[Vec<f64>; 2]; 2],
}

impl DivergenceGrids {
    pub fn new(f0: &SrbEstimate, map: &TorusMapSpec, config: &SpectralConfig) -> Result<Self> {
        config.validate()?;
        let n_fine = config.n_fine;
        let fft = Fft2::new(n_fine);
        let density: Vec<f64> = fft.synthesize(&f0.density).iter().map(|c| c.re).collect();
        let [g1, g2] = f0.density.gradient_fields();
        let d1: Vec<f64> = fft.synthesize(&g1).iter().map(|c| c.re).collect();
        let d2: Vec<f64> = fft.synthesize(&g2).iter().map(|c| c.re).collect();
        let points: Vec<[f64; 2]> = fine_grid_coords(n_fine).collect();
        let local = par::try_map_range(points.len(), |i| {
            let b = inverse_jacobian(&map.jacobian_at(points[i]))?.0;
            let div = div_inverse_jacobian_lifted(map, points[i])?;
            Ok::<_, Error>((b, div))
        })?;
        let len = points.len();
        let mut p = [vec![0.0; len], vec![0.0; len]];
        let mut q = [[vec![0.0; len], vec![0.0; len]], [vec![0.0; len], vec![0.0; len]]];
        for (idx, (b, div)) in local.iter().enumerate() {
            for c in 0..2 {
                p[c][idx] = d1[idx] * b[0][c] + d2[idx] * b[1][c] + density[idx] * div[c];
                for i in 0..2 {
                    q[c][i][idx] = density[idx] * b[i][c];
                }
            }
        }
        Ok(Self { n: config.n, fft, p, q })
    }

    /// Coefficients of `∇·(f₀ B V)` for `V = e_k` in `component` (1 or 2),
    /// with the `(0,0)` coefficient zeroed. The raw `(0,0)` value, which
    /// vanishes up to quadrature error, is returned alongside.
    pub fn term(&self, mode: ModeIndex, component: usize) -> Result<(SpectralField, Complex64)> {
        assert!(component == 1 || component == 2, "component must be 1 or 2");
        let c = component - 1;
        let n_fine = self.fft.size();
        let h = 1.0 / n_fine as f64;
        let row: Vec<Complex64> = (0..n_fine)
            .map(|i| Complex64::from_polar(1.0, 2.0 * PI * mode.k1 as f64 * i as f64 * h))
            .collect();
        let col: Vec<Complex64> = (0..n_fine)
            .map(|j| Complex64::from_polar(1.0, 2.0 * PI * mode.k2 as f64 * j as f64 * h))
            .collect();
        let tk = [2.0 * PI * mode.k1 as f64, 2.0 * PI * mode.k2 as f64];
        let (p, q0, q1) = (&self.p[c], &self.q[c][0], &self.q[c][1]);
        let mut samples: Vec<Complex64> = (0..n_fine * n_fine)
            .map(|idx| {
                let e = row[idx / n_fine] * col[idx % n_fine];
                e * Complex64::new(p[idx], tk[0] * q0[idx] + tk[1] * q1[idx])
            })
            .collect();
        let mut field = self.fft.analyze_in_place(&mut samples, self.n)?;
        let zero = field.modes().zero_index();
        let mean = field.coeffs[zero];
        field.coeffs[zero] = Complex64::new(0.0, 0.0);
        Ok((field, mean))
    }

    /// Coefficients of `∇·(f₀ B V)` for a whole vector field, `(0,0)` zeroed.
    pub fn term_of_field(&self, field: &VectorField) -> Result<SpectralField> {
        let fft = &self.fft;
        let len = fft.size() * fft.size();
        let mut samples = vec![Complex64::new(0.0, 0.0); len];
        for c in 0..2 {
            let v = fft.synthesize(field.component(c + 1));
            let [g1, g2] = field.component(c + 1).gradient_fields();
            let dv = [fft.synthesize(&g1), fft.synthesize(&g2)];
            for idx in 0..len {
                samples[idx] += v[idx] * self.p[c][idx] + (dv[0][idx] * self.q[c][0][idx] + dv[1][idx] * self.q[c][1][idx]);
            }
        }
        let mut out = fft.analyze_in_place(&mut samples, self.n)?;
        let zero = out.modes().zero_index();
        out.coeffs[zero] = Complex64::new(0.0, 0.0);
        Ok(out)
    }
}

/// Divergence term for a single elementary field (builds the shared grids
/// each call; use [`ResponseProblem`] in loops).
pub fn divergence_term(
    f0: &SrbEstimate,
    map: &TorusMapSpec,
    mode: ModeIndex,
    component: usize,
    config: &SpectralConfig,
) -> Result<SpectralField> {
    Ok(DivergenceGrids::new(f0, map, config)?.term(mode, component)?.0)
}

/// Everything needed to evaluate response integrals for one map, density
/// and observable. All members are read-only during the coefficient loop.
pub struct ResponseProblem<'a> {
    pub objective: &'a ObjectiveSpec,
    pub matrix: &'a TransferMatrix,
    pub solver: &'a ResolventSolver,
    pub srb: &'a SrbEstimate,
    pub map: &'a TorusMapSpec,
    pub config: SpectralConfig,
    grids: DivergenceGrids,
}

impl<'a> ResponseProblem<'a> {
    pub fn new(
        objective: &'a ObjectiveSpec,
        matrix: &'a TransferMatrix,
        solver: &'a ResolventSolver,
        srb: &'a SrbEstimate,
        map: &'a TorusMapSpec,
    ) -> Result<Self> {
        let config = matrix.config;
        for found in [objective.order(), solver.order(), srb.density.order()] {
            if found != config.n {
                return Err(Error::OrderMismatch {
                    expected: config.n,
                    found,
                });
            }
        }
        let grids = DivergenceGrids::new(srb, map, &config)?;
        Ok(Self {
            objective,
            matrix,
            solver,
            srb,
            map,
            config,
            grids,
        })
    }

    pub fn divergence_grids(&self) -> &DivergenceGrids {
        &self.grids
    }

    fn respond(&self, g: &SpectralField) -> Result<Complex64> {
        let h = self.matrix.apply(g);
        let r = self.solver.apply(&h)?;
        Ok(self.objective.pair_mean_zero(&r))
    }

    /// Raw numerator of one elementary field, and the quadrature residue of
    /// its divergence term.
    pub fn raw_numerator_with_residue(&self, mode: ModeIndex, component: usize) -> Result<(Complex64, f64)> {
        let (g, mean) = self.grids.term(mode, component)?;
        Ok((self.respond(&g)?, mean.norm()))
    }

    pub fn raw_numerator(&self, mode: ModeIndex, component: usize) -> Result<Complex64> {
        Ok(self.raw_numerator_with_residue(mode, component)?.0)
    }

    /// `J(V)` computed end to end, without the stored numerators.
    pub fn direct_objective(&self, field: &VectorField) -> Result<f64> {
        let g = self.grids.term_of_field(field)?;
        Ok(self.respond(&g)?.conj().re)
    }

    /// Raw numerators for both components over all of `F_n`.
    pub fn raw_numerators(&self) -> Result<RawNumerators> {
        let modes = self.config.modes();
        let len = modes.len();
        let start = Instant::now();
        let results = par::try_map_range(2 * len, |t| self.raw_numerator_with_residue(modes.mode(t % len), t / len + 1))?;
        let elapsed = start.elapsed().as_secs_f64();
        let n = self.config.n;
        let mut values = VectorField::zeros(n);
        let mut residue: f64 = 0.0;
        for (t, (v, r)) in results.into_iter().enumerate() {
            values.component_mut(t / len + 1).coeffs[t % len] = v;
            residue = residue.max(r);
        }
        Ok(RawNumerators {
            values,
            max_divergence_residue: residue,
            seconds_per_coefficient: elapsed / (2 * len) as f64,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RawNumerators {
    pub values: VectorField,
    /// Largest `|(0,0)|` of a divergence term before zeroing.
    pub max_divergence_residue: f64,
    pub seconds_per_coefficient: f64,
}

/// Raw numerator of a single elementary field.
pub fn raw_numerator(
    c: &ObjectiveSpec,
    matrix: &TransferMatrix,
    solver: &ResolventSolver,
    f0: &SrbEstimate,
    map: &TorusMapSpec,
    mode: ModeIndex,
    component: usize,
) -> Result<Complex64> {
    ResponseProblem::new(c, matrix, solver, f0, map)?.raw_numerator(mode, component)
}

/// The maximizing field on the γ-weighted unit sphere.
#[derive(Debug, Clone)]
pub struct OptimalField {
    pub field: VectorField,
    pub nu: f64,
    pub gamma: f64,
    pub raw_numerators: VectorField,
    /// `max |a(k) − conj(a(−k))|` before symmetrization.
    pub hermitian_defect: f64,
    pub max_divergence_residue: f64,
    pub seconds_per_coefficient: f64,
}

impl OptimalField {
    pub fn order(&self) -> usize {
        self.field.order()
    }

    pub fn objective(&self) -> Result<f64> {
        objective_value(&self.field, &self.raw_numerators)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_vector_field_csv(&self.field, w)
    }
}

pub fn optimal_field(
    c: &ObjectiveSpec,
    matrix: &TransferMatrix,
    solver: &ResolventSolver,
    f0: &SrbEstimate,
    map: &TorusMapSpec,
) -> Result<OptimalField> {
    let problem = ResponseProblem::new(c, matrix, solver, f0, map)?;
    optimal_field_from(&problem.raw_numerators()?, problem.config.gamma)
}

/// Normalization step: `a = sym(raw / w_γ) / ν` with `ν` fixing the
/// unit-ball constraint.
pub fn optimal_field_from(raw: &RawNumerators, gamma: f64) -> Result<OptimalField> {
    let numerators = &raw.values;
    let max_numerator = numerators.a1.max_abs().max(numerators.a2.max_abs());
    if !(max_numerator >= DEGENERATE_FLOOR) {
        return Err(Error::DegenerateObjective { max_numerator });
    }
    let n = numerators.order();
    let modes = numerators.a1.modes();
    let mut unsym = VectorField::zeros(n);
    for comp in 1..=2 {
        let src = numerators.component(comp);
        let dst = unsym.component_mut(comp);
        for (i, k) in modes.iter().enumerate() {
            dst.coeffs[i] = src.coeffs[i] / sobolev_weight(k, gamma);
        }
    }
    let mut field = unsym.clone();
    field.a1.symmetrize_real();
    field.a2.symmetrize_real();
    let nu = field.sobolev_norm_sq(gamma).sqrt();
    if !(nu > 0.0) {
        return Err(Error::DegenerateObjective { max_numerator });
    }
    let inv = Complex64::new(1.0 / nu, 0.0);
    field.a1 = field.a1.scaled(inv);
    field.a2 = field.a2.scaled(inv);
    let hermitian_defect = unsym.a1.hermitian_defect().max(unsym.a2.hermitian_defect()) / nu;
    Ok(OptimalField {
        field,
        nu,
        gamma,
        raw_numerators: numerators.clone(),
        hermitian_defect,
        max_divergence_residue: raw.max_divergence_residue,
        seconds_per_coefficient: raw.seconds_per_coefficient,
    })
}

/// `J(V) = Σ_{c,k} a_c(k)·conj(raw_c(k))` by linearity.
///
/// Paired modes use the Hermitian part of the numerators, so a real field
/// gets a real value even though the truncated operator on the asymmetric
/// mode set is not exactly real-preserving; an imaginary residue therefore
/// flags a non-real field.
pub fn objective_value(field: &VectorField, raw: &VectorField) -> Result<f64> {
    let raw_modes = raw.a1.modes();
    let mut total = Complex64::new(0.0, 0.0);
    for comp in 1..=2 {
        let a = field.component(comp);
        let r = raw.component(comp);
        for (k, coeff) in a.modes().iter().zip(&a.coeffs) {
            if coeff.re == 0.0 && coeff.im == 0.0 {
                continue;
            }
            let missing = || Error::MissingNumerator {
                component: comp,
                k1: k.k1,
                k2: k.k2,
            };
            let idx = raw_modes.index_of(k).ok_or_else(missing)?;
            let num = match raw_modes.index_of(k.neg()) {
                Some(j) => (r.coeffs[idx] + r.coeffs[j].conj()) * 0.5,
                None => r.coeffs[idx],
            };
            total += coeff * num.conj();
        }
    }
    if total.im.abs() > IMAGINARY_TOL * total.re.abs().max(1.0) {
        return Err(Error::ImaginaryResidue(total.im));
    }
    Ok(total.re)
}

/// Real values of the field at the given points (imaginary residue dropped).
pub fn evaluate_field(field: &VectorField, points: &[TorusPoint]) -> Vec<[f64; 2]> {
    par::map_range(points.len(), |i| field.evaluate(points[i].coords()))
}

/// Component values on the `N×N` fine grid via the inverse FFT.
pub fn field_on_grid(field: &VectorField, n_fine: usize) -> Vec<[f64; 2]> {
    let fft = Fft2::new(n_fine);
    let v1 = fft.synthesize(&field.a1);
    let v2 = fft.synthesize(&field.a2);
    v1.iter().zip(&v2).map(|(a, b)| [a.re, b.re]).collect()
}

/// `(1/N²) Σ ‖V(x_i)‖₂` over the fine grid.
pub fn mean_field_norm(field: &VectorField, n_fine: usize) -> f64 {
    let values = field_on_grid(field, n_fine);
    values.iter().map(|v| v[0].hypot(v[1])).sum::<f64>() / values.len() as f64
}

/// Points `(i/q, j/q)`, row-major, for quiver plots.
pub fn quiver_points(q: usize) -> Vec<TorusPoint> {
    let h = 1.0 / q as f64;
    (0..q * q)
        .map(|idx| TorusPoint::new((idx / q) as f64 * h, (idx % q) as f64 * h))
        .collect()
}

pub fn write_vector_field_csv<W: Write>(field: &VectorField, mut w: W) -> Result<()> {
    writeln!(w, "component,k1,k2,re,im")?;
    for comp in 1..=2 {
        let f = field.component(comp);
        for (k, c) in f.modes().iter().zip(&f.coeffs) {
            writeln!(w, "{comp},{},{},{},{}", k.k1, k.k2, c.re, c.im)?;
        }
    }
    Ok(())
}

pub fn read_vector_field_csv<R: BufRead>(r: R) -> Result<VectorField> {
    const WHAT: &str = "field CSV";
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != "component,k1,k2,re,im" {
        return Err(Error::format(WHAT, format!("unexpected header {header:?}")));
    }
    let mut rows: [Vec<(ModeIndex, Complex64)>; 2] = [Vec::new(), Vec::new()];
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: String| Error::format(WHAT, format!("line {}: {m}", i + 2));
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 5 {
            return Err(bad("expected 5 fields".into()));
        }
        let comp: usize = parts[0].parse().map_err(|e| bad(format!("{e}")))?;
        if comp != 1 && comp != 2 {
            return Err(bad(format!("component {comp} is not 1 or 2")));
        }
        let k1: i64 = parts[1].parse().map_err(|e| bad(format!("{e}")))?;
        let k2: i64 = parts[2].parse().map_err(|e| bad(format!("{e}")))?;
        let re: f64 = parts[3].parse().map_err(|e| bad(format!("{e}")))?;
        let im: f64 = parts[4].parse().map_err(|e| bad(format!("{e}")))?;
        rows[comp - 1].push((ModeIndex::new(k1, k2), Complex64::new(re, im)));
    }
    let n = (rows[0].len() as f64).sqrt().round() as usize;
    if n * n != rows[0].len() || rows[1].len() != rows[0].len() {
        return Err(Error::format(WHAT, "components must each list all n² modes"));
    }
    crate::spectral::check_order(n)?;
    let modes = crate::spectral::ModeSet::new(n);
    let mut out = VectorField::zeros(n);
    for (c, list) in rows.iter().enumerate() {
        for (i, (k, v)) in list.iter().enumerate() {
            if modes.mode(i) != *k {
                return Err(Error::format(WHAT, format!("component {} row {i} out of canonical order", c + 1)));
            }
            out.component_mut(c + 1).coeffs[i] = *v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transfer::{build_resolvent, build_transfer_matrix, leading_eigenpair};

    struct Setup {
        matrix: TransferMatrix,
        solver: ResolventSolver,
        srb: SrbEstimate,
        map: TorusMapSpec,
        config: SpectralConfig,
    }

    fn setup(map: TorusMapSpec, n: usize) -> Setup {
        let config = SpectralConfig::with_order(n, 0.02).unwrap();
        let matrix = build_transfer_matrix(&map, &config).unwrap();
        let solver = build_resolvent(&matrix).unwrap();
        let srb = leading_eigenpair(&matrix).unwrap();
        Setup {
            matrix,
            solver,
            srb,
            map,
            config,
        }
    }

    #[test]
    fn cat_divergence_term_is_a_single_mode() {
        let s = setup(TorusMapSpec::cat(), 8);
        let k = ModeIndex::new(1, 0);
        let g = divergence_term(&s.srb, &s.map, k, 1, &s.config).unwrap();
        for (m, c) in g.modes().iter().zip(&g.coeffs) {
            let expected = if m == k { Complex64::new(0.0, 2.0 * PI) } else { Complex64::new(0.0, 0.0) };
            assert!((c - expected).norm() < 1e-10, "mode {m:?}: {c}");
        }
    }

    #[test]
    fn divergence_residue_is_small() {
        let s = setup(TorusMapSpec::nonlinear_cat(0.01), 8);
        let grids = DivergenceGrids::new(&s.srb, &s.map, &s.config).unwrap();
        for comp in 1..=2 {
            for k in s.config.modes().iter() {
                let (_, mean) = grids.term(k, comp).unwrap();
                assert!(mean.norm() < 1e-8, "{k:?}/{comp}: {mean}");
            }
        }
    }

    #[test]
    fn constant_observable_is_degenerate() {
        let s = setup(TorusMapSpec::cat(), 8);
        let c = ObjectiveSpec::new(ObjectiveKind::Constant { value: 3.0 }, &s.config).unwrap();
        let r = optimal_field(&c, &s.matrix, &s.solver, &s.srb, &s.map);
        assert!(matches!(r, Err(Error::DegenerateObjective { .. })));
    }

    #[test]
    fn optimal_field_is_self_consistent_and_odd_in_c() {
        let s = setup(TorusMapSpec::cat(), 8);
        let c = ObjectiveSpec::cosine_sum(&s.config).unwrap();
        let opt = optimal_field(&c, &s.matrix, &s.solver, &s.srb, &s.map).unwrap();
        assert!((opt.field.sobolev_norm_sq(0.02) - 1.0).abs() < 1e-8);
        assert!((opt.objective().unwrap() - opt.nu).abs() < 1e-8 * opt.nu.max(1.0));
        assert!(opt.hermitian_defect < 1e-8);

        let neg = optimal_field(&c.scaled(-1.0), &s.matrix, &s.solver, &s.srb, &s.map).unwrap();
        assert!(neg.field.a1.max_abs_diff(&opt.field.a1.scaled(Complex64::new(-1.0, 0.0))) < 1e-10);
        assert!(neg.field.a2.max_abs_diff(&opt.field.a2.scaled(Complex64::new(-1.0, 0.0))) < 1e-10);

        let twice = optimal_field(&c.scaled(2.5), &s.matrix, &s.solver, &s.srb, &s.map).unwrap();
        assert!(twice.field.a1.max_abs_diff(&opt.field.a1) < 1e-10);
        assert!((twice.nu - 2.5 * opt.nu).abs() < 1e-10 * opt.nu.max(1.0));
    }

    #[test]
    fn linearity_matches_end_to_end_objective() {
        let s = setup(TorusMapSpec::nonlinear_cat(0.01), 8);
        let c = ObjectiveSpec::cosine_sum(&s.config).unwrap();
        let problem = ResponseProblem::new(&c, &s.matrix, &s.solver, &s.srb, &s.map).unwrap();
        let raw = problem.raw_numerators().unwrap();
        let opt = optimal_field_from(&raw, 0.02).unwrap();
        let direct = problem.direct_objective(&opt.field).unwrap();
        assert!((direct - opt.nu).abs() < 1e-8 * opt.nu.max(1.0), "{direct} vs {}", opt.nu);
    }

    #[test]
    fn cat_constant_shift_has_no_response() {
        let s = setup(TorusMapSpec::cat(), 8);
        let c = ObjectiveSpec::cosine_sum(&s.config).unwrap();
        for comp in 1..=2 {
            let r = raw_numerator(&c, &s.matrix, &s.solver, &s.srb, &s.map, ModeIndex::ZERO, comp).unwrap();
            assert!(r.norm() < 1e-10);
        }
    }

    #[test]
    fn non_real_field_has_imaginary_residue() {
        let mut raw = VectorField::zeros(4);
        raw.a1.set(ModeIndex::new(1, 0), Complex64::new(1.0, 0.0));
        raw.a1.set(ModeIndex::new(-1, 0), Complex64::new(1.0, 0.0));
        let mut f = VectorField::zeros(4);
        f.a1.set(ModeIndex::new(1, 0), Complex64::new(0.0, 1.0));
        assert!(matches!(objective_value(&f, &raw), Err(Error::ImaginaryResidue(_))));
    }

    #[test]
    fn zero_field_has_zero_objective() {
        let raw = VectorField::zeros(8);
        assert_eq!(objective_value(&VectorField::zeros(8), &raw).unwrap(), 0.0);
    }

    #[test]
    fn field_outside_numerator_table_is_rejected() {
        let raw = VectorField::zeros(4);
        let mut f = VectorField::zeros(8);
        f.a2.set(ModeIndex::new(3, 0), Complex64::new(1.0, 0.0));
        assert!(matches!(objective_value(&f, &raw), Err(Error::MissingNumerator { component: 2, k1: 3, k2: 0 })));
    }

    #[test]
    fn constant_field_evaluates_to_constant() {
        let mut f = VectorField::zeros(4);
        f.a1.set(ModeIndex::ZERO, Complex64::new(1.0, 0.0));
        for v in evaluate_field(&f, &quiver_points(5)) {
            assert!((v[0] - 1.0).abs() < 1e-15 && v[1].abs() < 1e-15);
        }
        assert!((mean_field_norm(&f, 16) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn field_csv_round_trip() {
        let mut f = VectorField::zeros(4);
        f.a1.set(ModeIndex::new(1, -1), Complex64::new(0.1, 1.0 / 3.0));
        f.a2.set(ModeIndex::new(2, 2), Complex64::new(-7e-12, 0.0));
        let mut buf = Vec::new();
        write_vector_field_csv(&f, &mut buf).unwrap();
        assert_eq!(read_vector_field_csv(buf.as_slice()).unwrap(), f);
    }

    #[test]
    fn gaussian_coefficients_are_hermitian() {
        let cfg = SpectralConfig::with_order(16, 0.02).unwrap();
        let c = ObjectiveSpec::gaussian_pair(&cfg).unwrap();
        assert_eq!(c.coeffs.hermitian_defect(), 0.0);
        // each Gaussian integrates to πσ²
        let mean = c.coeffs.mean().re;
        assert!((mean - 2.0 * PI * 0.01).abs() < 1e-9, "{mean}");
    }
}

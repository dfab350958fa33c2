//! Independent checks of the response pipeline: SRB estimates of perturbed
//! maps, finite-difference response slopes, periodic orbits by Newton's
//! method, and random Cauchy–Schwarz spot checks of optimality.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::maps::{check_det_sign, inverse_jacobian_with_floor, perturbed_map, Jacobian2, TorusMap, TorusMapSpec, TorusPoint};
use crate::par;
use crate::response::{objective_value, ObjectiveSpec, OptimalField};
use crate::spectral::{sobolev_weight, SpectralConfig, VectorField};
use crate::transfer::{build_transfer_matrix, leading_eigenpair, SrbEstimate};

pub const DEFAULT_DELTAS: [f64; 3] = [1e-3, 2e-3, 4e-3];
pub const OPTIMALITY_TOL: f64 = 1e-8;

/// SRB estimate of `T₀ + δ·V`, after checking that `det DT_δ` keeps its
/// sign on the fine grid.
pub fn srb_of_perturbed(map: &TorusMapSpec, field: &VectorField, delta: f64, config: &SpectralConfig) -> Result<SrbEstimate> {
    let pm = perturbed_map(map, field, delta);
    check_det_sign(&pm, config.n_fine)?;
    leading_eigenpair(&build_transfer_matrix(&pm, config)?)
}

/// Expectations `∫c f_δ` over a sweep of `δ` and the least-squares slope at
/// `δ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseProbe {
    pub deltas: Vec<f64>,
    pub expectations: Vec<f64>,
    /// `∫c f₀`.
    pub baseline: f64,
    pub slope: f64,
    pub slope_stderr: f64,
}

impl ResponseProbe {
    /// Unweighted least-squares fit through `(0, baseline)` and the sweep
    /// points. With three or more points the model is `e₀ + s·δ + q·δ²`, so
    /// the reported slope is the derivative at `δ = 0` rather than an average
    /// secant; with two points it is the plain difference quotient.
    pub fn fit(deltas: Vec<f64>, expectations: Vec<f64>, baseline: f64) -> Self {
        let xs: Vec<f64> = std::iter::once(0.0).chain(deltas.iter().copied()).collect();
        let ys: Vec<f64> = std::iter::once(baseline).chain(expectations.iter().copied()).collect();
        let degree = if xs.len() >= 3 { 2 } else { 1 };
        let (coef, stderr) = polyfit(&xs, &ys, degree);
        Self {
            deltas,
            expectations,
            baseline,
            slope: coef[1],
            slope_stderr: stderr[1],
        }
    }

    pub fn relative_error(&self, j: f64) -> f64 {
        (self.slope - j).abs() / j.abs()
    }

    /// `slope=…,stderr=…,J=…,rel_err=…`
    pub fn summary_line(&self, j: f64) -> String {
        format!(
            "slope={},stderr={},J={},rel_err={}",
            self.slope,
            self.slope_stderr,
            j,
            self.relative_error(j)
        )
    }

    /// CSV `delta,expectation`, starting with the `δ = 0` row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "delta,expectation")?;
        writeln!(w, "0,{}", self.baseline)?;
        for (d, e) in self.deltas.iter().zip(&self.expectations) {
            writeln!(w, "{d},{e}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        const WHAT: &str = "probe CSV";
        let mut lines = r.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != "delta,expectation" {
            return Err(Error::format(WHAT, format!("unexpected header {header:?}")));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |m: String| Error::format(WHAT, format!("line {}: {m}", i + 2));
            let (a, b) = line.split_once(',').ok_or_else(|| bad("expected 2 fields".into()))?;
            let d: f64 = a.trim().parse().map_err(|e| bad(format!("{e}")))?;
            let e: f64 = b.trim().parse().map_err(|e| bad(format!("{e}")))?;
            rows.push((d, e));
        }
        match rows.split_first() {
            Some((&(0.0, baseline), rest)) => {
                let deltas = rest.iter().map(|r| r.0).collect();
                let exps = rest.iter().map(|r| r.1).collect();
                Ok(Self::fit(deltas, exps, baseline))
            }
            _ => Err(Error::format(WHAT, "first row must be delta = 0")),
        }
    }
}

/// Least-squares polynomial fit of the given degree via the normal
/// equations on scaled abscissae; returns coefficients (constant first) and
/// their standard errors (zero when there are no spare degrees of freedom).
fn polyfit(xs: &[f64], ys: &[f64], degree: usize) -> (Vec<f64>, Vec<f64>) {
    let p = degree + 1;
    let scale = xs.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let mut ata = vec![vec![0.0; p]; p];
    let mut aty = vec![0.0; p];
    for (&x, &y) in xs.iter().zip(ys) {
        let t = x / scale;
        let row: Vec<f64> = (0..p).map(|i| t.powi(i as i32)).collect();
        for i in 0..p {
            aty[i] += row[i] * y;
            for j in 0..p {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let inv = invert_small(&ata);
    let beta: Vec<f64> = (0..p).map(|i| (0..p).map(|j| inv[i][j] * aty[j]).sum()).collect();
    let dof = xs.len().saturating_sub(p);
    let ssr: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let t = x / scale;
            let fit: f64 = beta.iter().enumerate().map(|(i, b)| b * t.powi(i as i32)).sum();
            (y - fit).powi(2)
        })
        .sum();
    let sigma2 = if dof > 0 { ssr / dof as f64 } else { 0.0 };
    let coef = beta.iter().enumerate().map(|(i, b)| b / scale.powi(i as i32)).collect();
    let stderr = (0..p).map(|i| (sigma2 * inv[i][i]).sqrt() / scale.powi(i as i32)).collect();
    (coef, stderr)
}

/// Gauss–Jordan inverse of a small symmetric positive-definite matrix.
fn invert_small(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..p).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for c in 0..p {
        let piv = (c..p).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, piv);
        let d = m[c][c];
        m[c].iter_mut().for_each(|v| *v /= d);
        for r in 0..p {
            if r != c {
                let f = m[r][c];
                let pivot_row = m[c].clone();
                m[r].iter_mut().zip(&pivot_row).for_each(|(v, pv)| *v -= f * pv);
            }
        }
    }
    m.into_iter().map(|r| r[p..].to_vec()).collect()
}

pub fn check_deltas(deltas: &[f64]) -> Result<()> {
    if deltas.is_empty() {
        return Err(Error::config(None, "deltas", "delta sweep is empty"));
    }
    if deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(Error::config(None, "deltas", "every delta must be positive and finite"));
    }
    if deltas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config(None, "deltas", "deltas must be strictly increasing"));
    }
    Ok(())
}

/// Finite-difference response of `∫c f_δ` to `T_δ = T₀ + δ·V`, with the
/// perturbed pipelines run at the base discretization.
pub fn finite_difference_response(
    map: &TorusMapSpec,
    field: &VectorField,
    c: &ObjectiveSpec,
    config: &SpectralConfig,
    deltas: &[f64],
) -> Result<ResponseProbe> {
    check_deltas(deltas)?;
    let all: Vec<f64> = std::iter::once(0.0).chain(deltas.iter().copied()).collect();
    let expectations = par::try_map_range(all.len(), |i| {
        srb_of_perturbed(map, field, all[i], config).map(|s| c.expectation(&s.density))
    })?;
    Ok(ResponseProbe::fit(deltas.to_vec(), expectations[1..].to_vec(), expectations[0]))
}

/// Newton iteration for `T^p(x) ≡ x (mod 1)`; returns the whole orbit
/// starting at the converged point.
pub fn find_periodic_orbit(map: &dyn TorusMap, period: usize, seed: TorusPoint) -> Result<Vec<TorusPoint>> {
    const MAX_ITER: usize = 100;
    const TOL: f64 = 1e-12;
    assert!(period >= 1, "period must be at least 1");
    let mut x = seed.coords();
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITER {
        let mut y = x;
        let mut dj = Jacobian2::IDENTITY;
        for _ in 0..period {
            dj = map.jacobian_at(y).mul(&dj);
            y = map.eval_lifted(y);
        }
        let mut f = [y[0] - x[0], y[1] - x[1]];
        f[0] -= f[0].round();
        f[1] -= f[1].round();
        residual = f[0].hypot(f[1]);
        if residual < TOL {
            let mut orbit = Vec::with_capacity(period);
            let mut p = x;
            for _ in 0..period {
                orbit.push(TorusPoint::from_lifted(p));
                p = map.eval_lifted(p);
            }
            return Ok(orbit);
        }
        let mut g = dj;
        g.0[0][0] -= 1.0;
        g.0[1][1] -= 1.0;
        let step = inverse_jacobian_with_floor(&g, 1e-14)?.apply(f);
        x = [x[0] - step[0], x[1] - step[1]];
        if !(x[0].is_finite() && x[1].is_finite()) {
            break;
        }
    }
    Err(Error::NewtonDiverged {
        iterations: MAX_ITER,
        residual,
    })
}

/// Lifted `T^p(x) − x` reduced to the nearest integer translate.
pub fn periodic_residual(map: &dyn TorusMap, period: usize, x: TorusPoint) -> f64 {
    let mut y = x.coords();
    for _ in 0..period {
        y = map.eval_lifted(y);
    }
    let d = [y[0] - x.x1, y[1] - x.x2];
    (d[0] - d[0].round()).hypot(d[1] - d[1].round())
}

/// Outcome of comparing candidate unit-norm fields against the optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct SpotCheckReport {
    pub optimum: f64,
    pub ratios: Vec<f64>,
}

impl SpotCheckReport {
    pub fn trials(&self) -> usize {
        self.ratios.len()
    }

    pub fn max_ratio(&self) -> Option<f64> {
        self.ratios.iter().copied().reduce(f64::max)
    }
}

/// Real random field on the γ-weighted unit sphere. Each mode is drawn with
/// standard deviation `w_γ(k)^{-1/2}` so that no band dominates the norm.
pub fn random_unit_field(n: usize, gamma: f64, rng: &mut impl Rng) -> VectorField {
    let mut v = VectorField::zeros(n);
    for comp in 1..=2 {
        let f = v.component_mut(comp);
        let modes = f.modes();
        for (i, k) in modes.iter().enumerate() {
            let s = sobolev_weight(k, gamma).sqrt().recip();
            f.coeffs[i] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * s;
        }
        f.symmetrize_real();
    }
    let norm = v.sobolev_norm_sq(gamma).sqrt();
    let inv = Complex64::new(1.0 / norm, 0.0);
    v.a1 = v.a1.scaled(inv);
    v.a2 = v.a2.scaled(inv);
    v
}

/// Evaluates `J` on each candidate (assumed unit-norm) and fails on the
/// first one that beats the optimum by more than the tolerance.
pub fn check_candidates<'a>(opt: &OptimalField, candidates: impl IntoIterator<Item = &'a VectorField>) -> Result<SpotCheckReport> {
    let optimum = opt.objective()?;
    let mut ratios = Vec::new();
    for (trial, v) in candidates.into_iter().enumerate() {
        let j = objective_value(v, &opt.raw_numerators)?;
        let ratio = j / optimum;
        if j > optimum + OPTIMALITY_TOL {
            return Err(Error::OptimalityViolated { trial, ratio });
        }
        ratios.push(ratio);
    }
    Ok(SpotCheckReport { optimum, ratios })
}

/// `trials` random unit-norm fields; trial `t` uses ChaCha stream `t` of
/// `seed`, so the report does not depend on scheduling.
pub fn optimality_spot_check(opt: &OptimalField, trials: usize, seed: u64) -> Result<SpotCheckReport> {
    let n = opt.order();
    let candidates = par::map_range(trials, |t| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        random_unit_field(n, opt.gamma, &mut rng)
    });
    check_candidates(opt, &candidates)
}

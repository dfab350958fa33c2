//! Torus maps of the form `x ↦ A·x + Σ trig terms (mod 1)` with closed-form
//! derivatives, plus perturbed maps `T₀ + δ·Ṫ` built from a Fourier vector
//! field.

use std::f64::consts::PI;
use std::fmt;

use crate::dual::{DualScalar, Scalar};
use crate::error::{Error, Result};
use crate::spectral::{fine_grid_coords, synthesize, VectorField};

/// Default floor on `|det J|` below which a Jacobian is treated as singular.
pub const DET_FLOOR: f64 = 1e-12;

/// Default perturbation amplitude of the nonlinear cat map.
pub const NONLINEAR_CAT_DELTA: f64 = 0.01;

/// Point of the 2-torus with both coordinates reduced into `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusPoint {
    pub x1: f64,
    pub x2: f64,
}

#[inline]
pub fn wrap_unit(v: f64) -> f64 {
    let r = v.rem_euclid(1.0);
    // rem_euclid rounds tiny negatives up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

impl TorusPoint {
    pub fn new(x1: f64, x2: f64) -> Self {
        Self {
            x1: wrap_unit(x1),
            x2: wrap_unit(x2),
        }
    }

    pub fn from_lifted(x: [f64; 2]) -> Self {
        Self::new(x[0], x[1])
    }

    pub fn coords(&self) -> [f64; 2] {
        [self.x1, self.x2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrigKind {
    Sin,
    Cos,
}

impl TrigKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrigKind::Sin => "sin",
            TrigKind::Cos => "cos",
        }
    }
}

/// One term `amplitude · kind(2π(j1·x1 + j2·x2) + phase)` added to
/// coordinate `component` (1 or 2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrigTerm {
    pub component: usize,
    pub amplitude: f64,
    pub frequency: [i64; 2],
    pub phase: f64,
    pub kind: TrigKind,
}

impl TrigTerm {
    #[inline]
    fn angle<S: Scalar>(&self, x: [S; 2]) -> S {
        (x[0].scale(self.frequency[0] as f64) + x[1].scale(self.frequency[1] as f64)).scale(2.0 * PI)
            + S::from_f64(self.phase)
    }

    #[inline]
    fn value<S: Scalar>(&self, x: [S; 2]) -> S {
        let theta = self.angle(x);
        match self.kind {
            TrigKind::Sin => theta.sin().scale(self.amplitude),
            TrigKind::Cos => theta.cos().scale(self.amplitude),
        }
    }

    /// Gradient of the term, `[∂/∂x1, ∂/∂x2]`.
    #[inline]
    fn gradient<S: Scalar>(&self, x: [S; 2]) -> [S; 2] {
        let theta = self.angle(x);
        let slope = match self.kind {
            TrigKind::Sin => theta.cos(),
            TrigKind::Cos => -theta.sin(),
        };
        let s = 2.0 * PI * self.amplitude;
        [
            slope.scale(s * self.frequency[0] as f64),
            slope.scale(s * self.frequency[1] as f64),
        ]
    }
}

/// Row-major 2×2 real matrix, used for `D_xT` and its inverse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobian2(pub [[f64; 2]; 2]);

impl Jacobian2 {
    pub const IDENTITY: Jacobian2 = Jacobian2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn mul(&self, other: &Jacobian2) -> Jacobian2 {
        let (a, b) = (&self.0, &other.0);
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Jacobian2(out)
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        let m = &self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    pub fn max_abs_diff(&self, other: &Jacobian2) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((self.0[i][j] - other.0[i][j]).abs());
            }
        }
        worst
    }
}

/// Adjugate-over-determinant inverse; fails when `|det J| < floor`.
pub fn inverse_jacobian_with_floor(j: &Jacobian2, floor: f64) -> Result<Jacobian2> {
    let det = j.det();
    if !(det.abs() >= floor) {
        return Err(Error::SingularJacobian { det, floor });
    }
    let m = &j.0;
    let inv = 1.0 / det;
    Ok(Jacobian2([
        [m[1][1] * inv, -m[0][1] * inv],
        [-m[1][0] * inv, m[0][0] * inv],
    ]))
}

pub fn inverse_jacobian(j: &Jacobian2) -> Result<Jacobian2> {
    inverse_jacobian_with_floor(j, DET_FLOOR)
}

/// Linear-plus-trigonometric-polynomial map of the torus.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusMapSpec {
    pub linear_part: [[i64; 2]; 2],
    pub trig_terms: Vec<TrigTerm>,
    pub name: String,
}

impl TorusMapSpec {
    pub fn new(linear_part: [[i64; 2]; 2], trig_terms: Vec<TrigTerm>, name: impl Into<String>) -> Result<Self> {
        let a = linear_part;
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        if det.abs() < 1 {
            return Err(Error::config(None, "A", format!("|det A| = {} but the map needs |det A| >= 1", det.abs())));
        }
        for t in &trig_terms {
            if t.component != 1 && t.component != 2 {
                return Err(Error::config(None, "trig", format!("component must be 1 or 2, got {}", t.component)));
            }
            if !t.amplitude.is_finite() || !t.phase.is_finite() {
                return Err(Error::config(None, "trig", "amplitude and phase must be finite"));
            }
        }
        Ok(Self {
            linear_part,
            trig_terms,
            name: name.into(),
        })
    }

    /// Arnold's cat map `(2x1 + x2, x1 + x2)`.
    pub fn cat() -> Self {
        Self {
            linear_part: [[2, 1], [1, 1]],
            trig_terms: Vec::new(),
            name: "cat".into(),
        }
    }

    /// `(2x1 + x2 + 2Δ cos(2πx1), x1 + x2 + Δ sin(4πx2 + 1))`.
    pub fn nonlinear_cat(delta: f64) -> Self {
        Self {
            linear_part: [[2, 1], [1, 1]],
            trig_terms: vec![
                TrigTerm {
                    component: 1,
                    amplitude: 2.0 * delta,
                    frequency: [1, 0],
                    phase: 0.0,
                    kind: TrigKind::Cos,
                },
                TrigTerm {
                    component: 2,
                    amplitude: delta,
                    frequency: [0, 2],
                    phase: 1.0,
                    kind: TrigKind::Sin,
                },
            ],
            name: "nonlinear_cat".into(),
        }
    }

    pub fn is_linear(&self) -> bool {
        self.trig_terms.iter().all(|t| t.amplitude == 0.0)
    }

    /// Map lifted to ℝ² (no reduction mod 1).
    pub fn eval_generic<S: Scalar>(&self, x: [S; 2]) -> [S; 2] {
        let a = &self.linear_part;
        let mut out = [
            x[0].scale(a[0][0] as f64) + x[1].scale(a[0][1] as f64),
            x[1].scale(a[1][1] as f64) + x[0].scale(a[1][0] as f64),
        ];
        for t in &self.trig_terms {
            out[t.component - 1] = out[t.component - 1] + t.value(x);
        }
        out
    }

    /// Closed-form Jacobian entries, generic so they can be differentiated.
    pub fn jacobian_generic<S: Scalar>(&self, x: [S; 2]) -> [[S; 2]; 2] {
        let a = &self.linear_part;
        let mut m = [
            [S::from_f64(a[0][0] as f64), S::from_f64(a[0][1] as f64)],
            [S::from_f64(a[1][0] as f64), S::from_f64(a[1][1] as f64)],
        ];
        for t in &self.trig_terms {
            let g = t.gradient(x);
            let row = &mut m[t.component - 1];
            row[0] = row[0] + g[0];
            row[1] = row[1] + g[1];
        }
        m
    }
}

impl fmt::Display for TorusMapSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}

/// `(A·x + Σ trig terms) mod 1`.
pub fn eval_map(map: &TorusMapSpec, x: TorusPoint) -> TorusPoint {
    TorusPoint::from_lifted(map.eval_generic(x.coords()))
}

pub fn jacobian(map: &TorusMapSpec, x: TorusPoint) -> Jacobian2 {
    Jacobian2(map.jacobian_generic(x.coords()))
}

/// Divergence of `x ↦ (D_xT)⁻¹` in the sense `(∇·B)·a = ∇·(B·a)`:
/// component `c` is `Σ_i ∂_i B[i][c]`.
pub fn div_inverse_jacobian(map: &TorusMapSpec, x: TorusPoint) -> Result<[f64; 2]> {
    div_inverse_jacobian_lifted(map, x.coords())
}

pub(crate) fn div_inverse_jacobian_lifted(map: &TorusMapSpec, x: [f64; 2]) -> Result<[f64; 2]> {
    let m = map.jacobian_generic(DualScalar::variables(x));
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if !(det.value.abs() >= DET_FLOOR) {
        return Err(Error::SingularJacobian {
            det: det.value,
            floor: DET_FLOOR,
        });
    }
    let b = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
    Ok([b[0][0].d1 + b[1][0].d2, b[0][1].d1 + b[1][1].d2])
}

/// Point-evaluable torus map. Grid methods return values at the fine grid
/// `(i/N, j/N)` in row-major order.
pub trait TorusMap: Sync {
    fn label(&self) -> String;

    /// Image of `x` in the lift to ℝ² (no reduction mod 1).
    fn eval_lifted(&self, x: [f64; 2]) -> [f64; 2];

    fn jacobian_at(&self, x: [f64; 2]) -> Jacobian2;

    fn lifted_on_grid(&self, n_fine: usize) -> Vec<[f64; 2]> {
        fine_grid_coords(n_fine).map(|x| self.eval_lifted(x)).collect()
    }

    fn jacobians_on_grid(&self, n_fine: usize) -> Vec<Jacobian2> {
        fine_grid_coords(n_fine).map(|x| self.jacobian_at(x)).collect()
    }

    fn eval(&self, x: TorusPoint) -> TorusPoint {
        TorusPoint::from_lifted(self.eval_lifted(x.coords()))
    }
}

impl TorusMap for TorusMapSpec {
    fn label(&self) -> String {
        self.name.clone()
    }

    fn eval_lifted(&self, x: [f64; 2]) -> [f64; 2] {
        self.eval_generic(x)
    }

    fn jacobian_at(&self, x: [f64; 2]) -> Jacobian2 {
        Jacobian2(self.jacobian_generic(x))
    }
}

/// `T_δ = T₀ + δ·Ṫ` with `Ṫ` a real Fourier vector field.
#[derive(Debug, Clone)]
pub struct PerturbedMap<'a> {
    pub base: &'a TorusMapSpec,
    pub field: &'a VectorField,
    pub delta: f64,
}

pub fn perturbed_map<'a>(map: &'a TorusMapSpec, field: &'a VectorField, delta: f64) -> PerturbedMap<'a> {
    PerturbedMap {
        base: map,
        field,
        delta,
    }
}

impl TorusMap for PerturbedMap<'_> {
    fn label(&self) -> String {
        format!("{}+{}*field", self.base.name, self.delta)
    }

    fn eval_lifted(&self, x: [f64; 2]) -> [f64; 2] {
        let t = self.base.eval_generic(x);
        if self.delta == 0.0 {
            return t;
        }
        let v = self.field.evaluate(x);
        [t[0] + self.delta * v[0], t[1] + self.delta * v[1]]
    }

    fn jacobian_at(&self, x: [f64; 2]) -> Jacobian2 {
        let mut j = Jacobian2(self.base.jacobian_generic(x));
        if self.delta == 0.0 {
            return j;
        }
        let d = self.field.jacobian(x);
        for r in 0..2 {
            for c in 0..2 {
                j.0[r][c] += self.delta * d.0[r][c];
            }
        }
        j
    }

    fn lifted_on_grid(&self, n_fine: usize) -> Vec<[f64; 2]> {
        let mut out = self.base.lifted_on_grid(n_fine);
        if self.delta == 0.0 {
            return out;
        }
        let v1 = synthesize(&self.field.a1, n_fine);
        let v2 = synthesize(&self.field.a2, n_fine);
        for ((p, a), b) in out.iter_mut().zip(&v1).zip(&v2) {
            p[0] += self.delta * a.re;
            p[1] += self.delta * b.re;
        }
        out
    }

    fn jacobians_on_grid(&self, n_fine: usize) -> Vec<Jacobian2> {
        let mut out = self.base.jacobians_on_grid(n_fine);
        if self.delta == 0.0 {
            return out;
        }
        let grads = [self.field.a1.gradient_fields(), self.field.a2.gradient_fields()];
        for (r, g) in grads.iter().enumerate() {
            for (c, comp) in g.iter().enumerate() {
                let vals = synthesize(comp, n_fine);
                for (j, v) in out.iter_mut().zip(&vals) {
                    j.0[r][c] += self.delta * v.re;
                }
            }
        }
        out
    }
}

/// Checks that `det D_xT` keeps the sign it has at the origin over the whole
/// fine grid. This is the only diffeomorphism check made on a map.
pub fn check_det_sign(map: &dyn TorusMap, n_fine: usize) -> Result<()> {
    let dets: Vec<f64> = map.jacobians_on_grid(n_fine).iter().map(Jacobian2::det).collect();
    let sign = dets[0].signum();
    for (idx, d) in dets.iter().enumerate() {
        if !(d * sign > 0.0) {
            return Err(Error::DetSignFlip {
                x1: (idx / n_fine) as f64 / n_fine as f64,
                x2: (idx % n_fine) as f64 / n_fine as f64,
            });
        }
    }
    Ok(())
}

use anosov_response::response::{optimal_field, ObjectiveSpec};
use anosov_response::transfer::{build_resolvent, build_transfer_matrix, leading_eigenpair};
use anosov_response::validate::{finite_difference_response, srb_of_perturbed, DEFAULT_DELTAS};
use anosov_response::{SpectralConfig, TorusMapSpec, VectorField};
use num_complex::Complex64;

fn setup() -> (TorusMapSpec, SpectralConfig, ObjectiveSpec, VectorField, f64) {
    let map = TorusMapSpec::nonlinear_cat(0.01);
    let cfg = SpectralConfig::with_order(8, 0.02).unwrap();
    let m = build_transfer_matrix(&map, &cfg).unwrap();
    let srb = leading_eigenpair(&m).unwrap();
    let solver = build_resolvent(&m).unwrap();
    let c = ObjectiveSpec::gaussian_pair(&cfg).unwrap();
    let opt = optimal_field(&c, &m, &solver, &srb, &map).unwrap();
    let nu = opt.nu;
    (map, cfg, c, opt.field, nu)
}

fn negate(v: &VectorField) -> VectorField {
    let minus = Complex64::new(-1.0, 0.0);
    VectorField {
        a1: v.a1.scaled(minus),
        a2: v.a2.scaled(minus),
    }
}

fn asymmetry(map: &TorusMapSpec, field: &VectorField, c: &ObjectiveSpec, cfg: &SpectralConfig, scale: f64) -> f64 {
    let d: Vec<f64> = DEFAULT_DELTAS.iter().map(|x| x * scale).collect();
    let up = finite_difference_response(map, field, c, cfg, &d).unwrap();
    let down = finite_difference_response(map, &negate(field), c, cfg, &d).unwrap();
    (up.slope + down.slope).abs()
}

// The quadratic fit absorbs the even δ² term exactly, so what is left of
// slope(V) + slope(−V) is the δ⁴ term leaking in at O(δ³).
#[test]
fn response_slope_is_odd_in_the_field() {
    let (map, cfg, c, field, _) = setup();
    let full = asymmetry(&map, &field, &c, &cfg, 1.0);
    let quarter = asymmetry(&map, &field, &c, &cfg, 0.25);
    assert!(full < 1e-4, "{full}");
    assert!(quarter < 1e-6, "{quarter}");
    assert!(full / quarter > 40.0, "asymmetry {full:e} -> {quarter:e} is not O(δ³)");
}

#[test]
fn response_slope_matches_the_optimum() {
    let (map, cfg, c, field, nu) = setup();
    let probe = finite_difference_response(&map, &field, &c, &cfg, &DEFAULT_DELTAS).unwrap();
    assert!(probe.relative_error(nu) < 0.05, "slope {} vs {nu}", probe.slope);
}

#[test]
fn zero_field_has_zero_slope() {
    let (map, cfg, c, _, _) = setup();
    let probe = finite_difference_response(&map, &VectorField::zeros(8), &c, &cfg, &DEFAULT_DELTAS).unwrap();
    assert!(probe.slope.abs() < 1e-10);
}

#[test]
fn zero_delta_is_the_base_srb() {
    let (map, cfg, _, field, _) = setup();
    let base = leading_eigenpair(&build_transfer_matrix(&map, &cfg).unwrap()).unwrap();
    let p = srb_of_perturbed(&map, &field, 0.0, &cfg).unwrap();
    assert!(base.density.max_abs_diff(&p.density) < 1e-12);
}

#[test]
fn folding_perturbation_is_rejected() {
    let (map, cfg, _, field, _) = setup();
    let err = srb_of_perturbed(&map, &field, 10.0, &cfg).unwrap_err();
    assert!(matches!(err, anosov_response::Error::DetSignFlip { .. }), "{err}");
}


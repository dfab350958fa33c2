//! Run configuration and the batch commands behind the `anosov-response`
//! binary.
//!
//! # Config grammar
//!
//! One `key = value` per line; `#` starts a comment; blank lines are ignored.
//!
//! ```text
//! map = cat | nonlinear_cat | custom     # default: custom if A is given
//! map_delta = 0.01                       # amplitude of nonlinear_cat
//! A = [[2,1],[1,1]]                      # custom maps only
//! trig = {1, cos, 0.02, 1, 0, 0}         # repeatable; custom maps only
//! trig = {component=2, kind=sin, amplitude=0.01, j1=0, j2=2, phase=1}
//! observable = cosine_sum | gaussian_pair | grid_file | constant
//! p1 = (0.1796, 0.4023)                  # gaussian_pair
//! p2 = (0.7877, 0.5852)
//! sigma = 0.1
//! path = c.csv                           # grid_file, relative to the config
//! value = 1                              # constant
//! n = 32
//! N = 128
//! gamma = 0.02
//! delta = 0.005                          # perturbed-srb
//! deltas = 1e-3, 2e-3, 4e-3              # validate
//! trials = 100
//! seed = 1
//! quiver = 24
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::maps::{TorusPoint, TorusMapSpec, TrigKind, TrigTerm, NONLINEAR_CAT_DELTA};
use crate::response::{
    evaluate_field, mean_field_norm, optimal_field_from, quiver_points, ObjectiveKind,
    ObjectiveSpec, OptimalField, ResponseProblem, GAUSSIAN_CENTRES, GAUSSIAN_WIDTH,
};
use crate::spectral::{fine_grid_coords, SpectralConfig, SpectralField, DEFAULT_ORDER};
use crate::transfer::{build_resolvent, build_transfer_matrix, leading_eigenpair, SrbEstimate, TransferMatrix};
use crate::validate::{check_deltas, finite_difference_response, optimality_spot_check, srb_of_perturbed, DEFAULT_DELTAS};

pub const DEFAULT_QUIVER: usize = 24;
pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_SEED: u64 = 1;

pub const SRB_COEFFS: &str = "srb_coeffs.csv";
pub const SRB_GRID: &str = "srb_grid.csv";
pub const FIELD_COEFFS: &str = "field_coeffs.csv";
pub const FIELD_QUIVER: &str = "field_quiver.csv";
pub const PROBE: &str = "probe.csv";
pub const SUMMARY: &str = "summary.txt";

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub map: TorusMapSpec,
    pub objective: ObjectiveKind,
    pub spectral: SpectralConfig,
    pub delta: Option<f64>,
    pub deltas: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub quiver: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            map: TorusMapSpec::cat(),
            objective: ObjectiveKind::CosineSum,
            spectral: SpectralConfig::default(),
            delta: None,
            deltas: DEFAULT_DELTAS.to_vec(),
            trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
            quiver: DEFAULT_QUIVER,
        }
    }
}

/// Command-line overrides of config values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub delta: Option<f64>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub quiver: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        parse_config(&text, base)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(d) = o.delta {
            self.delta = Some(d);
        }
        if let Some(t) = o.trials {
            self.trials = t;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(q) = o.quiver {
            self.quiver = q;
        }
        self.validate(None)
    }

    fn validate(&self, line: Option<usize>) -> Result<()> {
        let s = &self.spectral;
        if s.n < 4 || s.n % 2 != 0 {
            return Err(Error::config(line, "n", format!("n = {} must be even and at least 4", s.n)));
        }
        if s.n_fine < 4 * s.n {
            return Err(Error::config(
                line,
                "N",
                format!("N = {} violates the rule N >= 4n (n = {}, so N >= {})", s.n_fine, s.n, 4 * s.n),
            ));
        }
        if !(s.gamma > 0.0 && s.gamma <= 1.0) {
            return Err(Error::config(line, "gamma", format!("gamma = {} must lie in (0, 1]", s.gamma)));
        }
        if let Some(d) = self.delta {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::config(line, "delta", format!("delta = {d} must be finite and non-negative")));
            }
        }
        if self.quiver == 0 {
            return Err(Error::config(line, "quiver", "quiver grid needs at least one point per axis"));
        }
        check_deltas(&self.deltas)
    }
}

fn parse_num<T: std::str::FromStr>(v: &str, line: usize, key: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.trim()
        .parse()
        .map_err(|e: T::Err| Error::config(Some(line), key, format!("cannot parse {v:?}: {e}")))
}

fn strip_delims<'a>(v: &'a str, open: char, close: char, line: usize, key: &str) -> Result<&'a str> {
    v.trim()
        .strip_prefix(open)
        .and_then(|s| s.strip_suffix(close))
        .ok_or_else(|| Error::config(Some(line), key, format!("expected {open}…{close}, found {v:?}")))
}

fn parse_point(v: &str, line: usize, key: &str) -> Result<TorusPoint> {
    let inner = strip_delims(v, '(', ')', line, key)?;
    let parts: Vec<&str> = inner.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::config(Some(line), key, "a point has two coordinates"));
    }
    Ok(TorusPoint::new(parse_num(parts[0], line, key)?, parse_num(parts[1], line, key)?))
}

fn parse_matrix(v: &str, line: usize) -> Result<[[i64; 2]; 2]> {
    let compact: String = v.chars().filter(|c| !c.is_whitespace()).collect();
    let inner = strip_delims(&compact, '[', ']', line, "A")?;
    let rows: Vec<&str> = inner.split("],[").collect();
    if rows.len() != 2 {
        return Err(Error::config(Some(line), "A", "expected [[a,b],[c,d]]"));
    }
    let mut m = [[0i64; 2]; 2];
    for (r, row) in rows.iter().enumerate() {
        let row = row.trim_start_matches('[').trim_end_matches(']');
        let vals: Vec<&str> = row.split(',').collect();
        if vals.len() != 2 {
            return Err(Error::config(Some(line), "A", "expected [[a,b],[c,d]]"));
        }
        for (c, s) in vals.iter().enumerate() {
            m[r][c] = parse_num(s, line, "A")?;
        }
    }
    Ok(m)
}

fn parse_trig(v: &str, line: usize) -> Result<TrigTerm> {
    const KEYS: [&str; 6] = ["component", "kind", "amplitude", "j1", "j2", "phase"];
    let inner = strip_delims(v, '{', '}', line, "trig")?;
    let items: Vec<&str> = inner.split(',').map(str::trim).collect();
    if items.len() != 6 {
        return Err(Error::config(Some(line), "trig", "expected {component, kind, amplitude, j1, j2, phase}"));
    }
    let mut vals: [&str; 6] = [""; 6];
    if items.iter().any(|s| s.contains('=')) {
        for item in &items {
            let (k, val) = item
                .split_once('=')
                .ok_or_else(|| Error::config(Some(line), "trig", "mixing keyed and positional entries"))?;
            let slot = KEYS
                .iter()
                .position(|key| *key == k.trim())
                .ok_or_else(|| Error::config(Some(line), "trig", format!("unknown entry {:?}", k.trim())))?;
            vals[slot] = val.trim();
        }
        if let Some(i) = vals.iter().position(|s| s.is_empty()) {
            return Err(Error::config(Some(line), "trig", format!("missing {}", KEYS[i])));
        }
    } else {
        vals.copy_from_slice(&items);
    }
    let kind = match vals[1] {
        "sin" => TrigKind::Sin,
        "cos" => TrigKind::Cos,
        other => return Err(Error::config(Some(line), "trig", format!("kind {other:?} is not sin or cos"))),
    };
    Ok(TrigTerm {
        component: parse_num(vals[0], line, "trig.component")?,
        kind,
        amplitude: parse_num(vals[2], line, "trig.amplitude")?,
        frequency: [parse_num(vals[3], line, "trig.j1")?, parse_num(vals[4], line, "trig.j2")?],
        phase: parse_num(vals[5], line, "trig.phase")?,
    })
}

/// Parses the config text; `base` resolves relative `path` entries.
pub fn parse_config(text: &str, base: &Path) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut seen = HashSet::new();
    let mut map_name: Option<(String, usize)> = None;
    let mut map_delta = None;
    let mut matrix = None;
    let mut trig = Vec::new();
    let mut observable: Option<(String, usize)> = None;
    let (mut p1, mut p2, mut sigma, mut path, mut value) = (None, None, None, None, None);
    let mut n = None;
    let mut n_fine = None;
    let mut last_line = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        last_line = Some(line);
        let (key, val) = content
            .split_once('=')
            .ok_or_else(|| Error::config(Some(line), content, "expected `key = value`"))?;
        let (key, val) = (key.trim(), val.trim());
        if key != "trig" && !seen.insert(key.to_string()) {
            return Err(Error::config(Some(line), key, "duplicate key"));
        }
        match key {
            "map" => map_name = Some((val.to_string(), line)),
            "map_delta" => map_delta = Some((parse_num::<f64>(val, line, key)?, line)),
            "A" => matrix = Some((parse_matrix(val, line)?, line)),
            "trig" => trig.push((parse_trig(val, line)?, line)),
            "observable" => observable = Some((val.to_string(), line)),
            "p1" => p1 = Some(parse_point(val, line, key)?),
            "p2" => p2 = Some(parse_point(val, line, key)?),
            "sigma" => sigma = Some(parse_num::<f64>(val, line, key)?),
            "path" => path = Some(base.join(val)),
            "value" => value = Some(parse_num::<f64>(val, line, key)?),
            "n" => n = Some((parse_num::<usize>(val, line, key)?, line)),
            "N" => n_fine = Some((parse_num::<usize>(val, line, key)?, line)),
            "gamma" => cfg.spectral.gamma = parse_num(val, line, key)?,
            "delta" => cfg.delta = Some(parse_num(val, line, key)?),
            "deltas" => {
                cfg.deltas = val.split(',').map(|s| parse_num(s, line, key)).collect::<Result<_>>()?;
                check_deltas(&cfg.deltas).map_err(|e| Error::config(Some(line), key, e.to_string()))?;
            }
            "trials" => cfg.trials = parse_num(val, line, key)?,
            "seed" => cfg.seed = parse_num(val, line, key)?,
            "quiver" => cfg.quiver = parse_num(val, line, key)?,
            other => return Err(Error::config(Some(line), other, "unknown key")),
        }
    }

    let custom = |m: Option<([[i64; 2]; 2], usize)>, trig: Vec<(TrigTerm, usize)>| -> Result<TorusMapSpec> {
        let (a, line) = m.ok_or_else(|| Error::config(None, "A", "a custom map needs its linear part A"))?;
        TorusMapSpec::new(a, trig.into_iter().map(|t| t.0).collect(), "custom")
            .map_err(|e| Error::config(Some(line), "A", e.to_string()))
    };
    let builtin_only = |line: usize, name: &str| -> Result<()> {
        if matrix.is_some() || !trig.is_empty() {
            return Err(Error::config(Some(line), "map", format!("{name} is built in; A and trig apply to custom maps only")));
        }
        Ok(())
    };
    cfg.map = match &map_name {
        None if matrix.is_some() => custom(matrix, trig)?,
        None => TorusMapSpec::cat(),
        Some((name, line)) => match name.as_str() {
            "cat" => {
                builtin_only(*line, name)?;
                if let Some((_, l)) = map_delta {
                    return Err(Error::config(Some(l), "map_delta", "only nonlinear_cat has an amplitude"));
                }
                TorusMapSpec::cat()
            }
            "nonlinear_cat" => {
                builtin_only(*line, name)?;
                TorusMapSpec::nonlinear_cat(map_delta.map_or(NONLINEAR_CAT_DELTA, |d| d.0))
            }
            "custom" => custom(matrix, trig)?,
            other => return Err(Error::config(Some(*line), "map", format!("unknown map {other:?}"))),
        },
    };

    cfg.objective = match observable {
        None => ObjectiveKind::CosineSum,
        Some((kind, line)) => match kind.as_str() {
            "cosine_sum" => ObjectiveKind::CosineSum,
            "gaussian_pair" => ObjectiveKind::GaussianPair {
                p1: p1.unwrap_or(TorusPoint::new(GAUSSIAN_CENTRES[0][0], GAUSSIAN_CENTRES[0][1])),
                p2: p2.unwrap_or(TorusPoint::new(GAUSSIAN_CENTRES[1][0], GAUSSIAN_CENTRES[1][1])),
                sigma: match sigma.unwrap_or(GAUSSIAN_WIDTH) {
                    s if s > 0.0 => s,
                    s => return Err(Error::config(Some(line), "sigma", format!("sigma = {s} must be positive"))),
                },
            },
            "grid_file" => ObjectiveKind::GridFile {
                path: path.ok_or_else(|| Error::config(Some(line), "path", "grid_file needs a path"))?,
            },
            "constant" => ObjectiveKind::Constant {
                value: value.unwrap_or(1.0),
            },
            other => return Err(Error::config(Some(line), "observable", format!("unknown observable {other:?}"))),
        },
    };

    let order = n.map_or(DEFAULT_ORDER, |v| v.0);
    cfg.spectral.n = order;
    cfg.spectral.n_fine = n_fine.map_or(4 * order, |v| v.0);
    let line = n_fine.or(n).map(|v| v.1).or(last_line);
    cfg.validate(line)?;
    Ok(cfg)
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Format { .. } | Error::Io(_) | Error::BadOrder(_) | Error::GridTooCoarse { .. } => 2,
        Error::DegenerateObjective { .. } => 3,
        _ => 4,
    }
}

/// Ordered `key=value` lines.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Summary {
    pub entries: Vec<(String, String)>,
}

impl Summary {
    pub fn push(&mut self, key: &str, value: impl std::fmt::Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn parse(text: &str) -> Self {
        Self {
            entries: text
                .lines()
                .filter_map(|l| l.split_once('='))
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}

fn create(out: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(out.join(name))?))
}

fn write_summary(out: &Path, summary: &Summary) -> Result<()> {
    fs::write(out.join(SUMMARY), summary.render())?;
    Ok(())
}

pub fn write_density_grid<W: Write>(density: &SpectralField, n_fine: usize, mut w: W) -> Result<()> {
    let values = crate::spectral::synthesize(density, n_fine);
    writeln!(w, "x1,x2,value")?;
    for (x, v) in fine_grid_coords(n_fine).zip(&values) {
        writeln!(w, "{},{},{}", x[0], x[1], v.re)?;
    }
    Ok(())
}

pub fn write_quiver<W: Write>(field: &crate::spectral::VectorField, q: usize, mut w: W) -> Result<()> {
    let points = quiver_points(q);
    writeln!(w, "x1,x2,v1,v2")?;
    for (p, v) in points.iter().zip(evaluate_field(field, &points)) {
        writeln!(w, "{},{},{},{}", p.x1, p.x2, v[0], v[1])?;
    }
    Ok(())
}

/// Rows `(x1, x2, v1, v2)` of a quiver CSV.
pub fn read_quiver<R: BufRead>(r: R) -> Result<Vec<[f64; 4]>> {
    const WHAT: &str = "quiver CSV";
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != "x1,x2,v1,v2" {
        return Err(Error::format(WHAT, format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse().map_err(|e| Error::format(WHAT, format!("line {}: {e}", i + 2))))
            .collect::<Result<_>>()?;
        let row: [f64; 4] = vals
            .try_into()
            .map_err(|_| Error::format(WHAT, format!("line {}: expected 4 fields", i + 2)))?;
        rows.push(row);
    }
    Ok(rows)
}

/// Summary statistics of a density on the fine grid.
fn density_stats(summary: &mut Summary, srb: &SrbEstimate, n_fine: usize) {
    let values = srb.grid_values(n_fine);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let negative = values.iter().filter(|v| **v < 0.0).count();
    summary.push("density_min", min);
    summary.push("density_negative_fraction", negative as f64 / values.len() as f64);
}

fn eigen_residual(matrix: &TransferMatrix, srb: &SrbEstimate) -> f64 {
    let mv = matrix.apply(&srb.density);
    mv.coeffs
        .iter()
        .zip(&srb.density.coeffs)
        .map(|(a, b)| (a - srb.eigenvalue * b).norm())
        .fold(0.0, f64::max)
}

fn base_summary(cfg: &RunConfig, command: &str) -> Summary {
    let mut s = Summary::default();
    s.push("command", command);
    s.push("map", &cfg.map);
    s.push("n", cfg.spectral.n);
    s.push("N", cfg.spectral.n_fine);
    s.push("gamma", cfg.spectral.gamma);
    s
}

fn srb_entries(s: &mut Summary, matrix: &TransferMatrix, srb: &SrbEstimate, n_fine: usize) {
    s.push("eigenvalue_re", srb.eigenvalue.re);
    s.push("eigenvalue_im", srb.eigenvalue.im);
    s.push("eigen_residual", eigen_residual(matrix, srb));
    s.push("power_iterations", srb.iterations);
    s.push("srb_hermitian_defect", srb.hermitian_defect);
    density_stats(s, srb, n_fine);
}

fn write_srb_files(out: &Path, srb: &SrbEstimate, n_fine: usize) -> Result<()> {
    let mut w = create(out, SRB_COEFFS)?;
    srb.density.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(out, SRB_GRID)?;
    write_density_grid(&srb.density, n_fine, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Outputs of the optimal-field pipeline, kept for follow-up commands.
pub struct OptimalRun {
    pub matrix: TransferMatrix,
    pub srb: SrbEstimate,
    pub objective: ObjectiveSpec,
    pub optimal: OptimalField,
    pub j: f64,
    pub mean_norm: f64,
}

pub fn run_optimal_pipeline(cfg: &RunConfig) -> Result<OptimalRun> {
    let matrix = build_transfer_matrix(&cfg.map, &cfg.spectral)?;
    let srb = leading_eigenpair(&matrix)?;
    let solver = build_resolvent(&matrix)?;
    let objective = ObjectiveSpec::new(cfg.objective.clone(), &cfg.spectral)?;
    let problem = ResponseProblem::new(&objective, &matrix, &solver, &srb, &cfg.map)?;
    let raw = problem.raw_numerators()?;
    let optimal = optimal_field_from(&raw, cfg.spectral.gamma)?;
    let j = optimal.objective()?;
    let mean_norm = mean_field_norm(&optimal.field, cfg.spectral.n_fine);
    drop(problem);
    Ok(OptimalRun {
        matrix,
        srb,
        objective,
        optimal,
        j,
        mean_norm,
    })
}

fn optimal_entries(s: &mut Summary, run: &OptimalRun) {
    let opt = &run.optimal;
    s.push("objective", run.objective.label());
    s.push("nu", opt.nu);
    s.push("J", run.j);
    s.push("J_minus_nu", run.j - opt.nu);
    s.push("unit_norm_defect", opt.field.sobolev_norm_sq(opt.gamma) - 1.0);
    s.push("mean_field_norm", run.mean_norm);
    s.push("field_hermitian_defect", opt.hermitian_defect);
    s.push("divergence_residue", opt.max_divergence_residue);
    s.push("seconds_per_coefficient", opt.seconds_per_coefficient);
}

pub fn cmd_srb(cfg: &RunConfig, out: &Path) -> Result<Summary> {
    fs::create_dir_all(out)?;
    let start = Instant::now();
    let matrix = build_transfer_matrix(&cfg.map, &cfg.spectral)?;
    let srb = leading_eigenpair(&matrix)?;
    write_srb_files(out, &srb, cfg.spectral.n_fine)?;
    let mut s = base_summary(cfg, "srb");
    srb_entries(&mut s, &matrix, &srb, cfg.spectral.n_fine);
    s.push("wall_time_s", start.elapsed().as_secs_f64());
    write_summary(out, &s)?;
    Ok(s)
}

pub fn cmd_optimal(cfg: &RunConfig, out: &Path) -> Result<Summary> {
    fs::create_dir_all(out)?;
    let start = Instant::now();
    let run = run_optimal_pipeline(cfg)?;
    let mut w = create(out, FIELD_COEFFS)?;
    run.optimal.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(out, FIELD_QUIVER)?;
    write_quiver(&run.optimal.field, cfg.quiver, &mut w)?;
    w.flush()?;
    write_srb_files(out, &run.srb, cfg.spectral.n_fine)?;
    let mut s = base_summary(cfg, "optimal");
    srb_entries(&mut s, &run.matrix, &run.srb, cfg.spectral.n_fine);
    optimal_entries(&mut s, &run);
    s.push("wall_time_s", start.elapsed().as_secs_f64());
    write_summary(out, &s)?;
    Ok(s)
}

pub fn cmd_validate(cfg: &RunConfig, out: &Path) -> Result<Summary> {
    fs::create_dir_all(out)?;
    let start = Instant::now();
    let run = run_optimal_pipeline(cfg)?;
    let mut w = create(out, FIELD_COEFFS)?;
    run.optimal.write_csv(&mut w)?;
    w.flush()?;
    let probe = finite_difference_response(&cfg.map, &run.optimal.field, &run.objective, &cfg.spectral, &cfg.deltas)?;
    let mut w = create(out, PROBE)?;
    probe.write_csv(&mut w)?;
    w.flush()?;
    let report = optimality_spot_check(&run.optimal, cfg.trials, cfg.seed)?;
    let mut s = base_summary(cfg, "validate");
    optimal_entries(&mut s, &run);
    s.push("probe", probe.summary_line(run.j));
    s.push("slope", probe.slope);
    s.push("slope_stderr", probe.slope_stderr);
    s.push("rel_err", probe.relative_error(run.j));
    let mut exps = vec![probe.baseline];
    exps.extend(&probe.expectations);
    s.push("expectation_increasing", exps.windows(2).all(|w| w[1] > w[0]));
    s.push("spot_check_trials", report.trials());
    s.push("spot_check_seed", cfg.seed);
    s.push("spot_check_max_ratio", report.max_ratio().map_or("none".to_string(), |r| r.to_string()));
    s.push("wall_time_s", start.elapsed().as_secs_f64());
    write_summary(out, &s)?;
    Ok(s)
}

pub fn cmd_perturbed_srb(cfg: &RunConfig, out: &Path) -> Result<Summary> {
    let delta = cfg
        .delta
        .ok_or_else(|| Error::config(None, "delta", "perturbed-srb needs --delta or `delta = …`"))?;
    fs::create_dir_all(out)?;
    let start = Instant::now();
    let run = run_optimal_pipeline(cfg)?;
    let perturbed = srb_of_perturbed(&cfg.map, &run.optimal.field, delta, &cfg.spectral)?;
    write_srb_files(out, &perturbed, cfg.spectral.n_fine)?;
    let mut w = create(out, FIELD_COEFFS)?;
    run.optimal.write_csv(&mut w)?;
    w.flush()?;
    let mut s = base_summary(cfg, "perturbed-srb");
    s.push("delta", delta);
    s.push("objective", run.objective.label());
    s.push("mean_field_norm", run.mean_norm);
    s.push("delta_times_mean_norm", delta * run.mean_norm);
    s.push("expectation_base", run.objective.expectation(&run.srb.density));
    s.push("expectation_perturbed", run.objective.expectation(&perturbed.density));
    s.push("eigenvalue_re", perturbed.eigenvalue.re);
    s.push("eigenvalue_im", perturbed.eigenvalue.im);
    density_stats(&mut s, &perturbed, cfg.spectral.n_fine);
    s.push("wall_time_s", start.elapsed().as_secs_f64());
    write_summary(out, &s)?;
    Ok(s)
}

/// Resolves the output directory and loads the config, applying overrides.
pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply(overrides)?;
    Ok(cfg)
}

pub fn default_out() -> PathBuf {
    PathBuf::from(".")
}

//! Run orchestration, output files and convergence studies for the
//! `sphere-fv` command-line tool.

pub mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use sphere_fv::flux::FluxModel;
use sphere_fv::godunov::{run, Scheme, State, StepDiagnostics, StepError, Stepping};
use sphere_fv::grid::{Grid, GridError};
use sphere_fv::testcases::{
    band_l1_error, burgers_exact_averages, confined_model, equatorial_model, init_confined,
    init_equatorial, init_equatorial_exact, init_steady, reference_burgers_1d, steady_model,
    total_mass, u_diff_metric, u_diff_sum, BAND_TOP, SHOCK_TIME,
};
use thiserror::Error;

pub use config::{parse_config, ConfigError, CustomInitial, InitMode, Pairs, RunConfig, TestCase};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("grid: {0}")]
    Grid(#[from] GridError),
    #[error("{0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] StepError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Grid(_) | CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 4,
        }
    }

    fn io(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(CliError::io(path))
}

/// Writes `cell_id,lambda_center,phi_center,area,u`, one row per cell.
/// Floats use the shortest representation that reads back to the same
/// value, so output is exact and reproducible.
pub fn write_field(grid: &Grid, state: &State, path: &Path) -> Result<(), CliError> {
    let mut out = create(path)?;
    write_field_to(grid, state, &mut out)
        .and_then(|_| out.flush())
        .map_err(CliError::io(path))
}

pub fn write_field_to<W: Write>(grid: &Grid, state: &State, out: &mut W) -> io::Result<()> {
    writeln!(out, "cell_id,lambda_center,phi_center,area,u")?;
    for (id, (c, u)) in grid.cells().iter().zip(&state.u).enumerate() {
        writeln!(out, "{},{},{},{},{}", id, c.lambda_center(), c.phi_center(), c.area, u)?;
    }
    Ok(())
}

pub fn write_diagnostics(
    cfg: &RunConfig,
    rows: &[StepDiagnostics],
    summary: &[(String, f64)],
    path: &Path,
) -> Result<(), CliError> {
    let mut out = create(path)?;
    let mut body = || -> io::Result<()> {
        writeln!(
            out,
            "# order={} limiter={} test_case={}",
            cfg.order.as_number(),
            cfg.limiter_name(),
            cfg.test_case
        )?;
        writeln!(out, "step,time,dt,mass,min_u,max_u")?;
        for d in rows {
            writeln!(out, "{},{},{},{},{},{}", d.step, d.time, d.dt, d.mass, d.min_u, d.max_u)?;
        }
        for (k, v) in summary {
            writeln!(out, "# {k}={v}")?;
        }
        out.flush()
    };
    body().map_err(CliError::io(path))
}

pub fn model_for(cfg: &RunConfig) -> FluxModel {
    match cfg.test_case {
        TestCase::Equatorial => equatorial_model(),
        TestCase::Steady => steady_model(),
        TestCase::Confined => confined_model(),
        TestCase::Custom => cfg.custom.as_ref().expect("custom case").model(),
    }
}

pub fn initial_state(cfg: &RunConfig, grid: &Grid) -> State {
    match (cfg.test_case, cfg.init) {
        (TestCase::Equatorial, InitMode::Exact) => init_equatorial_exact(grid),
        (TestCase::Equatorial, InitMode::Sample) => init_equatorial(grid),
        (TestCase::Steady, _) => init_steady(grid),
        (TestCase::Confined, _) => init_confined(grid),
        (TestCase::Custom, _) => {
            let init = cfg.custom.as_ref().expect("custom case").initial;
            let u = grid
                .cells()
                .iter()
                .map(|c| {
                    let x = sphere_fv::geometry::to_cartesian(c.lambda_center(), c.phi_center());
                    match init {
                        CustomInitial::Constant(v) => v,
                        CustomInitial::X1 => x[0],
                        CustomInitial::X2 => x[1],
                        CustomInitial::X3 => x[2],
                        CustomInitial::SinLambda => c.lambda_center().sin(),
                    }
                })
                .collect();
            State { u, time: 0.0 }
        }
    }
}

/// Result of [`execute`].
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub grid: Grid,
    pub initial: State,
    pub state: State,
    pub diagnostics: Vec<StepDiagnostics>,
    /// Scalar results, also appended to the diagnostics file.
    pub summary: Vec<(String, f64)>,
    pub written: Vec<PathBuf>,
}

/// Evolves the configured state to each snapshot time and then to
/// `t_final`, writing every requested output.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let grid = cfg.grid.build()?;
    let model = model_for(cfg);
    let mut scheme = Scheme::new(&grid, &model);
    if !cfg.range_check {
        scheme.range_check = None;
    }
    let initial = initial_state(cfg, &grid);
    let mut state = initial.clone();
    let mut diagnostics = Vec::new();
    let mut written = Vec::new();

    let segments = cfg.snapshots.iter().map(|&t| (t, true)).chain([(cfg.t_final, false)]);
    for (t, snapshot) in segments {
        let offset = diagnostics.len();
        state = run(&scheme, &state, t, cfg.stepping, cfg.order, |d| {
            diagnostics.push(StepDiagnostics { step: d.step + offset, ..*d });
        })?;
        if snapshot {
            let path = PathBuf::from(format!("{}_t{}.csv", cfg.snapshot_prefix, t));
            write_field(&grid, &state, &path)?;
            written.push(path);
        }
    }

    let mass0 = total_mass(&grid, &initial.u);
    let mut summary = vec![
        ("cells".to_string(), grid.n_cells() as f64),
        ("steps".to_string(), diagnostics.len() as f64),
        ("mass_drift".to_string(), total_mass(&grid, &state.u) - mass0),
    ];
    if matches!(cfg.test_case, TestCase::Steady | TestCase::Confined) {
        // both normalizations of the distance to the steady initial field
        let m = u_diff_metric(&grid, &state, &initial).expect("same grid");
        let raw = u_diff_sum(&grid, &state.u, &initial.u).expect("same grid");
        summary.push(("u_diff".to_string(), m.value));
        summary.push(("u_diff_sum".to_string(), raw));
    }

    if let Some(p) = &cfg.field_output {
        let path = PathBuf::from(p);
        write_field(&grid, &state, &path)?;
        written.push(path);
    }
    if let Some(p) = &cfg.diagnostics_output {
        let path = PathBuf::from(p);
        write_diagnostics(cfg, &diagnostics, &summary, &path)?;
        written.push(path);
    }
    Ok(RunOutcome {
        grid,
        initial,
        state,
        diagnostics,
        summary,
        written,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub factor: usize,
    pub n_lat: usize,
    pub n_lon_equator: usize,
    pub error: f64,
    /// Observed order against the previous row.
    pub order: Option<f64>,
}

/// Runs `base` at each refinement factor and measures the L1 error.
///
/// The equatorial case refines only the longitude count and compares the
/// band against the 1D Burgers solution. Other cases refine both counts
/// and use the finest run as reference, so the finest row is omitted.
/// A fixed time step is divided by the factor.
pub fn convergence_study(base: &RunConfig, refinements: &[usize]) -> Result<Vec<ConvergenceRow>, CliError> {
    if refinements.len() < 2 {
        return Err(CliError::Usage("convergence study needs at least 2 refinements".into()));
    }
    if refinements[0] == 0 || refinements.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Usage("refinement factors must be positive and increasing".into()));
    }
    let equatorial = base.test_case == TestCase::Equatorial;

    let mut runs = Vec::with_capacity(refinements.len());
    for &k in refinements {
        let mut cfg = base.clone();
        cfg.grid.n_lon_equator *= k;
        if !equatorial {
            cfg.grid.n_lat *= k;
        }
        if let Stepping::Fixed(dt) = cfg.stepping {
            cfg.stepping = Stepping::Fixed(dt / k as f64);
        }
        cfg.snapshots.clear();
        cfg.field_output = None;
        cfg.diagnostics_output = None;
        let out = execute(&cfg)?;
        runs.push((k, cfg, out));
    }

    let mut errors = Vec::new();
    if equatorial {
        for (_, _, out) in &runs {
            let band = out
                .grid
                .bands()
                .iter()
                .find(|b| b.phi1 >= -1e-14 && b.phi2 <= BAND_TOP + 1e-14)
                .ok_or_else(|| CliError::Usage("grid has no band inside the equatorial strip".into()))?;
            let n = band.n_cells;
            let reference = if base.t_final <= SHOCK_TIME {
                burgers_exact_averages(n, base.t_final)
            } else {
                reference_burgers_1d(n, base.t_final)
            };
            errors.push(band_l1_error(&out.grid, &out.state.u, &reference).value);
        }
    } else {
        let (_, _, finest) = runs.last().expect("at least two runs");
        for (_, _, out) in &runs[..runs.len() - 1] {
            let reference = project(&finest.grid, &finest.state.u, &out.grid);
            let mut err = 0.0;
            for (c, (u, r)) in out.grid.cells().iter().zip(out.state.u.iter().zip(&reference)) {
                err += c.area * (u - r).abs();
            }
            errors.push(err / out.grid.total_area());
        }
    }

    let mut rows = Vec::new();
    for (i, err) in errors.iter().enumerate() {
        let (k, cfg, _) = &runs[i];
        let order = (i > 0).then(|| {
            let ratio = *k as f64 / runs[i - 1].0 as f64;
            (errors[i - 1] / err).ln() / ratio.ln()
        });
        rows.push(ConvergenceRow {
            factor: *k,
            n_lat: cfg.grid.n_lat,
            n_lon_equator: cfg.grid.n_lon_equator,
            error: *err,
            order,
        });
    }
    Ok(rows)
}

/// Area-weighted averages of the `fine` cells whose centres fall in each
/// cell of `coarse`.
fn project(fine: &Grid, u: &[f64], coarse: &Grid) -> Vec<f64> {
    // offsets from the first value keep equal values exact
    let mut base: Vec<Option<f64>> = vec![None; coarse.n_cells()];
    let mut excess = vec![0.0; coarse.n_cells()];
    let mut area = vec![0.0; coarse.n_cells()];
    for (c, &v) in fine.cells().iter().zip(u) {
        let id = coarse.locate(c.lambda_center(), c.phi_center());
        let b = *base[id].get_or_insert(v);
        excess[id] += c.area * (v - b);
        area[id] += c.area;
    }
    (0..coarse.n_cells())
        .map(|i| base[i].map_or(0.0, |b| b + excess[i] / area[i]))
        .collect()
}

pub fn write_convergence<W: Write>(rows: &[ConvergenceRow], out: &mut W) -> io::Result<()> {
    writeln!(out, "factor,n_lat,n_lon_equator,l1_error,order")?;
    for r in rows {
        let order = r.order.map(|o| o.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{},{}", r.factor, r.n_lat, r.n_lon_equator, r.error, order)?;
    }
    Ok(())
}

/// Writes `cell,lambda_center,u` for the 1D periodic Burgers reference.
pub fn write_burgers_oracle(n_cells: usize, t: f64, path: &Path) -> Result<(), CliError> {
    if n_cells == 0 {
        return Err(CliError::Usage("n-cells must be positive".into()));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(CliError::Usage("t must be non-negative".into()));
    }
    let u = if t <= SHOCK_TIME {
        burgers_exact_averages(n_cells, t)
    } else {
        reference_burgers_1d(n_cells, t)
    };
    let dx = std::f64::consts::TAU / n_cells as f64;
    let mut out = create(path)?;
    let mut body = || -> io::Result<()> {
        writeln!(out, "cell,lambda_center,u")?;
        for (i, v) in u.iter().enumerate() {
            writeln!(out, "{},{},{}", i, (i as f64 + 0.5) * dx, v)?;
        }
        out.flush()
    };
    body().map_err(CliError::io(path))
}

//! Ground-truth generators for the benchmark problems: the 1D wave equation
//! (closed form), the 2D heat equation (explicit 5-point stencil), and the 2D
//! inviscid Burgers system (first-order upwind).

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{FieldSeries, FieldSnapshot, GridSpec, Matrix};

/// Squared wave speed `c = 1/(16π²)` of the wave benchmark.
pub const WAVE_C: f64 = 1.0 / (16.0 * PI * PI);

/// Tolerance on the stability ratio below which a ratio is treated as
/// sitting exactly on the bound.
const MARGIN_TOL: f64 = 1e-12;

/// Which instants the columns of a generated series sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeOrigin {
    /// Column `n` holds `t = (n + 1)·dt`; the initial state is excluded.
    #[default]
    AfterInitial,
    /// Column `n` holds `t = n·dt`.
    AtInitial,
}

impl TimeOrigin {
    pub fn time(self, n: usize, dt: f64) -> f64 {
        match self {
            TimeOrigin::AfterInitial => (n + 1) as f64 * dt,
            TimeOrigin::AtInitial => n as f64 * dt,
        }
    }
}

/// `u(x, t) = ½(sin(4πx + t) + sin(4πx − t))`.
pub fn wave_solution(x: f64, t: f64) -> f64 {
    0.5 * ((4.0 * PI * x + t).sin() + (4.0 * PI * x - t).sin())
}

/// Samples the closed-form wave solution on a 1D grid, one column per step
/// starting at `t = dt`.
pub fn wave_exact(grid: &GridSpec) -> Result<FieldSeries> {
    wave_exact_with(grid, TimeOrigin::AfterInitial)
}

pub fn wave_exact_with(grid: &GridSpec, origin: TimeOrigin) -> Result<FieldSeries> {
    if grid.is_2d() {
        return Err(Error::InvalidParameter(
            "the wave benchmark is one-dimensional; got a 2D grid".into(),
        ));
    }
    grid.validate_stencil()?;
    let data = Matrix::from_fn(grid.nx, grid.n_steps, |i, n| {
        wave_solution(grid.x(i), origin.time(n, grid.dt))
    });
    FieldSeries::new(*grid, vec!["u".into()], data)
}

/// Physics whose explicit stability bound [`cfl_check`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CflMode {
    Diffusion { alpha: f64 },
    Advection { max_u: f64, max_v: f64 },
}

/// Outcome of a stability check. `ratio <= 1` passes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CflReport {
    pub ratio: f64,
    pub passed: bool,
    /// The ratio equals 1 to within rounding: stable, but with no margin.
    pub at_margin: bool,
}

/// Normalized stability ratio of an explicit step: `α·dt·(1/dx² + 1/dy²)/½`
/// for diffusion, `dt·(|u|/dx + |v|/dy)` for advection. The `y` terms are
/// dropped on 1D grids.
pub fn cfl_check(grid: &GridSpec, mode: CflMode) -> CflReport {
    let dx = grid.dx();
    let dy = grid.dy();
    let two_d = grid.is_2d();
    let ratio = match mode {
        CflMode::Diffusion { alpha } => {
            let mut inv = 1.0 / (dx * dx);
            if two_d {
                inv += 1.0 / (dy * dy);
            }
            alpha * grid.dt * inv / 0.5
        }
        CflMode::Advection { max_u, max_v } => {
            let mut s = max_u.abs() / dx;
            if two_d {
                s += max_v.abs() / dy;
            }
            grid.dt * s
        }
    };
    let at_margin = (ratio - 1.0).abs() <= MARGIN_TOL;
    CflReport {
        ratio,
        passed: ratio <= 1.0 || at_margin,
        at_margin,
    }
}

fn require_2d(grid: &GridSpec, what: &str) -> Result<()> {
    if !grid.is_2d() {
        return Err(Error::InvalidParameter(format!("{what} needs a 2D grid")));
    }
    grid.validate_stencil()
}

fn require_matches(snap: &FieldSnapshot, grid: &GridSpec) -> Result<()> {
    if !snap.matches(grid) {
        return Err(Error::shape(
            "snapshot vs grid",
            format!("{}x{}", grid.nx, grid.ny_eff()),
            format!("{}x{}", snap.nx(), snap.ny()),
        ));
    }
    snap.check_finite()
}

/// Initial temperature of the heat benchmark: 0.9 inside the disc of radius
/// ½ centred at (1, 1), 0.1 elsewhere.
pub fn heat_initial_condition(grid: &GridSpec) -> FieldSnapshot {
    FieldSnapshot::from_fn(grid, "u", |x, y| {
        if (x - 1.0).powi(2) + (y - 1.0).powi(2) < 0.25 {
            0.9
        } else {
            0.1
        }
    })
}

/// One explicit Euler step of `u_t = α(u_xx + u_yy)` with central second
/// differences. Boundary values are held fixed.
pub fn heat_step_2d(u: &FieldSnapshot, grid: &GridSpec, alpha: f64) -> Result<FieldSnapshot> {
    require_2d(grid, "heat_step_2d")?;
    require_matches(u, grid)?;
    let report = cfl_check(grid, CflMode::Diffusion { alpha });
    if !report.passed {
        return Err(Error::Stability {
            scheme: "explicit heat",
            ratio: report.ratio,
        });
    }
    let mut next = u.clone();
    heat_kernel(u, &mut next, grid, alpha);
    Ok(next)
}

fn heat_kernel(u: &FieldSnapshot, next: &mut FieldSnapshot, grid: &GridSpec, alpha: f64) {
    let rx = alpha * grid.dt / (grid.dx() * grid.dx());
    let ry = alpha * grid.dt / (grid.dy() * grid.dy());
    for i in 1..grid.nx - 1 {
        for j in 1..grid.ny - 1 {
            let c = u.get(i, j);
            let lap_x = u.get(i + 1, j) - 2.0 * c + u.get(i - 1, j);
            let lap_y = u.get(i, j + 1) - 2.0 * c + u.get(i, j - 1);
            next.set(i, j, c + rx * lap_x + ry * lap_y);
        }
    }
}

/// Runs `grid.n_steps` heat steps from `ic`; column `n` is the state after
/// step `n + 1`.
pub fn solve_heat_2d(ic: &FieldSnapshot, grid: &GridSpec, alpha: f64) -> Result<FieldSeries> {
    // Validates the grid, the snapshot, and the stability bound once.
    let mut cur = heat_step_2d(ic, grid, alpha)?;
    let k = grid.num_points();
    let mut data = Matrix::zeros(k, grid.n_steps);
    let mut scratch = cur.clone();
    for n in 0..grid.n_steps {
        if n > 0 {
            heat_kernel(&cur, &mut scratch, grid, alpha);
            std::mem::swap(&mut cur, &mut scratch);
        }
        for (p, &v) in cur.values().iter().enumerate() {
            data.set(p, n, v);
        }
    }
    FieldSeries::new(*grid, vec!["u".into()], data)
}

/// Form of the second Burgers equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BurgersForm {
    /// `v_t + u·v_x + v·v_y = 0`.
    #[default]
    Coupled,
    /// `v_t + u·u_x + v·u_y = 0`, i.e. both components share the
    /// u-transport increment.
    AsWritten,
}

/// Upwind derivative along one axis: backward difference for positive
/// speed, forward difference otherwise.
#[inline]
fn upwind(speed: f64, minus: f64, centre: f64, plus: f64, h: f64) -> f64 {
    if speed > 0.0 {
        (centre - minus) / h
    } else {
        (plus - centre) / h
    }
}

/// One first-order upwind step of the inviscid Burgers system. All boundary
/// values are held at zero.
pub fn burgers_step_2d(
    u: &FieldSnapshot,
    v: &FieldSnapshot,
    grid: &GridSpec,
    form: BurgersForm,
) -> Result<(FieldSnapshot, FieldSnapshot)> {
    require_2d(grid, "burgers_step_2d")?;
    if u.nx() != v.nx() || u.ny() != v.ny() {
        return Err(Error::shape(
            "burgers_step_2d: u vs v",
            format!("{}x{}", u.nx(), u.ny()),
            format!("{}x{}", v.nx(), v.ny()),
        ));
    }
    require_matches(u, grid)?;
    require_matches(v, grid)?;
    let report = cfl_check(
        grid,
        CflMode::Advection {
            max_u: u.max_abs(),
            max_v: v.max_abs(),
        },
    );
    if !report.passed {
        return Err(Error::Stability {
            scheme: "upwind Burgers",
            ratio: report.ratio,
        });
    }
    let mut un = FieldSnapshot::filled(grid, 0.0, u.variable_name.clone());
    let mut vn = FieldSnapshot::filled(grid, 0.0, v.variable_name.clone());
    let (dx, dy, dt) = (grid.dx(), grid.dy(), grid.dt);
    for i in 1..grid.nx - 1 {
        for j in 1..grid.ny - 1 {
            let a = u.get(i, j);
            let b = v.get(i, j);
            let ux = upwind(a, u.get(i - 1, j), a, u.get(i + 1, j), dx);
            let uy = upwind(b, u.get(i, j - 1), a, u.get(i, j + 1), dy);
            let du = a * ux + b * uy;
            un.set(i, j, a - dt * du);
            let dv = match form {
                BurgersForm::Coupled => {
                    let vx = upwind(a, v.get(i - 1, j), b, v.get(i + 1, j), dx);
                    let vy = upwind(b, v.get(i, j - 1), b, v.get(i, j + 1), dy);
                    a * vx + b * vy
                }
                BurgersForm::AsWritten => du,
            };
            vn.set(i, j, b - dt * dv);
        }
    }
    Ok((un, vn))
}

/// Initial velocity of the Burgers benchmark: `u = 0.9`, `v = 0.5` on the
/// closed square `[0.25, 0.75]²`, zero elsewhere.
pub fn burgers_initial_condition(grid: &GridSpec) -> (FieldSnapshot, FieldSnapshot) {
    const EPS: f64 = 1e-9;
    let inside = |x: f64, y: f64| {
        (0.25 - EPS..=0.75 + EPS).contains(&x) && (0.25 - EPS..=0.75 + EPS).contains(&y)
    };
    let mut u = FieldSnapshot::from_fn(grid, "u", |x, y| if inside(x, y) { 0.9 } else { 0.0 });
    let mut v = FieldSnapshot::from_fn(grid, "v", |x, y| if inside(x, y) { 0.5 } else { 0.0 });
    // Zero boundary, even if the patch touches it on a coarse grid.
    for snap in [&mut u, &mut v] {
        for i in 0..grid.nx {
            for j in 0..grid.ny {
                if i == 0 || j == 0 || i == grid.nx - 1 || j == grid.ny - 1 {
                    snap.set(i, j, 0.0);
                }
            }
        }
    }
    (u, v)
}

/// Runs the Burgers benchmark; the series stacks the `u` block over the `v`
/// block, column `n` being the state after step `n + 1`.
pub fn solve_burgers_2d(grid: &GridSpec, form: BurgersForm) -> Result<FieldSeries> {
    require_2d(grid, "solve_burgers_2d")?;
    let (mut u, mut v) = burgers_initial_condition(grid);
    let k = grid.num_points();
    let mut data = Matrix::zeros(2 * k, grid.n_steps);
    for n in 0..grid.n_steps {
        let (un, vn) = burgers_step_2d(&u, &v, grid, form)?;
        u = un;
        v = vn;
        for p in 0..k {
            data.set(p, n, u.values()[p]);
            data.set(k + p, n, v.values()[p]);
        }
    }
    FieldSeries::new(*grid, vec!["u".into(), "v".into()], data)
}

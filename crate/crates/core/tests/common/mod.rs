//! Oracles and randomized checks shared by the integration test targets.
#![allow(dead_code)]

use std::f64::consts::PI;

use neural_pde::solvers::{
    burgers_initial_condition, burgers_step_2d, heat_step_2d, wave_exact, BurgersForm, WAVE_C,
};
use neural_pde::{FieldSnapshot, GridSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn plane(nx: usize, ny: usize, lx: f64, ly: f64, dt: f64, n_steps: usize) -> GridSpec {
    GridSpec {
        x_min: 0.0,
        x_max: lx,
        nx,
        y_min: 0.0,
        y_max: ly,
        ny,
        dt,
        n_steps,
    }
}

fn random_grid(rng: &mut ChaCha8Rng) -> GridSpec {
    let nx = rng.random_range(3..=14);
    let ny = rng.random_range(3..=14);
    let lx = rng.random_range(0.5..3.0);
    let ly = rng.random_range(0.5..3.0);
    plane(nx, ny, lx, ly, 1.0, 1)
}

fn random_field(rng: &mut ChaCha8Rng, grid: &GridSpec, lo: f64, hi: f64, name: &str) -> FieldSnapshot {
    let values = (0..grid.num_points()).map(|_| rng.random_range(lo..hi)).collect();
    FieldSnapshot::new(grid.nx, grid.ny, values, name).unwrap()
}

/// Largest amount by which any explicit heat update leaves the range of its
/// five stencil inputs, over `trials` random grids, fields, and stable steps
/// (the last tenth of them exactly at the stability bound).
pub fn heat_max_principle_violation(trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for trial in 0..trials {
        let mut grid = random_grid(&mut rng);
        let alpha = rng.random_range(0.1..2.0);
        let bound = 0.5 / (alpha * (1.0 / grid.dx().powi(2) + 1.0 / grid.dy().powi(2)));
        let frac = if trial % 10 == 9 { 1.0 } else { rng.random_range(0.01..1.0) };
        grid.dt = bound * frac;
        let u = random_field(&mut rng, &grid, 0.0, 1.0, "u");
        let next = heat_step_2d(&u, &grid, alpha).unwrap();
        for i in 0..grid.nx {
            for j in 0..grid.ny {
                let mut lo = u.get(i, j);
                let mut hi = lo;
                if i > 0 && j > 0 && i + 1 < grid.nx && j + 1 < grid.ny {
                    for (a, b) in [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)] {
                        lo = lo.min(u.get(a, b));
                        hi = hi.max(u.get(a, b));
                    }
                }
                let v = next.get(i, j);
                worst = worst.max(lo - v).max(v - hi);
            }
        }
    }
    worst
}

/// Total variation of every grid line: x-lines first, then y-lines.
pub fn line_variations(s: &FieldSnapshot) -> Vec<f64> {
    let (nx, ny) = (s.nx(), s.ny());
    let along_x = (0..ny).map(|j| (0..nx - 1).map(|i| (s.get(i + 1, j) - s.get(i, j)).abs()).sum());
    let along_y = (0..nx).map(|i| (0..ny - 1).map(|j| (s.get(i, j + 1) - s.get(i, j)).abs()).sum());
    along_x.chain(along_y).collect()
}

fn line_growth(before: &FieldSnapshot, after: &FieldSnapshot) -> f64 {
    line_variations(before)
        .iter()
        .zip(line_variations(after))
        .map(|(b, a)| a - b)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest increase in the total variation of any grid line, over `steps`
/// randomly chosen steps of the benchmark Burgers problem on random grids
/// and stable time steps.
pub fn burgers_tv_increase(steps: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut checked = 0;
    while checked < steps {
        let nx = rng.random_range(6..=40);
        let ny = rng.random_range(6..=40);
        let mut grid = plane(nx, ny, 1.0, 1.0, 1.0, 1);
        grid.dt = rng.random_range(0.05..=1.0) / (0.9 / grid.dx() + 0.5 / grid.dy());
        let (mut u, mut v) = burgers_initial_condition(&grid);
        // Skip ahead a random distance, then check a run of steps.
        let skip = rng.random_range(0..400);
        let run = rng.random_range(1..=40).min(steps - checked);
        for n in 0..skip + run {
            let (un, vn) = burgers_step_2d(&u, &v, &grid, BurgersForm::Coupled).unwrap();
            if n >= skip {
                worst = worst.max(line_growth(&u, &un)).max(line_growth(&v, &vn));
                checked += 1;
            }
            u = un;
            v = vn;
        }
    }
    worst
}

/// Largest x-line total variation increase over `trials` random steps with
/// `v = 0` and random non-negative `u`, where each x-line evolves by the
/// one-dimensional upwind scheme.
pub fn burgers_tv_increase_1d(trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let mut grid = random_grid(&mut rng);
        let u = zero_boundary(random_field(&mut rng, &grid, 0.0, 1.0, "u"), &grid);
        let v = FieldSnapshot::filled(&grid, 0.0, "v");
        grid.dt = rng.random_range(0.01..=1.0) * grid.dx() / u.max_abs().max(1e-12);
        let (un, _) = burgers_step_2d(&u, &v, &grid, BurgersForm::Coupled).unwrap();
        let k = grid.ny;
        let growth = line_variations(&u)[..k]
            .iter()
            .zip(&line_variations(&un)[..k])
            .map(|(b, a)| a - b)
            .fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(growth);
    }
    worst
}

fn zero_boundary(mut s: FieldSnapshot, grid: &GridSpec) -> FieldSnapshot {
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            if i == 0 || j == 0 || i + 1 == grid.nx || j + 1 == grid.ny {
                s.set(i, j, 0.0);
            }
        }
    }
    s
}

/// Largest `|u_tt − c·u_xx|` of the closed-form wave solution, with both
/// derivatives taken analytically, over a 101 × 2000 sample of the domain.
pub fn wave_analytic_residual() -> f64 {
    let k = 4.0 * PI;
    let mut worst: f64 = 0.0;
    for i in 0..=100 {
        let x = i as f64 * 0.01;
        for n in 1..=2000 {
            let t = n as f64 * 1e-3;
            // u = ½(sin(kx + t) + sin(kx − t))
            let u_tt = -0.5 * ((k * x + t).sin() + (k * x - t).sin());
            let u_xx = -0.5 * k * k * ((k * x + t).sin() + (k * x - t).sin());
            worst = worst.max((u_tt - WAVE_C * u_xx).abs());
        }
    }
    worst
}

/// Largest centred-difference residual `|δ_tt u − c·δ_xx u|` of the sampled
/// wave series with `nx` points on [0, 1].
pub fn wave_fd_residual(nx: usize, dt: f64, n_steps: usize) -> f64 {
    let grid = GridSpec {
        x_min: 0.0,
        x_max: 1.0,
        nx,
        y_min: 0.0,
        y_max: 0.0,
        ny: 0,
        dt,
        n_steps,
    };
    let s = wave_exact(&grid).unwrap();
    let (dx, d) = (grid.dx(), &s.data);
    let mut worst: f64 = 0.0;
    for i in 1..nx - 1 {
        for n in 1..n_steps - 1 {
            let u_tt = (d.get(i, n + 1) - 2.0 * d.get(i, n) + d.get(i, n - 1)) / (dt * dt);
            let u_xx = (d.get(i + 1, n) - 2.0 * d.get(i, n) + d.get(i - 1, n)) / (dx * dx);
            worst = worst.max((u_tt - WAVE_C * u_xx).abs());
        }
    }
    worst
}

/// Max-norm error of the explicit heat scheme after `steps` steps of
/// `dt` on an `n × n` grid of [0, 2]², against the separable exact solution
/// `0.1 + 0.8·exp(−π²t/2)·sin(πx/2)·sin(πy/2)`.
pub fn heat_error(n: usize, dt: f64, steps: usize) -> f64 {
    let grid = plane(n, n, 2.0, 2.0, dt, steps);
    let exact = |x: f64, y: f64, t: f64| {
        0.1 + 0.8 * (-PI * PI * t / 2.0).exp() * (PI * x / 2.0).sin() * (PI * y / 2.0).sin()
    };
    let mut u = FieldSnapshot::from_fn(&grid, "u", |x, y| exact(x, y, 0.0));
    for _ in 0..steps {
        u = heat_step_2d(&u, &grid, 1.0).unwrap();
    }
    let t_end = steps as f64 * dt;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((u.get(i, j) - exact(grid.x(i), grid.y(j), t_end)).abs());
        }
    }
    worst
}

/// Observed convergence order when `dx` is halved and `dt` quartered, from
/// an `n`-point grid run for `steps` steps at `dt = 0.2·dx²`.
pub fn heat_richardson_order(n: usize, steps: usize) -> f64 {
    let dx = 2.0 / (n - 1) as f64;
    let dt = 0.2 * dx * dx;
    (heat_error(n, dt, steps) / heat_error(2 * n - 1, dt / 4.0, 4 * steps)).log2()
}

/// Second, independently written upwind Burgers step over flat row-major
/// arrays: forward and backward differences are tabulated first and then
/// selected by the sign of the local velocity.
pub fn burgers_reference_step(
    u: &[f64],
    v: &[f64],
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    dt: f64,
) -> (Vec<f64>, Vec<f64>) {
    let idx = |i: usize, j: usize| i * ny + j;
    let diffs = |f: &[f64]| {
        let mut bx = vec![0.0; nx * ny];
        let mut fx = vec![0.0; nx * ny];
        let mut by = vec![0.0; nx * ny];
        let mut fy = vec![0.0; nx * ny];
        for i in 1..nx - 1 {
            for j in 1..ny - 1 {
                let c = f[idx(i, j)];
                bx[idx(i, j)] = (c - f[idx(i - 1, j)]) / dx;
                fx[idx(i, j)] = (f[idx(i + 1, j)] - c) / dx;
                by[idx(i, j)] = (c - f[idx(i, j - 1)]) / dy;
                fy[idx(i, j)] = (f[idx(i, j + 1)] - c) / dy;
            }
        }
        (bx, fx, by, fy)
    };
    let (ubx, ufx, uby, ufy) = diffs(u);
    let (vbx, vfx, vby, vfy) = diffs(v);
    let mut un = vec![0.0; nx * ny];
    let mut vn = vec![0.0; nx * ny];
    for i in 1..nx - 1 {
        for j in 1..ny - 1 {
            let p = idx(i, j);
            let (a, b) = (u[p], v[p]);
            let (sx_u, sx_v) = if a > 0.0 { (ubx[p], vbx[p]) } else { (ufx[p], vfx[p]) };
            let (sy_u, sy_v) = if b > 0.0 { (uby[p], vby[p]) } else { (ufy[p], vfy[p]) };
            un[p] = a - dt * (a * sx_u + b * sy_u);
            vn[p] = b - dt * (a * sx_v + b * sy_v);
        }
    }
    (un, vn)
}

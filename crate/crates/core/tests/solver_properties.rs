mod common;

use common::*;
use neural_pde::experiment::Benchmark;
use neural_pde::pipeline::flatten_2d;
use neural_pde::solvers::{
    burgers_initial_condition, burgers_step_2d, solve_burgers_2d, BurgersForm,
};

#[test]
fn heat_step_respects_discrete_maximum_principle() {
    let worst = heat_max_principle_violation(1000, 11);
    assert!(worst <= 1e-15, "stencil range exceeded by {worst:e}");
}

#[test]
fn upwind_burgers_does_not_increase_line_total_variation() {
    let worst = burgers_tv_increase(1000, 12);
    assert!(worst <= 1e-12, "total variation grew by {worst:e}");
}

#[test]
fn one_dimensional_upwind_is_tvd_for_arbitrary_data() {
    let worst = burgers_tv_increase_1d(1000, 13);
    assert!(worst <= 1e-12, "total variation grew by {worst:e}");
}

#[test]
fn wave_solution_satisfies_the_pde() {
    assert!(wave_analytic_residual() < 1e-6);
}

#[test]
fn wave_samples_have_second_order_difference_residual() {
    let coarse = wave_fd_residual(101, 1e-3, 200);
    let fine = wave_fd_residual(201, 1e-3, 200);
    // Leading term: (4π·dx)²/12 for unit amplitude.
    assert!(coarse < 1.5e-3, "{coarse:e}");
    let ratio = coarse / fine;
    assert!((3.6..4.4).contains(&ratio), "ratio {ratio}");
}

#[test]
fn heat_scheme_is_second_order_in_space() {
    let order = heat_richardson_order(11, 6);
    assert!(order >= 1.9, "observed order {order}");
    let finer = heat_richardson_order(21, 24);
    assert!(finer >= 1.9, "observed order {finer}");
}

#[test]
fn burgers_matches_independent_implementation_bitwise() {
    let mut grid = Benchmark::Burgers2d.reduced_grid();
    grid.n_steps = 1000;
    let series = solve_burgers_2d(&grid, BurgersForm::Coupled).unwrap();
    let (u0, v0) = burgers_initial_condition(&grid);
    let (mut u, mut v) = (flatten_2d(&u0), flatten_2d(&v0));
    let k = grid.num_points();
    for n in 0..grid.n_steps {
        (u, v) = burgers_reference_step(&u, &v, grid.nx, grid.ny, grid.dx(), grid.dy(), grid.dt);
        for p in 0..k {
            assert_eq!(series.data.get(p, n).to_bits(), u[p].to_bits(), "u at step {n}, point {p}");
            assert_eq!(series.data.get(k + p, n).to_bits(), v[p].to_bits(), "v at step {n}, point {p}");
        }
    }
}

#[test]
fn burgers_benchmark_stays_within_initial_bounds() {
    let mut grid = Benchmark::Burgers2d.reduced_grid();
    grid.n_steps = 1000;
    let s = solve_burgers_2d(&grid, BurgersForm::Coupled).unwrap();
    let k = grid.num_points();
    for r in 0..2 * k {
        let cap = if r < k { 0.9 } else { 0.5 };
        for &x in s.data.row(r) {
            assert!((-1e-12..=cap + 1e-12).contains(&x));
        }
    }
}

#[test]
fn as_written_form_moves_both_components_by_the_u_increment() {
    let grid = Benchmark::Burgers2d.reduced_grid();
    let (u, v) = burgers_initial_condition(&grid);
    let (un, vn) = burgers_step_2d(&u, &v, &grid, BurgersForm::AsWritten).unwrap();
    for i in 1..grid.nx - 1 {
        for j in 1..grid.ny - 1 {
            let du = un.get(i, j) - u.get(i, j);
            let dv = vn.get(i, j) - v.get(i, j);
            assert!((du - dv).abs() < 1e-15);
        }
    }
}

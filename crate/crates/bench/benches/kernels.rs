use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use lightcone_core::linearized::{cfl_limit, step_linear, zero_background_coeffs, C_CFL};
use lightcone_core::spectral::{assemble_operator, default_a2, eigenvalues, newton_polygon};
use lightcone_core::{Complex64, FieldState, FrobeniusSeries, RadialGrid, SmoothingOp};

fn bump(grid: &RadialGrid) -> Vec<f64> {
  grid.sample(|r| (-40.0 * (r - 0.25) * (r - 0.25)).exp())
}

fn linear_step(c: &mut Criterion) {
  let mut g = c.benchmark_group("step_linear");
  for n in [100, 400, 1600] {
    let grid = RadialGrid::new(0.5, n).unwrap();
    let coeffs = zero_background_coeffs(&grid, 0.95);
    let dt = cfl_limit(&grid, &coeffs, C_CFL);
    let state = FieldState::new(bump(&grid), vec![0.0; n], 0.0).unwrap();
    g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
      b.iter(|| step_linear(&grid, black_box(&state), &coeffs, None, dt).unwrap())
    });
  }
  g.finish();
}

fn thomas_solve(c: &mut Criterion) {
  let mut g = c.benchmark_group("tridiagonal_solve");
  for n in [100, 1000, 10000] {
    let grid = RadialGrid::new(0.5, n).unwrap();
    let mut t = grid.d2().scaled(&vec![-1.0; n]);
    t.add_diagonal(&vec![1.0; n]);
    let rhs = bump(&grid);
    g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| t.solve(black_box(&rhs))));
  }
  g.finish();
}

fn frobenius(c: &mut Criterion) {
  let nu = Complex64::new(-0.97, 0.0);
  let seeds = (Complex64::new(1.0, 0.0), default_a2(nu, 0.95), Complex64::new(1.0, 0.0));
  c.bench_function("frobenius_series_2000", |b| {
    b.iter(|| FrobeniusSeries::new(black_box(nu), 0.95, seeds, 2000).unwrap())
  });
}

fn spectrum(c: &mut Criterion) {
  let mut g = c.benchmark_group("operator_eigenvalues");
  g.sample_size(10);
  for n in [50, 100, 200] {
    let ops = assemble_operator(&RadialGrid::new(0.5, n).unwrap(), 0.95).unwrap();
    g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| eigenvalues(black_box(&ops.a)).unwrap()));
  }
  g.finish();
}

fn smoothing(c: &mut Criterion) {
  let n = 400;
  let grid = RadialGrid::new(0.5, n).unwrap();
  let s = SmoothingOp::new(16.0, n).unwrap();
  let v = bump(&grid);
  c.bench_function("smoothing_apply_400", |b| b.iter(|| s.apply(black_box(&v)).unwrap()));
}

fn polygon(c: &mut Criterion) {
  let pts: Vec<[f64; 2]> = (0..200).map(|i| [(i * 37 % 101) as f64, (i * 53 % 97) as f64]).collect();
  c.bench_function("newton_polygon_200", |b| b.iter(|| newton_polygon(black_box(&pts))));
}

criterion_group!(kernels, linear_step, thomas_solve, frobenius, spectrum, smoothing, polygon);
criterion_main!(kernels);

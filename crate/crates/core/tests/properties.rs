//! Randomized invariants for the periodic eigenproblem, field evaluation,
//! config round trips, and front tracking.

use std::f64::consts::E;

use proptest::prelude::*;

use idefront::dynamics::{track_front, Simulator};
use idefront::eigen::{assemble, principal_eigen, Direction};
use idefront::grid::{Grid, PeriodicField};
use idefront::habitat::{
    build_problem, piecewise_two_patch, BoundaryKind, Config, FieldSpec, GridSpec, Habitat,
    HabitatSpec, KernelSpec, KernelsSpec, RunSpec,
};
use idefront::kernel::Kernel;

fn period_grid() -> Grid {
    Grid::new(10.0, 64, 2).unwrap()
}

fn kernel_for(choice: bool, param: f64) -> Kernel {
    if choice {
        Kernel::gaussian(0.05 + 0.35 * param).unwrap()
    } else {
        Kernel::laplace(0.3 + 0.5 * param).unwrap()
    }
}

fn lambda_at(m: &PeriodicField, kernel: &Kernel, grid: &Grid, mu: f64, dir: Direction) -> f64 {
    principal_eigen(&assemble(m, kernel, grid, mu, dir).unwrap()).unwrap().lambda
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// A pointwise larger growth multiplier has a strictly larger principal
    /// eigenvalue.
    #[test]
    fn eigenvalue_monotone_in_multiplier(
        breakpoint in 0.15f64..0.85,
        v1 in 1.2f64..3.0,
        v2 in 1.2f64..3.0,
        shrink in 0.5f64..0.95,
        kernel_choice in any::<bool>(),
        kernel_param in 0.0f64..1.0,
        mu_frac in 0.0f64..0.9,
    ) {
        let grid = period_grid();
        let kernel = kernel_for(kernel_choice, kernel_param);
        let mu = mu_frac * kernel.abscissa().min(2.0) * 0.7;
        let m = piecewise_two_patch(&grid, breakpoint * grid.length, v1, v2).unwrap();
        let smaller = m.map(|v| v * shrink);
        let big = lambda_at(&m, &kernel, &grid, mu, Direction::Rightward);
        let small = lambda_at(&smaller, &kernel, &grid, mu, Direction::Rightward);
        prop_assert!(big > small, "lambda {big} not above {small}");
    }

    /// `ln lambda(mu)` is convex in the weight: nonnegative second divided
    /// differences on an arbitrary uniform grid.
    #[test]
    fn log_eigenvalue_convex_in_weight(
        breakpoint in 0.15f64..0.85,
        v1 in 1.2f64..3.0,
        v2 in 1.2f64..3.0,
        kernel_choice in any::<bool>(),
        kernel_param in 0.0f64..1.0,
        base_frac in 0.01f64..0.2,
        span_frac in 0.3f64..0.9,
    ) {
        let grid = period_grid();
        let kernel = kernel_for(kernel_choice, kernel_param);
        let cap = kernel.abscissa().min(2.0) * 0.7;
        let base = base_frac * cap;
        let step = span_frac * (cap - base) / 4.0;
        let m = piecewise_two_patch(&grid, breakpoint * grid.length, v1, v2).unwrap();
        let logs: Vec<f64> = (0..5)
            .map(|i| lambda_at(&m, &kernel, &grid, base + step * i as f64, Direction::Rightward).ln())
            .collect();
        for w in logs.windows(3) {
            let second = (w[2] - 2.0 * w[1] + w[0]) / (step * step);
            prop_assert!(second >= -1e-8, "second difference {second:.3e}");
        }
    }

    /// Symmetric kernels cannot tell rightward from leftward weights.
    #[test]
    fn eigenvalue_symmetric_in_weight_sign(
        breakpoint in 0.15f64..0.85,
        v1 in 1.2f64..3.0,
        v2 in 1.2f64..3.0,
        kernel_choice in any::<bool>(),
        kernel_param in 0.0f64..1.0,
        mu_frac in 0.05f64..0.9,
    ) {
        let grid = period_grid();
        let kernel = kernel_for(kernel_choice, kernel_param);
        let mu = mu_frac * kernel.abscissa().min(2.0) * 0.7;
        let m = piecewise_two_patch(&grid, breakpoint * grid.length, v1, v2).unwrap();
        let right = lambda_at(&m, &kernel, &grid, mu, Direction::Rightward);
        let left = lambda_at(&m, &kernel, &grid, mu, Direction::Leftward);
        prop_assert!((right - left).abs() <= 1e-8 * right, "{right} vs {left}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Periodic evaluation is exactly L-periodic at dyadic points, where the
    /// shift by one period is representable without rounding.
    #[test]
    fn field_evaluation_is_periodic(samples in prop::collection::vec(0.5f64..3.0, 64), k in 0u32..512) {
        let grid = period_grid();
        let field = PeriodicField::new(grid.length, samples).unwrap();
        let x = k as f64 * grid.length / 512.0;
        prop_assert_eq!(field.eval(x), field.eval(x + grid.length));
        prop_assert_eq!(field.eval(x), field.eval(x - grid.length));
    }

    /// Explicit per-node coefficient tables survive a config write/read cycle
    /// bit for bit.
    #[test]
    fn field_table_round_trips_through_config(values in prop::collection::vec(1.5f64..3.0, 64)) {
        let spec = |f: FieldSpec| HabitatSpec {
            r1: f.clone(),
            r2: FieldSpec::Constant(E),
            c1: FieldSpec::Constant(1.0),
            c2: FieldSpec::Constant(1.0),
            a1: FieldSpec::Constant(0.5),
            a2: FieldSpec::Constant(0.5),
        };
        let config = Config {
            grid: GridSpec { length: 10.0, n: 64, sim_periods: 2 },
            habitat: spec(FieldSpec::Samples { values: values.clone() }),
            kernel: KernelsSpec {
                k1: KernelSpec { family: "gaussian".into(), variance: Some(0.1), scale: None, path: None },
                k2: KernelSpec { family: "gaussian".into(), variance: Some(0.1), scale: None, path: None },
            },
            run: RunSpec {
                steps: 1,
                threshold: 0.05,
                initial: "step".into(),
                boundary: BoundaryKind::Invasion,
                snapshot_every: 1,
            },
        };
        let text = toml::to_string(&config).unwrap();
        let reread: Config = toml::from_str(&text).unwrap();
        let here = std::path::Path::new(".");
        let a = build_problem(config, here).unwrap();
        let b = build_problem(reread, here).unwrap();
        for (x, y) in a.habitat.r1.values.iter().zip(&b.habitat.r1.values) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

/// The fitted front speed barely depends on the tracking level for a steep
/// front: two thresholds a factor of five apart agree within 2 percent.
#[test]
fn front_speed_is_threshold_robust() {
    let grid = Grid::new(10.0, 64, 40).unwrap();
    let habitat = Habitat {
        r1: PeriodicField::constant(&grid, E),
        r2: PeriodicField::constant(&grid, E),
        c1: PeriodicField::constant(&grid, 1.0),
        c2: PeriodicField::constant(&grid, 1.0),
        a1: PeriodicField::constant(&grid, 1e-12),
        a2: PeriodicField::constant(&grid, 1e-12),
    };
    let k = Kernel::gaussian(0.1).unwrap();
    let pstar = PeriodicField::constant(&grid, 1.0);
    let qstar = PeriodicField::constant(&grid, 1.0);
    let sim = Simulator::new(&habitat, &k, &k, &grid, &pstar, &qstar, BoundaryKind::Invasion);
    let trajectory = sim.simulate(sim.initial_step(), 80, 10);
    let low = track_front(&trajectory, &sim.domain, &grid, 0.1).unwrap().speed;
    let high = track_front(&trajectory, &sim.domain, &grid, 0.5).unwrap().speed;
    let rel = (low - high).abs() / high;
    assert!(rel < 0.02, "threshold sensitivity {:.2}%: {low} vs {high}", 100.0 * rel);
}

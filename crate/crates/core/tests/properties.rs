use proptest::prelude::*;

use taskbench::backends::{self, BackendConfig, BackendKind, BarrierMode, ExecutionReport};
use taskbench::graph::{Pattern, TaskGraphSpec};
use taskbench::kernel::{Calibration, KernelConfig};
use taskbench::metrics::{self, AnalyticRunner, MetgSearch};
use taskbench::payload::sequential_execute;

fn spec_strategy() -> impl Strategy<Value = TaskGraphSpec> {
    (1usize..40, 1usize..8, prop::sample::select(Pattern::ALL.to_vec()), 1usize..6, 8usize..40, any::<u64>(), 0.0f64..=2.0)
        .prop_map(|(width, steps, pattern, k, output_bytes, seed, factor)| TaskGraphSpec {
            width,
            steps,
            pattern,
            spread_radix: if pattern == Pattern::Spread { k.min(width) } else { 1 },
            kernel: KernelConfig::load_imbalance(32, factor),
            output_bytes,
            seed,
        })
}

fn config_strategy() -> impl Strategy<Value = BackendConfig> {
    (0usize..4, 1usize..5, any::<u64>(), any::<bool>()).prop_map(|(b, workers, rng_seed, aggregate)| {
        let mut cfg = match b {
            0 => BackendConfig::new(BackendKind::Bsp, workers),
            1 => BackendConfig::new(BackendKind::WorkSteal, workers),
            2 => BackendConfig::new(BackendKind::Futures, workers),
            _ => BackendConfig::new(BackendKind::Futures, workers).with_barrier(BarrierMode::None),
        };
        cfg.rng_seed = rng_seed;
        cfg.bsp_aggregate_runs = aggregate;
        cfg
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_backend_matches_sequential(spec in spec_strategy(), cfg in config_strategy()) {
        let (expected, _) = sequential_execute(&spec).unwrap();
        let r = backends::run(&spec, &cfg).unwrap();
        prop_assert_eq!(r.checksum, expected);
        prop_assert_eq!(r.tasks_executed, spec.task_count() as u64);
        prop_assert!(r.steal_failures <= r.steal_attempts);
        prop_assert_eq!(r.per_worker_busy_seconds.len(), cfg.workers);
        let busy: f64 = r.per_worker_busy_seconds.iter().sum();
        prop_assert!(busy <= cfg.workers as f64 * r.wall_seconds * 1.0001 + 1e-6);
        match cfg.backend {
            BackendKind::Bsp => prop_assert_eq!(r.fetch_ops + r.futures_touched + r.suspensions, 0),
            BackendKind::WorkSteal => prop_assert_eq!(r.messages_sent + r.futures_touched + r.suspensions, 0),
            BackendKind::Futures => prop_assert_eq!(r.messages_sent + r.fetch_ops, 0),
        }
    }

    #[test]
    fn efficiency_falls_as_wall_time_grows(wall in 1e-6f64..10.0, scale in 1.0001f64..100.0, workers in 1usize..64) {
        let spec = TaskGraphSpec::new(16, 4, Pattern::Stencil);
        let cal = Calibration::fixed(1e-9);
        let e = |w: f64| {
            let r = ExecutionReport { wall_seconds: w, ..Default::default() };
            metrics::application_efficiency(&r, &spec, &cal, workers).unwrap()
        };
        prop_assert!(e(wall * scale) < e(wall));
    }

    #[test]
    fn analytic_metg_stays_within_one_grid_cell(overhead_us in 0.5f64..2000.0, workers in 1usize..9) {
        let spi = 1e-8;
        let mut runner = AnalyticRunner { seconds_per_iteration: spi, overhead_seconds: overhead_us * 1e-6 };
        let search = MetgSearch { reps: 1, ..Default::default() };
        let spec = TaskGraphSpec::new(16 * workers, 4, Pattern::Stencil);
        let cfg = BackendConfig::new(BackendKind::Futures, workers);
        let r = metrics::metg(&mut runner, &spec, &cfg, &Calibration::fixed(spi), &search).unwrap();
        let o = overhead_us * 1e-6;
        // crossings inside the swept range [2^6, 2^20] iterations
        if o > 64.0 * spi && o < (1u64 << 20) as f64 * spi {
            let m = r.metg_seconds.unwrap();
            prop_assert!(m >= o / 2.0 && m <= o * 2.0);
        }
        for w in r.curve.windows(2) {
            prop_assert!(w[0].efficiency >= w[1].efficiency);
        }
    }

    #[test]
    fn aggregate_is_shift_invariant(xs in prop::collection::vec(-1e3f64..1e3, 2..20), shift in -1e3f64..1e3) {
        let (m, s) = metrics::aggregate_runs(&xs).unwrap();
        let shifted: Vec<f64> = xs.iter().map(|x| x + shift).collect();
        let (m2, s2) = metrics::aggregate_runs(&shifted).unwrap();
        prop_assert!((m2 - m - shift).abs() < 1e-6);
        prop_assert!((s2 - s).abs() < 1e-6);
    }
}

//! Randomized invariants for the geometry and operator layers.

use dirmax::cone_counts::{bracket_all, build_cap_cover};
use dirmax::experiment::{fit_loglog, ExperimentConfig, ExperimentKind};
use dirmax::field_ops::{
    apply_multiplier, cone_restrict, read_field, write_field, ConeSpec, GridField,
};
use dirmax::maximal_ops::{ball_oracle_average, ball_oracle_hilbert};
use dirmax::sphere_nets::{build_maximal_net, read_tsv, write_tsv, Direction};
use num_complex::Complex64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn net_is_separated_and_deterministic(
        dim in 2usize..4,
        dstep in 0u32..3,
        seed in 0u64..1000,
    ) {
        let delta = 0.3 * 0.75f64.powi(dstep as i32);
        let a = build_maximal_net(dim, delta, seed).unwrap();
        let b = build_maximal_net(dim, delta, seed).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (p, q) in a.points.iter().zip(&b.points) {
            prop_assert!(p.dist(q) == 0.0);
        }
        prop_assert!(a.min_pairwise_distance() >= delta * (1.0 - 1e-9));
        for p in &a.points {
            prop_assert!(p.unit_defect() < 1e-12);
        }
    }

    #[test]
    fn plancherel_under_modulus_one_symbols(seed in 0u64..500) {
        let f = GridField::random_bandlimited(2, 16, 2.0 * std::f64::consts::PI, 5, seed).unwrap();
        let g = apply_multiplier(&f, |xi| {
            let t: f64 = xi.iter().sum();
            Complex64::new(0.0, t).exp() / Complex64::new(0.0, t).exp().norm()
        }).unwrap();
        let rel = (f.l2_norm() - g.l2_norm()).abs() / f.l2_norm().max(1e-300);
        prop_assert!(rel < 1e-10, "relative L2 drift {rel}");
    }

    #[test]
    fn cone_projection_is_idempotent(seed in 0u64..500, l in 0u32..3) {
        let f = GridField::random_bandlimited(2, 16, 2.0 * std::f64::consts::PI, 6, seed).unwrap();
        let cone = ConeSpec {
            center: Direction::new(vec![0.6, 0.8]).unwrap(),
            delta: 0.2,
            c: 1.0,
            l,
        };
        let once = cone_restrict(&f, &cone).unwrap();
        let twice = cone_restrict(&once, &cone).unwrap();
        for (a, b) in once.values.iter().zip(&twice.values) {
            prop_assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn brackets_are_ordered_and_nested(seed in 0u64..200) {
        let omega = build_maximal_net(3, 0.25, seed).unwrap();
        let cover = build_cap_cover(&omega, 0.5, 1.0).unwrap();
        let brackets = bracket_all(&cover, 4, 0.1).unwrap();
        for b in &brackets {
            prop_assert!(b.lower <= b.upper);
            prop_assert!(b.upper <= cover.n_caps());
        }
        // Thresholds grow with l, so the counts are monotone in l.
        for w in brackets.windows(2) {
            prop_assert!(w[0].lower <= w[1].lower);
            prop_assert!(w[0].upper <= w[1].upper);
        }
    }

    #[test]
    fn loglog_fit_recovers_noisy_power_law(
        slope in -1.5f64..1.5,
        amp in 0.5f64..5.0,
        seed in 0u64..100,
    ) {
        let xs: Vec<f64> = (1..=8).map(|k| 2f64.powi(k)).collect();
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let ys: Vec<f64> = xs.iter().map(|x| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let noise = 1.0 + 0.01 * ((state >> 33) as f64 / 2f64.powi(31) - 1.0);
            amp * x.powf(slope) * noise
        }).collect();
        let fit = fit_loglog(&xs, &ys, slope, 0.05).unwrap();
        prop_assert!((fit.slope - slope).abs() < 0.03, "{} vs {slope}", fit.slope);
        prop_assert!(fit.pass);
    }

    #[test]
    fn config_round_trip(
        dim in 2usize..5,
        grid_pow in 3u32..7,
        nseeds in 1usize..4,
        target in proptest::option::of(-1.0f64..1.0),
    ) {
        let cfg = ExperimentConfig {
            kind: ExperimentKind::NetScaling,
            dim,
            deltas: vec![0.4, 0.2, 0.1],
            seeds: (0..nseeds as u64).collect(),
            grid: 2usize.pow(grid_pow),
            target,
            tolerance: target.map(|_| 0.25),
            out_dir: std::path::PathBuf::from("artifacts"),
        };
        let back = ExperimentConfig::parse(&cfg.emit()).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn field_file_round_trip(seed in 0u64..200) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.field");
        let f = GridField::random_bandlimited(2, 8, 4.0, 3, seed).unwrap();
        write_field(&f, &path).unwrap();
        let g = read_field(&path).unwrap();
        prop_assert_eq!(f.dim, g.dim);
        prop_assert_eq!(f.points_per_axis, g.points_per_axis);
        for (a, b) in f.values.iter().zip(&g.values) {
            prop_assert!(a == b, "bit-exact round trip required");
        }
    }

    #[test]
    fn net_file_round_trip(seed in 0u64..200) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.tsv");
        let net = build_maximal_net(3, 0.35, seed).unwrap();
        write_tsv(&net, &path).unwrap();
        let back = read_tsv(&path).unwrap();
        prop_assert_eq!(net.len(), back.len());
        for (p, q) in net.points.iter().zip(&back.points) {
            prop_assert!(p.dist(q) < 1e-15);
        }
    }

    #[test]
    fn ball_oracles_are_monotone_in_alignment(
        rho in 1.05f64..6.0,
        m0 in 0.0f64..1.0,
        m1 in 0.0f64..1.0,
    ) {
        // Both closed-form profiles grow with |cos| between the point and
        // the direction, which is what justifies nearest-neighbor lookup.
        let (lo, hi) = if m0 <= m1 { (m0, m1) } else { (m1, m0) };
        let v = Direction::axis(2, 1);
        let mk = |m: f64| {
            let s = (1.0 - m * m).max(0.0).sqrt();
            [rho * s, rho * m]
        };
        prop_assert!(
            ball_oracle_average(&mk(lo), &v) <= ball_oracle_average(&mk(hi), &v) + 1e-12
        );
        prop_assert!(
            ball_oracle_hilbert(&mk(lo), &v) <= ball_oracle_hilbert(&mk(hi), &v) + 1e-12
        );
    }
}

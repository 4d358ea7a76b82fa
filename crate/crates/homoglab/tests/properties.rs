//! Cross-module invariants that are too slow or too integrative for
//! unit tests.

use homoglab::fem2d::{solve_dirichlet, StructuredMesh};
use homoglab::fields::{make_realization, Checkerboard2DSpec, FieldRealization, FieldSpec, Seed};
use homoglab::homog::effective_tensor_single;
use homoglab::studies::{
    run_convergence_1d, run_convergence_2d, run_energy_convergence, Converge1dConfig,
    Converge2dConfig, EnergyConvConfig, FieldConfig, FieldKind,
};
use rayon::prelude::*;

fn checker2d_field(kappas: Vec<f64>, probs: Vec<f64>, offset: bool) -> FieldConfig {
    FieldConfig {
        kind: FieldKind::Checkerboard2d,
        value: None,
        kappas: Some(kappas),
        probs: Some(probs),
        offset,
    }
}

fn gaussian_source() -> impl Fn(f64, f64) -> f64 + Copy {
    |x: f64, y: f64| {
        let r2 = (x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5);
        5.0 / (2.0 * std::f64::consts::PI * 0.05) * (-r2 / 0.1).exp()
    }
}

#[test]
fn omega_independence_variance_shrinks_with_torus_side() {
    // The periodization estimate concentrates as L grows: the seed-wise
    // standard deviation at L = 32 is below the one at L = 8.
    let spec = FieldSpec::Checkerboard2d(
        Checkerboard2DSpec::new(vec![1.0, 4.0], vec![0.5, 0.5], true).unwrap(),
    );
    let sd_for = |l: usize| {
        let vals: Vec<f64> = (0..16u64)
            .map(|seed| {
                let r = make_realization(&spec, Seed(seed)).unwrap();
                effective_tensor_single(&r, l, 4, 1e-10).unwrap().entries[0][0]
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (vals.len() - 1) as f64).sqrt()
    };
    let coarse = sd_for(8);
    let fine = sd_for(32);
    assert!(fine < coarse, "sd(L=32) = {fine} !< sd(L=8) = {coarse}");
}

#[test]
fn four_phase_solution_minimum_is_essentially_nonnegative() {
    let spec = FieldSpec::Checkerboard2d(
        Checkerboard2DSpec::new(
            vec![1.0, 10.0, 50.0, 100.0],
            vec![0.4, 0.2, 0.2, 0.2],
            false,
        )
        .unwrap(),
    );
    let r = make_realization(&spec, Seed(7)).unwrap();
    let mesh = StructuredMesh::unit_square(128, 128).unwrap();
    let sol = solve_dirichlet(&mesh, &r, 0.125, gaussian_source(), 1e-10).unwrap();
    let max = sol.u.iter().cloned().fold(f64::MIN, f64::max);
    let min = sol.u.iter().cloned().fold(f64::MAX, f64::min);
    assert!(max > 0.0);
    assert!(min > -1e-3 * max, "min {min} vs max {max}");
}

#[test]
fn converge_2d_isolates_per_eps_failures() {
    // eps = 0.3 does not align with a 64-element mesh; its row reports
    // the error while the other rows stay numeric.
    let cfg = Converge2dConfig {
        field: checker2d_field(vec![1.0, 4.0], vec![0.5, 0.5], false),
        eps_list: Some(vec![0.5, 0.3, 0.25]),
        mesh: 64,
        source: None,
        torus_side: 4,
        ensemble: 4,
        elements_per_tile: 2,
        tol: 1e-10,
        seed: 3,
        dumps: false,
    };
    let out = run_convergence_2d(&cfg).unwrap();
    let rows = &out.reports[0].1.rows;
    assert_eq!(rows.len(), 3);
    assert!(rows[0][1].parse::<f64>().is_ok());
    assert!(rows[1][1].starts_with("error"), "row: {:?}", rows[1]);
    assert!(rows[2][1].parse::<f64>().is_ok());
}

#[test]
fn converge_2d_trend_persists_across_seeds() {
    for seed in [7u64, 8, 9] {
        let cfg = Converge2dConfig {
            field: checker2d_field(
                vec![1.0, 10.0, 50.0, 100.0],
                vec![0.4, 0.2, 0.2, 0.2],
                false,
            ),
            eps_list: Some(vec![0.5, 0.125]),
            mesh: 64,
            source: None,
            torus_side: 8,
            ensemble: 8,
            elements_per_tile: 2,
            tol: 1e-10,
            seed,
            dumps: false,
        };
        let out = run_convergence_2d(&cfg).unwrap();
        let rows = &out.reports[0].1.rows;
        let coarse: f64 = rows[0][1].parse().unwrap();
        let fine: f64 = rows[1][1].parse().unwrap();
        assert!(fine < coarse, "seed {seed}: {fine} !< {coarse}");
    }
}

#[test]
fn flux_error_decreases_with_eps() {
    for field in [
        FieldConfig {
            kind: FieldKind::Periodic1d,
            value: None,
            kappas: None,
            probs: None,
            offset: true,
        },
        FieldConfig {
            kind: FieldKind::Checkerboard1d,
            value: None,
            kappas: Some(vec![1.0, 3.0]),
            probs: Some(vec![0.5, 0.5]),
            offset: true,
        },
    ] {
        let cfg = Converge1dConfig {
            field,
            eps_list: Some(vec![0.25, 1.0 / 256.0]),
            n_cells: None,
            seed: 1,
            source: None,
        };
        let out = run_convergence_1d(&cfg).unwrap();
        let rows = &out.reports[0].1.rows;
        let coarse: f64 = rows[0][2].parse().unwrap();
        let fine: f64 = rows[1][2].parse().unwrap();
        assert!(fine < coarse, "flux gap {fine} !< {coarse}");
    }
}

#[test]
fn energy_limit_reached_for_any_interior_bump() {
    // The weak-* limit is tested against two different bumps: each
    // measured value converges to its own predicted limit.
    for (center, width) in [(0.5, 0.6), (0.45, 0.5)] {
        let cfg = EnergyConvConfig {
            field: FieldConfig {
                kind: FieldKind::Periodic1d,
                value: None,
                kappas: None,
                probs: None,
                offset: true,
            },
            eps_list: Some(vec![0.5, 1.0 / 64.0]),
            n_cells: None,
            bump_center: center,
            bump_width: width,
            seed: 0,
        };
        let out = run_energy_convergence(&cfg).unwrap();
        let rows = &out.reports[0].1.rows;
        let coarse: f64 = rows[0][1].parse().unwrap();
        let fine: f64 = rows[1][1].parse().unwrap();
        assert!(fine < coarse, "bump ({center},{width}): {fine} !< {coarse}");
        // The fine-scale value sits within a tight band of the limit.
        let limit: f64 = out.reports[0]
            .1
            .provenance
            .iter()
            .find(|(k, _)| k == "limit")
            .unwrap()
            .1
            .parse()
            .unwrap();
        assert!(
            fine / limit.abs() < 1e-4,
            "bump ({center},{width}): gap {fine} vs limit {limit}"
        );
    }
}

#[test]
fn evaluation_is_bit_identical_across_thread_schedules() {
    let spec = FieldSpec::Checkerboard2d(
        Checkerboard2DSpec::new(vec![1.0, 4.0], vec![0.5, 0.5], true).unwrap(),
    );
    let r = make_realization(&spec, Seed(99)).unwrap();
    let grid: Vec<(f64, f64)> = (0..64)
        .flat_map(|j| (0..64).map(move |i| (i as f64 * 0.173, j as f64 * 0.311)))
        .collect();
    let serial: Vec<f64> = grid.iter().map(|&(x, y)| r.eval2(x, y)).collect();
    let parallel: Vec<f64> = grid.par_iter().map(|&(x, y)| r.eval2(x, y)).collect();
    assert_eq!(serial, parallel);

    let again = make_realization(&spec, Seed(99)).unwrap();
    let rerun: Vec<f64> = grid.iter().map(|&(x, y)| again.eval2(x, y)).collect();
    assert_eq!(serial, rerun);
}

#[test]
fn ellipticity_holds_on_ten_thousand_probes() {
    let specs: Vec<FieldSpec> = vec![
        FieldSpec::Periodic1d,
        FieldSpec::Checkerboard2d(
            Checkerboard2DSpec::new(vec![1.0, 10.0, 50.0, 100.0], vec![0.4, 0.2, 0.2, 0.2], true)
                .unwrap(),
        ),
    ];
    let probe = |r: &FieldRealization, i: usize| {
        let x = (i as f64 * 0.7918) % 173.0 - 86.0;
        let y = (i as f64 * 0.2799) % 91.0 - 45.0;
        match r.dim() {
            1 => r.eval1(x),
            _ => r.eval2(x, y),
        }
    };
    for spec in &specs {
        let bounds = spec.bounds();
        let r = make_realization(spec, Seed(31)).unwrap();
        for i in 0..10_000 {
            let v = probe(&r, i);
            assert!(
                bounds.contains(v),
                "value {v} escapes [{}, {}]",
                bounds.nu1,
                bounds.nu2
            );
        }
    }
}

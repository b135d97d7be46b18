use bimpc_core::miqp::{enumerate_oracle, solve_miqp, BnbConfig, MiqpStatus};
use bimpc_core::qp::QpOptions;
use bimpc_core::random::feasible_miqp;

fn exact() -> BnbConfig {
    BnbConfig {
        rel_gap: 1e-9,
        abs_gap: 1e-8,
        qp_tolerance: 1e-8,
        ..BnbConfig::default()
    }
}

#[test]
fn branch_and_bound_matches_enumeration() {
    let opts = QpOptions {
        tolerance: 1e-8,
        ..QpOptions::default()
    };
    for seed in 0..120u64 {
        let n_bin = 1 + (seed % 10) as usize;
        let n_cont = 5 + (seed * 7 % 36) as usize;
        let (p, _) = feasible_miqp(seed, n_cont, n_bin);
        let bb = solve_miqp(&p, &exact()).unwrap();
        let oracle = enumerate_oracle(&p, &opts).unwrap();
        assert_eq!(oracle.status, MiqpStatus::Optimal);
        assert!(bb.status.has_solution(), "seed {seed}: {:?}", bb.status);
        assert!(
            (bb.objective - oracle.objective).abs() <= 1e-5,
            "seed {seed}: {} vs {}",
            bb.objective,
            oracle.objective
        );
        for &j in &p.binary_indices {
            assert!((bb.z[j] - bb.z[j].round()).abs() <= 1e-6);
        }
        assert!(p.base.max_violation(&bb.z) <= 1e-6, "seed {seed}");
        assert!(bb.objective >= bb.bound - 1e-8);
    }
}

#[test]
fn deterministic_runs_are_identical() {
    let (p, _) = feasible_miqp(5, 30, 10);
    let a = solve_miqp(&p, &exact()).unwrap();
    let b = solve_miqp(&p, &exact()).unwrap();
    assert_eq!(a, b);
    let par = solve_miqp(
        &p,
        &BnbConfig {
            deterministic: false,
            ..exact()
        },
    )
    .unwrap();
    assert_eq!(a.objective, par.objective);
}

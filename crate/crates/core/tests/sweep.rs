use relay_nbs::bargaining::{eigenvalues, hessian, solve_nbs, NashProductContext, NbsSolver};
use relay_nbs::experiments::{
    bandwidth_gain, concavity_map, social_welfare_gain, sweep, OracleCadence, SweepConfig,
    SweepGrid,
};
use relay_nbs::format::sweep_csv;
use relay_nbs::{Error, Execution, Scenario};

fn coarse() -> SweepGrid {
    SweepGrid::square_700(100.0).unwrap()
}

#[test]
fn records_compose_the_underlying_operations() {
    let scenario = Scenario::reference();
    let config = SweepConfig::default();
    let records = sweep(&scenario, &coarse(), &config).unwrap();
    assert_eq!(records.len(), 64);
    let solver = NbsSolver {
        execution: Execution::Sequential,
        ..config.solver
    };
    for r in &records {
        let Ok(res) = &r.outcome else {
            assert!(NashProductContext::new(&scenario, r.relay).is_err());
            continue;
        };
        let ctx = NashProductContext::new(&scenario, r.relay).unwrap();
        let sol = solve_nbs(&ctx, &solver, true);
        assert_eq!(res.ne, ctx.ne);
        assert_eq!(res.nbs, sol.report);
        assert_eq!(res.cg_matched_oracle, sol.cg_matched_oracle);
        assert_eq!(
            res.eigen,
            eigenvalues(&hessian(sol.report.allocation, &ctx))
        );
        assert_eq!(res.strictly_concave, res.eigen.is_negative_definite());
        assert_eq!(
            res.gain_bw_total_pct,
            bandwidth_gain(ctx.ne.allocation.total(), sol.report.allocation.total())
        );
        assert_eq!(
            res.gain_sw_pct,
            social_welfare_gain(ctx.ne.utilities, sol.report.utilities)
        );
    }
}

#[test]
fn records_respect_dominance_and_welfare() {
    let records = sweep(
        &Scenario::reference(),
        &SweepGrid::square_700(50.0).unwrap(),
        &SweepConfig::default(),
    )
    .unwrap();
    for r in records.iter().filter_map(|r| r.outcome.as_ref().ok()) {
        if r.nbs.converged {
            assert!(
                r.nbs.utilities.weakly_dominates(&r.ne.utilities, 1e-12),
                "{r:?}"
            );
        }
        if r.cg_matched_oracle == Some(true) && r.strictly_concave {
            assert!(r.gain_sw_pct.is_some_and(|g| g >= -1e-9), "{r:?}");
        }
    }
}

#[test]
fn sweep_csv_is_bit_identical_across_runs_and_executions() {
    let scenario = Scenario::reference();
    let par = SweepConfig::default();
    let seq = SweepConfig {
        solver: NbsSolver {
            execution: Execution::Sequential,
            ..NbsSolver::default()
        },
        ..par
    };
    let a = sweep_csv(&sweep(&scenario, &coarse(), &par).unwrap());
    let b = sweep_csv(&sweep(&scenario, &coarse(), &par).unwrap());
    let c = sweep_csv(&sweep(&scenario, &coarse(), &seq).unwrap());
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn relay_on_a_node_is_recorded_not_fatal() {
    let grid = SweepGrid::new(300.0, 310.0, 300.0, 310.0, 10.0).unwrap();
    let records = sweep(&Scenario::reference(), &grid, &SweepConfig::default()).unwrap();
    assert_eq!(records.len(), 4);
    assert!(matches!(
        records[0].outcome,
        Err(Error::DegenerateGeometry(_))
    ));
    assert!(records[1..].iter().all(|r| r.outcome.is_ok()));
}

#[test]
fn far_relay_gives_no_gain() {
    let grid = SweepGrid::new(1e5, 1e5 + 1.0, 1e5, 1e5 + 1.0, 1.0).unwrap();
    let config = SweepConfig {
        oracle_cadence: OracleCadence::Never,
        ..SweepConfig::default()
    };
    let records = sweep(&Scenario::reference(), &grid, &config).unwrap();
    for r in &records {
        let r = r.outcome.as_ref().unwrap();
        assert_eq!(r.ne.allocation.total(), 0.0);
        assert_eq!(r.nbs.allocation.total(), 0.0);
        assert_eq!(r.gain_bw_total_pct, 0.0);
        assert_eq!(r.gain_sw_pct, Some(0.0));
        assert_eq!(r.cg_matched_oracle, None);
    }
}

#[test]
fn free_band_is_never_strictly_concave() {
    let scenario = Scenario {
        price: 0.0,
        ..Scenario::reference()
    };
    let records = concavity_map(
        &scenario,
        &SweepGrid::square_700(100.0).unwrap(),
        41,
        Execution::Parallel,
    )
    .unwrap();
    let evaluated: Vec<_> = records
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok())
        .collect();
    assert!(!evaluated.is_empty());
    assert!(evaluated.iter().all(|(_, strict)| !strict));
}

#[test]
fn core_square_is_concave_somewhere() {
    let grid = SweepGrid::new(400.0, 550.0, 400.0, 550.0, 50.0).unwrap();
    let records = concavity_map(&Scenario::reference(), &grid, 201, Execution::Parallel).unwrap();
    assert!(records.iter().any(|r| matches!(r.outcome, Ok((_, true)))));
}

use mpet::harness::{self, problems, RunOptions};
use mpet::model::ScaledParams;
use mpet::schemes::{IterationReport, Scheme};

fn reports(seed: u64) -> Vec<IterationReport> {
    let spec = problems::biot_manufactured(ScaledParams::uniform(1, 1e2, 1.0, 1e-2).unwrap()).unwrap();
    let opts = RunOptions {
        seed,
        ..Default::default()
    };
    let out = harness::run_point(&spec, 4, &Scheme::ALL, &opts).unwrap();
    out.runs.into_iter().map(|r| r.result.unwrap().1).collect()
}

fn strip_timings(mut r: IterationReport) -> IterationReport {
    r.timings = Default::default();
    r
}

#[test]
fn same_seed_same_reports() {
    let a: Vec<_> = reports(7).into_iter().map(strip_timings).collect();
    let b: Vec<_> = reports(7).into_iter().map(strip_timings).collect();
    assert_eq!(a, b);
}

#[test]
fn seed_changes_the_start() {
    let a = reports(7);
    let b = reports(8);
    assert_ne!(a[0].residual_history[0], b[0].residual_history[0]);
}

#[test]
fn suite_rows_follow_grid_order() {
    let mut suite = harness::ExperimentSuite::scaling().unwrap();
    suite.mesh_levels = vec![4];
    let opts = RunOptions {
        with_reference: false,
        ..Default::default()
    };
    let a = harness::run_suite(&suite, &opts).unwrap();
    let b = harness::run_suite(&suite, &opts).unwrap();
    let key = |rows: &[harness::RunRecord]| {
        rows.iter()
            .map(|r| (r.param_point.clone(), r.scheme.clone(), r.iterations))
            .collect::<Vec<_>>()
    };
    assert_eq!(key(&a), key(&b));
    assert_eq!(a.len(), suite.num_runs());
}

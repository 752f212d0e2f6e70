use mealrec::dataset::fixture;
use mealrec::experiment::run_experiment_parallel;
use mealrec::report::{emit_report, parse_json_report, ReportFormat};
use mealrec_core::{default_day_config, run_experiment, ExperimentSpec, ResultRow};
use proptest::prelude::*;

fn small_spec() -> ExperimentSpec {
    ExperimentSpec {
        replications: 2,
        bandit_episodes: 8,
        base_seed: 11,
        ..ExperimentSpec::default()
    }
}

fn rows() -> Vec<ResultRow> {
    run_experiment_parallel(&small_spec(), &fixture(), &default_day_config()).unwrap()
}

#[test]
fn csv_has_header_and_27_rows() {
    let rows = rows();
    assert_eq!(rows.len(), 27);
    let csv = emit_report(&rows, ReportFormat::Csv).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 28);
    assert_eq!(
        lines[0],
        "config,horizon,algorithm,uc,dm,mc,uc_dm_mc,uc_dm,uc_mc,dm_mc"
    );
    for line in &lines[1..] {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 10, "{line}");
        for c in &cells[3..] {
            let (_, frac) = c.split_once('.').expect("fixed point");
            assert_eq!(frac.len(), 3, "{line}");
        }
    }
    assert!(lines[1].starts_with("c1,1,random,"));
    assert!(lines[27].starts_with("c3,5,bandit,"));
}

#[test]
fn json_round_trips_exactly() {
    let rows = rows();
    let json = emit_report(&rows, ReportFormat::Json).unwrap();
    assert_eq!(parse_json_report(&json).unwrap(), rows);
}

#[test]
fn table_lists_every_row() {
    let rows = rows();
    let table = emit_report(&rows, ReportFormat::Table).unwrap();
    assert_eq!(table.lines().count(), 28);
}

#[test]
fn parallel_matches_sequential() {
    let spec = small_spec();
    let ds = fixture();
    let cfg = default_day_config();
    let seq = run_experiment(&spec, &ds, &cfg).unwrap();
    let par = run_experiment_parallel(&spec, &ds, &cfg).unwrap();
    assert_eq!(seq, par);
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| run_experiment_parallel(&spec, &ds, &cfg).unwrap());
    assert_eq!(one, par);
}

fn row(vals: [f64; 3]) -> ResultRow {
    let [uc, dm, mc] = vals;
    ResultRow {
        config: "c1".into(),
        horizon: 3,
        algorithm: mealrec_core::RecommenderKind::Random,
        uc,
        dm,
        mc,
        uc_dm_mc: (uc + dm + mc) / 3.0,
        uc_dm: (uc + dm) / 2.0,
        uc_mc: (uc + mc) / 2.0,
        dm_mc: (dm + mc) / 2.0,
    }
}

proptest! {
    #[test]
    fn csv_values_are_within_half_a_unit(uc in 0.0..=1.0f64, dm in 0.0..=1.0f64, mc in 0.0..=1.0f64) {
        let r = row([uc, dm, mc]);
        let csv = emit_report(std::slice::from_ref(&r), ReportFormat::Csv).unwrap();
        let line = csv.lines().nth(1).unwrap();
        let printed: Vec<f64> = line.split(',').skip(3).map(|c| c.parse().unwrap()).collect();
        for (p, v) in printed.iter().zip(r.values()) {
            prop_assert!((p - v).abs() <= 0.0005 + 1e-12, "{p} vs {v}");
        }
        let json = emit_report(std::slice::from_ref(&r), ReportFormat::Json).unwrap();
        prop_assert_eq!(parse_json_report(&json).unwrap(), vec![r]);
    }
}

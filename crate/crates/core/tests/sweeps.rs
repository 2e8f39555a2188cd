use hfopf::harness::{rows_to_csv, run_sweep, DerateMode, SolveOptions, SweepRow, SweepSpec};
use hfopf::health::MappingMode;
use hfopf::network::{mg3, SourceRef};
use hfopf::recovery::DispatchStatus;

const G2: SourceRef = SourceRef::Generator(1);

fn rows_for(rows: &[SweepRow], mode: DerateMode, sf: f64) -> Vec<&SweepRow> {
    rows.iter().filter(|r| r.mode == mode && r.sf == sf).collect()
}

/// Infeasible points rank above every feasible cost.
fn change(r: &SweepRow) -> f64 {
    r.relative_cost_change.unwrap_or(f64::INFINITY)
}

#[test]
fn generator_sweep_properties() {
    let net = mg3();
    for mapping in [MappingMode::Linear, MappingMode::Table] {
        let spec = SweepSpec { mapping_mode: mapping, ..SweepSpec::generator(G2) };
        let rows = run_sweep(&net, &spec, &SolveOptions::default(), None).unwrap();
        assert_eq!(rows.len(), 22);
        let p = rows_for(&rows, DerateMode::POnly, 1.0);
        let pv = rows_for(&rows, DerateMode::PAndV, 1.0);
        assert_eq!(p[0].relative_cost_change, Some(0.0));
        assert_eq!(pv[0].relative_cost_change, Some(0.0));
        for curve in [&p, &pv] {
            for w in curve.windows(2) {
                assert!(change(w[1]) >= change(w[0]) - 1e-9, "{mapping:?}: {:?} -> {:?}", w[0], w[1]);
            }
        }
        for (a, b) in p.iter().zip(&pv) {
            assert_eq!(a.hci, b.hci);
            assert!(change(b) >= change(a) - 1e-9, "{mapping:?} at {}", a.hci);
        }
    }
}

#[test]
fn load_scaling_amplifies_cost_change() {
    let net = mg3();
    let spec =
        SweepSpec { modes: vec![DerateMode::POnly], load_scales: vec![1.0, 1.1, 1.2], ..SweepSpec::generator(G2) };
    let rows = run_sweep(&net, &spec, &SolveOptions::default(), Some(2)).unwrap();
    let curves: Vec<Vec<&SweepRow>> =
        [1.0, 1.1, 1.2].iter().map(|&sf| rows_for(&rows, DerateMode::POnly, sf)).collect();
    for pair in curves.windows(2) {
        for (lower, higher) in pair[0].iter().zip(&pair[1]).skip(1) {
            assert!(change(higher) >= change(lower) - 1e-9, "hci {}", higher.hci);
        }
    }
}

#[test]
fn battery_sweep_cost_is_nondecreasing() {
    let net = mg3();
    for mapping in [MappingMode::Linear, MappingMode::Table] {
        let spec = SweepSpec { mapping_mode: mapping, ..SweepSpec::battery(SourceRef::Bess(0)) };
        let rows = run_sweep(&net, &spec, &SolveOptions::default(), None).unwrap();
        let from_healthy: Vec<&SweepRow> = rows.iter().filter(|r| r.hci <= 0.9).collect();
        for w in from_healthy.windows(2) {
            assert!(change(w[1]) >= change(w[0]) - 1e-9, "{mapping:?}: {:?} -> {:?}", w[0], w[1]);
        }
        assert!(rows.iter().all(|r| r.status == DispatchStatus::Exact));
    }
}

#[test]
fn csv_is_identical_across_worker_counts() {
    let net = mg3();
    let spec = SweepSpec { hci_values: vec![1.0, 0.8, 0.6], ..SweepSpec::generator(G2) };
    let one = rows_to_csv(&run_sweep(&net, &spec, &SolveOptions::default(), Some(1)).unwrap());
    let four = rows_to_csv(&run_sweep(&net, &spec, &SolveOptions::default(), Some(4)).unwrap());
    assert_eq!(one, four);
    assert!(one.starts_with("schema,v1\nhci,mode,sf,status,"));
}

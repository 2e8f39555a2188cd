mod common;

use hfopf::network::{case_to_json, load_case, mg3, parse_case, save_case, Network, MG3_JSON};
use hfopf::CaseError;
use proptest::prelude::*;

fn assert_same(a: &Network, b: &Network) {
    let close = |x: f64, y: f64| assert!(common::rel_close(x, y, 1e-12), "{x} vs {y}");
    assert_eq!(a.n_bus(), b.n_bus());
    assert_eq!(a.reference_bus, b.reference_bus);
    close(a.base_mva, b.base_mva);
    for (p, q) in a.buses.iter().zip(&b.buses) {
        assert_eq!(p.id, q.id);
        for (x, y) in [
            (p.v_min_nominal, q.v_min_nominal),
            (p.v_max_nominal, q.v_max_nominal),
            (p.p_load, q.p_load),
            (p.q_load, q.q_load),
        ] {
            close(x, y);
        }
    }
    for (p, q) in a.branches.iter().zip(&b.branches) {
        assert_eq!((p.from_bus, p.to_bus), (q.from_bus, q.to_bus));
        for (x, y) in [(p.r, q.r), (p.x, q.x), (p.s_max, q.s_max)] {
            close(x, y);
        }
    }
    for (p, q) in a.generators.iter().zip(&b.generators) {
        assert_eq!(p.bus, q.bus);
        for (x, y) in [
            (p.p_min_rated, q.p_min_rated),
            (p.p_max_rated, q.p_max_rated),
            (p.cost.c2, q.cost.c2),
            (p.cost.c1, q.cost.c1),
            (p.cost.c0, q.cost.c0),
        ] {
            close(x, y);
        }
    }
    assert_eq!(a.bess_units.len(), b.bess_units.len());
    for (p, q) in a.bess_units.iter().zip(&b.bess_units) {
        for (x, y) in [(p.e_now, q.e_now), (p.e_rated, q.e_rated), (p.horizon, q.horizon), (p.cost.c2, q.cost.c2)] {
            close(x, y);
        }
    }
}

#[test]
fn mg3_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("copy.json");
    let net = mg3();
    save_case(&net, &path).unwrap();
    let back = load_case(&path).unwrap();
    assert_same(&net, &back);
}

#[test]
fn missing_file_is_io_error() {
    let err = load_case("/nonexistent/case.json").unwrap_err();
    assert!(matches!(err, CaseError::Io { .. }));
}

#[test]
fn malformed_json_reports_position() {
    let text = &MG3_JSON[..MG3_JSON.len() / 2];
    match parse_case(text).unwrap_err() {
        CaseError::Parse { line, column, .. } => assert!(line > 1 && column >= 1),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn bus_ids_must_be_a_permutation() {
    let text = MG3_JSON.replacen("\"id\": 3", "\"id\": 2", 1);
    assert!(parse_case(&text).unwrap_err().to_string().contains("duplicate bus id"));
    // Any order of 1..n is accepted.
    let text = MG3_JSON.replacen("\"id\": 1,", "\"id\": 9,", 1).replacen("\"id\": 3,", "\"id\": 1,", 1).replacen(
        "\"id\": 9,",
        "\"id\": 3,",
        1,
    );
    let net = parse_case(&text).unwrap();
    assert_eq!(net.buses[2].p_load, mg3().buses[0].p_load);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn random_networks_round_trip(seed in any::<u64>(), n in 1usize..6, base in 1.0f64..500.0) {
        let mut r = common::rng(seed);
        let mut net = common::random_network(&mut r, n);
        net.base_mva = base;
        net.validate().unwrap();
        let back = parse_case(&case_to_json(&net)).unwrap();
        assert_same(&net, &back);
    }
}

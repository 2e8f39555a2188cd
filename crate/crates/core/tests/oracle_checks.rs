use hfopf::harness::{solve_case, SolveOptions};
use hfopf::health::{HealthLimits, HealthProfile, MappingMode};
use hfopf::network::{branch_flow, complex_injection, mg3, Network, SourceRef};
use hfopf::oracle::{oracle_dispatch, OracleDispatch, OracleError, OracleSettings};

fn limits(net: &Network, h: f64, v: bool) -> HealthLimits {
    let p = HealthProfile::new(SourceRef::Generator(1), h, MappingMode::Linear, v);
    HealthLimits::compute(net, &[p], &Default::default()).unwrap()
}

/// Independent re-check of an oracle point against every limit.
fn recheck(net: &Network, limits: &HealthLimits, d: &OracleDispatch, sf: f64) {
    let v = &d.voltages;
    let s = complex_injection(net, v);
    let tol = 1e-8;
    for (i, src) in net.sources().into_iter().enumerate() {
        let k = net.source_bus(src);
        let b = limits.source_bounds(net, src);
        assert!((s[k].re + sf * net.buses[k].p_load - d.p[i]).abs() < tol);
        assert!((s[k].im + sf * net.buses[k].q_load - d.q[i]).abs() < tol);
        assert!(d.p[i] >= b.p_lo - tol && d.p[i] <= b.p_hi + tol);
        assert!(d.q[i] >= b.q_lo - tol && d.q[i] <= b.q_hi + tol);
    }
    for (k, vk) in v.iter().enumerate() {
        let (lo, hi) = limits.bus_voltage_band(net, k);
        assert!(vk.norm() >= lo - tol && vk.norm() <= hi + tol);
    }
    for br in &net.branches {
        let y = br.series_admittance();
        assert!(branch_flow(y, v[br.from_bus], v[br.to_bus]).norm() <= br.s_max + tol);
        assert!(branch_flow(y, v[br.to_bus], v[br.from_bus]).norm() <= br.s_max + tol);
    }
}

#[test]
fn healthy_mg3_lower_bound_and_cell_bound() {
    let net = mg3();
    let lim = HealthLimits::rated(&net);
    let r = oracle_dispatch(&net, &lim, &OracleSettings::default(), 1.0).unwrap();
    assert_eq!(r.grid_size, 9 * 9 * 9 * 9 * 5);
    assert!(r.feasible_count > 0);
    let sdp = solve_case(&net, &[], 1.0, &SolveOptions::default()).unwrap();
    let sdp_cost = sdp.dispatch.cost_total.unwrap();
    let best = r.best_cost.unwrap();
    assert!(best >= sdp_cost - 1e-6);
    assert!(best - sdp_cost <= r.cell_cost_bound.unwrap());
    recheck(&net, &lim, r.best_dispatch.as_ref().unwrap(), 1.0);
}

#[test]
fn best_points_pass_independent_recheck() {
    let net = mg3();
    let settings = OracleSettings { p_steps: 5, q_steps: 5, v_steps: 3, ..OracleSettings::default() };
    for (h, v, sf) in [(1.0, false, 1.0), (0.6, true, 1.0), (0.8, false, 1.2)] {
        let lim = limits(&net, h, v);
        let r = oracle_dispatch(&net, &lim, &settings, sf).unwrap();
        recheck(&net, &lim, r.best_dispatch.as_ref().unwrap(), sf);
    }
}

#[test]
fn refining_the_grid_never_raises_best_cost() {
    let net = mg3();
    let coarse = OracleSettings { p_steps: 5, q_steps: 5, v_steps: 3, ..OracleSettings::default() };
    for (h, v) in [(1.0, false), (0.5, true)] {
        let lim = limits(&net, h, v);
        let a = oracle_dispatch(&net, &lim, &coarse, 1.0).unwrap();
        let b = oracle_dispatch(&net, &lim, &coarse.refined(), 1.0).unwrap();
        assert!(b.feasible_count >= a.feasible_count);
        assert!(b.best_cost.unwrap() <= a.best_cost.unwrap());
    }
}

#[test]
fn result_is_deterministic() {
    let net = mg3();
    let lim = limits(&net, 0.7, true);
    let s = OracleSettings { p_steps: 5, q_steps: 5, v_steps: 3, ..OracleSettings::default() };
    let a = oracle_dispatch(&net, &lim, &s, 1.0).unwrap();
    let b = oracle_dispatch(&net, &lim, &s, 1.0).unwrap();
    assert_eq!(a.best_cost, b.best_cost);
    assert_eq!(a.best_dispatch.unwrap().grid_index, b.best_dispatch.unwrap().grid_index);
}

#[test]
fn too_many_axes_is_refused() {
    let mut net = mg3();
    let mut extra = net.generators[0].clone();
    extra.bus = 2;
    net.bess_units.clear();
    net.generators.push(extra.clone());
    net.buses.push(net.buses[2].clone());
    net.buses[3].id = 3;
    extra.bus = 3;
    net.generators.push(extra);
    net.branches.push(net.branches[1].clone());
    net.branches[3].to_bus = 3;
    net.validate().unwrap();
    let err = oracle_dispatch(&net, &HealthLimits::rated(&net), &OracleSettings::default(), 1.0).unwrap_err();
    assert_eq!(err, OracleError::TooManyAxes { axes: 6 });
}

use std::sync::Arc;

use proptest::prelude::*;

use sphereflow_core::chart::{from_chart, to_chart, ChartField};
use sphereflow_core::diagnostics::singular_set;
use sphereflow_core::field::norm;
use sphereflow_core::harness::{make_cap_map, make_equator_map};
use sphereflow_core::{build_grid, run_flow, DomainGrid, DomainSpec, FlowConfig, FlowTrace, Scheme, SphereField};

fn ball(n: usize) -> Arc<DomainGrid> {
    Arc::new(build_grid(DomainSpec::unit_ball(3, n)).unwrap())
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let r = norm(&v);
    [v[0] / r, v[1] / r, v[2] / r]
}

fn upper_vec() -> impl Strategy<Value = [f64; 3]> {
    (-1.0..1.0f64, -1.0..1.0f64, 0.01..1.0f64).prop_map(|(a, b, c)| unit([a, b, c]))
}

fn inside_ball_vec() -> impl Strategy<Value = [f64; 3]> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, 0.0..=1.0f64).prop_map(|(a, b, c, r)| {
        let n = norm(&[a, b, c]).max(1e-12);
        [a / n * r, b / n * r, c / n * r]
    })
}

fn field_of(grid: &Arc<DomainGrid>, vals: &[[f64; 3]]) -> SphereField {
    let n = grid.node_count();
    let flat: Vec<f64> = (0..n).flat_map(|i| vals[i % vals.len()]).collect();
    SphereField::from_values(grid.clone(), 3, flat, 0.0).unwrap()
}

/// Rotation from three Euler angles.
fn rotation(a: f64, b: f64, c: f64) -> Vec<f64> {
    let rz = |t: f64| [[t.cos(), -t.sin(), 0.0], [t.sin(), t.cos(), 0.0], [0.0, 0.0, 1.0]];
    let rx = |t: f64| [[1.0, 0.0, 0.0], [0.0, t.cos(), -t.sin()], [0.0, t.sin(), t.cos()]];
    let mul = |p: [[f64; 3]; 3], q: [[f64; 3]; 3]| {
        let mut o = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                o[i][j] = (0..3).map(|k| p[i][k] * q[k][j]).sum();
            }
        }
        o
    };
    let m = mul(mul(rz(a), rx(b)), rz(c));
    m.iter().flatten().copied().collect()
}

fn max_diff(a: &SphereField, b: &SphereField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn chart_round_trip(vals in prop::collection::vec(upper_vec(), 1..40)) {
        let g = ball(5);
        let u = field_of(&g, &vals);
        let back = from_chart(&to_chart(&u).unwrap()).unwrap();
        prop_assert!(max_diff(&u, &back) <= 1e-12);
    }

    #[test]
    fn from_chart_lands_on_the_sphere(vals in prop::collection::vec(prop::array::uniform2(-1e3..1e3f64), 1..40)) {
        let g = ball(5);
        let n = g.node_count();
        let flat: Vec<f64> = (0..n).flat_map(|i| vals[i % vals.len()]).collect();
        let v = ChartField::from_values(g.clone(), 2, flat, 0.0).unwrap();
        let u = from_chart(&v).unwrap();
        for i in 0..n {
            prop_assert!((u.norm_at(i) - 1.0).abs() <= 1e-15);
        }
    }

    #[test]
    fn glhf_keeps_norm_below_one_and_pins_boundary(vals in prop::collection::vec(inside_ball_vec(), 1..30), lambda in 1.0..1e4f64) {
        let g = ball(7);
        let u0 = field_of(&g, &vals);
        let mut cfg = FlowConfig::glhf(lambda, 1.0, 0.0);
        let rate = 6.0 / (g.h() * g.h());
        cfg.dt = cfg.cfl_bound(&g).min(1.0 / (rate + 2.0 * cfg.penalty_coefficient()));
        cfg.t_end = 20.0 * cfg.dt;
        let trace = run_flow(&u0, &cfg).unwrap();
        prop_assert!(trace.failure.is_none());
        for l in &trace.log {
            prop_assert!(l.sup_norm <= 1.0 + 1e-9);
        }
        for u in &trace.checkpoints {
            for &i in g.boundary_nodes() {
                prop_assert_eq!(u.at(i), u0.at(i));
            }
        }
    }

    #[test]
    fn projected_flow_stays_on_the_sphere(theta0 in 0.1..1.4f64) {
        let g = ball(9);
        let u0 = make_cap_map(&g, theta0, 2).unwrap();
        let cfg = FlowConfig::projected(FlowConfig::projected(1.0, 0.0).cfl_bound(&g), 0.0);
        let cfg = FlowConfig { t_end: 10.0 * cfg.dt, ..cfg };
        let trace = run_flow(&u0, &cfg).unwrap();
        for u in &trace.checkpoints {
            for i in 0..g.node_count() {
                if g.is_active(i) {
                    prop_assert!((u.norm_at(i) - 1.0).abs() <= 1e-15);
                }
            }
            for &i in g.boundary_nodes() {
                prop_assert_eq!(u.at(i), u0.at(i));
            }
        }
    }

    #[test]
    fn both_schemes_commute_with_rotations(a in 0.0..6.3f64, b in 0.0..3.1f64, c in 0.0..6.3f64, glhf in any::<bool>()) {
        let g = ball(9);
        let u0 = make_cap_map(&g, 0.9, 2).unwrap();
        let m = rotation(a, b, c);
        let mut cfg = FlowConfig::glhf(1e3, 1.0, 0.0);
        if !glhf {
            cfg.scheme = Scheme::ProjectedHhf;
        }
        let rate = 6.0 / (g.h() * g.h());
        cfg.dt = cfg.cfl_bound(&g).min(1.0 / (rate + 2.0 * cfg.penalty_coefficient()));
        cfg.t_end = 10.0 * cfg.dt;
        let rotated_first = run_flow(&u0.map_linear(&m), &cfg).unwrap();
        let rotated_after = run_flow(&u0, &cfg).unwrap().last().map_linear(&m);
        prop_assert!(max_diff(rotated_first.last(), &rotated_after) <= 1e-12);
    }

    #[test]
    fn singular_set_shrinks_with_threshold(e1 in 0.1..50.0f64, e2 in 0.1..50.0f64) {
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let g = ball(9);
        let u = make_equator_map(&g).unwrap();
        let cks: Vec<SphereField> = (0..3)
            .map(|k| {
                let mut c = u.clone();
                c.t = 0.05 * k as f64;
                c
            })
            .collect();
        let trace = FlowTrace::from_checkpoints(FlowConfig::projected(1e-3, 0.1), cks).unwrap();
        let radii = [0.25, 0.5];
        let big = singular_set(&trace, lo, &radii).unwrap();
        let small = singular_set(&trace, hi, &radii).unwrap();
        for p in &small.points {
            prop_assert!(big.contains(p.0, p.1));
        }
    }
}

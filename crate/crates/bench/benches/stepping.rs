use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};

use sphereflow_core::diagnostics::singular_set;
use sphereflow_core::harness::{make_cap_map, make_equator_map};
use sphereflow_core::stencil::laplacian;
use sphereflow_core::{build_grid, glhf_step, hhf_projected_step, DomainSpec, FlowConfig, FlowTrace};

fn steps(c: &mut Criterion) {
    let g = Arc::new(build_grid(DomainSpec::unit_ball(3, 33)).unwrap());
    let u = make_cap_map(&g, 0.9, 2).unwrap();
    let dt = FlowConfig::projected(1.0, 0.0).cfl_bound(&g);
    let mut glhf = FlowConfig::glhf(1e3, dt, 1.0);
    glhf.dt = dt.min(1.0 / (6.0 / (g.h() * g.h()) + 2.0 * glhf.penalty_coefficient()));
    let projected = FlowConfig::projected(dt, 1.0);

    c.bench_function("laplacian n=33", |b| b.iter(|| laplacian(black_box(&u))));
    c.bench_function("glhf_step n=33", |b| b.iter(|| glhf_step(black_box(&u), &glhf).unwrap()));
    c.bench_function("hhf_projected_step n=33", |b| {
        b.iter(|| hhf_projected_step(black_box(&u), &projected).unwrap())
    });
}

fn diagnostics(c: &mut Criterion) {
    let g = Arc::new(build_grid(DomainSpec::unit_ball(3, 17)).unwrap());
    let u = make_equator_map(&g).unwrap();
    let cks = (0..5)
        .map(|k| {
            let mut f = u.clone();
            f.t = 0.02 * k as f64;
            f
        })
        .collect();
    let trace = FlowTrace::from_checkpoints(FlowConfig::projected(1e-3, 0.08), cks).unwrap();
    c.bench_function("singular_set n=17", |b| {
        b.iter(|| singular_set(black_box(&trace), 1.0, &[0.125, 0.25]).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = steps, diagnostics
}
criterion_main!(benches);

use dopt::bnb::{solve, BnbConfig, BoundKind};
use dopt::model::{gen_integer_sparse, Instance, Kind};
use std::time::Instant;

fn main() {
    for seed in [3u64, 4] {
        let inst = gen_integer_sparse(6, 2, 4, 0.7, seed);
        let capped = Instance::new(
            inst.a().clone(),
            inst.l().to_vec(),
            inst.u().iter().map(|&v| v.min(3)).collect(),
            4,
            Kind::Integer,
        )
        .unwrap();
        for bound in [BoundKind::Natural, BoundKind::Gamma] {
            let config = BnbConfig { bound_kind: bound, ..Default::default() };
            let t0 = Instant::now();
            let (sol, stats) = solve(&capped, &config).unwrap();
            println!(
                "seed={seed} bound={:?}: {:?} nodes={} cuts={} lsi={} obj={} optimal={}",
                bound,
                t0.elapsed(),
                stats.nodes,
                stats.cuts,
                stats.lsi,
                sol.objective,
                stats.optimal
            );
        }
    }
}

use dopt::model::gen_binary_gaussian;
use dopt::relax::RelaxOptions;
use dopt::relax_gamma::{build_gamma_context, solve_gamma_relaxation};
use dopt::relax_natural::solve_natural_relaxation;
use std::time::Instant;

fn main() {
    for (n, m, s) in [(10usize, 3usize, 5i64), (12, 3, 6), (12, 9, 9)] {
        let inst = gen_binary_gaussian(n, m, s, 42);
        let opts = RelaxOptions { tol: 1e-6, max_iter: 2000, ..Default::default() };
        let t0 = Instant::now();
        let nat = solve_natural_relaxation(&inst, &opts).unwrap();
        let t_nat = t0.elapsed();
        let ctx = build_gamma_context(inst.a()).unwrap();
        let t = n - s as usize;
        let ly = vec![0i64; n];
        let uy = vec![1i64; n];
        let t0 = Instant::now();
        let gam = solve_gamma_relaxation(&ctx, &ly, &uy, t, &opts).unwrap();
        let t_gam = t0.elapsed();
        println!(
            "n={n} m={m} s={s}: natural iters={} gap={:.2e} ({t_nat:?}); gamma iters={} gap={:.2e} ({t_gam:?}) bounds {:.6} / {:.6}",
            nat.iterations, nat.gap, gam.iterations, gam.gap, nat.certificate.value, gam.certificate.value
        );
    }
}

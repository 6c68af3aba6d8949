use dopt::fusion::{bound_report, samples};
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    println!("sample A (expects z_n, z_s, z_h = 2.622/2.324/1.946, 3.714/4.302/3.738, 4.205/4.745/4.836):");
    for budget in 1..=3 {
        let fu = samples::sample_a(budget);
        let rep = bound_report(&fu, 1e-8, true).unwrap();
        println!(
            "  budget {budget}: z_n={:.3} z_s={:.3} z_h={:.3} z_g={:.3} z_cg={:.3} opt={:.3}",
            rep.z_natural, rep.z_spectral, rep.z_hadamard, rep.z_gamma, rep.z_comp_gamma,
            rep.z_opt.unwrap()
        );
    }
    println!("sample B (expects z_n, z_cg, z_h, z_g = 2.174/2.024/1.792/1.792, 3.162/3.174/3.584/3.196):");
    for budget in 1..=2 {
        let fu = samples::sample_b(budget);
        let rep = bound_report(&fu, 1e-8, true).unwrap();
        println!(
            "  budget {budget}: z_n={:.3} z_cg={:.3} z_h={:.3} z_g={:.3} (z_s={:.3}) opt={:.3}",
            rep.z_natural, rep.z_comp_gamma, rep.z_hadamard, rep.z_gamma, rep.z_spectral,
            rep.z_opt.unwrap()
        );
    }
    println!("elapsed {:?}", t0.elapsed());
}

//! Monte-Carlo of the rank-one perturbation bounds: relative singular value error against
//! 1/N and singular vector error against 3/N.
//!
//! cargo run --release --example perturbation_rates

use dynoct::spectral::{perturbation_report, rank_one_plus_noise};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dynoct::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    println!("       N   max N*sigma_err   max N*vec_err   vec_err<=3/N");
    for n in [10.0, 100.0, 1000.0] {
        let (mut cs, mut cv, mut ok) = (0.0f64, 0.0f64, 0);
        for _ in 0..100 {
            let (a, ac) = rank_one_plus_noise(40, 80, n, &mut rng)?;
            let rep = perturbation_report(&a, &ac)?;
            cs = cs.max(rep.sigma_rel_err * rep.n);
            cv = cv.max(rep.vec_err * rep.n);
            ok += usize::from(rep.vec_err <= 3.0 / rep.n);
        }
        println!("{n:>8} {cs:>17.4} {cv:>15.4} {ok:>10}/100");
    }
    Ok(())
}

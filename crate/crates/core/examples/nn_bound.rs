//! Expected absolute error of 1-nearest-neighbour copying, by number of
//! demonstrations, for rough and smooth kernels.
use gp_icl::kernel::{KernelSpec, NoiseSpec, Smoothness};
use gp_icl::nn_bound::bound_for_demos;

fn main() -> gp_icl::Result<()> {
    let noise = NoiseSpec::new(0.001)?;
    let kernels = [
        KernelSpec::matern(Smoothness::Half, 1.0, 0.001)?,
        KernelSpec::squared_exponential(8.0, 0.001)?,
    ];
    println!("{:>8} {:>14} {:>14}", "demos", kernels[0].label(), kernels[1].label());
    for n in [1, 2, 5, 10, 25, 49] {
        let a = bound_for_demos(&kernels[0], &noise, n, 29.0)?.unwrap_or(f64::NAN);
        let b = bound_for_demos(&kernels[1], &noise, n, 29.0)?.unwrap_or(f64::NAN);
        println!("{n:>8} {a:>14.6} {b:>14.6}");
    }
    Ok(())
}

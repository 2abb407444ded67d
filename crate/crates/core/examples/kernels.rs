//! Kernel values at a few distances, and a small Gram matrix.
use gp_icl::kernel::{gram_matrix, KernelSpec, NoiseSpec, Smoothness};

fn main() -> gp_icl::Result<()> {
    let kernels = [
        KernelSpec::matern(Smoothness::Half, 1.0, 1.0)?,
        KernelSpec::matern(Smoothness::ThreeHalves, 1.0, 1.0)?,
        KernelSpec::matern(Smoothness::FiveHalves, 1.0, 1.0)?,
        KernelSpec::squared_exponential(1.0, 1.0)?,
    ];
    print!("{:<24}", "distance");
    for d in [0.0, 0.5, 1.0, 2.0, 4.0] {
        print!("{d:>10}");
    }
    println!();
    for k in &kernels {
        print!("{:<24}", k.label());
        for d in [0.0, 0.5, 1.0, 2.0, 4.0] {
            print!("{:>10.5}", k.kernel_value(d)?);
        }
        println!();
    }

    let points = [vec![0.0], vec![1.0], vec![3.0]];
    let g = gram_matrix(&kernels[3], &NoiseSpec::new(0.01)?, &points)?;
    println!("\nSE Gram matrix with noise 0.01:{g}");
    Ok(())
}

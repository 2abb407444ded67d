//! Posterior predictive at a query, and the same computed for every
//! prefix of a demonstration list from one factorization.
use gp_icl::gp::{posterior_predictive, Demo, PrefixPosterior};
use gp_icl::kernel::{KernelSpec, NoiseSpec, Smoothness};

fn main() -> gp_icl::Result<()> {
    let kernel = KernelSpec::matern(Smoothness::FiveHalves, 2.0, 1.0)?;
    let noise = NoiseSpec::new(0.01)?;
    let demos = vec![
        Demo::new(vec![0.0], 0.1),
        Demo::new(vec![1.5], 0.8),
        Demo::new(vec![3.0], -0.4),
        Demo::new(vec![4.0], -0.9),
    ];
    let query = [2.0];

    let p = posterior_predictive(&kernel, &noise, &demos, &query)?;
    println!(
        "f(2.0) | 4 demos: mean {:.4}, var(f) {:.4}, var(y) {:.4}",
        p.mean, p.variance_f, p.variance_y
    );

    // Points are the demos followed by the query; prefix n conditions on
    // the first n and predicts point n.
    let mut points: Vec<&[f64]> = demos.iter().map(|d| d.x.as_slice()).collect();
    points.push(&query);
    let mut ys: Vec<f64> = demos.iter().map(|d| d.y).collect();
    ys.push(0.0);
    let prefix = PrefixPosterior::new(&kernel, &noise, points, ys)?;
    for n in 0..prefix.len() {
        let p = prefix.prefix(n)?;
        println!("prefix {n}: mean {:+.4}, var(y) {:.4}", p.mean, p.variance_y);
    }
    Ok(())
}

//! Scores a predictor's outputs under each candidate kernel's posterior
//! predictive and reports which kernel explains them best.
use std::collections::HashSet;

use gp_icl::bias::{bias_report, symlog, CandidateSet};
use gp_icl::kernel::{KernelSpec, Smoothness};
use gp_icl::predictor::{run_predictions, GpMeanPredictor};
use gp_icl::tasks::{generate_taskset, GenConfig};

fn main() -> gp_icl::Result<()> {
    let truth = KernelSpec::matern(Smoothness::ThreeHalves, 1.0, 0.001)?;
    let config = GenConfig {
        n_functions: 20,
        ..GenConfig::standard(truth, 1, 11)
    };
    let ts = generate_taskset(&config)?;
    let predictor = GpMeanPredictor::new(truth, config.noise);
    let mut records = Vec::new();
    run_predictions(&predictor, &ts, 0..=49, 1, &HashSet::new(), &mut |r| {
        records.push(r);
        Ok(())
    })?;

    for adjust in [false, true] {
        let report = bias_report(&records, &CandidateSet::standard(), &ts, adjust)?;
        println!("adjust={adjust} tau2={:?} best={}", report.tau2, report.argmax_kernel.label());
        for s in &report.scores {
            println!("  {:<28} mean {:>10.4}  symlog {:>7.3}", s.kernel.label(), s.mean_loglik, symlog(s.mean_loglik));
        }
    }
    Ok(())
}

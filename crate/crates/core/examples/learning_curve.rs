//! Learning curves with bootstrap intervals for the GP-mean and
//! nearest-neighbour predictors on the same tasks, written as CSV.
use std::collections::HashSet;

use gp_icl::curve::{curve_report, learning_curves, BootstrapConfig};
use gp_icl::kernel::KernelSpec;
use gp_icl::nn_bound::bound_for_demos;
use gp_icl::predictor::{run_predictions, GpMeanPredictor, NearestNeighborPredictor, Predictor};
use gp_icl::tasks::{generate_taskset, GenConfig};

fn main() -> gp_icl::Result<()> {
    let kernel = KernelSpec::squared_exponential(8.0, 0.001)?;
    let config = GenConfig {
        n_functions: 40,
        ..GenConfig::standard(kernel, 1, 3)
    };
    let ts = generate_taskset(&config)?;

    let predictors: [Box<dyn Predictor>; 2] = [
        Box::new(GpMeanPredictor::new(kernel, config.noise)),
        Box::new(NearestNeighborPredictor::default()),
    ];
    let mut records = Vec::new();
    for p in &predictors {
        run_predictions(p.as_ref(), &ts, 0..=49, 1, &HashSet::new(), &mut |r| {
            records.push(r);
            Ok(())
        })?;
    }

    let curves: Vec<_> = learning_curves(&records, &BootstrapConfig::default())?.into_iter().collect();
    let bound: Vec<(usize, Option<f64>)> = (0..50)
        .map(|n| Ok((n, bound_for_demos(&kernel, &config.noise, n, config.input_length())?)))
        .collect::<gp_icl::Result<_>>()?;
    let report = curve_report(&curves, Some(&bound), None)?;
    print!("{}", report.to_csv()?);
    Ok(())
}

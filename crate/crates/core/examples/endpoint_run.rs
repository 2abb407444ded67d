//! Queries an OpenAI-compatible chat endpoint on a few prefix tasks.
//!
//!     GP_ICL_BASE_URL=http://localhost:8000/v1 GP_ICL_MODEL=my-model \
//!         cargo run --example endpoint_run
//!
//! Set `GP_ICL_API_KEY` if the server wants a bearer token.
use std::collections::HashSet;

use gp_icl::kernel::KernelSpec;
use gp_icl::predictor::{run_predictions, EndpointConfig, EndpointPredictor};
use gp_icl::tasks::{generate_taskset, GenConfig};

fn main() -> gp_icl::Result<()> {
    let (Ok(base_url), Ok(model)) = (std::env::var("GP_ICL_BASE_URL"), std::env::var("GP_ICL_MODEL")) else {
        eprintln!("set GP_ICL_BASE_URL and GP_ICL_MODEL to run this example");
        return Ok(());
    };
    let mut config = EndpointConfig::new(base_url, model);
    config.api_key_env = Some("GP_ICL_API_KEY".into());
    config.max_retries = 1;
    let predictor = EndpointPredictor::new(config)?;

    let gen = GenConfig {
        n_functions: 2,
        ..GenConfig::standard(KernelSpec::squared_exponential(8.0, 0.001)?, 1, 0)
    };
    let ts = generate_taskset(&gen)?;
    let summary = run_predictions(&predictor, &ts, 0..=4, 2, &HashSet::new(), &mut |r| {
        println!("{} n={} target {:+.4} -> {:?} {:?}", r.episode_id, r.n, r.y_target, r.y_hat, r.error);
        Ok(())
    })?;
    println!("{summary:?}");
    Ok(())
}

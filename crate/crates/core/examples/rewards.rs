//! Rewards for a group of sampled completions and their advantages.
use gp_icl::gp::Demo;
use gp_icl::kernel::{KernelSpec, NoiseSpec};
use gp_icl::reward::{advantages, reward, RewardConfig, RewardContext};

fn main() -> gp_icl::Result<()> {
    let demos = [Demo::new(vec![1.0], 0.2), Demo::new(vec![2.0], 0.35)];
    let ctx = RewardContext {
        demos: &demos,
        query: &[2.5],
        y_target: 0.4,
    };
    let completions = ["Y: 0.41", "0.3", "I think 12", "no clue"];
    let configs = [
        ("neg_abs_error", RewardConfig::neg_abs_error()),
        (
            "log_lik",
            RewardConfig::log_lik(KernelSpec::squared_exponential(8.0, 1.0)?, NoiseSpec::new(0.001)?),
        ),
    ];
    for (name, cfg) in &configs {
        let rs: Vec<f64> = completions.iter().map(|c| reward(cfg, c, &ctx)).collect();
        let adv = advantages(&rs).values;
        println!("{name}");
        for ((c, r), a) in completions.iter().zip(&rs).zip(&adv) {
            println!("  {c:<12} reward {r:>10.4} advantage {a:>+7.3}");
        }
    }
    Ok(())
}

//! Renders prompts for one and two input dimensions and parses a few
//! completions.
use gp_icl::gp::Demo;
use gp_icl::prompt::{parse_prediction, render_prompt, DEFAULT_DECIMALS};

fn main() -> gp_icl::Result<()> {
    let demos = vec![Demo::new(vec![1.25], 0.5), Demo::new(vec![7.0], -0.125)];
    println!("{}\n", render_prompt(&demos, &[3.5], 1, DEFAULT_DECIMALS)?.text);

    let demos = vec![Demo::new(vec![1.0, 2.0], 0.25)];
    println!("{}\n", render_prompt(&demos, &[4.0, 5.5], 2, DEFAULT_DECIMALS)?.text);

    for completion in ["Y: 0.731", "maybe 2, or rather -1.5e-1", "no idea"] {
        let p = parse_prediction(completion);
        println!("{completion:?} -> {:?} (span {:?})", p.value, p.matched_span);
    }
    Ok(())
}

//! Generates a small task set, prints its summary and the first prefix
//! task of the first episode, and writes it as JSONL.
use gp_icl::kernel::KernelSpec;
use gp_icl::tasks::{generate_taskset, GenConfig};

fn main() -> gp_icl::Result<()> {
    let config = GenConfig {
        n_functions: 5,
        ..GenConfig::standard(KernelSpec::squared_exponential(8.0, 0.001)?, 2, 7)
    };
    let ts = generate_taskset(&config)?;
    println!("{}", ts.summary());

    let task = ts.episodes[0].prefix_task(3)?;
    for d in &task.demos {
        println!("demo x={:?} y={:+.5}", d.x, d.y);
    }
    println!("query x={:?} target={:+.5}", task.query, task.target);

    let path = std::env::temp_dir().join("gp_icl_example_tasks.jsonl");
    ts.write_to(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}

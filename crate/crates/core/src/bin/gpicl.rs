fn main() {
    std::process::exit(gp_icl::cli::run_cli(std::env::args_os()));
}

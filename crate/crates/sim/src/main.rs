fn main() {
    std::process::exit(setslam_sim::run_cli(std::env::args_os()));
}

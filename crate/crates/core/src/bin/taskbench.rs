fn main() {
    std::process::exit(taskbench::cli::cli_main(std::env::args_os()));
}

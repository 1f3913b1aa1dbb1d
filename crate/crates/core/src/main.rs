fn main() {
    std::process::exit(qres::cli::run(std::env::args_os()));
}

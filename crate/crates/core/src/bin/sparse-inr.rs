fn main() {
    std::process::exit(sparse_inr::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(dgcg::cli::main_from(std::env::args_os()));
}

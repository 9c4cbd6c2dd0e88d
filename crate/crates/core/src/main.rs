fn main() {
    std::process::exit(eoslab::cli::main_with_args(std::env::args_os()));
}

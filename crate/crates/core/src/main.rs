fn main() {
    std::process::exit(pfcreduce::cli::main_with_args(std::env::args_os()));
}

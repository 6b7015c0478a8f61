fn main() {
    std::process::exit(crowdkin::cli::main(std::env::args_os()));
}

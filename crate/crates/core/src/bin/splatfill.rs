fn main() {
    std::process::exit(splatfill::cli::run(std::env::args_os()));
}

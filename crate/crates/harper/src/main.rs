use std::process;

fn main() {
    process::exit(harper::cli::run());
}

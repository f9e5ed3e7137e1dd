use std::process;

fn main() {
    process::exit(saganet::cli::main_entry(std::env::args_os()));
}

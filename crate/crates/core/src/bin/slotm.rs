fn main() {
    std::process::exit(slotmachine::cli::cli_main(std::env::args_os()));
}

fn main() {
    std::process::exit(gloss_nmt::cli::main_with_exit_code());
}

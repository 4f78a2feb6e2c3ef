fn main() {
    std::process::exit(discomax::cli::main_entry());
}

fn main() {
    std::process::exit(spfc::cli::main_entry());
}

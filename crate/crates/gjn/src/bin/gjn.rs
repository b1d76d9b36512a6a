fn main() {
    std::process::exit(gjn::cli::main());
}

fn main() {
    std::process::exit(seatrade::cli::main());
}

fn main() {
    std::process::exit(pushpull::cli::run());
}

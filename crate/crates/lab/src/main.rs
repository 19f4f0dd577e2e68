fn main() {
    std::process::exit(minmass::run(std::env::args_os()));
}

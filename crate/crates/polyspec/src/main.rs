fn main() {
    std::process::exit(polyspec::run(std::env::args_os()));
}

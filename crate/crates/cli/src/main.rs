fn main() {
    std::process::exit(glr_adapt::run(std::env::args_os()));
}

fn main() {
    env_logger::init();
    std::process::exit(rkit::dispatch(std::env::args_os()));
}

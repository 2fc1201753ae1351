fn main() {
    std::process::exit(driver_telemetry::cli::run(std::env::args_os()));
}

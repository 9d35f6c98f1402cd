fn main() {
    std::process::exit(fsk_pnc::cli::run(std::env::args_os()));
}

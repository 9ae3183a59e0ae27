fn main() {
    std::process::exit(deform_dcf::cli::run(std::env::args_os()));
}

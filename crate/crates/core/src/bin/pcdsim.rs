fn main() {
    std::process::exit(vanet_pcd::cli::run(std::env::args_os()));
}

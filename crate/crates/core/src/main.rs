fn main() {
    std::process::exit(dma_wpt::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(ic_maxmin::cli::cli_main(std::env::args_os()));
}

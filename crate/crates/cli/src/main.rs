fn main() {
    if let Err(e) = norbn_cli::run(std::env::args_os().collect()) {
        eprintln!("error: {e:#}");
        std::process::exit(norbn_cli::exit_code(&e));
    }
}

fn main() {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = hca_traffic::cli::main_with_args(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock());
    std::process::exit(code);
}

fn main() {
    let argv: Vec<String> = std::env::args().collect();
    let out = lll_core::cli::run(&argv);
    print!("{}", out.stdout);
    eprint!("{}", out.stderr);
    std::process::exit(out.code);
}

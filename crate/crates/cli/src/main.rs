use std::io;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<String> = std::env::args().collect();
    let code = vpal_cli::main_with(&argv, io::stdin().lock(), io::stdout().lock(), io::stderr());
    std::process::exit(code);
}

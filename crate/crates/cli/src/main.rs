use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = qbyte_cli::Cli::parse();
    if let Err(e) = qbyte_cli::run(&cli) {
        eprintln!("qbyte: {e}");
        std::process::exit(e.exit_code());
    }
}

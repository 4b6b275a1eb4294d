use clap::Parser;

fn main() {
    env_logger::init();
    let cli = photovel::cli::Cli::parse();
    let env_out = std::env::var(photovel::cli::OUT_ENV).ok();
    std::process::exit(photovel::cli::main_with(cli, env_out));
}

use clap::Parser;

fn main() {
    let cli = contrakit_cli::Cli::parse();
    let code = contrakit_cli::run(
        cli,
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    );
    std::process::exit(code);
}

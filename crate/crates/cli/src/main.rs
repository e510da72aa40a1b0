use clap::Parser;

fn main() {
    let cli = dmn::Cli::parse();
    if let Err(e) = dmn::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

use clap::Parser;

fn main() {
    let cli = plspress::cli::Cli::parse();
    if let Err(e) = plspress::cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

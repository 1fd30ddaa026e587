use clap::Parser;

fn main() {
    std::process::exit(isp_cli::main_with(isp_cli::Cli::parse()));
}

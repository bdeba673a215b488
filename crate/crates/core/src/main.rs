use clap::Parser;

fn main() {
    std::process::exit(auditbench::cli::execute(auditbench::cli::Cli::parse()));
}

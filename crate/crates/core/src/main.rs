use clap::Parser;

fn main() {
    let cli = rdsnet::cli::Cli::parse();
    match rdsnet::cli::run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(rdsnet::cli::exit_code(&e));
        }
    }
}

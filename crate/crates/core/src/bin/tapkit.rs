fn main() { std::process::exit(tapkit::cli::main()) }

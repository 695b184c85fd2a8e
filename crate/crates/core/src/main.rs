use std::io;

fn main() {
    env_logger::init();
    let code = chrv::cli::main_with(std::env::args_os(), &mut io::stdin().lock(), &mut io::stdout(), &mut io::stderr());
    std::process::exit(code);
}

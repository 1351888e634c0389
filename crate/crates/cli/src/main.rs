use std::io;

fn main() {
    lcqp_cli::init_logging();
    let code = lcqp_cli::run(std::env::args_os(), &mut io::stdout(), &mut io::stderr());
    std::process::exit(code);
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("CATCON_LOG")).init();
    std::process::exit(catcon::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(meshvae_cli::run(std::env::args_os()));
}

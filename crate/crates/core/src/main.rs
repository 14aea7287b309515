fn main() -> std::process::ExitCode {
    npc_major::cli::run(std::env::args_os())
}

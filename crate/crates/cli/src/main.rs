fn main() -> std::process::ExitCode {
    srqed_cli::main_entry()
}

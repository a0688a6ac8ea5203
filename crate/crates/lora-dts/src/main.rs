use std::process::ExitCode;

fn main() -> ExitCode {
    lora_dts::cli::main_with_args(std::env::args_os())
}

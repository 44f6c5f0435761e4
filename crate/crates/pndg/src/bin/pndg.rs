use std::process::ExitCode;

fn main() -> ExitCode {
    // Rust ignores SIGPIPE by default, turning a closed pipe into a panic
    // inside print macros; restore the default so `pndg ... | head` ends
    // the process quietly.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    ExitCode::from(pndg::cli::run(std::env::args_os()) as u8)
}

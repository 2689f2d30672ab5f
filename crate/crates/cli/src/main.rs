use clap::Parser;
use plurisym_cli::{configure_threads, execute, Cli, EXIT_CONFIG, EXIT_OK};

/// Keeps freed field buffers in the heap. Otherwise glibc hands each
/// megabyte-sized buffer back to the kernel and faults it in again on the
/// next step.
fn keep_freed_buffers() {
    #[cfg(all(target_os = "linux", target_env = "gnu"))]
    unsafe {
        libc::mallopt(libc::M_MMAP_THRESHOLD, 1 << 30);
        libc::mallopt(libc::M_TRIM_THRESHOLD, 1 << 30);
    }
}

fn main() {
    keep_freed_buffers();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("plurisym: {e}");
        std::process::exit(e.exit_code());
    }
    match execute(&cli) {
        Ok(done) => {
            if let Some(m) = &done.message {
                eprintln!("plurisym: {m}");
            }
            std::process::exit(done.code);
        }
        Err(e) => {
            eprintln!("plurisym: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

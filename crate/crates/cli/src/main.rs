fn main() {
    std::process::exit(shortcut_lab_cli::run(std::env::args_os()));
}

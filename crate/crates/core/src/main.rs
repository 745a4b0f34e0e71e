use std::path::PathBuf;

use grwm::cli::{main_with_args, CONFIG_ENV};

fn main() {
    let env_config = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
    std::process::exit(main_with_args(std::env::args_os(), env_config));
}

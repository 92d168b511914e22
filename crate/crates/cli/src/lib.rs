//! Configuration, run store and subcommand implementations for the `liftlab` binary.

pub mod commands;
pub mod config;
pub mod store;

#[derive(Debug)]
pub enum CliError {
    Config(Vec<String>),
    Numerical(String),
    Acceptance(usize),
    Io(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Acceptance(_) => 4,
        }
    }

    pub fn report(&self) {
        match self {
            CliError::Config(errs) => {
                eprintln!("configuration error:");
                for e in errs {
                    eprintln!("  {e}");
                }
            }
            CliError::Numerical(e) => eprintln!("numerical failure: {e}"),
            CliError::Acceptance(n) => eprintln!("{n} acceptance criteria failed"),
            CliError::Io(e) => eprintln!("i/o error: {e}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

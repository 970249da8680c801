use std::fmt::Display;
use std::fs;
use std::path::Path;

pub const USAGE: u8 = 1;
pub const INPUT: u8 = 2;
pub const INTERNAL: u8 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub type CliResult<T> = Result<T, Failure>;

pub fn fail(code: u8, error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code,
        error: error.into(),
    }
}

pub fn usage(msg: impl Display) -> Failure {
    fail(USAGE, anyhow::anyhow!("{msg}"))
}

pub fn input(msg: impl Display) -> Failure {
    fail(INPUT, anyhow::anyhow!("{msg}"))
}

/// Extension for tagging library errors with an exit code.
pub trait Tag<T> {
    fn or_input(self) -> CliResult<T>;
    fn or_internal(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Tag<T> for Result<T, E> {
    fn or_input(self) -> CliResult<T> {
        self.map_err(|e| fail(INPUT, e))
    }

    fn or_internal(self) -> CliResult<T> {
        self.map_err(|e| fail(INTERNAL, e))
    }
}

pub fn require(path: &Path) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(input(format!("missing input: {}", path.display())))
    }
}

pub fn read_text(path: &Path) -> CliResult<String> {
    require(path)?;
    fs::read_to_string(path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))
}

pub fn write_text(path: &Path, content: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| input(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, content).map_err(|e| input(format!("cannot write {}: {e}", path.display())))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

pub fn write_or_stdout(path: Option<&Path>, content: &str) -> CliResult<()> {
    match path {
        Some(p) => write_text(p, content),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

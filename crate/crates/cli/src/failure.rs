use std::fmt;
use std::path::Path;

/// An error with the exit code it maps to: 2 for usage, 3 for runtime.
#[derive(Debug)]
pub struct Failure {
    usage: bool,
    message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { usage: true, message: message.into() }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self { usage: false, message: message.into() }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::runtime(format!("{}: {e}", path.display()))
    }

    pub fn code(&self) -> u8 {
        if self.usage {
            2
        } else {
            3
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

macro_rules! runtime_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Self::runtime(e.to_string())
            }
        }
    )*};
}

runtime_from!(
    hexns::accept::AcceptError,
    hexns::io::ReportError,
    hexns::io::CheckpointError,
    hexns::farfield::FarFieldError,
    hexns::kernels::KernelError,
    hexns::verify::VerifyError
);

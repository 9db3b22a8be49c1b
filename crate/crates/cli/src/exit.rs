//! Exit codes: 0 success, 1 validation failure, 2 configuration error,
//! 3 too many failed inference requests.

use std::fmt;

pub const VALIDATION: u8 = 1;
pub const CONFIG: u8 = 2;
pub const INFERENCE: u8 = 3;

#[derive(Debug)]
pub struct Exit {
    pub code: u8,
    pub message: String,
}

impl fmt::Display for Exit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Exit {}

impl Exit {
    pub fn new(code: u8, message: impl fmt::Display) -> anyhow::Error {
        anyhow::Error::new(Exit {
            code,
            message: message.to_string(),
        })
    }

    pub fn config(e: impl fmt::Display) -> anyhow::Error {
        Self::new(CONFIG, format!("{e:#}"))
    }

    pub fn validation(e: impl fmt::Display) -> anyhow::Error {
        Self::new(VALIDATION, format!("{e:#}"))
    }
}

/// Tagged errors keep their code; anything else is a validation/data failure.
pub fn code_of(e: &anyhow::Error) -> u8 {
    e.chain()
        .find_map(|c| c.downcast_ref::<Exit>())
        .map(|x| x.code)
        .unwrap_or(VALIDATION)
}

//! Exit codes and the machine-readable error line.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Kind {
    BadConfig,
    BadData,
    NumericalFailure,
}

impl Kind {
    pub fn exit_code(self) -> u8 {
        match self {
            Kind::BadConfig => 2,
            Kind::BadData => 3,
            Kind::NumericalFailure => 4,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub kind: Kind,
    pub message: String,
}

impl Failure {
    pub fn new(kind: Kind, message: impl Into<String>) -> Self {
        Self { kind, message: message.into() }
    }

    /// One JSON object on one line, for stderr.
    pub fn line(&self) -> String {
        serde_json::json!({ "error": self.kind, "code": self.kind.exit_code(), "message": self.message }).to_string()
    }
}

impl From<rbce::Error> for Failure {
    fn from(e: rbce::Error) -> Self {
        use rbce::Error as E;
        let kind = if e.is_numerical() {
            Kind::NumericalFailure
        } else if matches!(e, E::InvalidConfig(_) | E::EmptyInput(_) | E::DivisionByZero(_)) {
            Kind::BadConfig
        } else {
            Kind::BadData
        };
        Self::new(kind, e.to_string())
    }
}

use std::fmt;

use serde_json::json;

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            kind: "usage",
            message: message.into(),
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            kind: "input",
            message: message.into(),
        }
    }

    pub fn io(context: &str, err: impl fmt::Display) -> Self {
        CliError {
            kind: "io",
            message: format!("{context}: {err}"),
        }
    }

    /// 3 for numerical failures, 2 for everything the caller can fix.
    pub fn exit_code(&self) -> u8 {
        if self.kind == "numerical" {
            3
        } else {
            2
        }
    }

    /// Single-line JSON for stderr.
    pub fn to_json_line(&self) -> String {
        json!({
            "error": self.kind,
            "code": self.exit_code(),
            "message": self.message,
        })
        .to_string()
    }
}

impl From<ptring::Error> for CliError {
    fn from(e: ptring::Error) -> Self {
        let kind = match &e {
            _ if e.is_numerical() => "numerical",
            ptring::Error::Io(_) => "io",
            ptring::Error::Parse { .. } => "parse",
            _ => "input",
        };
        CliError {
            kind,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_error_class() {
        assert_eq!(CliError::from(ptring::Error::ZeroAccidentals).exit_code(), 3);
        assert_eq!(
            CliError::from(ptring::Error::Parse {
                line: 3,
                message: "x".into()
            })
            .exit_code(),
            2
        );
        assert_eq!(CliError::usage("bad flag").exit_code(), 2);
    }

    #[test]
    fn json_line_has_no_newlines() {
        let e = CliError::input("first\nsecond");
        let line = e.to_json_line();
        assert!(!line.contains('\n'));
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["code"], 2);
        assert_eq!(v["message"], "first\nsecond");
    }
}

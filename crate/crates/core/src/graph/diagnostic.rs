use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

/// 1-based source position. Spans are positional metadata only: they never
/// take part in equality or hashing, so graphs compare by structure.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Self { line, col }
    }
}

impl PartialEq for Span {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

impl Hash for Span {
    fn hash<H: Hasher>(&self, _state: &mut H) {}
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: String,
    pub message: String,
    pub line: u32,
    pub col: u32,
}

impl Diagnostic {
    pub fn error(code: &str, message: impl Into<String>, span: Span) -> Self {
        Self::new(Severity::Error, code, message, span)
    }

    pub fn warning(code: &str, message: impl Into<String>, span: Span) -> Self {
        Self::new(Severity::Warning, code, message, span)
    }

    fn new(severity: Severity, code: &str, message: impl Into<String>, span: Span) -> Self {
        Self {
            severity,
            code: code.to_string(),
            message: message.into(),
            line: span.line,
            col: span.col,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    pub fn span(&self) -> Span {
        Span::new(self.line, self.col)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {}[{}]: {}", self.line, self.col, sev, self.code, self.message)
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_error)
}

/// Diagnostic codes emitted by the parser and validator.
pub mod codes {
    pub const LEXICAL: &str = "lexical-error";
    pub const SYNTAX: &str = "syntax-error";
    pub const DUPLICATE: &str = "duplicate-declaration";
    pub const UNDEFINED: &str = "undefined-reference";
    pub const AMBIGUOUS: &str = "ambiguous-reference";
    pub const INVALID_COUNT: &str = "invalid-count";
    pub const CYCLIC_CONTAINMENT: &str = "cyclic-containment";
    pub const ARITY_MISMATCH: &str = "arity-mismatch";
    pub const LABEL_SET_PARENT: &str = "label-set-parent";
    pub const TYPE_MISMATCH: &str = "type-mismatch";
    pub const UNUSED_CONCEPT: &str = "unused-concept";
    pub const DUPLICATE_CONSTRAINT: &str = "duplicate-constraint";
}

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Approve,
    Revise,
}

pub const MALFORMED_REVIEW: &str = "malformed review";
pub const MISSING_CODE: &str = "missing code block";

/// Content of the first ``` fenced block, without the fence lines.
pub fn first_code_block(text: &str) -> Option<String> {
    let mut lines = text.lines();
    lines.by_ref().find(|l| l.trim_start().starts_with("```"))?;
    let mut body = Vec::new();
    for line in lines {
        if line.trim_start().starts_with("```") {
            return Some(body.join("\n"));
        }
        body.push(line);
    }
    None
}

/// Finds the `VERDICT: approve|revise` line. Returns the verdict and the
/// remaining text as notes.
pub fn parse_review(text: &str) -> Option<(Verdict, String)> {
    let mut verdict = None;
    let mut notes = Vec::new();
    for line in text.lines() {
        let t = line.trim();
        let upper = t.to_ascii_uppercase();
        if verdict.is_none() {
            if let Some(rest) = upper.strip_prefix("VERDICT:") {
                match rest.trim() {
                    "APPROVE" => {
                        verdict = Some(Verdict::Approve);
                        continue;
                    }
                    "REVISE" => {
                        verdict = Some(Verdict::Revise);
                        continue;
                    }
                    _ => {}
                }
            }
        }
        notes.push(line);
    }
    verdict.map(|v| (v, notes.join("\n").trim().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn code_blocks() {
        let text = "Here it is:\n```nsg\ngraph g {\n  concept a;\n}\n```\nand another\n```\nx\n```";
        assert_eq!(first_code_block(text).as_deref(), Some("graph g {\n  concept a;\n}"));
        assert_eq!(first_code_block("```\n```").as_deref(), Some(""));
        assert_eq!(first_code_block("no fence"), None);
        assert_eq!(first_code_block("```nsg\nunterminated"), None);
    }

    #[test]
    fn reviews() {
        assert_eq!(parse_review("VERDICT: approve"), Some((Verdict::Approve, String::new())));
        assert_eq!(
            parse_review("The label set is fine.\nAdd symmetry.\nverdict: Revise\n"),
            Some((Verdict::Revise, "The label set is fine.\nAdd symmetry.".to_string()))
        );
        assert_eq!(parse_review("  VERDICT:   REVISE  \nnotes after"), Some((Verdict::Revise, "notes after".into())));
    }

    #[test]
    fn malformed_reviews_have_no_verdict() {
        let corpus = [
            "",
            "Looks good to me.",
            "VERDICT approve",
            "VERDICT: maybe",
            "Verdict = revise",
            "My VERDICT: approve",
            "```\nVERDICT: approves\n```",
            "APPROVE",
        ];
        for text in corpus {
            assert_eq!(parse_review(text), None, "{text:?}");
        }
    }
}

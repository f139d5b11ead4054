//! Mapping free-text model answers onto a label set.

/// How an answer was matched, or why it was not.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnswerMatch {
    Exact(usize),
    CaseInsensitive(usize),
    Alias { label: usize, alias: String },
    Unparsed,
}

impl AnswerMatch {
    pub fn label(&self) -> Option<usize> {
        match self {
            AnswerMatch::Exact(i) | AnswerMatch::CaseInsensitive(i) => Some(*i),
            AnswerMatch::Alias { label, .. } => Some(*label),
            AnswerMatch::Unparsed => None,
        }
    }
}

/// Lowercase words of `text`, splitting on anything that is not a letter or
/// digit (so `is_more` and `IsMore`-free text both become plain words).
fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_lowercase).collect()
}

/// Aliases per label: the label's words joined with spaces, plus each word
/// that belongs to no other label.
pub fn alias_table(labels: &[String]) -> Vec<(String, usize)> {
    let split: Vec<Vec<String>> = labels.iter().map(|l| words(l)).collect();
    let mut table = Vec::new();
    for (i, ws) in split.iter().enumerate() {
        if ws.is_empty() {
            continue;
        }
        table.push((ws.join(" "), i));
        for w in ws {
            let shared = split.iter().enumerate().any(|(j, other)| j != i && other.contains(w));
            if !shared && ws.len() > 1 {
                table.push((w.clone(), i));
            }
        }
    }
    table
}

/// Exact match, then case-insensitive match, then the alias that occurs
/// earliest in the answer (longest wins at the same position). Two labels
/// tying on position and length leave the answer unparsed.
pub fn match_answer(answer: &str, labels: &[String]) -> AnswerMatch {
    let trimmed = answer.trim();
    if let Some(i) = labels.iter().position(|l| l == trimmed) {
        return AnswerMatch::Exact(i);
    }
    let lower = trimmed.to_lowercase();
    if let Some(i) = labels.iter().position(|l| l.to_lowercase() == lower) {
        return AnswerMatch::CaseInsensitive(i);
    }
    let answer_words = words(answer);
    let mut best: Option<(usize, usize, usize, &str)> = None;
    let mut tied = false;
    let table = alias_table(labels);
    for (alias, label) in &table {
        let alias_words: Vec<&str> = alias.split(' ').collect();
        let n = alias_words.len();
        let Some(pos) = answer_words.windows(n).position(|w| w.iter().zip(&alias_words).all(|(a, b)| a == b)) else {
            continue;
        };
        match best {
            Some((p, len, l, _)) if (pos, std::cmp::Reverse(n)) == (p, std::cmp::Reverse(len)) => {
                if l != *label {
                    tied = true;
                }
            }
            Some((p, len, _, _)) if (pos, std::cmp::Reverse(n)) > (p, std::cmp::Reverse(len)) => {}
            _ => {
                best = Some((pos, n, *label, alias));
                tied = false;
            }
        }
    }
    match best {
        Some((_, _, label, alias)) if !tied => AnswerMatch::Alias { label, alias: alias.to_string() },
        _ => AnswerMatch::Unparsed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn wiqa_aliases() {
        let l = labels(&["is_more", "is_less", "no_effect"]);
        let table = alias_table(&l);
        assert_eq!(
            table,
            vec![
                ("is more".to_string(), 0),
                ("more".to_string(), 0),
                ("is less".to_string(), 1),
                ("less".to_string(), 1),
                ("no effect".to_string(), 2),
                ("no".to_string(), 2),
                ("effect".to_string(), 2),
            ]
        );
        assert_eq!(match_answer("The answer is: less effect", &l).label(), Some(1));
        assert_eq!(match_answer("is_more", &l), AnswerMatch::Exact(0));
        assert_eq!(match_answer(" NO_EFFECT\n", &l), AnswerMatch::CaseInsensitive(2));
        assert_eq!(match_answer("I cannot tell", &l), AnswerMatch::Unparsed);
    }

    #[test]
    fn every_alias_resolves_to_its_label() {
        let sets = [
            labels(&["is_more", "is_less", "no_effect"]),
            labels(&["positive", "negative"]),
            labels(&["B", "I", "O"]),
            labels(&["World", "Sports", "Business", "Sci/Tech"]),
            labels(&["very_negative", "negative", "neutral", "positive", "very_positive"]),
        ];
        for set in &sets {
            for (alias, label) in alias_table(set) {
                let answer = format!("My final answer: {alias}.");
                assert_eq!(match_answer(&answer, set).label(), Some(label), "{alias} in {set:?}");
            }
        }
    }

    #[test]
    fn longest_alias_wins_at_the_same_position() {
        let l = labels(&["very_negative", "negative", "positive"]);
        assert_eq!(match_answer("very negative overall", &l).label(), Some(0));
        assert_eq!(match_answer("negative, very", &l).label(), Some(1));
    }

    #[test]
    fn ambiguous_answers_stay_unparsed() {
        let l = labels(&["cat", "dog"]);
        assert_eq!(match_answer("cat dog", &l).label(), Some(0));
        let l = labels(&["red_light", "red_wine"]);
        assert_eq!(match_answer("red", &l), AnswerMatch::Unparsed);
    }
}

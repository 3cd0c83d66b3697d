use crate::corpus::Rendering;
use crate::error::{Error, Result};

/// Reserved token opening a marked answer. Never produced by the generators.
pub const OPEN_MARKER: &str = "<a>";
/// Reserved token closing a marked answer.
pub const CLOSE_MARKER: &str = "</a>";

/// Returns the passage with the answer enclosed by the reserved markers.
pub fn mark_answer(rendering: &Rendering) -> Result<Vec<String>> {
    let (start, end) = rendering
        .answer_span
        .ok_or_else(|| Error::InvalidRecord("rendering has no answer span".into()))?;
    rendering.validate()?;
    let mut out = Vec::with_capacity(rendering.passage_tokens.len() + 2);
    for (i, tok) in rendering.passage_tokens.iter().enumerate() {
        if i == start {
            out.push(OPEN_MARKER.to_string());
        }
        out.push(tok.clone());
        if i == end {
            out.push(CLOSE_MARKER.to_string());
        }
    }
    Ok(out)
}

/// Strips the markers and returns the inclusive span they enclosed.
pub fn recover_answer(marked: &[String]) -> Result<(Vec<String>, (usize, usize))> {
    let opens: Vec<usize> = positions(marked, OPEN_MARKER);
    let closes: Vec<usize> = positions(marked, CLOSE_MARKER);
    match (opens.as_slice(), closes.as_slice()) {
        ([open], [close]) if open < close => {
            if close - open < 2 {
                return Err(Error::Unrecoverable("markers enclose no tokens".into()));
            }
            let passage: Vec<String> = marked
                .iter()
                .filter(|t| t.as_str() != OPEN_MARKER && t.as_str() != CLOSE_MARKER)
                .cloned()
                .collect();
            Ok((passage, (*open, close - 2)))
        }
        ([_], [_]) => Err(Error::Unrecoverable("answer markers are crossed".into())),
        (o, c) => Err(Error::Unrecoverable(format!(
            "expected one marker pair, found {} open and {} close",
            o.len(),
            c.len()
        ))),
    }
}

fn positions(tokens: &[String], marker: &str) -> Vec<usize> {
    tokens.iter().enumerate().filter(|(_, t)| t.as_str() == marker).map(|(i, _)| i).collect()
}

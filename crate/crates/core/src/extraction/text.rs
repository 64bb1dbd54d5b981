use crate::projection::{EmbedError, Embedder};

/// Paragraphs longer than this are re-split.
pub const MAX_PARAGRAPH_CHARS: usize = 1200;
/// Preferred length of a re-split piece.
pub const TARGET_PARAGRAPH_CHARS: usize = 800;

/// Splits text into sentences after `.`, `!` or `?` followed by whitespace.
pub fn split_sentences(text: &str) -> Vec<String> {
    sentence_ends(text)
        .windows(2)
        .map(|w| text[w[0]..w[1]].trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Byte offsets delimiting sentences, starting with 0 and ending with `text.len()`.
fn sentence_ends(text: &str) -> Vec<usize> {
    let mut ends = vec![0];
    let mut iter = text.char_indices().peekable();
    while let Some((_, c)) = iter.next() {
        if matches!(c, '.' | '!' | '?') {
            match iter.peek() {
                Some(&(next, n)) if n.is_whitespace() => ends.push(next),
                _ => {}
            }
        }
    }
    if *ends.last().unwrap() != text.len() {
        ends.push(text.len());
    }
    ends
}

/// Splits on blank lines and breaks oversized paragraphs near sentence boundaries.
pub fn chunk_document(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                split_long(&current.join("\n"), &mut out);
                current.clear();
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        split_long(&current.join("\n"), &mut out);
    }
    out
}

fn char_len(s: &str) -> usize {
    s.chars().count()
}

fn split_long(paragraph: &str, out: &mut Vec<String>) {
    let mut rest = paragraph.trim();
    while char_len(rest) > MAX_PARAGRAPH_CHARS {
        let cut = best_cut(rest);
        let (head, tail) = rest.split_at(cut);
        out.push(head.trim().to_string());
        rest = tail.trim();
    }
    if !rest.is_empty() {
        out.push(rest.to_string());
    }
}

/// Byte offset at which to split `text`: the sentence boundary nearest
/// [`TARGET_PARAGRAPH_CHARS`] that keeps the head within the limit, else the
/// nearest whitespace, else a hard cut.
fn best_cut(text: &str) -> usize {
    let boundaries: Vec<usize> = sentence_ends(text)
        .into_iter()
        .filter(|&b| b > 0 && b < text.len())
        .collect();
    let whitespace: Vec<usize> = text
        .char_indices()
        .filter(|(i, c)| c.is_whitespace() && *i > 0)
        .map(|(i, _)| i)
        .collect();
    for candidates in [boundaries, whitespace] {
        let best = candidates
            .into_iter()
            .filter(|&b| !text[..b].trim().is_empty())
            .map(|b| (b, char_len(&text[..b])))
            .filter(|&(_, chars)| chars <= MAX_PARAGRAPH_CHARS)
            .min_by_key(|&(_, chars)| chars.abs_diff(TARGET_PARAGRAPH_CHARS));
        if let Some((b, _)) = best {
            return b;
        }
    }
    text.char_indices()
        .nth(TARGET_PARAGRAPH_CHARS)
        .map_or(text.len(), |(i, _)| i)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedParagraph {
    /// Position in the input list.
    pub index: usize,
    pub text: String,
    pub score: f64,
}

/// Ranks paragraphs by cosine similarity to `query`; ties keep input order.
pub fn retrieve_relevant(
    paragraphs: &[String],
    query: &str,
    k: usize,
    embedder: &dyn Embedder,
) -> Result<Vec<RankedParagraph>, EmbedError> {
    let q = embedder.embed(query)?;
    let mut ranked = Vec::with_capacity(paragraphs.len());
    for (index, text) in paragraphs.iter().enumerate() {
        let score = match embedder.embed(text) {
            Ok(v) => v.cosine(&q),
            Err(EmbedError::EmptyText) => 0.0,
            Err(e) => return Err(e),
        };
        ranked.push(RankedParagraph {
            index,
            text: text.clone(),
            score,
        });
    }
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score));
    ranked.truncate(k.max(1));
    Ok(ranked)
}

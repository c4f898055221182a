//! Literal multi-pattern matching shared by the safety filter and the formatter.
//!
//! Matching is case-insensitive (simple case folding) and offsets are reported in
//! Unicode scalar values as well as bytes. A pattern edge that is an ASCII
//! letter or digit only matches at a word boundary, so `cure` does not fire
//! inside `secure` while CJK patterns match anywhere.

use std::collections::HashMap;

/// One occurrence of a pattern in a text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Match<'a, T> {
    /// Char offset of the first matched scalar.
    pub start: usize,
    /// Char offset one past the last matched scalar.
    pub end: usize,
    pub byte_start: usize,
    pub byte_end: usize,
    pub pattern: &'a str,
    pub value: &'a T,
}

impl<T> Match<'_, T> {
    pub fn char_len(&self) -> usize {
        self.end - self.start
    }

    /// The matched slice of the original text.
    pub fn slice<'t>(&self, text: &'t str) -> &'t str {
        &text[self.byte_start..self.byte_end]
    }
}

#[derive(Debug, Clone)]
struct Entry<T> {
    pattern: String,
    folded: Vec<char>,
    bounded_left: bool,
    bounded_right: bool,
    value: T,
}

/// A set of literal patterns, each carrying a payload.
#[derive(Debug, Clone)]
pub struct PatternSet<T> {
    entries: Vec<Entry<T>>,
    // first folded char -> entry indices, longest pattern first, then insertion order
    by_first: HashMap<char, Vec<usize>>,
}

impl<T> Default for PatternSet<T> {
    fn default() -> Self {
        Self {
            entries: Vec::new(),
            by_first: HashMap::new(),
        }
    }
}

pub(crate) fn fold_char(c: char) -> char {
    if c.is_ascii() {
        return c.to_ascii_lowercase();
    }
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric()
}

/// Text prepared for matching: folded chars plus the byte offset of every char.
struct Prepared {
    folded: Vec<char>,
    // byte offset of char i; has one trailing element equal to the text length
    byte_at: Vec<usize>,
}

impl Prepared {
    fn new(text: &str) -> Self {
        let mut folded = Vec::with_capacity(text.len());
        let mut byte_at = Vec::with_capacity(text.len() + 1);
        for (i, c) in text.char_indices() {
            folded.push(fold_char(c));
            byte_at.push(i);
        }
        byte_at.push(text.len());
        Self { folded, byte_at }
    }
}

impl<T> PatternSet<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a pattern. Blank patterns are ignored; returns whether it was added.
    pub fn insert(&mut self, pattern: &str, value: T) -> bool {
        let pattern = pattern.trim();
        if pattern.is_empty() {
            return false;
        }
        let folded: Vec<char> = pattern.chars().map(fold_char).collect();
        let entry = Entry {
            pattern: pattern.to_string(),
            bounded_left: is_word_char(folded[0]),
            bounded_right: is_word_char(folded[folded.len() - 1]),
            folded,
            value,
        };
        let idx = self.entries.len();
        let first = entry.folded[0];
        self.entries.push(entry);
        let bucket = self.by_first.entry(first).or_default();
        bucket.push(idx);
        let entries = &self.entries;
        // stable: equal lengths keep insertion order
        bucket.sort_by(|a, b| entries[*b].folded.len().cmp(&entries[*a].folded.len()));
        true
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn patterns(&self) -> impl Iterator<Item = (&str, &T)> {
        self.entries.iter().map(|e| (e.pattern.as_str(), &e.value))
    }

    fn matches_at(&self, text: &Prepared, pos: usize, entry: &Entry<T>) -> bool {
        let end = pos + entry.folded.len();
        if end > text.folded.len() || text.folded[pos..end] != entry.folded[..] {
            return false;
        }
        if entry.bounded_left && pos > 0 && is_word_char(text.folded[pos - 1]) {
            return false;
        }
        if entry.bounded_right && end < text.folded.len() && is_word_char(text.folded[end]) {
            return false;
        }
        true
    }

    fn make_match<'a>(&'a self, text: &Prepared, pos: usize, idx: usize) -> Match<'a, T> {
        let entry = &self.entries[idx];
        let end = pos + entry.folded.len();
        Match {
            start: pos,
            end,
            byte_start: text.byte_at[pos],
            byte_end: text.byte_at[end],
            pattern: &entry.pattern,
            value: &entry.value,
        }
    }

    /// Non-overlapping scan: at each position the longest pattern wins, then the
    /// scan resumes after it.
    pub fn leftmost_longest<'a>(&'a self, text: &str) -> Vec<Match<'a, T>> {
        let prepared = Prepared::new(text);
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < prepared.folded.len() {
            let hit = self.by_first.get(&prepared.folded[pos]).and_then(|bucket| {
                bucket
                    .iter()
                    .copied()
                    .find(|&idx| self.matches_at(&prepared, pos, &self.entries[idx]))
            });
            match hit {
                Some(idx) => {
                    let m = self.make_match(&prepared, pos, idx);
                    pos = m.end;
                    out.push(m);
                }
                None => pos += 1,
            }
        }
        out
    }

    /// Every occurrence of every pattern, overlapping ones included, ordered by
    /// start offset and then by descending length.
    pub fn all_matches<'a>(&'a self, text: &str) -> Vec<Match<'a, T>> {
        let prepared = Prepared::new(text);
        let mut out = Vec::new();
        for pos in 0..prepared.folded.len() {
            if let Some(bucket) = self.by_first.get(&prepared.folded[pos]) {
                for &idx in bucket {
                    if self.matches_at(&prepared, pos, &self.entries[idx]) {
                        out.push(self.make_match(&prepared, pos, idx));
                    }
                }
            }
        }
        out
    }

    /// Whether any pattern occurs in `text`.
    pub fn is_match(&self, text: &str) -> bool {
        !self.leftmost_longest(text).is_empty()
    }

    /// Patterns in insertion order that occur in `text`, with their first occurrence.
    pub fn first_by_insertion_order<'a>(&'a self, text: &str) -> Option<Match<'a, T>> {
        let prepared = Prepared::new(text);
        for (idx, entry) in self.entries.iter().enumerate() {
            for pos in 0..prepared.folded.len() {
                if self.matches_at(&prepared, pos, entry) {
                    return Some(self.make_match(&prepared, pos, idx));
                }
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(patterns: &[&str]) -> PatternSet<usize> {
        let mut s = PatternSet::new();
        for (i, p) in patterns.iter().enumerate() {
            s.insert(p, i);
        }
        s
    }

    #[test]
    fn longest_match_wins_at_a_position() {
        let s = set(&["警惕", "需警惕"]);
        let m = s.leftmost_longest("仍需警惕。");
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].pattern, "需警惕");
        assert_eq!((m[0].start, m[0].end), (1, 4));
    }

    #[test]
    fn case_insensitive_with_original_slice() {
        let text = "Side effects and SIDE EFFECTS";
        let s = set(&["side effects"]);
        let m = s.leftmost_longest(text);
        assert_eq!(m.len(), 2);
        assert_eq!(m[1].slice(text), "SIDE EFFECTS");
        assert_eq!(m[1].start, 17);
    }

    #[test]
    fn ascii_edges_respect_word_boundaries() {
        let s = set(&["cure", "确诊"]);
        assert!(s.leftmost_longest("secure").is_empty());
        assert_eq!(s.leftmost_longest("a cure.").len(), 1);
        assert_eq!(s.leftmost_longest("已确诊为").len(), 1);
    }

    #[test]
    fn all_matches_reports_overlaps() {
        let s = set(&["阑尾", "阑尾炎", "尾炎"]);
        let all = s.all_matches("慢性阑尾炎");
        let found: Vec<_> = all.iter().map(|m| (m.pattern, m.start)).collect();
        assert_eq!(found, vec![("阑尾炎", 2), ("阑尾", 2), ("尾炎", 3)]);
    }

    #[test]
    fn insertion_order_lookup() {
        let s = set(&["later", "early"]);
        let m = s.first_by_insertion_order("early then later").unwrap();
        assert_eq!(m.pattern, "later");
    }

    #[test]
    fn blank_patterns_are_ignored() {
        let mut s: PatternSet<()> = PatternSet::new();
        assert!(!s.insert("  ", ()));
        assert!(s.is_empty());
    }
}

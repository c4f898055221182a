use super::{FormattedResponse, HighlightCategory, HighlightSpan, SectionId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderTarget {
    Json,
    Html,
    Ansi,
}

/// Styles for the HTML class contract. Both tiers are blue; high-risk is darker and bold.
pub const STYLESHEET: &str = "\
.erkang-response h3 { margin: 0.6em 0 0.3em; }
.hl-highrisk { color: #0b3d91; font-weight: 700; }
.hl-warning { color: #2f74d0; }
.erkang-response footer.disclaimer { color: #666; font-size: 0.85em; margin-top: 1em; }
";

const ANSI_HIGH_RISK: &str = "\x1b[1;34m";
const ANSI_WARNING: &str = "\x1b[34m";
const ANSI_RESET: &str = "\x1b[0m";

pub fn render(resp: &FormattedResponse, target: RenderTarget) -> String {
    match target {
        RenderTarget::Json => serde_json::to_string(resp).expect("response serializes"),
        RenderTarget::Html => render_html(resp),
        RenderTarget::Ansi => render_ansi(resp),
    }
}

fn escape_into(out: &mut String, c: char) {
    match c {
        '&' => out.push_str("&amp;"),
        '<' => out.push_str("&lt;"),
        '>' => out.push_str("&gt;"),
        '"' => out.push_str("&quot;"),
        '\'' => out.push_str("&#39;"),
        _ => out.push(c),
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    s.chars().for_each(|c| escape_into(&mut out, c));
    out
}

fn class_of(c: HighlightCategory) -> &'static str {
    match c {
        HighlightCategory::HighRisk => "hl-highrisk",
        HighlightCategory::Warning => "hl-warning",
    }
}

/// Renders chars `[from, to)` of `chars`, escaping text, wrapping spans and
/// turning paired `**` into `<strong>`.
fn html_run(chars: &[char], from: usize, to: usize, spans: &[&HighlightSpan]) -> String {
    // non-overlapping "**" markers, rounded down to whole pairs; an odd one stays literal
    let mut bold_budget = {
        let mut n = 0;
        let mut i = from;
        while i + 1 < to {
            if chars[i] == '*' && chars[i + 1] == '*' {
                n += 1;
                i += 2;
            } else {
                i += 1;
            }
        }
        n - n % 2
    };
    let mut out = String::new();
    let mut open: Option<&HighlightSpan> = None;
    let mut bold = false;
    let mut i = from;
    while i < to {
        if let Some(s) = open {
            if s.end == i {
                out.push_str("</span>");
                open = None;
            }
        }
        if open.is_none() {
            if let Some(s) = spans
                .iter()
                .find(|s| s.start == i || (i == from && s.start < i && s.end > i))
            {
                out.push_str(&format!("<span class=\"{}\">", class_of(s.category)));
                open = Some(s);
            }
        }
        if open.is_none() && bold_budget > 0 && i + 1 < to && chars[i] == '*' && chars[i + 1] == '*'
        {
            out.push_str(if bold { "</strong>" } else { "<strong>" });
            bold = !bold;
            bold_budget -= 1;
            i += 2;
            continue;
        }
        escape_into(&mut out, chars[i]);
        i += 1;
    }
    if open.is_some() {
        out.push_str("</span>");
    }
    if bold {
        out.push_str("</strong>");
    }
    out
}

fn render_html(resp: &FormattedResponse) -> String {
    let mut out = format!(
        "<article class=\"erkang-response\" lang=\"{}\">\n",
        resp.locale()
    );
    for (idx, section) in resp.sections().iter().enumerate() {
        let spans: Vec<&HighlightSpan> = resp
            .highlights()
            .iter()
            .filter(|h| h.section_index == idx)
            .collect();
        out.push_str(&format!("<section data-section=\"{}\">\n", section.id));
        if !section.heading_text.is_empty() {
            out.push_str(&format!("<h3>{}</h3>\n", escape(section.title())));
        }
        let chars: Vec<char> = section.body.chars().collect();
        let mut in_list = false;
        let mut line_start = 0;
        while line_start < chars.len() {
            let line_end = chars[line_start..]
                .iter()
                .position(|&c| c == '\n')
                .map_or(chars.len(), |p| line_start + p);
            let next = line_end + 1;
            let mut a = line_start;
            while a < line_end && chars[a].is_whitespace() {
                a += 1;
            }
            let mut b = line_end;
            while b > a && chars[b - 1].is_whitespace() {
                b -= 1;
            }
            if a == b {
                line_start = next;
                continue;
            }
            let is_bullet =
                matches!(chars[a], '-' | '*' | '•') && a + 1 < b && chars[a + 1].is_whitespace();
            if is_bullet {
                let mut c = a + 1;
                while c < b && chars[c].is_whitespace() {
                    c += 1;
                }
                if !in_list {
                    out.push_str("<ul>\n");
                    in_list = true;
                }
                out.push_str(&format!("<li>{}</li>\n", html_run(&chars, c, b, &spans)));
            } else {
                if in_list {
                    out.push_str("</ul>\n");
                    in_list = false;
                }
                out.push_str(&format!("<p>{}</p>\n", html_run(&chars, a, b, &spans)));
            }
            line_start = next;
        }
        if in_list {
            out.push_str("</ul>\n");
        }
        out.push_str("</section>\n");
    }
    out.push_str(&format!(
        "<footer class=\"disclaimer\">{}</footer>\n</article>",
        escape(resp.disclaimer())
    ));
    out
}

fn render_ansi(resp: &FormattedResponse) -> String {
    let mut out = String::new();
    for (idx, section) in resp.sections().iter().enumerate() {
        out.push_str(&section.heading_text);
        let mut spans: Vec<&HighlightSpan> = resp
            .highlights()
            .iter()
            .filter(|h| h.section_index == idx)
            .collect();
        spans.sort_by_key(|s| s.start);
        let mut spans = spans.into_iter().peekable();
        let mut open_end = None;
        for (i, c) in section.body.chars().enumerate() {
            if open_end == Some(i) {
                out.push_str(ANSI_RESET);
                open_end = None;
            }
            if let Some(s) = spans.next_if(|s| s.start == i) {
                out.push_str(match s.category {
                    HighlightCategory::HighRisk => ANSI_HIGH_RISK,
                    HighlightCategory::Warning => ANSI_WARNING,
                });
                open_end = Some(s.end);
            }
            out.push(c);
        }
        if open_end.is_some() {
            out.push_str(ANSI_RESET);
        }
    }
    if !resp.sections().is_empty() {
        out.push_str("\n\n");
    }
    out.push_str(resp.disclaimer());
    out
}

impl SectionId {
    /// Whether a concluding response is expected to carry this section.
    pub fn is_canonical(self) -> bool {
        !matches!(self, SectionId::Other | SectionId::Inquiry)
    }
}

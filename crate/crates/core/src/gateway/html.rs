//! The fixed outbound HTML template and the tag stripper used for both
//! outbound text bodies and HTML-only inbound mail.

pub const TEMPLATE_OPEN: &str = r#"<div style="font-size: 14px; font-family: Arial, sans-serif;">"#;
pub const TEMPLATE_CLOSE: &str = "</div>";

/// Normalizes free text into paragraphs of trimmed lines.
///
/// Paragraphs are separated by exactly one blank line; leading and trailing
/// blank lines are dropped.
pub fn canonical_text(text: &str) -> String {
    let mut paragraphs: Vec<Vec<&str>> = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.split('\n') {
        let line = line.trim();
        if line.is_empty() {
            if !current.is_empty() {
                paragraphs.push(std::mem::take(&mut current));
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        paragraphs.push(current);
    }
    paragraphs
        .iter()
        .map(|p| p.join("\n"))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Wraps canonical text in the outbound template: one `<p>` per paragraph,
/// `<br>` between lines.
pub fn render_template(canonical: &str) -> String {
    let mut html = String::from(TEMPLATE_OPEN);
    for paragraph in canonical.split("\n\n").filter(|p| !p.is_empty()) {
        html.push_str("<p>");
        let lines: Vec<String> = paragraph
            .split('\n')
            .map(|l| html_escape::encode_text(l).into_owned())
            .collect();
        html.push_str(&lines.join("<br>"));
        html.push_str("</p>");
    }
    html.push_str(TEMPLATE_CLOSE);
    html
}

fn flush_breaks(out: &mut String, pending: &mut usize) {
    if *pending == 0 || out.is_empty() {
        *pending = 0;
        return;
    }
    let have = out.len() - out.trim_end_matches('\n').len();
    for _ in have..*pending {
        out.push('\n');
    }
    *pending = 0;
}

fn push_text(out: &mut String, pending: &mut usize, raw: &str) {
    if raw.is_empty() {
        return;
    }
    let decoded = html_escape::decode_html_entities(raw);
    let cleaned: String = decoded
        .chars()
        .map(|c| if c == '\n' || c == '\r' { ' ' } else { c })
        .collect();
    if cleaned.trim().is_empty() && (out.is_empty() || out.ends_with('\n')) {
        return;
    }
    flush_breaks(out, pending);
    out.push_str(&cleaned);
}

/// Converts HTML to plain text: tags removed, entities decoded, `<br>` as a
/// newline, paragraph-level blocks separated by a blank line.
pub fn strip_tags(html: &str) -> String {
    let mut out = String::new();
    let mut pending = 0usize;
    let mut rest = html;
    let mut skip_until: Option<&'static str> = None;

    while !rest.is_empty() {
        if let Some(close) = skip_until {
            match find_ci(rest, close) {
                Some(i) => {
                    rest = &rest[i + close.len()..];
                    rest = rest.find('>').map_or("", |j| &rest[j + 1..]);
                    skip_until = None;
                }
                None => rest = "",
            }
            continue;
        }
        if let Some(stripped) = rest.strip_prefix("<!--") {
            rest = stripped.find("-->").map_or("", |i| &stripped[i + 3..]);
            continue;
        }
        let Some(lt) = rest.find('<') else {
            push_text(&mut out, &mut pending, rest);
            break;
        };
        push_text(&mut out, &mut pending, &rest[..lt]);
        rest = &rest[lt..];
        let Some(gt) = rest.find('>') else {
            // Unterminated tag: treat the remainder as text.
            push_text(&mut out, &mut pending, rest);
            break;
        };
        let tag = &rest[1..gt];
        rest = &rest[gt + 1..];
        let closing = tag.starts_with('/');
        let name: String = tag
            .trim_start_matches('/')
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match name.as_str() {
            "br" => {
                flush_breaks(&mut out, &mut pending);
                if !out.is_empty() {
                    out.push('\n');
                }
            }
            "p" | "h1" | "h2" | "h3" | "h4" | "h5" | "h6" | "blockquote" | "table" | "ul" | "ol"
            | "pre" => pending = pending.max(2),
            "div" | "tr" | "li" | "section" | "article" | "header" | "footer" => {
                pending = pending.max(1)
            }
            "script" if !closing => skip_until = Some("</script"),
            "style" if !closing => skip_until = Some("</style"),
            "head" if !closing => skip_until = Some("</head"),
            _ => {}
        }
    }
    tidy(&out)
}

fn find_ci(haystack: &str, needle: &str) -> Option<usize> {
    let lower = haystack.to_ascii_lowercase();
    lower.find(needle)
}

fn tidy(text: &str) -> String {
    let lines: Vec<&str> = text.split('\n').map(str::trim).collect();
    let mut out: Vec<&str> = Vec::new();
    let mut blank_run = 0;
    for line in lines {
        if line.is_empty() {
            blank_run += 1;
            if blank_run > 1 || out.is_empty() {
                continue;
            }
        } else {
            blank_run = 0;
        }
        out.push(line);
    }
    while out.last().is_some_and(|l| l.is_empty()) {
        out.pop();
    }
    out.join("\n")
}

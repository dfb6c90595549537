use crate::textprep::CODE_TOKEN;

/// Elements whose entire content collapses to the code sentinel.
const CODE_ELEMENTS: [&str; 2] = ["code", "pre"];

/// Elements that separate words when removed.
const BLOCK_ELEMENTS: [&str; 22] = [
    "p", "br", "div", "li", "ul", "ol", "blockquote", "h1", "h2", "h3", "h4", "h5", "h6", "hr",
    "table", "tr", "td", "th", "dd", "dt", "dl", "img",
];

/// Converts a post's HTML fragment to plain text.
///
/// `<code>`/`<pre>` contents become the single token `<code>`, other tags are
/// dropped, entities are decoded and whitespace collapses to single spaces.
/// Malformed markup never fails: an unterminated tag is kept as text and a
/// code element without its closing tag yields the sentinel and parsing
/// continues after the opening tag.
pub fn strip_html(html: &str) -> String {
    let mut out = String::with_capacity(html.len());
    let mut text_start = 0;
    let mut pos = 0;
    let bytes = html.as_bytes();

    while pos < bytes.len() {
        if bytes[pos] != b'<' {
            pos += 1;
            continue;
        }
        let Some(tag) = parse_tag(html, pos) else {
            pos += 1;
            continue;
        };
        push_text(&mut out, &html[text_start..pos]);
        match tag.kind {
            TagKind::Comment => {}
            TagKind::Open if CODE_ELEMENTS.contains(&tag.name.as_str()) && !tag.self_closing => {
                push_sentinel(&mut out);
                if let Some(close_end) = find_close(html, tag.end, &tag.name) {
                    pos = close_end;
                    text_start = pos;
                    continue;
                }
            }
            TagKind::Open | TagKind::Close => {
                if BLOCK_ELEMENTS.contains(&tag.name.as_str()) {
                    out.push(' ');
                }
            }
        }
        pos = tag.end;
        text_start = pos;
    }
    push_text(&mut out, &html[text_start..]);
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn push_text(out: &mut String, raw: &str) {
    if !raw.is_empty() {
        out.push_str(&html_escape::decode_html_entities(raw));
    }
}

fn push_sentinel(out: &mut String) {
    out.push(' ');
    out.push_str(CODE_TOKEN);
    out.push(' ');
}

#[derive(Debug, PartialEq)]
enum TagKind {
    Open,
    Close,
    Comment,
}

#[derive(Debug)]
struct Tag {
    kind: TagKind,
    name: String,
    self_closing: bool,
    /// Byte offset just past the closing `>`.
    end: usize,
}

/// Parses a tag starting at `start` (which holds `<`). Returns `None` when the
/// text is not a tag or the tag is never terminated.
fn parse_tag(html: &str, start: usize) -> Option<Tag> {
    let rest = &html[start + 1..];
    if let Some(body) = rest.strip_prefix("!--") {
        let close = body.find("-->")?;
        return Some(Tag {
            kind: TagKind::Comment,
            name: String::new(),
            self_closing: false,
            end: start + 4 + close + 3,
        });
    }
    let (kind, name_from) = match rest.as_bytes().first()? {
        b'/' => (TagKind::Close, 1),
        b'!' | b'?' => (TagKind::Comment, 1),
        c if c.is_ascii_alphabetic() => (TagKind::Open, 0),
        _ => return None,
    };
    let name: String = rest[name_from..]
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase();
    if name.is_empty() && kind != TagKind::Comment {
        return None;
    }

    let mut quote: Option<u8> = None;
    for (offset, &b) in rest.as_bytes().iter().enumerate() {
        match quote {
            Some(q) if b == q => quote = None,
            Some(_) => {}
            None if b == b'"' || b == b'\'' => quote = Some(b),
            None if b == b'>' => {
                let self_closing = offset > 0 && rest.as_bytes()[offset - 1] == b'/';
                return Some(Tag {
                    kind,
                    name,
                    self_closing,
                    end: start + 1 + offset + 1,
                });
            }
            None => {}
        }
    }
    None
}

/// Finds the end of the matching `</name>`, honouring nested elements of the
/// same name.
fn find_close(html: &str, from: usize, name: &str) -> Option<usize> {
    let mut depth = 1usize;
    let mut pos = from;
    while let Some(rel) = html[pos..].find('<') {
        let at = pos + rel;
        match parse_tag(html, at) {
            Some(tag) if tag.name == name && tag.kind == TagKind::Close => {
                depth -= 1;
                if depth == 0 {
                    return Some(tag.end);
                }
                pos = tag.end;
            }
            Some(tag) if tag.name == name && tag.kind == TagKind::Open && !tag.self_closing => {
                depth += 1;
                pos = tag.end;
            }
            Some(tag) => pos = tag.end,
            None => pos = at + 1,
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn code_block_becomes_sentinel() {
        assert_eq!(strip_html("<p>use <code>int x=1;</code> here</p>"), "use <code> here");
    }

    #[test]
    fn plain_text_is_identity() {
        assert_eq!(strip_html("plain"), "plain");
    }

    #[test]
    fn entities_decoded() {
        assert_eq!(strip_html("a &amp; b"), "a & b");
        assert_eq!(strip_html("it&#39;s &quot;ok&quot;&nbsp;now"), "it's \"ok\" now");
    }

    #[test]
    fn nested_pre_code_is_one_sentinel() {
        assert_eq!(
            strip_html("<p>Try:</p><pre><code>for (;;) { a < b; }\n</code></pre><p>Thanks</p>"),
            "Try: <code> Thanks"
        );
    }

    #[test]
    fn block_tags_separate_words_inline_tags_do_not() {
        assert_eq!(strip_html("<p>one</p><p>two</p>"), "one two");
        assert_eq!(strip_html("<b>bo</b>ld<br/>next"), "bold next");
    }

    #[test]
    fn lenient_on_unclosed_markup() {
        assert_eq!(strip_html("a <b and more"), "a <b and more");
        assert_eq!(strip_html("x < y"), "x < y");
        assert_eq!(strip_html("see <code>broken"), "see <code> broken");
        assert_eq!(strip_html("<a href=\"x>y\">link</a>"), "link");
        assert_eq!(strip_html("keep <!-- hidden --> this"), "keep this");
    }

    fn fragment() -> impl Strategy<Value = String> {
        let word = "[a-zA-Z0-9]{1,8}";
        prop_oneof![
            word.prop_map(|w| w),
            word.prop_map(|w| format!("<p>{w}</p>")),
            word.prop_map(|w| format!("<em>{w}</em>")),
            "[a-z =;(){}]{0,12}".prop_map(|c| format!("<pre><code>{c}</code></pre>")),
            "[a-z =;]{0,12}".prop_map(|c| format!("<code>{c}</code>")),
            Just("&amp;".to_string()),
            Just("&quot;".to_string()),
            Just("<br>".to_string()),
            Just("\n".to_string()),
        ]
    }

    proptest! {
        #[test]
        fn idempotent_on_own_output(parts in prop::collection::vec(fragment(), 0..12)) {
            let html = parts.join(" ");
            let once = strip_html(&html);
            prop_assert_eq!(strip_html(&once), once);
        }
    }
}

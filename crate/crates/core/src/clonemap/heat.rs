use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{find_exact_groups, token_temperatures};
use crate::corpus::Document;

pub const RED: [f64; 3] = [1.0, 0.0, 0.0];
pub const WHITE: [f64; 3] = [1.0, 1.0, 1.0];

/// Per-token temperatures and colors of one document.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatMap {
    pub temperatures: Vec<usize>,
    pub t_max: usize,
    pub colors: Vec<[f64; 3]>,
}

/// White-to-red blend `(h / t_max) * RED + (1 - h / t_max) * WHITE`.
/// A map without clones (`t_max == 0`) is all white.
pub fn heat_color(h: usize, t_max: usize) -> [f64; 3] {
    if t_max == 0 {
        return WHITE;
    }
    let a = h as f64 / t_max as f64;
    let mut c = [0.0; 3];
    for i in 0..3 {
        c[i] = a * RED[i] + (1.0 - a) * WHITE[i];
    }
    c
}

pub fn build_heatmap(doc: &Document, min_tokens: usize) -> HeatMap {
    let groups = find_exact_groups(doc, min_tokens);
    HeatMap::from_temperatures(token_temperatures(doc.tokens().len(), &groups))
}

/// One token of the JSON export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatToken {
    pub b: usize,
    pub e: usize,
    pub h: usize,
    pub color: [f64; 3],
}

/// JSON export of a heat map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapJson {
    pub doc_id: String,
    pub min_tokens: usize,
    pub t_max: usize,
    pub tokens: Vec<HeatToken>,
}

impl HeatMap {
    pub fn from_temperatures(temperatures: Vec<usize>) -> Self {
        let t_max = temperatures.iter().copied().max().unwrap_or(0);
        let colors = temperatures.iter().map(|&h| heat_color(h, t_max)).collect();
        HeatMap {
            temperatures,
            t_max,
            colors,
        }
    }

    pub fn to_json(&self, doc: &Document, min_tokens: usize) -> HeatmapJson {
        HeatmapJson {
            doc_id: doc.id().as_str().to_string(),
            min_tokens,
            t_max: self.t_max,
            tokens: doc
                .tokens()
                .iter()
                .map(|t| HeatToken {
                    b: t.b(),
                    e: t.e(),
                    h: self.temperatures[t.index],
                    color: self.colors[t.index],
                })
                .collect(),
        }
    }

    /// Standalone page: every token is a `<span>` with its own background,
    /// delimiters are left unpainted.
    pub fn to_html(&self, doc: &Document) -> String {
        let mut out = String::with_capacity(doc.len() * 3 + 1024);
        out.push_str("<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n");
        let _ = writeln!(out, "<title>Duplicate map: {}</title>", escape(doc.id().as_str()));
        out.push_str(
            "<style>\nbody { font-family: sans-serif; }\n\
             pre { white-space: pre-wrap; line-height: 1.5; }\n\
             .legend span { padding: 0 0.5em; }\n</style>\n</head>\n<body>\n",
        );
        let _ = writeln!(
            out,
            "<p class=\"legend\">T<sub>max</sub> = {} <span style=\"background:{}\">cold</span><span style=\"background:{}\">hot</span></p>",
            self.t_max,
            css_rgb(WHITE),
            css_rgb(RED)
        );
        out.push_str("<pre>");
        let text = doc.symbols();
        let mut pos = 0;
        for t in doc.tokens() {
            push_escaped(&mut out, &text[pos..t.b()]);
            let h = self.temperatures[t.index];
            let _ = write!(
                out,
                "<span data-b=\"{}\" data-e=\"{}\" data-h=\"{}\" style=\"background:{}\">",
                t.b(),
                t.e(),
                h,
                css_rgb(self.colors[t.index])
            );
            push_escaped(&mut out, &text[t.b()..=t.e()]);
            out.push_str("</span>");
            pos = t.e() + 1;
        }
        push_escaped(&mut out, &text[pos..]);
        out.push_str("</pre>\n</body>\n</html>\n");
        out
    }
}

fn css_rgb(c: [f64; 3]) -> String {
    let ch = |x: f64| (x * 255.0).round() as u8;
    format!("rgb({}, {}, {})", ch(c[0]), ch(c[1]), ch(c[2]))
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        push_escaped_char(&mut out, c);
    }
    out
}

fn push_escaped(out: &mut String, text: &[char]) {
    for &c in text {
        push_escaped_char(out, c);
    }
}

fn push_escaped_char(out: &mut String, c: char) {
    match c {
        '<' => out.push_str("&lt;"),
        '>' => out.push_str("&gt;"),
        '&' => out.push_str("&amp;"),
        '"' => out.push_str("&quot;"),
        _ => out.push(c),
    }
}

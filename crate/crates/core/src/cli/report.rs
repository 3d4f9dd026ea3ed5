//! Plain-text report writer.
//!
//! Reports are `key = value` lines grouped under `[section]` headers, with
//! explicit `[...]` arrays and quoted strings. The layout is a subset of
//! TOML, so any TOML reader can load it.

use std::fmt::Write as _;

use super::io::format_number;
use crate::matalg::Mat;

#[derive(Default, Debug, Clone)]
pub struct Report {
    text: String,
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c if c.is_control() => {
                let _ = write!(out, "\\u{:04X}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn number_array(values: &[f64]) -> String {
    let cells: Vec<String> = values.iter().map(|v| format_number(*v)).collect();
    format!("[{}]", cells.join(", "))
}

impl Report {
    pub fn new(title: &str) -> Self {
        Report {
            text: format!("# {title}\n"),
        }
    }

    pub fn section(&mut self, name: &str) -> &mut Self {
        let _ = write!(self.text, "\n[{name}]\n");
        self
    }

    /// Header of one element in an array of tables.
    pub fn table_entry(&mut self, name: &str) -> &mut Self {
        let _ = write!(self.text, "\n[[{name}]]\n");
        self
    }

    pub fn str(&mut self, key: &str, value: &str) -> &mut Self {
        let _ = writeln!(self.text, "{key} = {}", quote(value));
        self
    }

    pub fn num(&mut self, key: &str, value: f64) -> &mut Self {
        let _ = writeln!(self.text, "{key} = {}", format_number(value));
        self
    }

    pub fn int(&mut self, key: &str, value: u64) -> &mut Self {
        let _ = writeln!(self.text, "{key} = {value}");
        self
    }

    pub fn bool(&mut self, key: &str, value: bool) -> &mut Self {
        let _ = writeln!(self.text, "{key} = {value}");
        self
    }

    pub fn nums(&mut self, key: &str, values: &[f64]) -> &mut Self {
        let _ = writeln!(self.text, "{key} = {}", number_array(values));
        self
    }

    pub fn ints(&mut self, key: &str, values: &[usize]) -> &mut Self {
        let cells: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(self.text, "{key} = [{}]", cells.join(", "));
        self
    }

    pub fn strs(&mut self, key: &str, values: &[String]) -> &mut Self {
        let cells: Vec<String> = values.iter().map(|v| quote(v)).collect();
        let _ = writeln!(self.text, "{key} = [{}]", cells.join(", "));
        self
    }

    /// Matrix as an array of rows.
    pub fn matrix(&mut self, key: &str, m: &Mat) -> &mut Self {
        let _ = writeln!(self.text, "{key} = [");
        for i in 0..m.rows() {
            let _ = writeln!(self.text, "  {},", number_array(m.row(i)));
        }
        self.text.push_str("]\n");
        self
    }

    pub fn finish(self) -> String {
        self.text
    }
}

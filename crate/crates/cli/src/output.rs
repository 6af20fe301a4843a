use std::io::{self, Write};

use polyqe::engine::{Outcome, QueryResult};

use crate::config::OutputMode;

fn cell(v: &polyqe::relmodel::Value, mode: OutputMode) -> String {
    let s = v.to_string();
    match mode {
        OutputMode::Table => s,
        OutputMode::Tsv => s.replace('\\', "\\\\").replace('\t', "\\t").replace('\n', "\\n"),
    }
}

/// Header line followed by one line per row.
pub fn render(res: &QueryResult, mode: OutputMode) -> String {
    let header: Vec<String> = res.columns.iter().map(|c| c.name.clone()).collect();
    let body: Vec<Vec<String>> = res.rows.iter().map(|r| r.values().iter().map(|v| cell(v, mode)).collect()).collect();
    let mut out = String::new();
    match mode {
        OutputMode::Tsv => {
            for line in std::iter::once(&header).chain(&body) {
                out.push_str(&line.join("\t"));
                out.push('\n');
            }
        }
        OutputMode::Table => {
            let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
            for r in &body {
                for (w, c) in widths.iter_mut().zip(r) {
                    *w = (*w).max(c.chars().count());
                }
            }
            let line = |cells: &[String]| {
                let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
                padded.join(" | ").trim_end().to_string()
            };
            out.push_str(&line(&header));
            out.push('\n');
            out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
            out.push('\n');
            for r in &body {
                out.push_str(&line(r));
                out.push('\n');
            }
        }
    }
    out
}

pub fn print_outcome(o: &Outcome, mode: OutputMode) {
    let text = match o {
        Outcome::Rows(r) => render(r, mode),
        Outcome::Explain(t) => format!("{t}\n"),
        Outcome::Done(msg) => format!("{msg}\n"),
    };
    let mut out = io::stdout().lock();
    let _ = out.write_all(text.as_bytes());
    let _ = out.flush();
}

#[cfg(test)]
mod tests {
    use super::*;
    use polyqe::catalog::Catalog;
    use polyqe::engine::Engine;

    fn result(sql: &str) -> QueryResult {
        Engine::new(Catalog::new()).query(sql).unwrap()
    }

    #[test]
    fn tsv_has_no_padding() {
        let r = result("SELECT 1 AS a, 'long text' AS b");
        assert_eq!(render(&r, OutputMode::Tsv), "a\tb\n1\t'long text'\n");
    }

    #[test]
    fn table_aligns_columns() {
        let r = result("SELECT 1 AS a, 'long text' AS b");
        let t = render(&r, OutputMode::Table);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines, ["a | b", "--+------------", "1 | 'long text'"]);
    }

    #[test]
    fn tsv_escapes_separators() {
        let r = result("SELECT 'a\tb' AS x");
        assert_eq!(render(&r, OutputMode::Tsv), "x\n'a\\tb'\n");
    }
}

//! Plain-text table rendering for the human-readable reports.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Align {
    Left,
    Right,
}

/// Renders a header plus rows with columns padded to their widest cell.
pub fn render_table(headers: &[String], rows: &[Vec<String>], align: &[Align]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .zip(align.iter().chain(std::iter::repeat(&Align::Left)))
            .map(|((cell, &w), a)| match a {
                Align::Left => format!("{cell:<w$}"),
                Align::Right => format!("{cell:>w$}"),
            })
            .collect();
        let mut s = parts.join(" ").trim_end().to_string();
        s.push('\n');
        s
    };
    let mut out = line(headers);
    for row in rows {
        out.push_str(&line(row));
    }
    out
}

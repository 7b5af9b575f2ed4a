//! Minimal RFC-4180 writer for the numeric tables this crate produces.
//!
//! Reals are written with 17 significant digits (`{:.16e}`) so every value
//! round-trips bit-exactly through a text file.

use std::fmt::Write as _;

use crate::dos::{DosCurve, EmpiricalDos};

/// A 17-significant-digit representation of `x`.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Quotes a field only if it contains a comma, quote or line break.
pub fn field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Accumulates rows in memory; records end in CRLF per RFC 4180.
#[derive(Debug, Clone, Default)]
pub struct Table {
    body: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut t = Self::default();
        t.row(header.iter().map(|h| h.to_string()));
        t
    }

    pub fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut first = true;
        for c in cells {
            if !first {
                self.body.push(',');
            }
            first = false;
            self.body.push_str(&field(c.as_ref()));
        }
        self.body.push_str("\r\n");
    }

    pub fn as_str(&self) -> &str {
        &self.body
    }

    pub fn into_string(self) -> String {
        self.body
    }
}

/// Spectrum rows `(model_id, L, b_or_theta, index, eigenvalue)`.
pub fn spectrum_rows(table: &mut Table, model_id: &str, size: f64, param: f64, eigs: &[f64]) {
    for (k, &e) in eigs.iter().enumerate() {
        table.row([
            model_id.to_string(),
            real(size),
            real(param),
            k.to_string(),
            real(e),
        ]);
    }
}

/// `energy,weight` rows.
pub fn dos_table(dos: &EmpiricalDos) -> Table {
    let mut t = Table::new(&["energy", "weight"]);
    for &(e, w) in dos.atoms() {
        t.row([real(e), real(w)]);
    }
    t
}

/// `energy,density` rows.
pub fn curve_table(curve: &DosCurve) -> Table {
    let mut t = Table::new(&["energy", "density"]);
    for (e, d) in curve.grid.iter().zip(&curve.density) {
        t.row([real(*e), real(*d)]);
    }
    t
}

/// Writes `key=value` comment lines, e.g. provenance headers.
pub fn comment_block(pairs: &[(&str, &str)]) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        let _ = write!(out, "# {k}={v}\r\n");
    }
    out
}

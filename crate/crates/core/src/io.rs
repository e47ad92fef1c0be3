//! Text serializations for fields, results and optimization logs.

use std::fmt::Write as _;
use std::path::Path;

use crate::control::{LogEntry, OptimizationResult};
use crate::error::{Error, Result};
use crate::grid::SpinorField;
use crate::observables::WorkLedger;

/// CSV with columns `x,re_up,im_up,re_down,im_down`.
pub fn field_csv(field: &SpinorField) -> String {
    let x = field.grid().x();
    let mut out = String::with_capacity(x.len() * 90);
    out.push_str("x,re_up,im_up,re_down,im_down\n");
    for (i, &xi) in x.iter().enumerate() {
        let (u, d) = (field.up[i], field.down[i]);
        let _ = writeln!(
            out,
            "{:.11e},{:.11e},{:.11e},{:.11e},{:.11e}",
            xi, u.re, u.im, d.re, d.im
        );
    }
    out
}

/// One `key = value` line per pair.
pub fn key_value_text(pairs: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

pub fn work_ledger_text(w: &WorkLedger) -> String {
    key_value_text(&[
        ("w_p", w.w_p.to_string()),
        ("w_p_st", w.w_p_st.to_string()),
        ("dw_p", w.dw_p.to_string()),
        ("e_st", w.e_st.to_string()),
        ("w_phi_st", w.w_phi_st.to_string()),
        ("closure_residual", w.closure_residual().to_string()),
    ])
}

pub fn optimization_result_text(r: &OptimizationResult) -> String {
    key_value_text(&[
        ("stage", (r.stage as u8).to_string()),
        ("c1", r.c1.to_string()),
        ("c2", r.c2.to_string()),
        ("xi2", r.xi2.to_string()),
        ("evaluations", r.evaluations.to_string()),
    ])
}

/// CSV with columns `stage,c1,c2,xi2,evaluations`.
pub fn optimization_log_csv(entries: &[LogEntry]) -> String {
    let mut out = String::from("stage,c1,c2,xi2,evaluations\n");
    for e in entries {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            e.stage as u8, e.c1, e.c2, e.xi2, e.evaluations
        );
    }
    out
}

/// Prefix every header line with `# `.
pub fn comment_block(header: &str) -> String {
    header.lines().map(|l| format!("# {l}\n")).collect()
}

/// Write `header` as a comment block followed by `body`.
pub fn write_with_header(path: &Path, header: &str, body: &str) -> Result<()> {
    let mut text = comment_block(header);
    text.push_str(body);
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

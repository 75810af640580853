//! CPLEX LP text output.
//!
//! Variables appear in program order: `p_{feature}_{rank}` by feature then
//! threshold, `l_{tree}_{leaf}` by tree then leaf left to right, then `b`.
//! Output is a pure function of the program, so it is byte-reproducible.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{MilpProgram, VarId, VarKind};
use crate::error::Result;

const TERMS_PER_LINE: usize = 8;

fn coef_str(c: f64) -> String {
    format!("{}", c.abs())
}

pub(crate) fn format_terms<'a>(terms: &[(f64, VarId)], name: impl Fn(VarId) -> &'a str) -> String {
    let mut out = String::new();
    for (i, (c, v)) in terms.iter().enumerate() {
        if i > 0 && i % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if *c < 0.0 { "-" } else { "+" };
        if i == 0 {
            if *c < 0.0 {
                out.push_str("- ");
            }
        } else {
            let _ = write!(out, " {sign} ");
        }
        if c.abs() != 1.0 {
            let _ = write!(out, "{} ", coef_str(*c));
        }
        out.push_str(name(*v));
    }
    if terms.is_empty() {
        out.push('0');
    }
    out
}

pub(crate) fn to_lp_string(prog: &MilpProgram) -> String {
    let name = |v: VarId| prog.vars[v.0].name.as_str();
    let mut out = String::new();
    out.push_str("\\ minimal-perturbation evasion program\n");
    let _ = writeln!(
        out,
        "\\ metric {} epsilon {}",
        prog.distance.metric, prog.distance.epsilon
    );
    out.push_str("Minimize\n obj: ");
    out.push_str(&format_terms(&prog.objective.terms, name));
    let k = prog.objective.constant;
    if k != 0.0 {
        let _ = write!(out, " {} {}", if k < 0.0 { "-" } else { "+" }, coef_str(k));
    }
    out.push_str("\nSubject To\n");

    let mut counts = std::collections::HashMap::new();
    for c in &prog.constraints {
        let n = counts.entry(c.family.prefix()).or_insert(0usize);
        let _ = writeln!(
            out,
            " {}_{}: {} {} {}",
            c.family.prefix(),
            n,
            format_terms(&c.terms, name),
            c.relation.symbol(),
            c.rhs
        );
        *n += 1;
    }

    out.push_str("Bounds\n");
    for v in &prog.vars {
        match v.kind {
            VarKind::ContinuousL => {
                let _ = writeln!(out, " {} <= {} <= {}", v.lo, v.name, v.hi);
            }
            VarKind::ContinuousB => {
                let _ = writeln!(out, " {} >= {}", v.name, v.lo);
            }
            VarKind::BinaryP => {}
        }
    }

    let binaries: Vec<&str> = prog
        .vars
        .iter()
        .filter(|v| v.kind == VarKind::BinaryP)
        .map(|v| v.name.as_str())
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for chunk in binaries.chunks(TERMS_PER_LINE) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

pub fn write_lp<W: std::io::Write>(prog: &MilpProgram, mut w: W) -> Result<()> {
    w.write_all(to_lp_string(prog).as_bytes())?;
    Ok(())
}

pub fn export_lp(prog: &MilpProgram, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_lp_string(prog))?;
    Ok(())
}

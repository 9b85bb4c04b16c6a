// SPDX-License-Identifier: Apache-2.0

//! ISCAS85 `.bench` reader and writer, plus the `CAMO` dialect keyword.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{valid_name, Gate, GateKind, Netlist, NetlistError};

fn syntax(line: usize, col: usize, message: impl Into<String>) -> NetlistError {
    NetlistError::Syntax {
        line,
        col,
        message: message.into(),
    }
}

/// Splits `NAME(args)` into the name and the argument text. Columns are
/// 1-based and refer to the original line.
fn call(s: &str, line: usize, col0: usize) -> Result<(&str, &str, usize), NetlistError> {
    let open = s
        .find('(')
        .ok_or_else(|| syntax(line, col0, "expected `(`"))?;
    let close = s
        .rfind(')')
        .ok_or_else(|| syntax(line, col0 + s.len(), "expected `)`"))?;
    if close < open {
        return Err(syntax(line, col0 + close, "unbalanced parentheses"));
    }
    if !s[close + 1..].trim().is_empty() {
        return Err(syntax(
            line,
            col0 + close + 1,
            "trailing characters after `)`",
        ));
    }
    Ok((s[..open].trim(), &s[open + 1..close], col0 + open + 1))
}

fn net_name(s: &str, line: usize, col: usize) -> Result<String, NetlistError> {
    let t = s.trim();
    if !valid_name(t) {
        let off = s.len() - s.trim_start().len();
        return Err(syntax(line, col + off, format!("invalid net name `{t}`")));
    }
    Ok(t.to_string())
}

/// Parses `.bench` text. Keywords are case-insensitive; `#` starts a comment.
pub fn parse_bench(text: &str) -> Result<Netlist, NetlistError> {
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut gates: Vec<Gate> = Vec::new();
    let mut defined: HashMap<String, usize> = HashMap::new();
    let mut output_lines: HashMap<String, usize> = HashMap::new();

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim_end_matches('\r');
        let indent = line.len() - line.trim_start().len();
        let stmt = line.trim();
        if stmt.is_empty() {
            continue;
        }
        let col0 = indent + 1;
        if let Some(eq) = stmt.find('=') {
            let lhs = net_name(&stmt[..eq], lineno, col0)?;
            let rhs = &stmt[eq + 1..];
            let rcol = col0 + eq + 1 + (rhs.len() - rhs.trim_start().len());
            let (kw, args, acol) = call(rhs.trim(), lineno, rcol)?;
            let kind: GateKind = kw.parse().map_err(|m: String| syntax(lineno, rcol, m))?;
            if !kind.is_logic() {
                return Err(syntax(lineno, rcol, format!("`{kw}` is not a gate")));
            }
            let mut fanins = Vec::new();
            let mut col = acol;
            for a in args.split(',') {
                fanins.push(net_name(a, lineno, col)?);
                col += a.len() + 1;
            }
            if defined.contains_key(&lhs) {
                return Err(NetlistError::DuplicateNet {
                    name: lhs,
                    line: Some(lineno),
                });
            }
            defined.insert(lhs.clone(), lineno);
            gates.push(Gate {
                id: lhs,
                kind,
                fanins,
            });
        } else {
            let (kw, arg, acol) = call(stmt, lineno, col0)?;
            let name = net_name(arg, lineno, acol)?;
            match kw.to_ascii_uppercase().as_str() {
                "INPUT" => {
                    if defined.insert(name.clone(), lineno).is_some() {
                        return Err(NetlistError::DuplicateNet {
                            name,
                            line: Some(lineno),
                        });
                    }
                    inputs.push(name);
                }
                "OUTPUT" => {
                    if output_lines.insert(name.clone(), lineno).is_some() {
                        return Err(NetlistError::DuplicateNet {
                            name,
                            line: Some(lineno),
                        });
                    }
                    outputs.push(name);
                }
                _ => return Err(syntax(lineno, col0, format!("unknown declaration `{kw}`"))),
            }
        }
    }
    Netlist::new(inputs, outputs, gates)
}

/// Canonical `.bench` text: INPUTs, OUTPUTs, then gates in topological order.
pub fn write_bench(netlist: &Netlist) -> String {
    let mut out = String::new();
    if netlist.is_empty() && netlist.outputs().is_empty() {
        return out;
    }
    for name in netlist.input_names() {
        let _ = writeln!(out, "INPUT({name})");
    }
    for name in netlist.output_names() {
        let _ = writeln!(out, "OUTPUT({name})");
    }
    for g in netlist.gate_ids() {
        let fanins: Vec<&str> = netlist.fanins(g).iter().map(|&f| netlist.name(f)).collect();
        let _ = writeln!(
            out,
            "{} = {}({})",
            netlist.name(g),
            netlist.kind(g),
            fanins.join(", ")
        );
    }
    out
}

//! Textual LP format: comment header with the big-M registry, objective,
//! `Subject To`, `Bounds` (every variable, in model order), `Binaries`,
//! `End`. Quadratic objective terms go in `[ ... ] / 2` with doubled
//! coefficients. Numbers use the shortest round-trip decimal form, so a
//! written model reads back bit for bit.

use std::path::Path;

use super::{BigMEntry, MipModel, QuadTerm, Sense, VarKind};
use crate::error::{ImopError, Result};

const WRAP: usize = 100;

/// `<experiment>_<N>_<K>.lp`
pub fn lp_file_name(experiment: &str, n: usize, k: usize) -> String {
    format!("{experiment}_{n}_{k}.lp")
}

struct Lines {
    out: String,
    line: String,
}

impl Lines {
    fn new() -> Self {
        Lines { out: String::new(), line: String::new() }
    }

    fn push(&mut self, tok: &str) {
        if !self.line.is_empty() && self.line.len() + 1 + tok.len() > WRAP {
            self.flush();
            self.line.push_str("   ");
        }
        if !self.line.is_empty() {
            self.line.push(' ');
        }
        self.line.push_str(tok);
    }

    fn flush(&mut self) {
        if !self.line.is_empty() {
            self.out.push_str(&self.line);
            self.out.push('\n');
            self.line.clear();
        }
    }

    fn raw(&mut self, s: &str) {
        self.flush();
        self.out.push_str(s);
        self.out.push('\n');
    }
}

fn signed(c: f64) -> (&'static str, f64) {
    if c.is_sign_negative() {
        ("-", -c)
    } else {
        ("+", c)
    }
}

fn bound(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        v.to_string()
    }
}

pub fn write_lp(model: &MipModel) -> String {
    let name = |i: usize| model.variables[i].name.as_str();
    let mut w = Lines::new();
    w.raw(&format!("\\ Problem: {}", model.name));
    for b in &model.big_m {
        w.raw(&format!("\\ bigM {} {} {}", b.name, b.value, b.provenance));
    }
    w.raw(if model.objective.maximize { "Maximize" } else { "Minimize" });
    w.push(" obj:");
    let obj = &model.objective;
    let mut any = false;
    for &(i, c) in &obj.linear {
        let (s, a) = signed(c);
        w.push(&format!("{s} {a} {}", name(i)));
        any = true;
    }
    if !obj.quadratic.is_empty() {
        w.push("+ [");
        for q in &obj.quadratic {
            let (s, a) = signed(2.0 * q.coef);
            if q.i == q.j {
                w.push(&format!("{s} {a} {} ^ 2", name(q.i)));
            } else {
                w.push(&format!("{s} {a} {} * {}", name(q.i), name(q.j)));
            }
        }
        w.push("] / 2");
        any = true;
    }
    if obj.constant != 0.0 || !any {
        let (s, a) = signed(obj.constant);
        w.push(&format!("{s} {a}"));
    }
    w.flush();
    w.raw("Subject To");
    for r in &model.rows {
        w.push(&format!(" {}:", r.name));
        if r.terms.is_empty() {
            w.push(&format!("+ 0 {}", name(0)));
        }
        for &(i, c) in &r.terms {
            let (s, a) = signed(c);
            w.push(&format!("{s} {a} {}", name(i)));
        }
        w.push(&format!("{} {}", r.sense.symbol(), r.rhs));
        w.flush();
    }
    w.raw("Bounds");
    for v in &model.variables {
        if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            w.raw(&format!(" {} free", v.name));
        } else {
            w.raw(&format!(" {} <= {} <= {}", bound(v.lower), v.name, bound(v.upper)));
        }
    }
    let bins: Vec<&str> = model.variables.iter().filter(|v| v.kind == VarKind::Binary).map(|v| v.name.as_str()).collect();
    if !bins.is_empty() {
        w.raw("Binaries");
        for b in bins {
            w.push(b);
        }
        w.flush();
    }
    w.raw("End");
    w.out
}

/// Validates and writes the model.
pub fn export_model(model: &MipModel, path: &Path) -> Result<()> {
    model.validate()?;
    std::fs::write(path, write_lp(model))?;
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Header,
    Objective,
    Rows,
    Bounds,
    Binaries,
    Done,
}

struct Tok<'a> {
    text: &'a str,
    line: usize,
}

fn err(line: usize, msg: impl Into<String>) -> ImopError {
    ImopError::Parse { line, msg: msg.into() }
}

fn number(t: &Tok) -> Result<f64> {
    match t.text.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        s => s.parse().map_err(|_| err(t.line, format!("expected a number, found '{}'", t.text))),
    }
}

fn is_number(s: &str) -> bool {
    s.parse::<f64>().is_ok()
}

/// Linear terms `[sign] [coef] name` until a stop token; returns the terms by
/// name and the index of the stop token.
fn linear_terms<'a>(toks: &[Tok<'a>], mut p: usize, stop: &[&str]) -> Result<(Vec<(&'a str, f64)>, f64, usize)> {
    let mut terms = Vec::new();
    let mut constant = 0.0;
    while p < toks.len() && !stop.contains(&toks[p].text) {
        let mut sign = 1.0;
        if toks[p].text == "+" || toks[p].text == "-" {
            if toks.get(p + 1).is_some_and(|t| stop.contains(&t.text)) {
                break;
            }
            if toks[p].text == "-" {
                sign = -1.0;
            }
            p += 1;
        }
        let t = toks.get(p).ok_or_else(|| err(toks[p - 1].line, "dangling sign"))?;
        if is_number(t.text) {
            let c = number(t)?;
            p += 1;
            match toks.get(p) {
                Some(v) if !stop.contains(&v.text) && !matches!(v.text, "+" | "-") && !is_number(v.text) => {
                    terms.push((v.text, sign * c));
                    p += 1;
                }
                _ => constant += sign * c,
            }
        } else {
            terms.push((t.text, sign));
            p += 1;
        }
    }
    Ok((terms, constant, p))
}

pub fn read_lp(text: &str) -> Result<MipModel> {
    let mut model = MipModel::new("");
    let mut big_m = Vec::new();
    let mut section = Section::Header;
    let mut maximize = false;
    let mut obj_toks: Vec<Tok> = Vec::new();
    let mut row_toks: Vec<Tok> = Vec::new();
    let mut binaries: Vec<Tok> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let ln = ln + 1;
        let trimmed = line.trim();
        if let Some(c) = trimmed.strip_prefix('\\') {
            let c = c.trim();
            if let Some(name) = c.strip_prefix("Problem:") {
                model.name = name.trim().to_string();
            } else if let Some(rest) = c.strip_prefix("bigM ") {
                let mut parts = rest.splitn(3, ' ');
                let name = parts.next().unwrap_or_default().to_string();
                let value = parts
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| err(ln, "big-M entry without a value"))?;
                big_m.push(BigMEntry { name, value, provenance: parts.next().unwrap_or_default().to_string() });
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let next = match trimmed.to_ascii_lowercase().as_str() {
            "minimize" | "minimise" | "min" => Some(Section::Objective),
            "maximize" | "maximise" | "max" => {
                maximize = true;
                Some(Section::Objective)
            }
            "subject to" | "st" | "s.t." => Some(Section::Rows),
            "bounds" => Some(Section::Bounds),
            "binaries" | "binary" => Some(Section::Binaries),
            "end" => Some(Section::Done),
            _ => None,
        };
        if let Some(s) = next {
            section = s;
            continue;
        }
        let toks = trimmed.split_whitespace().map(|text| Tok { text, line: ln });
        match section {
            Section::Objective => obj_toks.extend(toks),
            Section::Rows => row_toks.extend(toks),
            Section::Binaries => binaries.extend(toks),
            Section::Bounds => {
                let t: Vec<Tok> = toks.collect();
                match t.as_slice() {
                    [v, f] if f.text.eq_ignore_ascii_case("free") => {
                        model.add_var(v.text.to_string(), VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY);
                    }
                    [lo, a, v, b, hi] if a.text == "<=" && b.text == "<=" => {
                        model.add_var(v.text.to_string(), VarKind::Continuous, number(lo)?, number(hi)?);
                    }
                    _ => return Err(err(ln, "unsupported bound line")),
                }
            }
            Section::Header => return Err(err(ln, "content before the objective section")),
            Section::Done => return Err(err(ln, "content after End")),
        }
    }
    if section != Section::Done {
        return Err(err(text.lines().count(), "missing End"));
    }
    let lookup = |m: &MipModel, name: &str, line: usize| m.var(name).ok_or_else(|| err(line, format!("unknown variable {name}")));

    for b in &binaries {
        let i = lookup(&model, b.text, b.line)?;
        let v = &mut model.variables[i];
        v.kind = VarKind::Binary;
    }

    // objective
    if obj_toks.first().is_some_and(|t| t.text.ends_with(':')) {
        obj_toks.remove(0);
    }
    let (lin, mut constant, mut p) = linear_terms(&obj_toks, 0, &["["])?;
    let mut linear = Vec::new();
    for (name, c) in lin {
        linear.push((lookup(&model, name, obj_toks[0].line)?, c));
    }
    let mut quadratic = Vec::new();
    if p < obj_toks.len() {
        if obj_toks[p].text == "+" {
            p += 1;
        }
        if obj_toks.get(p).map(|t| t.text) != Some("[") {
            return Err(err(obj_toks[p.min(obj_toks.len() - 1)].line, "expected '['"));
        }
        p += 1;
        while p < obj_toks.len() && obj_toks[p].text != "]" {
            let line = obj_toks[p].line;
            let sign = if obj_toks[p].text == "-" { -1.0 } else { 1.0 };
            if matches!(obj_toks[p].text, "+" | "-") {
                p += 1;
            }
            let get = |p: usize| obj_toks.get(p).ok_or_else(|| err(line, "truncated quadratic term"));
            let c = number(get(p)?)?;
            let a = lookup(&model, get(p + 1)?.text, line)?;
            let (b, step) = match get(p + 2)?.text {
                "^" => (a, 4),
                "*" => (lookup(&model, get(p + 3)?.text, line)?, 4),
                other => return Err(err(line, format!("unexpected '{other}' in quadratic term"))),
            };
            quadratic.push(QuadTerm { i: a, j: b, coef: sign * c / 2.0 });
            p += step;
        }
        let tail: Vec<&str> = obj_toks.iter().skip(p + 1).map(|t| t.text).collect();
        if tail.len() < 2 || tail[0] != "/" || tail[1] != "2" {
            return Err(err(obj_toks[p.min(obj_toks.len() - 1)].line, "quadratic block must end with '] / 2'"));
        }
        let (rest, c, _) = linear_terms(&obj_toks, p + 3, &[])?;
        if !rest.is_empty() {
            return Err(err(obj_toks[p].line, "linear terms after the quadratic block"));
        }
        constant += c;
    }
    model.objective.maximize = maximize;
    model.objective.linear = linear;
    model.objective.quadratic = quadratic;
    model.objective.constant = constant;

    // rows
    let mut p = 0;
    while p < row_toks.len() {
        let head = &row_toks[p];
        let name = head.text.strip_suffix(':').ok_or_else(|| err(head.line, "row without a name"))?;
        let (terms, _, q) = linear_terms(&row_toks, p + 1, &["<=", ">=", "="])?;
        let sense = match row_toks.get(q).map(|t| t.text) {
            Some("<=") => Sense::Le,
            Some(">=") => Sense::Ge,
            Some("=") => Sense::Eq,
            _ => return Err(err(head.line, format!("row {name} has no sense"))),
        };
        let rhs = number(row_toks.get(q + 1).ok_or_else(|| err(head.line, "missing right-hand side"))?)?;
        let mut idx = Vec::with_capacity(terms.len());
        for (v, c) in terms {
            idx.push((lookup(&model, v, head.line)?, c));
        }
        model.add_row(name.to_string(), idx, sense, rhs);
        p = q + 2;
    }
    model.big_m = big_m;
    model.rebuild_index();
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MipModel {
        let mut m = MipModel::new("sample");
        let a = m.add_var("theta_0".into(), VarKind::Continuous, -8.0, -1.0);
        let b = m.add_var("x_0_0".into(), VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY);
        let z = m.add_var("z_0_0".into(), VarKind::Binary, 0.0, 1.0);
        m.add_row("r0".into(), vec![(a, 0.1), (b, -1.0 / 3.0), (z, 1e-17)], Sense::Le, 2.5);
        m.add_row("assign_0".into(), vec![(z, 1.0)], Sense::Eq, 1.0);
        m.objective.linear = vec![(b, -0.7)];
        m.objective.quadratic = vec![QuadTerm { i: b, j: b, coef: 0.5 }, QuadTerm { i: a, j: b, coef: 1.0 / 3.0 }];
        m.objective.constant = 6.25;
        m.big_m.push(BigMEntry { name: "M1".into(), value: 12.5, provenance: "multiplier bound".into() });
        m
    }

    #[test]
    fn round_trip_is_exact() {
        let m = sample();
        let back = read_lp(&write_lp(&m)).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.var("z_0_0"), Some(2));
    }

    #[test]
    fn long_rows_wrap_and_still_parse() {
        let mut m = MipModel::new("wide");
        let vars: Vec<usize> =
            (0..60).map(|i| m.add_var(format!("x_0_{i}"), VarKind::Continuous, 0.0, f64::INFINITY)).collect();
        m.add_row("sum".into(), vars.iter().map(|&v| (v, 1.25)).collect(), Sense::Ge, 3.0);
        let text = write_lp(&m);
        assert!(text.lines().all(|l| l.len() <= WRAP + 20));
        assert_eq!(read_lp(&text).unwrap(), m);
    }

    #[test]
    fn parse_errors_carry_lines() {
        let bad = "Minimize\n obj: + 1 y\nSubject To\n c: + 1 y <= 1\nBounds\n 0 <= x <= 1\nEnd\n";
        match read_lp(bad) {
            Err(ImopError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(read_lp("Minimize\n obj: 0\n").is_err());
    }

    proptest::proptest! {
        #[test]
        fn random_models_round_trip(
            coefs in proptest::collection::vec(-1e6f64..1e6, 1..40),
            rhs in -1e3f64..1e3,
            ub in 0.0f64..50.0,
        ) {
            let mut m = MipModel::new("random");
            let vars: Vec<usize> = (0..coefs.len())
                .map(|i| m.add_var(format!("x_{i}"), VarKind::Continuous, -ub, ub))
                .collect();
            let z = m.add_var("z_0".into(), VarKind::Binary, 0.0, 1.0);
            m.add_row("r".into(), vars.iter().zip(&coefs).map(|(&v, &c)| (v, c)).collect(), Sense::Le, rhs);
            m.add_row("pick".into(), vec![(z, 1.0)], Sense::Eq, 1.0);
            m.objective.linear = vars.iter().zip(&coefs).map(|(&v, &c)| (v, c / 3.0)).collect();
            m.objective.quadratic = vec![QuadTerm { i: vars[0], j: vars[0], coef: coefs[0].abs() }];
            proptest::prop_assert_eq!(read_lp(&write_lp(&m)).unwrap(), m);
        }
    }

    #[test]
    fn file_names() {
        assert_eq!(lp_file_name("mqp-rhs", 2, 2), "mqp-rhs_2_2.lp");
    }
}

//! SDPA sparse (`.dat-s`) files and solver output parsing.
//!
//! The file encodes `minimize cᵀz` subject to `Σ zᵢFᵢ − F₀ ⪰ 0`, so the
//! constant matrices are written with flipped sign. Variable names travel in
//! `*v <index> <name>` comment lines, which SDPA readers ignore.

use std::fmt::Write as _;

use super::{ConicProgram, ProgramBlock, Solution, Status, Triplet};
use crate::error::{Error, Result};

/// Renders the program in SDPA sparse format.
pub fn export_sdpa(p: &ConicProgram) -> String {
    let mut out = String::new();
    out.push_str("* SDPA sparse format: minimize c'z subject to sum_i z_i F_i - F_0 >= 0\n");
    for (i, name) in p.var_names.iter().enumerate() {
        let _ = writeln!(out, "*v {} {}", i + 1, name);
    }
    let _ = writeln!(out, "{}", p.n_vars);
    let _ = writeln!(out, "{}", p.blocks.len());
    let sizes: Vec<String> = p
        .blocks
        .iter()
        .map(|b| if b.diagonal { format!("-{}", b.size) } else { b.size.to_string() })
        .collect();
    let _ = writeln!(out, "{}", sizes.join(" "));
    let obj: Vec<String> = p.c.iter().map(|v| format!("{v:?}")).collect();
    let _ = writeln!(out, "{}", obj.join(" "));
    for (b, blk) in p.blocks.iter().enumerate() {
        for &(i, j, v) in &blk.constant {
            let _ = writeln!(out, "0 {} {} {} {:?}", b + 1, i + 1, j + 1, -v);
        }
        for (var, t) in &blk.coeffs {
            for &(i, j, v) in t {
                let _ = writeln!(out, "{} {} {} {} {:?}", var + 1, b + 1, i + 1, j + 1, v);
            }
        }
    }
    out
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| parse_err(line, format!("bad number '{tok}'")))
}

fn numbers(s: &str, line: usize) -> Result<Vec<f64>> {
    s.split(|c: char| c.is_whitespace() || c == ',' || c == '{' || c == '}' || c == '(' || c == ')')
        .filter(|t| !t.is_empty())
        .map(|t| parse_f64(t, line))
        .collect()
}

/// Parses an SDPA sparse file written by [`export_sdpa`] or any conforming tool.
pub fn import_sdpa(text: &str) -> Result<ConicProgram> {
    let mut names: Vec<(usize, String)> = Vec::new();
    let mut header: Vec<(usize, &str)> = Vec::new();
    let mut body: Vec<(usize, &str)> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let ln = ln + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('*') || line.starts_with('"') {
            if let Some(rest) = line.strip_prefix("*v ") {
                let mut it = rest.splitn(2, ' ');
                let idx = it.next().and_then(|s| s.parse::<usize>().ok());
                if let (Some(idx), Some(name)) = (idx, it.next()) {
                    names.push((idx, name.to_string()));
                }
            }
            continue;
        }
        if header.len() < 4 {
            header.push((ln, line));
        } else {
            body.push((ln, line));
        }
    }
    if header.len() < 4 {
        return Err(parse_err(text.lines().count(), "incomplete header"));
    }
    let first_int = |(ln, s): (usize, &str)| -> Result<usize> {
        let tok = s.split(|c: char| c.is_whitespace() || c == ',').find(|t| !t.is_empty()).unwrap_or("");
        tok.parse::<usize>().map_err(|_| parse_err(ln, format!("expected integer, got '{tok}'")))
    };
    let m = first_int(header[0])?;
    let nb = first_int(header[1])?;
    let (ln, sizes_line) = header[2];
    let sizes: Vec<i64> = sizes_line
        .split(|c: char| c.is_whitespace() || c == ',' || c == '{' || c == '}' || c == '(' || c == ')')
        .filter(|t| !t.is_empty())
        .take(nb)
        .map(|t| t.parse::<i64>().map_err(|_| parse_err(ln, format!("bad block size '{t}'"))))
        .collect::<Result<_>>()?;
    if sizes.len() != nb || sizes.iter().any(|&s| s == 0) {
        return Err(parse_err(ln, "block structure does not match block count"));
    }
    let (ln, obj_line) = header[3];
    let c = numbers(obj_line, ln)?;
    if c.len() != m {
        return Err(parse_err(ln, format!("objective has {} entries, expected {m}", c.len())));
    }
    let mut blocks: Vec<ProgramBlock> =
        sizes.iter().map(|&s| ProgramBlock::new(s.unsigned_abs() as usize, s < 0)).collect();
    // Per block, the coefficient lists in order of first appearance.
    let mut pending: Vec<Vec<(usize, Vec<Triplet>)>> = vec![Vec::new(); nb];
    for (ln, line) in body {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 5 {
            return Err(parse_err(ln, "expected 'matno blkno i j value'"));
        }
        let int = |t: &str| t.parse::<usize>().map_err(|_| parse_err(ln, format!("bad index '{t}'")));
        let (mat, blk, i, j) = (int(toks[0])?, int(toks[1])?, int(toks[2])?, int(toks[3])?);
        let v = parse_f64(toks[4], ln)?;
        if blk == 0 || blk > nb || mat > m {
            return Err(parse_err(ln, "matrix or block index out of range"));
        }
        let b = &blocks[blk - 1];
        if i == 0 || j == 0 || i > b.size || j > b.size {
            return Err(parse_err(ln, "entry index out of range"));
        }
        let (i, j) = if i <= j { (i - 1, j - 1) } else { (j - 1, i - 1) };
        if b.diagonal && i != j {
            return Err(parse_err(ln, "off-diagonal entry in a diagonal block"));
        }
        if mat == 0 {
            blocks[blk - 1].constant.push((i, j, -v));
        } else {
            let list = &mut pending[blk - 1];
            match list.iter_mut().find(|(var, _)| *var == mat - 1) {
                Some((_, t)) => t.push((i, j, v)),
                None => list.push((mat - 1, vec![(i, j, v)])),
            }
        }
    }
    for (b, mut list) in blocks.iter_mut().zip(pending) {
        list.sort_by_key(|(v, _)| *v);
        b.coeffs = list;
    }
    let mut var_names: Vec<String> = (0..m).map(|i| format!("z{}", i + 1)).collect();
    for (idx, name) in names {
        if idx >= 1 && idx <= m {
            var_names[idx - 1] = name;
        }
    }
    Ok(ConicProgram { n_vars: m, c, blocks, var_names })
}

fn sdpa_status(phase: &str) -> Status {
    match phase {
        "pdOPT" => Status::Optimal,
        "pFEAS" | "dFEAS" | "pdFEAS" => Status::NearOptimal,
        "pINF_dFEAS" | "pINF" => Status::Infeasible,
        "pFEAS_dINF" | "dINF" | "pUNBD" => Status::Unbounded,
        _ => Status::SolverFailure,
    }
}

/// Parses solver output. Two layouts are accepted.
///
/// * Plain: the first numeric line holds the objective, the next one the
///   variable vector (whitespace or comma separated, braces allowed).
/// * SDPA-style: `objValPrimal = v`, `objValDual = v`, `phase.value = s`
///   and `xVec =` followed by `{z1,z2,...}`, surrounded by any banner text.
///
/// The block eigenvalue residuals are left empty; [`super::verify`] fills
/// them from the program.
pub fn import_solution(text: &str) -> Result<Solution> {
    let lines: Vec<&str> = text.lines().collect();
    let has_sdpa_keys = lines.iter().any(|l| l.contains("xVec"));
    if has_sdpa_keys {
        let mut primal = None;
        let mut dual = None;
        let mut status = Status::SolverFailure;
        let mut z = None;
        let mut iterations = 0usize;
        let mut idx = 0;
        while idx < lines.len() {
            let ln = idx + 1;
            let line = lines[idx].trim();
            let value_after_eq = || line.split_once('=').map(|(_, v)| v.trim());
            if line.starts_with("objValPrimal") {
                let v = value_after_eq().ok_or_else(|| parse_err(ln, "missing '='"))?;
                primal = Some(parse_f64(v.split_whitespace().next().unwrap_or(""), ln)?);
            } else if line.starts_with("objValDual") {
                let v = value_after_eq().ok_or_else(|| parse_err(ln, "missing '='"))?;
                dual = Some(parse_f64(v.split_whitespace().next().unwrap_or(""), ln)?);
            } else if line.starts_with("phase.value") {
                if let Some(v) = value_after_eq() {
                    status = sdpa_status(v.split_whitespace().next().unwrap_or(""));
                }
            } else if line.starts_with("Iteration") && line.contains('=') {
                iterations = value_after_eq().and_then(|v| v.parse().ok()).unwrap_or(0);
            } else if line.starts_with("xVec") {
                // The vector follows on the same line or the next non-empty one.
                let mut rest = value_after_eq().unwrap_or("").to_string();
                let mut vec_ln = ln;
                while rest.trim().is_empty() && idx + 1 < lines.len() {
                    idx += 1;
                    vec_ln = idx + 1;
                    rest = lines[idx].trim().to_string();
                }
                // Braced vectors may span several lines.
                if rest.contains('{') {
                    while !rest.contains('}') && idx + 1 < lines.len() {
                        idx += 1;
                        rest.push(' ');
                        rest.push_str(lines[idx].trim());
                    }
                }
                z = Some(numbers(&rest, vec_ln)?);
            }
            idx += 1;
        }
        let z = z.ok_or_else(|| parse_err(lines.len(), "xVec not found"))?;
        let primal = primal.ok_or_else(|| parse_err(lines.len(), "objValPrimal not found"))?;
        return Ok(Solution {
            status,
            z,
            primal_obj: primal,
            dual_obj: dual.unwrap_or(primal),
            block_min_eigs: Vec::new(),
            iterations,
            wall_time: 0.0,
        });
    }
    let mut numeric = lines
        .iter()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('*') && !t.starts_with('"') && !t.starts_with('#')
        });
    let (ln, first) = numeric.next().ok_or_else(|| parse_err(1, "empty solution"))?;
    let obj = numbers(first, ln + 1)?;
    if obj.len() != 1 {
        return Err(parse_err(ln + 1, "first line must hold exactly one objective value"));
    }
    let z = match numeric.next() {
        Some((ln, l)) => numbers(l, ln + 1)?,
        None => Vec::new(),
    };
    Ok(Solution {
        status: Status::Optimal,
        z,
        primal_obj: obj[0],
        dual_obj: obj[0],
        block_min_eigs: Vec::new(),
        iterations: 0,
        wall_time: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_program_layout() {
        let mut p = ConicProgram::new(1);
        p.c[0] = 1.0;
        let mut b = ProgramBlock::new(1, false);
        b.constant.push((0, 0, 0.0));
        b.coeffs.push((0, vec![(0, 0, 1.0)]));
        p.blocks.push(b);
        let text = export_sdpa(&p);
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('*')).collect();
        assert_eq!(&data[..4], &["1", "1", "1", "1.0"]);
        assert!(data.contains(&"1 1 1 1 1.0"));
        assert_eq!(import_sdpa(&text).unwrap(), p);
    }

    #[test]
    fn sdpa_output_with_banner() {
        let text = "SDPA start\nphase.value  = pdOPT\nIteration = 12\nobjValPrimal = 1.5e+00\nobjValDual = 1.4999e+00\nnoise\nxVec = \n{1.0,-2.5,3}\nxMat = ...\n";
        let s = import_solution(text).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert_eq!(s.z, vec![1.0, -2.5, 3.0]);
        assert_eq!(s.primal_obj, 1.5);
        assert_eq!(s.iterations, 12);
    }

    #[test]
    fn plain_output() {
        let s = import_solution("0.25\n1 2 3\n").unwrap();
        assert_eq!(s.primal_obj, 0.25);
        assert_eq!(s.z, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn parse_error_line_number() {
        match import_solution("0.25\n1 x 3\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}

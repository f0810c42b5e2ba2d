//! File formats: sparse SDPA (`.dat-s`) programs and the plain-text matrix,
//! polynomial, partition, and polynomial-matrix formats used by the CLI.
//!
//! SDPA files carry comments (lines starting with `"` or `*`), then the
//! constraint count, the number of blocks, the signed block structure
//! (negative sizes are diagonal blocks), the right-hand-side vector, and
//! entry quintuples `matno blkno i j value` with `matno 0` for the objective.
//! Diagonal blocks are expanded to 1x1 PSD blocks on read. Values are written
//! with 17 significant digits so write-then-read round-trips entries exactly.

use crate::linalg::SymMatrix;
use crate::partition::Partition;
use crate::solver::ConicProgram;
use crate::sos::{PolyMatrix, PolynomialForm};
use crate::{Error, Result};
use std::path::Path;

/// One sparse entry of an SDPA file (1-based indices, `i <= j`).
#[derive(Debug, Clone, PartialEq)]
pub struct SdpaEntry {
    pub matno: usize,
    pub blkno: usize,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// Parsed SDPA data before block expansion.
#[derive(Debug, Clone)]
pub struct SdpaFile {
    /// Signed block sizes: positive for PSD blocks, negative for diagonal.
    pub block_structure: Vec<i64>,
    /// Right-hand sides, one per constraint.
    pub c: Vec<f64>,
    pub entries: Vec<SdpaEntry>,
}

fn tokenize(text: &str) -> Vec<(String, usize)> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim_start();
        if trimmed.starts_with('"') || trimmed.starts_with('*') {
            continue;
        }
        let cleaned: String = line
            .chars()
            .map(|c| if matches!(c, '{' | '}' | '(' | ')' | ',') { ' ' } else { c })
            .collect();
        for tok in cleaned.split_whitespace() {
            out.push((tok.to_string(), lineno + 1));
        }
    }
    out
}

struct TokenStream {
    toks: Vec<(String, usize)>,
    pos: usize,
}

impl TokenStream {
    fn next(&mut self, what: &str) -> Result<(String, usize)> {
        if self.pos >= self.toks.len() {
            let line = self.toks.last().map(|t| t.1).unwrap_or(0);
            return Err(Error::Parse { line, msg: format!("unexpected end of file, expected {what}") });
        }
        let t = self.toks[self.pos].clone();
        self.pos += 1;
        Ok(t)
    }

    fn next_usize(&mut self, what: &str) -> Result<(usize, usize)> {
        let (tok, line) = self.next(what)?;
        tok.parse::<usize>()
            .map(|v| (v, line))
            .map_err(|_| Error::Parse { line, msg: format!("expected {what}, found `{tok}`") })
    }

    fn next_i64(&mut self, what: &str) -> Result<(i64, usize)> {
        let (tok, line) = self.next(what)?;
        tok.parse::<i64>()
            .map(|v| (v, line))
            .map_err(|_| Error::Parse { line, msg: format!("expected {what}, found `{tok}`") })
    }

    fn next_f64(&mut self, what: &str) -> Result<(f64, usize)> {
        let (tok, line) = self.next(what)?;
        tok.parse::<f64>()
            .map(|v| (v, line))
            .map_err(|_| Error::Parse { line, msg: format!("expected {what}, found `{tok}`") })
    }

    fn done(&self) -> bool {
        self.pos >= self.toks.len()
    }
}

/// Parse SDPA text into its raw structure.
pub fn parse_sdpa(text: &str) -> Result<SdpaFile> {
    let mut ts = TokenStream { toks: tokenize(text), pos: 0 };
    let (m, _) = ts.next_usize("constraint count")?;
    let (nblocks, nb_line) = ts.next_usize("block count")?;
    if nblocks == 0 {
        return Err(Error::Parse { line: nb_line, msg: "zero blocks".into() });
    }
    let mut block_structure = Vec::with_capacity(nblocks);
    for k in 0..nblocks {
        let (s, line) = ts.next_i64("block size")?;
        if s == 0 {
            return Err(Error::Parse { line, msg: format!("block {} has size zero", k + 1) });
        }
        block_structure.push(s);
    }
    let mut c = Vec::with_capacity(m);
    for _ in 0..m {
        let (v, line) = ts.next_f64("right-hand side")?;
        if !v.is_finite() {
            return Err(Error::Parse { line, msg: "non-finite right-hand side".into() });
        }
        c.push(v);
    }
    let mut entries = Vec::new();
    while !ts.done() {
        let (matno, line) = ts.next_usize("matrix number")?;
        let (blkno, _) = ts.next_usize("block number")?;
        let (i, _) = ts.next_usize("row index")?;
        let (j, _) = ts.next_usize("column index")?;
        let (value, vline) = ts.next_f64("entry value")?;
        if matno > m {
            return Err(Error::Validation(format!(
                "line {line}: matrix number {matno} exceeds constraint count {m}"
            )));
        }
        if blkno == 0 || blkno > nblocks {
            return Err(Error::Validation(format!(
                "line {line}: block {blkno} outside the declared structure"
            )));
        }
        let size = block_structure[blkno - 1].unsigned_abs() as usize;
        if i == 0 || j == 0 || i > j || j > size {
            return Err(Error::Validation(format!(
                "line {line}: entry ({i}, {j}) invalid for block {blkno} of size {size}"
            )));
        }
        if block_structure[blkno - 1] < 0 && i != j {
            return Err(Error::Validation(format!(
                "line {line}: off-diagonal entry in diagonal block {blkno}"
            )));
        }
        if !value.is_finite() {
            return Err(Error::Parse { line: vline, msg: "non-finite value".into() });
        }
        entries.push(SdpaEntry { matno, blkno, i, j, value });
    }
    Ok(SdpaFile { block_structure, c, entries })
}

impl SdpaFile {
    /// Expand to a conic program: diagonal blocks become runs of 1x1 PSD
    /// blocks. Repeated entries overwrite earlier ones.
    pub fn to_program(&self) -> Result<ConicProgram> {
        let m = self.c.len();
        // Expanded block layout: (first expanded index, expanded count, size).
        let mut layout = Vec::with_capacity(self.block_structure.len());
        let mut sizes: Vec<usize> = Vec::new();
        for &s in &self.block_structure {
            if s > 0 {
                layout.push((sizes.len(), 1usize, s as usize));
                sizes.push(s as usize);
            } else {
                let k = (-s) as usize;
                layout.push((sizes.len(), k, 1usize));
                sizes.extend(std::iter::repeat(1).take(k));
            }
        }
        let zero_mats =
            || -> Vec<SymMatrix> { sizes.iter().map(|&d| SymMatrix::zeros(d)).collect() };
        let mut objective = zero_mats();
        let mut cons: Vec<Vec<SymMatrix>> = (0..m).map(|_| zero_mats()).collect();
        for e in &self.entries {
            let (first, count, _) = layout[e.blkno - 1];
            let (target_block, bi, bj) = if count == 1 {
                (first, e.i - 1, e.j - 1)
            } else {
                (first + e.i - 1, 0, 0)
            };
            let mats = if e.matno == 0 { &mut objective } else { &mut cons[e.matno - 1] };
            mats[target_block].set(bi, bj, e.value);
        }
        let mut prog = ConicProgram::new(sizes, objective)?;
        for (data, &rhs) in cons.into_iter().zip(&self.c) {
            prog.add_constraint(data, rhs)?;
        }
        Ok(prog)
    }
}

/// Serialize a conic program as sparse SDPA text.
pub fn serialize_sdpa(prog: &ConicProgram) -> String {
    let mut out = String::new();
    out.push_str(&format!("{}\n", prog.m()));
    out.push_str(&format!("{}\n", prog.block_sizes().len()));
    let sizes: Vec<String> = prog.block_sizes().iter().map(|s| s.to_string()).collect();
    out.push_str(&sizes.join(" "));
    out.push('\n');
    let rhs: Vec<String> = prog.rhs().iter().map(|v| fmt_exact(*v)).collect();
    out.push_str(&rhs.join(" "));
    out.push('\n');
    let emit = |matno: usize, mats: &[SymMatrix], out: &mut String| {
        for (b, mat) in mats.iter().enumerate() {
            for i in 0..mat.n() {
                for j in i..mat.n() {
                    let v = mat.get(i, j);
                    if v != 0.0 {
                        out.push_str(&format!(
                            "{} {} {} {} {}\n",
                            matno,
                            b + 1,
                            i + 1,
                            j + 1,
                            fmt_exact(v)
                        ));
                    }
                }
            }
        }
    };
    emit(0, prog.objective(), &mut out);
    for (k, c) in prog.constraints().iter().enumerate() {
        emit(k + 1, &c.data, &mut out);
    }
    out
}

/// 17-significant-digit rendering; round-trips every finite f64 exactly.
fn fmt_exact(v: f64) -> String {
    format!("{v:.16e}")
}

/// Read a conic program from a sparse SDPA file.
pub fn read_sdpa(path: impl AsRef<Path>) -> Result<ConicProgram> {
    let text = std::fs::read_to_string(path)?;
    parse_sdpa(&text)?.to_program()
}

/// Write a conic program as a sparse SDPA file.
pub fn write_sdpa(prog: &ConicProgram, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, serialize_sdpa(prog))?;
    Ok(())
}

fn strip_comments(text: &str) -> Vec<(String, usize)> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let body = match line.find('#') {
            Some(k) => &line[..k],
            None => line,
        };
        for tok in body.split_whitespace() {
            out.push((tok.to_string(), lineno + 1));
        }
    }
    out
}

/// Parse a matrix: first token `n`, then `n * n` row-major reals.
/// `#` starts a comment. Asymmetry beyond the crate tolerance is rejected.
pub fn parse_matrix(text: &str) -> Result<SymMatrix> {
    let toks = strip_comments(text);
    let mut ts = TokenStream { toks, pos: 0 };
    let (n, nline) = ts.next_usize("matrix dimension")?;
    if n == 0 {
        return Err(Error::Parse { line: nline, msg: "zero dimension".into() });
    }
    let mut data = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        data.push(ts.next_f64("matrix entry")?.0);
    }
    if !ts.done() {
        let (tok, line) = ts.next("end of file")?;
        return Err(Error::Parse { line, msg: format!("trailing token `{tok}`") });
    }
    SymMatrix::from_rows(n, data)
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<SymMatrix> {
    parse_matrix(&std::fs::read_to_string(path)?)
}

pub fn serialize_matrix(m: &SymMatrix) -> String {
    let mut out = format!("{}\n", m.n());
    for i in 0..m.n() {
        let row: Vec<String> = (0..m.n()).map(|j| fmt_exact(m.get(i, j))).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_matrix(m: &SymMatrix, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, serialize_matrix(m))?;
    Ok(())
}

/// Parse a polynomial: header `nvars <k>`, then term lines
/// `coeff e_1 ... e_k`. Repeated exponent tuples accumulate.
pub fn parse_poly(text: &str) -> Result<PolynomialForm> {
    let toks = strip_comments(text);
    let mut ts = TokenStream { toks, pos: 0 };
    let (kw, line) = ts.next("`nvars` header")?;
    if kw != "nvars" {
        return Err(Error::Parse { line, msg: format!("expected `nvars`, found `{kw}`") });
    }
    let (k, kline) = ts.next_usize("variable count")?;
    if k == 0 {
        return Err(Error::Parse { line: kline, msg: "zero variables".into() });
    }
    let mut poly = PolynomialForm::zero(k);
    while !ts.done() {
        let (coeff, _) = ts.next_f64("coefficient")?;
        let mut exps = Vec::with_capacity(k);
        for _ in 0..k {
            exps.push(ts.next_usize("exponent")?.0 as u32);
        }
        poly.add_term(&exps, coeff)?;
    }
    Ok(poly)
}

pub fn read_poly(path: impl AsRef<Path>) -> Result<PolynomialForm> {
    parse_poly(&std::fs::read_to_string(path)?)
}

/// Parse a partition: whitespace-separated positive block sizes, `#` starts
/// a comment line.
pub fn parse_partition(text: &str) -> Result<Partition> {
    let toks = strip_comments(text);
    let mut sizes = Vec::new();
    for (tok, line) in toks {
        let v = tok
            .parse::<usize>()
            .map_err(|_| Error::Parse { line, msg: format!("expected block size, found `{tok}`") })?;
        sizes.push(v);
    }
    Partition::new(sizes)
}

pub fn read_partition(path: impl AsRef<Path>) -> Result<Partition> {
    parse_partition(&std::fs::read_to_string(path)?)
}

/// Parse a polynomial matrix: headers `r <r>` and `nvars <k>`, then term
/// lines `i j coeff e_1 ... e_k` (1-based, either triangle; the mirror entry
/// is filled in automatically).
pub fn parse_polymatrix(text: &str) -> Result<PolyMatrix> {
    let toks = strip_comments(text);
    let mut ts = TokenStream { toks, pos: 0 };
    let (kw, line) = ts.next("`r` header")?;
    if kw != "r" {
        return Err(Error::Parse { line, msg: format!("expected `r`, found `{kw}`") });
    }
    let (r, rline) = ts.next_usize("matrix dimension")?;
    if r == 0 {
        return Err(Error::Parse { line: rline, msg: "zero dimension".into() });
    }
    let (kw, line) = ts.next("`nvars` header")?;
    if kw != "nvars" {
        return Err(Error::Parse { line, msg: format!("expected `nvars`, found `{kw}`") });
    }
    let (k, kline) = ts.next_usize("variable count")?;
    if k == 0 {
        return Err(Error::Parse { line: kline, msg: "zero variables".into() });
    }
    let mut entries: Vec<PolynomialForm> = vec![PolynomialForm::zero(k); r * r];
    while !ts.done() {
        let (i, iline) = ts.next_usize("row index")?;
        let (j, _) = ts.next_usize("column index")?;
        if i == 0 || j == 0 || i > r || j > r {
            return Err(Error::Validation(format!(
                "line {iline}: entry ({i}, {j}) outside the {r}x{r} matrix"
            )));
        }
        let (coeff, _) = ts.next_f64("coefficient")?;
        let mut exps = Vec::with_capacity(k);
        for _ in 0..k {
            exps.push(ts.next_usize("exponent")?.0 as u32);
        }
        entries[(i - 1) * r + (j - 1)].add_term(&exps, coeff)?;
        if i != j {
            entries[(j - 1) * r + (i - 1)].add_term(&exps, coeff)?;
        }
    }
    PolyMatrix::new(r, k, entries)
}

pub fn read_polymatrix(path: impl AsRef<Path>) -> Result<PolyMatrix> {
    parse_polymatrix(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_sdpa_file() {
        let text = "1\n1\n2\n1.0\n0 1 1 1 1.0\n1 1 1 1 1.0\n";
        let file = parse_sdpa(text).unwrap();
        assert_eq!(file.c, vec![1.0]);
        assert_eq!(file.block_structure, vec![2]);
        let prog = file.to_program().unwrap();
        assert_eq!(prog.m(), 1);
        assert_eq!(prog.block_sizes(), &[2]);
        assert_eq!(prog.objective()[0].get(0, 0), 1.0);
    }

    #[test]
    fn comments_and_braces_tolerated() {
        let text = "* a comment\n\" another\n2\n2\n{2, -3}\n(1.0, 2.0)\n0 1 1 2 -4.5\n";
        let file = parse_sdpa(text).unwrap();
        assert_eq!(file.block_structure, vec![2, -3]);
        assert_eq!(file.c, vec![1.0, 2.0]);
        assert_eq!(file.entries.len(), 1);
    }

    #[test]
    fn diagonal_blocks_expand() {
        let text = "1\n2\n2 -3\n1.0\n0 2 2 2 5.0\n1 1 1 1 1.0\n";
        let prog = parse_sdpa(text).unwrap().to_program().unwrap();
        assert_eq!(prog.block_sizes(), &[2, 1, 1, 1]);
        assert_eq!(prog.objective()[2].get(0, 0), 5.0);
    }

    #[test]
    fn entry_outside_block_rejected() {
        let text = "1\n1\n2\n1.0\n1 2 1 1 1.0\n";
        assert!(matches!(parse_sdpa(text), Err(Error::Validation(_))));
        let text = "1\n1\n2\n1.0\n1 1 1 3 1.0\n";
        assert!(matches!(parse_sdpa(text), Err(Error::Validation(_))));
        let text = "1\n1\n-2\n1.0\n1 1 1 2 1.0\n";
        assert!(matches!(parse_sdpa(text), Err(Error::Validation(_))));
    }

    #[test]
    fn parse_error_carries_line_number() {
        let text = "1\n1\n2\nnot_a_number\n";
        match parse_sdpa(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn sdpa_round_trip_entry_exact() {
        let mut prog = ConicProgram::new(vec![2, 1], vec![
            SymMatrix::from_rows(2, vec![1.0 / 3.0, -0.7, -0.7, 2e-17]).unwrap(),
            SymMatrix::from_diag(&[std::f64::consts::PI]),
        ])
        .unwrap();
        let mut a = SymMatrix::zeros(2);
        a.set(0, 1, f64::from_bits(0x3fb999999999999a));
        prog.add_constraint(vec![a, SymMatrix::from_diag(&[-1.0])], 0.1 + 0.2).unwrap();
        let text = serialize_sdpa(&prog);
        let back = parse_sdpa(&text).unwrap().to_program().unwrap();
        assert_eq!(back.m(), prog.m());
        assert_eq!(back.block_sizes(), prog.block_sizes());
        for (x, y) in prog.objective().iter().zip(back.objective()) {
            assert!(x.sub(y).fro_norm() == 0.0, "objective entries bit-exact");
        }
        for (cx, cy) in prog.constraints().iter().zip(back.constraints()) {
            assert_eq!(cx.rhs.to_bits(), cy.rhs.to_bits());
            for (x, y) in cx.data.iter().zip(&cy.data) {
                assert!(x.sub(y).fro_norm() == 0.0);
            }
        }
    }

    #[test]
    fn matrix_text_format() {
        let text = "# 2x2 example\n2\n1.0 2.0\n2.0 1.0\n";
        let m = parse_matrix(text).unwrap();
        assert_eq!(m.get(0, 1), 2.0);
        assert!(parse_matrix("2\n1 2 3\n").is_err());
        assert!(parse_matrix("2\n1 2 2.5 1\n").is_err(), "asymmetry rejected");
        let rt = parse_matrix(&serialize_matrix(&m)).unwrap();
        assert!(rt.sub(&m).fro_norm() == 0.0);
    }

    #[test]
    fn poly_text_format() {
        let p = parse_poly("nvars 1\n1 4\n-1 2\n").unwrap();
        assert_eq!(p.coeff(&[4]), 1.0);
        assert_eq!(p.coeff(&[2]), -1.0);
        assert_eq!(p.degree(), 4);
        assert!(parse_poly("nvars 1\n1\n").is_err(), "missing exponent");
        assert!(parse_poly("1 4\n").is_err(), "missing header");
    }

    #[test]
    fn partition_text_format() {
        let p = parse_partition("2 2 2\n").unwrap();
        assert_eq!(p.sizes(), &[2, 2, 2]);
        let p = parse_partition("# comment\n4 2 # trailing\n").unwrap();
        assert_eq!(p.sizes(), &[4, 2]);
        assert!(parse_partition("2 0 1").is_err());
        assert!(parse_partition("").is_err());
    }

    #[test]
    fn polymatrix_text_format() {
        let text = "r 2\nnvars 2\n1 1 4 2 0\n1 1 9 0 2\n1 2 1 1 0\n1 2 1 0 1\n2 2 1 2 0\n";
        let pm = parse_polymatrix(text).unwrap();
        assert_eq!(pm.r(), 2);
        assert_eq!(pm.get(0, 0).coeff(&[2, 0]), 4.0);
        assert_eq!(pm.get(0, 1).coeff(&[1, 0]), 1.0);
        assert_eq!(pm.get(1, 0).coeff(&[0, 1]), 1.0, "mirror filled");
    }
}

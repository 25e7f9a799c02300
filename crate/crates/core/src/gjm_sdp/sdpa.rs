//! Sparse SDPA (`.dat-s`) export of the feasibility program, plus a small
//! reader used for round-trip validation.
//!
//! The exported problem is the nullspace-reduced program
//! `min cᵀz  s.t.  Σ_i z_i F_i - F_0 ⪰ 0` over the free variables `z`
//! (the reduced coordinates `u`, plus the slack `t` as the last variable
//! when `slack_form` is set, in which case `c = (0, ..., 0, -1)` so that
//! minimizing realizes `max t`). Complex Hermitian blocks `A + iB` are
//! embedded as real symmetric blocks `[[A, -B], [B, A]]` of twice the size,
//! which preserves positive semidefiniteness. Variable and block ordering
//! is deterministic.

use nalgebra::DMatrix;

use crate::matqm::C64;

use super::program::GjmProgram;
use super::solver::{affine_parameterization, herm_param_count, realify};

/// Real symmetric embedding `[[Re, -Im], [Im, Re]]` of a complex Hermitian
/// matrix; PSD iff the original is PSD.
pub(crate) fn real_embed(m: &DMatrix<C64>) -> DMatrix<f64> {
    let d = m.nrows();
    let mut out = DMatrix::<f64>::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + d)] = -z.im;
            out[(i + d, j)] = z.im;
            out[(i + d, j + d)] = z.re;
        }
    }
    out
}

fn push_entries(lines: &mut Vec<String>, mat_no: usize, blk_no: usize, m: &DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i..n {
            let v = m[(i, j)];
            if v != 0.0 {
                lines.push(format!("{mat_no} {blk_no} {} {} {:.17e}", i + 1, j + 1, v));
            }
        }
    }
}

/// Emits the program in sparse SDPA format. With `slack_form` the slack
/// variable is appended and the objective is `max t`; without it the export
/// is the plain feasibility problem with a zero objective.
pub fn export_sdpa(p: &GjmProgram, slack_form: bool) -> String {
    let real = realify(p);
    let (x0, z_basis, _) = affine_parameterization(&real.a, &real.b);
    let d = p.dim();
    let per_block = herm_param_count(d);
    let n_free = z_basis.ncols();
    let n_blocks = p.n_blocks();
    let m_vars = n_free + usize::from(slack_form);

    let mut lines: Vec<String> = Vec::new();
    lines.push(format!(
        "\"G-JM feasibility program: {} blocks of complex dim {}, {} reduced variables{}\"",
        n_blocks,
        d,
        n_free,
        if slack_form { " + slack" } else { "" }
    ));
    lines.push(format!("{m_vars}"));
    lines.push(format!("{n_blocks}"));
    lines.push(
        (0..n_blocks)
            .map(|_| (2 * d).to_string())
            .collect::<Vec<_>>()
            .join(" "),
    );
    let mut c = vec!["0.0".to_string(); m_vars];
    if slack_form {
        *c.last_mut().expect("slack variable present") = "-1.0".into();
    }
    lines.push(c.join(" "));

    let slice_embed = |x: &[f64], j: usize| -> DMatrix<f64> {
        let herm =
            super::solver::herm_from_params(d, &x[real.offsets[j]..real.offsets[j] + per_block]);
        real_embed(herm.as_matrix())
    };

    for j in 0..n_blocks {
        // F_0 = -C0 so that X = Σ z_i F_i - F_0 matches blocks(x0 + Z u) - t I
        let f0 = -slice_embed(x0.as_slice(), j);
        push_entries(&mut lines, 0, j + 1, &f0);
    }
    for i in 0..n_free {
        let col = z_basis.column(i).into_owned();
        for j in 0..n_blocks {
            let fi = slice_embed(col.as_slice(), j);
            push_entries(&mut lines, i + 1, j + 1, &fi);
        }
    }
    if slack_form {
        for j in 0..n_blocks {
            let ft = -DMatrix::<f64>::identity(2 * d, 2 * d);
            push_entries(&mut lines, m_vars, j + 1, &ft);
        }
    }
    lines.join("\n") + "\n"
}

/// Parsed sparse SDPA problem.
#[derive(Debug, Clone)]
pub struct SdpaProblem {
    pub n_vars: usize,
    pub block_sizes: Vec<i64>,
    pub objective: Vec<f64>,
    /// `(mat_no, block_no, i, j, value)` with 1-based upper-triangular
    /// indices, as read.
    pub entries: Vec<(usize, usize, usize, usize, f64)>,
}

impl SdpaProblem {
    /// Materializes constraint matrix `mat_no` (0 = F_0) as dense symmetric
    /// blocks.
    pub fn matrix(&self, mat_no: usize) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self
            .block_sizes
            .iter()
            .map(|&s| {
                let n = s.unsigned_abs() as usize;
                DMatrix::zeros(n, n)
            })
            .collect();
        for &(m, blk, i, j, v) in &self.entries {
            if m == mat_no {
                out[blk - 1][(i - 1, j - 1)] = v;
                out[blk - 1][(j - 1, i - 1)] = v;
            }
        }
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SdpaParseError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("unexpected end of file while reading {0}")]
    Truncated(&'static str),
}

/// Reads the sparse SDPA format written by [`export_sdpa`] (comment lines
/// starting with `"` or `*`, then m, nblocks, block sizes, objective, and
/// entry lines).
pub fn parse_sdpa(text: &str) -> Result<SdpaProblem, SdpaParseError> {
    let mut significant = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('"') && !l.starts_with('*'));

    let (line_no, m_line) = significant.next().ok_or(SdpaParseError::Truncated("m"))?;
    let n_vars: usize = m_line
        .split_whitespace()
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or(SdpaParseError::Malformed {
            line: line_no,
            reason: "expected variable count".into(),
        })?;

    let (line_no, nb_line) = significant
        .next()
        .ok_or(SdpaParseError::Truncated("nblocks"))?;
    let n_blocks: usize = nb_line
        .split_whitespace()
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or(SdpaParseError::Malformed {
            line: line_no,
            reason: "expected block count".into(),
        })?;

    let (line_no, sizes_line) = significant
        .next()
        .ok_or(SdpaParseError::Truncated("block sizes"))?;
    let block_sizes: Vec<i64> = sizes_line
        .split(|c: char| {
            c.is_whitespace() || c == ',' || c == '(' || c == ')' || c == '{' || c == '}'
        })
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<i64>())
        .collect::<Result<_, _>>()
        .map_err(|e| SdpaParseError::Malformed {
            line: line_no,
            reason: format!("bad block size: {e}"),
        })?;
    if block_sizes.len() != n_blocks {
        return Err(SdpaParseError::Malformed {
            line: line_no,
            reason: format!("{} block sizes, expected {}", block_sizes.len(), n_blocks),
        });
    }

    let (line_no, c_line) = significant
        .next()
        .ok_or(SdpaParseError::Truncated("objective"))?;
    let objective: Vec<f64> = c_line
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| SdpaParseError::Malformed {
            line: line_no,
            reason: format!("bad objective entry: {e}"),
        })?;
    if objective.len() != n_vars {
        return Err(SdpaParseError::Malformed {
            line: line_no,
            reason: format!("{} objective entries, expected {}", objective.len(), n_vars),
        });
    }

    let mut entries = Vec::new();
    for (line_no, l) in significant {
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 5 {
            return Err(SdpaParseError::Malformed {
                line: line_no,
                reason: format!("expected 5 fields, got {}", toks.len()),
            });
        }
        let mat_no: usize = toks[0].parse().map_err(|e| SdpaParseError::Malformed {
            line: line_no,
            reason: format!("matno: {e}"),
        })?;
        let blk: usize = toks[1].parse().map_err(|e| SdpaParseError::Malformed {
            line: line_no,
            reason: format!("blkno: {e}"),
        })?;
        let i: usize = toks[2].parse().map_err(|e| SdpaParseError::Malformed {
            line: line_no,
            reason: format!("row: {e}"),
        })?;
        let j: usize = toks[3].parse().map_err(|e| SdpaParseError::Malformed {
            line: line_no,
            reason: format!("col: {e}"),
        })?;
        let v: f64 = toks[4].parse().map_err(|e| SdpaParseError::Malformed {
            line: line_no,
            reason: format!("value: {e}"),
        })?;
        if mat_no > n_vars || blk == 0 || blk > n_blocks {
            return Err(SdpaParseError::Malformed {
                line: line_no,
                reason: "index out of range".into(),
            });
        }
        let size = block_sizes[blk - 1].unsigned_abs() as usize;
        if i == 0 || j == 0 || i > size || j > size || i > j {
            return Err(SdpaParseError::Malformed {
                line: line_no,
                reason: "entry indices must be 1-based upper-triangular".into(),
            });
        }
        entries.push((mat_no, blk, i, j, v));
    }

    Ok(SdpaProblem {
        n_vars,
        block_sizes,
        objective,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matqm::{random_hermitian, HermMat};
    use crate::povm::{apply_loss, gspec_case, Assembly, GCase, Outcome, Povm};
    use rand::SeedableRng;

    #[test]
    fn minimal_program_header() {
        // one-dimensional single-effect POVM with an empty guessable subset:
        // one block, fully pinned by consistency, zero reduced variables
        let povm = Povm::new(vec![Outcome::Click(1)], vec![HermMat::identity(1)]).unwrap();
        let a = Assembly::new(vec![povm]).unwrap();
        let g = crate::povm::GSpec::new(vec![Default::default()], &a).unwrap();
        let p = super::super::build_program(&a, &g).unwrap();
        let text = export_sdpa(&p, true);
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with('"'));
        assert_eq!(lines.next().unwrap(), "1");
        assert_eq!(lines.next().unwrap(), "1");
        assert_eq!(lines.next().unwrap(), "2");
        let parsed = parse_sdpa(&text).unwrap();
        assert_eq!(parsed.n_vars, 1);
        assert_eq!(parsed.block_sizes, vec![2]);
        assert_eq!(parsed.objective, vec![-1.0]);
    }

    #[test]
    fn round_trip_full_jm_program() {
        let a = apply_loss(
            &crate::povm::qubit_assembly(&[crate::matqm::BlochVec::Z, crate::matqm::BlochVec::X])
                .unwrap(),
            0.5,
        )
        .unwrap();
        let g = gspec_case(GCase::A, &a).unwrap();
        let p = super::super::build_program(&a, &g).unwrap();
        let text = export_sdpa(&p, true);
        let parsed = parse_sdpa(&text).unwrap();
        assert_eq!(parsed.block_sizes.len(), p.n_blocks());
        assert!(parsed.block_sizes.iter().all(|&s| s == 4));
        // reconstruct F_0 and compare against the writer's in-memory data
        let real = realify(&p);
        let (x0, z, _) = affine_parameterization(&real.a, &real.b);
        assert_eq!(parsed.n_vars, z.ncols() + 1);
        let f0 = parsed.matrix(0);
        for j in 0..p.n_blocks() {
            let herm = super::super::solver::herm_from_params(
                p.dim(),
                &x0.as_slice()[real.offsets[j]..real.offsets[j] + 4],
            );
            let expect = -real_embed(herm.as_matrix());
            let diff = (&f0[j] - &expect).amax();
            assert!(diff < 1e-12, "block {j} differs by {diff}");
        }
        // slack matrix is -I in every block
        let ft = parsed.matrix(parsed.n_vars);
        for m in &ft {
            assert!((m + DMatrix::<f64>::identity(4, 4)).amax() < 1e-15);
        }
    }

    #[test]
    fn plain_feasibility_form_drops_the_slack() {
        let a = apply_loss(
            &crate::povm::qubit_assembly(&[crate::matqm::BlochVec::Z, crate::matqm::BlochVec::X])
                .unwrap(),
            0.5,
        )
        .unwrap();
        let g = gspec_case(GCase::C, &a).unwrap();
        let p = super::super::build_program(&a, &g).unwrap();
        let with_slack = parse_sdpa(&export_sdpa(&p, true)).unwrap();
        let plain = parse_sdpa(&export_sdpa(&p, false)).unwrap();
        assert_eq!(plain.n_vars + 1, with_slack.n_vars);
        assert!(plain.objective.iter().all(|&c| c == 0.0));
        // the direction matrices agree between the two forms
        for i in 1..=plain.n_vars {
            let a_blocks = plain.matrix(i);
            let b_blocks = with_slack.matrix(i);
            for (x, y) in a_blocks.iter().zip(&b_blocks) {
                assert!((x - y).amax() == 0.0);
            }
        }
    }

    #[test]
    fn real_embedding_preserves_psd() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let h = random_hermitian(3, &mut rng);
            let embedded = real_embed(h.as_matrix());
            let herm_embedded =
                HermMat::new(embedded.map(|x| crate::matqm::C64::new(x, 0.0))).unwrap();
            let min_c = h.min_eigenvalue();
            let min_r = herm_embedded.min_eigenvalue();
            assert!(
                (min_c - min_r).abs() < 1e-9,
                "embedding changes the spectrum floor: {min_c} vs {min_r}"
            );
        }
    }

    #[test]
    fn parser_rejects_malformed() {
        assert!(parse_sdpa("").is_err());
        assert!(parse_sdpa("1\n1\n2\n-1.0\n0 1 3 1 5.0").is_err()); // lower-tri entry
        assert!(parse_sdpa("1\n1\n2\n-1.0\n0 2 1 1 5.0").is_err()); // bad block
    }
}

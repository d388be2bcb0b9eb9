//! Canonical convex QP and its text dump format.
//!
//! ```text
//! minimize    ½ xᵀ P x + qᵀ x + c
//! subject to  lower ≤ x ≤ upper
//!             A_eq x = b_eq
//!             A_in x ≤ b_in
//! ```

use std::fmt::Write as _;

use thiserror::Error;

use crate::sparse::CscMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("{what} has {got} entries, expected {expected}")]
    Dimension {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("quadratic term is not positive semidefinite ({0})")]
    NotPsd(String),
    #[error("variable {index} has lower bound {lower} above upper bound {upper}")]
    EmptyBox { index: usize, lower: f64, upper: f64 },
    #[error("non-finite value in {0}")]
    NotFinite(&'static str),
    #[error("malformed dump at line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Convex quadratic program with bounds, equalities and `≤` inequalities.
///
/// `quadratic` holds the upper triangle of the symmetric matrix `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProgram {
    pub quadratic: CscMatrix,
    pub linear: Vec<f64>,
    pub constant: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub eq_matrix: CscMatrix,
    pub eq_rhs: Vec<f64>,
    pub ineq_matrix: CscMatrix,
    pub ineq_rhs: Vec<f64>,
}

impl QuadraticProgram {
    pub fn num_vars(&self) -> usize {
        self.linear.len()
    }

    pub fn num_eq(&self) -> usize {
        self.eq_rhs.len()
    }

    pub fn num_ineq(&self) -> usize {
        self.ineq_rhs.len()
    }

    /// Checks dimensions, box consistency and a necessary PSD condition
    /// (non-negative diagonal, `|p_ij| ≤ sqrt(p_ii p_jj)`).
    pub fn validate(&self) -> Result<(), ProblemError> {
        let n = self.num_vars();
        let dim = |what, got, expected| {
            if got == expected {
                Ok(())
            } else {
                Err(ProblemError::Dimension { what, got, expected })
            }
        };
        dim("quadratic rows", self.quadratic.nrows, n)?;
        dim("quadratic cols", self.quadratic.ncols, n)?;
        dim("lower bounds", self.lower.len(), n)?;
        dim("upper bounds", self.upper.len(), n)?;
        dim("equality cols", self.eq_matrix.ncols, n)?;
        dim("equality rhs", self.eq_rhs.len(), self.eq_matrix.nrows)?;
        dim("inequality cols", self.ineq_matrix.ncols, n)?;
        dim("inequality rhs", self.ineq_rhs.len(), self.ineq_matrix.nrows)?;

        if self.linear.iter().any(|v| !v.is_finite()) || !self.constant.is_finite() {
            return Err(ProblemError::NotFinite("objective"));
        }
        if self.quadratic.values.iter().any(|v| !v.is_finite()) {
            return Err(ProblemError::NotFinite("quadratic term"));
        }
        if self.eq_rhs.iter().chain(&self.eq_matrix.values).any(|v| !v.is_finite()) {
            return Err(ProblemError::NotFinite("equality constraints"));
        }
        if self.ineq_matrix.values.iter().any(|v| !v.is_finite()) || self.ineq_rhs.iter().any(|v| v.is_nan()) {
            return Err(ProblemError::NotFinite("inequality constraints"));
        }
        for i in 0..n {
            if self.lower[i].is_nan() || self.upper[i].is_nan() || self.lower[i] > self.upper[i] {
                return Err(ProblemError::EmptyBox {
                    index: i,
                    lower: self.lower[i],
                    upper: self.upper[i],
                });
            }
        }

        let diag: Vec<f64> = (0..n).map(|i| self.quadratic.get(i, i)).collect();
        for (r, c, v) in self.quadratic.triplets() {
            if r > c {
                return Err(ProblemError::NotPsd(format!("entry ({r}, {c}) below the diagonal")));
            }
            if r == c && v < 0.0 {
                return Err(ProblemError::NotPsd(format!("negative diagonal {v} at {r}")));
            }
            if r != c && v * v > diag[r] * diag[c] * (1.0 + 1e-12) {
                return Err(ProblemError::NotPsd(format!("2x2 minor ({r}, {c}) is negative")));
            }
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let mut px = vec![0.0; x.len()];
        self.quadratic.sym_upper_mul_vec(x, &mut px);
        let quad: f64 = x.iter().zip(&px).map(|(a, b)| a * b).sum();
        let lin: f64 = x.iter().zip(&self.linear).map(|(a, b)| a * b).sum();
        0.5 * quad + lin + self.constant
    }

    /// Largest violation of any bound, equality or inequality at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..x.len() {
            worst = worst.max(self.lower[i] - x[i]).max(x[i] - self.upper[i]);
        }
        let mut ax = vec![0.0; self.num_eq()];
        self.eq_matrix.mul_vec(x, &mut ax);
        for (a, b) in ax.iter().zip(&self.eq_rhs) {
            worst = worst.max((a - b).abs());
        }
        let mut gx = vec![0.0; self.num_ineq()];
        self.ineq_matrix.mul_vec(x, &mut gx);
        for (a, b) in gx.iter().zip(&self.ineq_rhs) {
            worst = worst.max(a - b);
        }
        worst
    }

    /// Writes the problem in the triplet text format:
    ///
    /// ```text
    /// qp <n> <m_eq> <m_in>
    /// constant <c>
    /// P <row> <col> <value>        upper triangle
    /// q <index> <value>
    /// bound <index> <lower> <upper>
    /// Aeq <row> <col> <value>
    /// beq <row> <value>
    /// Ain <row> <col> <value>
    /// bin <row> <value>
    /// ```
    ///
    /// Infinite values are written as `inf` / `-inf`; all numbers use Rust's
    /// shortest round-trip representation.
    pub fn to_dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "qp {} {} {}", self.num_vars(), self.num_eq(), self.num_ineq());
        let _ = writeln!(out, "constant {:?}", self.constant);
        for (r, c, v) in self.quadratic.triplets() {
            let _ = writeln!(out, "P {r} {c} {v:?}");
        }
        for (i, v) in self.linear.iter().enumerate() {
            if *v != 0.0 {
                let _ = writeln!(out, "q {i} {v:?}");
            }
        }
        for i in 0..self.num_vars() {
            let _ = writeln!(out, "bound {i} {:?} {:?}", self.lower[i], self.upper[i]);
        }
        for (r, c, v) in self.eq_matrix.triplets() {
            let _ = writeln!(out, "Aeq {r} {c} {v:?}");
        }
        for (r, v) in self.eq_rhs.iter().enumerate() {
            let _ = writeln!(out, "beq {r} {v:?}");
        }
        for (r, c, v) in self.ineq_matrix.triplets() {
            let _ = writeln!(out, "Ain {r} {c} {v:?}");
        }
        for (r, v) in self.ineq_rhs.iter().enumerate() {
            let _ = writeln!(out, "bin {r} {v:?}");
        }
        out
    }

    /// Parses the format written by [`QuadraticProgram::to_dump`].
    pub fn from_dump(text: &str) -> Result<Self, ProblemError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let err = |line: usize, message: &str| ProblemError::Parse {
            line: line + 1,
            message: message.to_string(),
        };
        let (hline, header) = lines.next().ok_or_else(|| err(0, "empty input"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 || h[0] != "qp" {
            return Err(err(hline, "expected `qp <n> <m_eq> <m_in>`"));
        }
        let parse_usize = |s: &str, line| s.parse::<usize>().map_err(|_| err(line, "bad index"));
        let parse_f64 = |s: &str, line| s.parse::<f64>().map_err(|_| err(line, "bad number"));
        let n = parse_usize(h[1], hline)?;
        let m_eq = parse_usize(h[2], hline)?;
        let m_in = parse_usize(h[3], hline)?;

        let mut qp = QpBuilder::new(n);
        let mut p = Vec::new();
        let mut aeq = Vec::new();
        let mut ain = Vec::new();
        let mut beq = vec![0.0; m_eq];
        let mut bin = vec![0.0; m_in];
        for (line, text) in lines {
            let f: Vec<&str> = text.split_whitespace().collect();
            let need = |k: usize| {
                if f.len() == k {
                    Ok(())
                } else {
                    Err(err(line, "wrong field count"))
                }
            };
            match f[0] {
                "constant" => {
                    need(2)?;
                    qp.constant = parse_f64(f[1], line)?;
                }
                "P" | "Aeq" | "Ain" => {
                    need(4)?;
                    let t = (
                        parse_usize(f[1], line)?,
                        parse_usize(f[2], line)?,
                        parse_f64(f[3], line)?,
                    );
                    let (rows, target) = match f[0] {
                        "P" => (n, &mut p),
                        "Aeq" => (m_eq, &mut aeq),
                        _ => (m_in, &mut ain),
                    };
                    if t.0 >= rows || t.1 >= n {
                        return Err(err(line, "index out of range"));
                    }
                    target.push(t);
                }
                "q" => {
                    need(3)?;
                    let i = parse_usize(f[1], line)?;
                    if i >= n {
                        return Err(err(line, "index out of range"));
                    }
                    qp.linear[i] = parse_f64(f[2], line)?;
                }
                "bound" => {
                    need(4)?;
                    let i = parse_usize(f[1], line)?;
                    if i >= n {
                        return Err(err(line, "index out of range"));
                    }
                    qp.lower[i] = parse_f64(f[2], line)?;
                    qp.upper[i] = parse_f64(f[3], line)?;
                }
                "beq" | "bin" => {
                    need(3)?;
                    let r = parse_usize(f[1], line)?;
                    let target = if f[0] == "beq" { &mut beq } else { &mut bin };
                    if r >= target.len() {
                        return Err(err(line, "index out of range"));
                    }
                    target[r] = parse_f64(f[2], line)?;
                }
                _ => return Err(err(line, "unknown record")),
            }
        }
        Ok(QuadraticProgram {
            quadratic: CscMatrix::from_triplets(n, n, &p),
            linear: qp.linear,
            constant: qp.constant,
            lower: qp.lower,
            upper: qp.upper,
            eq_matrix: CscMatrix::from_triplets(m_eq, n, &aeq),
            eq_rhs: beq,
            ineq_matrix: CscMatrix::from_triplets(m_in, n, &ain),
            ineq_rhs: bin,
        })
    }
}

/// Incremental construction of a [`QuadraticProgram`].
#[derive(Debug, Clone)]
pub struct QpBuilder {
    n: usize,
    quad: Vec<(usize, usize, f64)>,
    pub linear: Vec<f64>,
    pub constant: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    eq: Vec<(usize, usize, f64)>,
    eq_rhs: Vec<f64>,
    ineq: Vec<(usize, usize, f64)>,
    ineq_rhs: Vec<f64>,
}

impl QpBuilder {
    /// `n` free variables with zero objective.
    pub fn new(n: usize) -> Self {
        Self {
            n,
            quad: Vec::new(),
            linear: vec![0.0; n],
            constant: 0.0,
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
            eq: Vec::new(),
            eq_rhs: Vec::new(),
            ineq: Vec::new(),
            ineq_rhs: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    /// Adds `value` to `P[i][j]` and `P[j][i]` (once on the diagonal), i.e. the
    /// objective gains `½ value xᵢ²` for `i == j` and `value xᵢ xⱼ` otherwise.
    pub fn add_quadratic(&mut self, i: usize, j: usize, value: f64) {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        self.quad.push((r, c, value));
    }

    pub fn add_linear(&mut self, i: usize, value: f64) {
        self.linear[i] += value;
    }

    pub fn set_bounds(&mut self, i: usize, lower: f64, upper: f64) {
        self.lower[i] = lower;
        self.upper[i] = upper;
    }

    /// Adds `Σ coeffs·x = rhs` and returns its row index.
    pub fn add_eq(&mut self, coeffs: &[(usize, f64)], rhs: f64) -> usize {
        let row = self.eq_rhs.len();
        self.eq.extend(coeffs.iter().map(|&(c, v)| (row, c, v)));
        self.eq_rhs.push(rhs);
        row
    }

    /// Adds `Σ coeffs·x ≤ rhs` and returns its row index.
    pub fn add_le(&mut self, coeffs: &[(usize, f64)], rhs: f64) -> usize {
        let row = self.ineq_rhs.len();
        self.ineq.extend(coeffs.iter().map(|&(c, v)| (row, c, v)));
        self.ineq_rhs.push(rhs);
        row
    }

    pub fn build(self) -> QuadraticProgram {
        QuadraticProgram {
            quadratic: CscMatrix::from_triplets(self.n, self.n, &self.quad),
            linear: self.linear,
            constant: self.constant,
            lower: self.lower,
            upper: self.upper,
            eq_matrix: CscMatrix::from_triplets(self.eq_rhs.len(), self.n, &self.eq),
            eq_rhs: self.eq_rhs,
            ineq_matrix: CscMatrix::from_triplets(self.ineq_rhs.len(), self.n, &self.ineq),
            ineq_rhs: self.ineq_rhs,
        }
    }
}

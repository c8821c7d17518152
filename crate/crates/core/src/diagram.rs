//! Materialized Bratteli diagrams, heights, stochastic matrices, telescoping.

use std::sync::{Arc, OnceLock};

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::linalg::{IntMatrix, Rat, RatMatrix};
use crate::spec::{DiagramSpec, Generator};
use crate::toeplitz::toeplitz_bratteli;

pub const DEFAULT_MAX_DIGITS: usize = 100_000;

#[derive(Clone, Debug)]
pub struct BratteliDiagram {
    /// F̃_0 .. F̃_{N-1}; F̃_n has rows V_{n+1} and columns V_n.
    matrices: Vec<IntMatrix>,
    /// h^(1) .. h^(N).
    heights: Vec<Vec<BigUint>>,
    stochastic: Vec<Arc<OnceLock<RatMatrix>>>,
    spec: Option<Arc<DiagramSpec>>,
    warnings: Vec<String>,
    max_digits: usize,
}

impl BratteliDiagram {
    /// Builds from F̃_0..F̃_{N-1}, validating shape and support.
    pub fn from_matrices(matrices: Vec<IntMatrix>) -> Result<Self> {
        BratteliDiagram::build(matrices, None, DEFAULT_MAX_DIGITS)
    }

    pub fn from_matrices_capped(matrices: Vec<IntMatrix>, max_digits: usize) -> Result<Self> {
        BratteliDiagram::build(matrices, None, max_digits)
    }

    pub fn materialize(spec: &DiagramSpec, depth: usize) -> Result<Self> {
        BratteliDiagram::materialize_capped(spec, depth, DEFAULT_MAX_DIGITS)
    }

    pub fn materialize_capped(spec: &DiagramSpec, depth: usize, max_digits: usize) -> Result<Self> {
        if depth < 1 {
            return Err(Error::range("depth must be >= 1"));
        }
        spec.check_shapes()?;
        let matrices = generate(spec, depth)?;
        BratteliDiagram::build(matrices, Some(Arc::new(spec.clone())), max_digits)
    }

    fn build(matrices: Vec<IntMatrix>, spec: Option<Arc<DiagramSpec>>, max_digits: usize) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::range("a diagram needs at least F̃_0"));
        }
        if matrices[0].cols() != 1 {
            return Err(Error::Dimension("F̃_0 must have a single column (|V_0| = 1)".into()));
        }
        for (n, w) in matrices.windows(2).enumerate() {
            if w[1].cols() != w[0].rows() {
                return Err(Error::Dimension(format!(
                    "F̃_{} has {} columns but |V_{}| = {}",
                    n + 1,
                    w[1].cols(),
                    n + 1,
                    w[0].rows()
                )));
            }
        }
        for (n, m) in matrices.iter().enumerate() {
            if let Some(r) = (0..m.rows()).find(|&r| m.row(r).iter().all(Zero::is_zero)) {
                return Err(Error::InvalidDiagram {
                    level: n + 1,
                    index: r,
                    message: format!("vertex has no incoming edge (zero row of F̃_{n})"),
                });
            }
            if let Some(c) = (0..m.cols()).find(|&c| m.col_sum(c).is_zero()) {
                return Err(Error::InvalidDiagram {
                    level: n,
                    index: c,
                    message: format!("vertex has no outgoing edge (zero column of F̃_{n})"),
                });
            }
        }
        let max_bits = (max_digits as f64 / std::f64::consts::LOG10_2).ceil() as u64;
        let mut heights = Vec::with_capacity(matrices.len());
        let mut h = vec![BigUint::one()];
        for (n, m) in matrices.iter().enumerate() {
            h = m.mul_vec(&h);
            if let Some(big) = h.iter().find(|x| x.bits() > max_bits) {
                return Err(Error::Resource(format!(
                    "height at level {} has about {} digits, over the cap of {max_digits} (BRATTELI_MAX_DIGITS)",
                    n + 1,
                    (big.bits() as f64 * std::f64::consts::LOG10_2) as u64
                )));
            }
            heights.push(h.clone());
        }
        let stochastic = (0..matrices.len()).map(|_| Arc::new(OnceLock::new())).collect();
        let mut d = BratteliDiagram {
            matrices,
            heights,
            stochastic,
            spec,
            warnings: Vec::new(),
            max_digits,
        };
        d.warnings = d.rigid_path_warnings();
        Ok(d)
    }

    /// Number of materialized edge levels N (levels V_0..V_N).
    pub fn depth(&self) -> usize {
        self.matrices.len()
    }

    pub fn level_size(&self, n: usize) -> usize {
        if n == 0 {
            1
        } else {
            self.matrices[n - 1].rows()
        }
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        (0..=self.depth()).map(|n| self.level_size(n)).collect()
    }

    pub fn incidence(&self, n: usize) -> Result<&IntMatrix> {
        self.matrices
            .get(n)
            .ok_or_else(|| Error::range(format!("F̃_{n} not materialized (depth {})", self.depth())))
    }

    pub fn matrices(&self) -> &[IntMatrix] {
        &self.matrices
    }

    pub fn spec(&self) -> Option<&DiagramSpec> {
        self.spec.as_deref()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn max_digits(&self) -> usize {
        self.max_digits
    }

    /// h^(n) for 1 <= n <= depth.
    pub fn heights(&self, n: usize) -> Result<&[BigUint]> {
        if n == 0 || n > self.depth() {
            return Err(Error::range(format!("heights need 1 <= n <= {}, got {n}", self.depth())));
        }
        Ok(&self.heights[n - 1])
    }

    /// F_n for 1 <= n <= depth-1: f_vw = f̃_vw h_w^(n) / h_v^(n+1).
    pub fn stochastic_matrix(&self, n: usize) -> Result<&RatMatrix> {
        if n == 0 || n + 1 > self.depth() {
            return Err(Error::range(format!(
                "stochastic matrix needs 1 <= n <= {}, got {n}",
                self.depth().saturating_sub(1)
            )));
        }
        Ok(self.stochastic[n].get_or_init(|| {
            let m = &self.matrices[n];
            let h = &self.heights[n - 1];
            let hn = &self.heights[n];
            let mut out = RatMatrix::zeros(m.rows(), m.cols());
            for v in 0..m.rows() {
                let den = BigInt::from(hn[v].clone());
                for w in 0..m.cols() {
                    let f = m.get(v, w);
                    if !f.is_zero() {
                        out.set(v, w, Rat::new(BigInt::from(f * &h[w]), den.clone()));
                    }
                }
            }
            out
        }))
    }

    /// Float stochastic matrix from height ratios normalized per level.
    pub fn stochastic_matrix_f64(&self, n: usize) -> Result<Vec<Vec<f64>>> {
        if n == 0 || n + 1 > self.depth() {
            return Err(Error::range(format!("stochastic matrix needs 1 <= n <= {}", self.depth() - 1)));
        }
        let h = scaled_f64(&self.heights[n - 1]);
        let m = self.matrices[n].to_f64();
        Ok(m.iter()
            .map(|row| {
                let w: Vec<f64> = row.iter().zip(&h).map(|(a, b)| a * b).collect();
                let s: f64 = w.iter().sum();
                w.iter().map(|x| x / s).collect()
            })
            .collect())
    }

    /// Telescoping to levels 0 = n_0 < n_1 < ... <= depth.
    pub fn telescope(&self, levels: &[usize]) -> Result<BratteliDiagram> {
        if levels.first() != Some(&0) {
            return Err(Error::input("telescoping levels must start at 0"));
        }
        if levels.len() < 2 {
            return Err(Error::input("telescoping needs at least two levels"));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::input("telescoping levels must be strictly increasing"));
        }
        if *levels.last().unwrap() > self.depth() {
            return Err(Error::range(format!(
                "telescoping level {} beyond depth {}",
                levels.last().unwrap(),
                self.depth()
            )));
        }
        let ms = levels
            .windows(2)
            .map(|w| self.integer_product(w[0], w[1] - 1))
            .collect::<Result<Vec<_>>>()?;
        BratteliDiagram::build(ms, None, self.max_digits)
    }

    /// F̃_to ⋯ F̃_from (from <= to < depth).
    pub fn integer_product(&self, from: usize, to: usize) -> Result<IntMatrix> {
        if from > to || to >= self.depth() {
            return Err(Error::range(format!("integer product F̃_{to}..F̃_{from} out of range")));
        }
        let mut p = self.matrices[from].clone();
        for k in from + 1..=to {
            p = self.matrices[k].mul(&p);
        }
        Ok(p)
    }

    pub fn ers_check(&self) -> ErsReport {
        let levels: Vec<ErsLevel> = self
            .matrices
            .iter()
            .enumerate()
            .map(|(n, m)| {
                let sums: Vec<BigUint> = (0..m.rows()).map(|r| m.row_sum(r)).collect();
                let equal = sums.windows(2).all(|w| w[0] == w[1]);
                ErsLevel {
                    level: n,
                    row_sums: sums,
                    equal,
                }
            })
            .collect();
        let ers = levels.iter().all(|l| l.equal);
        let mut identities = None;
        if ers {
            let mut ok = true;
            let mut prod = BigUint::one();
            for n in 1..=self.depth() {
                prod *= &levels[n - 1].row_sums[0];
                ok &= self.heights[n - 1].iter().all(|h| *h == prod);
            }
            for n in 1..self.depth() {
                let r = BigInt::from(levels[n].row_sums[0].clone());
                let f = self.stochastic_matrix(n).expect("in range");
                let m = &self.matrices[n];
                for v in 0..m.rows() {
                    for w in 0..m.cols() {
                        ok &= *f.get(v, w) == Rat::new(BigInt::from(m.get(v, w).clone()), r.clone());
                    }
                }
            }
            identities = Some(ok);
        }
        ErsReport {
            ers,
            levels,
            identities_verified: identities,
        }
    }

    /// Vertices with one incoming and one outgoing edge that chain across
    /// at least two consecutive levels.
    fn rigid_path_warnings(&self) -> Vec<String> {
        let n_levels = self.depth();
        let thin = |n: usize, v: usize| -> bool {
            n >= 1
                && n < n_levels
                && self.matrices[n - 1].row_sum(v).is_one()
                && self.matrices[n].col_sum(v).is_one()
        };
        let mut out = Vec::new();
        for n in 1..n_levels.saturating_sub(1) {
            for v in 0..self.level_size(n) {
                if !thin(n, v) {
                    continue;
                }
                let m = &self.matrices[n];
                if let Some(u) = (0..m.rows()).find(|&u| !m.get(u, v).is_zero()) {
                    if thin(n + 1, u) {
                        out.push(format!(
                            "rigid path: vertex {v} at level {n} and vertex {u} at level {} each have a single incoming and outgoing edge",
                            n + 1
                        ));
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErsLevel {
    pub level: usize,
    pub row_sums: Vec<BigUint>,
    pub equal: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErsReport {
    pub ers: bool,
    pub levels: Vec<ErsLevel>,
    /// For ERS diagrams: h^(n) = r_0⋯r_{n-1} and f = f̃/r_n checked exactly.
    pub identities_verified: Option<bool>,
}

impl ErsReport {
    pub fn row_sum(&self, n: usize) -> Option<&BigUint> {
        let l = self.levels.get(n)?;
        l.equal.then(|| &l.row_sums[0])
    }
}

fn scaled_f64(h: &[BigUint]) -> Vec<f64> {
    let bits = h.iter().map(|x| x.bits()).max().unwrap_or(0);
    let shift = bits.saturating_sub(1000) as usize;
    h.iter()
        .map(|x| (x >> shift).to_f64().unwrap_or(f64::MAX))
        .collect()
}

fn ones(k: usize) -> Vec<BigUint> {
    vec![BigUint::one(); k]
}

fn generate(spec: &DiagramSpec, depth: usize) -> Result<Vec<IntMatrix>> {
    let root = |k: usize| -> IntMatrix { IntMatrix::column(spec.root_edges.clone().unwrap_or_else(|| ones(k))) };
    Ok(match &spec.generator {
        Generator::Explicit(ms) => {
            if depth > ms.len() + 1 {
                return Err(Error::range(format!(
                    "explicit spec lists {} matrices; depth {depth} needs {}",
                    ms.len(),
                    depth - 1
                )));
            }
            let mut out = vec![root(ms[0].cols())];
            out.extend(ms[..depth - 1].iter().cloned());
            out
        }
        Generator::Stationary(m) => {
            let mut out = vec![root(m.rows())];
            out.extend(std::iter::repeat_n(m.clone(), depth - 1));
            out
        }
        Generator::Expression(e) => {
            let k = e.len();
            let mut out = vec![root(k)];
            for n in 1..depth {
                let rows = e
                    .iter()
                    .map(|r| r.iter().map(|x| x.eval(n as u64)).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?;
                out.push(IntMatrix::from_rows(rows));
            }
            out
        }
        Generator::Pascal => {
            let mut out = vec![IntMatrix::column(ones(2))];
            for n in 1..depth {
                out.push(pascal_matrix(n));
            }
            out
        }
        Generator::Countable { a } => {
            let a0 = a.eval(0)?;
            let mut out = vec![IntMatrix::column(vec![a0.clone(), a0])];
            for n in 1..depth {
                out.push(countable_matrix(n, &a.eval(n as u64)?));
            }
            out
        }
        Generator::ErsToeplitz(seed) => toeplitz_bratteli(seed, depth)?.matrices,
    })
}

/// (n+2)×(n+1) with ones at (k, k) and (k, k-1).
pub fn pascal_matrix(n: usize) -> IntMatrix {
    let mut m = IntMatrix::zeros(n + 2, n + 1);
    for k in 0..n + 2 {
        if k <= n {
            m.set(k, k, BigUint::one());
        }
        if k >= 1 {
            m.set(k, k - 1, BigUint::one());
        }
    }
    m
}

/// (n+2)×(n+1): a_n on the diagonal and at (n+1, n), ones elsewhere.
pub fn countable_matrix(n: usize, a: &BigUint) -> IntMatrix {
    let mut m = IntMatrix::new(n + 2, n + 1, vec![BigUint::one(); (n + 2) * (n + 1)]);
    for v in 0..=n {
        m.set(v, v, a.clone());
    }
    m.set(n + 1, n, a.clone());
    m
}

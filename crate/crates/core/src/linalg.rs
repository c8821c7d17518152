//! Dense exact matrices over unbounded integers and rationals.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Rat = BigRational;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigUint>,
}

impl IntMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<BigUint>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        IntMatrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix::new(rows, cols, vec![BigUint::zero(); rows * cols])
    }

    pub fn identity(k: usize) -> Self {
        let mut m = IntMatrix::zeros(k, k);
        for i in 0..k {
            m.set(i, i, BigUint::one());
        }
        m
    }

    /// Panics on ragged input; callers validate shape first.
    pub fn from_rows(rows: Vec<Vec<BigUint>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged matrix");
            data.extend(row);
        }
        IntMatrix::new(r, c, data)
    }

    pub fn from_u64(rows: &[Vec<u64>]) -> Self {
        IntMatrix::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| BigUint::from(x)).collect())
                .collect(),
        )
    }

    pub fn column(v: Vec<BigUint>) -> Self {
        let r = v.len();
        IntMatrix::new(r, 1, v)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &BigUint {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, x: BigUint) {
        self.data[r * self.cols + c] = x;
    }

    pub fn row(&self, r: usize) -> &[BigUint] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_sum(&self, r: usize) -> BigUint {
        self.row(r).iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> BigUint {
        (0..self.rows).map(|r| self.get(r, c)).sum()
    }

    pub fn to_rows(&self) -> Vec<Vec<BigUint>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// `self * other`.
    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.rows, "product shape");
        let mut out = IntMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if !b.is_zero() {
                        out.data[i * other.cols + j] += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[BigUint]) -> Vec<BigUint> {
        assert_eq!(self.cols, v.len(), "vector shape");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .filter(|(a, _)| !a.is_zero())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn transpose(&self) -> IntMatrix {
        let mut t = IntMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> IntMatrix {
        let data = rows
            .iter()
            .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
            .map(|(r, c)| self.get(r, c).clone())
            .collect();
        IntMatrix::new(rows.len(), cols.len(), data)
    }

    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(big_to_f64).collect())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rat>,
}

impl RatMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Rat>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        RatMatrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        RatMatrix::new(rows, cols, vec![Rat::zero(); rows * cols])
    }

    pub fn identity(k: usize) -> Self {
        let mut m = RatMatrix::zeros(k, k);
        for i in 0..k {
            m.set(i, i, Rat::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Rat>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged matrix");
            data.extend(row);
        }
        RatMatrix::new(r, c, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &Rat {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, x: Rat) {
        self.data[r * self.cols + c] = x;
    }

    pub fn row(&self, r: usize) -> &[Rat] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<Rat>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn mul(&self, other: &RatMatrix) -> RatMatrix {
        assert_eq!(self.cols, other.rows, "product shape");
        let mut out = RatMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if !b.is_zero() {
                        out.data[i * other.cols + j] += a * b;
                    }
                }
            }
        }
        out
    }

    /// `self^T v`.
    pub fn transpose_mul_vec(&self, v: &[Rat]) -> Vec<Rat> {
        assert_eq!(self.rows, v.len(), "vector shape");
        let mut out = vec![Rat::zero(); self.cols];
        for (i, vi) in v.iter().enumerate() {
            if vi.is_zero() {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate() {
                let a = self.get(i, j);
                if !a.is_zero() {
                    *o += a * vi;
                }
            }
        }
        out
    }

    pub fn is_row_stochastic(&self) -> bool {
        (0..self.rows).all(|r| {
            self.row(r).iter().all(|x| !x.is_negative() && *x <= Rat::one())
                && self.row(r).iter().sum::<Rat>() == Rat::one()
        })
    }

    /// Largest pairwise d* distance between rows.
    pub fn row_gap(&self) -> Rat {
        let mut best = Rat::zero();
        for a in 0..self.rows {
            for b in a + 1..self.rows {
                let d = dstar(self.row(a), self.row(b));
                if d > best {
                    best = d;
                }
            }
        }
        best
    }

    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(rat_to_f64).collect())
            .collect()
    }
}

/// d*(x, y) = Σ |x_i - y_i|.
pub fn dstar(x: &[Rat], y: &[Rat]) -> Rat {
    assert_eq!(x.len(), y.len(), "d* on vectors of different length");
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum()
}

pub fn dstar_f64(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum()
}

pub fn is_probability_vector(x: &[Rat]) -> bool {
    x.iter().all(|v| !v.is_negative()) && x.iter().sum::<Rat>() == Rat::one()
}

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: &BigUint) -> Rat {
    Rat::from_integer(BigInt::from(n.clone()))
}

pub fn big_to_f64(x: &BigUint) -> f64 {
    num_traits::ToPrimitive::to_f64(x).unwrap_or(f64::INFINITY)
}

/// Nearest f64, robust to numerators and denominators beyond the f64 range.
pub fn rat_to_f64(x: &Rat) -> f64 {
    let n = x.numer();
    let d = x.denom();
    let nb = n.bits() as i64;
    let db = d.bits() as i64;
    let shift = nb.max(db) - 900;
    if shift <= 0 {
        let nf = num_traits::ToPrimitive::to_f64(n).unwrap_or(0.0);
        let df = num_traits::ToPrimitive::to_f64(d).unwrap_or(1.0);
        return nf / df;
    }
    let s = shift as usize;
    let nf = num_traits::ToPrimitive::to_f64(&(n >> s)).unwrap_or(0.0);
    let df = num_traits::ToPrimitive::to_f64(&(d >> s)).unwrap_or(0.0);
    if df == 0.0 {
        if nf == 0.0 {
            return 0.0;
        }
        return if n.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY };
    }
    nf / df
}

/// Parses "3", "-2/5", "0.25" into an exact rational.
pub fn parse_rat(s: &str) -> Option<Rat> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let n: BigInt = a.trim().parse().ok()?;
        let d: BigInt = b.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rat::new(n, d));
    }
    if let Some((a, b)) = s.split_once('.') {
        let neg = a.starts_with('-');
        let ip: BigInt = if a.is_empty() || a == "-" {
            BigInt::zero()
        } else {
            a.parse().ok()?
        };
        if b.is_empty() || !b.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let fp: BigInt = b.parse().ok()?;
        let scale = num_traits::pow(BigInt::from(10), b.len());
        let mut frac = Rat::new(fp, scale);
        if neg {
            frac = -frac;
        }
        return Some(Rat::from_integer(ip) + frac);
    }
    let n: BigInt = s.parse().ok()?;
    Some(Rat::from_integer(n))
}

/// Exact determinant of a square rational matrix by Gaussian elimination.
pub fn det_rat(m: &RatMatrix) -> Rat {
    assert_eq!(m.rows(), m.cols(), "determinant of non-square matrix");
    let k = m.rows();
    let mut a = m.to_rows();
    let mut det = Rat::one();
    for c in 0..k {
        let Some(p) = (c..k).find(|&r| !a[r][c].is_zero()) else {
            return Rat::zero();
        };
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        let piv = a[c][c].clone();
        det *= &piv;
        for r in c + 1..k {
            if a[r][c].is_zero() {
                continue;
            }
            let f = &a[r][c] / &piv;
            for j in c..k {
                let t = &f * &a[c][j];
                a[r][j] -= t;
            }
        }
    }
    det
}

/// Basis of the left null space {x : x M = 0} over the rationals.
pub fn left_null_space(m: &RatMatrix) -> Vec<Vec<Rat>> {
    // x M = 0  <=>  M^T x^T = 0
    let rows = m.cols();
    let cols = m.rows();
    let mut a: Vec<Vec<Rat>> = (0..rows)
        .map(|i| (0..cols).map(|j| m.get(j, i).clone()).collect())
        .collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(p, r);
        let piv = a[r][c].clone();
        for j in 0..cols {
            let t = &a[r][j] / &piv;
            a[r][j] = t;
        }
        for i in 0..rows {
            if i != r && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                for j in 0..cols {
                    let t = &f * &a[r][j];
                    a[i][j] -= t;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows {
            break;
        }
    }
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut x = vec![Rat::zero(); cols];
            x[f] = Rat::one();
            for (i, &pc) in pivots.iter().enumerate() {
                x[pc] = -a[i][f].clone();
            }
            x
        })
        .collect()
}

/// Rank of a set of rational vectors.
pub fn rank(vectors: &[Vec<Rat>]) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let cols = vectors[0].len();
    let mut a = vectors.to_vec();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..a.len()).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(p, r);
        let piv = a[r][c].clone();
        for i in r + 1..a.len() {
            if a[i][c].is_zero() {
                continue;
            }
            let f = &a[i][c] / &piv;
            for j in c..cols {
                let t = &f * &a[r][j];
                a[i][j] -= t;
            }
        }
        r += 1;
        if r == a.len() {
            break;
        }
    }
    r
}

/// Squared l-dimensional volume of the simplex spanned by `points`
/// (l = points.len() - 1), via the Gram determinant of edge vectors.
pub fn simplex_volume_sq(points: &[Vec<Rat>]) -> Rat {
    if points.len() < 2 {
        return Rat::zero();
    }
    let base = &points[0];
    let edges: Vec<Vec<Rat>> = points[1..]
        .iter()
        .map(|p| p.iter().zip(base).map(|(a, b)| a - b).collect())
        .collect();
    let l = edges.len();
    let mut gram = RatMatrix::zeros(l, l);
    for i in 0..l {
        for j in 0..l {
            let dot: Rat = edges[i].iter().zip(&edges[j]).map(|(a, b)| a * b).sum();
            gram.set(i, j, dot);
        }
    }
    let mut fact = BigInt::one();
    for k in 2..=l {
        fact *= k;
    }
    det_rat(&gram) / Rat::from_integer(&fact * &fact)
}

//! Product matrices, the nested polytopes Δ_m^(n), clustering of their
//! spanning vectors, and measure traces.

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::diagram::BratteliDiagram;
use crate::error::{Error, Result};
use crate::linalg::{dstar, is_probability_vector, rank, Rat, RatMatrix};

/// G_(n+m,n) = F_{n+m} ⋯ F_n; rows V_{n+m+1}, columns V_n.
pub fn product_matrix(d: &BratteliDiagram, n: usize, m: usize) -> Result<RatMatrix> {
    if n == 0 || n + m + 1 > d.depth() {
        return Err(Error::range(format!(
            "product G_({},{n}) needs 1 <= n and n+m+1 <= {}",
            n + m,
            d.depth()
        )));
    }
    let p = d.integer_product(n, n + m)?;
    let h = d.heights(n)?;
    let top = d.heights(n + m + 1)?;
    let mut g = RatMatrix::zeros(p.rows(), p.cols());
    for u in 0..p.rows() {
        let den = BigInt::from(top[u].clone());
        for w in 0..p.cols() {
            let x = p.get(u, w);
            if !x.is_zero() {
                g.set(u, w, Rat::new(BigInt::from(x * &h[w]), den.clone()));
            }
        }
    }
    Ok(g)
}

/// Float version built from normalized stochastic matrices.
pub fn product_matrix_f64(d: &BratteliDiagram, n: usize, m: usize) -> Result<Vec<Vec<f64>>> {
    if n == 0 || n + m + 1 > d.depth() {
        return Err(Error::range(format!("product G_({},{n}) out of range", n + m)));
    }
    let mut g = d.stochastic_matrix_f64(n)?;
    for k in n + 1..=n + m {
        let f = d.stochastic_matrix_f64(k)?;
        g = f
            .iter()
            .map(|row| {
                (0..g[0].len())
                    .map(|j| row.iter().zip(&g).map(|(a, gr)| a * gr[j]).sum())
                    .collect()
            })
            .collect();
    }
    Ok(g)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Polytope {
    pub n: usize,
    pub m: usize,
    pub vertices: Vec<Vec<Rat>>,
    /// Generating vertex of each spanning vector (level n+m), or the
    /// coordinate index for m = 0.
    pub tags: Vec<usize>,
}

/// Δ_m^(n): rows of G_(n+m-1,n); m = 0 gives the standard simplex.
pub fn polytope(d: &BratteliDiagram, n: usize, m: usize) -> Result<Polytope> {
    if n == 0 || n > d.depth() {
        return Err(Error::range(format!("polytope level n = {n} out of range")));
    }
    let vertices = if m == 0 {
        RatMatrix::identity(d.level_size(n)).to_rows()
    } else {
        product_matrix(d, n, m - 1)?.to_rows()
    };
    let tags = (0..vertices.len()).collect();
    Ok(Polytope { n, m, vertices, tags })
}

pub fn diameter_dstar(p: &Polytope) -> Rat {
    max_pairwise(&p.vertices)
}

pub fn max_pairwise(points: &[Vec<Rat>]) -> Rat {
    let mut best = Rat::zero();
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let x = dstar(a, b);
            if x > best {
                best = x;
            }
        }
    }
    best
}

/// ḡ^(n+m+1,n)(v) = Σ_u f_vu^(n+m+1) ḡ^(n+m,n)(u), checked exactly.
pub fn check_nesting(d: &BratteliDiagram, n: usize, m: usize) -> Result<bool> {
    let g = product_matrix(d, n, m)?;
    let g1 = product_matrix(d, n, m + 1)?;
    let f = d.stochastic_matrix(n + m + 1)?;
    Ok(f.mul(&g) == g1)
}

pub fn polytope_csv(p: &Polytope) -> String {
    let mut s = String::from("level,step,vertex,coord_index,numerator,denominator\n");
    for (tag, v) in p.tags.iter().zip(&p.vertices) {
        for (i, x) in v.iter().enumerate() {
            let _ = writeln!(s, "{},{},{},{},{},{}", p.n, p.m, tag, i, x.numer(), x.denom());
        }
    }
    s
}

pub fn diameter_csv(series: &[(usize, Rat)]) -> String {
    let mut s = String::from("step,diameter_num,diameter_den\n");
    for (m, x) in series {
        let _ = writeln!(s, "{m},{},{}", x.numer(), x.denom());
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    pub members: Vec<usize>,
    pub centroid: Vec<Rat>,
    pub diameter: Rat,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterReport {
    pub n: usize,
    pub m: usize,
    pub clusters: Vec<Cluster>,
    /// Minimum d* between points of different clusters (2 for a single cluster).
    pub gap: Rat,
    pub max_diameter: Rat,
    pub separated: bool,
    /// Single-linkage merge distances, ascending.
    pub merges: Vec<Rat>,
}

impl ClusterReport {
    pub fn count(&self) -> usize {
        self.clusters.len()
    }

    /// Affine dimension of the centroids (an estimate of dim Δ_∞^(n)).
    pub fn centroid_dimension(&self) -> usize {
        let Some(first) = self.clusters.first() else { return 0 };
        let diffs: Vec<Vec<Rat>> = self.clusters[1..]
            .iter()
            .map(|c| c.centroid.iter().zip(&first.centroid).map(|(a, b)| a - b).collect())
            .collect();
        rank(&diffs)
    }
}

/// Single-linkage clustering under d*, cut below the largest index whose
/// merge-distance ratio w_i / w_{i-1} exceeds `gap_ratio` (w_0 = 0 and a
/// virtual final merge at 2, the d* diameter of the simplex).
pub fn cluster_points(points: &[Vec<Rat>], gap_ratio: &Rat) -> (Vec<Cluster>, Rat, Vec<Rat>) {
    let k = points.len();
    let mut edges = Vec::with_capacity(k * k.saturating_sub(1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            edges.push((dstar(&points[i], &points[j]), i, j));
        }
    }
    edges.sort();
    let mut uf = UnionFind::new(k);
    let mut tree = Vec::new();
    for (w, i, j) in edges {
        if uf.union(i, j) {
            tree.push((w, i, j));
        }
    }
    let mut w: Vec<Rat> = Vec::with_capacity(k + 1);
    w.push(Rat::zero());
    w.extend(tree.iter().map(|t| t.0.clone()));
    w.push(Rat::from_integer(2.into()));
    let mut cut = None;
    for i in (1..w.len()).rev() {
        let jump = if w[i - 1].is_zero() {
            !w[i].is_zero()
        } else {
            &w[i] / &w[i - 1] > *gap_ratio
        };
        if jump {
            cut = Some(i);
            break;
        }
    }
    // merges kept: the first cut-1 tree edges (or all when no jump exists)
    let kept = cut.map_or(tree.len(), |i| i - 1);
    let mut uf = UnionFind::new(k);
    for (_, i, j) in &tree[..kept] {
        uf.union(*i, *j);
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_of = std::collections::BTreeMap::new();
    for i in 0..k {
        let r = uf.find(i);
        let g = *root_of.entry(r).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    let clusters: Vec<Cluster> = groups
        .into_iter()
        .map(|members| {
            let pts: Vec<Vec<Rat>> = members.iter().map(|&i| points[i].clone()).collect();
            Cluster {
                centroid: centroid(&pts),
                diameter: max_pairwise(&pts),
                members,
            }
        })
        .collect();
    let gap = if clusters.len() < 2 {
        Rat::from_integer(2.into())
    } else {
        tree[kept].0.clone()
    };
    (clusters, gap, w[1..w.len() - 1].to_vec())
}

pub fn centroid(points: &[Vec<Rat>]) -> Vec<Rat> {
    let k = Rat::from_integer(BigInt::from(points.len()));
    let dim = points.first().map_or(0, |p| p.len());
    (0..dim)
        .map(|j| points.iter().map(|p| &p[j]).sum::<Rat>() / &k)
        .collect()
}

fn report(n: usize, m: usize, points: &[Vec<Rat>], gap_ratio: &Rat) -> ClusterReport {
    let (clusters, gap, merges) = cluster_points(points, gap_ratio);
    let max_diameter = clusters.iter().map(|c| c.diameter.clone()).max().unwrap_or_else(Rat::zero);
    let separated = gap > gap_ratio * &max_diameter;
    ClusterReport {
        n,
        m,
        clusters,
        gap,
        max_diameter,
        separated,
        merges,
    }
}

/// Clusters the rows ḡ^(n+m,n)(v), v ∈ V_{n+m+1}.
pub fn cluster_extremes(d: &BratteliDiagram, n: usize, m: usize, gap_ratio: &Rat) -> Result<ClusterReport> {
    if m == 0 {
        return Err(Error::range("cluster_extremes needs m >= 1"));
    }
    if *gap_ratio <= Rat::one() {
        return Err(Error::range("gap_ratio must exceed 1"));
    }
    let g = product_matrix(d, n, m)?;
    Ok(report(n, m, &g.to_rows(), gap_ratio))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeasureTrace {
    /// q^(1), q^(2), ...
    pub levels: Vec<Vec<Rat>>,
}

impl MeasureTrace {
    pub fn new(levels: Vec<Vec<Rat>>) -> Self {
        MeasureTrace { levels }
    }

    /// q^(n) for n >= 1.
    pub fn at(&self, n: usize) -> Option<&[Rat]> {
        n.checked_sub(1).and_then(|i| self.levels.get(i)).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Keeps only the given levels (each >= 1), in order.
    pub fn restrict(&self, levels: &[usize]) -> MeasureTrace {
        MeasureTrace::new(levels.iter().filter_map(|&n| self.at(n).map(<[Rat]>::to_vec)).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceVerdict {
    pub consistent: bool,
    pub probability_vectors: bool,
    /// First n with F_n^T q^(n+1) ≠ q^(n), and the d* residual there.
    pub first_failure: Option<(usize, Rat)>,
    pub max_residual: Rat,
    /// d* residual per n = 1..N-1.
    pub residuals: Vec<Rat>,
}

impl TraceVerdict {
    pub fn ok(&self) -> bool {
        self.consistent && self.probability_vectors
    }
}

pub fn verify_trace(d: &BratteliDiagram, trace: &MeasureTrace) -> Result<TraceVerdict> {
    let big_n = trace.len();
    if big_n == 0 {
        return Err(Error::Dimension("empty trace".into()));
    }
    if big_n > d.depth() {
        return Err(Error::range(format!("trace has {big_n} levels, diagram depth {}", d.depth())));
    }
    for (i, q) in trace.levels.iter().enumerate() {
        if q.len() != d.level_size(i + 1) {
            return Err(Error::Dimension(format!(
                "q^({}) has length {}, |V_{}| = {}",
                i + 1,
                q.len(),
                i + 1,
                d.level_size(i + 1)
            )));
        }
    }
    let probability_vectors = trace.levels.iter().all(|q| is_probability_vector(q));
    let mut residuals = Vec::new();
    let mut first_failure = None;
    for n in 1..big_n {
        let f = d.stochastic_matrix(n)?;
        let r = dstar(&f.transpose_mul_vec(&trace.levels[n]), &trace.levels[n - 1]);
        if first_failure.is_none() && !r.is_zero() {
            first_failure = Some((n, r.clone()));
        }
        residuals.push(r);
    }
    let max_residual = residuals.iter().max().cloned().unwrap_or_else(Rat::zero);
    Ok(TraceVerdict {
        consistent: first_failure.is_none(),
        probability_vectors,
        first_failure,
        max_residual,
        residuals,
    })
}

/// d*(q^(n), Σ_v q_v^(n+m+1) ḡ^(n+m,n)(v)).
pub fn decompose_check(d: &BratteliDiagram, trace: &MeasureTrace, n: usize, m: usize) -> Result<Rat> {
    let top = trace
        .at(n + m + 1)
        .ok_or_else(|| Error::range(format!("trace does not reach level {}", n + m + 1)))?;
    let qn = trace.at(n).ok_or_else(|| Error::range(format!("trace has no level {n}")))?;
    let g = product_matrix(d, n, m)?;
    if top.len() != g.rows() || qn.len() != g.cols() {
        return Err(Error::Dimension("trace does not match the diagram".into()));
    }
    Ok(dstar(&g.transpose_mul_vec(top), qn))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitTrace {
    /// Members of the generating cluster at the common top level.
    pub members: Vec<usize>,
    pub trace: MeasureTrace,
    pub verdict: TraceVerdict,
}

/// Centroid traces q^(1..n_max) of the clusters of ḡ^(N-1,n)(v), v ∈ V_N,
/// N = n_max + m + 1. Membership comes from level n_max (the finest); every
/// shallower clustering must be separated and coarser than it.
pub fn trace_from_limit(d: &BratteliDiagram, n_max: usize, m: usize, gap_ratio: &Rat) -> Result<Vec<LimitTrace>> {
    if n_max == 0 {
        return Err(Error::range("n_max must be >= 1"));
    }
    let top = n_max + m + 1;
    if top > d.depth() {
        return Err(Error::range(format!("trace_from_limit needs depth >= {top}, have {}", d.depth())));
    }
    let mut rows = Vec::with_capacity(n_max);
    let mut reports = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let g = product_matrix(d, n, top - 1 - n)?.to_rows();
        let r = report(n, top - 1 - n, &g, gap_ratio);
        if !r.separated {
            return Err(Error::Convergence(format!(
                "clusters at level {n} are not separated (gap {}, max diameter {}); increase m",
                r.gap, r.max_diameter
            )));
        }
        rows.push(g);
        reports.push(r);
    }
    let finest = reports.last().expect("n_max >= 1");
    for r in &reports {
        for c in &finest.clusters {
            let owner = r.clusters.iter().position(|x| x.members.contains(&c.members[0]));
            if !c.members.iter().all(|v| r.clusters.iter().position(|x| x.members.contains(v)) == owner) {
                return Err(Error::Convergence(format!(
                    "clustering at level {} splits cluster {:?} of level {n_max}",
                    r.n, c.members
                )));
            }
        }
    }
    let mut out = Vec::with_capacity(finest.count());
    for c in &finest.clusters {
        let levels: Vec<Vec<Rat>> = rows
            .iter()
            .map(|g| centroid(&c.members.iter().map(|&v| g[v].clone()).collect::<Vec<_>>()))
            .collect();
        let trace = MeasureTrace::new(levels);
        let verdict = verify_trace(d, &trace)?;
        out.push(LimitTrace {
            members: c.members.clone(),
            trace,
            verdict,
        });
    }
    Ok(out)
}

pub fn dstar_abs_max(a: &[Rat], b: &[Rat]) -> Rat {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).max().unwrap_or_else(Rat::zero)
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(k: usize) -> Self {
        UnionFind((0..k).collect())
    }

    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut i = i;
        while self.0[i] != r {
            let next = self.0[i];
            self.0[i] = r;
            i = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.0[hi] = lo;
        true
    }
}

//! Class graph, spectral radii, distinguished classes and their measures
//! for stationary diagrams.

use num_bigint::{BigInt, BigUint};
use num_traits::{Signed, ToPrimitive, Zero};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde_json::{json, Value};

use crate::diagram::BratteliDiagram;
use crate::error::{Error, Result};
use crate::linalg::{det_rat, dstar, left_null_space, rat_int, rat_to_f64, IntMatrix, Rat, RatMatrix};
use crate::series::stationary_matrix;
use crate::simplex::{trace_from_limit, MeasureTrace};

pub const DEFAULT_TOL: f64 = 1e-9;
const RESIDUAL: f64 = 1e-12;
const MAX_ITER: usize = 200_000;

#[derive(Clone, Debug, PartialEq)]
pub enum Radius {
    Exact(BigUint),
    Approx { value: f64, residual: f64 },
}

impl Radius {
    pub fn value(&self) -> f64 {
        match self {
            Radius::Exact(r) => r.to_f64().unwrap_or(f64::INFINITY),
            Radius::Approx { value, .. } => *value,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Radius::Exact(r) => json!({"exact": r.to_string()}),
            Radius::Approx { value, residual } => json!({"approx": value, "residual": residual}),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Class {
    pub vertices: Vec<usize>,
    pub matrix: IntMatrix,
    pub radius: Radius,
}

#[derive(Clone, Debug)]
pub struct ClassGraph {
    pub matrix: IntMatrix,
    pub classes: Vec<Class>,
    pub class_of: Vec<usize>,
    /// Direct class edges α → β (α ≠ β).
    pub edges: Vec<(usize, usize)>,
    reach: Vec<Vec<bool>>,
}

impl ClassGraph {
    /// E_α ⪰ E_β: a path leads from α to β.
    pub fn above(&self, a: usize, b: usize) -> bool {
        self.reach[a][b]
    }

    /// Vertices reachable from class α (α included).
    pub fn reachable_vertices(&self, a: usize) -> Vec<usize> {
        (0..self.class_of.len()).filter(|&v| self.reach[a][self.class_of[v]]).collect()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "classes": self.classes.iter().map(|c| json!({
                "vertices": c.vertices,
                "radius": c.radius.to_json(),
            })).collect::<Vec<_>>(),
            "order": self.edges,
        })
    }
}

/// Power iteration y <- y(A + I) on a nonnegative square matrix; returns
/// (radius, left vector normalized to sum 1, relative residual).
fn perron_f64(a: &[Vec<f64>]) -> Result<(f64, Vec<f64>, f64)> {
    let k = a.len();
    let mut y = vec![1.0 / k as f64; k];
    let mut last = (0.0, f64::INFINITY);
    for _ in 0..MAX_ITER {
        let ya: Vec<f64> = (0..k).map(|w| (0..k).map(|v| y[v] * a[v][w]).sum()).collect();
        let s: f64 = ya.iter().sum();
        if s == 0.0 {
            return Ok((0.0, y, 0.0));
        }
        let lambda = s / y.iter().sum::<f64>();
        let res = ya.iter().zip(&y).map(|(p, q)| (p - lambda * q).abs()).sum::<f64>() / s;
        last = (lambda, res);
        if res <= RESIDUAL {
            return Ok((lambda, ya.iter().map(|x| x / s).collect(), res));
        }
        let next: Vec<f64> = ya.iter().zip(&y).map(|(p, q)| p + q).collect();
        let t: f64 = next.iter().sum();
        y = next.into_iter().map(|x| x / t).collect();
    }
    Err(Error::Convergence(format!(
        "power iteration stopped at radius {} with residual {:e}",
        last.0, last.1
    )))
}

fn shifted(m: &IntMatrix, c: &BigUint) -> RatMatrix {
    let k = m.rows();
    let mut out = RatMatrix::zeros(k, k);
    for r in 0..k {
        for s in 0..k {
            let mut x = rat_int(m.get(r, s));
            if r == s {
                x -= rat_int(c);
            }
            out.set(r, s, x);
        }
    }
    out
}

fn radius(m: &IntMatrix) -> Result<Radius> {
    if m.rows() == 1 {
        return Ok(Radius::Exact(m.get(0, 0).clone()));
    }
    let (value, _, residual) = perron_f64(&m.to_f64())?;
    let c = value.round();
    if c >= 0.0 && (value - c).abs() <= 1e-6 * value.max(1.0) {
        let cand = BigUint::from(c as u64);
        if det_rat(&shifted(m, &cand)).is_zero() {
            return Ok(Radius::Exact(cand));
        }
    }
    Ok(Radius::Approx { value, residual })
}

pub fn class_graph(m: &IntMatrix) -> Result<ClassGraph> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("class graph needs a square matrix, got {}x{}", m.rows(), m.cols())));
    }
    let k = m.rows();
    let mut g = DiGraph::<usize, ()>::new();
    let nodes: Vec<_> = (0..k).map(|v| g.add_node(v)).collect();
    for v in 0..k {
        for w in 0..k {
            if !m.get(v, w).is_zero() {
                g.add_edge(nodes[v], nodes[w], ());
            }
        }
    }
    let mut sccs: Vec<Vec<usize>> = tarjan_scc(&g)
        .into_iter()
        .map(|c| {
            let mut vs: Vec<usize> = c.into_iter().map(|n| g[n]).collect();
            vs.sort_unstable();
            vs
        })
        .collect();
    sccs.sort_by_key(|c| c[0]);
    let mut class_of = vec![0; k];
    for (i, c) in sccs.iter().enumerate() {
        for &v in c {
            class_of[v] = i;
        }
    }
    let l = sccs.len();
    let mut edges = Vec::new();
    let mut reach = vec![vec![false; l]; l];
    for v in 0..k {
        for w in 0..k {
            let (a, b) = (class_of[v], class_of[w]);
            if a != b && !m.get(v, w).is_zero() && !edges.contains(&(a, b)) {
                edges.push((a, b));
            }
        }
    }
    edges.sort_unstable();
    for (a, row) in reach.iter_mut().enumerate() {
        let mut stack = vec![a];
        row[a] = true;
        while let Some(x) = stack.pop() {
            for &(p, q) in &edges {
                if p == x && !row[q] {
                    row[q] = true;
                    stack.push(q);
                }
            }
        }
    }
    let classes = sccs
        .into_iter()
        .map(|vs| {
            let sub = m.submatrix(&vs, &vs);
            Ok(Class {
                radius: radius(&sub)?,
                matrix: sub,
                vertices: vs,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ClassGraph {
        matrix: m.clone(),
        classes,
        class_of,
        edges,
        reach,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum Distinction {
    Distinguished,
    /// ρ_α <= ρ_β for a class β strictly below α.
    Fails { against: usize },
    /// Radii too close to order in floating point.
    Indeterminate { against: usize },
    /// ρ_α = 0.
    Nilpotent,
}

impl Distinction {
    pub fn to_json(&self) -> Value {
        match self {
            Distinction::Distinguished => json!("distinguished"),
            Distinction::Fails { against } => json!({"fails_against": against}),
            Distinction::Indeterminate { against } => json!({"indeterminate_against": against}),
            Distinction::Nilpotent => json!("nilpotent"),
        }
    }
}

pub fn distinguished_classes(g: &ClassGraph, tol: f64) -> Vec<Distinction> {
    (0..g.classes.len())
        .map(|a| {
            let ra = &g.classes[a].radius;
            if ra.value() == 0.0 {
                return Distinction::Nilpotent;
            }
            let mut verdict = Distinction::Distinguished;
            for b in (0..g.classes.len()).filter(|&b| b != a && g.above(a, b)) {
                let rb = &g.classes[b].radius;
                match (ra, rb) {
                    (Radius::Exact(x), Radius::Exact(y)) => {
                        if x <= y {
                            return Distinction::Fails { against: b };
                        }
                    }
                    _ => {
                        let (x, y) = (ra.value(), rb.value());
                        if (x - y).abs() <= tol * x.max(1.0) {
                            verdict = Distinction::Indeterminate { against: b };
                        } else if x < y {
                            return Distinction::Fails { against: b };
                        }
                    }
                }
            }
            verdict
        })
        .collect()
}

pub fn distinguished_indices(g: &ClassGraph, tol: f64) -> Vec<usize> {
    distinguished_classes(g, tol)
        .iter()
        .enumerate()
        .filter(|(_, d)| **d == Distinction::Distinguished)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub enum Eigenvector {
    Exact(Vec<Rat>),
    Approx { x: Vec<f64>, residual: f64 },
}

#[derive(Clone, Debug)]
pub struct DistinguishedMeasure {
    pub class: usize,
    pub radius: Radius,
    /// Normalized so that x · h^(1) = 1.
    pub x: Eigenvector,
    pub support: Vec<usize>,
}

impl DistinguishedMeasure {
    /// q^(n)_v = x_v h_v^(n) / ρ^(n-1), exact when ρ is an integer.
    pub fn tower_masses(&self, d: &BratteliDiagram, n: usize) -> Result<Vec<Rat>> {
        let Eigenvector::Exact(x) = &self.x else {
            return Err(Error::input("exact tower masses need an exact eigenvector"));
        };
        let Radius::Exact(r) = &self.radius else { unreachable!() };
        let h = d.heights(n)?;
        let scale = Rat::from_integer(BigInt::from(r.pow(n as u32 - 1)));
        Ok(x.iter().zip(h).map(|(xv, hv)| xv * rat_int(hv) / &scale).collect())
    }

    pub fn tower_masses_f64(&self, d: &BratteliDiagram, n: usize) -> Result<Vec<f64>> {
        match &self.x {
            Eigenvector::Exact(_) => Ok(self.tower_masses(d, n)?.iter().map(rat_to_f64).collect()),
            Eigenvector::Approx { x, .. } => {
                let h = d.heights(n)?;
                let rho = self.radius.value();
                Ok(x.iter()
                    .zip(h)
                    .map(|(xv, hv)| if hv.is_zero() { 0.0 } else { xv * (ln_big(hv) - (n - 1) as f64 * rho.ln()).exp() })
                    .collect())
            }
        }
    }

    pub fn trace(&self, d: &BratteliDiagram, levels: usize) -> Result<MeasureTrace> {
        Ok(MeasureTrace::new((1..=levels).map(|n| self.tower_masses(d, n)).collect::<Result<_>>()?))
    }

    pub fn to_json(&self, d: &BratteliDiagram, levels: usize) -> Value {
        let x = match &self.x {
            Eigenvector::Exact(x) => json!({"exact": x.iter().map(ToString::to_string).collect::<Vec<_>>()}),
            Eigenvector::Approx { x, residual } => json!({"approx": x, "residual": residual}),
        };
        let q: Vec<Value> = (1..=levels.min(d.depth()))
            .map(|n| match &self.x {
                Eigenvector::Exact(_) => json!(self
                    .tower_masses(d, n)
                    .map(|v| v.iter().map(ToString::to_string).collect::<Vec<_>>())
                    .unwrap_or_default()),
                Eigenvector::Approx { .. } => json!(self.tower_masses_f64(d, n).unwrap_or_default()),
            })
            .collect();
        json!({
            "class": self.class,
            "radius": self.radius.to_json(),
            "x": x,
            "support": self.support,
            "tower_masses": q,
        })
    }
}

fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    (x >> shift).to_f64().unwrap_or(f64::INFINITY).ln() + shift as f64 * std::f64::consts::LN_2
}

fn stationary_of(d: &BratteliDiagram) -> Result<&IntMatrix> {
    stationary_matrix(d).ok_or_else(|| Error::input("diagram is not stationary"))
}

pub fn distinguished_measure(d: &BratteliDiagram, g: &ClassGraph, alpha: usize) -> Result<DistinguishedMeasure> {
    let status = distinguished_classes(g, DEFAULT_TOL);
    match status.get(alpha) {
        Some(Distinction::Distinguished) => {}
        Some(other) => return Err(Error::input(format!("class {alpha} is not distinguished: {}", other.to_json()))),
        None => return Err(Error::input(format!("no class {alpha}"))),
    }
    let k = g.matrix.rows();
    let reach = g.reachable_vertices(alpha);
    let sub = g.matrix.submatrix(&reach, &reach);
    let h1 = d.heights(1)?;
    let radius = g.classes[alpha].radius.clone();
    let x = match &radius {
        Radius::Exact(r) => {
            let ns = left_null_space(&shifted(&sub, r));
            if ns.len() != 1 {
                return Err(Error::Convergence(format!("eigenspace of dimension {} for class {alpha}", ns.len())));
            }
            let mut y = ns.into_iter().next().unwrap();
            if y.iter().any(Signed::is_negative) {
                y.iter_mut().for_each(|v| *v = -v.clone());
            }
            let norm: Rat = y.iter().zip(&reach).map(|(yv, &v)| yv * rat_int(&h1[v])).sum();
            let mut full = vec![Rat::zero(); k];
            for (yv, &v) in y.iter().zip(&reach) {
                full[v] = yv / &norm;
            }
            Eigenvector::Exact(full)
        }
        Radius::Approx { .. } => {
            let (_, y, residual) = perron_f64(&sub.to_f64())?;
            let norm: f64 = y.iter().zip(&reach).map(|(yv, &v)| yv * rat_to_f64(&rat_int(&h1[v]))).sum();
            let mut full = vec![0.0; k];
            for (yv, &v) in y.iter().zip(&reach) {
                full[v] = yv / norm;
            }
            Eigenvector::Approx { x: full, residual }
        }
    };
    Ok(DistinguishedMeasure {
        class: alpha,
        radius,
        x,
        support: reach,
    })
}

#[derive(Clone, Debug)]
pub struct CrossMatch {
    pub class: usize,
    pub cluster_members: Vec<usize>,
    pub discrepancy: f64,
    pub exact_discrepancy: Option<Rat>,
    pub supports_match: bool,
}

#[derive(Clone, Debug)]
pub struct CrossReport {
    pub distinguished: usize,
    pub clusters: usize,
    pub matches: Vec<CrossMatch>,
}

impl CrossReport {
    pub fn agrees(&self) -> bool {
        self.distinguished == self.clusters && self.matches.iter().all(|m| m.supports_match)
    }

    pub fn max_discrepancy(&self) -> f64 {
        self.matches.iter().map(|m| m.discrepancy).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "analysis": "cross_validate",
            "distinguished": self.distinguished,
            "clusters": self.clusters,
            "agrees": self.agrees(),
            "matches": self.matches.iter().map(|m| json!({
                "class": m.class,
                "cluster_members": m.cluster_members,
                "discrepancy": match &m.exact_discrepancy {
                    Some(x) => json!(x.to_string()),
                    None => json!({"approx": m.discrepancy}),
                },
                "supports_match": m.supports_match,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Distinguished measures against centroid traces of separated clusters at
/// step m, on levels 1..=n_max. A trace coordinate counts toward the
/// support when it exceeds the trace discrepancy.
pub fn cross_validate(d: &BratteliDiagram, n_max: usize, m: usize, gap_ratio: &Rat) -> Result<CrossReport> {
    let g = class_graph(stationary_of(d)?)?;
    let measures: Vec<DistinguishedMeasure> = distinguished_indices(&g, DEFAULT_TOL)
        .into_iter()
        .map(|a| distinguished_measure(d, &g, a))
        .collect::<Result<_>>()?;
    let traces = trace_from_limit(d, n_max, m, gap_ratio)?;
    let mut matches = Vec::new();
    for mu in &measures {
        let mut best: Option<CrossMatch> = None;
        for t in &traces {
            let (disc, exact) = match mu.x {
                Eigenvector::Exact(_) => {
                    let mut worst = Rat::zero();
                    for n in 1..=n_max {
                        worst = worst.max(dstar(&mu.tower_masses(d, n)?, t.trace.at(n).unwrap()));
                    }
                    (rat_to_f64(&worst), Some(worst))
                }
                Eigenvector::Approx { .. } => {
                    let mut worst = 0f64;
                    for n in 1..=n_max {
                        let q = mu.tower_masses_f64(d, n)?;
                        let s: f64 = q.iter().zip(t.trace.at(n).unwrap()).map(|(a, b)| (a - rat_to_f64(b)).abs()).sum();
                        worst = worst.max(s);
                    }
                    (worst, None)
                }
            };
            if best.as_ref().is_none_or(|b| disc < b.discrepancy) {
                let last = t.trace.at(n_max).unwrap();
                let tsupp: Vec<usize> = (0..last.len()).filter(|&v| rat_to_f64(&last[v]) > disc).collect();
                best = Some(CrossMatch {
                    class: mu.class,
                    cluster_members: t.members.clone(),
                    discrepancy: disc,
                    exact_discrepancy: exact,
                    supports_match: tsupp == mu.support,
                });
            }
        }
        if let Some(b) = best {
            matches.push(b);
        }
    }
    Ok(CrossReport {
        distinguished: measures.len(),
        clusters: traces.len(),
        matches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rat;
    use crate::simplex::verify_trace;
    use crate::spec::DiagramSpec;

    fn m(rows: &[Vec<u64>]) -> IntMatrix {
        IntMatrix::from_u64(rows)
    }

    fn stationary(rows: &[Vec<u64>], root: &[u64], depth: usize) -> BratteliDiagram {
        BratteliDiagram::materialize(&DiagramSpec::stationary(rows).with_root(root), depth).unwrap()
    }

    fn radii(g: &ClassGraph) -> Vec<f64> {
        g.classes.iter().map(|c| c.radius.value()).collect()
    }

    #[test]
    fn class_graphs() {
        let g = class_graph(&m(&[vec![3, 0], vec![1, 2]])).unwrap();
        assert_eq!(g.classes.len(), 2);
        assert!(g.above(1, 0) && !g.above(0, 1));
        assert_eq!(radii(&g), vec![3.0, 2.0]);
        let g = class_graph(&m(&[vec![1, 1], vec![1, 1]])).unwrap();
        assert_eq!(g.classes.len(), 1);
        assert_eq!(g.classes[0].radius, Radius::Exact(2u8.into()));
        let g = class_graph(&m(&[vec![2, 0, 0], vec![1, 3, 0], vec![0, 1, 5]])).unwrap();
        assert_eq!(radii(&g), vec![2.0, 3.0, 5.0]);
        assert!(g.above(2, 0) && g.above(2, 1) && g.above(1, 0));
        assert!(class_graph(&m(&[vec![1, 2]])).is_err());
    }

    #[test]
    fn irrational_radius_stays_approximate() {
        let g = class_graph(&m(&[vec![1, 1], vec![1, 0]])).unwrap();
        let Radius::Approx { value, residual } = g.classes[0].radius else { panic!() };
        assert!((value - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-10);
        assert!(residual <= 1e-12);
    }

    #[test]
    fn distinguished_examples() {
        let g = class_graph(&m(&[vec![3, 0], vec![1, 2]])).unwrap();
        assert_eq!(distinguished_indices(&g, DEFAULT_TOL), vec![0]);
        let g = class_graph(&m(&[vec![2, 0], vec![1, 3]])).unwrap();
        assert_eq!(distinguished_indices(&g, DEFAULT_TOL), vec![0, 1]);
        let g = class_graph(&m(&[vec![2, 0], vec![1, 2]])).unwrap();
        assert_eq!(distinguished_classes(&g, DEFAULT_TOL)[1], Distinction::Fails { against: 0 });
        // golden ratio above an irrational class of the same radius
        let g = class_graph(&m(&[vec![1, 1, 0, 0], vec![1, 0, 0, 0], vec![1, 0, 1, 1], vec![0, 0, 1, 0]])).unwrap();
        assert!(matches!(distinguished_classes(&g, DEFAULT_TOL)[1], Distinction::Indeterminate { against: 0 }));
    }

    #[test]
    fn exact_measures() {
        let d = stationary(&[vec![3, 0], vec![1, 2]], &[3, 3], 12);
        let g = class_graph(stationary_of(&d).unwrap()).unwrap();
        let mu = distinguished_measure(&d, &g, 0).unwrap();
        assert_eq!(mu.x, Eigenvector::Exact(vec![rat(1, 3), rat(0, 1)]));
        for n in 1..=12 {
            assert_eq!(mu.tower_masses(&d, n).unwrap(), vec![rat(1, 1), rat(0, 1)]);
        }
        assert!(distinguished_measure(&d, &g, 1).is_err());

        let d = stationary(&[vec![2, 0], vec![1, 3]], &[1, 1], 14);
        let g = class_graph(stationary_of(&d).unwrap()).unwrap();
        let mu = distinguished_measure(&d, &g, 1).unwrap();
        assert_eq!(mu.support, vec![0, 1]);
        let t = mu.trace(&d, 12).unwrap();
        for n in 1..=12 {
            assert_eq!(t.at(n).unwrap().iter().sum::<Rat>(), rat(1, 1));
        }
        let v = verify_trace(&d, &t).unwrap();
        assert!(v.ok() && v.max_residual.is_zero());

        let one = stationary(&[vec![2]], &[1], 6);
        let g = class_graph(stationary_of(&one).unwrap()).unwrap();
        let mu = distinguished_measure(&one, &g, 0).unwrap();
        assert_eq!(mu.tower_masses(&one, 5).unwrap(), vec![rat(1, 1)]);
    }

    #[test]
    fn approximate_measure_normalizes() {
        let d = stationary(&[vec![1, 1], vec![1, 0]], &[1, 1], 30);
        let g = class_graph(stationary_of(&d).unwrap()).unwrap();
        let mu = distinguished_measure(&d, &g, 0).unwrap();
        for n in 1..=30 {
            let s: f64 = mu.tower_masses_f64(&d, n).unwrap().iter().sum();
            assert!((s - 1.0).abs() < 1e-10, "n={n} s={s}");
        }
    }

    #[test]
    fn cross_validation() {
        let d = stationary(&[vec![3, 0], vec![1, 2]], &[3, 3], 30);
        let r = cross_validate(&d, 3, 25, &rat(10, 1)).unwrap();
        assert!(r.agrees());
        let bound = (0..25).fold(rat(2, 1), |acc, _| acc * rat(2, 3));
        assert!(r.matches[0].exact_discrepancy.clone().unwrap() <= bound);

        let d = stationary(&[vec![2, 0], vec![1, 3]], &[1, 1], 40);
        let r = cross_validate(&d, 3, 30, &rat(10, 1)).unwrap();
        assert_eq!((r.distinguished, r.clusters), (2, 2));
        assert!(r.agrees(), "{}", r.to_json());

        let d = stationary(&[vec![1, 1], vec![1, 1]], &[1, 1], 12);
        let r = cross_validate(&d, 2, 8, &rat(10, 1)).unwrap();
        assert!(r.agrees());
        assert_eq!(r.max_discrepancy(), 0.0);
    }
}

//! Unique-ergodicity search, divergence tests, the finite-rank structure
//! conditions, chain partitions and support diagnostics.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

use crate::diagram::BratteliDiagram;
use crate::error::{Error, Result};
use crate::linalg::{dstar, rat_to_f64, simplex_volume_sq, Rat, RatMatrix};
use crate::series::{
    analyze, distinct_from, outside_mass, stationary_matrix, tail_model, ClosedForm, Combine, Fate, Idx,
    SeriesCertificate, SeriesEvidence, SeriesInput, VertexSelection,
};
use crate::simplex::{centroid, cluster_points, product_matrix, MeasureTrace};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Certified,
    RefutedEvidence,
    Undetermined,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Certified => "Certified",
            Status::RefutedEvidence => "RefutedEvidence",
            Status::Undetermined => "Undetermined",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TelescopingCertificate {
    /// 0 = n_0 < n_1 < ... ; block k spans levels n_k .. n_{k+1}.
    pub levels: Vec<usize>,
    pub eps: Vec<Rat>,
    /// Row gap of G_(n_{k+1}-1, n_k), one per schedule entry.
    pub bounds: Vec<Rat>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Certificate {
    Telescoping(TelescopingCertificate),
    Series(SeriesCertificate),
    SingletonBlocks { from: usize },
}

impl Certificate {
    pub fn to_json(&self) -> Value {
        match self {
            Certificate::Telescoping(t) => json!({
                "kind": "telescoping",
                "levels": t.levels,
                "eps": t.eps.iter().map(ToString::to_string).collect::<Vec<_>>(),
                "bounds": t.bounds.iter().map(ToString::to_string).collect::<Vec<_>>(),
            }),
            Certificate::Series(s) => s.to_json(),
            Certificate::SingletonBlocks { from } => json!({
                "kind": "singleton-blocks",
                "from": from,
                "note": "one vertex per level: the block subdiagram is an odometer",
            }),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Verdict {
    pub analysis: &'static str,
    pub status: Status,
    pub certificate: Option<Certificate>,
    pub series: Vec<(String, SeriesEvidence)>,
    pub witness: Option<Value>,
    pub notes: Vec<String>,
}

impl Verdict {
    pub(crate) fn new(analysis: &'static str, status: Status) -> Self {
        Verdict {
            analysis,
            status,
            certificate: None,
            series: Vec::new(),
            witness: None,
            notes: Vec::new(),
        }
    }

    pub fn is_certified(&self) -> bool {
        self.status == Status::Certified
    }

    pub fn telescoping(&self) -> Option<&TelescopingCertificate> {
        match &self.certificate {
            Some(Certificate::Telescoping(t)) => Some(t),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Value {
        let series: Vec<Value> = self
            .series
            .iter()
            .map(|(k, s)| {
                let mut v = s.to_json();
                v["name"] = json!(k);
                v
            })
            .collect();
        json!({
            "analysis": self.analysis,
            "status": self.status.as_str(),
            "certificate": self.certificate.as_ref().map(Certificate::to_json),
            "series": series,
            "witness": self.witness,
            "notes": self.notes,
        })
    }
}

/// Row gap of G_(n+m,n) from the integer product P = F̃_{n+m}⋯F̃_n.
fn scaled_row_gap(p: &crate::linalg::IntMatrix, h: &[num_bigint::BigUint], top: &[num_bigint::BigUint]) -> Rat {
    let rows: Vec<Vec<Rat>> = (0..p.rows())
        .map(|u| {
            let den = BigInt::from(top[u].clone());
            (0..p.cols())
                .map(|w| Rat::new(BigInt::from(p.get(u, w) * &h[w]), den.clone()))
                .collect()
        })
        .collect();
    RatMatrix::from_rows(rows).row_gap()
}

/// For each ε_k, the smallest m <= budget with row gap of G_(n+m,n) <= ε_k,
/// then n <- n+m+1 (starting from n = 1).
pub fn unique_ergodicity_search(d: &BratteliDiagram, eps: &[Rat], budget: usize) -> Result<Verdict> {
    if eps.is_empty() {
        return Err(Error::input("empty eps schedule"));
    }
    if eps.windows(2).any(|w| w[0] <= w[1]) || eps.iter().any(|e| !e.is_positive()) {
        return Err(Error::input("eps schedule must be positive and strictly decreasing"));
    }
    if budget < 1 {
        return Err(Error::range("m budget must be >= 1"));
    }
    let mut levels = vec![0, 1];
    let mut bounds = Vec::new();
    let mut n = 1;
    let mut v = Verdict::new("unique_ergodicity_search", Status::Undetermined);
    for (k, e) in eps.iter().enumerate() {
        let h = d.heights(n)?.to_vec();
        let mut p = d.incidence(n)?.clone();
        let mut best: Option<(usize, Rat)> = None;
        let mut found = None;
        for m in 0..=budget {
            if n + m + 1 > d.depth() {
                v.notes.push(format!(
                    "depth {} exhausted at eps[{k}] = {e} (n = {n}, m = {m})",
                    d.depth()
                ));
                break;
            }
            if m > 0 {
                p = d.incidence(n + m)?.mul(&p);
            }
            let gap = scaled_row_gap(&p, &h, d.heights(n + m + 1)?);
            if best.as_ref().is_none_or(|b| gap < b.1) {
                best = Some((m, gap.clone()));
            }
            if gap <= *e {
                found = Some((m, gap));
                break;
            }
        }
        match found {
            Some((m, gap)) => {
                n += m + 1;
                levels.push(n);
                bounds.push(gap);
            }
            None => {
                if !v.notes.iter().any(|s| s.starts_with("depth")) {
                    v.notes.push(format!("budget {budget} exceeded at eps[{k}] = {e} from n = {n}"));
                }
                v.witness = Some(json!({
                    "levels": levels,
                    "bounds": bounds.iter().map(ToString::to_string).collect::<Vec<_>>(),
                    "stuck_at": {"k": k, "eps": e.to_string(), "n": n,
                        "best_m": best.as_ref().map(|b| b.0),
                        "best_gap": best.as_ref().map(|b| b.1.to_string())},
                }));
                return Ok(v);
            }
        }
    }
    v.status = Status::Certified;
    v.certificate = Some(Certificate::Telescoping(TelescopingCertificate {
        levels,
        eps: eps.to_vec(),
        bounds,
    }));
    Ok(v)
}

/// Re-derives every bound of a telescoping certificate by telescoping and
/// recomputing stochastic matrices; true iff all are <= eps exactly.
pub fn replay_certificate(d: &BratteliDiagram, cert: &TelescopingCertificate) -> Result<bool> {
    let t = d.telescope(&cert.levels)?;
    for (k, e) in cert.eps.iter().enumerate() {
        let gap = t.stochastic_matrix(k + 1)?.row_gap();
        if gap > *e || gap != cert.bounds[k] {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Float variant of the search, using normalized height ratios.
pub fn unique_ergodicity_search_f64(d: &BratteliDiagram, eps: &[f64], budget: usize) -> Result<Value> {
    let mut levels = vec![0usize, 1];
    let mut bounds = Vec::new();
    let mut n = 1;
    for e in eps {
        let mut found = None;
        for m in 0..=budget {
            if n + m + 1 > d.depth() {
                break;
            }
            let g = crate::simplex::product_matrix_f64(d, n, m)?;
            let mut gap = 0f64;
            for a in 0..g.len() {
                for b in a + 1..g.len() {
                    gap = gap.max(crate::linalg::dstar_f64(&g[a], &g[b]));
                }
            }
            if gap <= *e {
                found = Some((m, gap));
                break;
            }
        }
        let Some((m, gap)) = found else {
            return Ok(json!({"mode": "float", "status": "Undetermined", "levels": levels, "bounds": bounds}));
        };
        n += m + 1;
        levels.push(n);
        bounds.push(gap);
    }
    Ok(json!({"mode": "float", "status": "Certified", "levels": levels, "bounds": bounds,
        "note": "64-bit float evidence; not an exact certificate"}))
}

/// Σ m_n = ∞ with m_n the minimum entry of F_n.
pub fn min_entry_divergence(d: &BratteliDiagram, window: usize) -> Result<Verdict> {
    if window == 0 || window + 1 > d.depth() {
        return Err(Error::range(format!("window must satisfy 1 <= window <= {}", d.depth() - 1)));
    }
    let levels: Vec<usize> = (1..=window).collect();
    let terms: Vec<Rat> = levels
        .iter()
        .map(|&n| {
            let f = d.stochastic_matrix(n)?;
            Ok((0..f.rows()).flat_map(|r| f.row(r).to_vec()).min().expect("nonempty"))
        })
        .collect::<Result<_>>()?;
    let mut input = SeriesInput {
        levels,
        terms,
        ..Default::default()
    };
    if let Some(model) = tail_model(d) {
        if let Some(min) = model.min_entry() {
            input.closed_form = Some(ClosedForm {
                pieces: vec![min],
                combine: Combine::Single,
                from: model.from_level(),
                model: model.name(),
                assumption: None,
            });
        }
    }
    if let Some(m) = stationary_matrix(d) {
        if let Some(c) = positive_stationary_bound(m) {
            input.constant_lower = Some((
                c,
                2,
                "strictly positive stationary matrix: f_vw >= (min/max)^2 / |V| for n >= 2".into(),
            ));
        }
    }
    let ev = analyze(input);
    let mut v = Verdict::new("min_entry_divergence", Status::Undetermined);
    match ev.fate() {
        Some(Fate::Diverges) => {
            v.status = Status::Certified;
            v.certificate = ev.certificate.clone().map(Certificate::Series);
        }
        Some(Fate::Converges) => v.notes.push("Σ m_n converges: this test does not apply".into()),
        None => v.notes.push("no certificate for the series Σ m_n".into()),
    }
    v.series.push(("min_entry".into(), ev));
    Ok(v)
}

fn positive_stationary_bound(m: &crate::linalg::IntMatrix) -> Option<Rat> {
    let all: Vec<_> = (0..m.rows()).flat_map(|r| m.row(r).to_vec()).collect();
    let min = all.iter().min()?;
    if min.is_zero() {
        return None;
    }
    let max = all.iter().max()?;
    let q = Rat::new(BigInt::from(min.clone()), BigInt::from(max.clone()));
    Some(&q * &q / Rat::from_integer(BigInt::from(m.rows())))
}

/// Blocks V_{n,1..l}; the remainder V_{n,0} is their complement.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Partition {
    pub blocks: Vec<VertexSelection>,
}

pub struct LevelPartition {
    pub blocks: Vec<Vec<usize>>,
    pub remainder: Vec<usize>,
}

impl Partition {
    pub fn constant(blocks: Vec<Vec<usize>>) -> Self {
        Partition {
            blocks: blocks.into_iter().map(VertexSelection::constant).collect(),
        }
    }

    pub fn new(blocks: Vec<VertexSelection>) -> Self {
        Partition { blocks }
    }

    pub fn at(&self, d: &BratteliDiagram, n: usize) -> Result<LevelPartition> {
        let size = d.level_size(n);
        let mut seen = vec![false; size];
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for (j, b) in self.blocks.iter().enumerate() {
            let ws = b.at(n, size).ok_or_else(|| Error::InvalidSubdiagram {
                level: n,
                message: format!("block {} does not resolve on |V_{n}| = {size}", j + 1),
            })?;
            for &w in &ws {
                if w >= size || seen[w] {
                    return Err(Error::InvalidSubdiagram {
                        level: n,
                        message: format!("block {} has vertex {w} out of range or shared", j + 1),
                    });
                }
                seen[w] = true;
            }
            blocks.push(ws);
        }
        let remainder = (0..size).filter(|&w| !seen[w]).collect();
        Ok(LevelPartition { blocks, remainder })
    }

}

/// Terms 1 - min_{v ∈ B_{n+1}} Σ_{w ∈ B_n} f_vw for a block selection, with
/// the closed form supplied by the tail model when one exists.
pub(crate) fn block_outflow(d: &BratteliDiagram, sel: &VertexSelection, window: usize) -> Result<SeriesInput> {
    let mut levels = Vec::new();
    let mut terms = Vec::new();
    for n in 1..window.min(d.depth()) {
        let (Some(a), Some(b)) = (sel.at(n, d.level_size(n)), sel.at(n + 1, d.level_size(n + 1))) else {
            continue;
        };
        let f = d.stochastic_matrix(n)?;
        let t = b
            .iter()
            .map(|&v| Rat::one() - a.iter().map(|&w| f.get(v, w)).sum::<Rat>())
            .max()
            .unwrap_or_else(Rat::zero);
        levels.push(n);
        terms.push(t);
    }
    let mut input = SeriesInput {
        levels,
        terms,
        ..Default::default()
    };
    let pattern = sel.tail_pattern(|n| d.level_size(n));
    if let (Some(model), Some((p, start))) = (tail_model(d), pattern.clone()) {
        let pieces: Option<Vec<_>> = p.iter().map(|&v| outside_mass(model.as_ref(), v, &p)).collect();
        if let Some(pieces) = pieces {
            let from = distinct_from(&p, |n| d.level_size(n), start.max(model.from_level()));
            input.closed_form = Some(ClosedForm {
                pieces,
                combine: Combine::Max,
                from,
                model: model.name(),
                assumption: Some(format!(
                    "the selection follows the pattern [{}] at every level >= {from}",
                    p.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
                )),
            });
        }
    }
    if let (Some(m), Some((p, start))) = (stationary_matrix(d), pattern) {
        if p.iter().all(|i| matches!(i, Idx::Fixed(_))) {
            let ws: Vec<usize> = p.iter().filter_map(|i| i.resolve(m.cols())).collect();
            let closed = ws.iter().all(|&v| (0..m.cols()).all(|w| ws.contains(&w) || m.get(v, w).is_zero()));
            if closed && ws.len() == p.len() {
                input.zero = Some((start, "stationary incidence has no edges into the selection from outside".into()));
            }
        }
    }
    Ok(input)
}

fn block_min_entry(d: &BratteliDiagram, sel: &VertexSelection, window: usize) -> Result<SeriesInput> {
    let mut levels = Vec::new();
    let mut terms = Vec::new();
    for n in 1..window.min(d.depth()) {
        let (Some(a), Some(b)) = (sel.at(n, d.level_size(n)), sel.at(n + 1, d.level_size(n + 1))) else {
            continue;
        };
        let f = d.stochastic_matrix(n)?;
        let t = b
            .iter()
            .flat_map(|&v| a.iter().map(move |&w| f.get(v, w).clone()))
            .min()
            .unwrap_or_else(Rat::zero);
        levels.push(n);
        terms.push(t);
    }
    let mut input = SeriesInput {
        levels,
        terms,
        ..Default::default()
    };
    if let (Some(model), Some((p, start))) = (tail_model(d), sel.tail_pattern(|n| d.level_size(n))) {
        let pieces: Option<Vec<_>> = p.iter().flat_map(|&v| p.iter().map(move |&w| (v, w))).map(|(v, w)| model.entry(v, w)).collect();
        if let Some(pieces) = pieces {
            let from = distinct_from(&p, |n| d.level_size(n), start.max(model.from_level()));
            input.closed_form = Some(ClosedForm {
                pieces,
                combine: Combine::Min,
                from,
                model: model.name(),
                assumption: Some(format!("the block follows its tail pattern from level {from}")),
            });
        }
    }
    Ok(input)
}

/// Unique ergodicity of block subdiagram j (1-based) via Σ m_{n,j} = ∞,
/// after checking (a), (b) and certifying (c).
pub fn subdiagram_unique_ergodicity(d: &BratteliDiagram, partition: &Partition, j: usize, window: usize) -> Result<Verdict> {
    if j == 0 || j > partition.blocks.len() {
        return Err(Error::input(format!("block index {j} out of 1..={}", partition.blocks.len())));
    }
    let window = window.min(d.depth());
    let mut v = Verdict::new("subdiagram_unique_ergodicity", Status::Undetermined);
    let mut sizes = Vec::new();
    for n in 1..=window {
        let lp = partition.at(d, n)?;
        if lp.blocks.iter().any(Vec::is_empty) {
            v.notes.push(format!("condition (a) fails at level {n}: empty block"));
            return Ok(v);
        }
        sizes.push(lp.blocks.iter().map(Vec::len).collect::<Vec<_>>());
    }
    let sel = &partition.blocks[j - 1];
    let c = analyze(block_outflow(d, sel, window)?);
    let c_ok = c.fate() == Some(Fate::Converges);
    v.series.push(("c".into(), c));
    if !c_ok {
        v.notes.push("condition (c) is not certified convergent for this block".into());
        return Ok(v);
    }
    let m = analyze(block_min_entry(d, sel, window)?);
    let mut prod = Rat::one();
    let products: Vec<String> = m
        .terms
        .iter()
        .map(|t| {
            prod *= (Rat::one() - t * Rat::from_integer(2.into())).abs();
            prod.to_string()
        })
        .collect();
    v.witness = Some(json!({ "block_sizes": sizes, "gamma_product": products }));
    let singleton = sel.tail_pattern(|n| d.level_size(n)).is_some_and(|(p, _)| p.len() == 1)
        && (1..=window).all(|n| sel.at(n, d.level_size(n)).is_some_and(|b| b.len() == 1));
    if m.fate() == Some(Fate::Diverges) {
        v.status = Status::Certified;
        v.certificate = m.certificate.clone().map(Certificate::Series);
    } else if singleton {
        v.status = Status::Certified;
        v.certificate = Some(Certificate::SingletonBlocks { from: 1 });
    } else {
        v.notes.push("Σ m_{n,j} not certified divergent".into());
    }
    v.series.push(("m".into(), m));
    Ok(v)
}

#[derive(Clone, Debug)]
pub struct Main1Report {
    pub window: usize,
    pub a: bool,
    pub b: bool,
    pub c: Vec<SeriesEvidence>,
    /// Per block: max pairwise row d* within V_{n+1,j}, n = 1..window-1.
    pub d: Vec<Vec<Rat>>,
    /// Per level n: max over w ∈ V_{n,0} of the squared l-volume.
    pub e1: Vec<(usize, Rat)>,
    /// Per level n: max over v ∈ V_{n+1,0}, j of F_v^(n,j), and whether it is <= 1 - C.
    pub e2: Vec<(usize, Rat, bool)>,
    /// Per block and level: (min, max, holds) of the regular-vanishing inequality.
    pub regular: Vec<Vec<(usize, Rat, Rat, bool)>>,
    pub c_const: Rat,
    pub c1_const: Rat,
}

impl Main1Report {
    pub fn to_json(&self) -> Value {
        let s = |x: &Rat| x.to_string();
        json!({
            "analysis": "check_main1",
            "window": self.window,
            "C": s(&self.c_const),
            "C1": s(&self.c1_const),
            "a": self.a,
            "b": self.b,
            "c": self.c.iter().map(SeriesEvidence::to_json).collect::<Vec<_>>(),
            "d": self.d.iter().map(|b| b.iter().map(s).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "e1": self.e1.iter().map(|(n, v)| json!({"level": n, "max_volume_sq": s(v)})).collect::<Vec<_>>(),
            "e2": self.e2.iter().map(|(n, v, ok)| json!({"level": n, "max_block_mass": s(v), "below_1_minus_C": ok})).collect::<Vec<_>>(),
            "regularly_vanishing": self.regular.iter().map(|b| b.iter().map(|(n, lo, hi, ok)| json!({
                "level": n, "min": s(lo), "max": s(hi), "holds": ok,
            })).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }
}

pub fn check_main1(d: &BratteliDiagram, partition: &Partition, window: usize, c_const: &Rat, c1_const: &Rat) -> Result<Main1Report> {
    if window < 2 || window > d.depth() {
        return Err(Error::range(format!("window must satisfy 2 <= window <= {}", d.depth())));
    }
    let parts: Vec<LevelPartition> = (1..=window).map(|n| partition.at(d, n)).collect::<Result<_>>()?;
    let a = parts.iter().all(|p| p.blocks.iter().all(|b| !b.is_empty()));
    let b = parts.windows(2).all(|w| {
        w[0].remainder.len() == w[1].remainder.len()
            && w[0].blocks.iter().zip(&w[1].blocks).all(|(x, y)| x.len() == y.len())
    });
    let c = partition
        .blocks
        .iter()
        .map(|sel| Ok(analyze(block_outflow(d, sel, window)?)))
        .collect::<Result<Vec<_>>>()?;
    let l = partition.blocks.len();
    let mut dd = vec![Vec::new(); l];
    let mut e2 = Vec::new();
    let mut regular = vec![Vec::new(); l];
    for n in 1..window {
        let f = d.stochastic_matrix(n)?;
        let (lo, hi) = (&parts[n - 1], &parts[n]);
        for j in 0..l {
            let rows: Vec<&[Rat]> = hi.blocks[j].iter().map(|&v| f.row(v)).collect();
            let mut best = Rat::zero();
            for x in 0..rows.len() {
                for y in x + 1..rows.len() {
                    best = best.max(dstar(rows[x], rows[y]));
                }
            }
            dd[j].push(best);
            let out: Vec<Rat> = hi.blocks[j]
                .iter()
                .map(|&v| (0..f.cols()).filter(|w| !lo.blocks[j].contains(w)).map(|w| f.get(v, w)).sum())
                .collect();
            let mn = out.iter().min().cloned().unwrap_or_else(Rat::zero);
            let mx = out.iter().max().cloned().unwrap_or_else(Rat::zero);
            let holds = mn >= c1_const * &mx;
            regular[j].push((n, mn, mx, holds));
        }
        let mut worst = Rat::zero();
        for &v in &hi.remainder {
            for blk in &lo.blocks {
                worst = worst.max(blk.iter().map(|&w| f.get(v, w)).sum());
            }
        }
        let ok = hi.remainder.is_empty() || worst <= Rat::one() - c_const;
        e2.push((n + 1, worst, ok));
    }
    let mut e1 = Vec::new();
    for n in 1..=window {
        let p = &parts[n - 1];
        if p.remainder.is_empty() {
            continue;
        }
        let y: Vec<Vec<Rat>> = if n == 1 {
            RatMatrix::identity(d.level_size(1)).to_rows()
        } else {
            product_matrix(d, 1, n - 2)?.to_rows()
        };
        let centers: Vec<Vec<Rat>> = p
            .blocks
            .iter()
            .map(|blk| centroid(&blk.iter().map(|&w| y[w].clone()).collect::<Vec<_>>()))
            .collect();
        let worst = p
            .remainder
            .iter()
            .map(|&w| {
                let mut pts = centers.clone();
                pts.push(y[w].clone());
                simplex_volume_sq(&pts)
            })
            .max()
            .unwrap_or_else(Rat::zero);
        e1.push((n, worst));
    }
    Ok(Main1Report {
        window,
        a,
        b,
        c,
        d: dd,
        e1,
        e2,
        regular,
        c_const: c_const.clone(),
        c1_const: c1_const.clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainLevel {
    pub blocks: Vec<Vec<usize>>,
    pub remainder: Vec<usize>,
    /// Parent block (at the previous level) of each block; empty at level 1.
    pub parents: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainStructure {
    /// Levels 1..window.
    pub levels: Vec<ChainLevel>,
}

impl ChainStructure {
    /// L_{n+1}^{(i)}: blocks at level n+1 whose parent is block i of level n.
    pub fn successors(&self, n: usize, i: usize) -> Vec<usize> {
        self.levels
            .get(n)
            .map(|l| (0..l.blocks.len()).filter(|&j| l.parents[j] == i).collect())
            .unwrap_or_default()
    }

    /// Every chain (i_1, ..., i_window) of block indices.
    pub fn chains(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = (0..self.levels[0].blocks.len()).map(|i| vec![i]).collect();
        for n in 1..self.levels.len() {
            out = out
                .into_iter()
                .flat_map(|c| {
                    let last = *c.last().unwrap();
                    self.successors(n, last).into_iter().map(move |j| {
                        let mut c2 = c.clone();
                        c2.push(j);
                        c2
                    })
                })
                .collect();
        }
        out
    }

    /// Vertex sequence W_n = V_{n,i_n} of a chain.
    pub fn vertices(&self, chain: &[usize]) -> Result<Vec<Vec<usize>>> {
        if chain.len() > self.levels.len() || chain.is_empty() {
            return Err(Error::input("chain length does not match the structure"));
        }
        for (n, w) in chain.windows(2).enumerate() {
            if !self.successors(n + 1, w[0]).contains(&w[1]) {
                return Err(Error::input(format!(
                    "chain step {} -> {} at level {} is not in the successor set",
                    w[0],
                    w[1],
                    n + 2
                )));
            }
        }
        chain
            .iter()
            .enumerate()
            .map(|(n, &i)| {
                self.levels[n]
                    .blocks
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::input(format!("no block {i} at level {}", n + 1)))
            })
            .collect()
    }

    pub fn to_json(&self) -> Value {
        json!(self
            .levels
            .iter()
            .enumerate()
            .map(|(n, l)| json!({"level": n + 1, "blocks": l.blocks, "remainder": l.remainder, "parents": l.parents}))
            .collect::<Vec<_>>())
    }
}

#[derive(Clone, Debug)]
pub enum ChainOutcome {
    Found { structure: ChainStructure, evidence: Value },
    NoAdmissiblePartition { violated: String, witness: Value },
}

fn block_mass(f: &RatMatrix, rows: &[usize], cols: &[usize]) -> Rat {
    rows.iter().flat_map(|&v| cols.iter().map(move |&w| f.get(v, w))).sum()
}

/// Greedy chain structure from clustered rows of F_n, then a check of
/// (c1), (d1), (e1.1), (e1.2) on the window.
pub fn chain_partition_search(d: &BratteliDiagram, window: usize, gap_ratio: &Rat) -> Result<ChainOutcome> {
    if window < 3 {
        return Err(Error::range("chain search needs window >= 3"));
    }
    if window > d.depth() {
        return Err(Error::range(format!("window {window} exceeds depth {}", d.depth())));
    }
    let half = Rat::new(BigInt::from(1), BigInt::from(2));
    let mut levels = vec![ChainLevel {
        blocks: vec![(0..d.level_size(1)).collect()],
        remainder: Vec::new(),
        parents: Vec::new(),
    }];
    let mut min_row_distance: Option<(usize, Rat)> = None;
    for n in 1..window {
        let f = d.stochastic_matrix(n)?;
        let rows = f.to_rows();
        for x in 0..rows.len() {
            for y in x + 1..rows.len() {
                let r = dstar(&rows[x], &rows[y]);
                if min_row_distance.as_ref().is_none_or(|m| r < m.1) {
                    min_row_distance = Some((n, r));
                }
            }
        }
        let (groups, _, _) = cluster_points(&rows, gap_ratio);
        let mut next = ChainLevel {
            blocks: Vec::new(),
            remainder: Vec::new(),
            parents: Vec::new(),
        };
        for g in groups {
            let lower = &levels[n - 1];
            let (parent, _) = lower
                .blocks
                .iter()
                .enumerate()
                .map(|(i, b)| (i, block_mass(f, &g.members, b)))
                .fold(None::<(usize, Rat)>, |acc, (i, m)| match acc {
                    Some((_, ref bm)) if *bm >= m => acc,
                    _ => Some((i, m)),
                })
                .expect("at least one block");
            let frac = g
                .members
                .iter()
                .map(|&v| block_mass(f, &[v], &lower.blocks[parent]))
                .min()
                .expect("nonempty group");
            if frac <= half {
                next.remainder.extend(g.members);
            } else {
                next.blocks.push(g.members);
                next.parents.push(parent);
            }
        }
        next.remainder.sort_unstable();
        levels.push(next);
        refine(d, &mut levels, n)?;
    }
    // childless blocks below the top carry no chain
    for n in (0..window - 1).rev() {
        let keep: Vec<bool> = (0..levels[n].blocks.len())
            .map(|i| levels[n + 1].parents.contains(&i))
            .collect();
        if keep.iter().all(|k| *k) {
            continue;
        }
        let mut remap = vec![usize::MAX; keep.len()];
        let mut blocks = Vec::new();
        let mut parents = Vec::new();
        for (i, b) in levels[n].blocks.clone().into_iter().enumerate() {
            if keep[i] {
                remap[i] = blocks.len();
                blocks.push(b);
                if n > 0 {
                    parents.push(levels[n].parents[i]);
                }
            } else {
                levels[n].remainder.extend(b);
            }
        }
        levels[n].remainder.sort_unstable();
        levels[n].blocks = blocks;
        levels[n].parents = parents;
        for p in levels[n + 1].parents.iter_mut() {
            *p = remap[*p];
        }
    }
    let structure = ChainStructure { levels };
    verify_chains(d, structure, gap_ratio, min_row_distance)
}

/// Splits multi-vertex blocks at level n (1-based) whose children at n+1
/// pull their vertices apart, then reattaches the children.
fn refine(d: &BratteliDiagram, levels: &mut [ChainLevel], top: usize) -> Result<()> {
    for n in (1..=top).rev() {
        let f = d.stochastic_matrix(n)?;
        let mut changed = false;
        let mut new_blocks: Vec<Vec<usize>> = Vec::new();
        let mut new_parents: Vec<usize> = Vec::new();
        let old = levels[n - 1].clone();
        let children = &levels[n];
        for (i, b) in old.blocks.iter().enumerate() {
            let kids: Vec<usize> = (0..children.blocks.len()).filter(|&j| children.parents[j] == i).collect();
            if b.len() < 2 || kids.len() < 2 {
                new_blocks.push(b.clone());
                if n > 1 {
                    new_parents.push(old.parents[i]);
                }
                continue;
            }
            let mut parts: Vec<Vec<usize>> = vec![Vec::new(); kids.len()];
            for &w in b {
                let best = kids
                    .iter()
                    .enumerate()
                    .map(|(k, &j)| {
                        let c = &children.blocks[j];
                        let m: Rat = c.iter().map(|&v| f.get(v, w)).sum::<Rat>() / Rat::from_integer(BigInt::from(c.len()));
                        (k, m)
                    })
                    .fold(None::<(usize, Rat)>, |acc, (k, m)| match acc {
                        Some((_, ref bm)) if *bm >= m => acc,
                        _ => Some((k, m)),
                    })
                    .expect("kids nonempty")
                    .0;
                parts[best].push(w);
            }
            if parts.iter().any(Vec::is_empty) {
                new_blocks.push(b.clone());
                if n > 1 {
                    new_parents.push(old.parents[i]);
                }
                continue;
            }
            changed = true;
            for p in parts {
                new_blocks.push(p);
                if n > 1 {
                    new_parents.push(old.parents[i]);
                }
            }
        }
        if !changed {
            continue;
        }
        levels[n - 1].blocks = new_blocks;
        levels[n - 1].parents = new_parents;
        // reattach children of level n
        let lower = levels[n - 1].blocks.clone();
        let up = &mut levels[n];
        for j in 0..up.blocks.len() {
            let g = &up.blocks[j];
            up.parents[j] = lower
                .iter()
                .enumerate()
                .map(|(i, b)| (i, block_mass(f, g, b)))
                .fold(None::<(usize, Rat)>, |acc, (i, m)| match acc {
                    Some((_, ref bm)) if *bm >= m => acc,
                    _ => Some((i, m)),
                })
                .expect("blocks")
                .0;
        }
        // the new split may also let the level above it split
        if n < top {
            let g = d.stochastic_matrix(n + 1)?;
            let lower = levels[n].blocks.clone();
            let up = &mut levels[n + 1];
            for j in 0..up.blocks.len() {
                let grp = &up.blocks[j];
                up.parents[j] = lower
                    .iter()
                    .enumerate()
                    .map(|(i, b)| (i, block_mass(g, grp, b)))
                    .fold(None::<(usize, Rat)>, |acc, (i, m)| match acc {
                        Some((_, ref bm)) if *bm >= m => acc,
                        _ => Some((i, m)),
                    })
                    .expect("blocks")
                    .0;
            }
        }
    }
    Ok(())
}

fn verify_chains(
    d: &BratteliDiagram,
    structure: ChainStructure,
    gap_ratio: &Rat,
    min_row_distance: Option<(usize, Rat)>,
) -> Result<ChainOutcome> {
    let window = structure.levels.len();
    let c = Rat::new(BigInt::from(1), BigInt::from(4));
    let mut c1_terms = Vec::new();
    let mut d1_terms = Vec::new();
    for n in 1..window {
        let f = d.stochastic_matrix(n)?;
        let (lo, hi) = (&structure.levels[n - 1], &structure.levels[n]);
        let mut t = Rat::zero();
        for (j, grp) in hi.blocks.iter().enumerate() {
            let i = hi.parents[j];
            for &v in grp {
                let out: Rat = (0..f.cols()).filter(|w| !lo.blocks[i].contains(w)).map(|w| f.get(v, w)).sum();
                t = t.max(out);
            }
        }
        c1_terms.push(t);
        let mut worst = Rat::zero();
        for grp in &hi.blocks {
            for x in 0..grp.len() {
                for y in x + 1..grp.len() {
                    worst = worst.max(dstar(f.row(grp[x]), f.row(grp[y])));
                }
            }
        }
        d1_terms.push(worst);
    }
    let f = d.stochastic_matrix(window - 1)?;
    let (lo, hi) = (&structure.levels[window - 2], &structure.levels[window - 1]);
    let mut e11 = Rat::one();
    let mut e12 = Rat::zero();
    for &v in &hi.remainder {
        let out: Rat = (0..f.cols()).filter(|w| !lo.remainder.contains(w)).map(|w| f.get(v, w)).sum();
        e11 = e11.min(out);
        for b in &lo.blocks {
            e12 = e12.max(b.iter().map(|&w| f.get(v, w)).sum());
        }
    }
    let s = |x: &Rat| x.to_string();
    let evidence = json!({
        "c1_terms": c1_terms.iter().map(s).collect::<Vec<_>>(),
        "d1_terms": d1_terms.iter().map(s).collect::<Vec<_>>(),
        "e1_1_min_outside_v0": s(&e11),
        "e1_2_max_block_mass": s(&e12),
        "min_row_distance": min_row_distance.as_ref().map(|(n, r)| json!({"level": n, "value": s(r)})),
    });
    let fail = |violated: &str, detail: String| {
        let mut w = evidence.clone();
        w["detail"] = json!(detail);
        Ok(ChainOutcome::NoAdmissiblePartition {
            violated: violated.into(),
            witness: w,
        })
    };
    if structure.levels.iter().any(|l| l.blocks.is_empty()) {
        return fail("structure", "some level has no block carrying a chain".into());
    }
    if !c1_decays(&c1_terms) {
        return fail("c1", "outflow terms do not show summable decay on the window".into());
    }
    let d1_last = d1_terms.last().cloned().unwrap_or_else(Rat::zero);
    if d1_last > Rat::from_integer(2.into()) / gap_ratio {
        return fail("d1", format!("within-block row distance {d1_last} at the last level"));
    }
    if !hi.remainder.is_empty() {
        if e11 < Rat::one() - Rat::one() / gap_ratio {
            return fail("e1.1", format!("mass outside V_0 only {e11}"));
        }
        if e12 > Rat::one() - &c {
            return fail("e1.2", format!("block mass {e12} exceeds 1 - C"));
        }
    }
    Ok(ChainOutcome::Found { structure, evidence })
}

/// Trailing terms are all zero, the last two show log-log slope < -1, or
/// at least three trailing ratios are <= 9/10.
fn c1_decays(terms: &[Rat]) -> bool {
    let k = terms.len();
    if k == 0 {
        return true;
    }
    if terms[k - 1].is_zero() && terms.iter().rev().take(2).all(Zero::is_zero) {
        return true;
    }
    if k >= 2 && terms[k - 2].is_positive() && terms[k - 1].is_positive() {
        let (a, b) = (rat_to_f64(&terms[k - 2]), rat_to_f64(&terms[k - 1]));
        let slope = (b / a).ln() / ((k as f64) / (k as f64 - 1.0)).ln();
        if slope < -1.0 {
            return true;
        }
    }
    let margin = Rat::new(BigInt::from(9), BigInt::from(10));
    let ratios = terms
        .windows(2)
        .rev()
        .take_while(|w| w[0].is_positive() && &w[1] / &w[0] <= margin)
        .count();
    ratios >= 3
}

/// δ̂ and off-support decay for each block along a verified trace.
pub fn support_diagnostics(d: &BratteliDiagram, trace: &MeasureTrace, partition: &Partition, window: usize) -> Result<Value> {
    let window = window.min(trace.len());
    let mut blocks = Vec::new();
    for j in 0..partition.blocks.len() {
        let mut delta: Option<Rat> = None;
        let mut off = Vec::new();
        for n in 1..=window {
            let lp = partition.at(d, n)?;
            let q = trace.at(n).expect("within trace");
            let inside = &lp.blocks[j];
            if let Some(m) = inside.iter().map(|&v| q[v].clone()).min() {
                delta = Some(delta.map_or(m.clone(), |x| x.min(m)));
            }
            off.push(
                (0..q.len())
                    .filter(|v| !inside.contains(v))
                    .map(|v| q[v].clone())
                    .max()
                    .unwrap_or_else(Rat::zero),
            );
        }
        blocks.push(json!({
            "block": j + 1,
            "delta_hat": delta.map(|x| x.to_string()),
            "off_support_max": off.iter().map(ToString::to_string).collect::<Vec<_>>(),
        }));
    }
    let vanishing = (1..=window).map(|n| trace.at(n).unwrap().iter().max().cloned().unwrap_or_else(Rat::zero));
    Ok(json!({
        "analysis": "support_diagnostics",
        "blocks": blocks,
        "max_tower_mass": vanishing.map(|x| x.to_string()).collect::<Vec<_>>(),
    }))
}

pub fn default_eps(k: usize) -> Vec<Rat> {
    (1..=k).map(|i| Rat::new(BigInt::one(), BigInt::from(2u8).pow(i as u32))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::EntryExpr;
    use crate::linalg::rat;
    use crate::spec::{DiagramSpec, Generator};

    fn b(expr: &str, depth: usize) -> BratteliDiagram {
        let spec = DiagramSpec::expression(&[&[expr, "1"], &["1", expr]]).unwrap();
        BratteliDiagram::materialize(&spec, depth).unwrap()
    }

    fn stationary(rows: &[Vec<u64>], depth: usize) -> BratteliDiagram {
        BratteliDiagram::materialize(&DiagramSpec::stationary(rows), depth).unwrap()
    }

    fn countable(depth: usize) -> BratteliDiagram {
        let g = Generator::Countable { a: EntryExpr::parse("n^3+2").unwrap() };
        BratteliDiagram::materialize(&DiagramSpec::new(g), depth).unwrap()
    }

    #[test]
    fn b1_certifies_on_a_feasible_schedule_and_replays() {
        let d = b("n", 60);
        let eps = [rat(1, 2), rat(1, 3), rat(1, 5), rat(1, 8)];
        let v = unique_ergodicity_search(&d, &eps, 64).unwrap();
        assert!(v.is_certified());
        let cert = v.telescoping().unwrap();
        assert_eq!(cert.levels[..2], [0, 1]);
        assert!(replay_certificate(&d, cert).unwrap());
        // tampering with a bound breaks the replay
        let mut bad = cert.clone();
        bad.bounds[1] = rat(0, 1);
        assert!(!replay_certificate(&d, &bad).unwrap());
    }

    #[test]
    fn b1_halving_schedule_runs_out_of_budget() {
        let d = b("n", 120);
        let v = unique_ergodicity_search(&d, &default_eps(10), 64).unwrap();
        assert_eq!(v.status, Status::Undetermined);
        let w = v.witness.unwrap();
        assert_eq!(w["levels"], json!([0, 1, 2, 5, 19]));
        assert_eq!(w["stuck_at"]["k"], json!(3));
        assert_eq!(w["stuck_at"]["n"], json!(19));
    }

    #[test]
    fn odometer_certifies() {
        let d = stationary(&[vec![3, 0], vec![1, 2]], 200);
        let v = unique_ergodicity_search(&d, &default_eps(10), 64).unwrap();
        assert!(v.is_certified());
        assert!(replay_certificate(&d, v.telescoping().unwrap()).unwrap());
    }

    #[test]
    fn b2_floor_matches_product() {
        let d = b("n^2", 64);
        let v = unique_ergodicity_search(&d, &default_eps(4), 60).unwrap();
        assert_eq!(v.status, Status::Undetermined);
        let w = v.witness.unwrap();
        assert_eq!(w["stuck_at"]["n"], json!(2));
        // m = 60 is cut short by depth: the last product spans levels 2..=63
        let top = w["stuck_at"]["best_m"].as_u64().unwrap() as i64 + 2;
        let expect = (2..=top).fold(rat(2, 1), |acc, k| acc * rat(k * k - 1, k * k + 1));
        assert_eq!(w["stuck_at"]["best_gap"], json!(expect.to_string()));
    }

    #[test]
    fn search_validates_input() {
        let d = b("n", 10);
        assert!(unique_ergodicity_search(&d, &[], 4).is_err());
        assert!(unique_ergodicity_search(&d, &[rat(1, 4), rat(1, 2)], 4).is_err());
        assert!(unique_ergodicity_search(&d, &[rat(1, 2)], 0).is_err());
    }

    #[test]
    fn min_entry_tests() {
        assert!(min_entry_divergence(&b("n", 30), 20).unwrap().is_certified());
        assert!(min_entry_divergence(&stationary(&[vec![1, 1], vec![1, 1]], 10), 8).unwrap().is_certified());
        let v = min_entry_divergence(&b("n^2", 30), 20).unwrap();
        assert_eq!(v.status, Status::Undetermined);
        assert!(min_entry_divergence(&b("n", 10), 10).is_err());
    }

    #[test]
    fn block_subdiagrams() {
        let d = b("n^2", 30);
        let p = Partition::constant(vec![vec![0], vec![1]]);
        for j in 1..=2 {
            assert!(subdiagram_unique_ergodicity(&d, &p, j, 25).unwrap().is_certified());
        }
        let one = stationary(&[vec![1]], 10);
        let v = subdiagram_unique_ergodicity(&one, &Partition::constant(vec![vec![0]]), 1, 8).unwrap();
        assert!(v.is_certified());
        let c = countable(20);
        for i in 0..5usize {
            let explicit: Vec<Vec<usize>> = (1..=i).map(|n| vec![n]).collect();
            let sel = VertexSelection::new(explicit, Some(vec![Idx::Fixed(i)]));
            let v = subdiagram_unique_ergodicity(&c, &Partition::new(vec![sel]), 1, 18).unwrap();
            assert!(v.is_certified(), "column {i}: {}", v.to_json());
        }
        assert!(subdiagram_unique_ergodicity(&d, &p, 3, 10).is_err());
        let bad = Partition::constant(vec![vec![0], vec![0]]);
        assert!(subdiagram_unique_ergodicity(&d, &bad, 1, 10).is_err());
    }

    #[test]
    fn main1_on_odometer_and_b1() {
        let d = stationary(&[vec![3, 0], vec![1, 2]], 12);
        let p = Partition::constant(vec![vec![0]]);
        for window in 2..=12 {
            let r = check_main1(&d, &p, window, &rat(1, 2), &rat(1, 4)).unwrap();
            assert!(r.a && r.b);
            assert!(r.c[0].partial_sums.iter().all(Zero::is_zero));
            assert!(r.e2.iter().all(|(_, v, ok)| *v == rat(1, 3) && *ok));
        }
        let d1 = b("n", 12);
        let r = check_main1(&d1, &Partition::constant(vec![vec![0, 1]]), 12, &rat(1, 4), &rat(1, 4)).unwrap();
        assert!(r.c[0].partial_sums.iter().all(Zero::is_zero));
        // row gap of F_n is 2(1 - 2/(n+1)), which does not vanish
        assert_eq!(r.d[0][10], rat(2, 1) * (rat(1, 1) - rat(2, 12)));
        let d2 = b("n^2", 12);
        let r = check_main1(&d2, &Partition::constant(vec![vec![0], vec![1]]), 12, &rat(1, 4), &rat(1, 4)).unwrap();
        assert!(r.d.iter().flatten().all(Zero::is_zero));
        assert!(r.c.iter().all(|c| c.fate() == Some(Fate::Converges)));
        assert!(r.e1.is_empty());
    }

    #[test]
    fn gram_volume_for_remainder() {
        let d = stationary(&[vec![1, 1, 0], vec![0, 1, 1], vec![1, 0, 1]], 6);
        let p = Partition::constant(vec![vec![0], vec![1]]);
        let r = check_main1(&d, &p, 4, &rat(1, 4), &rat(1, 4)).unwrap();
        // level 1: unit vectors e_0, e_1, e_2 give squared area 3/4
        assert_eq!(r.e1[0], (1, rat(3, 4)));
    }

    #[test]
    fn pascal_has_no_chain_structure() {
        let d = BratteliDiagram::materialize(&DiagramSpec::new(Generator::Pascal), 12).unwrap();
        for window in 3..=10 {
            for g in [rat(2, 1), rat(10, 1)] {
                match chain_partition_search(&d, window, &g).unwrap() {
                    ChainOutcome::NoAdmissiblePartition { witness, .. } => {
                        let r: Rat = witness["min_row_distance"]["value"].as_str().unwrap().parse().unwrap();
                        assert!(r >= rat(1, 2));
                    }
                    ChainOutcome::Found { structure, .. } => panic!("window {window}: {}", structure.to_json()),
                }
            }
        }
    }

    #[test]
    fn b2_has_constant_chains() {
        let d = b("n^2", 12);
        let ChainOutcome::Found { structure, .. } = chain_partition_search(&d, 10, &rat(10, 1)).unwrap() else {
            panic!("expected chains");
        };
        let chains = structure.chains();
        assert_eq!(chains.len(), 2);
        for c in &chains {
            let vs = structure.vertices(c).unwrap();
            assert!(vs[1..].windows(2).all(|w| w[0] == w[1] && w[0].len() == 1));
        }
    }

    #[test]
    fn countable_chains_are_columns() {
        let window = 8;
        let d = countable(window + 1);
        let ChainOutcome::Found { structure, .. } = chain_partition_search(&d, window, &rat(10, 1)).unwrap() else {
            panic!("expected chains");
        };
        let seqs: Vec<Vec<Vec<usize>>> = structure.chains().iter().map(|c| structure.vertices(c).unwrap()).collect();
        for i in 0..=window - 2 {
            let want: Vec<Vec<usize>> = (1..=window).map(|n| vec![n.min(i)]).collect();
            let want0: Vec<Vec<usize>> = (1..=window).map(|_| vec![0]).collect();
            let w = if i == 0 { want0 } else { want };
            assert!(seqs.contains(&w), "missing W^({i}): {}", structure.to_json());
        }
    }

    #[test]
    fn support_of_odometer_trace() {
        let d = stationary(&[vec![3, 0], vec![1, 2]], 8);
        let t = MeasureTrace::new((0..=7).map(|_| vec![rat(1, 1), rat(0, 1)]).collect());
        let r = support_diagnostics(&d, &t, &Partition::constant(vec![vec![0]]), 7).unwrap();
        assert_eq!(r["blocks"][0]["delta_hat"], json!("1"));
        assert!(r["blocks"][0]["off_support_max"].as_array().unwrap().iter().all(|x| x == "0"));
    }

    #[test]
    fn verdict_json_shape() {
        let v = min_entry_divergence(&b("n", 12), 10).unwrap();
        let j = v.to_json();
        for k in ["analysis", "status", "certificate", "series", "witness"] {
            assert!(j.get(k).is_some(), "{k}");
        }
        assert_eq!(j["status"], "Certified");
    }
}

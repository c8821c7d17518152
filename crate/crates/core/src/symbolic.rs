//! Ordered diagrams, the Vershik successor on finite paths, block families
//! and orbit codings.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::diagram::BratteliDiagram;
use crate::error::{Error, Result};
use crate::linalg::IntMatrix;
use crate::spec::{Generator, OrderSpec};
use crate::toeplitz::toeplitz_bratteli;

pub use crate::toeplitz::{toeplitz_window, ToeplitzSeed};

/// Words longer than this are refused.
pub const MAX_WORD_LEN: usize = 20_000_000;

#[derive(Clone, Debug)]
pub struct OrderedDiagram {
    pub diagram: BratteliDiagram,
    /// `orders[n][v]`: sources in V_n of the edges into v ∈ V_{n+1}, in order.
    pub orders: Vec<Vec<Vec<usize>>>,
}

/// A finite path from the root: `vertices[k]` ∈ V_{k+1} and `edges[k]` is
/// the position of the k-th edge in the order on r^{-1}(vertices[k]).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Path {
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
}

impl Path {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn end(&self) -> usize {
        *self.vertices.last().expect("nonempty path")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Step {
    Next(Path),
    Extremal,
}

fn default_sources(m: &IntMatrix, v: usize) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for w in 0..m.cols() {
        let c = m.get(v, w).to_usize().filter(|&c| c <= MAX_WORD_LEN).ok_or_else(|| {
            Error::Resource(format!("multiplicity {} too large to order", m.get(v, w)))
        })?;
        out.extend(std::iter::repeat_n(w, c));
    }
    Ok(out)
}

fn check_sources(m: &IntMatrix, level: usize, v: usize, list: &[usize], consecutive: bool) -> Result<()> {
    let mut counts = vec![BigUint::zero(); m.cols()];
    for &w in list {
        if w >= m.cols() {
            return Err(Error::input(format!("order at level {level}, vertex {v}: source {w} out of range")));
        }
        counts[w] += 1u32;
    }
    if counts.as_slice() != m.row(v) {
        return Err(Error::input(format!(
            "order at level {level}, vertex {v}: sources do not match the incidence row"
        )));
    }
    if consecutive {
        let mut seen = Vec::new();
        for (i, &w) in list.iter().enumerate() {
            if i > 0 && list[i - 1] == w {
                continue;
            }
            if seen.contains(&w) {
                return Err(Error::input(format!(
                    "order at level {level}, vertex {v}: equal sources are not contiguous"
                )));
            }
            seen.push(w);
        }
    }
    Ok(())
}

impl OrderedDiagram {
    /// Raw source lists, any order. `orders[n][v]` for n = 0..depth-1.
    pub fn with_orders(d: BratteliDiagram, orders: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        if orders.len() != d.depth() {
            return Err(Error::Dimension(format!("{} order levels for depth {}", orders.len(), d.depth())));
        }
        for (n, lvl) in orders.iter().enumerate() {
            let m = d.incidence(n)?;
            if lvl.len() != m.rows() {
                return Err(Error::Dimension(format!("order level {n} lists {} vertices", lvl.len())));
            }
            for (v, list) in lvl.iter().enumerate() {
                check_sources(m, n + 1, v, list, false)?;
            }
        }
        Ok(OrderedDiagram { diagram: d, orders })
    }

    pub fn depth(&self) -> usize {
        self.diagram.depth()
    }

    /// h^(n) as machine integers (n >= 1), with h^(0) = 1.
    fn height(&self, n: usize, v: usize) -> Result<usize> {
        if n == 0 {
            return Ok(1);
        }
        self.diagram.heights(n)?[v]
            .to_usize()
            .ok_or_else(|| Error::Resource(format!("height at level {n} exceeds machine size")))
    }

    pub fn min_path(&self, level: usize, v: usize) -> Result<Path> {
        self.extremal_path(level, v, false)
    }

    pub fn max_path(&self, level: usize, v: usize) -> Result<Path> {
        self.extremal_path(level, v, true)
    }

    fn extremal_path(&self, level: usize, v: usize, max: bool) -> Result<Path> {
        if level == 0 || level > self.depth() || v >= self.diagram.level_size(level) {
            return Err(Error::range(format!("no vertex {v} at level {level}")));
        }
        let mut vertices = vec![0; level];
        let mut edges = vec![0; level];
        let mut cur = v;
        for k in (0..level).rev() {
            vertices[k] = cur;
            let list = &self.orders[k][cur];
            let e = if max { list.len() - 1 } else { 0 };
            edges[k] = e;
            cur = list[e];
        }
        Ok(Path { vertices, edges })
    }

    pub fn validate(&self, p: &Path) -> Result<()> {
        if p.is_empty() || p.vertices.len() != p.edges.len() || p.len() > self.depth() {
            return Err(Error::input("path length does not fit the diagram"));
        }
        for k in 0..p.len() {
            let list = self
                .orders[k]
                .get(p.vertices[k])
                .ok_or_else(|| Error::input(format!("no vertex {} at level {}", p.vertices[k], k + 1)))?;
            let src = *list
                .get(p.edges[k])
                .ok_or_else(|| Error::input(format!("edge {} out of range at level {}", p.edges[k], k + 1)))?;
            let expect = if k == 0 { 0 } else { p.vertices[k - 1] };
            if src != expect {
                return Err(Error::input(format!("edge at level {} does not start at the path vertex", k + 1)));
            }
        }
        Ok(())
    }

    fn step(&self, p: &Path, forward: bool) -> Result<Step> {
        self.validate(p)?;
        for k in 0..p.len() {
            let list = &self.orders[k][p.vertices[k]];
            let e = p.edges[k];
            let movable = if forward { e + 1 < list.len() } else { e > 0 };
            if !movable {
                continue;
            }
            let ne = if forward { e + 1 } else { e - 1 };
            let mut out = p.clone();
            out.edges[k] = ne;
            if k > 0 {
                let prefix = self.extremal_path(k, list[ne], !forward)?;
                out.vertices[..k].copy_from_slice(&prefix.vertices);
                out.edges[..k].copy_from_slice(&prefix.edges);
            }
            return Ok(Step::Next(out));
        }
        Ok(Step::Extremal)
    }

    pub fn successor(&self, p: &Path) -> Result<Step> {
        self.step(p, true)
    }

    pub fn predecessor(&self, p: &Path) -> Result<Step> {
        self.step(p, false)
    }

    /// Position of the path in the tower over its end vertex.
    pub fn rank(&self, p: &Path) -> Result<usize> {
        self.validate(p)?;
        let mut r = 0;
        for k in 0..p.len() {
            for &w in &self.orders[k][p.vertices[k]][..p.edges[k]] {
                r += self.height(k, w)?;
            }
        }
        Ok(r)
    }

    /// Symbol of a path in the alphabet S_{n0}: its prefix to level n0,
    /// numbered vertex by vertex in tower order.
    pub fn symbol(&self, p: &Path, n0: usize) -> Result<usize> {
        if n0 == 0 || n0 > p.len() {
            return Err(Error::range(format!("n0 = {n0} outside 1..={}", p.len())));
        }
        let prefix = Path {
            vertices: p.vertices[..n0].to_vec(),
            edges: p.edges[..n0].to_vec(),
        };
        let offset: usize = (0..prefix.end()).map(|w| self.height(n0, w)).sum::<Result<usize>>()?;
        Ok(offset + self.rank(&prefix)?)
    }

    /// For each level k < N, the number of distinct restrictions to level k
    /// of the minimal (resp. maximal) paths into V_N.
    pub fn extremal_counts(&self) -> Result<(Vec<usize>, Vec<usize>)> {
        let n = self.depth();
        let count = |max: bool| -> Result<Vec<usize>> {
            let paths: Vec<Path> = (0..self.diagram.level_size(n))
                .map(|v| self.extremal_path(n, v, max))
                .collect::<Result<_>>()?;
            Ok((1..=n)
                .map(|k| {
                    let mut pre: Vec<(&[usize], &[usize])> =
                        paths.iter().map(|p| (&p.vertices[..k], &p.edges[..k])).collect();
                    pre.sort();
                    pre.dedup();
                    pre.len()
                })
                .collect())
        };
        Ok((count(false)?, count(true)?))
    }
}

/// Default ascending consecutive order, overridden per vertex by `spec`.
pub fn consecutive_order(d: &BratteliDiagram, spec: Option<&OrderSpec>) -> Result<OrderedDiagram> {
    let mut orders = Vec::with_capacity(d.depth());
    for n in 0..d.depth() {
        let m = d.incidence(n)?;
        let mut lvl = Vec::with_capacity(m.rows());
        for v in 0..m.rows() {
            let given = match spec {
                Some(OrderSpec::Stationary(map)) if n >= 1 => map.get(&v),
                Some(OrderSpec::PerLevel(map)) => map.get(&(n + 1)).and_then(|l| l.get(&v)),
                _ => None,
            };
            let list = match given {
                Some(l) => {
                    check_sources(m, n + 1, v, l, true)?;
                    l.clone()
                }
                None => default_sources(m, v)?,
            };
            lvl.push(list);
        }
        orders.push(lvl);
    }
    Ok(OrderedDiagram {
        diagram: d.clone(),
        orders,
    })
}

/// The order carried by the diagram's spec: Toeplitz diagrams use the
/// concatenation order of their n-symbols, other generators a declared or
/// default consecutive order.
pub fn ordered(d: &BratteliDiagram) -> Result<OrderedDiagram> {
    let spec = d.spec();
    if let Some(Generator::ErsToeplitz(seed)) = spec.map(|s| &s.generator) {
        let t = toeplitz_bratteli(seed, d.depth())?;
        return OrderedDiagram::with_orders(d.clone(), t.orders);
    }
    consecutive_order(d, spec.and_then(|s| s.order.as_ref()))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockFamily {
    pub level: usize,
    pub n0: usize,
    pub alphabet: usize,
    pub blocks: Vec<Vec<usize>>,
}

/// A_w^(n) for w ∈ V_n over S_{n0}.
pub fn blocks(o: &OrderedDiagram, n0: usize, n: usize) -> Result<Vec<BlockFamily>> {
    if n0 == 0 || n < n0 || n > o.depth() {
        return Err(Error::range(format!("need 1 <= n0 <= n <= {}", o.depth())));
    }
    let sizes: Vec<usize> = (0..o.diagram.level_size(n0)).map(|w| o.height(n0, w)).collect::<Result<_>>()?;
    let alphabet: usize = sizes.iter().sum();
    let mut next = 0;
    let base: Vec<Vec<usize>> = sizes
        .iter()
        .map(|&s| {
            let b = (next..next + s).collect();
            next += s;
            b
        })
        .collect();
    let mut out = vec![BlockFamily {
        level: n0,
        n0,
        alphabet,
        blocks: base,
    }];
    for k in n0..n {
        let prev = &out.last().unwrap().blocks;
        let mut fam = Vec::with_capacity(o.orders[k].len());
        for list in &o.orders[k] {
            let len: usize = list.iter().map(|&w| prev[w].len()).sum();
            if len > MAX_WORD_LEN {
                return Err(Error::Resource(format!("block at level {} has length {len}", k + 1)));
            }
            let mut word = Vec::with_capacity(len);
            for &w in list {
                word.extend_from_slice(&prev[w]);
            }
            fam.push(word);
        }
        out.push(BlockFamily {
            level: k + 1,
            n0,
            alphabet,
            blocks: fam,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecoveredIncidence {
    pub matrix: IntMatrix,
    /// Columns of the recovered matrix as classes of identical level-n blocks.
    pub classes: Vec<Vec<usize>>,
    pub merged: bool,
    /// Rows whose upper block did not parse uniquely into lower blocks; the
    /// count there comes from the order lists.
    pub ambiguous: Vec<usize>,
}

impl RecoveredIncidence {
    pub fn to_json(&self) -> Value {
        json!({
            "matrix": self.matrix.to_rows().iter().map(|r| r.iter().map(ToString::to_string).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "classes": self.classes,
            "merged": self.merged,
            "ambiguous": self.ambiguous,
        })
    }
}

/// Counts occurrences of the level-n blocks in each level-(n+1) block by
/// parsing it as a concatenation of level-n blocks.
pub fn incidence_from_blocks(lower: &BlockFamily, upper: &BlockFamily, orders: Option<&[Vec<usize>]>) -> RecoveredIncidence {
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut class_of = vec![0; lower.blocks.len()];
    for (w, b) in lower.blocks.iter().enumerate() {
        match classes.iter().position(|c| lower.blocks[c[0]] == *b) {
            Some(i) => {
                classes[i].push(w);
                class_of[w] = i;
            }
            None => {
                class_of[w] = classes.len();
                classes.push(vec![w]);
            }
        }
    }
    let reps: Vec<&[usize]> = classes.iter().map(|c| lower.blocks[c[0]].as_slice()).collect();
    let mut m = IntMatrix::zeros(upper.blocks.len(), classes.len());
    let mut ambiguous = Vec::new();
    for (v, word) in upper.blocks.iter().enumerate() {
        match unique_parse(word, &reps) {
            Some(parts) => {
                for c in parts {
                    let x = m.get(v, c) + 1u32;
                    m.set(v, c, x);
                }
            }
            None => {
                ambiguous.push(v);
                if let Some(list) = orders.and_then(|o| o.get(v)) {
                    for &w in list {
                        let c = class_of[w];
                        let x = m.get(v, c) + 1u32;
                        m.set(v, c, x);
                    }
                }
            }
        }
    }
    RecoveredIncidence {
        merged: classes.len() < lower.blocks.len(),
        matrix: m,
        classes,
        ambiguous,
    }
}

/// The unique factorization of `word` into the given pieces, if there is
/// exactly one.
fn unique_parse(word: &[usize], pieces: &[&[usize]]) -> Option<Vec<usize>> {
    let n = word.len();
    // ways[i]: number of parses of word[i..], capped at 2
    let mut ways = vec![0u8; n + 1];
    let mut choice = vec![usize::MAX; n + 1];
    ways[n] = 1;
    for i in (0..n).rev() {
        for (c, p) in pieces.iter().enumerate() {
            let j = i + p.len();
            if !p.is_empty() && j <= n && ways[j] > 0 && word[i..j] == **p {
                ways[i] = (ways[i] + ways[j]).min(2);
                choice[i] = c;
            }
        }
    }
    if ways[0] != 1 {
        return None;
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let c = choice[i];
        out.push(c);
        i += pieces[c].len();
    }
    Some(out)
}

/// Extends a path upward until it has `radius` paths on each side in its
/// tower, choosing at each level the incoming edge nearest the middle.
fn center(o: &OrderedDiagram, p: &Path, radius: usize) -> Result<Path> {
    let mut p = p.clone();
    loop {
        let top = p.len();
        let pos = o.rank(&p)?;
        let h = o.height(top, p.end())?;
        let room = pos.min(h - 1 - pos);
        if room >= radius {
            return Ok(p);
        }
        if top == o.depth() {
            return Err(Error::range(format!(
                "radius {radius} exceeds the materialized depth; max feasible radius is {room}"
            )));
        }
        let mut best: Option<(usize, usize, usize)> = None;
        for (u, list) in o.orders[top].iter().enumerate() {
            let hu = o.height(top + 1, u)?;
            let mut offset = 0;
            for (j, &w) in list.iter().enumerate() {
                if w == p.end() {
                    let at = offset + pos;
                    let r = at.min(hu - 1 - at);
                    if best.is_none_or(|b| r > b.0) {
                        best = Some((r, u, j));
                    }
                }
                offset += o.height(top, w)?;
            }
        }
        let (_, u, j) = best.ok_or_else(|| Error::input(format!("vertex {} at level {top} has no successor", p.end())))?;
        p.vertices.push(u);
        p.edges.push(j);
    }
}

/// ψ_{n0} along the orbit of `start`: symbols of φ^i(start) for
/// i = -radius..=radius.
pub fn code_orbit(o: &OrderedDiagram, n0: usize, start: &Path, radius: usize) -> Result<Vec<usize>> {
    o.validate(start)?;
    if n0 == 0 || n0 > start.len() {
        return Err(Error::range(format!("n0 = {n0} outside 1..={}", start.len())));
    }
    let p = center(o, start, radius)?;
    let mut back = Vec::with_capacity(radius);
    let mut cur = p.clone();
    for _ in 0..radius {
        cur = match o.predecessor(&cur)? {
            Step::Next(q) => q,
            Step::Extremal => unreachable!("centered path has room"),
        };
        back.push(o.symbol(&cur, n0)?);
    }
    back.reverse();
    back.push(o.symbol(&p, n0)?);
    let mut cur = p;
    for _ in 0..radius {
        cur = match o.successor(&cur)? {
            Step::Next(q) => q,
            Step::Extremal => unreachable!("centered path has room"),
        };
        back.push(o.symbol(&cur, n0)?);
    }
    Ok(back)
}

/// Forward orbit of the minimal path into v at `level`, up to the maximal one.
pub fn orbit(o: &OrderedDiagram, level: usize, v: usize) -> Result<Vec<Path>> {
    let mut cur = o.min_path(level, v)?;
    let h = o.height(level, v)?;
    let mut out = Vec::with_capacity(h);
    loop {
        out.push(cur.clone());
        match o.successor(&cur)? {
            Step::Next(q) => cur = q,
            Step::Extremal => return Ok(out),
        }
        if out.len() > h {
            return Err(Error::Convergence("orbit longer than the tower height".into()));
        }
    }
}

/// Whitespace-separated symbols, or packed alphanumerics when every
/// symbol is below 62.
pub fn format_word(word: &[usize], compact: bool) -> String {
    const DIGITS: &[u8] = b"0123456789abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
    if compact && word.iter().all(|&s| s < DIGITS.len()) {
        word.iter().map(|&s| DIGITS[s] as char).collect()
    } else {
        word.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
    }
}

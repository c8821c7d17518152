//! Toeplitz sequences built from partially filled periodic blocks.
//!
//! `A_0` is a seed block over symbols and holes; `A_n` is `λ_n` copies of
//! `A_{n-1}` with the holes listed for stage n filled in.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::expr::EntryExpr;
use crate::linalg::IntMatrix;

pub type Cell = Option<u32>;

/// Blocks longer than this are refused.
pub const MAX_BLOCK_LEN: usize = 20_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct ToeplitzSeed {
    /// λ_n for n >= 1; λ_0 is the seed length.
    pub lambda: EntryExpr,
    pub block: Vec<Cell>,
    /// Per stage n >= 1 (index n-1): (position in A_n, symbol).
    pub fills: Vec<Vec<(usize, u32)>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stage {
    pub n: usize,
    pub block: Vec<Cell>,
    /// First hole position.
    pub l: usize,
    /// Distance from the last hole to the end of the block.
    pub k: usize,
}

impl Stage {
    pub fn p(&self) -> usize {
        self.block.len()
    }
}

impl ToeplitzSeed {
    pub fn new(lambda: EntryExpr, block: Vec<Cell>, fills: Vec<Vec<(usize, u32)>>) -> Result<Self> {
        let s = ToeplitzSeed { lambda, block, fills };
        s.check_seed()?;
        Ok(s)
    }

    /// A seed whose fill rule is generated: for λ >= 3 every copy but the
    /// middle one is filled, for λ = 2 the filled copy alternates. Fill
    /// symbols cycle through the symbols of the seed.
    pub fn generated(lambda: EntryExpr, block: Vec<Cell>, stages: usize) -> Result<Self> {
        let mut s = ToeplitzSeed {
            lambda,
            block,
            fills: Vec::new(),
        };
        s.check_seed()?;
        let mut symbols: Vec<u32> = s.block.iter().flatten().copied().collect();
        symbols.sort_unstable();
        symbols.dedup();
        let mut cur = s.block.clone();
        for n in 1..=stages {
            let lam = s.lambda_at(n)?;
            let p = cur.len();
            let keep = if lam >= 3 { lam / 2 } else if n % 2 == 1 { 0 } else { 1 };
            let sym = symbols[n % symbols.len()];
            let mut fills = Vec::new();
            let mut next = Vec::with_capacity(p * lam);
            for c in 0..lam {
                for (i, cell) in cur.iter().enumerate() {
                    if cell.is_none() && c != keep {
                        fills.push((c * p + i, sym));
                        next.push(Some(sym));
                    } else {
                        next.push(*cell);
                    }
                }
            }
            s.fills.push(fills);
            cur = next;
            if cur.len() > MAX_BLOCK_LEN {
                return Err(Error::Resource(format!("Toeplitz block at stage {n} exceeds {MAX_BLOCK_LEN} cells")));
            }
        }
        Ok(s)
    }

    fn check_seed(&self) -> Result<()> {
        let b = &self.block;
        if b.len() < 3 {
            return Err(Error::input("Toeplitz seed block needs length >= 3"));
        }
        if b[0].is_none() || b[b.len() - 1].is_none() {
            return Err(Error::input("Toeplitz seed block must have filled first and last positions"));
        }
        if b.iter().all(Option::is_some) {
            return Err(Error::input("Toeplitz seed block needs at least one hole"));
        }
        Ok(())
    }

    /// λ_0 = |A_0|, λ_n from the rule for n >= 1.
    pub fn lambda_at(&self, n: usize) -> Result<usize> {
        if n == 0 {
            return Ok(self.block.len());
        }
        let v = self.lambda.eval(n as u64)?;
        let l = v
            .to_usize()
            .ok_or_else(|| Error::Resource(format!("λ_{n} = {v} too large")))?;
        if l < 2 {
            return Err(Error::input(format!("λ_{n} = {l} but λ_n >= 2 is required")));
        }
        Ok(l)
    }

    pub fn stages(&self, upto: usize) -> Result<Vec<Stage>> {
        if upto > self.fills.len() {
            return Err(Error::range(format!(
                "stage {upto} requested but fill rules cover stages 1..{}",
                self.fills.len()
            )));
        }
        let mut out = vec![make_stage(0, self.block.clone())?];
        for n in 1..=upto {
            let lam = self.lambda_at(n)?;
            let prev = &out[n - 1].block;
            if prev.len().saturating_mul(lam) > MAX_BLOCK_LEN {
                return Err(Error::Resource(format!("Toeplitz block at stage {n} exceeds {MAX_BLOCK_LEN} cells")));
            }
            let mut next: Vec<Cell> = Vec::with_capacity(prev.len() * lam);
            for _ in 0..lam {
                next.extend_from_slice(prev);
            }
            for &(pos, sym) in &self.fills[n - 1] {
                match next.get(pos) {
                    Some(None) => next[pos] = Some(sym),
                    Some(Some(_)) => {
                        return Err(Error::input(format!("stage {n}: fill position {pos} is not a hole")))
                    }
                    None => {
                        return Err(Error::input(format!(
                            "stage {n}: fill position {pos} outside block of length {}",
                            next.len()
                        )))
                    }
                }
            }
            out.push(make_stage(n, next)?);
        }
        Ok(out)
    }

    pub fn from_json(lambda: EntryExpr, v: &Value) -> Result<Self> {
        let block = v
            .get("block")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::input("toeplitz.block must be an array"))?
            .iter()
            .map(|c| match c {
                Value::Null => Ok(None),
                Value::Number(n) if n.is_u64() => Ok(Some(n.as_u64().unwrap() as u32)),
                _ => Err(Error::input("toeplitz.block cells are symbols (integers) or null holes")),
            })
            .collect::<Result<Vec<_>>>()?;
        let fills = match v.get("fills") {
            Some(Value::Array(stages)) => stages
                .iter()
                .map(|st| {
                    st.as_array()
                        .ok_or_else(|| Error::input("toeplitz.fills entries must be arrays"))?
                        .iter()
                        .map(|pair| {
                            let p = pair.as_array().filter(|p| p.len() == 2);
                            let pos = p.and_then(|p| p[0].as_u64());
                            let sym = p.and_then(|p| p[1].as_u64());
                            match (pos, sym) {
                                (Some(a), Some(b)) => Ok((a as usize, b as u32)),
                                _ => Err(Error::input("toeplitz fill must be [position, symbol]")),
                            }
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?,
            Some(Value::Object(o)) if o.get("rule").and_then(Value::as_str) == Some("generated") => {
                let stages = o.get("stages").and_then(Value::as_u64).unwrap_or(6) as usize;
                return ToeplitzSeed::generated(lambda, block, stages);
            }
            _ => return Err(Error::input("toeplitz.fills must be a list of per-stage fill lists")),
        };
        ToeplitzSeed::new(lambda, block, fills)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "block": self.block,
            "fills": self.fills.iter().map(|st| st.iter().map(|&(p, s)| json!([p, s])).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }
}

fn make_stage(n: usize, block: Vec<Cell>) -> Result<Stage> {
    let p = block.len();
    if block[0].is_none() || block[p - 1].is_none() {
        return Err(Error::input(format!("stage {n}: first and last positions must stay filled")));
    }
    let first = block.iter().position(Option::is_none);
    let last = block.iter().rposition(Option::is_none);
    match (first, last) {
        (Some(l), Some(h)) => Ok(Stage { n, block, l, k: p - h }),
        _ => Err(Error::input(format!("stage {n}: no hole remains"))),
    }
}

/// The stage-n periodic word at position i.
fn omega(stage: &Stage, i: i64) -> Cell {
    let p = stage.p() as i64;
    stage.block[i.rem_euclid(p) as usize]
}

/// ω on [-radius, radius], read off stage `stage`.
pub fn toeplitz_window(seed: &ToeplitzSeed, stage: usize, radius: usize) -> Result<Vec<u32>> {
    let stages = seed.stages(stage)?;
    let st = &stages[stage];
    if radius + 1 > st.l || radius + 1 > st.k {
        let feasible = st.l.min(st.k).saturating_sub(1);
        return Err(Error::range(format!(
            "stage {stage} determines ω only on [-{}, {}]; radius {radius} needs a later stage (max feasible radius {feasible})",
            st.k - 1,
            st.l - 1
        )));
    }
    let r = radius as i64;
    Ok((-r..=r)
        .map(|i| omega(st, i).expect("window inside determined range"))
        .collect())
}

/// Toeplitz–Bratteli diagram read off stage `depth + 1`: level n holds
/// the distinct aligned n-blocks (n-symbols).
#[derive(Clone, Debug)]
pub struct ToeplitzDiagram {
    /// F̃_0 .. F̃_{depth-1}.
    pub matrices: Vec<IntMatrix>,
    /// `orders[n][v]`: sources of vertex v at level n+1, in concatenation order.
    pub orders: Vec<Vec<Vec<usize>>>,
    /// `symbols[n-1][v]`: the n-symbol of vertex v at level n.
    pub symbols: Vec<Vec<Vec<Cell>>>,
    pub periods: Vec<usize>,
}

pub fn toeplitz_bratteli(seed: &ToeplitzSeed, depth: usize) -> Result<ToeplitzDiagram> {
    if depth < 1 {
        return Err(Error::range("depth must be >= 1"));
    }
    let stages = seed.stages(depth + 1)?;
    let top = &stages[depth + 1].block;
    let periods: Vec<usize> = stages.iter().map(Stage::p).collect();
    // index[n-1]: symbol -> vertex; seq[n-1]: vertex of each aligned n-block
    let mut symbols: Vec<Vec<Vec<Cell>>> = Vec::new();
    let mut seqs: Vec<Vec<usize>> = Vec::new();
    for n in 1..=depth {
        let p = periods[n];
        let mut index: BTreeMap<&[Cell], usize> = BTreeMap::new();
        let mut syms = Vec::new();
        let mut seq = Vec::new();
        for chunk in top.chunks(p) {
            let next = index.len();
            let id = *index.entry(chunk).or_insert_with(|| {
                syms.push(chunk.to_vec());
                next
            });
            seq.push(id);
        }
        symbols.push(syms);
        seqs.push(seq);
    }
    let mut matrices = Vec::new();
    let mut orders = Vec::new();
    let p1 = BigUint::from(periods[1]);
    matrices.push(IntMatrix::column(vec![p1; symbols[0].len()]));
    orders.push(vec![vec![0; periods[1]]; symbols[0].len()]);
    for n in 1..depth {
        let lam = periods[n + 1] / periods[n];
        let rows = symbols[n].len();
        let cols = symbols[n - 1].len();
        let mut m = IntMatrix::zeros(rows, cols);
        let mut ord = vec![Vec::new(); rows];
        for (pos, &v) in seqs[n].iter().enumerate() {
            if !ord[v].is_empty() {
                continue;
            }
            let sources = &seqs[n - 1][pos * lam..(pos + 1) * lam];
            for &w in sources {
                let c = m.get(v, w) + 1u32;
                m.set(v, w, c);
            }
            ord[v] = sources.to_vec();
        }
        matrices.push(m);
        orders.push(ord);
    }
    Ok(ToeplitzDiagram {
        matrices,
        orders,
        symbols,
        periods,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed2(stages: usize) -> ToeplitzSeed {
        ToeplitzSeed::generated(EntryExpr::constant(2), vec![Some(0), None, Some(1)], stages).unwrap()
    }

    #[test]
    fn stage_lengths_and_ends() {
        let s = seed2(6);
        let st = s.stages(6).unwrap();
        for (n, stage) in st.iter().enumerate() {
            assert_eq!(stage.p(), 3 << n);
            assert!(stage.block[0].is_some() && stage.block[stage.p() - 1].is_some());
        }
    }

    #[test]
    fn window_is_stable_across_stages() {
        let s = seed2(10);
        let w6 = toeplitz_window(&s, 8, 5).unwrap();
        let w7 = toeplitz_window(&s, 10, 5).unwrap();
        assert_eq!(w6, w7);
        assert!(toeplitz_window(&s, 1, 40).is_err());
    }

    #[test]
    fn rejects_filling_a_filled_cell() {
        let r = ToeplitzSeed::new(EntryExpr::constant(2), vec![Some(0), None, Some(1)], vec![vec![(0, 1)]]);
        let s = r.unwrap();
        assert!(s.stages(1).is_err());
    }

    #[test]
    fn derived_diagram_has_equal_row_sums() {
        let s = seed2(8);
        let d = toeplitz_bratteli(&s, 6).unwrap();
        for n in 1..6 {
            let m = &d.matrices[n];
            for r in 0..m.rows() {
                assert_eq!(m.row_sum(r), BigUint::from(2u32));
            }
        }
    }
}

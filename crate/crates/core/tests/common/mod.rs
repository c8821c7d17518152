#![allow(dead_code)]

use bratteli::simplex::{diameter_dstar, polytope, product_matrix, verify_trace, MeasureTrace};
use bratteli::symbolic::{consecutive_order, Step};
use bratteli::{BratteliDiagram, IntMatrix, Rat};
use num_bigint::{BigInt, BigUint};
use num_traits::Zero;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Rank <= 4, entries <= 5, depth in 2..=8, no sinks or sourceless vertices.
pub fn random_diagram(rng: &mut impl Rng) -> BratteliDiagram {
    let depth = rng.gen_range(2..=8);
    let sizes: Vec<usize> = (0..depth).map(|_| rng.gen_range(1..=4)).collect();
    let mut ms = vec![IntMatrix::from_u64(&(0..sizes[0]).map(|_| vec![rng.gen_range(1..=5)]).collect::<Vec<_>>())];
    for n in 1..depth {
        let (r, c) = (sizes[n], sizes[n - 1]);
        let mut rows: Vec<Vec<u64>> = (0..r)
            .map(|_| (0..c).map(|_| if rng.gen_bool(0.4) { 0 } else { rng.gen_range(1..=5) }).collect())
            .collect();
        for row in rows.iter_mut() {
            if row.iter().all(|&x| x == 0) {
                row[rng.gen_range(0..c)] = rng.gen_range(1..=5);
            }
        }
        for w in 0..c {
            if rows.iter().all(|row| row[w] == 0) {
                rows[rng.gen_range(0..r)][w] = rng.gen_range(1..=5);
            }
        }
        ms.push(IntMatrix::from_u64(&rows));
    }
    BratteliDiagram::from_matrices(ms).expect("generated diagram is valid")
}

fn random_probability(rng: &mut impl Rng, k: usize) -> Vec<Rat> {
    let w: Vec<u64> = (0..k).map(|_| rng.gen_range(0..=6)).collect();
    let w = if w.iter().all(|&x| x == 0) { vec![1; k] } else { w };
    let total: u64 = w.iter().sum();
    w.iter().map(|&x| Rat::new(BigInt::from(x), BigInt::from(total))).collect()
}

/// A consistent trace obtained by pushing a random top distribution down.
pub fn random_trace(d: &BratteliDiagram, rng: &mut impl Rng) -> MeasureTrace {
    let top = d.depth();
    let mut levels = vec![random_probability(rng, d.level_size(top))];
    for n in (1..top).rev() {
        let next = d.stochastic_matrix(n).unwrap().transpose_mul_vec(levels.last().unwrap());
        levels.push(next);
    }
    levels.reverse();
    MeasureTrace::new(levels)
}

pub fn random_levels(d: &BratteliDiagram, rng: &mut impl Rng) -> Vec<usize> {
    let mut levels = vec![0];
    levels.extend((1..d.depth()).filter(|_| rng.gen_bool(0.5)));
    levels.push(d.depth());
    levels
}

pub fn row_stochastic(d: &BratteliDiagram) -> Result<(), String> {
    for n in 1..d.depth() {
        if !d.stochastic_matrix(n).unwrap().is_row_stochastic() {
            return Err(format!("F_{n} is not row-stochastic"));
        }
    }
    Ok(())
}

pub fn height_recursion(d: &BratteliDiagram) -> Result<(), String> {
    let root: Vec<BigUint> = d.incidence(0).unwrap().to_rows().into_iter().map(|r| r[0].clone()).collect();
    if d.heights(1).unwrap() != root.as_slice() {
        return Err("h^(1) differs from the root edges".into());
    }
    for n in 1..d.depth() {
        let h = d.incidence(n).unwrap().mul_vec(d.heights(n).unwrap());
        if d.heights(n + 1).unwrap() != h.as_slice() {
            return Err(format!("h^({}) differs from F̃_{n} h^({n})", n + 1));
        }
    }
    Ok(())
}

pub fn diameter_monotone(d: &BratteliDiagram) -> Result<(), String> {
    for n in 1..d.depth() {
        let mut prev: Option<Rat> = None;
        for m in 0..=d.depth() - n {
            let x = diameter_dstar(&polytope(d, n, m).unwrap());
            if let Some(p) = &prev {
                if x > *p {
                    return Err(format!("diameter grows at n = {n}, m = {m}: {p} -> {x}"));
                }
            }
            prev = Some(x);
        }
    }
    Ok(())
}

pub fn telescoping_coherent(d: &BratteliDiagram, levels: &[usize]) -> Result<(), String> {
    let t = d.telescope(levels).map_err(|e| e.to_string())?;
    for (k, &n) in levels.iter().enumerate().skip(1) {
        if t.heights(k).unwrap() != d.heights(n).unwrap() {
            return Err(format!("heights differ at telescoped level {k} (original {n})"));
        }
    }
    for k in 1..levels.len() - 1 {
        let (a, b) = (levels[k], levels[k + 1]);
        if *t.stochastic_matrix(k).unwrap() != product_matrix(d, a, b - a - 1).unwrap() {
            return Err(format!("stochastic matrix differs at telescoped level {k}"));
        }
    }
    Ok(())
}

pub fn trace_preserved(d: &BratteliDiagram, trace: &MeasureTrace, levels: &[usize]) -> Result<(), String> {
    let v = verify_trace(d, trace).map_err(|e| e.to_string())?;
    if !v.ok() || !v.max_residual.is_zero() {
        return Err(format!("trace fails on the original diagram: residual {}", v.max_residual));
    }
    let t = d.telescope(levels).map_err(|e| e.to_string())?;
    let v = verify_trace(&t, &trace.restrict(&levels[1..])).map_err(|e| e.to_string())?;
    if !v.ok() || !v.max_residual.is_zero() {
        return Err(format!("trace fails after telescoping: residual {}", v.max_residual));
    }
    Ok(())
}

/// Successor then predecessor is the identity along every tower orbit, and
/// each orbit visits h_v paths.
pub fn orbits_invert(d: &BratteliDiagram, level: usize) -> Result<(), String> {
    let o = consecutive_order(d, None).map_err(|e| e.to_string())?;
    for (v, h) in d.heights(level).unwrap().iter().enumerate() {
        let mut p = o.min_path(level, v).map_err(|e| e.to_string())?;
        let mut count = BigUint::from(1u8);
        loop {
            match o.successor(&p).map_err(|e| e.to_string())? {
                Step::Extremal => break,
                Step::Next(q) => {
                    match o.predecessor(&q).map_err(|e| e.to_string())? {
                        Step::Next(back) if back == p => {}
                        _ => return Err(format!("predecessor does not invert successor at vertex {v}")),
                    }
                    p = q;
                    count += 1u8;
                }
            }
        }
        if p != o.max_path(level, v).map_err(|e| e.to_string())? {
            return Err(format!("orbit of vertex {v} does not end at the maximal path"));
        }
        if count != *h {
            return Err(format!("orbit of vertex {v} has {count} paths, height {h}"));
        }
    }
    Ok(())
}

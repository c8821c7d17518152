//! Vertex subdiagrams, the extension finiteness test and extension masses.

use num_traits::{One, Zero};
use serde_json::{json, Value};

use crate::diagram::BratteliDiagram;
use crate::ergodicity::{block_outflow, Certificate, ChainStructure, Status, Verdict};
use crate::error::{Error, Result};
use crate::linalg::{rat_int, IntMatrix, Rat};
use crate::series::{analyze, Fate, VertexSelection};
use crate::simplex::{verify_trace, MeasureTrace};

#[derive(Clone, Debug)]
pub struct VertexSubdiagram {
    pub selection: VertexSelection,
    /// W_1..W_depth.
    pub levels: Vec<Vec<usize>>,
    /// The induced diagram: F̃'_0 is the restricted root column.
    pub diagram: BratteliDiagram,
}

impl VertexSubdiagram {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// h'^(n) for 1 <= n <= depth.
    pub fn heights(&self, n: usize) -> Result<&[num_bigint::BigUint]> {
        self.diagram.heights(n)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "levels": self.levels,
            "matrices": self.diagram.matrices().iter().map(|m| m.to_rows().iter()
                .map(|r| r.iter().map(ToString::to_string).collect::<Vec<_>>()).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        })
    }
}

pub fn restrict(d: &BratteliDiagram, sel: &VertexSelection, depth: usize) -> Result<VertexSubdiagram> {
    if depth == 0 || depth > d.depth() {
        return Err(Error::range(format!("subdiagram depth must be in 1..={}", d.depth())));
    }
    let mut levels = Vec::with_capacity(depth);
    for n in 1..=depth {
        let size = d.level_size(n);
        let w = sel.at(n, size).ok_or_else(|| Error::InvalidSubdiagram {
            level: n,
            message: format!("selection does not resolve on |V_{n}| = {size}"),
        })?;
        if w.is_empty() {
            return Err(Error::InvalidSubdiagram { level: n, message: "empty vertex set".into() });
        }
        if let Some(&v) = w.iter().find(|&&v| v >= size) {
            return Err(Error::InvalidSubdiagram { level: n, message: format!("vertex {v} outside V_{n}") });
        }
        levels.push(w);
    }
    if levels.iter().enumerate().all(|(i, w)| w.len() == d.level_size(i + 1)) {
        return Err(Error::InvalidSubdiagram { level: 1, message: "W_n = V_n at every level".into() });
    }
    let mut matrices = Vec::with_capacity(depth);
    matrices.push(d.incidence(0)?.submatrix(&levels[0], &[0]));
    for n in 1..depth {
        matrices.push(d.incidence(n)?.submatrix(&levels[n], &levels[n - 1]));
    }
    let diagram = BratteliDiagram::from_matrices_capped(matrices, d.max_digits()).map_err(|e| match e {
        Error::InvalidDiagram { level, message, .. } => Error::InvalidSubdiagram { level, message },
        other => other,
    })?;
    Ok(VertexSubdiagram {
        selection: sel.clone(),
        levels,
        diagram,
    })
}

/// Σ_n max_{v ∈ W_{n+1}} Σ_{w ∉ W_n} f_vw < ∞ certifies a finite extension.
pub fn extension_finiteness(d: &BratteliDiagram, sel: &VertexSelection, window: usize) -> Result<Verdict> {
    let window = window.min(d.depth());
    if window < 2 {
        return Err(Error::range("extension test needs window >= 2"));
    }
    restrict(d, sel, window)?;
    let ev = analyze(block_outflow(d, sel, window)?);
    let mut v = Verdict::new("extension_finiteness", Status::Undetermined);
    match ev.fate() {
        Some(Fate::Converges) => {
            v.status = Status::Certified;
            v.certificate = ev.certificate.clone().map(Certificate::Series);
            v.notes.push("Certified-Finite".into());
        }
        Some(Fate::Diverges) => v.notes.push("Σ t_n diverges: the finiteness test does not apply".into()),
        None => v.notes.push("no certificate for Σ t_n".into()),
    }
    v.series.push(("t".into(), ev));
    Ok(v)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtensionMass {
    /// M_1, M_2, ...
    pub masses: Vec<Rat>,
    pub nondecreasing: bool,
    /// Heuristic: each of the last 5 ratios M_{N+1}/M_N exceeds 1 + 1/N.
    pub diverging_evidence: bool,
}

impl ExtensionMass {
    pub fn to_json(&self) -> Value {
        json!({
            "masses": self.masses.iter().map(ToString::to_string).collect::<Vec<_>>(),
            "nondecreasing": self.nondecreasing,
            "diverging_evidence": self.diverging_evidence,
        })
    }
}

/// M_N = Σ_{v ∈ W_N} (h_v^(N) / h'_v^(N)) q'_v^(N) for a verified trace on
/// the subdiagram.
pub fn extension_mass(d: &BratteliDiagram, sub: &VertexSubdiagram, sub_trace: &MeasureTrace) -> Result<ExtensionMass> {
    if sub_trace.len() > sub.depth() {
        return Err(Error::Dimension(format!(
            "trace has {} levels, subdiagram depth {}",
            sub_trace.len(),
            sub.depth()
        )));
    }
    let verdict = verify_trace(&sub.diagram, sub_trace)?;
    if !verdict.ok() {
        return Err(Error::input(format!(
            "trace is not consistent on the subdiagram (first failure {:?})",
            verdict.first_failure.map(|(n, r)| (n, r.to_string()))
        )));
    }
    let mut masses = Vec::with_capacity(sub_trace.len());
    for n in 1..=sub_trace.len() {
        let h = d.heights(n)?;
        let hs = sub.heights(n)?;
        let q = sub_trace.at(n).expect("checked length");
        let m: Rat = sub.levels[n - 1]
            .iter()
            .enumerate()
            .map(|(i, &v)| rat_int(&h[v]) / rat_int(&hs[i]) * &q[i])
            .sum();
        masses.push(m);
    }
    let nondecreasing = masses.windows(2).all(|w| w[0] <= w[1]);
    let k = masses.len();
    let diverging_evidence = k >= 6
        && (k - 6..k - 1).all(|i| {
            let n = i + 1;
            !masses[i].is_zero() && &masses[i + 1] / &masses[i] > Rat::one() + Rat::new(1.into(), (n as i64).into())
        });
    Ok(ExtensionMass {
        masses,
        nondecreasing,
        diverging_evidence,
    })
}

/// Uniform trace on a one-vertex-per-level subdiagram.
pub fn odometer_trace(sub: &VertexSubdiagram, levels: usize) -> Result<MeasureTrace> {
    if sub.levels[..levels.min(sub.depth())].iter().any(|w| w.len() != 1) {
        return Err(Error::input("odometer trace needs one vertex per level"));
    }
    Ok(MeasureTrace::new((0..levels.min(sub.depth())).map(|_| vec![Rat::one()]).collect()))
}

/// W_n = V_{n,i_n} along a chain; beyond the structure window the tail is
/// inferred from the last two levels.
pub fn chain_subdiagram(d: &BratteliDiagram, structure: &ChainStructure, chain: &[usize], depth: usize) -> Result<VertexSubdiagram> {
    let explicit = structure.vertices(chain)?;
    let sel = VertexSelection::new(explicit, None);
    let sel = match sel.tail_pattern(|n| d.level_size(n)) {
        Some((tail, _)) => VertexSelection::new(sel.explicit, Some(tail)),
        None => sel,
    };
    restrict(d, &sel, depth)
}

/// F̃'_n entries of a one-vertex-per-level subdiagram.
pub fn odometer_entries(sub: &VertexSubdiagram) -> Option<Vec<num_bigint::BigUint>> {
    sub.diagram
        .matrices()
        .iter()
        .skip(1)
        .map(|m: &IntMatrix| (m.rows() == 1 && m.cols() == 1).then(|| m.get(0, 0).clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ergodicity::{chain_partition_search, subdiagram_unique_ergodicity, ChainOutcome, Partition};
    use crate::expr::EntryExpr;
    use crate::linalg::rat;
    use crate::series::Idx;
    use crate::spec::{DiagramSpec, Generator};
    use num_bigint::BigUint;

    fn odometer3(depth: usize) -> BratteliDiagram {
        BratteliDiagram::materialize(&DiagramSpec::stationary(&[vec![3, 0], vec![1, 2]]).with_root(&[3, 3]), depth)
            .unwrap()
    }

    fn countable(depth: usize) -> BratteliDiagram {
        let g = Generator::Countable { a: EntryExpr::parse("n^3+2").unwrap() };
        BratteliDiagram::materialize(&DiagramSpec::new(g), depth).unwrap()
    }

    fn column(i: usize) -> VertexSelection {
        VertexSelection::new((1..=i).map(|n| vec![n]).collect(), Some(vec![Idx::Fixed(i)]))
    }

    #[test]
    fn restrictions() {
        let c = countable(8);
        let sub = restrict(&c, &VertexSelection::constant(vec![0]), 8).unwrap();
        let want: Vec<BigUint> = (1..8u64).map(|n| BigUint::from(n * n * n + 2)).collect();
        assert_eq!(odometer_entries(&sub).unwrap(), want);

        let p = BratteliDiagram::materialize(&DiagramSpec::new(Generator::Pascal), 6).unwrap();
        let sub = restrict(&p, &VertexSelection::constant(vec![0]), 6).unwrap();
        assert!(odometer_entries(&sub).unwrap().iter().all(|x| *x == BigUint::from(1u8)));

        let o = odometer3(6);
        let sub = restrict(&o, &VertexSelection::constant(vec![1]), 6).unwrap();
        assert!(odometer_entries(&sub).unwrap().iter().all(|x| *x == BigUint::from(2u8)));
    }

    #[test]
    fn invalid_restrictions() {
        let o = odometer3(6);
        // W_1 = {1}, W_2 = {0}: vertex 0 has no edge from 1
        let sel = VertexSelection::new(vec![vec![1], vec![0]], Some(vec![Idx::Fixed(0)]));
        assert!(matches!(restrict(&o, &sel, 4), Err(Error::InvalidSubdiagram { level: 2, .. })));
        assert!(restrict(&o, &VertexSelection::constant(vec![2]), 4).is_err());
        assert!(restrict(&o, &VertexSelection::constant(vec![0, 1]), 4).is_err());
        assert!(restrict(&o, &VertexSelection::constant(vec![]), 4).is_err());
    }

    #[test]
    fn finiteness_certificates() {
        let c = countable(20);
        for i in 0..5 {
            let v = extension_finiteness(&c, &column(i), 20).unwrap();
            assert!(v.is_certified(), "column {i}: {}", v.to_json());
            // t_n = n/(a_n+n) once the column is fixed
            let s = &v.series[0].1;
            for (n, t) in s.levels.iter().zip(&s.terms) {
                if *n > i + 1 {
                    let n = *n as i64;
                    assert_eq!(*t, rat(n, n * n * n + 2 + n));
                }
            }
        }
        let b2 = BratteliDiagram::materialize(&DiagramSpec::expression(&[&["n^2", "1"], &["1", "n^2"]]).unwrap(), 20)
            .unwrap();
        let v = extension_finiteness(&b2, &VertexSelection::constant(vec![0]), 20).unwrap();
        assert!(v.is_certified());
        assert_eq!(v.series[0].1.terms[3], rat(1, 17));
        let p = BratteliDiagram::materialize(&DiagramSpec::new(Generator::Pascal), 12).unwrap();
        let v = extension_finiteness(&p, &VertexSelection::constant(vec![0]), 12).unwrap();
        assert!(v.is_certified());
        assert!(v.series[0].1.terms.iter().all(Zero::is_zero));
    }

    #[test]
    fn extension_masses() {
        let o = odometer3(16);
        let sub = restrict(&o, &VertexSelection::constant(vec![0]), 16).unwrap();
        let m = extension_mass(&o, &sub, &odometer_trace(&sub, 16).unwrap()).unwrap();
        assert!(m.masses.iter().all(|x| *x == rat(1, 1)));
        assert!(!m.diverging_evidence);

        let sub = restrict(&o, &VertexSelection::constant(vec![1]), 16).unwrap();
        let m = extension_mass(&o, &sub, &odometer_trace(&sub, 16).unwrap()).unwrap();
        let mut want = rat(1, 1);
        for x in &m.masses {
            assert_eq!(*x, want);
            want *= rat(3, 2);
        }
        assert!(m.nondecreasing && m.diverging_evidence);

        let c = countable(20);
        let sub = restrict(&c, &VertexSelection::constant(vec![0]), 20).unwrap();
        let m = extension_mass(&c, &sub, &odometer_trace(&sub, 20).unwrap()).unwrap();
        assert!(m.nondecreasing && !m.diverging_evidence);
        // M_N <= Π_{n<N} (1 - t_n)^{-1} with t_n the finiteness terms
        let t = &extension_finiteness(&c, &VertexSelection::constant(vec![0]), 20).unwrap().series[0].1.terms;
        let mut bound = rat(1, 1);
        for (n, x) in m.masses.iter().enumerate().skip(1) {
            bound /= rat(1, 1) - &t[n - 1];
            assert!(*x <= bound, "N={}", n + 1);
        }

        let bad = MeasureTrace::new(vec![vec![rat(1, 2)]]);
        assert!(extension_mass(&c, &sub, &bad).is_err());
    }

    #[test]
    fn chain_subdiagrams_on_countable_family() {
        let window = 8;
        let c = countable(20);
        let ChainOutcome::Found { structure, .. } = chain_partition_search(&c, window, &rat(10, 1)).unwrap() else {
            panic!("expected chains");
        };
        let mut seen = 0;
        for chain in structure.chains() {
            let short = chain_subdiagram(&c, &structure, &chain, window).unwrap();
            if short.levels[window - 1] == short.levels[window - 2] {
                let sub = chain_subdiagram(&c, &structure, &chain, 20).unwrap();
                seen += 1;
                let fin = extension_finiteness(&c, &sub.selection, 20).unwrap();
                assert!(fin.is_certified(), "{:?}", sub.levels);
                let ue = subdiagram_unique_ergodicity(&c, &Partition::new(vec![sub.selection.clone()]), 1, 20).unwrap();
                assert!(ue.is_certified());
            }
        }
        assert!(seen >= window - 1);
        let bad = vec![0; window];
        let mut bad2 = bad.clone();
        bad2[1] = 99;
        assert!(chain_subdiagram(&c, &structure, &bad2, 20).is_err());
    }
}

//! Worked examples with their known facts, each checkable by an analysis
//! in this crate.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde_json::{json, Value};

use crate::diagram::BratteliDiagram;
use crate::ergodicity::{
    chain_partition_search, min_entry_divergence, replay_certificate, unique_ergodicity_search, ChainOutcome,
};
use crate::error::{Error, Result};
use crate::expr::EntryExpr;
use crate::linalg::{rat, Rat};
use crate::series::{Idx, VertexSelection};
use crate::simplex::{cluster_extremes, product_matrix, verify_trace, MeasureTrace};
use crate::spec::{DiagramSpec, Generator};
use crate::stationary::{class_graph, distinguished_indices, distinguished_measure, DEFAULT_TOL};
use crate::subdiagram::extension_finiteness;
use crate::toeplitz::ToeplitzSeed;

#[derive(Clone, Debug, PartialEq)]
pub enum Check {
    UniquelyErgodic { eps: Vec<Rat>, budget: usize },
    MinEntryDiverges { window: usize },
    /// Entry (v, w) of F_n equals num(n)/den(n) for the listed pairs.
    EntryRule { pairs: Vec<(usize, usize, i64, i64, i64)>, upto: usize },
    SeparatedClusters { n: usize, m: usize, count: usize },
    ClusterCounts { m: usize, upto: usize },
    DistinguishedClasses(Vec<Vec<usize>>),
    StationaryTrace(Vec<Rat>),
    PowerClosedForm { upto: usize },
    PascalTraces { ps: Vec<Rat>, levels: usize },
    NoChainPartition { windows: Vec<usize> },
    ColumnsFinite { count: usize, window: usize },
    ProductBound { upto: usize },
    Ers,
}

#[derive(Clone, Debug)]
pub struct Fact {
    pub claim: String,
    pub check: Check,
}

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub spec: DiagramSpec,
    pub facts: Vec<Fact>,
}

#[derive(Clone, Debug)]
pub struct FactResult {
    pub claim: String,
    pub holds: bool,
    pub detail: String,
}

impl CatalogEntry {
    pub fn depth(&self) -> usize {
        self.spec.depth.unwrap_or(10)
    }

    pub fn diagram(&self) -> Result<BratteliDiagram> {
        BratteliDiagram::materialize(&self.spec, self.depth())
    }

    pub fn check(&self) -> Result<Vec<FactResult>> {
        let d = self.diagram()?;
        self.facts.iter().map(|f| check_fact(&d, f)).collect()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "name": self.name,
            "description": self.description,
            "spec": self.spec.to_json(),
            "facts": self.facts.iter().map(|f| f.claim.clone()).collect::<Vec<_>>(),
        })
    }
}

fn fact(claim: &str, check: Check) -> Fact {
    Fact {
        claim: claim.into(),
        check,
    }
}

fn check_fact(d: &BratteliDiagram, f: &Fact) -> Result<FactResult> {
    let (holds, detail) = match &f.check {
        Check::UniquelyErgodic { eps, budget } => {
            let v = unique_ergodicity_search(d, eps, *budget)?;
            let ok = match v.telescoping() {
                Some(c) => replay_certificate(d, c)?,
                None => false,
            };
            (ok, v.to_json().to_string())
        }
        Check::MinEntryDiverges { window } => {
            let v = min_entry_divergence(d, *window)?;
            (v.is_certified(), v.status.as_str().to_string())
        }
        Check::EntryRule { pairs, upto } => {
            let mut bad = Vec::new();
            for n in 1..=*upto {
                let f = d.stochastic_matrix(n)?;
                for &(v, w, a, b, c) in pairs {
                    let n = n as i64;
                    let want = rat(n * a + b, n + c);
                    if *f.get(v, w) != want {
                        bad.push(format!("n={n} ({v},{w})"));
                    }
                }
            }
            (bad.is_empty(), bad.join(", "))
        }
        Check::SeparatedClusters { n, m, count } => {
            let r = cluster_extremes(d, *n, *m, &rat(10, 1))?;
            (r.count() == *count && r.separated, format!("{} clusters, separated = {}", r.count(), r.separated))
        }
        Check::ClusterCounts { m, upto } => {
            let counts: Vec<usize> = (1..=*upto)
                .map(|n| Ok(cluster_extremes(d, n, *m, &rat(10, 1))?.count()))
                .collect::<Result<_>>()?;
            (counts.iter().enumerate().all(|(i, &c)| c == i + 2), format!("{counts:?}"))
        }
        Check::DistinguishedClasses(want) => {
            let g = class_graph(stationary_incidence(d)?)?;
            let got: Vec<Vec<usize>> = distinguished_indices(&g, DEFAULT_TOL)
                .into_iter()
                .map(|a| g.classes[a].vertices.clone())
                .collect();
            (got == *want, format!("{got:?}"))
        }
        Check::StationaryTrace(want) => {
            let g = class_graph(stationary_incidence(d)?)?;
            let ids = distinguished_indices(&g, DEFAULT_TOL);
            let mu = distinguished_measure(d, &g, ids[0])?;
            let t = mu.trace(d, d.depth())?;
            let ok = (1..=d.depth()).all(|n| t.at(n) == Some(want.as_slice())) && verify_trace(d, &t)?.ok();
            (ok, format!("{:?}", t.at(1).map(|q| q.iter().map(ToString::to_string).collect::<Vec<_>>())))
        }
        Check::PowerClosedForm { upto } => {
            let mut ok = true;
            for m in 1..=*upto {
                let g = product_matrix(d, 1, m - 1)?;
                let t = (0..m).fold(Rat::one(), |acc, _| acc * rat(2, 3));
                ok &= g.to_rows() == vec![vec![rat(1, 1), rat(0, 1)], vec![Rat::one() - &t, t]];
            }
            (ok, String::new())
        }
        Check::PascalTraces { ps, levels } => {
            let mut ok = true;
            for p in ps {
                let t = pascal_measure(p, *levels)?;
                let v = verify_trace(d, &t)?;
                ok &= v.ok() && v.max_residual.is_zero();
            }
            (ok, String::new())
        }
        Check::NoChainPartition { windows } => {
            let mut ok = true;
            for &w in windows {
                ok &= matches!(chain_partition_search(d, w, &rat(10, 1))?, ChainOutcome::NoAdmissiblePartition { .. });
            }
            (ok, String::new())
        }
        Check::ColumnsFinite { count, window } => {
            let mut ok = true;
            for i in 0..*count {
                ok &= extension_finiteness(d, &countable_column(i), *window)?.is_certified();
            }
            (ok, String::new())
        }
        Check::ProductBound { upto } => {
            let a = match d.spec().map(|s| &s.generator) {
                Some(Generator::Countable { a }) => a.clone(),
                _ => return Err(Error::input("product bound applies to the countable family")),
            };
            let (checked, bad) = countable_product_bound(d, &a, *upto)?;
            (bad.is_empty() && checked > 0, format!("{checked} pairs checked, violations {bad:?}"))
        }
        Check::Ers => {
            let r = d.ers_check();
            (r.ers, format!("identities verified: {:?}", r.identities_verified))
        }
    };
    Ok(FactResult {
        claim: f.claim.clone(),
        holds,
        detail,
    })
}

fn stationary_incidence(d: &BratteliDiagram) -> Result<&crate::linalg::IntMatrix> {
    crate::series::stationary_matrix(d).ok_or_else(|| Error::input("not a stationary diagram"))
}

pub fn example_b1() -> CatalogEntry {
    CatalogEntry {
        name: "b1",
        description: "2x2 diagram with incidence [[n,1],[1,n]]",
        spec: DiagramSpec::expression(&[&["n", "1"], &["1", "n"]]).expect("valid").with_depth(64),
        facts: vec![
            fact(
                "uniquely ergodic: a telescoping with vanishing row gaps exists",
                Check::UniquelyErgodic {
                    eps: vec![rat(1, 2), rat(1, 3), rat(1, 5), rat(1, 8)],
                    budget: 64,
                },
            ),
            fact("Σ min F_n diverges (harmonic)", Check::MinEntryDiverges { window: 30 }),
            fact(
                "F_n rows are (n/(n+1), 1/(n+1)) and (1/(n+1), n/(n+1))",
                Check::EntryRule {
                    pairs: vec![(0, 0, 1, 0, 1), (0, 1, 0, 1, 1), (1, 0, 0, 1, 1), (1, 1, 1, 0, 1)],
                    upto: 30,
                },
            ),
        ],
    }
}

pub fn example_b2() -> CatalogEntry {
    CatalogEntry {
        name: "b2",
        description: "2x2 diagram with incidence [[n^2,1],[1,n^2]]",
        spec: DiagramSpec::expression(&[&["n^2", "1"], &["1", "n^2"]]).expect("valid").with_depth(44),
        facts: vec![
            fact(
                "exactly two ergodic measures: two separated clusters from level 2",
                Check::SeparatedClusters { n: 2, m: 40, count: 2 },
            ),
            fact(
                "F_1 has equal rows, so level 1 sees a single point",
                Check::SeparatedClusters { n: 1, m: 40, count: 1 },
            ),
        ],
    }
}

pub fn stationary_3odometer() -> CatalogEntry {
    CatalogEntry {
        name: "odometer3",
        description: "stationary [[3,0],[1,2]] with root (3,3)",
        spec: DiagramSpec::stationary(&[vec![3, 0], vec![1, 2]]).with_root(&[3, 3]).with_depth(60),
        facts: vec![
            fact(
                "F^m = [[1,0],[1-(2/3)^m,(2/3)^m]]",
                Check::PowerClosedForm { upto: 20 },
            ),
            fact("distinguished classes {{0}}", Check::DistinguishedClasses(vec![vec![0]])),
            fact("unique finite measure has trace (1,0)", Check::StationaryTrace(vec![rat(1, 1), rat(0, 1)])),
            fact(
                "uniquely ergodic",
                Check::UniquelyErgodic {
                    eps: crate::ergodicity::default_eps(5),
                    budget: 64,
                },
            ),
        ],
    }
}

pub fn two_classes() -> CatalogEntry {
    CatalogEntry {
        name: "two-classes",
        description: "stationary [[2,0],[1,3]]: two distinguished classes",
        spec: DiagramSpec::stationary(&[vec![2, 0], vec![1, 3]]).with_depth(40),
        facts: vec![
            fact(
                "distinguished classes {{0},{1}}",
                Check::DistinguishedClasses(vec![vec![0], vec![1]]),
            ),
            fact("two separated clusters", Check::SeparatedClusters { n: 2, m: 30, count: 2 }),
        ],
    }
}

pub fn pascal() -> CatalogEntry {
    CatalogEntry {
        name: "pascal",
        description: "Pascal-graph diagram, V_n = {0..n}",
        spec: DiagramSpec::new(Generator::Pascal).with_depth(31),
        facts: vec![
            fact(
                "binomial measures are consistent traces",
                Check::PascalTraces {
                    ps: vec![rat(1, 2), rat(1, 3), rat(2, 5)],
                    levels: 30,
                },
            ),
            fact(
                "no admissible chain partition",
                Check::NoChainPartition { windows: (3..=10).collect() },
            ),
        ],
    }
}

pub fn trivial() -> CatalogEntry {
    CatalogEntry {
        name: "trivial",
        description: "one vertex per level, two edges",
        spec: DiagramSpec::stationary(&[vec![2]]).with_depth(12),
        facts: vec![fact("trace is (1)", Check::StationaryTrace(vec![rat(1, 1)]))],
    }
}

/// The countable family with column weights a_n. The rule is
/// accepted only if Σ n/(a_n+n) is certified convergent.
pub fn countable_example(a: EntryExpr) -> Result<CatalogEntry> {
    let spec = DiagramSpec::new(Generator::Countable { a: a.clone() }).with_depth(31);
    let probe = BratteliDiagram::materialize(&spec, 12)?;
    let v = extension_finiteness(&probe, &VertexSelection::constant(vec![0]), 12)?;
    if !v.is_certified() {
        return Err(Error::input(format!(
            "Σ n/(a_n+n) is not certified convergent for a_n = {a}: {}",
            v.notes.join("; ")
        )));
    }
    Ok(CatalogEntry {
        name: "countable",
        description: "countably many ergodic measures supported on column odometers",
        spec,
        facts: vec![
            fact("n+1 separated clusters at level n", Check::ClusterCounts { m: 25, upto: 4 }),
            fact("column subdiagrams extend to finite measures", Check::ColumnsFinite { count: 5, window: 30 }),
            fact("g^(n+m,n) product lower bound", Check::ProductBound { upto: 12 }),
        ],
    })
}

pub fn ers_toeplitz(lambda: EntryExpr, block: Vec<Option<u32>>, depth: usize) -> Result<CatalogEntry> {
    let seed = ToeplitzSeed::generated(lambda, block, depth + 1)?;
    Ok(CatalogEntry {
        name: "toeplitz",
        description: "Toeplitz-Bratteli diagram from a seed block",
        spec: DiagramSpec::new(Generator::ErsToeplitz(seed)).with_depth(depth),
        facts: vec![fact("equal row sums", Check::Ers)],
    })
}

/// W^(i): W_n = {min(n, i)}.
pub fn countable_column(i: usize) -> VertexSelection {
    VertexSelection::new((1..=i).map(|n| vec![n]).collect(), Some(vec![Idx::Fixed(i)]))
}

/// q_i^(n) = C(n,i) p^i (1-p)^(n-i) on V_n = {0..n}, n = 1..=levels.
pub fn pascal_measure(p: &Rat, levels: usize) -> Result<MeasureTrace> {
    if *p <= Rat::zero() || *p >= Rat::one() {
        return Err(Error::range(format!("p = {p} must lie in (0,1)")));
    }
    let q = Rat::one() - p;
    let out = (1..=levels)
        .map(|n| {
            let mut c = BigInt::one();
            (0..=n)
                .map(|i| {
                    let v = Rat::from_integer(c.clone()) * pow(p, i) * pow(&q, n - i);
                    c = c.clone() * BigInt::from(n - i) / BigInt::from(i + 1);
                    v
                })
                .collect()
        })
        .collect();
    Ok(MeasureTrace::new(out))
}

fn pow(x: &Rat, k: usize) -> Rat {
    (0..k).fold(Rat::one(), |acc, _| acc * x)
}

/// Checks g_vw^(n+m,n) >= Π_{s=n}^{n+m} a_s/(a_s+s) for v = w <= n and for
/// v in n+1..=n+m+1, w = n, over n >= 1 and n+m <= upto. Returns the number
/// of pairs checked and the violations.
pub fn countable_product_bound(
    d: &BratteliDiagram,
    a: &EntryExpr,
    upto: usize,
) -> Result<(usize, Vec<(usize, usize, usize, usize)>)> {
    let mut checked = 0;
    let mut bad = Vec::new();
    for n in 1..upto {
        let mut bound = Rat::one();
        for m in 0..=upto - n {
            if n + m + 1 > d.depth() {
                break;
            }
            let s = n + m;
            let av = Rat::from_integer(BigInt::from(a.eval(s as u64)?));
            bound *= &av / (&av + Rat::from_integer(BigInt::from(s)));
            let g = product_matrix(d, n, m)?;
            let pairs = (0..=n).map(|v| (v, v)).chain((n + 1..=n + m + 1).map(|v| (v, n)));
            for (v, w) in pairs {
                checked += 1;
                if *g.get(v, w) < bound {
                    bad.push((n, m, v, w));
                }
            }
        }
    }
    Ok((checked, bad))
}

pub fn names() -> Vec<&'static str> {
    vec!["b1", "b2", "odometer3", "two-classes", "pascal", "countable", "toeplitz", "trivial"]
}

pub fn entry(name: &str) -> Result<CatalogEntry> {
    Ok(match name {
        "b1" => example_b1(),
        "b2" => example_b2(),
        "odometer3" => stationary_3odometer(),
        "two-classes" => two_classes(),
        "pascal" => pascal(),
        "countable" => countable_example(EntryExpr::parse("n^3+2")?)?,
        "toeplitz" => ers_toeplitz(EntryExpr::constant(2), vec![Some(0), None, Some(1)], 8)?,
        "trivial" => trivial(),
        other => return Err(Error::input(format!("unknown catalog entry '{other}'; known: {}", names().join(", ")))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_values() {
        let t = pascal_measure(&rat(1, 2), 3).unwrap();
        assert_eq!(t.at(3).unwrap(), &[rat(1, 8), rat(3, 8), rat(3, 8), rat(1, 8)]);
        let t = pascal_measure(&rat(1, 3), 1).unwrap();
        assert_eq!(t.at(1).unwrap(), &[rat(2, 3), rat(1, 3)]);
        let t = pascal_measure(&rat(1, 2), 9).unwrap();
        for n in 1..=9 {
            let q = t.at(n).unwrap();
            assert!((0..=n).all(|i| q[i] == q[n - i]));
        }
        assert!(pascal_measure(&rat(0, 1), 3).is_err());
        assert!(pascal_measure(&rat(3, 2), 3).is_err());
    }

    #[test]
    fn countable_rule_acceptance() {
        assert!(countable_example(EntryExpr::parse("n^3+2").unwrap()).is_ok());
        assert!(countable_example(EntryExpr::constant(1)).is_err());
    }

    #[test]
    fn product_bound_on_small_window() {
        let e = countable_example(EntryExpr::parse("n^3+2").unwrap()).unwrap();
        let d = BratteliDiagram::materialize(&e.spec, 10).unwrap();
        let a = EntryExpr::parse("n^3+2").unwrap();
        let (checked, bad) = countable_product_bound(&d, &a, 8).unwrap();
        assert!(checked > 0);
        assert!(bad.is_empty(), "{bad:?}");
    }

    #[test]
    fn light_entries_hold() {
        for name in ["b1", "odometer3", "two-classes", "trivial", "toeplitz"] {
            let e = entry(name).unwrap();
            for r in e.check().unwrap() {
                assert!(r.holds, "{name}: {} ({})", r.claim, r.detail);
            }
        }
        assert!(entry("nope").is_err());
        assert_eq!(names().len(), 8);
    }
}

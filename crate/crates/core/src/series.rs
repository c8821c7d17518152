//! Closed-form tail models of stochastic entries and the series
//! certificates built on them.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

use crate::diagram::BratteliDiagram;
use crate::linalg::{IntMatrix, Rat};
use crate::poly::{Comparison, Poly, RatFn};
use crate::spec::Generator;

/// A vertex index that stays meaningful as levels grow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Idx {
    Fixed(usize),
    /// Counted down from the last vertex of the level.
    FromTop(usize),
}

impl Idx {
    pub fn resolve(self, size: usize) -> Option<usize> {
        match self {
            Idx::Fixed(k) => (k < size).then_some(k),
            Idx::FromTop(c) => size.checked_sub(c + 1),
        }
    }
}

impl std::fmt::Display for Idx {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Idx::Fixed(k) => write!(f, "{k}"),
            Idx::FromTop(0) => write!(f, "top"),
            Idx::FromTop(c) => write!(f, "top-{c}"),
        }
    }
}

/// Stochastic entries f_vw^(n) as rational functions of n, valid for
/// n >= from_level, with v ∈ V_{n+1} and w ∈ V_n.
pub trait TailModel: Send + Sync {
    fn name(&self) -> String;
    fn from_level(&self) -> usize;
    fn entry(&self, v: Idx, w: Idx) -> Option<RatFn>;
    /// Eventual minimum over all entries of F_n.
    fn min_entry(&self) -> Option<RatFn>;
    fn fixed_size(&self) -> Option<usize>;
}

/// Equal row sums and equal heights per level: f = p_vw(n) / r(n).
pub struct ErsPoly {
    polys: Vec<Vec<Poly>>,
    r: Poly,
    origin: &'static str,
}

impl ErsPoly {
    fn new(polys: Vec<Vec<Poly>>, origin: &'static str) -> Option<Self> {
        let sums: Vec<Poly> = polys.iter().map(|row| row.iter().cloned().fold(Poly::zero(), |a, b| a + b)).collect();
        if sums.windows(2).any(|w| w[0] != w[1]) {
            return None;
        }
        let r = sums.into_iter().next()?;
        if r.eventual_sign() != Ordering::Greater {
            return None;
        }
        Some(ErsPoly { polys, r, origin })
    }

    fn fix(&self, i: Idx) -> Option<usize> {
        i.resolve(self.polys.len())
    }
}

impl TailModel for ErsPoly {
    fn name(&self) -> String {
        format!("{} ERS, f_vw = p_vw(n)/({})", self.origin, self.r)
    }

    fn from_level(&self) -> usize {
        1
    }

    fn entry(&self, v: Idx, w: Idx) -> Option<RatFn> {
        let (a, b) = (self.fix(v)?, self.fix(w)?);
        Some(RatFn::new(self.polys[a][b].clone(), self.r.clone()))
    }

    fn min_entry(&self) -> Option<RatFn> {
        let all: Vec<RatFn> = self
            .polys
            .iter()
            .flatten()
            .map(|p| RatFn::new(p.clone(), self.r.clone()))
            .collect();
        RatFn::eventual_min(&all)
    }

    fn fixed_size(&self) -> Option<usize> {
        Some(self.polys.len())
    }
}

/// The countable family: a_n on the diagonal and at (n+1, n), ones elsewhere.
pub struct CountableModel {
    a: Poly,
}

impl CountableModel {
    fn r(&self) -> Poly {
        self.a.clone() + Poly::n()
    }

    fn heavy(v: Idx, w: Idx) -> bool {
        match (v, w) {
            (Idx::Fixed(a), Idx::Fixed(b)) => a == b,
            // |V_{n+1}| = n+2, |V_n| = n+1
            (Idx::FromTop(c), Idx::FromTop(d)) => c == d + 1 || (c == 0 && d == 0),
            _ => false,
        }
    }
}

impl TailModel for CountableModel {
    fn name(&self) -> String {
        format!("countable family, a_n = {}", self.a)
    }

    fn from_level(&self) -> usize {
        1
    }

    fn entry(&self, v: Idx, w: Idx) -> Option<RatFn> {
        let num = if CountableModel::heavy(v, w) {
            self.a.clone()
        } else {
            Poly::constant(1)
        };
        Some(RatFn::new(num, self.r()))
    }

    fn min_entry(&self) -> Option<RatFn> {
        Some(RatFn::new(Poly::constant(1), self.r()))
    }

    fn fixed_size(&self) -> Option<usize> {
        None
    }
}

/// Pascal: f_{v,v} = (n+1-v)/(n+1), f_{v,v-1} = v/(n+1).
pub struct PascalModel;

impl TailModel for PascalModel {
    fn name(&self) -> String {
        "pascal".into()
    }

    fn from_level(&self) -> usize {
        1
    }

    fn entry(&self, v: Idx, w: Idx) -> Option<RatFn> {
        let den = Poly::n_plus(1);
        let num = match (v, w) {
            (Idx::Fixed(a), Idx::Fixed(b)) if a == b => Poly::n_plus(1 - a as i64),
            (Idx::Fixed(a), Idx::Fixed(b)) if a == b + 1 => Poly::constant(a as i64),
            // v = n+1-c, w = n-d
            (Idx::FromTop(c), Idx::FromTop(d)) if d + 1 == c => Poly::constant(c as i64),
            (Idx::FromTop(c), Idx::FromTop(d)) if d == c => Poly::n_plus(1 - c as i64),
            _ => Poly::zero(),
        };
        Some(RatFn::new(num, den))
    }

    fn min_entry(&self) -> Option<RatFn> {
        Some(RatFn::zero())
    }

    fn fixed_size(&self) -> Option<usize> {
        None
    }
}

/// Tail model implied by the diagram's generator, when one is known.
pub fn tail_model(d: &BratteliDiagram) -> Option<Box<dyn TailModel>> {
    let spec = d.spec()?;
    let equal_root = || {
        spec.root_edges
            .as_ref()
            .is_none_or(|r| r.windows(2).all(|w| w[0] == w[1]))
    };
    match &spec.generator {
        Generator::Stationary(m) if equal_root() => {
            let polys = (0..m.rows())
                .map(|r| m.row(r).iter().map(|x| Poly::constant(BigInt::from(x.clone()))).collect())
                .collect();
            ErsPoly::new(polys, "stationary").map(|x| Box::new(x) as Box<dyn TailModel>)
        }
        Generator::Expression(e) if equal_root() => {
            let polys = e
                .iter()
                .map(|row| row.iter().map(|x| if x.has_factorial() { None } else { x.to_poly() }).collect())
                .collect::<Option<Vec<Vec<Poly>>>>()?;
            ErsPoly::new(polys, "expression").map(|x| Box::new(x) as Box<dyn TailModel>)
        }
        Generator::Countable { a } => {
            let a = a.to_poly()?;
            Some(Box::new(CountableModel { a }))
        }
        Generator::Pascal => Some(Box::new(PascalModel)),
        _ => None,
    }
}

/// Stationary incidence matrix, if the diagram is stationary.
pub fn stationary_matrix(d: &BratteliDiagram) -> Option<&IntMatrix> {
    match &d.spec()?.generator {
        Generator::Stationary(m) => Some(m),
        _ => None,
    }
}

/// Per-level vertex subsets W_1, W_2, ...: explicit lists, then a tail
/// pattern of stable indices.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct VertexSelection {
    pub explicit: Vec<Vec<usize>>,
    pub tail: Option<Vec<Idx>>,
}

impl VertexSelection {
    pub fn constant(indices: Vec<usize>) -> Self {
        VertexSelection {
            explicit: Vec::new(),
            tail: Some(indices.into_iter().map(Idx::Fixed).collect()),
        }
    }

    pub fn new(explicit: Vec<Vec<usize>>, tail: Option<Vec<Idx>>) -> Self {
        VertexSelection { explicit, tail }
    }

    /// W_n (n >= 1) resolved against |V_n| = size.
    pub fn at(&self, n: usize, size: usize) -> Option<Vec<usize>> {
        if n == 0 {
            return None;
        }
        if let Some(l) = self.explicit.get(n - 1) {
            return Some(l.clone());
        }
        let mut out: Vec<usize> = self
            .tail
            .as_ref()?
            .iter()
            .map(|i| i.resolve(size))
            .collect::<Option<_>>()?;
        out.sort_unstable();
        out.dedup();
        Some(out)
    }

    /// The tail pattern and the first level from which it applies. Without
    /// an explicit tail it is inferred from the last two explicit levels.
    pub fn tail_pattern(&self, size: impl Fn(usize) -> usize) -> Option<(Vec<Idx>, usize)> {
        if let Some(t) = &self.tail {
            return Some((t.clone(), self.explicit.len() + 1));
        }
        let l = self.explicit.len();
        if l < 2 {
            return None;
        }
        let (a, b) = (&self.explicit[l - 2], &self.explicit[l - 1]);
        let sorted = |x: &[usize]| {
            let mut v = x.to_vec();
            v.sort_unstable();
            v
        };
        if sorted(a) == sorted(b) {
            return Some((b.iter().map(|&k| Idx::Fixed(k)).collect(), l - 1));
        }
        let (sa, sb) = (size(l - 1), size(l));
        let top = |x: &[usize], s: usize| sorted(&x.iter().map(|&k| s - 1 - k).collect::<Vec<_>>());
        if top(a, sa) == top(b, sb) {
            return Some((b.iter().map(|&k| Idx::FromTop(sb - 1 - k)).collect(), l - 1));
        }
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fate {
    Converges,
    Diverges,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Combine {
    Single,
    Max,
    Min,
    Sum,
}

/// Closed form of a term sequence: the pointwise combination of pieces.
#[derive(Clone, Debug)]
pub struct ClosedForm {
    pub pieces: Vec<RatFn>,
    pub combine: Combine,
    pub from: usize,
    pub model: String,
    pub assumption: Option<String>,
}

impl ClosedForm {
    pub fn eval(&self, n: u64) -> Option<Rat> {
        let vals: Vec<Rat> = self.pieces.iter().map(|p| p.eval(n)).collect::<Option<_>>()?;
        match self.combine {
            Combine::Single | Combine::Max => vals.into_iter().max(),
            Combine::Min => vals.into_iter().min(),
            Combine::Sum => Some(vals.into_iter().sum()),
        }
    }

    /// Eventual form (for display).
    pub fn eventual(&self) -> Option<RatFn> {
        match self.combine {
            Combine::Single | Combine::Max => RatFn::eventual_max(&self.pieces),
            Combine::Min => RatFn::eventual_min(&self.pieces),
            Combine::Sum => self.pieces.iter().cloned().reduce(|a, b| a + b),
        }
    }

    fn certify(&self) -> Option<(Fate, Vec<Comparison>)> {
        if self.pieces.iter().all(RatFn::is_zero) {
            return None;
        }
        let upper: Option<Vec<Comparison>> = self
            .pieces
            .iter()
            .filter(|p| !p.is_zero())
            .map(|p| p.comparison(true).filter(Comparison::proves_convergence))
            .collect();
        let lower: Option<Vec<Comparison>> = self
            .pieces
            .iter()
            .map(|p| p.comparison(false).filter(Comparison::proves_divergence))
            .collect();
        let any_upper = self
            .pieces
            .iter()
            .find_map(|p| p.comparison(true).filter(Comparison::proves_convergence));
        let any_lower = self
            .pieces
            .iter()
            .find_map(|p| p.comparison(false).filter(Comparison::proves_divergence));
        match self.combine {
            // max <= Σ pieces; max >= each piece
            Combine::Single | Combine::Max | Combine::Sum => upper
                .map(|c| (Fate::Converges, c))
                .or_else(|| any_lower.map(|c| (Fate::Diverges, vec![c]))),
            // min <= each piece; min >= min of the lower bounds
            Combine::Min => any_upper
                .map(|c| (Fate::Converges, vec![c]))
                .or_else(|| lower.map(|c| (Fate::Diverges, c))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SeriesCertificate {
    ZeroTail {
        from: usize,
        reason: String,
    },
    Comparison {
        closed_form: String,
        model: String,
        assumption: Option<String>,
        bounds: Vec<Comparison>,
        fate: Fate,
    },
    ConstantLowerBound {
        constant: Rat,
        from: usize,
        reason: String,
    },
    /// Window evidence only: trailing ratios t_{n+1}/t_n <= 9/10.
    GeometricRatio {
        levels: Vec<usize>,
        max_ratio: Rat,
    },
}

impl SeriesCertificate {
    pub fn fate(&self) -> Fate {
        match self {
            SeriesCertificate::ZeroTail { .. } | SeriesCertificate::GeometricRatio { .. } => Fate::Converges,
            SeriesCertificate::Comparison { fate, .. } => *fate,
            SeriesCertificate::ConstantLowerBound { .. } => Fate::Diverges,
        }
    }

    pub fn rigorous(&self) -> bool {
        !matches!(self, SeriesCertificate::GeometricRatio { .. })
    }

    pub fn to_json(&self) -> Value {
        match self {
            SeriesCertificate::ZeroTail { from, reason } => json!({
                "kind": "zero-tail", "from": from, "reason": reason, "rigorous": true,
            }),
            SeriesCertificate::Comparison {
                closed_form,
                model,
                assumption,
                bounds,
                fate,
            } => json!({
                "kind": if *fate == Fate::Converges { "p-series-upper" } else { "harmonic-lower" },
                "closed_form": closed_form,
                "model": model,
                "assumption": assumption,
                "bounds": bounds.iter().map(|c| json!({
                    "bound": format!("{} {} {}/n^{}", "t_n", if c.upper { "<=" } else { ">=" }, c.constant, c.exponent),
                    "from": c.from,
                })).collect::<Vec<_>>(),
                "rigorous": true,
            }),
            SeriesCertificate::ConstantLowerBound { constant, from, reason } => json!({
                "kind": "constant-lower", "constant": constant.to_string(), "from": from, "reason": reason, "rigorous": true,
            }),
            SeriesCertificate::GeometricRatio { levels, max_ratio } => json!({
                "kind": "geometric-ratio", "levels": levels, "max_ratio": max_ratio.to_string(),
                "rigorous": false, "note": "window evidence only",
            }),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SeriesInput {
    pub levels: Vec<usize>,
    pub terms: Vec<Rat>,
    pub closed_form: Option<ClosedForm>,
    pub zero: Option<(usize, String)>,
    pub constant_lower: Option<(Rat, usize, String)>,
}

#[derive(Clone, Debug)]
pub struct SeriesEvidence {
    pub levels: Vec<usize>,
    pub terms: Vec<Rat>,
    pub partial_sums: Vec<Rat>,
    pub closed_form: Option<RatFn>,
    pub certificate: Option<SeriesCertificate>,
    pub notes: Vec<String>,
}

impl SeriesEvidence {
    pub fn fate(&self) -> Option<Fate> {
        self.certificate.as_ref().map(SeriesCertificate::fate)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "levels": self.levels,
            "terms": self.terms.iter().map(ToString::to_string).collect::<Vec<_>>(),
            "partial_sums": self.partial_sums.iter().map(ToString::to_string).collect::<Vec<_>>(),
            "closed_form": self.closed_form.as_ref().map(ToString::to_string),
            "certificate": self.certificate.as_ref().map(SeriesCertificate::to_json),
            "notes": self.notes,
        })
    }
}

pub fn analyze(input: SeriesInput) -> SeriesEvidence {
    let mut acc = Rat::zero();
    let partial_sums = input
        .terms
        .iter()
        .map(|t| {
            acc += t;
            acc.clone()
        })
        .collect();
    let mut notes = Vec::new();
    let mut certificate = None;
    let mut closed = None;
    if let Some((from, reason)) = input.zero {
        certificate = Some(SeriesCertificate::ZeroTail { from, reason });
    }
    if let Some(cf) = input.closed_form {
        let mismatch = input
            .levels
            .iter()
            .zip(&input.terms)
            .filter(|(n, _)| **n >= cf.from)
            .find(|(n, t)| cf.eval(**n as u64).as_ref() != Some(*t));
        if let Some((n, t)) = mismatch {
            notes.push(format!(
                "closed form from {} disagrees with the exact term at n = {n} ({t}); not used",
                cf.model
            ));
        } else {
            closed = cf.eventual();
            if certificate.is_none() {
                if cf.pieces.iter().all(RatFn::is_zero) {
                    certificate = Some(SeriesCertificate::ZeroTail {
                        from: cf.from,
                        reason: format!("closed form is identically 0 ({})", cf.model),
                    });
                } else if let Some((fate, bounds)) = cf.certify() {
                    certificate = Some(SeriesCertificate::Comparison {
                        closed_form: closed.as_ref().map(ToString::to_string).unwrap_or_default(),
                        model: cf.model.clone(),
                        assumption: cf.assumption.clone(),
                        bounds,
                        fate,
                    });
                }
            }
        }
    }
    if certificate.is_none() {
        if let Some((constant, from, reason)) = input.constant_lower {
            certificate = Some(SeriesCertificate::ConstantLowerBound { constant, from, reason });
        }
    }
    if certificate.is_none() {
        certificate = geometric_ratio(&input.levels, &input.terms);
    }
    SeriesEvidence {
        levels: input.levels,
        terms: input.terms,
        partial_sums,
        closed_form: closed,
        certificate,
        notes,
    }
}

fn geometric_ratio(levels: &[usize], terms: &[Rat]) -> Option<SeriesCertificate> {
    let margin = Rat::new(BigInt::from(9), BigInt::from(10));
    let mut k = terms.len();
    let mut max_ratio = Rat::zero();
    while k >= 2 {
        let (a, b) = (&terms[k - 2], &terms[k - 1]);
        if !a.is_positive() {
            break;
        }
        let r = b / a;
        if r > margin {
            break;
        }
        if r > max_ratio {
            max_ratio = r;
        }
        k -= 1;
    }
    let ratios = terms.len() - k;
    (ratios >= 3).then(|| SeriesCertificate::GeometricRatio {
        levels: levels[k - 1..].to_vec(),
        max_ratio,
    })
}

/// First level n >= start at which every index of the pattern resolves to
/// a distinct vertex on both V_n and V_{n+1}.
pub fn distinct_from(pattern: &[Idx], size: impl Fn(usize) -> usize, start: usize) -> usize {
    let fixed = pattern
        .iter()
        .filter_map(|i| if let Idx::Fixed(k) = i { Some(*k) } else { None })
        .max();
    let top = pattern
        .iter()
        .filter_map(|i| if let Idx::FromTop(c) = i { Some(*c) } else { None })
        .max();
    let ok = |n: usize| {
        let s = size(n);
        match (fixed, top) {
            (Some(k), Some(c)) => k + c + 1 < s,
            (Some(k), None) => k < s,
            (None, Some(c)) => c < s,
            (None, None) => true,
        }
    };
    let mut n = start.max(1);
    // sizes are nondecreasing along every family we model
    while !(ok(n) && ok(n + 1)) && n < start + 4096 {
        n += 1;
    }
    n
}

/// Σ_{w ∈ ws} f_vw as a closed form, via the model.
pub fn row_mass(model: &dyn TailModel, v: Idx, ws: &[Idx]) -> Option<RatFn> {
    ws.iter()
        .map(|&w| model.entry(v, w))
        .try_fold(RatFn::zero(), |acc, e| Some(acc + e?))
}

/// 1 - Σ_{w ∈ ws} f_vw.
pub fn outside_mass(model: &dyn TailModel, v: Idx, ws: &[Idx]) -> Option<RatFn> {
    Some(RatFn::one() - row_mass(model, v, ws)?)
}

pub fn one() -> Rat {
    Rat::one()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::EntryExpr;
    use crate::linalg::rat;
    use crate::spec::DiagramSpec;

    #[test]
    fn idx_resolution() {
        assert_eq!(Idx::Fixed(2).resolve(3), Some(2));
        assert_eq!(Idx::Fixed(3).resolve(3), None);
        assert_eq!(Idx::FromTop(0).resolve(5), Some(4));
        assert_eq!(Idx::FromTop(5).resolve(5), None);
    }

    fn check_model(d: &BratteliDiagram, pairs: &[(Idx, Idx)], from: usize) {
        let m = tail_model(d).unwrap();
        for n in from..d.depth() {
            let f = d.stochastic_matrix(n).unwrap();
            for &(v, w) in pairs {
                let (Some(a), Some(b)) = (v.resolve(f.rows()), w.resolve(f.cols())) else { continue };
                assert_eq!(m.entry(v, w).unwrap().eval(n as u64).unwrap(), *f.get(a, b), "n={n} {v} {w}");
            }
        }
    }

    #[test]
    fn models_match_exact_entries() {
        use Idx::*;
        let pairs: Vec<(Idx, Idx)> = [Fixed(0), Fixed(1), Fixed(2), FromTop(0), FromTop(1), FromTop(2)]
            .iter()
            .flat_map(|&a| [Fixed(0), Fixed(1), Fixed(2), FromTop(0), FromTop(1)].map(move |b| (a, b)))
            .collect();
        // fixed indices <= 2 stay below top-2 from n = 5 on
        let pascal = BratteliDiagram::materialize(&DiagramSpec::new(Generator::Pascal), 11).unwrap();
        check_model(&pascal, &pairs, 5);
        let c = DiagramSpec::new(Generator::Countable { a: EntryExpr::parse("n^3+2").unwrap() });
        check_model(&BratteliDiagram::materialize(&c, 9).unwrap(), &pairs, 5);
        let b2 = DiagramSpec::expression(&[&["n^2", "1"], &["1", "n^2"]]).unwrap();
        check_model(&BratteliDiagram::materialize(&b2, 7).unwrap(), &pairs[..2], 1);
        let od = DiagramSpec::stationary(&[vec![3, 0], vec![1, 2]]).with_root(&[3, 3]);
        check_model(&BratteliDiagram::materialize(&od, 5).unwrap(), &pairs[..2], 1);
    }

    #[test]
    fn no_model_for_unequal_roots_or_non_ers() {
        let od = DiagramSpec::stationary(&[vec![3, 0], vec![1, 2]]).with_root(&[1, 2]);
        assert!(tail_model(&BratteliDiagram::materialize(&od, 3).unwrap()).is_none());
        let s = DiagramSpec::stationary(&[vec![2, 0], vec![1, 3]]);
        assert!(tail_model(&BratteliDiagram::materialize(&s, 3).unwrap()).is_none());
    }

    #[test]
    fn selection_tail_inference() {
        let s = VertexSelection::new(vec![vec![1], vec![2], vec![3]], None);
        let (p, from) = s.tail_pattern(|n| n + 1).unwrap();
        assert_eq!(p, vec![Idx::FromTop(0)]);
        assert_eq!(from, 2);
        let s = VertexSelection::new(vec![vec![0], vec![1], vec![1]], None);
        assert_eq!(s.tail_pattern(|n| n + 1).unwrap().0, vec![Idx::Fixed(1)]);
        assert_eq!(VertexSelection::constant(vec![2]).at(5, 6), Some(vec![2]));
        assert_eq!(VertexSelection::constant(vec![2]).at(1, 2), None);
        let mixed = [Idx::Fixed(2), Idx::FromTop(1)];
        assert_eq!(distinct_from(&mixed, |n| n + 1, 1), 4);
        assert_eq!(distinct_from(&[Idx::Fixed(0)], |n| n + 1, 3), 3);
    }

    #[test]
    fn analysis_picks_certificates() {
        let levels: Vec<usize> = (1..8).collect();
        let b2 = RatFn::new(Poly::constant(1), Poly::new(vec![1.into(), 0.into(), 1.into()]));
        let terms: Vec<Rat> = levels.iter().map(|&n| b2.eval(n as u64).unwrap()).collect();
        let ev = analyze(SeriesInput {
            levels: levels.clone(),
            terms: terms.clone(),
            closed_form: Some(ClosedForm {
                pieces: vec![b2.clone()],
                combine: Combine::Single,
                from: 1,
                model: "test".into(),
                assumption: None,
            }),
            ..Default::default()
        });
        assert_eq!(ev.fate(), Some(Fate::Converges));
        assert_eq!(ev.partial_sums[1], rat(1, 2) + rat(1, 5));
        // a wrong closed form is rejected, and no other certificate applies
        let ev = analyze(SeriesInput {
            levels: levels.clone(),
            terms: vec![rat(1, 1); 7],
            closed_form: Some(ClosedForm {
                pieces: vec![b2],
                combine: Combine::Single,
                from: 1,
                model: "test".into(),
                assumption: None,
            }),
            ..Default::default()
        });
        assert!(ev.certificate.is_none());
        assert_eq!(ev.notes.len(), 1);
        let geo: Vec<Rat> = (0..7).map(|k| rat(1, 1 << k)).collect();
        let ev = analyze(SeriesInput { levels, terms: geo, ..Default::default() });
        assert!(matches!(ev.certificate, Some(SeriesCertificate::GeometricRatio { .. })));
        assert!(!ev.certificate.unwrap().rigorous());
    }

    #[test]
    fn min_combination_needs_every_piece_for_divergence() {
        let harmonic = RatFn::new(Poly::constant(1), Poly::n_plus(1));
        let square = RatFn::new(Poly::constant(1), Poly::n().pow(2) + Poly::constant(1));
        let cf = |pieces: Vec<RatFn>| ClosedForm {
            pieces,
            combine: Combine::Min,
            from: 1,
            model: "t".into(),
            assumption: None,
        };
        assert_eq!(cf(vec![harmonic.clone()]).certify().unwrap().0, Fate::Diverges);
        assert_eq!(cf(vec![harmonic, square]).certify().unwrap().0, Fate::Converges);
    }
}

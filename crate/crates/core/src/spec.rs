//! The JSON spec-file format describing a diagram generator.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::expr::EntryExpr;
use crate::linalg::IntMatrix;
use crate::toeplitz::ToeplitzSeed;

#[derive(Clone, Debug, PartialEq)]
pub enum Generator {
    /// F̃_1, F̃_2, ... listed explicitly.
    Explicit(Vec<IntMatrix>),
    Stationary(IntMatrix),
    /// Square matrix of expressions evaluated at each level n >= 1.
    Expression(Vec<Vec<EntryExpr>>),
    Pascal,
    Countable { a: EntryExpr },
    ErsToeplitz(ToeplitzSeed),
}

impl Generator {
    pub fn kind(&self) -> &'static str {
        match self {
            Generator::Explicit(_) => "explicit",
            Generator::Stationary(_) => "stationary",
            Generator::Expression(_) => "expression",
            Generator::Pascal => "pascal",
            Generator::Countable { .. } => "countable",
            Generator::ErsToeplitz(_) => "ers-toeplitz",
        }
    }
}

/// Orders on r^{-1}(v) as lists of source vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OrderSpec {
    /// Same order at every level n >= 1 (vertex -> sources).
    Stationary(BTreeMap<usize, Vec<usize>>),
    /// Keyed by the range level n + 1 >= 1, then vertex.
    PerLevel(BTreeMap<usize, BTreeMap<usize, Vec<usize>>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagramSpec {
    pub generator: Generator,
    pub root_edges: Option<Vec<BigUint>>,
    pub depth: Option<usize>,
    pub order: Option<OrderSpec>,
}

impl DiagramSpec {
    pub fn new(generator: Generator) -> Self {
        DiagramSpec {
            generator,
            root_edges: None,
            depth: None,
            order: None,
        }
    }

    pub fn with_root(mut self, root: &[u64]) -> Self {
        self.root_edges = Some(root.iter().map(|&x| BigUint::from(x)).collect());
        self
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = Some(depth);
        self
    }

    pub fn stationary(rows: &[Vec<u64>]) -> Self {
        DiagramSpec::new(Generator::Stationary(IntMatrix::from_u64(rows)))
    }

    pub fn expression(rows: &[&[&str]]) -> Result<Self> {
        let entries = rows
            .iter()
            .map(|r| r.iter().map(|s| EntryExpr::parse(s)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let spec = DiagramSpec::new(Generator::Expression(entries));
        spec.check_shapes()?;
        Ok(spec)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        DiagramSpec::from_json(&v)
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::input("spec must be a JSON object"))?;
        const KEYS: [&str; 9] = [
            "generator", "matrices", "matrix", "entries", "root_edges", "depth", "params",
            "order", "toeplitz",
        ];
        if let Some(k) = obj.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(Error::input(format!("unknown key '{k}'")));
        }
        let kind = obj
            .get("generator")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::input("missing string key 'generator'"))?;
        let params = match obj.get("params") {
            None => Map::new(),
            Some(Value::Object(m)) => m.clone(),
            Some(_) => return Err(Error::input("'params' must be an object")),
        };
        let param_expr = |name: &str| -> Result<Option<EntryExpr>> {
            match params.get(name) {
                None => Ok(None),
                Some(Value::String(s)) => EntryExpr::parse(s).map(Some),
                Some(Value::Number(n)) if n.is_u64() => Ok(Some(EntryExpr::constant(n.as_u64().unwrap()))),
                Some(_) => Err(Error::input(format!("param '{name}' must be an expression string"))),
            }
        };
        let generator = match kind {
            "explicit" => {
                let ms = obj
                    .get("matrices")
                    .and_then(Value::as_array)
                    .ok_or_else(|| Error::input("explicit generator needs 'matrices'"))?;
                if ms.is_empty() {
                    return Err(Error::input("'matrices' is empty"));
                }
                let ms = ms
                    .iter()
                    .enumerate()
                    .map(|(i, m)| int_matrix(m, &format!("matrices[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                Generator::Explicit(ms)
            }
            "stationary" => {
                let m = obj
                    .get("matrix")
                    .ok_or_else(|| Error::input("stationary generator needs 'matrix'"))?;
                Generator::Stationary(int_matrix(m, "matrix")?)
            }
            "expression" => {
                let rows = obj
                    .get("entries")
                    .and_then(Value::as_array)
                    .ok_or_else(|| Error::input("expression generator needs 'entries'"))?;
                let mut out = Vec::new();
                for (i, r) in rows.iter().enumerate() {
                    let r = r
                        .as_array()
                        .ok_or_else(|| Error::input(format!("entries[{i}] must be an array")))?;
                    let mut row = Vec::new();
                    for (j, e) in r.iter().enumerate() {
                        let ex = match e {
                            Value::String(s) => EntryExpr::parse(s).map_err(|err| match err {
                                Error::Syntax { column, message, .. } => Error::Syntax {
                                    line: 1,
                                    column,
                                    message: format!("entries[{i}][{j}]: {message}"),
                                },
                                other => other,
                            })?,
                            Value::Number(n) if n.is_u64() => EntryExpr::constant(n.as_u64().unwrap()),
                            Value::Number(_) => {
                                return Err(Error::NegativeEntry(format!("entries[{i}][{j}]")))
                            }
                            _ => return Err(Error::input(format!("entries[{i}][{j}] must be a string"))),
                        };
                        row.push(ex);
                    }
                    out.push(row);
                }
                Generator::Expression(out)
            }
            "pascal" => Generator::Pascal,
            "countable" => {
                let a = param_expr("a_n")?.unwrap_or_else(|| EntryExpr::parse("n^3+2").unwrap());
                Generator::Countable { a }
            }
            "ers-toeplitz" => {
                let lambda = param_expr("lambda_n")?
                    .ok_or_else(|| Error::input("ers-toeplitz needs params.lambda_n"))?;
                let t = obj
                    .get("toeplitz")
                    .ok_or_else(|| Error::input("ers-toeplitz needs 'toeplitz'"))?;
                Generator::ErsToeplitz(ToeplitzSeed::from_json(lambda, t)?)
            }
            other => return Err(Error::input(format!("unknown generator '{other}'"))),
        };
        let root_edges = match obj.get("root_edges") {
            None | Some(Value::Null) => None,
            Some(Value::Array(a)) => Some(
                a.iter()
                    .enumerate()
                    .map(|(i, x)| int_entry(x, &format!("root_edges[{i}]")))
                    .collect::<Result<Vec<_>>>()?,
            ),
            Some(_) => return Err(Error::input("'root_edges' must be an array")),
        };
        let depth = match obj.get("depth") {
            None | Some(Value::Null) => None,
            Some(d) => Some(
                d.as_u64()
                    .filter(|&d| d >= 1)
                    .ok_or_else(|| Error::input("'depth' must be a positive integer"))? as usize,
            ),
        };
        let order = match obj.get("order") {
            None | Some(Value::Null) => None,
            Some(o) => Some(parse_order(o)?),
        };
        let spec = DiagramSpec {
            generator,
            root_edges,
            depth,
            order,
        };
        spec.check_shapes()?;
        Ok(spec)
    }

    /// Parse-time shape validation.
    pub fn check_shapes(&self) -> Result<()> {
        match &self.generator {
            Generator::Explicit(ms) => {
                for (i, w) in ms.windows(2).enumerate() {
                    if w[1].cols() != w[0].rows() {
                        return Err(Error::Dimension(format!(
                            "matrices[{}] has {} columns but matrices[{}] has {} rows",
                            i + 1,
                            w[1].cols(),
                            i,
                            w[0].rows()
                        )));
                    }
                }
                if let Some(r) = &self.root_edges {
                    if r.len() != ms[0].cols() {
                        return Err(Error::Dimension(format!(
                            "root_edges has length {} but matrices[0] has {} columns",
                            r.len(),
                            ms[0].cols()
                        )));
                    }
                }
            }
            Generator::Stationary(m) => {
                if !m.is_square() || m.rows() == 0 {
                    return Err(Error::Dimension("stationary matrix must be square".into()));
                }
                self.check_root_len(m.rows())?;
            }
            Generator::Expression(e) => {
                let k = e.len();
                if k == 0 || e.iter().any(|r| r.len() != k) {
                    return Err(Error::Dimension("expression entries must form a square matrix".into()));
                }
                self.check_root_len(k)?;
            }
            Generator::Pascal | Generator::Countable { .. } => {
                if self.root_edges.is_some() {
                    return Err(Error::input(format!(
                        "{} generator fixes its own root edges",
                        self.generator.kind()
                    )));
                }
            }
            Generator::ErsToeplitz(_) => {
                if self.root_edges.is_some() {
                    return Err(Error::input("ers-toeplitz generator fixes its own root edges"));
                }
            }
        }
        Ok(())
    }

    fn check_root_len(&self, k: usize) -> Result<()> {
        if let Some(r) = &self.root_edges {
            if r.len() != k {
                return Err(Error::Dimension(format!(
                    "root_edges has length {} but the matrix is {k}x{k}",
                    r.len()
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("generator".into(), json!(self.generator.kind()));
        let mat = |m: &IntMatrix| -> Value {
            Value::Array(
                m.to_rows()
                    .iter()
                    .map(|r| Value::Array(r.iter().map(big_json).collect()))
                    .collect(),
            )
        };
        match &self.generator {
            Generator::Explicit(ms) => {
                obj.insert("matrices".into(), Value::Array(ms.iter().map(mat).collect()));
            }
            Generator::Stationary(m) => {
                obj.insert("matrix".into(), mat(m));
            }
            Generator::Expression(e) => {
                obj.insert(
                    "entries".into(),
                    Value::Array(
                        e.iter()
                            .map(|r| Value::Array(r.iter().map(|x| json!(x.to_string())).collect()))
                            .collect(),
                    ),
                );
            }
            Generator::Pascal => {}
            Generator::Countable { a } => {
                obj.insert("params".into(), json!({ "a_n": a.to_string() }));
            }
            Generator::ErsToeplitz(seed) => {
                obj.insert("params".into(), json!({ "lambda_n": seed.lambda.to_string() }));
                obj.insert("toeplitz".into(), seed.to_json());
            }
        }
        if let Some(r) = &self.root_edges {
            obj.insert("root_edges".into(), Value::Array(r.iter().map(big_json).collect()));
        }
        if let Some(d) = self.depth {
            obj.insert("depth".into(), json!(d));
        }
        if let Some(o) = &self.order {
            let list = |m: &BTreeMap<usize, Vec<usize>>| -> Value {
                Value::Object(m.iter().map(|(k, v)| (k.to_string(), json!(v))).collect())
            };
            let v = match o {
                OrderSpec::Stationary(m) => list(m),
                OrderSpec::PerLevel(m) => {
                    Value::Object(m.iter().map(|(k, v)| (k.to_string(), list(v))).collect())
                }
            };
            obj.insert("order".into(), v);
        }
        Value::Object(obj)
    }
}

fn big_json(x: &BigUint) -> Value {
    match u64::try_from(x) {
        Ok(v) => json!(v),
        Err(_) => json!(x.to_string()),
    }
}

fn int_entry(v: &Value, at: &str) -> Result<BigUint> {
    match v {
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                Ok(BigUint::from(u))
            } else if n.as_i64().is_some() || n.as_f64().is_some_and(|f| f < 0.0) {
                Err(Error::NegativeEntry(at.to_string()))
            } else {
                Err(Error::input(format!("{at}: expected a non-negative integer")))
            }
        }
        Value::String(s) => {
            if s.trim_start().starts_with('-') {
                return Err(Error::NegativeEntry(at.to_string()));
            }
            s.trim()
                .parse()
                .map_err(|_| Error::input(format!("{at}: expected a non-negative integer")))
        }
        _ => Err(Error::input(format!("{at}: expected a non-negative integer"))),
    }
}

fn int_matrix(v: &Value, at: &str) -> Result<IntMatrix> {
    let rows = v
        .as_array()
        .ok_or_else(|| Error::input(format!("{at} must be an array of rows")))?;
    if rows.is_empty() {
        return Err(Error::Dimension(format!("{at} is empty")));
    }
    let mut out = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let r = r
            .as_array()
            .ok_or_else(|| Error::input(format!("{at}[{i}] must be an array")))?;
        out.push(
            r.iter()
                .enumerate()
                .map(|(j, x)| int_entry(x, &format!("{at}[{i}][{j}]")))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let c = out[0].len();
    if c == 0 || out.iter().any(|r| r.len() != c) {
        return Err(Error::Dimension(format!("{at} rows have unequal or zero length")));
    }
    Ok(IntMatrix::from_rows(out))
}

fn parse_key(k: &str) -> Result<usize> {
    k.parse()
        .map_err(|_| Error::input(format!("order key '{k}' is not a vertex or level index")))
}

fn parse_list(v: &Value, at: &str) -> Result<Vec<usize>> {
    v.as_array()
        .ok_or_else(|| Error::input(format!("order {at} must be an array")))?
        .iter()
        .map(|x| {
            x.as_u64()
                .map(|u| u as usize)
                .ok_or_else(|| Error::input(format!("order {at}: sources must be vertex indices")))
        })
        .collect()
}

fn parse_order(v: &Value) -> Result<OrderSpec> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::input("'order' must be an object"))?;
    if obj.values().all(Value::is_array) {
        let mut m = BTreeMap::new();
        for (k, l) in obj {
            m.insert(parse_key(k)?, parse_list(l, k)?);
        }
        return Ok(OrderSpec::Stationary(m));
    }
    let mut levels = BTreeMap::new();
    for (k, inner) in obj {
        let inner = inner
            .as_object()
            .ok_or_else(|| Error::input("'order' must map vertices to lists or levels to objects"))?;
        let mut m = BTreeMap::new();
        for (vk, l) in inner {
            m.insert(parse_key(vk)?, parse_list(l, &format!("{k}.{vk}"))?);
        }
        levels.insert(parse_key(k)?, m);
    }
    Ok(OrderSpec::PerLevel(levels))
}

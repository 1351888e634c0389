//! JSON problem files.
//!
//! Top-level keys `n, n_A, n_C, Q, g, A, b, L, R` and optional `lb, ub, x0`. Matrices are either
//! `{"dense": [[...], ...]}` (row-major) or
//! `{"coo": {"rows": [...], "cols": [...], "vals": [...], "shape": [r, c]}}`.
//! Infinite bounds are written as `null`. Numbers use the shortest representation that
//! round-trips to the same `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde_json::{Map, Value};

use super::{LcqpProblem, ProblemData};
use crate::error::{Error, Result};

/// Matrices with at most this fill fraction are written as COO triplets.
const COO_DENSITY: f64 = 0.25;

/// Contents of a problem file: the problem and an optional initial guess.
#[derive(Debug, Clone)]
pub struct ProblemFile {
    pub problem: LcqpProblem,
    pub x0: Option<DVector<f64>>,
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<LcqpProblem> {
    load_problem_file(path).map(|f| f.problem)
}

pub fn load_problem_file(path: impl AsRef<Path>) -> Result<ProblemFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_problem(&text)
}

pub fn save_problem(problem: &LcqpProblem, path: impl AsRef<Path>) -> Result<()> {
    save_problem_file(problem, None, path)
}

pub fn save_problem_file(
    problem: &LcqpProblem,
    x0: Option<&DVector<f64>>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, problem_to_json(problem, x0)).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub(crate) fn parse_problem(text: &str) -> Result<ProblemFile> {
    let root: Value = serde_json::from_str(text).map_err(|e| {
        Error::parse(
            "<document>",
            format!("line {} column {}: {e}", e.line(), e.column()),
        )
    })?;
    let obj = root
        .as_object()
        .ok_or_else(|| Error::parse("<document>", "top level must be an object"))?;

    let n = read_usize(obj, "n")?;
    let n_a = read_usize(obj, "n_A")?;
    let n_c = read_usize(obj, "n_C")?;

    let q = read_matrix(obj, "Q", n, n)?;
    let g = read_vector(obj, "g", n)?;
    let a = read_matrix(obj, "A", n_a, n)?;
    let b = read_vector(obj, "b", n_a)?;
    let l = read_matrix(obj, "L", n_c, n)?;
    let r = read_matrix(obj, "R", n_c, n)?;
    let lb = read_bounds(obj, "lb", n, f64::NEG_INFINITY)?;
    let ub = read_bounds(obj, "ub", n, f64::INFINITY)?;
    let x0 = match obj.get("x0") {
        None | Some(Value::Null) => None,
        Some(_) => Some(read_vector(obj, "x0", n)?),
    };

    let problem = ProblemData {
        q,
        g,
        a,
        b,
        l,
        r,
        lb,
        ub,
    }
    .validate()?;
    Ok(ProblemFile { problem, x0 })
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| Error::parse(key, "missing required field"))
}

fn read_usize(obj: &Map<String, Value>, key: &str) -> Result<usize> {
    field(obj, key)?
        .as_u64()
        .map(|v| v as usize)
        .ok_or_else(|| Error::parse(key, "expected a non-negative integer"))
}

fn number(v: &Value, key: &str) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::parse(key, format!("expected a number, found {v}")))
}

fn read_vector(obj: &Map<String, Value>, key: &str, len: usize) -> Result<DVector<f64>> {
    let arr = field(obj, key)?
        .as_array()
        .ok_or_else(|| Error::parse(key, "expected an array"))?;
    if arr.len() != len {
        return Err(Error::dims(key, len, arr.len()));
    }
    let vals = arr.iter().map(|v| number(v, key)).collect::<Result<Vec<_>>>()?;
    Ok(DVector::from_vec(vals))
}

fn read_bounds(
    obj: &Map<String, Value>,
    key: &str,
    len: usize,
    infinite: f64,
) -> Result<Option<DVector<f64>>> {
    let arr = match obj.get(key) {
        None | Some(Value::Null) => return Ok(None),
        Some(v) => v
            .as_array()
            .ok_or_else(|| Error::parse(key, "expected an array"))?,
    };
    if arr.len() != len {
        return Err(Error::dims(key, len, arr.len()));
    }
    let vals = arr
        .iter()
        .map(|v| match v {
            Value::Null => Ok(infinite),
            v => number(v, key),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(DVector::from_vec(vals)))
}

fn read_matrix(
    obj: &Map<String, Value>,
    key: &str,
    rows: usize,
    cols: usize,
) -> Result<DMatrix<f64>> {
    let m = field(obj, key)?
        .as_object()
        .ok_or_else(|| Error::parse(key, "expected an object with `dense` or `coo`"))?;
    if let Some(dense) = m.get("dense") {
        let dense = dense
            .as_array()
            .ok_or_else(|| Error::parse(key, "`dense` must be an array of rows"))?;
        if dense.len() != rows {
            return Err(Error::dims(key, format!("{rows} rows"), dense.len()));
        }
        let mut out = DMatrix::zeros(rows, cols);
        for (i, row) in dense.iter().enumerate() {
            let row = row
                .as_array()
                .ok_or_else(|| Error::parse(key, format!("row {i} is not an array")))?;
            if row.len() != cols {
                return Err(Error::dims(key, format!("{cols} columns"), row.len()));
            }
            for (j, v) in row.iter().enumerate() {
                out[(i, j)] = number(v, key)?;
            }
        }
        Ok(out)
    } else if let Some(coo) = m.get("coo") {
        let coo = coo
            .as_object()
            .ok_or_else(|| Error::parse(key, "`coo` must be an object"))?;
        let list = |name: &str| -> Result<&Vec<Value>> {
            coo.get(name)
                .and_then(Value::as_array)
                .ok_or_else(|| Error::parse(key, format!("`coo.{name}` missing or not an array")))
        };
        let shape = list("shape")?;
        let shape = shape
            .iter()
            .map(|v| v.as_u64().map(|s| s as usize))
            .collect::<Option<Vec<_>>>()
            .filter(|s| s.len() == 2)
            .ok_or_else(|| Error::parse(key, "`coo.shape` must be two non-negative integers"))?;
        if shape[0] != rows || shape[1] != cols {
            return Err(Error::dims(
                key,
                format!("{rows}x{cols}"),
                format!("{}x{}", shape[0], shape[1]),
            ));
        }
        let (ri, ci, vals) = (list("rows")?, list("cols")?, list("vals")?);
        if ri.len() != ci.len() || ri.len() != vals.len() {
            return Err(Error::parse(key, "`coo` rows/cols/vals lengths differ"));
        }
        let mut out = DMatrix::zeros(rows, cols);
        for ((i, j), v) in ri.iter().zip(ci).zip(vals) {
            let (i, j) = match (i.as_u64(), j.as_u64()) {
                (Some(i), Some(j)) if (i as usize) < rows && (j as usize) < cols => {
                    (i as usize, j as usize)
                }
                _ => return Err(Error::parse(key, format!("triplet index ({i}, {j}) out of range"))),
            };
            // Duplicate triplets accumulate.
            out[(i, j)] += number(v, key)?;
        }
        Ok(out)
    } else {
        Err(Error::parse(key, "expected `dense` or `coo`"))
    }
}

fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        // serde_json prints the shortest round-trip representation.
        serde_json::to_string(&v).expect("finite float serializes")
    } else {
        "null".to_string()
    }
}

fn fmt_vec(v: &DVector<f64>) -> String {
    let items: Vec<String> = v.iter().map(|&x| fmt_num(x)).collect();
    format!("[{}]", items.join(", "))
}

fn fmt_matrix(m: &DMatrix<f64>) -> String {
    let nnz = m.iter().filter(|v| **v != 0.0).count();
    let total = m.nrows() * m.ncols();
    if total > 0 && (nnz as f64) <= COO_DENSITY * total as f64 {
        let (mut ri, mut ci, mut vals) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    ri.push(i.to_string());
                    ci.push(j.to_string());
                    vals.push(fmt_num(m[(i, j)]));
                }
            }
        }
        format!(
            "{{\"coo\": {{\"rows\": [{}], \"cols\": [{}], \"vals\": [{}], \"shape\": [{}, {}]}}}}",
            ri.join(", "),
            ci.join(", "),
            vals.join(", "),
            m.nrows(),
            m.ncols()
        )
    } else {
        let rows: Vec<String> = m
            .row_iter()
            .map(|row| {
                let items: Vec<String> = row.iter().map(|&x| fmt_num(x)).collect();
                format!("[{}]", items.join(", "))
            })
            .collect();
        if rows.is_empty() {
            "{\"dense\": []}".to_string()
        } else {
            format!("{{\"dense\": [\n    {}\n  ]}}", rows.join(",\n    "))
        }
    }
}

/// Render a problem (and optional initial guess) in the file format.
pub fn problem_to_json(problem: &LcqpProblem, x0: Option<&DVector<f64>>) -> String {
    let d = problem.data();
    let mut s = String::from("{\n");
    let _ = writeln!(s, "  \"n\": {},", problem.n());
    let _ = writeln!(s, "  \"n_A\": {},", problem.n_a());
    let _ = writeln!(s, "  \"n_C\": {},", problem.n_c());
    let _ = writeln!(s, "  \"Q\": {},", fmt_matrix(&d.q));
    let _ = writeln!(s, "  \"g\": {},", fmt_vec(&d.g));
    let _ = writeln!(s, "  \"A\": {},", fmt_matrix(&d.a));
    let _ = writeln!(s, "  \"b\": {},", fmt_vec(&d.b));
    let _ = writeln!(s, "  \"L\": {},", fmt_matrix(&d.l));
    let mut tail = vec![format!("  \"R\": {}", fmt_matrix(&d.r))];
    if let Some(lb) = &d.lb {
        tail.push(format!("  \"lb\": {}", fmt_vec(lb)));
    }
    if let Some(ub) = &d.ub {
        tail.push(format!("  \"ub\": {}", fmt_vec(ub)));
    }
    if let Some(x0) = x0 {
        tail.push(format!("  \"x0\": {}", fmt_vec(x0)));
    }
    s.push_str(&tail.join(",\n"));
    s.push_str("\n}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::two_corner_example;

    const FIG: &str = r#"{
        "n": 2, "n_A": 0, "n_C": 1,
        "Q": {"dense": [[2, 0], [0, 2]]},
        "g": [-2, -2],
        "A": {"dense": []}, "b": [],
        "L": {"dense": [[1, 0]]},
        "R": {"coo": {"rows": [0], "cols": [1], "vals": [1.0], "shape": [1, 2]}}
    }"#;

    #[test]
    fn dense_and_coo_encodings_agree() {
        let parsed = parse_problem(FIG).unwrap();
        assert_eq!(parsed.problem, two_corner_example());
        assert!(parsed.x0.is_none());
    }

    #[test]
    fn missing_field_is_named() {
        let text = FIG.replace("\"R\"", "\"S\"");
        assert_eq!(
            parse_problem(&text).unwrap_err(),
            Error::parse("R", "missing required field")
        );
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = parse_problem("{\n \"n\": 2,\n oops }").unwrap_err();
        match err {
            Error::Parse { field, message } => {
                assert_eq!(field, "<document>");
                assert!(message.starts_with("line 3"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bounds_and_x0_round_trip() {
        let mut d = two_corner_example().data().clone();
        d.lb = Some(DVector::from_vec(vec![0.0, f64::NEG_INFINITY]));
        d.ub = Some(DVector::from_vec(vec![0.1 + 0.2, f64::INFINITY]));
        let p = d.validate().unwrap();
        let x0 = DVector::from_vec(vec![std::f64::consts::PI, -1e-300]);
        let back = parse_problem(&problem_to_json(&p, Some(&x0))).unwrap();
        assert_eq!(back.problem, p);
        assert_eq!(back.x0.unwrap(), x0);
    }

    #[test]
    fn wrong_row_length_is_dimension_error() {
        let text = FIG.replace("[[1, 0]]", "[[1, 0, 0]]");
        assert!(matches!(
            parse_problem(&text),
            Err(Error::DimensionMismatch { field, .. }) if field == "L"
        ));
    }
}

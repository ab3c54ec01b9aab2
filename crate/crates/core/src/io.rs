//! Reading situation files.
//!
//! A situation file is a JSON document:
//!
//! ```json
//! {
//!   "retailers": [{"id": "1", "price": {"knots": [[0, 5], [50, 0]]}}],
//!   "suppliers": [{"id": "1", "wholesale": {"knots": [[0, 4], [20, 3]]},
//!                  "cost": {"knots": [[0, 3], [30, 1.5]]}}],
//!   "capacity": [[10]],
//!   "solver": {"initial_resolution": 33}
//! }
//! ```
//!
//! Numbers may also be written as strings, either decimals (`"113.333333333333"`)
//! or fractions (`"2/3"`). `capacity` is an `n x m` matrix or `"unbounded"`.
//! Unknown keys produce warnings.

use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::model::{Capacity, MrsSituation, RetailerSpec, Situation, SupplierSpec};
use crate::optimizer::SolverConfig;
use crate::pwl::PiecewiseLinearFn;

/// A parsed and validated situation file.
#[derive(Clone, Debug)]
pub struct SituationFile {
    pub situation: Situation,
    /// Solver settings from the file's `solver` block, over the defaults.
    pub solver: SolverConfig,
    pub warnings: Vec<String>,
}

pub fn read_situation(path: impl AsRef<Path>) -> Result<SituationFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
        location: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_situation(&text)
}

pub fn parse_situation(text: &str) -> Result<SituationFile> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        location: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let mut warnings = Vec::new();
    let root = object(&doc, "$")?;
    unknown_keys(root, "$", &["retailers", "suppliers", "capacity", "solver"], &mut warnings);

    let retailers = array(field(root, "$", "retailers")?, "$.retailers")?
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let at = format!("$.retailers[{k}]");
            let obj = object(r, &at)?;
            unknown_keys(obj, &at, &["id", "price"], &mut warnings);
            Ok(RetailerSpec {
                id: id(obj, &at, k)?,
                price: function(field(obj, &at, "price")?, &format!("{at}.price"), &mut warnings)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let suppliers = array(field(root, "$", "suppliers")?, "$.suppliers")?
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let at = format!("$.suppliers[{k}]");
            let obj = object(s, &at)?;
            unknown_keys(obj, &at, &["id", "wholesale", "cost"], &mut warnings);
            Ok(SupplierSpec {
                id: id(obj, &at, k)?,
                wholesale: function(field(obj, &at, "wholesale")?, &format!("{at}.wholesale"), &mut warnings)?,
                cost: function(field(obj, &at, "cost")?, &format!("{at}.cost"), &mut warnings)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let capacity = match field(root, "$", "capacity")? {
        Value::String(s) if s == "unbounded" => Capacity::Unbounded,
        Value::Array(rows) => Capacity::Bounded(
            rows.iter()
                .enumerate()
                .map(|(i, row)| {
                    let at = format!("$.capacity[{i}]");
                    array(row, &at)?
                        .iter()
                        .enumerate()
                        .map(|(j, v)| number(v, &format!("{at}[{j}]")))
                        .collect()
                })
                .collect::<Result<Vec<_>>>()?,
        ),
        _ => {
            return Err(Error::Parse {
                location: "$.capacity".into(),
                message: "expected a matrix of numbers or \"unbounded\"".into(),
            })
        }
    };

    let solver = match root.get("solver") {
        None => SolverConfig::default(),
        Some(v) => solver_config(v, &mut warnings)?,
    };

    let situation = MrsSituation {
        retailers,
        suppliers,
        capacity,
    }
    .validate()
    .map_err(Error::Invalid)?;
    warnings.extend(situation.warnings().iter().map(|w| format!("warning: {w}")));
    Ok(SituationFile {
        situation,
        solver,
        warnings,
    })
}

fn solver_config(v: &Value, warnings: &mut Vec<String>) -> Result<SolverConfig> {
    let at = "$.solver";
    let obj = object(v, at)?;
    let mut cfg = SolverConfig::default();
    for (key, val) in obj {
        let here = format!("{at}.{key}");
        match key.as_str() {
            "initial_resolution" => cfg.initial_resolution = count(val, &here)?,
            "rounds" => cfg.rounds = count(val, &here)?,
            "shrink" => cfg.shrink = number(val, &here)?,
            "tol" => cfg.tol = number(val, &here)?,
            "max_dims" => cfg.max_dims = count(val, &here)?,
            "max_grid_points" => cfg.max_grid_points = count(val, &here)?,
            "max_players" => cfg.max_players = count(val, &here)?,
            _ => warnings.push(format!("warning: unknown key {here} ignored")),
        }
    }
    cfg.check().map_err(|e| Error::Parse {
        location: at.into(),
        message: e.to_string(),
    })?;
    Ok(cfg)
}

fn function(v: &Value, at: &str, warnings: &mut Vec<String>) -> Result<PiecewiseLinearFn> {
    let obj = object(v, at)?;
    unknown_keys(obj, at, &["knots"], warnings);
    let here = format!("{at}.knots");
    let knots = array(field(obj, at, "knots")?, &here)?
        .iter()
        .enumerate()
        .map(|(k, pair)| {
            let kat = format!("{here}[{k}]");
            match array(pair, &kat)?.as_slice() {
                [x, y] => Ok((number(x, &format!("{kat}[0]"))?, number(y, &format!("{kat}[1]"))?)),
                _ => Err(Error::Parse {
                    location: kat,
                    message: "a knot is an [x, y] pair".into(),
                }),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    PiecewiseLinearFn::new(knots).map_err(|e| Error::Parse {
        location: here,
        message: e.to_string(),
    })
}

fn id(obj: &Map<String, Value>, at: &str, k: usize) -> Result<String> {
    match obj.get("id") {
        None => Ok((k + 1).to_string()),
        Some(Value::String(s)) => Ok(s.clone()),
        Some(Value::Number(n)) => Ok(n.to_string()),
        Some(_) => Err(Error::Parse {
            location: format!("{at}.id"),
            message: "id must be a string or number".into(),
        }),
    }
}

fn field<'a>(obj: &'a Map<String, Value>, at: &str, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| Error::Parse {
        location: at.into(),
        message: format!("missing key \"{key}\""),
    })
}

fn object<'a>(v: &'a Value, at: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| Error::Parse {
        location: at.into(),
        message: "expected an object".into(),
    })
}

fn array<'a>(v: &'a Value, at: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| Error::Parse {
        location: at.into(),
        message: "expected an array".into(),
    })
}

fn unknown_keys(obj: &Map<String, Value>, at: &str, known: &[&str], warnings: &mut Vec<String>) {
    for key in obj.keys().filter(|k| !known.contains(&k.as_str())) {
        warnings.push(format!("warning: unknown key {at}.{key} ignored"));
    }
}

fn count(v: &Value, at: &str) -> Result<usize> {
    v.as_u64().map(|c| c as usize).ok_or_else(|| Error::Parse {
        location: at.into(),
        message: "expected a nonnegative integer".into(),
    })
}

/// A JSON number, or a string holding a decimal or a fraction `a/b`.
pub fn number(v: &Value, at: &str) -> Result<f64> {
    let bad = |message: String| Error::Parse {
        location: at.into(),
        message,
    };
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| bad(format!("{n} is not representable"))),
        Value::String(s) => parse_number(s).ok_or_else(|| bad(format!("\"{s}\" is not a decimal or fraction"))),
        _ => Err(bad("expected a number".into())),
    }
}

pub fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    let value = match s.split_once('/') {
        Some((num, den)) => {
            let (a, b): (f64, f64) = (num.trim().parse().ok()?, den.trim().parse().ok()?);
            if b == 0.0 {
                return None;
            }
            a / b
        }
        None => s.parse().ok()?,
    };
    value.is_finite().then_some(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "retailers": [{"id": 1, "price": {"knots": [[0, 5], [50, 0]]}}],
        "suppliers": [{"id": "a", "wholesale": {"knots": [[0, "4"], [20, 3]]},
                       "cost": {"knots": [[0, 3], ["30", "3/2"]]}}],
        "capacity": [[10]],
        "colour": "blue"
    }"#;

    #[test]
    fn parses_numbers_in_every_form() {
        let file = parse_situation(MINIMAL).unwrap();
        let s = &file.situation;
        assert_eq!(s.retailers()[0].id, "1");
        assert_eq!(s.suppliers()[0].id, "a");
        assert_eq!(s.suppliers()[0].cost.knots()[1], (30.0, 1.5));
        assert_eq!(s.q_star(), &[50.0]);
        assert_eq!(file.warnings, vec!["warning: unknown key $.colour ignored"]);
    }

    #[test]
    fn syntax_errors_carry_a_location() {
        let err = parse_situation("{\n  \"retailers\": [,]\n}").unwrap_err();
        assert!(err.to_string().starts_with("line 2"), "{err}");
    }

    #[test]
    fn structural_errors_carry_a_path() {
        let text = MINIMAL.replace("[[0, 5], [50, 0]]", "[[0, 5, 1]]");
        let err = parse_situation(&text).unwrap_err();
        assert!(err.to_string().contains("$.retailers[0].price.knots[0]"), "{err}");
    }

    #[test]
    fn fractions_and_decimals() {
        assert_eq!(parse_number("2/3"), Some(2.0 / 3.0));
        assert_eq!(parse_number(" 113.333333333333 "), Some(113.333333333333));
        assert_eq!(parse_number("1/0"), None);
        assert_eq!(parse_number("abc"), None);
    }
}

//! The report document and its three renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::{bail, Result};
use chaincore::allocation::{AxiomResult, AxiomWitness, CoreViolation};
use chaincore::game::StructureReport;
use chaincore::{Allocation, Coalition, CoalitionPair, CoreReport, Situation, SolverConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Significant digits kept for every number in an emitted report.
pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub command: String,
    pub fingerprint: String,
    pub solver: SolverConfig,
    pub retailers: Vec<String>,
    pub suppliers: Vec<String>,
    pub unbounded: bool,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<ValueRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<Vec<StructureEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimal_suppliers: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub allocations: Vec<AllocationEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub supplier_max: Vec<SupplierMax>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<String, f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueRow {
    pub retailers: Vec<String>,
    pub suppliers: Vec<String>,
    pub value: f64,
    /// One row per member of `retailers`, one column per supplier.
    pub orders: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureEntry {
    pub property: String,
    pub checked: usize,
    pub worst_margin: Option<f64>,
    pub violations: Vec<PairMargin>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairMargin {
    pub retailers: Vec<String>,
    pub suppliers: Vec<String>,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationEntry {
    pub rule: String,
    /// Retailers first, then suppliers, in file order.
    pub payoffs: Vec<f64>,
    pub beta: Option<f64>,
    pub witness: Option<Witness>,
    pub core: CoreEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axioms: Option<Vec<AxiomEntry>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub retailers: Vec<String>,
    pub removed_supplier: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoreEntry {
    pub member: bool,
    pub checked: usize,
    pub efficiency_gap: f64,
    pub worst_violation: Option<Deficit>,
    pub violations: Vec<Deficit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deficit {
    pub retailers: Vec<String>,
    pub suppliers: Vec<String>,
    pub deficit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomEntry {
    pub axiom: String,
    pub pass: bool,
    pub margin: f64,
    pub witness: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupplierMax {
    pub supplier: String,
    pub value: f64,
}

/// Maps player indices to the ids used in the situation file.
pub struct Names<'a> {
    situation: &'a Situation,
}

impl<'a> Names<'a> {
    pub fn new(situation: &'a Situation) -> Self {
        Self { situation }
    }

    pub fn retailer(&self, i: usize) -> String {
        self.situation.retailers()[i].id.clone()
    }

    pub fn supplier(&self, j: usize) -> String {
        self.situation.suppliers()[j].id.clone()
    }

    pub fn retailers(&self, c: Coalition) -> Vec<String> {
        c.members().map(|i| self.retailer(i)).collect()
    }

    pub fn suppliers(&self, c: Coalition) -> Vec<String> {
        c.members().map(|j| self.supplier(j)).collect()
    }

    fn deficit(&self, v: &CoreViolation) -> Deficit {
        Deficit {
            retailers: self.retailers(v.pair.retailers),
            suppliers: self.suppliers(v.pair.suppliers),
            deficit: v.deficit,
        }
    }

    pub fn core(&self, r: &CoreReport) -> CoreEntry {
        CoreEntry {
            member: r.member,
            checked: r.checked,
            efficiency_gap: r.efficiency_gap,
            worst_violation: r.worst_violation.as_ref().map(|v| self.deficit(v)),
            violations: r.violations.iter().map(|v| self.deficit(v)).collect(),
        }
    }

    pub fn allocation(&self, x: &Allocation, core: &CoreReport, axioms: Option<&[AxiomResult]>) -> AllocationEntry {
        AllocationEntry {
            rule: x.rule.to_string(),
            payoffs: x.payoffs.clone(),
            beta: x.beta,
            witness: x.witness.map(|w| Witness {
                retailers: self.retailers(w.retailers),
                removed_supplier: self.supplier(w.supplier),
            }),
            core: self.core(core),
            axioms: axioms.map(|all| all.iter().map(|a| self.axiom(a)).collect()),
        }
    }

    fn axiom(&self, a: &AxiomResult) -> AxiomEntry {
        let witness = a.witness.as_ref().map(|w| match w {
            AxiomWitness::Efficiency { total, target } => {
                format!("payoffs sum to {} instead of {}", num(*total), num(*target))
            }
            AxiomWitness::Stability {
                retailers,
                supplier,
                deficit,
            } => format!(
                "retailers {{{}}} fall {} short of v(R, M \\ {{{}}})",
                self.retailers(*retailers).join(","),
                num(*deficit),
                self.supplier(*supplier)
            ),
            AxiomWitness::Reduction { retailer, closest_gap } => format!(
                "retailer {} is {} away from every admissible reduction",
                self.retailer(*retailer),
                num(*closest_gap)
            ),
            AxiomWitness::Differences { first, second, gap } => format!(
                "retailers {} and {} differ by {} more than under the altruistic rule",
                self.retailer(*first),
                self.retailer(*second),
                num(*gap)
            ),
            AxiomWitness::Proportionality { first, second, gap } => format!(
                "suppliers {} and {} are off proportion by {}",
                self.supplier(*first),
                self.supplier(*second),
                num(*gap)
            ),
        });
        AxiomEntry {
            axiom: a.axiom.code().to_string(),
            pass: a.pass,
            margin: a.margin,
            witness,
        }
    }

    pub fn structure(&self, r: &StructureReport) -> StructureEntry {
        StructureEntry {
            property: serde_json::to_value(r.property)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
            checked: r.checked,
            worst_margin: r.worst_margin.is_finite().then_some(r.worst_margin),
            violations: r
                .violations
                .iter()
                .map(|v| PairMargin {
                    retailers: self.retailers(v.pair.retailers),
                    suppliers: self.suppliers(v.pair.suppliers),
                    margin: v.margin,
                })
                .collect(),
        }
    }

    pub fn pair(&self, p: CoalitionPair) -> String {
        format!(
            "R={{{}}}, S={{{}}}",
            self.retailers(p.retailers).join(","),
            self.suppliers(p.suppliers).join(",")
        )
    }
}

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits. The result prints
/// (shortest round-trip form) with at most that many digits.
pub fn round_significant(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0; // no signed zeros in reports
    }
    if !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Human-readable number: 12 significant digits, exponent form when tiny or huge.
pub fn num(x: f64) -> String {
    let r = round_significant(x);
    if r == 0.0 {
        "0".into()
    } else if r.abs() < 1e-4 || r.abs() >= 1e15 {
        format!("{r:e}")
    } else {
        r.to_string()
    }
}

fn canonical(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_significant(n.as_f64().unwrap_or(f64::NAN));
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonical).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, canonical(v))).collect()),
        other => other,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Markdown,
}

impl ReportDocument {
    /// Canonical JSON: sorted keys, numbers rounded to 12 significant digits.
    pub fn to_json(&self) -> Result<String> {
        let value = canonical(serde_json::to_value(self)?);
        let mut text = serde_json::to_string_pretty(&value)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
            Format::Markdown => self.to_markdown(),
        }
    }

    /// The v-table one pair per row; without a v-table, the payoffs one
    /// player per row.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        if let Some(values) = &self.values {
            w.write_record(["retailers", "suppliers", "value", "orders"])?;
            for row in values {
                let orders = row.orders.as_ref().map_or(String::new(), |rows| {
                    rows.iter()
                        .map(|r| r.iter().map(|x| num(*x)).collect::<Vec<_>>().join(" "))
                        .collect::<Vec<_>>()
                        .join("; ")
                });
                w.write_record([
                    row.retailers.join(" "),
                    row.suppliers.join(" "),
                    num(row.value),
                    orders,
                ])?;
            }
        } else if !self.allocations.is_empty() {
            w.write_record(["rule", "player", "payoff"])?;
            for a in &self.allocations {
                for (label, x) in self.player_labels().iter().zip(&a.payoffs) {
                    w.write_record([a.rule.as_str(), label.as_str(), &num(*x)])?;
                }
            }
        } else {
            bail!("build required: the report has no v-table or allocation to render");
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }

    fn player_labels(&self) -> Vec<String> {
        self.retailers
            .iter()
            .map(|r| format!("retailer {r}"))
            .chain(self.suppliers.iter().map(|s| format!("supplier {s}")))
            .collect()
    }

    pub fn to_markdown(&self) -> Result<String> {
        if self.values.is_none() && self.allocations.is_empty() && self.supplier_max.is_empty() {
            bail!("build required: the report has no v-table or allocation to render");
        }
        let mut out = String::new();
        let set = |ids: &[String]| {
            if ids.is_empty() {
                "∅".to_string()
            } else {
                format!("{{{}}}", ids.join(","))
            }
        };
        if let Some(values) = &self.values {
            out.push_str("| R | S |");
            for r in &self.retailers {
                write!(out, " q_{r} |")?;
            }
            out.push_str(" v(R,S) |\n|---|---|");
            for _ in &self.retailers {
                out.push_str("---|");
            }
            out.push_str("---|\n");
            for row in values.iter().filter(|r| !r.retailers.is_empty()) {
                write!(out, "| {} | {} |", set(&row.retailers), set(&row.suppliers))?;
                for id in &self.retailers {
                    let cell = row
                        .retailers
                        .iter()
                        .position(|r| r == id)
                        .and_then(|k| row.orders.as_ref().map(|o| &o[k]))
                        .map_or("-".to_string(), |q| {
                            format!("({})", q.iter().map(|x| num(*x)).collect::<Vec<_>>().join(", "))
                        });
                    write!(out, " {cell} |")?;
                }
                writeln!(out, " {} |", num(row.value))?;
            }
        }
        if let Some(m) = &self.optimal_suppliers {
            writeln!(out, "\nOptimal suppliers: {}", set(m))?;
        }
        for a in &self.allocations {
            writeln!(out, "\n### {}\n", a.rule)?;
            out.push_str("| player | payoff |\n|---|---|\n");
            for (label, x) in self.player_labels().iter().zip(&a.payoffs) {
                writeln!(out, "| {label} | {} |", num(*x))?;
            }
            if let Some(b) = a.beta {
                writeln!(out, "\nbeta = {}", num(b))?;
            }
            if let Some(w) = &a.witness {
                writeln!(
                    out,
                    "attained at R = {}, without supplier {}",
                    set(&w.retailers),
                    w.removed_supplier
                )?;
            }
            match &a.core.worst_violation {
                None => out.push_str("core: member\n"),
                Some(d) => writeln!(
                    out,
                    "core: not a member; worst violation R = {}, S = {} short by {}",
                    set(&d.retailers),
                    set(&d.suppliers),
                    num(d.deficit)
                )?,
            }
            if let Some(axioms) = &a.axioms {
                out.push_str("\n| axiom | result | margin |\n|---|---|---|\n");
                for ax in axioms {
                    let result = if ax.pass { "pass" } else { "fail" };
                    writeln!(out, "| {} | {result} | {} |", ax.axiom, num(ax.margin))?;
                }
            }
        }
        if !self.supplier_max.is_empty() {
            out.push_str("\n| supplier | max core payoff |\n|---|---|\n");
            for s in &self.supplier_max {
                writeln!(out, "| {} | {} |", s.supplier, num(s.value))?;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round_significant(113.33333333333333), 113.333333333);
        assert_eq!(round_significant(20.000000000002164), 20.0);
        assert_eq!(round_significant(-1.5883129092751913e-12), -1.58831290928e-12);
        assert_eq!(round_significant(0.0), 0.0);
        assert_eq!(num(2904.545454545454), "2904.54545455");
        assert_eq!(num(6.00983867116e-8), "6.00983867116e-8");
    }

    #[test]
    fn canonical_values_survive_reparsing() {
        for x in [1.0 / 3.0, 2904.545454545454, 1e-13, 123456789.12345679] {
            let r = round_significant(x);
            let text = serde_json::to_string(&r).unwrap();
            let back: f64 = serde_json::from_str(&text).unwrap();
            assert_eq!(back.to_bits(), r.to_bits());
            assert_eq!(round_significant(r), r);
        }
    }
}

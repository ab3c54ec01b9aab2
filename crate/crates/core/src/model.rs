//! Distribution-chain situations: retailers, suppliers, capacities, and the
//! checks that every situation must pass before a game is built from it.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::pwl::PiecewiseLinearFn;

/// Slack applied to the strict inequalities of the standing assumptions.
pub const VALIDATION_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetailerSpec {
    pub id: String,
    /// Unit selling price as a function of the quantity sold.
    pub price: PiecewiseLinearFn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupplierSpec {
    pub id: String,
    /// Unit wholesale price charged to retailers.
    pub wholesale: PiecewiseLinearFn,
    /// Unit production cost.
    pub cost: PiecewiseLinearFn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capacity {
    /// `bounds[i][j]` is the most retailer `i` may order from supplier `j`.
    Bounded(Vec<Vec<f64>>),
    Unbounded,
}

/// A situation as read from input, before validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MrsSituation {
    pub retailers: Vec<RetailerSpec>,
    pub suppliers: Vec<SupplierSpec>,
    pub capacity: Capacity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    NoRetailers,
    NoSuppliers,
    PriceNeverVanishes,
    PriceIncreasing,
    WholesaleIncreasing,
    CostIncreasing,
    WholesaleRevenueDecreasing,
    CostVolumeDecreasing,
    WholesaleNotAboveCost,
    PriceNotAboveWholesale,
    CapacityShape,
    CapacityNotPositive,
}

impl Rule {
    pub fn message(self) -> &'static str {
        match self {
            Rule::NoRetailers => "at least one retailer required",
            Rule::NoSuppliers => "at least one supplier required",
            Rule::PriceNeverVanishes => "price never vanishes",
            Rule::PriceIncreasing => "price must be non-increasing up to q*",
            Rule::WholesaleIncreasing => "wholesale price must be non-increasing",
            Rule::CostIncreasing => "production cost must be non-increasing",
            Rule::WholesaleRevenueDecreasing => "q*w(q) must be non-decreasing",
            Rule::CostVolumeDecreasing => "q*c(q) should be non-decreasing",
            Rule::WholesaleNotAboveCost => "wholesale must exceed cost",
            Rule::PriceNotAboveWholesale => "p(0) > w_j(0) required",
            Rule::CapacityShape => "capacity matrix must be n x m",
            Rule::CapacityNotPositive => "capacity entries must be positive and finite",
        }
    }
}

/// One failed check, naming the offending function and where it failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub subject: String,
    pub quantity: Option<f64>,
    pub rule: Rule,
}

impl Violation {
    fn new(subject: impl Into<String>, quantity: Option<f64>, rule: Rule) -> Self {
        Self {
            subject: subject.into(),
            quantity,
            rule,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.rule.message())?;
        if let Some(q) = self.quantity {
            // 12 significant digits hide the rounding noise of computed points
            let q: f64 = format!("{q:.11e}").parse().unwrap_or(q);
            write!(f, " (at q = {q})")?;
        }
        Ok(())
    }
}

/// A situation that passed validation, with `q*` and effective bounds cached.
#[derive(Clone, Debug, PartialEq)]
pub struct Situation {
    raw: MrsSituation,
    q_star: Vec<f64>,
    bounds: Vec<Vec<f64>>,
    warnings: Vec<Violation>,
}

impl MrsSituation {
    /// Checks the standing assumptions. Returns every violation found.
    ///
    /// Failures of `q*c(q)` monotonicity come back as warnings on the
    /// validated situation instead of violations.
    pub fn validate(self) -> Result<Situation, Vec<Violation>> {
        let mut violations = Vec::new();
        let mut warnings = Vec::new();
        if self.retailers.is_empty() {
            violations.push(Violation::new("situation", None, Rule::NoRetailers));
        }
        if self.suppliers.is_empty() {
            violations.push(Violation::new("situation", None, Rule::NoSuppliers));
        }
        if self.retailers.len() + self.suppliers.len() > 31 {
            violations.push(Violation::new("situation", None, Rule::CapacityShape));
        }

        let mut q_star = Vec::with_capacity(self.retailers.len());
        for r in &self.retailers {
            let subject = format!("retailer {} price", r.id);
            match r.price.find_root() {
                Ok(root) => {
                    if let Some(q) = first_increase(&r.price, Some(root)) {
                        violations.push(Violation::new(&subject, Some(q), Rule::PriceIncreasing));
                    }
                    q_star.push(root);
                }
                Err(_) => {
                    violations.push(Violation::new(&subject, None, Rule::PriceNeverVanishes));
                    q_star.push(f64::NAN);
                }
            }
        }

        for s in &self.suppliers {
            let w = format!("supplier {} wholesale", s.id);
            let c = format!("supplier {} cost", s.id);
            if let Some(q) = first_increase(&s.wholesale, None) {
                violations.push(Violation::new(&w, Some(q), Rule::WholesaleIncreasing));
            }
            if let Some(q) = first_increase(&s.cost, None) {
                violations.push(Violation::new(&c, Some(q), Rule::CostIncreasing));
            }
            if let Some(q) = first_volume_decrease(&s.wholesale) {
                violations.push(Violation::new(&w, Some(q), Rule::WholesaleRevenueDecreasing));
            }
            if let Some(q) = first_volume_decrease(&s.cost) {
                warnings.push(Violation::new(&c, Some(q), Rule::CostVolumeDecreasing));
            }
            if let Some(q) = first_not_above(&s.wholesale, &s.cost) {
                violations.push(Violation::new(
                    format!("supplier {}", s.id),
                    Some(q),
                    Rule::WholesaleNotAboveCost,
                ));
            }
        }

        for r in &self.retailers {
            let p0 = r.price.value_at(0.0);
            for s in &self.suppliers {
                if p0 <= s.wholesale.value_at(0.0) {
                    violations.push(Violation::new(
                        format!("retailer {} / supplier {}", r.id, s.id),
                        Some(0.0),
                        Rule::PriceNotAboveWholesale,
                    ));
                }
            }
        }

        let (n, m) = (self.retailers.len(), self.suppliers.len());
        let bounds = match &self.capacity {
            Capacity::Unbounded => q_star.iter().map(|&q| vec![q; m]).collect(),
            Capacity::Bounded(rows) => {
                if rows.len() != n || rows.iter().any(|row| row.len() != m) {
                    violations.push(Violation::new("capacity", None, Rule::CapacityShape));
                } else {
                    for (i, row) in rows.iter().enumerate() {
                        for (j, &b) in row.iter().enumerate() {
                            if !(b.is_finite() && b > 0.0) {
                                violations.push(Violation::new(
                                    format!("capacity[{}][{}]", i + 1, j + 1),
                                    Some(b),
                                    Rule::CapacityNotPositive,
                                ));
                            }
                        }
                    }
                }
                rows.clone()
            }
        };

        if violations.is_empty() {
            Ok(Situation {
                raw: self,
                q_star,
                bounds,
                warnings,
            })
        } else {
            Err(violations)
        }
    }
}

/// First knot where `f` rises, looking only up to `limit` when given.
fn first_increase(f: &PiecewiseLinearFn, limit: Option<f64>) -> Option<f64> {
    f.knots()
        .windows(2)
        .take_while(|w| limit.is_none_or(|l| w[0].0 < l))
        .find(|w| w[1].1 > w[0].1 + VALIDATION_SLACK)
        .map(|w| w[0].0)
}

/// First quantity where `q * f(q)` decreases.
///
/// On a piece `f(q) = y0 + s (q - x0)` the derivative of `q f(q)` is
/// `f(q) + s q`, linear in `q`, so checking both piece ends covers the
/// interior stationary point. The constant tail needs `f >= 0`.
fn first_volume_decrease(f: &PiecewiseLinearFn) -> Option<f64> {
    for (x0, x1, slope, y0) in f.pieces() {
        let y1 = y0 + slope * (x1 - x0);
        let at_start = y0 + slope * x0;
        let at_end = y1 + slope * x1;
        if at_start < -VALIDATION_SLACK {
            return Some(x0);
        }
        if at_end < -VALIDATION_SLACK {
            // stationary point of q f(q) inside the piece
            let stationary = if slope < 0.0 {
                (-(y0 - slope * x0) / (2.0 * slope)).clamp(x0, x1)
            } else {
                x0
            };
            return Some(stationary);
        }
    }
    (f.tail_value() < -VALIDATION_SLACK).then(|| f.last_x())
}

/// First grid point where `upper(q) >= lower(q) + slack` fails. Both are
/// linear between the union of their knots, so the union grid suffices.
fn first_not_above(upper: &PiecewiseLinearFn, lower: &PiecewiseLinearFn) -> Option<f64> {
    let mut xs: Vec<f64> = upper
        .knots()
        .iter()
        .chain(lower.knots())
        .map(|k| k.0)
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs.into_iter()
        .find(|&q| upper.value_at(q) < lower.value_at(q) + VALIDATION_SLACK)
}

impl Situation {
    pub fn n(&self) -> usize {
        self.raw.retailers.len()
    }

    pub fn m(&self) -> usize {
        self.raw.suppliers.len()
    }

    pub fn retailers(&self) -> &[RetailerSpec] {
        &self.raw.retailers
    }

    pub fn suppliers(&self) -> &[SupplierSpec] {
        &self.raw.suppliers
    }

    pub fn capacity(&self) -> &Capacity {
        &self.raw.capacity
    }

    pub fn is_unbounded(&self) -> bool {
        matches!(self.raw.capacity, Capacity::Unbounded)
    }

    /// Quantity at which each retailer's price reaches zero.
    pub fn q_star(&self) -> &[f64] {
        &self.q_star
    }

    /// Effective order bound for retailer `i` and supplier `j`. Unbounded
    /// production uses `q*_i`, which the row constraint enforces anyway.
    pub fn bound(&self, i: usize, j: usize) -> f64 {
        self.bounds[i][j]
    }

    pub fn warnings(&self) -> &[Violation] {
        &self.warnings
    }

    pub fn raw(&self) -> &MrsSituation {
        &self.raw
    }

    pub fn all_retailers(&self) -> Coalition {
        Coalition::full(self.n())
    }

    pub fn all_suppliers(&self) -> Coalition {
        Coalition::full(self.m())
    }

    /// Content hash of the situation: ids, every knot and the capacity, bit for bit.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        let put_fn = |h: &mut Sha256, tag: &str, f: &PiecewiseLinearFn| {
            h.update(tag.as_bytes());
            h.update((f.knots().len() as u64).to_le_bytes());
            for &(x, y) in f.knots() {
                h.update(x.to_bits().to_le_bytes());
                h.update(y.to_bits().to_le_bytes());
            }
        };
        h.update(b"mrs-situation/v1");
        for r in &self.raw.retailers {
            h.update((r.id.len() as u64).to_le_bytes());
            h.update(r.id.as_bytes());
            put_fn(&mut h, "p", &r.price);
        }
        for s in &self.raw.suppliers {
            h.update((s.id.len() as u64).to_le_bytes());
            h.update(s.id.as_bytes());
            put_fn(&mut h, "w", &s.wholesale);
            put_fn(&mut h, "c", &s.cost);
        }
        match &self.raw.capacity {
            Capacity::Unbounded => h.update(b"unbounded"),
            Capacity::Bounded(rows) => {
                h.update(b"bounded");
                for &b in rows.iter().flatten() {
                    h.update(b.to_bits().to_le_bytes());
                }
            }
        }
        hex::encode(h.finalize())
    }

    /// Same chain with every price, wholesale and cost function multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let raw = MrsSituation {
            retailers: self
                .raw
                .retailers
                .iter()
                .map(|r| RetailerSpec {
                    id: r.id.clone(),
                    price: r.price.scaled(factor),
                })
                .collect(),
            suppliers: self
                .raw
                .suppliers
                .iter()
                .map(|s| SupplierSpec {
                    id: s.id.clone(),
                    wholesale: s.wholesale.scaled(factor),
                    cost: s.cost.scaled(factor),
                })
                .collect(),
            capacity: self.raw.capacity.clone(),
        };
        raw.validate().map_err(Error::Invalid)
    }
}

/// Order quantities `q_ij` for the retailers of one coalition against every supplier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderMatrix {
    retailers: Coalition,
    suppliers: usize,
    /// Row-major, one row per member of `retailers` in increasing order.
    entries: Vec<f64>,
}

impl OrderMatrix {
    pub fn zeros(retailers: Coalition, suppliers: usize) -> Self {
        Self {
            retailers,
            suppliers,
            entries: vec![0.0; retailers.len() * suppliers],
        }
    }

    pub fn from_rows(retailers: Coalition, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != retailers.len() {
            return Err(Error::Domain(format!(
                "order matrix has {} rows but the coalition has {} retailers",
                rows.len(),
                retailers.len()
            )));
        }
        let suppliers = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != suppliers) {
            return Err(Error::Domain("order matrix rows have unequal lengths".into()));
        }
        Self::from_flat(retailers, suppliers, rows.concat())
    }

    pub fn from_flat(retailers: Coalition, suppliers: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != retailers.len() * suppliers {
            return Err(Error::Domain("order matrix has the wrong number of entries".into()));
        }
        if let Some(q) = entries.iter().find(|q| !(q.is_finite() && **q >= 0.0)) {
            return Err(Error::Domain(format!("order quantity {q} is not a nonnegative number")));
        }
        Ok(Self {
            retailers,
            suppliers,
            entries,
        })
    }

    pub fn retailers(&self) -> Coalition {
        self.retailers
    }

    pub fn suppliers(&self) -> usize {
        self.suppliers
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    /// Row of retailer `i` (an index into `N`), if it belongs to the coalition.
    pub fn row(&self, i: usize) -> Option<&[f64]> {
        let pos = self.retailers.members().position(|k| k == i)?;
        Some(&self.entries[pos * self.suppliers..(pos + 1) * self.suppliers])
    }

    pub fn rows(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.retailers
            .members()
            .zip(self.entries.chunks(self.suppliers.max(1)))
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.row(i).and_then(|r| r.get(j).copied())
    }

    /// `q_Rj`: total ordered from supplier `j`.
    pub fn column_total(&self, j: usize) -> f64 {
        self.entries.iter().skip(j).step_by(self.suppliers).sum()
    }

    /// `q_RM`: everything ordered.
    pub fn total(&self) -> f64 {
        self.entries.iter().sum()
    }

    /// Largest violation of `q in Q^R` (zero when feasible).
    pub fn infeasibility(&self, situation: &Situation) -> f64 {
        let mut worst = 0.0f64;
        for (i, row) in self.rows() {
            let sum: f64 = row.iter().sum();
            worst = worst.max(sum - situation.q_star()[i]);
            for (j, &q) in row.iter().enumerate() {
                worst = worst.max(q - situation.bound(i, j)).max(-q);
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pl(knots: &[(f64, f64)]) -> PiecewiseLinearFn {
        PiecewiseLinearFn::new(knots.to_vec()).unwrap()
    }

    fn single(w: PiecewiseLinearFn, c: PiecewiseLinearFn, p0: f64) -> MrsSituation {
        MrsSituation {
            retailers: vec![RetailerSpec {
                id: "1".into(),
                price: pl(&[(0.0, p0), (50.0, 0.0)]),
            }],
            suppliers: vec![SupplierSpec {
                id: "1".into(),
                wholesale: w,
                cost: c,
            }],
            capacity: Capacity::Bounded(vec![vec![10.0]]),
        }
    }

    #[test]
    fn wholesale_equal_to_cost_is_rejected() {
        let w = pl(&[(0.0, 4.0), (20.0, 3.0)]);
        let err = single(w.clone(), w, 5.0).validate().unwrap_err();
        assert!(err.iter().any(|v| v.rule == Rule::WholesaleNotAboveCost));
        assert!(err
            .iter()
            .any(|v| v.to_string().contains("wholesale must exceed cost")));
    }

    #[test]
    fn price_must_start_above_wholesale() {
        let s = single(pl(&[(0.0, 4.0), (20.0, 3.0)]), pl(&[(0.0, 2.0)]), 4.0);
        let err = s.validate().unwrap_err();
        assert_eq!(err.len(), 1);
        assert_eq!(err[0].rule, Rule::PriceNotAboveWholesale);
        assert!(err[0].to_string().contains("p(0) > w_j(0) required"));
    }

    #[test]
    fn unbounded_capacity_uses_q_star() {
        let mut s = single(pl(&[(0.0, 4.0), (20.0, 3.0)]), pl(&[(0.0, 2.0)]), 5.0);
        s.capacity = Capacity::Unbounded;
        let v = s.validate().unwrap();
        assert_eq!(v.q_star(), &[50.0]);
        assert_eq!(v.bound(0, 0), 50.0);
    }

    #[test]
    fn volume_check_finds_interior_peak() {
        // q (2 - q/30) peaks at q = 30 inside [0, 40]
        let c = pl(&[(0.0, 2.0), (40.0, 2.0 / 3.0)]);
        let q = first_volume_decrease(&c).unwrap();
        assert!((q - 30.0).abs() < 1e-9);
        assert_eq!(first_volume_decrease(&pl(&[(0.0, 3.0), (30.0, 1.5)])), None);
    }

    #[test]
    fn order_matrix_accessors() {
        let q = OrderMatrix::from_rows(
            Coalition::from_members([0, 2]),
            vec![vec![1.0, 2.0], vec![3.0, 4.0]],
        )
        .unwrap();
        assert_eq!(q.row(2), Some(&[3.0, 4.0][..]));
        assert_eq!(q.row(1), None);
        assert_eq!(q.column_total(1), 6.0);
        assert_eq!(q.total(), 10.0);
        assert!(OrderMatrix::from_rows(Coalition::singleton(0), vec![vec![-1.0]]).is_err());
    }
}

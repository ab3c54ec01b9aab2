//! Allocation rules over a built characteristic function, core membership,
//! and the five axioms that single out the supplier-compensation rule.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::coalition::{Coalition, CoalitionPair};
use crate::error::{Error, Result};
use crate::game::{tolerance, CharacteristicFunction};
use crate::model::OrderMatrix;
use crate::optimizer::retailer_profits;
use crate::simplex::{LpOutcome, StandardLp};

/// Relative relaxation of coalition constraints in the supplier-maximum LP,
/// absorbing solver noise between values that are equal in exact arithmetic.
const LP_RELAX: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationRule {
    Altruistic,
    Sc,
    ScStar,
    External,
}

impl fmt::Display for AllocationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AllocationRule::Altruistic => "altruistic",
            AllocationRule::Sc => "sc",
            AllocationRule::ScStar => "sc-star",
            AllocationRule::External => "external",
        })
    }
}

/// The `(R, j)` attaining the per-capita minimum that defines beta.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BetaWitness {
    pub retailers: Coalition,
    /// Index of the supplier removed from `M`.
    pub supplier: usize,
}

/// Payoffs over `N` then `M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub payoffs: Vec<f64>,
    pub rule: AllocationRule,
    pub beta: Option<f64>,
    pub witness: Option<BetaWitness>,
    /// Grand-coalition orders the rule read, kept for audit.
    pub orders: Option<OrderMatrix>,
}

impl Allocation {
    pub fn external(payoffs: Vec<f64>) -> Self {
        Self {
            payoffs,
            rule: AllocationRule::External,
            beta: None,
            witness: None,
            orders: None,
        }
    }

    pub fn total(&self) -> f64 {
        self.payoffs.iter().sum()
    }

    /// Sum of payoffs over the players of `pair`.
    pub fn coalition_total(&self, pair: CoalitionPair, n: usize) -> f64 {
        pair.retailers.members().map(|i| self.payoffs[i]).sum::<f64>()
            + pair.suppliers.members().map(|j| self.payoffs[n + j]).sum::<f64>()
    }
}

fn ensure_efficient(cf: &CharacteristicFunction, alloc: &Allocation) -> Result<()> {
    let v = cf.grand_value();
    if (alloc.total() - v).abs() > tolerance(v) {
        return Err(Error::Internal(format!(
            "{} allocation sums to {} but v(N, M) = {v}",
            alloc.rule,
            alloc.total()
        )));
    }
    Ok(())
}

/// Retailer profits at the grand-coalition optimum: `x^a_i`.
pub fn altruistic_retailer_payoffs(cf: &CharacteristicFunction) -> Result<Vec<f64>> {
    retailer_profits(cf.situation(), cf.grand(), cf.grand_orders())
}

/// Every retailer keeps its grand-coalition profit; suppliers get nothing.
pub fn altruistic(cf: &CharacteristicFunction) -> Result<Allocation> {
    let mut payoffs = altruistic_retailer_payoffs(cf)?;
    payoffs.resize(cf.n() + cf.m(), 0.0);
    let alloc = Allocation {
        payoffs,
        rule: AllocationRule::Altruistic,
        beta: None,
        witness: None,
        orders: Some(cf.grand_orders().clone()),
    };
    ensure_efficient(cf, &alloc)?;
    Ok(alloc)
}

/// Per-capita gain of `R` over its best alternative without supplier `j`.
fn per_capita_gain(cf: &CharacteristicFunction, xa: &[f64], r: Coalition, j: usize, divisor: f64) -> f64 {
    let full = Coalition::full(cf.m());
    let held: f64 = r.members().map(|i| xa[i]).sum();
    (held - cf.v(r, full.without(j))) / (divisor * r.len() as f64)
}

/// Extremum of the per-capita gain over nonempty `R` and `j` in `suppliers`.
/// Ties keep the smallest `(R, j)`.
fn gain_extremum(
    cf: &CharacteristicFunction,
    xa: &[f64],
    suppliers: Coalition,
    divisor: f64,
    want_max: bool,
) -> Result<(f64, BetaWitness)> {
    let mut best: Option<(f64, BetaWitness)> = None;
    for r in Coalition::all(cf.n()).skip(1) {
        for j in suppliers.members() {
            let g = per_capita_gain(cf, xa, r, j, divisor);
            let take = match best {
                None => true,
                Some((b, _)) => {
                    if want_max {
                        g > b
                    } else {
                        g < b
                    }
                }
            };
            if take {
                best = Some((
                    g,
                    BetaWitness {
                        retailers: r,
                        supplier: j,
                    },
                ));
            }
        }
    }
    best.ok_or_else(|| Error::Domain("beta needs at least one supplier".into()))
}

/// `beta = min over nonempty R, j in M of (sum_R x^a - v(R, M \ {j})) / |R|`.
pub fn beta(cf: &CharacteristicFunction) -> Result<(f64, BetaWitness)> {
    let xa = altruistic_retailer_payoffs(cf)?;
    gain_extremum(cf, &xa, Coalition::full(cf.m()), 1.0, false)
}

/// The same minimum restricted to suppliers in `suppliers`.
pub fn beta_restricted(cf: &CharacteristicFunction, suppliers: Coalition) -> Result<(f64, BetaWitness)> {
    if !suppliers.fits(cf.m()) {
        return Err(Error::Domain(format!("{suppliers} is not a supplier coalition")));
    }
    let xa = altruistic_retailer_payoffs(cf)?;
    gain_extremum(cf, &xa, suppliers, 1.0, false)
}

/// Retailers give up `amount` each; `|N| * amount` is spread over suppliers
/// in proportion to their share of the grand-coalition production.
fn compensate_by_production(
    cf: &CharacteristicFunction,
    xa: &[f64],
    amount: f64,
) -> Result<Vec<f64>> {
    let q = cf.grand_orders();
    let total = q.total();
    if total <= 0.0 {
        return Err(Error::Internal(
            "grand coalition orders nothing; positivity of v(N, M) is contradicted".into(),
        ));
    }
    let n = cf.n() as f64;
    let mut payoffs: Vec<f64> = xa.iter().map(|x| x - amount).collect();
    payoffs.extend((0..cf.m()).map(|j| q.column_total(j) * n * amount / total));
    Ok(payoffs)
}

/// Supplier-compensation allocation.
pub fn sc_allocation(cf: &CharacteristicFunction) -> Result<Allocation> {
    let xa = altruistic_retailer_payoffs(cf)?;
    let (b, witness) = gain_extremum(cf, &xa, Coalition::full(cf.m()), 1.0, false)?;
    let alloc = Allocation {
        payoffs: compensate_by_production(cf, &xa, b)?,
        rule: AllocationRule::Sc,
        beta: Some(b),
        witness: Some(witness),
        orders: Some(cf.grand_orders().clone()),
    };
    ensure_efficient(cf, &alloc)?;
    Ok(alloc)
}

/// Suppliers that reach the grand-coalition value alone with all retailers.
pub fn optimal_suppliers(cf: &CharacteristicFunction) -> Result<Coalition> {
    if !cf.situation().is_unbounded() {
        return Err(Error::RequiresUnbounded("M^o"));
    }
    let v = cf.grand_value();
    let all = Coalition::full(cf.n());
    Ok(Coalition::from_members(
        (0..cf.m()).filter(|&j| (cf.v(all, Coalition::singleton(j)) - v).abs() <= tolerance(v)),
    ))
}

/// Modified supplier-compensation allocation for unbounded production:
/// only optimal suppliers are compensated.
pub fn sc_star_allocation(cf: &CharacteristicFunction) -> Result<Allocation> {
    if !cf.situation().is_unbounded() {
        return Err(Error::RequiresUnbounded("the modified SC-allocation"));
    }
    let optimal = optimal_suppliers(cf)?;
    if optimal.is_empty() {
        return Err(Error::Internal("no optimal supplier found under unbounded production".into()));
    }
    let xa = altruistic_retailer_payoffs(cf)?;
    let (mut b, witness) = gain_extremum(cf, &xa, optimal, 1.0, false)?;
    if optimal.len() >= 2 {
        if b.abs() > tolerance(cf.grand_value()) {
            return Err(Error::Internal(format!(
                "beta* = {b} but two or more optimal suppliers force it to 0"
            )));
        }
        b = 0.0;
    }
    let n = cf.n();
    let mut payoffs: Vec<f64> = xa.iter().map(|x| x - b).collect();
    payoffs.extend((0..cf.m()).map(|j| if optimal.contains(j) { n as f64 * b } else { 0.0 }));
    let alloc = Allocation {
        payoffs,
        rule: AllocationRule::ScStar,
        beta: Some(b),
        witness: Some(witness),
        orders: Some(cf.grand_orders().clone()),
    };
    ensure_efficient(cf, &alloc)?;
    Ok(alloc)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoreViolation {
    pub pair: CoalitionPair,
    /// `v(R, S)` minus what the coalition receives.
    pub deficit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoreReport {
    pub member: bool,
    pub efficiency_gap: f64,
    pub worst_violation: Option<CoreViolation>,
    pub violations: Vec<CoreViolation>,
    pub checked: usize,
}

/// Checks efficiency and every coalition constraint.
pub fn core_check(cf: &CharacteristicFunction, x: &Allocation) -> Result<CoreReport> {
    let (n, m) = (cf.n(), cf.m());
    if x.payoffs.len() != n + m {
        return Err(Error::Domain(format!(
            "allocation has {} payoffs, expected {}",
            x.payoffs.len(),
            n + m
        )));
    }
    let v = cf.grand_value();
    let efficiency_gap = x.total() - v;
    let mut violations = Vec::new();
    let mut checked = 0;
    for (pair, entry) in cf.pairs() {
        checked += 1;
        let deficit = entry.value - x.coalition_total(pair, n);
        if deficit > tolerance(entry.value) {
            violations.push(CoreViolation { pair, deficit });
        }
    }
    let worst_violation = violations
        .iter()
        .copied()
        .fold(None, |acc: Option<CoreViolation>, v| match acc {
            Some(a) if a.deficit >= v.deficit => Some(a),
            _ => Some(v),
        });
    Ok(CoreReport {
        member: efficiency_gap.abs() <= tolerance(v) && violations.is_empty(),
        efficiency_gap,
        worst_violation,
        violations,
        checked,
    })
}

/// Largest payoff supplier `j` can receive over the core, by linear programming.
///
/// The primal `max y_j` over the core has `n + m` free variables and one row
/// per coalition. It is solved through its dual, which has one equality per
/// player: `-sum_{r containing p} lambda_r + mu = [p == j]`, minimising
/// `-sum_r v_r lambda_r + v(N, M) mu`.
pub fn core_supplier_max(cf: &CharacteristicFunction, j: usize) -> Result<f64> {
    let (n, m) = (cf.n(), cf.m());
    if j >= m {
        return Err(Error::Domain(format!("supplier {} does not exist", j + 1)));
    }
    let grand = cf.grand();
    let rows: Vec<(CoalitionPair, f64)> = cf
        .pairs()
        .filter(|(p, _)| *p != grand && !(p.retailers.is_empty() && p.suppliers.is_empty()))
        .map(|(p, e)| (p, e.value - LP_RELAX * (1.0 + e.value.abs())))
        .collect();
    let players = n + m;
    let cols = rows.len() + 2;
    let mut a = vec![vec![0.0; cols]; players];
    for (k, (pair, _)) in rows.iter().enumerate() {
        for i in pair.retailers.members() {
            a[i][k] = -1.0;
        }
        for s in pair.suppliers.members() {
            a[n + s][k] = -1.0;
        }
    }
    for row in a.iter_mut() {
        row[cols - 2] = 1.0;
        row[cols - 1] = -1.0;
    }
    let mut b = vec![0.0; players];
    b[n + j] = 1.0;
    let v = cf.grand_value();
    let mut c: Vec<f64> = rows.iter().map(|(_, val)| -val).collect();
    c.push(v);
    c.push(-v);
    match (StandardLp { a, b, c }).solve()? {
        LpOutcome::Optimal { value, .. } => Ok(value),
        LpOutcome::Unbounded => Err(Error::Internal(
            "core empty: the core LP is infeasible, contradicting balancedness; rerun with a tighter solver tolerance".into(),
        )),
        LpOutcome::Infeasible => Err(Error::Internal("core LP dual is infeasible".into())),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axiom {
    #[serde(rename = "EF")]
    Efficiency,
    #[serde(rename = "SR")]
    StabilityForRetailers,
    #[serde(rename = "RR")]
    RetailerReduction,
    #[serde(rename = "PD")]
    PreservationOfDifferences,
    #[serde(rename = "PP")]
    ProportionalityToProduction,
}

impl Axiom {
    pub const ALL: [Axiom; 5] = [
        Axiom::Efficiency,
        Axiom::StabilityForRetailers,
        Axiom::RetailerReduction,
        Axiom::PreservationOfDifferences,
        Axiom::ProportionalityToProduction,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Axiom::Efficiency => "EF",
            Axiom::StabilityForRetailers => "SR",
            Axiom::RetailerReduction => "RR",
            Axiom::PreservationOfDifferences => "PD",
            Axiom::ProportionalityToProduction => "PP",
        }
    }
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// The first place an axiom fails.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AxiomWitness {
    Efficiency { total: f64, target: f64 },
    Stability { retailers: Coalition, supplier: usize, deficit: f64 },
    Reduction { retailer: usize, closest_gap: f64 },
    Differences { first: usize, second: usize, gap: f64 },
    Proportionality { first: usize, second: usize, gap: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomResult {
    pub axiom: Axiom,
    pub pass: bool,
    /// Worst slack observed; negative or nonzero gaps mean failure.
    pub margin: f64,
    pub witness: Option<AxiomWitness>,
}

/// Checks one of the five axioms for allocation `x` on `cf`.
pub fn axiom_check(cf: &CharacteristicFunction, x: &Allocation, axiom: Axiom) -> Result<AxiomResult> {
    let (n, m) = (cf.n(), cf.m());
    if x.payoffs.len() != n + m {
        return Err(Error::Domain(format!(
            "allocation has {} payoffs, expected {}",
            x.payoffs.len(),
            n + m
        )));
    }
    let v = cf.grand_value();
    let tol = tolerance(v);
    let xa = altruistic_retailer_payoffs(cf)?;
    let full_m = Coalition::full(m);
    let mut witness = None;
    let margin = match axiom {
        Axiom::Efficiency => {
            let gap = (x.total() - v).abs();
            if gap > tol {
                witness = Some(AxiomWitness::Efficiency {
                    total: x.total(),
                    target: v,
                });
            }
            -gap
        }
        Axiom::StabilityForRetailers => {
            let mut worst = f64::INFINITY;
            for r in Coalition::all(n).skip(1) {
                let held: f64 = r.members().map(|i| x.payoffs[i]).sum();
                for j in 0..m {
                    let slack = held - cf.v(r, full_m.without(j));
                    if slack < worst {
                        worst = slack;
                    }
                    if slack < -tol && witness.is_none() {
                        witness = Some(AxiomWitness::Stability {
                            retailers: r,
                            supplier: j,
                            deficit: -slack,
                        });
                    }
                }
            }
            worst
        }
        Axiom::RetailerReduction => {
            let mut worst = 0.0f64;
            for i in 0..n {
                let closest = Coalition::all(n)
                    .skip(1)
                    .filter(|r| r.contains(i))
                    .flat_map(|r| (0..m).map(move |j| (r, j)))
                    .map(|(r, j)| (x.payoffs[i] - (xa[i] - per_capita_gain(cf, &xa, r, j, 1.0))).abs())
                    .fold(f64::INFINITY, f64::min);
                worst = worst.max(closest);
                if closest > tol && witness.is_none() {
                    witness = Some(AxiomWitness::Reduction {
                        retailer: i,
                        closest_gap: closest,
                    });
                }
            }
            -worst
        }
        Axiom::PreservationOfDifferences => {
            let mut worst = 0.0f64;
            for i in 0..n {
                for k in i + 1..n {
                    let gap = ((x.payoffs[i] - x.payoffs[k]) - (xa[i] - xa[k])).abs();
                    worst = worst.max(gap);
                    if gap > tol && witness.is_none() {
                        witness = Some(AxiomWitness::Differences {
                            first: i,
                            second: k,
                            gap,
                        });
                    }
                }
            }
            -worst
        }
        Axiom::ProportionalityToProduction => {
            let q = cf.grand_orders();
            let mut worst = 0.0f64;
            for j in 0..m {
                for k in j + 1..m {
                    let lhs = x.payoffs[n + j] * q.column_total(k);
                    let rhs = x.payoffs[n + k] * q.column_total(j);
                    let gap = (lhs - rhs).abs();
                    worst = worst.max(gap);
                    if gap > tolerance(lhs.abs().max(rhs.abs())) && witness.is_none() {
                        witness = Some(AxiomWitness::Proportionality {
                            first: j,
                            second: k,
                            gap,
                        });
                    }
                }
            }
            -worst
        }
    };
    Ok(AxiomResult {
        axiom,
        pass: witness.is_none(),
        margin,
        witness,
    })
}

pub fn all_axioms(cf: &CharacteristicFunction, x: &Allocation) -> Result<Vec<AxiomResult>> {
    Axiom::ALL.iter().map(|&a| axiom_check(cf, x, a)).collect()
}

/// Counterexample rules showing the axioms are independent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IndependenceVariant {
    /// SC retailer payoffs, suppliers get nothing.
    EfFails,
    /// Maximum instead of minimum per-capita gain.
    SrFails,
    /// Minimum per-capita gain over a doubled denominator.
    RrFails,
    /// `|N| beta` split equally over suppliers.
    PpFails,
}

impl IndependenceVariant {
    pub const ALL: [IndependenceVariant; 4] = [
        IndependenceVariant::EfFails,
        IndependenceVariant::SrFails,
        IndependenceVariant::RrFails,
        IndependenceVariant::PpFails,
    ];

    pub fn target(self) -> Axiom {
        match self {
            IndependenceVariant::EfFails => Axiom::Efficiency,
            IndependenceVariant::SrFails => Axiom::StabilityForRetailers,
            IndependenceVariant::RrFails => Axiom::RetailerReduction,
            IndependenceVariant::PpFails => Axiom::ProportionalityToProduction,
        }
    }
}

pub fn independence_fixture(cf: &CharacteristicFunction, variant: IndependenceVariant) -> Result<Allocation> {
    let xa = altruistic_retailer_payoffs(cf)?;
    let all = Coalition::full(cf.m());
    let (n, m) = (cf.n(), cf.m());
    let (payoffs, b, witness) = match variant {
        IndependenceVariant::EfFails => {
            let (b, w) = gain_extremum(cf, &xa, all, 1.0, false)?;
            let mut p: Vec<f64> = xa.iter().map(|x| x - b).collect();
            p.resize(n + m, 0.0);
            (p, b, w)
        }
        IndependenceVariant::SrFails => {
            let (b, w) = gain_extremum(cf, &xa, all, 1.0, true)?;
            (compensate_by_production(cf, &xa, b)?, b, w)
        }
        IndependenceVariant::RrFails => {
            let (b, w) = gain_extremum(cf, &xa, all, 2.0, false)?;
            (compensate_by_production(cf, &xa, b)?, b, w)
        }
        IndependenceVariant::PpFails => {
            let (b, w) = gain_extremum(cf, &xa, all, 1.0, false)?;
            let mut p: Vec<f64> = xa.iter().map(|x| x - b).collect();
            p.extend(std::iter::repeat_n(n as f64 * b / m as f64, m));
            (p, b, w)
        }
    };
    Ok(Allocation {
        payoffs,
        rule: AllocationRule::External,
        beta: Some(b),
        witness: Some(witness),
        orders: Some(cf.grand_orders().clone()),
    })
}

//! The characteristic function of a chain game and its structural checks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coalition::{Coalition, CoalitionPair};
use crate::error::{Error, Result};
use crate::model::{OrderMatrix, Situation};
use crate::optimizer::{solve_coalition, SolverConfig};

/// Absolute tolerance, scaled by `1 + |reference|`, for value comparisons.
pub const VALUE_TOL: f64 = 1e-6;

pub fn tolerance(reference: f64) -> f64 {
    VALUE_TOL * (1.0 + reference.abs())
}

/// One solved coalition pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub value: f64,
    /// `None` for an empty retailer coalition.
    pub orders: Option<OrderMatrix>,
}

/// Serializable form of a characteristic function, without the situation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub fingerprint: String,
    pub solver: SolverConfig,
    pub n: usize,
    pub m: usize,
    /// Indexed by [`CoalitionPair::index`].
    pub entries: Vec<Entry>,
}

/// `v(R, S)` for every coalition pair of a situation, with the optimal
/// orders each value was read from.
#[derive(Clone, Debug)]
pub struct CharacteristicFunction {
    situation: Situation,
    table: Table,
}

impl CharacteristicFunction {
    /// Solves every pair with a nonempty retailer coalition.
    pub fn build(situation: &Situation, config: &SolverConfig) -> Result<Self> {
        config.check()?;
        let (n, m) = (situation.n(), situation.m());
        if n + m > config.max_players {
            return Err(Error::Capacity(format!(
                "{n} retailers + {m} suppliers exceeds the limit of {} players",
                config.max_players
            )));
        }
        let pairs: Vec<CoalitionPair> = CoalitionPair::all(n, m).collect();
        let entries = pairs
            .par_iter()
            .map(|&pair| {
                if pair.retailers.is_empty() {
                    return Ok(Entry {
                        value: 0.0,
                        orders: None,
                    });
                }
                let res = solve_coalition(situation, pair, config)?;
                Ok(Entry {
                    value: res.value,
                    orders: Some(res.orders),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            situation: situation.clone(),
            table: Table {
                fingerprint: situation.fingerprint(),
                solver: config.clone(),
                n,
                m,
                entries,
            },
        })
    }

    /// Reattaches a stored table to its situation.
    pub fn from_table(situation: &Situation, table: Table) -> Result<Self> {
        if table.fingerprint != situation.fingerprint() {
            return Err(Error::Domain(format!(
                "table fingerprint {} does not match the situation",
                table.fingerprint
            )));
        }
        let (n, m) = (situation.n(), situation.m());
        if table.n != n || table.m != m || table.entries.len() != 1 << (n + m) {
            return Err(Error::Domain("table dimensions do not match the situation".into()));
        }
        Ok(Self {
            situation: situation.clone(),
            table,
        })
    }

    pub fn situation(&self) -> &Situation {
        &self.situation
    }

    pub fn table(&self) -> &Table {
        &self.table
    }

    pub fn into_table(self) -> Table {
        self.table
    }

    pub fn fingerprint(&self) -> &str {
        &self.table.fingerprint
    }

    pub fn config(&self) -> &SolverConfig {
        &self.table.solver
    }

    pub fn n(&self) -> usize {
        self.table.n
    }

    pub fn m(&self) -> usize {
        self.table.m
    }

    pub fn grand(&self) -> CoalitionPair {
        CoalitionPair::grand(self.n(), self.m())
    }

    fn entry(&self, pair: CoalitionPair) -> Result<&Entry> {
        if !pair.retailers.fits(self.n()) || !pair.suppliers.fits(self.m()) {
            return Err(Error::Domain(format!(
                "coalition {pair} is outside N = {}, M = {}",
                self.n(),
                self.m()
            )));
        }
        Ok(&self.table.entries[pair.index(self.m())])
    }

    /// Cached `v(R, S)`; never re-solves.
    pub fn value(&self, pair: CoalitionPair) -> Result<f64> {
        Ok(self.entry(pair)?.value)
    }

    pub fn orders(&self, pair: CoalitionPair) -> Result<Option<&OrderMatrix>> {
        Ok(self.entry(pair)?.orders.as_ref())
    }

    /// `v(R, S)` for an in-range pair; for internal loops over known pairs.
    pub(crate) fn v(&self, retailers: Coalition, suppliers: Coalition) -> f64 {
        self.table.entries[CoalitionPair::new(retailers, suppliers).index(self.m())].value
    }

    pub fn grand_value(&self) -> f64 {
        self.v(Coalition::full(self.n()), Coalition::full(self.m()))
    }

    /// Optimal orders of the grand coalition.
    pub fn grand_orders(&self) -> &OrderMatrix {
        self.table.entries[self.grand().index(self.m())]
            .orders
            .as_ref()
            .expect("grand coalition has retailers")
    }

    pub fn pairs(&self) -> impl Iterator<Item = (CoalitionPair, &Entry)> {
        let m = self.m();
        self.table
            .entries
            .iter()
            .enumerate()
            .map(move |(k, e)| (CoalitionPair::from_index(k, m), e))
    }

    /// Test hook: overwrite one stored value.
    #[doc(hidden)]
    pub fn force_value(&mut self, pair: CoalitionPair, value: f64) {
        let m = self.m();
        self.table.entries[pair.index(m)].value = value;
    }

    /// Every value is positive for a nonempty retailer coalition.
    pub fn check_positivity(&self) -> StructureReport {
        let mut report = StructureReport::new(Property::Positivity);
        for (pair, entry) in self.pairs().filter(|(p, _)| !p.retailers.is_empty()) {
            report.record(pair, None, entry.value, 0.0);
        }
        report
    }

    /// `v(R,S) + v(F,T) <= v(R u F, S u T)` for all disjoint pairings.
    pub fn check_superadditivity(&self) -> StructureReport {
        let (n, m) = (self.n(), self.m());
        let mut report = StructureReport::new(Property::Superadditivity);
        for r in Coalition::all(n) {
            for s in Coalition::all(m) {
                let left = self.v(r, s);
                for f in r.complement(n).subsets() {
                    for t in s.complement(m).subsets() {
                        let joint = self.v(r.union(f), s.union(t));
                        let margin = joint - left - self.v(f, t);
                        report.record_with_tol(
                            CoalitionPair::new(r, s),
                            Some(CoalitionPair::new(f, t)),
                            margin,
                            tolerance(joint),
                        );
                    }
                }
            }
        }
        report
    }

    /// `v(R,S) <= v(F,T)` whenever `R` is inside `F` and `S` inside `T`.
    pub fn check_monotonicity(&self) -> StructureReport {
        let (n, m) = (self.n(), self.m());
        let mut report = StructureReport::new(Property::Monotonicity);
        for f in Coalition::all(n) {
            for t in Coalition::all(m) {
                let outer = self.v(f, t);
                for r in f.subsets() {
                    for s in t.subsets() {
                        report.record_with_tol(
                            CoalitionPair::new(r, s),
                            Some(CoalitionPair::new(f, t)),
                            outer - self.v(r, s),
                            tolerance(outer),
                        );
                    }
                }
            }
        }
        report
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Positivity,
    Superadditivity,
    Monotonicity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureViolation {
    pub pair: CoalitionPair,
    /// Second pair of the inequality, when there is one.
    pub other: Option<CoalitionPair>,
    pub margin: f64,
}

/// Outcome of one structural check. `margin` is the slack of the inequality
/// (negative when violated).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub property: Property,
    pub checked: usize,
    pub worst_margin: f64,
    pub violations: Vec<StructureViolation>,
}

impl StructureReport {
    fn new(property: Property) -> Self {
        Self {
            property,
            checked: 0,
            worst_margin: f64::INFINITY,
            violations: Vec::new(),
        }
    }

    fn record(&mut self, pair: CoalitionPair, other: Option<CoalitionPair>, margin: f64, tol: f64) {
        self.checked += 1;
        self.worst_margin = self.worst_margin.min(margin);
        if margin <= tol {
            self.violations.push(StructureViolation { pair, other, margin });
        }
    }

    fn record_with_tol(&mut self, pair: CoalitionPair, other: Option<CoalitionPair>, margin: f64, tol: f64) {
        self.checked += 1;
        self.worst_margin = self.worst_margin.min(margin);
        if margin < -tol {
            self.violations.push(StructureViolation { pair, other, margin });
        }
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

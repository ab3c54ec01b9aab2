//! Coalition profit objective and its deterministic maximisation over the
//! feasible order set `Q^R`.
//!
//! The search runs in three stages: a uniform grid over the whole box, a
//! sequence of shrinking grids recentred on the incumbent, and a final
//! cyclic coordinate-wise golden-section pass. Every comparison goes
//! through [`Incumbent::offer`], which breaks near-ties toward the
//! lexicographically smallest order matrix so the result is reproducible.

use serde::{Deserialize, Serialize};

use crate::coalition::{Coalition, CoalitionPair};
use crate::error::{Error, Result};
use crate::model::{OrderMatrix, Situation};
use crate::pwl::PiecewiseLinearFn;

/// Relative width of the band in which two objective values count as tied.
const TIE_EPS: f64 = 1e-12;
/// Feasibility slack on the row constraint `q_iM <= q*_i`.
const ROW_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Grid points per axis for the first (and every refinement) grid.
    pub initial_resolution: usize,
    /// Number of shrink-and-regrid rounds.
    pub rounds: usize,
    /// Box shrink factor per round.
    pub shrink: f64,
    /// Stop regridding once the spacing falls below `tol` times the largest box edge.
    pub tol: f64,
    /// Largest `|R| * |M|` accepted.
    pub max_dims: usize,
    /// Cap on points per grid; the per-axis resolution is lowered to fit.
    pub max_grid_points: usize,
    /// Largest `n + m` for which a full characteristic function is built.
    pub max_players: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            initial_resolution: 33,
            rounds: 8,
            shrink: 0.5,
            tol: 1e-6,
            max_dims: 9,
            max_grid_points: 2_000_000,
            max_players: 16,
        }
    }
}

impl SolverConfig {
    pub fn check(&self) -> Result<()> {
        if self.initial_resolution < 2 {
            return Err(Error::Domain("initial_resolution must be at least 2".into()));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::Domain("shrink must lie in (0, 1)".into()));
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(Error::Domain("tol must be a nonnegative number".into()));
        }
        if self.max_grid_points < 2 {
            return Err(Error::Domain("max_grid_points must be at least 2".into()));
        }
        Ok(())
    }

    /// Per-axis resolution actually used for a `dims`-dimensional grid.
    pub fn effective_resolution(&self, dims: usize) -> usize {
        let mut r = self.initial_resolution;
        while r > 2 && (r as f64).powi(dims as i32) > self.max_grid_points as f64 {
            r -= 1;
        }
        r
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub value: f64,
    pub orders: OrderMatrix,
    /// Refinement rounds plus coordinate-descent cycles performed.
    pub iterations: usize,
    /// Grid spacing of the last grid (largest axis).
    pub resolution_reached: f64,
}

/// Objective of one coalition pair, with the supplier cost envelope prepared.
pub(crate) struct Problem<'a> {
    situation: &'a Situation,
    rows: Vec<usize>,
    m: usize,
    in_coalition: Vec<bool>,
    cost: Option<PiecewiseLinearFn>,
}

impl<'a> Problem<'a> {
    pub(crate) fn new(situation: &'a Situation, pair: CoalitionPair) -> Result<Self> {
        let (n, m) = (situation.n(), situation.m());
        if !pair.retailers.fits(n) || !pair.suppliers.fits(m) {
            return Err(Error::Domain(format!(
                "coalition {pair} references players outside N = {n}, M = {m}"
            )));
        }
        let costs: Vec<&PiecewiseLinearFn> = pair
            .suppliers
            .members()
            .map(|j| &situation.suppliers()[j].cost)
            .collect();
        let cost = if costs.is_empty() {
            None
        } else {
            Some(PiecewiseLinearFn::min_envelope(&costs)?)
        };
        Ok(Self {
            situation,
            rows: pair.retailers.members().collect(),
            m,
            in_coalition: (0..m).map(|j| pair.suppliers.contains(j)).collect(),
            cost,
        })
    }

    pub(crate) fn dims(&self) -> usize {
        self.rows.len() * self.m
    }

    /// Unit prices the coalition pays: `c_S(q_RS)` inside `S`, `w_j(q_Rj)` outside.
    fn unit_prices(&self, q: &[f64], units: &mut [f64]) {
        let m = self.m;
        units.fill(0.0);
        for row in q.chunks_exact(m) {
            for (u, &x) in units.iter_mut().zip(row) {
                *u += x;
            }
        }
        let in_s: f64 = units
            .iter()
            .zip(&self.in_coalition)
            .filter(|(_, &inside)| inside)
            .map(|(u, _)| u)
            .sum();
        let c_s = self.cost.as_ref().map_or(0.0, |c| c.value_at(in_s));
        let suppliers = self.situation.suppliers();
        for j in 0..m {
            units[j] = if self.in_coalition[j] {
                c_s
            } else {
                suppliers[j].wholesale.value_at(units[j])
            };
        }
    }

    /// Per-retailer profits `Pi_i(q_i, Psi^S(q_R))` written into `out`.
    fn profits(&self, q: &[f64], units: &mut [f64], out: &mut [f64]) {
        self.unit_prices(q, units);
        let retailers = self.situation.retailers();
        for ((row, &i), slot) in q.chunks_exact(self.m).zip(&self.rows).zip(out) {
            let mut volume = 0.0;
            let mut paid = 0.0;
            for (&x, &u) in row.iter().zip(units.iter()) {
                volume += x;
                paid += u * x;
            }
            *slot = retailers[i].price.value_at(volume) * volume - paid;
        }
    }

    #[inline]
    pub(crate) fn value(&self, q: &[f64], units: &mut [f64]) -> f64 {
        self.unit_prices(q, units);
        let retailers = self.situation.retailers();
        let mut total = 0.0;
        for (row, &i) in q.chunks_exact(self.m).zip(&self.rows) {
            let mut volume = 0.0;
            let mut paid = 0.0;
            for (&x, &u) in row.iter().zip(units.iter()) {
                volume += x;
                paid += u * x;
            }
            total += retailers[i].price.value_at(volume) * volume - paid;
        }
        total
    }

    /// Upper bound of each coordinate: `min(bound_ij, q*_i)`.
    fn upper(&self) -> Vec<f64> {
        let qs = self.situation.q_star();
        self.rows
            .iter()
            .flat_map(|&i| (0..self.m).map(move |j| (i, j)))
            .map(|(i, j)| self.situation.bound(i, j).min(qs[i]))
            .collect()
    }

    fn row_feasible(&self, q: &[f64]) -> bool {
        let qs = self.situation.q_star();
        q.chunks_exact(self.m)
            .zip(&self.rows)
            .all(|(row, &i)| row.iter().sum::<f64>() <= qs[i] * (1.0 + ROW_SLACK))
    }
}

fn check_orders(situation: &Situation, pair: CoalitionPair, q: &OrderMatrix) -> Result<()> {
    if q.retailers() != pair.retailers || q.suppliers() != situation.m() {
        return Err(Error::Domain(format!(
            "order matrix is for {} x {} suppliers but the coalition is {} over {} suppliers",
            q.retailers(),
            q.suppliers(),
            pair.retailers,
            situation.m()
        )));
    }
    Ok(())
}

/// Joint profit of `pair` at orders `q`: retail revenue minus `c_S(q_RS)`
/// per unit bought inside `S` and `w_j(q_Rj)` per unit bought outside.
pub fn coalition_objective(situation: &Situation, pair: CoalitionPair, q: &OrderMatrix) -> Result<f64> {
    check_orders(situation, pair, q)?;
    let problem = Problem::new(situation, pair)?;
    let mut units = vec![0.0; situation.m()];
    Ok(problem.value(q.as_slice(), &mut units))
}

/// `Pi_i(q_i, Psi^S(q_R))` for every member `i` of `pair.retailers`, in
/// increasing index order.
pub fn retailer_profits(situation: &Situation, pair: CoalitionPair, q: &OrderMatrix) -> Result<Vec<f64>> {
    check_orders(situation, pair, q)?;
    let problem = Problem::new(situation, pair)?;
    let mut units = vec![0.0; situation.m()];
    let mut out = vec![0.0; pair.retailers.len()];
    problem.profits(q.as_slice(), &mut units, &mut out);
    Ok(out)
}

/// Profit supplier `j` of coalition `suppliers` makes on retailer `i`'s
/// order: `(w_j(q_Rj) - c_S(q_RS)) q_ij`.
pub fn supplier_profit(
    situation: &Situation,
    j: usize,
    suppliers: Coalition,
    q: &OrderMatrix,
    i: usize,
) -> Result<f64> {
    if !suppliers.contains(j) || !suppliers.fits(situation.m()) {
        return Err(Error::Domain(format!("supplier {} is not in {suppliers}", j + 1)));
    }
    if q.suppliers() != situation.m() {
        return Err(Error::Domain("order matrix does not span every supplier".into()));
    }
    let q_ij = q
        .get(i, j)
        .ok_or_else(|| Error::Domain(format!("retailer {} has no row in the order matrix", i + 1)))?;
    let costs: Vec<&PiecewiseLinearFn> = suppliers
        .members()
        .map(|k| &situation.suppliers()[k].cost)
        .collect();
    let c_s = PiecewiseLinearFn::min_envelope(&costs)?;
    let in_s: f64 = suppliers.members().map(|k| q.column_total(k)).sum();
    let w = situation.suppliers()[j].wholesale.value_at(q.column_total(j));
    Ok((w - c_s.value_at(in_s)) * q_ij)
}

/// Best point seen so far, with the tie rule applied on every offer.
struct Incumbent {
    value: f64,
    point: Vec<f64>,
}

impl Incumbent {
    fn empty(dims: usize) -> Self {
        Self {
            value: f64::NEG_INFINITY,
            point: vec![0.0; dims],
        }
    }

    /// Accepts `point` when it is clearly better, or tied and lexicographically smaller.
    fn offer(&mut self, value: f64, point: &[f64]) -> bool {
        let band = TIE_EPS * (1.0 + self.value.abs().min(value.abs()));
        let better = if self.value == f64::NEG_INFINITY || value > self.value + band {
            true
        } else if value >= self.value - band {
            lex_less(point, &self.point)
        } else {
            false
        };
        if better {
            self.value = value;
            self.point.copy_from_slice(point);
        }
        better
    }

    /// Accepts `point` only when it is clearly better; refinement never trades
    /// value for lexicographic order.
    fn improve(&mut self, value: f64, point: &[f64]) -> bool {
        let band = TIE_EPS * (1.0 + self.value.abs());
        let better = value > self.value + band;
        if better {
            self.value = value;
            self.point.copy_from_slice(point);
        }
        better
    }
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// Evaluates every feasible point of the product grid with `res` points per
/// axis over `[lo, hi]`, in row-major lexicographic order.
fn grid_scan(problem: &Problem<'_>, lo: &[f64], hi: &[f64], res: usize, best: &mut Incumbent) -> Result<()> {
    let dims = lo.len();
    let axes: Vec<Vec<f64>> = lo
        .iter()
        .zip(hi)
        .map(|(&a, &b)| axis(a, b, res))
        .collect();
    let mut idx = vec![0usize; dims];
    let mut point: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    let mut units = vec![0.0; problem.m];
    loop {
        if problem.row_feasible(&point) {
            let v = problem.value(&point, &mut units);
            if !v.is_finite() {
                return Err(Error::Internal(format!("objective is not finite at {point:?}")));
            }
            best.offer(v, &point);
        }
        // odometer: last coordinate fastest
        let mut k = dims;
        loop {
            if k == 0 {
                return Ok(());
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                point[k] = axes[k][idx[k]];
                break;
            }
            idx[k] = 0;
            point[k] = axes[k][0];
        }
    }
}

fn axis(lo: f64, hi: f64, res: usize) -> Vec<f64> {
    if hi <= lo {
        return vec![lo];
    }
    let last = res - 1;
    (0..res)
        .map(|k| {
            if k == last {
                hi
            } else {
                lo + (hi - lo) * (k as f64 / last as f64)
            }
        })
        .collect()
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section maximisation of a one-dimensional function on `[a, b]`.
fn golden_max(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

const COORD_MOVE_TOL: f64 = 1e-9;
const MAX_CYCLES: usize = 500;

/// Cyclic coordinate-wise golden-section refinement around the incumbent,
/// coordinates in row-major order. Returns the number of cycles run.
fn coordinate_refine(problem: &Problem<'_>, upper: &[f64], half_width: f64, best: &mut Incumbent) -> usize {
    let m = problem.m;
    let qs = problem.situation.q_star();
    let mut units = vec![0.0; m];
    let mut trial = best.point.clone();
    let mut cycles = 0;
    while cycles < MAX_CYCLES {
        cycles += 1;
        let mut max_move = 0.0f64;
        for k in 0..best.point.len() {
            let row = k / m;
            let start = row * m;
            let others: f64 = (start..start + m).filter(|&t| t != k).map(|t| best.point[t]).sum();
            let cap = upper[k].min(qs[problem.rows[row]] - others).max(0.0);
            let x = best.point[k];
            let a = (x - half_width).max(0.0);
            let b = (x + half_width).min(cap);
            if b <= a {
                continue;
            }
            trial.copy_from_slice(&best.point);
            let tol = 1e-12 * (1.0 + b.abs());
            let t = golden_max(
                |t| {
                    trial[k] = t;
                    problem.value(&trial, &mut units)
                },
                a,
                b,
                tol,
            );
            for cand in [t, a, b] {
                trial.copy_from_slice(&best.point);
                trial[k] = cand;
                let v = problem.value(&trial, &mut units);
                let before = best.point[k];
                if best.improve(v, &trial) {
                    max_move = max_move.max((cand - before).abs());
                }
            }
        }
        if max_move < COORD_MOVE_TOL {
            break;
        }
    }
    cycles
}

/// Maximises the joint profit of `pair` over `Q^R`.
pub fn solve_coalition(situation: &Situation, pair: CoalitionPair, config: &SolverConfig) -> Result<OptResult> {
    config.check()?;
    if pair.retailers.is_empty() {
        return Err(Error::Domain(
            "solve_coalition needs a nonempty retailer coalition; v(empty, S) = 0".into(),
        ));
    }
    let problem = Problem::new(situation, pair)?;
    let dims = problem.dims();
    if dims > config.max_dims {
        return Err(Error::Capacity(format!(
            "coalition {pair} has {dims} order variables, above max_dims = {}; use a smaller coalition or raise max_dims with a coarser resolution",
            config.max_dims
        )));
    }
    let upper = problem.upper();
    let res = config.effective_resolution(dims);
    let lo0 = vec![0.0; dims];
    let max_edge = upper.iter().copied().fold(0.0, f64::max);

    let mut best = Incumbent::empty(dims);
    grid_scan(&problem, &lo0, &upper, res, &mut best)?;
    if best.value == f64::NEG_INFINITY {
        return Err(Error::Internal(format!("no feasible grid point for {pair}")));
    }

    let mut edges = upper.clone();
    let mut spacing = max_edge / (res - 1) as f64;
    let mut iterations = 0;
    for _ in 0..config.rounds {
        let next: Vec<f64> = edges.iter().map(|e| e * config.shrink).collect();
        let next_spacing = next.iter().copied().fold(0.0, f64::max) / (res - 1) as f64;
        if next_spacing < config.tol * max_edge {
            break;
        }
        edges = next;
        spacing = next_spacing;
        let centre = best.point.clone();
        let lo: Vec<f64> = centre.iter().zip(&edges).map(|(c, e)| (c - 0.5 * e).max(0.0)).collect();
        let hi: Vec<f64> = centre
            .iter()
            .zip(&edges)
            .zip(&upper)
            .map(|((c, e), u)| (c + 0.5 * e).min(*u))
            .collect();
        grid_scan(&problem, &lo, &hi, res, &mut best)?;
        iterations += 1;
    }

    iterations += coordinate_refine(&problem, &upper, spacing.max(COORD_MOVE_TOL), &mut best);

    let orders = OrderMatrix::from_flat(pair.retailers, situation.m(), best.point.clone())?;
    Ok(OptResult {
        value: best.value,
        orders,
        iterations,
        resolution_reached: spacing,
    })
}

/// Best objective over the full uniform grid with `resolution` points per
/// axis, with no refinement. Test oracle and lower-bound certificate.
pub fn brute_force_oracle(situation: &Situation, pair: CoalitionPair, resolution: usize) -> Result<f64> {
    if pair.retailers.is_empty() {
        return Ok(0.0);
    }
    if resolution < 2 {
        return Err(Error::Domain("oracle resolution must be at least 2".into()));
    }
    let problem = Problem::new(situation, pair)?;
    let dims = problem.dims();
    let points = (resolution as f64).powi(dims as i32);
    if points > 1e8 {
        return Err(Error::Capacity(format!(
            "oracle grid of {resolution}^{dims} points exceeds 1e8"
        )));
    }
    let upper = problem.upper();
    let mut best = Incumbent::empty(dims);
    grid_scan(&problem, &vec![0.0; dims], &upper, resolution, &mut best)?;
    Ok(best.value)
}

//! Continuous piecewise-linear functions of a nonnegative quantity.
//!
//! A function is a list of breakpoints starting at `x = 0`. Between two
//! breakpoints the value is read off a line; past the last breakpoint the
//! function stays at the last breakpoint's value.
//!
//! Each piece remembers the two anchor points of the line it evaluates. For
//! functions built from knots those anchors are the bracketing knots. For a
//! lower envelope they are copied from the source function's piece, so the
//! envelope reproduces the source's floating-point arithmetic exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
struct Line {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

impl Line {
    fn through(a: (f64, f64), b: (f64, f64)) -> Self {
        Self {
            x0: a.0,
            y0: a.1,
            x1: b.0,
            y1: b.1,
        }
    }

    fn flat(x: f64, y: f64) -> Self {
        Self {
            x0: x,
            y0: y,
            x1: x + 1.0,
            y1: y,
        }
    }

    #[inline]
    fn at(&self, q: f64) -> f64 {
        self.y0 + (self.y1 - self.y0) * ((q - self.x0) / (self.x1 - self.x0))
    }

    fn slope(&self) -> f64 {
        (self.y1 - self.y0) / (self.x1 - self.x0)
    }
}

/// Continuous piecewise-linear function with a constant right extension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KnotList", into = "KnotList")]
pub struct PiecewiseLinearFn {
    knots: Vec<(f64, f64)>,
    lines: Vec<Line>,
}

#[derive(Serialize, Deserialize)]
struct KnotList {
    knots: Vec<(f64, f64)>,
}

impl TryFrom<KnotList> for PiecewiseLinearFn {
    type Error = Error;

    fn try_from(list: KnotList) -> Result<Self> {
        Self::new(list.knots)
    }
}

impl From<PiecewiseLinearFn> for KnotList {
    fn from(f: PiecewiseLinearFn) -> Self {
        Self { knots: f.knots }
    }
}

impl PiecewiseLinearFn {
    /// Builds a function from `(x, y)` knots. The first knot must sit at
    /// `x = 0` and the x-coordinates must be strictly increasing.
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        let Some(&(x0, _)) = knots.first() else {
            return Err(Error::Domain("a piecewise-linear function needs at least one knot".into()));
        };
        if x0 != 0.0 {
            return Err(Error::Domain(format!("first knot must be at x = 0, found x = {x0}")));
        }
        if let Some(&(x, y)) = knots.iter().find(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::Domain(format!("knot ({x}, {y}) is not finite")));
        }
        if let Some(w) = knots.windows(2).find(|w| w[1].0 <= w[0].0) {
            return Err(Error::Domain(format!(
                "knot x-coordinates must be strictly increasing ({} then {})",
                w[0].0, w[1].0
            )));
        }
        let lines = knots.windows(2).map(|w| Line::through(w[0], w[1])).collect();
        Ok(Self { knots, lines })
    }

    pub fn constant(y: f64) -> Result<Self> {
        Self::new(vec![(0.0, y)])
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    /// Value at the last knot, which is also the value everywhere beyond it.
    pub fn tail_value(&self) -> f64 {
        self.knots[self.knots.len() - 1].1
    }

    pub fn last_x(&self) -> f64 {
        self.knots[self.knots.len() - 1].0
    }

    pub fn eval(&self, q: f64) -> Result<f64> {
        if q.is_nan() || q < 0.0 {
            return Err(Error::Domain(format!("cannot evaluate at negative quantity {q}")));
        }
        Ok(self.value_at(q))
    }

    /// Evaluation without the domain check. Negative inputs read the first piece.
    #[inline]
    pub(crate) fn value_at(&self, q: f64) -> f64 {
        let n = self.knots.len();
        if q >= self.knots[n - 1].0 {
            return self.knots[n - 1].1;
        }
        // first knot with x > q, minus one, is the piece holding q
        let k = self.knots.partition_point(|&(x, _)| x <= q);
        self.lines[k.saturating_sub(1)].at(q)
    }

    /// Largest absolute slope over all pieces; the Lipschitz constant.
    pub fn max_abs_slope(&self) -> f64 {
        self.lines.iter().map(|l| l.slope().abs()).fold(0.0, f64::max)
    }

    /// Pieces as `(x_start, x_end, slope, y_start)`; the constant tail is
    /// not included.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        self.knots
            .windows(2)
            .zip(&self.lines)
            .map(|(w, l)| (w[0].0, w[1].0, l.slope(), w[0].1))
    }

    /// Multiplies every value by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let scale = |(x, y): (f64, f64)| (x, y * factor);
        Self {
            knots: self.knots.iter().copied().map(scale).collect(),
            lines: self
                .lines
                .iter()
                .map(|l| Line {
                    y0: l.y0 * factor,
                    y1: l.y1 * factor,
                    ..*l
                })
                .collect(),
        }
    }

    /// Pointwise minimum of a nonempty family of functions.
    ///
    /// The result's breakpoints are the union of all input knots plus the
    /// crossing points of every pair of pieces inside each elementary
    /// interval. On each resulting piece the active input's line is reused.
    pub fn min_envelope(fns: &[&PiecewiseLinearFn]) -> Result<Self> {
        match fns {
            [] => Err(Error::Domain(
                "the lower envelope of an empty family is undefined".into(),
            )),
            [single] => Ok((*single).clone()),
            _ => Ok(envelope(fns)),
        }
    }

    /// Smallest quantity at which the function reaches zero.
    pub fn find_root(&self) -> Result<f64> {
        let y0 = self.knots[0].1;
        if y0 <= 0.0 {
            return Err(Error::Domain(format!("value at 0 must be positive, found {y0}")));
        }
        let (w, line) = self
            .knots
            .windows(2)
            .zip(&self.lines)
            .find(|(w, _)| w[1].1 <= 0.0)
            .ok_or_else(|| Error::Domain("price never vanishes".into()))?;
        let ((xa, ya), (xb, yb)) = (w[0], w[1]);
        if yb == 0.0 {
            return Ok(xb);
        }
        // closed form, then bisection to absorb rounding in the interpolation
        let guess = (xa + ya * (xb - xa) / (ya - yb)).clamp(xa, xb);
        let (mut lo, mut hi) = (xa, xb);
        if line.at(guess) > 0.0 {
            lo = guess;
        } else {
            hi = guess;
        }
        while hi - lo > 1e-12 * (1.0 + hi) {
            let mid = 0.5 * (lo + hi);
            if line.at(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }
}

fn envelope(fns: &[&PiecewiseLinearFn]) -> PiecewiseLinearFn {
    let mut xs: Vec<f64> = fns.iter().flat_map(|f| f.knots.iter().map(|k| k.0)).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();

    // line of each source active on [a, b): the piece starting at or before a
    let active_line = |f: &PiecewiseLinearFn, a: f64| -> Line {
        if a >= f.last_x() {
            Line::flat(f.last_x(), f.tail_value())
        } else {
            let k = f.knots.partition_point(|&(x, _)| x <= a);
            f.lines[k.saturating_sub(1)]
        }
    };

    let mut breaks: Vec<f64> = Vec::new();
    let mut chosen: Vec<Line> = Vec::new();
    for w in xs.windows(2) {
        let (a, b) = (w[0], w[1]);
        let lines: Vec<Line> = fns.iter().map(|f| active_line(f, a)).collect();
        let mut cuts = vec![a];
        for (i, li) in lines.iter().enumerate() {
            for lj in &lines[i + 1..] {
                if let Some(x) = crossing(li, lj) {
                    if x > a && x < b {
                        cuts.push(x);
                    }
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts.push(b);
        for c in cuts.windows(2) {
            let mid = 0.5 * (c[0] + c[1]);
            let best = lowest(&lines, mid);
            breaks.push(c[0]);
            chosen.push(best);
        }
    }
    // tail beyond the last knot of every input
    let last = *xs.last().expect("at least one knot");
    let tail = fns.iter().map(|f| f.tail_value()).fold(f64::INFINITY, f64::min);

    // merge consecutive pieces that reuse the same line
    let mut knots = Vec::with_capacity(breaks.len() + 1);
    let mut merged: Vec<Line> = Vec::with_capacity(chosen.len());
    for (x, line) in breaks.into_iter().zip(chosen) {
        if merged.last() == Some(&line) {
            continue;
        }
        knots.push((x, line.at(x)));
        merged.push(line);
    }
    knots.push((last, tail));
    // a flat piece equal to the tail just before `last` is redundant
    while !merged.is_empty() && {
        let l = merged[merged.len() - 1];
        l.y0 == l.y1 && l.y0 == tail
    } {
        merged.pop();
        let end = knots.pop().expect("tail knot");
        let start = knots.pop().expect("piece start");
        knots.push((start.0, end.1));
    }
    PiecewiseLinearFn {
        knots,
        lines: merged,
    }
}

fn lowest(lines: &[Line], x: f64) -> Line {
    let mut best = lines[0];
    let mut best_v = best.at(x);
    for l in &lines[1..] {
        let v = l.at(x);
        if v < best_v {
            best = *l;
            best_v = v;
        }
    }
    best
}

fn crossing(a: &Line, b: &Line) -> Option<f64> {
    let (sa, sb) = (a.slope(), b.slope());
    if sa == sb {
        return None;
    }
    // a.y0 + sa (x - a.x0) = b.y0 + sb (x - b.x0)
    let x = (b.y0 - a.y0 + sa * a.x0 - sb * b.x0) / (sa - sb);
    x.is_finite().then_some(x)
}

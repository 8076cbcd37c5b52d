//! Comparison-only minimization of periodic sinusoid-shaped objectives.
//!
//! Objectives have the form `w(z) = f(A + B cos(z + ψ))` with `f` strictly
//! increasing and period `2·z_max`. Only order comparisons between
//! evaluations are used, so the result is unchanged when `w` is composed with
//! any strictly increasing map. Every call of the objective is one oracle
//! probe and is counted.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError<E> {
    #[error("invalid search specification: {0}")]
    InvalidSpec(String),
    #[error("objective evaluation failed")]
    Objective(E),
}

/// How the initial bracket is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BracketMode {
    /// Four samples a quarter period apart; the lowest sample and its lower
    /// neighbour bound a quarter-period interval holding the minimizer.
    /// Uses order comparisons only.
    #[default]
    Ordinal,
    /// Literal three-sample flag arithmetic, yielding a half-period interval.
    /// Compares differences of values, so it is not invariant under
    /// nonlinear monotone maps.
    Table,
}

/// Probe accounting for the bisection stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accounting {
    /// Endpoint values are remembered; one new probe per bisection step.
    #[default]
    Memoized,
    /// Both endpoints are re-probed for every comparison.
    Reprobe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct LineSearchOptions {
    #[serde(default)]
    pub bracket: BracketMode,
    #[serde(default)]
    pub accounting: Accounting,
}

/// Closed interval with the objective values at its endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub w_lo: f64,
    pub w_hi: f64,
}

impl Bracket {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, z: f64) -> bool {
        self.lo <= z && z <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BracketOutcome {
    Found(Bracket),
    /// Every sample compared equal; the objective looks constant.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchResult {
    pub z_hat: f64,
    pub evaluations: u64,
    pub degenerate: bool,
}

struct Counted<F> {
    f: F,
    calls: u64,
}

impl<F, E> Counted<F>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    fn eval(&mut self, z: f64) -> Result<f64, SearchError<E>> {
        self.calls += 1;
        (self.f)(z).map_err(SearchError::Objective)
    }
}

/// Number of halvings of `len` until it is at most `eta`.
pub fn bisection_steps(len: f64, eta: f64) -> u64 {
    let mut n = 0;
    let mut l = len;
    while l > eta {
        l *= 0.5;
        n += 1;
    }
    n
}

/// Probes spent by [`line_search`] for half-period `z_max` and accuracy `eta`.
pub fn expected_evaluations(z_max: f64, eta: f64, opts: &LineSearchOptions) -> u64 {
    let (samples, len) = match opts.bracket {
        BracketMode::Ordinal => (4, z_max / 2.0),
        BracketMode::Table => (3, z_max),
    };
    let steps = match opts.bracket {
        BracketMode::Ordinal => bisection_steps(len, eta),
        BracketMode::Table => table_steps(len, eta),
    };
    match opts.accounting {
        Accounting::Memoized => samples + steps.saturating_sub(1),
        Accounting::Reprobe => samples + 2 * steps,
    }
}

fn table_steps(len: f64, eta: f64) -> u64 {
    let mut n = 0;
    let mut l = len;
    while l >= eta {
        l *= 0.5;
        n += 1;
    }
    n
}

fn validate<E>(z_max: f64, eta: f64, bracket_len: f64) -> Result<(), SearchError<E>> {
    if !(z_max > 0.0) || !z_max.is_finite() {
        return Err(SearchError::InvalidSpec(format!("z_max must be positive, got {z_max}")));
    }
    if !(eta > 0.0) || eta >= bracket_len {
        return Err(SearchError::InvalidSpec(format!(
            "eta must lie in (0, {bracket_len}), got {eta}"
        )));
    }
    Ok(())
}

/// Quarter-period bracket from samples at `{0, z_max/2, z_max, -z_max/2}`.
pub fn bracket<F, E>(objective: F, z_max: f64) -> Result<BracketOutcome, SearchError<E>>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let mut obj = Counted { f: objective, calls: 0 };
    ordinal_bracket(&mut obj, z_max)
}

fn ordinal_bracket<F, E>(obj: &mut Counted<F>, z_max: f64) -> Result<BracketOutcome, SearchError<E>>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let h = z_max / 2.0;
    // positions around the circle in ascending angular order
    let pos = [0.0, h, z_max, -h];
    let mut w = [0.0; 4];
    for (slot, z) in w.iter_mut().zip(pos) {
        *slot = obj.eval(z)?;
    }
    if w.iter().all(|v| *v == w[0]) {
        return Ok(BracketOutcome::Degenerate);
    }
    let mut j = 0;
    for i in 1..4 {
        if w[i] < w[j] {
            j = i;
        }
    }
    let prev = (j + 3) % 4;
    let next = (j + 1) % 4;
    // the minimizer lies between j and whichever neighbour is lower
    let first = if w[prev] < w[next] { prev } else { j };
    let b = match first {
        0 => Bracket { lo: 0.0, hi: h, w_lo: w[0], w_hi: w[1] },
        1 => Bracket { lo: h, hi: z_max, w_lo: w[1], w_hi: w[2] },
        // [z_max, 3z_max/2] represented one period down
        2 => Bracket { lo: -z_max, hi: -h, w_lo: w[2], w_hi: w[3] },
        _ => Bracket { lo: -h, hi: 0.0, w_lo: w[3], w_hi: w[0] },
    };
    Ok(BracketOutcome::Found(b))
}

fn table_bracket<F, E>(obj: &mut Counted<F>, z_max: f64) -> Result<BracketOutcome, SearchError<E>>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let w0 = obj.eval(0.0)?;
    let wh = obj.eval(z_max / 2.0)?;
    let wz = obj.eval(z_max)?;
    if w0 == wh && wh == wz {
        return Ok(BracketOutcome::Degenerate);
    }
    let a = f64::from((wh - w0).abs() > (wh - wz).abs());
    let b = f64::from(w0 < wh);
    let c = f64::from(wz > wh);
    let hi = z_max * a * (1.0 - b) + z_max * (1.0 - a) * c;
    let lo = hi - z_max;
    // w(-z_max) = w(z_max) by periodicity
    let (w_lo, w_hi) = if hi > 0.0 { (w0, wz) } else { (wz, w0) };
    Ok(BracketOutcome::Found(Bracket { lo, hi, w_lo, w_hi }))
}

fn bisect<F, E>(
    obj: &mut Counted<F>,
    b: Bracket,
    steps: u64,
    accounting: Accounting,
) -> Result<f64, SearchError<E>>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let (mut lo, mut hi, mut w_lo, mut w_hi) = (b.lo, b.hi, b.w_lo, b.w_hi);
    for step in 0..steps {
        if accounting == Accounting::Reprobe {
            w_lo = obj.eval(lo)?;
            w_hi = obj.eval(hi)?;
        }
        let mid = 0.5 * (lo + hi);
        let shrink_right = w_lo <= w_hi;
        if shrink_right {
            hi = mid;
        } else {
            lo = mid;
        }
        let more = step + 1 < steps;
        if more && accounting == Accounting::Memoized {
            let w_mid = obj.eval(mid)?;
            if shrink_right {
                w_hi = w_mid;
            } else {
                w_lo = w_mid;
            }
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Endpoint-comparison bisection on an interval holding a unique minimizer
/// of a symmetric unimodal objective. Probes both endpoints first.
pub fn binary_min<F, E>(
    objective: F,
    lo: f64,
    hi: f64,
    eta: f64,
    accounting: Accounting,
) -> Result<SearchResult, SearchError<E>>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    if !(hi > lo) {
        return Err(SearchError::InvalidSpec(format!("empty interval [{lo}, {hi}]")));
    }
    if !(eta > 0.0) || eta >= hi - lo {
        return Err(SearchError::InvalidSpec(format!(
            "eta must lie in (0, {}), got {eta}",
            hi - lo
        )));
    }
    let mut obj = Counted { f: objective, calls: 0 };
    let b = match accounting {
        Accounting::Memoized => Bracket {
            lo,
            hi,
            w_lo: obj.eval(lo)?,
            w_hi: obj.eval(hi)?,
        },
        Accounting::Reprobe => Bracket { lo, hi, w_lo: 0.0, w_hi: 0.0 },
    };
    let z_hat = bisect(&mut obj, b, bisection_steps(hi - lo, eta), accounting)?;
    Ok(SearchResult {
        z_hat,
        evaluations: obj.calls,
        degenerate: false,
    })
}

/// Minimizes a sinusoid-shaped objective of period `2·z_max`; `z_hat` is
/// returned in `(-z_max, z_max]` and lies within `eta` of a minimizer.
pub fn line_search<F, E>(
    objective: F,
    z_max: f64,
    eta: f64,
    opts: &LineSearchOptions,
) -> Result<SearchResult, SearchError<E>>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let bracket_len = match opts.bracket {
        BracketMode::Ordinal => z_max / 2.0,
        BracketMode::Table => z_max,
    };
    validate(z_max, eta, bracket_len)?;
    let mut obj = Counted { f: objective, calls: 0 };
    let outcome = match opts.bracket {
        BracketMode::Ordinal => ordinal_bracket(&mut obj, z_max)?,
        BracketMode::Table => table_bracket(&mut obj, z_max)?,
    };
    let b = match outcome {
        BracketOutcome::Degenerate => {
            return Ok(SearchResult {
                z_hat: 0.0,
                evaluations: obj.calls,
                degenerate: true,
            })
        }
        BracketOutcome::Found(b) => b,
    };
    let steps = match opts.bracket {
        BracketMode::Ordinal => bisection_steps(bracket_len, eta),
        BracketMode::Table => table_steps(bracket_len, eta),
    };
    let z = bisect(&mut obj, b, steps, opts.accounting)?;
    Ok(SearchResult {
        z_hat: wrap_half_open(z, z_max),
        evaluations: obj.calls,
        degenerate: false,
    })
}

/// Maps `z` into `(-z_max, z_max]` modulo `2·z_max`.
pub fn wrap_half_open(z: f64, z_max: f64) -> f64 {
    let period = 2.0 * z_max;
    let mut r = z.rem_euclid(period);
    if r > z_max {
        r -= period;
    }
    r
}

/// Distance between `a` and `b` on a circle of the given period.
pub fn circular_distance(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    d.min(period - d)
}

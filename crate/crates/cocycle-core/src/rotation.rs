//! Circle-rotation arithmetic: rotation numbers, continued fractions,
//! Diophantine constants, return-time bounds and interval-system accounting.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::arcs::CircleArc;
use crate::error::{LabError, Result};
use crate::scalar::{two_prod, Real};

/// How a rotation number was specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RotationSource {
    /// A plain decimal literal.
    Literal(String),
    /// An arithmetic expression such as `(sqrt(5)-1)/4`, evaluated in
    /// double-double precision.
    Expression(String),
}

/// Direction of time along a rotation orbit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeDirection {
    Forward,
    Backward,
}

/// A rotation number `ω ∈ (0, 1)`, stored as an unevaluated sum
/// `omega + omega_lo` so that `frac(mω)` stays accurate for very large `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationNumber<T> {
    /// Leading part of `ω`.
    pub omega: T,
    /// Correction term: `ω ≈ omega + omega_lo` to roughly twice working precision.
    pub omega_lo: T,
    /// Partial quotients `[a₀; a₁, a₂, …]` of the stored value, truncated once
    /// the convergent denominators exceed `10¹⁵`.
    pub cf_terms: Vec<u64>,
    /// Where the value came from.
    pub source: RotationSource,
}

/// Largest convergent denominator kept in [`RotationNumber::cf_terms`].
const CF_DENOMINATOR_CAP: f64 = 1e15;

impl<T: Real> RotationNumber<T> {
    /// Rotation number from a double-double pair.
    pub fn from_parts(hi: f64, lo: f64, source: RotationSource) -> Result<Self> {
        let value = hi + lo;
        if !(value > 0.0 && value < 1.0) || !value.is_finite() {
            return Err(LabError::invalid(format!("rotation number {value} is not in (0, 1)")));
        }
        let omega = T::c(hi);
        let omega_lo = T::c((hi - omega.f64()) + lo);
        let cf_terms = continued_fraction(hi, lo);
        Ok(Self { omega, omega_lo, cf_terms, source })
    }

    /// Rotation number from a literal value.
    pub fn from_literal(value: f64) -> Result<Self> {
        Self::from_parts(value, 0.0, RotationSource::Literal(format!("{value}")))
    }

    /// Rotation number from an arithmetic expression (numbers, `+ - * /`,
    /// parentheses and `sqrt(·)`), evaluated in double-double precision.
    pub fn from_expression(expr: &str) -> Result<Self> {
        let v = parse_expression(expr)?;
        Self::from_parts(v.hi(), v.lo(), RotationSource::Expression(expr.to_string()))
    }

    /// Parses either a decimal literal or an expression.
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim().parse::<f64>() {
            Ok(v) => Self::from_literal(v),
            Err(_) => Self::from_expression(text),
        }
    }

    /// The golden-mean-type rotation `(√5 − 1)/4` used for reference runs.
    pub fn reference() -> Self {
        Self::from_expression("(sqrt(5)-1)/4").expect("reference rotation is valid")
    }

    /// Convergents `p_k/q_k` of the stored continued fraction.
    pub fn convergents(&self) -> Vec<(u64, u64)> {
        let (mut p0, mut q0, mut p1, mut q1) = (1u128, 0u128, 0u128, 1u128);
        let mut out = Vec::with_capacity(self.cf_terms.len());
        for &a in &self.cf_terms {
            let a = a as u128;
            let (p, q) = (a * p0 + p1, a * q0 + q1);
            p1 = p0;
            q1 = q0;
            p0 = p;
            q0 = q;
            out.push((p as u64, q as u64));
        }
        out
    }

    /// `frac(m ω)` computed with an error-free product, accurate even when
    /// `|m|` is far beyond `1/ε` of the working precision.
    pub fn frac_mul(&self, m: i64) -> T {
        let mt = T::from_i64(m).expect("multiplier representable");
        let (p, e) = two_prod(mt, self.omega);
        let f = p - p.floor();
        (f + (e + mt * self.omega_lo)).frac_angle()
    }

    /// `dist(nω, ℤ)`.
    pub fn dist_to_int(&self, n: i64) -> T {
        self.frac_mul(n).wrap_signed().abs()
    }

    /// `frac(θ + kω)`.
    pub fn advance(&self, theta: T, k: i64) -> T {
        (theta + self.frac_mul(k)).frac_angle()
    }

    /// One rotation step `frac(θ + ω)`.
    #[inline]
    pub fn step(&self, theta: T) -> T {
        (theta + self.omega).frac_angle()
    }

    /// One inverse step `frac(θ − ω)`.
    #[inline]
    pub fn unstep(&self, theta: T) -> T {
        (theta - self.omega).frac_angle()
    }

    /// Estimates `(κ, τ)` with `τ = 1` and the default margin `0.999`.
    pub fn estimate_diophantine(&self, n_max: u64) -> Result<DiophantineConstants<T>> {
        self.estimate_diophantine_with(n_max, T::one(), T::c(0.999))
    }

    /// Estimates `κ = margin · min_{1≤n≤n_max} n^τ dist(nω, ℤ)`.
    pub fn estimate_diophantine_with(&self, n_max: u64, tau: T, margin: T) -> Result<DiophantineConstants<T>> {
        if n_max < 2 {
            return Err(LabError::invalid("n_max must be at least 2"));
        }
        if tau < T::one() {
            return Err(LabError::invalid("τ must be at least 1"));
        }
        let eps = T::epsilon();
        let mut best = T::infinity();
        for n in 1..=n_max {
            let nt = T::from_count(n);
            let d = self.dist_to_int(n as i64);
            if d <= T::c(4.0) * eps {
                return Err(LabError::DegenerateRotation { n });
            }
            let score = nt.powf(tau) * d;
            if score < best {
                best = score;
            }
        }
        Ok(DiophantineConstants { kappa: best * margin, tau, n_max_checked: n_max })
    }

    /// Smallest `n ≥ 1` with `dist(nω, ℤ) ≤ length`, i.e. the first time an arc
    /// of that length meets its own rotation image; `None` if beyond `cap`.
    pub fn brute_force_first_return(&self, length: T, cap: u64) -> Option<u64> {
        (1..=cap).find(|&n| self.dist_to_int(n as i64) <= length)
    }
}

/// Continued fraction of the exact rational `hi + lo`, truncated at the
/// denominator cap.
fn continued_fraction(hi: f64, lo: f64) -> Vec<u64> {
    let (Some(a), Some(b)) = (BigRational::from_float(hi), BigRational::from_float(lo)) else {
        return Vec::new();
    };
    let mut x = a + b;
    let mut terms = Vec::new();
    let (mut q0, mut q1) = (1.0f64, 0.0f64);
    loop {
        let fl = x.floor();
        let term = fl.to_integer();
        let Some(t) = term.to_u64() else { break };
        let q = t as f64 * q0 + q1;
        if q > CF_DENOMINATOR_CAP && !terms.is_empty() {
            break;
        }
        terms.push(t);
        q1 = q0;
        q0 = q;
        let rest = x - fl;
        if rest.is_zero() {
            break;
        }
        x = rest.recip();
    }
    terms
}

/// Quantitative irrationality constants: `dist(nω, ℤ) > κ/|n|^τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiophantineConstants<T> {
    pub kappa: T,
    pub tau: T,
    /// The inequality was verified exhaustively for `0 < |n| ≤ n_max_checked`.
    pub n_max_checked: u64,
}

impl<T: Real> DiophantineConstants<T> {
    /// Return-time lower bound `N = ⌊(κ/ε)^{1/τ}⌋`: an arc of length `ε` does
    /// not meet its rotation images `I + nω` for `0 < |n| ≤ N`.
    pub fn first_return_lower_bound(&self, interval_length: T) -> Result<u64> {
        if !(interval_length > T::zero() && interval_length < T::one()) {
            return Err(LabError::invalid("interval length must lie in (0, 1)"));
        }
        let n = (self.kappa / interval_length).powf(self.tau.recip()).floor();
        Ok(n.to_u64().unwrap_or(u64::MAX))
    }

    /// Same bound in floating point, for interval lengths far below `1/u64::MAX`.
    pub fn first_return_lower_bound_f64(&self, log10_length: f64) -> f64 {
        let log10_n = (self.kappa.f64().log10() - log10_length) / self.tau.f64();
        10f64.powf(log10_n).floor()
    }
}

/// A finite union of arcs with declared `(r, l, a)` constants.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSystem<T> {
    pub arcs: Vec<CircleArc<T>>,
    /// Minimal return time: after leaving, the orbit stays out for at least `r` steps.
    pub r: Option<u64>,
    /// Maximal confinement time: the orbit stays inside for at most `l` successive steps.
    pub l: Option<u64>,
    /// Accumulation time of the reference point: first entry happens at step `a`.
    pub a: Option<u64>,
    /// Whether the constants refer to the backward orbit.
    pub reversed: bool,
}

impl<T: Real> IntervalSystem<T> {
    /// Whether `theta` lies in the union of arcs.
    pub fn contains(&self, theta: T) -> bool {
        self.arcs.iter().any(|a| a.contains(theta))
    }

    /// Builds a system whose constants are measured on the orbit of `theta0`
    /// over `horizon` steps, which makes it admissible for that orbit.
    ///
    /// `r` is the shortest excursion between two visits, `l` the longest run of
    /// visits and `a` the first visit time; missing events default to `horizon`.
    pub fn with_measured_constants(
        arcs: Vec<CircleArc<T>>,
        rotation: &RotationNumber<T>,
        theta0: T,
        horizon: u64,
        direction: TimeDirection,
    ) -> Self {
        let mut sys = Self { arcs, r: None, l: None, a: None, reversed: direction == TimeDirection::Backward };
        let flags = orbit_flags(&sys, rotation, theta0, horizon, direction);
        let mut longest = 0u64;
        let mut run = 0u64;
        let mut first = None;
        let mut min_gap: Option<u64> = None;
        let mut gap = 0u64;
        let mut seen = false;
        for (j, &inside) in flags.iter().enumerate() {
            if inside {
                if first.is_none() {
                    first = Some(j as u64);
                }
                if seen && gap > 0 {
                    min_gap = Some(min_gap.map_or(gap, |g| g.min(gap)));
                }
                gap = 0;
                seen = true;
                run += 1;
                longest = longest.max(run);
            } else {
                run = 0;
                if seen {
                    gap += 1;
                }
            }
        }
        sys.l = Some(longest);
        sys.r = Some(min_gap.unwrap_or(horizon));
        sys.a = Some(first.unwrap_or(horizon));
        sys
    }
}

fn orbit_flags<T: Real>(
    sys: &IntervalSystem<T>,
    rotation: &RotationNumber<T>,
    theta0: T,
    t: u64,
    direction: TimeDirection,
) -> Vec<bool> {
    let mut theta = theta0.frac_angle();
    let mut out = Vec::with_capacity(t as usize);
    for _ in 0..t {
        out.push(sys.contains(theta));
        theta = match direction {
            TimeDirection::Forward => rotation.step(theta),
            TimeDirection::Backward => rotation.unstep(theta),
        };
    }
    out
}

/// Empirical visit frequency together with the two analytic upper bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisitReport<T> {
    /// `|{0 ≤ j < t : θ_j ∈ ⋃Σ_k}| / t`.
    pub frequency: T,
    /// Number of visits.
    pub visits: u64,
    /// `Σ_k (l_k/t + l_k/(r_k + l_k))`.
    pub bound_no_buildup: T,
    /// `Σ_k l_k/(m_k + l_k)` with `m_k = min(a_k, r_k)`.
    pub bound_with_accumulation: T,
}

fn ratio<T: Real>(num: u64, den: u64) -> T {
    if den == 0 {
        T::zero()
    } else {
        T::from_count(num) / T::from_count(den)
    }
}

/// Counts visits of the orbit of `theta0` to the union of the systems and
/// evaluates the analytic frequency bounds.
pub fn empirical_visit_frequency<T: Real>(
    systems: &[IntervalSystem<T>],
    rotation: &RotationNumber<T>,
    theta0: T,
    t: u64,
    direction: TimeDirection,
) -> Result<VisitReport<T>> {
    if t < 1 {
        return Err(LabError::invalid("t must be at least 1"));
    }
    let mut b1 = T::zero();
    let mut b2 = T::zero();
    for (index, s) in systems.iter().enumerate() {
        let (Some(r), Some(l)) = (s.r, s.l) else {
            return Err(LabError::MissingSystemConstants { index });
        };
        let m = s.a.map_or(r, |a| a.min(r));
        b1 = b1 + ratio::<T>(l, t) + ratio::<T>(l, r + l);
        b2 = b2 + ratio::<T>(l, m + l);
    }
    let mut theta = theta0.frac_angle();
    let mut visits = 0u64;
    for _ in 0..t {
        if systems.iter().any(|s| s.contains(theta)) {
            visits += 1;
        }
        theta = match direction {
            TimeDirection::Forward => rotation.step(theta),
            TimeDirection::Backward => rotation.unstep(theta),
        };
    }
    Ok(VisitReport { frequency: ratio(visits, t), visits, bound_no_buildup: b1, bound_with_accumulation: b2 })
}

// ---------------------------------------------------------------------------
// Expression parsing (double-double)
// ---------------------------------------------------------------------------

struct Parser<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    text: &'a str,
}

impl<'a> Parser<'a> {
    fn err(&self, what: &str) -> LabError {
        LabError::invalid(format!("cannot parse rotation expression {:?}: {what}", self.text))
    }

    fn skip_ws(&mut self) {
        while self.chars.peek().is_some_and(|c| c.is_whitespace()) {
            self.chars.next();
        }
    }

    fn expr(&mut self) -> Result<TwoFloat> {
        let mut acc = self.term()?;
        loop {
            self.skip_ws();
            match self.chars.peek() {
                Some('+') => {
                    self.chars.next();
                    acc += self.term()?;
                }
                Some('-') => {
                    self.chars.next();
                    acc -= self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<TwoFloat> {
        let mut acc = self.factor()?;
        loop {
            self.skip_ws();
            match self.chars.peek() {
                Some('*') => {
                    self.chars.next();
                    acc *= self.factor()?;
                }
                Some('/') => {
                    self.chars.next();
                    let d = self.factor()?;
                    if d.hi() == 0.0 {
                        return Err(self.err("division by zero"));
                    }
                    acc /= d;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<TwoFloat> {
        self.skip_ws();
        match self.chars.peek().copied() {
            Some('-') => {
                self.chars.next();
                Ok(-self.factor()?)
            }
            Some('(') => {
                self.chars.next();
                let v = self.expr()?;
                self.skip_ws();
                if self.chars.next() != Some(')') {
                    return Err(self.err("missing ')'"));
                }
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let mut name = String::new();
                while let Some(&c) = self.chars.peek() {
                    if c.is_ascii_alphabetic() {
                        name.push(c);
                        self.chars.next();
                    } else {
                        break;
                    }
                }
                if name != "sqrt" {
                    return Err(self.err(&format!("unknown function {name}")));
                }
                let arg = self.factor()?;
                if arg.hi() < 0.0 {
                    return Err(self.err("square root of a negative number"));
                }
                Ok(arg.sqrt())
            }
            _ => Err(self.err("unexpected token")),
        }
    }

    /// Decimal literal, converted exactly as `digits / 10^k`.
    fn number(&mut self) -> Result<TwoFloat> {
        let mut digits = String::new();
        let mut decimals = 0i32;
        let mut seen_dot = false;
        while let Some(&c) = self.chars.peek() {
            if c.is_ascii_digit() {
                digits.push(c);
                if seen_dot {
                    decimals += 1;
                }
            } else if c == '.' && !seen_dot {
                seen_dot = true;
            } else {
                break;
            }
            self.chars.next();
        }
        let int: BigInt = digits.parse().map_err(|_| self.err("bad number"))?;
        let den = BigInt::from(10u32).pow(decimals as u32);
        let q = BigRational::new(int, den);
        Ok(rational_to_twofloat(&q))
    }
}

fn rational_to_twofloat(q: &BigRational) -> TwoFloat {
    let hi = q.to_f64().unwrap_or(f64::NAN);
    let rest = q - BigRational::from_f64(hi).unwrap_or_else(|| BigRational::from_integer(BigInt::zero()));
    let lo = if rest.is_positive() || rest.is_negative() { rest.to_f64().unwrap_or(0.0) } else { 0.0 };
    TwoFloat::from(hi) + TwoFloat::from(lo)
}

fn parse_expression(text: &str) -> Result<TwoFloat> {
    let mut p = Parser { chars: text.chars().peekable(), text };
    let v = p.expr()?;
    p.skip_ws();
    if p.chars.next().is_some() {
        return Err(p.err("trailing characters"));
    }
    Ok(v)
}

//! Young functions, their associates, B_{p,q} classification and
//! Luxemburg norms.
//!
//! A [`YoungFn`] is `c * B(k t)` for a base function `B` from one of the
//! supported families. The two scale factors make the family closed under
//! taking associates: the associate of `c B(k t)` is `c B̄(t / (c k))`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Number of nodes in the cached associate grid.
pub const ASSOC_NODES: usize = 512;
/// Range of the cached associate grid.
pub const ASSOC_RANGE: (f64, f64) = (1e-8, 1e8);
/// Upper limit of numerical tail integration in `classify_b`.
pub const T_MAX: f64 = 1e8;

const LUX_RTOL: f64 = 1e-10;

/// Asymptotic growth `t^exponent * ln(t)^log_power` as `t -> ∞`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Growth {
    pub exponent: f64,
    pub log_power: f64,
    /// `true` when the growth class is known analytically rather than read
    /// off a finite table.
    pub exact: bool,
}

#[derive(Clone, Debug)]
enum Base {
    Power { r: f64 },
    PowerLog { r: f64, delta: f64 },
    Knots(Arc<Knots>),
    Grid(Arc<Grid>),
}

/// A Young function `t ↦ c·B(k·t)`.
#[derive(Clone, Debug)]
pub struct YoungFn {
    base: Base,
    c: f64,
    k: f64,
}

/// User-supplied samples, linearly interpolated, linear from the origin
/// to the first knot and power-law beyond the last one.
#[derive(Debug)]
struct Knots {
    ts: Vec<f64>,
    vs: Vec<f64>,
    tail_exp: f64,
}

/// Cached values and first derivatives on a logarithmic grid, used for
/// numerically computed associates.
#[derive(Debug)]
struct Grid {
    ts: Vec<f64>,
    vs: Vec<f64>,
    ds: Vec<f64>,
    /// Index of the last node with a finite value; everything past it
    /// overflowed `f64`.
    last_finite: usize,
    overflowed: bool,
    growth: Growth,
    origin: String,
}

impl YoungFn {
    /// `t^r`; `r = 1` is accepted as the degenerate L¹ case.
    pub fn power(r: f64) -> Result<Self> {
        Self::power_scaled(r, 1.0)
    }

    /// `scale · t^r`.
    pub fn power_scaled(r: f64, scale: f64) -> Result<Self> {
        if !(r >= 1.0 && r.is_finite()) {
            return Err(domain(format!("power exponent must be >= 1, got {r}")));
        }
        check_scale(scale)?;
        Ok(YoungFn { base: Base::Power { r }, c: scale, k: 1.0 })
    }

    /// `t^r · ln(e + t)^δ`.
    pub fn power_log(r: f64, delta: f64) -> Result<Self> {
        Self::power_log_scaled(r, delta, 1.0)
    }

    pub fn power_log_scaled(r: f64, delta: f64, scale: f64) -> Result<Self> {
        if !(r >= 1.0 && r.is_finite() && delta.is_finite()) {
            return Err(domain(format!("power_log needs r >= 1 and finite delta, got ({r}, {delta})")));
        }
        if r == 1.0 && delta <= 0.0 {
            return Err(domain("power_log(1, delta) is not superlinear for delta <= 0"));
        }
        check_scale(scale)?;
        let f = YoungFn { base: Base::PowerLog { r, delta }, c: scale, k: 1.0 };
        f.check_shape()?;
        Ok(f)
    }

    /// Tabulated function from `(t, Φ(t))` samples. A leading `(0, 0)` is
    /// allowed; all other abscissae and values must be strictly increasing
    /// and positive.
    pub fn tabulated(points: &[[f64; 2]]) -> Result<Self> {
        let pts: Vec<[f64; 2]> = points.iter().copied().filter(|p| !(p[0] == 0.0 && p[1] == 0.0)).collect();
        if pts.len() < 2 {
            return Err(domain("tabulated Young function needs at least two positive points"));
        }
        for w in pts.windows(2) {
            if !(w[1][0] > w[0][0] && w[1][1] > w[0][1]) {
                return Err(domain("tabulated points must be strictly increasing in t and value"));
            }
        }
        if pts.iter().any(|p| !(p[0] > 0.0 && p[1] > 0.0 && p[0].is_finite() && p[1].is_finite())) {
            return Err(domain("tabulated points must be positive and finite"));
        }
        let (ts, vs): (Vec<f64>, Vec<f64>) = pts.iter().map(|p| (p[0], p[1])).unzip();
        let m = ts.len();
        let tail_exp = (vs[m - 1] / vs[m - 2]).ln() / (ts[m - 1] / ts[m - 2]).ln();
        if tail_exp <= 1.0 {
            return Err(domain("tabulated tail must grow faster than linearly"));
        }
        let f = YoungFn { base: Base::Knots(Arc::new(Knots { ts, vs, tail_exp })), c: 1.0, k: 1.0 };
        f.check_shape()?;
        Ok(f)
    }

    /// `scale · Φ`.
    pub fn scaled(&self, scale: f64) -> Result<Self> {
        check_scale(scale)?;
        Ok(YoungFn { c: self.c * scale, ..self.clone() })
    }

    /// `Φ / Φ(1)`, so that the result takes the value 1 at 1.
    pub fn normalized(&self) -> Result<Self> {
        let v = self.value(1.0);
        if !(v > 0.0 && v.is_finite()) {
            return Err(domain(format!("cannot normalize {self}: value at 1 is {v}")));
        }
        self.scaled(1.0 / v)
    }

    /// Φ(t), with a domain error for negative or NaN input.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(domain(format!("Young function evaluated at {t}")));
        }
        Ok(self.value(t))
    }

    /// Φ(t) for `t >= 0` without argument checking.
    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let s = self.k * t;
        self.c
            * match &self.base {
                Base::Power { r } => {
                    if *r == 2.0 {
                        s * s
                    } else if *r == 1.0 {
                        s
                    } else {
                        s.powf(*r)
                    }
                }
                Base::PowerLog { r, delta } => s.powf(*r) * (core::f64::consts::E + s).ln().powf(*delta),
                Base::Knots(k) => k.value(s),
                Base::Grid(g) => g.value(s),
            }
    }

    /// Right derivative Φ'(t).
    pub fn derivative(&self, t: f64) -> f64 {
        let s = self.k * t.max(0.0);
        self.c
            * self.k
            * match &self.base {
                Base::Power { r } => {
                    if *r == 1.0 {
                        1.0
                    } else {
                        r * s.powf(r - 1.0)
                    }
                }
                Base::PowerLog { r, delta } => {
                    let l = (core::f64::consts::E + s).ln();
                    let mut d = if *r == 1.0 { l.powf(*delta) } else { r * s.powf(r - 1.0) * l.powf(*delta) };
                    if s > 0.0 {
                        d += s.powf(*r) * delta * l.powf(delta - 1.0) / (core::f64::consts::E + s);
                    }
                    d
                }
                Base::Knots(k) => k.derivative(s),
                Base::Grid(g) => g.derivative(s),
            }
    }

    /// Smallest `t` with Φ(t) >= y.
    pub fn inverse(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if let Base::Power { r } = self.base {
            return (y / self.c).powf(1.0 / r) / self.k;
        }
        let mut hi = 1.0;
        while self.value(hi) < y && hi < 1e300 {
            hi *= 2.0;
        }
        let mut lo = hi * 0.5;
        while self.value(lo) >= y && lo > 1e-300 {
            lo *= 0.5;
        }
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if self.value(mid) >= y {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi / lo - 1.0 < 1e-15 {
                break;
            }
        }
        hi
    }

    /// Asymptotic growth class.
    pub fn growth(&self) -> Growth {
        match &self.base {
            Base::Power { r } => Growth { exponent: *r, log_power: 0.0, exact: true },
            Base::PowerLog { r, delta } => Growth { exponent: *r, log_power: *delta, exact: true },
            Base::Knots(k) => Growth { exponent: k.tail_exp, log_power: 0.0, exact: false },
            Base::Grid(g) => g.growth,
        }
    }

    /// Exponent `r` when this is a pure power `c·t^r`.
    pub fn power_exponent(&self) -> Option<f64> {
        match self.base {
            Base::Power { r } => Some(r),
            _ => None,
        }
    }

    /// `true` for exactly `t^2`, which admits closed-form reducing operators.
    pub fn is_square(&self) -> bool {
        matches!(self.base, Base::Power { r } if r == 2.0) && (self.c * self.k * self.k - 1.0).abs() < 1e-15
    }

    /// The associate `Φ̄(t) = sup_{s>0} (s t − Φ(s))`.
    ///
    /// Closed form for powers; otherwise the maximizer of `s t − Φ(s)` is
    /// found by bisection on `Φ'(s) = t` at [`ASSOC_NODES`] logarithmic
    /// nodes, and the values are interpolated by cubic Hermite splines with
    /// the exact slopes `Φ̄'(t) = s*(t)`.
    pub fn associate(&self) -> Result<YoungFn> {
        let (c, k) = (self.c, self.k);
        // associate of c B(k t) is c B̄(t / (c k))
        let (c2, k2) = (c, 1.0 / (c * k));
        match &self.base {
            Base::Power { r } => {
                let r = *r;
                if r == 1.0 {
                    return Err(domain("power(1) has no finite associate"));
                }
                let rp = r / (r - 1.0);
                // sup_s (s t - s^r) at s = (t/r)^{1/(r-1)}
                let coef = (r - 1.0) * r.powf(-rp);
                Ok(YoungFn { base: Base::Power { r: rp }, c: c2 * coef, k: k2 })
            }
            _ => {
                let unit = YoungFn { base: self.base.clone(), c: 1.0, k: 1.0 };
                let grid = Grid::associate_of(&unit)?;
                Ok(YoungFn { base: Base::Grid(Arc::new(grid)), c: c2, k: k2 })
            }
        }
    }

    /// Verifies convexity, monotonicity and superlinear growth on a
    /// geometric sample grid.
    pub fn check_shape(&self) -> Result<()> {
        let n = 241;
        let ts: Vec<f64> = (0..n).map(|i| 1e-6 * 10f64.powf(12.0 * i as f64 / (n - 1) as f64)).collect();
        let vs: Vec<f64> = ts.iter().map(|&t| self.value(t)).collect();
        let mut prev_slope = vs[0] / ts[0];
        for i in 1..n {
            if vs[i] < vs[i - 1] {
                return Err(domain(format!("{self} is not increasing near t = {}", ts[i])));
            }
            let slope = (vs[i] - vs[i - 1]) / (ts[i] - ts[i - 1]);
            if slope < prev_slope * (1.0 - 1e-9) - 1e-12 {
                return Err(domain(format!("{self} is not convex near t = {}", ts[i])));
            }
            prev_slope = slope;
        }
        for &t in ts.iter().filter(|&&t| t >= 1e3 && t <= 5e5) {
            let a = self.value(t) / t;
            let b = self.value(2.0 * t) / (2.0 * t);
            if b < a * (1.0 - 1e-12) {
                return Err(domain(format!("{self}: Φ(t)/t decreases near t = {t}")));
            }
        }
        Ok(())
    }
}

fn check_scale(scale: f64) -> Result<()> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(domain(format!("scale must be positive and finite, got {scale}")));
    }
    Ok(())
}

impl Knots {
    fn value(&self, s: f64) -> f64 {
        let m = self.ts.len();
        if s <= self.ts[0] {
            return self.vs[0] * s / self.ts[0];
        }
        if s >= self.ts[m - 1] {
            return self.vs[m - 1] * (s / self.ts[m - 1]).powf(self.tail_exp);
        }
        let i = self.ts.partition_point(|&t| t <= s) - 1;
        let w = (s - self.ts[i]) / (self.ts[i + 1] - self.ts[i]);
        self.vs[i] + w * (self.vs[i + 1] - self.vs[i])
    }

    fn derivative(&self, s: f64) -> f64 {
        let m = self.ts.len();
        if s < self.ts[0] {
            return self.vs[0] / self.ts[0];
        }
        if s >= self.ts[m - 1] {
            return self.tail_exp * self.vs[m - 1] / self.ts[m - 1] * (s / self.ts[m - 1]).powf(self.tail_exp - 1.0);
        }
        let i = self.ts.partition_point(|&t| t <= s) - 1;
        (self.vs[i + 1] - self.vs[i]) / (self.ts[i + 1] - self.ts[i])
    }
}

impl Grid {
    fn associate_of(f: &YoungFn) -> Result<Grid> {
        let (t0, t1) = ASSOC_RANGE;
        let ratio = (t1 / t0).ln() / (ASSOC_NODES - 1) as f64;
        let mut ts = Vec::with_capacity(ASSOC_NODES);
        let mut vs = Vec::with_capacity(ASSOC_NODES);
        let mut ds = Vec::with_capacity(ASSOC_NODES);
        let mut overflowed = false;
        for i in 0..ASSOC_NODES {
            let t = t0 * (ratio * i as f64).exp();
            let (v, s) = match maximizer(f, t) {
                Some(s) => (s * t - f.value(s), s),
                None => {
                    overflowed = true;
                    (f64::INFINITY, f64::INFINITY)
                }
            };
            ts.push(t);
            vs.push(v.max(0.0));
            ds.push(s);
            if overflowed {
                break;
            }
        }
        let last_finite = vs.iter().rposition(|v| v.is_finite()).unwrap_or(0);
        let g = f.growth();
        let growth = if overflowed || g.exponent == 1.0 {
            Growth { exponent: f64::INFINITY, log_power: 0.0, exact: g.exact }
        } else {
            let e = g.exponent / (g.exponent - 1.0);
            Growth { exponent: e, log_power: -g.log_power / (g.exponent - 1.0), exact: g.exact }
        };
        Ok(Grid { ts, vs, ds, last_finite, overflowed, growth, origin: format!("{f}") })
    }

    fn value(&self, s: f64) -> f64 {
        let n = self.last_finite + 1;
        if s <= self.ts[0] {
            let (v, d) = (self.vs[0], self.ds[0]);
            if v <= 0.0 {
                return 0.0;
            }
            return v * (s / self.ts[0]).powf(self.ts[0] * d / v);
        }
        if s >= self.ts[n - 1] {
            if self.overflowed {
                return if s == self.ts[n - 1] { self.vs[n - 1] } else { f64::INFINITY };
            }
            let (t, v, d) = (self.ts[n - 1], self.vs[n - 1], self.ds[n - 1]);
            return v * (s / t).powf(t * d / v);
        }
        let i = self.ts[..n].partition_point(|&t| t <= s) - 1;
        let (ta, tb, va, vb, da, db) = (self.ts[i], self.ts[i + 1], self.vs[i], self.vs[i + 1], self.ds[i], self.ds[i + 1]);
        if va > 0.0 && vb > 0.0 {
            // Hermite in (ln t, ln v) with slopes t·Φ̄'/Φ̄
            let (xa, xb) = (ta.ln(), tb.ln());
            let h = xb - xa;
            let u = (s.ln() - xa) / h;
            let y = hermite(u, va.ln(), vb.ln(), ta * da / va * h, tb * db / vb * h);
            y.exp()
        } else {
            let h = tb - ta;
            let u = (s - ta) / h;
            hermite(u, va, vb, da * h, db * h).max(0.0)
        }
    }

    fn derivative(&self, s: f64) -> f64 {
        let n = self.last_finite + 1;
        if s <= self.ts[0] {
            let (v, d) = (self.vs[0], self.ds[0]);
            if v <= 0.0 {
                return d;
            }
            let e = self.ts[0] * d / v;
            return d * (s / self.ts[0]).powf(e - 1.0);
        }
        if s >= self.ts[n - 1] {
            if self.overflowed {
                return f64::INFINITY;
            }
            let (t, v, d) = (self.ts[n - 1], self.vs[n - 1], self.ds[n - 1]);
            let e = t * d / v;
            return d * (s / t).powf(e - 1.0);
        }
        let i = self.ts[..n].partition_point(|&t| t <= s) - 1;
        let w = (s.ln() - self.ts[i].ln()) / (self.ts[i + 1].ln() - self.ts[i].ln());
        self.ds[i] + w * (self.ds[i + 1] - self.ds[i])
    }
}

#[inline]
fn hermite(u: f64, y0: f64, y1: f64, m0: f64, m1: f64) -> f64 {
    let u2 = u * u;
    let u3 = u2 * u;
    (2.0 * u3 - 3.0 * u2 + 1.0) * y0 + (u3 - 2.0 * u2 + u) * m0 + (-2.0 * u3 + 3.0 * u2) * y1 + (u3 - u2) * m1
}

/// Solves `Φ'(s) = t` for the maximizer of `s t − Φ(s)`. Returns `Some(0)`
/// when `Φ'(0+) >= t` and `None` when the maximizer overflows.
fn maximizer(f: &YoungFn, t: f64) -> Option<f64> {
    let mut hi = 1.0;
    while f.derivative(hi) < t {
        hi *= 2.0;
        if hi > 1e300 {
            return None;
        }
    }
    let mut lo = hi * 0.5;
    while f.derivative(lo) >= t {
        lo *= 0.5;
        if lo < 1e-300 {
            return Some(0.0);
        }
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if f.derivative(mid) >= t {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi / lo - 1.0 < 4e-16 {
            break;
        }
    }
    // the maximum of the concave map s ↦ s t − Φ(s) lies in [lo, hi]
    let vlo = lo * t - f.value(lo);
    let vhi = hi * t - f.value(hi);
    Some(if vlo > vhi { lo } else { hi })
}

impl fmt::Display for YoungFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.c != 1.0 {
            write!(f, "{}*", self.c)?;
        }
        let arg = |f: &mut fmt::Formatter<'_>| if self.k != 1.0 { write!(f, "[{}t]", self.k) } else { Ok(()) };
        match &self.base {
            Base::Power { r } => write!(f, "power({r})")?,
            Base::PowerLog { r, delta } => write!(f, "power_log({r},{delta})")?,
            Base::Knots(k) => write!(f, "tabulated({})", k.ts.len())?,
            Base::Grid(g) => write!(f, "assoc({})", g.origin)?,
        }
        arg(f)
    }
}

impl PartialEq for YoungFn {
    fn eq(&self, other: &Self) -> bool {
        if self.c != other.c || self.k != other.k {
            return false;
        }
        match (&self.base, &other.base) {
            (Base::Power { r: a }, Base::Power { r: b }) => a == b,
            (Base::PowerLog { r: a, delta: x }, Base::PowerLog { r: b, delta: y }) => a == b && x == y,
            (Base::Knots(a), Base::Knots(b)) => a.ts == b.ts && a.vs == b.vs,
            (Base::Grid(a), Base::Grid(b)) => Arc::ptr_eq(a, b) || (a.ts == b.ts && a.vs == b.vs),
            _ => false,
        }
    }
}

/// Serialized form.
#[derive(Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
enum YoungSpec {
    Power {
        r: f64,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        scale: f64,
    },
    PowerLog {
        r: f64,
        delta: f64,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        scale: f64,
    },
    Tabulated {
        points: Vec<[f64; 2]>,
    },
}

fn one() -> f64 {
    1.0
}

fn is_one(x: &f64) -> bool {
    *x == 1.0
}

impl Serialize for YoungFn {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        let spec = match &self.base {
            Base::Power { r } if self.k == 1.0 => YoungSpec::Power { r: *r, scale: self.c },
            Base::Power { r } => YoungSpec::Power { r: *r, scale: self.c * self.k.powf(*r) },
            Base::PowerLog { r, delta } if self.k == 1.0 => YoungSpec::PowerLog { r: *r, delta: *delta, scale: self.c },
            Base::PowerLog { .. } | Base::Knots(_) | Base::Grid(_) => {
                // tables are written by sampling the function itself
                let ts: Vec<f64> = match &self.base {
                    Base::Knots(k) => k.ts.iter().map(|t| t / self.k).collect(),
                    Base::Grid(g) => g.ts[..=g.last_finite].iter().map(|t| t / self.k).collect(),
                    _ => (0..ASSOC_NODES)
                        .map(|i| ASSOC_RANGE.0 * 10f64.powf(16.0 * i as f64 / (ASSOC_NODES - 1) as f64))
                        .collect(),
                };
                let points = ts
                    .into_iter()
                    .map(|t| [t, self.value(t)])
                    .filter(|p| p[1] > 0.0 && p[1].is_finite())
                    .collect();
                YoungSpec::Tabulated { points }
            }
        };
        spec.serialize(s)
    }
}

impl<'de> Deserialize<'de> for YoungFn {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let spec = YoungSpec::deserialize(d)?;
        let f = match spec {
            YoungSpec::Power { r, scale } => YoungFn::power_scaled(r, scale),
            YoungSpec::PowerLog { r, delta, scale } => YoungFn::power_log_scaled(r, delta, scale),
            YoungSpec::Tabulated { points } => YoungFn::tabulated(&points),
        };
        f.map_err(serde::de::Error::custom)
    }
}

/// Three-valued answer of [`classify_b`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Member,
    Nonmember,
    Inconclusive,
}

/// Result of a B_{p,q} test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BClass {
    pub membership: Membership,
    /// `∫_1^∞ Φ(t)^{q/p} t^{-q} dt/t`; infinite for nonmembers, `None` when
    /// inconclusive.
    pub tail_integral: Option<f64>,
}

impl BClass {
    pub fn is_member(&self) -> bool {
        self.membership == Membership::Member
    }
}

/// Tests `Φ ∈ B_{p,q}`, i.e. finiteness of `∫_1^∞ Φ(t)^{q/p} / t^q dt/t`.
/// `B_p` is the case `q = p`.
pub fn classify_b(phi: &YoungFn, p: f64, q: f64) -> Result<BClass> {
    if !(p > 1.0) || !(q >= p) || !q.is_finite() {
        return Err(domain(format!("classify_b needs 1 < p <= q < ∞, got p={p}, q={q}")));
    }
    let g = phi.growth();
    let nonmember = BClass { membership: Membership::Nonmember, tail_integral: Some(f64::INFINITY) };
    if let Base::Power { r } = phi.base {
        if r >= p {
            return Ok(nonmember);
        }
        // ∫_1^∞ c^{q/p} (k t)^{rq/p} t^{-q-1} dt
        let a = phi.c * phi.k.powf(r);
        let integral = a.powf(q / p) / (q - r * q / p);
        return Ok(BClass { membership: Membership::Member, tail_integral: Some(integral) });
    }
    let membership = if g.exact {
        if g.exponent < p || (g.exponent == p && g.log_power * q / p < -1.0) {
            Membership::Member
        } else {
            Membership::Nonmember
        }
    } else {
        // a finite table cannot decide a borderline tail
        if g.exponent < p - 0.05 {
            Membership::Member
        } else if g.exponent > p + 0.05 {
            Membership::Nonmember
        } else {
            Membership::Inconclusive
        }
    };
    match membership {
        Membership::Nonmember => Ok(nonmember),
        Membership::Inconclusive => Ok(BClass { membership, tail_integral: None }),
        Membership::Member => {
            let integral = b_integral(phi, p, q, g);
            Ok(BClass { membership, tail_integral: Some(integral) })
        }
    }
}

/// `∫_0^U Φ(e^u)^{q/p} e^{-qu} du` by adaptive Simpson plus an asymptotic
/// tail beyond `U = ln T_MAX`.
fn b_integral(phi: &YoungFn, p: f64, q: f64, g: Growth) -> f64 {
    let integrand = |u: f64| {
        let t = u.exp();
        (phi.value(t).powf(q / p) * (-q * u).exp()).max(0.0)
    };
    let upper = T_MAX.ln();
    let body = adaptive_simpson(&integrand, 0.0, upper, 1e-12, 40);
    let gu = integrand(upper);
    let gamma = q * (1.0 - g.exponent / p);
    let c = g.log_power * q / p;
    let tail = if gamma > 0.0 {
        gu / (gamma - c / upper).max(gamma * 0.5)
    } else {
        gu * upper / (-(c + 1.0))
    };
    body + tail
}

pub(crate) fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, tol * 0.5, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, tol * 0.5, depth - 1)
}

/// Luxemburg norm `inf{λ > 0 : avg Φ(v/λ) <= 1}` of nonnegative samples
/// with equal weights.
///
/// The root of `λ ↦ avg Φ(v/λ) − 1` is bracketed by
/// `[max/Φ⁻¹(N), 2·max]` and located in `ln λ` by the Illinois variant of
/// regula falsi with a bisection safeguard. The upper end of the final
/// bracket is returned, so the result never underestimates the norm by
/// more than round-off.
pub fn luxemburg_norm(values: &[f64], phi: &YoungFn) -> Result<f64> {
    if values.is_empty() {
        return Err(domain("Luxemburg norm of an empty cube"));
    }
    let mut vmax: f64 = 0.0;
    for &v in values {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(domain(format!("Luxemburg norm needs finite nonnegative values, got {v}")));
        }
        vmax = vmax.max(v);
    }
    if vmax == 0.0 {
        return Ok(0.0);
    }
    Ok(luxemburg_unchecked(values, vmax, phi))
}

pub(crate) fn luxemburg_unchecked(values: &[f64], vmax: f64, phi: &YoungFn) -> f64 {
    let n = values.len() as f64;
    let excess = |lam: f64| {
        let inv = 1.0 / lam;
        values.iter().map(|&v| phi.value(v * inv)).sum::<f64>() / n - 1.0
    };
    if values.len() == 1 || values.iter().all(|&v| v == vmax) {
        // Φ(v/λ) = 1 exactly
        let t = phi.inverse(1.0);
        return vmax / t;
    }
    let mut lo = vmax / phi.inverse(n);
    let mut glo = excess(lo);
    while !(glo >= 0.0) {
        lo *= 0.5;
        glo = excess(lo);
    }
    let mut hi = 2.0 * vmax;
    let mut ghi = excess(hi);
    while ghi > 0.0 {
        lo = hi;
        glo = ghi;
        hi *= 2.0;
        ghi = excess(hi);
    }
    if glo == 0.0 {
        return lo;
    }
    let (mut xlo, mut xhi) = (lo.ln(), hi.ln());
    let mut side = 0i8;
    for _ in 0..200 {
        if xhi - xlo <= LUX_RTOL * 0.5 {
            break;
        }
        let width = xhi - xlo;
        let mut x = if glo.is_finite() { xhi - ghi * (xhi - xlo) / (ghi - glo) } else { 0.5 * (xlo + xhi) };
        if !(x > xlo && x < xhi) {
            x = 0.5 * (xlo + xhi);
        }
        let gx = excess(x.exp());
        if gx == 0.0 {
            return x.exp();
        }
        if gx > 0.0 {
            xlo = x;
            glo = gx;
            if side == -1 {
                ghi *= 0.5;
            }
            side = -1;
        } else {
            xhi = x;
            ghi = gx;
            if side == 1 {
                glo *= 0.5;
            }
            side = 1;
        }
        if xhi - xlo > 0.5 * width {
            // slow progress: take a bisection step as well
            let xm = 0.5 * (xlo + xhi);
            let gm = excess(xm.exp());
            if gm > 0.0 {
                xlo = xm;
                glo = gm;
            } else {
                xhi = xm;
                ghi = gm;
            }
            side = 0;
        }
    }
    xhi.exp()
}

/// Luxemburg norm that reuses a scratch buffer for the sample values.
pub(crate) fn luxemburg_iter(values: impl Iterator<Item = f64>, scratch: &mut Vec<f64>, phi: &YoungFn) -> f64 {
    scratch.clear();
    let mut vmax: f64 = 0.0;
    for v in values {
        vmax = vmax.max(v);
        scratch.push(v);
    }
    if vmax == 0.0 {
        return 0.0;
    }
    luxemburg_unchecked(scratch, vmax, phi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluation_anchors() {
        let p2 = YoungFn::power(2.0).unwrap();
        assert_eq!(p2.eval(3.0).unwrap(), 9.0);
        assert_eq!(p2.eval(0.0).unwrap(), 0.0);
        assert!(p2.eval(-1.0).is_err());
        let pl = YoungFn::power_log(2.0, 1.0).unwrap();
        let expect = (core::f64::consts::E + 1.0).ln();
        assert!((pl.eval(1.0).unwrap() - expect).abs() < 1e-15);
        assert!((expect - 1.31326).abs() < 1e-5);
        assert_eq!(pl.eval(0.0).unwrap(), 0.0);
    }

    #[test]
    fn power_associates() {
        let a = YoungFn::power(2.0).unwrap().associate().unwrap();
        assert!((a.value(2.0) - 1.0).abs() < 1e-15);
        assert_eq!(a.value(0.0), 0.0);
        assert!(YoungFn::power(1.0).unwrap().associate().is_err());
        // a t^3 against brute force
        let f = YoungFn::power_scaled(3.0, 0.7).unwrap();
        let g = f.associate().unwrap();
        for &t in &[0.3, 1.0, 5.0] {
            let brute = brute_sup(&f, t);
            assert!((g.value(t) - brute).abs() <= 1e-9 * brute.max(1e-12));
        }
    }

    /// Dense geometric scan of `s t - Φ(s)` followed by golden-section
    /// refinement around the best node.
    fn brute_sup(f: &YoungFn, t: f64) -> f64 {
        let obj = |s: f64| s * t - f.value(s);
        let n = 200_000;
        let node = |i: usize| 1e-6 * 10f64.powf(12.0 * i as f64 / n as f64);
        let mut best = 0;
        for i in 0..=n {
            if obj(node(i)) > obj(node(best)) {
                best = i;
            }
        }
        let (mut a, mut b) = (node(best.saturating_sub(1)), node((best + 1).min(n)));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let x1 = b - g * (b - a);
            let x2 = a + g * (b - a);
            if obj(x1) < obj(x2) { a = x1 } else { b = x2 }
        }
        obj(0.5 * (a + b)).max(0.0)
    }

    #[test]
    fn power_log_associate_matches_brute_force() {
        let f = YoungFn::power_log(2.0, 1.0).unwrap();
        let g = f.associate().unwrap();
        for &t in &[4.0, 0.01, 37.0, 2.5e4] {
            let brute = brute_sup(&f, t);
            let rel = (g.value(t) - brute).abs() / brute;
            assert!(rel < 1e-6, "t={t}: {} vs {brute} ({rel:e})", g.value(t));
        }
        let gr = g.growth();
        assert_eq!(gr.exponent, 2.0);
        assert_eq!(gr.log_power, -1.0);
    }

    #[test]
    fn associate_of_l_log_l_vanishes_below_one() {
        let f = YoungFn::power_log(1.0, 1.0).unwrap();
        let g = f.associate().unwrap();
        assert_eq!(g.value(0.5), 0.0);
        assert!(g.value(2.0) > 0.0);
        let brute = brute_sup(&f, 2.0);
        assert!((g.value(2.0) - brute).abs() / brute < 1e-5);
    }

    #[test]
    fn classify_examples() {
        let p = YoungFn::power(2.0).unwrap();
        assert_eq!(classify_b(&p, 2.0, 2.0).unwrap().membership, Membership::Nonmember);
        let b = classify_b(&YoungFn::power(1.5).unwrap(), 2.0, 2.0).unwrap();
        assert!(b.is_member());
        assert!((b.tail_integral.unwrap() - 2.0).abs() < 1e-14);
        let pl = YoungFn::power_log(2.0, -2.0).unwrap();
        let b = classify_b(&pl, 2.0, 2.0).unwrap();
        assert!(b.is_member());
        // ∫_0^∞ ln(e+e^u)^{-2} du by a plain midpoint rule plus the 1/U tail
        let (upper, steps) = (2000.0, 2_000_000);
        let h = upper / steps as f64;
        let mid: f64 = (0..steps)
            .map(|i| {
                let u = (i as f64 + 0.5) * h;
                (u + (1.0 - u).exp().ln_1p()).powi(-2)
            })
            .sum::<f64>()
            * h
            + 1.0 / upper;
        let v = b.tail_integral.unwrap();
        assert!((v - mid).abs() < 1e-4 * mid, "{v} vs {mid}");
        assert!(classify_b(&pl, 1.0, 2.0).is_err());
        assert!(classify_b(&pl, 2.0, 1.5).is_err());
        let borderline = YoungFn::power_log(2.0, -1.0).unwrap();
        assert!(!classify_b(&borderline, 2.0, 2.0).unwrap().is_member());
    }

    #[test]
    fn classify_tabulated_is_three_valued() {
        let pts: Vec<[f64; 2]> = (1..=20).map(|i| {
            let t = i as f64;
            [t, t * t]
        }).collect();
        let f = YoungFn::tabulated(&pts).unwrap();
        assert_eq!(classify_b(&f, 2.0, 2.0).unwrap().membership, Membership::Inconclusive);
        assert_eq!(classify_b(&f, 3.0, 3.0).unwrap().membership, Membership::Member);
        assert_eq!(classify_b(&f, 1.5, 1.5).unwrap().membership, Membership::Nonmember);
    }

    #[test]
    fn luxemburg_anchors() {
        let p2 = YoungFn::power(2.0).unwrap();
        let v = luxemburg_norm(&[1.0, 3.0], &p2).unwrap();
        assert!((v - 5f64.sqrt()).abs() < 1e-9);
        assert_eq!(luxemburg_norm(&[0.0, 0.0], &p2).unwrap(), 0.0);
        assert!(luxemburg_norm(&[], &p2).is_err());
        assert!((luxemburg_norm(&[2.5; 4], &p2).unwrap() - 2.5).abs() < 1e-15);
        // root of λ = ln(e + 1/λ)
        let llogl = YoungFn::power_log(1.0, 1.0).unwrap();
        let got = luxemburg_norm(&[1.0], &llogl).unwrap();
        let (mut lo, mut hi) = (1.0f64, 2.0f64);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if m - (core::f64::consts::E + 1.0 / m).ln() < 0.0 { lo = m } else { hi = m }
        }
        assert!((got - hi).abs() < 1e-9);
        assert!((got - 1.2578).abs() < 2e-3);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(YoungFn::power(0.5).is_err());
        assert!(YoungFn::power_log(1.0, -1.0).is_err());
        assert!(YoungFn::tabulated(&[[1.0, 1.0], [2.0, 1.5]]).is_err());
        assert!(YoungFn::tabulated(&[[1.0, 1.0], [2.0, 5.0], [3.0, 7.0]]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let f: YoungFn = serde_json::from_str(r#"{"family":"power_log","r":2.0,"delta":1.0}"#).unwrap();
        assert_eq!(f, YoungFn::power_log(2.0, 1.0).unwrap());
        let s = serde_json::to_string(&YoungFn::power(2.0).unwrap()).unwrap();
        assert_eq!(s, r#"{"family":"power","r":2.0}"#);
        assert!(serde_json::from_str::<YoungFn>(r#"{"family":"power","r":2.0,"x":1}"#).is_err());
        let t: YoungFn = serde_json::from_str(r#"{"family":"tabulated","points":[[0,0],[1,1],[2,4],[4,16]]}"#).unwrap();
        assert!((t.value(3.0) - 10.0).abs() < 1e-12);
        assert!((t.value(8.0) - 64.0).abs() < 1e-9);
    }
}

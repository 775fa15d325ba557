//! Weight constants as suprema over a cube census: matrix `A_p`, two-weight
//! `A^α_{p,q}`, the three Orlicz bump constants (definitional and through
//! reducing operators), the Fujii–Wilson `A_∞` constant, its supremum over
//! directions, and the resulting reverse Hölder exponents.
//!
//! Every constant is a maximum of a per-cube functional. The functionals
//! implement [`CubeFunctional`], so a caller can split a census between
//! threads and combine the pieces with [`Best::merge`].

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::dyadic::{block_overlap, census_cubes, Census, CensusCube, Lattice, PrefixSums, MAX_D};
use crate::error::{domain, Error, Result};
use crate::linalg::{Mat, MAX_N};
use crate::reducing::{direction_set, reducing_auto, MveeOptions};
use crate::weights::WeightField;
use crate::young::{classify_b, luxemburg_iter, Membership, YoungFn};

/// Where a reported number comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Definitional,
    Reducing,
    Estimated,
}

impl core::fmt::Display for Method {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            Method::Definitional => "definitional",
            Method::Reducing => "reducing",
            Method::Estimated => "estimated",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub phi: Option<String>,
    pub psi: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantReport {
    pub name: String,
    pub value: f64,
    /// Cube attaining the supremum.
    pub cube: String,
    pub method: Method,
    pub params: Params,
    pub census: Census,
    /// Set when `value` is only a lower bound for the constant (e.g. a
    /// supremum over sampled directions).
    pub lower_bound: bool,
    pub warnings: Vec<String>,
}

/// Running maximum with its position in the census.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Best {
    pub value: f64,
    pub index: usize,
}

impl Best {
    /// Larger value wins; ties go to the earlier cube (shallower, then
    /// lexicographic).
    pub fn merge(a: Option<Best>, b: Option<Best>) -> Option<Best> {
        match (a, b) {
            (None, x) | (x, None) => x,
            (Some(a), Some(b)) => {
                if b.value > a.value || (b.value == a.value && b.index < a.index) {
                    Some(b)
                } else {
                    Some(a)
                }
            }
        }
    }
}

/// A nonnegative quantity attached to each cube of a census.
pub trait CubeFunctional {
    fn eval(&self, cube: &CensusCube) -> Result<f64>;
}

/// Maximum of `f` over `cubes`, whose census positions start at `offset`.
pub fn scan_max<F: CubeFunctional + ?Sized>(f: &F, cubes: &[CensusCube], offset: usize) -> Result<Option<Best>> {
    let mut best = None;
    for (i, c) in cubes.iter().enumerate() {
        let v = f.eval(c)?;
        if v.is_nan() {
            return Err(domain(format!("constant is NaN on cube {}", c.id)));
        }
        best = Best::merge(best, Some(Best { value: v, index: offset + i }));
    }
    Ok(best)
}

fn conj(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

fn check_pq(p: f64, q: f64, alpha: f64, d: usize) -> Result<()> {
    if !(p >= 1.0 && q >= p && q.is_finite()) {
        return Err(domain(format!("need 1 <= p <= q < ∞, got p={p}, q={q}")));
    }
    if !(alpha >= 0.0 && alpha < d as f64) {
        return Err(domain(format!("need 0 <= α < d, got α={alpha}, d={d}")));
    }
    Ok(())
}

fn same_shape(u: &WeightField, v: &WeightField) -> Result<()> {
    if u.lattice() != v.lattice() || u.n() != v.n() {
        return Err(Error::DimensionMismatch(format!(
            "U is n={} on {:?}, V is n={} on {:?}",
            u.n(),
            u.lattice(),
            v.n(),
            v.lattice()
        )));
    }
    Ok(())
}

fn cells_of(lat: &Lattice, c: &CensusCube) -> Vec<usize> {
    c.block.cells(lat).collect()
}

/// `|Q|^{α/d + 1/q - 1/p}` for the cube's measure.
fn scaling(lat: &Lattice, c: &CensusCube, p: f64, q: f64, alpha: f64) -> f64 {
    let e = alpha / lat.d as f64 + 1.0 / q - 1.0 / p;
    if e == 0.0 {
        1.0
    } else {
        lat.block_measure(&c.block).powf(e)
    }
}

/// `(avg_y |A(x) B(y)|^s)^{1/s}` for finite `s`, `max_y` for `s = ∞`.
fn inner_power_mean(a: &Mat, bs: &[Mat], ys: &[usize], s: f64) -> f64 {
    if s.is_infinite() {
        ys.iter().map(|&y| a.mul(&bs[y]).op_norm()).fold(0.0, f64::max)
    } else {
        let sum: f64 = ys.iter().map(|&y| a.mul(&bs[y]).op_norm().powf(s)).sum();
        (sum / ys.len() as f64).powf(1.0 / s)
    }
}

/// Assembles a report from the winner of a census scan.
pub fn finish(
    name: &str,
    cubes: &[CensusCube],
    best: Option<Best>,
    method: Method,
    params: Params,
    census: Census,
    warnings: Vec<String>,
) -> Result<ConstantReport> {
    let best = best.ok_or_else(|| domain("empty cube census"))?;
    Ok(ConstantReport {
        name: name.to_string(),
        value: best.value,
        cube: cubes[best.index].id.to_string(),
        method,
        params,
        census,
        lower_bound: false,
        warnings,
    })
}

/// Per-cube functional of the matrix `A_p` constant
/// `avg_x (avg_y |W(x)^{1/p} W(y)^{-1/p}|^{p'})^{p/p'}`.
pub struct MatrixAp {
    lat: Lattice,
    p: f64,
    pos: Vec<Mat>,
    neg: Vec<Mat>,
}

impl MatrixAp {
    pub fn new(w: &WeightField, p: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(domain(format!("matrix A_p needs 1 < p < ∞, got {p}")));
        }
        Ok(MatrixAp {
            lat: *w.lattice(),
            p,
            pos: w.matrix_power(1.0 / p)?.cells().to_vec(),
            neg: w.matrix_power(-1.0 / p)?.cells().to_vec(),
        })
    }
}

impl CubeFunctional for MatrixAp {
    fn eval(&self, c: &CensusCube) -> Result<f64> {
        let cells = cells_of(&self.lat, c);
        let pp = conj(self.p);
        let sum: f64 = cells
            .iter()
            .map(|&x| inner_power_mean(&self.pos[x], &self.neg, &cells, pp).powf(self.p))
            .sum();
        Ok(sum / cells.len() as f64)
    }
}

/// `[W]_{A_p}` over the census.
pub fn matrix_ap(w: &WeightField, p: f64, census: Census) -> Result<ConstantReport> {
    let f = MatrixAp::new(w, p)?;
    let cubes = census_cubes(w.lattice(), census);
    let best = scan_max(&f, &cubes, 0)?;
    let params = Params { p, q: p, alpha: 0.0, phi: None, psi: None };
    finish("matrix_ap", &cubes, best, Method::Definitional, params, census, Vec::new())
}

/// Per-cube functional of `[U,V]_{A^α_{p,q}}`:
/// `|Q|^{α/d+1/q-1/p} (avg_x (avg_y |U(x)^{1/q} V(y)^{-1/p}|^{p'})^{q/p'})^{1/q}`,
/// and for `p = 1`
/// `|Q|^{α/d+1/q-1} max_y (avg_x |U(x)^{1/q} V(y)^{-1}|^q)^{1/q}`.
pub struct TwoWeightApq {
    lat: Lattice,
    p: f64,
    q: f64,
    alpha: f64,
    u_root: Vec<Mat>,
    v_neg: Vec<Mat>,
}

impl TwoWeightApq {
    pub fn new(u: &WeightField, v: &WeightField, p: f64, q: f64, alpha: f64) -> Result<Self> {
        same_shape(u, v)?;
        check_pq(p, q, alpha, u.lattice().d)?;
        Ok(TwoWeightApq {
            lat: *u.lattice(),
            p,
            q,
            alpha,
            u_root: u.matrix_power(1.0 / q)?.cells().to_vec(),
            v_neg: v.matrix_power(-1.0 / p)?.cells().to_vec(),
        })
    }
}

impl CubeFunctional for TwoWeightApq {
    fn eval(&self, c: &CensusCube) -> Result<f64> {
        let cells = cells_of(&self.lat, c);
        let scale = scaling(&self.lat, c, self.p, self.q, self.alpha);
        let n = cells.len() as f64;
        let body = if self.p == 1.0 {
            cells
                .iter()
                .map(|&y| {
                    let s: f64 = cells.iter().map(|&x| self.u_root[x].mul(&self.v_neg[y]).op_norm().powf(self.q)).sum();
                    (s / n).powf(1.0 / self.q)
                })
                .fold(0.0, f64::max)
        } else {
            let pp = conj(self.p);
            let s: f64 = cells
                .iter()
                .map(|&x| inner_power_mean(&self.u_root[x], &self.v_neg, &cells, pp).powf(self.q))
                .sum();
            (s / n).powf(1.0 / self.q)
        };
        Ok(scale * body)
    }
}

/// `[U,V]_{A^α_{p,q}}` over the census.
pub fn two_weight_apq(u: &WeightField, v: &WeightField, p: f64, q: f64, alpha: f64, census: Census) -> Result<ConstantReport> {
    let f = TwoWeightApq::new(u, v, p, q, alpha)?;
    let cubes = census_cubes(u.lattice(), census);
    let best = scan_max(&f, &cubes, 0)?;
    let params = Params { p, q, alpha, phi: None, psi: None };
    finish("two_weight_apq", &cubes, best, Method::Definitional, params, census, Vec::new())
}

/// Which bump constant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpVariant {
    /// One Orlicz norm on `V`, power `q` average on `U`.
    #[default]
    Maximal,
    /// Orlicz norms on both sides.
    Double,
    /// Orlicz norms on both sides with `p = q`.
    Czo,
}

/// How the one-sided bump averages its inner norm over `x`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerPower {
    /// `(avg_x ‖·‖^q)^{1/q}`; reduces to `A^α_{p,q}` when `Φ = t^{p'}`.
    #[default]
    QthPower,
    /// `(avg_x ‖·‖)^{1/q}`.
    Literal,
}

#[derive(Clone, Debug)]
pub struct BumpParams {
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    /// Bump on the `V^{-1/p}` side.
    pub phi: YoungFn,
    /// Bump on the `U^{1/q}` side (double and czo variants).
    pub psi: Option<YoungFn>,
    pub variant: BumpVariant,
    pub inner: InnerPower,
    /// Proceed with a warning when a B-class precondition fails.
    pub allow_nonmember: bool,
}

impl BumpParams {
    pub fn maximal(p: f64, q: f64, alpha: f64, phi: YoungFn) -> Self {
        BumpParams { p, q, alpha, phi, psi: None, variant: BumpVariant::Maximal, inner: InnerPower::QthPower, allow_nonmember: false }
    }

    pub fn double(p: f64, q: f64, alpha: f64, phi: YoungFn, psi: YoungFn) -> Self {
        BumpParams { p, q, alpha, phi, psi: Some(psi), variant: BumpVariant::Double, inner: InnerPower::QthPower, allow_nonmember: false }
    }

    pub fn czo(p: f64, phi: YoungFn, psi: YoungFn) -> Self {
        BumpParams { p, q: p, alpha: 0.0, phi, psi: Some(psi), variant: BumpVariant::Czo, inner: InnerPower::QthPower, allow_nonmember: false }
    }

    pub fn allow_nonmember(mut self) -> Self {
        self.allow_nonmember = true;
        self
    }

    pub fn name(&self) -> &'static str {
        match self.variant {
            BumpVariant::Maximal => "bump_maximal",
            BumpVariant::Double => "bump_double",
            BumpVariant::Czo => "bump_czo",
        }
    }

    pub fn params(&self) -> Params {
        Params {
            p: self.p,
            q: self.q,
            alpha: self.alpha,
            phi: Some(self.phi.to_string()),
            psi: self.psi.as_ref().map(|s| s.to_string()),
        }
    }

    fn psi(&self) -> Result<&YoungFn> {
        self.psi.as_ref().ok_or_else(|| domain("this bump variant needs a second Young function"))
    }

    /// Checks parameter ranges and the B-class preconditions. Returns the
    /// warnings to attach to the report.
    pub fn validate(&self, d: usize) -> Result<Vec<String>> {
        check_pq(self.p, self.q, self.alpha, d)?;
        if self.p == 1.0 {
            return Err(domain("bump constants need p > 1"));
        }
        if self.variant == BumpVariant::Czo && self.q != self.p {
            return Err(domain(format!("czo bump needs p = q, got p={}, q={}", self.p, self.q)));
        }
        let (p, q) = (self.p, self.q);
        let mut checks: Vec<(&str, &YoungFn, f64, f64)> = Vec::new();
        match self.variant {
            BumpVariant::Maximal => checks.push(("Φ̄ ∈ B_{p,q}", &self.phi, p, q)),
            BumpVariant::Double => {
                checks.push(("Φ̄ ∈ B_{p,q}", &self.phi, p, q));
                let qq = conj(q);
                checks.push(("Ψ̄ ∈ B_{q'}", self.psi()?, qq, qq));
            }
            BumpVariant::Czo => {
                checks.push(("Φ̄ ∈ B_p", &self.phi, p, p));
                let pp = conj(p);
                checks.push(("Ψ̄ ∈ B_{p'}", self.psi()?, pp, pp));
            }
        }
        let mut warnings = Vec::new();
        for (label, f, a, b) in checks {
            let class = classify_b(&f.associate()?, a, b)?;
            match class.membership {
                Membership::Member => {}
                Membership::Inconclusive => warnings.push(format!("{label} inconclusive for {f}")),
                Membership::Nonmember => {
                    if self.allow_nonmember {
                        warnings.push(format!("{label} fails for {f}; computed anyway"));
                    } else {
                        return Err(Error::YoungClass(format!("{label} fails for {f}")));
                    }
                }
            }
        }
        Ok(warnings)
    }
}

/// Per-cube functional of a bump constant from its definition: iterated
/// Luxemburg norms of `|U(x)^{1/q} V(y)^{-1/p}|_op` over the cube.
pub struct BumpDefinitional {
    lat: Lattice,
    params: BumpParams,
    u_root: Vec<Mat>,
    v_neg: Vec<Mat>,
}

impl BumpDefinitional {
    pub fn new(u: &WeightField, v: &WeightField, params: &BumpParams) -> Result<(Self, Vec<String>)> {
        same_shape(u, v)?;
        let warnings = params.validate(u.lattice().d)?;
        let f = BumpDefinitional {
            lat: *u.lattice(),
            params: params.clone(),
            u_root: u.matrix_power(1.0 / params.q)?.cells().to_vec(),
            v_neg: v.matrix_power(-1.0 / params.p)?.cells().to_vec(),
        };
        Ok((f, warnings))
    }
}

impl CubeFunctional for BumpDefinitional {
    fn eval(&self, c: &CensusCube) -> Result<f64> {
        let pr = &self.params;
        let cells = cells_of(&self.lat, c);
        let mut row = Vec::with_capacity(cells.len());
        let mut scratch = Vec::with_capacity(cells.len());
        let inner: Vec<f64> = cells
            .iter()
            .map(|&x| {
                let a = &self.u_root[x];
                luxemburg_iter(cells.iter().map(|&y| a.mul(&self.v_neg[y]).op_norm()), &mut row, &pr.phi)
            })
            .collect();
        let n = cells.len() as f64;
        let body = match (pr.variant, pr.inner) {
            (BumpVariant::Maximal, InnerPower::QthPower) => {
                (inner.iter().map(|v| v.powf(pr.q)).sum::<f64>() / n).powf(1.0 / pr.q)
            }
            (BumpVariant::Maximal, InnerPower::Literal) => (inner.iter().sum::<f64>() / n).powf(1.0 / pr.q),
            _ => luxemburg_iter(inner.iter().copied(), &mut scratch, pr.psi()?),
        };
        Ok(scaling(&self.lat, c, pr.p, pr.q, pr.alpha) * body)
    }
}

/// A bump constant from its definition.
pub fn bump_constant(u: &WeightField, v: &WeightField, params: &BumpParams, census: Census) -> Result<ConstantReport> {
    let (f, warnings) = BumpDefinitional::new(u, v, params)?;
    let cubes = census_cubes(u.lattice(), census);
    let best = scan_max(&f, &cubes, 0)?;
    let mut r = finish(params.name(), &cubes, best, Method::Definitional, params.params(), census, warnings)?;
    if params.variant == BumpVariant::Maximal && params.inner == InnerPower::Literal {
        r.warnings.push("inner norm averaged to the first power".into());
    }
    Ok(r)
}

/// Per-cube functional `|Q|^{α/d+1/q-1/p} |R_U R_V|_op` with `R_U` a
/// reducing operator of `U^{1/q}` (power `q` for the maximal variant, `Ψ`
/// otherwise) and `R_V` one of `V^{-1/p}` with `Φ`.
pub struct BumpReducing {
    lat: Lattice,
    params: BumpParams,
    u_young: YoungFn,
    u_root: Vec<Mat>,
    v_neg: Vec<Mat>,
    mvee: MveeOptions,
}

impl BumpReducing {
    pub fn new(u: &WeightField, v: &WeightField, params: &BumpParams, mvee: &MveeOptions) -> Result<(Self, Vec<String>)> {
        same_shape(u, v)?;
        let warnings = params.validate(u.lattice().d)?;
        let u_young = match params.variant {
            BumpVariant::Maximal => YoungFn::power(params.q)?,
            _ => params.psi()?.clone(),
        };
        let f = BumpReducing {
            lat: *u.lattice(),
            params: params.clone(),
            u_young,
            u_root: u.matrix_power(1.0 / params.q)?.cells().to_vec(),
            v_neg: v.matrix_power(-1.0 / params.p)?.cells().to_vec(),
            mvee: *mvee,
        };
        Ok((f, warnings))
    }
}

impl CubeFunctional for BumpReducing {
    fn eval(&self, c: &CensusCube) -> Result<f64> {
        let pr = &self.params;
        let cells = cells_of(&self.lat, c);
        let us: Vec<Mat> = cells.iter().map(|&x| self.u_root[x]).collect();
        let vs: Vec<Mat> = cells.iter().map(|&x| self.v_neg[x]).collect();
        let ru = reducing_auto(&us, &self.u_young, &self.mvee)?;
        let rv = reducing_auto(&vs, &pr.phi, &self.mvee)?;
        Ok(scaling(&self.lat, c, pr.p, pr.q, pr.alpha) * ru.matrix.mul(&rv.matrix).op_norm())
    }
}

/// A bump constant through reducing operators.
pub fn bump_constant_reducing(
    u: &WeightField,
    v: &WeightField,
    params: &BumpParams,
    census: Census,
    mvee: &MveeOptions,
) -> Result<ConstantReport> {
    let (f, warnings) = BumpReducing::new(u, v, params, mvee)?;
    let cubes = census_cubes(u.lattice(), census);
    let best = scan_max(&f, &cubes, 0)?;
    finish(params.name(), &cubes, best, Method::Reducing, params.params(), census, warnings)
}

/// Per-cube functional `(1/w(Q)) ∫_Q M(w χ_Q)`, with `M` the maximal
/// function over the cubes of the same census.
pub struct FujiiWilson {
    lat: Lattice,
    sums: PrefixSums,
    cubes: Vec<CensusCube>,
}

impl FujiiWilson {
    pub fn new(lat: &Lattice, w: &[f64], census: Census) -> Result<Self> {
        if w.len() != lat.num_cells() {
            return Err(Error::DimensionMismatch(format!("{} weights for {} cells", w.len(), lat.num_cells())));
        }
        if let Some(i) = w.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(domain(format!("scalar weight must be positive and finite, cell {i} holds {}", w[i])));
        }
        Ok(FujiiWilson { lat: *lat, sums: PrefixSums::new(lat, w), cubes: census_cubes(lat, census) })
    }

    pub fn cubes(&self) -> &[CensusCube] {
        &self.cubes
    }
}

impl CubeFunctional for FujiiWilson {
    fn eval(&self, c: &CensusCube) -> Result<f64> {
        let q = &c.block;
        let d = self.lat.d;
        let total = self.sums.sum(q);
        let mut m = vec![0.0f64; q.len()];
        let local = |j: &[usize; MAX_D]| (0..d).fold(0, |acc, i| acc * q.side + (j[i] - q.start[i]));
        for r in &self.cubes {
            let b = &r.block;
            // cubes strictly containing Q average to less than Q itself
            if b.side > q.side && b.contains_block(q) {
                continue;
            }
            let Some((lo, hi)) = block_overlap(q, b) else { continue };
            let mass = self.sums.sum_box(&lo, &hi);
            let val = mass / b.len() as f64;
            let mut j = lo;
            loop {
                let k = local(&j);
                if val > m[k] {
                    m[k] = val;
                }
                if !advance(&mut j, &lo, &hi, d) {
                    break;
                }
            }
        }
        Ok(m.iter().sum::<f64>() / total)
    }
}

fn advance(j: &mut [usize; MAX_D], lo: &[usize; MAX_D], hi: &[usize; MAX_D], d: usize) -> bool {
    for i in (0..d).rev() {
        j[i] += 1;
        if j[i] < hi[i] {
            return true;
        }
        j[i] = lo[i];
    }
    false
}

/// `[w]_{A_∞}` in the Fujii–Wilson form for a scalar cell function.
pub fn fujii_wilson_ainfty(lat: &Lattice, w: &[f64], census: Census) -> Result<ConstantReport> {
    let f = FujiiWilson::new(lat, w, census)?;
    let best = scan_max(&f, f.cubes(), 0)?;
    let params = Params { p: f64::INFINITY, q: f64::INFINITY, alpha: 0.0, phi: None, psi: None };
    finish("fujii_wilson_ainfty", f.cubes(), best, Method::Definitional, params, census, Vec::new())
}

/// `sup_e [|W^{1/p} e|^p]_{A_∞}` over the given unit directions, refined
/// by golden-section search in angle when `n = 2`. A lower bound.
pub fn scalar_ainfty_sup_over(w: &WeightField, p: f64, dirs: &[[f64; MAX_N]], census: Census) -> Result<ConstantReport> {
    if !(p > 1.0) {
        return Err(domain(format!("scalar A_∞ needs p > 1, got {p}")));
    }
    let n = w.n();
    let root = w.matrix_power(1.0 / p)?;
    let lat = *w.lattice();
    let probe = |e: &[f64]| -> Result<(f64, usize)> {
        let we: Vec<f64> = root.cells().iter().map(|m| m.apply_norm(e).powf(p)).collect();
        let f = FujiiWilson::new(&lat, &we, census)?;
        let best = scan_max(&f, f.cubes(), 0)?.ok_or_else(|| domain("empty census"))?;
        Ok((best.value, best.index))
    };
    let cubes = census_cubes(&lat, census);
    let mut best = (f64::NEG_INFINITY, 0usize, [0.0; MAX_N]);
    for e in dirs {
        let (v, i) = probe(&e[..n])?;
        if v > best.0 {
            best = (v, i, *e);
        }
    }
    if n == 2 && dirs.len() > 1 {
        let theta = best.2[1].atan2(best.2[0]);
        let h = core::f64::consts::PI / dirs.len() as f64;
        let eval = |t: f64| probe(&[t.cos(), t.sin()]);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (theta - h, theta + h);
        let mut x1 = b - g * (b - a);
        let mut x2 = a + g * (b - a);
        let mut f1 = eval(x1)?;
        let mut f2 = eval(x2)?;
        for _ in 0..30 {
            if f1.0 >= f2.0 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = eval(x1)?;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = eval(x2)?;
            }
        }
        for (t, f) in [(x1, f1), (x2, f2)] {
            if f.0 > best.0 {
                best = (f.0, f.1, [t.cos(), t.sin(), 0.0, 0.0]);
            }
        }
    }
    let params = Params { p, q: p, alpha: 0.0, phi: None, psi: None };
    let mut r = finish("scalar_ainfty_sup", &cubes, Some(Best { value: best.0, index: best.1 }), Method::Definitional, params, census, Vec::new())?;
    r.lower_bound = true;
    Ok(r)
}

/// [`scalar_ainfty_sup_over`] with the default direction set.
pub fn scalar_ainfty_sup(w: &WeightField, p: f64, n_dirs: usize, census: Census) -> Result<ConstantReport> {
    let n = w.n();
    let count = if n_dirs == 0 { crate::reducing::default_directions(n) } else { n_dirs };
    let dirs = direction_set(n, count, MveeOptions::default().seed);
    scalar_ainfty_sup_over(w, p, &dirs, census)
}

/// Reverse Hölder exponents of a matrix weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhExponents {
    /// `1 + 1/(2^{d+11} [W]_{A^{sca}_{p,∞}})`
    pub s: f64,
    /// `1 + 1/(2^{d+11} [W^{-p'/p}]_{A^{sca}_{p',∞}})`
    pub r: f64,
    pub ainfty: f64,
    pub ainfty_dual: f64,
}

pub fn rh_exponents(w: &WeightField, p: f64, n_dirs: usize, census: Census) -> Result<RhExponents> {
    let d = w.lattice().d as i32;
    let pp = conj(p);
    let a = scalar_ainfty_sup(w, p, n_dirs, census)?.value;
    let dual = w.matrix_power(-pp / p)?;
    let b = scalar_ainfty_sup(&dual, pp, n_dirs, census)?.value;
    let denom = 2f64.powi(d + 11);
    Ok(RhExponents { s: 1.0 + 1.0 / (denom * a), r: 1.0 + 1.0 / (denom * b), ainfty: a, ainfty_dual: b })
}

/// Boxed functional, for callers that pick the constant at run time.
pub type DynFunctional = Box<dyn CubeFunctional + Send + Sync>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rotation_from_angles;

    fn halves(a: f64, b: f64) -> WeightField {
        WeightField::from_scalars(Lattice::new(1, 1).unwrap(), &[a, b]).unwrap()
    }

    #[test]
    fn ap_anchor_on_halves() {
        let w = halves(1.0, 4.0);
        let r = matrix_ap(&w, 2.0, Census::Dyadic).unwrap();
        assert!((r.value - 1.5625).abs() < 1e-14);
        assert!(r.cube.contains("k=0"));
        let id = WeightField::identity(Lattice::new(2, 3).unwrap(), 2);
        assert!((matrix_ap(&id, 3.0, Census::Dyadic).unwrap().value - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ap_rotation_invariant_and_matches_apq() {
        let lat = Lattice::new(1, 4).unwrap();
        let w = crate::weights::gen_random_field(lat, 2, 3, 8.0, 0.7).unwrap();
        let rot = rotation_from_angles(2, &[0.4]);
        let a = matrix_ap(&w, 2.0, Census::Dyadic).unwrap().value;
        let b = matrix_ap(&w.conjugate(&rot), 2.0, Census::Dyadic).unwrap().value;
        assert!((a - b).abs() <= 1e-10 * a);
        let c = two_weight_apq(&w, &w, 2.0, 2.0, 0.0, Census::Dyadic).unwrap().value;
        assert!((c - a.sqrt()).abs() <= 1e-10 * c);
    }

    #[test]
    fn maximal_bump_with_power_reduces_to_apq() {
        let lat = Lattice::new(1, 4).unwrap();
        let u = crate::weights::gen_random_field(lat, 2, 5, 4.0, 0.5).unwrap();
        let v = crate::weights::gen_random_field(lat, 2, 6, 4.0, 0.5).unwrap();
        let (p, q, alpha) = (2.0, 3.0, 1.0 / 6.0);
        let apq = two_weight_apq(&u, &v, p, q, alpha, Census::Dyadic).unwrap().value;
        let params = BumpParams::maximal(p, q, alpha, YoungFn::power(2.0).unwrap());
        assert!(matches!(bump_constant(&u, &v, &params, Census::Dyadic), Err(Error::YoungClass(_))));
        let r = bump_constant(&u, &v, &params.allow_nonmember(), Census::Dyadic).unwrap();
        assert!((r.value - apq).abs() <= 1e-9 * apq, "{} {}", r.value, apq);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn identity_bumps_are_one() {
        let lat = Lattice::new(1, 3).unwrap();
        let id = WeightField::identity(lat, 2);
        let phi = YoungFn::power_log(2.0, 2.0).unwrap().normalized().unwrap();
        let psi = YoungFn::power_log(2.0, 2.0).unwrap().normalized().unwrap();
        for params in [BumpParams::double(2.0, 2.0, 0.0, phi.clone(), psi.clone()), BumpParams::czo(2.0, phi.clone(), psi.clone())] {
            let r = bump_constant(&id, &id, &params, Census::Dyadic).unwrap();
            assert!((r.value - 1.0).abs() < 1e-9, "{r:?}");
            let r = bump_constant_reducing(&id, &id, &params, Census::Dyadic, &MveeOptions::default()).unwrap();
            assert!((r.value - 1.0).abs() < 1e-6, "{r:?}");
        }
    }

    #[test]
    fn fujii_wilson_halves() {
        let lat = Lattice::new(1, 1).unwrap();
        let r = fujii_wilson_ainfty(&lat, &[1.0, 4.0], Census::Dyadic).unwrap();
        // root: M = (2.5, 4) on the halves, w(Q) = 2.5
        assert!((r.value - 1.3).abs() < 1e-14);
        let lat = Lattice::new(2, 3).unwrap();
        let ones = vec![1.0; lat.num_cells()];
        for census in [Census::Dyadic, Census::Shifted, Census::Brute] {
            assert!((fujii_wilson_ainfty(&lat, &ones, census).unwrap().value - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rh_identity() {
        let id = WeightField::identity(Lattice::new(1, 3).unwrap(), 2);
        let rh = rh_exponents(&id, 2.0, 16, Census::Dyadic).unwrap();
        assert!((rh.s - (1.0 + 2f64.powi(-12))).abs() < 1e-15);
        assert_eq!(rh.s, rh.r);
    }
}

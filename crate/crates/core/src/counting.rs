//! Exact window counts, line by line.
//!
//! For a fixed cell `(u, e1, e2, e3)` and a line `0 < -a < b`,
//! `gcd(a, b) = 1` with `e1 | -a`, `e2 | b`, `e3 | a+b`, the admissible
//! parameters `v` form the intersection of
//!
//! - an integer interval: `v >= eps^-1 B^(1/3) u b` (exact cube
//!   comparison) and `(ub+v)^2 (-ua+v) <= B |a| b (a+b) / e` (monotone
//!   cubic, resolved by exact binary search), with
//! - a translated lattice `v = u(q-p)ab + (|a|b(a+b)/e) n`, `pa + qb = 1`,
//!   restricted to `gcd(n, ue) = 1` (Mobius over the squarefree divisors
//!   of `ue`), provided `gcd(u, |a|b(a+b)/e) = 1`; lines failing that
//!   coprimality carry no admissible `v` at all.
//!
//! The total over a zoom window splits at `b <= bmax ~ 2 D B^(1/6)`:
//! larger denominators are reached through the Cremona involution, which
//! maps them to region-S lines with denominator at most `~ E B^(1/6)`. The
//! involution preserves the window and the height exactly, so the tail is
//! enumerated on the S side, mapped back, filtered by `n(V) > bmax`, and
//! every kept point is re-verified against the raw definition in big
//! integers. A guard errors out loudly if any kept point lands within 10%
//! of the tail cap.

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rayon::prelude::*;

use crate::arith::{ext_gcd, gcd_i128, gcd_i64, phi_ratio, squarefree_divisors};
use crate::lines::intrinsic_params;
use crate::surface::{height_x3, in_zoom_window, region, ProjPoint, RegionTag};
use crate::{Error, Rat, Result};

/// One per-line counting problem.
#[derive(Debug, Clone)]
pub struct LineCountQuery {
    pub a: i64,
    pub b: i64,
    pub u: i64,
    pub e1: i64,
    pub e2: i64,
    pub e3: i64,
    /// Height bound B.
    pub height_bound: u64,
    /// Window radius, exact.
    pub eps: Rat,
    /// Optional slope restriction `mu = -a/b > tau`.
    pub slope_floor: Option<Rat>,
}

impl LineCountQuery {
    pub fn e(&self) -> i64 {
        self.e1 * self.e2 * self.e3
    }

    fn validate(&self) -> Result<()> {
        if self.a >= 0 || -self.a >= self.b {
            return Err(Error::InvalidQuadruple("need 0 < -a < b"));
        }
        if gcd_i64(self.a, self.b) != 1 {
            return Err(Error::InvalidQuadruple("need gcd(a, b) = 1"));
        }
        if self.u < 1 || self.e1 < 1 || self.e2 < 1 || self.e3 < 1 {
            return Err(Error::InvalidQuadruple("need u, e_i >= 1"));
        }
        if gcd_i64(self.e1, self.e2) != 1
            || gcd_i64(self.e1, self.e3) != 1
            || gcd_i64(self.e2, self.e3) != 1
        {
            return Err(Error::InvalidQuadruple("e_i must be pairwise coprime"));
        }
        if (-self.a) % self.e1 != 0 {
            return Err(Error::DivisibilityViolated("e1 must divide -a"));
        }
        if self.b % self.e2 != 0 {
            return Err(Error::DivisibilityViolated("e2 must divide b"));
        }
        if (self.a + self.b) % self.e3 != 0 {
            return Err(Error::DivisibilityViolated("e3 must divide a + b"));
        }
        if self.height_bound == 0 {
            return Err(Error::NumericGuard("height bound must be >= 1".into()));
        }
        rat_pos(self.eps)?;
        Ok(())
    }

    fn passes_slope_floor(&self) -> bool {
        match self.slope_floor {
            None => true,
            // -a/b > tau  <=>  (-a) tau_den > tau_num b
            Some(tau) => {
                (-self.a) as i128 * *tau.denom() as i128 > *tau.numer() as i128 * self.b as i128
            }
        }
    }
}

fn rat_pos(r: Rat) -> Result<(i128, i128)> {
    // Ratio normalizes the denominator positive.
    if *r.numer() <= 0 {
        return Err(Error::NumericGuard("rational parameter must be positive".into()));
    }
    Ok((*r.numer() as i128, *r.denom() as i128))
}

fn checked3(a: i128, b: i128, c: i128) -> Option<i128> {
    a.checked_mul(b)?.checked_mul(c)
}

/// Floor cube root of a nonnegative i128.
fn icbrt(n: i128) -> i128 {
    debug_assert!(n >= 0);
    let mut r = (n as f64).cbrt() as i128;
    while r > 0 && checked3(r, r, r).map_or(true, |c| c > n) {
        r -= 1;
    }
    while checked3(r + 1, r + 1, r + 1).map_or(false, |c| c <= n) {
        r += 1;
    }
    r
}

/// `(ub + v)^2 (u|a| + v)`, or None on overflow (treated as "too big").
fn line_cubic(ub: i128, ua_abs: i128, v: i128) -> Option<i128> {
    checked3(ub + v, ub + v, ua_abs + v)
}

/// Interval `[v_min, v_max]` of the height-and-window condition on a line,
/// or `None` when empty. The upper endpoint replaces the paper-style
/// implicit constant by an exact binary search on the monotone cubic.
pub fn interval_for_line(q: &LineCountQuery) -> Result<Option<(i128, i128)>> {
    q.validate()?;
    if !q.passes_slope_floor() {
        return Ok(None);
    }
    interval_unchecked(
        q.a as i128,
        q.b as i128,
        q.u as i128,
        q.e() as i128,
        q.height_bound,
        q.eps,
    )
}

fn interval_unchecked(
    a: i128,
    b: i128,
    u: i128,
    e: i128,
    height_bound: u64,
    eps: Rat,
) -> Result<Option<(i128, i128)>> {
    let v_min = v_min_for(b, u, height_bound, eps)?;
    let v_max = v_max_for(a, b, u, e, height_bound)?;
    Ok(if v_max < v_min { None } else { Some((v_min, v_max)) })
}

/// Least `v >= 1` with `v^3 ep^3 >= B u^3 b^3 eq^3` (float guess, exact
/// fixup). Depends on the line only through `b`.
fn v_min_for(b: i128, u: i128, height_bound: u64, eps: Rat) -> Result<i128> {
    let (ep, eq) = rat_pos(eps)?;
    let t = checked3(height_bound as i128, u * u * u, b * b * b)
        .and_then(|x| x.checked_mul(eq * eq * eq))
        .ok_or_else(|| Error::NumericGuard("v_min threshold overflows".into()))?;
    let p3 = ep * ep * ep;
    let ge = |v: i128| checked3(v, v, v).map_or(true, |c| c.checked_mul(p3).map_or(true, |x| x >= t));
    let mut v = (((t as f64) / (p3 as f64)).cbrt() as i128 - 2).max(1);
    while !ge(v) {
        v += 1;
    }
    while v > 1 && ge(v - 1) {
        v -= 1;
    }
    Ok(v)
}

/// Greatest `v >= 0` with `(ub+v)^2 (u|a|+v) <= B |a| b (a+b) / e`, by a
/// float Newton start on the monotone cubic and an exact fixup.
fn v_max_for(a: i128, b: i128, u: i128, e: i128, height_bound: u64) -> Result<i128> {
    let abs_a = -a;
    let prod = checked3(abs_a, b, a + b)
        .ok_or_else(|| Error::NumericGuard("line modulus overflows".into()))?;
    debug_assert_eq!(prod % e, 0);
    let rhs = (height_bound as i128)
        .checked_mul(prod / e)
        .ok_or_else(|| Error::NumericGuard("height bound overflows".into()))?;
    let (ub, ua) = (u * b, u * abs_a);
    let (c1, c2, r) = (ub as f64, ua as f64, rhs as f64);
    let mut g = r.cbrt();
    for _ in 0..3 {
        let (f1, f2) = (c1 + g, c2 + g);
        let fv = f1 * f1 * f2 - r;
        let fp = f1 * (2.0 * f2 + f1);
        if fp > 0.0 {
            g -= fv / fp;
        }
    }
    let mut v = (g as i128).max(0);
    let mut fuel = 1024;
    while v > 0 && line_cubic(ub, ua, v).map_or(true, |c| c > rhs) {
        v -= 1;
        fuel -= 1;
        if fuel == 0 {
            return Err(Error::NumericGuard("v_max fixup diverged".into()));
        }
    }
    while line_cubic(ub, ua, v + 1).map_or(false, |c| c <= rhs) {
        v += 1;
        fuel -= 1;
        if fuel == 0 {
            return Err(Error::NumericGuard("v_max fixup diverged".into()));
        }
    }
    Ok(v)
}

/// The translated lattice of condition (b): offset and modulus of the
/// admissible `v`, plus the coprimality condition on the lattice index.
///
/// The admissible values are `v = offset + modulus * k` with
/// `gcd(k + index_shift, coprime_to) = 1`: the gcd applies to the index
/// relative to the Bezout base point `u (q - p) a b`, not to `k` itself.
/// Changing the Bezout witness moves that index by a multiple of `u e`,
/// so the condition is well defined.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeSpec {
    /// `u (q - p) a b mod modulus`, in `[0, modulus)`
    pub offset: i128,
    /// `|a| b (a+b) / e`
    pub modulus: i128,
    /// lattice indices must be coprime to this (`u e`)
    pub coprime_to: i64,
    /// added to `k` before the coprimality test
    pub index_shift: i128,
}

/// Builds the lattice for a line, or `None` when `gcd(u, |a|b(a+b)/e) > 1`
/// (then no `v` satisfies the gcd pattern and the line counts zero).
pub fn residue_lattice(a: i64, b: i64, u: i64, e: (i64, i64, i64)) -> Result<Option<LatticeSpec>> {
    let q = LineCountQuery {
        a,
        b,
        u,
        e1: e.0,
        e2: e.1,
        e3: e.2,
        height_bound: 1,
        eps: Rat::new(1, 1),
        slope_floor: None,
    };
    q.validate()?;
    Ok(lattice_unchecked(a, b, u, e.0 * e.1 * e.2))
}

fn lattice_unchecked(a: i64, b: i64, u: i64, e: i64) -> Option<LatticeSpec> {
    let prod = checked3(-(a as i128), b as i128, (a + b) as i128).expect("validated small");
    let m = prod / (e as i128);
    if gcd_i128(u as i128, m) != 1 {
        return None;
    }
    let (_, p, q) = ext_gcd(a, b).expect("a, b nonzero");
    let v0 = (u as i128) * (q as i128 - p as i128) * (a as i128) * (b as i128);
    Some(LatticeSpec {
        offset: v0.rem_euclid(m),
        modulus: m,
        coprime_to: u * e,
        index_shift: -v0.div_euclid(m),
    })
}

/// Exact count of lattice points in a closed interval whose index is
/// coprime to `coprime_to`, by Mobius inclusion-exclusion over squarefree
/// divisors.
pub fn count_lattice_in_interval(interval: (i128, i128), lat: &LatticeSpec) -> u64 {
    let divisors = squarefree_divisors(lat.coprime_to as u64).expect("positive");
    count_lattice_divs(interval, lat, &divisors)
}

fn count_lattice_divs(
    (lo, hi): (i128, i128),
    lat: &LatticeSpec,
    divisors: &[(u64, i32)],
) -> u64 {
    if hi < lo {
        return 0;
    }
    let k_lo = ceil_div(lo - lat.offset, lat.modulus);
    let k_hi = floor_div(hi - lat.offset, lat.modulus);
    if k_hi < k_lo {
        return 0;
    }
    // count indices n = k + shift coprime to coprime_to
    let n_lo = k_lo + lat.index_shift;
    let n_hi = k_hi + lat.index_shift;
    let mut total: i128 = 0;
    for &(d, mu) in divisors {
        let d = d as i128;
        let cnt = floor_div(n_hi, d) - floor_div(n_lo - 1, d);
        total += mu as i128 * cnt;
    }
    debug_assert!(total >= 0);
    total as u64
}

fn floor_div(a: i128, b: i128) -> i128 {
    a.div_euclid(b)
}

fn ceil_div(a: i128, b: i128) -> i128 {
    a.div_euclid(b) + i128::from(a.rem_euclid(b) != 0)
}

/// Number of admissible `v` on one line: slope filter, coprimality
/// condition, interval, lattice.
pub fn line_count(q: &LineCountQuery) -> Result<u64> {
    q.validate()?;
    if !q.passes_slope_floor() {
        return Ok(0);
    }
    let Some(lat) = lattice_unchecked(q.a, q.b, q.u, q.e()) else {
        return Ok(0);
    };
    let Some(interval) = interval_unchecked(
        q.a as i128,
        q.b as i128,
        q.u as i128,
        q.e() as i128,
        q.height_bound,
        q.eps,
    )?
    else {
        return Ok(0);
    };
    Ok(count_lattice_in_interval(interval, &lat))
}

/// Independent brute force: loops `v` and tests the defining conditions
/// literally with gcds. Guarded to 10^7 candidate values.
pub fn line_count_oracle(q: &LineCountQuery) -> Result<u64> {
    q.validate()?;
    if !q.passes_slope_floor() {
        return Ok(0);
    }
    let (a, b, u) = (q.a as i128, q.b as i128, q.u as i128);
    let abs_a = -a;
    let e = q.e() as i128;
    let prod = checked3(abs_a, b, a + b)
        .ok_or_else(|| Error::NumericGuard("line modulus overflows".into()))?;
    let rhs = (q.height_bound as i128)
        .checked_mul(prod / e)
        .ok_or_else(|| Error::NumericGuard("height bound overflows".into()))?;
    let v_hi = icbrt(rhs) + 1;
    if v_hi > 10_000_000 {
        return Err(Error::OracleGuard(v_hi as u64));
    }
    let (ep, eq) = rat_pos(q.eps)?;
    let (d1, d2, d3) = (
        abs_a / q.e1 as i128,
        b / q.e2 as i128,
        (a + b) / q.e3 as i128,
    );
    let mut count = 0;
    for v in 1..=v_hi {
        // condition (a): height and window, literally
        if line_cubic(u * b, u * abs_a, v).map_or(true, |c| c > rhs) {
            continue;
        }
        let window = checked3(v, v, v)
            .and_then(|c| c.checked_mul(ep * ep * ep))
            .map_or(false, |lhs| {
                checked3(q.height_bound as i128, u * u * u, b * b * b)
                    .and_then(|t| t.checked_mul(eq * eq * eq))
                    .map_or(false, |rhs| lhs >= rhs)
            });
        if !window {
            continue;
        }
        // condition (b): the four gcd equations, literally
        if gcd_i128(a, v) != d1
            || gcd_i128(b, v) != d2
            || gcd_i128(-u * a + v, a + b) != d3
            || gcd_i128(u, v) != 1
        {
            continue;
        }
        count += 1;
    }
    Ok(count)
}

/// The classical per-line main term
/// `B^(1/3) phi(eu) (e^(2/3) (|a| b (a+b))^(-2/3) - e u eps^-1 (|a|(a+b))^-1)`
/// with `phi` the prime product `prod_{p | eu} (1 - 1/p)`.
///
/// May be negative near the slope-window edge; callers clamp at zero for
/// reporting.
pub fn main_term_for_line(q: &LineCountQuery) -> Result<f64> {
    q.validate()?;
    let e = q.e() as f64;
    let u = q.u as f64;
    let abs_a = (-q.a) as f64;
    let b = q.b as f64;
    let apb = (q.a + q.b) as f64;
    let phi = rat_f64(phi_ratio((q.e() * q.u) as u64)?);
    let eps = rat_f64(q.eps);
    let b13 = (q.height_bound as f64).cbrt();
    Ok(b13 * phi * (e.powf(2.0 / 3.0) * (abs_a * b * apb).powf(-2.0 / 3.0) - e * u / (eps * abs_a * apb)))
}

pub(crate) fn rat_f64(r: Rat) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Index of `{(a,b,c) : a+b+c = 0, alpha_i | each}` inside the full rank-2
/// lattice `a+b+c = 0`: the product `alpha1 alpha2 alpha3` for pairwise
/// coprime moduli.
pub fn lattice_index(a1: u64, a2: u64, a3: u64) -> Result<u64> {
    if a1 == 0 || a2 == 0 || a3 == 0 {
        return Err(Error::NotPairwiseCoprime);
    }
    if crate::arith::gcd_u64(a1, a2) != 1
        || crate::arith::gcd_u64(a1, a3) != 1
        || crate::arith::gcd_u64(a2, a3) != 1
    {
        return Err(Error::NotPairwiseCoprime);
    }
    Ok(a1 * a2 * a3)
}

/// A participating `(u, e1, e2, e3)` class at window radius eps.
#[derive(Debug, Clone)]
pub struct CellBound {
    pub u: i64,
    pub e1: i64,
    pub e2: i64,
    pub e3: i64,
    /// product e1 e2 e3
    pub e: i64,
    /// half-width of the slope window, `C0 = sqrt(1 - 4 e u^3 / eps^3) / 2`
    pub c0: f64,
    /// exact slope threshold `u^3 e / eps^3`
    pub lambda_bound: Rat,
}

/// All cells with `4 e u^3 < eps^3` (strict; window points force a strict
/// inequality), each pairwise coprime ordered triple listed separately.
/// Empty exactly when `eps <= 4^(1/3)`.
pub fn enumerate_cells(eps: Rat) -> Result<Vec<CellBound>> {
    let (p, q) = rat_pos(eps)?;
    if p > 20_000 || q > 20_000 {
        return Err(Error::NumericGuard(
            "window radius numerator/denominator out of supported range".into(),
        ));
    }
    let (p3, q3) = (p * p * p, q * q * q);
    let mut cells = Vec::new();
    let mut u = 1i128;
    while 4 * u * u * u * q3 < p3 {
        let mut e = 1i128;
        while 4 * e * u * u * u * q3 < p3 {
            for (e1, e2, e3) in coprime_triples(e as i64) {
                let ratio = 4.0 * (e * u * u * u) as f64 * q3 as f64 / p3 as f64;
                cells.push(CellBound {
                    u: u as i64,
                    e1,
                    e2,
                    e3,
                    e: e as i64,
                    c0: 0.5 * (1.0 - ratio).sqrt(),
                    lambda_bound: Rat::new((u * u * u * e * q3) as i64, p3 as i64),
                });
                if cells.len() > 2_000_000 {
                    return Err(Error::NumericGuard(
                        "cell enumeration too large for this radius".into(),
                    ));
                }
            }
            e += 1;
        }
        u += 1;
    }
    Ok(cells)
}

/// Ordered pairwise coprime triples with product `e`: each prime power of
/// `e` goes wholly to one slot, so there are `3^omega(e)` of them.
fn coprime_triples(e: i64) -> Vec<(i64, i64, i64)> {
    let f = crate::arith::factorize(e as u64).expect("positive");
    let mut triples = vec![(1i64, 1i64, 1i64)];
    for &(pr, ex) in &f.factors {
        let pe = pr.pow(ex) as i64;
        let mut next = Vec::with_capacity(triples.len() * 3);
        for &(a, b, c) in &triples {
            next.push((a * pe, b, c));
            next.push((a, b * pe, c));
            next.push((a, b, c * pe));
        }
        triples = next;
    }
    triples.sort_unstable();
    triples
}

/// Split and tail constants of a cell: the direct scan covers
/// `b <= ~ D B^(1/6)`; Cremona images of the rest live on region-S lines
/// with `b' <= ~ E B^(1/6)`; `G` is the matching inner bound.
#[derive(Debug, Clone, Copy)]
pub struct TailConstants {
    pub d: f64,
    pub e: f64,
    pub g: f64,
}

impl TailConstants {
    pub fn new(eps: Rat, u: i64, e: i64) -> Result<Self> {
        let (p, q) = rat_pos(eps)?;
        let (u_f, e_f) = (u as f64, e as f64);
        let eps_f = p as f64 / q as f64;
        // 1/4 - C0^2 = e u^3 / eps^3, computed directly to avoid cancellation
        let quarter_minus_c0sq = e_f * u_f.powi(3) / eps_f.powi(3);
        let lead = (4.0 * e_f).powf(-1.0 / 3.0) - u_f / eps_f;
        if lead <= 0.0 {
            return Err(Error::EmptyCell);
        }
        let d = (lead * e_f / quarter_minus_c0sq).sqrt();
        let c0 = 0.5 * (1.0 - 4.0 * quarter_minus_c0sq).sqrt();
        let e_const = e_f.powf(2.0 / 3.0) / ((0.5 - c0).powi(2) * 4f64.cbrt() * d);
        let g_const = u_f * e_f / (eps_f * (0.5 + c0).powi(2) * d);
        Ok(TailConstants {
            d,
            e: e_const,
            g: g_const,
        })
    }
}

/// Optional slope window for counts: points kept when
/// `floor < mu(V) <= ceil`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SlopeWindow {
    pub floor: Option<Rat>,
    pub ceil: Option<Rat>,
}

impl SlopeWindow {
    fn accepts(&self, m: i128, n: i128) -> bool {
        if let Some(t) = self.floor {
            if m * *t.denom() as i128 <= *t.numer() as i128 * n {
                return false;
            }
        }
        if let Some(t) = self.ceil {
            if m * *t.denom() as i128 > *t.numer() as i128 * n {
                return false;
            }
        }
        true
    }
}

/// Per-cell counts of a window run.
#[derive(Debug, Clone)]
pub struct CellCount {
    pub u: i64,
    pub e1: i64,
    pub e2: i64,
    pub e3: i64,
    pub count: u64,
    pub direct: u64,
    pub tail: u64,
}

/// Result of an exact window count.
#[derive(Debug, Clone)]
pub struct CountReport {
    pub height_bound: u64,
    pub eps: Rat,
    pub total: u64,
    pub cells: Vec<CellCount>,
}

/// A materialized window point in raw integer form.
#[derive(Debug, Clone)]
pub struct RawPoint {
    pub x: i128,
    pub y: i128,
    pub z: i128,
    pub a: i64,
    pub b: i64,
    pub u: i64,
    pub v: i128,
    pub e1: i64,
    pub e2: i64,
    pub e3: i64,
    pub height: u64,
    pub from_tail: bool,
}

/// Exact number of window points in the open region R with `H <= B`,
/// optionally restricted to a slope window.
pub fn count_region_r(height_bound: u64, eps: Rat, slope: SlopeWindow) -> Result<CountReport> {
    Ok(region_r_run(height_bound, eps, slope, false)?.0)
}

/// As [`count_region_r`], but also materializes every point, sorted by
/// coordinates.
pub fn enumerate_region_r(
    height_bound: u64,
    eps: Rat,
    slope: SlopeWindow,
) -> Result<(CountReport, Vec<RawPoint>)> {
    let (report, mut pts) = region_r_run(height_bound, eps, slope, true)?;
    pts.sort_unstable_by_key(|p| (p.z, p.y, p.x));
    debug_assert_eq!(report.total as usize, pts.len());
    Ok((report, pts))
}

fn region_r_run(
    height_bound: u64,
    eps: Rat,
    slope: SlopeWindow,
    collect: bool,
) -> Result<(CountReport, Vec<RawPoint>)> {
    if height_bound == 0 {
        return Err(Error::NumericGuard("height bound must be >= 1".into()));
    }
    if height_bound > 2_000_000_000_000_000 {
        return Err(Error::NumericGuard(
            "height bound beyond the 128-bit safe range (2e15)".into(),
        ));
    }
    let cells = enumerate_cells(eps)?;
    let b16 = (height_bound as f64).powf(1.0 / 6.0);

    // Split point per cell: every region-R point with n(V) > bmax maps to
    // a region-S line with b' < K / (bmax + 1),
    // K = e^(2/3) B^(1/3) / (4^(1/3) (1/2 - C0)^2), an exact inequality
    // valid at every B. The paper-style split bmax ~ 2 D B^(1/6) is kept
    // as a floor, but for wide windows (C0 near 1/2) the tail cap blows up
    // quadratically, so the split is raised to balance the two scans; the
    // factor-2 safety margin and the 10% guard band stay in force either
    // way.
    let mut work = 0.0f64;
    let mut plans = Vec::with_capacity(cells.len());
    for cell in &cells {
        let tc = TailConstants::new(eps, cell.u, cell.e)?;
        let k_const = (cell.e as f64).powf(2.0 / 3.0) * (height_bound as f64).cbrt()
            / (4f64.cbrt() * (0.5 - cell.c0).powi(2));
        let bmax = ((2.0 * tc.d * b16).ceil() as i64).max((2.0 * k_const).sqrt().ceil() as i64);
        let cap = (2.0 * k_const / (bmax + 1) as f64).ceil() as i64;
        let stride = (cell.e1 * cell.e3) as f64 * cell.e2 as f64;
        work += (2.0 * cell.c0 + 0.1) * ((bmax as f64).powi(2) + (cap as f64).powi(2)) / stride;
        plans.push((cell, bmax, cap));
    }
    if work > 6.0e10 {
        return Err(Error::NumericGuard(format!(
            "estimated line scan of {work:.2e} pairs exceeds the runtime guard"
        )));
    }

    let mut cell_counts = Vec::with_capacity(plans.len());
    let mut points = Vec::new();
    let mut total = 0u64;
    for (cell, bmax, cap) in plans {
        let (direct, tail, mut pts) =
            cell_run(cell, height_bound, eps, slope, bmax, cap, collect)?;
        total += direct + tail;
        points.append(&mut pts);
        cell_counts.push(CellCount {
            u: cell.u,
            e1: cell.e1,
            e2: cell.e2,
            e3: cell.e3,
            count: direct + tail,
            direct,
            tail,
        });
    }
    Ok((
        CountReport {
            height_bound,
            eps,
            total,
            cells: cell_counts,
        },
        points,
    ))
}

struct LineTask {
    a: i64,
    b: i64,
    v_min: i128,
}

/// Enumerates the admissible `(a, b)` for a cell side: `2 <= b <= b_hi`
/// with `eb | b`, `ea | |a|`, `ec | a + b`, `gcd(a, b) = 1`, and the exact
/// slope-window test `e u^3 b^2 q^3 <= |a| (b - |a|) p^3`. The lower
/// interval endpoint depends on the line only through `b` and is computed
/// once per denominator.
#[allow(clippy::too_many_arguments)]
fn admissible_lines(
    b_hi: i64,
    ea: i64,
    eb: i64,
    ec: i64,
    u: i64,
    e: i64,
    height_bound: u64,
    eps: Rat,
) -> Result<impl ParallelIterator<Item = LineTask>> {
    let (p, q) = (*eps.numer() as i128, *eps.denom() as i128);
    let p3 = p * p * p;
    let window_rhs_factor = (e as i128) * (u as i128).pow(3) * q * q * q;
    let b_lo = 2.max(eb);
    // overflow pre-flight: the v_min threshold is monotone in b
    if b_hi >= b_lo {
        v_min_for(b_hi as i128, u as i128, height_bound, eps)?;
    }
    Ok((b_lo..b_hi + 1)
        .into_par_iter()
        .filter(move |b| b % eb == 0)
        .flat_map_iter(move |b| {
            let v_min = v_min_for(b as i128, u as i128, height_bound, eps)
                .expect("pre-flighted at b_hi");
            // |a| == 0 mod ea and |a| == b mod ec, merged by CRT
            let (g, inv, _) = ext_gcd(ea % ec, ec).expect("ec >= 1");
            debug_assert_eq!(g, 1);
            let residue = ((b % ec) as i128 * inv as i128).rem_euclid(ec as i128) as i64 * ea;
            let step = ea * ec;
            let start = if residue == 0 { step } else { residue };
            let window_rhs = window_rhs_factor * (b as i128) * (b as i128);
            (start..b).step_by(step as usize).filter_map(move |abs_a| {
                if gcd_i64(abs_a, b) != 1 {
                    return None;
                }
                // exact necessary condition for a nonempty interval:
                // lambda = |a|(b-|a|)/b^2 must exceed u^3 e / eps^3 strictly
                if (abs_a as i128) * ((b - abs_a) as i128) * p3 <= window_rhs {
                    return None;
                }
                Some(LineTask {
                    a: -abs_a,
                    b,
                    v_min,
                })
            })
        }))
}

#[allow(clippy::too_many_arguments)]
fn cell_run(
    cell: &CellBound,
    height_bound: u64,
    eps: Rat,
    slope: SlopeWindow,
    bmax: i64,
    cap: i64,
    collect: bool,
) -> Result<(u64, u64, Vec<RawPoint>)> {
    let u = cell.u;
    let e = cell.e;
    let divisors: Vec<(u64, i32)> = squarefree_divisors((u * e) as u64)?;

    // Direct side: region-R lines with b <= bmax.
    let direct = admissible_lines(bmax, cell.e1, cell.e2, cell.e3, u, e, height_bound, eps)?
        .map(|line| -> Result<(u64, Vec<RawPoint>)> {
            // every point of a region-R line shares its reduced slope -a/b
            let (m, n) = ((-line.a) as i128, line.b as i128);
            if !slope.accepts(m, n) {
                return Ok((0, Vec::new()));
            }
            let Some(lat) = lattice_unchecked(line.a, line.b, u, e) else {
                return Ok((0, Vec::new()));
            };
            let v_max = v_max_for(line.a as i128, line.b as i128, u as i128, e as i128, height_bound)?;
            if v_max < line.v_min {
                return Ok((0, Vec::new()));
            }
            let interval = (line.v_min, v_max);
            if !collect {
                return Ok((count_lattice_divs(interval, &lat, &divisors), Vec::new()));
            }
            let mut pts = Vec::new();
            for v in lattice_points(interval, &lat) {
                let (ub, ua) = ((u * line.b) as i128, (u * -line.a) as i128);
                let (x, y, z) = (ub + v, ua + v, v);
                let h = line_cubic(ub, ua, v).expect("bounded by rhs") / lat.modulus;
                pts.push(RawPoint {
                    x,
                    y,
                    z,
                    a: line.a,
                    b: line.b,
                    u,
                    v,
                    e1: cell.e1,
                    e2: cell.e2,
                    e3: cell.e3,
                    height: h as u64,
                    from_tail: false,
                });
            }
            Ok((pts.len() as u64, pts))
        })
        .try_reduce(
            || (0u64, Vec::new()),
            |mut acc, item| {
                acc.0 += item.0;
                acc.1.extend(item.1);
                Ok(acc)
            },
        )?;

    // Tail side: region-S lines with b' <= cap carry the Cremona images of
    // every region-R point with n(V) > bmax; keep exactly those.
    let guard_b = (0.9 * cap as f64) as i64;
    let tail = admissible_lines(cap, cell.e3, cell.e2, cell.e1, u, e, height_bound, eps)?
        .map(|line| -> Result<(u64, Vec<RawPoint>)> {
            let Some(lat) = lattice_unchecked(line.a, line.b, u, e) else {
                return Ok((0, Vec::new()));
            };
            let v_max = v_max_for(line.a as i128, line.b as i128, u as i128, e as i128, height_bound)?;
            if v_max < line.v_min {
                return Ok((0, Vec::new()));
            }
            let interval = (line.v_min, v_max);
            let (m_p, n_p) = ((-line.a) as i128, line.b as i128);
            let mut count = 0u64;
            let mut pts = Vec::new();
            for v in lattice_points(interval, &lat) {
                // U = [v : u|a'|+v : ub'+v] in S; V = Psi(U) in R has
                // n(V) = e y' / (m'(n'-m')), m(V) = e x' / (m' n').
                let y_p = (u as i128) * m_p + v;
                let num = e as i128 * y_p;
                let den = m_p * (n_p - m_p);
                debug_assert_eq!(num % den, 0);
                let n_v = num / den;
                if n_v <= bmax as i128 {
                    continue;
                }
                let m_num = e as i128 * v;
                let m_den = m_p * n_p;
                debug_assert_eq!(m_num % m_den, 0);
                let m_v = m_num / m_den;
                if !slope.accepts(m_v, n_v) {
                    continue;
                }
                if line.b > guard_b {
                    return Err(Error::TailCapTooSmall {
                        got: line.b,
                        cap,
                    });
                }
                let raw = tail_point(cell, line.a, line.b, u, v, m_v, n_v, height_bound, eps)?;
                count += 1;
                if collect {
                    pts.push(raw);
                }
            }
            Ok((count, pts))
        })
        .try_reduce(
            || (0u64, Vec::new()),
            |mut acc, item| {
                acc.0 += item.0;
                acc.1.extend(item.1);
                Ok(acc)
            },
        )?;

    let mut pts = direct.1;
    pts.extend(tail.1);
    Ok((direct.0, tail.0, pts))
}

/// Iterator over the lattice points of an interval with the coprimality
/// condition on the index.
fn lattice_points(
    (lo, hi): (i128, i128),
    lat: &LatticeSpec,
) -> impl Iterator<Item = i128> + '_ {
    let k_lo = ceil_div(lo - lat.offset, lat.modulus);
    let k_hi = floor_div(hi - lat.offset, lat.modulus);
    let (offset, modulus, coprime_to, shift) = (
        lat.offset,
        lat.modulus,
        lat.coprime_to as i128,
        lat.index_shift,
    );
    (k_lo..=k_hi).filter_map(move |k| {
        if gcd_i128(k + shift, coprime_to) != 1 {
            return None;
        }
        Some(offset + modulus * k)
    })
}

/// Maps a region-S window point back through the involution and re-verifies
/// the window definition from the raw coordinates in big integers.
#[allow(clippy::too_many_arguments)]
fn tail_point(
    cell: &CellBound,
    a_p: i64,
    b_p: i64,
    u: i64,
    v: i128,
    m_v: i128,
    n_v: i128,
    height_bound: u64,
    eps: Rat,
) -> Result<RawPoint> {
    let broken = |what: &str| {
        Error::NumericGuard(format!(
            "tail recheck failed ({what}) at a'={a_p} b'={b_p} u={u} v={v}: internal invariant broken"
        ))
    };
    let (x_p, y_p, z_p) = (
        v,
        (u as i128) * (-a_p) as i128 + v,
        (u as i128) * (b_p as i128) + v,
    );
    let p = ProjPoint::new(
        BigInt::from(y_p) * BigInt::from(z_p),
        BigInt::from(x_p) * BigInt::from(z_p),
        BigInt::from(x_p) * BigInt::from(y_p),
    )
    .map_err(|_| broken("normalize"))?;
    if region(&p) != RegionTag::R {
        return Err(broken("region"));
    }
    if !in_zoom_window(&p, height_bound, eps)? {
        return Err(broken("window"));
    }
    let h = height_x3(&p)?;
    if h > BigInt::from(height_bound) {
        return Err(broken("height"));
    }
    let i = intrinsic_params(&p)?;
    if i.d4 != BigInt::from(u)
        || i.e1 != BigInt::from(cell.e1)
        || i.e2 != BigInt::from(cell.e2)
        || i.e3 != BigInt::from(cell.e3)
        || i.m != BigInt::from(m_v)
        || i.n != BigInt::from(n_v)
    {
        return Err(broken("intrinsic parameters"));
    }
    let (x, y, z) = p.coords();
    let narrow = |w: &BigInt| w.to_i128().ok_or_else(|| broken("coordinate range"));
    Ok(RawPoint {
        x: narrow(x)?,
        y: narrow(y)?,
        z: narrow(z)?,
        a: -(m_v as i64),
        b: n_v as i64,
        u,
        v: narrow(z)?,
        e1: cell.e1,
        e2: cell.e2,
        e3: cell.e3,
        height: h.to_u64().ok_or_else(|| broken("height range"))?,
        from_tail: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn query(a: i64, b: i64, u: i64, e: (i64, i64, i64), bound: u64, eps: Rat) -> LineCountQuery {
        LineCountQuery {
            a,
            b,
            u,
            e1: e.0,
            e2: e.1,
            e3: e.2,
            height_bound: bound,
            eps,
            slope_floor: None,
        }
    }

    #[test]
    fn interval_example() {
        let q = query(-1, 2, 1, (1, 2, 1), 1000, Rat::new(3, 1));
        assert_eq!(interval_for_line(&q).unwrap(), Some((7, 8)));
        let q = query(-1, 2, 1, (1, 2, 1), 1, Rat::new(3, 1));
        assert_eq!(interval_for_line(&q).unwrap(), None);
    }

    #[test]
    fn interval_rejects_bad_divisibility() {
        let q = query(-1, 2, 1, (1, 1, 2), 1000, Rat::new(3, 1));
        assert!(matches!(
            interval_for_line(&q),
            Err(Error::DivisibilityViolated(_))
        ));
    }

    #[test]
    fn lattice_examples() {
        let lat = residue_lattice(-1, 2, 1, (1, 2, 1)).unwrap().unwrap();
        assert_eq!((lat.offset, lat.modulus, lat.coprime_to), (0, 1, 2));
        let lat = residue_lattice(-2, 3, 1, (2, 3, 1)).unwrap().unwrap();
        assert_eq!(lat.modulus, 1);
        let lat = residue_lattice(-1, 2, 2, (1, 2, 1)).unwrap().unwrap();
        assert_eq!(lat.coprime_to, 4);
        // condition (c) fails: gcd(3, |a| b (a+b)) = 3
        assert_eq!(residue_lattice(-1, 3, 3, (1, 1, 1)).unwrap(), None);
    }

    #[test]
    fn lattice_count_examples() {
        let lat = residue_lattice(-1, 2, 1, (1, 2, 1)).unwrap().unwrap();
        // v = 7 has index coprime to 2; v = 8 does not
        assert_eq!(count_lattice_in_interval((7, 8), &lat), 1);
        assert_eq!(count_lattice_in_interval((8, 7), &lat), 0);
        let lat = LatticeSpec {
            offset: 0,
            modulus: 1,
            coprime_to: 1,
            index_shift: 0,
        };
        assert_eq!(count_lattice_in_interval((7, 8), &lat), 2);
    }

    #[test]
    fn lattice_matches_literal_gcd_conditions() {
        // enumerate v directly and compare against the lattice on lines
        // where the modulus reduction and the index shift both matter
        for (a, b, u, e) in [
            (-1i64, 3i64, 1i64, (1i64, 1i64, 2i64)),
            (-1, 4, 1, (1, 4, 1)),
            (-3, 4, 1, (3, 1, 1)),
            (-2, 5, 3, (2, 1, 3)),
            (-5, 9, 2, (5, 3, 2)),
        ] {
            let lat = residue_lattice(a, b, u, e).unwrap();
            let (d1, d2, d3) = ((-a) / e.0, b / e.1, (a + b) / e.2);
            for v in 1i128..2000 {
                let literal = gcd_i128(a as i128, v) == d1 as i128
                    && gcd_i128(b as i128, v) == d2 as i128
                    && gcd_i128(-(u as i128) * a as i128 + v, (a + b) as i128) == d3 as i128
                    && gcd_i128(u as i128, v) == 1;
                let in_lattice = lat
                    .as_ref()
                    .map_or(false, |l| {
                        count_lattice_in_interval((v, v), l) == 1
                    });
                assert_eq!(literal, in_lattice, "a={a} b={b} u={u} e={e:?} v={v}");
            }
        }
    }

    #[test]
    fn line_count_example() {
        let q = query(-1, 2, 1, (1, 2, 1), 1000, Rat::new(3, 1));
        assert_eq!(line_count(&q).unwrap(), 1);
        assert_eq!(line_count_oracle(&q).unwrap(), 1);

        let mut q = q;
        q.slope_floor = Some(Rat::new(3, 5));
        assert_eq!(line_count(&q).unwrap(), 0);
    }

    #[test]
    fn line_count_respects_condition_c() {
        let q = query(-1, 3, 3, (1, 1, 1), 1_000_000, Rat::new(4, 1));
        assert_eq!(line_count(&q).unwrap(), 0);
        assert_eq!(line_count_oracle(&q).unwrap(), 0);
    }

    #[test]
    fn main_term_example() {
        let q = query(-1, 2, 1, (1, 2, 1), 1_000_000, Rat::new(3, 1));
        // 100 * (1/2) * (1 - 2/3): the phi factor is the prime product,
        // phi(2) = 1/2.
        let m = main_term_for_line(&q).unwrap();
        assert!((m - 100.0 * 0.5 * (1.0 - 2.0 / 3.0)).abs() < 1e-9);
    }

    #[test]
    fn lattice_index_examples() {
        assert_eq!(lattice_index(1, 1, 1).unwrap(), 1);
        assert_eq!(lattice_index(2, 3, 5).unwrap(), 30);
        assert!(lattice_index(2, 4, 5).is_err());
    }

    #[test]
    fn cells_at_small_radii() {
        assert!(enumerate_cells(Rat::new(3, 2)).unwrap().is_empty());
        let cells = enumerate_cells(Rat::new(2, 1)).unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!((cells[0].u, cells[0].e), (1, 1));
        let cells = enumerate_cells(Rat::new(3, 1)).unwrap();
        let count: usize = cells.len();
        // u = 1, e in 1..=6 with psi(e) triples each: 1+3+3+3+3+9
        assert_eq!(count, 22);
    }

    #[test]
    fn count_small_window() {
        let report = count_region_r(1000, Rat::new(3, 1), SlopeWindow::default()).unwrap();
        let (check, pts) =
            enumerate_region_r(1000, Rat::new(3, 1), SlopeWindow::default()).unwrap();
        assert_eq!(report.total, check.total);
        assert_eq!(report.total as usize, pts.len());
        assert!(pts.iter().any(|p| (p.x, p.y, p.z) == (9, 8, 7)));
        // gap radius: no cells at all
        let empty = count_region_r(1000, Rat::new(3, 2), SlopeWindow::default()).unwrap();
        assert_eq!(empty.total, 0);
    }

    #[test]
    fn count_monotone_in_b_and_eps() {
        let c1 = count_region_r(1000, Rat::new(3, 1), SlopeWindow::default()).unwrap();
        let c2 = count_region_r(5000, Rat::new(3, 1), SlopeWindow::default()).unwrap();
        let c3 = count_region_r(5000, Rat::new(4, 1), SlopeWindow::default()).unwrap();
        assert!(c1.total <= c2.total);
        assert!(c2.total <= c3.total);
    }

    #[test]
    fn slope_partition_sums_to_total() {
        let b = 200_000;
        let eps = Rat::new(3, 1);
        let all = count_region_r(b, eps, SlopeWindow::default()).unwrap().total;
        let cuts = [
            Rat::new(0, 1),
            Rat::new(2, 5),
            Rat::new(1, 2),
            Rat::new(3, 5),
            Rat::new(1, 1),
        ];
        let mut sum = 0;
        for w in cuts.windows(2) {
            sum += count_region_r(
                b,
                eps,
                SlopeWindow {
                    floor: Some(w[0]),
                    ceil: Some(w[1]),
                },
            )
            .unwrap()
            .total;
        }
        assert_eq!(sum, all);
    }

    #[test]
    fn materialized_points_verify_definitionally() {
        let (_, pts) = enumerate_region_r(100_000, Rat::new(3, 1), SlopeWindow::default()).unwrap();
        assert!(!pts.is_empty());
        for p in &pts {
            let pp = ProjPoint::from_i128(p.x, p.y, p.z).unwrap();
            assert_eq!(region(&pp), RegionTag::R);
            assert!(in_zoom_window(&pp, 100_000, Rat::new(3, 1)).unwrap());
            let h = height_x3(&pp).unwrap();
            assert!(h <= BigInt::from(100_000u64));
            assert_eq!(h, BigInt::from(p.height));
            let i = intrinsic_params(&pp).unwrap();
            assert_eq!(i.d4, BigInt::from(p.u));
            assert_eq!(
                (i.e1, i.e2, i.e3),
                (BigInt::from(p.e1), BigInt::from(p.e2), BigInt::from(p.e3))
            );
        }
        // partition is disjoint: all coordinates distinct
        let mut coords: Vec<_> = pts.iter().map(|p| (p.x, p.y, p.z)).collect();
        coords.sort_unstable();
        coords.dedup();
        assert_eq!(coords.len(), pts.len());
    }
}

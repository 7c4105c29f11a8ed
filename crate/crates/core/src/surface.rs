//! Points of the surface, heights, projective distance, tangent charts and
//! the Cremona involution.
//!
//! Points are primitive integer triples `[x:y:z]` with a fixed sign canon,
//! so the positive-octant points of the analysis round-trip unchanged.
//! Heights are exact big integers: the three pairwise gcds each divide the
//! matching pairwise maximum, so the quotient is taken factor by factor and
//! integrality is checked on every call. Window membership is an exact
//! cube comparison; floating point appears only in distances and charts.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::{Error, Rat, Result};

/// A point of the projective plane (equivalently, of the surface off the
/// exceptional locus), stored as a primitive triple.
///
/// Canonical form: `gcd(x, y, z) = 1` and the last nonzero coordinate of
/// `(z, y, x)` is positive, i.e. `z > 0`, or `z = 0 < y`, or `z = y = 0 < x`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProjPoint {
    x: BigInt,
    y: BigInt,
    z: BigInt,
}

impl fmt::Display for ProjPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.x, self.y, self.z)
    }
}

impl fmt::Debug for ProjPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{self}]")
    }
}

impl ProjPoint {
    /// Divides out the gcd and applies the sign canon. Idempotent.
    pub fn new(x: BigInt, y: BigInt, z: BigInt) -> Result<Self> {
        if x.is_zero() && y.is_zero() && z.is_zero() {
            return Err(Error::AllCoordinatesZero);
        }
        let g = x.gcd(&y).gcd(&z);
        let (mut x, mut y, mut z) = (x / &g, y / &g, z / &g);
        let flip = if !z.is_zero() {
            z.is_negative()
        } else if !y.is_zero() {
            y.is_negative()
        } else {
            x.is_negative()
        };
        if flip {
            x = -x;
            y = -y;
            z = -z;
        }
        Ok(ProjPoint { x, y, z })
    }

    pub fn from_i128(x: i128, y: i128, z: i128) -> Result<Self> {
        Self::new(BigInt::from(x), BigInt::from(y), BigInt::from(z))
    }

    pub fn x(&self) -> &BigInt {
        &self.x
    }
    pub fn y(&self) -> &BigInt {
        &self.y
    }
    pub fn z(&self) -> &BigInt {
        &self.z
    }

    pub fn coords(&self) -> (&BigInt, &BigInt, &BigInt) {
        (&self.x, &self.y, &self.z)
    }

    fn all_positive(&self) -> bool {
        self.x.is_positive() && self.y.is_positive() && self.z.is_positive()
    }
}

/// Alias for [`ProjPoint::new`] matching the operation vocabulary.
pub fn normalize(x: BigInt, y: BigInt, z: BigInt) -> Result<ProjPoint> {
    ProjPoint::new(x, y, z)
}

/// The base point of the zoom, Q = [1:1:1].
pub fn base_point() -> ProjPoint {
    ProjPoint::from_i128(1, 1, 1).unwrap()
}

/// Classification of a point relative to the region decomposition around Q.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionTag {
    /// x > y > z > 0
    R,
    /// z > y > x > 0
    S,
    /// A strict coordinate ordering other than R or S (or a point outside
    /// the positive octant); the id indexes the six orderings with
    /// 0 = x>y>z, 1 = x>z>y, 2 = y>x>z, 3 = y>z>x, 4 = z>x>y, 5 = z>y>x.
    OtherOrdering(u8),
    /// Exactly two coordinates equal, all positive: the line x=y (1),
    /// y=z (2) or x=z (3). Q itself lies on all three; the lowest index is
    /// reported for it.
    OnAccumulatingLine(u8),
    /// A vanishing coordinate; heights and charts are undefined here.
    OnExceptionalLocus,
}

/// Classifies a point by exact integer comparisons.
pub fn region(p: &ProjPoint) -> RegionTag {
    use std::cmp::Ordering::*;
    if p.x.is_zero() || p.y.is_zero() || p.z.is_zero() {
        return RegionTag::OnExceptionalLocus;
    }
    if p.all_positive() {
        match (p.x.cmp(&p.y), p.y.cmp(&p.z), p.x.cmp(&p.z)) {
            (Equal, Equal, _) => return RegionTag::OnAccumulatingLine(1),
            (Equal, _, _) => return RegionTag::OnAccumulatingLine(1),
            (_, Equal, _) => return RegionTag::OnAccumulatingLine(2),
            (_, _, Equal) => return RegionTag::OnAccumulatingLine(3),
            (Greater, Greater, _) => return RegionTag::R,
            (Less, Less, _) => return RegionTag::S,
            _ => {}
        }
    }
    let id = match (p.x > p.y, p.y > p.z, p.x > p.z) {
        (true, true, _) => 0,
        (true, false, true) => 1,
        (true, false, false) => 4,
        (false, true, true) => 2,
        (false, true, false) => 3,
        (false, false, _) => 5,
    };
    RegionTag::OtherOrdering(id)
}

fn pair_term(hi: &BigInt, lo: &BigInt) -> Result<BigInt> {
    let m = if hi.abs() >= lo.abs() {
        hi.abs()
    } else {
        lo.abs()
    };
    let g = hi.gcd(lo);
    let (q, r) = m.div_rem(&g);
    debug_assert!(r.is_zero());
    if !r.is_zero() {
        return Err(Error::NumericGuard(
            "pairwise gcd failed to divide pairwise max".into(),
        ));
    }
    Ok(q)
}

/// Anticanonical height on the three-point blow-up:
/// `max(|x|,|y|) max(|y|,|z|) max(|x|,|z|) / (gcd(x,y) gcd(y,z) gcd(x,z))`.
pub fn height_x3(p: &ProjPoint) -> Result<BigInt> {
    if p.x.is_zero() || p.y.is_zero() || p.z.is_zero() {
        return Err(Error::OnExceptionalLocus);
    }
    Ok(pair_term(&p.x, &p.y)? * pair_term(&p.y, &p.z)? * pair_term(&p.x, &p.z)?)
}

/// Anticanonical height on the two-point blow-up:
/// `max(|x|,|y|,|z|) max(|y|,|z|) max(|x|,|z|) / (gcd(y,z) gcd(x,z))`.
pub fn height_x2(p: &ProjPoint) -> Result<BigInt> {
    if p.x.is_zero() || p.y.is_zero() || p.z.is_zero() {
        return Err(Error::OnExceptionalLocus);
    }
    let m = p.x.abs().max(p.y.abs()).max(p.z.abs());
    Ok(m * pair_term(&p.y, &p.z)? * pair_term(&p.x, &p.z)?)
}

fn p1_distance(a0: &BigInt, a1: &BigInt, b0: &BigInt, b1: &BigInt) -> f64 {
    let cross = (a0 * b1 - a1 * b0).abs().to_f64().unwrap_or(f64::INFINITY);
    let na = (a0 * a0 + a1 * a1).to_f64().unwrap_or(f64::INFINITY);
    let nb = (b0 * b0 + b1 * b1).to_f64().unwrap_or(f64::INFINITY);
    cross / (na.sqrt() * nb.sqrt())
}

/// Projective distance through the embedding into (P^1)^3 by the pairs
/// `(x,y)`, `(y,z)`, `(x,z)`: the sum of the three P^1 chordal distances.
///
/// Symmetric, and zero exactly on equal points. Double precision: this is
/// used for the 3/2 lower-bound check and the approximation-constant
/// estimator, never for set membership.
pub fn proj_distance(p: &ProjPoint, q: &ProjPoint) -> f64 {
    p1_distance(&p.x, &p.y, &q.x, &q.y)
        + p1_distance(&p.y, &p.z, &q.y, &q.z)
        + p1_distance(&p.x, &p.z, &q.x, &q.z)
}

/// Tangent-plane coordinates of a point near Q.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartPoint {
    pub s: f64,
    pub t: f64,
}

/// Chart on region R: `(x/z - 1, y/z - 1)`; both coordinates positive with
/// `s > t` there.
pub fn chart_map(p: &ProjPoint) -> Result<ChartPoint> {
    if region(p) != RegionTag::R {
        return Err(Error::WrongRegion("chart_map needs x > y > z > 0"));
    }
    let z = p.z.to_f64().unwrap();
    Ok(ChartPoint {
        s: (&p.x - &p.z).to_f64().unwrap() / z,
        t: (&p.y - &p.z).to_f64().unwrap() / z,
    })
}

/// Chart on region S: `(z/x - 1, y/x - 1)`.
pub fn chart_map_tilde(p: &ProjPoint) -> Result<ChartPoint> {
    if region(p) != RegionTag::S {
        return Err(Error::WrongRegion("chart_map_tilde needs z > y > x > 0"));
    }
    let x = p.x.to_f64().unwrap();
    Ok(ChartPoint {
        s: (&p.z - &p.x).to_f64().unwrap() / x,
        t: (&p.y - &p.x).to_f64().unwrap() / x,
    })
}

/// Exact zoom-window test `max(|x/z - 1|, |y/z - 1|) <= eps * B^(-1/3)` for
/// a positive triple, done as the cube comparison
/// `max(|x-z|,|y-z|)^3 * B * q^3 <= p^3 * z^3` with `eps = p/q`.
///
/// No floating point: thresholds where `eps^3 B` is a perfect cube are
/// decided exactly.
pub fn in_zoom_window(p: &ProjPoint, b: u64, eps: Rat) -> Result<bool> {
    if !p.all_positive() {
        return Err(Error::WrongRegion("zoom window lives in the positive octant"));
    }
    let (ep, eq) = (BigInt::from(*eps.numer()), BigInt::from(*eps.denom()));
    if !ep.is_positive() {
        return Err(Error::NumericGuard("epsilon must be positive".into()));
    }
    let dx = (&p.x - &p.z).abs();
    let dy = (&p.y - &p.z).abs();
    let d = dx.max(dy);
    let lhs = d.pow(3) * BigInt::from(b) * eq.pow(3);
    let rhs = ep.pow(3) * p.z.pow(3);
    Ok(lhs <= rhs)
}

/// The Cremona involution `[x:y:z] -> [yz:xz:xy]`, returned in canonical
/// form. Undefined at the three points where two coordinates vanish.
pub fn cremona(p: &ProjPoint) -> Result<ProjPoint> {
    let zeros = [&p.x, &p.y, &p.z].iter().filter(|c| c.is_zero()).count();
    if zeros >= 2 {
        return Err(Error::CremonaCenter);
    }
    ProjPoint::new(&p.y * &p.z, &p.x * &p.z, &p.x * &p.y)
}

/// `d(P, Q) * H(P)^(1/3)` for a positive point off the accumulating lines;
/// callers assert the value is at least `3/2 - 1e-9`.
pub fn lower_bound_check(p: &ProjPoint) -> Result<f64> {
    if !p.all_positive() {
        return Err(Error::WrongRegion("lower bound needs positive coordinates"));
    }
    if p.x == p.y || p.y == p.z || p.x == p.z {
        return Err(Error::OnAccumulatingLine);
    }
    let h = height_x3(p)?.to_f64().unwrap();
    Ok(proj_distance(p, &base_point()) * h.cbrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: i128, y: i128, z: i128) -> ProjPoint {
        ProjPoint::from_i128(x, y, z).unwrap()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(pt(2, 4, 6), pt(1, 2, 3));
        assert_eq!(pt(-3, -2, -1), pt(3, 2, 1));
        let p = pt(7, 5, 3);
        assert_eq!(p.to_string(), "7:5:3");
        assert!(ProjPoint::from_i128(0, 0, 0).is_err());
    }

    #[test]
    fn normalize_sign_canon_with_zero_coordinates() {
        assert_eq!(pt(1, 1, 0).to_string(), "1:1:0");
        assert_eq!(pt(-1, -1, 0).to_string(), "1:1:0");
        assert_eq!(pt(-2, 0, 0).to_string(), "1:0:0");
    }

    #[test]
    fn region_examples() {
        assert_eq!(region(&pt(7, 5, 3)), RegionTag::R);
        assert_eq!(region(&pt(15, 21, 35)), RegionTag::S);
        assert_eq!(region(&pt(2, 2, 1)), RegionTag::OnAccumulatingLine(1));
        assert_eq!(region(&pt(3, 1, 2)), RegionTag::OtherOrdering(1));
        assert_eq!(region(&pt(1, 1, 1)), RegionTag::OnAccumulatingLine(1));
        assert_eq!(region(&pt(1, 0, 3)), RegionTag::OnExceptionalLocus);
    }

    #[test]
    fn height_x3_examples() {
        assert_eq!(height_x3(&pt(1, 1, 1)).unwrap(), BigInt::from(1));
        assert_eq!(height_x3(&pt(7, 5, 3)).unwrap(), BigInt::from(245));
        assert_eq!(height_x3(&pt(9, 8, 7)).unwrap(), BigInt::from(648));
        assert!(height_x3(&pt(1, 0, 3)).is_err());
    }

    #[test]
    fn height_x2_examples() {
        assert_eq!(height_x2(&pt(1, 1, 1)).unwrap(), BigInt::from(1));
        assert_eq!(height_x2(&pt(7, 5, 3)).unwrap(), BigInt::from(245));
        assert_eq!(height_x2(&pt(9, 8, 7)).unwrap(), BigInt::from(648));
    }

    #[test]
    fn proj_distance_examples() {
        let p = pt(7, 5, 3);
        assert_eq!(proj_distance(&p, &p), 0.0);
        let d = proj_distance(&pt(1, 1, 1), &pt(1, 1, 0));
        assert!((d - 2.0f64.sqrt()).abs() < 1e-15);
        let expect = 2.0 / (74.0f64.sqrt() * 2.0f64.sqrt())
            + 2.0 / (34.0f64.sqrt() * 2.0f64.sqrt())
            + 4.0 / (58.0f64.sqrt() * 2.0f64.sqrt());
        let d = proj_distance(&p, &base_point());
        assert!((d - expect).abs() < 1e-15);
    }

    #[test]
    fn chart_examples() {
        assert!(chart_map(&pt(1, 1, 1)).is_err());
        let c = chart_map(&pt(7, 5, 3)).unwrap();
        assert!((c.s - 4.0 / 3.0).abs() < 1e-15 && (c.t - 2.0 / 3.0).abs() < 1e-15);
        let c = chart_map(&pt(9, 8, 7)).unwrap();
        assert!((c.s - 2.0 / 7.0).abs() < 1e-15 && (c.t - 1.0 / 7.0).abs() < 1e-15);
        let c = chart_map_tilde(&pt(15, 21, 35)).unwrap();
        assert!((c.s - 4.0 / 3.0).abs() < 1e-15 && (c.t - 2.0 / 5.0).abs() < 1e-15);
        assert!(chart_map_tilde(&pt(7, 5, 3)).is_err());
    }

    #[test]
    fn zoom_window_examples() {
        assert!(in_zoom_window(&pt(9, 8, 7), 1000, Rat::new(3, 1)).unwrap());
        assert!(!in_zoom_window(&pt(7, 5, 3), 1000, Rat::new(3, 1)).unwrap());
        assert!(in_zoom_window(&pt(7, 5, 3), 1000, Rat::new(1_000_000, 1)).unwrap());
        // boundary: (x-z)/z = 3/10 exactly equals eps B^{-1/3} at B=1000
        assert!(in_zoom_window(&pt(13, 11, 10), 1000, Rat::new(3, 1)).unwrap());
        assert!(!in_zoom_window(&pt(13, 11, 10), 1001, Rat::new(3, 1)).unwrap());
    }

    #[test]
    fn cremona_examples() {
        assert_eq!(cremona(&pt(1, 1, 1)).unwrap(), pt(1, 1, 1));
        assert_eq!(cremona(&pt(7, 5, 3)).unwrap(), pt(15, 21, 35));
        assert_eq!(cremona(&pt(3, 2, 1)).unwrap(), pt(2, 3, 6));
        assert!(cremona(&pt(1, 0, 0)).is_err());
    }

    #[test]
    fn cremona_fixes_height_and_is_involutive() {
        for (x, y, z) in [(7, 5, 3), (9, 8, 7), (12, 7, 2), (100, 99, 97)] {
            let p = pt(x, y, z);
            let q = cremona(&p).unwrap();
            assert_eq!(height_x3(&p).unwrap(), height_x3(&q).unwrap());
            assert_eq!(cremona(&q).unwrap(), p);
        }
    }

    #[test]
    fn lower_bound_examples() {
        assert!(lower_bound_check(&pt(9, 8, 7)).unwrap() >= 1.5);
        assert!(lower_bound_check(&pt(3, 2, 1)).unwrap() >= 1.5);
        assert!(matches!(
            lower_bound_check(&pt(2, 2, 1)),
            Err(Error::OnAccumulatingLine)
        ));
    }
}

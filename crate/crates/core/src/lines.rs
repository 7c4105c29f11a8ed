//! Lines through Q and the gcd parameters of a point.
//!
//! Every rational point of the open region R sits on a unique line
//! `ax + by + cz = 0` with `a + b + c = 0` through Q, and corresponds to a
//! unique quadruple `(a, b, u, v)` with `0 < -a < b`, `u, v > 0`,
//! `gcd(a, b) = gcd(u, v) = 1` via `[u:v] -> [ub+v : -ua+v : v]`. The
//! intrinsic parameters `(d_i, e_i, m, n)` are the gcd data the counting
//! formulas are indexed by; the identities `m = e1 d1`, `n = e2 d2`,
//! `n - m = e3 d3` are asserted whenever an [`Intrinsic`] is built, which
//! catches sign errors in gcds early.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::surface::{region, ProjPoint, RegionTag};
use crate::{Error, Result};

/// Line/point parametrization of a region-R (or, with primes, region-S)
/// point: `0 < -a < b`, `u, v > 0`, `gcd(a, b) = gcd(u, v) = 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Quadruple {
    pub a: BigInt,
    pub b: BigInt,
    pub u: BigInt,
    pub v: BigInt,
}

impl Quadruple {
    pub fn new(a: BigInt, b: BigInt, u: BigInt, v: BigInt) -> Result<Self> {
        if !a.is_negative() || -&a >= b {
            return Err(Error::InvalidQuadruple("need 0 < -a < b"));
        }
        if !u.is_positive() || !v.is_positive() {
            return Err(Error::InvalidQuadruple("need u > 0 and v > 0"));
        }
        if !a.gcd(&b).is_one() {
            return Err(Error::InvalidQuadruple("need gcd(a, b) = 1"));
        }
        if !u.gcd(&v).is_one() {
            return Err(Error::InvalidQuadruple("need gcd(u, v) = 1"));
        }
        Ok(Quadruple { a, b, u, v })
    }

    pub fn from_i64(a: i64, b: i64, u: i64, v: i64) -> Result<Self> {
        Self::new(a.into(), b.into(), u.into(), v.into())
    }
}

/// The gcd data of a point: `d1..d4` the pairwise/difference gcds, the
/// pairwise coprime `(e1, e2, e3)`, and the reduced slope `m/n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Intrinsic {
    pub d1: BigInt,
    pub d2: BigInt,
    pub d3: BigInt,
    pub d4: BigInt,
    pub e1: BigInt,
    pub e2: BigInt,
    pub e3: BigInt,
    pub m: BigInt,
    pub n: BigInt,
}

impl Intrinsic {
    /// Builds and validates: positivity, the three defining identities,
    /// pairwise coprime `e_i`, and `gcd(m, n) = 1` with `m < n`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        d1: BigInt,
        d2: BigInt,
        d3: BigInt,
        d4: BigInt,
        e1: BigInt,
        e2: BigInt,
        e3: BigInt,
        m: BigInt,
        n: BigInt,
    ) -> Result<Self> {
        let all = [&d1, &d2, &d3, &d4, &e1, &e2, &e3, &m, &n];
        if all.iter().any(|x| !x.is_positive()) {
            return Err(Error::InvalidIntrinsic("all fields must be positive"));
        }
        if m >= n {
            return Err(Error::InvalidIntrinsic("need m < n"));
        }
        if m != &e1 * &d1 || n != &e2 * &d2 || &n - &m != &e3 * &d3 {
            return Err(Error::InvalidIntrinsic(
                "defining identities m = e1 d1, n = e2 d2, n - m = e3 d3",
            ));
        }
        if !e1.gcd(&e2).is_one() || !e1.gcd(&e3).is_one() || !e2.gcd(&e3).is_one() {
            return Err(Error::InvalidIntrinsic("e_i must be pairwise coprime"));
        }
        if !m.gcd(&n).is_one() {
            return Err(Error::InvalidIntrinsic("need gcd(m, n) = 1"));
        }
        Ok(Intrinsic {
            d1,
            d2,
            d3,
            d4,
            e1,
            e2,
            e3,
            m,
            n,
        })
    }

    /// Reduced slope `m/n` in (0, 1), exactly.
    pub fn slope(&self) -> BigRational {
        BigRational::new(self.m.clone(), self.n.clone())
    }

    /// The product `e1 e2 e3`.
    pub fn e(&self) -> BigInt {
        &self.e1 * &self.e2 * &self.e3
    }
}

/// Intrinsic parameters of a point in the open region R (`x > y > z > 0`):
/// `d1 = gcd(y,z)`, `d2 = gcd(x,z)`, `d3 = gcd(x,y)`,
/// `d4 = gcd(x-z, y-z)`, `m = (y-z)/d4`, `n = (x-z)/d4`,
/// `e1 = (y-z)/(d1 d4)`, `e2 = (x-z)/(d2 d4)`, `e3 = (x-y)/(d3 d4)`.
pub fn intrinsic_params(p: &ProjPoint) -> Result<Intrinsic> {
    if region(p) != RegionTag::R {
        return Err(Error::WrongRegion("intrinsic_params needs x > y > z > 0"));
    }
    let (x, y, z) = p.coords();
    let (dx, dy, dxy) = (x - z, y - z, x - y);
    let d1 = y.gcd(z);
    let d2 = x.gcd(z);
    let d3 = x.gcd(y);
    let d4 = dx.gcd(&dy);
    // d1 d4 | y-z etc.: any common prime of d_i and d4 would divide all of
    // x, y, z.
    Intrinsic::new(
        d1.clone(),
        d2.clone(),
        d3.clone(),
        d4.clone(),
        &dy / (&d1 * &d4),
        &dx / (&d2 * &d4),
        &dxy / (&d3 * &d4),
        &dy / &d4,
        &dx / &d4,
    )
}

/// Primed intrinsic parameters of a point in the open region S
/// (`z > y > x > 0`), obtained by exchanging the roles of x and z:
/// `d1' = gcd(y,x)`, `d2' = gcd(x,z)`, `d3' = gcd(z,y)`, `d4' = gcd(x-z, y-z)`,
/// `m' = (y-x)/d4'`, `n' = (z-x)/d4'`.
pub fn intrinsic_params_s(p: &ProjPoint) -> Result<Intrinsic> {
    if region(p) != RegionTag::S {
        return Err(Error::WrongRegion("intrinsic_params_s needs z > y > x > 0"));
    }
    let (x, y, z) = p.coords();
    let (dz, dy, dzy) = (z - x, y - x, z - y);
    let d1 = y.gcd(x);
    let d2 = x.gcd(z);
    let d3 = z.gcd(y);
    let d4 = dz.gcd(&dy);
    Intrinsic::new(
        d1.clone(),
        d2.clone(),
        d3.clone(),
        d4.clone(),
        &dy / (&d1 * &d4),
        &dz / (&d2 * &d4),
        &dzy / (&d3 * &d4),
        &dy / &d4,
        &dz / &d4,
    )
}

/// `[u:v] -> [ub+v : -ua+v : v]`. The image coordinates are already
/// coprime (any common divisor would divide u·gcd(a,b) and v), and the
/// point lies in the open region R.
pub fn point_from_quadruple(q: &Quadruple) -> ProjPoint {
    let x = &q.u * &q.b + &q.v;
    let y = -(&q.u * &q.a) + &q.v;
    let p = ProjPoint::new(x.clone(), y.clone(), q.v.clone()).expect("nonzero");
    debug_assert_eq!(p.coords(), (&x, &y, &q.v));
    p
}

/// Exact inverse of [`point_from_quadruple`] on the open region R:
/// `a = -m`, `b = n`, `u = d4`, `v = z`.
pub fn quadruple_from_point(p: &ProjPoint) -> Result<Quadruple> {
    let i = intrinsic_params(p)?;
    Quadruple::new(-&i.m, i.n.clone(), i.d4.clone(), p.z().clone())
}

/// Transports intrinsic parameters of `V = [x:y:z]` in R to those of its
/// Cremona image `Psi(V)` in S by the closed formulas
/// `u' = u`, `e' = (e3, e2, e1)`, `m' = e1 e2 e3 z / (m n)`,
/// `n' = e1 e2 e3 y / (m (n - m))`, without touching the image coordinates.
///
/// `z` and `y` are the two smallest coordinates of V. Every division must
/// be exact; a remainder signals that the input did not come from a
/// region-R point.
pub fn cremona_transport(i: &Intrinsic, z: &BigInt, y: &BigInt) -> Result<Intrinsic> {
    if y != &(z + &i.d4 * &i.m) {
        return Err(Error::NonIntegralTransport);
    }
    let x = z + &i.d4 * &i.n;
    let e = i.e();
    let exact = |num: BigInt, den: BigInt| -> Result<BigInt> {
        let (q, r) = num.div_rem(&den);
        if r.is_zero() {
            Ok(q)
        } else {
            Err(Error::NonIntegralTransport)
        }
    };
    let m_p = exact(&e * z, &i.m * &i.n)?;
    let n_p = exact(&e * y, &i.m * (&i.n - &i.m))?;
    let d1_p = exact(z.clone(), &i.d1 * &i.d2)?;
    let d2_p = exact(y.clone(), &i.d1 * &i.d3)?;
    let d3_p = exact(x, &i.d2 * &i.d3)?;
    Intrinsic::new(
        d1_p,
        d2_p,
        d3_p,
        i.d4.clone(),
        i.e3.clone(),
        i.e2.clone(),
        i.e1.clone(),
        m_p,
        n_p,
    )
}

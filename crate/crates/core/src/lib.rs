//! Rational points of bounded anticanonical height near Q = [1:1:1] on the
//! degree-6 del Pezzo surface obtained by blowing up the plane in the three
//! coordinate points.
//!
//! The crate enumerates, exactly, the points of the zoomed window
//! `max(|x/z - 1|, |y/z - 1|) <= eps * B^(-1/3)`, `H(P) <= B` in the region
//! `x > y > z > 0`, line by line through Q, and evaluates the limiting
//! density `beta(st(s-t)) / (st(s-t))` that the normalized counts converge
//! to. All window membership tests are exact integer comparisons; floating
//! point only enters distances, densities and report columns.
//!
//! Module map:
//! - [`arith`]: multiplicative arithmetic functions and Bezout data.
//! - [`surface`]: projective points, heights, distances, charts, the
//!   Cremona involution.
//! - [`lines`]: the `(a, b, u, v)` parametrization of lines through Q and
//!   the intrinsic gcd parameters of a point.
//! - [`counting`]: exact per-line counts and the full window count with its
//!   Cremona tail.
//! - [`density`]: the limiting measure (`beta`, `Z`, sector masses) and the
//!   P^1 line measures.
//! - [`measure`]: materialized window points, histograms, comparison against
//!   the density, and approximation-constant estimates.
//! - [`x2`]: the degree-7 (two-point blow-up) variant with its bounded set
//!   of participating lines.

pub mod arith;
pub mod counting;
pub mod density;
pub mod lines;
pub mod measure;
pub mod quad;
pub mod surface;
pub mod x2;

use num_rational::Ratio;
use thiserror::Error;

/// Exact rational scalar used for window radii, slopes and thresholds.
pub type Rat = Ratio<i64>;

/// Error type shared by all modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("undefined factorization: n = 0")]
    UndefinedFactorization,
    #[error("ext_gcd(0, 0) is undefined")]
    ExtGcdBothZero,
    #[error("projective point needs a nonzero coordinate")]
    AllCoordinatesZero,
    #[error("height formula valid off exceptional divisors only (zero coordinate)")]
    OnExceptionalLocus,
    #[error("point lies on an accumulating line")]
    OnAccumulatingLine,
    #[error("Cremona involution undefined: two coordinates vanish")]
    CremonaCenter,
    #[error("point not in the required region ({0})")]
    WrongRegion(&'static str),
    #[error("invalid quadruple: {0}")]
    InvalidQuadruple(&'static str),
    #[error("invalid intrinsic parameters: {0}")]
    InvalidIntrinsic(&'static str),
    #[error("parameter transport produced a non-integral value (input not from a region-R point)")]
    NonIntegralTransport,
    #[error("cell (u, e) is empty at this radius")]
    EmptyCell,
    #[error("divisibility violated: {0}")]
    DivisibilityViolated(&'static str),
    #[error("lattice index needs pairwise coprime moduli")]
    NotPairwiseCoprime,
    #[error("oracle interval too long ({0} values; guard is 10^7)")]
    OracleGuard(u64),
    #[error("tail cap too small (kept point at b' = {got}, cap {cap}); raise the safety factor")]
    TailCapTooSmall { got: i64, cap: i64 },
    #[error("numeric guard: {0}")]
    NumericGuard(String),
    #[error("invalid rational: {0}")]
    InvalidRational(String),
    #[error("invalid sector: {0}")]
    InvalidSector(&'static str),
    #[error("need at least 2 usable samples below the distance cutoff")]
    NotEnoughSamples,
}

pub type Result<T> = std::result::Result<T, Error>;

/// Parses a rational given as `"p/q"` or a bare integer `"p"`.
///
/// Decimal notation is rejected: window radii must stay exact.
pub fn parse_rat(s: &str) -> Result<Rat> {
    let bad = || Error::InvalidRational(s.to_string());
    let (p, q) = match s.split_once('/') {
        Some((p, q)) => (p.trim(), q.trim()),
        None => (s.trim(), "1"),
    };
    let p: i64 = p.parse().map_err(|_| bad())?;
    let q: i64 = q.parse().map_err(|_| bad())?;
    if q == 0 {
        return Err(bad());
    }
    Ok(Rat::new(p, q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_rat_accepts_fractions_and_integers() {
        assert_eq!(parse_rat("3/2").unwrap(), Rat::new(3, 2));
        assert_eq!(parse_rat("3").unwrap(), Rat::new(3, 1));
        assert_eq!(parse_rat(" 4/1 ").unwrap(), Rat::new(4, 1));
    }

    #[test]
    fn parse_rat_rejects_decimals_and_zero_denominators() {
        assert!(parse_rat("1.5").is_err());
        assert!(parse_rat("3/0").is_err());
        assert!(parse_rat("").is_err());
    }
}

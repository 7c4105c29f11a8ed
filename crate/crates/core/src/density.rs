//! The limiting local-distribution measure.
//!
//! Normalized by `B^(1/3) log B`, the window counts converge to the
//! density `beta(st(s-t)) / (st(s-t))` on the cone `s > t > 0`, where
//! `beta` is a nondecreasing step function jumping exactly at the integer
//! thresholds `u^3 e`. Each `(u, e)` pair contributes
//!
//! `u * phi(ue) * 3^omega(e) * rho(u, e)`
//!
//! with `phi` the prime product `prod (1 - 1/p)` and `rho` the density of
//! the participating lines among coprime pairs (see
//! [`coprime_line_density`]). The same ingredients evaluate the sharp
//! per-cell coefficients `Z(eps, u, e)` and their slope-restricted
//! refinements, so counts and masses can be compared cell by cell.

use std::sync::RwLock;

use crate::arith::{factorize, omega, phi_ratio, psi};
use crate::counting::rat_f64;
use crate::quad::{integrate, integrate_with_breakpoints, QuadratureConfig};
use crate::{Error, Rat, Result};

/// Density, among all coprime pairs `0 < -a < b`, of the lines carrying a
/// `(u, e)` cell, relative to the naive sublattice density `1/e`:
///
/// `rho(u, e) = prod_{p | e} p/(p+1)
///            * prod_{p | u, p notdiv e} (p-2)/(p+1)
///            * prod_{p | u, p | e} (p-1)/p`.
///
/// Derivation: `|a|`, `b`, `a+b` are pairwise coprime, so a prime power
/// `p^k` of `e` constrains exactly one of them, and among coprime pairs
/// the local density of that event is `p^-k / (1 + 1/p)`, not `p^-k`.
/// A prime `p` of `u` must avoid dividing `a b (a+b) / e` entirely
/// (coprimality condition on the lattice): if `p` does not divide `e` all
/// three positions must dodge `p`, leaving density `1 - 3/(p+1)`; if `p`
/// divides `e` the position carrying it must stop at the exact power,
/// leaving `1 - 1/p`. In particular cells with `u` even and `e` odd carry
/// no lines at all: one of `|a|, b, a+b` is always even.
pub fn coprime_line_density(u: u64, e: u64) -> f64 {
    let mut rho = 1.0;
    for &(p, _) in &factorize(e).expect("positive").factors {
        let p = p as f64;
        rho *= p / (p + 1.0);
    }
    for &(p, _) in &factorize(u).expect("positive").factors {
        if e % p == 0 {
            rho *= (p - 1) as f64 / p as f64;
        } else {
            rho *= (p as f64 - 2.0) / (p as f64 + 1.0);
        }
    }
    rho
}

struct BetaTable {
    /// covers thresholds strictly below this
    limit: u64,
    /// (threshold u^3 e, cumulative coefficient incl. this threshold)
    entries: Vec<(u64, f64)>,
}

impl BetaTable {
    fn build(limit: u64) -> Self {
        let mut raw: Vec<(u64, f64)> = Vec::new();
        let mut u = 1u64;
        while u * u * u < limit {
            let u3 = u * u * u;
            let mut e = 1u64;
            while u3 * e < limit {
                let coeff = u as f64
                    * rat_f64(phi_ratio(u * e).expect("positive"))
                    * 3f64.powi(omega(e).expect("positive") as i32)
                    * coprime_line_density(u, e);
                raw.push((u3 * e, coeff));
                e += 1;
            }
            u += 1;
        }
        raw.sort_unstable_by_key(|&(t, _)| t);
        let mut entries: Vec<(u64, f64)> = Vec::with_capacity(raw.len());
        let mut cum = 0.0;
        for (t, c) in raw {
            cum += c;
            match entries.last_mut() {
                Some(last) if last.0 == t => last.1 = cum,
                _ => entries.push((t, cum)),
            }
        }
        BetaTable { limit, entries }
    }

    fn eval(&self, s: f64) -> f64 {
        // strict threshold < s; thresholds are exact in f64
        let idx = self.entries.partition_point(|&(t, _)| (t as f64) < s);
        if idx == 0 {
            0.0
        } else {
            self.entries[idx - 1].1
        }
    }
}

fn beta_table() -> &'static RwLock<BetaTable> {
    static TABLE: std::sync::OnceLock<RwLock<BetaTable>> = std::sync::OnceLock::new();
    TABLE.get_or_init(|| RwLock::new(BetaTable::build(4096)))
}

fn beta_sum(s: f64) -> f64 {
    if s <= 1.0 {
        return 0.0;
    }
    {
        let table = beta_table().read().unwrap();
        if s <= table.limit as f64 {
            return table.eval(s);
        }
    }
    let mut table = beta_table().write().unwrap();
    if s > table.limit as f64 {
        let new_limit = (s.ceil() as u64 + 1).next_power_of_two();
        *table = BetaTable::build(new_limit);
    }
    table.eval(s)
}

/// The step function of the limiting density:
/// `beta(s) = 2/pi^2 sum_{u^3 e < s} u phi(ue) 3^omega(e) rho(u, e)`.
pub fn beta(s: f64) -> f64 {
    2.0 / (std::f64::consts::PI * std::f64::consts::PI) * beta_sum(s)
}

/// Density of the limiting measure at a point of the open cone
/// `s > t > 0`: `beta(st(s-t)) / (st(s-t))`; zero once `st(s-t) <= 1`.
pub fn density_at(s: f64, t: f64) -> Result<f64> {
    if !(s > t && t > 0.0) {
        return Err(Error::WrongRegion("density lives on s > t > 0"));
    }
    let w = s * t * (s - t);
    if w <= 1.0 {
        return Ok(0.0);
    }
    Ok(beta(w) / w)
}

/// Distinct thresholds `u^3 e` strictly below `limit`, for breakpoint
/// placement.
fn thresholds_below(limit: f64) -> Vec<u64> {
    let s = beta_sum(limit); // ensures the table covers `limit`
    let _ = s;
    let table = beta_table().read().unwrap();
    table
        .entries
        .iter()
        .map(|&(t, _)| t)
        .take_while(|&t| (t as f64) < limit)
        .collect()
}

fn c0_of(eps: Rat, u: i64, e: i64) -> Result<f64> {
    let (p, q) = (*eps.numer(), *eps.denom());
    if p <= 0 {
        return Err(Error::NumericGuard("radius must be positive".into()));
    }
    let (p3, q3) = ((p as i128).pow(3), (q as i128).pow(3));
    if 4 * (e as i128) * (u as i128).pow(3) * q3 >= p3 {
        return Err(Error::EmptyCell);
    }
    let ratio = (e as f64) * (u as f64).powi(3) / rat_f64(eps).powi(3);
    Ok(0.5 * (1.0 - 4.0 * ratio).sqrt())
}

fn z_kernel(lo: f64, hi: f64, u: i64, e: i64, eps: Rat, cfg: &QuadratureConfig) -> Result<f64> {
    if lo >= hi {
        return Ok(0.0);
    }
    // first integral by quadrature; second in closed form via
    // log(theta / (1 - theta))
    let i1 = integrate(|t| (t * (1.0 - t)).powf(-2.0 / 3.0), lo, hi, cfg)?;
    let i2 = (hi / (1.0 - hi)).ln() - (lo / (1.0 - lo)).ln();
    Ok((e as f64).powf(-1.0 / 3.0) * i1 - (u as f64) / rat_f64(eps) * i2)
}

/// The per-cell coefficient of the count asymptotics: a cell contributes
/// `2 Z(eps, u, e) / pi^2 * B^(1/3) log B` window points. Errors on an
/// empty cell (`eps^3 <= 4 e u^3`).
pub fn z_eps(eps: Rat, u: i64, e: i64, cfg: &QuadratureConfig) -> Result<f64> {
    let c0 = c0_of(eps, u, e)?;
    let pre = rat_f64(phi_ratio((u * e) as u64)?) * coprime_line_density(u as u64, e as u64);
    Ok(pre * z_kernel(0.5 - c0, 0.5 + c0, u, e, eps, cfg)?)
}

/// Slope-restricted variant: only slopes above `tau` count. The lower
/// integration limit is clamped to the slope window, so the value is
/// nonincreasing in `tau`, equals [`z_eps`] at or below `1/2 - C0`, and
/// vanishes from `1/2 + C0` on. Returns 0 for an empty cell.
pub fn z_tau(tau: Rat, u: i64, e: i64, eps: Rat, cfg: &QuadratureConfig) -> Result<f64> {
    let c0 = match c0_of(eps, u, e) {
        Ok(c0) => c0,
        Err(Error::EmptyCell) => return Ok(0.0),
        Err(e) => return Err(e),
    };
    let lo = rat_f64(tau).max(0.5 - c0);
    let hi = 0.5 + c0;
    if lo >= hi {
        return Ok(0.0);
    }
    let pre = rat_f64(phi_ratio((u * e) as u64)?) * coprime_line_density(u as u64, e as u64);
    Ok(pre * z_kernel(lo, hi, u, e, eps, cfg)?)
}

/// A sector `eps1 < s < eps2`, `tau1 < t/s < tau2` of the cone.
#[derive(Debug, Clone, Copy)]
pub struct Sector {
    pub eps1: Rat,
    pub eps2: Rat,
    pub tau1: Rat,
    pub tau2: Rat,
}

impl Sector {
    pub fn new(eps1: Rat, eps2: Rat, tau1: Rat, tau2: Rat) -> Result<Self> {
        if !(*eps1.numer() > 0 && eps1 < eps2) {
            return Err(Error::InvalidSector("need 0 < eps1 < eps2"));
        }
        if !(*tau1.numer() >= 0 && tau1 < tau2 && tau2 <= Rat::new(1, 1)) {
            return Err(Error::InvalidSector("need 0 <= tau1 < tau2 <= 1"));
        }
        Ok(Sector {
            eps1,
            eps2,
            tau1,
            tau2,
        })
    }
}

/// Mass of the limiting measure on a sector, evaluated two independent
/// ways: (i) cell-by-cell differencing of the slope-restricted
/// coefficients, `2/pi^2 sum 3^omega(e) (Z(tau1,eps2) - Z(tau2,eps2)
/// - Z(tau1,eps1) + Z(tau2,eps1))`; (ii) direct two-dimensional
/// quadrature of [`density_at`] over the sector, with panels split at the
/// known threshold curves `s^3 theta (1-theta) = u^3 e`.
pub fn sector_mass(sec: &Sector, cfg: &QuadratureConfig) -> Result<(f64, f64)> {
    Ok((sector_mass_cells(sec, cfg)?, sector_mass_quad(sec, cfg)?))
}

fn sector_mass_cells(sec: &Sector, cfg: &QuadratureConfig) -> Result<f64> {
    let (p, q) = (*sec.eps2.numer() as i128, *sec.eps2.denom() as i128);
    let (p3, q3) = (p * p * p, q * q * q);
    let mut sum = 0.0;
    let mut u = 1i64;
    while 4 * (u as i128).pow(3) * q3 < p3 {
        let mut e = 1i64;
        while 4 * (e as i128) * (u as i128).pow(3) * q3 < p3 {
            let d = z_tau(sec.tau1, u, e, sec.eps2, cfg)? - z_tau(sec.tau2, u, e, sec.eps2, cfg)?
                - z_tau(sec.tau1, u, e, sec.eps1, cfg)?
                + z_tau(sec.tau2, u, e, sec.eps1, cfg)?;
            sum += psi(e as u64)? as f64 * d;
            e += 1;
        }
        u += 1;
    }
    Ok(2.0 / (std::f64::consts::PI * std::f64::consts::PI) * sum)
}

fn sector_mass_quad(sec: &Sector, cfg: &QuadratureConfig) -> Result<f64> {
    let (e1, e2) = (rat_f64(sec.eps1), rat_f64(sec.eps2));
    let (t1, t2) = (rat_f64(sec.tau1), rat_f64(sec.tau2));
    let thresholds = thresholds_below(e2 * e2 * e2 * 0.25 + 1.0);

    // theta values where a threshold curve crosses s = eps1 or s = eps2:
    // theta (1 - theta) = n / eps^3
    let mut outer_breaks = Vec::new();
    for &n in &thresholds {
        for eps in [e1, e2] {
            let c = n as f64 / (eps * eps * eps);
            if c <= 0.25 {
                let r = (0.25 - c).sqrt();
                outer_breaks.push(0.5 - r);
                outer_breaks.push(0.5 + r);
            }
        }
    }
    let inner_cfg = QuadratureConfig {
        abs_tol: cfg.abs_tol * 0.1,
        rel_tol: cfg.rel_tol * 0.1,
        max_subdivisions: cfg.max_subdivisions,
    };
    let inner = |theta: f64| -> f64 {
        let g = theta * (1.0 - theta);
        if g <= 0.0 {
            return 0.0;
        }
        let mut s_breaks: Vec<f64> = thresholds
            .iter()
            .map(|&n| (n as f64 / g).cbrt())
            .filter(|&s| s > e1 && s < e2)
            .collect();
        s_breaks.dedup();
        integrate_with_breakpoints(
            |s| density_at(s, theta * s).unwrap_or(0.0) * s,
            e1,
            e2,
            &s_breaks,
            &inner_cfg,
        )
        .unwrap_or(f64::NAN)
    };
    let mass = integrate_with_breakpoints(inner, t1, t2, &outer_breaks, cfg)?;
    if mass.is_nan() {
        return Err(Error::NumericGuard("sector quadrature failed".into()));
    }
    Ok(mass)
}

/// Partial totient sum `sigma(t) = sum_{n <= t} varphi(n)`, the threshold
/// function of the P^1 line measure.
pub fn sigma_p1(t: f64) -> u64 {
    if t < 1.0 {
        return 0;
    }
    let hi = t.floor() as u64;
    (1..=hi).map(|n| crate::arith::euler_phi(n).expect("positive")).sum()
}

/// The per-line threshold sum `sigma'_l(t) = sum_{u^3 e <= mu(1-mu) t^3}
/// varphi(u e)` for a line of slope `mu` (Euler totient, transcribed as
/// printed; the surface-level `3^omega(e)` multiplicity deliberately does
/// not appear here).
pub fn sigma_prime_line(t: f64, mu: Rat) -> Result<u64> {
    if !(*mu.numer() > 0 && mu < Rat::new(1, 1)) {
        return Err(Error::NumericGuard("slope must lie in (0, 1)".into()));
    }
    let m = rat_f64(mu);
    let bound = m * (1.0 - m) * t * t * t;
    // inclusive threshold; tolerate f64 dust on exact integer landings
    let bound = bound + 1e-9 * bound.abs().max(1.0) * f64::EPSILON.sqrt();
    let mut sum = 0u64;
    let mut u = 1u64;
    while (u * u * u) as f64 <= bound {
        let mut e = 1u64;
        while ((u * u * u * e) as f64) <= bound {
            sum += crate::arith::euler_phi(u * e)?;
            e += 1;
        }
        u += 1;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_OVER_PI2: f64 = 2.0 / (std::f64::consts::PI * std::f64::consts::PI);

    #[test]
    fn beta_small_thresholds() {
        assert_eq!(beta(0.5), 0.0);
        assert_eq!(beta(1.0), 0.0);
        // only (u, e) = (1, 1): coefficient 1
        assert!((beta(1.5) - TWO_OVER_PI2).abs() < 1e-15);
        // adds (1, 2): phi(2) * 3^omega(2) * rho(1, 2) = 1/2 * 3 * 2/3 = 1
        assert!((beta(2.5) - TWO_OVER_PI2 * 2.0).abs() < 1e-14);
    }

    #[test]
    fn beta_is_a_nondecreasing_step_function() {
        let mut prev = -1.0;
        for i in 0..4000 {
            let s = 0.1 * i as f64;
            let b = beta(s);
            assert!(b >= prev);
            prev = b;
        }
        // steps exactly at integer thresholds
        assert_eq!(beta(2.0), beta(1.0000001));
        assert!(beta(2.0 + 1e-9) > beta(2.0));
    }

    #[test]
    fn density_examples() {
        let d = density_at(2.0, 1.0).unwrap();
        assert!((d - TWO_OVER_PI2 / 2.0).abs() < 1e-15);
        assert_eq!(density_at(1.5, 0.5).unwrap(), 0.0);
        assert!(density_at(1.0, 1.5).is_err());
    }

    #[test]
    fn z_examples() {
        let cfg = QuadratureConfig::default();
        assert!(matches!(
            z_eps(Rat::new(3, 2), 1, 1, &cfg),
            Err(Error::EmptyCell)
        ));
        let z = z_eps(Rat::new(3, 1), 1, 1, &cfg).unwrap();
        assert!(z > 0.0);
        // tau at or below the bottom of the window reproduces z_eps;
        // beyond the top it vanishes
        let z_from_zero = z_tau(Rat::new(0, 1), 1, 1, Rat::new(3, 1), &cfg).unwrap();
        assert!((z_from_zero - z).abs() < 1e-12);
        let z_mid = z_tau(Rat::new(1, 2), 1, 1, Rat::new(3, 1), &cfg).unwrap();
        assert!(z_mid > 0.0 && z_mid < z);
        let z_top = z_tau(Rat::new(97, 100), 1, 1, Rat::new(3, 1), &cfg).unwrap();
        assert_eq!(z_top, 0.0);
    }

    #[test]
    fn z_tau_monotone() {
        let cfg = QuadratureConfig::default();
        let mut prev = f64::INFINITY;
        for i in 0..=20 {
            let tau = Rat::new(i, 20);
            let z = z_tau(tau, 1, 2, Rat::new(4, 1), &cfg).unwrap();
            assert!(z <= prev + 1e-12);
            prev = z;
        }
    }

    #[test]
    fn sector_mass_routes_agree() {
        let cfg = QuadratureConfig::default();
        let sec = Sector::new(
            Rat::new(17, 10),
            Rat::new(3, 1),
            Rat::new(1, 2),
            Rat::new(7, 10),
        )
        .unwrap();
        let (a, b) = sector_mass(&sec, &cfg).unwrap();
        assert!(a > 0.0);
        assert!((a - b).abs() <= 1e-8 * a.abs().max(b.abs()));
        // degenerate sector
        let sec = Sector::new(
            Rat::new(17, 10),
            Rat::new(17, 10) + Rat::new(1, 1_000_000),
            Rat::new(1, 2),
            Rat::new(7, 10),
        )
        .unwrap();
        let (a, b) = sector_mass(&sec, &cfg).unwrap();
        assert!(a.abs() < 1e-5 && b.abs() < 1e-5);
        // gap sector: below every threshold
        let sec = Sector::new(
            Rat::new(1, 10),
            Rat::new(12, 10),
            Rat::new(1, 2),
            Rat::new(7, 10),
        )
        .unwrap();
        let (a, b) = sector_mass(&sec, &cfg).unwrap();
        assert_eq!((a, b), (0.0, 0.0));
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma_p1(0.5), 0);
        assert_eq!(sigma_p1(3.5), 4);
        assert_eq!(sigma_p1(10.0), 32);
        assert_eq!(sigma_prime_line(0.5, Rat::new(1, 2)).unwrap(), 0);
        assert_eq!(sigma_prime_line(2.0, Rat::new(1, 2)).unwrap(), 2);
        let a = sigma_prime_line(5.0, Rat::new(1, 3)).unwrap();
        let b = sigma_prime_line(7.0, Rat::new(1, 3)).unwrap();
        assert!(a <= b);
    }
}

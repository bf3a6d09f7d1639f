//! The exponent system attached to a power nonlinearity `|u|^p u` in dimension
//! `d`: the Strauss threshold, the critical triple `(r, q, qbar)`, the tail
//! decay exponent, the Fourier–Lebesgue exponent, and an admissible /
//! dual-admissible pair for the Strichartz side of the contraction argument.
//!
//! Every other module takes its exponents from here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for the exact identities checked by [`validate_exponents`].
pub const IDENTITY_TOL: f64 = 1e-12;

/// All exponents derived from `(d, p)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentSet {
    pub d: usize,
    pub p: f64,
    pub p0: f64,
    pub r: f64,
    pub q: f64,
    pub qbar: f64,
    pub s_c: f64,
    pub eps0: f64,
    pub rho0: f64,
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// How `1/a` is chosen inside its admissible open interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ASelector {
    /// Position inside the open interval, 0 at the lower endpoint and 1 at the upper.
    Fraction(f64),
    /// An explicit value of `1/a`, which must lie strictly inside the interval.
    Inverse(f64),
}

impl Default for ASelector {
    fn default() -> Self {
        ASelector::Fraction(0.5)
    }
}

fn check_dim(d: usize) -> Result<()> {
    if (1..=3).contains(&d) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(d))
    }
}

/// Scaling index `s(q, r) = d/2 - (2/q + d/r)`; infinite exponents are allowed.
pub fn scaling_index(d: usize, q: f64, r: f64) -> f64 {
    let d = d as f64;
    d / 2.0 - (2.0 / q + d / r)
}

/// Hölder dual exponent.
pub fn dual(r: f64) -> f64 {
    if r == 1.0 {
        f64::INFINITY
    } else if r.is_infinite() {
        1.0
    } else {
        r / (r - 1.0)
    }
}

/// Strauss exponent `p0(d) = (2 - d + sqrt(d^2 + 12 d + 4)) / (2 d)`.
pub fn strauss_exponent(d: usize) -> Result<f64> {
    check_dim(d)?;
    let df = d as f64;
    Ok((2.0 - df + (df * df + 12.0 * df + 4.0).sqrt()) / (2.0 * df))
}

/// Upper end `4/d` of the mass-subcritical range.
pub fn mass_critical_power(d: usize) -> f64 {
    4.0 / d as f64
}

/// Open interval for `1/a`.
pub fn a_interval(d: usize, p: f64, q: f64) -> (f64, f64) {
    let pq = p / q;
    if d == 1 {
        ((0.75 - pq).max(0.0), (1.0 - pq).min(0.25))
    } else {
        ((0.5 - pq).max(0.0), (1.0 - pq).min(0.5))
    }
}

/// Derive the exponent set with `1/a` at `a_fraction` of its interval.
pub fn derive_exponents(d: usize, p: f64, a_fraction: f64) -> Result<ExponentSet> {
    derive_exponents_with(d, p, ASelector::Fraction(a_fraction))
}

pub fn derive_exponents_with(d: usize, p: f64, selector: ASelector) -> Result<ExponentSet> {
    check_dim(d)?;
    let p0 = strauss_exponent(d)?;
    let p_max = mass_critical_power(d);
    if !p.is_finite() || p <= p0 {
        return Err(Error::Infeasible(format!(
            "p = {p} violates the lower bound p > p0({d}) = {p0:.12}"
        )));
    }
    if p >= p_max {
        return Err(Error::Infeasible(format!(
            "p = {p} violates the upper bound p < 4/d = {p_max:.12}"
        )));
    }
    let df = d as f64;
    let r = p + 2.0;
    let gap = 4.0 - p * (df - 2.0);
    let q = 2.0 * p * (p + 2.0) / gap;
    let qbar = 2.0 * p * (p + 2.0) / (df * p * p - gap);
    let s_c = df / 2.0 - 2.0 / p;
    let eps0 = (df / 2.0 - df / r) - 1.0 / q;
    let rho0 = df * p / (df * p - 2.0);

    let (lo, hi) = a_interval(d, p, q);
    if !(lo < hi) {
        return Err(Error::Infeasible(format!(
            "empty interval for 1/a: ({lo}, {hi}) at d = {d}, p = {p} (internal consistency failure)"
        )));
    }
    let inv_a = match selector {
        ASelector::Fraction(f) => {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "a_fraction = {f} must lie in the open unit interval"
                )));
            }
            lo + f * (hi - lo)
        }
        ASelector::Inverse(x) => {
            if !(x > lo && x < hi) {
                return Err(Error::Infeasible(format!(
                    "1/a = {x} outside the open interval ({lo}, {hi})"
                )));
            }
            x
        }
    };
    let a = 1.0 / inv_a;
    let inv_b = 0.5 - 2.0 * inv_a / df;
    let b = 1.0 / inv_b;
    let alpha = 1.0 / (p / q + inv_a);
    let beta = 1.0 / (p / r + inv_b);

    Ok(ExponentSet {
        d,
        p,
        p0,
        r,
        q,
        qbar,
        s_c,
        eps0,
        rho0,
        a,
        b,
        alpha,
        beta,
    })
}

/// One named identity or inequality check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn max_identity_residual(&self) -> f64 {
        self.checks
            .iter()
            .filter(|c| !c.name.starts_with("bound:"))
            .map(|c| c.residual)
            .fold(0.0, f64::max)
    }
}

/// Check every invariant of an exponent set. Identities pass when their
/// residual is at most 1e-12; inequalities (prefixed `bound:`) report the
/// violation margin as residual, zero when satisfied.
pub fn validate_exponents(set: &ExponentSet) -> ValidationReport {
    let mut checks = Vec::new();
    let mut identity = |name: &str, lhs: f64, rhs: f64| {
        let residual = (lhs - rhs).abs();
        checks.push(Check {
            name: name.to_string(),
            residual,
            passed: residual <= IDENTITY_TOL,
        });
    };

    let d = set.d;
    let df = d as f64;
    let p = set.p;
    let p0 = strauss_exponent(d).unwrap_or(f64::NAN);
    let gap = 4.0 - p * (df - 2.0);

    identity("strauss exponent", set.p0, p0);
    identity("r = p + 2", set.r, p + 2.0);
    identity("q formula", 1.0 / set.q, gap / (2.0 * p * (p + 2.0)));
    identity(
        "qbar formula",
        1.0 / set.qbar,
        (df * p * p - gap) / (2.0 * p * (p + 2.0)),
    );
    identity(
        "scaling identity 1/q + 1/qbar = d/2 - d/r",
        1.0 / set.q + 1.0 / set.qbar,
        df / 2.0 - df / set.r,
    );
    identity(
        "critical scaling s(q,r) = s_c",
        scaling_index(d, set.q, set.r),
        df / 2.0 - 2.0 / p,
    );
    identity("s_c formula", set.s_c, df / 2.0 - 2.0 / p);
    identity(
        "eps0 definition",
        set.eps0,
        (df / 2.0 - df / set.r) - 1.0 / set.q,
    );
    identity(
        "eps0 closed form",
        set.eps0,
        (df * p * p + p * (df - 2.0) - 4.0) / (2.0 * p * (p + 2.0)),
    );
    identity("rho0 formula", set.rho0, df * p / (df * p - 2.0));
    identity("admissible s(a,b) = 0", scaling_index(d, set.a, set.b), 0.0);
    identity("1/alpha = p/q + 1/a", 1.0 / set.alpha, p / set.q + 1.0 / set.a);
    identity("1/beta = p/r + 1/b", 1.0 / set.beta, p / set.r + 1.0 / set.b);
    identity(
        "dual admissible s(alpha',beta') = 0",
        scaling_index(d, dual(set.alpha), dual(set.beta)),
        0.0,
    );
    identity("r' = r/(p+1)", 1.0 - 1.0 / set.r, (p + 1.0) / set.r);
    identity("qbar' = q/(p+1)", 1.0 - 1.0 / set.qbar, (p + 1.0) / set.q);

    let mut bound = |name: &str, margin: f64| {
        // margin > 0 means satisfied
        checks.push(Check {
            name: format!("bound: {name}"),
            residual: if margin > 0.0 { 0.0 } else { -margin },
            passed: margin > 0.0,
        });
    };
    bound("p > p0", p - p0);
    bound("p < 4/d", mass_critical_power(d) - p);
    bound("q > max(1, p)", set.q - p.max(1.0));
    bound("q < inf", if set.q.is_finite() && set.q > 0.0 { 1.0 } else { -1.0 });
    bound("qbar > 1", set.qbar - 1.0);
    bound(
        "qbar < inf",
        if set.qbar.is_finite() && set.qbar > 0.0 { 1.0 } else { -1.0 },
    );
    bound("eps0 > 0", set.eps0);
    let (lo, hi) = a_interval(d, p, set.q);
    let inv_a = 1.0 / set.a;
    bound("1/a above interval floor", inv_a - lo);
    bound("1/a below interval ceiling", hi - inv_a);
    bound("alpha > 1", set.alpha - 1.0);
    let alpha_max = if d == 1 { 4.0 / 3.0 } else { 2.0 };
    bound("alpha below ceiling", alpha_max - set.alpha);

    let passed = checks.iter().all(|c| c.passed);
    ValidationReport { checks, passed }
}

/// Restriction constraints under which the Fourier–Lebesgue Strichartz
/// estimate applies to `(q, r)`; stated for `d >= 3`, so only `d = 3` here.
pub fn masaki_feasible(set: &ExponentSet) -> Result<bool> {
    if set.d < 3 {
        return Err(Error::NotApplicable(format!(
            "Fourier-Lebesgue restriction constraints require d >= 3 (got d = {})",
            set.d
        )));
    }
    let df = set.d as f64;
    let inv_q = 1.0 / set.q;
    let inv_r = 1.0 / set.r;
    let pivot = (df + 1.0) / (2.0 * (df + 3.0));
    let first = inv_q <= df / (df - 2.0) * inv_r;
    let second = inv_q < pivot - (df + 1.0) / 2.0 * (inv_r - pivot);
    Ok(first && second)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    type Q = Ratio<i64>;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    }

    #[test]
    fn strauss_values() {
        assert_eq!(strauss_exponent(3).unwrap(), 1.0);
        assert!(close(strauss_exponent(2).unwrap(), 2f64.sqrt()));
        assert!(close(strauss_exponent(1).unwrap(), (1.0 + 17f64.sqrt()) / 2.0));
        assert!(matches!(
            strauss_exponent(4),
            Err(Error::UnsupportedDimension(4))
        ));
        assert!(matches!(
            strauss_exponent(0),
            Err(Error::UnsupportedDimension(0))
        ));
    }

    // Exact rational evaluation of the same formulas, independent of the f64 path.
    fn rational_set(d: i64, p: Q, inv_a: Q) -> [Q; 10] {
        let two = Q::from_integer(2);
        let r = p + two;
        let gap = Q::from_integer(4) - p * Q::from_integer(d - 2);
        let q = two * p * r / gap;
        let qbar = two * p * r / (Q::from_integer(d) * p * p - gap);
        let half_d = Q::new(d, 2);
        let s_c = half_d - two / p;
        let eps0 = (half_d - Q::from_integer(d) / r) - q.recip();
        let rho0 = Q::from_integer(d) * p / (Q::from_integer(d) * p - two);
        let inv_b = Q::new(1, 2) - two * inv_a / Q::from_integer(d);
        let alpha = (p / q + inv_a).recip();
        let beta = (p / r + inv_b).recip();
        [r, q, qbar, s_c, eps0, rho0, inv_a.recip(), inv_b.recip(), alpha, beta]
    }

    fn to_f(x: Q) -> f64 {
        *x.numer() as f64 / *x.denom() as f64
    }

    fn assert_matches_rational(set: &ExponentSet, exact: [Q; 10]) {
        let got = [
            set.r, set.q, set.qbar, set.s_c, set.eps0, set.rho0, set.a, set.b, set.alpha, set.beta,
        ];
        for (g, e) in got.iter().zip(exact.iter()) {
            assert!(close(*g, to_f(*e)), "{g} vs {e}");
        }
    }

    #[test]
    fn d1_p3_table() {
        let set = derive_exponents(1, 3.0, 0.5).unwrap();
        let exact = rational_set(1, Q::from_integer(3), Q::new(3, 20));
        assert_eq!(exact[1], Q::new(30, 7));
        assert_eq!(exact[2], Q::from_integer(15));
        assert_eq!(exact[3], Q::new(-1, 6));
        assert_eq!(exact[4], Q::new(1, 15));
        assert_eq!(exact[6], Q::new(20, 3));
        assert_eq!(exact[7], Q::from_integer(5));
        assert_eq!(exact[8], Q::new(20, 17));
        assert_eq!(exact[9], Q::new(5, 4));
        assert_matches_rational(&set, exact);
        let report = validate_exponents(&set);
        assert!(report.passed, "{report:?}");
        assert!(report.max_identity_residual() < 1e-15);
    }

    #[test]
    fn d3_p12_table() {
        let set = derive_exponents(3, 1.2, 0.5).unwrap();
        assert!(close(set.r, 3.2));
        assert!((set.q - 2.742857142857).abs() < 1e-9);
        assert!((set.qbar - 5.052631578947).abs() < 1e-9);
        assert!(close(set.s_c, -1.0 / 6.0));
        assert!(close(set.eps0, 1.52 / 7.68));
        assert!(close(set.rho0, 2.25));
        // midpoint 1/a = (1 - p/q)/2 = 9/32
        let exact = rational_set(3, Q::new(6, 5), Q::new(9, 32));
        assert_matches_rational(&set, exact);
        assert!(validate_exponents(&set).passed);
    }

    #[test]
    fn d2_explicit_inverse_a() {
        let set = derive_exponents_with(2, 1.5, ASelector::Inverse(0.25)).unwrap();
        assert!(close(set.r, 3.5));
        assert!(close(set.q, 2.625));
        assert!(close(set.qbar, 21.0));
        assert!(close(set.s_c, -1.0 / 3.0));
        assert!(close(set.eps0, 1.0 / 21.0));
        assert!(close(set.rho0, 3.0));
        assert!(close(set.a, 4.0));
        assert!(close(set.b, 4.0));
        assert!(validate_exponents(&set).passed);
    }

    #[test]
    fn midpoint_makes_dual_pair_equal_admissible_pair() {
        for (d, p) in [(3, 1.2), (1, 3.0), (2, 1.7)] {
            let set = derive_exponents(d, p, 0.5).unwrap();
            assert!(close(dual(set.alpha), set.a), "d={d}");
            assert!(close(dual(set.beta), set.b), "d={d}");
        }
    }

    #[test]
    fn corrupted_q_breaks_scaling_identity() {
        let mut set = derive_exponents(1, 3.0, 0.5).unwrap();
        set.q += 1e-3;
        let report = validate_exponents(&set);
        assert!(!report.passed);
        assert!(!report
            .check("scaling identity 1/q + 1/qbar = d/2 - d/r")
            .unwrap()
            .passed);
        assert!(!report.check("critical scaling s(q,r) = s_c").unwrap().passed);
    }

    #[test]
    fn infeasible_powers_name_the_bound() {
        let low = derive_exponents(1, 2.5, 0.5).unwrap_err();
        assert!(low.to_string().contains("lower bound"), "{low}");
        let high = derive_exponents(3, 4.0 / 3.0, 0.5).unwrap_err();
        assert!(high.to_string().contains("upper bound"), "{high}");
        assert!(matches!(
            derive_exponents(4, 0.9, 0.5),
            Err(Error::UnsupportedDimension(4))
        ));
        assert!(derive_exponents(1, 3.0, 1.0).is_err());
        assert!(derive_exponents_with(2, 1.5, ASelector::Inverse(0.49)).is_err());
    }

    #[test]
    fn masaki_constraints() {
        assert!(masaki_feasible(&derive_exponents(3, 1.33, 0.5).unwrap()).unwrap());
        // direct substitution at p = 1.2: 1/q = 0.364583 < 1 - 2/r = 0.375 and 3/r = 0.9375
        assert!(masaki_feasible(&derive_exponents(3, 1.2, 0.5).unwrap()).unwrap());
        // close to the Strauss exponent the second constraint fails
        assert!(!masaki_feasible(&derive_exponents(3, 1.02, 0.5).unwrap()).unwrap());
        assert!(matches!(
            masaki_feasible(&derive_exponents(2, 1.5, 0.5).unwrap()),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn eps0_and_qbar_near_strauss_threshold() {
        for d in 1..=3 {
            let p0 = strauss_exponent(d).unwrap();
            let mut prev_eps = f64::INFINITY;
            let mut prev_qbar = 0.0;
            for k in 1..=8 {
                let p = p0 + 10f64.powi(-k);
                let set = derive_exponents(d, p, 0.5).unwrap();
                assert!(set.eps0 > 0.0 && set.eps0 < prev_eps);
                assert!(set.qbar > prev_qbar && set.qbar > 1.0);
                prev_eps = set.eps0;
                prev_qbar = set.qbar;
            }
            assert!(prev_eps < 1e-7);
            assert!(prev_qbar > 1e6);
        }
    }

    proptest::proptest! {
        #[test]
        fn invariants_hold_across_range(d in 1usize..=3, u in 0.001f64..0.999, f in 0.01f64..0.99) {
            let p0 = strauss_exponent(d).unwrap();
            let p = p0 + u * (mass_critical_power(d) - p0);
            let set = derive_exponents(d, p, f).unwrap();
            let report = validate_exponents(&set);
            proptest::prop_assert!(report.passed, "{:?}", report);
            let (lo, hi) = a_interval(d, p, set.q);
            proptest::prop_assert!(lo < hi);
        }
    }
}

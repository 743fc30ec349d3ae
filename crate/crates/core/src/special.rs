//! Log-gamma and the incomplete gamma function.

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const MAX_ITER: usize = 100_000;

/// Natural log of Γ(x) for x > 0 (Lanczos, g = 7).
pub fn ln_gamma<T: Scalar>(x: T) -> T {
    let half = lit::<T>(0.5);
    if x < half {
        // reflection keeps the approximation in its accurate range
        let pi = T::PI();
        return (pi / (pi * x).sin()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut acc = lit::<T>(LANCZOS[0]);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += lit::<T>(c) / (x + lit(i as f64));
    }
    let t = x + lit(LANCZOS_G) + half;
    lit::<T>(0.5 * (2.0 * std::f64::consts::PI).ln()) + (x + half) * t.ln() - t + acc.ln()
}

enum Branch<T> {
    /// Lower series sum: γ(a,x) = e^{-x} x^a · s.
    Series(T),
    /// Continued fraction: Γ(a,x) = e^{-x} x^a · h.
    Fraction(T),
}

fn check_args<T: Scalar>(a: T, x: T) -> Result<()> {
    if !(a > T::zero()) || !a.is_finite() {
        return Err(Error::invalid(format!(
            "incomplete gamma shape must be positive, got {a}"
        )));
    }
    if !(x >= T::zero()) || !x.is_finite() {
        return Err(Error::invalid(format!(
            "incomplete gamma argument must be nonnegative, got {x}"
        )));
    }
    Ok(())
}

fn expand<T: Scalar>(a: T, x: T) -> Result<Branch<T>> {
    let eps = T::epsilon();
    if x < a + T::one() {
        let mut term = T::one() / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..MAX_ITER {
            ap += T::one();
            term *= x / ap;
            sum += term;
            if term.abs() <= sum.abs() * eps {
                return Ok(Branch::Series(sum));
            }
        }
        Err(Error::numeric(format!(
            "gamma series did not converge at a={a}, x={x}"
        )))
    } else {
        // modified Lentz
        let tiny = T::min_positive_value() / eps;
        let two = lit::<T>(2.0);
        let mut b = x + T::one() - a;
        let mut c = T::one() / tiny;
        let mut d = T::one() / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let i = lit::<T>(i as f64);
            let an = -i * (i - a);
            b += two;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = T::one() / d;
            let del = d * c;
            h *= del;
            if (del - T::one()).abs() <= eps {
                return Ok(Branch::Fraction(h));
            }
        }
        Err(Error::numeric(format!(
            "gamma continued fraction did not converge at a={a}, x={x}"
        )))
    }
}

/// Regularized upper incomplete gamma Q(a, x) = Γ(a, x) / Γ(a).
///
/// Series for x < a + 1, continued fraction otherwise.
pub fn regularized_upper_gamma<T: Scalar>(a: T, x: T) -> Result<T> {
    check_args(a, x)?;
    if x == T::zero() {
        return Ok(T::one());
    }
    let prefactor = (-x + a * x.ln() - ln_gamma(a)).exp();
    let q = match expand(a, x)? {
        Branch::Series(s) => T::one() - prefactor * s,
        Branch::Fraction(h) => prefactor * h,
    };
    Ok(q.max(T::zero()).min(T::one()))
}

/// e^x · Γ(a, x) · x^{-a}, finite for large x where Q(a, x) underflows.
pub(crate) fn scaled_upper_gamma<T: Scalar>(a: T, x: T) -> Result<T> {
    check_args(a, x)?;
    if x == T::zero() {
        return Err(Error::invalid("scaled upper gamma needs x > 0"));
    }
    Ok(match expand(a, x)? {
        Branch::Series(s) => (x - a * x.ln() + ln_gamma(a)).exp() - s,
        Branch::Fraction(h) => h,
    })
}

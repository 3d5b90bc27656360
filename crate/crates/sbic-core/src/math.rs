//! f64 math that works with and without `std`.

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("sbic-core needs either the `std` feature or the `libm` feature");

#[cfg(feature = "std")]
mod imp {
    #[inline]
    pub fn ln(x: f64) -> f64 {
        x.ln()
    }

    #[inline]
    pub fn exp(x: f64) -> f64 {
        x.exp()
    }

    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }
}

#[cfg(all(not(feature = "std"), feature = "libm"))]
mod imp {
    #[inline]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }

    #[inline]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }

    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
}

pub(crate) use imp::{exp, ln, sqrt};

/// `log Σ exp(t)` with the usual max shift. Empty input gives `-inf`.
pub(crate) fn logsumexp(terms: &[f64]) -> f64 {
    let mut shift = f64::NEG_INFINITY;
    for &t in terms {
        if t > shift {
            shift = t;
        }
    }
    if shift == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut acc = 0.0;
    for &t in terms {
        acc += exp(t - shift);
    }
    shift + ln(acc)
}

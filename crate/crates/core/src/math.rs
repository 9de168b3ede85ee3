//! Float helpers routed through `libm` so the crate stays `no_std`.

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn pow(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

/// `r^e` for a norm `r ≥ 0`, continuously extended at `r = 0`:
/// `0^0 = 1` and `0^e = 0` for `e > 0`.
#[inline]
pub(crate) fn npow(r: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if r == 0.0 {
        0.0
    } else if e == 1.0 {
        r
    } else if e == 2.0 {
        r * r
    } else if e == 0.5 {
        sqrt(r)
    } else {
        pow(r, e)
    }
}

//! Tolerance constants shared by the constitutive routines.

/// Relative plug threshold: a point is a plug point when
/// `|X_ν| ≤ PLUG_REL · max(1, |X|)`.
pub const PLUG_REL: f64 = 1e-12;

/// Absolute bound on `|sym(Ω)|` accepted for a micro-rotation sample.
pub const ANTISYMMETRY: f64 = 1e-12;

/// Relative slack on the ellipsoidal subdifferential inequality.
pub const MEMBERSHIP_REL: f64 = 1e-10;

/// Relative slack on "antisymmetric part vanishes" in the `ν = 0` test.
pub const ZERO_SKEW_REL: f64 = 1e-10;

/// Plug threshold for a matrix `X` under the default relative rule.
#[inline]
pub fn plug_tol(x_norm: f64) -> f64 {
    PLUG_REL * x_norm.max(1.0)
}

/// The same constants bundled as a record, for callers that want to
/// override some of them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub plug_rel: f64,
    pub antisymmetry: f64,
    pub membership_rel: f64,
    pub zero_skew_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            plug_rel: PLUG_REL,
            antisymmetry: ANTISYMMETRY,
            membership_rel: MEMBERSHIP_REL,
            zero_skew_rel: ZERO_SKEW_REL,
        }
    }
}

// Float helpers that `core` does not provide.

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

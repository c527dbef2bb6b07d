use crate::scalar::Scalar;

/// Cubic smoothstep cutoff: 1 on [0, R], 0 beyond R+1, `1 − 3s² + 2s³` with `s = t − R` between.
pub fn theta<T: Scalar>(r: T, t: T) -> T {
    let s = t.abs() - r;
    if s <= T::zero() {
        T::one()
    } else if s >= T::one() {
        T::zero()
    } else {
        T::one() - T::lit(3.0) * s * s + T::lit(2.0) * s * s * s
    }
}

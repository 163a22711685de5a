//! Order statistics over episode metrics.

use crate::scalar::Scalar;

pub fn mean<S: Scalar>(values: &[S]) -> Option<S> {
    if values.is_empty() {
        return None;
    }
    let sum = values.iter().fold(S::zero(), |acc, &v| acc + v);
    Some(sum / S::from_count(values.len()))
}

/// Linear-interpolated quantile (`q` in `[0, 1]`) of unsorted data.
pub fn quantile<S: Scalar>(values: &[S], q: S) -> Option<S> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("metrics are finite"));
    let pos = q.max(S::zero()).min(S::one()) * S::from_count(sorted.len() - 1);
    let lo = pos.floor();
    let hi = pos.ceil();
    let lo_i = lo.to_usize().expect("index fits");
    let hi_i = hi.to_usize().expect("index fits");
    let frac = pos - lo;
    Some(sorted[lo_i] + (sorted[hi_i] - sorted[lo_i]) * frac)
}

pub fn median<S: Scalar>(values: &[S]) -> Option<S> {
    quantile(values, S::half())
}

/// Q3 - Q1.
pub fn iqr<S: Scalar>(values: &[S]) -> Option<S> {
    let q1 = quantile(values, S::from_f64(0.25))?;
    let q3 = quantile(values, S::from_f64(0.75))?;
    Some(q3 - q1)
}

//! Sample statistics.

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats<T> {
    pub n: usize,
    pub mean: T,
    pub median: T,
    /// Sample standard deviation over √n; zero for a single value.
    pub stderr: T,
}

impl<T: Real> Stats<T> {
    /// `None` for an empty sample.
    pub fn of(values: &[T]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        Some(Self {
            n: values.len(),
            mean: mean(values),
            median: median(values),
            stderr: std_error(values),
        })
    }
}

pub fn mean<T: Real>(values: &[T]) -> T {
    if values.is_empty() {
        return T::nan();
    }
    values.iter().fold(T::zero(), |a, &v| a + v) / T::from_count(values.len())
}

pub fn median<T: Real>(values: &[T]) -> T {
    if values.is_empty() {
        return T::nan();
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("NaN in sample"));
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / T::lit(2.0)
    }
}

/// Unbiased sample variance; zero below two values.
pub fn variance<T: Real>(values: &[T]) -> T {
    if values.len() < 2 {
        return T::zero();
    }
    let m = mean(values);
    let ss = values.iter().fold(T::zero(), |a, &v| a + (v - m) * (v - m));
    ss / T::from_count(values.len() - 1)
}

pub fn std_error<T: Real>(values: &[T]) -> T {
    if values.len() < 2 {
        return T::zero();
    }
    (variance(values) / T::from_count(values.len())).sqrt()
}

/// Geometric mean of positive values, through logs.
pub fn geometric_mean<T: Real>(values: &[T]) -> T {
    if values.is_empty() || values.iter().any(|v| *v <= T::zero()) {
        return T::nan();
    }
    let logs: Vec<T> = values.iter().map(|v| v.ln()).collect();
    mean(&logs).exp()
}

//! Exact floating-point summation.
//!
//! Cluster totals and zero-check residuals are computed with an error-free
//! accumulation of partials, so a total is the correctly rounded value of the
//! exact real sum regardless of row order. This keeps totals deterministic and
//! lets a decomposed row reproduce its parent's contribution bit for bit.

/// Correctly rounded sum of `values` (Shewchuk's partials algorithm).
pub fn exact_sum<I>(values: I) -> f64
where
    I: IntoIterator<Item = f64>,
{
    let mut partials: Vec<f64> = Vec::new();
    for mut x in values {
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }
    round_partials(&partials)
}

fn round_partials(partials: &[f64]) -> f64 {
    let mut n = partials.len();
    if n == 0 {
        return 0.0;
    }
    n -= 1;
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        n -= 1;
        let y = partials[n];
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    // Half-way case: correct the rounding direction using the next partial.
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        let yr = x - hi;
        if y == yr {
            hi = x;
        }
    }
    hi
}

/// Per-period exact sum of a set of equal-length vectors.
pub fn exact_column_sums<'a, I>(rows: I, width: usize) -> Vec<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
    I::IntoIter: Clone,
{
    let rows = rows.into_iter();
    (0..width).map(|p| exact_sum(rows.clone().map(|r| r[p]))).collect()
}

pub fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cancels_exactly() {
        assert_eq!(exact_sum([1e100, 1.0, -1e100]), 1.0);
        assert_eq!(exact_sum([0.1, 0.2, -0.3]), exact_sum([-0.3, 0.2, 0.1]));
        assert_eq!(exact_sum(std::iter::empty()), 0.0);
    }

    proptest! {
        #[test]
        fn order_independent(mut xs in proptest::collection::vec(-1e6f64..1e6, 0..20), seed in any::<u64>()) {
            let a = exact_sum(xs.iter().copied());
            let n = xs.len();
            if n > 1 {
                xs.rotate_left((seed as usize) % n);
                xs.swap(0, n - 1);
            }
            prop_assert_eq!(a.to_bits(), exact_sum(xs.iter().copied()).to_bits());
        }

        #[test]
        fn integers_are_exact(xs in proptest::collection::vec(-1_000_000i64..1_000_000, 0..30)) {
            let want: i64 = xs.iter().sum();
            prop_assert_eq!(exact_sum(xs.iter().map(|&x| x as f64)), want as f64);
        }
    }
}

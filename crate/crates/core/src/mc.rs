//! Monte Carlo driver. Each trial gets its own seed split from the master
//! seed, so results depend only on the trial index and never on scheduling.

use crate::rng::split_seed;

/// Runs `n` trials one after another.
pub fn run_trials_sequential<T, F>(n: usize, master_seed: u64, trial: F) -> Vec<T>
where
    F: Fn(usize, u64) -> T,
{
    (0..n).map(|i| trial(i, split_seed(master_seed, i as u64))).collect()
}

/// Runs `n` trials on the rayon pool, returned in trial order.
#[cfg(feature = "parallel")]
pub fn run_trials_parallel<T, F>(n: usize, master_seed: u64, trial: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n)
        .into_par_iter()
        .map(|i| trial(i, split_seed(master_seed, i as u64)))
        .collect()
}

/// Parallel when the `parallel` feature is on, sequential otherwise.
pub fn run_trials<T, F>(n: usize, master_seed: u64, trial: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        run_trials_parallel(n, master_seed, trial)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_trials_sequential(n, master_seed, trial)
    }
}

/// Sample mean; zero for an empty slice.
pub fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for x in xs {
        s += x;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn draw(_: usize, seed: u64) -> u64 {
        rng_from_seed(seed).random()
    }

    #[test]
    fn order_and_values_do_not_depend_on_scheduling() {
        let a = run_trials_sequential(500, 9, draw);
        let b = run_trials(500, 9, draw);
        assert_eq!(a, b);
        #[cfg(feature = "parallel")]
        assert_eq!(a, run_trials_parallel(500, 9, draw));
    }

    #[test]
    fn trial_index_is_passed_through() {
        let v = run_trials(50, 1, |i, _| i);
        assert_eq!(v, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn mean_of_nothing_is_zero() {
        assert_eq!(mean([]), 0.0);
        assert_eq!(mean([1.0, 2.0, 3.0]), 2.0);
    }
}

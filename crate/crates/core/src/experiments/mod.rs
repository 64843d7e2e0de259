//! Deterministic Monte Carlo harness and experiment recipes.
//!
//! Trials are independent: trial `t` seeds its own generator from
//! `(master_seed, t)`. Parallel results are collected in trial order, and
//! folds run over fixed-size chunks that are merged in chunk order, so every
//! output is identical for any number of worker threads.

mod fit;
mod recipes;
mod table;

use rayon::prelude::*;

pub use crate::stats::Estimator;
pub use fit::{fit_line, fit_loglog, fit_semilog, Axes, FitResult};
pub use recipes::*;
pub use table::{format_real, Cell, Table};

use crate::error::Result;

/// Trials folded sequentially within one chunk.
pub const CHUNK: u64 = 64;

/// Runs `f` for every trial index and returns the results in trial order.
pub fn map_trials<T, F>(trials: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    (0..trials).into_par_iter().map(|t| f(t)).collect()
}

/// Folds trials into an accumulator. Trials `[c*CHUNK, (c+1)*CHUNK)` fold
/// into a fresh accumulator per chunk, and chunks merge left to right.
pub fn fold_trials<A, I, F, M>(trials: u64, init: I, fold: F, merge: M) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, u64) -> Result<()> + Sync,
    M: Fn(&mut A, &A),
{
    let chunks = trials.div_ceil(CHUNK);
    let parts: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = init();
            for t in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                fold(&mut acc, t)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut it = parts.into_iter();
    let mut total = it.next().unwrap_or_else(&init);
    for p in it {
        merge(&mut total, &p);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_is_independent_of_pool_size() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    fold_trials(
                        1000,
                        Estimator::new,
                        |e, t| {
                            e.push(((t * 7919) % 1013) as f64 / 17.0);
                            Ok(())
                        },
                        |a, b| a.merge(b),
                    )
                    .unwrap()
                })
        };
        let a = run(1);
        let b = run(3);
        assert_eq!(a.mean().to_bits(), b.mean().to_bits());
        assert_eq!(a.m2().to_bits(), b.m2().to_bits());
    }

    #[test]
    fn map_preserves_order() {
        let v = map_trials(300, |t| Ok(t * 2)).unwrap();
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i as u64));
    }

    #[test]
    fn zero_trials_give_empty_fold() {
        let e = fold_trials(0, Estimator::new, |_, _| Ok(()), |a, b| a.merge(b)).unwrap();
        assert_eq!(e.count(), 0);
    }
}

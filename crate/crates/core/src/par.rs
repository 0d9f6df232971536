//! Data-parallel helpers. With the `parallel` feature these run on rayon;
//! without it they fall back to plain sequential iteration with the same
//! output order.

/// Maps `f` over `items`, preserving order.
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Like [`map`], but on a dedicated pool of at most `threads` workers so
/// that outbound request concurrency stays bounded.
pub fn map_bounded<T, U, F>(items: &[T], threads: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let threads = threads.max(1);
        if threads == 1 || items.len() < 2 {
            return items.iter().map(f).collect();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
            Err(e) => {
                tracing::warn!(error = %e, "thread pool unavailable, running sequentially");
                items.iter().map(f).collect()
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        items.iter().map(f).collect()
    }
}

/// Folds `items` into per-chunk accumulators and merges them. `merge` must be
/// associative for the result to match a sequential fold.
pub fn fold<T, A, Id, F, M>(items: &[T], identity: Id, fold_op: F, merge: M) -> A
where
    T: Sync,
    A: Send,
    Id: Fn() -> A + Sync + Send,
    F: Fn(A, &T) -> A + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items
            .par_iter()
            .fold(&identity, &fold_op)
            .reduce(&identity, merge)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = merge;
        items.iter().fold(identity(), fold_op)
    }
}

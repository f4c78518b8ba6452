//! Order-preserving work pools over independent subproblems.

use rayon::prelude::*;

/// Map `f` over `items` on the rayon pool. Results come back in input
/// order and the error reported is the one with the lowest index, so the
/// outcome does not depend on scheduling.
pub fn par_map<T, U, E, F>(items: &[T], f: F) -> Result<Vec<U>, E>
where
    T: Sync,
    U: Send,
    E: Send,
    F: Fn(usize, &T) -> Result<U, E> + Sync + Send,
{
    let results: Vec<Result<U, E>> = items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect();
    results.into_iter().collect()
}

/// Configure the global pool once; `None` keeps rayon's default.
pub fn init_pool(threads: Option<usize>) -> Result<(), rayon::ThreadPoolBuildError> {
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build_global(),
        None => Ok(()),
    }
}

use rayon::prelude::*;

/// Order-preserving map with at most `parallelism` calls of `f` running at
/// once.
///
/// # Panics
///
/// If `parallelism` is zero.
pub fn bounded_map<T, R, F>(items: &[T], parallelism: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    assert!(parallelism >= 1, "parallelism must be at least 1");
    let workers = parallelism.min(items.len());
    if workers <= 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("worker pool");
    pool.install(|| {
        items
            .par_iter()
            .enumerate()
            .map(|(i, t)| f(i, t))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order() {
        let items: Vec<u32> = (0..500).collect();
        for p in [1, 2, 7, 64] {
            let out = bounded_map(&items, p, |i, x| (i as u32, x * 2));
            assert!(out.iter().enumerate().all(|(i, (j, y))| i as u32 == *j && *y == 2 * i as u32));
        }
    }

    #[test]
    fn empty_input() {
        let out: Vec<u8> = bounded_map(&[] as &[u8], 4, |_, x| *x);
        assert!(out.is_empty());
    }
}

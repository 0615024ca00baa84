//! Order-preserving map over independent work items (sweep cells, horizons).
//!
//! With the `parallel` feature the items run on a rayon pool; without it, or
//! with [`Execution::Sequential`], they run in order on the calling thread.
//! Results are always returned in input order, so outputs do not depend on
//! scheduling.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Global rayon pool.
    #[default]
    Parallel,
    ParallelWith {
        threads: usize,
    },
}

impl Execution {
    /// Maps a worker-count knob to an execution mode: 1 is sequential,
    /// 0 means "all cores".
    pub fn from_workers(workers: usize) -> Self {
        match workers {
            0 => Self::Parallel,
            1 => Self::Sequential,
            n => Self::ParallelWith { threads: n },
        }
    }
}

pub fn map_collect<T, R, F>(items: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        Execution::Sequential => items.iter().map(f).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        #[cfg(feature = "parallel")]
        Execution::ParallelWith { threads } => {
            use rayon::prelude::*;
            match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
                Err(_) => items.iter().map(f).collect(),
            }
        }
        #[cfg(not(feature = "parallel"))]
        _ => items.iter().map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order_in_every_mode() {
        let items: Vec<u64> = (0..200).collect();
        let expected: Vec<u64> = items.iter().map(|v| v * v).collect();
        for exec in [
            Execution::Sequential,
            Execution::Parallel,
            Execution::ParallelWith { threads: 3 },
        ] {
            assert_eq!(map_collect(&items, exec, |v| v * v), expected);
        }
    }

    #[test]
    fn worker_knob() {
        assert_eq!(Execution::from_workers(1), Execution::Sequential);
        assert_eq!(Execution::from_workers(0), Execution::Parallel);
        assert_eq!(
            Execution::from_workers(4),
            Execution::ParallelWith { threads: 4 }
        );
    }
}

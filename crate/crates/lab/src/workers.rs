use rayon::prelude::*;

use crate::error::LabError;

/// Thread pool for per-path work. Results come back in path order, so every
/// reduction downstream is independent of the worker count.
pub struct Workers {
    pool: rayon::ThreadPool,
}

impl Workers {
    /// `None` uses one worker per available core.
    pub fn new(threads: Option<usize>) -> Result<Self, LabError> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(t) = threads {
            if t == 0 {
                return Err(LabError::Output("--threads must be at least 1".into()));
            }
            builder = builder.num_threads(t);
        }
        let pool = builder.build().map_err(|e| LabError::Output(format!("thread pool: {e}")))?;
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    pub fn map<T, F>(&self, count: usize, f: F) -> Result<Vec<T>, LabError>
    where
        T: Send,
        F: Fn(u64) -> Result<T, LabError> + Sync,
    {
        self.pool.install(|| (0..count as u64).into_par_iter().map(&f).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let one = Workers::new(Some(1)).unwrap().map(100, |i| Ok(i * i)).unwrap();
        let four = Workers::new(Some(4)).unwrap().map(100, |i| Ok(i * i)).unwrap();
        assert_eq!(one, four);
        assert_eq!(one[7], 49);
    }

    #[test]
    fn first_error_propagates() {
        let w = Workers::new(Some(2)).unwrap();
        let r: Result<Vec<u64>, _> = w.map(10, |i| if i == 5 { Err(LabError::Output("x".into())) } else { Ok(i) });
        assert!(r.is_err());
        assert!(Workers::new(Some(0)).is_err());
    }
}

//! Deterministic parallel task execution for the evaluation harness.
//!
//! Tasks are independent (model, fold, seed) cells with their own derived
//! RNG streams; results land in slots indexed by task id, so the assembled
//! output is identical for any worker count.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Runs `f` over `0..n_tasks` on up to `threads` workers, preserving task
/// order in the result vector. The first error wins (by task index).
pub fn run_indexed<T, E, F>(n_tasks: usize, threads: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync,
{
    let workers = threads.max(1).min(n_tasks.max(1));
    let results: Mutex<Vec<Option<Result<T, E>>>> =
        Mutex::new((0..n_tasks).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let task = next.fetch_add(1, Ordering::SeqCst);
                if task >= n_tasks {
                    break;
                }
                let out = f(task);
                results.lock().expect("runner poisoned").insert_at(task, out);
            });
        }
    });
    let slots = results.into_inner().expect("runner poisoned");
    let mut out = Vec::with_capacity(n_tasks);
    let mut first_err: Option<(usize, E)> = None;
    for (i, slot) in slots.into_iter().enumerate() {
        match slot.expect("every task ran") {
            Ok(v) => out.push(v),
            Err(e) => {
                if first_err.as_ref().map(|(j, _)| i < *j).unwrap_or(true) {
                    first_err = Some((i, e));
                }
            }
        }
    }
    if let Some((_, e)) = first_err {
        return Err(e);
    }
    Ok(out)
}

trait InsertAt<T> {
    fn insert_at(&mut self, idx: usize, value: T);
}

impl<T> InsertAt<T> for Vec<Option<T>> {
    fn insert_at(&mut self, idx: usize, value: T) {
        self[idx] = Some(value);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order_for_any_worker_count() {
        for threads in [1, 2, 4] {
            let out: Vec<usize> =
                run_indexed(17, threads, |i| Ok::<_, ()>(i * i)).unwrap();
            assert_eq!(out, (0..17).map(|i| i * i).collect::<Vec<_>>());
        }
    }

    #[test]
    fn first_error_by_task_index_wins() {
        let err = run_indexed::<usize, usize, _>(10, 3, |i| {
            if i >= 4 {
                Err(i)
            } else {
                Ok(i)
            }
        })
        .unwrap_err();
        assert_eq!(err, 4);
    }
}

//! Fixed-size worker pool over independent jobs. Workers share nothing;
//! results are handed to the caller's sink on the calling thread in job
//! order, so output files are identical for any worker count.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

/// Runs `work` on every item with `jobs` threads. `sink` sees results in
/// item order; returning `false` from it stops scheduling new items.
pub fn run_ordered<I, R, W, S>(items: &[I], jobs: usize, work: W, mut sink: S)
where
    I: Sync,
    R: Send,
    W: Fn(&I) -> R + Sync,
    S: FnMut(usize, R) -> bool,
{
    if items.is_empty() {
        return;
    }
    let next = AtomicUsize::new(0);
    let stop = std::sync::atomic::AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<(usize, R)>();
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, items.len()) {
            let tx = tx.clone();
            let (next, stop, work) = (&next, &stop, &work);
            scope.spawn(move || loop {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                if tx.send((i, work(&items[i]))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut pending = BTreeMap::new();
        let mut expected = 0;
        for (i, r) in rx {
            pending.insert(i, r);
            while let Some(r) = pending.remove(&expected) {
                if !sink(expected, r) {
                    stop.store(true, Ordering::Relaxed);
                    return;
                }
                expected += 1;
            }
        }
    });
}

//! High-water mark accounting for matrix buffers.
//!
//! Every [`Matrix`](super::Matrix) registers its buffer size with the
//! counters of the thread that allocates it. Counters are thread-local, so a
//! training run confined to one thread sees only its own allocations.

use std::cell::Cell;

thread_local! {
    static CURRENT: Cell<usize> = const { Cell::new(0) };
    static PEAK: Cell<usize> = const { Cell::new(0) };
}

pub(crate) fn track_alloc(bytes: usize) {
    CURRENT.with(|c| {
        let now = c.get() + bytes;
        c.set(now);
        PEAK.with(|p| {
            if now > p.get() {
                p.set(now);
            }
        });
    });
}

pub(crate) fn track_free(bytes: usize) {
    // buffers freed on a different thread than they were allocated on can
    // push this below zero
    CURRENT.with(|c| c.set(c.get().saturating_sub(bytes)));
}

/// Bytes of matrix storage currently live on this thread.
pub fn current_bytes() -> usize {
    CURRENT.with(Cell::get)
}

/// Largest value [`current_bytes`] reached since the last [`reset_peak`].
pub fn peak_bytes() -> usize {
    PEAK.with(Cell::get)
}

/// Restart peak tracking from the current live size.
pub fn reset_peak() {
    let now = current_bytes();
    PEAK.with(|p| p.set(now));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Matrix;

    #[test]
    fn peak_follows_live_buffers() {
        reset_peak();
        let base = current_bytes();
        {
            let _a = Matrix::zeros(10, 10);
            assert_eq!(current_bytes(), base + 800);
            let _b = Matrix::zeros(5, 5);
        }
        assert_eq!(current_bytes(), base);
        assert_eq!(peak_bytes(), base + 1000);
        reset_peak();
        assert_eq!(peak_bytes(), base);
    }
}

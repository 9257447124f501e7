//! Expression-size cap.
//!
//! Any polynomial that grows past the active limit aborts the running
//! computation by unwinding with an [`EngineLimit`] payload, which
//! [`with_limit`] turns back into an error. Without an active limit nothing
//! is checked.

use std::cell::Cell;
use std::panic::{self, AssertUnwindSafe};
use std::sync::Once;

pub const DEFAULT_MAX_SIZE: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("expression size limit exceeded: {size} monomials (limit {limit})")]
pub struct EngineLimit {
    pub size: usize,
    pub limit: usize,
}

thread_local! {
    static LIMIT: Cell<usize> = const { Cell::new(usize::MAX) };
    static PEAK: Cell<usize> = const { Cell::new(0) };
}

pub fn check_size(n: usize) {
    PEAK.with(|p| {
        if n > p.get() {
            p.set(n)
        }
    });
    let limit = LIMIT.with(|l| l.get());
    if n > limit {
        panic::panic_any(EngineLimit { size: n, limit });
    }
}

/// Largest polynomial size seen on this thread since the last reset.
pub fn peak() -> usize {
    PEAK.with(|p| p.get())
}

pub fn reset_peak() {
    PEAK.with(|p| p.set(0));
}

fn install_quiet_hook() {
    static ONCE: Once = Once::new();
    ONCE.call_once(|| {
        let prev = panic::take_hook();
        panic::set_hook(Box::new(move |info| {
            if info.payload().downcast_ref::<EngineLimit>().is_none() {
                prev(info);
            }
        }));
    });
}

/// Runs `f` with the size cap set to `limit`.
pub fn with_limit<R>(limit: usize, f: impl FnOnce() -> R) -> Result<R, EngineLimit> {
    install_quiet_hook();
    let prev = LIMIT.with(|l| l.replace(limit));
    let out = panic::catch_unwind(AssertUnwindSafe(f));
    LIMIT.with(|l| l.set(prev));
    match out {
        Ok(r) => Ok(r),
        Err(payload) => match payload.downcast::<EngineLimit>() {
            Ok(e) => Err(*e),
            Err(other) => panic::resume_unwind(other),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limit_is_reported_not_panicked() {
        let r = with_limit(10, || check_size(11));
        assert_eq!(r, Err(EngineLimit { size: 11, limit: 10 }));
        assert!(with_limit(10, || check_size(5)).is_ok());
    }
}

//! Access auditing for ground-truth quantities.
//!
//! Everything a deployed receiver cannot know (the true channel, its paths,
//! the noise variance) is held in an [`Oracle`]. Reading it inside a
//! [`blind_scope`] bumps a thread-local violation counter, which lets a
//! harness prove that a blind predictor never touched ground truth.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

thread_local! {
    static BLIND_DEPTH: Cell<usize> = const { Cell::new(0) };
    static VIOLATIONS: Cell<u64> = const { Cell::new(0) };
}

/// Ground-truth value whose reads are audited.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Oracle<T>(T);

impl<T> Oracle<T> {
    pub fn new(value: T) -> Self {
        Self(value)
    }

    /// Read the value. Counted as a violation when called inside a blind scope.
    pub fn reveal(&self) -> &T {
        if in_blind_scope() {
            VIOLATIONS.with(|v| v.set(v.get() + 1));
        }
        &self.0
    }

    pub fn into_inner(self) -> T {
        if in_blind_scope() {
            VIOLATIONS.with(|v| v.set(v.get() + 1));
        }
        self.0
    }
}

pub fn in_blind_scope() -> bool {
    BLIND_DEPTH.with(|d| d.get() > 0)
}

/// Run `f` as a blind computation and return its result together with the
/// number of oracle reads it performed.
pub fn blind_scope<R>(f: impl FnOnce() -> R) -> (R, u64) {
    struct Guard;
    impl Drop for Guard {
        fn drop(&mut self) {
            BLIND_DEPTH.with(|d| d.set(d.get() - 1));
        }
    }
    let before = VIOLATIONS.with(|v| v.get());
    BLIND_DEPTH.with(|d| d.set(d.get() + 1));
    let out = {
        let _guard = Guard;
        f()
    };
    let after = VIOLATIONS.with(|v| v.get());
    (out, after - before)
}

//! Exact sliding-window extremum filters.
//!
//! A sample stamped `k` stays in the window while `k > now - window`. The deque is
//! kept monotone, so the front is always the extremum of the retained samples.

use std::collections::VecDeque;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Max,
    Min,
}

#[derive(Clone, Debug)]
pub struct WindowedFilter<V> {
    kind: Kind,
    window: u64,
    samples: VecDeque<(u64, V)>,
}

impl<V: PartialOrd + Copy> WindowedFilter<V> {
    pub fn max(window: u64) -> Self {
        Self::with_kind(Kind::Max, window)
    }

    pub fn min(window: u64) -> Self {
        Self::with_kind(Kind::Min, window)
    }

    fn with_kind(kind: Kind, window: u64) -> Self {
        assert!(window > 0);
        WindowedFilter {
            kind,
            window,
            samples: VecDeque::new(),
        }
    }

    fn dominates(&self, a: V, b: V) -> bool {
        match self.kind {
            Kind::Max => a >= b,
            Kind::Min => a <= b,
        }
    }

    /// Drops samples that left the window as of `now`.
    pub fn expire(&mut self, now: u64) {
        while let Some(&(stamp, _)) = self.samples.front() {
            if stamp + self.window <= now {
                self.samples.pop_front();
            } else {
                break;
            }
        }
    }

    pub fn update(&mut self, now: u64, value: V) {
        self.expire(now);
        while let Some(&(_, back)) = self.samples.back() {
            if self.dominates(value, back) {
                self.samples.pop_back();
            } else {
                break;
            }
        }
        self.samples.push_back((now, value));
    }

    pub fn get(&self) -> Option<V> {
        self.samples.front().map(|&(_, v)| v)
    }

    /// Stamp of the sample currently holding the extremum.
    pub fn best_stamp(&self) -> Option<u64> {
        self.samples.front().map(|&(s, _)| s)
    }

    pub fn reset(&mut self) {
        self.samples.clear();
    }
}

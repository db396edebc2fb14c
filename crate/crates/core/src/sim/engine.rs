use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::time::Duration;

use super::time::SimTime;

/// Identifies a scheduled event by its position in the total `(fire_time, sequence)` order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventHandle {
    pub fire_time: SimTime,
    pub sequence: u64,
}

struct Entry<E> {
    key: EventHandle,
    payload: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.cmp(&other.key)
    }
}

/// Single-threaded discrete-event queue with a simulated clock.
///
/// Events fire in `(fire_time, sequence)` order, where `sequence` is the insertion
/// counter, so events scheduled for the same instant fire in the order they were
/// scheduled.
pub struct Scheduler<E> {
    now: SimTime,
    next_sequence: u64,
    heap: BinaryHeap<Reverse<Entry<E>>>,
    last_fired: Option<EventHandle>,
    fired: u64,
}

impl<E> Default for Scheduler<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Scheduler<E> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            next_sequence: 0,
            heap: BinaryHeap::new(),
            last_fired: None,
            fired: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.heap.len()
    }

    pub fn fired(&self) -> u64 {
        self.fired
    }

    /// Queues `payload` to fire at `fire_time`.
    ///
    /// Scheduling in the past is a programming error and aborts the run.
    pub fn schedule(&mut self, fire_time: SimTime, payload: E) -> EventHandle {
        assert!(
            fire_time >= self.now,
            "event scheduled in the past: {fire_time} < now {}",
            self.now
        );
        let key = EventHandle {
            fire_time,
            sequence: self.next_sequence,
        };
        self.next_sequence += 1;
        self.heap.push(Reverse(Entry { key, payload }));
        key
    }

    pub fn schedule_in(&mut self, delay: Duration, payload: E) -> EventHandle {
        self.schedule(self.now + delay, payload)
    }

    /// Pops the next event if it fires no later than `end`, advancing the clock to it.
    pub fn pop_until(&mut self, end: SimTime) -> Option<(EventHandle, E)> {
        if self.heap.peek()?.0.key.fire_time > end {
            return None;
        }
        let Reverse(Entry { key, payload }) = self.heap.pop()?;
        debug_assert!(
            self.last_fired.is_none_or(|last| last < key),
            "event {key:?} fired out of order"
        );
        self.last_fired = Some(key);
        self.now = key.fire_time;
        self.fired += 1;
        Some((key, payload))
    }

    /// Fires every event with `fire_time <= end` in order, then leaves the clock at `end`.
    ///
    /// The handler may schedule further events, including at the current instant;
    /// those fire in the same call once the current handler returns.
    pub fn run_until<F>(&mut self, end: SimTime, mut handler: F) -> SimTime
    where
        F: FnMut(&mut Self, EventHandle, E),
    {
        while let Some((key, payload)) = self.pop_until(end) {
            handler(self, key, payload);
        }
        self.now = self.now.max(end);
        self.now
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn future_event_fires_at_its_time() {
        let mut s = Scheduler::new();
        s.run_until(SimTime::from_nanos(3), |_, _, _: ()| {});
        s.schedule(SimTime::from_nanos(5), ());
        let mut at = Vec::new();
        s.run_until(SimTime::from_nanos(10), |s, _, ()| at.push(s.now()));
        assert_eq!(at, vec![SimTime::from_nanos(5)]);
    }

    #[test]
    fn equal_times_fire_in_insertion_order() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::from_nanos(5), 'A');
        s.schedule(SimTime::from_nanos(5), 'B');
        let mut order = Vec::new();
        s.run_until(SimTime::from_nanos(5), |_, _, e| order.push(e));
        assert_eq!(order, vec!['A', 'B']);
    }

    #[test]
    #[should_panic(expected = "scheduled in the past")]
    fn scheduling_in_the_past_is_fatal() {
        let mut s = Scheduler::new();
        s.run_until(SimTime::from_nanos(3), |_, _, _: ()| {});
        s.schedule(SimTime::from_nanos(2), ());
    }

    #[test]
    fn empty_queue_advances_clock_to_end() {
        let mut s = Scheduler::<()>::new();
        let end = s.run_until(SimTime::from_nanos(10), |_, _, _| {});
        assert_eq!(end, SimTime::from_nanos(10));
        assert_eq!(s.fired(), 0);
    }

    #[test]
    fn stops_at_end() {
        let mut s = Scheduler::new();
        for t in 1..=3 {
            s.schedule(SimTime::from_nanos(t), t);
        }
        let mut fired = Vec::new();
        let clock = s.run_until(SimTime::from_nanos(2), |_, _, e| fired.push(e));
        assert_eq!(fired, vec![1, 2]);
        assert_eq!(clock, SimTime::from_nanos(2));
        assert_eq!(s.pending(), 1);
    }

    #[test]
    fn zero_delay_follow_up_fires_after_current_handler() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::from_nanos(1), "first");
        s.schedule(SimTime::from_nanos(1), "second");
        let mut log = Vec::new();
        s.run_until(SimTime::from_nanos(5), |s, _, e| {
            log.push(e);
            if e == "first" {
                s.schedule_in(Duration::ZERO, "follow-up");
            }
        });
        assert_eq!(log, vec!["first", "second", "follow-up"]);
    }
}

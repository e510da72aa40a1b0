use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{sync_channel, Receiver};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use super::{Generator, SampledEvent, StreamState};
use crate::error::Result;
use crate::scalar::Real;

/// Events the emitter may run ahead of a slow consumer.
pub const QUEUE_CAPACITY: usize = 10_000;

/// Wall clock in epoch milliseconds.
pub trait Clock: Send + 'static {
    fn now_ms(&self) -> i64;
    fn sleep_until_ms(&mut self, t: i64);
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> i64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as i64)
    }

    fn sleep_until_ms(&mut self, t: i64) {
        loop {
            let left = t - self.now_ms();
            if left <= 0 {
                return;
            }
            std::thread::sleep(Duration::from_millis(left.min(200) as u64));
        }
    }
}

/// Clock that jumps straight to each deadline.
#[derive(Clone, Copy, Debug, Default)]
pub struct SimulatedClock {
    pub now: i64,
}

impl Clock for SimulatedClock {
    fn now_ms(&self) -> i64 {
        self.now
    }

    fn sleep_until_ms(&mut self, t: i64) {
        self.now = self.now.max(t);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Emitted<T> {
    pub event: SampledEvent,
    pub scheduled_ms: i64,
    pub emitted_ms: i64,
    /// State right after this event, for resuming.
    pub state: StreamState<T>,
}

pub struct RealtimeHandle<T> {
    pub events: Receiver<Result<Emitted<T>>>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl<T> RealtimeHandle<T> {
    pub fn stop_flag(&self) -> Arc<AtomicBool> {
        self.stop.clone()
    }

    /// Asks the emitter to stop and waits for it.
    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        while self.events.try_recv().is_ok() {}
        drop(self.events);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Spawns the emitter thread: each event is sampled, held until its timestamp,
/// then sent on a bounded queue. Stops on `max_events`, on a stop request or
/// when the receiver is dropped.
pub fn spawn_realtime<T: Real, C: Clock>(
    gen: Generator<T>,
    mut state: StreamState<T>,
    mut clock: C,
    max_events: Option<u64>,
) -> RealtimeHandle<T> {
    let (tx, rx) = sync_channel(QUEUE_CAPACITY);
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    let thread = std::thread::spawn(move || {
        let mut sent = 0u64;
        while !flag.load(Ordering::SeqCst) && max_events.map_or(true, |m| sent < m) {
            let ev = match gen.step(&mut state) {
                Ok(ev) => ev,
                Err(e) => {
                    let _ = tx.send(Err(e));
                    return;
                }
            };
            let scheduled_ms = ev.timestamp.saturating_mul(1000);
            while clock.now_ms() < scheduled_ms {
                if flag.load(Ordering::SeqCst) {
                    return;
                }
                let step_to = scheduled_ms.min(clock.now_ms() + 200);
                clock.sleep_until_ms(step_to);
            }
            let emitted_ms = clock.now_ms();
            if tx.send(Ok(Emitted { event: ev, scheduled_ms, emitted_ms, state: state.clone() })).is_err() {
                return;
            }
            sent += 1;
        }
    });
    RealtimeHandle { events: rx, stop, thread: Some(thread) }
}

//! Wall-clock chase timing on the host.

use std::hint::black_box;
use std::time::Instant;

use latile_core::probe::chase;
use latile_core::{ChaseBuffer, ChaseTimer};

/// Times chases with the monotonic clock.
#[derive(Debug, Clone)]
pub struct InstantTimer {
    resolution_ns: f64,
}

impl InstantTimer {
    pub fn new() -> Self {
        InstantTimer {
            resolution_ns: estimate_resolution_ns(),
        }
    }
}

impl Default for InstantTimer {
    fn default() -> Self {
        Self::new()
    }
}

impl ChaseTimer for InstantTimer {
    fn resolution_ns(&self) -> f64 {
        self.resolution_ns
    }

    fn run(&mut self, buffer: &ChaseBuffer, traversals: usize) -> f64 {
        let steps = traversals.saturating_mul(buffer.len());
        let start = Instant::now();
        black_box(chase(buffer.slots(), 0, steps));
        start.elapsed().as_nanos() as f64
    }
}

/// Smallest nonzero step between consecutive clock reads, in ns (at least 1).
pub fn estimate_resolution_ns() -> f64 {
    let mut best = u128::MAX;
    for _ in 0..2000 {
        let a = Instant::now();
        let mut b = Instant::now();
        while b == a {
            b = Instant::now();
        }
        best = best.min((b - a).as_nanos());
    }
    best.max(1) as f64
}

/// Pins the calling thread to the CPU it is running on. Best effort: returns
/// whether the affinity was applied.
#[cfg(target_os = "linux")]
pub fn pin_current_thread() -> bool {
    // SAFETY: cpu_set_t is plain data; the calls only read and write the
    // set we own and act on the calling thread (pid 0).
    unsafe {
        let cpu = libc::sched_getcpu();
        if cpu < 0 {
            return false;
        }
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_SET(cpu as usize, &mut set);
        libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set) == 0
    }
}

#[cfg(not(target_os = "linux"))]
pub fn pin_current_thread() -> bool {
    false
}

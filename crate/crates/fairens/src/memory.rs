//! Per-thread allocation high-water marks.
//!
//! With the `tracking-allocator` feature the crate installs
//! [`TrackingAllocator`] globally. Each thread keeps its own live-byte
//! counter, so concurrent jobs do not see each other's allocations. Memory
//! freed on another thread than the one that allocated it is credited to the
//! freeing thread.

use std::alloc::{GlobalAlloc, Layout, System};
use std::cell::Cell;
use std::sync::atomic::{AtomicBool, Ordering};

pub struct TrackingAllocator;

static ACTIVE: AtomicBool = AtomicBool::new(false);

thread_local! {
    static LIVE: Cell<isize> = const { Cell::new(0) };
    static PEAK: Cell<isize> = const { Cell::new(0) };
}

fn record(delta: isize) {
    let _ = LIVE.try_with(|live| {
        let v = live.get() + delta;
        live.set(v);
        let _ = PEAK.try_with(|p| {
            if v > p.get() {
                p.set(v)
            }
        });
    });
}

unsafe impl GlobalAlloc for TrackingAllocator {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc(layout);
        if !p.is_null() {
            ACTIVE.store(true, Ordering::Relaxed);
            record(layout.size() as isize);
        }
        p
    }

    unsafe fn alloc_zeroed(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc_zeroed(layout);
        if !p.is_null() {
            ACTIVE.store(true, Ordering::Relaxed);
            record(layout.size() as isize);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        record(-(layout.size() as isize));
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let p = System.realloc(ptr, layout, new_size);
        if !p.is_null() {
            record(new_size as isize - layout.size() as isize);
        }
        p
    }
}

/// Whether allocations are being counted in this process.
pub fn tracking() -> bool {
    ACTIVE.load(Ordering::Relaxed)
}

/// Measures the peak of this thread's live bytes above the level at start.
#[derive(Debug)]
pub struct MemoryWindow {
    base: isize,
}

impl MemoryWindow {
    pub fn start() -> Self {
        let base = LIVE.with(Cell::get);
        PEAK.with(|p| p.set(base));
        MemoryWindow { base }
    }

    pub fn peak_bytes(&self) -> usize {
        (PEAK.with(Cell::get) - self.base).max(0) as usize
    }

    pub fn peak_mb(&self) -> f64 {
        self.peak_bytes() as f64 / (1024.0 * 1024.0)
    }
}

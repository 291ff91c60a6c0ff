//! Wall-clock timing; reads zero on targets without a system clock.

#[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
pub(crate) struct Timer(std::time::Instant);

#[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
impl Timer {
    pub(crate) fn start() -> Self {
        Self(std::time::Instant::now())
    }

    pub(crate) fn elapsed_ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}

#[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
pub(crate) struct Timer;

#[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
impl Timer {
    pub(crate) fn start() -> Self {
        Self
    }

    pub(crate) fn elapsed_ms(&self) -> f64 {
        0.0
    }
}

//! Shared fixtures for the benches.

use carbonflex::CarbonTrace;

/// Deterministic diurnal trace: hourly slots, base 100, amplitude 50.
pub fn diurnal_trace(days: u32) -> CarbonTrace {
    CarbonTrace::synthetic(days, 100.0, 50.0, 24.0, 0.0, 0).unwrap()
}

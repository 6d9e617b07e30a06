//! Carbon-intensity traces: CSV load/store, synthetic generation, window
//! statistics.
//!
//! A trace is a gap-free sequence of equal-length slots, each carrying the
//! average grid carbon intensity over that slot in gCO2eq/kWh.

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::io::BufRead;

/// Exact header required on every trace CSV.
pub const CSV_HEADER: &str = "timestamp,carbon_intensity_gco2_per_kwh";

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace is empty")]
    Empty,
    #[error("row 1: expected header `{CSV_HEADER}`, got `{0}`")]
    BadHeader(String),
    #[error("row {row}: expected `timestamp,intensity`, got `{text}`")]
    MalformedRow { row: usize, text: String },
    #[error("row {row}: bad timestamp `{text}`")]
    BadTimestamp { row: usize, text: String },
    #[error("row {row}: intensity `{text}` is not a finite non-negative number")]
    BadIntensity { row: usize, text: String },
    #[error("duplicate timestamp {0}")]
    DuplicateTimestamp(DateTime<Utc>),
    #[error("gap or irregular spacing at {at}: expected {expected_s}s after previous row, found {found_s}s")]
    IrregularSpacing {
        at: DateTime<Utc>,
        expected_s: f64,
        found_s: f64,
    },
    #[error("slot duration must be positive")]
    BadSlotDuration,
    #[error("intensity at slot {slot} is not finite and non-negative: {value}")]
    BadSlotIntensity { slot: usize, value: f64 },
    #[error("window [{start}, {start}+{len}) out of bounds for trace of {slots} slots")]
    WindowOutOfBounds {
        start: usize,
        len: usize,
        slots: usize,
    },
    #[error("empty window")]
    EmptyWindow,
    #[error("bad synthetic trace parameter: {0}")]
    BadSynthParameter(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A gap-free carbon-intensity time series with uniform slot length.
#[derive(Debug, Clone, PartialEq)]
pub struct CarbonTrace {
    start_time: DateTime<Utc>,
    slot_duration_hours: f64,
    intensities: Vec<f64>,
}

impl CarbonTrace {
    /// Builds a trace from raw parts, validating every intensity.
    pub fn new(
        start_time: DateTime<Utc>,
        slot_duration_hours: f64,
        intensities: Vec<f64>,
    ) -> Result<Self, TraceError> {
        if intensities.is_empty() {
            return Err(TraceError::Empty);
        }
        if !(slot_duration_hours > 0.0 && slot_duration_hours.is_finite()) {
            return Err(TraceError::BadSlotDuration);
        }
        for (slot, &v) in intensities.iter().enumerate() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(TraceError::BadSlotIntensity { slot, value: v });
            }
        }
        Ok(Self {
            start_time,
            slot_duration_hours,
            intensities,
        })
    }

    /// Parses and validates a trace CSV. Rows may arrive unsorted; spacing
    /// must be uniform once sorted and duplicates or gaps are hard errors.
    /// Slot duration is inferred from the first two timestamps (1 h for a
    /// single-row trace).
    pub fn from_csv<R: BufRead>(reader: R) -> Result<Self, TraceError> {
        let mut rows: Vec<(DateTime<Utc>, f64)> = Vec::new();
        let mut saw_header = false;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let row = idx + 1;
            let text = line.trim_end_matches('\r');
            if row == 1 {
                if text != CSV_HEADER {
                    return Err(TraceError::BadHeader(text.to_string()));
                }
                saw_header = true;
                continue;
            }
            if text.is_empty() {
                continue;
            }
            let (ts_text, value_text) =
                text.split_once(',').ok_or_else(|| TraceError::MalformedRow {
                    row,
                    text: text.to_string(),
                })?;
            if value_text.contains(',') {
                return Err(TraceError::MalformedRow {
                    row,
                    text: text.to_string(),
                });
            }
            let ts = DateTime::parse_from_rfc3339(ts_text.trim())
                .map(|t| t.with_timezone(&Utc))
                .map_err(|_| TraceError::BadTimestamp {
                    row,
                    text: ts_text.to_string(),
                })?;
            let value: f64 = value_text
                .trim()
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| TraceError::BadIntensity {
                    row,
                    text: value_text.trim().to_string(),
                })?;
            rows.push((ts, value));
        }
        if !saw_header || rows.is_empty() {
            return Err(TraceError::Empty);
        }
        rows.sort_by_key(|(ts, _)| *ts);

        let slot_ms = if rows.len() >= 2 {
            let ms = (rows[1].0 - rows[0].0).num_milliseconds();
            if ms == 0 {
                return Err(TraceError::DuplicateTimestamp(rows[1].0));
            }
            ms
        } else {
            3_600_000
        };
        for pair in rows.windows(2) {
            let delta = (pair[1].0 - pair[0].0).num_milliseconds();
            if delta == 0 {
                return Err(TraceError::DuplicateTimestamp(pair[1].0));
            }
            if delta != slot_ms {
                return Err(TraceError::IrregularSpacing {
                    at: pair[1].0,
                    expected_s: slot_ms as f64 / 1000.0,
                    found_s: delta as f64 / 1000.0,
                });
            }
        }

        let start_time = rows[0].0;
        let intensities = rows.into_iter().map(|(_, v)| v).collect();
        Self::new(start_time, slot_ms as f64 / 3_600_000.0, intensities)
    }

    /// Renders the trace back to CSV. `from_csv(to_csv(t)) == t` for any
    /// trace whose slot length is a whole number of milliseconds.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.intensities.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        let slot_ms = (self.slot_duration_hours * 3_600_000.0).round() as i64;
        for (i, v) in self.intensities.iter().enumerate() {
            let ts = self.start_time + Duration::milliseconds(slot_ms * i as i64);
            out.push_str(&ts.format("%Y-%m-%dT%H:%M:%SZ").to_string());
            out.push(',');
            out.push_str(&format!("{v}"));
            out.push('\n');
        }
        out
    }

    /// Deterministic synthetic diurnal trace with hourly slots:
    /// `max(0, base - amplitude*cos(2*pi*i/period_hours) + N(0, noise_std))`.
    /// Slot 0 sits at the bottom of the cycle, `period_hours/2` at the top.
    pub fn synthetic(
        days: u32,
        base: f64,
        amplitude: f64,
        period_hours: f64,
        noise_std: f64,
        seed: u64,
    ) -> Result<Self, TraceError> {
        if days == 0 {
            return Err(TraceError::BadSynthParameter("days must be >= 1"));
        }
        if !(base.is_finite() && base >= 0.0) {
            return Err(TraceError::BadSynthParameter("base must be >= 0"));
        }
        if !(amplitude.is_finite() && amplitude >= 0.0 && amplitude <= base) {
            return Err(TraceError::BadSynthParameter(
                "amplitude must be in [0, base]",
            ));
        }
        if !(period_hours.is_finite() && period_hours > 0.0) {
            return Err(TraceError::BadSynthParameter("period_hours must be > 0"));
        }
        if !(noise_std.is_finite() && noise_std >= 0.0) {
            return Err(TraceError::BadSynthParameter("noise_std must be >= 0"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_std)
            .map_err(|_| TraceError::BadSynthParameter("noise_std must be >= 0"))?;
        let slots = days as usize * 24;
        let intensities = (0..slots)
            .map(|i| {
                let phase = 2.0 * std::f64::consts::PI * i as f64 / period_hours;
                let noise = if noise_std > 0.0 {
                    normal.sample(&mut rng)
                } else {
                    0.0
                };
                (base - amplitude * phase.cos() + noise).max(0.0)
            })
            .collect();
        let start_time = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();
        Self::new(start_time, 1.0, intensities)
    }

    pub fn start_time(&self) -> DateTime<Utc> {
        self.start_time
    }

    pub fn slot_duration_hours(&self) -> f64 {
        self.slot_duration_hours
    }

    pub fn len(&self) -> usize {
        self.intensities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensities.is_empty()
    }

    /// Intensity of one slot, in gCO2eq/kWh.
    pub fn intensity(&self, slot: usize) -> f64 {
        self.intensities[slot]
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    fn check_window(&self, start: usize, len: usize) -> Result<(), TraceError> {
        if len == 0 {
            return Err(TraceError::EmptyWindow);
        }
        if start + len > self.intensities.len() {
            return Err(TraceError::WindowOutOfBounds {
                start,
                len,
                slots: self.intensities.len(),
            });
        }
        Ok(())
    }

    /// Mean intensity over `len` slots from `start`.
    pub fn window_mean(&self, start: usize, len: usize) -> Result<f64, TraceError> {
        self.check_window(start, len)?;
        let sum: f64 = self.intensities[start..start + len].iter().sum();
        Ok(sum / len as f64)
    }

    pub fn window(&self, start: usize, len: usize) -> Result<&[f64], TraceError> {
        self.check_window(start, len)?;
        Ok(&self.intensities[start..start + len])
    }
}

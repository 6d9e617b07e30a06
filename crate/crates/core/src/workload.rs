//! Job descriptions for the three flexibility mechanisms.
//!
//! Work is measured in slot-equivalents at the job's reference configuration
//! (one node, full frequency): a job with `work = 24` on an hourly trace is
//! the canonical 24 h batch job.

use crate::power::{ScalabilityProfile, ServerPowerModel};
use crate::{slot_ceil, slot_floor};

#[derive(Debug, thiserror::Error)]
pub enum WorkloadError {
    #[error("invalid job: {0}")]
    BadJob(String),
}

fn positive(value: f64, what: &str) -> Result<f64, WorkloadError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(WorkloadError::BadJob(format!("{what} must be positive")))
    }
}

fn non_negative(value: f64, what: &str) -> Result<f64, WorkloadError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(WorkloadError::BadJob(format!("{what} must be >= 0")))
    }
}

/// A fixed-power batch job that can suspend and resume at slot boundaries,
/// paying a checkpoint on suspend and a restore on resume.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointableJob {
    pub duration_hours: f64,
    pub power_watts: f64,
    pub checkpoint_minutes: f64,
    pub restore_minutes: f64,
    /// Deadline as a multiple of the duration; 1.0 means no flexibility.
    pub slack_factor: f64,
}

impl CheckpointableJob {
    pub fn new(
        duration_hours: f64,
        power_watts: f64,
        checkpoint_minutes: f64,
        restore_minutes: f64,
        slack_factor: f64,
    ) -> Result<Self, WorkloadError> {
        positive(duration_hours, "duration_hours")?;
        positive(power_watts, "power_watts")?;
        non_negative(checkpoint_minutes, "checkpoint_minutes")?;
        non_negative(restore_minutes, "restore_minutes")?;
        if !(slack_factor.is_finite() && slack_factor >= 1.0) {
            return Err(WorkloadError::BadJob("slack_factor must be >= 1".into()));
        }
        Ok(Self {
            duration_hours,
            power_watts,
            checkpoint_minutes,
            restore_minutes,
            slack_factor,
        })
    }

    /// Slots available before the deadline: `floor(duration * slack / slot)`.
    pub fn deadline_slots(&self, slot_duration_hours: f64) -> usize {
        slot_floor(self.duration_hours * self.slack_factor / slot_duration_hours)
    }

    /// Slots the job must actually run: `ceil(duration / slot)`. The final
    /// one is consumed fractionally when the duration is not slot-aligned.
    pub fn execution_slots(&self, slot_duration_hours: f64) -> usize {
        slot_ceil(self.duration_hours / slot_duration_hours)
    }
}

/// A malleable job that waits for clean slots and runs on `k` nodes at once.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalableJob {
    /// Work in slot-equivalents on a single node.
    pub work: f64,
    pub per_node_power_watts: f64,
    pub profile: ScalabilityProfile,
}

impl ScalableJob {
    pub fn new(
        work: f64,
        per_node_power_watts: f64,
        profile: ScalabilityProfile,
    ) -> Result<Self, WorkloadError> {
        positive(work, "work")?;
        positive(per_node_power_watts, "per_node_power_watts")?;
        Ok(Self {
            work,
            per_node_power_watts,
            profile,
        })
    }

    /// The job may take no longer than its single-node run: `ceil(work)`
    /// slots.
    pub fn window_slots(&self) -> usize {
        slot_ceil(self.work)
    }
}

/// A job that runs continuously and modulates its frequency instead of
/// suspending.
#[derive(Debug, Clone, PartialEq)]
pub struct DvfsJob {
    /// Work in slot-equivalents at the server's top frequency.
    pub work: f64,
    /// Share of runtime insensitive to frequency.
    pub io_fraction: f64,
    pub server: ServerPowerModel,
}

impl DvfsJob {
    pub fn new(work: f64, io_fraction: f64, server: ServerPowerModel) -> Result<Self, WorkloadError> {
        positive(work, "work")?;
        if !(io_fraction.is_finite() && (0.0..=1.0).contains(&io_fraction)) {
            return Err(WorkloadError::BadJob("io_fraction must be in [0, 1]".into()));
        }
        Ok(Self {
            work,
            io_fraction,
            server,
        })
    }

    /// Window used for the frequency-switch threshold: the job's duration
    /// at full frequency.
    pub fn threshold_window_slots(&self) -> usize {
        slot_ceil(self.work)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn job(duration: f64, slack: f64) -> CheckpointableJob {
        CheckpointableJob::new(duration, 120.0, 10.0, 10.0, slack).unwrap()
    }

    #[test]
    fn deadline_and_execution_slots() {
        assert_eq!(job(24.0, 1.5).deadline_slots(1.0), 36);
        assert_eq!(job(24.0, 1.5).execution_slots(1.0), 24);
        assert_eq!(job(24.0, 1.0).deadline_slots(1.0), 24);
        assert_eq!(job(2.0, 3.0).deadline_slots(1.0), 6);
        assert_eq!(job(2.0, 3.0).execution_slots(1.0), 2);
    }

    #[test]
    fn fractional_duration_rounds_up_execution() {
        assert_eq!(job(2.5, 2.0).execution_slots(1.0), 3);
        assert_eq!(job(2.5, 2.0).deadline_slots(1.0), 5);
    }

    #[test]
    fn sub_hourly_slots() {
        assert_eq!(job(24.0, 2.0).deadline_slots(0.25), 192);
        assert_eq!(job(24.0, 2.0).execution_slots(0.25), 96);
    }

    #[test]
    fn slot_arithmetic_shrugs_off_float_noise() {
        // 0.8 * 30 = 24.000000000000004 in f64
        assert_eq!(job(0.8 * 30.0, 1.0).execution_slots(1.0), 24);
        assert_eq!(job(24.0, 1.5).deadline_slots(1.0), 36);
    }

    #[test]
    fn execution_fits_deadline_for_aligned_durations() {
        for slack in [1.0, 1.25, 1.5, 2.0, 3.0] {
            for duration in [1.0, 2.0, 24.0, 48.0] {
                let j = job(duration, slack);
                assert!(j.execution_slots(1.0) <= j.deadline_slots(1.0));
            }
        }
    }

    #[test]
    fn rejects_bad_fields() {
        assert!(CheckpointableJob::new(0.0, 120.0, 10.0, 10.0, 1.0).is_err());
        assert!(CheckpointableJob::new(24.0, -1.0, 10.0, 10.0, 1.0).is_err());
        assert!(CheckpointableJob::new(24.0, 120.0, -1.0, 10.0, 1.0).is_err());
        assert!(CheckpointableJob::new(24.0, 120.0, 10.0, 10.0, 0.9).is_err());
        assert!(DvfsJob::new(24.0, 1.5, ServerPowerModel::e5_2620v4()).is_err());
        assert!(DvfsJob::new(-1.0, 0.5, ServerPowerModel::e5_2620v4()).is_err());
    }

    #[test]
    fn scalable_window_is_single_node_duration() {
        let p = ScalabilityProfile::new(0.05).unwrap();
        let j = ScalableJob::new(24.0, 120.0, p).unwrap();
        assert_eq!(j.window_slots(), 24);
        let j = ScalableJob::new(10.5, 120.0, p).unwrap();
        assert_eq!(j.window_slots(), 11);
    }
}

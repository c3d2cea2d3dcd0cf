//! Launch and snapshot timing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::SessionConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotKind {
    First,
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedSnapshot {
    pub app_id: String,
    pub t: u64,
    pub kind: SnapshotKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScheduleError {
    #[error("window of {window_ms} ms is too short: first {app_id} snapshot falls at {t} ms")]
    WindowTooShort { app_id: String, t: u64, window_ms: u64 },
}

/// Launch time of each app, in suite order.
pub fn launch_times(config: &SessionConfig) -> Vec<(String, u64)> {
    config
        .app_suite
        .iter()
        .enumerate()
        .map(|(i, app)| (app.clone(), i as u64 * config.launch_spacing_ms))
        .collect()
}

/// One snapshot per app at `launch + base + U[-jitter, +jitter]`, then one
/// every `interval_ms` until the window closes. Sorted by time, suite order
/// on ties.
pub fn schedule_snapshots(config: &SessionConfig, window_ms: u64) -> Result<Vec<PlannedSnapshot>, ScheduleError> {
    let policy = config.snapshot_policy;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::new();
    for (app_id, launch) in launch_times(config) {
        let j = policy.jitter_ms as i64;
        let offset = policy.base_delay_ms as i64 + if j > 0 { rng.random_range(-j..=j) } else { 0 };
        let first = (launch as i64 + offset).max(0) as u64;
        if first > window_ms {
            return Err(ScheduleError::WindowTooShort {
                app_id,
                t: first,
                window_ms,
            });
        }
        out.push(PlannedSnapshot {
            app_id: app_id.clone(),
            t: first,
            kind: SnapshotKind::First,
        });
        if policy.interval_ms > 0 {
            let mut t = first + policy.interval_ms;
            while t <= window_ms {
                out.push(PlannedSnapshot {
                    app_id: app_id.clone(),
                    t,
                    kind: SnapshotKind::Periodic,
                });
                t += policy.interval_ms;
            }
        }
    }
    let order = |app: &str| config.app_suite.iter().position(|a| a == app).unwrap_or(usize::MAX);
    out.sort_by_key(|s| (s.t, order(&s.app_id)));
    Ok(out)
}

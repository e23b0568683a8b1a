use crate::error::{HybridError, Result};

/// Number of steps to reach `t_final` and the step index nearest to each
/// snapshot time. Snapshots are never interpolated in time.
pub fn step_schedule(dt: f64, t_final: f64, snapshot_times: &[f64]) -> Result<(usize, Vec<usize>)> {
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(HybridError::InvalidArgument(format!(
            "t_final must be >= 0, got {t_final}"
        )));
    }
    if t_final > 0.0 && !(dt > 0.0) {
        return Err(HybridError::InvalidArgument(format!("dt must be > 0, got {dt}")));
    }
    let steps = if t_final == 0.0 {
        0
    } else {
        (t_final / dt).round() as usize
    };
    let slack = 0.5 * dt.max(0.0) + 1e-12;
    let mut previous = f64::NEG_INFINITY;
    let mut indices = Vec::with_capacity(snapshot_times.len());
    for &t in snapshot_times {
        if !(t >= -1e-12 && t <= t_final + slack) {
            return Err(HybridError::InvalidArgument(format!(
                "snapshot time {t} outside [0, {t_final}]"
            )));
        }
        if t < previous {
            return Err(HybridError::InvalidArgument("snapshot times must be sorted".into()));
        }
        previous = t;
        let k = if dt > 0.0 { (t / dt).round() as usize } else { 0 };
        indices.push(k.min(steps));
    }
    Ok((steps, indices))
}

use super::RegError;

pub const DUTY_WINDOW_S: f64 = 3600.0;
pub const DUTY_LIMIT_S: f64 = 36.0;

/// Slack on the airtime total so a schedule that fills the budget exactly
/// is not refused because of rounding.
const EPS_S: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DutyDecision {
    Allowed,
    Denied,
}

/// Accepted transmissions as `(start, duration)` pairs in seconds, kept
/// sorted by start. Any window `(t - 3600, t]` holds at most 36 s of airtime.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DutyCycleLedger {
    intervals: Vec<(f64, f64)>,
}

impl DutyCycleLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    /// Airtime inside the window `(t - 3600, t]`.
    pub fn airtime_in_window(&self, t: f64) -> f64 {
        window_total(&self.intervals, t)
    }

    /// Largest airtime over every sliding window. The window total rises
    /// only while `t` is inside an interval and falls only while `t - 3600`
    /// is, so its maxima sit at interval ends or at starts plus one hour.
    pub fn max_window_airtime(&self) -> f64 {
        candidates(&self.intervals).map(|t| window_total(&self.intervals, t)).fold(0.0, f64::max)
    }

    pub fn request(&mut self, start: f64, duration_s: f64) -> Result<DutyDecision, RegError> {
        if !(duration_s > 0.0 && duration_s.is_finite() && start.is_finite()) {
            return Err(RegError::Config(format!("bad transmission start {start} s, duration {duration_s} s")));
        }
        let end = start + duration_s;
        if self.intervals.iter().any(|&(s, d)| start < s + d && s < end) {
            return Err(RegError::Overlap { start, end });
        }
        let mut trial = self.intervals.clone();
        let at = trial.partition_point(|&(s, _)| s < start);
        trial.insert(at, (start, duration_s));
        // Only windows ending in [start, end + 3600] can include the new interval.
        let worst = candidates(&trial)
            .filter(|&t| t >= start && t <= end + DUTY_WINDOW_S)
            .map(|t| window_total(&trial, t))
            .fold(0.0, f64::max);
        if worst > DUTY_LIMIT_S + EPS_S {
            return Ok(DutyDecision::Denied);
        }
        self.intervals = trial;
        Ok(DutyDecision::Allowed)
    }
}

fn window_total(intervals: &[(f64, f64)], t: f64) -> f64 {
    let lo = t - DUTY_WINDOW_S;
    intervals.iter().map(|&(s, d)| ((s + d).min(t) - s.max(lo)).max(0.0)).sum()
}

fn candidates(intervals: &[(f64, f64)]) -> impl Iterator<Item = f64> + '_ {
    intervals.iter().flat_map(|&(s, d)| [s + d, s + DUTY_WINDOW_S])
}

//! Mapping bucket timestamps to wall-clock features and evaluation buckets.

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

/// Converts bucket indices (`minutes_since_epoch / delta`) to local time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clock {
    pub delta_minutes: u32,
    #[serde(default)]
    pub utc_offset_minutes: i32,
}

impl Clock {
    pub fn new(delta_minutes: u32) -> Self {
        Self { delta_minutes, utc_offset_minutes: 0 }
    }

    pub fn local(&self, t: i64) -> NaiveDateTime {
        let minutes = t * self.delta_minutes as i64 + self.utc_offset_minutes as i64;
        DateTime::from_timestamp(minutes * 60, 0).expect("timestamp in chrono range").naive_utc()
    }

    pub fn hour_of_day(&self, t: i64) -> u32 {
        self.local(t).hour()
    }

    /// Monday = 0 … Sunday = 6.
    pub fn day_of_week(&self, t: i64) -> u32 {
        self.local(t).weekday().num_days_from_monday()
    }

    /// 0-based week of the month (days 1–7 are week 0).
    pub fn week_of_month(&self, t: i64) -> u32 {
        (self.local(t).day() - 1) / 7
    }

    pub fn date(&self, t: i64) -> NaiveDate {
        self.local(t).date()
    }

    pub fn steps_per_day(&self) -> usize {
        (24 * 60 / self.delta_minutes) as usize
    }

    /// Bucket index of local midnight at or before `t`.
    pub fn day_start(&self, t: i64) -> i64 {
        let local = self.local(t);
        let into_day = (local.hour() * 60 + local.minute()) as i64;
        t - into_day / self.delta_minutes as i64
    }

    /// (hour, day, week) each scaled linearly onto [−1, 1].
    pub fn time_features(&self, t: i64) -> [f64; 3] {
        let scale = |v: u32, max: u32| 2.0 * v as f64 / max as f64 - 1.0;
        [scale(self.hour_of_day(t), 23), scale(self.day_of_week(t), 6), scale(self.week_of_month(t), 4)]
    }
}

/// Evaluation partitions used in strategy reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Bucket {
    Peak,
    OffPeak,
    Weekdays,
    Weekend,
    Holiday,
    Overall,
}

impl Bucket {
    pub const ALL: [Bucket; 6] =
        [Bucket::Peak, Bucket::OffPeak, Bucket::Weekdays, Bucket::Weekend, Bucket::Holiday, Bucket::Overall];

    pub fn name(&self) -> &'static str {
        match self {
            Bucket::Peak => "peak",
            Bucket::OffPeak => "off-peak",
            Bucket::Weekdays => "weekdays",
            Bucket::Weekend => "weekend",
            Bucket::Holiday => "holiday",
            Bucket::Overall => "overall",
        }
    }
}

/// Peak hours are `[peak_start_hour, peak_end_hour)`; holidays are excluded
/// from the weekday/weekend buckets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketConfig {
    #[serde(default = "default_peak_start")]
    pub peak_start_hour: u32,
    #[serde(default = "default_peak_end")]
    pub peak_end_hour: u32,
    #[serde(default)]
    pub holidays: Vec<NaiveDate>,
}

fn default_peak_start() -> u32 {
    7
}

fn default_peak_end() -> u32 {
    19
}

impl Default for BucketConfig {
    fn default() -> Self {
        Self { peak_start_hour: default_peak_start(), peak_end_hour: default_peak_end(), holidays: Vec::new() }
    }
}

impl BucketConfig {
    pub fn is_peak(&self, clock: &Clock, t: i64) -> bool {
        let h = clock.hour_of_day(t);
        h >= self.peak_start_hour && h < self.peak_end_hour
    }

    pub fn buckets_of(&self, clock: &Clock, t: i64) -> Vec<Bucket> {
        let mut out = Vec::with_capacity(3);
        out.push(if self.is_peak(clock, t) { Bucket::Peak } else { Bucket::OffPeak });
        if self.holidays.contains(&clock.date(t)) {
            out.push(Bucket::Holiday);
        } else if clock.day_of_week(t) >= 5 {
            out.push(Bucket::Weekend);
        } else {
            out.push(Bucket::Weekdays);
        }
        out.push(Bucket::Overall);
        out
    }
}

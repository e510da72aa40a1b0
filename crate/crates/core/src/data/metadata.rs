use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Coarse time-of-week label that conditions the temporal head.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetadataClass {
    #[serde(rename = "office")]
    OfficeHours,
    Shoulder,
    #[serde(rename = "nonwork")]
    NonWorking,
}

impl MetadataClass {
    pub const ALL: [MetadataClass; 3] =
        [MetadataClass::OfficeHours, MetadataClass::Shoulder, MetadataClass::NonWorking];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            MetadataClass::OfficeHours => "office",
            MetadataClass::Shoulder => "shoulder",
            MetadataClass::NonWorking => "nonwork",
        }
    }
}

impl fmt::Display for MetadataClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for MetadataClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "office" => Ok(MetadataClass::OfficeHours),
            "shoulder" => Ok(MetadataClass::Shoulder),
            "nonwork" => Ok(MetadataClass::NonWorking),
            other => Err(format!("unknown metadata class `{other}`")),
        }
    }
}

/// Local wall-clock position of a UTC timestamp.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LocalTime {
    /// 0 = Monday … 6 = Sunday.
    pub weekday: u32,
    pub hour: u32,
    pub minute: u32,
}

pub fn local_time(timestamp: i64, tz_offset_minutes: i32) -> LocalTime {
    let local = timestamp + i64::from(tz_offset_minutes) * 60;
    let days = local.div_euclid(86_400);
    let secs = local.rem_euclid(86_400);
    // 1970-01-01 was a Thursday.
    let weekday = (days + 3).rem_euclid(7) as u32;
    LocalTime { weekday, hour: (secs / 3600) as u32, minute: ((secs % 3600) / 60) as u32 }
}

/// Weekday 09:00–16:59 is office hours, weekday 06:00–08:59 and 17:00–21:59 the
/// shoulder period, everything else (weekends, weekday nights) non-working.
pub fn derive_metadata_class(timestamp: i64, tz_offset_minutes: i32) -> MetadataClass {
    let t = local_time(timestamp, tz_offset_minutes);
    if t.weekday >= 5 {
        return MetadataClass::NonWorking;
    }
    match t.hour {
        9..=16 => MetadataClass::OfficeHours,
        6..=8 | 17..=21 => MetadataClass::Shoulder,
        _ => MetadataClass::NonWorking,
    }
}

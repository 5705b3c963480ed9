use chrono::{Duration, NaiveDate, NaiveDateTime, NaiveTime, TimeZone};

use crate::model::{parse_utc_offset, Timestamp};

use super::TransformError;

/// Split date/time fields as legacy CAD exports carry them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TimestampParts {
    pub year: Option<i32>,
    pub month: Option<u32>,
    pub day: Option<u32>,
    pub hour: Option<u32>,
    pub minute: Option<u32>,
    pub second: Option<u32>,
    pub utc_offset: Option<String>,
}

/// Combines split fields into one instant. Year, month, day and offset are
/// mandatory; missing time-of-day parts default to zero.
pub fn synthesize_timestamp(parts: &TimestampParts) -> Result<Timestamp, TransformError> {
    let missing = |what: &str| TransformError::Timestamp(format!("missing {what}"));
    let year = parts.year.ok_or_else(|| missing("year"))?;
    let month = parts.month.ok_or_else(|| missing("month"))?;
    let day = parts.day.ok_or_else(|| missing("day"))?;
    let offset_text = parts.utc_offset.as_deref().ok_or_else(|| missing("UTC offset"))?;
    let offset = parse_utc_offset(offset_text)
        .ok_or_else(|| TransformError::Timestamp(format!("invalid UTC offset {offset_text:?}")))?;
    let date = NaiveDate::from_ymd_opt(year, month, day)
        .ok_or_else(|| TransformError::Timestamp(format!("no such date {year:04}-{month:02}-{day:02}")))?;
    let (h, m, s) = (parts.hour.unwrap_or(0), parts.minute.unwrap_or(0), parts.second.unwrap_or(0));
    let time = NaiveTime::from_hms_opt(h, m, s)
        .ok_or_else(|| TransformError::Timestamp(format!("no such time {h:02}:{m:02}:{s:02}")))?;
    let local = offset
        .from_local_datetime(&NaiveDateTime::new(date, time))
        .single()
        .ok_or_else(|| TransformError::Timestamp("ambiguous local time".into()))?;
    Ok(Timestamp::new(local))
}

/// Accepts `H:MM:SS`, `<n> min` (also `mins`, `minutes`) or a bare integer
/// number of minutes.
pub fn parse_duration(text: &str) -> Option<Duration> {
    let t = text.trim();
    if t.is_empty() {
        return None;
    }
    if t.contains(':') {
        let parts: Vec<&str> = t.split(':').collect();
        if parts.len() != 3 || parts[1].len() != 2 || parts[2].len() != 2 {
            return None;
        }
        let h: i64 = parts[0].parse().ok()?;
        let m: i64 = parts[1].parse().ok()?;
        let s: i64 = parts[2].parse().ok()?;
        if h < 0 || !(0..60).contains(&m) || !(0..60).contains(&s) {
            return None;
        }
        return Some(Duration::seconds(h * 3600 + m * 60 + s));
    }
    let lower = t.to_ascii_lowercase();
    let number = ["minutes", "minute", "mins", "min"]
        .iter()
        .find_map(|suffix| lower.strip_suffix(suffix))
        .unwrap_or(&lower)
        .trim();
    let minutes: i64 = number.parse().ok()?;
    (minutes >= 0).then(|| Duration::minutes(minutes))
}

/// Parses an hour field that may be a bare hour (`12`) or a clock time
/// (`12:20`, `12:20:05`, `1220`).
pub fn parse_clock(text: &str) -> Option<(u32, u32, u32)> {
    let t = text.trim();
    if t.is_empty() {
        return None;
    }
    let nums: Vec<u32> = if t.contains(':') {
        t.split(':').map(|p| p.trim().parse().ok()).collect::<Option<Vec<_>>>()?
    } else if t.len() == 4 && t.chars().all(|c| c.is_ascii_digit()) {
        vec![t[..2].parse().ok()?, t[2..].parse().ok()?]
    } else {
        vec![t.parse().ok()?]
    };
    let (h, m, s) = match nums.as_slice() {
        [h] => (*h, 0, 0),
        [h, m] => (*h, *m, 0),
        [h, m, s] => (*h, *m, *s),
        _ => return None,
    };
    (h < 24 && m < 60 && s < 60).then_some((h, m, s))
}

/// Month as a number or an English month name / abbreviation.
pub fn parse_month(text: &str) -> Option<u32> {
    const NAMES: [&str; 12] = [
        "january",
        "february",
        "march",
        "april",
        "may",
        "june",
        "july",
        "august",
        "september",
        "october",
        "november",
        "december",
    ];
    let t = text.trim().to_ascii_lowercase();
    if let Ok(n) = t.parse::<u32>() {
        return Some(n);
    }
    if t.len() < 3 {
        return None;
    }
    NAMES.iter().position(|n| n.starts_with(&t)).map(|i| i as u32 + 1)
}

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Duration, FixedOffset, SecondsFormat};

/// An ISO 8601 instant that remembers the UTC offset it was written with.
///
/// Equality is structural: two timestamps are equal only when they denote the
/// same instant *and* carry the same offset, so `12:20-08:00` and `20:20Z`
/// compare unequal. Ordering is by instant, with the offset breaking ties
/// so that it agrees with equality; use [`Timestamp::cmp_instant`] where
/// equal instants must tie.
#[derive(Clone, Copy, Debug)]
pub struct Timestamp(DateTime<FixedOffset>);

impl Timestamp {
    pub fn new(inner: DateTime<FixedOffset>) -> Self {
        Self(inner)
    }

    /// Parses an RFC 3339 instant. An explicit offset (`Z` or `±HH:MM`) is required.
    pub fn parse(text: &str) -> Result<Self, chrono::ParseError> {
        DateTime::parse_from_rfc3339(text.trim()).map(Self)
    }

    pub fn inner(&self) -> DateTime<FixedOffset> {
        self.0
    }

    pub fn offset(&self) -> FixedOffset {
        *self.0.offset()
    }

    /// Signed difference `self - other`.
    pub fn since(&self, other: &Timestamp) -> Duration {
        self.0.signed_duration_since(other.0)
    }

    /// Absolute difference in seconds, with sub-second precision.
    pub fn abs_diff_secs(&self, other: &Timestamp) -> f64 {
        let d = self.since(other);
        let nanos = d.num_nanoseconds().map(|n| n as f64 / 1e9).unwrap_or_else(|| d.num_milliseconds() as f64 / 1e3);
        nanos.abs()
    }

    pub fn plus(&self, d: Duration) -> Timestamp {
        Timestamp(self.0 + d)
    }

    /// Compares instants only, ignoring the offset.
    pub fn cmp_instant(&self, other: &Timestamp) -> Ordering {
        self.0.cmp(&other.0)
    }

    pub fn same_instant(&self, other: &Timestamp) -> bool {
        self.0 == other.0
    }
}

impl PartialEq for Timestamp {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0 && self.0.offset() == other.0.offset()
    }
}

impl Eq for Timestamp {}

impl std::hash::Hash for Timestamp {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.hash(state);
        self.offset().local_minus_utc().hash(state);
    }
}

impl PartialOrd for Timestamp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Timestamp {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0).then_with(|| self.offset().local_minus_utc().cmp(&other.offset().local_minus_utc()))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.to_rfc3339_opts(SecondsFormat::AutoSi, false))
    }
}

impl FromStr for Timestamp {
    type Err = chrono::ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Timestamp::parse(s)
    }
}

/// Parses `±HH:MM`, `±HHMM`, `±HH` or `Z` into a fixed offset.
pub fn parse_utc_offset(text: &str) -> Option<FixedOffset> {
    let t = text.trim();
    if t.eq_ignore_ascii_case("z") || t.eq_ignore_ascii_case("utc") {
        return FixedOffset::east_opt(0);
    }
    let (sign, rest) = match t.as_bytes().first()? {
        b'+' => (1, &t[1..]),
        b'-' => (-1, &t[1..]),
        _ => return None,
    };
    let digits: String = rest.chars().filter(|c| *c != ':').collect();
    if !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let (h, m) = match digits.len() {
        2 => (digits.parse::<i32>().ok()?, 0),
        4 => (digits[..2].parse::<i32>().ok()?, digits[2..].parse::<i32>().ok()?),
        _ => return None,
    };
    if h > 23 || m > 59 {
        return None;
    }
    FixedOffset::east_opt(sign * (h * 3600 + m * 60))
}

//! Severe-event catalog: records, validation, and a tab-separated text
//! format with one event per row.
//!
//! Columns: name, type, countries (comma separated), location (may be
//! empty), latitude, longitude, description, dates (semicolon-separated
//! ISO dates). Loaders reject malformed rows with their line number rather
//! than repairing them.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

pub const CATALOG_HEADER: &str =
    "name\ttype\tcountries\tlocation\tlatitude\tlongitude\tdescription\tdates";

/// The severe-event categories tracked by the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventType {
    Hailstorm,
    Flood,
    Tornado,
    Windstorm,
}

impl EventType {
    pub const ALL: [EventType; 4] = [
        EventType::Hailstorm,
        EventType::Flood,
        EventType::Tornado,
        EventType::Windstorm,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EventType::Hailstorm => "hailstorm",
            EventType::Flood => "flood",
            EventType::Tornado => "tornado",
            EventType::Windstorm => "windstorm",
        }
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EventType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "hailstorm" => Ok(EventType::Hailstorm),
            "flood" => Ok(EventType::Flood),
            "tornado" => Ok(EventType::Tornado),
            "windstorm" => Ok(EventType::Windstorm),
            other => Err(format!("unknown event type '{other}'")),
        }
    }
}

/// One severe-weather event with at least one calendar day.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub name: String,
    pub event_type: EventType,
    pub affected_countries: Vec<String>,
    pub location: Option<String>,
    pub latitude: f64,
    pub longitude: f64,
    pub description: String,
    /// Days since the Unix epoch (whole UTC days).
    pub dates: Vec<i64>,
}

impl EventRecord {
    pub fn validate(&self) -> Result<()> {
        if self.dates.is_empty() {
            return Err(AppError::Data(format!(
                "event '{}' has no dates",
                self.name
            )));
        }
        if !(-90.0..=90.0).contains(&self.latitude) {
            return Err(AppError::Data(format!(
                "event '{}': latitude {} out of [-90, 90]",
                self.name, self.latitude
            )));
        }
        if !(-180.0..=180.0).contains(&self.longitude) {
            return Err(AppError::Data(format!(
                "event '{}': longitude {} out of [-180, 180]",
                self.name, self.longitude
            )));
        }
        Ok(())
    }
}

/// A validated list of event records. Duplicate (date, type) pairs are
/// retained here and de-duplicated at label-expansion time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventCatalog {
    pub records: Vec<EventRecord>,
}

impl EventCatalog {
    pub fn new(records: Vec<EventRecord>) -> Result<Self> {
        for r in &records {
            r.validate()?;
        }
        Ok(Self { records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Distinct event days for one type.
    pub fn days_of_type(&self, event_type: EventType) -> BTreeSet<i64> {
        self.records
            .iter()
            .filter(|r| r.event_type == event_type)
            .flat_map(|r| r.dates.iter().copied())
            .collect()
    }

    /// Distinct days covered by any event of any type.
    pub fn all_severe_days(&self) -> BTreeSet<i64> {
        self.records
            .iter()
            .flat_map(|r| r.dates.iter().copied())
            .collect()
    }

    /// Event types that actually appear in the catalog, ascending.
    pub fn present_types(&self) -> Vec<EventType> {
        let set: BTreeSet<EventType> = self.records.iter().map(|r| r.event_type).collect();
        set.into_iter().collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::from(CATALOG_HEADER);
        out.push('\n');
        for r in &self.records {
            let dates: Vec<String> = r.dates.iter().map(|&d| epoch_day_to_iso(d)).collect();
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                r.name,
                r.event_type,
                r.affected_countries.join(","),
                r.location.clone().unwrap_or_default(),
                r.latitude,
                r.longitude,
                r.description,
                dates.join(";")
            ));
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            AppError::Data(msg) => AppError::Data(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim_end() == CATALOG_HEADER => {}
            _ => {
                return Err(AppError::Data(
                    "line 1: missing or malformed catalog header".into(),
                ))
            }
        }
        let mut records = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 8 {
                return Err(AppError::Data(format!(
                    "line {line_no}: expected 8 tab-separated fields, found {}",
                    fields.len()
                )));
            }
            let name = fields[0].trim();
            if name.is_empty() {
                return Err(AppError::Data(format!("line {line_no}: empty event name")));
            }
            let event_type: EventType = fields[1]
                .trim()
                .parse()
                .map_err(|e| AppError::Data(format!("line {line_no}: {e}")))?;
            let affected_countries: Vec<String> = fields[2]
                .split(',')
                .map(|c| c.trim().to_string())
                .filter(|c| !c.is_empty())
                .collect();
            if affected_countries.is_empty() {
                return Err(AppError::Data(format!(
                    "line {line_no}: at least one affected country is required"
                )));
            }
            let location = match fields[3].trim() {
                "" => None,
                loc => Some(loc.to_string()),
            };
            let latitude: f64 = fields[4]
                .trim()
                .parse()
                .map_err(|_| AppError::Data(format!("line {line_no}: bad latitude")))?;
            let longitude: f64 = fields[5]
                .trim()
                .parse()
                .map_err(|_| AppError::Data(format!("line {line_no}: bad longitude")))?;
            let description = fields[6].trim().to_string();
            let mut dates = Vec::new();
            for piece in fields[7].split(';') {
                let piece = piece.trim();
                if piece.is_empty() {
                    continue;
                }
                dates.push(
                    iso_to_epoch_day(piece)
                        .map_err(|e| AppError::Data(format!("line {line_no}: {e}")))?,
                );
            }
            let record = EventRecord {
                name: name.to_string(),
                event_type,
                affected_countries,
                location,
                latitude,
                longitude,
                description,
                dates,
            };
            record
                .validate()
                .map_err(|e| AppError::Data(format!("line {line_no}: {e}")))?;
            records.push(record);
        }
        Ok(Self { records })
    }
}

/// Parses `YYYY-MM-DD` into days since the Unix epoch.
pub fn iso_to_epoch_day(s: &str) -> std::result::Result<i64, String> {
    let date = NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|_| format!("bad date '{s}', expected YYYY-MM-DD"))?;
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch");
    Ok(date.signed_duration_since(epoch).num_days())
}

/// Formats days since the Unix epoch back to `YYYY-MM-DD`.
pub fn epoch_day_to_iso(day: i64) -> String {
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch");
    let date = epoch + chrono::Duration::days(day);
    date.format("%Y-%m-%d").to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn flood_record() -> EventRecord {
        EventRecord {
            name: "river flood".into(),
            event_type: EventType::Flood,
            affected_countries: vec!["Greece".into()],
            location: Some("Thessaly".into()),
            latitude: 39.5,
            longitude: 22.0,
            description: "heavy rainfall flood".into(),
            dates: vec![iso_to_epoch_day("2017-03-04").unwrap()],
        }
    }

    #[test]
    fn single_record_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("catalog.tsv");
        let catalog = EventCatalog::new(vec![flood_record()]).unwrap();
        catalog.save(&path).unwrap();
        let loaded = EventCatalog::load(&path).unwrap();
        assert_eq!(loaded, catalog);
        assert_eq!(loaded.len(), 1);
    }

    #[test]
    fn out_of_range_latitude_is_rejected() {
        let mut record = flood_record();
        record.latitude = 120.0;
        assert!(EventCatalog::new(vec![record]).is_err());
    }

    #[test]
    fn unknown_event_type_is_rejected_with_line_number() {
        let text = format!(
            "{CATALOG_HEADER}\nstorm\thurricane\tFrance\t\t45.0\t2.0\tbig\t2001-01-01\n"
        );
        let err = EventCatalog::parse(&text).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(err.contains("hurricane"), "{err}");
    }

    #[test]
    fn missing_field_is_rejected_with_line_number() {
        let text = format!("{CATALOG_HEADER}\nstorm\tflood\tFrance\n");
        let err = EventCatalog::parse(&text).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn duplicate_date_and_type_pairs_are_retained_as_records() {
        let a = flood_record();
        let mut b = flood_record();
        b.name = "second flood, same day".into();
        let catalog = EventCatalog::new(vec![a, b]).unwrap();
        assert_eq!(catalog.len(), 2);
        // De-duplication happens only in the day sets.
        assert_eq!(catalog.days_of_type(EventType::Flood).len(), 1);
    }

    #[test]
    fn date_conversion_round_trips() {
        for iso in ["1970-01-01", "1979-01-01", "2018-05-31", "2000-02-29"] {
            let day = iso_to_epoch_day(iso).unwrap();
            assert_eq!(epoch_day_to_iso(day), iso);
        }
        assert_eq!(iso_to_epoch_day("1970-01-01").unwrap(), 0);
        assert_eq!(iso_to_epoch_day("1970-01-02").unwrap(), 1);
        assert!(iso_to_epoch_day("01/02/1970").is_err());
    }

    #[test]
    fn location_may_be_empty() {
        let text = format!(
            "{CATALOG_HEADER}\ngale\twindstorm\tIreland,United Kingdom\t\t53.0\t-8.0\tsevere gale\t1997-12-24;1997-12-25\n"
        );
        let catalog = EventCatalog::parse(&text).unwrap();
        assert_eq!(catalog.records[0].location, None);
        assert_eq!(catalog.records[0].affected_countries.len(), 2);
        assert_eq!(catalog.records[0].dates.len(), 2);
    }
}

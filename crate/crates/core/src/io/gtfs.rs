//! GTFS static feed loader: per-stop hourly counts of departing trips and
//! distinct headsign directions, plus a non-raising feed validator.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use crate::geometry::Coordinate;

use super::LoadError;

const REQUIRED_FILES: &[&str] = &["stops.txt", "trips.txt", "stop_times.txt"];

/// Hourly public-transport offer at one stop.
#[derive(Debug, Clone, PartialEq)]
pub struct GtfsStopFeatures {
    pub stop_id: String,
    pub location: Coordinate,
    pub trips_at_hour: [u32; 24],
    pub directions_at_hour: [u32; 24],
}

struct CsvTable {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn field<'a>(&'a self, row: &'a [String], col: Option<usize>) -> &'a str {
        col.and_then(|c| row.get(c)).map(String::as_str).unwrap_or("")
    }
}

fn read_zip_tables(path: &Path, names: &[&str]) -> Result<BTreeMap<String, CsvTable>, ZipOpenError> {
    let file = std::fs::File::open(path).map_err(ZipOpenError::Io)?;
    let mut archive = zip::ZipArchive::new(file).map_err(zip_error)?;
    let mut tables = BTreeMap::new();
    for name in names {
        let mut entry = match archive.by_name(name) {
            Ok(entry) => entry,
            Err(zip::result::ZipError::FileNotFound) => continue,
            Err(e) => return Err(zip_error(e)),
        };
        let mut text = String::new();
        entry.read_to_string(&mut text).map_err(|e| ZipOpenError::Content(e.to_string()))?;
        tables.insert(name.to_string(), parse_csv(&text).map_err(ZipOpenError::Content)?);
    }
    Ok(tables)
}

enum ZipOpenError {
    Io(std::io::Error),
    Content(String),
}

fn zip_error(e: zip::result::ZipError) -> ZipOpenError {
    match e {
        zip::result::ZipError::Io(io) => ZipOpenError::Io(io),
        other => ZipOpenError::Content(format!("invalid zip archive: {other}")),
    }
}

fn parse_csv(text: &str) -> Result<CsvTable, String> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| format!("csv header: {e}"))?
        .iter()
        .map(|h| h.trim().trim_start_matches('\u{feff}').to_string())
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| format!("csv row: {e}"))?;
        rows.push(record.iter().map(|f| f.trim().to_string()).collect());
    }
    Ok(CsvTable { headers, rows })
}

/// Hour bucket of a GTFS time. Hours at or past 24:00:00 wrap modulo 24;
/// an empty field is `None`.
fn parse_gtfs_hour(raw: &str) -> Result<Option<u32>, String> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    let parts: Vec<&str> = raw.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("unparseable time {raw:?}"));
    }
    let hour: u32 = parts[0].parse().map_err(|_| format!("unparseable time {raw:?}"))?;
    let _minutes: u32 = parts[1].parse().map_err(|_| format!("unparseable time {raw:?}"))?;
    let _seconds: u32 = parts[2].parse().map_err(|_| format!("unparseable time {raw:?}"))?;
    Ok(Some(hour % 24))
}

/// Load per-stop hourly trip and direction counts from a GTFS zip.
///
/// The hour bucket comes from departure_time, falling back to arrival_time;
/// rows with neither are skipped. Directions are distinct trip_headsign
/// values (an empty headsign counts as the distinct value "").
pub fn load_gtfs(path: &Path) -> Result<Vec<GtfsStopFeatures>, LoadError> {
    let tables = read_zip_tables(path, REQUIRED_FILES).map_err(|e| match e {
        ZipOpenError::Io(io) => LoadError::Io(io),
        ZipOpenError::Content(msg) => LoadError::Malformed(msg),
    })?;
    for name in REQUIRED_FILES {
        if !tables.contains_key(*name) {
            return Err(LoadError::Malformed(format!("missing required file: {name}")));
        }
    }

    let stops = &tables["stops.txt"];
    let (stop_id_col, lat_col, lon_col) = match (
        stops.column("stop_id"),
        stops.column("stop_lat"),
        stops.column("stop_lon"),
    ) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(LoadError::Malformed("stops.txt: missing required column".into())),
    };

    let trips = &tables["trips.txt"];
    let trip_id_col = trips
        .column("trip_id")
        .ok_or_else(|| LoadError::Malformed("trips.txt: missing required column trip_id".into()))?;
    let headsign_col = trips.column("trip_headsign");
    let mut headsigns: HashMap<&str, &str> = HashMap::new();
    for row in &trips.rows {
        headsigns.insert(
            trips.field(row, Some(trip_id_col)),
            trips.field(row, headsign_col),
        );
    }

    let stop_times = &tables["stop_times.txt"];
    let (st_trip_col, st_stop_col) = match (stop_times.column("trip_id"), stop_times.column("stop_id")) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(LoadError::Malformed("stop_times.txt: missing required column".into())),
    };
    let departure_col = stop_times.column("departure_time");
    let arrival_col = stop_times.column("arrival_time");
    if departure_col.is_none() {
        return Err(LoadError::Malformed("stop_times.txt: missing required column departure_time".into()));
    }

    let mut order: Vec<String> = Vec::new();
    let mut locations: HashMap<String, Coordinate> = HashMap::new();
    for (i, row) in stops.rows.iter().enumerate() {
        let stop_id = stops.field(row, Some(stop_id_col)).to_string();
        let lat: f64 = stops.field(row, Some(lat_col)).parse().map_err(|_| {
            LoadError::Malformed(format!("stops.txt row {}: unparseable stop_lat", i + 1))
        })?;
        let lon: f64 = stops.field(row, Some(lon_col)).parse().map_err(|_| {
            LoadError::Malformed(format!("stops.txt row {}: unparseable stop_lon", i + 1))
        })?;
        if !locations.contains_key(&stop_id) {
            order.push(stop_id.clone());
        }
        locations.insert(stop_id, Coordinate::new(lon, lat)?);
    }

    let mut trip_counts: HashMap<&str, [u32; 24]> = HashMap::new();
    let mut direction_sets: HashMap<(&str, u32), BTreeSet<&str>> = HashMap::new();
    for (i, row) in stop_times.rows.iter().enumerate() {
        let stop_id = stop_times.field(row, Some(st_stop_col));
        if !locations.contains_key(stop_id) {
            continue;
        }
        let departure = stop_times.field(row, departure_col);
        let arrival = stop_times.field(row, arrival_col);
        let hour = match parse_gtfs_hour(departure)
            .map_err(|m| LoadError::Malformed(format!("stop_times.txt row {}: {m}", i + 1)))?
        {
            Some(h) => Some(h),
            None => parse_gtfs_hour(arrival)
                .map_err(|m| LoadError::Malformed(format!("stop_times.txt row {}: {m}", i + 1)))?,
        };
        let Some(hour) = hour else { continue };
        trip_counts.entry(stop_id).or_insert([0; 24])[hour as usize] += 1;
        let trip_id = stop_times.field(row, Some(st_trip_col));
        let headsign = headsigns.get(trip_id).copied().unwrap_or("");
        direction_sets.entry((stop_id, hour)).or_default().insert(headsign);
    }

    Ok(order
        .into_iter()
        .map(|stop_id| {
            let trips_at_hour = trip_counts.get(stop_id.as_str()).copied().unwrap_or([0; 24]);
            let mut directions_at_hour = [0u32; 24];
            for (h, slot) in directions_at_hour.iter_mut().enumerate() {
                *slot = direction_sets
                    .get(&(stop_id.as_str(), h as u32))
                    .map(|s| s.len() as u32)
                    .unwrap_or(0);
            }
            GtfsStopFeatures {
                location: locations[&stop_id],
                stop_id,
                trips_at_hour,
                directions_at_hour,
            }
        })
        .collect())
}

/// Check a feed for structural defects without raising on any of them.
///
/// Returns one message per problem: missing required files or columns,
/// stop_times rows referencing unknown ids, unparseable numeric/time fields,
/// and non-monotone stop_sequence within a trip.
pub fn validate_gtfs(path: &Path) -> Result<Vec<String>, LoadError> {
    let tables = match read_zip_tables(path, REQUIRED_FILES) {
        Ok(tables) => tables,
        Err(ZipOpenError::Io(io)) => return Err(LoadError::Io(io)),
        Err(ZipOpenError::Content(msg)) => return Ok(vec![msg]),
    };
    let mut messages = Vec::new();
    for name in REQUIRED_FILES {
        if !tables.contains_key(*name) {
            messages.push(format!("missing required file: {name}"));
        }
    }

    let mut stop_ids: BTreeSet<&str> = BTreeSet::new();
    if let Some(stops) = tables.get("stops.txt") {
        for column in ["stop_id", "stop_lat", "stop_lon"] {
            if stops.column(column).is_none() {
                messages.push(format!("stops.txt: missing required column {column}"));
            }
        }
        let id_col = stops.column("stop_id");
        for (i, row) in stops.rows.iter().enumerate() {
            stop_ids.insert(stops.field(row, id_col));
            for column in ["stop_lat", "stop_lon"] {
                if let Some(c) = stops.column(column) {
                    if stops.field(row, Some(c)).parse::<f64>().is_err() {
                        messages.push(format!("stops.txt row {}: unparseable {column}", i + 1));
                    }
                }
            }
        }
    }

    let mut trip_ids: BTreeSet<&str> = BTreeSet::new();
    if let Some(trips) = tables.get("trips.txt") {
        for column in ["trip_id", "route_id", "trip_headsign"] {
            if trips.column(column).is_none() {
                messages.push(format!("trips.txt: missing required column {column}"));
            }
        }
        let id_col = trips.column("trip_id");
        for row in &trips.rows {
            trip_ids.insert(trips.field(row, id_col));
        }
    }

    if let Some(stop_times) = tables.get("stop_times.txt") {
        for column in ["trip_id", "stop_id", "stop_sequence", "departure_time"] {
            if stop_times.column(column).is_none() {
                messages.push(format!("stop_times.txt: missing required column {column}"));
            }
        }
        let trip_col = stop_times.column("trip_id");
        let stop_col = stop_times.column("stop_id");
        let seq_col = stop_times.column("stop_sequence");
        let dep_col = stop_times.column("departure_time");
        let arr_col = stop_times.column("arrival_time");
        let has_stops = tables.contains_key("stops.txt");
        let has_trips = tables.contains_key("trips.txt");
        let mut last_seq: HashMap<&str, (u64, usize)> = HashMap::new();
        for (i, row) in stop_times.rows.iter().enumerate() {
            let row_no = i + 1;
            let stop_id = stop_times.field(row, stop_col);
            if stop_col.is_some() && has_stops && !stop_ids.contains(stop_id) {
                messages.push(format!("stop_times.txt row {row_no}: unknown stop_id {stop_id:?}"));
            }
            let trip_id = stop_times.field(row, trip_col);
            if trip_col.is_some() && has_trips && !trip_ids.contains(trip_id) {
                messages.push(format!("stop_times.txt row {row_no}: unknown trip_id {trip_id:?}"));
            }
            for col in [dep_col, arr_col] {
                let raw = stop_times.field(row, col);
                if parse_gtfs_hour(raw).is_err() {
                    messages.push(format!("stop_times.txt row {row_no}: unparseable time {raw:?}"));
                }
            }
            if let Some(c) = seq_col {
                match stop_times.field(row, Some(c)).parse::<u64>() {
                    Ok(seq) => {
                        if let Some((prev, prev_row)) = last_seq.get(trip_id) {
                            if seq <= *prev {
                                messages.push(format!(
                                    "trip {trip_id:?}: stop_sequence not strictly increasing \
                                     ({prev} at row {prev_row}, then {seq} at row {row_no})"
                                ));
                            }
                        }
                        last_seq.insert(trip_id, (seq, row_no));
                    }
                    Err(_) => {
                        messages.push(format!("stop_times.txt row {row_no}: unparseable stop_sequence"));
                    }
                }
            }
        }
    }
    Ok(messages)
}

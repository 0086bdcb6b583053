//! CSV ingestion and emission of the dataset file set.
//!
//! A dataset directory holds `schema.json` plus `transactions.csv`,
//! `communities.csv`, `pois.csv`, `checkins.csv`, `trips.csv` and
//! `users.csv`, all UTF-8 with a header row.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::path::Path;

use csv::StringRecord;

use super::schema::{AttributeKind, FacilityKind, Schema};
use super::{
    AttributeValue, Checkin, Community, CommunityId, CommunityProfile, Dataset, EstateAttributes, Facility, Resident,
    TransactionEvent, Trip, UrbanRecords,
};
use crate::error::{MugrepError, Result};
use crate::geo::{Equirectangular, Point};

pub const SCHEMA_FILE: &str = "schema.json";
pub const TRANSACTIONS_FILE: &str = "transactions.csv";
pub const COMMUNITIES_FILE: &str = "communities.csv";
pub const POIS_FILE: &str = "pois.csv";
pub const CHECKINS_FILE: &str = "checkins.csv";
pub const TRIPS_FILE: &str = "trips.csv";
pub const USERS_FILE: &str = "users.csv";

const TRANSACTION_HEAD: [&str; 5] = ["date", "x_m", "y_m", "community_id", "price"];
const COMMUNITY_HEAD: [&str; 10] = [
    "id",
    "name",
    "x_m",
    "y_m",
    "district_id",
    "developer",
    "completion_year",
    "building_count",
    "estate_count",
    "property_fee",
];
const POI_HEAD: [&str; 4] = ["kind", "category", "x_m", "y_m"];
const CHECKIN_HEAD: [&str; 4] = ["user_id", "x_m", "y_m", "minute"];
const TRIP_HEAD: [&str; 7] = [
    "origin_x_m",
    "origin_y_m",
    "dest_x_m",
    "dest_y_m",
    "travel_mode",
    "destination_type",
    "is_weekend",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoordinateSystem {
    /// `x_m`/`y_m` columns already hold planar meters.
    #[default]
    Planar,
    /// `x_m`/`y_m` hold longitude/latitude degrees; they are projected to
    /// planar meters around the mean community location.
    LonLat,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    pub coordinates: CoordinateSystem,
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    load_dataset_with(dir, LoadOptions::default())
}

pub fn load_dataset_with(dir: &Path, options: LoadOptions) -> Result<Dataset> {
    let schema_path = dir.join(SCHEMA_FILE);
    if !schema_path.exists() {
        return Err(MugrepError::MissingFile(schema_path));
    }
    let text = std::fs::read_to_string(&schema_path).map_err(|e| MugrepError::io(&schema_path, e))?;
    let schema: Schema = serde_json::from_str(&text)?;
    schema.validate()?;

    let mut communities = read_communities(dir, &schema)?;
    let mut events = read_transactions(dir, &schema)?;
    let mut records = UrbanRecords {
        facilities: read_facilities(dir, &schema)?,
        checkins: read_checkins(dir)?,
        trips: read_trips(dir, &schema)?,
        residents: read_users(dir, &schema)?,
    };

    if options.coordinates == CoordinateSystem::LonLat {
        let anchors: Vec<(f64, f64)> = communities.iter().map(|c| (c.centroid.x, c.centroid.y)).collect();
        let proj = Equirectangular::around(&anchors);
        let p = |pt: &mut Point| *pt = proj.project(pt.x, pt.y);
        communities.iter_mut().for_each(|c| p(&mut c.centroid));
        events.iter_mut().for_each(|(_, e)| p(&mut e.location));
        records.facilities.iter_mut().for_each(|f| p(&mut f.location));
        records.checkins.iter_mut().for_each(|c| p(&mut c.location));
        for t in &mut records.trips {
            p(&mut t.origin);
            p(&mut t.destination);
        }
    }

    let known: HashSet<CommunityId> = communities.iter().map(|c| c.id).collect();
    if known.len() != communities.len() {
        return Err(MugrepError::MalformedRow {
            file: COMMUNITIES_FILE.into(),
            line: 0,
            message: "duplicate community id".into(),
        });
    }
    for (line, e) in &events {
        if !known.contains(&e.community_id) {
            return Err(MugrepError::UnresolvedCommunity {
                community_id: e.community_id,
                context: format!("{TRANSACTIONS_FILE} line {line}"),
            });
        }
    }
    for r in &records.residents {
        if !known.contains(&r.community_id) {
            return Err(MugrepError::UnresolvedCommunity {
                community_id: r.community_id,
                context: USERS_FILE.into(),
            });
        }
    }
    check_districts(&communities)?;

    // stable: ties keep ingestion order
    events.sort_by_key(|(_, e)| e.date);
    let events = events
        .into_iter()
        .enumerate()
        .map(|(i, (_, mut e))| {
            e.id = i as u32;
            e
        })
        .collect();

    Ok(Dataset {
        schema,
        events,
        communities,
        records,
    })
}

fn check_districts(communities: &[Community]) -> Result<()> {
    let m = communities.iter().map(|c| c.district_id + 1).max().unwrap_or(0);
    let present: HashSet<u32> = communities.iter().map(|c| c.district_id).collect();
    if let Some(missing) = (0..m).find(|d| !present.contains(d)) {
        return Err(MugrepError::InvalidConfig(format!(
            "district ids must cover 0..{m}; district {missing} has no community"
        )));
    }
    Ok(())
}

struct Table {
    file: &'static str,
    columns: HashMap<String, usize>,
    reader: csv::Reader<File>,
}

struct Row<'a> {
    file: &'static str,
    line: u64,
    record: &'a StringRecord,
    columns: &'a HashMap<String, usize>,
}

impl Table {
    fn open(dir: &Path, file: &'static str, required: &[&str]) -> Result<Self> {
        let path = dir.join(file);
        if !path.exists() {
            return Err(MugrepError::MissingFile(path));
        }
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(&path)?;
        let columns: HashMap<String, usize> = reader
            .headers()?
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_string(), i))
            .collect();
        if let Some(missing) = required.iter().find(|c| !columns.contains_key(**c)) {
            return Err(MugrepError::MalformedRow {
                file: file.into(),
                line: 1,
                message: format!("missing column {missing:?}"),
            });
        }
        Ok(Table { file, columns, reader })
    }

    fn for_each<F: FnMut(Row<'_>) -> Result<()>>(mut self, mut f: F) -> Result<()> {
        let mut record = StringRecord::new();
        loop {
            match self.reader.read_record(&mut record) {
                Ok(false) => return Ok(()),
                Ok(true) => {
                    let line = record.position().map(|p| p.line()).unwrap_or(0);
                    f(Row {
                        file: self.file,
                        line,
                        record: &record,
                        columns: &self.columns,
                    })?;
                }
                Err(e) => {
                    let line = e.position().map(|p| p.line()).unwrap_or(0);
                    return Err(MugrepError::MalformedRow {
                        file: self.file.into(),
                        line,
                        message: e.to_string(),
                    });
                }
            }
        }
    }
}

impl Row<'_> {
    fn err(&self, message: String) -> MugrepError {
        MugrepError::MalformedRow {
            file: self.file.into(),
            line: self.line,
            message,
        }
    }

    fn str(&self, col: &str) -> Result<&str> {
        let i = self.columns[col];
        self.record
            .get(i)
            .map(str::trim)
            .ok_or_else(|| self.err(format!("missing field {col}")))
    }

    fn f64(&self, col: &str) -> Result<f64> {
        let s = self.str(col)?;
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.err(format!("{col}: expected a number, got {s:?}")))
    }

    fn i64(&self, col: &str) -> Result<i64> {
        let s = self.str(col)?;
        s.parse::<i64>()
            .map_err(|_| self.err(format!("{col}: expected an integer, got {s:?}")))
    }

    fn u32(&self, col: &str) -> Result<u32> {
        let s = self.str(col)?;
        s.parse::<u32>()
            .map_err(|_| self.err(format!("{col}: expected a non-negative integer, got {s:?}")))
    }

    fn point(&self, x: &str, y: &str) -> Result<Point> {
        Ok(Point::new(self.f64(x)?, self.f64(y)?))
    }

    fn category(&self, col: &str, allowed: &[String]) -> Result<String> {
        let s = self.str(col)?;
        if allowed.iter().any(|a| a == s) {
            Ok(s.to_string())
        } else {
            Err(self.err(format!("{col}: {s:?} is not declared in {SCHEMA_FILE}")))
        }
    }

    fn bool(&self, col: &str) -> Result<bool> {
        match self.str(col)? {
            "1" | "true" => Ok(true),
            "0" | "false" => Ok(false),
            s => Err(self.err(format!("{col}: expected 0/1, got {s:?}"))),
        }
    }
}

fn read_transactions(dir: &Path, schema: &Schema) -> Result<Vec<(u64, TransactionEvent)>> {
    let mut required: Vec<&str> = TRANSACTION_HEAD.to_vec();
    required.extend(schema.estate_attributes.iter().map(|a| a.name.as_str()));
    let mut out = Vec::new();
    Table::open(dir, TRANSACTIONS_FILE, &required)?.for_each(|row| {
        let mut attributes = EstateAttributes::new();
        for spec in &schema.estate_attributes {
            let value = match spec.kind {
                AttributeKind::Numeric => AttributeValue::Number(row.f64(&spec.name)?),
                AttributeKind::Categorical => AttributeValue::Category(row.category(&spec.name, &spec.values)?),
            };
            attributes.insert(spec.name.clone(), value);
        }
        let price = match row.str("price")? {
            "" => None,
            _ => {
                let p = row.f64("price")?;
                if p <= 0.0 {
                    return Err(row.err(format!("price must be positive, got {p}")));
                }
                Some(p)
            }
        };
        out.push((
            row.line,
            TransactionEvent {
                id: 0,
                location: row.point("x_m", "y_m")?,
                date: row.i64("date")?,
                community_id: row.u32("community_id")?,
                attributes,
                price,
            },
        ));
        Ok(())
    })?;
    Ok(out)
}

fn read_communities(dir: &Path, schema: &Schema) -> Result<Vec<Community>> {
    let mut out = Vec::new();
    Table::open(dir, COMMUNITIES_FILE, &COMMUNITY_HEAD)?.for_each(|row| {
        out.push(Community {
            id: row.u32("id")?,
            name: row.str("name")?.to_string(),
            centroid: row.point("x_m", "y_m")?,
            district_id: row.u32("district_id")?,
            profile: CommunityProfile {
                developer: row.category("developer", &schema.developers)?,
                completion_year: row.f64("completion_year")?,
                building_count: row.f64("building_count")?,
                estate_count: row.f64("estate_count")?,
                property_fee: row.f64("property_fee")?,
            },
        });
        Ok(())
    })?;
    Ok(out)
}

fn read_facilities(dir: &Path, schema: &Schema) -> Result<Vec<Facility>> {
    let mut out = Vec::new();
    Table::open(dir, POIS_FILE, &POI_HEAD)?.for_each(|row| {
        let kind = match row.str("kind")? {
            "poi" => FacilityKind::Poi,
            "station" => FacilityKind::Station,
            s => return Err(row.err(format!("kind: expected poi/station, got {s:?}"))),
        };
        let allowed = match kind {
            FacilityKind::Poi => &schema.poi_categories,
            FacilityKind::Station => &schema.station_categories,
        };
        out.push(Facility {
            kind,
            category: row.category("category", allowed)?,
            location: row.point("x_m", "y_m")?,
        });
        Ok(())
    })?;
    Ok(out)
}

fn read_checkins(dir: &Path) -> Result<Vec<Checkin>> {
    let mut out = Vec::new();
    Table::open(dir, CHECKINS_FILE, &CHECKIN_HEAD)?.for_each(|row| {
        let user_id = row
            .str("user_id")?
            .parse::<u64>()
            .map_err(|_| row.err("user_id: expected a non-negative integer".into()))?;
        out.push(Checkin {
            user_id,
            location: row.point("x_m", "y_m")?,
            minute: row.i64("minute")?,
        });
        Ok(())
    })?;
    Ok(out)
}

fn read_trips(dir: &Path, schema: &Schema) -> Result<Vec<Trip>> {
    let mut out = Vec::new();
    Table::open(dir, TRIPS_FILE, &TRIP_HEAD)?.for_each(|row| {
        out.push(Trip {
            origin: row.point("origin_x_m", "origin_y_m")?,
            destination: row.point("dest_x_m", "dest_y_m")?,
            travel_mode: row.category("travel_mode", &schema.travel_modes)?,
            destination_type: row.category("destination_type", &schema.destination_types)?,
            is_weekend: row.bool("is_weekend")?,
        });
        Ok(())
    })?;
    Ok(out)
}

fn read_users(dir: &Path, schema: &Schema) -> Result<Vec<Resident>> {
    let mut required = vec!["community_id"];
    required.extend(schema.user_attributes.iter().map(|a| a.name.as_str()));
    let mut out = Vec::new();
    Table::open(dir, USERS_FILE, &required)?.for_each(|row| {
        let mut attributes = BTreeMap::new();
        for spec in &schema.user_attributes {
            attributes.insert(spec.name.clone(), row.category(&spec.name, &spec.values)?);
        }
        out.push(Resident {
            community_id: row.u32("community_id")?,
            attributes,
        });
        Ok(())
    })?;
    Ok(out)
}

fn writer(dir: &Path, file: &str) -> Result<csv::Writer<File>> {
    let path = dir.join(file);
    let f = File::create(&path).map_err(|e| MugrepError::io(&path, e))?;
    Ok(csv::WriterBuilder::new().from_writer(f))
}

/// Write the full file set. Loading the result yields an equal dataset.
pub fn write_dataset(dir: &Path, data: &Dataset) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| MugrepError::io(dir, e))?;
    let schema_path = dir.join(SCHEMA_FILE);
    std::fs::write(&schema_path, serde_json::to_string_pretty(&data.schema)? + "\n")
        .map_err(|e| MugrepError::io(&schema_path, e))?;

    let mut w = writer(dir, TRANSACTIONS_FILE)?;
    let mut head: Vec<String> = TRANSACTION_HEAD.iter().map(|s| s.to_string()).collect();
    head.extend(data.schema.estate_attributes.iter().map(|a| a.name.clone()));
    w.write_record(&head)?;
    for e in &data.events {
        let mut rec = vec![
            e.date.to_string(),
            e.location.x.to_string(),
            e.location.y.to_string(),
            e.community_id.to_string(),
            e.price.map(|p| p.to_string()).unwrap_or_default(),
        ];
        for spec in &data.schema.estate_attributes {
            rec.push(e.attributes.get(&spec.name).map(|v| v.to_string()).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| MugrepError::io(dir, e))?;

    let mut w = writer(dir, COMMUNITIES_FILE)?;
    w.write_record(COMMUNITY_HEAD)?;
    for c in &data.communities {
        w.write_record([
            c.id.to_string(),
            c.name.clone(),
            c.centroid.x.to_string(),
            c.centroid.y.to_string(),
            c.district_id.to_string(),
            c.profile.developer.clone(),
            c.profile.completion_year.to_string(),
            c.profile.building_count.to_string(),
            c.profile.estate_count.to_string(),
            c.profile.property_fee.to_string(),
        ])?;
    }
    w.flush().map_err(|e| MugrepError::io(dir, e))?;

    let mut w = writer(dir, POIS_FILE)?;
    w.write_record(POI_HEAD)?;
    for f in &data.records.facilities {
        let kind = match f.kind {
            FacilityKind::Poi => "poi",
            FacilityKind::Station => "station",
        };
        w.write_record([
            kind.to_string(),
            f.category.clone(),
            f.location.x.to_string(),
            f.location.y.to_string(),
        ])?;
    }
    w.flush().map_err(|e| MugrepError::io(dir, e))?;

    let mut w = writer(dir, CHECKINS_FILE)?;
    w.write_record(CHECKIN_HEAD)?;
    for c in &data.records.checkins {
        w.write_record([
            c.user_id.to_string(),
            c.location.x.to_string(),
            c.location.y.to_string(),
            c.minute.to_string(),
        ])?;
    }
    w.flush().map_err(|e| MugrepError::io(dir, e))?;

    let mut w = writer(dir, TRIPS_FILE)?;
    w.write_record(TRIP_HEAD)?;
    for t in &data.records.trips {
        w.write_record([
            t.origin.x.to_string(),
            t.origin.y.to_string(),
            t.destination.x.to_string(),
            t.destination.y.to_string(),
            t.travel_mode.clone(),
            t.destination_type.clone(),
            (t.is_weekend as u8).to_string(),
        ])?;
    }
    w.flush().map_err(|e| MugrepError::io(dir, e))?;

    let mut w = writer(dir, USERS_FILE)?;
    let mut head = vec!["community_id".to_string()];
    head.extend(data.schema.user_attributes.iter().map(|a| a.name.clone()));
    w.write_record(&head)?;
    for r in &data.records.residents {
        let mut rec = vec![r.community_id.to_string()];
        for spec in &data.schema.user_attributes {
            rec.push(r.attributes.get(&spec.name).cloned().unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| MugrepError::io(dir, e))?;
    Ok(())
}

//! CSV and TOML readers and the canonical CSV writers.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::Deserialize;

use super::{Arc, DataError, InstanceDef, Network, Node, Road, RoadSegment, TrafficStats};

const ROADS_HEADER: [&str; 3] = ["road_id", "road_type", "heavy_vehicle_flow"];
const ARCS_HEADER: [&str; 5] = [
    "from",
    "to",
    "segment_road_id",
    "segment_length_km",
    "tolls_money",
];

fn open(path: &Path) -> Result<fs::File, DataError> {
    fs::File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_to_string(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader)
}

fn check_header<R: Read>(
    rdr: &mut csv::Reader<R>,
    expected: &[&str],
    file: &str,
) -> Result<(), DataError> {
    let headers = rdr.headers().map_err(|e| DataError::Format {
        file: file.into(),
        message: e.to_string(),
    })?;
    if headers.iter().ne(expected.iter().copied()) {
        return Err(DataError::Format {
            file: file.into(),
            message: format!(
                "expected header `{}`, found `{}`",
                expected.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    Ok(())
}

fn row_err(file: &str, row: u64, message: impl Into<String>) -> DataError {
    DataError::Row {
        file: file.into(),
        row,
        message: message.into(),
    }
}

fn parse_f64(file: &str, row: u64, field: &str, raw: &str) -> Result<f64, DataError> {
    let v: f64 = raw
        .parse()
        .map_err(|_| row_err(file, row, format!("{field}: {raw:?} is not a number")))?;
    if !v.is_finite() {
        return Err(row_err(file, row, format!("{field}: {raw:?} is not finite")));
    }
    Ok(v)
}

fn records<R: Read>(
    rdr: &mut csv::Reader<R>,
    file: &str,
    width: usize,
) -> Result<Vec<(u64, csv::StringRecord)>, DataError> {
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line());
            row_err(file, row, e.to_string())
        })?;
        let row = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(row_err(
                file,
                row,
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        out.push((row, rec));
    }
    Ok(out)
}

/// Parses `road_id,road_type,heavy_vehicle_flow`.
pub fn parse_roads_csv<R: Read>(reader: R, file: &str) -> Result<Vec<Road>, DataError> {
    let mut rdr = csv_reader(reader);
    check_header(&mut rdr, &ROADS_HEADER, file)?;
    let mut seen = HashSet::new();
    let mut roads = Vec::new();
    for (row, rec) in records(&mut rdr, file, ROADS_HEADER.len())? {
        let id = rec[0].to_owned();
        if id.is_empty() {
            return Err(row_err(file, row, "empty road_id"));
        }
        if !seen.insert(id.clone()) {
            return Err(row_err(file, row, format!("duplicate road id {id:?}")));
        }
        let road_type = rec[1].parse().map_err(|m: String| row_err(file, row, m))?;
        let flow = parse_f64(file, row, "heavy_vehicle_flow", &rec[2])?;
        if flow < 0.0 {
            return Err(row_err(
                file,
                row,
                format!("heavy_vehicle_flow must be non-negative, got {flow}"),
            ));
        }
        roads.push(Road {
            id,
            road_type,
            heavy_vehicle_flow: flow,
        });
    }
    Ok(roads)
}

/// Parses `from,to,segment_road_id,segment_length_km,tolls_money`, one row
/// per segment. An arc's rows must be contiguous and its tolls appear on its
/// first row only.
pub fn parse_arcs_csv<R: Read>(
    reader: R,
    file: &str,
    roads: &[Road],
) -> Result<Vec<Arc>, DataError> {
    let known: HashSet<&str> = roads.iter().map(|r| r.id.as_str()).collect();
    let mut rdr = csv_reader(reader);
    check_header(&mut rdr, &ARCS_HEADER, file)?;

    let mut arcs: Vec<Arc> = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (row, rec) in records(&mut rdr, file, ARCS_HEADER.len())? {
        let (from, to, road_id) = (&rec[0], &rec[1], &rec[2]);
        if from.is_empty() || to.is_empty() {
            return Err(row_err(file, row, "empty node id"));
        }
        if from == to {
            return Err(row_err(file, row, format!("arc {from}->{to} is a loop")));
        }
        if !known.contains(road_id) {
            return Err(DataError::UnknownRoad {
                file: file.into(),
                row,
                road_id: road_id.into(),
            });
        }
        let length = parse_f64(file, row, "segment_length_km", &rec[3])?;
        if !(length > 0.0) {
            return Err(DataError::NonPositiveLength {
                file: file.into(),
                row,
                length,
            });
        }
        let segment = RoadSegment {
            road_id: road_id.into(),
            length_km: length,
        };
        let continues = arcs
            .last()
            .is_some_and(|a: &Arc| a.from == from && a.to == to);
        if continues {
            if !rec[4].is_empty() {
                return Err(row_err(
                    file,
                    row,
                    "tolls_money belongs on the first segment row of an arc",
                ));
            }
            let arc = arcs.last_mut().expect("checked above");
            arc.total_length_km += length;
            arc.segments.push(segment);
        } else {
            if !seen.insert((from.to_owned(), to.to_owned())) {
                return Err(row_err(
                    file,
                    row,
                    format!("rows of arc {from}->{to} are not contiguous"),
                ));
            }
            let tolls = if rec[4].is_empty() {
                0.0
            } else {
                parse_f64(file, row, "tolls_money", &rec[4])?
            };
            if tolls < 0.0 {
                return Err(row_err(
                    file,
                    row,
                    format!("tolls_money must be non-negative, got {tolls}"),
                ));
            }
            arcs.push(Arc::new(from, to, vec![segment], tolls));
        }
    }
    Ok(arcs)
}

/// Reads roads and arcs files into a [`Network`].
pub fn load_network(roads_file: &Path, arcs_file: &Path) -> Result<Network, DataError> {
    let roads_label = roads_file.display().to_string();
    let arcs_label = arcs_file.display().to_string();
    let roads = parse_roads_csv(open(roads_file)?, &roads_label)?;
    let arcs = parse_arcs_csv(open(arcs_file)?, &arcs_label, &roads)?;
    Network::new(roads, arcs)
}

/// Canonical roads CSV: file order, shortest round-trip number formatting.
pub fn write_roads_csv<W: Write>(network: &Network, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", ROADS_HEADER.join(","))?;
    for r in network.roads() {
        writeln!(out, "{},{},{}", r.id, r.road_type, r.heavy_vehicle_flow)?;
    }
    Ok(())
}

/// Canonical arcs CSV covering the listed (non-mirrored) arcs.
pub fn write_arcs_csv<W: Write>(network: &Network, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", ARCS_HEADER.join(","))?;
    for arc in network.file_arcs() {
        for (i, seg) in arc.segments.iter().enumerate() {
            if i == 0 {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    arc.from, arc.to, seg.road_id, seg.length_km, arc.tolls
                )?;
            } else {
                writeln!(out, "{},{},{},{},", arc.from, arc.to, seg.road_id, seg.length_km)?;
            }
        }
    }
    Ok(())
}

pub fn parse_traffic(text: &str, file: &str) -> Result<TrafficStats, DataError> {
    let stats: TrafficStats = toml::from_str(text).map_err(|e| DataError::Format {
        file: file.into(),
        message: e.to_string(),
    })?;
    stats.validate()?;
    Ok(stats)
}

pub fn load_traffic(path: &Path) -> Result<TrafficStats, DataError> {
    parse_traffic(&read_to_string(path)?, &path.display().to_string())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    depot: String,
    vehicle_count: usize,
    capacity: u32,
    #[serde(default)]
    allow_idle_vehicles: bool,
    nodes: Vec<NodeEntry>,
    #[serde(default)]
    demands: BTreeMap<String, u32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeEntry {
    id: String,
    name: Option<String>,
    lat: Option<f64>,
    lon: Option<f64>,
}

/// Parses the TOML instance description.
///
/// ```toml
/// depot = "limeira"
/// vehicle_count = 3
/// capacity = 24
///
/// [[nodes]]
/// id = "limeira"
/// name = "Limeira"
/// lat = -22.564
/// lon = -47.401
///
/// [demands]
/// piracicaba = 9
/// ```
pub fn parse_instance(text: &str, file: &str) -> Result<InstanceDef, DataError> {
    let raw: InstanceFile = toml::from_str(text).map_err(|e| DataError::Format {
        file: file.into(),
        message: e.to_string(),
    })?;
    let mut nodes = Vec::with_capacity(raw.nodes.len());
    for n in raw.nodes {
        let coords = match (n.lat, n.lon) {
            (Some(lat), Some(lon)) => Some((lat, lon)),
            (None, None) => None,
            _ => {
                return Err(DataError::Format {
                    file: file.into(),
                    message: format!("node {:?} needs both lat and lon or neither", n.id),
                })
            }
        };
        nodes.push(Node {
            name: n.name.unwrap_or_else(|| n.id.clone()),
            id: n.id,
            coords,
        });
    }
    Ok(InstanceDef {
        nodes,
        depot: raw.depot,
        demands: raw.demands,
        vehicle_count: raw.vehicle_count,
        capacity: raw.capacity,
        allow_idle_vehicles: raw.allow_idle_vehicles,
    })
}

pub fn load_instance(path: &Path) -> Result<InstanceDef, DataError> {
    parse_instance(&read_to_string(path)?, &path.display().to_string())
}

//! GeoJSON FeatureCollection ingestion for maps and observation windows.
//!
//! Features must carry an `id` property (string or number); geometries may be
//! Polygon or MultiPolygon, with holes. Coordinates are taken verbatim: the
//! data must already live in a planar coordinate reference system.

use std::collections::BTreeMap;

use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geometry::PolygonSet;

#[derive(Deserialize)]
struct FeatureCollectionFile {
    #[serde(rename = "type")]
    kind: String,
    features: Vec<FeatureFile>,
}

#[derive(Deserialize)]
struct FeatureFile {
    #[serde(default)]
    properties: Option<BTreeMap<String, Value>>,
    geometry: Option<GeometryFile>,
}

#[derive(Deserialize)]
#[serde(tag = "type")]
enum GeometryFile {
    Polygon { coordinates: Vec<Vec<Vec<f64>>> },
    MultiPolygon { coordinates: Vec<Vec<Vec<Vec<f64>>>> },
}

fn rings_to_parts(geom: &GeometryFile) -> Result<Vec<Vec<Vec<[f64; 2]>>>> {
    let to_ring = |ring: &Vec<Vec<f64>>| -> Result<Vec<[f64; 2]>> {
        ring.iter()
            .map(|pt| {
                if pt.len() < 2 || !pt[0].is_finite() || !pt[1].is_finite() {
                    Err(Error::Geometry("coordinate is not a finite [x, y]".into()))
                } else {
                    Ok([pt[0], pt[1]])
                }
            })
            .collect()
    };
    match geom {
        GeometryFile::Polygon { coordinates } => {
            let part: Result<Vec<_>> = coordinates.iter().map(to_ring).collect();
            Ok(vec![part?])
        }
        GeometryFile::MultiPolygon { coordinates } => coordinates
            .iter()
            .map(|poly| poly.iter().map(to_ring).collect())
            .collect(),
    }
}

fn parse_collection(text: &str) -> Result<FeatureCollectionFile> {
    let fc: FeatureCollectionFile = serde_json::from_str(text)?;
    if fc.kind != "FeatureCollection" {
        return Err(Error::Invalid(format!(
            "expected a FeatureCollection, found \"{}\"",
            fc.kind
        )));
    }
    Ok(fc)
}

/// Parse a map: one polygon set per feature, keyed by the `id` property.
pub fn parse_geojson_map(text: &str) -> Result<BTreeMap<String, PolygonSet>> {
    let fc = parse_collection(text)?;
    let mut out = BTreeMap::new();
    for (k, feature) in fc.features.iter().enumerate() {
        let id = feature
            .properties
            .as_ref()
            .and_then(|p| p.get("id"))
            .map(|v| match v {
                Value::String(s) => Ok(s.clone()),
                Value::Number(n) => Ok(n.to_string()),
                _ => Err(Error::Invalid(format!(
                    "feature {k}: property \"id\" must be a string or number"
                ))),
            })
            .transpose()?
            .ok_or_else(|| Error::Invalid(format!("feature {k} misses property \"id\"")))?;
        let geom = feature
            .geometry
            .as_ref()
            .ok_or_else(|| Error::Invalid(format!("feature {k} has no geometry")))?;
        let poly = PolygonSet::from_parts(rings_to_parts(geom)?)?;
        if out.insert(id.clone(), poly).is_some() {
            return Err(Error::Invalid(format!("duplicate feature id \"{id}\"")));
        }
    }
    if out.is_empty() {
        return Err(Error::Invalid("FeatureCollection has no features".into()));
    }
    Ok(out)
}

/// Parse an observation window: all feature geometries pooled into one
/// polygon set (multi-part regions and holes supported).
pub fn parse_geojson_window(text: &str) -> Result<PolygonSet> {
    let fc = parse_collection(text)?;
    let mut parts = Vec::new();
    for feature in &fc.features {
        if let Some(geom) = &feature.geometry {
            parts.extend(rings_to_parts(geom)?);
        }
    }
    if parts.is_empty() {
        return Err(Error::Invalid("window file contains no geometry".into()));
    }
    PolygonSet::from_parts(parts)
}

/// Serialize a map as a FeatureCollection with `id` properties.
pub fn write_geojson_map(map: &BTreeMap<String, PolygonSet>) -> String {
    let features: Vec<Value> = map
        .iter()
        .map(|(id, poly)| {
            // regroup rings: each outer ring starts a part, holes follow
            let mut parts: Vec<Vec<Vec<[f64; 2]>>> = Vec::new();
            for ring in &poly.rings {
                let mut pts = ring.pts.clone();
                if let Some(first) = pts.first().copied() {
                    pts.push(first);
                }
                if ring.is_hole() {
                    if let Some(last) = parts.last_mut() {
                        last.push(pts);
                        continue;
                    }
                }
                parts.push(vec![pts]);
            }
            let coords: Value = if parts.len() == 1 {
                json!(parts[0])
            } else {
                json!(parts)
            };
            json!({
                "type": "Feature",
                "properties": {"id": id},
                "geometry": {
                    "type": if parts.len() == 1 { "Polygon" } else { "MultiPolygon" },
                    "coordinates": coords,
                }
            })
        })
        .collect();
    serde_json::to_string_pretty(&json!({
        "type": "FeatureCollection",
        "features": features,
    }))
    .expect("geojson serialization cannot fail")
}

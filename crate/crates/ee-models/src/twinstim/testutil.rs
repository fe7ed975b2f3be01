//! Shared fixtures for the point-process tests.

use std::collections::BTreeMap;

use crate::data::{build_point_pattern, EventRecord, PointPattern, StGrid, StGridRow};
use crate::geometry::PolygonSet;
use crate::kernels::{SpatialKernel, TemporalKernel};
use crate::twinstim::{EndemicSpec, EpidemicSpec, TwinstimSpec};

/// 2 x 2 window split into two tiles, `n_blocks` blocks of length 10.
pub fn two_tile_grid(n_blocks: usize, popdensity: [f64; 2]) -> StGrid {
    let mut rows = Vec::new();
    for b in 0..n_blocks {
        for (t, tile) in ["L", "R"].iter().enumerate() {
            rows.push(StGridRow {
                start: b as f64 * 10.0,
                stop: (b as f64 + 1.0) * 10.0,
                tile: tile.to_string(),
                area: 2.0,
                covariates: BTreeMap::from([
                    ("popdensity".to_string(), popdensity[t]),
                    ("trend".to_string(), b as f64 - 0.5),
                ]),
            });
        }
    }
    StGrid::from_rows(rows).unwrap()
}

pub fn window() -> PolygonSet {
    PolygonSet::rectangle(0.0, 0.0, 2.0, 2.0)
}

pub fn event(time: f64, x: f64, y: f64, mark: f64) -> EventRecord {
    EventRecord {
        time,
        loc: [x, y],
        event_type: "B".into(),
        eps_t: 15.0,
        eps_s: 1.0,
        tile: if x < 1.0 { "L".into() } else { "R".into() },
        marks: BTreeMap::from([("m".to_string(), mark)]),
    }
}

pub fn pattern(records: Vec<EventRecord>, n_blocks: usize) -> PointPattern {
    build_point_pattern(
        records,
        window(),
        two_tile_grid(n_blocks, [1.0, 1.0]),
        None,
        Some(64),
    )
    .unwrap()
}

pub fn spec_full() -> TwinstimSpec {
    TwinstimSpec {
        endemic: EndemicSpec {
            intercept: true,
            covariates: vec!["trend".into()],
            offset: Some("popdensity".into()),
        },
        epidemic: Some(EpidemicSpec {
            intercept: true,
            covariates: vec!["m".into()],
        }),
        siaf: SpatialKernel::Gaussian,
        tiaf: TemporalKernel::Exponential,
    }
}


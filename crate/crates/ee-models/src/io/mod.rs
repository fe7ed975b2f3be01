//! File ingestion and serialization: delimited tables, GeoJSON maps, and the
//! JSON model specs. These parsers are the untrusted-input surface and are
//! exercised by the fuzz targets.

mod geojson;
mod model_spec;
mod tables;

pub use geojson::{parse_geojson_map, parse_geojson_window, write_geojson_map};
pub use model_spec::{
    parse_model_spec, parse_model_spec_str, ComponentSpecFile, Hhh4SpecFile, ParsedSpec,
    SeasonSpecFile, TwinsirSpecFile, TwinstimSpecFile, WeightsSpecFile,
};
pub use tables::{
    parse_adjacency, parse_counts_table, parse_event_history_table, parse_events_table,
    parse_stgrid_table, write_counts_table, write_event_history_table, write_events_table,
    write_scores_long, CountsTable,
};

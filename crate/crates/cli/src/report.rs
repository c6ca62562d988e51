use std::collections::BTreeMap;

use anyhow::Result;
use serde::{Deserialize, Serialize};

use nrchain_core::cohesive::Method;
use nrchain_core::graph::GraphStats;
use nrchain_core::ingest::IngestSummary;
use nrchain_core::SCHEMA_VERSION;

use crate::stages::{read_json, write_json, DecomposeIndex, KnoxHighlight, KnoxSummary, Layout, LevelSummary, MethodReport, PairSummary};

/// JSON schema for `report.json`.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSection {
    pub input_rows: usize,
    pub rejected_rows: usize,
    pub duplicates_merged: usize,
    pub events: usize,
    pub events_by_category: BTreeMap<String, usize>,
    pub epoch: String,
    pub utm_zone: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSection {
    pub r_x: f64,
    pub r_y: f64,
    pub r_t: f64,
    pub vertices: usize,
    pub edges: usize,
    pub connected_components: usize,
    pub nontrivial_components: usize,
    pub max_diameter: u32,
    pub mean_clustering_coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSection {
    pub truncated: bool,
    pub levels: Vec<LevelSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub dataset: DatasetSection,
    pub graph: GraphSection,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub decompose: Option<BTreeMap<Method, MethodSection>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub knox: Option<BTreeMap<String, KnoxHighlight>>,
}

/// Merges stage summaries into `report.json`. Ingest, pairs and stats
/// outputs are required; decompose and knox sections appear only when
/// those stages ran.
pub fn run_report(layout: &Layout) -> Result<Report> {
    let ingest: IngestSummary = read_json(&layout.ingest_summary(), "ingest")?;
    let pairs: PairSummary = read_json(&layout.pairs_summary(), "pairs")?;
    let stats: GraphStats = read_json(&layout.graph_stats(), "stats")?;

    let decompose = if layout.decompose_index().exists() {
        let index: DecomposeIndex = read_json(&layout.decompose_index(), "decompose")?;
        let mut methods = BTreeMap::new();
        for m in index.methods {
            let r: MethodReport = read_json(&layout.decompose_method(m), "decompose")?;
            methods.insert(
                m,
                MethodSection {
                    truncated: r.result.truncated,
                    levels: r.levels,
                },
            );
        }
        Some(methods).filter(|m| !m.is_empty())
    } else {
        None
    };
    let knox = if layout.knox_summary().exists() {
        let summary: KnoxSummary = read_json(&layout.knox_summary(), "knox")?;
        Some(summary.categories)
    } else {
        None
    };

    let report = Report {
        schema_version: SCHEMA_VERSION,
        dataset: DatasetSection {
            input_rows: ingest.input_rows,
            rejected_rows: ingest.rejected_rows,
            duplicates_merged: ingest.duplicates_merged,
            events: ingest.events,
            events_by_category: ingest.events_by_category,
            epoch: ingest.epoch,
            utm_zone: ingest.utm_zone,
        },
        graph: GraphSection {
            r_x: pairs.r_x,
            r_y: pairs.r_y,
            r_t: pairs.r_t,
            vertices: stats.vertices,
            edges: stats.edges,
            connected_components: stats.connected_components,
            nontrivial_components: stats.nontrivial_components,
            max_diameter: stats.max_diameter,
            mean_clustering_coefficient: stats.mean_clustering_coefficient,
        },
        decompose,
        knox,
    };
    write_json(&layout.report(), &report)?;
    Ok(report)
}

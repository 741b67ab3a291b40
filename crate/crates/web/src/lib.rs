//! Browser bindings: graph drawing, test-plan synthesis and compensation on the bundled reference data.

use std::collections::BTreeMap;
use std::fmt::Write;

use capnet::deltas::{compensate, FuzzyParams};
use capnet::network::{build_pipeline, ConjugationGraph, EdgeOrigin, GraphInputs, GraphParams};
use capnet::profiles::{propagate_main_level, ProfileDataset, RequirementSet};
use capnet::synthesis::{render_shaded, synthesize, BranchAndBound, SynthesisParams};
use capnet::taxonomy::CapabilityId;
use wasm_bindgen::prelude::*;

fn reference_graph(threshold: f64, repair: bool) -> Result<(ConjugationGraph, String), String> {
    let inputs = GraphInputs::reference();
    let params = GraphParams { threshold, repair, ..GraphParams::default() };
    let build = build_pipeline(&inputs, &params).map_err(|e| e.to_string())?;
    let summary = format!("{} edges pruned, {} edges added", build.pruned.len(), build.added.len());
    Ok((build.graph.with_names(&inputs.catalog), summary))
}

/// Layered SVG: column = longest distance from a source.
pub fn graph_svg(graph: &ConjugationGraph) -> Result<String, String> {
    let order = graph.topological_order().map_err(|e| e.to_string())?;
    let mut rank: BTreeMap<CapabilityId, usize> = BTreeMap::new();
    for id in &order {
        let r = graph.predecessors(id).iter().map(|p| rank[p] + 1).max().unwrap_or(0);
        rank.insert(*id, r);
    }
    let mut columns: BTreeMap<usize, Vec<CapabilityId>> = BTreeMap::new();
    for id in &order {
        columns.entry(rank[id]).or_default().push(*id);
    }
    let (dx, dy, pad) = (150.0, 46.0, 40.0);
    let mut pos = BTreeMap::new();
    for (c, ids) in &columns {
        for (r, id) in ids.iter().enumerate() {
            pos.insert(*id, (pad + *c as f64 * dx, pad + r as f64 * dy));
        }
    }
    let width = pad * 2.0 + columns.len().saturating_sub(1) as f64 * dx + 60.0;
    let height = pad * 2.0 + columns.values().map(Vec::len).max().unwrap_or(1).saturating_sub(1) as f64 * dy;
    let mut svg = String::new();
    let _ = write!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#);
    for e in graph.edges() {
        let ((x1, y1), (x2, y2)) = (pos[&e.from], pos[&e.to]);
        let colour = match e.origin {
            EdgeOrigin::Interrelation => "#888",
            EdgeOrigin::StrongCandidate => "#c60",
            EdgeOrigin::ReachabilityRepair => "#06c",
        };
        let _ = write!(svg, r#"<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" stroke="{colour}" stroke-opacity="0.6"><title>{} → {} {}</title></line>"#, e.from, e.to, e.relation);
    }
    for (id, (x, y)) in &pos {
        let name = graph.name(id).unwrap_or("");
        let _ = write!(
            svg,
            r##"<g><title>{id} {}</title><rect x="{}" y="{}" width="60" height="20" rx="4" fill="#fff" stroke="#333"/><text x="{x}" y="{}" text-anchor="middle">{id}</text></g>"##,
            escape(name),
            x - 30.0,
            y - 10.0,
            y + 4.0
        );
    }
    svg.push_str("</svg>");
    Ok(svg)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Returns `{summary, svg, dot}` for the reference graph.
pub fn graph_view(threshold: f64, repair: bool) -> Result<String, String> {
    let (graph, summary) = reference_graph(threshold, repair)?;
    let doc = serde_json::json!({ "summary": summary, "svg": graph_svg(&graph)?, "dot": graph.to_dot() });
    Ok(doc.to_string())
}

/// Returns `{objective, lp_bound, shaded, sequences, warnings}`.
pub fn plan(n_min: usize, min_visits: usize, max_visits: usize) -> Result<String, String> {
    let (graph, _) = reference_graph(0.4, true)?;
    let catalog = GraphInputs::reference().catalog;
    let params = SynthesisParams { n_min, min_visits, max_visits };
    let run = synthesize(&graph, &catalog, &params, &BranchAndBound::default()).map_err(|e| e.to_string())?;
    let doc = serde_json::json!({
        "objective": run.solution.objective,
        "lp_bound": run.solution.lp_bound,
        "shaded": render_shaded(&run.sequences),
        "sequences": run.sequences,
        "warnings": run.warnings,
    });
    Ok(doc.to_string())
}

/// Compensates the first profile in `profiles_csv` against every action in `requirements_csv`.
pub fn allocate(profiles_csv: &str, requirements_csv: &str, xi: &str, theta: u32) -> Result<String, String> {
    let inputs = GraphInputs::reference();
    let (graph, _) = reference_graph(0.4, true)?;
    let profiles = ProfileDataset::read_csv(profiles_csv.as_bytes(), Some(&inputs.catalog), "profiles").map_err(|e| e.to_string())?;
    let profile = profiles.profiles().first().ok_or("no profile rows")?;
    let profile = propagate_main_level(profile, &inputs.catalog);
    let actions = RequirementSet::read_csv(requirements_csv.as_bytes(), Some(&inputs.catalog)).map_err(|e| e.to_string())?;
    let mut fuzz = FuzzyParams { theta, ..FuzzyParams::default() };
    for item in xi.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (id, v) = item.split_once('=').ok_or_else(|| format!("expected id=value, got {item:?}"))?;
        let id: CapabilityId = id.trim().parse().map_err(|e| format!("{e}"))?;
        let v: u8 = v.trim().parse().map_err(|_| format!("bad slack in {item:?}"))?;
        fuzz.xi.insert(id, v);
    }
    let traces = actions.iter().map(|a| compensate(a, &profile, &graph, &fuzz)).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
    let text: String = traces.iter().map(|t| t.to_text()).collect();
    Ok(serde_json::json!({ "text": text, "traces": traces }).to_string())
}

#[wasm_bindgen(js_name = graphView)]
pub fn graph_view_js(threshold: f64, repair: bool) -> Result<String, JsError> {
    graph_view(threshold, repair).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = plan)]
pub fn plan_js(n_min: usize, min_visits: usize, max_visits: usize) -> Result<String, JsError> {
    plan(n_min, min_visits, max_visits).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = allocate)]
pub fn allocate_js(profiles_csv: &str, requirements_csv: &str, xi: &str, theta: u32) -> Result<String, JsError> {
    allocate(profiles_csv, requirements_csv, xi, theta).map_err(|e| JsError::new(&e))
}

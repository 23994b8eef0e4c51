//! Browser bindings for three toolkit operations. Each takes plain text in
//! the toolkit's file formats and returns a JSON string; failures come back
//! as `{"error": "..."}`.

use serde_json::{json, Value};
use visunit::cluster::{cluster_family, ConfusionMatrix};
use visunit::eval::{align, EditOp};
use visunit::lexicon::{guess_baselines, homophene_groups, parse_lexicon, Coverage, Inventory, P2VMap};
use wasm_bindgen::prelude::wasm_bindgen;

fn respond(r: visunit::Result<Value>) -> String {
    r.unwrap_or_else(|e| json!({ "error": e.to_string() })).to_string()
}

fn units(map: &P2VMap) -> Value {
    map.units().iter().map(|u| json!({ "label": u.label, "phonemes": u.phonemes })).collect()
}

/// Greedy merge family of a confusion matrix (`labels ...` header, one row
/// of counts per label), with its merge trace.
pub fn cluster_json(matrix: &str, seed: u64) -> String {
    respond((|| {
        let k = ConfusionMatrix::parse(matrix)?;
        let family = cluster_family(&k, &Inventory::british_english(), seed)?;
        let maps: Vec<Value> =
            family.maps.iter().rev().map(|(size, map)| json!({ "size": size, "units": units(map) })).collect();
        let trace: Vec<Value> = family
            .trace
            .records
            .iter()
            .map(|r| json!({ "size": r.size, "first": r.first, "second": r.second, "q": r.q, "tie": r.tie }))
            .collect();
        Ok(json!({ "maps": maps, "trace": trace }))
    })())
}

/// Homophene groups of a lexicon under a P2V map, with both guessing
/// baselines.
pub fn homophenes_json(lexicon: &str, map: &str) -> String {
    respond((|| {
        let lex = parse_lexicon(lexicon, &Inventory::british_english())?;
        let map = P2VMap::parse(map)?;
        let groups = homophene_groups(&lex, &map, Coverage::Lenient)?;
        let b = guess_baselines(&lex, &map, Coverage::Lenient)?;
        let groups: Vec<Value> =
            groups.iter().map(|(spelling, words)| json!({ "units": spelling, "words": words })).collect();
        Ok(json!({
            "groups": groups,
            "unit_chance": b.unit_chance,
            "homophene_ceiling": b.homophene_ceiling,
        }))
    })())
}

/// Minimum-cost alignment of two whitespace-separated transcripts.
pub fn align_json(reference: &str, hypothesis: &str) -> String {
    let r: Vec<&str> = reference.split_whitespace().collect();
    let h: Vec<&str> = hypothesis.split_whitespace().collect();
    let a = align(&r, &h);
    let op = |o: EditOp| match o {
        EditOp::Match => "match",
        EditOp::Substitution => "sub",
        EditOp::Deletion => "del",
        EditOp::Insertion => "ins",
    };
    let pairs: Vec<Value> = a
        .pairs
        .iter()
        .map(|p| json!({ "op": op(p.op), "ref": p.reference, "hyp": p.hypothesis }))
        .collect();
    let c = a.counts;
    json!({
        "pairs": pairs,
        "N": c.n, "D": c.d, "S": c.s, "I": c.i,
        "C": c.correctness(),
        "accuracy": c.accuracy(),
    })
    .to_string()
}

#[wasm_bindgen]
pub fn cluster(matrix: &str, seed: u32) -> String {
    cluster_json(matrix, u64::from(seed))
}

#[wasm_bindgen]
pub fn homophenes(lexicon: &str, map: &str) -> String {
    homophenes_json(lexicon, map)
}

#[wasm_bindgen(js_name = align)]
pub fn align_transcripts(reference: &str, hypothesis: &str) -> String {
    align_json(reference, hypothesis)
}

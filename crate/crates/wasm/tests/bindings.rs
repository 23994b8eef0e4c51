use serde_json::Value;
use visunit_wasm::{align_json, cluster_json, homophenes_json};

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn cluster_returns_every_size_and_the_trace() {
    let v = parse(&cluster_json("labels aa iy p t\naa 8 2 0 0\niy 1 9 0 0\np 0 0 7 3\nt 0 0 3 7\n", 0));
    let sizes: Vec<u64> = v["maps"].as_array().unwrap().iter().map(|m| m["size"].as_u64().unwrap()).collect();
    assert_eq!(sizes, [4, 3, 2]);
    assert_eq!(v["trace"].as_array().unwrap().len(), 2);
    assert_eq!(v["maps"][2]["units"].as_array().unwrap().len(), 2);
}

#[test]
fn bad_input_reports_an_error() {
    assert!(parse(&cluster_json("rows\n", 0))["error"].is_string());
    assert!(parse(&homophenes_json("TALK t q k\n", "C: t\n"))["error"].is_string());
}

#[test]
fn homophene_groups_and_baselines() {
    let lex = "TALK t ao k\nTONGUE t ah ng\nDOG d ao g\nDUG d ah g\n";
    let v = parse(&homophenes_json(lex, "C: t d\nV1: ao ah\nH: k g ng\n"));
    assert_eq!(v["groups"].as_array().unwrap().len(), 1);
    assert_eq!(v["groups"][0]["words"].as_array().unwrap().len(), 4);
    assert_eq!(v["homophene_ceiling"].as_f64(), Some(0.25));
    assert!((v["unit_chance"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn alignment_counts() {
    let v = parse(&align_json("a b c d", "a x c d e"));
    assert_eq!((v["N"].as_u64(), v["S"].as_u64(), v["D"].as_u64(), v["I"].as_u64()), (Some(4), Some(1), Some(0), Some(1)));
    assert_eq!(v["C"].as_f64(), Some(0.75));
    assert_eq!(v["accuracy"].as_f64(), Some(0.5));
    assert_eq!(v["pairs"][1]["op"], "sub");
    assert!(parse(&align_json("", "a"))["C"].is_null());
}

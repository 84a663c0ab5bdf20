mod common;

use common::{arg, json, swn, Workspace};
use swn_core::eventlog::{parse_csv, CsvColumns};
use swn_core::fixtures;

fn code(out: &std::process::Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn discover_remd_reaches_zero() {
    let ws = Workspace::new();
    let out = swn([
        "discover",
        "--net",
        &arg(&ws.path("pc_unweighted.pnml")),
        "--log",
        &arg(&ws.path("pc.csv")),
        "--measure",
        "remd",
        "--seed",
        "42",
        "--out-net",
        &arg(&ws.path("out.pnml")),
        "--out-convergence",
        &arg(&ws.path("conv.csv")),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert_eq!(report["schema"], "stochastic-weights/report/1");
    assert_eq!(report["method"], "derivative-free");
    assert!(report["final_value"].as_f64().unwrap() <= 1e-3);
    assert!(report.get("timings").is_none());

    let csv = String::from_utf8(ws.read("conv.csv")).unwrap();
    assert!(csv.starts_with("iteration,value\n0,"));

    // the written net evaluates to the reported optimum
    let eval = swn(["evaluate", "--net", &arg(&ws.path("out.pnml")), "--log", &arg(&ws.path("pc.csv")), "--measures", "remd"]);
    assert_eq!(code(&eval), 0);
    assert!(json(&eval)[0]["value"].as_f64().unwrap() <= 1e-3);
}

#[test]
fn discover_with_config_file_and_timings() {
    let ws = Workspace::new();
    let cfg = ws.put("run.cfg", b"net = pc.pnml\nlog = pc.xes\nmeasure = remd\nn0 = 2\nmax_iter = 3\n");
    let out = swn(["discover", "--config", &arg(&cfg), "--measure", "lh", "--timings"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    // the flag wins over the file
    assert_eq!(report["measure"], "lh");
    assert_eq!(report["n0"], 2);
    assert_eq!(report["max_iter"], 3);
    for key in ["unfold_ms", "lh_ms", "remd_ms", "optimization_ms"] {
        assert!(report["timings"][key].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn discover_input_errors() {
    let ws = Workspace::new();
    let missing = swn(["discover", "--net", &arg(&ws.path("pc.pnml")), "--log", &arg(&ws.path("nope.csv"))]);
    assert_eq!(code(&missing), 2);

    let pnml = String::from_utf8(ws.read("pc.pnml")).unwrap();
    let broken = pnml.replace(r#"source="p2" target="b""#, r#"source="source" target="b""#);
    let bad = ws.put("bad.pnml", broken.as_bytes());
    let out = swn(["discover", "--net", &arg(&bad), "--log", &arg(&ws.path("pc.csv"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("sink"));

    let out = swn(["discover", "--net", &arg(&ws.path("pc.pnml")), "--log", &arg(&ws.path("pc.csv")), "--n0", "0"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn discover_fails_when_no_start_is_valid() {
    let ws = Workspace::new();
    let log = ws.put("alien.csv", b"case,activity\nc1,z\n");
    let out = swn(["discover", "--net", &arg(&ws.path("pc.pnml")), "--log", &arg(&log), "--measure", "remd"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn evaluate_reference_values() {
    let ws = Workspace::new();
    let out = swn(["evaluate", "--net", &arg(&ws.path("pc.pnml")), "--log", &arg(&ws.path("pc.xes"))]);
    assert_eq!(code(&out), 0);
    let r = json(&out);
    assert_eq!(r[0]["kind"], "LH");
    assert!((r[0]["value"].as_f64().unwrap() - 1.3040115).abs() < 1e-7);
    assert_eq!(r[1]["kind"], "rEMD");
    assert!(r[1]["value"].as_f64().unwrap().abs() < 1e-12);
    assert_eq!(r[2]["kind"], "tEMD");
    assert!(r[2]["value"].as_f64().unwrap().abs() < 1e-12);

    let out = swn(["evaluate", "--net", &arg(&ws.path("pc_unweighted.pnml")), "--log", &arg(&ws.path("pc.csv")), "--measures", "lh"]);
    let lh = json(&out)[0]["value"].as_f64().unwrap();
    let expected = 0.3 * 6f64.ln() + 0.7 * 3f64.ln();
    assert!((lh - expected).abs() < 1e-12, "{lh} vs {expected}");
}

#[test]
fn evaluate_flags_partial_temd() {
    let ws = Workspace::new();
    // a silent self-loop that mostly keeps spinning
    let net = br#"<?xml version="1.0"?>
<pnml><net id="n" type="http://www.pnml.org/version-2009/grammar/ptnet"><page id="g">
<place id="i"><initialMarking><text>1</text></initialMarking></place><place id="p"/><place id="o"/>
<transition id="start"><name><text>tau</text></name></transition>
<transition id="spin"><name><text>tau</text></name><toolspecific tool="stochastic-weights" version="1"><weight>99</weight></toolspecific></transition>
<transition id="a"><name><text>a</text></name></transition>
<arc id="1" source="i" target="start"/><arc id="2" source="start" target="p"/>
<arc id="3" source="p" target="spin"/><arc id="4" source="spin" target="p"/>
<arc id="5" source="p" target="a"/><arc id="6" source="a" target="o"/>
</page></net></pnml>"#;
    let net = ws.put("spin.pnml", net);
    let log = ws.put("a.csv", b"case,activity\n1,a\n");
    let out = swn(["evaluate", "--net", &arg(&net), "--log", &arg(&log), "--measures", "temd", "--max-level", "5"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out);
    assert_eq!(r[0]["partial"], true);
    assert!(r[0]["coverage_used"].as_f64().unwrap() < 0.8);

    let timed = |t: &str| code(&swn(["evaluate", "--net", &arg(&net), "--log", &arg(&log), "--measures", "temd", "--temd-timeout", t]));
    assert_eq!(timed("-1"), 2);
    // nothing unfolds within a zero budget
    assert_eq!(timed("0"), 3);
    assert_eq!(timed("60"), 0);
}

#[test]
fn unfold_outputs() {
    let ws = Workspace::new();
    let out = swn(["unfold", "--net", &arg(&ws.path("nl.pnml")), "--log", &arg(&ws.path("nl.xes"))]);
    assert_eq!(code(&out), 0);
    let r = json(&out);
    let aa = r["traces"].as_array().unwrap().iter().find(|t| t["trace"] == serde_json::json!(["A", "A"])).unwrap();
    assert!((aa["prob"].as_f64().unwrap() - 11.0 / 81.0).abs() < 1e-12);
    assert_eq!(r["dropped_mass"], 0.0);

    let out = swn(["unfold", "--net", &arg(&ws.path("pc.pnml")), "--coverage", "1.0", "--out-dot", &arg(&ws.path("rg.dot"))]);
    let r = json(&out);
    assert_eq!(r["traces"].as_array().unwrap().len(), 4);
    assert_eq!(r["dropped_mass"], 0.0);
    assert!(String::from_utf8(ws.read("rg.dot")).unwrap().starts_with("digraph"));

    let empty = ws.put("empty.csv", b"case,activity\n");
    assert_eq!(code(&swn(["unfold", "--net", &arg(&ws.path("nl.pnml")), "--log", &arg(&empty)])), 2);
}

#[test]
fn convert_round_trips() {
    let ws = Workspace::new();
    let run = |from: &str, to: &str| code(&swn(["convert", "--input", &arg(&ws.path(from)), "--output", &arg(&ws.path(to))]));
    assert_eq!(run("pc.csv", "l1.xes"), 0);
    assert_eq!(run("l1.xes", "l1.csv"), 0);
    let back = parse_csv(&ws.read("l1.csv"), &CsvColumns::default()).unwrap();
    assert_eq!(back, fixtures::parallel_choice_log());

    assert_eq!(run("pc.pnml", "c1.pnml"), 0);
    assert_eq!(run("c1.pnml", "c2.pnml"), 0);
    assert_eq!(ws.read("c1.pnml"), ws.read("c2.pnml"));

    assert_eq!(run("pc.csv", "l1.json"), 2);
    assert_eq!(run("pc.csv", "x.pnml"), 2);
}

use dlpar_core::fixtures;
use dlpar_demo::{eval_value, learn_value, refine_value};

#[test]
fn eval_top_and_target() {
    let v = eval_value(fixtures::TRAINS_KB, fixtures::TRAINS_EXAMPLES, "Thing");
    assert_eq!((v["pos"].as_u64(), v["neg"].as_u64(), v["accuracy"].as_f64()), (Some(5), Some(5), Some(0.5)));
    let v = eval_value(fixtures::TRAINS_KB, fixtures::TRAINS_EXAMPLES, fixtures::TRAINS_TARGET);
    assert_eq!((v["pos"].as_u64(), v["neg"].as_u64()), (Some(5), Some(0)));
}

#[test]
fn errors_are_reported() {
    let v = eval_value(fixtures::TRAINS_KB, fixtures::TRAINS_EXAMPLES, "(hasCar some");
    assert!(v["error"].is_string());
    assert!(v["caret"].as_str().unwrap().contains('^'));
    let v = eval_value("class", "", "Thing");
    assert!(v["error"].is_string());
}

#[test]
fn refine_lists_candidates() {
    let v = refine_value(fixtures::TRAINS_KB, fixtures::TRAINS_EXAMPLES, "Car", 3);
    let names: Vec<&str> = v["refinements"].as_array().unwrap().iter().map(|r| r["concept"].as_str().unwrap()).collect();
    assert!(names.contains(&"Closed"));
    assert!(names.iter().all(|n| *n != "Car"));
    assert_eq!(v["total"].as_u64().unwrap() as usize, names.len());
}

#[test]
fn learn_smoke_fixture() {
    let v = learn_value(fixtures::SMOKE_KB, fixtures::SMOKE_EXAMPLES, 6, 4, 3, 10_000);
    assert_eq!(v["status"], "solved");
    assert_eq!(v["hypotheses"][0]["accuracy"], 1.0);
}

use deconfound::datasets::builtin;
use deconfound::report::{display, estimate, full_precision, real, value_of, ReportDocument};
use deconfound_core::{Estimate, Undefined};
use serde_json::Value;

#[test]
fn full_precision_round_trips() {
    for v in [
        0.1,
        1.0 / 3.0,
        6.02214076e23,
        5e-324,
        -2.5,
        0.8817,
        f64::MAX,
        1.0,
    ] {
        let n = full_precision(v);
        assert_eq!(n.as_f64(), Some(v), "{v}");
        let text = serde_json::to_string(&n).unwrap();
        assert_eq!(text.parse::<f64>().unwrap(), v);
    }
}

#[test]
fn display_keeps_four_significant_digits() {
    assert_eq!(display(0.0), "0");
    assert_eq!(display(0.88168), "0.8817");
    assert_eq!(display(6.1234), "6.123");
    assert_eq!(display(467.0 / 518.0), "0.9015");
    assert_eq!(display(1234.56), "1235");
    assert_eq!(display(-12.345), "-12.35");
    assert_eq!(display(4_894_511.0), "4.895e6");
    assert_eq!(display(2.4e-7), "2.400e-7");
}

#[test]
fn non_finite_values_carry_a_tag() {
    let inf = real(f64::INFINITY);
    assert_eq!(inf["value"], Value::Null);
    assert_eq!(inf["tag"], "infinite");
    let nan = real(f64::NAN);
    assert_eq!(nan["tag"], "undefined");
    let undefined = estimate(Estimate::Undefined(Undefined::EmptyCondition));
    assert_eq!(undefined["value"], Value::Null);
    assert_eq!(undefined["tag"], "undefined");
    assert!(undefined["reason"].is_string());
    assert_eq!(value_of(&undefined), None);
    assert_eq!(value_of(&estimate(Estimate::Value(0.25))), Some(0.25));
}

fn keys_sorted(v: &Value) -> bool {
    match v {
        Value::Object(m) => {
            let keys: Vec<&String> = m.keys().collect();
            keys.windows(2).all(|w| w[0] < w[1]) && m.values().all(keys_sorted)
        }
        Value::Array(a) => a.iter().all(keys_sorted),
        _ => true,
    }
}

#[test]
fn rendering_is_canonical() {
    let t = builtin("kidney1986").unwrap();
    let doc = ReportDocument::new("builtin:kidney1986", t.clone());
    let a = doc.render();
    assert_eq!(a, ReportDocument::new("builtin:kidney1986", t).render());
    assert!(a.ends_with("}\n"));
    let parsed: Value = serde_json::from_str(&a).unwrap();
    assert!(keys_sorted(&parsed));
    assert_eq!(parsed["input"]["cells"], 16);
    assert_eq!(parsed["input"]["observed_cells"], 16);
    assert!(parsed.get("effects").is_none());
}

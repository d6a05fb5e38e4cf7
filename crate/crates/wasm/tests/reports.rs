use czhardy_wasm::{covering_report, heat_row_report, spectrum_report, MAX_DIM};

#[test]
fn covering_marks_level_set_inside_envelopes() {
    let r = covering_report(2, 5, 2, "3/2", 7).unwrap();
    let n = r["tree"]["parents"].as_array().unwrap().len();
    assert_eq!(r["values"].as_array().unwrap().len(), n);
    let mut covered = vec![false; n];
    for s in r["sets"].as_array().unwrap() {
        for v in s["envelope"].as_array().unwrap() {
            covered[v.as_u64().unwrap() as usize] = true;
        }
    }
    for v in r["level_set"].as_array().unwrap() {
        assert!(covered[v.as_u64().unwrap() as usize]);
    }
    assert_eq!(r["certificate"]["disjoint"], true);
}

#[test]
fn spectrum_matches_closed_form_extremes() {
    let r = spectrum_report(3, 4).unwrap();
    let values: Vec<f64> = r["values"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(values.len(), 121);
    assert!((values[0] - r["formula_min"].as_f64().unwrap()).abs() < 1e-10);
    assert!((values[120] - r["formula_max"].as_f64().unwrap()).abs() < 1e-10);
}

#[test]
fn heat_row_is_a_positive_row_of_mass_at_most_one() {
    let r = heat_row_report(2, 5, 1.0, 3).unwrap();
    let mass: Vec<f64> = r["mass"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(mass.iter().all(|&m| m > -1e-12));
    let total = r["total_mass"].as_f64().unwrap();
    assert!(total > 0.0 && total <= 1.0 + 1e-12);
    // t = 0 is the identity
    let r = heat_row_report(2, 5, 0.0, 3).unwrap();
    let mass = r["mass"].as_array().unwrap();
    assert!((mass[3].as_f64().unwrap() - 1.0).abs() < 1e-10);
}

#[test]
fn bad_inputs_are_rejected() {
    assert!(covering_report(2, 4, 2, "half", 0).is_err());
    assert!(covering_report(1, 4, 2, "1", 0).is_err());
    assert!(heat_row_report(2, 3, 1.0, 10_000).is_err());
    assert!(heat_row_report(2, 3, -1.0, 0).is_err());
    assert!(spectrum_report(3, 8).unwrap_err().contains(&MAX_DIM.to_string()));
}

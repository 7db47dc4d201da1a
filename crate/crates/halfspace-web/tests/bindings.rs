use halfspace_web::{mode_profile_json, nonvanishing_map_json, roots_along_ray_json};
use serde_json::Value;

#[test]
fn roots_along_ray_reports_decaying_modes() {
    let v: Value = serde_json::from_str(&roots_along_ray_json(1.0, 1.0, 0.5, 1.0, 100.0, 8).unwrap()).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 8);
    for r in rows {
        for d in r["decay"].as_array().unwrap() {
            assert!(d.as_f64().unwrap() > 0.0);
        }
    }
}

#[test]
fn roots_along_ray_rejects_bad_range() {
    assert!(roots_along_ray_json(1.0, 1.0, 0.0, 5.0, 1.0, 4).is_err());
}

#[test]
fn mode_profile_decays_away_from_wall() {
    let v: Value = serde_json::from_str(&mode_profile_json(1.0, 1.0, 3.0, 1.0, 1.0, 30.0, 61).unwrap()).unwrap();
    let rows = v["rows"].as_array().unwrap();
    let last = rows.last().unwrap().as_array().unwrap();
    for c in &last[1..] {
        assert!(c.as_f64().unwrap().abs() < 1e-6);
    }
}

#[test]
fn nonvanishing_map_is_positive() {
    let v: Value = serde_json::from_str(&nonvanishing_map_json(1.0, 0.5, 100.0, 4, 5).unwrap()).unwrap();
    let cells = v["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 20);
    for c in cells {
        assert!(c[2].as_f64().unwrap() > 0.1 && c[3].as_f64().unwrap() > 0.1);
    }
}

#[test]
fn invalid_parameters_are_reported() {
    assert!(mode_profile_json(-1.0, 1.0, 3.0, 0.0, 1.0, 10.0, 10).is_err());
}

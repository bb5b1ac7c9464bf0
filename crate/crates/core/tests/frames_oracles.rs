//! Frame models checked against hand calculations.

use arrowsos::frames::{self, builtin, FrameModel, RunMode};
use arrowsos::linalg::is_psd;
use arrowsos::sdpcore::Backend;

/// Horizontal cantilever of length `len`, clamped at the origin, with
/// `I(x) = x` and `E = 1`.
fn cantilever(len: f64, tip_load: f64, line_load: f64) -> FrameModel {
    let text = format!(
        r#"{{
            "name": "cantilever",
            "nodes": [[0.0, 0.0], [{len}, 0.0]],
            "elements": [{{"nodes": [0, 1], "E": 1.0, "rho": 1.0, "section": "lin"}}],
            "sections": {{"lin": {{"kind": "polynomial", "coeffs": [1.0, 0.0, 0.0]}}}},
            "supports": [{{"node": 0, "fix": [true, true, true]}}],
            "loads": {{
                "nodal": [{{"node": 1, "force": [0.0, {tip_load}, 0.0]}}],
                "distributed": [{{"element": 0, "constant": [0.0, {line_load}]}}]
            }},
            "problem": {{"kind": "compliance", "weight_bound": 10.0}}
        }}"#
    );
    FrameModel::from_json(&text).unwrap()
}

#[test]
fn tip_load_compliance_matches_beam_theory() {
    // Tip deflection P L³ / (3 E I), so the compliance is P² L³ / (3 E I).
    for (len, p, area) in [(1.0, 1.0, 1.0), (2.0, -3.0, 0.5), (1.5, 0.2, 4.0)] {
        let model = cantilever(len, p, 0.0);
        let (c, u) = model.compliance(&[area]).unwrap();
        let expect = p * p * len.powi(3) / (3.0 * area);
        assert!((c - expect).abs() < 1e-10 * expect, "{c} vs {expect}");
        // Tip rotation P L² / (2 E I).
        let theta = u[2];
        assert!((theta - p * len * len / (2.0 * area)).abs() < 1e-10 * (1.0 + theta.abs()));
    }
}

#[test]
fn uniform_line_load_compliance_of_one_cubic_element() {
    // One Hermite element reproduces the exact tip displacement w L⁴/8 and
    // rotation w L³/6; with the work-equivalent nodal loads (w L/2, -w L²/12)
    // the discrete compliance is 7 w² L⁵ / 144.
    let (len, w) = (2.0, -1.5);
    let model = cantilever(len, 0.0, w);
    let (c, u) = model.compliance(&[1.0]).unwrap();
    assert!((u[1] - w * len.powi(4) / 8.0).abs() < 1e-10);
    assert!((u[2] - w * len.powi(3) / 6.0).abs() < 1e-10);
    let expect = 7.0 * w * w * len.powi(5) / 144.0;
    assert!((c - expect).abs() < 1e-10 * expect, "{c} vs {expect}");
}

#[test]
fn compliance_gradient_matches_finite_differences() {
    let model = builtin::beam(4);
    let x = vec![0.012, 0.015, 0.01, 0.02];
    let (c, g) = model.compliance_gradient(&x).unwrap();
    for i in 0..x.len() {
        let h = 1e-7;
        let mut xp = x.clone();
        xp[i] += h;
        let mut xm = x.clone();
        xm[i] -= h;
        let fd = (model.compliance(&xp).unwrap().0 - model.compliance(&xm).unwrap().0) / (2.0 * h);
        assert!((fd - g[i]).abs() <= 1e-5 * (1.0 + fd.abs()), "group {i}: {fd} vs {}", g[i]);
    }
    assert!(c > 0.0);
}

#[test]
fn stiffness_coefficients_are_positive_semidefinite() {
    for model in [builtin::beam(3), builtin::frame24(), builtin::by_name("three-element").unwrap()] {
        for e in 0..model.elements.len() {
            for k in model.element_coefficients(e).unwrap() {
                assert!(is_psd(&k, 1e-10), "{} element {e}", model.name);
            }
        }
    }
}

#[test]
fn model_json_file_round_trip() {
    let dir = std::env::temp_dir().join(format!("arrowsos-model-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    for model in [builtin::beam(5), builtin::frame24()] {
        let path = dir.join(format!("{}.json", model.name));
        std::fs::write(&path, model.to_json().unwrap()).unwrap();
        let back = FrameModel::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back, model);
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn malformed_models_are_rejected() {
    let good = cantilever(1.0, 1.0, 0.0).to_json().unwrap();
    assert!(good.contains("\"section\": \"lin\""));
    assert!(FrameModel::from_json(&good.replace("\"section\": \"lin\"", "\"section\": \"missing\"")).is_err());
    let mut dangling = cantilever(1.0, 1.0, 0.0);
    dangling.elements[0].nodes = [0, 7];
    assert!(dangling.validate().is_err());
    assert!(FrameModel::from_json("{\"nodes\": []}").is_err());
}

#[test]
fn relaxation_bound_brackets_the_reference_design() {
    for n_e in [1, 2, 3] {
        let model = builtin::beam(n_e);
        let rep = frames::run(&model, &RunMode::new(1, n_e >= 3, false), &Backend::default()).unwrap();
        let ub = rep.upper_bound.expect("feasible rounding");
        assert!(rep.lower_bound <= ub * (1.0 + 1e-6), "beam {n_e}: {} > {ub}", rep.lower_bound);
        assert!(rep.gap.unwrap() >= -1e-6);
    }
}

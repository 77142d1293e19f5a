use scca_wasm::{null_path, objective_trace, planted_fit};

#[test]
fn planted_fit_recovers_blocks_at_low_noise() {
    let fit = planted_fit(0.1, 0.4, 0.4, 7).unwrap();
    assert_eq!(fit.truths[0].len(), 500);
    assert_eq!(fit.estimates[1].len(), 400);
    for v in &fit.metrics.views {
        assert!(v.cos_theta > 0.95, "{v:?}");
        assert!(v.eta >= 0.9);
    }
    let json = serde_json::to_string(&fit).unwrap();
    assert!(json.contains("\"metrics\""));
}

#[test]
fn null_path_starts_dense_and_shrinks() {
    let path = null_path(40, 30, 30, 3, 6).unwrap();
    assert_eq!(path.len(), 6);
    assert_eq!(path[0].gamma2, 0.0);
    assert_eq!(path[0].cardinality2, 30);
    assert!((path[0].dense_corr.abs() - 1.0).abs() < 1e-6);
    assert!(path.last().unwrap().cardinality2 < 30);
}

#[test]
fn traces_are_non_decreasing() {
    for l0 in [false, true] {
        let t = objective_trace(40, 50, 0.3, l0, 5).unwrap();
        assert_eq!(t.passes.len(), 2);
        for pass in &t.passes {
            assert!(pass.len() > 2);
            for w in pass.windows(2) {
                assert!(w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0));
            }
        }
    }
}

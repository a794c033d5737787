mod common;

use sgmcert::bounds::theorem2_bound;

#[test]
fn theorem2_matches_high_precision_reference() {
    let (err, at) = common::theorem2_golden_error();
    assert!(err <= 1e-10, "relative error {err:e} at {at}");
}

#[test]
fn every_reference_quantity_is_reported() {
    let golden = common::theorem2_golden();
    for (name, p) in common::theorem2_fixtures() {
        let r = theorem2_bound(&p).unwrap();
        for k in golden[name].keys() {
            let known = k == "total" || k.ends_with("_delta_0.5") || r.term(k).is_some() || r.constant(k).is_some();
            assert!(known, "{name}/{k} not reported");
        }
    }
}


#[test]
fn table1_rows_match_high_precision_reference() {
    let (err, at) = common::table1_golden_error();
    assert!(err <= 1e-10, "relative error {err:e} at {at}");
}

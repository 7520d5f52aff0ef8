use homotopy_web::{lattice_weights, weighted_sum_scan, Session};

#[test]
fn lattice_rows_sum_to_one() {
    let w = lattice_weights(3, 4).unwrap();
    assert_eq!(w.len(), 15 * 3);
    for row in w.chunks(3) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert!(lattice_weights(0, 4).is_err());
}

#[test]
fn sweeps_settle_and_even_out() {
    let mut s = Session::start("motta1", 5).unwrap();
    assert_eq!(s.positions().len(), 21 * 3);
    let first = s.step().unwrap();
    let mut last = first;
    for _ in 0..20 {
        last = s.step().unwrap();
    }
    assert!(last < first);
    assert_eq!(s.sweeps(), 21);
    assert!(s.fe_total() > 0);
    let (_, ws) = weighted_sum_scan("motta1", 5).unwrap();
    assert!(s.evenness().unwrap() < ws.unwrap());
}

#[test]
fn unknown_problem_is_an_error() {
    assert!(Session::start("zdt9", 4).is_err());
    assert!(weighted_sum_scan("zdt9", 4).is_err());
}

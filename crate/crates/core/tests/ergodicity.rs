use lob_tactics::ergodicity::*;
use lob_tactics::model::*;
use lob_tactics::simulate::simulate_market_only;

fn fig5() -> (IntensityModel, RegenerationLaw) {
    (IntensityModel::constant(11, 0.06, 0.12, 0.5).unwrap(), RegenerationLaw::point(11, 5, 3, -1).unwrap())
}

#[test]
fn lyapunov_certificate_on_fig5_model() {
    let (m, r) = fig5();
    let ch = QueueChain::build(&m, &r).unwrap();
    let rep = lyapunov_drift(&ch, 1.2, 1);
    assert!(rep.holds, "{:?}", rep.first_violation);
    assert!(rep.c > 0.0 && rep.d.is_finite());
    // recompute QV from the rates, outside the chain
    for row in &rep.margins {
        let (q1, q2) = (row.q1, row.q2);
        let v = |a: u32, b: u32| lyapunov_function(a, b, 1.2, 1);
        let mut qv = 0.0;
        let bid = m.rates(Side::Bid, q1, q2, 1);
        let ask = m.rates(Side::Ask, q1, q2, 1);
        let here = v(q1, q2);
        if q1 < 11 {
            qv += bid.limit * (v(q1 + 1, q2) - here);
        }
        if q2 < 11 {
            qv += ask.limit * (v(q1, q2 + 1) - here);
        }
        qv += bid.consumption() * if q1 == 1 { v(5, 3) - here } else { v(q1 - 1, q2) - here };
        qv += ask.consumption() * if q2 == 1 { v(3, 5) - here } else { v(q1, q2 - 1) - here };
        assert!((qv - row.qv).abs() < 1e-12 * here.max(1.0));
        assert!(qv + rep.c * here - rep.d <= 1e-12);
    }
}

#[test]
fn growing_queues_are_surfaced() {
    // insertions outpace consumption once a queue exceeds 5
    let m = IntensityModel::symmetric_from_fn(11, 1, |own, _, _| {
        if own > 5 {
            SideRates { limit: 0.3, cancel: 0.05, market: 0.05 }
        } else {
            SideRates { limit: 0.06, cancel: 0.06, market: 0.06 }
        }
    })
    .unwrap();
    let r = RegenerationLaw::point(11, 5, 3, -1).unwrap();
    let rep = check_assumptions(&m, &r, 50, 3.0);
    assert!(rep.drift.is_err());
    let ch = QueueChain::build(&m, &r).unwrap();
    let ly = lyapunov_drift(&ch, 1.2, 1);
    assert!(!ly.holds);
    let (a, b) = ly.first_violation.unwrap();
    assert!(a.max(b) > 5, "({a}, {b})");
}

#[test]
fn convergence_curves_decay_to_one_law() {
    let (m, r) = fig5();
    let ch = QueueChain::build(&m, &r).unwrap();
    let times: Vec<f64> = (0..=12).map(|k| k as f64 * 25.0).collect();
    let curves = convergence_diagnostics(&ch, &[(5, 3), (11, 1)], &times).unwrap();
    for c in &curves {
        let pi = ch.stationary().unwrap();
        let p0 = ch.point_mass(c.initial.0, c.initial.1);
        assert!((c.tv[0] - total_variation(&p0, &pi)).abs() < 1e-12);
        assert!(c.log_slope < 0.0);
        for w in c.tv[2..].windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert!(*c.tv.last().unwrap() < 0.01);
    }
    let a = ch.at_time(&ch.point_mass(5, 3), 300.0, 1e-13).unwrap();
    let b = ch.at_time(&ch.point_mass(11, 1), 300.0, 1e-13).unwrap();
    assert!(total_variation(&a, &b) < 0.01);
}

#[test]
fn long_run_event_law_is_stable() {
    let (m, r) = fig5();
    let ch = QueueChain::build(&m, &r).unwrap();
    let p0 = ch.point_mass(5, 3);
    let a = ch.after_events(&p0, 10_000);
    let b = ch.after_events(&a, 10_000);
    assert!(total_variation(&a, &b) < 0.01);
}

#[test]
fn empirical_event_law_matches_exact_chain() {
    let (m, r) = fig5();
    let ch = QueueChain::build(&m, &r).unwrap();
    let dyns = Dynamics::market_only(&m, &r, PriceWindow::new(1_000)).unwrap();
    let init = BookState::new(5, 3, 0);
    let emp = simulate_market_only(&dyns, init, &[0, 20], 100_000, 5);
    assert_eq!(emp[0][ch.index(5, 3)], 1.0);
    let exact = ch.after_events(&ch.point_mass(5, 3), 20);
    assert!(total_variation(&emp[1], &exact) < 0.02);
}

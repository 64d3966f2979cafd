use lob_tactics::config::load_setup;
use lob_tactics::dp::{Regime, StepKernel};
use lob_tactics::figures::{run_surface, run_sweep, Pipeline};
use std::path::PathBuf;

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn pipeline(name: &str) -> Pipeline {
    Pipeline::new(load_setup(&config(name)).unwrap().1).unwrap()
}

#[test]
fn sweep_dominates_join_bid() {
    for name in ["fig5.toml", "fig5-front.toml"] {
        let p = pipeline(name);
        let r = run_sweep(&p, Regime::AnyTime(StepKernel::Exponential), true).unwrap();
        eprintln!("{name}: {} min_gap {:.3e} {:?}", r.decision_map, r.min_gap, r.regimes);
        assert_eq!(r.rows.len(), 21);
        assert!(r.min_gap >= -1e-10);
    }
}

#[test]
fn surface_is_nonnegative() {
    let p = pipeline("fig4-synthetic.toml");
    let t = std::time::Instant::now();
    let r = run_surface(&p, Regime::FixedFrequency).unwrap();
    eprintln!(
        "states {} min {:.3e} max {:.4} at {:?} in {:?}",
        p.gen.len(),
        r.min_gain_ticks,
        r.max_gain_ticks,
        r.argmax,
        t.elapsed()
    );
    assert!(r.nonnegative);
    assert!(r.max_gain_ticks > 0.0);
}

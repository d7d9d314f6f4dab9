mod support;

use proptest::prelude::*;
use smoothck::mitl::{monitor, parse_formula, sat_intervals, Formula, SignalContext};
use smoothck::model::parse_model;
use smoothck::rng::stream_rng;
use smoothck::ssa::{SimOptions, Simulator};
use support::{check_times, holds, model, random_case};

fn agree(seed: u64) -> Result<(), String> {
    let mut rng = stream_rng(seed, 0);
    let (prop, path) = random_case(&mut rng);
    let text = prop.text();
    let formula = parse_formula(&text).map_err(|e| format!("{text}: {e}"))?;
    let bound = formula.bind(&model()).map_err(|e| e.to_string())?;
    let tr = path.to_trajectory();
    let params = [path.p];
    let ctx = SignalContext::new(&tr, &params);
    let sat = sat_intervals(&bound, &ctx).map_err(|e| e.to_string())?;
    for t in check_times(&prop, &path) {
        let want = holds(&prop, &path, t);
        if sat.contains(t) != want {
            return Err(format!(
                "{text} at t={t}: oracle {want}, monitor set {sat}, jumps {:?} states {:?}",
                path.times, path.states
            ));
        }
    }
    let at_zero = monitor(&bound, &ctx).map_err(|e| e.to_string())?;
    if at_zero != holds(&prop, &path, 0.0) {
        return Err(format!("{text}: verdict at 0 differs"));
    }
    Ok(())
}

#[test]
fn monitor_matches_brute_force_semantics() {
    for seed in 0..300 {
        if let Err(e) = agree(seed) {
            panic!("case {seed}: {e}");
        }
    }
}

#[test]
fn rendered_formulas_round_trip_through_the_parser() {
    for seed in 0..200 {
        let mut rng = stream_rng(seed, 1);
        let (prop, _) = random_case(&mut rng);
        let f = parse_formula(&prop.text()).unwrap();
        assert_eq!(parse_formula(&f.to_string()).unwrap(), f);
        assert!((f.horizon() - prop.horizon()).abs() < 1e-12);
    }
}

fn sir_trajectory(seed: u64, horizon: f64) -> smoothck::ssa::Trajectory {
    let m = parse_model(
        "species S=20 I=2 R=0\nparam k_i=0.1 k_r=0.3\nreaction S + I -> I + I @ k_i*S*I\nreaction I -> R @ k_r*I",
    )
    .unwrap();
    Simulator::new(&m, SimOptions::default())
        .run_stream(&m.default_params(), horizon, seed, 0)
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn always_is_dual_to_eventually(seed in any::<u64>(), a in 0.0f64..3.0, w in 0.0f64..3.0, k in 0i64..20) {
        let m = parse_model("species S=20 I=2 R=0\nparam k_i=0.1 k_r=0.3\nreaction S + I -> I + I @ k_i*S*I\nreaction I -> R @ k_r*I").unwrap();
        let atom = parse_formula(&format!("S > {k}")).unwrap();
        let g = Formula::always(a, a + w, atom.clone()).bind(&m).unwrap();
        let nfn = Formula::not(Formula::eventually(a, a + w, Formula::not(atom))).bind(&m).unwrap();
        let tr = sir_trajectory(seed, a + w + 5.0);
        let p = m.default_params();
        let ctx = SignalContext::new(&tr, &p);
        prop_assert_eq!(sat_intervals(&g, &ctx).unwrap(), sat_intervals(&nfn, &ctx).unwrap());
    }

    #[test]
    fn eventually_is_true_until(seed in any::<u64>(), a in 0.0f64..3.0, w in 0.0f64..3.0, k in 0i64..10) {
        let m = parse_model("species S=20 I=2 R=0\nparam k_i=0.1 k_r=0.3\nreaction S + I -> I + I @ k_i*S*I\nreaction I -> R @ k_r*I").unwrap();
        let atom = parse_formula(&format!("I <= {k}")).unwrap();
        let f = Formula::eventually(a, a + w, atom.clone()).bind(&m).unwrap();
        let u = Formula::until(a, a + w, Formula::True, atom).bind(&m).unwrap();
        let tr = sir_trajectory(seed, a + w + 5.0);
        let p = m.default_params();
        let ctx = SignalContext::new(&tr, &p);
        prop_assert_eq!(sat_intervals(&f, &ctx).unwrap(), sat_intervals(&u, &ctx).unwrap());
    }
}

#[test]
fn generated_cases_are_not_degenerate() {
    let (mut truths, mut temporal, mut jumps) = (0, 0, 0);
    for seed in 0..300 {
        let mut rng = stream_rng(seed, 0);
        let (prop, path) = random_case(&mut rng);
        truths += holds(&prop, &path, 0.0) as usize;
        temporal += (prop.horizon() > 0.0) as usize;
        jumps += path.times.len();
    }
    assert!((30..270).contains(&truths), "{truths} true verdicts");
    assert!(temporal > 150, "{temporal} temporal formulas");
    assert!(jumps > 300 * 4, "{jumps} jumps");
}

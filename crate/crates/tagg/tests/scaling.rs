//! Duration-scaling properties of the inference routes on the tollbooth
//! family with a fixed action set.

use std::time::Instant;

use tagg::error::Error;
use tagg::generators::{make_tollbooth, TollboothSpec};
use tagg::model::BehaviorProfile;
use tagg::ops::{expected_decision_payoff_with_stats, Method};

fn interface_seconds(waves: usize, reps: usize) -> f64 {
    let game = make_tollbooth(&TollboothSpec::new(3, waves, 5)).unwrap();
    let d = format!("w{waves}c5");
    let mut best = f64::MAX;
    for r in 0..reps {
        let profile = BehaviorProfile::random(&game, 23 + r as u64);
        let t0 = Instant::now();
        expected_decision_payoff_with_stats(&game, &profile, &d, waves, Method::Interface, None)
            .unwrap();
        best = best.min(t0.elapsed().as_secs_f64());
    }
    best
}

#[test]
fn filter_runtime_grows_polynomially_with_duration() {
    // wall time across durations 2..=12 stays sane and the 12-vs-6 doubling
    // stays well under the cubic-blowup mark
    let mut times = Vec::new();
    for waves in 2..=12usize {
        let t = interface_seconds(waves, if waves == 6 || waves == 12 { 3 } else { 1 });
        assert!(t < 60.0, "{waves} waves took {t}s");
        times.push((waves, t));
    }
    let t6 = times.iter().find(|(w, _)| *w == 6).unwrap().1;
    let t12 = times.iter().find(|(w, _)| *w == 12).unwrap().1;
    assert!(
        t12 / t6 < 8.0,
        "doubling the duration scaled runtime by {:.2}",
        t12 / t6
    );
}

#[test]
fn raw_network_elimination_is_memory_bound_by_four_steps() {
    for waves in 4..=6usize {
        let game = make_tollbooth(&TollboothSpec::new(3, waves, 5)).unwrap();
        let profile = BehaviorProfile::random(&game, 5);
        let d = format!("w{waves}c5");
        let r = expected_decision_payoff_with_stats(
            &game,
            &profile,
            &d,
            waves,
            Method::InducedVe,
            Some(50_000_000),
        );
        assert!(matches!(r, Err(Error::BudgetExceeded { .. })), "waves {waves}");
    }
}

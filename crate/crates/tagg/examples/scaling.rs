//! Times the filtering route across game durations on the two example
//! families. Handy for eyeballing the near-linear growth claim:
//!
//! ```text
//! cargo run --release --example scaling
//! ```

use std::time::Instant;

use tagg::generators::{make_icecream, make_tollbooth, IceCreamSpec, TollboothSpec};
use tagg::inference::csi_expected_payoff;
use tagg::model::BehaviorProfile;
use tagg::net::InducedNet;
use tagg::transform::{causal_decomposition, markov_copies};

fn main() {
    println!("tollbooth, 3 lanes, 5 cars per wave");
    for waves in 1..=12 {
        let g = make_tollbooth(&TollboothSpec::new(3, waves, 5)).unwrap();
        let p = BehaviorProfile::random(&g, 1);
        let t0 = Instant::now();
        let net = markov_copies(
            &causal_decomposition(&InducedNet::build(&g, &p).unwrap()).unwrap(),
        );
        let target = net.payoff_var(&format!("w{waves}c5"), waves).unwrap();
        let out = csi_expected_payoff(&net, target).unwrap();
        println!(
            "  waves {waves:>2}: {:>9.3} ms   E[u] = {:.6}",
            t0.elapsed().as_secs_f64() * 1e3,
            out.expected
        );
    }
    println!("ice cream, 4 locations, 2 vendors per day");
    for days in 1..=10 {
        let g = make_icecream(&IceCreamSpec::random(4, days, 7)).unwrap();
        let p = BehaviorProfile::random(&g, 1);
        let t0 = Instant::now();
        let net = markov_copies(
            &causal_decomposition(&InducedNet::build(&g, &p).unwrap()).unwrap(),
        );
        let vendor = format!("v{}", 2 * days);
        let target = net.payoff_var(&vendor, days).unwrap();
        let out = csi_expected_payoff(&net, target).unwrap();
        println!(
            "  days {days:>2}: {:>9.3} ms   E[u] = {:.6}",
            t0.elapsed().as_secs_f64() * 1e3,
            out.expected
        );
    }
}

//! Benchmark harness: runs the three expected-utility routes over a grid of
//! game instances and seeded random profiles, recording wall time and peak
//! factor cells per (instance, method) batch as CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::generators::{make_icecream, make_tollbooth, IceCreamSpec, TollboothSpec};
use crate::model::{BehaviorProfile, TaggGame};
use crate::ops::{expected_decision_payoff_with_stats, Method};

pub const CSV_HEADER: &str = "family,params,method,profiles,seconds,peak_cells,outcome";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Tollbooth,
    Icecream,
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Family> {
        match s {
            "tollbooth" => Ok(Family::Tollbooth),
            "icecream" => Ok(Family::Icecream),
            other => Err(Error::Internal(format!("unknown family `{other}`"))),
        }
    }
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Tollbooth => "tollbooth",
            Family::Icecream => "icecream",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BenchOutcome {
    Ok,
    BudgetExceeded,
}

impl BenchOutcome {
    pub fn name(self) -> &'static str {
        match self {
            BenchOutcome::Ok => "ok",
            BenchOutcome::BudgetExceeded => "budget_exceeded",
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchRecord {
    pub family: String,
    pub params: String,
    pub method: Method,
    /// Profiles completed before the batch finished or hit a budget.
    pub profiles: usize,
    pub seconds: f64,
    pub peak_cells: u64,
    pub outcome: BenchOutcome,
}

/// A parameter grid like `lanes=3,cars=5,waves=1..6`: fixed values and
/// inclusive ranges, expanded in key order.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid(pub BTreeMap<String, (usize, usize)>);

impl Grid {
    pub fn parse(text: &str) -> Result<Grid> {
        let mut map = BTreeMap::new();
        for part in text.split(',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let (key, val) = part
                .split_once('=')
                .ok_or_else(|| Error::Internal(format!("grid entry `{part}` is not key=value")))?;
            let (lo, hi) = match val.split_once("..") {
                Some((a, b)) => (parse_num(a)?, parse_num(b)?),
                None => {
                    let n = parse_num(val)?;
                    (n, n)
                }
            };
            if lo > hi {
                return Err(Error::Internal(format!("empty range in `{part}`")));
            }
            map.insert(key.trim().to_string(), (lo, hi));
        }
        Ok(Grid(map))
    }

    pub fn get(&self, key: &str) -> Option<(usize, usize)> {
        self.0.get(key).copied()
    }

    /// All grid points, in lexicographic key order with later keys varying
    /// fastest.
    pub fn points(&self) -> Vec<BTreeMap<String, usize>> {
        let keys: Vec<&String> = self.0.keys().collect();
        let mut out = vec![BTreeMap::new()];
        for k in keys {
            let (lo, hi) = self.0[k];
            let mut next = Vec::new();
            for point in &out {
                for v in lo..=hi {
                    let mut p = point.clone();
                    p.insert(k.clone(), v);
                    next.push(p);
                }
            }
            out = next;
        }
        out
    }
}

fn parse_num(s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::Internal(format!("`{s}` is not a number")))
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub family: Family,
    pub grid: Grid,
    pub profiles: usize,
    pub seed: u64,
    pub budget_seconds: f64,
    pub budget_cells: u64,
}

fn instance_game(family: Family, point: &BTreeMap<String, usize>, seed: u64) -> Result<TaggGame> {
    match family {
        Family::Tollbooth => {
            let lanes = *point.get("lanes").ok_or(Error::Internal("grid needs lanes".into()))?;
            let cars = *point.get("cars").ok_or(Error::Internal("grid needs cars".into()))?;
            let waves = *point.get("waves").ok_or(Error::Internal("grid needs waves".into()))?;
            make_tollbooth(&TollboothSpec::new(lanes, waves, cars))
        }
        Family::Icecream => {
            let locations = *point
                .get("locations")
                .ok_or(Error::Internal("grid needs locations".into()))?;
            let days = *point.get("days").ok_or(Error::Internal("grid needs days".into()))?;
            make_icecream(&IceCreamSpec::random(locations, days, seed))
        }
    }
}

fn params_string(point: &BTreeMap<String, usize>) -> String {
    point
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(";")
}

/// The payoff term the batch times: the last-moving player's decision at its
/// final payoff time, the target whose filter spans the whole duration.
pub fn bench_target(game: &TaggGame) -> (String, usize) {
    let d = game
        .decisions
        .iter()
        .max_by(|a, b| (a.time, &a.id).cmp(&(b.time, &b.id)))
        .expect("bench games have decisions");
    let t = *d.payoff_times.iter().max().unwrap();
    (d.id.clone(), t)
}

fn profile_seed(base: u64, instance: usize, profile: usize) -> u64 {
    base.wrapping_mul(1_000_003)
        .wrapping_add(instance as u64 * 10_007)
        .wrapping_add(profile as u64)
}

/// Runs the whole grid, one record per (instance, method).
pub fn run(config: &BenchConfig) -> Result<Vec<BenchRecord>> {
    let mut records = Vec::new();
    for (inst_idx, point) in config.grid.points().iter().enumerate() {
        let game = instance_game(config.family, point, config.seed.wrapping_add(inst_idx as u64))?;
        let params = params_string(point);
        let (target_d, target_t) = bench_target(&game);
        for method in Method::ALL {
            let start = Instant::now();
            let mut peak = 0u64;
            let mut outcome = BenchOutcome::Ok;
            let mut completed = 0usize;
            for p in 0..config.profiles {
                let profile =
                    BehaviorProfile::random(&game, profile_seed(config.seed, inst_idx, p));
                match expected_decision_payoff_with_stats(
                    &game,
                    &profile,
                    &target_d,
                    target_t,
                    method,
                    Some(config.budget_cells),
                ) {
                    Ok((_, cells)) => {
                        peak = peak.max(cells);
                        completed += 1;
                    }
                    Err(Error::BudgetExceeded { needed, .. }) => {
                        peak = peak.max(needed.min(u64::MAX as u128) as u64);
                        outcome = BenchOutcome::BudgetExceeded;
                        break;
                    }
                    Err(e) => return Err(e),
                }
                if start.elapsed().as_secs_f64() > config.budget_seconds {
                    outcome = BenchOutcome::BudgetExceeded;
                    break;
                }
            }
            records.push(BenchRecord {
                family: config.family.name().to_string(),
                params: params.clone(),
                method,
                profiles: completed,
                seconds: start.elapsed().as_secs_f64(),
                peak_cells: peak,
                outcome,
            });
        }
    }
    Ok(records)
}

pub fn to_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{},{}",
            r.family,
            r.params,
            r.method.name(),
            r.profiles,
            r.seconds,
            r.peak_cells,
            r.outcome.name()
        );
    }
    out
}

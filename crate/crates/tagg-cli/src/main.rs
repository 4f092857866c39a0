//! `tagg`: validate, solve and benchmark temporal action-graph games.
//!
//! Exit codes: 0 on success, 1 on a validation failure, 2 on usage errors.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tagg::bench::{BenchConfig, Family, Grid};
use tagg::generators::{make_icecream, make_tollbooth, IceCreamSpec, TollboothSpec};
use tagg::io::{parse_game, parse_profile, serialize_game, serialize_profile};
use tagg::model::{BehaviorProfile, TaggGame};
use tagg::ops::{
    best_response_single_decision, expected_utility, expected_utility_with_budget,
    BestResponseOptions, Method,
};

#[derive(Parser)]
#[command(name = "tagg", version, about = "Temporal action-graph games: validate, compute expected utility, best-respond, generate and benchmark")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Induced,
    Transformed,
    Interface,
    All,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a game document against every model invariant.
    Validate { game: PathBuf },
    /// Expected utility of one player under a profile.
    Eu {
        game: PathBuf,
        /// `uniform`, `random:SEED`, or a profile file path.
        #[arg(long)]
        profile: String,
        #[arg(long)]
        player: usize,
        #[arg(long, value_enum, default_value = "all")]
        method: MethodArg,
        /// Live factor-cell cap; keeps the elimination routes from eating the
        /// machine on long games.
        #[arg(long, default_value_t = 500_000_000)]
        budget_cells: u64,
    },
    /// Best response for a single-decision player against a fixed profile.
    BestResponse {
        game: PathBuf,
        #[arg(long)]
        profile: String,
        #[arg(long)]
        player: usize,
        /// Write the updated profile here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write a generated game document.
    Generate {
        #[command(subcommand)]
        family: GenCmd,
    },
    /// Run the three methods over a parameter grid and emit CSV.
    Bench {
        #[arg(long)]
        family: String,
        /// e.g. `lanes=3,cars=5,waves=1..6` or `locations=4,days=1..8`.
        #[arg(long)]
        grid: String,
        #[arg(long, default_value_t = 100)]
        profiles: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-(instance, method) wall budget in seconds.
        #[arg(long, default_value_t = 120.0)]
        budget_seconds: f64,
        /// Live factor-cell budget per computation.
        #[arg(long, default_value_t = 50_000_000)]
        budget_cells: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Subcommand)]
enum GenCmd {
    /// Cars arriving at a tollbooth in waves.
    Tollbooth {
        lanes: usize,
        waves: usize,
        cars: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Vendors choosing beach spots, two per day.
    Icecream {
        locations: usize,
        days: usize,
        /// Seed for random home locations.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated home locations (one per vendor) instead of random.
        #[arg(long)]
        homes: Option<String>,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn load_game(path: &PathBuf) -> anyhow::Result<TaggGame> {
    let text = fs::read_to_string(path)?;
    Ok(parse_game(&text)?)
}

fn load_profile(spec: &str, game: &TaggGame) -> anyhow::Result<BehaviorProfile> {
    let profile = if spec == "uniform" {
        BehaviorProfile::uniform(game)
    } else if let Some(seed) = spec.strip_prefix("random:") {
        BehaviorProfile::random(game, seed.parse()?)
    } else {
        parse_profile(&fs::read_to_string(spec)?)?
    };
    profile.ensure_valid(game)?;
    Ok(profile)
}

fn validation_failure(game: &TaggGame) -> bool {
    let rep = game.validate();
    for v in &rep.violations {
        eprintln!("violation: {v}");
    }
    !rep.is_valid()
}

fn run() -> anyhow::Result<ExitCode> {
    match Cli::parse().cmd {
        Cmd::Validate { game } => {
            let text = fs::read_to_string(&game)?;
            match parse_game(&text) {
                Ok(g) => {
                    let rep = g.validate();
                    println!(
                        "valid: {} players, duration {}, {} actions, {} decisions, {} chance variables",
                        g.num_players,
                        g.duration,
                        g.actions.len(),
                        g.decisions.len(),
                        g.chance_vars.len()
                    );
                    println!(
                        "size: max chance parents {}, max utility parents {}, {} table cells",
                        rep.stats.max_chance_parents,
                        rep.stats.max_utility_parents,
                        rep.stats.total_table_cells
                    );
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    eprintln!("{e}");
                    Ok(ExitCode::FAILURE)
                }
            }
        }
        Cmd::Eu { game, profile, player, method, budget_cells } => {
            let g = load_game(&game)?;
            if validation_failure(&g) {
                return Ok(ExitCode::FAILURE);
            }
            let p = load_profile(&profile, &g)?;
            let methods: Vec<Method> = match method {
                MethodArg::Induced => vec![Method::InducedVe],
                MethodArg::Transformed => vec![Method::TransformedVe],
                MethodArg::Interface => vec![Method::Interface],
                MethodArg::All => Method::ALL.to_vec(),
            };
            let several = methods.len() > 1;
            let mut totals = Vec::new();
            for m in methods {
                match expected_utility_with_budget(&g, &p, player, m, Some(budget_cells)) {
                    Ok(eu) => {
                        println!("method={:<12} EU(player {player}) = {:.12}", m.name(), eu.total);
                        for t in &eu.terms {
                            println!("  {} @ {}: {:.12}", t.decision, t.time, t.value);
                        }
                        totals.push(eu.total);
                    }
                    // with several methods requested, one running out of room
                    // is a result, not a failure
                    Err(tagg::Error::BudgetExceeded { needed, budget }) if several => {
                        println!(
                            "method={:<12} budget exceeded ({needed} cells needed, {budget} allowed)",
                            m.name()
                        );
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            if totals.len() > 1 {
                let mut max_diff = 0.0f64;
                for i in 0..totals.len() {
                    for j in (i + 1)..totals.len() {
                        max_diff = max_diff.max((totals[i] - totals[j]).abs());
                    }
                }
                println!("max pairwise difference = {max_diff:.3e}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::BestResponse { game, profile, player, output } => {
            let g = load_game(&game)?;
            if validation_failure(&g) {
                return Ok(ExitCode::FAILURE);
            }
            let p = load_profile(&profile, &g)?;
            let before = expected_utility(&g, &p, player, Method::TransformedVe)?.total;
            let br = best_response_single_decision(&g, &p, player, BestResponseOptions::default())?;
            let after = expected_utility(&g, &br, player, Method::TransformedVe)?.total;
            println!("EU(player {player}) current = {before:.12}");
            println!("EU(player {player}) response = {after:.12}");
            println!("regret = {:.12}", after - before);
            let text = serialize_profile(&br)?;
            match output {
                Some(path) => fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Generate { family } => {
            let (game, path) = match family {
                GenCmd::Tollbooth { lanes, waves, cars, output } => {
                    (make_tollbooth(&TollboothSpec::new(lanes, waves, cars))?, output)
                }
                GenCmd::Icecream { locations, days, seed, homes, output } => {
                    let spec = match homes {
                        Some(list) => {
                            let homes: Vec<usize> = list
                                .split(',')
                                .map(|s| s.trim().parse())
                                .collect::<Result<_, _>>()?;
                            IceCreamSpec::with_homes(locations, days, homes)
                        }
                        None => IceCreamSpec::random(locations, days, seed),
                    };
                    (make_icecream(&spec)?, output)
                }
            };
            fs::write(&path, serialize_game(&game)?)?;
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Bench { family, grid, profiles, seed, budget_seconds, budget_cells, output } => {
            let config = BenchConfig {
                family: family.parse::<Family>()?,
                grid: Grid::parse(&grid)?,
                profiles,
                seed,
                budget_seconds,
                budget_cells,
            };
            let records = tagg::bench::run(&config)?;
            fs::write(&output, tagg::bench::to_csv(&records))?;
            for r in &records {
                println!(
                    "{:<10} {:<28} {:<12} {:>4} profiles {:>10.3}s peak {:>12} {}",
                    r.family,
                    r.params,
                    r.method.name(),
                    r.profiles,
                    r.seconds,
                    r.peak_cells,
                    r.outcome.name()
                );
            }
            println!("wrote {}", output.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

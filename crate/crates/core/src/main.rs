//! Command-line front door: map building, planning, scenario runs,
//! rendering, and batch sweeps. Thin wrappers over the library; exit code 0
//! on success, 1 on runtime failure, 2 on usage errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nav2d::harness::{self, trace, ScenarioConfig};
use nav2d::kinematics::Pose2D;
use nav2d::mapping::{load_map, save_map, to_costmap, DEFAULT_FREE_THRESH, DEFAULT_OCCUPIED_THRESH};
use nav2d::planning::{carrot_adjust_goal, inflate, plan_astar, simplify_path};
use nav2d::world::load_world;
use nav2d::Result;

#[derive(Parser)]
#[command(name = "nav2d", version, about = "Deterministic 2D navigation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn parse_point(s: &str) -> std::result::Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected X,Y, got {s:?}"));
    }
    let x = parts[0].trim().parse().map_err(|_| format!("bad X in {s:?}"))?;
    let y = parts[1].trim().parse().map_err(|_| format!("bad Y in {s:?}"))?;
    Ok((x, y))
}

fn parse_seed_range(s: &str) -> std::result::Result<(u64, u64), String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected A..B, got {s:?}"))?;
    let lo: u64 = a.trim().parse().map_err(|_| format!("bad seed in {s:?}"))?;
    let hi: u64 = b.trim().parse().map_err(|_| format!("bad seed in {s:?}"))?;
    if hi < lo {
        return Err(format!("empty seed range {s:?}"));
    }
    Ok((lo, hi))
}

#[derive(Subcommand)]
enum Command {
    /// Build and save a map from a scripted tour of scan poses.
    Map {
        #[arg(long)]
        scenario: PathBuf,
        /// Tour file: JSON lines of [x, y, theta].
        #[arg(long)]
        tour: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "map")]
        basename: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Plan on a saved map and write the path as JSON lines of [x, y].
    Plan {
        /// Saved map as <dir>/<basename>.
        #[arg(long)]
        map: String,
        #[arg(long, value_parser = parse_point)]
        start: (f64, f64),
        #[arg(long, value_parser = parse_point)]
        goal: (f64, f64),
        #[arg(long, value_enum, default_value = "dijkstra")]
        algo: AlgoArg,
        #[arg(long, default_value_t = 1.0)]
        weight: f64,
        #[arg(long, default_value_t = 0.12)]
        robot_radius: f64,
        #[arg(long, default_value_t = 0.45)]
        inflation_radius: f64,
        #[arg(long, default_value_t = 5.0)]
        cost_scaling: f64,
        #[arg(long, default_value_t = 0.0)]
        simplify: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Execute a scenario and write trace + metrics.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Follow this saved path instead of the scenario's plan section.
        #[arg(long)]
        path: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a trace over the scenario world as a PPM image.
    Render {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        /// Optional planned-path overlay (JSON lines of [x, y]).
        #[arg(long)]
        path: Option<PathBuf>,
        /// Optional saved map <dir>/<basename> to use as the base layer.
        #[arg(long)]
        map: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an inclusive seed range and write a summary table.
    Batch {
        #[arg(long)]
        scenario: PathBuf,
        /// Inclusive range, e.g. 0..49.
        #[arg(long, value_parser = parse_seed_range)]
        seeds: (u64, u64),
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum AlgoArg {
    Dijkstra,
    Astar,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::FAILURE
        }
    }
}

fn split_map_spec(spec: &str) -> Result<(&Path, &str)> {
    let path = Path::new(spec);
    let base = path
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(|| nav2d::Error::Config(format!("bad map spec {spec:?}")))?;
    Ok((path.parent().unwrap_or(Path::new(".")), base))
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Map {
            scenario,
            tour,
            out,
            basename,
            seed,
        } => {
            let config = ScenarioConfig::from_file(&scenario)?;
            let poses = harness::read_tour(&tour)?;
            let grid = harness::map_from_tour(&config, &poses, seed.unwrap_or(config.run.seed))?;
            harness::ensure_dir(&out)?;
            save_map(&grid, &out, &basename)?;
            let observed = (0..grid.height())
                .flat_map(|iy| (0..grid.width()).map(move |ix| (ix, iy)))
                .filter(|&(ix, iy)| grid.log_odds(ix, iy) != 0.0)
                .count();
            println!(
                "poses={} observed_cells={} map={}/{basename}",
                poses.len(),
                observed,
                out.display()
            );
        }
        Command::Plan {
            map,
            start,
            goal,
            algo,
            weight,
            robot_radius,
            inflation_radius,
            cost_scaling,
            simplify,
            out,
        } => {
            let (dir, base) = split_map_spec(&map)?;
            let (grid, _) = load_map(dir, base)?;
            let costmap = to_costmap(&grid, DEFAULT_OCCUPIED_THRESH, DEFAULT_FREE_THRESH)?;
            let inflated = inflate(
                &costmap,
                robot_radius,
                inflation_radius.max(robot_radius),
                cost_scaling,
            )?;
            let start_pose = Pose2D::new(start.0, start.1, 0.0);
            let goal_pose = Pose2D::new(goal.0, goal.1, 0.0);
            let adjusted = carrot_adjust_goal(&inflated, &start_pose, &goal_pose);
            let moved = (adjusted.x - goal_pose.x).hypot(adjusted.y - goal_pose.y) > 1e-12;
            let w = match algo {
                AlgoArg::Dijkstra => 0.0,
                AlgoArg::Astar => weight,
            };
            let path = plan_astar(&inflated, &start_pose, &adjusted, w)?;
            let points = simplify_path(&path.world_points, simplify);
            trace::write_path(&points, &out)?;
            let length: f64 = points
                .windows(2)
                .map(|p| (p[1].0 - p[0].0).hypot(p[1].1 - p[0].1))
                .sum();
            println!(
                "cost={:.6} cells={} points={} length={length:.3} goal_adjusted={moved} out={}",
                path.total_cost,
                path.cells.len(),
                points.len(),
                out.display()
            );
        }
        Command::Run {
            scenario,
            seed,
            path,
            out,
        } => {
            let mut config = ScenarioConfig::from_file(&scenario)?;
            if let Some(p) = path {
                config.plan.path_file = Some(p.display().to_string());
            }
            let (records, metrics) = harness::run_scenario(&config, seed)?;
            let hash = trace::hash_records(&records);
            if let Some(dir) = out {
                harness::write_run_outputs(&dir, &records, &metrics)?;
            }
            println!(
                "success={} collisions={} time_to_goal={} path_length={:.3} min_clearance={:.3} mean_loc_error={:.4} steps={} trace_hash={hash}",
                metrics.success,
                metrics.collisions,
                metrics
                    .time_to_goal
                    .map_or("none".to_string(), |t| format!("{t:.2}")),
                metrics.path_length,
                metrics.min_clearance,
                metrics.mean_localization_error,
                records.len(),
            );
        }
        Command::Render {
            trace: trace_path,
            scenario,
            path,
            map,
            out,
        } => {
            let config = ScenarioConfig::from_file(&scenario)?;
            let world = load_world(&config.world)?;
            let records = trace::read_trace(&trace_path)?;
            let overlay = match path {
                Some(p) => Some(trace::read_path(&p)?),
                None => None,
            };
            let base = match map {
                Some(spec) => {
                    let (dir, basename) = split_map_spec(&spec)?;
                    Some(load_map(dir, basename)?.0)
                }
                None => None,
            };
            harness::render::render(&world, &records, overlay.as_deref(), base.as_ref(), &out)?;
            println!("records={} image={}", records.len(), out.display());
        }
        Command::Batch {
            scenario,
            seeds: (lo, hi),
            out,
        } => {
            let config = ScenarioConfig::from_file(&scenario)?;
            let results = harness::run_batch(&config, lo..=hi)?;
            harness::ensure_dir(&out)?;
            let summary = out.join("summary.csv");
            let mut csv = String::from(
                "seed,success,collisions,time_to_goal,path_length,min_clearance,mean_loc_error,trace_hash\n",
            );
            for r in &results {
                csv.push_str(&format!(
                    "{},{},{},{},{:.6},{:.6},{:.6},{}\n",
                    r.seed,
                    r.metrics.success,
                    r.metrics.collisions,
                    r.metrics
                        .time_to_goal
                        .map_or("".to_string(), |t| format!("{t:.3}")),
                    r.metrics.path_length,
                    r.metrics.min_clearance,
                    r.metrics.mean_localization_error,
                    r.trace_hash,
                ));
            }
            std::fs::write(&summary, csv).map_err(|e| nav2d::Error::io(&summary, e))?;
            let n = results.len();
            let successes = results.iter().filter(|r| r.metrics.success).count();
            let collision_free = results.iter().filter(|r| r.metrics.collisions == 0).count();
            println!(
                "seeds={n} success_rate={:.3} collision_free_rate={:.3} summary={}",
                successes as f64 / n as f64,
                collision_free as f64 / n as f64,
                summary.display()
            );
        }
    }
    Ok(())
}

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use cder::classify::{cross_validate, predict, CvConfig, CvReport};
use cder::cover_tree::THETA_HALF;
use cder::io::{read_collection, write_collection};
use cder::model::{export_regions, train, CderModel, TrainConfig, TrainSummary};
use cder::select::{select_regions, LevelTrace};
use cder::synth::{Experiment, GeneratorSpec, Overrides};
use cder::{CderError, CloudCollection, Result, RootPolicy, WeightMode};

#[derive(Parser)]
#[command(name = "cder", version, about = "Supervised distributional features for labeled pointclouds")]
struct Cli {
    /// Ratio between consecutive cover-tree radii, in (0, 1).
    #[arg(long, global = true, default_value_t = THETA_HALF)]
    theta: f64,

    /// Seed for data generation and cross-validation splits.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Replace every pass decision with an append, searching deeper.
    #[arg(long, global = true)]
    non_parsimonious: bool,

    /// Emit machine-readable JSON instead of tables.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic collection to CSV or JSON (chosen by extension).
    Generate {
        /// blobs, blocks, deep-field or three-labels.
        #[arg(long)]
        experiment: Experiment,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the deep-field mixture.
        #[arg(long)]
        ground_truth: Option<PathBuf>,
        #[arg(long)]
        clouds_per_label: Option<usize>,
        #[arg(long)]
        points_per_cloud: Option<usize>,
    },
    /// Train a model and write it as JSON.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        tree: TreeArgs,
    },
    /// Predict a label for every cloud in a collection.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Write predictions here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stratified cross-validation on a file or a generated experiment.
    Crossval {
        #[arg(long, conflicts_with = "experiment", required_unless_present = "experiment")]
        data: Option<PathBuf>,
        #[arg(long)]
        experiment: Option<Experiment>,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
        /// Partition each label into disjoint test folds.
        #[arg(long)]
        disjoint_folds: bool,
        #[command(flatten)]
        tree: TreeArgs,
    },
    /// Per-level selection table, optionally with a cover-tree dump.
    Inspect {
        #[arg(long)]
        data: PathBuf,
        /// Write the cover tree levels as JSON.
        #[arg(long)]
        dump: Option<PathBuf>,
        #[command(flatten)]
        tree: TreeArgs,
    },
    /// Per-coordinate records for plotting.
    ExportRegions {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone, Copy)]
struct TreeArgs {
    /// Use the first point as the root instead of the one nearest the centroid.
    #[arg(long)]
    first_point_root: bool,
    /// Stop the cover tree at this level.
    #[arg(long)]
    max_level: Option<usize>,
}

impl Cli {
    fn train_config(&self, tree: TreeArgs) -> TrainConfig {
        TrainConfig {
            theta: self.theta,
            root_policy: if tree.first_point_root {
                RootPolicy::FirstPoint
            } else {
                RootPolicy::NearestToCentroid
            },
            parsimonious: !self.non_parsimonious,
            max_level: tree.max_level,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    if !(cli.theta > 0.0 && cli.theta < 1.0) {
        return Err(CderError::InvalidTheta(cli.theta));
    }
    match &cli.command {
        Command::Generate {
            experiment,
            out,
            ground_truth,
            clouds_per_label,
            points_per_cloud,
        } => {
            let spec = GeneratorSpec {
                experiment: *experiment,
                seed: cli.seed,
                overrides: Overrides {
                    clouds_per_label: *clouds_per_label,
                    points_per_cloud: *points_per_cloud,
                },
            };
            let (collection, truth) = spec.generate()?;
            write_collection(out, &collection)?;
            match (ground_truth, truth) {
                (Some(path), Some(truth)) => write_json(path, &truth)?,
                (Some(_), None) => log::warn!("--ground-truth only applies to the deep field"),
                _ => {}
            }
            eprintln!(
                "wrote {} clouds ({} points) to {}",
                collection.clouds().len(),
                collection.n_points(),
                out.display()
            );
            Ok(())
        }
        Command::Train { data, out, tree } => {
            let collection = read_collection(data)?;
            let (model, summary) = train(&collection, &cli.train_config(*tree))?;
            fs::write(out, model.to_json()? + "\n")?;
            print_summary(cli.json, &summary)
        }
        Command::Predict { model, data, out } => {
            let model = load_model(model)?;
            let collection = read_collection(data)?;
            let text = predictions(&model, &collection, cli.json)?;
            match out {
                Some(path) => fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::Crossval {
            data,
            experiment,
            folds,
            test_fraction,
            disjoint_folds,
            tree,
        } => {
            let collection = match (data, experiment) {
                (Some(path), _) => read_collection(path)?,
                (None, Some(e)) => GeneratorSpec::new(*e, cli.seed).generate()?.0,
                (None, None) => unreachable!("clap requires one of --data, --experiment"),
            };
            let config = CvConfig {
                folds: *folds,
                test_fraction: *test_fraction,
                seed: cli.seed,
                disjoint: *disjoint_folds,
                train: cli.train_config(*tree),
            };
            let report = cross_validate(&collection, &config)?;
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print_report(&report);
            }
            Ok(())
        }
        Command::Inspect { data, dump, tree } => {
            let collection = read_collection(data)?;
            let pooled = collection.assign_weights(WeightMode::PassThrough)?.pool()?;
            let selection = select_regions(pooled, &cli.train_config(*tree).select_config())?;
            if let Some(path) = dump {
                write_json(path, &selection.tree.dump())?;
            }
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&selection.trace)?);
            } else {
                print_trace(&selection.trace);
                println!(
                    "stop level {}, build events {}, r0 {}",
                    selection.stop_level,
                    selection.events.len(),
                    selection.tree.r0()
                );
            }
            Ok(())
        }
        Command::ExportRegions { model, out } => {
            let model = load_model(model)?;
            let text = serde_json::to_string_pretty(&export_regions(&model))? + "\n";
            match out {
                Some(path) => fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(())
        }
    }
}

fn load_model(path: &Path) -> Result<CderModel> {
    CderModel::from_json(&fs::read_to_string(path)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut file, value)?;
    writeln!(file)?;
    Ok(())
}

#[derive(Serialize)]
struct PredictionRow<'a> {
    id: &'a str,
    label: &'a str,
    per_label_norms: Vec<f64>,
    low_confidence: bool,
}

fn predictions(model: &CderModel, collection: &CloudCollection, json: bool) -> Result<String> {
    let mut rows = Vec::with_capacity(collection.clouds().len());
    let mut correct = 0;
    let mut comparable = 0;
    for cloud in collection.clouds() {
        let p = predict(model, cloud)?;
        let label = &model.labels[p.label];
        let truth = &collection.labels()[cloud.label];
        if model.labels.contains(truth) {
            comparable += 1;
            correct += usize::from(truth == label);
        }
        rows.push(PredictionRow {
            id: &cloud.id,
            label,
            per_label_norms: p.per_label_norms,
            low_confidence: p.low_confidence,
        });
    }
    if comparable > 0 {
        eprintln!("accuracy {:.4} on {comparable} clouds with known labels", correct as f64 / comparable as f64);
    }
    if json {
        return Ok(serde_json::to_string_pretty(&rows)? + "\n");
    }
    let mut out = String::from("cloud_id,predicted");
    for l in &model.labels {
        out.push_str(&format!(",norm_{l}"));
    }
    out.push_str(",low_confidence\n");
    for r in rows {
        out.push_str(&format!("{},{}", r.id, r.label));
        for n in &r.per_label_norms {
            out.push_str(&format!(",{n:e}"));
        }
        out.push_str(&format!(",{}\n", r.low_confidence));
    }
    Ok(out)
}

fn print_summary(json: bool, s: &TrainSummary) -> Result<()> {
    if json {
        println!("{}", serde_json::to_string_pretty(s)?);
        return Ok(());
    }
    println!("stop level       {}", s.stop_level);
    println!("build events     {}", s.build_events);
    println!("coordinates      {} ({} dropped)", s.coordinates, s.dropped);
    match s.coefficient_range {
        Some((lo, hi)) => println!("coefficients     {lo:.3e} .. {hi:.3e} (ratio {:.1})", hi / lo),
        None => println!("coefficients     none"),
    }
    Ok(())
}

fn print_trace(trace: &[LevelTrace]) {
    println!("{:>5} {:>8} {:>10} {:>7}", "level", "adults", "candidates", "builds");
    for t in trace {
        println!("{:>5} {:>8} {:>10} {:>7}", t.level, t.adults, t.candidates, t.new_builds);
    }
}

fn print_report(r: &CvReport) {
    println!("{:>4} {:>9} {:>9} {:>6}", "fold", "test acc", "train acc", "tested");
    for f in 0..r.folds {
        println!(
            "{:>4} {:>9.4} {:>9.4} {:>6}",
            f, r.per_fold_accuracy[f], r.per_fold_train_accuracy[f], r.per_fold_test_count[f]
        );
    }
    println!("mean test accuracy {:.4}", r.mean_accuracy);
    println!();
    let width = r.labels.iter().map(|l| l.len()).max().unwrap_or(0).max(8);
    print!("{:>width$}", "true\\pred");
    for l in &r.labels {
        print!(" {l:>width$}");
    }
    println!();
    for (l, row) in r.labels.iter().zip(&r.confusion) {
        print!("{l:>width$}");
        for c in row {
            print!(" {c:>width$}");
        }
        println!();
    }
}

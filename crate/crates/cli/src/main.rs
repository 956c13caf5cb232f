//! Single entry point for partitioning trees, running embeddings and the
//! saturation pipeline, building the extremal constructions, querying the
//! exact containment oracle, and driving the conjecture scans and the
//! balanced-tree experiment.
//!
//! Exit codes: 0 success; 2 hypothesis/precondition failures (e.g. the host
//! is too sparse); 1 internal invariant violations; 64 usage errors.

mod inputs;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::path::PathBuf;
use treebed::constructions::{broom_pair, skew_counterexample, sqrt_tightness, HostKind};
use treebed::experiment::{balanced_tree_experiment, CSV_HEADER};
use treebed::oracle::{exact_embed, OracleOutcome, DEFAULT_NODE_BUDGET};
use treebed::partition::{
    fine_partition, one_sided_partition, validate_fine_partition, validate_one_sided,
};
use treebed::scan::{conjecture13_scan, erdos_sos_scan};
use treebed::schedule::{derive_constants, parse_rational, Mode, PracticalParams};
use treebed::tree::ColorClass;
use treebed::{graph6, greedy_embed, validate_embedding};

const EXIT_USAGE: i32 = 64;
const EXIT_HYPOTHESIS: i32 = 2;
const EXIT_INVARIANT: i32 = 1;

#[derive(Parser, Debug, Serialize)]
#[command(name = "treebed", version, about = "tree embeddings in dense graphs")]
struct Cli {
    /// Default seed for every randomized input (env: TREEBED_SEED).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for scans and experiments.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
enum Command {
    /// Compute and validate a fine or one-sided partition of a tree.
    Partition(PartitionArgs),
    /// Greedily embed a tree into a host with sufficient minimum degree.
    Embed(EmbedArgs),
    /// Run the full saturation embedding pipeline.
    Pipeline(PipelineArgs),
    /// Build an extremal construction and emit its certificates.
    Construct(ConstructArgs),
    /// Decide exact tree containment.
    Oracle(OracleArgs),
    /// Exhaustive conjecture scans over a graph6 corpus.
    Scan(ScanArgs),
    /// Statistical experiments.
    Experiment(ExperimentArgs),
}

#[derive(Args, Debug, Serialize)]
struct PartitionArgs {
    /// Tree: parent-array file or gen:spec (gen:bounded(n=..,dmax=..,seed=..)).
    #[arg(long)]
    tree: String,
    /// Microtree size bound.
    #[arg(long)]
    ell: usize,
    /// Emit the one-sided partition instead of the two-sided one.
    #[arg(long)]
    one_sided: bool,
    /// JSON report path (stdout when omitted).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct EmbedArgs {
    #[arg(long)]
    tree: String,
    /// Host: graph6/edge-list file or gen:spec (gen:gnp(n=..,p=..,seed=..)).
    #[arg(long)]
    host: String,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct PipelineArgs {
    #[arg(long, default_value = "gen:blowup")]
    host: String,
    #[arg(long, default_value = "gen:bounded")]
    tree: String,
    #[arg(long, default_value = "0.1")]
    eta: String,
    #[arg(long, default_value = "0.5")]
    r: String,
    #[arg(long, value_parser = ["theoretical", "practical"], default_value = "practical")]
    mode: String,
    /// Override the density floor d (practical mode).
    #[arg(long)]
    d: Option<String>,
    /// Override the formula epsilon (practical mode).
    #[arg(long)]
    eps: Option<String>,
    /// Override beta (microtree fraction, practical mode).
    #[arg(long)]
    beta: Option<String>,
    /// Override gamma (degree fraction, practical mode).
    #[arg(long)]
    gamma: Option<String>,
    /// Initial cluster count for the decomposition.
    #[arg(long)]
    clusters: Option<usize>,
    /// Include the per-pair decomposition table in the report.
    #[arg(long)]
    dump_decomposition: bool,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct ConstructArgs {
    #[command(subcommand)]
    which: ConstructKind,
    /// Write the host as graph6 to this path.
    #[arg(long, global = true)]
    host_out: Option<PathBuf>,
    /// Write the tree as a parent-array line to this path.
    #[arg(long, global = true)]
    tree_out: Option<PathBuf>,
    /// Certificate table JSON (stdout when omitted).
    #[arg(long, global = true)]
    report: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Serialize)]
enum ConstructKind {
    /// Spider tree vs cut-vertex host on k+1 vertices (k divisible by 6).
    Broom {
        #[arg(long)]
        k: usize,
        #[arg(long, value_parser = ["two-cliques", "bipartite"], default_value = "two-cliques")]
        host: String,
    },
    /// Skewed complete-bipartite counterexample.
    Skew {
        #[arg(long)]
        r: String,
        #[arg(long)]
        eta: String,
        #[arg(long)]
        n: usize,
    },
    /// Square-root tightness host (k an odd perfect square).
    Sqrt {
        #[arg(long)]
        k: usize,
    },
}

#[derive(Args, Debug, Serialize)]
struct OracleArgs {
    #[arg(long)]
    tree: String,
    #[arg(long)]
    host: String,
    #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
    budget: u64,
}

#[derive(Args, Debug, Serialize)]
struct ScanArgs {
    #[command(subcommand)]
    which: ScanKind,
}

#[derive(Subcommand, Debug, Serialize)]
enum ScanKind {
    /// Average-degree scan: every qualifying host against all trees.
    Es {
        /// graph6 corpus, one host per line.
        #[arg(long)]
        hosts: PathBuf,
        #[arg(long, default_value_t = 7)]
        k_max: usize,
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
        budget: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Min-degree + high-degree-count scan.
    C13 {
        #[arg(long)]
        hosts: PathBuf,
        /// k values to test (repeatable).
        #[arg(long = "k", required = true)]
        ks: Vec<usize>,
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
        budget: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Serialize)]
struct ExperimentArgs {
    #[command(subcommand)]
    which: ExperimentKind,
}

#[derive(Subcommand, Debug, Serialize)]
enum ExperimentKind {
    /// Balanced-tree fractions over even k (exact small, sampled large).
    Balanced {
        /// Comma-separated even k values.
        #[arg(long, value_delimiter = ',')]
        k_list: Vec<usize>,
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        /// CSV output path (stdout when omitted).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            std::process::exit(code);
        }
    };
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    let seed = cli
        .seed
        .or_else(|| {
            std::env::var("TREEBED_SEED")
                .ok()
                .and_then(|s| s.parse().ok())
        })
        .unwrap_or(0);
    let code = match run(cli, seed) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_HYPOTHESIS
        }
    };
    std::process::exit(code);
}

fn emit<T: Serialize>(value: &T, path: &Option<PathBuf>) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => std::fs::write(p, json + "\n").with_context(|| format!("writing {p:?}"))?,
        None => println!("{json}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct ConfigEcho<'a, C: Serialize> {
    command: &'a str,
    seed: u64,
    args: C,
}

fn run(cli: Cli, seed: u64) -> Result<i32> {
    match cli.command {
        Command::Partition(args) => {
            let tree = inputs::load_tree(&args.tree, seed)?;
            #[derive(Serialize)]
            struct Out<'a, A: Serialize> {
                config: ConfigEcho<'a, A>,
                partition: serde_json::Value,
                verdicts: serde_json::Value,
                pass: bool,
            }
            let (partition, verdicts, pass) = if args.one_sided {
                let (c1, c2) = tree.class_sizes();
                let bounded = if c1 <= c2 { ColorClass::V2 } else { ColorClass::V1 };
                let p = one_sided_partition(&tree, args.ell, bounded)
                    .map_err(|e| anyhow!("{e}"))?;
                let report = validate_one_sided(&tree, &p);
                (
                    serde_json::to_value(&p)?,
                    serde_json::to_value(&report)?,
                    report.pass(),
                )
            } else {
                let p = fine_partition(&tree, args.ell).map_err(|e| anyhow!("{e}"))?;
                let report = validate_fine_partition(&tree, &p);
                (
                    serde_json::to_value(&p)?,
                    serde_json::to_value(&report)?,
                    report.pass(),
                )
            };
            let out = Out {
                config: ConfigEcho {
                    command: "partition",
                    seed,
                    args: &args,
                },
                partition,
                verdicts,
                pass,
            };
            emit(&out, &args.report)?;
            Ok(if pass { 0 } else { EXIT_INVARIANT })
        }
        Command::Embed(args) => {
            let tree = inputs::load_tree(&args.tree, seed)?;
            let host = inputs::load_graph(&args.host, seed)?;
            match greedy_embed(&tree, &host) {
                Ok(emb) => {
                    let valid = validate_embedding(&tree, &host, &emb, true).is_ok();
                    #[derive(Serialize)]
                    struct Out<'a, A: Serialize> {
                        config: ConfigEcho<'a, A>,
                        embedded: bool,
                        validated: bool,
                        images: Vec<Option<usize>>,
                    }
                    let out = Out {
                        config: ConfigEcho {
                            command: "embed",
                            seed,
                            args: &args,
                        },
                        embedded: true,
                        validated: valid,
                        images: (0..tree.n()).map(|v| emb.host_of(v)).collect(),
                    };
                    emit(&out, &args.report)?;
                    Ok(if valid { 0 } else { EXIT_INVARIANT })
                }
                Err(e) => {
                    eprintln!("embedding failed: {e}");
                    Ok(EXIT_HYPOTHESIS)
                }
            }
        }
        Command::Pipeline(args) => cmd_pipeline(args, seed),
        Command::Construct(args) => cmd_construct(args),
        Command::Oracle(args) => {
            let tree = inputs::load_tree(&args.tree, seed)?;
            let host = inputs::load_graph(&args.host, seed)?;
            match exact_embed(&tree, &host, args.budget) {
                OracleOutcome::Embedded(images) => {
                    println!("CONTAINED {images:?}");
                    Ok(0)
                }
                OracleOutcome::NotContained => {
                    println!("NOT CONTAINED");
                    Ok(0)
                }
                OracleOutcome::Timeout => {
                    println!("TIMEOUT");
                    Ok(EXIT_HYPOTHESIS)
                }
            }
        }
        Command::Scan(args) => match args.which {
            ScanKind::Es {
                hosts,
                k_max,
                budget,
                report,
            } => {
                let text = std::fs::read_to_string(&hosts)
                    .with_context(|| format!("reading {hosts:?}"))?;
                let graphs = graph6::decode_file(&text).map_err(|e| anyhow!("{e}"))?;
                let rep = erdos_sos_scan(&graphs, k_max, budget);
                println!(
                    "hosts {} instances {} timeouts {} violations {}",
                    graphs.len(),
                    rep.instances_checked,
                    rep.timeouts,
                    rep.violations.len()
                );
                emit(&rep, &report)?;
                Ok(if rep.violations.is_empty() && rep.timeouts == 0 {
                    0
                } else {
                    EXIT_INVARIANT
                })
            }
            ScanKind::C13 {
                hosts,
                ks,
                budget,
                report,
            } => {
                let text = std::fs::read_to_string(&hosts)
                    .with_context(|| format!("reading {hosts:?}"))?;
                let graphs = graph6::decode_file(&text).map_err(|e| anyhow!("{e}"))?;
                let rep = conjecture13_scan(&graphs, &ks, budget);
                println!(
                    "hosts {} in-hypothesis {} instances {} violations {}",
                    graphs.len(),
                    rep.hosts_in_hypothesis,
                    rep.instances_checked,
                    rep.violations.len()
                );
                emit(&rep, &report)?;
                Ok(if rep.violations.is_empty() { 0 } else { EXIT_INVARIANT })
            }
        },
        Command::Experiment(args) => match args.which {
            ExperimentKind::Balanced {
                k_list,
                samples,
                csv,
            } => {
                let rows =
                    balanced_tree_experiment(&k_list, samples, seed).map_err(|e| anyhow!("{e}"))?;
                let mut out = String::from(CSV_HEADER);
                for r in &rows {
                    out.push('\n');
                    out.push_str(&r.to_csv());
                }
                out.push('\n');
                match csv {
                    Some(p) => std::fs::write(&p, out).with_context(|| format!("writing {p:?}"))?,
                    None => print!("{out}"),
                }
                Ok(0)
            }
        },
    }
}

fn cmd_pipeline(args: PipelineArgs, seed: u64) -> Result<i32> {
    use treebed::saturation::{run_three_phases, PipelineOptions};
    let eta = parse_rational(&args.eta).map_err(|e| anyhow!("{e}"))?;
    let r = parse_rational(&args.r).map_err(|e| anyhow!("{e}"))?;
    let schedule = if args.mode == "theoretical" {
        derive_constants(&eta, &r, Mode::Theoretical).map_err(|e| anyhow!("{e}"))?
    } else {
        let mut p = PracticalParams::default_for(eta, r);
        if let Some(d) = &args.d {
            p.d = parse_rational(d).map_err(|e| anyhow!("{e}"))?;
        }
        if let Some(eps) = &args.eps {
            p.eps = parse_rational(eps).map_err(|e| anyhow!("{e}"))?;
        }
        if let Some(beta) = &args.beta {
            p.beta = parse_rational(beta).map_err(|e| anyhow!("{e}"))?;
        }
        if let Some(gamma) = &args.gamma {
            p.gamma = parse_rational(gamma).map_err(|e| anyhow!("{e}"))?;
        }
        p.into_schedule().map_err(|e| anyhow!("{e}"))?
    };
    let (host, default_clusters) = inputs::load_host_with_structure(&args.host, seed)?;
    let tree = inputs::load_tree(&args.tree, seed)?;
    let opts = PipelineOptions {
        seed,
        initial_clusters: args.clusters.or(default_clusters),
        collect_decomposition: args.dump_decomposition,
        ..Default::default()
    };
    let out = run_three_phases(&host, &tree, &schedule, &opts);
    #[derive(Serialize)]
    struct Out<'a, A: Serialize> {
        config: ConfigEcho<'a, A>,
        #[serde(flatten)]
        report: &'a treebed::saturation::RunReport,
    }
    let wrapped = Out {
        config: ConfigEcho {
            command: "pipeline",
            seed,
            args: &args,
        },
        report: &out.report,
    };
    emit(&wrapped, &args.report)?;
    match out.error {
        None => {
            println!(
                "embedded {} vertices, validated: {}",
                out.report.result.domain, out.report.result.validated
            );
            Ok(0)
        }
        Some(e) => {
            eprintln!("pipeline failed: {e}");
            Ok(e.exit_code())
        }
    }
}

fn cmd_construct(args: ConstructArgs) -> Result<i32> {
    let report = match &args.which {
        ConstructKind::Broom { k, host } => {
            let kind = if host == "bipartite" {
                HostKind::CompleteBipartite
            } else {
                HostKind::TwoCliques
            };
            broom_pair(*k, kind).map_err(|e| anyhow!("{e}"))?
        }
        ConstructKind::Skew { r, eta, n } => {
            let r = parse_rational(r).map_err(|e| anyhow!("{e}"))?;
            let eta = parse_rational(eta).map_err(|e| anyhow!("{e}"))?;
            skew_counterexample(&r, &eta, *n).map_err(|e| anyhow!("{e}"))?
        }
        ConstructKind::Sqrt { k } => sqrt_tightness(*k).map_err(|e| anyhow!("{e}"))?,
    };
    if let Some(p) = &args.host_out {
        std::fs::write(p, graph6::encode(&report.host) + "\n")?;
    }
    if let Some(p) = &args.tree_out {
        std::fs::write(p, report.tree.to_parent_line() + "\n")?;
    }
    #[derive(Serialize)]
    struct Out<'a> {
        host_n: usize,
        host_edges: usize,
        tree_n: usize,
        certificates: &'a Vec<treebed::constructions::Certificate>,
        all_pass: bool,
    }
    let out = Out {
        host_n: report.host.n(),
        host_edges: report.host.edge_count(),
        tree_n: report.tree.n(),
        certificates: &report.certificates,
        all_pass: report.all_pass(),
    };
    emit(&out, &args.report)?;
    Ok(if report.all_pass() { 0 } else { EXIT_HYPOTHESIS })
}

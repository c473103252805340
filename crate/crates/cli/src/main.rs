use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use esc_cli::config::Invalid;
use esc_cli::report::write_outputs;
use esc_cli::{gen_data, run_experiment, Scenario, ScenarioConfig};
use esc_core::codec::{decode, decode_self_decodable, encode, encode_self_decodable};
use esc_core::continuous::{design_continuous_saa, design_sampling};
use esc_core::discrete::{design_dca, design_kmeanspp, DesignMethod, DesignOptions};
use esc_core::formats::{
    read_json, write_json, CodebookSetFile, DesignFile, PreferenceFile, PreferenceSpecFile,
    TwoUserDesignFile,
};
use esc_core::twouser::{
    design_twouser_dca, design_twouser_kmeanspp, joint_pref_alpha, JointPreference, TwoUserBudget,
};
use esc_core::{mean_entropy, CodebookSet, ItemSpec, Spv};

#[derive(Parser)]
#[command(
    name = "esc",
    version,
    about = "Codebook design for compressing preferred content"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw J flat-Dirichlet SPVs with uniform request probabilities.
    GenData {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        j: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Design K codebooks for a discrete preference file.
    DesignDiscrete {
        #[arg(long)]
        pref: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value_t = Method::Dca)]
        method: Method,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Design K codebooks for a continuous preference description.
    DesignContinuous {
        /// JSON with `kind` (uniform | dirichlet | radial), `n`, optional `alpha`/`center`.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value_t = ContinuousMethod::Saa)]
        method: ContinuousMethod,
        /// Sample size.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Design common and exclusive codebooks for two users.
    DesignTwouser {
        /// Preference file whose SPVs are the content items.
        #[arg(long)]
        pref: PathBuf,
        /// Joint request matrix as a headerless J x J CSV.
        #[arg(long, conflicts_with = "alpha")]
        joint: Option<PathBuf>,
        /// Generate the joint matrix with this trace instead.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 4)]
        k1: usize,
        #[arg(long, default_value_t = 4)]
        k2: usize,
        #[arg(long, value_enum, default_value_t = Method::Dca)]
        method: Method,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode an item with the best codebook of a set.
    Encode {
        /// Codebook set (or design) file; omit with --self-decodable.
        #[arg(long, required_unless_present = "self_decodable")]
        codebooks: Option<PathBuf>,
        /// Send the item's own statistics in the stream instead.
        #[arg(long)]
        self_decodable: bool,
        /// Item: whitespace-separated symbol indices, or raw bytes with --raw.
        #[arg(long)]
        input: PathBuf,
        /// Treat the input as raw bytes over a 256-letter alphabet.
        #[arg(long)]
        raw: bool,
        /// Alphabet size for --self-decodable text input.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode a stream produced by `encode`.
    Decode {
        #[arg(long, required_unless_present = "self_decodable")]
        codebooks: Option<PathBuf>,
        #[arg(long)]
        self_decodable: bool,
        #[arg(long)]
        input: PathBuf,
        /// Write raw bytes (alphabet of 256) instead of symbol indices.
        #[arg(long)]
        raw: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reproduce an experiment and write its CSV plus supporting files.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    /// Symbols per item used for the reported expected bits.
    #[arg(long, default_value_t = 20)]
    len: usize,
}

impl RunArgs {
    fn options(&self) -> DesignOptions {
        DesignOptions::default()
            .with_seed(self.seed)
            .with_restarts(self.restarts)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Kmeanspp,
    Dca,
}

impl From<Method> for DesignMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Kmeanspp => DesignMethod::Kmeanspp,
            Method::Dca => DesignMethod::Dca,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ContinuousMethod {
    Saa,
    Kmeanspp,
    Dca,
}

#[derive(Args)]
struct ExperimentArgs {
    /// fig1, continuous, fig4 or demo.
    scenario: Scenario,
    #[arg(long)]
    seed: u64,
    /// CSV path; supporting files go to `<stem>_files/` next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',')]
    ns: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    #[arg(long)]
    items: Option<usize>,
    #[arg(long)]
    len: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    eval_samples: Option<usize>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    grid_step: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    /// Per-user budgets as `K1,K2`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    budget: Option<Vec<usize>>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Fill the runtime column (output is then no longer reproducible).
    #[arg(long)]
    timing: bool,
}

impl ExperimentArgs {
    fn config(&self) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::defaults(self.scenario);
        cfg.seed = self.seed;
        cfg.timing = self.timing;
        if let Some(v) = &self.ns {
            cfg.ns = v.clone();
        }
        if let Some(v) = &self.ks {
            cfg.ks = v.clone();
        }
        if let Some(v) = &self.alphas {
            cfg.alphas = v.clone();
        }
        if let Some(b) = &self.budget {
            cfg.budget = (b[0], b[1]);
        }
        cfg.items = self.items.unwrap_or(cfg.items);
        cfg.len = self.len.unwrap_or(cfg.len);
        cfg.samples = self.samples.unwrap_or(cfg.samples);
        cfg.eval_samples = self.eval_samples.unwrap_or(cfg.eval_samples);
        cfg.seeds = self.seeds.unwrap_or(cfg.seeds);
        cfg.grid_step = self.grid_step.unwrap_or(cfg.grid_step);
        cfg.restarts = self.restarts.unwrap_or(cfg.restarts);
        cfg
    }
}

fn read_item(path: &Path, raw: bool, n: usize) -> Result<ItemSpec> {
    let symbols: Vec<usize> = if raw {
        fs::read(path)?.into_iter().map(usize::from).collect()
    } else {
        fs::read_to_string(path)?
            .split_whitespace()
            .map(|t| {
                t.parse::<usize>()
                    .with_context(|| format!("bad symbol {t:?}"))
            })
            .collect::<Result<_>>()?
    };
    Ok(ItemSpec::new(symbols, n)?)
}

fn write_item(path: &Path, item: &ItemSpec, raw: bool) -> Result<()> {
    if raw {
        let bytes = item
            .symbols()
            .iter()
            .map(|&s| u8::try_from(s))
            .collect::<std::result::Result<Vec<u8>, _>>();
        fs::write(path, bytes.context("symbol does not fit in a byte")?)?;
    } else {
        let text: Vec<String> = item.symbols().iter().map(usize::to_string).collect();
        fs::write(path, text.join(" ") + "\n")?;
    }
    Ok(())
}

fn read_set(path: &Path) -> Result<CodebookSet> {
    Ok(read_json::<CodebookSetFile>(path)?.into_set()?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::GenData { n, j, seed, out } => {
            write_json(
                &out,
                &PreferenceFile::from_preference(&gen_data(n, j, seed)?),
            )?;
        }
        Cmd::DesignDiscrete {
            pref,
            k,
            method,
            run,
            out,
        } => {
            let pref = read_json::<PreferenceFile>(&pref)?.into_preference()?;
            let opts = run.options();
            let r = match method {
                Method::Kmeanspp => design_kmeanspp(&pref, k, &opts)?,
                Method::Dca => design_dca(&pref, k, &opts)?,
            };
            write_json(&out, &DesignFile::from_result(&r))?;
            let bits = run.len as f64 * (mean_entropy(&pref) + r.objective);
            println!(
                "objective {:.9} bits/symbol, expected {bits:.6} bits per item",
                r.objective
            );
        }
        Cmd::DesignContinuous {
            spec,
            k,
            method,
            samples,
            run,
            out,
        } => {
            let spec = read_json::<PreferenceSpecFile>(&spec)?.to_spec()?;
            let opts = run.options();
            let r = match method {
                ContinuousMethod::Saa => design_continuous_saa(&spec, k, samples, &opts)?,
                ContinuousMethod::Kmeanspp => {
                    design_sampling(&spec, k, samples, DesignMethod::Kmeanspp, &opts)?
                }
                ContinuousMethod::Dca => {
                    design_sampling(&spec, k, samples, DesignMethod::Dca, &opts)?
                }
            };
            write_json(&out, &CodebookSetFile::from_set(&r.set))?;
            println!("in-sample objective {:.9} bits/symbol", r.objective);
        }
        Cmd::DesignTwouser {
            pref,
            joint,
            alpha,
            k1,
            k2,
            method,
            run,
            out,
        } => {
            let pref = read_json::<PreferenceFile>(&pref)?.into_preference()?;
            let f = match (joint, alpha) {
                (Some(path), _) => JointPreference::from_csv(fs::File::open(&path)?)?,
                (None, Some(a)) => joint_pref_alpha(pref.len(), a)?,
                (None, None) => return Err(Invalid("give --joint or --alpha".into()).into()),
            };
            let budget = TwoUserBudget::new(k1, k2)?;
            let opts = run.options();
            let o = match method {
                Method::Kmeanspp => design_twouser_kmeanspp(pref.spvs(), &f, &budget, &opts)?,
                Method::Dca => design_twouser_dca(pref.spvs(), &f, &budget, &opts)?,
            };
            write_json(&out, &TwoUserDesignFile::new(&o.design, o.objective_bits))?;
            println!(
                "K0 = {}, {:.9} bits per symbol pair, expected {:.6} bits per request pair",
                o.design.k0(),
                o.objective_bits,
                run.len as f64 * o.objective_bits
            );
        }
        Cmd::Encode {
            codebooks,
            self_decodable,
            input,
            raw,
            n,
            out,
        } => {
            let bytes = if self_decodable {
                let n = if raw {
                    256
                } else {
                    n.context("--n is required for text input with --self-decodable")?
                };
                let item = read_item(&input, raw, n)?;
                let counts = item.counts();
                let p = Spv::from_weights(counts.iter().map(|&c| c as f64).collect())?;
                encode_self_decodable(&item, &p)?
            } else {
                let set = read_set(codebooks.as_deref().context("--codebooks is required")?)?;
                let item = read_item(&input, raw, set.n())?;
                let enc = encode(&item, &set)?;
                eprintln!(
                    "codebook {}, {} payload bits, {} bytes",
                    enc.codebook,
                    enc.payload_bits,
                    enc.bytes.len()
                );
                enc.bytes
            };
            fs::write(&out, bytes)?;
        }
        Cmd::Decode {
            codebooks,
            self_decodable,
            input,
            raw,
            out,
        } => {
            let bytes = fs::read(&input)?;
            let item = if self_decodable {
                decode_self_decodable(&bytes)?
            } else {
                decode(
                    &bytes,
                    &read_set(codebooks.as_deref().context("--codebooks is required")?)?,
                )?
            };
            write_item(&out, &item, raw)?;
        }
        Cmd::Experiment(args) => {
            let cfg = args.config();
            let exp = run_experiment(&cfg)?;
            if let Some(report) = &exp.report {
                print!("{report}");
            }
            write_outputs(&args.out, &exp.rows, &exp.artifacts)?;
            eprintln!("wrote {} rows to {}", exp.rows.len(), args.out.display());
        }
    }
    Ok(())
}

/// 2 for invalid input, 3 for exceeded budgets or guards, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    use esc_core::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::BudgetExceeded { .. } | E::RejectionStall { .. } => 3,
                E::DimensionMismatch { .. }
                | E::InvalidSpv(_)
                | E::InvalidCodebook(_)
                | E::InvalidPreference(_)
                | E::InvalidArgument(_)
                | E::KraftViolation { .. }
                | E::Json(_) => 2,
                _ => 1,
            };
        }
        if cause.is::<Invalid>() || cause.is::<std::num::ParseIntError>() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

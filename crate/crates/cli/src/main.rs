//! Command-line front end for the fingerprinting testbed.
//!
//! Exit codes: 0 on success, 1 for validation problems (bad flags, bad
//! spec or config files), 2 for runtime and data errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vfdt_core::channel::{standard_domains, ChannelProfile};
use vfdt_core::classifier::{evaluate, gradient_check, train_on, TrainedModel};
use vfdt_core::error::Error;
use vfdt_core::harness::{
    build_dataset, generate_population, paired_split, run_domain_adaptation, run_scalability,
    ExperimentSpec, Representation,
};
use vfdt_core::signal::read_cf32;
use vfdt_core::vfdt::{vfdt, VfdtConfig};

#[derive(Parser)]
#[command(
    name = "vfdt",
    version,
    about = "Device fingerprinting over variance fractal dimension trajectories"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SpecArgs {
    /// Experiment spec JSON; defaults apply when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Master seed override: sets population/data/model seeds to
    /// N, N+1, N+2.
    #[arg(long)]
    seed: Option<u64>,
    /// Domain set JSON (array of channel profiles); defaults to the
    /// built-in standard five.
    #[arg(long)]
    domains: Option<PathBuf>,
    /// Feature representation override for single-representation runs.
    #[arg(long, value_parser = parse_representation)]
    representation: Option<Representation>,
}

fn parse_representation(s: &str) -> Result<Representation, String> {
    match s {
        "raw_iq" => Ok(Representation::RawIq),
        "vfdt" => Ok(Representation::Vfdt),
        other => Err(format!("unknown representation {other:?} (raw_iq or vfdt)")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a device population and labeled dataset to disk.
    Simulate {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the dimension trajectory of a cf32 capture as CSV.
    Vfdt {
        /// Input .cf32 file (with .json sidecar).
        #[arg(long)]
        input: PathBuf,
        /// Output CSV path (columns: index, value).
        #[arg(long)]
        out: PathBuf,
        /// Trajectory config JSON; defaults to W=256, S=64, lag=4.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Which component to analyze.
        #[arg(long, default_value = "i", value_parser = ["i", "q"])]
        component: String,
        /// Amplitude gain applied before the trajectory.
        #[arg(long, default_value_t = 1.0)]
        gain: f64,
    },
    /// Train one model on the spec's training domains.
    Train {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a saved model on one domain's held-out slice.
    Eval {
        #[command(flatten)]
        spec: SpecArgs,
        /// Model checkpoint JSON from `train`.
        #[arg(long)]
        model: PathBuf,
        /// Domain id to evaluate on.
        #[arg(long)]
        domain: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the domain-adaptation experiment (both representations).
    DomainAdapt {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the device-count scalability experiment.
    Scale {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify analytic gradients against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
        #[arg(long, default_value_t = 123)]
        seed: u64,
    },
}

fn load_spec(args: &SpecArgs) -> Result<ExperimentSpec, Error> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str(&text)?
        }
        None => ExperimentSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.population_seed = seed;
        spec.data_seed = seed.wrapping_add(1);
        spec.model_seed = seed.wrapping_add(2);
    }
    if let Some(rep) = args.representation {
        spec.representation = rep;
    }
    Ok(spec)
}

fn load_domains(args: &SpecArgs) -> Result<Vec<ChannelProfile>, Error> {
    match &args.domains {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let domains: Vec<ChannelProfile> = serde_json::from_str(&text)?;
            for d in &domains {
                d.validate()?;
            }
            if domains.is_empty() {
                return Err(Error::validation("domain set file is empty"));
            }
            Ok(domains)
        }
        None => Ok(standard_domains()),
    }
}

fn cmd_simulate(args: &SpecArgs, out: &Path) -> Result<(), Error> {
    let spec = load_spec(args)?;
    let domains = load_domains(args)?;
    spec.validate(&domains)?;
    std::fs::create_dir_all(out)?;

    let population = generate_population(spec.population_size, spec.population_seed)?;
    std::fs::write(out.join("population.json"), serde_json::to_string_pretty(&population)?)?;
    std::fs::write(out.join("domains.json"), serde_json::to_string_pretty(&domains)?)?;

    let in_use = spec.domains_in_use(&domains);
    let dataset = build_dataset(
        &population,
        &in_use,
        spec.frames_per_device_per_domain,
        spec.representation,
        &spec.vfdt_config,
        &spec.synthesis,
        spec.data_seed,
    )?;
    let mut lines = String::new();
    for e in &dataset {
        lines.push_str(&serde_json::to_string(e)?);
        lines.push('\n');
    }
    std::fs::write(out.join("dataset.jsonl"), lines)?;
    println!(
        "wrote {} devices, {} domains, {} examples ({}) to {}",
        population.len(),
        in_use.len(),
        dataset.len(),
        spec.representation,
        out.display()
    );
    Ok(())
}

fn cmd_vfdt(
    input: &Path,
    out: &Path,
    config: Option<&PathBuf>,
    component: &str,
    gain: f64,
) -> Result<(), Error> {
    let cfg: VfdtConfig = match config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => VfdtConfig::default(),
    };
    let stream = read_cf32(input)?;
    let series: Vec<f64> = stream
        .samples()
        .iter()
        .map(|s| if component == "q" { s.im * gain } else { s.re * gain })
        .collect();
    let trace = vfdt(&series, &cfg)?;
    let mut csv = String::from("index,value\n");
    for (i, v) in trace.values.iter().enumerate() {
        csv.push_str(&format!("{i},{v:.9}\n"));
    }
    std::fs::write(out, csv)?;
    println!("wrote {}-point trajectory to {}", trace.values.len(), out.display());
    Ok(())
}

fn domain_dataset(
    spec: &ExperimentSpec,
    domains: &[ChannelProfile],
) -> Result<Vec<vfdt_core::classifier::LabeledExample>, Error> {
    let population = generate_population(spec.population_size, spec.population_seed)?;
    build_dataset(
        &population,
        &spec.domains_in_use(domains),
        spec.frames_per_device_per_domain,
        spec.representation,
        &spec.vfdt_config,
        &spec.synthesis,
        spec.data_seed,
    )
}

fn cmd_train(args: &SpecArgs, out: &Path) -> Result<(), Error> {
    let spec = load_spec(args)?;
    let domains = load_domains(args)?;
    spec.validate(&domains)?;
    std::fs::create_dir_all(out)?;

    let dataset = domain_dataset(&spec, &domains)?;
    let (train_idx, test_idx) =
        paired_split(&dataset, spec.train_config.train_fraction, spec.train_config.seed);
    let in_train = |i: &usize| spec.train_domains.contains(&dataset[*i].domain_label);
    let train_set: Vec<_> =
        train_idx.iter().filter(|i| in_train(i)).map(|&i| dataset[i].clone()).collect();
    let eval_set: Vec<_> =
        test_idx.iter().filter(|i| in_train(i)).map(|&i| dataset[i].clone()).collect();
    let cnn = vfdt_core::classifier::CnnConfig::default_for(spec.population_size, spec.model_seed);
    let (model, history) = train_on(&train_set, &eval_set, &cnn, &spec.train_config)?;

    model.save(out.join("model.json"))?;
    let mut csv = String::from("epoch,train_accuracy,test_accuracy,train_loss\n");
    for e in 0..history.train_accuracy.len() {
        csv.push_str(&format!(
            "{},{:.6},{:.6},{:.6}\n",
            e + 1,
            history.train_accuracy[e],
            history.test_accuracy.get(e).copied().unwrap_or(f64::NAN),
            history.train_loss[e]
        ));
    }
    std::fs::write(out.join("history.csv"), csv)?;
    println!(
        "trained on {} examples ({}, domains {:?}); final held-out accuracy {:.3}",
        train_set.len(),
        spec.representation,
        spec.train_domains,
        history.test_accuracy.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn cmd_eval(args: &SpecArgs, model_path: &Path, domain: &str, out: &Path) -> Result<(), Error> {
    let spec = load_spec(args)?;
    let domains = load_domains(args)?;
    spec.validate(&domains)?;
    if !spec.test_domains.iter().any(|d| d == domain)
        && !spec.train_domains.iter().any(|d| d == domain)
    {
        return Err(Error::validation(format!(
            "domain {domain} is not listed in the spec's train or test domains"
        )));
    }
    std::fs::create_dir_all(out)?;
    let model = TrainedModel::load(model_path)?;

    let dataset = domain_dataset(&spec, &domains)?;
    let (_, test_idx) =
        paired_split(&dataset, spec.train_config.train_fraction, spec.train_config.seed);
    let eval_set: Vec<_> = test_idx
        .iter()
        .filter(|&&i| dataset[i].domain_label == domain)
        .map(|&i| dataset[i].clone())
        .collect();
    if eval_set.is_empty() {
        return Err(Error::validation(format!("no held-out examples for domain {domain}")));
    }
    let result = evaluate(&model, &eval_set)?;

    let mut csv = String::new();
    for row in &result.confusion {
        csv.push_str(&row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
        csv.push('\n');
    }
    std::fs::write(out.join(format!("confusion_{domain}.csv")), csv)?;
    std::fs::write(out.join("eval.json"), serde_json::to_string_pretty(&result)?)?;
    println!("accuracy on {domain}: {:.4} ({} examples)", result.accuracy, eval_set.len());
    Ok(())
}

fn cmd_domain_adapt(args: &SpecArgs, out: &Path) -> Result<(), Error> {
    let spec = load_spec(args)?;
    let domains = load_domains(args)?;
    let report = run_domain_adaptation(&spec, &domains)?;
    report.write_outputs(out)?;
    for cell in &report.cells {
        println!(
            "{:<7} train {:<9} test {:<3} -> accuracy {:.4}",
            cell.representation.to_string(),
            cell.train_domains.join("+"),
            cell.test_domain,
            cell.accuracy
        );
    }
    println!("report written to {}", out.display());
    Ok(())
}

fn cmd_scale(args: &SpecArgs, out: &Path) -> Result<(), Error> {
    let spec = load_spec(args)?;
    let domains = load_domains(args)?;
    let report = run_scalability(&spec, &domains)?;
    report.write_outputs(out)?;
    for cell in &report.cells {
        println!(
            "{:<7} {:>2} devices, test {:<3} -> accuracy {:.4}",
            cell.representation.to_string(),
            cell.n_devices,
            cell.test_domain,
            cell.accuracy
        );
    }
    println!("report written to {}", out.display());
    Ok(())
}

fn cmd_gradcheck(tolerance: f64, seed: u64) -> Result<(), Error> {
    let cfg = vfdt_core::classifier::default_check_config(seed);
    let report = gradient_check(&cfg, tolerance)?;
    println!(
        "gradient check: {} parameters, max relative error {:.3e} at {} (tolerance {:.1e}) -> {}",
        report.parameters_checked,
        report.max_relative_error,
        report.worst_parameter,
        report.tolerance,
        if report.pass { "PASS" } else { "FAIL" }
    );
    if !report.pass {
        return Err(Error::data("gradient check failed"));
    }
    Ok(())
}

fn run() -> Result<(), Error> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; everything else is
            // a validation failure.
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) {
                print!("{e}");
                std::process::exit(0);
            }
            eprint!("{e}");
            std::process::exit(1);
        }
    };
    match &cli.command {
        Command::Simulate { spec, out } => cmd_simulate(spec, out),
        Command::Vfdt { input, out, config, component, gain } => {
            cmd_vfdt(input, out, config.as_ref(), component, *gain)
        }
        Command::Train { spec, out } => cmd_train(spec, out),
        Command::Eval { spec, model, domain, out } => cmd_eval(spec, model, domain, out),
        Command::DomainAdapt { spec, out } => cmd_domain_adapt(spec, out),
        Command::Scale { spec, out } => cmd_scale(spec, out),
        Command::Gradcheck { tolerance, seed } => cmd_gradcheck(*tolerance, *seed),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

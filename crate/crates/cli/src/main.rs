//! `kgacc`: audit the accuracy of a knowledge graph with as few annotations
//! as possible.
//!
//! Exit codes: 0 success, 1 I/O or data error, 2 usage error, 3 the run
//! finished but did not reach its target (no convergence, failed check).

mod args;

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use kgacc::bench::{
    default_mu_grid, emit_report, expected_width, replicate, replicate_with_workers,
    ReplicationSummary, ReportFormat,
};
use kgacc::evaluator::{
    evaluate, EvalReport, EvalStatus, FileAnnotator, InteractiveAnnotator, OracleAnnotator,
};
use kgacc::kg::{generate_synthetic, load_tsv, true_accuracy, SyntheticSpec};
use kgacc::{BetaParams, KnowledgeGraph};

use args::{
    prior_label, Annotator, BenchArgs, Cli, Command, DataSource, EvaluateArgs, GenerateArgs,
    MethodArgs, PriorWidthArgs, Unmet, Usage,
};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // library errors already embed their source in the message
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.is::<Usage>() {
        return 2;
    }
    if e.is::<Unmet>() {
        return 3;
    }
    match e.downcast_ref::<kgacc::Error>() {
        Some(kgacc::Error::Config(_) | kgacc::Error::Domain(_)) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<()> {
    let out_dir = cli.out_dir;
    match cli.command {
        Command::Generate(a) => cmd_generate(a, out_dir.as_deref()),
        Command::Evaluate(a) => cmd_evaluate(a, out_dir.as_deref()),
        Command::Bench(a) => cmd_bench(a, out_dir.as_deref()),
        Command::PriorWidth(a) => cmd_prior_width(a, out_dir.as_deref()),
    }
}

/// `--out` wins; otherwise `default` inside the output directory.
fn output_path(out: Option<PathBuf>, out_dir: Option<&Path>, default: &str) -> Result<PathBuf> {
    let path = match out {
        Some(p) => p,
        None => out_dir.map_or_else(|| PathBuf::from(default), |d| d.join(default)),
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(path)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn load(source: &DataSource) -> Result<(String, KnowledgeGraph)> {
    match source {
        DataSource::Profile(p) => Ok((p.name.to_string(), p.build()?)),
        DataSource::File(path) => {
            let kg = load_tsv(path)?;
            let tag = path.file_stem().map_or_else(
                || path.display().to_string(),
                |s| s.to_string_lossy().into(),
            );
            Ok((tag, kg))
        }
    }
}

fn default_prior_notice(cells: &[&MethodArgs]) {
    if cells.iter().any(|m| m.uses_default_prior()) {
        eprintln!("note: no --priors given for et/hpd, using the uniform prior Beta(1, 1)");
    }
}

fn cmd_generate(a: GenerateArgs, out_dir: Option<&Path>) -> Result<()> {
    let spec = SyntheticSpec::new(a.clusters, a.mean_size, a.mu, a.seed);
    // parameters are checked before anything touches the disk
    let kg = generate_synthetic(&spec)?;
    let path = output_path(a.out, out_dir, "synthetic.tsv")?;
    kg.save_tsv(&path)?;
    println!(
        "wrote {}: {} triples, {} clusters, accuracy {:.6}",
        path.display(),
        kg.len(),
        kg.num_clusters(),
        true_accuracy(&kg)?
    );
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs, out_dir: Option<&Path>) -> Result<()> {
    let source = a.source.resolve()?;
    let mut cfg = a.method.config()?;
    default_prior_notice(&[&a.method]);
    cfg.seed = a.seed;
    cfg.record_trace = a.trace.is_some();
    match (a.annotator, &a.labels) {
        (Annotator::File, None) => {
            return Err(Usage("--annotator file needs --labels".into()).into())
        }
        (Annotator::Oracle | Annotator::Interactive, Some(_)) => {
            return Err(Usage("--labels is only used with --annotator file".into()).into())
        }
        _ => {}
    }
    let trace_path = match a.trace {
        Some(t) => Some(output_path(Some(t), out_dir, "trace.csv")?),
        None => None,
    };

    let (tag, kg) = load(&source)?;
    let report = match a.annotator {
        Annotator::Oracle => evaluate(&kg, &cfg, OracleAnnotator::new(&kg)?)?,
        Annotator::File => {
            let path = a.labels.as_ref().expect("checked above");
            evaluate(&kg, &cfg, FileAnnotator::load(&kg, path)?)?
        }
        Annotator::Interactive => {
            let stdin = io::stdin();
            let ann = InteractiveAnnotator::new(&kg, stdin.lock(), io::stdout());
            evaluate(&kg, &cfg, ann)?
        }
    };
    print_report(&tag, &cfg.method.to_string(), &report);
    if let Some(path) = trace_path {
        write_trace(&path, &report)?;
        println!("trace       {}", path.display());
    }
    match report.status {
        EvalStatus::Converged => Ok(()),
        s => Err(Unmet(format!("evaluation stopped without convergence ({s:?})")).into()),
    }
}

fn print_report(dataset: &str, method: &str, r: &EvalReport) {
    let status = match r.status {
        EvalStatus::Converged => "converged",
        EvalStatus::PopulationExhausted => "population exhausted",
        EvalStatus::BudgetExhausted => "budget exhausted",
        EvalStatus::Aborted => "aborted",
    };
    println!("dataset     {dataset}");
    println!("method      {method}");
    println!("status      {status}");
    println!("estimate    {:.4}", r.mu_hat);
    if let Some(i) = &r.interval {
        let prior = i
            .prior
            .map(|p| format!(", prior {}", prior_label(p)))
            .unwrap_or_default();
        println!(
            "interval    [{:.4}, {:.4}]  moe {:.4}  ({}{prior})",
            i.lower,
            i.upper,
            i.moe,
            i.method.as_str()
        );
    }
    println!(
        "annotated   {} triples, {} entities, sample size {}",
        r.n_triples, r.n_entities, r.n_sample
    );
    println!("cost        {:.3} h", r.cost_hours);
    println!("iterations  {}", r.iterations);
}

fn write_trace(path: &Path, r: &EvalReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header: Vec<String> = [
        "iteration",
        "n",
        "tau",
        "distinct_triples",
        "distinct_entities",
        "mu_hat",
        "effective_n",
        "effective_tau",
        "chosen_moe",
    ]
    .map(String::from)
    .to_vec();
    if let Some(first) = r.trace.first() {
        for c in &first.candidates {
            let tag = c
                .prior
                .map_or_else(|| c.method.as_str().to_string(), prior_label);
            header.push(format!("{tag}_lower"));
            header.push(format!("{tag}_upper"));
        }
    }
    w.write_record(&header)?;
    for rec in &r.trace {
        let mut row = vec![
            rec.iteration.to_string(),
            rec.n.to_string(),
            rec.tau.to_string(),
            rec.distinct_triples.to_string(),
            rec.distinct_entities.to_string(),
            rec.mu_hat.to_string(),
            rec.effective_n.to_string(),
            rec.effective_tau.to_string(),
            rec.chosen_moe.to_string(),
        ];
        for c in &rec.candidates {
            row.push(c.lower.to_string());
            row.push(c.upper.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn cmd_bench(a: BenchArgs, out_dir: Option<&Path>) -> Result<()> {
    if a.reps == 0 {
        return Err(Usage("--reps must be at least 1".into()).into());
    }
    if a.workers == Some(0) {
        return Err(Usage("--workers must be at least 1".into()).into());
    }
    let cells = a.cells()?;
    default_prior_notice(&cells.iter().map(|(_, m)| m).collect::<Vec<_>>());
    let format = a.report_format();
    let default_name = match format {
        ReportFormat::Csv => "bench.csv",
        ReportFormat::Json => "bench.json",
    };
    let path = output_path(a.out.clone(), out_dir, default_name)?;

    let mut graphs: HashMap<String, (String, KnowledgeGraph)> = HashMap::new();
    let mut summaries: Vec<ReplicationSummary> = Vec::new();
    for (source, method) in &cells {
        let key = source.key();
        if !graphs.contains_key(&key) {
            graphs.insert(key.clone(), load(source)?);
        }
        let (tag, kg) = &graphs[&key];
        let mut cfg = method.config()?;
        cfg.seed = a.seed;
        let s = match a.workers {
            Some(k) => replicate_with_workers(kg, tag, &cfg, a.reps, a.seed, k)?,
            None => replicate(kg, tag, &cfg, a.reps, a.seed)?,
        };
        println!(
            "{:<10} {:<5} {:<7} triples {:>8.1} ± {:<7.1} cost {:>7.3} ± {:<6.3} h  converged {:.3}",
            s.dataset,
            s.sampling,
            s.method,
            s.triples_mean,
            s.triples_std,
            s.cost_hours_mean,
            s.cost_hours_std,
            s.converged_fraction
        );
        summaries.push(s);
    }
    emit_report(&summaries, format, a.raw, &path)?;
    println!("wrote {}", path.display());

    let short = summaries
        .iter()
        .filter(|s| s.converged_fraction < 1.0 || s.failures > 0)
        .count();
    if short > 0 {
        return Err(Unmet(format!("{short} cell(s) had runs that did not converge")).into());
    }
    Ok(())
}

fn cmd_prior_width(a: PriorWidthArgs, out_dir: Option<&Path>) -> Result<()> {
    let priors = args::parse_priors(&a.priors)?;
    if a.n == 0 {
        return Err(Usage("--n must be at least 1".into()).into());
    }
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(Usage(format!("--alpha must lie in (0, 1), got {}", a.alpha)).into());
    }
    let jeffreys = priors.iter().position(|&p| p == BetaParams::JEFFREYS);
    if a.assert_jeffreys_dominated && (jeffreys.is_none() || priors.len() < 2) {
        return Err(Usage(
            "--assert-jeffreys-dominated needs jeffreys and at least one other prior".into(),
        )
        .into());
    }
    let method = a.method.into();
    let path = output_path(a.out, out_dir, "prior_width.csv")?;

    let grid = default_mu_grid();
    let columns = priors
        .iter()
        .map(|&p| expected_width(p, a.n, a.alpha, &grid, method))
        .collect::<kgacc::Result<Vec<_>>>()?;

    let mut w = csv::Writer::from_writer(create(&path)?);
    let mut header = vec!["mu".to_string()];
    header.extend(priors.iter().map(|&p| prior_label(p)));
    w.write_record(&header)?;
    for (i, mu) in grid.iter().enumerate() {
        let mut row = vec![format!("{mu:.2}")];
        row.extend(columns.iter().map(|c| format!("{:.10}", c[i])));
        w.write_record(&row)?;
    }
    w.flush()
        .with_context(|| format!("writing {}", path.display()))?;
    println!(
        "wrote {}: {} grid points x {} priors (n = {}, alpha = {}, {})",
        path.display(),
        grid.len(),
        priors.len(),
        a.n,
        a.alpha,
        method
    );

    if let (true, Some(j)) = (a.assert_jeffreys_dominated, jeffreys) {
        let bad: Vec<String> = (0..grid.len())
            .filter(|&i| {
                let best_other = (0..priors.len())
                    .filter(|&k| k != j)
                    .map(|k| columns[k][i])
                    .fold(f64::INFINITY, f64::min);
                columns[j][i] <= best_other
            })
            .map(|i| format!("{:.2}", grid[i]))
            .collect();
        if !bad.is_empty() {
            let more = if bad.len() > 5 { ", ..." } else { "" };
            return Err(Unmet(format!(
                "jeffreys is not dominated at {} of {} grid points (mu = {}{more})",
                bad.len(),
                grid.len(),
                bad[..bad.len().min(5)].join(", ")
            ))
            .into());
        }
        println!("jeffreys is strictly dominated at every grid point");
    }
    Ok(())
}

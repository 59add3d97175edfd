//! Subcommand bodies.

use std::fs;

use serde_json::json;

use rkit_core::{
    awp_perturb, caratheodory_reduce, compute_report, emit_scores, filter_rashomon_set,
    generate_synthetic, greedy_select, sample_capacity, summarize_capacities, train_logistic,
    AwpConfig64, BaConfig64, Dataset64, LogisticModel64, RashomonSpec64, ScoreTensor64,
    SyntheticSpec64,
};

use crate::io::{
    load_dataset_csv, load_score_tensor, read_per_sample, round_sig12, save_recomputed_summary,
    save_report, save_tensor, validation, write_atomic, write_summary, SummaryFile,
};
use crate::{
    CapacityArgs, CliError, ExploreArgs, MetricsArgs, ReduceArgs, ReportArgs, SelectArgs,
    SolverArgs, TensorArgs,
};

fn ba_config(solver: &SolverArgs) -> Result<BaConfig64, CliError> {
    Ok(BaConfig64::new(solver.tolerance, solver.max_iterations)?)
}

fn rashomon_spec(tensor: &TensorArgs) -> Result<RashomonSpec64, CliError> {
    let mut spec = RashomonSpec64::new(tensor.mode.into(), tensor.epsilon)?;
    if let Some(base) = &tensor.base_model {
        spec = spec.with_base_model(base.clone());
    }
    Ok(spec)
}

/// Resolved worker count: the flag wins, then RKIT_THREADS, then all
/// cores (0 lets the pool pick).
fn resolve_threads(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(k) = flag {
        return Ok(k);
    }
    match std::env::var("RKIT_THREADS") {
        Ok(value) => value
            .trim()
            .parse()
            .map_err(|_| validation(format!("RKIT_THREADS is not a thread count: `{value}`"))),
        Err(_) => Ok(0),
    }
}

/// Runs `body` inside a rayon pool of the resolved size. Per-sample
/// results are indexed, so the thread count never changes any output.
fn with_pool<T: Send>(
    threads: usize,
    body: impl FnOnce() -> Result<T, CliError> + Send,
) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| validation(format!("thread pool: {e}")))?;
    pool.install(body)
}

pub fn capacity(args: CapacityArgs) -> Result<(), CliError> {
    let tensor = load_score_tensor(&args.tensor.manifest)?;
    let spec = rashomon_spec(&args.tensor)?;
    let config = ba_config(&args.solver)?;
    let threads = resolve_threads(args.solver.threads)?;
    let report = with_pool(threads, || Ok(compute_report(&tensor, &spec, &config)?))?;
    let echo = json!({
        "subcommand": "capacity",
        "manifest": args.tensor.manifest.display().to_string(),
        "epsilon": args.tensor.epsilon,
        "mode": format!("{:?}", args.tensor.mode).to_lowercase(),
        "base_model": args.tensor.base_model,
        "tolerance": args.solver.tolerance,
        "max_iterations": args.solver.max_iterations,
        "threads": threads,
    });
    let written = save_report(&report, echo, &args.out)?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn metrics(args: MetricsArgs) -> Result<(), CliError> {
    let tensor = load_score_tensor(&args.tensor.manifest)?;
    let spec = rashomon_spec(&args.tensor)?;
    let subset = filter_rashomon_set(&tensor, &spec)?;
    let ambiguity = rkit_core::ambiguity(&tensor, &spec)?;
    let discrepancy = rkit_core::discrepancy(&tensor, &spec)?;
    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.out.display())))?;
    let echo = json!({
        "subcommand": "metrics",
        "manifest": args.tensor.manifest.display().to_string(),
        "epsilon": args.tensor.epsilon,
        "mode": format!("{:?}", args.tensor.mode).to_lowercase(),
        "base_model": args.tensor.base_model,
    });
    let path = args.out.join("summary.json");
    write_summary(
        &path,
        SummaryFile {
            ambiguity: Some(ambiguity),
            discrepancy: Some(discrepancy),
            tail_mean_1pct: None,
            tail_mean_5pct: None,
            tail_stderr_1pct: None,
            tail_stderr_5pct: None,
            n_samples: tensor.num_samples(),
            rashomon_model_ids: Some(
                subset
                    .iter()
                    .map(|&j| tensor.model_ids()[j].clone())
                    .collect(),
            ),
            config: echo,
        },
    )?;
    println!("wrote {}", path.display());
    Ok(())
}

fn model_pool(
    tensor: &ScoreTensor64,
    epsilon: Option<f64>,
    mode: crate::ModeArg,
) -> Result<Vec<usize>, CliError> {
    match epsilon {
        Some(eps) => {
            let spec = RashomonSpec64::new(mode.into(), eps)?;
            Ok(filter_rashomon_set(tensor, &spec)?)
        }
        None => Ok((0..tensor.num_models()).collect()),
    }
}

pub fn reduce(args: ReduceArgs) -> Result<(), CliError> {
    let tensor = load_score_tensor(&args.manifest)?;
    let subset = model_pool(&tensor, args.epsilon, args.mode)?;
    let config = ba_config(&args.solver)?;
    let threads = resolve_threads(args.solver.threads)?;

    let kept_per_sample: Vec<Vec<String>> = with_pool(threads, || {
        use rayon::prelude::*;
        (0..tensor.num_samples())
            .into_par_iter()
            .map(|i| {
                let channel = tensor.score_set_for_sample(i, &subset)?;
                let reduction = caratheodory_reduce(&channel, &config, args.support_threshold)?;
                Ok(reduction.kept_model_ids)
            })
            .collect::<Result<_, rkit_core::Error>>()
            .map_err(CliError::from)
    })?;

    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.out.display())))?;
    let mut csv = String::from("sample_id,kept_model_ids\n");
    for (id, kept) in tensor.sample_ids().iter().zip(&kept_per_sample) {
        csv.push_str(&format!("{id},{}\n", kept.join(";")));
    }
    let path = args.out.join("reduce.csv");
    write_atomic(&path, csv.as_bytes())?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn select(args: SelectArgs) -> Result<(), CliError> {
    let tensor = load_score_tensor(&args.manifest)?;
    let subset = model_pool(&tensor, args.epsilon, args.mode)?;
    let config = ba_config(&args.solver)?;
    let threads = resolve_threads(args.solver.threads)?;
    let selection = with_pool(threads, || {
        Ok(greedy_select(
            &tensor,
            &subset,
            args.r,
            &config,
            args.seed,
            args.sample_cap,
        )?)
    })?;

    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.out.display())))?;
    let body = json!({
        "selected_model_ids": selection.selected_model_ids,
        "capacity_trace": selection
            .capacity_trace
            .iter()
            .map(|&v| round_sig12(v))
            .collect::<Vec<f64>>(),
        "config": {
            "subcommand": "select",
            "manifest": args.manifest.display().to_string(),
            "epsilon": args.epsilon,
            "mode": format!("{:?}", args.mode).to_lowercase(),
            "r": args.r,
            "seed": args.seed,
            "sample_cap": args.sample_cap,
            "tolerance": args.solver.tolerance,
            "max_iterations": args.solver.max_iterations,
            "threads": threads,
        },
    });
    let path = args.out.join("selection.json");
    let text = serde_json::to_string_pretty(&body)
        .map_err(|e| validation(format!("selection serialization: {e}")))?;
    write_atomic(&path, text.as_bytes())?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Parses `n=400,d=2,sep=6,seed=7`.
fn parse_synthetic(spec: &str) -> Result<SyntheticSpec64, CliError> {
    let mut n = None;
    let mut d = None;
    let mut sep = None;
    let mut seed = None;
    for part in spec.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| validation(format!("bad synthetic field `{part}` (want key=value)")))?;
        match key.trim() {
            "n" => n = Some(value.trim().parse::<usize>()),
            "d" => d = Some(value.trim().parse::<usize>()),
            "sep" => sep = Some(value.trim().parse::<f64>()),
            "seed" => seed = Some(value.trim().parse::<u64>()),
            other => return Err(validation(format!("unknown synthetic field `{other}`"))),
        }
    }
    let unwrap = |name: &str, v: Option<Result<usize, _>>| -> Result<usize, CliError> {
        v.ok_or_else(|| validation(format!("synthetic spec is missing `{name}`")))?
            .map_err(|_| validation(format!("synthetic `{name}` is not a count")))
    };
    Ok(SyntheticSpec64 {
        num_samples: unwrap("n", n)?,
        num_features: unwrap("d", d)?,
        class_separation: sep
            .ok_or_else(|| validation("synthetic spec is missing `sep`".to_string()))?
            .map_err(|_| validation("synthetic `sep` is not a number".to_string()))?,
        seed: seed
            .ok_or_else(|| validation("synthetic spec is missing `seed`".to_string()))?
            .map_err(|_| validation("synthetic `seed` is not an integer".to_string()))?,
    })
}

fn load_explore_dataset(args: &ExploreArgs) -> Result<Dataset64, CliError> {
    match (&args.synthetic, &args.data) {
        (Some(spec), None) => Ok(generate_synthetic(&parse_synthetic(spec)?)?),
        (None, Some(path)) => load_dataset_csv(path, &args.label_col),
        (None, None) => Err(validation(
            "explore needs either --synthetic or --data".to_string(),
        )),
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    }
}

pub fn explore(args: ExploreArgs) -> Result<(), CliError> {
    let data = load_explore_dataset(&args)?;
    let ba = ba_config(&args.solver)?;
    let threads = resolve_threads(args.solver.threads)?;
    if args.epsilons.is_empty() {
        return Err(validation("at least one epsilon is required".to_string()));
    }

    let base = train_logistic(&data, args.train_iters, args.grad_tolerance)?;
    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.out.display())))?;

    let mut summary_entries = Vec::new();
    for &eps in &args.epsilons {
        let mut awp = AwpConfig64::new(eps)?;
        awp.perturbation_strength = args.strength;
        awp.score_cap = args.score_cap;
        awp.damping = args.damping;
        awp.max_steps = args.max_steps;
        awp.validate()?;

        // One perturbed model per (sample, class); walks are independent.
        let per_target: Vec<(LogisticModel64, LogisticModel64)> = with_pool(threads, || {
            use rayon::prelude::*;
            (0..data.num_samples())
                .into_par_iter()
                .map(|i| {
                    let low = awp_perturb(&base, &data, i, 0, &awp)?.model;
                    let high = awp_perturb(&base, &data, i, 1, &awp)?.model;
                    Ok((low, high))
                })
                .collect::<Result<_, rkit_core::Error>>()
                .map_err(CliError::from)
        })?;

        // Per-sample multiplicity from the sample's own perturbation pair
        // plus the base model, mirroring the generation procedure.
        let (mean_multiplicity, mean_capacity) = with_pool(threads, || {
            use rayon::prelude::*;
            let per_sample: Vec<(f64, f64)> = (0..data.num_samples())
                .into_par_iter()
                .map(|i| {
                    let (low, high) = &per_target[i];
                    let trio =
                        emit_scores(&[base.clone(), low.clone(), high.clone()], &data)?;
                    let result = sample_capacity(&trio, i, &[0, 1, 2], &ba)?;
                    Ok((result.multiplicity, result.capacity_bits))
                })
                .collect::<Result<_, rkit_core::Error>>()?;
            let n = per_sample.len() as f64;
            let m_c: f64 = per_sample.iter().map(|p| p.0).sum::<f64>() / n;
            let bits: f64 = per_sample.iter().map(|p| p.1).sum::<f64>() / n;
            Ok::<(f64, f64), CliError>((m_c, bits))
        })?;

        let mut models = vec![base.clone()];
        for (low, high) in per_target {
            models.push(low);
            models.push(high);
        }
        let tensor = emit_scores(&models, &data)?;
        let manifest_name = format!("manifest_eps{eps}.json");
        save_tensor(
            &tensor,
            &args.out.join(&manifest_name),
            &format!("scores_eps{eps}.csv"),
            Some(&format!("losses_eps{eps}.csv")),
            Some("mean cross-entropy, nats"),
        )?;
        summary_entries.push(json!({
            "epsilon": eps,
            "manifest": manifest_name,
            "models": tensor.num_models(),
            "base_loss_nats": round_sig12(base.train_loss),
            "mean_m_c": round_sig12(mean_multiplicity),
            "mean_capacity_bits": round_sig12(mean_capacity),
        }));
        println!("epsilon {eps}: wrote {manifest_name} (mean m_c {mean_multiplicity:.4})");
    }

    let summary = json!({
        "subcommand": "explore",
        "dataset": {
            "samples": data.num_samples(),
            "features": data.num_features(),
            "source": args.synthetic.clone().unwrap_or_else(|| {
                args.data
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default()
            }),
        },
        "loss_units": "mean cross-entropy, nats",
        "per_epsilon": summary_entries,
    });
    let path = args.out.join("explore_summary.json");
    let text = serde_json::to_string_pretty(&summary)
        .map_err(|e| validation(format!("summary serialization: {e}")))?;
    write_atomic(&path, text.as_bytes())?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn report(args: ReportArgs) -> Result<(), CliError> {
    let (_, capacities, _) = read_per_sample(&args.per_sample)?;
    let summary = summarize_capacities(&capacities)?;
    let echo = json!({
        "subcommand": "report",
        "per_sample": args.per_sample.display().to_string(),
    });
    let written = save_recomputed_summary(&summary, capacities.len(), echo, &args.out)?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

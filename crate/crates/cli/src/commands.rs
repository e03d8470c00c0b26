use std::fs;
use std::io::Write;
use std::path::Path;

use clap::ValueEnum;
use moment_match::adaptation::{self, domain_activations, log_grid, sensitivity_sweep, SweepAxis, TrainConfig};
use moment_match::discrepancy::{DiscrepancyKind, DiscrepancySpec};
use moment_match::gradcheck::{check_discrepancy, check_network};
use moment_match::network::single_hidden_layer;
use moment_match::optim::OptimizerKind;
use moment_match::samples::load_dense_csv;
use moment_match::{checkpoint, Bounds, Sample};
use serde::Serialize;

use crate::args::{
    ActivationsArgs, DiscrepancyArgs, GradcheckArgs, Measure, ModelArgs, OptimizerArg, SweepArgs, TrainArgs,
};
use crate::data::{load_single, load_tasks, DatasetRecord};
use crate::output::{create, csv_writer, g17, write_header};
use crate::CliError;

/// Gradient checks pass below this relative error.
const GRADCHECK_THRESHOLD: f64 = 1e-4;

fn measure_kind(measure: Measure, k: usize, beta: f64) -> DiscrepancyKind {
    match measure {
        Measure::Cmd => DiscrepancyKind::Cmd { k },
        Measure::Mmd => DiscrepancyKind::Mmd { beta },
        Measure::Mkl => DiscrepancyKind::Mkl,
    }
}

fn build_config(model: &ModelArgs, inputs: usize, classes: usize) -> Result<TrainConfig, CliError> {
    let optimizer = match (model.optimizer, model.lr) {
        (OptimizerArg::Adadelta, None) => OptimizerKind::adadelta(),
        (OptimizerArg::Adadelta, Some(_)) => {
            return Err(CliError::Usage("adadelta takes no learning rate; drop --lr".into()))
        }
        (OptimizerArg::Adagrad, lr) => match OptimizerKind::adagrad() {
            OptimizerKind::Adagrad { lr: default, eps } => OptimizerKind::Adagrad {
                lr: lr.unwrap_or(default),
                eps,
            },
            other => other,
        },
        (OptimizerArg::Sgd, Some(lr)) => OptimizerKind::sgd(lr),
        (OptimizerArg::Sgd, None) => return Err(CliError::Usage("--optimizer sgd requires --lr".into())),
    };
    let config = TrainConfig {
        layers: single_hidden_layer(inputs, model.hidden, classes, model.activation.0),
        discrepancy: DiscrepancySpec::new(measure_kind(model.discrepancy, model.k, model.beta), model.lambda)?,
        optimizer,
        epochs: model.epochs,
        batch_size: model.batch_size,
        seed: model.seed,
        balance_source: !model.no_balance,
    };
    config.validate()?;
    Ok(config)
}

fn load_sample(path: &Path, bounds: Bounds) -> Result<Sample, CliError> {
    let data = load_dense_csv(path, None, None)?.into_inputs();
    Sample::new(data, bounds).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn discrepancy(args: DiscrepancyArgs) -> Result<(), CliError> {
    let bounds = args.bounds.0;
    let x = load_sample(&args.x, bounds)?;
    let y = load_sample(&args.y, bounds)?;
    let kind = measure_kind(args.measure, args.k, args.beta);
    kind.validate()?;
    let value = kind.value(&x, &y)?;
    println!("value {}", g17(value.value));
    if let Some(terms) = value.per_term {
        let terms: Vec<String> = terms.into_iter().map(g17).collect();
        println!("per_term {}", terms.join(","));
    }
    Ok(())
}

#[derive(Serialize)]
struct RunConfig<'a> {
    dataset: &'a DatasetRecord,
    train: &'a TrainConfig,
}

#[derive(Serialize)]
struct ResultFile<'a> {
    tool: String,
    target_test_accuracy: f64,
    final_epoch: Option<&'a adaptation::EpochRecord>,
    seed: u64,
    config: RunConfig<'a>,
}

pub fn train(args: TrainArgs) -> Result<(), CliError> {
    let (dataset, record) = load_single(&args.data, args.model.seed)?;
    let config = build_config(&args.model, dataset.input_dim(), dataset.num_classes())?;
    let run = adaptation::train(&dataset, &config)?;
    let resolved = RunConfig {
        dataset: &record,
        train: &config,
    };

    let history_path = args.out.join("history.csv");
    let mut w = create(&history_path)?;
    write_header(&mut w, "train", &resolved, &config.seed.to_string())?;
    let mut csv = csv_writer(&mut w);
    csv.write_record(["epoch", "task_loss", "reg_value", "source_acc"])?;
    for r in &run.history {
        csv.write_record([
            r.epoch.to_string(),
            g17(r.task_loss),
            g17(r.reg_value),
            g17(r.source_accuracy),
        ])?;
    }
    csv.flush()?;
    drop(csv);
    w.flush()?;

    let result = ResultFile {
        tool: format!("moment-match {}", env!("CARGO_PKG_VERSION")),
        target_test_accuracy: run.target_test_accuracy,
        final_epoch: run.history.last(),
        seed: config.seed,
        config: resolved,
    };
    let result_path = args.out.join("result.json");
    let mut w = create(&result_path)?;
    writeln!(w, "{}", serde_json::to_string_pretty(&result)?)?;
    w.flush()?;

    if let Some(path) = &args.save_model {
        checkpoint::write(&run.state, path)?;
    }
    println!("target_test_accuracy {}", g17(run.target_test_accuracy));
    println!("wrote {} and {}", history_path.display(), result_path.display());
    Ok(())
}

fn parse_log_values(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || {
        CliError::Usage(format!(
            "--log-values expects LO,HI,COUNT with 0 < LO < HI, got {spec:?}"
        ))
    };
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    let [lo, hi, count] = parts[..] else {
        return Err(bad());
    };
    let lo: f64 = lo.parse().map_err(|_| bad())?;
    let hi: f64 = hi.parse().map_err(|_| bad())?;
    let count: usize = count.parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi > lo && hi.is_finite() && count >= 1) {
        return Err(bad());
    }
    Ok(log_grid(lo, hi, count))
}

#[derive(Serialize)]
struct SweepConfig<'a> {
    datasets: Vec<&'a DatasetRecord>,
    base: &'a TrainConfig,
    axis: SweepAxis,
    values: &'a [f64],
    reference: f64,
    seeds: &'a [u64],
}

pub fn sweep(args: SweepArgs) -> Result<(), CliError> {
    let tasks = load_tasks(&args.data, args.model.seed)?;
    let (first, _) = &tasks[0];
    if tasks
        .iter()
        .any(|(d, _)| d.input_dim() != first.input_dim() || d.num_classes() != first.num_classes())
    {
        return Err(CliError::Usage(
            "all sweep tasks must share input dimension and class count".into(),
        ));
    }
    let base = build_config(&args.model, first.input_dim(), first.num_classes())?;
    let values = match &args.log_values {
        Some(spec) => parse_log_values(spec)?,
        None => args.values.clone(),
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Usage("sweep values must be finite".into()));
    }
    let reference = args.reference.unwrap_or(match args.axis {
        SweepAxis::K => 5.0,
        SweepAxis::Lambda | SweepAxis::Beta => 1.0,
        SweepAxis::HiddenNodes => args.model.hidden as f64,
    });
    let datasets: Vec<_> = tasks.iter().map(|(d, _)| d.clone()).collect();
    let result = sensitivity_sweep(&datasets, &base, args.axis, &values, reference, &args.seeds)?;

    let config = SweepConfig {
        datasets: tasks.iter().map(|(_, r)| r).collect(),
        base: &base,
        axis: args.axis,
        values: &values,
        reference,
        seeds: &args.seeds,
    };
    let seeds: Vec<String> = args.seeds.iter().map(u64::to_string).collect();
    let mut w = create(&args.out)?;
    write_header(&mut w, "sweep", &config, &seeds.join(","))?;
    let mut csv = csv_writer(&mut w);
    csv.write_record(["axis_value", "task", "seed", "accuracy", "ratio"])?;
    for c in &result.cells {
        csv.write_record([
            g17(c.value),
            c.task.clone(),
            c.seed.to_string(),
            g17(c.accuracy),
            g17(c.ratio),
        ])?;
    }
    csv.flush()?;
    drop(csv);
    w.flush()?;

    println!(
        "{:>12}  {:<16} {:>10} {:>10}",
        args.axis.to_string(),
        "task",
        "mean_acc",
        "ratio"
    );
    for task in &result.tasks {
        for &v in &result.values {
            println!(
                "{:>12}  {:<16} {:>10.4} {:>10.4}",
                g17(v),
                task,
                result.mean_accuracy(task, v).unwrap_or(f64::NAN),
                result.mean_ratio(task, v).unwrap_or(f64::NAN)
            );
        }
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

pub fn gradcheck(args: GradcheckArgs) -> Result<(), CliError> {
    if !(args.fd_step > 0.0 && args.fd_step.is_finite()) {
        return Err(CliError::Usage(format!(
            "--fd-step must be positive, got {}",
            args.fd_step
        )));
    }
    let measures = match args.measure.as_str() {
        "all" => vec![Measure::Cmd, Measure::Mmd, Measure::Mkl],
        other => vec![Measure::from_str(other, true)
            .map_err(|_| CliError::Usage(format!("unknown measure {other:?} (cmd, mmd, mkl or all)")))?],
    };
    let mut failed = Vec::new();
    for measure in measures {
        let kind = measure_kind(measure, args.k, args.beta);
        let report = if args.network {
            let spec = DiscrepancySpec::new(kind, 1.0)?;
            check_network(spec, args.activation.0, args.hidden, args.n, args.seed, args.fd_step)?
        } else {
            check_discrepancy(
                kind,
                args.n,
                args.m.unwrap_or(args.n),
                args.dim,
                args.seed,
                args.fd_step,
            )?
        };
        let ok = report.max_rel_error < GRADCHECK_THRESHOLD;
        println!(
            "{} max_rel_error={:.3e} compared={} {}",
            report.label,
            report.max_rel_error,
            report.compared,
            if ok { "ok" } else { "FAIL" }
        );
        if !ok {
            failed.push(report.label);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(format!(
            "gradient check above {GRADCHECK_THRESHOLD:e}: {}",
            failed.join(", ")
        )))
    }
}

pub fn activations(args: ActivationsArgs) -> Result<(), CliError> {
    let (dataset, record) = load_single(&args.data, args.model.seed)?;
    let (state, config) = match &args.model_path {
        Some(path) => (
            checkpoint::read(path)?,
            serde_json::json!({ "dataset": record, "checkpoint": path }),
        ),
        None => {
            let train = build_config(&args.model, dataset.input_dim(), dataset.num_classes())?;
            let state = adaptation::train(&dataset, &train)?.state;
            (
                state,
                serde_json::to_value(RunConfig {
                    dataset: &record,
                    train: &train,
                })?,
            )
        }
    };
    let (source, target) = domain_activations(&state, &dataset)?;
    fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    let seed = state.seed().to_string();
    for (name, acts) in [("source", source), ("target", target)] {
        let path = args.out.join(format!("{name}_activations.csv"));
        let mut w = create(&path)?;
        write_header(&mut w, &format!("activations {name}"), &config, &seed)?;
        let mut csv = csv_writer(&mut w);
        csv.write_record((0..acts.ncols()).map(|j| format!("h{j}")))?;
        for row in acts.outer_iter() {
            csv.write_record(row.iter().map(|&v| g17(v)))?;
        }
        csv.flush()?;
        drop(csv);
        w.flush()?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

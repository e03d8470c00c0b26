//! Turns dataset flags into domain datasets plus a serializable record of
//! exactly what was loaded.

use std::path::{Path, PathBuf};

use moment_match::samples::{
    load_dense_csv, load_sparse_bow, make_synthetic_pair, DenseCsv, DomainDataset, IndexBase, LabeledSample,
};
use moment_match::Error;
use serde::Serialize;

use crate::args::{DatasetArgs, Format};
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "source_kind", rename_all = "lowercase")]
pub enum DatasetRecord {
    Synthetic {
        task: String,
        n_source: usize,
        n_target: usize,
        n_test: usize,
        data_seed: u64,
    },
    Files {
        source: PathBuf,
        target: PathBuf,
        target_test: PathBuf,
        format: Format,
        dim: Option<usize>,
        label_column: String,
        one_based: bool,
    },
}

pub fn load_tasks(args: &DatasetArgs, default_seed: u64) -> Result<Vec<(DomainDataset, DatasetRecord)>, CliError> {
    let data_seed = args.data_seed.unwrap_or(default_seed);
    if let (Some(source), Some(target), Some(target_test)) = (&args.source, &args.target, &args.target_test) {
        let dataset = load_files(args, source, target, target_test)?;
        let record = DatasetRecord::Files {
            source: source.clone(),
            target: target.clone(),
            target_test: target_test.clone(),
            format: args.format,
            dim: args.dim,
            label_column: args.label_column.clone(),
            one_based: args.one_based,
        };
        return Ok(vec![(dataset, record)]);
    }
    args.synthetic
        .iter()
        .map(|task| {
            let dataset = make_synthetic_pair(
                task.kind,
                task.magnitude,
                args.n_source,
                args.n_target,
                args.n_test,
                data_seed,
            )?;
            let record = DatasetRecord::Synthetic {
                task: task.to_string(),
                n_source: args.n_source,
                n_target: args.n_target,
                n_test: args.n_test,
                data_seed,
            };
            Ok((dataset, record))
        })
        .collect()
}

pub fn load_single(args: &DatasetArgs, default_seed: u64) -> Result<(DomainDataset, DatasetRecord), CliError> {
    let mut tasks = load_tasks(args, default_seed)?;
    if tasks.len() != 1 {
        return Err(CliError::Usage(format!(
            "this command takes exactly one dataset, got {}",
            tasks.len()
        )));
    }
    Ok(tasks.remove(0))
}

fn load_files(args: &DatasetArgs, source: &Path, target: &Path, target_test: &Path) -> Result<DomainDataset, CliError> {
    let name = source
        .file_stem()
        .map_or_else(|| "files".to_string(), |s| s.to_string_lossy().into_owned());
    match args.format {
        Format::Sparse => {
            let dim = args
                .dim
                .ok_or_else(|| CliError::Usage("--format sparse requires --dim".into()))?;
            let base = if args.one_based {
                IndexBase::One
            } else {
                IndexBase::Zero
            };
            let src = load_sparse_bow(source, dim, base)?;
            let tgt = load_sparse_bow(target, dim, base)?;
            let test = load_sparse_bow(target_test, dim, base)?;
            Ok(DomainDataset::new(name, src, tgt.inputs().to_owned(), test)?)
        }
        Format::Dense => {
            let label = args.label_column.as_str();
            let (src, src_ids) = load_labeled(source, label)?;
            let (test, test_ids) = load_labeled(target_test, label)?;
            let test = align_classes(test, &test_ids, &src_ids, target_test)?;
            // The unlabeled file may or may not carry the label column.
            let tgt = match load_dense_csv(target, Some(label), None) {
                Ok(d) => d.into_inputs(),
                Err(_) => load_dense_csv(target, None, None)?.into_inputs(),
            };
            Ok(DomainDataset::new(name, src, tgt, test)?)
        }
    }
}

fn load_labeled(path: &Path, label: &str) -> Result<(LabeledSample, Vec<i64>), CliError> {
    match load_dense_csv(path, Some(label), None)? {
        DenseCsv::Labeled { sample, class_ids } => Ok((sample, class_ids)),
        DenseCsv::Matrix(_) => unreachable!("label column was requested"),
    }
}

/// Re-encodes `sample` so its one-hot columns follow `reference` ids.
fn align_classes(
    sample: LabeledSample,
    ids: &[i64],
    reference: &[i64],
    path: &Path,
) -> Result<LabeledSample, CliError> {
    if ids == reference {
        return Ok(sample);
    }
    let classes = sample
        .classes()
        .into_iter()
        .map(|c| {
            reference.binary_search(&ids[c]).map_err(|_| {
                CliError::from(Error::InvalidLabel(format!(
                    "{}: class {} does not occur in the source file",
                    path.display(),
                    ids[c]
                )))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LabeledSample::from_classes(
        sample.inputs().to_owned(),
        &classes,
        reference.len(),
    )?)
}

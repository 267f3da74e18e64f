//! Subcommand implementations.

pub mod ablate;
pub mod eval;
pub mod gen;
pub mod gradcheck;
pub mod trace;
pub mod train;

use std::path::Path;

use rmfn_core::data::{load_dataset, GenTask, MultimodalExample};
use rmfn_core::model::Task;
use rmfn_core::{Error, Result};

/// Load one named split from a dataset directory.
pub(crate) fn load_split(dir: &Path, name: &str) -> Result<Vec<MultimodalExample>> {
    let path = dir.join(name);
    if !path.exists() {
        return Err(Error::Validation(format!(
            "dataset file {} does not exist",
            path.display()
        )));
    }
    load_dataset(&path).map_err(|e| e.in_context(format!("loading {}", path.display())))
}

/// Feature widths shared by every example in a split.
pub(crate) fn infer_dims(examples: &[MultimodalExample]) -> Result<(usize, usize, usize)> {
    let first = examples
        .first()
        .ok_or_else(|| Error::Validation("dataset is empty".into()))?;
    let dims = first.dims()?;
    for ex in examples {
        if ex.dims()? != dims {
            return Err(Error::Validation(format!(
                "example {} has different feature widths than the rest",
                ex.id
            )));
        }
    }
    Ok(dims)
}

/// The generator emits regression scores or binary classes; richer label
/// sets have no synthetic ground truth here.
pub(crate) fn gen_task_of(task: Task) -> Result<GenTask> {
    match task {
        Task::Regression => Ok(GenTask::Regression),
        Task::Classification { classes: 2 } => Ok(GenTask::BinaryClassification),
        Task::Classification { classes } => Err(Error::Config(format!(
            "synthetic generation supports 2 classes, not {classes}"
        ))),
    }
}

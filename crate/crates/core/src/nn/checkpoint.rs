//! Versioned JSON parameter records.

use serde::{Deserialize, Serialize};

use super::{Matrix, Parameter};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterRecord {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

pub fn export_parameters<'a>(
    params: impl IntoIterator<Item = (String, &'a Parameter)>,
) -> Vec<ParameterRecord> {
    params
        .into_iter()
        .map(|(name, p)| ParameterRecord {
            name,
            rows: p.value.rows(),
            cols: p.value.cols(),
            values: p.value.as_slice().to_vec(),
        })
        .collect()
}

/// Copies records into matching parameters; names, order and shapes must agree.
pub fn import_parameters(
    records: &[ParameterRecord],
    targets: Vec<(String, &mut Parameter)>,
) -> Result<()> {
    if records.len() != targets.len() {
        return Err(Error::Checkpoint(format!(
            "{} parameter records for a model with {} parameters",
            records.len(),
            targets.len()
        )));
    }
    for (record, (name, param)) in records.iter().zip(targets) {
        if record.name != name {
            return Err(Error::Checkpoint(format!(
                "expected parameter {name}, found {}",
                record.name
            )));
        }
        if (record.rows, record.cols) != param.shape() {
            return Err(Error::Checkpoint(format!(
                "parameter {name} is {:?} in the model but {}x{} in the checkpoint",
                param.shape(),
                record.rows,
                record.cols
            )));
        }
        let value = Matrix::from_vec(record.rows, record.cols, record.values.clone())
            .map_err(|e| Error::Checkpoint(format!("parameter {name}: {e}")))?;
        value
            .ensure_finite("checkpoint")
            .map_err(|_| Error::Checkpoint(format!("parameter {name} holds non-finite values")))?;
        *param = Parameter::new(value);
    }
    Ok(())
}

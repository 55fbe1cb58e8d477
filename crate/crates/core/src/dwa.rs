//! Dynamic Weight Averaging for multi-task loss weights.
//!
//! At epoch `t` each task gets
//!
//! ```text
//! r_i = L_i(t-2) / L_i(t-1)
//! w_i = K * exp(r_i / T) / sum_j exp(r_j / T)
//! ```
//!
//! so tasks whose loss is falling slowly (larger `r_i`) get more weight and
//! the weights always sum to `K`. During warm-up, or before two epochs of
//! history exist, every task gets `K / num_tasks`.
//!
//! The losses are consumed as given. Whether they are raw epoch means or
//! smoothed is up to the producer of the history.

use std::io::{Read, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DwaConfig {
    pub num_tasks: usize,
    /// Sum of the weights.
    pub k_norm: f64,
    pub temperature: f64,
    pub warmup_epochs: usize,
}

impl Default for DwaConfig {
    /// Three tasks (classification, segmentation, landmark), K = 3, T = 2,
    /// ten warm-up epochs.
    fn default() -> Self {
        Self {
            num_tasks: 3,
            k_norm: 3.0,
            temperature: 2.0,
            warmup_epochs: 10,
        }
    }
}

impl DwaConfig {
    /// Defaults for `num_tasks` tasks, with `K` equal to the task count.
    pub fn for_tasks(num_tasks: usize) -> Self {
        Self {
            num_tasks,
            k_norm: num_tasks as f64,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_tasks == 0 {
            return Err(Error::input("DWA needs at least one task"));
        }
        if !(self.k_norm.is_finite() && self.k_norm > 0.0) {
            return Err(Error::input(format!(
                "K must be positive, got {}",
                self.k_norm
            )));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::input(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    fn equal_weights(&self) -> Vec<f64> {
        vec![self.k_norm / self.num_tasks as f64; self.num_tasks]
    }
}

/// Per-epoch task losses, `epochs[t][i]` being task `i` at epoch `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossHistory {
    task_ids: Vec<String>,
    epochs: Vec<Vec<f64>>,
}

impl LossHistory {
    pub fn new(task_ids: Vec<String>, epochs: Vec<Vec<f64>>) -> Result<Self> {
        if task_ids.is_empty() {
            return Err(Error::input("loss history has no tasks"));
        }
        for (t, row) in epochs.iter().enumerate() {
            if row.len() != task_ids.len() {
                return Err(Error::input(format!(
                    "epoch {t}: {} losses for {} tasks",
                    row.len(),
                    task_ids.len()
                )));
            }
            if let Some((i, loss)) = row
                .iter()
                .enumerate()
                .find(|(_, l)| !(l.is_finite() && **l > 0.0))
            {
                return Err(Error::input(format!(
                    "epoch {t}, task {}: loss {loss} is not strictly positive",
                    task_ids[i]
                )));
            }
        }
        Ok(Self { task_ids, epochs })
    }

    pub fn task_ids(&self) -> &[String] {
        &self.task_ids
    }

    pub fn num_tasks(&self) -> usize {
        self.task_ids.len()
    }

    pub fn num_epochs(&self) -> usize {
        self.epochs.len()
    }

    pub fn epoch(&self, t: usize) -> &[f64] {
        &self.epochs[t]
    }

    /// Appends one epoch of losses.
    pub fn push(&mut self, losses: Vec<f64>) -> Result<()> {
        Self::new(self.task_ids.clone(), vec![losses.clone()])
            .map_err(|e| Error::input(format!("epoch {}: {e}", self.epochs.len())))?;
        self.epochs.push(losses);
        Ok(())
    }

    /// Reads `epoch,<task>...` CSV. Epochs must run 0, 1, 2, ... in order.
    pub fn read_csv(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("epoch") {
            return Err(Error::input(
                "loss history must start with an 'epoch' column",
            ));
        }
        let task_ids: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();
        let mut epochs = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            let line = row + 2;
            let epoch: usize = record[0]
                .trim()
                .parse()
                .map_err(|_| Error::input(format!("line {line}: bad epoch {:?}", &record[0])))?;
            if epoch != row {
                return Err(Error::input(format!(
                    "line {line}: expected epoch {row}, found {epoch}"
                )));
            }
            let losses = record
                .iter()
                .skip(1)
                .zip(&task_ids)
                .map(|(field, task)| {
                    field.trim().parse::<f64>().map_err(|_| {
                        Error::input(format!("line {line}, column {task}: bad loss {field:?}"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            epochs.push(losses);
        }
        Self::new(task_ids, epochs)
    }
}

/// Task weights for epoch `t`.
pub fn dwa_weights(history: &LossHistory, t: usize, config: &DwaConfig) -> Result<Vec<f64>> {
    config.validate()?;
    if history.num_tasks() != config.num_tasks {
        return Err(Error::input(format!(
            "history has {} tasks but the config expects {}",
            history.num_tasks(),
            config.num_tasks
        )));
    }
    if t < config.warmup_epochs || t < 2 {
        return Ok(config.equal_weights());
    }
    if history.num_epochs() < t {
        return Err(Error::input(format!(
            "weights for epoch {t} need losses of epochs {} and {}, history has {}",
            t - 2,
            t - 1,
            history.num_epochs()
        )));
    }
    let before = history.epoch(t - 2);
    let last = history.epoch(t - 1);
    let scaled: Vec<f64> = before
        .iter()
        .zip(last)
        .map(|(a, b)| (a / b) / config.temperature)
        .collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.iter().map(|e| config.k_norm * e / total).collect())
}

/// Weights for every recorded epoch `0..num_epochs`.
pub fn replay(history: &LossHistory, config: &DwaConfig) -> Result<Vec<Vec<f64>>> {
    (0..history.num_epochs())
        .map(|t| dwa_weights(history, t, config))
        .collect()
}

/// Writes `epoch,<task>...` rows of weights.
pub fn write_weights_csv(
    writer: impl Write,
    task_ids: &[String],
    weights: &[Vec<f64>],
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let mut header = vec!["epoch".to_string()];
    header.extend(task_ids.iter().cloned());
    w.write_record(&header)?;
    for (t, row) in weights.iter().enumerate() {
        let mut record = vec![t.to_string()];
        record.extend(row.iter().map(|x| x.to_string()));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<weights>".into(),
        source: e,
    })?;
    Ok(())
}

//! Train-on-one, test-on-another transfer of fitted deciders.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferCell {
    pub method: String,
    pub train: String,
    pub test: String,
    pub metric: String,
    pub in_domain: Option<f64>,
    pub transferred: Option<f64>,
    /// Percent change relative to the in-domain value.
    pub change_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

/// `100·(transferred − in_domain)/in_domain`; `None` for a zero baseline.
pub fn relative_change(in_domain: f64, transferred: f64) -> Option<f64> {
    (in_domain != 0.0).then(|| 100.0 * (transferred - in_domain) / in_domain)
}

/// All train × test cells for one method. `value(train, test)` evaluates a
/// decider fitted on `train` against `test`'s split; the in-domain baseline
/// of a test dataset is `value(test, test)`.
pub fn ood_matrix(
    method: &str,
    datasets: &[String],
    metric: &str,
    mut value: impl FnMut(&str, &str) -> Result<Option<f64>>,
) -> Result<Vec<TransferCell>> {
    if datasets.is_empty() {
        return Err(Error::invalid("no datasets for the transfer matrix"));
    }
    let mut in_domain = Vec::with_capacity(datasets.len());
    for d in datasets {
        in_domain.push(value(d, d)?);
    }
    let mut cells = Vec::with_capacity(datasets.len() * datasets.len());
    for train in datasets {
        for (ti, test) in datasets.iter().enumerate() {
            let base = in_domain[ti];
            let transferred = if train == test { base } else { value(train, test)? };
            let mut flags = Vec::new();
            let change_pct = match (base, transferred) {
                _ if train == test => base.map(|_| 0.0),
                (Some(b), Some(t)) => {
                    let c = relative_change(b, t);
                    if c.is_none() {
                        flags.push("zero-in-domain".to_owned());
                    }
                    c
                }
                _ => {
                    flags.push("missing-value".to_owned());
                    None
                }
            };
            cells.push(TransferCell {
                method: method.to_owned(),
                train: train.clone(),
                test: test.clone(),
                metric: metric.to_owned(),
                in_domain: base,
                transferred,
                change_pct,
                flags,
            });
        }
    }
    Ok(cells)
}

/// One CSV block per method: rows are train datasets, columns test datasets,
/// cells the percent change.
pub fn transfer_grid_csv(cells: &[TransferCell]) -> Result<Vec<u8>> {
    let mut methods: Vec<&str> = cells.iter().map(|c| c.method.as_str()).collect();
    methods.dedup();
    let mut datasets: Vec<&str> = Vec::new();
    for c in cells {
        if !datasets.contains(&c.test.as_str()) {
            datasets.push(&c.test);
        }
    }
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    for m in methods {
        let mut header = vec![m.to_owned()];
        header.extend(datasets.iter().map(|d| (*d).to_owned()));
        w.write_record(&header)?;
        for train in &datasets {
            let mut row = vec![(*train).to_owned()];
            for test in &datasets {
                let cell = cells.iter().find(|c| c.method == m && c.train == *train && c.test == *test);
                row.push(match cell.and_then(|c| c.change_pct) {
                    Some(v) => format!("{v:.2}"),
                    None => String::new(),
                });
            }
            w.write_record(&row)?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

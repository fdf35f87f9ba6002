//! Column statistics used during ingestion: correlation screening against a
//! sensitive attribute and the a-priori statistical-parity gap.

use super::encode::{column_mads, Dataset};
use crate::error::{Error, Result};

/// Pearson correlation, or `None` when either side has zero variance
/// (the coefficient is undefined there, which is not the same as 0).
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some(cov / (va * vb).sqrt())
}

/// Drop every feature whose encoded column correlates with the sensitive
/// attribute at |rho| >= threshold. One-hot columns are tested individually
/// and a single tripping column removes the whole categorical feature.
/// Returns the reduced dataset and the removed feature names in schema order.
pub fn correlation_filter(
    data: &Dataset,
    threshold: f64,
    sensitive_name: &str,
) -> Result<(Dataset, Vec<String>)> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Config(format!(
            "correlation threshold must lie in (0,1], got {threshold}"
        )));
    }
    let si = data.sensitive_index(sensitive_name)?;
    let s: Vec<f64> = data.s[si].iter().map(|&v| v as f64).collect();

    let mut removed = Vec::new();
    for block in &data.layout.blocks {
        let trips = block.cols().any(|col| {
            let column: Vec<f64> = data.x.iter().map(|row| row[col]).collect();
            match pearson(&column, &s) {
                Some(rho) => rho.abs() >= threshold,
                None => false,
            }
        });
        if trips {
            removed.push(block.name.clone());
        }
    }
    if removed.is_empty() {
        return Ok((data.clone(), removed));
    }

    let mut schema = data.schema.clone();
    schema
        .features
        .retain(|f| !removed.contains(&f.name));
    if schema.features.is_empty() {
        return Err(Error::Data(format!(
            "correlation filter at {threshold} removed every feature"
        )));
    }
    let layout = schema.layout();

    let keep_cols: Vec<usize> = data
        .layout
        .blocks
        .iter()
        .filter(|b| !removed.contains(&b.name))
        .flat_map(|b| b.cols())
        .collect();
    let x: Vec<Vec<f64>> = data
        .x
        .iter()
        .map(|row| keep_cols.iter().map(|&c| row[c]).collect())
        .collect();
    let mad = column_mads(&x, &layout);

    Ok((
        Dataset {
            x,
            s: data.s.clone(),
            y: data.y.clone(),
            schema,
            layout,
            mad,
        },
        removed,
    ))
}

/// P(Y=1 | S=1) - P(Y=1 | S=0): the dataset's built-in outcome gap, before
/// any model is involved. Signed; positive favors the privileged group.
pub fn ex_ante_sp(data: &Dataset, sensitive_index: usize) -> Result<f64> {
    let s = data
        .s
        .get(sensitive_index)
        .ok_or_else(|| Error::Data(format!("no sensitive attribute #{sensitive_index}")))?;
    let mut pos = [0usize; 2];
    let mut tot = [0usize; 2];
    for (yi, si) in data.y.iter().zip(s) {
        tot[*si as usize] += 1;
        pos[*si as usize] += *yi as usize;
    }
    if tot[0] == 0 || tot[1] == 0 {
        return Err(Error::Data(
            "statistical-parity gap needs both sensitive groups non-empty".into(),
        ));
    }
    Ok(pos[1] as f64 / tot[1] as f64 - pos[0] as f64 / tot[0] as f64)
}

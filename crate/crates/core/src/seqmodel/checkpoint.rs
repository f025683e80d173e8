use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::features::FeatureScaling;
use super::linalg::Mat;
use super::network::{ModelShape, Params, SeqModel};
use crate::error::{Error, Result};
use crate::jsonl::lines;

pub const CHECKPOINT_FORMAT: &str = "scenopt-seqmodel";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    shape: ModelShape,
    scaling: FeatureScaling,
    tensors: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorLine {
    name: String,
    shape: [usize; 2],
    data: Vec<f64>,
}

/// Header line, then one line per tensor with its shape and row-major data
/// written with 17 significant digits.
pub fn to_checkpoint(model: &SeqModel) -> Result<String> {
    let tensors = model.params.tensors();
    let header = Header {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        shape: model.shape,
        scaling: model.scaling.clone(),
        tensors: tensors.len(),
    };
    let mut out = serde_json::to_string(&header)?;
    out.push('\n');
    for (name, m) in tensors {
        write!(
            out,
            "{{\"name\":{},\"shape\":[{},{}],\"data\":[",
            serde_json::to_string(&name)?,
            m.rows,
            m.cols
        )
        .expect("writing to a string");
        for (k, v) in m.data.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            write!(out, "{v:.16e}").expect("writing to a string");
        }
        out.push_str("]}\n");
    }
    Ok(out)
}

pub fn from_checkpoint(text: &str) -> Result<SeqModel> {
    let mut it = lines(text);
    let (_, first) = it.next().ok_or_else(|| Error::Format("empty checkpoint".into()))?;
    let header: Header = serde_json::from_str(first).map_err(|e| Error::Format(format!("line 1: {e}")))?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(Error::Format(format!("not a model checkpoint: {}", header.format)));
    }
    if header.version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {}", header.version)));
    }
    if header.shape.input != header.scaling.input_width(header.shape.items) || header.shape.kind != header.scaling.kind {
        return Err(Error::Format("checkpoint shape disagrees with its feature scaling".into()));
    }
    let mut params = Params::init(&header.shape, 0);
    let expected: Vec<(String, usize, usize)> = params
        .tensors()
        .iter()
        .map(|(n, m)| (n.clone(), m.rows, m.cols))
        .collect();
    if header.tensors != expected.len() {
        return Err(Error::Format(format!(
            "checkpoint lists {} tensors, expected {}",
            header.tensors,
            expected.len()
        )));
    }
    let mut slots = params.tensors_mut();
    let mut seen = 0;
    for (lineno, line) in it {
        let t: TensorLine = serde_json::from_str(line).map_err(|e| Error::Format(format!("line {lineno}: {e}")))?;
        let Some((name, rows, cols)) = expected.get(seen) else {
            return Err(Error::Format(format!("line {lineno}: unexpected tensor {}", t.name)));
        };
        if t.name != *name || t.shape != [*rows, *cols] || t.data.len() != rows * cols {
            return Err(Error::Format(format!(
                "line {lineno}: tensor {} {:?} does not match {name} [{rows}, {cols}]",
                t.name, t.shape
            )));
        }
        if t.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("tensor {name}")));
        }
        *slots[seen] = Mat {
            rows: *rows,
            cols: *cols,
            data: t.data,
        };
        seen += 1;
    }
    if seen != expected.len() {
        return Err(Error::Format(format!("checkpoint ends after {seen} tensors")));
    }
    Ok(SeqModel {
        shape: header.shape,
        scaling: header.scaling,
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::ProblemKind;

    #[test]
    fn round_trip_is_exact() {
        let m = SeqModel::new(FeatureScaling::default_for(ProblemKind::Msmk), 3, 4, 11).unwrap();
        let text = to_checkpoint(&m).unwrap();
        let back = from_checkpoint(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(to_checkpoint(&back).unwrap(), text);
    }

    #[test]
    fn truncated_checkpoint_rejected() {
        let m = SeqModel::new(FeatureScaling::default_for(ProblemKind::Mclsp), 2, 3, 1).unwrap();
        let text = to_checkpoint(&m).unwrap();
        let cut: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(from_checkpoint(&cut).is_err());
        assert!(from_checkpoint(&text.replace("\"version\":1", "\"version\":9")).is_err());
    }
}

//! JSON model files (`ik-ann-model/1`). Floats are written at 17 significant
//! digits and parsed with round-trip precision, so save/load is bitwise exact.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use super::NetworkParams;
use crate::error::{Error, Result};
use crate::numfmt::sig17;
use crate::sampler::WorkspaceBox;

pub const MODEL_SCHEMA: &str = "ik-ann-model/1";

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ModelMeta {
    pub samples_per_axis: usize,
    pub seed: u64,
    pub epochs_run: usize,
    pub final_train_loss: f64,
    pub final_val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub params: NetworkParams,
    pub input_bounds: WorkspaceBox,
    pub meta: ModelMeta,
}

#[derive(Deserialize)]
struct RawModel {
    schema: String,
    hidden: usize,
    activation: String,
    w1: Vec<[f64; 3]>,
    b1: Vec<f64>,
    w2: [Vec<f64>; 3],
    b2: [f64; 3],
    input_min: [f64; 3],
    input_max: [f64; 3],
    meta: ModelMeta,
}

fn array(values: &[f64]) -> String {
    let items: Vec<String> = values.iter().map(|&v| sig17(v)).collect();
    format!("[{}]", items.join(","))
}

impl ModelFile {
    pub fn to_json(&self) -> String {
        let p = &self.params;
        let h = p.hidden();
        let w1: Vec<String> = (0..h).map(|j| array(p.w1_row(j))).collect();
        let w2: Vec<String> = (0..3).map(|k| array(p.w2_row(k))).collect();
        let m = &self.meta;
        let mut s = String::new();
        s.push('{');
        write!(
            s,
            "\"schema\":\"{MODEL_SCHEMA}\",\"hidden\":{h},\"activation\":\"relu\","
        )
        .unwrap();
        write!(s, "\"w1\":[{}],\"b1\":{},", w1.join(","), array(p.b1())).unwrap();
        write!(s, "\"w2\":[{}],\"b2\":{},", w2.join(","), array(p.b2())).unwrap();
        write!(
            s,
            "\"input_min\":{},\"input_max\":{},",
            array(&self.input_bounds.min),
            array(&self.input_bounds.max)
        )
        .unwrap();
        write!(
            s,
            "\"meta\":{{\"samples_per_axis\":{},\"seed\":{},\"epochs_run\":{},\"final_train_loss\":{},\"final_val_loss\":{}}}",
            m.samples_per_axis,
            m.seed,
            m.epochs_run,
            sig17(m.final_train_loss),
            sig17(m.final_val_loss)
        )
        .unwrap();
        s.push_str("}\n");
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bad = |reason: String| Error::Format {
            what: "model json",
            reason,
        };
        let raw: RawModel = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        if raw.schema != MODEL_SCHEMA {
            return Err(bad(format!("unsupported schema {:?}", raw.schema)));
        }
        if raw.activation != "relu" {
            return Err(bad(format!("unsupported activation {:?}", raw.activation)));
        }
        if raw.w1.len() != raw.hidden {
            return Err(bad(format!(
                "hidden = {} but w1 has {} rows",
                raw.hidden,
                raw.w1.len()
            )));
        }
        let params = NetworkParams::from_parts(&raw.w1, &raw.b1, &raw.w2, raw.b2)?;
        let input_bounds = WorkspaceBox::new(raw.input_min, raw.input_max)?;
        Ok(Self {
            params,
            input_bounds,
            meta: raw.meta,
        })
    }
}

pub fn save_model(model: &ModelFile, path: &Path) -> Result<()> {
    std::fs::write(path, model.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ModelFile::from_json(&text)
}

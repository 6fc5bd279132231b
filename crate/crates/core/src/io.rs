//! File formats: dataset CSV (17 significant digit decimal text, bit-exact
//! round trip), model checkpoint JSON, training history CSV and evaluation
//! CSV. All files are UTF-8, comma separated, LF line endings.

use crate::constitutive::{
    ConstitutiveModel, Scaling, Selector, VolTerm,
};
use crate::dataset::{Dataset, LoadPath, Row};
use crate::error::{Error, Result};
use crate::invariants::{CubStructuralTensor, TiStructuralTensor};
use crate::network::{Activation, Layer, Mlp};
use crate::tensor::{Tensor2, Vec3};
use crate::training::{DirectModel, History, ResponseModel, TrainableModel};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub const DATASET_HEADER: &str = "path_id,step,F11,F12,F13,F21,F22,F23,F31,F32,F33,d1,d2,d3,\
P11,P12,P13,P21,P22,P23,P31,P32,P33,e1,e2,e3";

/// 17 significant digits, enough for a bit-exact f64 round trip.
fn fmt(x: f64) -> String {
    format!("{:.16e}", x)
}

pub fn write_dataset_csv(path: &Path, dataset: &Dataset) -> Result<()> {
    dataset.validate()?;
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{}", DATASET_HEADER)?;
    let mut line = String::new();
    for load_path in &dataset.paths {
        for (step, row) in load_path.rows.iter().enumerate() {
            line.clear();
            write!(line, "{},{}", load_path.id, step).unwrap();
            for v in row.f.0.iter() {
                write!(line, ",{}", fmt(*v)).unwrap();
            }
            for v in row.d0.0.iter() {
                write!(line, ",{}", fmt(*v)).unwrap();
            }
            for v in row.p.0.iter() {
                write!(line, ",{}", fmt(*v)).unwrap();
            }
            for v in row.e0.0.iter() {
                write!(line, ",{}", fmt(*v)).unwrap();
            }
            writeln!(w, "{}", line)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty dataset file".into()))??;
    if header.trim_end() != DATASET_HEADER {
        return Err(Error::Format(format!(
            "unexpected dataset header: '{}'",
            header
        )));
    }
    let mut dataset = Dataset::default();
    let mut current: Option<LoadPath> = None;
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 26 {
            return Err(Error::Format(format!(
                "line {}: expected 26 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let id = fields[0].to_string();
        let step: usize = fields[1]
            .parse()
            .map_err(|_| Error::Format(format!("line {}: bad step", lineno + 2)))?;
        let mut vals = [0.0f64; 24];
        for (k, field) in fields[2..].iter().enumerate() {
            vals[k] = field
                .parse()
                .map_err(|_| Error::Format(format!("line {}: bad number", lineno + 2)))?;
        }
        let mut f = Tensor2::ZERO;
        f.0.copy_from_slice(&vals[0..9]);
        let d0 = Vec3::new(vals[9], vals[10], vals[11]);
        let mut p = Tensor2::ZERO;
        p.0.copy_from_slice(&vals[12..21]);
        let e0 = Vec3::new(vals[21], vals[22], vals[23]);
        let row = Row { f, d0, p, e0 };

        match current.as_mut() {
            Some(cur) if cur.id == id => {
                if step != cur.rows.len() {
                    return Err(Error::Format(format!(
                        "line {}: step {} out of order in path '{}'",
                        lineno + 2,
                        step,
                        id
                    )));
                }
                cur.rows.push(row);
            }
            _ => {
                if let Some(done) = current.take() {
                    dataset.paths.push(done);
                }
                if step != 0 {
                    return Err(Error::Format(format!(
                        "line {}: path '{}' must start at step 0",
                        lineno + 2,
                        id
                    )));
                }
                current = Some(LoadPath { id, rows: vec![row] });
            }
        }
    }
    if let Some(done) = current.take() {
        dataset.paths.push(done);
    }
    dataset.validate()?;
    Ok(dataset)
}

#[derive(Debug, Serialize, Deserialize)]
struct StructuralJson {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c_mix: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    axes: Option<[[f64; 3]; 3]>,
}

#[derive(Debug, Serialize, Deserialize)]
struct VolJson {
    term: String,
    alpha: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScalingJson {
    mu1: f64,
    eps1: f64,
}

/// Checkpoint schema, version 1.
#[derive(Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    schema_version: u32,
    model_kind: String,
    layer_sizes: Vec<usize>,
    nonneg_flags: Vec<bool>,
    activation: String,
    /// Per layer, rows of columns (row-major).
    weights: Vec<Vec<Vec<f64>>>,
    biases: Vec<Vec<f64>>,
    invariant_names: Vec<String>,
    scaling: ScalingJson,
    #[serde(skip_serializing_if = "Option::is_none")]
    selector: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    structural: Option<StructuralJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    vol: Option<VolJson>,
}

fn net_to_parts(net: &Mlp) -> (Vec<usize>, Vec<bool>, Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>) {
    let sizes = net.layer_sizes();
    let flags = net.layers.iter().map(|l| l.nonneg).collect();
    let weights = net
        .layers
        .iter()
        .map(|l| {
            (0..l.rows)
                .map(|r| l.w[r * l.cols..(r + 1) * l.cols].to_vec())
                .collect()
        })
        .collect();
    let biases = net.layers.iter().map(|l| l.b.clone()).collect();
    (sizes, flags, weights, biases)
}

fn net_from_parts(
    sizes: &[usize],
    flags: &[bool],
    weights: &[Vec<Vec<f64>>],
    biases: &[Vec<f64>],
) -> Result<Mlp> {
    if sizes.len() < 2 || flags.len() != sizes.len() - 1 {
        return Err(Error::Format("inconsistent layer shapes in checkpoint".into()));
    }
    if weights.len() != flags.len() || biases.len() != flags.len() {
        return Err(Error::Format("inconsistent layer count in checkpoint".into()));
    }
    let mut layers = Vec::with_capacity(flags.len());
    for h in 0..flags.len() {
        let (rows, cols) = (sizes[h + 1], sizes[h]);
        if weights[h].len() != rows || biases[h].len() != rows {
            return Err(Error::Format("weight matrix shape mismatch".into()));
        }
        let mut w = Vec::with_capacity(rows * cols);
        for r in &weights[h] {
            if r.len() != cols {
                return Err(Error::Format("weight row length mismatch".into()));
            }
            w.extend_from_slice(r);
        }
        layers.push(Layer {
            w,
            b: biases[h].clone(),
            rows,
            cols,
            nonneg: flags[h],
            act: if h == flags.len() - 1 {
                Activation::Linear
            } else {
                Activation::Softplus
            },
        });
    }
    Ok(Mlp { layers })
}

pub fn save_model(path: &Path, model: &TrainableModel) -> Result<()> {
    let ck = match model {
        TrainableModel::Energy(m) => {
            let (layer_sizes, nonneg_flags, weights, biases) = net_to_parts(&m.net);
            let structural = match m.selector {
                Selector::Ti | Selector::TiStar => m.ti.as_ref().map(|ti| StructuralJson {
                    kind: "ti".into(),
                    n: Some(ti.direction().0),
                    c_mix: Some(ti.c_mix()),
                    axes: None,
                }),
                Selector::Cub => m.cub.as_ref().map(|cub| StructuralJson {
                    kind: "cub".into(),
                    n: None,
                    c_mix: None,
                    axes: Some([cub.axes()[0].0, cub.axes()[1].0, cub.axes()[2].0]),
                }),
                _ => None,
            };
            Checkpoint {
                schema_version: 1,
                model_kind: "icnn".into(),
                layer_sizes,
                nonneg_flags,
                activation: "softplus".into(),
                weights,
                biases,
                invariant_names: m
                    .selector
                    .invariants()
                    .iter()
                    .map(|i| i.name().to_string())
                    .collect(),
                scaling: ScalingJson {
                    mu1: m.scaling.mu1,
                    eps1: m.scaling.eps1,
                },
                selector: Some(m.selector.name().into()),
                structural,
                vol: Some(VolJson {
                    term: m.vol.name().into(),
                    alpha: m.alpha,
                }),
            }
        }
        TrainableModel::Direct(m) => {
            let (layer_sizes, nonneg_flags, weights, biases) = net_to_parts(&m.net);
            Checkpoint {
                schema_version: 1,
                model_kind: "ffnn".into(),
                layer_sizes,
                nonneg_flags,
                activation: "softplus".into(),
                weights,
                biases,
                invariant_names: Vec::new(),
                scaling: ScalingJson {
                    mu1: m.scaling.mu1,
                    eps1: m.scaling.eps1,
                },
                selector: None,
                structural: None,
                vol: None,
            }
        }
    };
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &ck)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<TrainableModel> {
    let text = std::fs::read_to_string(path)?;
    let ck: Checkpoint = serde_json::from_str(&text)?;
    if ck.schema_version != 1 {
        return Err(Error::Format(format!(
            "unsupported checkpoint schema version {}",
            ck.schema_version
        )));
    }
    let net = net_from_parts(&ck.layer_sizes, &ck.nonneg_flags, &ck.weights, &ck.biases)?;
    let scaling = Scaling::new(ck.scaling.mu1, ck.scaling.eps1)?;
    match ck.model_kind.as_str() {
        "ffnn" => Ok(TrainableModel::Direct(DirectModel::new(net, scaling)?)),
        "icnn" => {
            let selector = ck
                .selector
                .as_deref()
                .and_then(Selector::parse)
                .ok_or_else(|| Error::Format("missing or unknown selector".into()))?;
            let expected: Vec<String> = selector
                .invariants()
                .iter()
                .map(|i| i.name().to_string())
                .collect();
            if ck.invariant_names != expected {
                return Err(Error::Format(format!(
                    "invariant names {:?} do not match selector '{}'",
                    ck.invariant_names,
                    selector.name()
                )));
            }
            let vol = ck
                .vol
                .as_ref()
                .ok_or_else(|| Error::Format("missing volumetric term".into()))?;
            let term = VolTerm::parse(&vol.term)
                .ok_or_else(|| Error::Format(format!("unknown volumetric term '{}'", vol.term)))?;
            let mut ti = None;
            let mut cub = None;
            match ck.structural.as_ref() {
                Some(s) if s.kind == "ti" => {
                    let n = s
                        .n
                        .ok_or_else(|| Error::Format("ti structural tensor needs n".into()))?;
                    let c_mix = s.c_mix.unwrap_or(TiStructuralTensor::DEFAULT_C_MIX);
                    ti = Some(TiStructuralTensor::with_mixing(Vec3(n), c_mix)?);
                }
                Some(s) if s.kind == "cub" => {
                    let axes = s
                        .axes
                        .ok_or_else(|| Error::Format("cubic structural tensor needs axes".into()))?;
                    cub = Some(CubStructuralTensor::new([
                        Vec3(axes[0]),
                        Vec3(axes[1]),
                        Vec3(axes[2]),
                    ])?);
                }
                Some(s) => {
                    return Err(Error::Format(format!(
                        "unknown structural tensor kind '{}'",
                        s.kind
                    )))
                }
                None => {}
            }
            Ok(TrainableModel::Energy(ConstitutiveModel::new(
                selector, ti, cub, net, term, vol.alpha, scaling,
            )?))
        }
        other => Err(Error::Format(format!("unknown model kind '{}'", other))),
    }
}

pub fn write_history_csv(path: &Path, history: &History) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "epoch,loss,log10_loss")?;
    for entry in &history.entries {
        writeln!(
            w,
            "{},{},{}",
            entry.epoch,
            fmt(entry.mse),
            fmt(entry.mse.log10())
        )?;
    }
    w.flush()?;
    Ok(())
}

pub const EVAL_HEADER: &str = "path_id,step,\
P11_data,P12_data,P13_data,P21_data,P22_data,P23_data,P31_data,P32_data,P33_data,\
e1_data,e2_data,e3_data,\
P11_model,P12_model,P13_model,P21_model,P22_model,P23_model,P31_model,P32_model,P33_model,\
e1_model,e2_model,e3_model";

/// Evaluate a model on every dataset row and emit a plot-ready comparison
/// CSV; the trailing comment line carries the summary log10 MSE. Returns the
/// summary MSE.
pub fn write_eval_csv<M: ResponseModel + Sync>(
    path: &Path,
    model: &M,
    dataset: &Dataset,
) -> Result<f64> {
    dataset.validate()?;
    let mse = crate::training::mse_loss(model, dataset)?;
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{}", EVAL_HEADER)?;
    let mut line = String::new();
    for load_path in &dataset.paths {
        for (step, row) in load_path.rows.iter().enumerate() {
            let (p, e0) = model.response(&row.f, &row.d0)?;
            line.clear();
            write!(line, "{},{}", load_path.id, step).unwrap();
            for v in row.p.0.iter().chain(row.e0.0.iter()) {
                write!(line, ",{}", fmt(*v)).unwrap();
            }
            for v in p.0.iter().chain(e0.0.iter()) {
                write!(line, ",{}", fmt(*v)).unwrap();
            }
            writeln!(w, "{}", line)?;
        }
    }
    writeln!(w, "# log10_mse = {}", fmt(mse.log10()))?;
    w.flush()?;
    Ok(mse)
}

/// Parse the summary line back out of an evaluation CSV.
pub fn read_eval_summary(path: &Path) -> Result<f64> {
    let text = std::fs::read_to_string(path)?;
    for line in text.lines().rev() {
        if let Some(rest) = line.strip_prefix("# log10_mse = ") {
            return rest
                .trim()
                .parse()
                .map_err(|_| Error::Format("bad summary value".into()));
        }
    }
    Err(Error::Format("missing summary line".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::Selector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use std::path::PathBuf;

    fn tmp(name: &str) -> PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("polyconv-io-{}-{}", std::process::id(), name));
        p
    }

    fn random_dataset(seed: u64) -> Dataset {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut paths = Vec::new();
        for pi in 0..3 {
            let mut rows = Vec::new();
            for _ in 0..4 {
                rows.push(Row {
                    f: crate::tensor::tests::rand_def_grad(&mut rng),
                    d0: Vec3::new(
                        rng.gen_range(-2.0..2.0),
                        rng.gen_range(-2.0..2.0),
                        rng.gen_range(-2.0..2.0),
                    ),
                    p: crate::tensor::tests::rand_tensor(&mut rng, 3.0),
                    e0: Vec3::new(
                        rng.gen_range(-2.0..2.0),
                        rng.gen_range(-2.0..2.0),
                        rng.gen_range(-2.0..2.0),
                    ),
                });
            }
            paths.push(LoadPath {
                id: format!("path-{pi}"),
                rows,
            });
        }
        Dataset { paths }
    }

    #[test]
    fn dataset_round_trip_is_bit_exact() {
        let ds = random_dataset(90);
        let p1 = tmp("ds1.csv");
        let p2 = tmp("ds2.csv");
        write_dataset_csv(&p1, &ds).unwrap();
        let back = read_dataset_csv(&p1).unwrap();
        assert_eq!(ds, back);
        write_dataset_csv(&p2, &back).unwrap();
        let bytes1 = std::fs::read(&p1).unwrap();
        let bytes2 = std::fs::read(&p2).unwrap();
        assert_eq!(bytes1, bytes2);
        std::fs::remove_file(&p1).ok();
        std::fs::remove_file(&p2).ok();
    }

    #[test]
    fn dataset_reader_rejects_bad_files() {
        let p = tmp("bad.csv");
        std::fs::write(&p, "not,a,header\n").unwrap();
        assert!(read_dataset_csv(&p).is_err());
        std::fs::write(&p, format!("{}\nonly,1\n", DATASET_HEADER)).unwrap();
        assert!(read_dataset_csv(&p).is_err());
        std::fs::remove_file(&p).ok();
    }

    #[test]
    fn model_checkpoint_round_trip_is_bit_exact() {
        let model = TrainableModel::Energy(crate::constitutive::tests::test_model(
            Selector::TiStar,
            91,
        ));
        let p = tmp("model.json");
        save_model(&p, &model).unwrap();
        let back = load_model(&p).unwrap();
        match (&model, &back) {
            (TrainableModel::Energy(a), TrainableModel::Energy(b)) => {
                assert_eq!(a.selector, b.selector);
                assert_eq!(a.vol, b.vol);
                assert_eq!(a.alpha, b.alpha);
                for (la, lb) in a.net.layers.iter().zip(b.net.layers.iter()) {
                    assert_eq!(la.w, lb.w);
                    assert_eq!(la.b, lb.b);
                    assert_eq!(la.nonneg, lb.nonneg);
                }
            }
            _ => panic!("model kind changed in round trip"),
        }
        // Byte-identical re-serialization.
        let p2 = tmp("model2.json");
        save_model(&p2, &back).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&p2).unwrap());
        std::fs::remove_file(&p).ok();
        std::fs::remove_file(&p2).ok();
    }

    #[test]
    fn direct_model_checkpoint_round_trip() {
        let mut rng = ChaCha12Rng::seed_from_u64(92);
        let net = Mlp::ffnn(&[12, 6, 12], &mut rng).unwrap();
        let model =
            TrainableModel::Direct(DirectModel::new(net, Scaling::unit()).unwrap());
        let p = tmp("direct.json");
        save_model(&p, &model).unwrap();
        let back = load_model(&p).unwrap();
        match (&model, &back) {
            (TrainableModel::Direct(a), TrainableModel::Direct(b)) => {
                for (la, lb) in a.net.layers.iter().zip(b.net.layers.iter()) {
                    assert_eq!(la.w, lb.w);
                }
            }
            _ => panic!("model kind changed"),
        }
        std::fs::remove_file(&p).ok();
    }

    #[test]
    fn eval_csv_summary_matches_in_memory_loss() {
        let ds = random_dataset(93);
        let model = crate::constitutive::tests::test_model(Selector::Ti, 94);
        let p = tmp("eval.csv");
        let mse = write_eval_csv(&p, &model, &ds).unwrap();
        let from_file = read_eval_summary(&p).unwrap();
        assert!((from_file - mse.log10()).abs() < 1e-13);
        // Row count: one line per dataset row plus header and summary.
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), ds.n_rows() + 2);
        std::fs::remove_file(&p).ok();
    }

    #[test]
    fn history_csv_layout() {
        let mut history = History::default();
        history.entries.push(crate::training::HistoryEntry {
            epoch: 1,
            mse: 0.5,
        });
        let p = tmp("hist.csv");
        write_history_csv(&p, &history).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "epoch,loss,log10_loss");
        assert!(lines.next().unwrap().starts_with("1,5.0000000000000000e-1,"));
        std::fs::remove_file(&p).ok();
    }
}

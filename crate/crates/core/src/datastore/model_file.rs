//! Text model format.
//!
//! ```text
//! bellowsense-model
//! version=1
//! kernel=rbf
//! block_order=C,M,G,A,E,D
//! grid_side=3
//! image_width=640
//! image_height=480
//! feature_dim=54
//! filter.<name>=<value>          (one line per FilterConfig field)
//! normalizer.mean=<dim floats>
//! normalizer.std=<dim floats>
//! [x]                            (then [y], [z])
//! epsilon=...
//! cost_k=...                     (box constraint on the dual coefficients)
//! gamma=...
//! bias=...
//! num_sv=<n>
//! sv <coef> <dim floats>         (n lines)
//! ```
//!
//! The model computes `f(u) = sum coef_i exp(-gamma |sv_i - u|^2) + bias` on
//! the normalized feature vector `u`. Floats are written in shortest
//! round-trip form, so a reloaded model predicts bit-identically.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{feature_len, Normalizer, BLOCK_ORDER};
use crate::imaging::FilterConfig;
use crate::pose::Axis;
use crate::regression::{PoseModel, SvrHyperparams, SvrModel};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "bellowsense-model";

fn join(v: &[f64]) -> String {
    let mut s = String::new();
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{x}").unwrap();
    }
    s
}

/// Serializes a model to its text form.
pub fn write_model(pm: &PoseModel) -> Result<String> {
    pm.validate()?;
    let f = &pm.filter_config;
    let mut s = String::new();
    let w = &mut s;
    writeln!(w, "{MAGIC}").unwrap();
    writeln!(w, "version={MODEL_FORMAT_VERSION}").unwrap();
    writeln!(w, "kernel=rbf").unwrap();
    writeln!(w, "block_order={}", pm.block_order).unwrap();
    writeln!(w, "grid_side={}", pm.grid_side).unwrap();
    writeln!(w, "image_width={}", pm.image_width).unwrap();
    writeln!(w, "image_height={}", pm.image_height).unwrap();
    writeln!(w, "feature_dim={}", pm.normalizer.dim()).unwrap();
    writeln!(w, "filter.adaptive_block_size={}", f.adaptive_block_size).unwrap();
    writeln!(w, "filter.adaptive_c={}", f.adaptive_c).unwrap();
    writeln!(w, "filter.adaptive_max_value={}", f.adaptive_max_value).unwrap();
    writeln!(w, "filter.binary_offset={}", f.binary_offset).unwrap();
    writeln!(w, "filter.canny_low={}", f.canny_low).unwrap();
    writeln!(w, "filter.canny_high={}", f.canny_high).unwrap();
    writeln!(w, "filter.canny_kernel={}", f.canny_kernel).unwrap();
    writeln!(w, "filter.morph_kernel={}", f.morph_kernel).unwrap();
    writeln!(w, "normalizer.mean={}", join(&pm.normalizer.mean)).unwrap();
    writeln!(w, "normalizer.std={}", join(&pm.normalizer.std)).unwrap();
    for axis in Axis::ALL {
        let m = pm.axis_model(axis);
        writeln!(w, "[{axis}]").unwrap();
        writeln!(w, "epsilon={}", m.hyperparams.epsilon).unwrap();
        writeln!(w, "cost_k={}", m.hyperparams.cost).unwrap();
        writeln!(w, "gamma={}", m.hyperparams.gamma).unwrap();
        writeln!(w, "bias={}", m.bias).unwrap();
        writeln!(w, "num_sv={}", m.num_support_vectors()).unwrap();
        for i in 0..m.num_support_vectors() {
            writeln!(w, "sv {} {}", m.dual_coefs[i], join(m.support_vector(i))).unwrap();
        }
    }
    Ok(s)
}

pub fn save_model(pm: &PoseModel, path: &Path) -> Result<()> {
    std::fs::write(path, write_model(pm)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<PoseModel> {
    read_model(&std::fs::read_to_string(path)?)
}

struct Lines<'a> {
    it: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        loop {
            match self.it.next() {
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((n, l)) => return Ok((n + 1, l.trim())),
                None => return Err(Error::Format("unexpected end of model file".into())),
            }
        }
    }

    fn value(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (n, line) = self.next_line()?;
        match line.split_once('=') {
            Some((k, v)) if k.trim() == key => Ok((n, v.trim())),
            _ => Err(Error::Format(format!("line {n}: expected `{key}=...`, got {line:?}"))),
        }
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (n, v) = self.value(key)?;
        v.parse()
            .map_err(|_| Error::Format(format!("line {n}: bad value {v:?} for {key}")))
    }

    fn floats(&mut self, key: &str, len: usize) -> Result<Vec<f64>> {
        let (n, v) = self.value(key)?;
        parse_floats(v, len, n, key)
    }
}

fn parse_floats(v: &str, len: usize, line: usize, what: &str) -> Result<Vec<f64>> {
    let out = v
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Format(format!("line {line}: bad number {t:?} in {what}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if out.len() != len {
        return Err(Error::Format(format!(
            "line {line}: {what} has {} values, expected {len}",
            out.len()
        )));
    }
    Ok(out)
}

fn read_axis(lines: &mut Lines<'_>, axis: Axis, dim: usize) -> Result<SvrModel> {
    let (n, header) = lines.next_line()?;
    if header != format!("[{axis}]") {
        return Err(Error::Format(format!("line {n}: expected section [{axis}], got {header:?}")));
    }
    let hyperparams = SvrHyperparams::new(
        lines.parse("epsilon")?,
        lines.parse("cost_k")?,
        lines.parse("gamma")?,
    );
    hyperparams.validate()?;
    let bias: f64 = lines.parse("bias")?;
    let num_sv: usize = lines.parse("num_sv")?;
    let mut dual_coefs = Vec::with_capacity(num_sv);
    let mut support_vectors = Vec::with_capacity(num_sv * dim);
    for _ in 0..num_sv {
        let (n, line) = lines.next_line()?;
        let rest = line
            .strip_prefix("sv ")
            .ok_or_else(|| Error::Format(format!("line {n}: expected support vector row")))?;
        let vals = parse_floats(rest, dim + 1, n, "support vector row")?;
        dual_coefs.push(vals[0]);
        support_vectors.extend_from_slice(&vals[1..]);
    }
    Ok(SvrModel {
        hyperparams,
        dim,
        support_vectors,
        dual_coefs,
        bias,
    })
}

/// Parses a model from its text form.
pub fn read_model(text: &str) -> Result<PoseModel> {
    let mut lines = Lines {
        it: text.lines().enumerate().peekable(),
    };
    let (_, magic) = lines.next_line()?;
    if magic != MAGIC {
        return Err(Error::Format(format!("not a model file (header {magic:?})")));
    }
    let version: u32 = lines.parse("version")?;
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: MODEL_FORMAT_VERSION,
        });
    }
    let (n, kernel) = lines.value("kernel")?;
    if kernel != "rbf" {
        return Err(Error::Format(format!("line {n}: unsupported kernel {kernel:?}")));
    }
    let (_, order) = lines.value("block_order")?;
    if order != BLOCK_ORDER {
        return Err(Error::BlockOrder {
            expected: BLOCK_ORDER.into(),
            found: order.into(),
        });
    }
    let grid_side: usize = lines.parse("grid_side")?;
    let image_width: usize = lines.parse("image_width")?;
    let image_height: usize = lines.parse("image_height")?;
    let dim: usize = lines.parse("feature_dim")?;
    if dim != feature_len(grid_side) {
        return Err(Error::Format(format!(
            "feature_dim {dim} inconsistent with grid_side {grid_side}"
        )));
    }
    let filter_config = FilterConfig {
        adaptive_block_size: lines.parse("filter.adaptive_block_size")?,
        adaptive_c: lines.parse("filter.adaptive_c")?,
        adaptive_max_value: lines.parse("filter.adaptive_max_value")?,
        binary_offset: lines.parse("filter.binary_offset")?,
        canny_low: lines.parse("filter.canny_low")?,
        canny_high: lines.parse("filter.canny_high")?,
        canny_kernel: lines.parse("filter.canny_kernel")?,
        morph_kernel: lines.parse("filter.morph_kernel")?,
    };
    let normalizer = Normalizer {
        mean: lines.floats("normalizer.mean", dim)?,
        std: lines.floats("normalizer.std", dim)?,
    };
    let model_x = read_axis(&mut lines, Axis::X, dim)?;
    let model_y = read_axis(&mut lines, Axis::Y, dim)?;
    let model_z = read_axis(&mut lines, Axis::Z, dim)?;
    if let Some((n, l)) = lines.it.find(|(_, l)| !l.trim().is_empty()) {
        return Err(Error::Format(format!("line {}: trailing content {l:?}", n + 1)));
    }
    let pm = PoseModel {
        model_x,
        model_y,
        model_z,
        normalizer,
        grid_side,
        filter_config,
        block_order: order.into(),
        image_width,
        image_height,
    };
    pm.validate()?;
    Ok(pm)
}

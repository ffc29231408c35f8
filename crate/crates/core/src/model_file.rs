//! Versioned text serialization of a [`MetaModel`].
//!
//! Floats are written in Rust's shortest round-trip form, so
//! save, load, save yields identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use crate::ann::AnnModel;
use crate::error::{EpicError, Result};
use crate::features::NormParams;
use crate::geom::RNG_ALGORITHM;
use crate::meta::WeightingFunction;
use crate::pipeline::{BaseModels, MetaModel};
use crate::pm::{PmLibrary, PmSignature};
use crate::svm::SvmModel;

pub const MODEL_MAGIC: &str = "EPICMODEL";
pub const MODEL_VERSION: u32 = 1;

fn floats(out: &mut String, key: &str, values: &[f64]) {
    out.push_str(key);
    for v in values {
        write!(out, " {v:?}").unwrap();
    }
    out.push('\n');
}

pub fn model_to_text(model: &MetaModel) -> String {
    let mut out = format!("{MODEL_MAGIC} v{MODEL_VERSION}\n");
    writeln!(out, "rng {RNG_ALGORITHM}").unwrap();
    for line in &model.config_echo {
        writeln!(out, "config {line}").unwrap();
    }
    writeln!(out, "theta {:?}", model.theta).unwrap();
    writeln!(out, "lambda0 {:?}", model.lambda0).unwrap();
    writeln!(out, "bases {}", model.weighting.len()).unwrap();
    for w in &model.weighting {
        floats(&mut out, &format!("weighting {} {}", w.base_index, w.levels.len()), &w.levels);
    }

    let a = &model.bases.ann;
    writeln!(out, "ann {} {} {:?} {:?}", a.hidden, a.inputs, a.threshold, a.bias_out).unwrap();
    floats(&mut out, "ann.norm.mean", &a.norm.mean);
    floats(&mut out, "ann.norm.scale", &a.norm.scale);
    floats(&mut out, "ann.w_in", &a.w_in);
    floats(&mut out, "ann.w_out", &a.w_out);
    floats(&mut out, "ann.bias_hid", &a.bias_hid);

    let s = &model.bases.svm;
    writeln!(
        out,
        "svm {} {} {:?} {:?} {:?} {:?}",
        s.alphas.len(),
        s.norm.dim(),
        s.bias,
        s.c_bound,
        s.gamma,
        s.threshold
    )
    .unwrap();
    floats(&mut out, "svm.norm.mean", &s.norm.mean);
    floats(&mut out, "svm.norm.scale", &s.norm.scale);
    for ((alpha, y), sv) in s.alphas.iter().zip(&s.labels).zip(&s.support_vectors) {
        floats(&mut out, &format!("sv {alpha:?} {y:?}"), sv);
    }

    let p = &model.bases.pm;
    writeln!(
        out,
        "pm {} {} {} {} {}",
        p.quant_levels,
        p.match_tolerance,
        p.mismatch_budget,
        p.dim,
        p.signatures.len()
    )
    .unwrap();
    for sig in &p.signatures {
        write!(out, "sig {}", sig.source_count).unwrap();
        for c in &sig.cells {
            write!(out, " {c}").unwrap();
        }
        out.push('\n');
    }
    out.push_str("END\n");
    out
}

struct Reader<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn err(&self, line: usize, msg: impl Into<String>) -> EpicError {
        EpicError::malformed(self.path, line, msg)
    }

    /// Next line, which must start with `key`; returns its line number and
    /// the remaining fields.
    fn next(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let Some(&(n, line)) = self.lines.get(self.pos) else {
            let last = self.lines.last().map_or(1, |l| l.0);
            return Err(self.err(last, format!("file ends before `{key}`")));
        };
        self.pos += 1;
        let mut fields = line.split_ascii_whitespace();
        if fields.next() != Some(key) {
            return Err(self.err(n, format!("expected `{key}`")));
        }
        Ok((n, fields.collect()))
    }

    fn peek_is(&self, key: &str) -> bool {
        self.lines
            .get(self.pos)
            .is_some_and(|(_, l)| l.split_ascii_whitespace().next() == Some(key))
    }
}

fn num<T: std::str::FromStr>(r: &Reader, n: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| r.err(n, format!("cannot parse `{s}`")))
}

fn nums<T: std::str::FromStr>(r: &Reader, n: usize, fields: &[&str], expected: usize) -> Result<Vec<T>> {
    if fields.len() != expected {
        return Err(r.err(n, format!("expected {expected} values, found {}", fields.len())));
    }
    fields.iter().map(|s| num(r, n, s)).collect()
}

fn float_line(r: &mut Reader, key: &str, expected: usize) -> Result<Vec<f64>> {
    let (n, f) = r.next(key)?;
    nums(r, n, &f, expected)
}

fn header_fields<'b>(r: &Reader, n: usize, f: &[&'b str], count: usize) -> Result<Vec<&'b str>> {
    if f.len() != count {
        return Err(r.err(n, format!("expected {count} fields")));
    }
    Ok(f.to_vec())
}

pub fn model_from_text(text: &str, path: &Path) -> Result<MetaModel> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    let mut r = Reader { lines, pos: 0, path };

    let (n, f) = r.next(MODEL_MAGIC)?;
    let version = match f.as_slice() {
        [v] => v.strip_prefix('v').and_then(|v| v.parse::<u32>().ok()),
        _ => None,
    }
    .ok_or_else(|| r.err(n, "bad version tag"))?;
    if version != MODEL_VERSION {
        return Err(EpicError::VersionMismatch { path: path.into(), found: version, supported: MODEL_VERSION });
    }
    let (n, f) = r.next("rng")?;
    if f != [RNG_ALGORITHM] {
        return Err(r.err(n, format!("unsupported generator, expected {RNG_ALGORITHM}")));
    }
    let mut config_echo = Vec::new();
    while r.peek_is("config") {
        let (i, line) = r.lines[r.pos];
        r.pos += 1;
        let rest = line.strip_prefix("config").unwrap().trim_start();
        if rest.is_empty() {
            return Err(r.err(i, "empty config line"));
        }
        config_echo.push(rest.to_string());
    }
    let theta = float_line(&mut r, "theta", 1)?[0];
    let lambda0 = float_line(&mut r, "lambda0", 1)?[0];
    let (n, f) = r.next("bases")?;
    let count: usize = nums(&r, n, &f, 1)?[0];
    let mut weighting = Vec::with_capacity(count);
    for _ in 0..count {
        let (n, f) = r.next("weighting")?;
        if f.len() < 2 {
            return Err(r.err(n, "weighting needs base index and level count"));
        }
        let base_index: usize = num(&r, n, f[0])?;
        let l: usize = num(&r, n, f[1])?;
        let levels = nums(&r, n, &f[2..], l)?;
        weighting.push(WeightingFunction { base_index, levels });
    }

    let (n, f) = r.next("ann")?;
    let f = header_fields(&r, n, &f, 4)?;
    let hidden: usize = num(&r, n, f[0])?;
    let inputs: usize = num(&r, n, f[1])?;
    let ann_threshold: f64 = num(&r, n, f[2])?;
    let bias_out: f64 = num(&r, n, f[3])?;
    let mean = float_line(&mut r, "ann.norm.mean", inputs)?;
    let scale = float_line(&mut r, "ann.norm.scale", inputs)?;
    let w_in = float_line(&mut r, "ann.w_in", hidden * inputs)?;
    let w_out = float_line(&mut r, "ann.w_out", hidden)?;
    let bias_hid = float_line(&mut r, "ann.bias_hid", hidden)?;
    let ann = AnnModel {
        w_in,
        w_out,
        bias_hid,
        bias_out,
        hidden,
        inputs,
        threshold: ann_threshold,
        norm: NormParams { mean, scale },
    };

    let (n, f) = r.next("svm")?;
    let f = header_fields(&r, n, &f, 6)?;
    let sv_count: usize = num(&r, n, f[0])?;
    let dim: usize = num(&r, n, f[1])?;
    let bias: f64 = num(&r, n, f[2])?;
    let c_bound: f64 = num(&r, n, f[3])?;
    let gamma: f64 = num(&r, n, f[4])?;
    let svm_threshold: f64 = num(&r, n, f[5])?;
    let mean = float_line(&mut r, "svm.norm.mean", dim)?;
    let scale = float_line(&mut r, "svm.norm.scale", dim)?;
    let mut svm = SvmModel {
        alphas: Vec::with_capacity(sv_count),
        labels: Vec::with_capacity(sv_count),
        support_vectors: Vec::with_capacity(sv_count),
        bias,
        c_bound,
        gamma,
        threshold: svm_threshold,
        norm: NormParams { mean, scale },
    };
    for _ in 0..sv_count {
        let v = float_line(&mut r, "sv", dim + 2)?;
        svm.alphas.push(v[0]);
        svm.labels.push(v[1]);
        svm.support_vectors.push(v[2..].to_vec());
    }

    let (n, f) = r.next("pm")?;
    let f = header_fields(&r, n, &f, 5)?;
    let mut pm = PmLibrary {
        signatures: Vec::new(),
        quant_levels: num(&r, n, f[0])?,
        match_tolerance: num(&r, n, f[1])?,
        mismatch_budget: num(&r, n, f[2])?,
        dim: num(&r, n, f[3])?,
    };
    let sig_count: usize = num(&r, n, f[4])?;
    for _ in 0..sig_count {
        let (n, f) = r.next("sig")?;
        let v: Vec<usize> = nums(&r, n, &f, pm.dim + 1)?;
        pm.signatures.push(PmSignature {
            source_count: v[0],
            cells: v[1..].iter().map(|&c| c as u32).collect(),
        });
    }
    let (n, f) = r.next("END")?;
    if !f.is_empty() {
        return Err(r.err(n, "unexpected fields after END"));
    }
    if let Some(&(n, _)) = r.lines.get(r.pos) {
        return Err(r.err(n, "content after END"));
    }
    if ann.inputs != svm.norm.dim() || pm.dim != ann.inputs {
        return Err(r.err(n, "base classifiers disagree on feature dimension"));
    }
    Ok(MetaModel { weighting, theta, lambda0, bases: BaseModels { ann, svm, pm }, config_echo })
}

pub fn save_model(model: &MetaModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_text(model)).map_err(|e| EpicError::io(path, e))
}

pub fn load_model(path: &Path) -> Result<MetaModel> {
    let text = std::fs::read_to_string(path).map_err(|e| EpicError::io(path, e))?;
    model_from_text(&text, path)
}

//! Task specifications such as `blobs2(seed=7,n=2000)` and the built-in
//! task registry.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use super::data::{blobs2, moons2, Dataset, Splits};
use super::idx::{read_idx_images, read_idx_labels, IdxError, IdxImages};
use super::landscape::Landscape2d;
use super::task::{ClassificationTask, QuadraticTask, Task};
use super::HarnessError;

/// `name` or `name(key=value,...)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSpec {
    pub name: String,
    pub params: BTreeMap<String, String>,
}

impl TaskSpec {
    pub fn new(name: impl Into<String>) -> Self {
        TaskSpec {
            name: name.into(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }
}

impl fmt::Display for TaskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if !self.params.is_empty() {
            let body: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            write!(f, "({})", body.join(","))?;
        }
        Ok(())
    }
}

impl FromStr for TaskSpec {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        parse_task_spec(s)
    }
}

fn spec_err(text: &str, why: &str) -> HarnessError {
    HarnessError::BadTaskSpec(format!("{text:?}: {why}"))
}

fn valid_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

pub fn parse_task_spec(text: &str) -> Result<TaskSpec, HarnessError> {
    let s = text.trim();
    let (name, body) = match s.find('(') {
        None => (s, None),
        Some(open) => {
            let rest = &s[open + 1..];
            let inner = rest.strip_suffix(')').ok_or_else(|| spec_err(text, "missing closing parenthesis"))?;
            (&s[..open], Some(inner))
        }
    };
    let name = name.trim();
    if !valid_ident(name) {
        return Err(spec_err(text, "task name must be alphanumeric, '-' or '_'"));
    }
    let mut params = BTreeMap::new();
    if let Some(body) = body {
        if !body.trim().is_empty() {
            for item in body.split(',') {
                let (k, v) = item.split_once('=').ok_or_else(|| spec_err(text, "expected key=value"))?;
                let (k, v) = (k.trim(), v.trim());
                if !valid_ident(k) {
                    return Err(spec_err(text, "bad parameter name"));
                }
                if v.is_empty() || v.contains(['(', ')']) {
                    return Err(spec_err(text, "bad parameter value"));
                }
                if params.insert(k.to_string(), v.to_string()).is_some() {
                    return Err(spec_err(text, "duplicate parameter"));
                }
            }
        }
    }
    Ok(TaskSpec {
        name: name.to_string(),
        params,
    })
}

struct Params<'a> {
    task: &'a str,
    map: BTreeMap<String, String>,
}

impl Params<'_> {
    fn take<T: FromStr>(&mut self, key: &str, default: T) -> Result<T, HarnessError> {
        match self.map.remove(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| HarnessError::BadParam {
                task: self.task.to_string(),
                param: key.to_string(),
                value: v,
            }),
        }
    }

    fn take_required(&mut self, key: &str) -> Result<String, HarnessError> {
        self.map.remove(key).ok_or_else(|| HarnessError::BadParam {
            task: self.task.to_string(),
            param: key.to_string(),
            value: "<missing>".into(),
        })
    }

    fn finish(self) -> Result<(), HarnessError> {
        match self.map.into_iter().next() {
            None => Ok(()),
            Some((k, v)) => Err(HarnessError::BadParam {
                task: self.task.to_string(),
                param: k,
                value: v,
            }),
        }
    }
}

fn positive(task: &str, param: &str, v: f64) -> Result<f64, HarnessError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(HarnessError::BadParam {
            task: task.into(),
            param: param.into(),
            value: v.to_string(),
        })
    }
}

fn at_least(task: &str, param: &str, v: usize, min: usize) -> Result<usize, HarnessError> {
    if v >= min {
        Ok(v)
    } else {
        Err(HarnessError::BadParam {
            task: task.into(),
            param: param.into(),
            value: v.to_string(),
        })
    }
}

fn hidden_layer(h: usize) -> Option<usize> {
    (h > 0).then_some(h)
}

/// Default synthetic mini-batch size.
pub const DEFAULT_BATCH: usize = 32;

/// Builds a built-in task.
///
/// | name          | parameters (defaults)                                                 |
/// |---------------|-----------------------------------------------------------------------|
/// | `landscape2d` | none                                                                  |
/// | `quadratic`   | `lambda` (1.0), `dim` (4)                                             |
/// | `blobs2`      | `seed` (7), `n` (2000), `sep` (2.0), `std` (1.0), `offset` (8.0), `hidden` (16, 0 = linear softmax), `batch` (32) |
/// | `moons2`      | `seed` (7), `n` (2000), `noise` (0.2), `hidden` (16), `batch` (32)    |
/// | `mnist-idx`   | `path` (required directory), `hidden` (64), `batch` (64), `train` / `test` (row limits, 0 = all) |
pub fn load_task(spec: &TaskSpec) -> Result<Arc<dyn Task>, HarnessError> {
    let name = spec.name.as_str();
    let mut p = Params {
        task: name,
        map: spec.params.clone(),
    };
    let task: Arc<dyn Task> = match name {
        "landscape2d" => Arc::new(Landscape2d::default()),
        "quadratic" => {
            let lambda = positive(name, "lambda", p.take("lambda", 1.0)?)?;
            let dim = at_least(name, "dim", p.take("dim", 4usize)?, 1)?;
            Arc::new(QuadraticTask::new(lambda, dim))
        }
        "blobs2" => {
            let seed: u64 = p.take("seed", 7)?;
            let n = at_least(name, "n", p.take("n", 2000usize)?, 2)?;
            let sep = positive(name, "sep", p.take("sep", 2.0)?)?;
            let std = positive(name, "std", p.take("std", 1.0)?)?;
            let offset: f64 = p.take("offset", 8.0)?;
            let hidden: usize = p.take("hidden", 16)?;
            let batch = at_least(name, "batch", p.take("batch", DEFAULT_BATCH)?, 1)?;
            let id = format!("blobs2(n={n},offset={offset},seed={seed},sep={sep},std={std})");
            Arc::new(ClassificationTask::new(id, blobs2(seed, n, sep, std, offset), hidden_layer(hidden), batch))
        }
        "moons2" => {
            let seed: u64 = p.take("seed", 7)?;
            let n = at_least(name, "n", p.take("n", 2000usize)?, 2)?;
            let noise = positive(name, "noise", p.take("noise", 0.2)?)?;
            let hidden: usize = p.take("hidden", 16)?;
            let batch = at_least(name, "batch", p.take("batch", DEFAULT_BATCH)?, 1)?;
            let id = format!("moons2(n={n},noise={noise},seed={seed})");
            Arc::new(ClassificationTask::new(id, moons2(seed, n, noise), hidden_layer(hidden), batch))
        }
        "mnist-idx" => {
            let dir = PathBuf::from(p.take_required("path")?);
            let hidden: usize = p.take("hidden", 64)?;
            let batch = at_least(name, "batch", p.take("batch", 64usize)?, 1)?;
            let train_limit: usize = p.take("train", 0)?;
            let test_limit: usize = p.take("test", 0)?;
            let train = load_mnist_split(&dir, "train", train_limit)?;
            let validation = load_mnist_split(&dir, "t10k", test_limit)?;
            let id = format!("mnist(test={},train={})", validation.len(), train.len());
            Arc::new(ClassificationTask::new(id, Splits { train, validation }, hidden_layer(hidden), batch))
        }
        other => return Err(HarnessError::UnknownTask(other.to_string())),
    };
    p.finish()?;
    Ok(task)
}

/// Reads `<prefix>-images-idx3-ubyte` and `<prefix>-labels-idx1-ubyte`,
/// scaling pixels to `[0, 1]`.
pub fn load_mnist_split(dir: &std::path::Path, prefix: &str, limit: usize) -> Result<Dataset, HarnessError> {
    let images = read_idx_images(&dir.join(format!("{prefix}-images-idx3-ubyte")))?;
    let labels = read_idx_labels(&dir.join(format!("{prefix}-labels-idx1-ubyte")))?;
    mnist_dataset(&images, &labels, limit)
}

pub fn mnist_dataset(images: &IdxImages, labels: &[u8], limit: usize) -> Result<Dataset, HarnessError> {
    if images.rows != 28 || images.cols != 28 {
        return Err(IdxError::Header(format!("expected 28x28 images, found {}x{}", images.rows, images.cols)).into());
    }
    if images.count != labels.len() {
        return Err(IdxError::Header(format!(
            "{} images but {} labels",
            images.count,
            labels.len()
        ))
        .into());
    }
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l > 9) {
        return Err(IdxError::BadLabel { index, label }.into());
    }
    let n = if limit == 0 { images.count } else { limit.min(images.count) };
    let dim = images.rows * images.cols;
    let features = images.pixels[..n * dim].iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok(Dataset {
        features,
        labels: labels[..n].iter().map(|&l| usize::from(l)).collect(),
        dim,
        classes: 10,
    })
}

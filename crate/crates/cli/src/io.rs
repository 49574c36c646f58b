use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use harmonet::netcore::{ClassicalState, SpringNetwork};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] harmonet::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("writing output: {0}")]
    Output(#[from] std::io::Error),
    #[error("{0}")]
    Usage(String),
    #[error("value in the promise gap: {0}")]
    Indeterminate(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(harmonet::Error::ResourceLimit(_)) => 3,
            CliError::Indeterminate(_) => 4,
            CliError::Output(_) => 1,
            _ => 2,
        }
    }
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

pub fn read_network(path: &Path) -> Result<SpringNetwork, CliError> {
    Ok(SpringNetwork::from_json(&read_text(path)?)?)
}

#[derive(Debug, Deserialize)]
struct StateFile {
    x: Vec<f64>,
    v: Vec<f64>,
}

/// State file if given, else unit displacement of mass 1.
pub fn read_state(path: Option<&Path>, n: usize) -> Result<ClassicalState, CliError> {
    let Some(path) = path else {
        return Ok(ClassicalState::displaced(n, 0));
    };
    let file: StateFile =
        serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if file.x.len() != n || file.v.len() != n {
        return Err(CliError::Usage(format!("state has {} positions and {} velocities for {n} masses", file.x.len(), file.v.len())));
    }
    if file.x.iter().chain(&file.v).any(|v| !v.is_finite()) {
        return Err(CliError::Usage("state entries must be finite".into()));
    }
    Ok(ClassicalState::new(DVector::from_vec(file.x), DVector::from_vec(file.v)))
}

pub fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => {
            let file = File::create(p).map_err(|source| CliError::Io { path: p.to_owned(), source })?;
            Box::new(BufWriter::new(file))
        }
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

pub fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), CliError> {
    let mut out = output(path)?;
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    writeln!(out, "{text}")?;
    out.flush()?;
    Ok(())
}

/// `"1,2,5"` as 0-based indices.
pub fn parse_vertices(text: &str) -> Result<Vec<usize>, CliError> {
    text.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_index(s.trim())).collect()
}

/// `"1-2,3-3"` as 0-based pairs.
pub fn parse_edges(text: &str) -> Result<Vec<(usize, usize)>, CliError> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            let (j, k) = s.trim().split_once('-').ok_or_else(|| CliError::Usage(format!("spring {s:?} is not j-k")))?;
            Ok((parse_index(j)?, parse_index(k)?))
        })
        .collect()
}

fn parse_index(s: &str) -> Result<usize, CliError> {
    match s.parse::<usize>() {
        Ok(i) if i >= 1 => Ok(i - 1),
        _ => Err(CliError::Usage(format!("{s:?} is not a 1-based index"))),
    }
}

/// `count` points on `[0, end]`; one point means just `end`.
pub fn time_grid(end: f64, count: usize) -> Result<Vec<f64>, CliError> {
    if !(end.is_finite() && end >= 0.0) || count == 0 {
        return Err(CliError::Usage("need a finite end time >= 0 and at least one sample".into()));
    }
    if count == 1 {
        return Ok(vec![end]);
    }
    let last = (count - 1) as f64;
    Ok((0..count).map(|i| end * (i as f64 / last)).collect())
}

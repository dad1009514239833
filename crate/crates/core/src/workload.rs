//! Layer tables: bundled networks and the `name,R,C,F,O` file format.

use std::path::Path;

use thiserror::Error;

use crate::analytic::LayerShape;

const ALEXNET: &str = include_str!("../data/alexnet.csv");
const VGG16: &str = include_str!("../data/vgg16.csv");
const RESNET50: &str = include_str!("../data/resnet50.csv");

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("unknown workload `{0}` (expected alexnet, vgg16, resnet50 or a file path)")]
    Unknown(String),
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workload {
    pub name: String,
    pub layers: Vec<LayerShape>,
}

pub const BUNDLED: [&str; 3] = ["alexnet", "vgg16", "resnet50"];

pub fn bundled(name: &str) -> Option<Workload> {
    let text = match name.to_ascii_lowercase().as_str() {
        "alexnet" => ALEXNET,
        "vgg16" | "vgg-16" => VGG16,
        "resnet50" | "resnet-50" => RESNET50,
        _ => return None,
    };
    let layers = parse_layers(text).expect("bundled layer tables are well formed");
    Some(Workload { name: name.to_ascii_lowercase().replace('-', ""), layers })
}

/// Resolves a bundled name first, then falls back to a file path.
pub fn load(name_or_path: &str) -> Result<Workload, WorkloadError> {
    if let Some(w) = bundled(name_or_path) {
        return Ok(w);
    }
    let path = Path::new(name_or_path);
    if !path.exists() {
        return Err(WorkloadError::Unknown(name_or_path.to_string()));
    }
    let text =
        std::fs::read_to_string(path).map_err(|source| WorkloadError::Io { path: name_or_path.to_string(), source })?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| name_or_path.to_string());
    Ok(Workload { name, layers: parse_layers(&text)? })
}

/// Parses `name,R,C,F,O` records; `#` starts a comment line.
pub fn parse_layers(text: &str) -> Result<Vec<LayerShape>, WorkloadError> {
    let mut layers = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i as u64 + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let record: Vec<&str> = body.split(',').map(str::trim).collect();
        if record.len() != 5 {
            return Err(WorkloadError::Parse { line, msg: format!("expected 5 fields, found {}", record.len()) });
        }
        let num = |i: usize| -> Result<u32, WorkloadError> {
            record[i]
                .parse::<u32>()
                .map_err(|e| WorkloadError::Parse { line, msg: format!("field {} `{}`: {e}", i + 1, record[i]) })
        };
        let layer = LayerShape::new(record[0], num(1)?, num(2)?, num(3)?, num(4)?);
        layer.validate().map_err(|e| WorkloadError::Parse { line, msg: e.to_string() })?;
        layers.push(layer);
    }
    Ok(layers)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_sizes() {
        assert_eq!(bundled("alexnet").unwrap().layers.len(), 5);
        assert_eq!(bundled("vgg16").unwrap().layers.len(), 13);
        let resnet = bundled("resnet50").unwrap();
        assert_eq!(resnet.layers.len(), 53);
        assert_eq!(resnet.layers[0], LayerShape::new("conv1", 7, 3, 64, 112));
    }

    #[test]
    fn parse_errors_carry_line() {
        let err = parse_layers("# c\nA,1,2,3\n").unwrap_err();
        assert!(matches!(err, WorkloadError::Parse { line: 2, .. }), "{err:?}");
        assert!(parse_layers("A,1,x,3,4\n").is_err());
        assert!(parse_layers("A,0,1,1,1\n").is_err());
        assert!(parse_layers("").unwrap().is_empty());
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(load("no-such-net"), Err(WorkloadError::Unknown(_))));
    }
}

//! Source language: parsing, lowering to a pCFG, and invariant attachment.

pub mod ast;
pub mod invariants;
pub mod linearize;
pub mod lower;
pub mod mutate;
pub mod parser;
pub mod pretty;

use std::path::Path;

pub use invariants::{attach_invariants, parse_annotations, Annotations};
pub use lower::{lower, LowerError, Lowered};
pub use parser::{parse, ParseError};

use crate::linexpr::Polyhedron;
use crate::pcfg::Pcfg;

#[derive(Debug, thiserror::Error)]
pub enum FrontendError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Lower(#[from] LowerError),
    #[error("annotation line {line}: {msg}")]
    Annotation { line: usize, msg: String },
    #[error("unknown location label {0}")]
    UnknownLabel(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// A program ready for analysis.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub ast: ast::Program,
    pub pcfg: Pcfg,
    pub inv: Vec<Polyhedron>,
}

/// Parse, lower and attach invariants from loop annotations and an optional
/// annotation file body.
pub fn load_str(src: &str, inv_src: Option<&str>) -> Result<Loaded, FrontendError> {
    let ast = parse(src)?;
    let Lowered {
        pcfg,
        loop_invariants,
    } = lower(&ast)?;
    let mut ann = invariants::loop_annotations(&pcfg, &loop_invariants);
    if let Some(s) = inv_src {
        ann.extend(parse_annotations(s, &pcfg)?);
    }
    let inv = attach_invariants(&pcfg, &ann)?;
    Ok(Loaded { ast, pcfg, inv })
}

fn read(path: &Path) -> Result<String, FrontendError> {
    std::fs::read_to_string(path).map_err(|source| FrontendError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// [`load_str`] from files.
pub fn load(program: &Path, inv: Option<&Path>) -> Result<Loaded, FrontendError> {
    let src = read(program)?;
    let inv_src = inv.map(read).transpose()?;
    load_str(&src, inv_src.as_deref())
}

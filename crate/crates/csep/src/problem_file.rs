//! TOML problem files.
//!
//! ```toml
//! dimension = 2
//! x0 = [0.5, 0.3]
//!
//! [set]
//! type = "box"
//! lower = [-1.0, -1.0]
//! upper = [1.0, 1.0]
//!
//! [[bifunctions]]
//! type = "vi_affine"
//! matrix = [[1.0, 0.0], [0.0, 0.0]]
//!
//! [known_solution]
//! type = "box_slice"
//! lower = [0.0, -1.0]
//! upper = [0.0, 1.0]
//! ```
//!
//! Sets: `box` (`lower`, `upper`), `ball` (`center`, `radius`), `polyhedron`
//! (`normals`, `offsets`, one row per `<a, x> <= b`) and `whole_space`.
//!
//! Bifunctions: `vi_affine` (`matrix`, optional `q`, optional `lipschitz`),
//! `affine_quadratic` (`p`, `q_matrix`, optional `q`) and `black_box`
//! (`name` from [`BLACK_BOX_NAMES`]). Every entry accepts optional `c1`, `c2`;
//! `black_box` requires them.

use std::fs;
use std::path::Path;

use csep_core::{
    Bifunction, CsepInstance, FeasibleSet, HalfspaceCut, KnownSolution, LipschitzData, Matrix,
    Operator, Point,
};
use serde::Deserialize;

use crate::error::{HarnessError, Result};

pub const BLACK_BOX_NAMES: [&str; 3] = ["zero", "norm_gap", "l1_gap"];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub dimension: usize,
    pub x0: Vec<f64>,
    /// Free text: origin of the instance and what it is meant to exercise.
    #[serde(default)]
    pub description: Option<String>,
    pub set: SetSpec,
    pub bifunctions: Vec<BifunctionSpec>,
    #[serde(default)]
    pub known_solution: Option<KnownSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Polyhedron { normals: Vec<Vec<f64>>, offsets: Vec<f64> },
    WholeSpace,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BifunctionSpec {
    ViAffine {
        matrix: Vec<Vec<f64>>,
        #[serde(default)]
        q: Option<Vec<f64>>,
        #[serde(default)]
        lipschitz: Option<f64>,
        #[serde(default)]
        c1: Option<f64>,
        #[serde(default)]
        c2: Option<f64>,
    },
    AffineQuadratic {
        p: Vec<Vec<f64>>,
        q_matrix: Vec<Vec<f64>>,
        #[serde(default)]
        q: Option<Vec<f64>>,
        #[serde(default)]
        c1: Option<f64>,
        #[serde(default)]
        c2: Option<f64>,
    },
    BlackBox {
        name: String,
        #[serde(default)]
        c1: Option<f64>,
        #[serde(default)]
        c2: Option<f64>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KnownSpec {
    Singleton { point: Vec<f64> },
    BoxSlice { lower: Vec<f64>, upper: Vec<f64> },
}

/// A validated instance and the free-text description from its file.
#[derive(Clone, Debug)]
pub struct Problem {
    pub instance: CsepInstance,
    pub description: Option<String>,
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<Problem> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_problem(&text, path)
}

/// Parses and validates file contents; `path` only labels diagnostics.
pub fn parse_problem(text: &str, path: &Path) -> Result<Problem> {
    let file: ProblemFile = toml::from_str(text).map_err(|e| HarnessError::Parse {
        path: path.to_path_buf(),
        line: e
            .span()
            .map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1),
        message: e.message().trim().to_string(),
    })?;
    build_problem(file)
}

fn schema(field: impl Into<String>, message: impl Into<String>) -> HarnessError {
    HarnessError::Schema {
        field: field.into(),
        message: message.into(),
    }
}

fn vector(field: &str, v: &[f64], dim: usize) -> Result<Point> {
    if v.len() != dim {
        return Err(schema(
            field,
            format!("expected {dim} entries, got {}", v.len()),
        ));
    }
    if v.iter().any(|c| !c.is_finite()) {
        return Err(schema(field, "entries must be finite"));
    }
    Ok(Point::from_slice(v))
}

fn matrix(field: &str, rows: &[Vec<f64>], dim: usize) -> Result<Matrix> {
    if rows.len() != dim {
        return Err(schema(
            field,
            format!("expected {dim} rows, got {}", rows.len()),
        ));
    }
    for (i, r) in rows.iter().enumerate() {
        vector(&format!("{field}[{i}]"), r, dim)?;
    }
    Matrix::from_rows(rows).map_err(|e| schema(field, e.to_string()))
}

fn set(spec: &SetSpec, dim: usize) -> Result<FeasibleSet> {
    let built = match spec {
        SetSpec::Box { lower, upper } => FeasibleSet::new_box(
            vector("set.lower", lower, dim)?,
            vector("set.upper", upper, dim)?,
        ),
        SetSpec::Ball { center, radius } => {
            FeasibleSet::new_ball(vector("set.center", center, dim)?, *radius)
        }
        SetSpec::Polyhedron { normals, offsets } => {
            if normals.len() != offsets.len() {
                return Err(schema(
                    "set.offsets",
                    format!("{} offsets for {} normals", offsets.len(), normals.len()),
                ));
            }
            let cuts = normals
                .iter()
                .zip(offsets)
                .enumerate()
                .map(|(i, (a, b))| {
                    let a = vector(&format!("set.normals[{i}]"), a, dim)?;
                    HalfspaceCut::new(a, *b)
                        .map_err(|e| schema(format!("set.normals[{i}]"), e.to_string()))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(FeasibleSet::polyhedron(cuts))
        }
        SetSpec::WholeSpace => Ok(FeasibleSet::WholeSpace),
    };
    built.map_err(|e| schema("set", e.to_string()))
}

fn constants(
    index: usize,
    c1: Option<f64>,
    c2: Option<f64>,
) -> Result<Option<LipschitzData>> {
    match (c1, c2) {
        (None, None) => Ok(None),
        (Some(c1), Some(c2)) => LipschitzData::new(c1, c2)
            .map(Some)
            .map_err(|e| schema(format!("bifunctions[{index}].c1"), e.to_string())),
        _ => Err(schema(
            format!("bifunctions[{index}]"),
            "c1 and c2 must be given together",
        )),
    }
}

fn black_box(index: usize, name: &str) -> Result<Bifunction> {
    let f = match name {
        "zero" => Bifunction::black_box(|_, _| 0.0, |_, y| Point::zeros(y.dim())),
        "norm_gap" => Bifunction::black_box(
            |x, y| y.norm_sq() - x.norm_sq(),
            |_, y| y.scaled(2.0),
        ),
        "l1_gap" => Bifunction::black_box(
            |x, y| l1(y) - l1(x),
            |_, y| Point::new(y.as_slice().iter().map(|v| sign(*v)).collect()),
        ),
        other => {
            return Err(schema(
                format!("bifunctions[{index}].name"),
                format!("unknown black box `{other}`; known: {}", BLACK_BOX_NAMES.join(", ")),
            ))
        }
    };
    Ok(f)
}

fn l1(p: &Point) -> f64 {
    p.as_slice().iter().map(|v| v.abs()).sum()
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn bifunction(index: usize, spec: &BifunctionSpec, dim: usize) -> Result<Bifunction> {
    let field = |name: &str| format!("bifunctions[{index}].{name}");
    let q_or_zero = |q: &Option<Vec<f64>>| match q {
        Some(q) => vector(&field("q"), q, dim),
        None => Ok(Point::zeros(dim)),
    };
    let (f, c1, c2) = match spec {
        BifunctionSpec::ViAffine {
            matrix: m,
            q,
            lipschitz,
            c1,
            c2,
        } => {
            let op = Operator::affine(matrix(&field("matrix"), m, dim)?, q_or_zero(q)?, *lipschitz)
                .map_err(|e| schema(field("lipschitz"), e.to_string()))?;
            (Bifunction::vi(op), *c1, *c2)
        }
        BifunctionSpec::AffineQuadratic {
            p,
            q_matrix,
            q,
            c1,
            c2,
        } => {
            let f = Bifunction::affine_quadratic(
                matrix(&field("p"), p, dim)?,
                matrix(&field("q_matrix"), q_matrix, dim)?,
                q_or_zero(q)?,
            )?;
            (f, *c1, *c2)
        }
        BifunctionSpec::BlackBox { name, c1, c2 } => {
            if c1.is_none() && c2.is_none() {
                return Err(HarnessError::ConstantsMissing { index });
            }
            (black_box(index, name)?, *c1, *c2)
        }
    };
    let f = match constants(index, c1, c2)? {
        Some(c) => f.with_constants(c),
        None => f,
    };
    f.constants().map_err(|e| match spec {
        BifunctionSpec::BlackBox { .. } => HarnessError::ConstantsMissing { index },
        _ => schema(format!("bifunctions[{index}]"), e.to_string()),
    })?;
    Ok(f)
}

fn build_problem(file: ProblemFile) -> Result<Problem> {
    let dim = file.dimension;
    if dim == 0 {
        return Err(schema("dimension", "must be positive"));
    }
    if file.bifunctions.is_empty() {
        return Err(schema("bifunctions", "at least one entry is required"));
    }
    let x0 = vector("x0", &file.x0, dim)?;
    let set = set(&file.set, dim)?;
    let fs = file
        .bifunctions
        .iter()
        .enumerate()
        .map(|(i, b)| bifunction(i, b, dim))
        .collect::<Result<Vec<_>>>()?;
    let mut instance = CsepInstance::new(dim, set, fs, x0)?;
    if let Some(known) = &file.known_solution {
        let known = match known {
            KnownSpec::Singleton { point } => {
                KnownSolution::Singleton(vector("known_solution.point", point, dim)?)
            }
            KnownSpec::BoxSlice { lower, upper } => {
                let lower = vector("known_solution.lower", lower, dim)?;
                let upper = vector("known_solution.upper", upper, dim)?;
                if (0..dim).any(|j| lower[j] > upper[j]) {
                    return Err(schema("known_solution.lower", "exceeds upper"));
                }
                KnownSolution::AffineSegmentBox { lower, upper }
            }
        };
        instance = instance
            .with_known_solution(known)
            .map_err(|e| schema("known_solution", e.to_string()))?;
    }
    Ok(Problem {
        instance,
        description: file.description,
    })
}

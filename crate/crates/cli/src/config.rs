//! Line-oriented experiment configuration.
//!
//! The format is plain text with bracketed section headers and `key = value`
//! lines; `#` starts a comment. Example:
//!
//! ```text
//! [experiment]
//! id = gamma-ustat
//! seed = 42
//! n = 100,400,1600
//! replications = 20000
//! nu = 1.0
//!
//! [space]
//! mode = continuum
//! support = -1,1
//! mass = 1.0
//!
//! [kernel]
//! form = rank
//! order = 2
//! scale = n^-1
//! factor = step(0,1,1) + step(-1,0,-1)
//! ```
//!
//! Kernel specs support the `rank` form (one `factor` line per rank-one
//! term: `indicator(a,b)`, `step(a,b,c)`, `poly(a,b;c0,c1,...)`,
//! `gridfile(path)`, combined with `+`/`-`), the `grid` form (a whitespace
//! separated tensor file), and the `blocks` form (the mean-zero block
//! family on a regular partition; `cells = n` ties the cell count to the
//! intensity). Parse errors carry line numbers.

use std::collections::BTreeMap;

use pchaos_core::space::{BinIndex, Factor, Kernel, MeasureSpace, PiecewisePoly, Term};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyId {
    IdentitySuite,
    GammaUstat,
    ThreeMoment,
    DejongNormal,
    HybridGn,
    HybridGp,
}

impl StudyId {
    pub fn parse(s: &str) -> Option<StudyId> {
        Some(match s {
            "identity-suite" => StudyId::IdentitySuite,
            "gamma-ustat" => StudyId::GammaUstat,
            "three-moment" => StudyId::ThreeMoment,
            "dejong-normal" => StudyId::DejongNormal,
            "hybrid-gn" => StudyId::HybridGn,
            "hybrid-gp" => StudyId::HybridGp,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            StudyId::IdentitySuite => "identity-suite",
            StudyId::GammaUstat => "gamma-ustat",
            StudyId::ThreeMoment => "three-moment",
            StudyId::DejongNormal => "dejong-normal",
            StudyId::HybridGn => "hybrid-gn",
            StudyId::HybridGp => "hybrid-gp",
        }
    }
}

#[derive(Debug, Clone)]
pub enum SpaceSpec {
    /// Uniform density mass/(b−a) on (a, b).
    Uniform { a: f64, b: f64, mass: f64 },
    /// Piecewise-constant density triples.
    Density(Vec<(f64, f64, f64)>),
    /// Grid atoms with weights.
    Grid { points: Vec<f64>, weights: Vec<f64> },
}

impl SpaceSpec {
    pub fn build(&self, intensity: f64) -> CliResult<MeasureSpace> {
        Ok(match self {
            SpaceSpec::Uniform { a, b, mass } => {
                MeasureSpace::uniform_1d(*a, *b, *mass, intensity)?
            }
            SpaceSpec::Density(pieces) => MeasureSpace::continuum_1d(pieces.clone(), intensity)?,
            SpaceSpec::Grid { points, weights } => {
                MeasureSpace::grid_1d(points.clone(), weights.clone(), intensity)?
            }
        })
    }
}

#[derive(Debug, Clone)]
pub enum FactorPrimitive {
    Indicator { a: f64, b: f64 },
    Step { a: f64, b: f64, c: f64 },
    Poly { a: f64, b: f64, coeffs: Vec<f64> },
    GridFile { path: String },
}

/// One factor: a signed sum of primitives.
#[derive(Debug, Clone)]
pub struct FactorSpec {
    pub parts: Vec<(f64, FactorPrimitive)>,
}

impl FactorSpec {
    pub fn build(&self) -> CliResult<Factor> {
        let mut poly = PiecewisePoly::zero();
        let mut grid: Option<Vec<f64>> = None;
        for (sign, prim) in &self.parts {
            match prim {
                FactorPrimitive::Indicator { a, b } => {
                    poly = poly.add(&PiecewisePoly::step(*a, *b, *sign));
                }
                FactorPrimitive::Step { a, b, c } => {
                    poly = poly.add(&PiecewisePoly::step(*a, *b, sign * c));
                }
                FactorPrimitive::Poly { a, b, coeffs } => {
                    let scaled: Vec<f64> = coeffs.iter().map(|c| sign * c).collect();
                    poly = poly.add(&PiecewisePoly::poly(*a, *b, scaled));
                }
                FactorPrimitive::GridFile { path } => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| CliError::config(format!("gridfile {path}: {e}")))?;
                    let values: Vec<f64> = text
                        .split_whitespace()
                        .map(|t| t.parse::<f64>())
                        .collect::<Result<_, _>>()
                        .map_err(|e| CliError::config(format!("gridfile {path}: {e}")))?;
                    let scaled: Vec<f64> = values.iter().map(|v| sign * v).collect();
                    match &mut grid {
                        None => grid = Some(scaled),
                        Some(g) => {
                            if g.len() != scaled.len() {
                                return Err(CliError::config("gridfile lengths differ"));
                            }
                            for (a, b) in g.iter_mut().zip(scaled) {
                                *a += b;
                            }
                        }
                    }
                }
            }
        }
        if let Some(g) = grid {
            if !poly.is_zero() {
                return Err(CliError::config(
                    "a factor cannot mix grid vectors with closed forms",
                ));
            }
            return Ok(Factor::grid_vec(g));
        }
        Ok(Factor::poly(poly))
    }
}

#[derive(Debug, Clone)]
pub enum KernelSpec {
    Rank { order: usize, coeff: f64, scale_exp: f64, factors: Vec<FactorSpec> },
    GridTensor { order: usize, coeff: f64, scale_exp: f64, path: String },
    Blocks { order: usize, coeff: f64, scale_exp: f64, cells: CellCount },
}

#[derive(Debug, Clone, Copy)]
pub enum CellCount {
    Fixed(usize),
    PerIntensity,
}

impl KernelSpec {
    pub fn order(&self) -> usize {
        match self {
            KernelSpec::Rank { order, .. }
            | KernelSpec::GridTensor { order, .. }
            | KernelSpec::Blocks { order, .. } => *order,
        }
    }

    /// Materialise the kernel at intensity n (the per-n scale n^{scale_exp}
    /// multiplies the coefficient).
    pub fn build(&self, space: &MeasureSpace, n: f64) -> CliResult<Kernel> {
        match self {
            KernelSpec::Rank { order, coeff, scale_exp, factors } => {
                let c = coeff * n.powf(*scale_exp);
                let mut terms = Vec::with_capacity(factors.len());
                for fs in factors {
                    let e = fs.build()?;
                    terms.push(Term { coeff: c, factors: vec![e; *order] });
                }
                Ok(Kernel::separable(*order, terms))
            }
            KernelSpec::GridTensor { order, coeff, scale_exp, path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::config(format!("grid tensor {path}: {e}")))?;
                let values: Vec<f64> = text
                    .split_whitespace()
                    .map(|t| t.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| CliError::config(format!("grid tensor {path}: {e}")))?;
                let c = coeff * n.powf(*scale_exp);
                let data = values.iter().map(|v| c * v).collect();
                Ok(Kernel::dense_grid(*order, data, space)?)
            }
            KernelSpec::Blocks { order, coeff, scale_exp, cells } => {
                let m = match cells {
                    CellCount::Fixed(m) => *m,
                    CellCount::PerIntensity => n as usize,
                };
                let c = coeff * n.powf(*scale_exp);
                Ok(block_kernel(space, *order, m, c))
            }
        }
    }
}

/// The mean-zero block family: the space's support is split into m equal
/// cells; cell j carries ε_j = +1 on its left half, −1 on its right half,
/// and the kernel is c·Σ_j ε_j^{⊗order} with the bin index set for O(N)
/// pathwise evaluation.
pub fn block_kernel(space: &MeasureSpace, order: usize, m: usize, coeff: f64) -> Kernel {
    let (lo, hi) = support_of(space);
    let width = (hi - lo) / m as f64;
    let mut terms = Vec::with_capacity(m);
    for j in 0..m {
        let a = lo + j as f64 * width;
        let mid = a + 0.5 * width;
        let b = a + width;
        let e = Factor::poly(
            PiecewisePoly::step(a, mid, 1.0).add(&PiecewisePoly::step(mid, b, -1.0)),
        );
        terms.push(Term { coeff, factors: vec![e; order] });
    }
    Kernel::separable(order, terms).with_bins(BinIndex { lo, hi, cells: m })
}

fn support_of(space: &MeasureSpace) -> (f64, f64) {
    match space.density_support() {
        Some(s) => s,
        None => panic!("block kernels need a continuum space"),
    }
}

// ---------------------------------------------------------------------------
// Experiment config
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub id: StudyId,
    pub seed: u64,
    pub n_schedule: Vec<f64>,
    pub replications: usize,
    pub nu: f64,
    pub space: SpaceSpec,
    pub kernels: Vec<KernelSpec>,
    pub dump_samples: bool,
    pub overrides: BTreeMap<String, f64>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.n_schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::config("n schedule must be strictly increasing"));
        }
        if self.id != StudyId::IdentitySuite
            && self.id != StudyId::ThreeMoment
            && self.replications < 100
        {
            return Err(CliError::config(
                "distance estimates need at least 100 replications",
            ));
        }
        Ok(())
    }
}

struct LineParser<'a> {
    lines: Vec<(usize, &'a str)>,
}

fn err_at(line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::config(format!("config line {line}: {msg}"))
}

/// Parse the config text. Unknown keys are errors (the format is closed).
pub fn parse_config(text: &str) -> CliResult<ExperimentConfig> {
    let mut sections: Vec<(String, usize, Vec<(usize, String, String)>)> = Vec::new();
    let parser = LineParser {
        lines: text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| {
                let t = l.trim();
                !t.is_empty() && !t.starts_with('#')
            })
            .collect(),
    };
    for (no, raw) in parser.lines {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err_at(no, "unterminated section header"))?;
            sections.push((name.trim().to_string(), no, Vec::new()));
        } else {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err_at(no, "expected `key = value`"))?;
            let section = sections
                .last_mut()
                .ok_or_else(|| err_at(no, "key before any [section] header"))?;
            section.2.push((no, key.trim().to_string(), value.trim().to_string()));
        }
    }

    let mut id = None;
    let mut seed = 0u64;
    let mut n_schedule = Vec::new();
    let mut replications = 1000usize;
    let mut nu = 1.0;
    let mut dump_samples = false;
    let mut overrides = BTreeMap::new();
    let mut space = None;
    let mut kernels = Vec::new();

    for (name, at, entries) in &sections {
        match name.as_str() {
            "experiment" => {
                for (no, key, value) in entries {
                    match key.as_str() {
                        "id" => {
                            id = Some(StudyId::parse(value).ok_or_else(|| {
                                err_at(*no, format!("unknown experiment id `{value}`"))
                            })?)
                        }
                        "seed" => seed = parse_num(*no, value)? as u64,
                        "n" => n_schedule = parse_list(*no, value)?,
                        "replications" => replications = parse_num(*no, value)? as usize,
                        "nu" => nu = parse_num(*no, value)?,
                        "dump_samples" => dump_samples = parse_bool(*no, value)?,
                        k if k.starts_with("tol.") => {
                            overrides.insert(k[4..].to_string(), parse_num(*no, value)?);
                        }
                        _ => return Err(err_at(*no, format!("unknown key `{key}`"))),
                    }
                }
            }
            "space" => space = Some(parse_space(*at, entries)?),
            "kernel" => kernels.push(parse_kernel(*at, entries)?),
            _ => return Err(err_at(*at, format!("unknown section `[{name}]`"))),
        }
    }

    let id = id.ok_or_else(|| CliError::config("missing [experiment] id"))?;
    let cfg = ExperimentConfig {
        id,
        seed,
        n_schedule,
        replications,
        nu,
        space: space.unwrap_or(SpaceSpec::Uniform { a: -1.0, b: 1.0, mass: 1.0 }),
        kernels,
        dump_samples,
        overrides,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn parse_space(at: usize, entries: &[(usize, String, String)]) -> CliResult<SpaceSpec> {
    let mut mode = "continuum".to_string();
    let mut support = (-1.0, 1.0);
    let mut mass = 1.0;
    let mut density = Vec::new();
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (no, key, value) in entries {
        match key.as_str() {
            "mode" => mode = value.clone(),
            "support" => {
                let v = parse_list(*no, value)?;
                if v.len() != 2 {
                    return Err(err_at(*no, "support needs two endpoints"));
                }
                support = (v[0], v[1]);
            }
            "mass" => mass = parse_num(*no, value)?,
            "density" => {
                for triple in value.split(';') {
                    let v = parse_list(*no, triple)?;
                    if v.len() != 3 {
                        return Err(err_at(*no, "density pieces are `lo,hi,p` triples"));
                    }
                    density.push((v[0], v[1], v[2]));
                }
            }
            "points" => points = parse_list(*no, value)?,
            "weights" => weights = parse_list(*no, value)?,
            _ => return Err(err_at(*no, format!("unknown key `{key}`"))),
        }
    }
    Ok(match mode.as_str() {
        "continuum" if density.is_empty() => {
            SpaceSpec::Uniform { a: support.0, b: support.1, mass }
        }
        "continuum" => SpaceSpec::Density(density),
        "grid" => SpaceSpec::Grid { points, weights },
        other => return Err(err_at(at, format!("unknown space mode `{other}`"))),
    })
}

fn parse_kernel(at: usize, entries: &[(usize, String, String)]) -> CliResult<KernelSpec> {
    let mut form = "rank".to_string();
    let mut order = 2usize;
    let mut coeff = 1.0;
    let mut scale_exp = 0.0;
    let mut factors = Vec::new();
    let mut path = None;
    let mut cells = CellCount::PerIntensity;
    for (no, key, value) in entries {
        match key.as_str() {
            "form" => form = value.clone(),
            "order" => order = parse_num(*no, value)? as usize,
            "coeff" => coeff = parse_num(*no, value)?,
            "scale" => scale_exp = parse_scale(*no, value)?,
            "factor" => factors.push(parse_factor(*no, value)?),
            "file" => path = Some(value.clone()),
            "cells" => {
                cells = if value == "n" {
                    CellCount::PerIntensity
                } else {
                    CellCount::Fixed(parse_num(*no, value)? as usize)
                }
            }
            _ => return Err(err_at(*no, format!("unknown key `{key}`"))),
        }
    }
    Ok(match form.as_str() {
        "rank" => KernelSpec::Rank { order, coeff, scale_exp, factors },
        "grid" => KernelSpec::GridTensor {
            order,
            coeff,
            scale_exp,
            path: path.ok_or_else(|| err_at(at, "grid kernels need `file = path`"))?,
        },
        "blocks" => KernelSpec::Blocks { order, coeff, scale_exp, cells },
        other => return Err(err_at(at, format!("unknown kernel form `{other}`"))),
    })
}

/// `n^-1`, `n^0.5`, or a bare `1` (no scaling).
fn parse_scale(no: usize, value: &str) -> CliResult<f64> {
    let v = value.trim();
    if v == "1" || v.is_empty() {
        return Ok(0.0);
    }
    v.strip_prefix("n^")
        .ok_or_else(|| err_at(no, "scale must be `1` or `n^<exponent>`"))?
        .parse::<f64>()
        .map_err(|e| err_at(no, e))
}

/// A signed sum of factor primitives.
fn parse_factor(no: usize, value: &str) -> CliResult<FactorSpec> {
    let mut parts = Vec::new();
    let mut rest = value.trim();
    let mut sign = 1.0;
    loop {
        rest = rest.trim_start();
        if rest.starts_with('-') {
            sign = -sign;
            rest = &rest[1..];
            continue;
        }
        if rest.starts_with('+') {
            rest = &rest[1..];
            continue;
        }
        if rest.is_empty() {
            break;
        }
        let open = rest
            .find('(')
            .ok_or_else(|| err_at(no, format!("expected factor primitive near `{rest}`")))?;
        let close = rest
            .find(')')
            .ok_or_else(|| err_at(no, format!("unterminated `(` near `{rest}`")))?;
        let name = rest[..open].trim();
        let args = &rest[open + 1..close];
        let prim = match name {
            "indicator" => {
                let v = parse_list(no, args)?;
                require_args(no, &v, 2)?;
                FactorPrimitive::Indicator { a: v[0], b: v[1] }
            }
            "step" | "scaled-indicator" => {
                let v = parse_list(no, args)?;
                require_args(no, &v, 3)?;
                FactorPrimitive::Step { a: v[0], b: v[1], c: v[2] }
            }
            "poly" => {
                let (sup, coeffs) = args
                    .split_once(';')
                    .ok_or_else(|| err_at(no, "poly needs `a,b;c0,c1,...`"))?;
                let s = parse_list(no, sup)?;
                require_args(no, &s, 2)?;
                FactorPrimitive::Poly { a: s[0], b: s[1], coeffs: parse_list(no, coeffs)? }
            }
            "gridfile" => FactorPrimitive::GridFile { path: args.trim().to_string() },
            other => return Err(err_at(no, format!("unknown factor primitive `{other}`"))),
        };
        parts.push((sign, prim));
        sign = 1.0;
        rest = &rest[close + 1..];
    }
    if parts.is_empty() {
        return Err(err_at(no, "empty factor expression"));
    }
    Ok(FactorSpec { parts })
}

fn require_args(no: usize, v: &[f64], n: usize) -> CliResult<()> {
    if v.len() != n {
        return Err(err_at(no, format!("expected {n} arguments, got {}", v.len())));
    }
    Ok(())
}

fn parse_num(no: usize, value: &str) -> CliResult<f64> {
    value.trim().parse::<f64>().map_err(|e| err_at(no, format!("`{value}`: {e}")))
}

fn parse_bool(no: usize, value: &str) -> CliResult<bool> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(err_at(no, format!("expected a boolean, got `{other}`"))),
    }
}

fn parse_list(no: usize, value: &str) -> CliResult<Vec<f64>> {
    value
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().map_err(|e| err_at(no, format!("`{t}`: {e}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# comment
[experiment]
id = gamma-ustat
seed = 42
n = 100, 400, 1600
replications = 5000
nu = 1.0

[space]
mode = continuum
support = -1,1
mass = 1.0

[kernel]
form = rank
order = 2
scale = n^-1
factor = step(0,1,1) + step(-1,0,-1)
";

    #[test]
    fn parses_the_sample() {
        let cfg = parse_config(SAMPLE).unwrap();
        assert_eq!(cfg.id, StudyId::GammaUstat);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.n_schedule, vec![100.0, 400.0, 1600.0]);
        let space = cfg.space.build(100.0).unwrap();
        let k = cfg.kernels[0].build(&space, 100.0).unwrap();
        assert_eq!(k.order(), 2);
        // the built kernel is the scaled sign kernel
        let v = k.eval_sym(&space, &[&[0.3], &[0.7]]).unwrap();
        assert!((v - 0.01).abs() < 1e-15);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = SAMPLE.replace("n = 100, 400, 1600", "n = 100, x, 1600");
        let err = parse_config(&bad).unwrap_err();
        assert_eq!(err.exit_code, 2);
        assert!(err.message.contains("line 5"), "{}", err.message);

        let bad = SAMPLE.replace("id = gamma-ustat", "id = nonsense");
        assert!(parse_config(&bad).unwrap_err().message.contains("unknown experiment id"));

        let bad = format!("{SAMPLE}\nunknown = 1\n");
        assert!(parse_config(&bad).is_err());
    }

    #[test]
    fn schedule_must_increase() {
        let bad = SAMPLE.replace("n = 100, 400, 1600", "n = 400, 100");
        assert!(parse_config(&bad).unwrap_err().message.contains("strictly increasing"));
    }

    #[test]
    fn block_kernels_are_degenerate_and_binned() {
        let space = MeasureSpace::uniform_1d(0.0, 1.0, 1.0, 16.0).unwrap();
        let k = block_kernel(&space, 2, 16, 1.0);
        assert!(k.bins().is_some());
        let defect = pchaos_core::chaos_sim::degeneracy_defect(&space, &k).unwrap();
        assert!(defect <= 1e-12);
        // ‖h‖²_{μ_n} = m·(n/m)² = n²/m
        let n2 = pchaos_core::contract::norm2(&space, &k).unwrap();
        assert!((n2 - 16.0).abs() < 1e-10);
    }
}

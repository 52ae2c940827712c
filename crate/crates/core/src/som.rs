//! Self-organizing maps for looking at embedding drift.
//!
//! The map is trained once on the original vectors and then frozen, so the
//! original and refined vectors are projected into the same frame.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::symbol::Sym;

#[derive(Debug, Error, PartialEq)]
pub enum SomError {
    #[error("no input vectors")]
    Empty,
    #[error("vector `{entity}` has {found} components, the map has {expected}")]
    DimensionMismatch { entity: String, expected: usize, found: usize },
    #[error("vector `{0}` has a non-finite component")]
    NonFinite(String),
    #[error("invalid SOM parameters: {0}")]
    InvalidParams(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SomParams {
    pub width: usize,
    pub height: usize,
    pub epochs: usize,
    /// Neighborhood radius at the first step; half the larger side when unset.
    pub initial_radius: Option<f64>,
    pub final_radius: f64,
    pub initial_rate: f64,
    pub final_rate: f64,
    pub seed: u64,
}

impl Default for SomParams {
    fn default() -> Self {
        SomParams {
            width: 20,
            height: 20,
            epochs: 50,
            initial_radius: None,
            final_radius: 0.5,
            initial_rate: 0.1,
            final_rate: 0.01,
            seed: 0,
        }
    }
}

impl SomParams {
    fn validate(&self) -> Result<(), SomError> {
        let bad = |m: &str| Err(SomError::InvalidParams(m.into()));
        if self.width < 2 || self.height < 2 {
            return bad("grid must be at least 2x2");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        let r0 = self.radius0();
        if !(r0 > 0.0 && self.final_radius > 0.0 && self.final_radius <= r0) {
            return bad("radii must be positive with final_radius <= initial_radius");
        }
        if !(self.initial_rate > 0.0 && self.initial_rate <= 1.0 && self.final_rate > 0.0 && self.final_rate <= self.initial_rate) {
            return bad("rates must lie in (0, 1] with final_rate <= initial_rate");
        }
        Ok(())
    }

    fn radius0(&self) -> f64 {
        self.initial_radius.unwrap_or(self.width.max(self.height) as f64 / 2.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SomGrid {
    pub width: usize,
    pub height: usize,
    pub dim: usize,
    /// Row-major units, `dim` values each.
    pub codebook: Vec<f64>,
    pub params: SomParams,
}

/// Grid coordinates of a unit.
pub type Cell = (usize, usize);

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl SomGrid {
    pub fn unit(&self, row: usize, col: usize) -> &[f64] {
        let i = row * self.width + col;
        &self.codebook[i * self.dim..(i + 1) * self.dim]
    }

    fn units(&self) -> usize {
        self.width * self.height
    }

    /// Best-matching unit; the lowest index wins ties.
    pub fn bmu(&self, x: &[f64]) -> Cell {
        let mut best = (0, f64::INFINITY);
        for (i, w) in self.codebook.chunks_exact(self.dim).enumerate() {
            let d = sq_dist(x, w);
            if d < best.1 {
                best = (i, d);
            }
        }
        (best.0 / self.width, best.0 % self.width)
    }

    /// Mean Euclidean distance from each vector to its best-matching unit.
    pub fn quantization_error(&self, vectors: &[(Sym, Vec<f64>)]) -> f64 {
        if vectors.is_empty() {
            return 0.0;
        }
        let total: f64 = vectors
            .par_iter()
            .map(|(_, x)| {
                let (r, c) = self.bmu(x);
                sq_dist(x, self.unit(r, c)).sqrt()
            })
            .sum();
        total / vectors.len() as f64
    }
}

fn check(vectors: &[(Sym, Vec<f64>)], dim: usize) -> Result<(), SomError> {
    for (e, v) in vectors {
        if v.len() != dim {
            return Err(SomError::DimensionMismatch { entity: e.to_string(), expected: dim, found: v.len() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(SomError::NonFinite(e.to_string()));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedSom {
    pub grid: SomGrid,
    /// Quantization error after each epoch.
    pub errors: Vec<f64>,
}

/// Classic online Kohonen training with a Gaussian neighborhood whose
/// radius and learning rate decay exponentially from their initial to
/// their final values. Codebooks start uniformly inside the inputs'
/// bounding box.
pub fn train_som(vectors: &[(Sym, Vec<f64>)], params: &SomParams) -> Result<TrainedSom, SomError> {
    train_som_observed(vectors, params, |_, _| {})
}

/// [`train_som`] with a callback after every epoch.
pub fn train_som_observed(
    vectors: &[(Sym, Vec<f64>)],
    params: &SomParams,
    mut observe: impl FnMut(usize, &SomGrid),
) -> Result<TrainedSom, SomError> {
    params.validate()?;
    let dim = vectors.first().ok_or(SomError::Empty)?.1.len();
    if dim == 0 {
        return Err(SomError::InvalidParams("vectors have no components".into()));
    }
    check(vectors, dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let (w, h) = (params.width, params.height);
    // Uniform draws inside the inputs' bounding box, widened by a tenth of
    // their RMS norm so that identical inputs still get distinct units.
    let rms = (vectors.iter().map(|(_, v)| v.iter().map(|x| x * x).sum::<f64>()).sum::<f64>() / vectors.len() as f64).sqrt();
    let margin = 0.1 * rms.max(f64::MIN_POSITIVE);
    let lo: Vec<f64> = (0..dim).map(|k| vectors.iter().map(|v| v.1[k]).fold(f64::INFINITY, f64::min) - margin).collect();
    let hi: Vec<f64> = (0..dim).map(|k| vectors.iter().map(|v| v.1[k]).fold(f64::NEG_INFINITY, f64::max) + margin).collect();
    let mut codebook = Vec::with_capacity(w * h * dim);
    for _ in 0..w * h {
        codebook.extend((0..dim).map(|k| rng.random_range(lo[k]..hi[k])));
    }
    let mut grid = SomGrid { width: w, height: h, dim, codebook, params: params.clone() };

    let steps = (params.epochs * vectors.len()) as f64;
    let r0 = params.radius0();
    let decay = |start: f64, end: f64, t: f64| start * (end / start).powf(t / steps);
    let mut order: Vec<usize> = (0..vectors.len()).collect();
    let mut errors = Vec::with_capacity(params.epochs);
    let mut t = 0.0;
    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let x = &vectors[i].1;
            let (br, bc) = grid.bmu(x);
            let radius = decay(r0, params.final_radius, t);
            let rate = decay(params.initial_rate, params.final_rate, t);
            let two_s2 = 2.0 * radius * radius;
            for u in 0..grid.units() {
                let (r, c) = ((u / w) as f64, (u % w) as f64);
                let d2 = (r - br as f64).powi(2) + (c - bc as f64).powi(2);
                let influence = rate * (-d2 / two_s2).exp();
                if influence < 1e-12 {
                    continue;
                }
                for (wk, xk) in grid.codebook[u * dim..(u + 1) * dim].iter_mut().zip(x) {
                    *wk += influence * (xk - *wk);
                }
            }
            t += 1.0;
        }
        errors.push(grid.quantization_error(vectors));
        observe(epoch, &grid);
    }
    Ok(TrainedSom { grid, errors })
}

/// Maps each vector to its best-matching unit. The map is not modified.
pub fn project(som: &SomGrid, vectors: &[(Sym, Vec<f64>)]) -> Result<Vec<(Sym, Cell)>, SomError> {
    check(vectors, som.dim)?;
    Ok(vectors.par_iter().map(|(e, x)| (*e, som.bmu(x))).collect())
}

/// The `n` entities with the largest accumulated gradient norm (ties by
/// name), followed by every constant not already chosen.
pub fn select_entities(grad_norms: &BTreeMap<Sym, f64>, constants: &[Sym], n: usize) -> Vec<Sym> {
    let mut ranked: Vec<(Sym, f64)> = grad_norms.iter().map(|(&e, &g)| (e, g)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut out: Vec<Sym> = ranked.into_iter().take(n).map(|(e, _)| e).collect();
    for &c in constants {
        if !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub entity: Sym,
    pub cell: Cell,
    pub constant: bool,
    /// Present in only one of the two projections.
    pub one_sided: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Arrow {
    pub entity: Sym,
    pub from: Cell,
    pub to: Cell,
}

/// What the figure shows, before any drawing.
#[derive(Clone, Debug, PartialEq)]
pub struct Figure {
    pub width: usize,
    pub height: usize,
    pub before: Vec<Point>,
    pub after: Vec<Point>,
    /// From the original to the refined cell, for entities that moved.
    pub arrows: Vec<Arrow>,
}

pub fn layout(som: &SomGrid, before: &[(Sym, Cell)], after: &[(Sym, Cell)], constants: &[Sym]) -> Figure {
    let consts: BTreeSet<Sym> = constants.iter().copied().collect();
    let b: BTreeMap<Sym, Cell> = before.iter().copied().collect();
    let a: BTreeMap<Sym, Cell> = after.iter().copied().collect();
    let points = |side: &BTreeMap<Sym, Cell>, other: &BTreeMap<Sym, Cell>| {
        side.iter()
            .map(|(&e, &cell)| Point { entity: e, cell, constant: consts.contains(&e), one_sided: !other.contains_key(&e) })
            .collect()
    };
    let arrows = b
        .iter()
        .filter_map(|(&e, &from)| a.get(&e).filter(|&&to| to != from).map(|&to| Arrow { entity: e, from, to }))
        .collect();
    Figure { width: som.width, height: som.height, before: points(&b, &a), after: points(&a, &b), arrows }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const CELL: f64 = 28.0;
const MARGIN: f64 = 30.0;

impl Figure {
    fn panel_width(&self) -> f64 {
        self.width as f64 * CELL
    }

    /// Center of a cell in panel `p` (0 = before, 1 = after), with a small
    /// offset for the `k`-th point sharing that cell.
    fn xy(&self, p: usize, cell: Cell, k: usize) -> (f64, f64) {
        let x0 = MARGIN + p as f64 * (self.panel_width() + MARGIN);
        let off = (k % 4) as f64 * 4.0 - 6.0;
        (x0 + (cell.1 as f64 + 0.5) * CELL + off, MARGIN + (cell.0 as f64 + 0.5) * CELL + off)
    }

    /// A standalone SVG document: two grids side by side, constants in red,
    /// arrows in the right panel from each entity's original cell.
    pub fn to_svg(&self) -> String {
        let pw = self.panel_width();
        let total_w = 3.0 * MARGIN + 2.0 * pw;
        let total_h = 2.0 * MARGIN + self.height as f64 * CELL;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total_w}" height="{total_h}" viewBox="0 0 {total_w} {total_h}" font-family="sans-serif" font-size="8">"#
        );
        let _ = writeln!(
            s,
            r##"<defs><marker id="head" markerWidth="6" markerHeight="6" refX="5" refY="3" orient="auto"><path d="M0,0 L6,3 L0,6 z" fill="#555"/></marker></defs>"##
        );
        for (p, title) in ["original", "fine-tuned"].iter().enumerate() {
            let x0 = MARGIN + p as f64 * (pw + MARGIN);
            let _ = writeln!(s, r#"<text x="{x0}" y="{}" font-size="12">{title}</text>"#, MARGIN - 10.0);
            for r in 0..self.height {
                for c in 0..self.width {
                    let _ = writeln!(
                        s,
                        r##"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="none" stroke="#ddd"/>"##,
                        x0 + c as f64 * CELL,
                        MARGIN + r as f64 * CELL
                    );
                }
            }
        }
        for a in &self.arrows {
            let (x1, y1) = self.xy(1, a.from, 0);
            let (x2, y2) = self.xy(1, a.to, 0);
            let _ = writeln!(
                s,
                r##"<line x1="{x1:.1}" y1="{y1:.1}" x2="{x2:.1}" y2="{y2:.1}" stroke="#555" stroke-width="0.8" marker-end="url(#head)"><title>{}</title></line>"##,
                escape(a.entity.as_str())
            );
        }
        for (p, pts) in [&self.before, &self.after].into_iter().enumerate() {
            let mut seen: BTreeMap<Cell, usize> = BTreeMap::new();
            for pt in pts {
                let k = seen.entry(pt.cell).or_default();
                let (x, y) = self.xy(p, pt.cell, *k);
                *k += 1;
                let color = if pt.constant { "#c00" } else { "#036" };
                if pt.one_sided {
                    let _ = writeln!(
                        s,
                        r#"<path d="M{:.1},{:.1} l6,6 m0,-6 l-6,6" stroke="{color}" stroke-width="1.2"/>"#,
                        x - 3.0,
                        y - 3.0
                    );
                } else {
                    let r = if pt.constant { 3.5 } else { 2.0 };
                    let _ = writeln!(s, r#"<circle cx="{x:.1}" cy="{y:.1}" r="{r}" fill="{color}"/>"#);
                }
                let weight = if pt.constant { r#" font-weight="bold""# } else { "" };
                let _ = writeln!(
                    s,
                    r#"<text x="{:.1}" y="{:.1}" fill="{color}"{weight}>{}</text>"#,
                    x + 4.0,
                    y - 2.0,
                    escape(pt.entity.as_str())
                );
            }
        }
        s.push_str("</svg>\n");
        s
    }

    /// `entity,phase,row,col`, before rows first.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["entity", "phase", "row", "col"]).expect("in-memory write");
        for (phase, pts) in [("before", &self.before), ("after", &self.after)] {
            for p in pts {
                w.write_record([p.entity.as_str(), phase, &p.cell.0.to_string(), &p.cell.1.to_string()]).expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

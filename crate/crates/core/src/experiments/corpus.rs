use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::c64;
use crate::decomposition::{make_molecule, Molecule, MoleculeKind};
use crate::error::{Error, Result};
use crate::grid::{Cube, ScalarField};
use crate::operator::DiscreteOperator;
use crate::semigroup::{heat_apply, heat_power_apply, HeatMethod};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusKind {
    /// White noise smoothed by one heat step e^{−16h²L}.
    SmoothedGaussian,
    /// One to three heat molecules (ℓ²L)e^{−ℓ²L}b at random cubes.
    Bumps,
    /// Sums of dyadic-frequency cosines.
    Oscillation,
    /// The three kinds in rotation.
    Mixed,
    /// The constant field; only useful as a degenerate input.
    Constant,
}

impl std::str::FromStr for CorpusKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown corpus kind {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSpec {
    pub count: usize,
    pub seed: u64,
    pub kind: CorpusKind,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self { count: 20, seed: 1, kind: CorpusKind::Mixed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusField {
    pub id: usize,
    pub kind: CorpusKind,
    pub field: ScalarField,
}

/// Real, L²-normalized fields; mean zero on periodic grids. Field i uses
/// its own generator stream, so prefixes of a corpus agree.
pub fn generate_corpus(op: &DiscreteOperator, spec: &CorpusSpec) -> Result<Vec<CorpusField>> {
    if spec.count == 0 {
        return Err(Error::Config("empty corpus".into()));
    }
    (0..spec.count)
        .map(|id| {
            let kind = match spec.kind {
                CorpusKind::Mixed => [CorpusKind::SmoothedGaussian, CorpusKind::Bumps, CorpusKind::Oscillation][id % 3],
                k => k,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_mul(0x9E37_79B9).wrapping_add(id as u64));
            let raw = match kind {
                CorpusKind::SmoothedGaussian => smoothed_gaussian(op, &mut rng)?,
                CorpusKind::Bumps => bumps(op, &mut rng)?,
                CorpusKind::Constant => {
                    let one = ScalarField::constant(&op.grid, c64::new(1.0, 0.0));
                    let field = one.scale(c64::new(1.0 / one.norm_l2(), 0.0));
                    return Ok(CorpusField { id, kind, field });
                }
                _ => oscillation(op, &mut rng),
            };
            Ok(CorpusField { id, kind, field: normalize(op, raw) })
        })
        .collect()
}

fn normalize(op: &DiscreteOperator, f: ScalarField) -> ScalarField {
    let f = if op.kernel_dim > 0 { f.remove_mean() } else { f };
    let n = f.norm_l2();
    if n == 0.0 {
        f
    } else {
        f.scale(c64::new(1.0 / n, 0.0))
    }
}

fn smoothed_gaussian(op: &DiscreteOperator, rng: &mut ChaCha8Rng) -> Result<ScalarField> {
    let noise = ScalarField::from_fn(&op.grid, |_| c64::new(rng.sample(StandardNormal), 0.0));
    let h = op.grid.spacing();
    heat_apply(op, 16.0 * h * h, &normalize(op, noise), HeatMethod::Spectral)
}

fn bumps(op: &DiscreteOperator, rng: &mut ChaCha8Rng) -> Result<ScalarField> {
    let grid = &op.grid;
    let n = *grid.sizes().iter().min().unwrap_or(&8);
    let mut total = ScalarField::zeros(grid);
    for _ in 0..rng.random_range(1..=3) {
        let side = 1usize << rng.random_range(1..=(n / 8).max(2).ilog2());
        let corner = [
            rng.random_range(0..=grid.sizes()[0] - side),
            if grid.dim() == 2 { rng.random_range(0..=grid.sizes()[1] - side) } else { 0 },
        ];
        let cube = Cube::from_corner(corner, side);
        let mut seed = ScalarField::zeros(grid);
        for x in cube.nodes(grid) {
            seed.values[x] = c64::new(rng.sample(StandardNormal), 0.0);
        }
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let bump = heat_power_apply(op, cube.sidelength(grid), 1, &seed)?;
        total = total.add(&bump.scale(c64::new(sign / bump.norm_l2().max(f64::MIN_POSITIVE), 0.0)));
    }
    Ok(total)
}

fn oscillation(op: &DiscreteOperator, rng: &mut ChaCha8Rng) -> ScalarField {
    let grid = &op.grid;
    let n = *grid.sizes().iter().min().unwrap_or(&8);
    let top = (n / 4).ilog2().max(1);
    let terms: Vec<(u32, u32, f64, f64)> = (0..rng.random_range(2..=4))
        .map(|_| {
            let jx = rng.random_range(0..=top);
            let jy = if grid.dim() == 2 { rng.random_range(0..=top) } else { 0 };
            (jx, jy, rng.random_range(0.5..1.0), rng.random_range(0.0..2.0 * PI))
        })
        .collect();
    ScalarField::from_fn(grid, |x| {
        let [cx, cy] = grid.coordinates(x);
        let (lx, ly) = (grid.side(0), if grid.dim() == 2 { grid.side(1) } else { 1.0 });
        let mut v: f64 = terms
            .iter()
            .map(|&(jx, jy, a, phi)| {
                let fy = if grid.dim() == 2 { (2.0 * PI * (1u32 << jy) as f64 * cy / ly).cos() } else { 1.0 };
                a * (2.0 * PI * (1u32 << jx) as f64 * cx / lx + phi).cos() * fy
            })
            .sum();
        if !grid.is_periodic() {
            // vanish at the boundary
            v *= (PI * (cx + grid.spacing()) / (lx + grid.spacing())).sin();
            if grid.dim() == 2 {
                v *= (PI * (cy + grid.spacing()) / (ly + grid.spacing())).sin();
            }
        }
        c64::new(v, 0.0)
    })
}

/// Heat molecules of order `m` built from random complex seeds on cubes of
/// 2, 4 and 8 nodes per side (capped at half the grid), in rotation.
pub fn molecule_corpus(op: &DiscreteOperator, count: usize, seed: u64, m: u32) -> Result<Vec<Molecule>> {
    let g = &op.grid;
    let n = *g.sizes().iter().min().unwrap_or(&8);
    let sides: Vec<usize> = [2usize, 4, 8].into_iter().filter(|&s| 2 * s <= n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let side = sides[i % sides.len()];
            let mut corner = [rng.random_range(0..=g.sizes()[0] - side), 0];
            if g.dim() == 2 {
                corner[1] = rng.random_range(0..=g.sizes()[1] - side);
            }
            let cube = Cube::from_corner(corner, side);
            let mut seed_field = ScalarField::zeros(g);
            for x in cube.nodes(g) {
                seed_field.values[x] = c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            }
            let seed_field = seed_field.scale(c64::new(cube.volume(g).powf(-0.5) / seed_field.norm_l2(), 0.0));
            make_molecule(&seed_field, &cube, op, m, MoleculeKind::Heat, 2.0, 1.0)
        })
        .collect()
}

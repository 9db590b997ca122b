use serde::{Deserialize, Serialize};

use super::lsq::fit_sphere_algebraic;
use crate::error::{GraspError, Result};
use crate::geometry::{Aabb3, Point3, SphereModel, Vector3};

/// Minimum votes a peak needs to count as a detection.
pub const MIN_PEAK_VOTES: u32 = 4;

/// How a point spreads its votes over one radius bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Voting {
    /// Every centre cell the point's shell passes through gets one vote:
    /// the limit of ever more directions.
    Shell,
    /// One vote at `p + r d` for each of `directions` Fibonacci directions.
    Directions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoughConfig {
    pub center_bin: f64,
    pub radius_bin: f64,
    pub radius_bounds: [f64; 2],
    /// Vote directions per point and radius in [`Voting::Directions`] mode.
    pub directions: usize,
    pub voting: Voting,
    /// Shell mode only: a first pass with centre bins this many times coarser
    /// locates the peak, and the full-resolution pass is restricted to its
    /// neighbourhood. 1 disables the coarse pass.
    pub coarse_factor: usize,
    /// Upper limit on coarse cells refined at full resolution. The search is
    /// exact when it stops before the limit; otherwise the best peak found
    /// among the strongest coarse cells is returned.
    pub max_refinements: usize,
}

impl Default for HoughConfig {
    fn default() -> Self {
        Self {
            center_bin: 0.005,
            radius_bin: 0.005,
            radius_bounds: [0.01, 0.15],
            directions: 64,
            voting: Voting::Shell,
            coarse_factor: 4,
            max_refinements: 64,
        }
    }
}

impl HoughConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.radius_bounds;
        if !(self.center_bin > 0.0 && self.radius_bin > 0.0 && lo > 0.0 && lo <= hi)
            || self.directions == 0
            || self.coarse_factor == 0
            || self.max_refinements == 0
        {
            return Err(GraspError::InvalidArgument(format!("invalid hough config {self:?}")));
        }
        Ok(())
    }

    /// Radius bin values `lo, lo + w, ...` up to `hi`.
    pub fn radii(&self) -> Vec<f64> {
        let [lo, hi] = self.radius_bounds;
        let count = ((hi - lo) / self.radius_bin + 1e-9).floor() as usize + 1;
        (0..count).map(|k| lo + k as f64 * self.radius_bin).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoughFit {
    /// Sphere at the winning accumulator cell.
    pub peak: SphereModel,
    /// Least-squares refinement over the peak's supporting points.
    pub refined: SphereModel,
    pub peak_votes: u32,
    /// Votes cast over all passes.
    pub total_votes: u64,
}

/// Fibonacci-lattice directions, quasi-uniform on the unit sphere.
pub fn fibonacci_directions(n: usize) -> Vec<Vector3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let a = golden * i as f64;
            Vector3::new(rho * a.cos(), rho * a.sin(), z)
        })
        .collect()
}

/// Dense centre grid for one radius bin, stored with `k` fastest. Cell
/// `(i, j, k)` is lattice cell `lo + (i, j, k)`, spanning
/// `origin + [lo + i, lo + i + 1) * bin` on each axis. Coordinates always
/// derive from the shared `origin` so grids agree bit for bit.
struct Accumulator {
    origin: Point3,
    lo: [i64; 3],
    bin: f64,
    dims: [usize; 3],
}

impl Accumulator {
    fn len(&self) -> usize {
        self.dims.iter().product()
    }

    fn global(&self, idx: usize) -> [i64; 3] {
        let [_, ny, nz] = self.dims;
        let ijk = [idx / (ny * nz), (idx / nz) % ny, idx % nz];
        std::array::from_fn(|a| self.lo[a] + ijk[a] as i64)
    }

    #[cfg(test)]
    fn cell_center(&self, idx: usize) -> Point3 {
        let [_, ny, nz] = self.dims;
        let ijk = [idx / (ny * nz), (idx / nz) % ny, idx % nz];
        self.origin + Vector3::from_fn(|a, _| ((self.lo[a] + ijk[a] as i64) as f64 + 0.5) * self.bin)
    }

    fn vote_directions(&self, points: &[Point3], r: f64, dirs: &[Vector3], grid: &mut [u32]) -> u64 {
        let [_, ny, nz] = self.dims;
        for p in points {
            for d in dirs {
                let q = p + d * r;
                let ix: [usize; 3] = std::array::from_fn(|a| {
                    let c = ((q[a] - self.origin[a]) / self.bin).floor() as i64 - self.lo[a];
                    c.clamp(0, self.dims[a] as i64 - 1) as usize
                });
                grid[(ix[0] * ny + ix[1]) * nz + ix[2]] += 1;
            }
        }
        (points.len() * dirs.len()) as u64
    }

    /// Votes for every cell whose box meets some sphere `|q - p| = r` with
    /// `r` in `[r_lo, r_hi]`, i.e. the box's distance range from `p`
    /// overlaps the radius interval. With `r_lo == r_hi` this is the limit of
    /// casting ever more directions at that radius. Each column contributes
    /// at most two contiguous runs.
    fn vote_shells(&self, points: &[Point3], r_lo: f64, r_hi: f64, grid: &mut [u32]) -> u64 {
        let [nx, ny, nz] = self.dims;
        let w = self.bin;
        let (hi2, lo2) = (r_hi * r_hi, r_lo * r_lo);
        let clamp = |v: i64, n: usize| v.clamp(0, n as i64) as usize;
        // Distance range from `x` to the interval [a, a + w].
        let span = |a: f64, x: f64| {
            let (u, v) = (a - x, a + w - x);
            let near = if u > 0.0 { u } else if v < 0.0 { -v } else { 0.0 };
            (near, u.abs().max(v.abs()))
        };
        let to_cell = |x: f64, axis: usize| ((x - self.origin[axis]) / w).floor() as i64 - self.lo[axis];
        let edge = |i: usize, axis: usize| self.origin[axis] + (self.lo[axis] + i as i64) as f64 * w;
        let mut total = 0u64;
        for p in points {
            let i0 = clamp(to_cell(p.x - r_hi, 0), nx);
            let i1 = clamp(to_cell(p.x + r_hi, 0) + 1, nx);
            let j0 = clamp(to_cell(p.y - r_hi, 1), ny);
            let j1 = clamp(to_cell(p.y + r_hi, 1) + 1, ny);
            for i in i0..i1 {
                let (x_near, x_far) = span(edge(i, 0), p.x);
                for j in j0..j1 {
                    let (y_near, y_far) = span(edge(j, 1), p.y);
                    let near2 = x_near * x_near + y_near * y_near;
                    if near2 > hi2 {
                        continue;
                    }
                    // Cells whose nearest point is within r_hi.
                    let z_reach = (hi2 - near2).sqrt();
                    let k0 = clamp(to_cell(p.z - z_reach, 2), nz);
                    let k1 = clamp(to_cell(p.z + z_reach, 2) + 1, nz);
                    // Minus cells lying entirely inside the r_lo ball.
                    let far2 = x_far * x_far + y_far * y_far;
                    let (e0, e1) = if far2 < lo2 {
                        let z_in = (lo2 - far2).sqrt();
                        let first = to_cell(p.z - z_in, 2) + 1;
                        let last = ((p.z + z_in - self.origin.z) / w).ceil() as i64 - 1 - self.lo[2];
                        (clamp(first, nz).max(k0), clamp(last, nz).max(k0))
                    } else {
                        (k0, k0)
                    };
                    let row = (i * ny + j) * nz;
                    let (e0, e1) = (e0.min(k1), e1.min(k1));
                    for k in (k0..e0).chain(e1..k1) {
                        grid[row + k] += 1;
                    }
                    total += ((e0 - k0) + (k1 - e1)) as u64;
                }
            }
        }
        total
    }
}

#[derive(Debug, Clone, Copy)]
struct Peak {
    votes: u32,
    bin: usize,
    cell: [i64; 3],
    /// Truncated shell residual of the cell's sphere, set only on candidates.
    cost: f64,
}

impl Peak {
    /// More votes wins. Noiseless shells saturate a plateau of cells, so
    /// ties go to the lower residual, then the smaller radius and lower cell.
    fn beats(&self, other: &Option<Peak>) -> bool {
        other.is_none_or(|o| {
            self.votes > o.votes
                || (self.votes == o.votes
                    && (self.cost < o.cost
                        || (self.cost == o.cost && (self.bin, self.cell) < (o.bin, o.cell))))
        })
    }
}

/// One accumulation pass over `[r_lo, r_hi]` radius bins. Each radius gets
/// a grid covering the cloud padded by its reach, clipped to the inclusive
/// cell range `window`, on the lattice of size `bin` anchored at `origin`.
struct Pass<'a> {
    points: &'a [Point3],
    bounds: Aabb3,
    origin: Point3,
    bin: f64,
    window: Option<[[i64; 3]; 2]>,
}

impl Pass<'_> {
    fn grid_for(&self, reach: f64) -> Option<Accumulator> {
        let cell = |x: f64, a: usize| ((x - self.origin[a]) / self.bin).floor() as i64;
        let mut lo: [i64; 3] = std::array::from_fn(|a| cell(self.bounds.min[a] - reach, a));
        let mut hi: [i64; 3] = std::array::from_fn(|a| cell(self.bounds.max[a] + reach, a));
        if let Some([wlo, whi]) = self.window {
            lo = std::array::from_fn(|a| lo[a].max(wlo[a]));
            hi = std::array::from_fn(|a| hi[a].min(whi[a]));
        }
        if (0..3).any(|a| lo[a] > hi[a]) {
            return None;
        }
        Some(Accumulator {
            origin: self.origin,
            lo,
            bin: self.bin,
            dims: std::array::from_fn(|a| (hi[a] - lo[a] + 1) as usize),
        })
    }

    /// Calls `visit` with every cell's count, bin by bin in order.
    fn scan(
        &self,
        bins: &[(f64, f64)],
        dirs: Option<&[Vector3]>,
        total: &mut u64,
        mut visit: impl FnMut(Peak),
    ) {
        let mut grid = Vec::new();
        for (bin, &(r_lo, r_hi)) in bins.iter().enumerate() {
            let Some(acc) = self.grid_for(r_hi + self.bin) else {
                continue;
            };
            grid.clear();
            grid.resize(acc.len(), 0u32);
            *total += match dirs {
                Some(d) => acc.vote_directions(self.points, r_lo, d, &mut grid),
                None => acc.vote_shells(self.points, r_lo, r_hi, &mut grid),
            };
            for (idx, &votes) in grid.iter().enumerate() {
                if votes > 0 {
                    visit(Peak {
                        votes,
                        bin,
                        cell: acc.global(idx),
                        cost: 0.0,
                    });
                }
            }
        }
    }

    fn cell_center(&self, cell: [i64; 3]) -> Point3 {
        self.origin + Vector3::from_fn(|a, _| (cell[a] as f64 + 0.5) * self.bin)
    }

    /// Shell residual truncated at one bin, so points of other objects only
    /// add a constant.
    fn residual(&self, cell: [i64; 3], r: f64) -> f64 {
        let c = self.cell_center(cell);
        let cap = self.bin * self.bin;
        self.points.iter().map(|p| ((p - c).norm() - r).powi(2).min(cap)).sum()
    }

    fn best(&self, bins: &[(f64, f64)], dirs: Option<&[Vector3]>, total: &mut u64) -> Option<Peak> {
        let mut best: Option<Peak> = None;
        self.scan(bins, dirs, total, |p| {
            // Residuals are only needed to break ties at the top count.
            if best.is_none_or(|b| p.votes >= b.votes) {
                let p = Peak { cost: self.residual(p.cell, bins[p.bin].0), ..p };
                if p.beats(&best) {
                    best = Some(p);
                }
            }
        });
        best
    }
}

/// Sphere Hough transform over a (centre, radius) accumulator, followed by
/// a least-squares refit on the points within one bin of the peak sphere.
pub fn hough_fit_detailed(points: &[Point3], cfg: &HoughConfig) -> Result<HoughFit> {
    cfg.validate()?;
    if points.len() < 4 {
        return Err(GraspError::InsufficientPoints {
            needed: 4,
            got: points.len(),
        });
    }
    let bounds = Aabb3::enclosing(points).expect("non-empty");
    let radii = cfg.radii();
    let f = cfg.coarse_factor;
    // Shared lattice anchor: coarse cell `c` is exactly fine cells
    // `c * f .. c * f + f`, negative indices included.
    let origin = bounds.min;
    let exact: Vec<(f64, f64)> = radii.iter().map(|&r| (r, r)).collect();
    let fine = |window| Pass {
        points,
        bounds,
        origin,
        bin: cfg.center_bin,
        window,
    };
    let mut total_votes = 0;

    let peak = match cfg.voting {
        Voting::Directions => {
            let dirs = fibonacci_directions(cfg.directions);
            fine(None).best(&exact, Some(&dirs), &mut total_votes)
        }
        Voting::Shell if f == 1 => fine(None).best(&exact, None, &mut total_votes),
        Voting::Shell => {
            // A coarse cell meets every shell its fine cells meet, so its
            // count bounds theirs at the same radius. Refining coarse cells
            // best-first until the bound drops below the best fine count
            // gives exactly the single-pass peak.
            let coarse = Pass {
                bin: cfg.center_bin * f as f64,
                ..fine(None)
            };
            let mut candidates = Vec::new();
            coarse.scan(&exact, None, &mut total_votes, |p| {
                if p.votes >= MIN_PEAK_VOTES {
                    candidates.push(p);
                }
            });
            candidates.sort_by(|a, b| b.votes.cmp(&a.votes).then((a.bin, a.cell).cmp(&(b.bin, b.cell))));
            let mut best: Option<Peak> = None;
            for c in candidates.into_iter().take(cfg.max_refinements) {
                if best.is_some_and(|b| c.votes < b.votes) {
                    break;
                }
                let lo = c.cell.map(|x| x * f as i64);
                let window = [lo, lo.map(|x| x + f as i64 - 1)];
                if let Some(p) = fine(Some(window)).best(&exact[c.bin..=c.bin], None, &mut total_votes) {
                    let p = Peak { bin: c.bin, ..p };
                            if p.beats(&best) {
                        best = Some(p);
                    }
                }
            }
            best
        }
    };
    let Some(Peak {
        votes: peak_votes,
        bin,
        cell,
        ..
    }) = peak.filter(|p| p.votes >= MIN_PEAK_VOTES)
    else {
        return Err(GraspError::EmptyAccumulator {
            peak: peak.map_or(0, |p| p.votes),
            required: MIN_PEAK_VOTES,
        });
    };
    let center = origin + Vector3::from_fn(|a, _| (cell[a] as f64 + 0.5) * cfg.center_bin);
    let peak = SphereModel::new(center, radii[bin])?;
    let band = cfg.center_bin.max(cfg.radius_bin);
    let support: Vec<Point3> = points
        .iter()
        .filter(|p| peak.surface_distance(p).abs() <= band)
        .copied()
        .collect();
    let refined = match fit_sphere_algebraic(&support) {
        Ok(s) if s.radius >= cfg.radius_bounds[0] && s.radius <= cfg.radius_bounds[1] => s,
        _ => peak,
    };
    Ok(HoughFit {
        peak,
        refined,
        peak_votes,
        total_votes,
    })
}

pub fn hough_fit(points: &[Point3], cfg: &HoughConfig) -> Result<SphereModel> {
    hough_fit_detailed(points, cfg).map(|f| f.refined)
}

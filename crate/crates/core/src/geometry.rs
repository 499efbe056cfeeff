//! Hexagonal multi-cell layout, user drops, and large-scale fading.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::sysmodel::SystemConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn offset(self, dx: f64, dy: f64) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }
}

/// BS sites and user positions of one drop. `users[j][k]` is user `k` of cell `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub bs_positions: Vec<Point>,
    pub users: Vec<Vec<Point>>,
    pub cell_radius_m: f64,
}

/// True if `p` lies inside the flat-topped hexagon of circumradius `r`
/// centered at `center`.
pub fn inside_hexagon(p: Point, center: Point, r: f64) -> bool {
    let dx = (p.x - center.x).abs();
    let dy = (p.y - center.y).abs();
    let s3 = 3f64.sqrt();
    dy <= s3 / 2.0 * r && s3 * dx + dy <= s3 * r
}

/// Centers of `cells` contiguous flat-topped hexagons on a rhombic tiling.
///
/// Axial lattice vectors are `(1.5 R, sqrt(3)/2 R)` and `(0, sqrt(3) R)`, so
/// edge-sharing neighbours sit `sqrt(3) R` apart. Four cells form a 2x2 rhombus.
pub fn hex_centers(cells: usize, radius: f64) -> Vec<Point> {
    let side = (cells as f64).sqrt().ceil() as usize;
    let s3 = 3f64.sqrt();
    (0..cells)
        .map(|c| {
            let (q, r) = ((c % side) as f64, (c / side) as f64);
            Point::new(1.5 * radius * q, s3 / 2.0 * radius * q + s3 * radius * r)
        })
        .collect()
}

fn draw_user<R: Rng + ?Sized>(rng: &mut R, center: Point, radius: f64, exclusion: f64) -> Point {
    let half_h = 3f64.sqrt() / 2.0 * radius;
    loop {
        let p = center.offset(rng.random_range(-radius..=radius), rng.random_range(-half_h..=half_h));
        if inside_hexagon(p, center, radius) && p.dist(center) >= exclusion {
            return p;
        }
    }
}

/// Place BSs at hexagon centers and drop users uniformly in each cell,
/// outside the exclusion disc around the serving BS.
pub fn build_layout<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Placement {
    let bs_positions = hex_centers(cfg.num_cells, cfg.cell_radius_m);
    let users = bs_positions
        .iter()
        .map(|&c| {
            (0..cfg.users_per_cell)
                .map(|_| draw_user(rng, c, cfg.cell_radius_m, cfg.exclusion_radius_m))
                .collect()
        })
        .collect();
    Placement {
        bs_positions,
        users,
        cell_radius_m: cfg.cell_radius_m,
    }
}

impl Placement {
    pub fn num_cells(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn users_per_cell(&self) -> usize {
        self.users.first().map_or(0, Vec::len)
    }

    /// Write `x,y,cell,kind` rows for every BS and user.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "cell", "kind"])?;
        for (j, bs) in self.bs_positions.iter().enumerate() {
            w.write_record([bs.x.to_string(), bs.y.to_string(), j.to_string(), "bs".into()])?;
        }
        for (j, cell) in self.users.iter().enumerate() {
            for u in cell {
                w.write_record([u.x.to_string(), u.y.to_string(), j.to_string(), "user".into()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Large-scale power gains `beta[l][k][j]` between BS `l` and user `k` of cell `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaTensor {
    cells: usize,
    users: usize,
    data: Vec<f64>,
}

impl BetaTensor {
    pub fn from_fn(cells: usize, users: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(cells * users * cells);
        for l in 0..cells {
            for k in 0..users {
                for j in 0..cells {
                    data.push(f(l, k, j));
                }
            }
        }
        Self { cells, users, data }
    }

    pub fn filled(cells: usize, users: usize, value: f64) -> Self {
        Self::from_fn(cells, users, |_, _, _| value)
    }

    pub fn num_cells(&self) -> usize {
        self.cells
    }

    pub fn users_per_cell(&self) -> usize {
        self.users
    }

    #[inline]
    fn idx(&self, bs: usize, user: usize, cell: usize) -> usize {
        (bs * self.users + user) * self.cells + cell
    }

    #[inline]
    pub fn get(&self, bs: usize, user: usize, cell: usize) -> f64 {
        self.data[self.idx(bs, user, cell)]
    }

    pub fn set(&mut self, bs: usize, user: usize, cell: usize, value: f64) {
        let i = self.idx(bs, user, cell);
        self.data[i] = value;
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            data: self.data.iter().map(|b| b * c).collect(),
            ..self.clone()
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }
}

/// Path-loss reference distance: the exclusion radius, or 1 m when it is zero.
pub fn reference_distance(cfg: &SystemConfig) -> f64 {
    if cfg.exclusion_radius_m > 0.0 {
        cfg.exclusion_radius_m
    } else {
        1.0
    }
}

/// Log-normal shadowing draw in dB.
pub fn draw_shadowing_db<R: Rng + ?Sized>(rng: &mut R, sigma_db: f64) -> f64 {
    if sigma_db == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma_db).expect("finite sigma").sample(rng)
}

/// Deterministic part of the gain, `(d / d0)^-exponent`.
pub fn path_gain(distance: f64, reference: f64, exponent: f64) -> f64 {
    (distance / reference).powf(-exponent)
}

/// Path loss times independent per-link log-normal shadowing.
pub fn large_scale_coeffs<R: Rng + ?Sized>(
    placement: &Placement,
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<BetaTensor> {
    let cells = placement.num_cells();
    let users = placement.users_per_cell();
    let d0 = reference_distance(cfg);
    let mut beta = BetaTensor::filled(cells, users, 0.0);
    for l in 0..cells {
        for k in 0..users {
            for j in 0..cells {
                let d = placement.bs_positions[l].dist(placement.users[j][k]);
                if d == 0.0 {
                    return Err(Error::DegenerateDistance {
                        bs: l,
                        user: k,
                        cell: j,
                    });
                }
                let shadow_db = draw_shadowing_db(rng, cfg.shadowing_sigma_db);
                let b = 10f64.powf(shadow_db / 10.0) * path_gain(d, d0, cfg.pathloss_exponent);
                beta.set(l, k, j, b);
            }
        }
    }
    Ok(beta)
}

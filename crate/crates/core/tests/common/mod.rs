#![allow(dead_code)]

use delaunator::{triangulate, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splinekit::mesh::{orient, Point2, Triangulation};

/// Delaunay triangulation of a jittered `nx x ny` point lattice on the unit
/// square. Boundary points stay on the square's edges; interior points move
/// by up to `jitter` times the spacing.
pub fn jittered_delaunay(nx: usize, ny: usize, jitter: f64, seed: u64) -> Triangulation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (hx, hy) = (1.0 / (nx - 1) as f64, 1.0 / (ny - 1) as f64);
    let mut pts = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let mut x = i as f64 * hx;
            let mut y = j as f64 * hy;
            if i > 0 && i + 1 < nx {
                x += jitter * hx * rng.random_range(-1.0..1.0);
            }
            if j > 0 && j + 1 < ny {
                y += jitter * hy * rng.random_range(-1.0..1.0);
            }
            pts.push(Point2::new(x, y));
        }
    }
    let dp: Vec<Point> = pts.iter().map(|p| Point { x: p.x, y: p.y }).collect();
    let tris: Vec<[usize; 3]> = triangulate(&dp)
        .triangles
        .chunks(3)
        .map(|t| {
            if orient(pts[t[0]], pts[t[1]], pts[t[2]]) > 0.0 {
                [t[0], t[1], t[2]]
            } else {
                [t[0], t[2], t[1]]
            }
        })
        .filter(|t| orient(pts[t[0]], pts[t[1]], pts[t[2]]) > 1e-12)
        .collect();
    Triangulation::new(pts, tris).expect("delaunay mesh is valid")
}

/// Random polynomial of total degree `d` with coefficients in `[-1, 1]`.
pub struct Poly {
    pub d: usize,
    pub coef: Vec<((usize, usize), f64)>,
}

impl Poly {
    pub fn random(d: usize, rng: &mut impl Rng) -> Self {
        let mut coef = Vec::new();
        for i in 0..=d {
            for j in 0..=d - i {
                coef.push(((i, j), rng.random_range(-1.0..1.0)));
            }
        }
        Self { d, coef }
    }

    pub fn eval(&self, p: Point2) -> f64 {
        self.coef
            .iter()
            .map(|&((i, j), a)| a * p.x.powi(i as i32) * p.y.powi(j as i32))
            .sum()
    }
}

//! Reference surfaces: analytic shapes with exact normals and distances,
//! and triangle meshes.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use super::cloud::PointCloud;
use super::knn::KnnIndex;
use super::sampling::poisson_like_sample;
use super::vec3::{self, Vec3};
use crate::error::{Error, Result};

/// Candidates generated per requested sample before elimination.
pub const POISSON_OVERSAMPLING: usize = 8;

/// A closed-form surface or a triangle mesh.
#[derive(Clone, Debug, PartialEq)]
pub enum Surface {
    Sphere { center: Vec3, radius: f64 },
    /// Torus around the z axis.
    Torus { major: f64, minor: f64 },
    /// Height field `z = height * (x^2 - y^2)` over `[-extent, extent]^2`.
    Saddle { extent: f64, height: f64 },
    Mesh(TriangleMesh),
}

impl Surface {
    pub fn unit_sphere() -> Self {
        Surface::Sphere {
            center: [0.0; 3],
            radius: 1.0,
        }
    }

    /// Parses `name[:key=value,...]`, e.g. `sphere`, `torus:major=0.7,minor=0.3`,
    /// `saddle:extent=1,height=0.5`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (name, args) = spec.split_once(':').unwrap_or((spec, ""));
        let mut kv = Vec::new();
        for part in args.split(',').filter(|s| !s.trim().is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("bad surface argument '{part}'")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad number in '{part}'")))?;
            kv.push((k.trim().to_string(), v));
        }
        let get = |key: &str, default: f64| -> Result<f64> {
            let v = kv
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| *v)
                .unwrap_or(default);
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("surface parameter {key} must be positive")));
            }
            Ok(v)
        };
        let known: &[&str] = match name.trim() {
            "sphere" => &["radius"],
            "torus" => &["major", "minor"],
            "saddle" => &["extent", "height"],
            other => return Err(Error::Config(format!("unknown surface '{other}'"))),
        };
        if let Some((k, _)) = kv.iter().find(|(k, _)| !known.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown parameter '{k}' for {name}")));
        }
        Ok(match name.trim() {
            "sphere" => Surface::Sphere {
                center: [0.0; 3],
                radius: get("radius", 1.0)?,
            },
            "torus" => {
                let (major, minor) = (get("major", 0.7)?, get("minor", 0.3)?);
                if minor >= major {
                    return Err(Error::Config("torus needs minor < major".into()));
                }
                Surface::Torus { major, minor }
            }
            _ => Surface::Saddle {
                extent: get("extent", 1.0)?,
                height: get("height", 0.5)?,
            },
        })
    }

    /// `n` area-uniform random samples with exact normals.
    pub fn sample_uniform(&self, n: usize, rng: &mut ChaCha8Rng) -> PointCloud {
        let (pos, nrm): (Vec<Vec3>, Vec<Vec3>) = (0..n).map(|_| self.sample_one(rng)).unzip();
        PointCloud::with_normals(pos, nrm).expect("surface samples are finite with unit normals")
    }

    fn sample_one(&self, rng: &mut ChaCha8Rng) -> (Vec3, Vec3) {
        match self {
            Surface::Sphere { center, radius } => {
                let z: f64 = rng.gen_range(-1.0..=1.0);
                let phi: f64 = rng.gen_range(0.0..2.0 * PI);
                let s = (1.0 - z * z).max(0.0).sqrt();
                let n = [s * phi.cos(), s * phi.sin(), z];
                (vec3::add(*center, vec3::scale(n, *radius)), n)
            }
            Surface::Torus { major, minor } => loop {
                let theta: f64 = rng.gen_range(0.0..2.0 * PI);
                let accept = (major + minor * theta.cos()) / (major + minor);
                if rng.gen::<f64>() > accept {
                    continue;
                }
                let phi: f64 = rng.gen_range(0.0..2.0 * PI);
                let n = [theta.cos() * phi.cos(), theta.cos() * phi.sin(), theta.sin()];
                let ring = major + minor * theta.cos();
                break ([ring * phi.cos(), ring * phi.sin(), minor * theta.sin()], n);
            },
            Surface::Saddle { extent, height } => loop {
                let x: f64 = rng.gen_range(-extent..=*extent);
                let y: f64 = rng.gen_range(-extent..=*extent);
                let (gx, gy) = (2.0 * height * x, -2.0 * height * y);
                let density = (1.0 + gx * gx + gy * gy).sqrt();
                let max = (1.0 + 8.0 * height * height * extent * extent).sqrt();
                if rng.gen::<f64>() * max > density {
                    continue;
                }
                let n = vec3::normalized([-gx, -gy, 1.0], 0.0).expect("nonzero");
                break ([x, y, height * (x * x - y * y)], n);
            },
            Surface::Mesh(mesh) => mesh.sample_one(rng),
        }
    }

    /// Blue-noise samples: dense uniform candidates thinned by elimination.
    pub fn sample_poisson(&self, m: usize, seed: u64) -> Result<PointCloud> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dense = self.sample_uniform(m * POISSON_OVERSAMPLING, &mut rng);
        poisson_like_sample(&dense, m, seed.wrapping_add(1))
    }

    /// Unsigned distance from `p` to the surface.
    pub fn distance(&self, p: Vec3) -> f64 {
        match self {
            Surface::Sphere { center, radius } => (vec3::dist(p, *center) - radius).abs(),
            Surface::Torus { major, minor } => {
                let ring = (p[0] * p[0] + p[1] * p[1]).sqrt() - major;
                ((ring * ring + p[2] * p[2]).sqrt() - minor).abs()
            }
            Surface::Saddle { extent, height } => saddle_distance(p, *extent, *height),
            Surface::Mesh(mesh) => mesh.distance(p),
        }
    }

    /// Outward normal of the closest-point direction on analytic shapes.
    pub fn normal_at(&self, p: Vec3) -> Option<Vec3> {
        match self {
            Surface::Sphere { center, .. } => vec3::normalized(vec3::sub(p, *center), 1e-12),
            Surface::Torus { major, .. } => {
                let rho = (p[0] * p[0] + p[1] * p[1]).sqrt();
                if rho < 1e-12 {
                    return None;
                }
                let ring = [p[0] / rho * major, p[1] / rho * major, 0.0];
                vec3::normalized(vec3::sub(p, ring), 1e-12)
            }
            Surface::Saddle { height, .. } => {
                vec3::normalized([-2.0 * height * p[0], 2.0 * height * p[1], 1.0], 0.0)
            }
            Surface::Mesh(_) => None,
        }
    }
}

fn saddle_distance(p: Vec3, extent: f64, height: f64) -> f64 {
    let point = |x: f64, y: f64| [x, y, height * (x * x - y * y)];
    let f = |x: f64, y: f64| vec3::dist2(point(x, y), p);
    let clamp = |v: f64| v.clamp(-extent, extent);
    let mut best = f64::INFINITY;
    let starts = [
        (p[0], p[1]),
        (0.0, 0.0),
        (extent, extent),
        (extent, -extent),
        (-extent, extent),
        (-extent, -extent),
    ];
    for (sx, sy) in starts {
        let (mut x, mut y) = (clamp(sx), clamp(sy));
        for _ in 0..100 {
            // projected Newton on the squared distance
            let z = height * (x * x - y * y) - p[2];
            let (zx, zy) = (2.0 * height * x, -2.0 * height * y);
            let gx = 2.0 * ((x - p[0]) + z * zx);
            let gy = 2.0 * ((y - p[1]) + z * zy);
            let hxx = 2.0 * (1.0 + zx * zx + z * 2.0 * height);
            let hyy = 2.0 * (1.0 + zy * zy - z * 2.0 * height);
            let hxy = 2.0 * zx * zy;
            let det = hxx * hyy - hxy * hxy;
            let (dx, dy) = if det > 1e-12 && hxx > 0.0 {
                ((hyy * gx - hxy * gy) / det, (hxx * gy - hxy * gx) / det)
            } else {
                (0.1 * gx, 0.1 * gy)
            };
            let f0 = f(x, y);
            let mut step = 1.0;
            let mut moved = false;
            for _ in 0..30 {
                let (nx, ny) = (clamp(x - step * dx), clamp(y - step * dy));
                if f(nx, ny) <= f0 {
                    moved = (nx - x).abs() + (ny - y).abs() > 1e-15;
                    x = nx;
                    y = ny;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        best = best.min(f(x, y));
    }
    best.sqrt()
}

/// Indexed triangle mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    cumulative_area: Vec<f64>,
    centroids: Vec<Vec3>,
    /// Largest centroid-to-vertex distance over all faces.
    reach: f64,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if faces.is_empty() {
            return Err(Error::Contract("mesh has no faces".into()));
        }
        if faces.iter().flatten().any(|&i| i >= vertices.len()) {
            return Err(Error::Contract("face references a missing vertex".into()));
        }
        let mut total = 0.0;
        let mut cumulative_area = Vec::with_capacity(faces.len());
        let mut centroids = Vec::with_capacity(faces.len());
        let mut reach = 0.0f64;
        for f in &faces {
            let [a, b, c] = f.map(|i| vertices[i]);
            total += 0.5 * vec3::norm(vec3::cross(vec3::sub(b, a), vec3::sub(c, a)));
            cumulative_area.push(total);
            let g = vec3::scale(vec3::add(vec3::add(a, b), c), 1.0 / 3.0);
            reach = reach.max(vec3::dist(g, a)).max(vec3::dist(g, b)).max(vec3::dist(g, c));
            centroids.push(g);
        }
        if !(total > 0.0) {
            return Err(Error::Contract("mesh has zero area".into()));
        }
        Ok(Self {
            vertices,
            faces,
            cumulative_area,
            centroids,
            reach,
        })
    }

    /// Subdivided icosahedron projected onto the unit sphere, faces wound
    /// counter-clockwise seen from outside.
    pub fn icosphere(subdivisions: usize) -> Self {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut verts: Vec<Vec3> = vec![
            [-1.0, t, 0.0],
            [1.0, t, 0.0],
            [-1.0, -t, 0.0],
            [1.0, -t, 0.0],
            [0.0, -1.0, t],
            [0.0, 1.0, t],
            [0.0, -1.0, -t],
            [0.0, 1.0, -t],
            [t, 0.0, -1.0],
            [t, 0.0, 1.0],
            [-t, 0.0, -1.0],
            [-t, 0.0, 1.0],
        ];
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for v in verts.iter_mut() {
            *v = vec3::normalized(*v, 0.0).expect("nonzero");
        }
        for _ in 0..subdivisions {
            let mut cache = std::collections::HashMap::new();
            let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
                let key = (a.min(b), a.max(b));
                *cache.entry(key).or_insert_with(|| {
                    let m = vec3::scale(vec3::add(verts[a], verts[b]), 0.5);
                    verts.push(vec3::normalized(m, 0.0).expect("nonzero"));
                    verts.len() - 1
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for [a, b, c] in faces {
                let ab = midpoint(a, b, &mut verts);
                let bc = midpoint(b, c, &mut verts);
                let ca = midpoint(c, a, &mut verts);
                next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        Self::new(verts, faces).expect("valid icosphere")
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn area(&self) -> f64 {
        *self.cumulative_area.last().expect("nonempty")
    }

    fn triangle(&self, f: usize) -> [Vec3; 3] {
        self.faces[f].map(|i| self.vertices[i])
    }

    fn sample_one(&self, rng: &mut ChaCha8Rng) -> (Vec3, Vec3) {
        let target = rng.gen::<f64>() * self.area();
        let f = self
            .cumulative_area
            .partition_point(|&a| a < target)
            .min(self.faces.len() - 1);
        let [a, b, c] = self.triangle(f);
        let (mut r1, mut r2): (f64, f64) = (rng.gen(), rng.gen());
        if r1 + r2 > 1.0 {
            r1 = 1.0 - r1;
            r2 = 1.0 - r2;
        }
        let p = vec3::add(
            a,
            vec3::add(vec3::scale(vec3::sub(b, a), r1), vec3::scale(vec3::sub(c, a), r2)),
        );
        let n = vec3::normalized(vec3::cross(vec3::sub(b, a), vec3::sub(c, a)), 0.0)
            .unwrap_or([0.0, 0.0, 1.0]);
        (p, n)
    }

    /// Exact unsigned distance using a centroid tree: a face whose centroid
    /// is farther than `best + reach` cannot beat the current best.
    pub fn distance(&self, p: Vec3) -> f64 {
        // builds a fresh tree; prefer `distances` for batches
        self.distances(&[p])[0]
    }

    /// Exact distances for many query points sharing one centroid tree.
    pub fn distances(&self, queries: &[Vec3]) -> Vec<f64> {
        let tree = KnnIndex::build(&self.centroids);
        queries
            .iter()
            .map(|&p| {
                let seed = tree.knn(p, 8).expect("nonempty mesh");
                let mut best = seed
                    .iter()
                    .map(|&f| point_triangle_distance(p, self.triangle(f)))
                    .fold(f64::INFINITY, f64::min);
                let bound = best + self.reach;
                for (_, f) in tree.within(p, bound * bound) {
                    best = best.min(point_triangle_distance(p, self.triangle(f)));
                }
                best
            })
            .collect()
    }

    /// Reference distance by scanning every face.
    pub fn distance_brute_force(&self, p: Vec3) -> f64 {
        (0..self.faces.len())
            .map(|f| point_triangle_distance(p, self.triangle(f)))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Distance from `p` to a solid triangle (closest-point by Voronoi region).
pub fn point_triangle_distance(p: Vec3, [a, b, c]: [Vec3; 3]) -> f64 {
    use vec3::{dot, sub};
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(ab, ap);
    let d2 = dot(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return vec3::dist(p, a);
    }
    let bp = sub(p, b);
    let d3 = dot(ab, bp);
    let d4 = dot(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return vec3::dist(p, b);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return vec3::dist(p, vec3::add(a, vec3::scale(ab, v)));
    }
    let cp = sub(p, c);
    let d5 = dot(ab, cp);
    let d6 = dot(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return vec3::dist(p, c);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return vec3::dist(p, vec3::add(a, vec3::scale(ac, w)));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return vec3::dist(p, vec3::add(b, vec3::scale(sub(c, b), w)));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    vec3::dist(p, vec3::add(a, vec3::add(vec3::scale(ab, v), vec3::scale(ac, w))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_specs() {
        assert_eq!(Surface::parse("sphere").unwrap(), Surface::unit_sphere());
        assert_eq!(
            Surface::parse("torus:major=1,minor=0.25").unwrap(),
            Surface::Torus {
                major: 1.0,
                minor: 0.25
            }
        );
        assert!(matches!(Surface::parse("cube"), Err(Error::Config(_))));
        assert!(Surface::parse("sphere:radius=-1").is_err());
        assert!(Surface::parse("sphere:rad=2").is_err());
        assert!(Surface::parse("torus:major=0.2,minor=0.3").is_err());
    }

    #[test]
    fn samples_lie_on_their_surface() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for s in ["sphere", "torus", "saddle"] {
            let surf = Surface::parse(s).unwrap();
            let c = surf.sample_uniform(300, &mut rng);
            for (p, n) in c.positions().iter().zip(c.normals().unwrap()) {
                assert!(surf.distance(*p) < 1e-9, "{s}: {}", surf.distance(*p));
                let exact = surf.normal_at(*p).unwrap();
                assert!(vec3::dot(exact, *n).abs() > 1.0 - 1e-9, "{s} normal");
            }
        }
    }

    #[test]
    fn sphere_distance() {
        let s = Surface::unit_sphere();
        assert!((s.distance([1.1, 0.0, 0.0]) - 0.1).abs() < 1e-12);
        assert!((s.distance([0.0, 0.0, 0.5]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn saddle_distance_off_surface() {
        let s = Surface::parse("saddle:extent=1,height=0.5").unwrap();
        // above the saddle point along the normal
        assert!((s.distance([0.0, 0.0, 0.2]) - 0.2).abs() < 1e-9);
        let p = [0.3, -0.2, 0.5 * (0.09 - 0.04)];
        let n = s.normal_at(p).unwrap();
        let q = vec3::add(p, vec3::scale(n, 0.05));
        assert!((s.distance(q) - 0.05).abs() < 1e-9);
    }

    #[test]
    fn triangle_distance_regions() {
        let tri = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        assert!((point_triangle_distance([0.2, 0.2, 0.5], tri) - 0.5).abs() < 1e-15);
        assert!((point_triangle_distance([-1.0, 0.0, 0.0], tri) - 1.0).abs() < 1e-15);
        assert!((point_triangle_distance([0.5, -2.0, 0.0], tri) - 2.0).abs() < 1e-15);
        let d = point_triangle_distance([1.0, 1.0, 0.0], tri);
        assert!((d - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn icosphere_is_outward_wound() {
        let m = TriangleMesh::icosphere(2);
        for f in m.faces() {
            let [a, b, c] = f.map(|i| m.vertices()[i]);
            let n = vec3::cross(vec3::sub(b, a), vec3::sub(c, a));
            assert!(vec3::dot(n, a) > 0.0);
        }
        assert!((m.area() - 4.0 * PI).abs() < 0.3);
    }
}

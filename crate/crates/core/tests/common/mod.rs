//! Test-side helpers: random geometry instances and an exhaustive grid
//! oracle for joint approvability, independent of the library solvers.

#![allow(dead_code)]

use delib_core::engine::{pick_index, pick_real, rng};
use delib_core::Point;

/// Agents drawn from a cube of half-width `spread` around a random centre
/// in `[-offset, offset]ᵈ`. The status quo is the origin.
pub struct GeometryInstance {
    pub agents: Vec<Point>,
    pub status_quo: Point,
}

pub fn geometry_instance(seed: u64, max_agents: usize) -> GeometryInstance {
    let mut r = rng(seed ^ 0x5eed_0000);
    let d = 1 + pick_index(&mut r, 3);
    let n = 1 + pick_index(&mut r, max_agents);
    let offset = pick_real(&mut r, 0.0, 8.0);
    let spread = pick_real(&mut r, 0.5, 6.0);
    let centre: Vec<f64> = (0..d).map(|_| pick_real(&mut r, -offset, offset)).collect();
    let agents = (0..n)
        .map(|_| Point::new(centre.iter().map(|c| c + pick_real(&mut r, -spread, spread)).collect()))
        .collect();
    GeometryInstance { agents, status_quo: Point::origin(d) }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `max_v ρ(v, p) − ρ(v, r)`.
pub fn slack(agents: &[Point], r: &Point, p: &[f64]) -> f64 {
    agents
        .iter()
        .map(|v| dist(v.coords(), p) - dist(v.coords(), r.coords()))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest slack found by a dense grid over the agents' bounding box
/// (inflated by the largest approval radius), refined by repeatedly
/// zooming in around the best grid point.
pub fn grid_min_slack(agents: &[Point], r: &Point) -> (f64, Vec<f64>) {
    let d = r.dim();
    let radius = agents.iter().map(|v| dist(v.coords(), r.coords())).fold(0.0, f64::max);
    let mut lo: Vec<f64> = (0..d).map(|k| agents.iter().map(|v| v.coords()[k]).fold(f64::INFINITY, f64::min) - radius).collect();
    let mut hi: Vec<f64> = (0..d).map(|k| agents.iter().map(|v| v.coords()[k]).fold(f64::NEG_INFINITY, f64::max) + radius).collect();
    let per_axis: usize = match d {
        1 => 401,
        2 => 61,
        _ => 21,
    };
    let mut best = (slack(agents, r, r.coords()), r.coords().to_vec());
    for _ in 0..40 {
        let steps: Vec<f64> = (0..d).map(|k| (hi[k] - lo[k]) / (per_axis - 1) as f64).collect();
        let total = per_axis.pow(d as u32);
        for idx in 0..total {
            let mut rem = idx;
            let p: Vec<f64> = (0..d)
                .map(|k| {
                    let i = rem % per_axis;
                    rem /= per_axis;
                    lo[k] + steps[k] * i as f64
                })
                .collect();
            let f = slack(agents, r, &p);
            if f < best.0 {
                best = (f, p);
            }
        }
        for k in 0..d {
            lo[k] = best.1[k] - 2.0 * steps[k];
            hi[k] = best.1[k] + 2.0 * steps[k];
        }
    }
    best
}

//! Deterministic probe sets for the condition validators.

const PRIMES: [u32; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Radical inverse of `index` in base `base`.
pub fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % b) as f64;
        index /= b;
        f *= inv;
    }
    r
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSpec {
    pub radius: f64,
    pub count: usize,
    /// Radii for the far-field ray probes.
    pub ray_radii: Vec<f64>,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        Self {
            radius: 10.0,
            count: 4096,
            ray_radii: (1..=6).map(|k| 10f64.powi(k)).collect(),
        }
    }
}

/// Halton points in the cube [−radius, radius]^d, starting with the origin.
/// Returned flat, `count × d`.
pub fn halton_cube(d: usize, count: usize, radius: f64) -> Vec<f64> {
    assert!(d <= PRIMES.len(), "probe dimension too large");
    let mut out = Vec::with_capacity(count * d);
    if count == 0 {
        return out;
    }
    out.extend(std::iter::repeat_n(0.0, d));
    for n in 1..count as u64 {
        for &p in PRIMES.iter().take(d) {
            out.push(radius * (2.0 * radical_inverse(n, p) - 1.0));
        }
    }
    out
}

/// Halton points restricted to the closed ball of the given radius.
pub fn halton_ball(d: usize, count: usize, radius: f64) -> Vec<f64> {
    let cube = halton_cube(d, count, radius);
    cube.chunks(d)
        .filter(|p| p.iter().map(|v| v * v).sum::<f64>() <= radius * radius)
        .flatten()
        .copied()
        .collect()
}

/// Unit directions used for ray probes: ±e_i and ±(1,…,1)/√d.
pub fn ray_directions(d: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for i in 0..d {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; d];
            e[i] = s;
            dirs.push(e);
        }
    }
    if d > 1 {
        let c = 1.0 / (d as f64).sqrt();
        dirs.push(vec![c; d]);
        dirs.push(vec![-c; d]);
    }
    dirs
}

/// A ray: for each direction, the points at each radius in order.
pub fn ray_points(d: usize, radii: &[f64]) -> Vec<Vec<Vec<f64>>> {
    ray_directions(d)
        .into_iter()
        .map(|dir| {
            radii
                .iter()
                .map(|r| dir.iter().map(|v| v * r).collect())
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
    }

    #[test]
    fn cube_starts_at_origin_and_stays_inside() {
        let p = halton_cube(2, 100, 3.0);
        assert_eq!(&p[..2], &[0.0, 0.0]);
        assert!(p.iter().all(|v| v.abs() <= 3.0));
    }

    #[test]
    fn ball_points_inside() {
        let p = halton_ball(3, 500, 1.0);
        assert!(p.chunks(3).all(|q| q.iter().map(|v| v * v).sum::<f64>() <= 1.0));
        assert!(p.len() / 3 > 200);
    }
}

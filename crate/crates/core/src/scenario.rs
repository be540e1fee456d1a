//! UE drops and large-scale fading for a single square cell.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// Square cell `[0, side] × [0, side]` with the BS somewhere inside. The ULA
/// lies along the x axis, so broadside points along +y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    square_side: f64,
    min_distance: f64,
    bs_position: Point,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry { square_side: 500.0, min_distance: 15.0, bs_position: Point::new(250.0, 250.0) }
    }
}

impl Geometry {
    pub fn new(square_side: f64, min_distance: f64, bs_position: Point) -> Result<Self> {
        if !(square_side > 0.0 && square_side.is_finite()) {
            return Err(Error::InvalidGeometry(format!("square side {square_side} must be positive")));
        }
        if !(min_distance >= 0.0 && min_distance < square_side / 2.0) {
            return Err(Error::InvalidGeometry(format!(
                "minimum distance {min_distance} must lie in [0, {})",
                square_side / 2.0
            )));
        }
        if !(bs_position.x.is_finite() && bs_position.y.is_finite()) {
            return Err(Error::InvalidGeometry("BS position must be finite".into()));
        }
        Ok(Geometry { square_side, min_distance, bs_position })
    }

    /// Square of the given side with the BS at its center.
    pub fn centered(square_side: f64, min_distance: f64) -> Result<Self> {
        Geometry::new(square_side, min_distance, Point::new(square_side / 2.0, square_side / 2.0))
    }

    pub fn square_side(&self) -> f64 {
        self.square_side
    }

    pub fn min_distance(&self) -> f64 {
        self.min_distance
    }

    pub fn bs_position(&self) -> Point {
        self.bs_position
    }

    /// Lower bound on the probability that a uniform point in the square lies
    /// outside the exclusion disk.
    pub fn acceptance_lower_bound(&self) -> f64 {
        let excluded = std::f64::consts::PI * self.min_distance * self.min_distance;
        (1.0 - excluded / (self.square_side * self.square_side)).max(0.0)
    }
}

/// Parameters of the large-scale fading and cluster model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropModel {
    pub geometry: Geometry,
    pub shadow_std_db: f64,
    pub n_clusters: usize,
    /// Half width of the uniform cluster-angle window around the nominal angle.
    pub cluster_half_width: f64,
}

impl Default for DropModel {
    fn default() -> Self {
        DropModel {
            geometry: Geometry::default(),
            shadow_std_db: 7.0,
            n_clusters: 6,
            cluster_half_width: 40f64.to_radians(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UeDrop {
    pub position: Point,
    pub distance: f64,
    /// Azimuth from array broadside, radians.
    pub nominal_angle: f64,
    pub shadow_db: f64,
    /// Linear large-scale fading gain.
    pub beta: f64,
    pub cluster_angles: Vec<f64>,
}

pub fn pathloss_db(distance: f64, shadow_db: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::NonPositiveDistance(distance));
    }
    Ok(-35.3 - 37.6 * distance.log10() + shadow_db)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// `n` i.i.d. angles uniform on `[phi - 40°, phi + 40°]`.
pub fn draw_cluster_angles<R: Rng + ?Sized>(phi: f64, n: usize, rng: &mut R) -> Vec<f64> {
    draw_cluster_angles_within(phi, n, 40f64.to_radians(), rng)
}

pub fn draw_cluster_angles_within<R: Rng + ?Sized>(phi: f64, n: usize, half_width: f64, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| phi + half_width * (2.0 * rng.random::<f64>() - 1.0)).collect()
}

/// Uniform point in the square at least `min_distance` from the BS.
fn draw_position<R: Rng + ?Sized>(geometry: &Geometry, rng: &mut R) -> Point {
    loop {
        let p = Point::new(rng.random::<f64>() * geometry.square_side, rng.random::<f64>() * geometry.square_side);
        let dx = p.x - geometry.bs_position.x;
        let dy = p.y - geometry.bs_position.y;
        let d = dx.hypot(dy);
        if d >= geometry.min_distance && d > 0.0 {
            return p;
        }
    }
}

/// Drop `k` UEs independently and uniformly over the cell.
///
/// Draw order per UE is position, shadowing, then cluster angles, so the first
/// `k` UEs of a larger drop from the same stream coincide with a `k`-UE drop.
pub fn drop_ues<R: Rng + ?Sized>(k: usize, model: &DropModel, rng: &mut R) -> Result<Vec<UeDrop>> {
    if k == 0 {
        return Err(Error::InvalidParameter("at least one UE is required".into()));
    }
    let acceptance = model.geometry.acceptance_lower_bound();
    if acceptance < 1e-3 {
        return Err(Error::GeometryInfeasible(acceptance));
    }
    let shadow = Normal::new(0.0, model.shadow_std_db)
        .map_err(|e| Error::InvalidParameter(format!("shadow fading std: {e}")))?;
    let bs = model.geometry.bs_position;
    let mut drops = Vec::with_capacity(k);
    for _ in 0..k {
        let position = draw_position(&model.geometry, rng);
        let dx = position.x - bs.x;
        let dy = position.y - bs.y;
        let distance = dx.hypot(dy);
        let nominal_angle = dx.atan2(dy);
        let shadow_db = shadow.sample(rng);
        let beta = db_to_linear(pathloss_db(distance, shadow_db)?);
        let cluster_angles = draw_cluster_angles_within(nominal_angle, model.n_clusters, model.cluster_half_width, rng);
        drops.push(UeDrop { position, distance, nominal_angle, shadow_db, beta, cluster_angles });
    }
    Ok(drops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn default_drop_distances_in_range() {
        let mut rng = stream(1, &[]);
        let drops = drop_ues(10, &DropModel::default(), &mut rng).unwrap();
        assert_eq!(drops.len(), 10);
        for d in &drops {
            assert!(d.distance >= 15.0 && d.distance <= 250.0 * 2f64.sqrt());
            assert!(d.beta > 0.0);
            assert_eq!(d.cluster_angles.len(), 6);
        }
    }

    #[test]
    fn centered_square_has_centered_mean() {
        let model = DropModel { geometry: Geometry::centered(500.0, 0.0).unwrap(), ..DropModel::default() };
        let mut rng = stream(2, &[]);
        let n = 100_000;
        let drops = drop_ues(n, &model, &mut rng).unwrap();
        let mx = drops.iter().map(|d| d.position.x).sum::<f64>() / n as f64;
        let my = drops.iter().map(|d| d.position.y).sum::<f64>() / n as f64;
        // std of the mean: 500/sqrt(12)/sqrt(n) ≈ 0.46 m
        assert!((mx - 250.0).abs() < 2.5 && (my - 250.0).abs() < 2.5, "{mx} {my}");
    }

    #[test]
    fn positions_follow_uniform_law() {
        let mut rng = stream(3, &[]);
        let n = 100_000;
        let drops = drop_ues(n, &DropModel::default(), &mut rng).unwrap();
        for coord in [0, 1] {
            let mut v: Vec<f64> = drops
                .iter()
                .map(|d| if coord == 0 { d.position.x } else { d.position.y } / 500.0)
                .collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let ks = v
                .iter()
                .enumerate()
                .map(|(i, &x)| ((i + 1) as f64 / n as f64 - x).abs().max((x - i as f64 / n as f64).abs()))
                .fold(0.0, f64::max);
            assert!(ks < 0.01, "KS statistic {ks}");
        }
    }

    #[test]
    fn pathloss_values() {
        assert!((pathloss_db(1.0, 0.0).unwrap() + 35.3).abs() < 1e-12);
        assert!((pathloss_db(100.0, 0.0).unwrap() + 110.5).abs() < 1e-12);
        assert!((pathloss_db(100.0, 3.0).unwrap() + 107.5).abs() < 1e-12);
        assert_eq!(pathloss_db(0.0, 0.0), Err(Error::NonPositiveDistance(0.0)));
        assert_eq!(pathloss_db(-1.0, 0.0), Err(Error::NonPositiveDistance(-1.0)));
    }

    #[test]
    fn shadow_fading_std() {
        let mut rng = stream(4, &[]);
        let drops = drop_ues(100_000, &DropModel::default(), &mut rng).unwrap();
        let n = drops.len() as f64;
        let mean = drops.iter().map(|d| d.shadow_db).sum::<f64>() / n;
        let var = drops.iter().map(|d| (d.shadow_db - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var.sqrt() - 7.0).abs() < 0.1, "{}", var.sqrt());
    }

    #[test]
    fn cluster_angles_window() {
        let mut rng = stream(5, &[]);
        let phi = 0.3;
        let angles = draw_cluster_angles(phi, 1_000_000, &mut rng);
        assert!(angles.iter().all(|a| (a - phi).abs() <= 40f64.to_radians()));
        let mean = angles.iter().sum::<f64>() / angles.len() as f64;
        assert!((mean - phi).abs() < 1e-3, "{mean}");
        assert_eq!(draw_cluster_angles_within(phi, 1, 0.0, &mut rng), vec![phi]);
    }

    #[test]
    fn invalid_geometry_rejected() {
        assert!(Geometry::centered(0.0, 0.0).is_err());
        assert!(Geometry::centered(100.0, 50.0).is_err());
        assert!(drop_ues(0, &DropModel::default(), &mut stream(0, &[])).is_err());
    }

    #[test]
    fn replay_is_bit_identical() {
        let a = drop_ues(10, &DropModel::default(), &mut stream(42, &[7])).unwrap();
        let b = drop_ues(10, &DropModel::default(), &mut stream(42, &[7])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn beta_decreases_with_distance() {
        let mut last = f64::INFINITY;
        for d in [15.0, 20.0, 50.0, 100.0, 300.0] {
            let b = db_to_linear(pathloss_db(d, 2.5).unwrap());
            assert!(b < last);
            last = b;
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]
            #[test]
            fn drops_satisfy_invariants(seed in any::<u64>()) {
                let model = DropModel::default();
                let drops = drop_ues(3, &model, &mut stream(seed, &[])).unwrap();
                for d in drops {
                    prop_assert!(d.distance >= 15.0);
                    prop_assert!(d.beta > 0.0 && d.beta.is_finite());
                    for a in &d.cluster_angles {
                        prop_assert!((a - d.nominal_angle).abs() <= 40f64.to_radians() + 1e-12);
                    }
                }
            }
        }
    }
}

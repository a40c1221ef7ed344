//! Rigid-body math over column vectors.
//!
//! Rotation matrices act as `y = R * x` and compose by left multiplication:
//! `a.compose(&b)` applies `b` first, then `a`. A [`Pose`] rotates about a
//! stored center rather than the origin, which keeps 1° steps local to the
//! ligand instead of sweeping it around the global frame.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("point sets have different lengths ({mobile} vs {fixed})")]
    LengthMismatch { mobile: usize, fixed: usize },
    #[error("superposition needs at least 3 points, got {0}")]
    TooFewPoints(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist(self, o: Vec3) -> f64 {
        (self - o).norm()
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl std::ops::Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl std::ops::Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Mean of a non-empty point set.
pub fn centroid(points: &[Vec3]) -> Vec3 {
    let mut c = Vec3::ZERO;
    for p in points {
        c = c + *p;
    }
    c * (1.0 / points.len() as f64)
}

/// Largest distance from the centroid to any point.
pub fn bounding_radius(points: &[Vec3]) -> f64 {
    let c = centroid(points);
    points.iter().map(|p| p.dist(c)).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn unit(self) -> Vec3 {
        match self {
            Axis::X => Vec3::new(1.0, 0.0, 0.0),
            Axis::Y => Vec3::new(0.0, 1.0, 0.0),
            Axis::Z => Vec3::new(0.0, 0.0, 1.0),
        }
    }
}

/// Row-major 3x3 matrix: `self.0[row][col]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn mul(&self, o: &Mat3) -> Mat3 {
        let mut r = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                r[i][j] = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        Mat3(r)
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Rotation about a principal axis, right-handed, angle in radians.
    pub fn rotation_about(axis: Axis, radians: f64) -> Mat3 {
        let (s, c) = radians.sin_cos();
        match axis {
            Axis::X => Mat3([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]),
            Axis::Y => Mat3([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]),
            Axis::Z => Mat3([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]),
        }
    }

    /// Unit quaternion (w, x, y, z) to rotation matrix.
    pub fn from_quat(q: [f64; 4]) -> Mat3 {
        let [w, x, y, z] = q;
        Mat3([
            [
                w * w + x * x - y * y - z * z,
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                w * w - x * x + y * y - z * z,
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                w * w - x * x - y * y + z * z,
            ],
        ])
    }

    /// True when `R Rᵀ = I` and `det R = +1` within `tol`.
    pub fn is_rotation(&self, tol: f64) -> bool {
        let rrt = self.mul(&self.transpose());
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                if (rrt.0[i][j] - want).abs() > tol {
                    return false;
                }
            }
        }
        (self.det() - 1.0).abs() <= tol
    }
}

/// Proper rigid motion `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform = RigidTransform {
        rotation: Mat3::IDENTITY,
        translation: Vec3::ZERO,
    };

    pub fn rotation(axis: Axis, radians: f64) -> RigidTransform {
        RigidTransform {
            rotation: Mat3::rotation_about(axis, radians),
            translation: Vec3::ZERO,
        }
    }

    pub fn translation(t: Vec3) -> RigidTransform {
        RigidTransform { rotation: Mat3::IDENTITY, translation: t }
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.rotation.mul_vec(p) + self.translation
    }

    /// `self ∘ inner`: apply `inner` first, then `self`.
    pub fn compose(&self, inner: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation.mul(&inner.rotation),
            translation: self.rotation.mul_vec(inner.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -rt.mul_vec(self.translation),
        }
    }
}

/// Rigid motion expressed about a fixed rotation center:
/// `p -> R (p - c) + c + t`.
///
/// The center is captured once (at episode start, the initial ligand
/// centroid) and never moves with the ligand afterwards, so the action set
/// stays a fixed generator set over the whole episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub transform: RigidTransform,
    pub rotation_center: Vec3,
}

impl Pose {
    pub fn identity(center: Vec3) -> Pose {
        Pose { transform: RigidTransform::IDENTITY, rotation_center: center }
    }

    /// Parameters `(tx, ty, tz, rx, ry, rz)`: translations in Å, rotation
    /// angles in radians applied about the fixed x, then y, then z axes
    /// through `center` (`R = Rz Ry Rx`).
    pub fn from_params(params: [f64; 6], center: Vec3) -> Pose {
        let [tx, ty, tz, rx, ry, rz] = params;
        let rot = Mat3::rotation_about(Axis::Z, rz)
            .mul(&Mat3::rotation_about(Axis::Y, ry))
            .mul(&Mat3::rotation_about(Axis::X, rx));
        Pose {
            transform: RigidTransform { rotation: rot, translation: Vec3::new(tx, ty, tz) },
            rotation_center: center,
        }
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        let c = self.rotation_center;
        self.transform.rotation.mul_vec(p - c) + c + self.transform.translation
    }

    pub fn apply_all(&self, points: &[Vec3]) -> Vec<Vec3> {
        points.iter().map(|p| self.apply(*p)).collect()
    }

    /// Apply one more motion about the same center after this pose.
    pub fn then(&self, step: &RigidTransform) -> Pose {
        Pose {
            transform: step.compose(&self.transform),
            rotation_center: self.rotation_center,
        }
    }

    /// Recover `(tx, ty, tz, rx, ry, rz)` such that
    /// `Pose::from_params(params, self.rotation_center)` reproduces this pose.
    /// Uses the standard `R = Rz Ry Rx` branch with `ry` in [-pi/2, pi/2];
    /// exact away from the gimbal singularity `|cos ry| = 0`, where the split
    /// between rx and rz is chosen arbitrarily (the composite R still matches).
    pub fn params(&self) -> [f64; 6] {
        let r = &self.transform.rotation.0;
        let t = self.transform.translation;
        let sy = (-r[2][0]).clamp(-1.0, 1.0);
        let ry = sy.asin();
        let cy = (1.0 - sy * sy).sqrt();
        let (rx, rz) = if cy > 1e-9 {
            (r[2][1].atan2(r[2][2]), r[1][0].atan2(r[0][0]))
        } else {
            // cos(ry) ~ 0: only rx -+ rz is determined; fold it all into rx.
            ((sy * r[0][1]).atan2(r[1][1]), 0.0)
        };
        [t.x, t.y, t.z, rx, ry, rz]
    }
}

/// Result of an optimal superposition: `transform` maps the mobile set onto
/// the fixed set, `rmsd` is the minimized root-mean-square deviation.
#[derive(Debug, Clone, Copy)]
pub struct Superposition {
    pub transform: RigidTransform,
    pub rmsd: f64,
}

/// Least-squares rigid superposition of `mobile` onto `fixed`.
///
/// Built on the cross-covariance of the centered sets; the rotation is read
/// off the dominant eigenvector of the associated symmetric 4x4 quaternion
/// matrix, which only ever yields proper rotations (det = +1), so reflections
/// are excluded by construction even for planar inputs.
pub fn kabsch_superpose(mobile: &[Vec3], fixed: &[Vec3]) -> Result<Superposition, GeometryError> {
    if mobile.len() != fixed.len() {
        return Err(GeometryError::LengthMismatch { mobile: mobile.len(), fixed: fixed.len() });
    }
    if mobile.len() < 3 {
        return Err(GeometryError::TooFewPoints(mobile.len()));
    }
    let mc = centroid(mobile);
    let fc = centroid(fixed);

    // Cross-covariance h[a][b] = sum over points of m_a * f_b (centered).
    let mut h = [[0.0f64; 3]; 3];
    for (m, f) in mobile.iter().zip(fixed) {
        let m = *m - mc;
        let f = *f - fc;
        let ma = [m.x, m.y, m.z];
        let fa = [f.x, f.y, f.z];
        for a in 0..3 {
            for b in 0..3 {
                h[a][b] += ma[a] * fa[b];
            }
        }
    }

    let (sxx, sxy, sxz) = (h[0][0], h[0][1], h[0][2]);
    let (syx, syy, syz) = (h[1][0], h[1][1], h[1][2]);
    let (szx, szy, szz) = (h[2][0], h[2][1], h[2][2]);
    let k = [
        [sxx + syy + szz, syz - szy, szx - sxz, sxy - syx],
        [syz - szy, sxx - syy - szz, sxy + syx, szx + sxz],
        [szx - sxz, sxy + syx, syy - sxx - szz, syz + szy],
        [sxy - syx, szx + sxz, syz + szy, szz - sxx - syy],
    ];

    let q = dominant_eigenvector_sym4(k);
    let rotation = Mat3::from_quat(q);
    let translation = fc - rotation.mul_vec(mc);
    let transform = RigidTransform { rotation, translation };

    let mut ss = 0.0;
    for (m, f) in mobile.iter().zip(fixed) {
        ss += transform.apply(*m).dist(*f).powi(2);
    }
    let rmsd = (ss / mobile.len() as f64).sqrt();
    Ok(Superposition { transform, rmsd })
}

/// Unit eigenvector for the largest eigenvalue of a symmetric 4x4 matrix,
/// by classical Jacobi rotations (largest off-diagonal pivot each step).
fn dominant_eigenvector_sym4(mut a: [[f64; 4]; 4]) -> [f64; 4] {
    let mut v = [[0.0f64; 4]; 4];
    for i in 0..4 {
        v[i][i] = 1.0;
    }
    for _ in 0..200 {
        let (mut p, mut q, mut off) = (0, 1, 0.0f64);
        for i in 0..4 {
            for j in (i + 1)..4 {
                if a[i][j].abs() > off {
                    off = a[i][j].abs();
                    p = i;
                    q = j;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
        let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
        let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
        let c = 1.0 / (t * t + 1.0).sqrt();
        let s = t * c;
        for i in 0..4 {
            let (aip, aiq) = (a[i][p], a[i][q]);
            a[i][p] = c * aip - s * aiq;
            a[i][q] = s * aip + c * aiq;
        }
        for j in 0..4 {
            let (apj, aqj) = (a[p][j], a[q][j]);
            a[p][j] = c * apj - s * aqj;
            a[q][j] = s * apj + c * aqj;
        }
        for i in 0..4 {
            let (vip, viq) = (v[i][p], v[i][q]);
            v[i][p] = c * vip - s * viq;
            v[i][q] = s * vip + c * viq;
        }
    }
    let mut best = 0;
    for i in 1..4 {
        if a[i][i] > a[best][best] {
            best = i;
        }
    }
    let mut q = [v[0][best], v[1][best], v[2][best], v[3][best]];
    let n = (q.iter().map(|x| x * x).sum::<f64>()).sqrt();
    for x in &mut q {
        *x /= n;
    }
    q
}

/// RMSD between two equal-length point sets with no superposition.
pub fn raw_rmsd(a: &[Vec3], b: &[Vec3]) -> f64 {
    let ss: f64 = a.iter().zip(b).map(|(p, q)| p.dist(*q).powi(2)).sum();
    (ss / a.len() as f64).sqrt()
}

#[cfg(test)]
pub(crate) mod test_oracles {
    use super::*;

    /// Best superposed RMSD by scanning rotations on an Euler-angle grid,
    /// refined to 0.5 degree resolution. Translation is closed-form (centroid
    /// match) for any fixed rotation, so only rotations are searched.
    pub fn grid_search_rmsd(mobile: &[Vec3], fixed: &[Vec3]) -> f64 {
        let mc = centroid(mobile);
        let fc = centroid(fixed);
        let cm: Vec<Vec3> = mobile.iter().map(|p| *p - mc).collect();
        let cf: Vec<Vec3> = fixed.iter().map(|p| *p - fc).collect();

        let eval = |ax: f64, ay: f64, az: f64| -> f64 {
            let r = Mat3::rotation_about(Axis::Z, az)
                .mul(&Mat3::rotation_about(Axis::Y, ay))
                .mul(&Mat3::rotation_about(Axis::X, ax));
            let ss: f64 = cm
                .iter()
                .zip(&cf)
                .map(|(m, f)| (r.mul_vec(*m) - *f).norm_sq())
                .sum();
            (ss / cm.len() as f64).sqrt()
        };

        let deg = std::f64::consts::PI / 180.0;
        let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
        let coarse = 6.0 * deg;
        let mut ax = -std::f64::consts::PI;
        while ax < std::f64::consts::PI {
            let mut ay = -std::f64::consts::FRAC_PI_2;
            while ay <= std::f64::consts::FRAC_PI_2 {
                let mut az = -std::f64::consts::PI;
                while az < std::f64::consts::PI {
                    let r = eval(ax, ay, az);
                    if r < best.0 {
                        best = (r, ax, ay, az);
                    }
                    az += coarse;
                }
                ay += coarse;
            }
            ax += coarse;
        }
        let fine = 0.5 * deg;
        let (_, bx, by, bz) = best;
        let mut ax = bx - coarse;
        while ax <= bx + coarse {
            let mut ay = by - coarse;
            while ay <= by + coarse {
                let mut az = bz - coarse;
                while az <= bz + coarse {
                    let r = eval(ax, ay, az);
                    if r < best.0 {
                        best = (r, ax, ay, az);
                    }
                    az += fine;
                }
                ay += fine;
            }
            ax += fine;
        }
        best.0
    }
}

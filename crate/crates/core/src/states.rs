//! State space, constraint-set atoms and constitutive maps.
//!
//! A state is z = (b, w, v, M, q): tracer value, tracer flux, velocity,
//! traceless symmetric stress and modified pressure. Tracelessness of M
//! is structural — only (M11, M12) are stored and M22 = -M11 is derived.
//!
//! Hull computations use one canonical coordinate chart throughout the
//! crate: the flattening order (b, w1, w2, v1, v2, M11, M12), with q
//! carried alongside but excluded from the 7-dimensional geometry.

use nalgebra::{SMatrix, SVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Traceless symmetric 2x2 matrix, stored as two degrees of freedom.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Traceless2 {
    pub m11: f64,
    pub m12: f64,
}

impl Traceless2 {
    pub const ZERO: Traceless2 = Traceless2 { m11: 0.0, m12: 0.0 };

    pub fn new(m11: f64, m12: f64) -> Self {
        Traceless2 { m11, m12 }
    }

    /// Project a general 2x2 matrix onto its traceless symmetric part.
    pub fn from_full(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Traceless2 { m11: 0.5 * (a11 - a22), m12: 0.5 * (a12 + a21) }
    }

    pub fn m22(&self) -> f64 {
        -self.m11
    }

    pub fn frobenius_norm(&self) -> f64 {
        (2.0 * (self.m11 * self.m11 + self.m12 * self.m12)).sqrt()
    }

    pub fn add(&self, other: &Self) -> Self {
        Traceless2 { m11: self.m11 + other.m11, m12: self.m12 + other.m12 }
    }

    pub fn scale(&self, c: f64) -> Self {
        Traceless2 { m11: c * self.m11, m12: c * self.m12 }
    }
}

/// One point of the state space.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StateZ {
    pub b: f64,
    pub w: Vector2<f64>,
    pub v: Vector2<f64>,
    pub m: Traceless2,
    pub q: f64,
}

impl StateZ {
    pub const ZERO: StateZ = StateZ {
        b: 0.0,
        w: Vector2::new(0.0, 0.0),
        v: Vector2::new(0.0, 0.0),
        m: Traceless2::ZERO,
        q: 0.0,
    };

    pub fn is_finite(&self) -> bool {
        self.b.is_finite()
            && self.w.iter().all(|x| x.is_finite())
            && self.v.iter().all(|x| x.is_finite())
            && self.m.m11.is_finite()
            && self.m.m12.is_finite()
            && self.q.is_finite()
    }

    /// Canonical 7-vector chart (b, w1, w2, v1, v2, M11, M12).
    pub fn to_vec7(&self) -> SVector<f64, 7> {
        SVector::<f64, 7>::from([
            self.b, self.w.x, self.w.y, self.v.x, self.v.y, self.m.m11, self.m.m12,
        ])
    }

    pub fn from_vec7(c: &SVector<f64, 7>, q: f64) -> Self {
        StateZ {
            b: c[0],
            w: Vector2::new(c[1], c[2]),
            v: Vector2::new(c[3], c[4]),
            m: Traceless2::new(c[5], c[6]),
            q,
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        StateZ {
            b: self.b + o.b,
            w: self.w + o.w,
            v: self.v + o.v,
            m: self.m.add(&o.m),
            q: self.q + o.q,
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(-1.0))
    }

    pub fn scale(&self, c: f64) -> Self {
        StateZ { b: c * self.b, w: c * self.w, v: c * self.v, m: self.m.scale(c), q: c * self.q }
    }

    /// Euclidean norm of all eight stored components.
    pub fn norm(&self) -> f64 {
        (self.to_vec7().norm_squared() + self.q * self.q).sqrt()
    }
}

/// Assembled 4x3 matrix: top-left block M + qI, velocity in row/column 3
/// with a forced zero corner, and (w, b) as the fourth row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatrixV(pub SMatrix<f64, 4, 3>);

impl MatrixV {
    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn apply(&self, xi: &Vector3<f64>) -> SVector<f64, 4> {
        self.0 * xi
    }
}

/// Assemble the 4x3 matrix of a state.
pub fn assemble_v(z: &StateZ) -> MatrixV {
    let m = &z.m;
    MatrixV(SMatrix::<f64, 4, 3>::from_rows(&[
        [m.m11 + z.q, m.m12, z.v.x].into(),
        [m.m12, m.m22() + z.q, z.v.y].into(),
        [z.v.x, z.v.y, 0.0].into(),
        [z.w.x, z.w.y, z.b].into(),
    ]))
}

/// Invert [`assemble_v`]. Exact on matrices produced by it.
pub fn disassemble_v(v: &MatrixV) -> StateZ {
    let a = &v.0;
    let q = 0.5 * (a[(0, 0)] + a[(1, 1)]);
    StateZ {
        b: a[(3, 2)],
        w: Vector2::new(a[(3, 0)], a[(3, 1)]),
        v: Vector2::new(a[(0, 2)], a[(1, 2)]),
        m: Traceless2::new(a[(0, 0)] - q, a[(0, 1)]),
        q,
    }
}

/// Pointwise distance of a state from the nonlinear constitutive
/// manifold and from the saturation shell: returns
/// (|M - (v (x) v - |v|^2/2 I)|_F, |w - b v|, | |v|^2 + b^2 - 2 |).
pub fn constitutive_residual(z: &StateZ) -> (f64, f64, f64) {
    let dm11 = z.m.m11 - 0.5 * (z.v.x * z.v.x - z.v.y * z.v.y);
    let dm12 = z.m.m12 - z.v.x * z.v.y;
    let r_m = (2.0 * (dm11 * dm11 + dm12 * dm12)).sqrt();
    let r_w = (z.w - z.v.scale(z.b)).norm();
    let r_shell = (z.v.norm_squared() + z.b * z.b - 2.0).abs();
    (r_m, r_w, r_shell)
}

/// A point of the constraint set, parametrized by angle and tracer sign.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KAtom {
    pub theta: f64,
    pub s: i8,
}

impl KAtom {
    /// Normalizes the angle into [0, 2*pi) and the sign into {-1, +1}.
    pub fn new(theta: f64, s: i8) -> Self {
        let mut t = theta.rem_euclid(TAU);
        if t >= TAU {
            t = 0.0;
        }
        KAtom { theta: t, s: if s < 0 { -1 } else { 1 } }
    }

    /// Exact closed-form state: |v| = 1, b = s, M = v (x) v - I/2, w = b v.
    pub fn materialize(&self, q: f64) -> StateZ {
        let (mut sin, mut cos) = self.theta.sin_cos();
        // Angles at the quadrant points aren't exactly representable, so
        // their trig values miss the exact 0/1 by one rounding step; snap
        // so quadrant atoms are exact lattice points of the chart.
        if sin.abs() < 1e-15 {
            sin = 0.0;
            cos = cos.signum();
        }
        if cos.abs() < 1e-15 {
            cos = 0.0;
            sin = sin.signum();
        }
        let v = Vector2::new(cos, sin);
        let b = self.s as f64;
        StateZ { b, w: v.scale(b), v, m: Traceless2::new(cos * cos - 0.5, cos * sin), q }
    }

    pub fn to_vec7(&self) -> SVector<f64, 7> {
        self.materialize(0.0).to_vec7()
    }
}

/// Space-time domain: an axis-aligned box or a ball in (x1, x2, t).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Domain {
    Ball { radius: f64 },
    Box { min: [f64; 3], max: [f64; 3] },
}

impl Domain {
    pub fn measure(&self) -> f64 {
        match self {
            Domain::Ball { radius } => 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3),
            Domain::Box { min, max } => (0..3).map(|i| max[i] - min[i]).product(),
        }
    }

    pub fn contains(&self, y: &Vector3<f64>) -> bool {
        match self {
            Domain::Ball { radius } => y.norm_squared() <= radius * radius,
            Domain::Box { min, max } => (0..3).all(|i| y[i] >= min[i] && y[i] <= max[i]),
        }
    }

    /// Whether the ball B(c, r) is contained in the domain.
    pub fn contains_ball(&self, c: &Vector3<f64>, r: f64) -> bool {
        match self {
            Domain::Ball { radius } => c.norm() + r <= *radius,
            Domain::Box { min, max } => (0..3).all(|i| c[i] - r >= min[i] && c[i] + r <= max[i]),
        }
    }

    pub fn bbox(&self) -> ([f64; 3], [f64; 3]) {
        match self {
            Domain::Ball { radius } => ([-radius; 3], [*radius; 3]),
            Domain::Box { min, max } => (*min, *max),
        }
    }

    pub fn is_valid(&self) -> bool {
        let m = self.measure();
        m.is_finite() && m > 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn random_state(rng: &mut ChaCha8Rng) -> StateZ {
        let mut c = SVector::<f64, 7>::zeros();
        for i in 0..7 {
            c[i] = rng.gen_range(-1.0..1.0);
        }
        StateZ::from_vec7(&c, rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn assemble_zero_state() {
        let v = assemble_v(&StateZ::ZERO);
        assert_eq!(v.0, SMatrix::<f64, 4, 3>::zeros());
    }

    #[test]
    fn assemble_atom_theta_zero() {
        let z = KAtom::new(0.0, 1).materialize(0.0);
        let v = assemble_v(&z);
        let expected = SMatrix::<f64, 4, 3>::from_rows(&[
            [0.5, 0.0, 1.0].into(),
            [0.0, -0.5, 0.0].into(),
            [1.0, 0.0, 0.0].into(),
            [1.0, 0.0, 1.0].into(),
        ]);
        assert_relative_eq!(v.0, expected, epsilon = 1e-15);
    }

    #[test]
    fn assemble_atom_theta_half_pi_negative_sign() {
        let z = KAtom::new(FRAC_PI_2, -1).materialize(0.0);
        let v = assemble_v(&z);
        let expected = SMatrix::<f64, 4, 3>::from_rows(&[
            [-0.5, 0.0, 0.0].into(),
            [0.0, 0.5, 1.0].into(),
            [0.0, 1.0, 0.0].into(),
            [0.0, -1.0, -1.0].into(),
        ]);
        assert_relative_eq!(v.0, expected, epsilon = 1e-15);
    }

    #[test]
    fn assembled_matrix_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let v = assemble_v(&random_state(&mut rng));
            assert_eq!(v.0[(2, 2)], 0.0);
            assert_eq!(v.0[(0, 1)], v.0[(1, 0)]);
            assert_eq!(v.0[(0, 2)], v.0[(2, 0)]);
            assert_eq!(v.0[(1, 2)], v.0[(2, 1)]);
        }
    }

    #[test]
    fn disassemble_roundtrip_100k_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100_000 {
            let z = random_state(&mut rng);
            let back = disassemble_v(&assemble_v(&z));
            assert!(back.sub(&z).norm() <= 1e-14 * (1.0 + z.norm()));
        }
    }

    #[test]
    fn constitutive_residual_on_atoms_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let atom = KAtom::new(rng.gen_range(0.0..TAU), if rng.gen::<bool>() { 1 } else { -1 });
            let (rm, rw, rs) = constitutive_residual(&atom.materialize(rng.gen_range(-1.0..1.0)));
            assert!(rm <= 1e-14 && rw <= 1e-14 && rs <= 1e-14);
        }
        assert_eq!(constitutive_residual(&StateZ::ZERO), (0.0, 0.0, 2.0));
    }

    #[test]
    fn constitutive_residual_mixed_example() {
        let z = StateZ {
            b: 1.0,
            w: Vector2::zeros(),
            v: Vector2::new(1.0, 0.0),
            m: Traceless2::ZERO,
            q: 0.3,
        };
        let (rm, rw, rs) = constitutive_residual(&z);
        assert_relative_eq!(rm, 1.0 / 2.0_f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(rw, 1.0, epsilon = 1e-15);
        assert_eq!(rs, 0.0);
    }

    #[test]
    fn constitutive_residual_rotation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let z = random_state(&mut rng);
            let ang: f64 = rng.gen_range(0.0..TAU);
            let (c, s) = (ang.cos(), ang.sin());
            let rot = |u: &Vector2<f64>| Vector2::new(c * u.x - s * u.y, s * u.x + c * u.y);
            // R M R^t for the full symmetric matrix, reprojected.
            let (m11, m12, m22) = (z.m.m11, z.m.m12, z.m.m22());
            let a11 = c * (c * m11 - s * m12) - s * (c * m12 - s * m22);
            let a12 = c * (s * m11 + c * m12) - s * (s * m12 + c * m22);
            let a22 = s * (s * m11 + c * m12) + c * (s * m12 + c * m22);
            let zr = StateZ {
                b: z.b,
                w: rot(&z.w),
                v: rot(&z.v),
                m: Traceless2::from_full(a11, a12, a12, a22),
                q: z.q,
            };
            let (r1, r2, r3) = constitutive_residual(&z);
            let (p1, p2, p3) = constitutive_residual(&zr);
            assert_relative_eq!(r1, p1, epsilon = 1e-12, max_relative = 1e-12);
            assert_relative_eq!(r2, p2, epsilon = 1e-12, max_relative = 1e-12);
            assert_relative_eq!(r3, p3, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn materialize_examples() {
        let z = KAtom::new(0.0, 1).materialize(0.0);
        assert_eq!((z.b, z.w.x, z.w.y, z.v.x, z.v.y), (1.0, 1.0, 0.0, 1.0, 0.0));
        assert_eq!((z.m.m11, z.m.m12), (0.5, 0.0));

        // v -> -v leaves v (x) v fixed.
        let z = KAtom::new(PI, 1).materialize(0.0);
        assert_relative_eq!(z.v.x, -1.0, epsilon = 1e-15);
        assert_relative_eq!(z.w.x, -1.0, epsilon = 1e-15);
        assert_relative_eq!(z.m.m11, 0.5, epsilon = 1e-15);

        // Flipping b flips w only.
        let z = KAtom::new(0.0, -1).materialize(0.0);
        assert_eq!((z.b, z.w.x, z.v.x), (-1.0, -1.0, 1.0));
    }

    #[test]
    fn domain_measures() {
        let ball = Domain::Ball { radius: 1.0 };
        assert_relative_eq!(ball.measure(), 4.0 / 3.0 * PI, epsilon = 1e-15);
        let bx = Domain::Box { min: [0.0, 0.0, -1.0], max: [2.0, 1.0, 1.0] };
        assert_relative_eq!(bx.measure(), 4.0, epsilon = 1e-15);
        assert!(ball.is_valid() && bx.is_valid());
    }
}

//! Wave-cone certificates and the oscillation-direction selector.
//!
//! A state direction admits plane-wave solutions of the divergence
//! constraint exactly when its assembled 4x3 matrix has a nontrivial
//! right nullvector. For differences of constraint-set atoms that
//! nullvector has a rational closed form; the general certificate falls
//! back to the smallest singular triple.

use crate::hull::{self, Decomposition};
use crate::states::{assemble_v, StateZ};
use nalgebra::Vector3;
use thiserror::Error;

/// Relative residual below which a direction is accepted as a cone
/// element: two orders above accumulated SVD round-off at the 4x3 scale.
pub const LAMBDA_RESIDUAL_TOL: f64 = 1e-8;

/// Lower-bound constant of the direction selector: 1/(28 sqrt(2)),
/// the value produced by the selector's estimate chain.
pub const DIRECTION_CONSTANT: f64 = 0.025253813613805268; // 1/(28*sqrt(2))

#[derive(Debug, Error)]
pub enum ConeError {
    #[error("assembled matrix is zero; the cone certificate is undefined at the origin")]
    ZeroMatrix,
    #[error("first velocity coordinates coincide (difference {0:.3e}); closed-form nullvector degenerate")]
    DegenerateDenominator(f64),
    #[error("every atom shares the base atom's velocity and tracer; no oscillation direction")]
    AllAtomsCoincident,
}

/// Unit nullvector candidate with its certified relative residual.
#[derive(Clone, Copy, Debug)]
pub struct ConeCertificate {
    pub xi: Vector3<f64>,
    pub residual: f64,
}

impl ConeCertificate {
    pub fn in_cone(&self) -> bool {
        self.residual <= LAMBDA_RESIDUAL_TOL
    }
}

/// Selected oscillation direction at a hull point.
#[derive(Clone, Debug)]
pub struct Direction {
    /// The direction state, pressure exactly zero.
    pub zbar: StateZ,
    pub certificate: ConeCertificate,
    /// Whether |(vbar, bbar)| >= C (2 - (|v|^2 + b^2)) held at the query.
    pub lower_bound_ok: bool,
    /// Whether both segment endpoints (and sampled midpoints) passed the
    /// reduced-margin interior test.
    pub segment_ok: bool,
    /// Indices into the sorted decomposition: base atom and partner.
    pub base_index: usize,
    pub partner_index: usize,
}

/// Smallest-singular-triple cone certificate of a state's assembled
/// matrix. The residual is sigma_min / |V|_F.
pub fn lambda_residual(z: &StateZ) -> Result<ConeCertificate, ConeError> {
    let v = assemble_v(z);
    let norm = v.frobenius_norm();
    if norm <= 1e-14 {
        return Err(ConeError::ZeroMatrix);
    }
    let svd = v.0.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested");
    let (idx, sigma_min) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, s)| (i, *s))
        .expect("nonempty");
    let xi = Vector3::new(v_t[(idx, 0)], v_t[(idx, 1)], v_t[(idx, 2)]);
    Ok(ConeCertificate { xi: xi.normalize(), residual: sigma_min / norm })
}

/// Closed-form nullvector for the segment between two materialized
/// atoms, valid when their first velocity coordinates differ:
/// xi = (-(dv2)/(dv1), 1, -(v2^1 v1^2 - v1^1 v2^2)/(dv1)).
pub fn xi_for_segment(h1: &StateZ, h2: &StateZ) -> Result<Vector3<f64>, ConeError> {
    let dv1 = h2.v.x - h1.v.x;
    if dv1.abs() <= 1e-10 {
        return Err(ConeError::DegenerateDenominator(dv1));
    }
    let dv2 = h2.v.y - h1.v.y;
    let cross = h2.v.x * h1.v.y - h1.v.x * h2.v.y;
    Ok(Vector3::new(-dv2 / dv1, 1.0, -cross / dv1))
}

/// Spot check that differences of constraint-set points are cone
/// directions (so the cone-restricted hull agrees with the convex hull).
pub fn lambda_hull_spot_check(
    h1: &crate::states::KAtom,
    h2: &crate::states::KAtom,
) -> Result<bool, ConeError> {
    let d = h1.materialize(0.0).sub(&h2.materialize(0.0));
    let cert = lambda_residual(&d)?;
    Ok(cert.in_cone())
}

/// Select the oscillation direction at `z` from its decomposition.
///
/// Atoms are sorted lexicographically by (theta, s) for reproducibility;
/// the base atom carries the maximum weight and the partner maximizes
/// lambda_i^2 (|v_i - v_base|^2 + (b_i - b_base)^2). The returned
/// direction is half the weighted atom difference with zero pressure.
/// The segment endpoints and five interior samples are re-verified by
/// the strict-interior test at half the margin; the outcome is recorded
/// rather than enforced.
pub fn oscillation_direction(
    z: &StateZ,
    dec: &Decomposition,
    delta: f64,
) -> Result<Direction, ConeError> {
    assert!(!dec.is_empty(), "decomposition must be nonempty");
    let mut order: Vec<usize> = (0..dec.len()).collect();
    order.sort_by(|&a, &b| {
        let ka = &dec.atoms[a];
        let kb = &dec.atoms[b];
        ka.theta
            .partial_cmp(&kb.theta)
            .unwrap()
            .then(ka.s.cmp(&kb.s))
    });
    let atoms: Vec<_> = order.iter().map(|&i| dec.atoms[i]).collect();
    let weights: Vec<_> = order.iter().map(|&i| dec.weights[i]).collect();

    // Base atom: maximum weight, ties to the lowest sorted index.
    let mut base = 0;
    for i in 1..weights.len() {
        if weights[i] > weights[base] + 1e-15 {
            base = i;
        }
    }
    let hb = atoms[base].materialize(0.0);

    let mut partner = usize::MAX;
    let mut best_score = 0.0;
    for (i, atom) in atoms.iter().enumerate() {
        if i == base {
            continue;
        }
        let hi = atom.materialize(0.0);
        let dv = hi.v - hb.v;
        let db = hi.b - hb.b;
        let score = weights[i] * weights[i] * (dv.norm_squared() + db * db);
        if score > best_score + 1e-18 {
            best_score = score;
            partner = i;
        }
    }
    if partner == usize::MAX || best_score <= 1e-24 {
        return Err(ConeError::AllAtomsCoincident);
    }

    let hp = atoms[partner].materialize(0.0);
    let mut zbar = hp.sub(&hb).scale(0.5 * weights[partner]);
    zbar.q = 0.0;

    // Closed-form nullvector when available, SVD fallback otherwise.
    let certificate = match xi_for_segment(&hb, &hp) {
        Ok(xi) => {
            let xi = xi.normalize();
            let v = assemble_v(&zbar);
            let residual = v.apply(&xi).norm() / v.frobenius_norm();
            ConeCertificate { xi, residual }
        }
        Err(ConeError::DegenerateDenominator(_)) => lambda_residual(&zbar)?,
        Err(e) => return Err(e),
    };

    let vb_norm = (zbar.v.norm_squared() + zbar.b * zbar.b).sqrt();
    let deficit = 2.0 - (z.v.norm_squared() + z.b * z.b);
    let lower_bound_ok = vb_norm >= DIRECTION_CONSTANT * deficit - 1e-9;

    let segment_ok = segment_interior(z, &zbar, delta);

    Ok(Direction {
        zbar,
        certificate,
        lower_bound_ok,
        segment_ok,
        base_index: base,
        partner_index: partner,
    })
}

/// Both endpoints plus five interior samples of the segment
/// z + t zbar, t in [-1, 1], at half the interior margin.
fn segment_interior(z: &StateZ, zbar: &StateZ, delta: f64) -> bool {
    let ts = [-1.0, -2.0 / 3.0, -1.0 / 3.0, 0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
    ts.iter().all(|&t| {
        let p = z.add(&zbar.scale(t));
        matches!(hull::interior_u(&p, 0.5 * delta), Ok(chk) if chk.interior)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::KAtom;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    #[test]
    fn segment_direction_has_explicit_nullvector() {
        let h1 = KAtom::new(0.0, 1).materialize(0.0);
        let h2 = KAtom::new(FRAC_PI_2, -1).materialize(0.0);
        let zbar = h2.sub(&h1).scale(0.5);
        let cert = lambda_residual(&zbar).unwrap();
        assert!(cert.residual <= 1e-12);
        // The closed-form candidate is proportional to (1, 1, -1).
        let xi = xi_for_segment(&h1, &h2).unwrap();
        assert_eq!(xi.x, 1.0);
        assert_eq!(xi.y, 1.0);
        assert_eq!(xi.z, -1.0);
        let v = assemble_v(&zbar);
        assert!(v.apply(&xi).norm() <= 1e-14);
    }

    #[test]
    fn xi_for_opposite_velocities() {
        let h1 = KAtom::new(0.0, 1).materialize(0.0);
        let h2 = KAtom::new(PI, 1).materialize(0.0);
        let xi = xi_for_segment(&h1, &h2).unwrap();
        assert_relative_eq!(xi.x, 0.0, epsilon = 1e-15);
        assert_eq!(xi.y, 1.0);
        assert_relative_eq!(xi.z, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn xi_degenerates_on_mirrored_angles() {
        // theta and pi - theta share the first velocity coordinate.
        let h1 = KAtom::new(0.7, 1).materialize(0.0);
        let h2 = KAtom::new(PI - 0.7, 1).materialize(0.0);
        assert!(matches!(
            xi_for_segment(&h1, &h2),
            Err(ConeError::DegenerateDenominator(_))
        ));
    }

    #[test]
    fn generic_states_are_not_cone_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut bounded_away = 0;
        for _ in 0..100 {
            let mut c = nalgebra::SVector::<f64, 7>::zeros();
            for i in 0..7 {
                c[i] = rng.gen_range(-1.0..1.0);
            }
            let z = StateZ::from_vec7(&c, rng.gen_range(-0.5..0.5));
            let cert = lambda_residual(&z).unwrap();
            if cert.residual > 1e-4 {
                bounded_away += 1;
            }
        }
        assert!(bounded_away >= 95, "generic 4x3 matrices have trivial kernels");
    }

    #[test]
    fn identical_atoms_give_zero_matrix() {
        let h = KAtom::new(1.0, 1);
        assert!(matches!(lambda_hull_spot_check(&h, &h), Err(ConeError::ZeroMatrix)));
    }

    #[test]
    fn atom_differences_are_cone_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..2000 {
            let h1 = KAtom::new(rng.gen_range(0.0..TAU), if rng.gen::<bool>() { 1 } else { -1 });
            let h2 = KAtom::new(rng.gen_range(0.0..TAU), if rng.gen::<bool>() { 1 } else { -1 });
            if h1.s == h2.s && (h1.theta - h2.theta).abs() < 1e-9 {
                continue;
            }
            assert!(lambda_hull_spot_check(&h1, &h2).unwrap());
        }
    }

    #[test]
    fn direction_formula_on_two_atom_decomposition() {
        let atoms = vec![KAtom::new(0.0, 1), KAtom::new(PI, 1)];
        let dec = Decomposition { atoms: atoms.clone(), weights: vec![0.6, 0.4] };
        let z = StateZ::from_vec7(&dec.recombine(), 0.0);
        let dir = oscillation_direction(&z, &dec, 0.05).unwrap();
        assert_relative_eq!(dir.zbar.v.x, -0.4, epsilon = 1e-12);
        assert_relative_eq!(dir.zbar.v.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(dir.zbar.b, 0.0, epsilon = 1e-12);
        assert_relative_eq!(dir.zbar.w.x, -0.4, epsilon = 1e-12);
        assert_eq!(dir.zbar.q, 0.0);
        assert!(dir.certificate.residual <= 1e-10);
    }

    #[test]
    fn direction_on_symmetric_origin_decomposition() {
        let atoms = vec![
            KAtom::new(0.0, 1),
            KAtom::new(FRAC_PI_2, -1),
            KAtom::new(PI, 1),
            KAtom::new(3.0 * FRAC_PI_2, -1),
        ];
        let dec = Decomposition { atoms, weights: vec![0.25; 4] };
        let dir = oscillation_direction(&StateZ::ZERO, &dec, 0.05).unwrap();
        let vb = (dir.zbar.v.norm_squared() + dir.zbar.b * dir.zbar.b).sqrt();
        assert_relative_eq!(vb, 6.0_f64.sqrt() / 8.0, epsilon = 1e-12);
        assert!(dir.lower_bound_ok);
        assert!(dir.certificate.in_cone());
        assert!(dir.segment_ok);
    }

    #[test]
    fn single_atom_decomposition_is_rejected() {
        let dec = Decomposition { atoms: vec![KAtom::new(0.3, 1)], weights: vec![1.0] };
        let z = dec.atoms[0].materialize(0.0);
        assert!(matches!(
            oscillation_direction(&z, &dec, 0.05),
            Err(ConeError::AllAtomsCoincident)
        ));
    }

    #[test]
    fn weight_rescaling_keeps_selected_pair() {
        let atoms = vec![
            KAtom::new(0.2, 1),
            KAtom::new(1.7, -1),
            KAtom::new(3.3, 1),
            KAtom::new(5.1, -1),
        ];
        let w = vec![0.4, 0.3, 0.2, 0.1];
        let dec = Decomposition { atoms: atoms.clone(), weights: w.clone() };
        let z = StateZ::from_vec7(&dec.recombine().scale(0.9), 0.0);
        let d1 = oscillation_direction(&z, &dec, 0.05).unwrap();
        // Uniformly rescaled weights (renormalized) select the same pair.
        let dec2 = Decomposition { atoms, weights: w.iter().map(|&x| x * 3.0 / 3.0).collect() };
        let d2 = oscillation_direction(&z, &dec2, 0.05).unwrap();
        assert_eq!(d1.base_index, d2.base_index);
        assert_eq!(d1.partner_index, d2.partner_index);
    }
}

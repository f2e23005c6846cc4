//! Certificate-based geometry of the constraint-set hull.
//!
//! The atom manifold is a pair of circles in a 7-dimensional chart, so
//! linear functionals restrict to degree-2 trigonometric polynomials and
//! can be minimized exactly: dense sampling plus Newton polish. On top of
//! that oracle, membership in the convex hull runs a fully corrective
//! Frank–Wolfe (minimum-norm-point) projection that terminates with one
//! of two certificates: an explicit convex decomposition that recombines
//! to the query, or a separating functional whose gap is verified
//! against the oracle's exact maximum.

use crate::states::{KAtom, StateZ};
use nalgebra::{DMatrix, DVector, SVector};
use std::f64::consts::TAU;
use std::sync::OnceLock;
use thiserror::Error;

/// Default distance tolerance for membership queries.
pub const MEMBERSHIP_TOL: f64 = 1e-10;
/// Iteration cap for the Frank–Wolfe loop.
pub const FW_ITERATION_CAP: usize = 5000;
/// Dense sampling resolution of the linear minimization oracle.
pub const LMO_GRID: usize = 1024;
/// Maximum support size of a decomposition (chart dimension + 1).
pub const MAX_SUPPORT: usize = 8;

#[derive(Debug, Error)]
pub enum HullError {
    #[error("membership iteration budget exhausted after {iterations} steps (distance {distance:.3e}, tolerance {tol:.3e})")]
    IterationBudgetExceeded { iterations: usize, distance: f64, tol: f64 },
    #[error("support reduction hit a degenerate dependency ({0}); merge near-duplicate atoms first")]
    NumericalDegeneracy(String),
}

/// Convex decomposition of a chart point over at most 8 atoms.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub atoms: Vec<KAtom>,
    pub weights: Vec<f64>,
}

impl Decomposition {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn recombine(&self) -> SVector<f64, 7> {
        let mut acc = SVector::<f64, 7>::zeros();
        for (a, &w) in self.atoms.iter().zip(&self.weights) {
            acc += a.to_vec7() * w;
        }
        acc
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Outcome of a membership query.
#[derive(Clone, Debug)]
pub enum MembershipResult {
    /// The query is inside: `margin` is the unused slack `tol - dist`
    /// where `dist` is the recombination distance actually achieved.
    Inside { decomposition: Decomposition, margin: f64 },
    /// The query is outside: `<separator, query>` exceeds the exact
    /// maximum of `<separator, .>` over the atom set by `gap > 0`.
    Outside { separator: SVector<f64, 7>, gap: f64 },
}

impl MembershipResult {
    pub fn is_inside(&self) -> bool {
        matches!(self, MembershipResult::Inside { .. })
    }
}

struct LmoTable {
    /// theta, cos, sin, cos 2theta, sin 2theta per grid node.
    rows: Vec<[f64; 5]>,
}

fn lmo_table() -> &'static LmoTable {
    static TABLE: OnceLock<LmoTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let rows = (0..LMO_GRID)
            .map(|i| {
                let th = TAU * i as f64 / LMO_GRID as f64;
                [th, th.cos(), th.sin(), (2.0 * th).cos(), (2.0 * th).sin()]
            })
            .collect();
        LmoTable { rows }
    })
}

/// Objective <c, atom(theta, s)> in the canonical chart.
#[inline]
fn objective(c: &SVector<f64, 7>, s: f64, cos: f64, sin: f64, cos2: f64, sin2: f64) -> f64 {
    c[0] * s
        + (c[1] * s + c[3]) * cos
        + (c[2] * s + c[4]) * sin
        + 0.5 * c[5] * cos2
        + 0.5 * c[6] * sin2
}

/// Exact linear minimization over the atom set.
///
/// For fixed sign the objective is a degree-2 trigonometric polynomial
/// with at most four critical points; the dense grid brackets them all
/// and Newton polish brings the best candidates to full precision.
/// Ties break toward the smallest angle, then the positive sign.
pub fn lmo(c: &SVector<f64, 7>) -> (KAtom, f64) {
    let table = lmo_table();
    let scale = 1.0 + c.amax();
    let mut best: Option<(f64, f64, i8)> = None; // (value, theta, s)

    for &s in &[1.0f64, -1.0] {
        let a1 = c[1] * s + c[3];
        let a2 = c[2] * s + c[4];
        let a3 = 0.5 * c[5];
        let a4 = 0.5 * c[6];
        // Grid pass: keep the three best distinct local candidates.
        let mut cands: Vec<(f64, f64)> = Vec::with_capacity(4);
        for row in &table.rows {
            let val = objective(c, s, row[1], row[2], row[3], row[4]);
            if cands.len() < 3 {
                cands.push((val, row[0]));
                cands.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
            } else if val < cands[2].0 {
                cands[2] = (val, row[0]);
                cands.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
            }
        }
        for &(_, th0) in &cands {
            let th = newton_polish(th0, a1, a2, a3, a4, scale);
            let (sin, cos) = th.sin_cos();
            let (sin2, cos2) = (2.0 * th).sin_cos();
            let val = objective(c, s, cos, sin, cos2, sin2);
            let atom_s = if s > 0.0 { 1 } else { -1 };
            let replace = match best {
                None => true,
                Some((bv, bt, bs)) => {
                    if val < bv - 1e-12 * scale {
                        true
                    } else if val > bv + 1e-12 * scale {
                        false
                    } else if th < bt - 1e-12 {
                        true
                    } else if th > bt + 1e-12 {
                        false
                    } else {
                        bs < 0 && atom_s > 0
                    }
                }
            };
            if replace {
                best = Some((val, th, atom_s));
            }
        }
    }
    let (value, theta, s) = best.expect("grid is nonempty");
    (KAtom::new(theta, s), value)
}

fn newton_polish(theta0: f64, a1: f64, a2: f64, a3: f64, a4: f64, scale: f64) -> f64 {
    let mut th = theta0;
    for _ in 0..40 {
        let (s1, c1) = th.sin_cos();
        let (s2, c2) = (2.0 * th).sin_cos();
        let d1 = -a1 * s1 + a2 * c1 - 2.0 * a3 * s2 + 2.0 * a4 * c2;
        let d2 = -a1 * c1 - a2 * s1 - 4.0 * a3 * c2 - 4.0 * a4 * s2;
        // Only descend into local minima; skip flat or concave points.
        if d2 <= 1e-14 * scale {
            break;
        }
        let step = d1 / d2;
        // Stay within the bracketing grid cell.
        let clamped = step.clamp(-1.5 * TAU / LMO_GRID as f64, 1.5 * TAU / LMO_GRID as f64);
        th -= clamped;
        if clamped.abs() < 1e-15 {
            break;
        }
    }
    let mut t = th.rem_euclid(TAU);
    // Snap wrap-around results so tie-breaks see theta = 0 exactly.
    if t > TAU - 1e-12 {
        t = 0.0;
    }
    t
}

/// Maximum of <c, .> over the atom set, via the oracle.
pub fn lmo_max(c: &SVector<f64, 7>) -> f64 {
    let (_, v) = lmo(&(-c));
    -v
}

/// Frank–Wolfe membership of a chart point in the atom hull.
///
/// Fully corrective variant: each round adds the oracle atom and then
/// solves the projection restricted to the current support exactly
/// (Wolfe's minimum-norm-point minor cycle), so the active set stays
/// affinely independent and at most 8 atoms survive.
pub fn membership(z7: &SVector<f64, 7>, tol: f64) -> Result<MembershipResult, HullError> {
    assert!(tol > 0.0, "membership tolerance must be positive");
    let (a0, _) = lmo(&(-z7));
    let mut atoms: Vec<KAtom> = vec![a0];
    let mut vecs: Vec<SVector<f64, 7>> = vec![a0.to_vec7()];
    let mut weights: Vec<f64> = vec![1.0];
    let mut x = vecs[0];

    let mut last_dist = f64::INFINITY;
    let mut stall = 0usize;
    for it in 0..FW_ITERATION_CAP {
        let d = x - z7;
        let dist = d.norm();
        if dist <= tol {
            let decomposition = caratheodory_reduce(&atoms, &weights)?;
            return Ok(MembershipResult::Inside { decomposition, margin: tol - dist });
        }

        // Separation certificate: u points from the current hull
        // approximation toward the query; the gap is checked against the
        // oracle's exact maximum, so a positive value is sound whether or
        // not the projection has converged.
        let u = -d / dist;
        let gap = u.dot(z7) - lmo_max(&u);
        if gap > 0.0 {
            return Ok(MembershipResult::Outside { separator: u, gap });
        }

        let (anew, val) = lmo(&d);
        let fw_gap = d.dot(&x) - val;
        if fw_gap <= 0.25 * tol * tol || stall >= 12 {
            // No meaningful descent left and no separation: the query
            // straddles the boundary at this tolerance.
            return Err(HullError::IterationBudgetExceeded { iterations: it, distance: dist, tol });
        }

        let dup = atoms
            .iter()
            .position(|a| a.s == anew.s && angle_close(a.theta, anew.theta, 1e-9));
        if dup.is_none() {
            atoms.push(anew);
            vecs.push(anew.to_vec7());
            weights.push(0.0);
        }

        wolfe_minor_cycle(&mut atoms, &mut vecs, &mut weights, z7);
        x = recombine(&vecs, &weights);

        let new_dist = (x - z7).norm();
        if new_dist > last_dist - 1e-17 {
            stall += 1;
        } else {
            stall = 0;
        }
        last_dist = new_dist;
    }
    Err(HullError::IterationBudgetExceeded {
        iterations: FW_ITERATION_CAP,
        distance: last_dist,
        tol,
    })
}

fn angle_close(a: f64, b: f64, tol: f64) -> bool {
    let d = (a - b).rem_euclid(TAU);
    d < tol || d > TAU - tol
}

fn recombine(vecs: &[SVector<f64, 7>], weights: &[f64]) -> SVector<f64, 7> {
    let mut acc = SVector::<f64, 7>::zeros();
    for (v, &w) in vecs.iter().zip(weights) {
        acc += v * w;
    }
    acc
}

/// Wolfe's minor cycle: repeatedly solve the affine least-squares
/// problem on the support, stepping toward it until all weights are
/// nonnegative, dropping atoms whose weight hits zero.
fn wolfe_minor_cycle(
    atoms: &mut Vec<KAtom>,
    vecs: &mut Vec<SVector<f64, 7>>,
    weights: &mut Vec<f64>,
    z7: &SVector<f64, 7>,
) {
    const MAX_MINOR: usize = 64;
    for _ in 0..MAX_MINOR {
        let k = atoms.len();
        let Some(aff) = affine_weights(vecs, z7) else {
            // Degenerate Gram system: drop the smallest-weight atom.
            if k <= 1 {
                return;
            }
            let drop = weights
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            atoms.remove(drop);
            vecs.remove(drop);
            weights.remove(drop);
            continue;
        };
        if aff.iter().all(|&l| l >= -1e-12) {
            for (w, &l) in weights.iter_mut().zip(&aff) {
                *w = l.max(0.0);
            }
            let s: f64 = weights.iter().sum();
            for w in weights.iter_mut() {
                *w /= s;
            }
            return;
        }
        // Largest feasible step from the current weights toward aff.
        let mut t = 1.0f64;
        for i in 0..k {
            if aff[i] < weights[i] && aff[i] < 0.0 {
                t = t.min(weights[i] / (weights[i] - aff[i]));
            }
        }
        for i in 0..k {
            weights[i] = (1.0 - t) * weights[i] + t * aff[i];
        }
        // Remove every atom pinned to the boundary.
        let mut i = 0;
        while i < weights.len() {
            if weights[i] <= 1e-14 {
                atoms.remove(i);
                vecs.remove(i);
                weights.remove(i);
            } else {
                i += 1;
            }
        }
        if weights.is_empty() {
            // Cannot happen for a proper simplex step; restore a vertex.
            return;
        }
        let s: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= s;
        }
    }
}

/// Solve min |sum l_i a_i - z|^2 subject to sum l_i = 1 (signs free)
/// via the bordered normal equations. Returns None when the system is
/// numerically singular.
fn affine_weights(vecs: &[SVector<f64, 7>], z7: &SVector<f64, 7>) -> Option<Vec<f64>> {
    let k = vecs.len();
    let n = k + 1;
    let mut m = vec![0.0f64; n * n];
    let mut rhs = vec![0.0f64; n];
    for i in 0..k {
        for j in 0..k {
            m[i * n + j] = vecs[i].dot(&vecs[j]);
        }
        m[i * n + i] += 1e-13;
        m[i * n + k] = 1.0;
        m[k * n + i] = 1.0;
        rhs[i] = vecs[i].dot(z7);
    }
    rhs[k] = 1.0;
    solve_dense(&mut m, &mut rhs, n)?;
    rhs.truncate(k);
    Some(rhs)
}

/// In-place Gaussian elimination with partial pivoting.
fn solve_dense(m: &mut [f64], rhs: &mut [f64], n: usize) -> Option<()> {
    for col in 0..n {
        let mut piv = col;
        let mut best = m[col * n + col].abs();
        for row in col + 1..n {
            let v = m[row * n + col].abs();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if best < 1e-300 {
            return None;
        }
        if piv != col {
            for j in 0..n {
                m.swap(col * n + j, piv * n + j);
            }
            rhs.swap(col, piv);
        }
        let diag = m[col * n + col];
        for row in col + 1..n {
            let f = m[row * n + col] / diag;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                m[row * n + j] -= f * m[col * n + j];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = rhs[col];
        for j in col + 1..n {
            acc -= m[col * n + j] * rhs[j];
        }
        rhs[col] = acc / m[col * n + col];
    }
    Some(())
}

/// Classical support reduction: while more than 8 atoms carry weight,
/// move along an affine dependency until a weight hits zero. Duplicate
/// atoms are merged first. The recombined point moves by at most the
/// dependency residual per step (machine-level).
pub fn caratheodory_reduce(atoms: &[KAtom], weights: &[f64]) -> Result<Decomposition, HullError> {
    assert_eq!(atoms.len(), weights.len());
    // Merge duplicates.
    let mut merged: Vec<(KAtom, f64)> = Vec::with_capacity(atoms.len());
    'outer: for (a, &w) in atoms.iter().zip(weights) {
        if w < 0.0 && w > -1e-15 {
            continue;
        }
        assert!(w >= 0.0, "weights must be nonnegative");
        for (b, wb) in merged.iter_mut() {
            if b.s == a.s && angle_close(b.theta, a.theta, 1e-12) {
                *wb += w;
                continue 'outer;
            }
        }
        merged.push((*a, w));
    }
    merged.retain(|&(_, w)| w > 0.0);
    let mut atoms: Vec<KAtom> = merged.iter().map(|&(a, _)| a).collect();
    let mut weights: Vec<f64> = merged.iter().map(|&(_, w)| w).collect();
    let mut vecs: Vec<SVector<f64, 7>> = atoms.iter().map(|a| a.to_vec7()).collect();

    while atoms.len() > MAX_SUPPORT {
        let m = atoms.len();
        // Affine dependency among the first nine atoms: the homogeneous
        // 8x9 system (chart rows plus a row of ones) always has a
        // nontrivial nullvector.
        let mut g = vec![0.0f64; m];
        let gamma9 = affine_dependency_9(&vecs[..9])?;
        g[..9].copy_from_slice(&gamma9);
        // Residual of the dependency against the full stacked system.
        let mut res = 0.0f64;
        let mut drift = SVector::<f64, 7>::zeros();
        let mut ones = 0.0;
        for (v, &gi) in vecs.iter().zip(&g) {
            drift += v * gi;
            ones += gi;
        }
        res = res.max(drift.norm()).max(ones.abs());
        if res > 1e-8 {
            return Err(HullError::NumericalDegeneracy(format!("dependency residual {res:.3e}")));
        }
        let gmax = g.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        if gmax < 1e-13 {
            return Err(HullError::NumericalDegeneracy("vanishing dependency".into()));
        }
        if !g.iter().any(|&x| x > 0.0) {
            for x in g.iter_mut() {
                *x = -*x;
            }
        }
        let mut t = f64::INFINITY;
        let mut kill = usize::MAX;
        for i in 0..m {
            if g[i] > 1e-15 * gmax {
                let ti = weights[i] / g[i];
                if ti < t {
                    t = ti;
                    kill = i;
                }
            }
        }
        if kill == usize::MAX || !t.is_finite() {
            return Err(HullError::NumericalDegeneracy("no positive direction".into()));
        }
        for i in 0..m {
            weights[i] -= t * g[i];
        }
        weights[kill] = 0.0;
        let mut i = 0;
        while i < weights.len() {
            if weights[i] <= 1e-15 {
                atoms.remove(i);
                vecs.remove(i);
                weights.remove(i);
            } else {
                i += 1;
            }
        }
    }
    let s: f64 = weights.iter().sum();
    if s > 0.0 {
        for w in weights.iter_mut() {
            *w /= s;
        }
    }
    Ok(Decomposition { atoms, weights })
}

/// Verdict of the strict-interior test.
#[derive(Clone, Debug)]
pub struct InteriorCheck {
    pub interior: bool,
    /// Decomposition of the query itself, when it is at least inside.
    pub decomposition: Option<Decomposition>,
    /// Ball radius certified by the axis-perturbation test: delta/sqrt(7).
    pub ball_margin: f64,
    pub reason: InteriorVerdict,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InteriorVerdict {
    Interior,
    PressureOutOfRange,
    PointOutside,
    PerturbationOutside { axis: usize },
    Undecided,
}

/// Strict interior test for the relaxed set: the pressure coordinate
/// must clear the interval boundary by `delta` and all 14 axis
/// perturbations of the chart point must be inside the hull.
pub fn interior_u(z: &StateZ, delta: f64) -> Result<InteriorCheck, HullError> {
    assert!(delta > 0.0, "interior margin must be positive");
    let ball_margin = delta / 7.0f64.sqrt();
    let z7 = z.to_vec7();

    if z.q <= -1.0 + delta || z.q >= 1.0 - delta {
        return Ok(InteriorCheck {
            interior: false,
            decomposition: None,
            ball_margin,
            reason: InteriorVerdict::PressureOutOfRange,
        });
    }

    let decomposition = match membership(&z7, MEMBERSHIP_TOL) {
        Ok(MembershipResult::Inside { decomposition, .. }) => Some(decomposition),
        Ok(MembershipResult::Outside { .. }) => {
            return Ok(InteriorCheck {
                interior: false,
                decomposition: None,
                ball_margin,
                reason: InteriorVerdict::PointOutside,
            });
        }
        Err(HullError::IterationBudgetExceeded { .. }) => {
            return Ok(InteriorCheck {
                interior: false,
                decomposition: None,
                ball_margin,
                reason: InteriorVerdict::Undecided,
            });
        }
        Err(e) => return Err(e),
    };

    for axis in 0..7 {
        for sign in [-1.0, 1.0] {
            let mut p = z7;
            p[axis] += sign * delta;
            match membership(&p, MEMBERSHIP_TOL) {
                Ok(MembershipResult::Inside { .. }) => {}
                Ok(MembershipResult::Outside { .. }) => {
                    return Ok(InteriorCheck {
                        interior: false,
                        decomposition,
                        ball_margin,
                        reason: InteriorVerdict::PerturbationOutside { axis },
                    });
                }
                Err(HullError::IterationBudgetExceeded { .. }) => {
                    return Ok(InteriorCheck {
                        interior: false,
                        decomposition,
                        ball_margin,
                        reason: InteriorVerdict::Undecided,
                    });
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(InteriorCheck {
        interior: true,
        decomposition,
        ball_margin,
        reason: InteriorVerdict::Interior,
    })
}

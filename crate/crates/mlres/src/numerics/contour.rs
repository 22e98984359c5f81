use std::f64::consts::PI;

use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    Clockwise,
    Counterclockwise,
}

/// Ellipse `c + a cos t + j b sin t` sampled by the periodic trapezoid rule.
#[derive(Clone, Debug)]
pub struct Contour {
    pub center: C64,
    pub semi_axes: (f64, f64),
    pub node_count: usize,
    pub orientation: Orientation,
    enclosed: Vec<C64>,
    excluded: Vec<C64>,
}

pub const DEFAULT_NODES: usize = 1024;
pub const DEFAULT_REL_TOL: f64 = 1e-9;
pub const MAX_NODES: usize = 1 << 18;

impl Contour {
    pub fn ellipse(center: C64, a: f64, b: f64, node_count: usize, orientation: Orientation) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::Contour(format!("semi-axes must be positive, got ({a}, {b})")));
        }
        if node_count < 64 || node_count % 2 != 0 {
            return Err(Error::Contour(format!("node count must be even and >= 64, got {node_count}")));
        }
        Ok(Self { center, semi_axes: (a, b), node_count, orientation, enclosed: vec![], excluded: vec![] })
    }

    pub fn circle(center: C64, radius: f64, node_count: usize, orientation: Orientation) -> Result<Self> {
        Self::ellipse(center, radius, radius, node_count, orientation)
    }

    /// Lower bound on the signed distance to the boundary (positive inside).
    fn inner_distance(&self, p: C64) -> f64 {
        let (a, b) = self.semi_axes;
        let d = p - self.center;
        let rho = ((d.re / a).powi(2) + (d.im / b).powi(2)).sqrt();
        (1.0 - rho) * a.min(b)
    }

    fn margin(&self) -> f64 {
        1e-6 * self.semi_axes.0.max(self.semi_axes.1)
    }

    pub fn must_enclose(mut self, pts: &[C64]) -> Result<Self> {
        for &p in pts {
            if self.inner_distance(p) < self.margin() {
                return Err(Error::Contour(format!("point {p} is not strictly enclosed")));
            }
        }
        self.enclosed.extend_from_slice(pts);
        Ok(self)
    }

    pub fn must_exclude(mut self, pts: &[C64]) -> Result<Self> {
        for &p in pts {
            let (a, b) = self.semi_axes;
            let d = p - self.center;
            let rho = ((d.re / a).powi(2) + (d.im / b).powi(2)).sqrt();
            if (rho - 1.0) * a.min(b) < self.margin() {
                return Err(Error::Contour(format!("point {p} is not strictly excluded")));
            }
        }
        self.excluded.extend_from_slice(pts);
        Ok(self)
    }

    pub fn enclosed(&self) -> &[C64] {
        &self.enclosed
    }

    pub fn excluded(&self) -> &[C64] {
        &self.excluded
    }

    /// Nodes and quadrature weights (`dz` including the orientation sign) for
    /// `n` equispaced parameter values starting at the rightmost point.
    pub fn nodes(&self, n: usize) -> (Vec<C64>, Vec<C64>) {
        let (a, b) = self.semi_axes;
        let sign = match self.orientation {
            Orientation::Counterclockwise => 1.0,
            Orientation::Clockwise => -1.0,
        };
        let h = 2.0 * PI / n as f64;
        let mut z = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n);
        for k in 0..n {
            let t = sign * h * k as f64;
            let (s, c) = t.sin_cos();
            z.push(self.center + C64::new(a * c, b * s));
            w.push(C64::new(-a * s, b * c) * (h * sign));
        }
        (z, w)
    }

    /// Fixed-node quadrature of `∮ f(z) dz` with a batch integrand.
    pub fn integrate_batch<G>(&self, n: usize, g: &mut G) -> Result<C64>
    where
        G: FnMut(&[C64]) -> Result<Vec<C64>>,
    {
        let (z, w) = self.nodes(n);
        let vals = g(&z)?;
        let mut acc = C64::new(0.0, 0.0);
        for (k, (v, wk)) in vals.iter().zip(&w).enumerate() {
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::NonFiniteIntegrand { node: k, re: z[k].re, im: z[k].im });
            }
            acc += v * wk;
        }
        Ok(acc)
    }
}

/// `∮ f(z) dz` with node doubling until successive estimates agree to
/// `1e-9·(1+|I|)`.
pub fn contour_integral<F: FnMut(C64) -> C64>(c: &Contour, mut f: F) -> Result<C64> {
    contour_integral_batch(c, DEFAULT_REL_TOL, MAX_NODES, |zs| Ok(zs.iter().map(|&z| f(z)).collect()))
}

/// Auto-doubling quadrature with a batch integrand (useful when node values
/// depend on their neighbours, e.g. a continuously unwrapped logarithm).
pub fn contour_integral_batch<G>(c: &Contour, rel_tol: f64, max_nodes: usize, mut g: G) -> Result<C64>
where
    G: FnMut(&[C64]) -> Result<Vec<C64>>,
{
    let mut n = c.node_count;
    let mut prev = c.integrate_batch(n, &mut g)?;
    loop {
        if 2 * n > max_nodes {
            return Err(Error::Numerical(format!(
                "contour quadrature did not converge with {n} nodes (last estimate {prev})"
            )));
        }
        n *= 2;
        let cur = c.integrate_batch(n, &mut g)?;
        if (cur - prev).norm() <= rel_tol * (1.0 + cur.norm()) {
            return Ok(cur);
        }
        prev = cur;
    }
}

/// Continuous logarithm along a closed sequence of nonzero values, anchored
/// to the principal branch at index 0. Errors if the values wind around 0.
pub fn unwrapped_log(vals: &[C64]) -> Result<Vec<C64>> {
    let mut out = Vec::with_capacity(vals.len());
    let Some(&first) = vals.first() else { return Ok(out) };
    let mut cur = first.ln();
    out.push(cur);
    for pair in vals.windows(2) {
        let step = (pair[1] / pair[0]).ln();
        if step.im.abs() > 0.5 * PI {
            return Err(Error::Contour("logarithm phase jump too large between nodes".into()));
        }
        cur += step;
        out.push(cur);
    }
    let closing = cur + (first / vals[vals.len() - 1]).ln() - out[0];
    if closing.im.abs() > 1e-6 {
        return Err(Error::Contour(format!("nonzero winding around the origin (phase {})", closing.im)));
    }
    Ok(out)
}

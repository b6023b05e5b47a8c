use std::sync::Arc;

use super::{Mesh, Point};
use crate::error::{Error, Result};
use crate::par;

/// Piecewise-linear field given by its vertex values.
#[derive(Clone, Debug)]
pub struct ScalarField {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_vertices() {
            return Err(Error::invalid(format!(
                "field has {} values for {} vertices",
                values.len(),
                mesh.n_vertices()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite value at vertex {i}")));
        }
        Ok(ScalarField { mesh, values })
    }

    pub fn constant(mesh: Arc<Mesh>, c: f64) -> Self {
        let n = mesh.n_vertices();
        ScalarField { mesh, values: vec![c; n] }
    }

    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(Point) -> f64) -> Result<Self> {
        let values = mesh.vertices().iter().map(|&p| f(p)).collect();
        Self::new(mesh, values)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn same_mesh(&self, other: &ScalarField) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) || self.mesh.same_as(&other.mesh)
    }

    /// `∫ |u|^s` with the three-point edge-midpoint rule on each triangle.
    ///
    /// The rule is exact for quadratics, so `s = 1` is exact for
    /// single-signed fields and `s = 2` is exact for every P1 field.
    pub fn integrate(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(Error::invalid(format!("exponent must be positive, got {s}")));
        }
        let m = &*self.mesh;
        let u = &self.values;
        Ok(par::sum(m.n_triangles(), |t| {
            let [i, j, k] = m.triangles()[t];
            let q = (0.5 * (u[i] + u[j])).abs().powf(s)
                + (0.5 * (u[j] + u[k])).abs().powf(s)
                + (0.5 * (u[k] + u[i])).abs().powf(s);
            m.area(t) * q / 3.0
        }))
    }

    /// Linear interpolation at `p`; `None` outside the mesh.
    pub fn eval(&self, p: Point) -> Option<f64> {
        let (t, l) = self.mesh.locate(p)?;
        let tri = self.mesh.triangles()[t];
        Some((0..3).map(|i| l[i] * self.values[tri[i]]).sum())
    }

    /// Constant gradient on triangle `t`.
    pub fn gradient(&self, t: usize) -> Point {
        grad_on(&self.mesh, &self.values, t)
    }
}

pub(crate) fn grad_on(m: &Mesh, u: &[f64], t: usize) -> Point {
    let tri = m.triangles()[t];
    let g = m.hat_gradients(t);
    let mut out = [0.0; 2];
    for i in 0..3 {
        out[0] += u[tri[i]] * g[i][0];
        out[1] += u[tri[i]] * g[i][1];
    }
    out
}

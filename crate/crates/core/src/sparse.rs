//! CSR matrices on the P1 sparsity pattern and a Jacobi-preconditioned CG.

use crate::mesh::Mesh;
use crate::par;

#[derive(Clone, Debug)]
pub struct Csr {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
    diag_pos: Vec<usize>,
}

/// Sparsity pattern of a mesh plus, for each triangle, the value slots of
/// its 3×3 local block (row-major).
#[derive(Clone, Debug)]
pub struct Pattern {
    template: Csr,
    slots: Vec<[usize; 9]>,
}

impl Pattern {
    pub fn new(mesh: &Mesh) -> Pattern {
        let nb = mesh.vertex_neighbors();
        let n = mesh.n_vertices();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::new();
        let mut diag_pos = vec![0; n];
        row_ptr.push(0);
        for (i, l) in nb.iter().enumerate() {
            let mut row: Vec<usize> = l.clone();
            row.push(i);
            row.sort_unstable();
            diag_pos[i] = col.len() + row.iter().position(|&j| j == i).unwrap();
            col.extend(row);
            row_ptr.push(col.len());
        }
        let val = vec![0.0; col.len()];
        let template = Csr { n, row_ptr, col, val, diag_pos };
        let slots = mesh
            .triangles()
            .iter()
            .map(|t| {
                let mut s = [0usize; 9];
                for a in 0..3 {
                    for b in 0..3 {
                        s[3 * a + b] = template.find(t[a], t[b]).expect("pattern covers triangle");
                    }
                }
                s
            })
            .collect();
        Pattern { template, slots }
    }

    /// Assemble `Σ_T local(T)` where `local` returns the 3×3 block of `T`.
    pub fn assemble<F>(&self, n_tri: usize, local: F) -> Csr
    where
        F: Fn(usize) -> [f64; 9] + Sync + Send,
    {
        let blocks = par::map_collect(n_tri, local);
        let mut m = self.template.clone();
        for (t, b) in blocks.iter().enumerate() {
            for (k, &s) in self.slots[t].iter().enumerate() {
                m.val[s] += b[k];
            }
        }
        m
    }
}

impl Csr {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col.len()
    }

    fn find(&self, i: usize, j: usize) -> Option<usize> {
        let r = &self.col[self.row_ptr[i]..self.row_ptr[i + 1]];
        r.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.find(i, j).map_or(0.0, |k| self.val[k])
    }

    pub fn diag(&self) -> Vec<f64> {
        self.diag_pos.iter().map(|&k| self.val[k]).collect()
    }

    pub fn add_diag(&mut self, d: &[f64], scale: f64) {
        for i in 0..self.n {
            self.val[self.diag_pos[i]] += scale * d[i];
        }
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        par::for_each_mut(y, |i, yi| {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.val[k] * x[self.col[k]];
            }
            *yi = s;
        });
    }
}

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// A direction with `pᵀAp ≤ 0` was met (the operator is not positive on
    /// the free space).
    pub negative_curvature: bool,
}

/// Solve `A x = b` on the free vertices (fixed entries of `x` stay zero) to
/// relative residual `rtol`.
pub fn pcg(a: &Csr, b: &[f64], free: &[bool], rtol: f64, max_iter: usize) -> CgOutcome {
    let n = a.n();
    let d = a.diag();
    let minv: Vec<f64> = (0..n)
        .map(|i| if free[i] && d[i] > 0.0 { 1.0 / d[i] } else if free[i] { 1.0 } else { 0.0 })
        .collect();
    let mut x = vec![0.0; n];
    let mut r: Vec<f64> = (0..n).map(|i| if free[i] { b[i] } else { 0.0 }).collect();
    let bnorm = par::dot(&r, &r).sqrt();
    if bnorm == 0.0 {
        return CgOutcome { x, iterations: 0, converged: true, negative_curvature: false };
    }
    let mut z: Vec<f64> = (0..n).map(|i| minv[i] * r[i]).collect();
    let mut p = z.clone();
    let mut rz = par::dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        a.matvec(&p, &mut ap);
        for i in 0..n {
            if !free[i] {
                ap[i] = 0.0;
            }
        }
        let pap = par::dot(&p, &ap);
        if !(pap > 0.0) {
            return CgOutcome { x, iterations: it, converged: false, negative_curvature: true };
        }
        let alpha = rz / pap;
        par::for_each_mut(&mut x, |i, xi| *xi += alpha * p[i]);
        par::for_each_mut(&mut r, |i, ri| *ri -= alpha * ap[i]);
        let rn = par::dot(&r, &r).sqrt();
        if rn <= rtol * bnorm {
            return CgOutcome { x, iterations: it + 1, converged: true, negative_curvature: false };
        }
        par::for_each_mut(&mut z, |i, zi| *zi = minv[i] * r[i]);
        let rz_new = par::dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        par::for_each_mut(&mut p, |i, pi| *pi = z[i] + beta * *pi);
    }
    CgOutcome { x, iterations: max_iter, converged: false, negative_curvature: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_rect_mesh;

    #[test]
    fn laplacian_solve_recovers_known_solution() {
        let m = build_rect_mesh(1.0, 1.0, 12, 12).unwrap();
        let pat = Pattern::new(&m);
        let k = pat.assemble(m.n_triangles(), |t| {
            let g = m.hat_gradients(t);
            let mut b = [0.0; 9];
            for i in 0..3 {
                for j in 0..3 {
                    b[3 * i + j] = m.area(t) * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                }
            }
            b
        });
        // Row sums of a stiffness matrix vanish.
        let ones = vec![1.0; m.n_vertices()];
        let mut y = vec![0.0; m.n_vertices()];
        k.matvec(&ones, &mut y);
        assert!(y.iter().all(|v| v.abs() < 1e-12));

        let free: Vec<bool> = (0..m.n_vertices()).map(|i| !m.is_boundary(i)).collect();
        let xs: Vec<f64> = (0..m.n_vertices())
            .map(|i| if free[i] { (i as f64 * 0.7).sin() } else { 0.0 })
            .collect();
        k.matvec(&xs, &mut y);
        let out = pcg(&k, &y, &free, 1e-12, 1000);
        assert!(out.converged);
        for i in 0..m.n_vertices() {
            assert!((out.x[i] - xs[i]).abs() < 1e-9);
        }
    }
}

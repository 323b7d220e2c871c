//! Viscous operator assembled from bilinear elements spanned by 2^dim
//! neighboring cell centers, with full Gauss quadrature. The force is the
//! exact (negative) adjoint of the element gradient, so the work identity
//! sum u . div S = - sum S(grad u) : grad u holds to round-off and the
//! dissipation deposited into the thermal field is nonnegative per element.
//! Cells outside the box enter as zero-velocity ghosts.

use super::grid::Grid;
use super::rhs::StageBudget;

#[derive(Debug, Clone)]
pub struct ViscousOperator {
    dim: usize,
    n_loc: usize,
    dofs: usize,
    kmu: Vec<f64>,
    keta: Vec<f64>,
}

impl ViscousOperator {
    pub fn new(dim: usize, h: f64) -> Self {
        let n_loc = 1usize << dim;
        let dofs = n_loc * dim;
        let mut kmu = vec![0.0; dofs * dofs];
        let mut keta = vec![0.0; dofs * dofs];

        // 2-point Gauss rule per axis on the reference cube [0,1]^dim
        let gp = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
        let n_gauss = 1usize << dim;
        let w_gauss = (0.5f64).powi(dim as i32) * h.powi(dim as i32);

        let mut grad_n = vec![[0.0f64; 3]; n_loc];
        for g in 0..n_gauss {
            let mut xi = [0.0f64; 3];
            for a in 0..dim {
                xi[a] = gp[(g >> a) & 1];
            }
            for (k, gn) in grad_n.iter_mut().enumerate() {
                for a in 0..dim {
                    let mut v = if (k >> a) & 1 == 1 { 1.0 } else { -1.0 };
                    for b in 0..dim {
                        if b != a {
                            v *= if (k >> b) & 1 == 1 { xi[b] } else { 1.0 - xi[b] };
                        }
                    }
                    gn[a] = v / h;
                }
            }
            // contribution of the unit dof (l, b) to the traction on (k, a)
            for l in 0..n_loc {
                for b in 0..dim {
                    // G has a single nonzero row: G[b][c] = grad_n[l][c]
                    let mut div = 0.0;
                    let g_row = grad_n[l];
                    div += g_row[b];
                    for k in 0..n_loc {
                        for a in 0..dim {
                            // mu part: S[a][c] = G[a][c] + G[c][a] - (2/dim) div d_ac
                            let mut s_dot = 0.0;
                            for c in 0..dim {
                                let mut s_ac = 0.0;
                                if a == b {
                                    s_ac += g_row[c];
                                }
                                if c == b {
                                    s_ac += g_row[a];
                                }
                                if a == c {
                                    s_ac -= 2.0 / dim as f64 * div;
                                }
                                s_dot += s_ac * grad_n[k][c];
                            }
                            kmu[(k * dim + a) * dofs + (l * dim + b)] += w_gauss * s_dot;
                            // eta part: S = div I
                            keta[(k * dim + a) * dofs + (l * dim + b)] +=
                                w_gauss * div * grad_n[k][a];
                        }
                    }
                }
            }
        }
        Self { dim, n_loc, dofs, kmu, keta }
    }

    /// Assemble viscous forces and dissipation over the whole grid.
    ///
    /// Adds -div S to `d_mom` (per-volume tendency), writes the per-cell
    /// dissipation density share into `heat` and tallies the budget. `v_cells`
    /// carries the boundary velocity field for the S : grad V work term.
    #[allow(clippy::too_many_arguments)]
    pub fn apply(
        &self,
        grid: &Grid,
        u: &[Vec<f64>; 3],
        v_cells: &[[f64; 3]],
        mu_elem_src: &[f64],
        eta_elem_src: &[f64],
        phi: &[f64],
        heat: &mut [f64],
        d_mom: &mut [Vec<f64>; 3],
        budget: &mut StageBudget,
    ) {
        let dim = self.dim;
        let vol = grid.cell_volume();
        let solid_band = 1.5 * grid.h;
        let mut u_loc = vec![0.0f64; self.dofs];
        let mut v_loc = vec![0.0f64; self.dofs];
        let mut f_loc = vec![0.0f64; self.dofs];
        let mut cells_loc = vec![usize::MAX; self.n_loc];

        let (en0, en1, en2) = (
            grid.n[0] + 1,
            grid.n[1] + 1,
            if dim == 3 { grid.n[2] + 1 } else { 1 },
        );
        for ek in 0..en2 {
            for ej in 0..en1 {
                for ei in 0..en0 {
                    // gather the 2^dim cells touching this node; the element
                    // coefficients take the most restrictive adjacent value
                    // so the per-cell stability caps hold element-wise
                    let mut n_real = 0usize;
                    let mut mu_e = f64::INFINITY;
                    let mut eta_e = f64::INFINITY;
                    let mut all_solid = true;
                    for k in 0..self.n_loc {
                        let ci = ei as isize - 1 + ((k & 1) as isize);
                        let cj = ej as isize - 1 + (((k >> 1) & 1) as isize);
                        let ck = if dim == 3 { ek as isize - 1 + (((k >> 2) & 1) as isize) } else { 0 };
                        let inside = ci >= 0
                            && (ci as usize) < grid.n[0]
                            && cj >= 0
                            && (cj as usize) < grid.n[1]
                            && ck >= 0
                            && (ck as usize) < grid.n[2];
                        if inside {
                            let c = grid.idx(ci as usize, cj as usize, ck as usize);
                            cells_loc[k] = c;
                            n_real += 1;
                            mu_e = mu_e.min(mu_elem_src[c]);
                            eta_e = eta_e.min(eta_elem_src[c]);
                            if phi[c] <= solid_band {
                                all_solid = false;
                            }
                            for a in 0..dim {
                                u_loc[k * dim + a] = u[a][c];
                                v_loc[k * dim + a] = v_cells[c][a];
                            }
                        } else {
                            cells_loc[k] = usize::MAX;
                            for a in 0..dim {
                                u_loc[k * dim + a] = 0.0;
                                v_loc[k * dim + a] = 0.0;
                            }
                        }
                    }
                    if n_real == 0 {
                        continue;
                    }
                    if mu_e == 0.0 && eta_e == 0.0 {
                        continue;
                    }

                    // f = (mu K_mu + eta K_eta) u
                    for (r, f) in f_loc.iter_mut().enumerate() {
                        let row_mu = &self.kmu[r * self.dofs..(r + 1) * self.dofs];
                        let mut acc = 0.0;
                        for (c, uv) in u_loc.iter().enumerate() {
                            acc += row_mu[c] * uv;
                        }
                        acc *= mu_e;
                        if eta_e != 0.0 {
                            let row_eta = &self.keta[r * self.dofs..(r + 1) * self.dofs];
                            let mut acc2 = 0.0;
                            for (c, uv) in u_loc.iter().enumerate() {
                                acc2 += row_eta[c] * uv;
                            }
                            acc += eta_e * acc2;
                        }
                        *f = acc;
                    }

                    let mut diss = 0.0;
                    let mut work_v = 0.0;
                    for r in 0..self.dofs {
                        diss += u_loc[r] * f_loc[r];
                        work_v += v_loc[r] * f_loc[r];
                    }
                    // round-off can leave a tiny negative quadratic form
                    diss = diss.max(0.0);
                    budget.visc_dissipation += diss;
                    budget.work_visc_v += work_v;
                    if all_solid {
                        budget.solid_visc_dissipation += diss;
                    }

                    let share = diss / (n_real as f64 * vol);
                    for k in 0..self.n_loc {
                        let c = cells_loc[k];
                        if c != usize::MAX {
                            heat[c] += share;
                            for a in 0..dim {
                                d_mom[a][c] -= f_loc[k * dim + a] / vol;
                            }
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::stress_dissipation;
    use approx::assert_relative_eq;

    fn linear_field(grid: &Grid, g: &[[f64; 3]; 3]) -> [Vec<f64>; 3] {
        let n = grid.cells();
        let mut u = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for c in 0..n {
            let x = grid.cell_center(c);
            for a in 0..grid.dim {
                u[a][c] = (0..grid.dim).map(|b| g[a][b] * x[b]).sum();
            }
        }
        u
    }

    #[test]
    fn linear_exactness_and_zero_interior_force() {
        let grid = Grid::new(2, 16, 1.0).unwrap();
        let op = ViscousOperator::new(2, grid.h);
        let g = [[0.3, -0.7, 0.0], [1.1, 0.2, 0.0], [0.0, 0.0, 0.0]];
        let u = linear_field(&grid, &g);
        let n = grid.cells();
        let v = vec![[0.0; 3]; n];
        let mu = vec![1.3; n];
        let eta = vec![0.4; n];
        let mut heat = vec![0.0; n];
        let mut d_mom = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut budget = StageBudget::default();
        op.apply(&grid, &u, &v, &mu, &eta, &vec![-1.0; n], &mut heat, &mut d_mom, &mut budget);

        // interior cells see zero force for constant stress
        for j in 2..14 {
            for i in 2..14 {
                let c = grid.idx(i, j, 0);
                for a in 0..2 {
                    assert!(
                        d_mom[a][c].abs() < 1e-10,
                        "interior viscous force not zero: {}",
                        d_mom[a][c]
                    );
                }
            }
        }

        // per-element dissipation matches the pointwise stress contraction
        // away from the ghost boundary: compare the interior total
        let exact_density = stress_dissipation(&g, 1.3, 0.4, 2);
        let interior_cells = 12.0 * 12.0;
        let mut interior_heat = 0.0;
        for j in 2..14 {
            for i in 2..14 {
                interior_heat += heat[grid.idx(i, j, 0)] * grid.cell_volume();
            }
        }
        assert_relative_eq!(
            interior_heat,
            exact_density * interior_cells * grid.cell_volume(),
            max_relative = 1e-10
        );
    }

    #[test]
    fn work_identity_random_field() {
        let grid = Grid::new(2, 16, 1.0).unwrap();
        let op = ViscousOperator::new(2, grid.h);
        let n = grid.cells();
        let mut u = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut state = 0x12345u64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for c in 0..n {
            u[0][c] = rnd();
            u[1][c] = rnd();
        }
        let v = vec![[0.0; 3]; n];
        let mu: Vec<f64> = (0..n).map(|_| 0.5 + rnd().abs()).collect();
        let eta = vec![0.2; n];
        let mut heat = vec![0.0; n];
        let mut d_mom = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut budget = StageBudget::default();
        op.apply(&grid, &u, &v, &mu, &eta, &vec![-1.0; n], &mut heat, &mut d_mom, &mut budget);

        // sum u . (div S) h^d = -dissipation, exactly
        let mut work = 0.0;
        for a in 0..2 {
            for c in 0..n {
                work += u[a][c] * d_mom[a][c] * grid.cell_volume();
            }
        }
        assert_relative_eq!(work, -budget.visc_dissipation, max_relative = 1e-11);
        assert!(budget.visc_dissipation >= 0.0);
        // deposited heat accounts for the full dissipation
        let heat_total: f64 = heat.iter().map(|&q| q * grid.cell_volume()).sum();
        assert_relative_eq!(heat_total, budget.visc_dissipation, max_relative = 1e-11);
    }

    #[test]
    fn checkerboard_mode_is_damped() {
        let grid = Grid::new(2, 16, 1.0).unwrap();
        let op = ViscousOperator::new(2, grid.h);
        let n = grid.cells();
        let mut u = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for c in 0..n {
            let (i, j, _) = grid.unflatten(c);
            u[0][c] = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        }
        let v = vec![[0.0; 3]; n];
        let mu = vec![1.0; n];
        let eta = vec![0.0; n];
        let mut heat = vec![0.0; n];
        let mut d_mom = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut budget = StageBudget::default();
        op.apply(&grid, &u, &v, &mu, &eta, &vec![-1.0; n], &mut heat, &mut d_mom, &mut budget);
        assert!(budget.visc_dissipation > 1.0, "checkerboard must dissipate");
    }
}

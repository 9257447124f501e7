//! The curvature formulas of [`crate::geometry`] over concrete values:
//! truncated Taylor series at a jet point, or samples on a grid. Index
//! conventions match the symbolic versions exactly, so a value computed here
//! is the value of the corresponding symbolic component.

pub trait Field: Clone {
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    /// `None` when the value is not invertible.
    fn recip(&self) -> Option<Self>;
    /// `self * num / den`.
    fn scale(&self, num: i64, den: i64) -> Self;
    /// Derivative along coordinate `k`.
    fn deriv(&self, k: usize) -> Self;
}

pub type Mat<F> = Vec<Vec<F>>;
pub type T3<F> = Vec<Vec<Vec<F>>>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FieldError {
    #[error("metric is singular at the sample")]
    Singular,
}

fn zero_of<F: Field>(x: &F) -> F {
    x.scale(0, 1)
}

fn sum<F: Field>(z: &F, it: impl Iterator<Item = F>) -> F {
    it.fold(z.clone(), |a, b| a.add(&b))
}

pub fn det<F: Field>(m: &Mat<F>) -> F {
    let n = m.len();
    match n {
        1 => m[0][0].clone(),
        2 => m[0][0].mul(&m[1][1]).sub(&m[0][1].mul(&m[1][0])),
        _ => {
            let mut acc = zero_of(&m[0][0]);
            for c in 0..n {
                let minor: Mat<F> =
                    (1..n).map(|r| (0..n).filter(|&k| k != c).map(|k| m[r][k].clone()).collect()).collect();
                let t = m[0][c].mul(&det(&minor));
                acc = if c % 2 == 0 { acc.add(&t) } else { acc.sub(&t) };
            }
            acc
        }
    }
}

pub fn inverse<F: Field>(m: &Mat<F>) -> Result<Mat<F>, FieldError> {
    let n = m.len();
    let inv_d = det(m).recip().ok_or(FieldError::Singular)?;
    if n == 1 {
        return Ok(vec![vec![inv_d]]);
    }
    let mut out = vec![Vec::with_capacity(n); n];
    for (i, row) in out.iter_mut().enumerate() {
        for j in 0..n {
            // adj[i][j] = cofactor of (j, i)
            let minor: Mat<F> = (0..n)
                .filter(|&r| r != j)
                .map(|r| (0..n).filter(|&k| k != i).map(|k| m[r][k].clone()).collect())
                .collect();
            let c = det(&minor).mul(&inv_d);
            row.push(if (i + j) % 2 == 0 { c } else { c.scale(-1, 1) });
        }
    }
    Ok(out)
}

/// `dg[k][i][j] = D_k g_ij`.
pub fn metric_derivatives<F: Field>(g: &Mat<F>) -> T3<F> {
    let n = g.len();
    (0..n).map(|k| (0..n).map(|i| (0..n).map(|j| g[i][j].deriv(k)).collect()).collect()).collect()
}

/// Levi-Civita symbols `G^i_{jk}`.
pub fn christoffel<F: Field>(g_inv: &Mat<F>, dg: &T3<F>) -> T3<F> {
    let n = g_inv.len();
    let lower: T3<F> = (0..n)
        .map(|l| {
            (0..n)
                .map(|j| (0..n).map(|k| dg[j][l][k].add(&dg[k][l][j]).sub(&dg[l][j][k]).scale(1, 2)).collect())
                .collect()
        })
        .collect();
    let z = zero_of(&g_inv[0][0]);
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| sum(&z, (0..n).map(|l| g_inv[i][l].mul(&lower[l][j][k])))).collect())
                .collect()
        })
        .collect()
}

/// `R_jl = R^i_{jil}` of an arbitrary connection.
pub fn ricci<F: Field>(gamma: &T3<F>) -> Mat<F> {
    let n = gamma.len();
    let z = zero_of(&gamma[0][0][0]);
    let trace: Vec<F> = (0..n).map(|j| sum(&z, (0..n).map(|i| gamma[i][i][j].clone()))).collect();
    (0..n)
        .map(|j| {
            (0..n)
                .map(|l| {
                    let mut acc = sum(&z, (0..n).map(|i| gamma[i][l][j].deriv(i)));
                    acc = acc.sub(&trace[j].deriv(l));
                    for m in 0..n {
                        acc = acc.add(&trace[m].mul(&gamma[m][l][j]));
                        for i in 0..n {
                            acc = acc.sub(&gamma[i][l][m].mul(&gamma[m][i][j]));
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

/// Ricci tensor and scalar curvature of a metric.
pub fn curvature<F: Field>(g: &Mat<F>) -> Result<(T3<F>, Mat<F>, F), FieldError> {
    let g_inv = inverse(g)?;
    let gamma = christoffel(&g_inv, &metric_derivatives(g));
    let ric = ricci(&gamma);
    let n = g.len();
    let z = zero_of(&g[0][0]);
    let scalar = sum(&z, (0..n).flat_map(|j| (0..n).map(move |l| (j, l))).map(|(j, l)| g_inv[j][l].mul(&ric[j][l])));
    Ok((gamma, ric, scalar))
}

/// Cotton tensor `C[p][q][r] = nabla_r S_pq - nabla_q S_pr`.
pub fn cotton<F: Field>(g: &Mat<F>) -> Result<T3<F>, FieldError> {
    let n = g.len();
    let (gamma, ric, scalar) = curvature(g)?;
    let quarter = scalar.scale(1, 4);
    let s: Mat<F> = (0..n).map(|p| (0..n).map(|q| ric[p][q].sub(&quarter.mul(&g[p][q]))).collect()).collect();
    let ds = |r: usize, p: usize, q: usize| {
        let mut acc = s[p][q].deriv(r);
        for m in 0..n {
            acc = acc.sub(&gamma[m][r][p].mul(&s[m][q])).sub(&gamma[m][r][q].mul(&s[p][m]));
        }
        acc
    };
    Ok((0..n).map(|p| (0..n).map(|q| (0..n).map(|r| ds(r, p, q).sub(&ds(q, p, r))).collect()).collect()).collect())
}

/// Covector `w_k = 2 g_kj D_s(g^js) + D_k ln det g`.
pub fn omega<F: Field>(g: &Mat<F>) -> Result<Vec<F>, FieldError> {
    let n = g.len();
    let g_inv = inverse(g)?;
    let d = det(g);
    let inv_d = d.recip().ok_or(FieldError::Singular)?;
    let z = zero_of(&d);
    let div: Vec<F> = (0..n).map(|j| sum(&z, (0..n).map(|s| g_inv[j][s].deriv(s)))).collect();
    Ok((0..n)
        .map(|k| {
            let t = sum(&z, (0..n).map(|j| g[k][j].mul(&div[j])));
            d.deriv(k).mul(&inv_d).add(&t.scale(2, 1))
        })
        .collect())
}

/// Symbols of the Weyl connection of `(g, omega)`.
pub fn weyl_gamma<F: Field>(g: &Mat<F>, g_inv: &Mat<F>, om: &[F]) -> T3<F> {
    let n = g.len();
    let mut gamma = christoffel(g_inv, &metric_derivatives(g));
    let z = zero_of(&g[0][0]);
    let up: Vec<F> = (0..n).map(|i| sum(&z, (0..n).map(|l| g_inv[i][l].mul(&om[l])))).collect();
    for (i, gi) in gamma.iter_mut().enumerate() {
        for j in 0..n {
            for k in 0..n {
                let mut corr = up[i].mul(&g[j][k]);
                if i == k {
                    corr = corr.sub(&om[j]);
                }
                if i == j {
                    corr = corr.sub(&om[k]);
                }
                gi[j][k] = gi[j][k].add(&corr.scale(1, 2));
            }
        }
    }
    gamma
}

/// Trace-free symmetrized Ricci tensor of the Weyl connection.
pub fn ew_tensor<F: Field>(g: &Mat<F>, om: &[F]) -> Result<Mat<F>, FieldError> {
    let n = g.len();
    let g_inv = inverse(g)?;
    let r = ricci(&weyl_gamma(g, &g_inv, om));
    let sym: Mat<F> = (0..n).map(|i| (0..n).map(|j| r[i][j].add(&r[j][i]).scale(1, 2)).collect()).collect();
    let z = zero_of(&g[0][0]);
    let tr = sum(&z, (0..n).flat_map(|p| (0..n).map(move |q| (p, q))).map(|(p, q)| g_inv[p][q].mul(&sym[p][q])));
    let third = tr.scale(1, n as i64);
    Ok((0..n).map(|i| (0..n).map(|j| sym[i][j].sub(&third.mul(&g[i][j]))).collect()).collect())
}

/// Ricci tensor of the Levi-Civita connection.
pub fn ricci_of_metric<F: Field>(g: &Mat<F>) -> Result<Mat<F>, FieldError> {
    Ok(curvature(g)?.1)
}

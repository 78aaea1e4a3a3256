//! Tangent vector fields on S² built from real spherical harmonics.
//!
//! Harmonics are evaluated as real regular solid harmonics (Racah
//! normalization) through the standard three-term recursion, carrying the
//! Cartesian gradient along with each value. On the unit sphere the surface
//! gradient of a degree-`l` harmonic `P` is `grad P - l P s`, and the
//! divergence-free companion is `s x grad P`.

use nalgebra::Vector3;

/// Value and Cartesian gradient of a polynomial.
#[derive(Debug, Clone, Copy)]
struct Dual {
    v: f64,
    g: Vector3<f64>,
}

impl Dual {
    const ZERO: Dual = Dual {
        v: 0.0,
        g: Vector3::new(0.0, 0.0, 0.0),
    };

    fn scale(self, a: f64) -> Dual {
        Dual {
            v: self.v * a,
            g: self.g * a,
        }
    }

    fn add(self, o: Dual) -> Dual {
        Dual {
            v: self.v + o.v,
            g: self.g + o.g,
        }
    }

    /// Multiply by the coordinate `x[axis]`.
    fn times_coord(self, x: &Vector3<f64>, axis: usize) -> Dual {
        let mut g = self.g * x[axis];
        g[axis] += self.v;
        Dual {
            v: self.v * x[axis],
            g,
        }
    }

    /// Multiply by `|x|²`.
    fn times_r2(self, x: &Vector3<f64>) -> Dual {
        let r2 = x.norm_squared();
        Dual {
            v: self.v * r2,
            g: self.g * r2 + x * (2.0 * self.v),
        }
    }
}

/// Real solid harmonics of degree `0..=max_degree` at `x`.
///
/// Returned per degree `l` as `2l + 1` entries ordered
/// `[C_l0, C_l1, S_l1, ..., C_ll, S_ll]`.
fn solid_harmonics(x: &Vector3<f64>, max_degree: usize) -> Vec<Vec<Dual>> {
    // c[l][m], s[l][m] for 0 <= m <= l
    let mut c: Vec<Vec<Dual>> = Vec::with_capacity(max_degree + 1);
    let mut s: Vec<Vec<Dual>> = Vec::with_capacity(max_degree + 1);
    c.push(vec![Dual {
        v: 1.0,
        g: Vector3::zeros(),
    }]);
    s.push(vec![Dual::ZERO]);

    for l in 0..max_degree {
        let lf = l as f64;
        let mut cn = vec![Dual::ZERO; l + 2];
        let mut sn = vec![Dual::ZERO; l + 2];
        for m in 0..=l {
            let mf = m as f64;
            let mut ct = c[l][m].times_coord(x, 2).scale(2.0 * lf + 1.0);
            let mut st = s[l][m].times_coord(x, 2).scale(2.0 * lf + 1.0);
            if m < l {
                let k = ((lf + mf) * (lf - mf)).sqrt();
                ct = ct.add(c[l - 1][m].times_r2(x).scale(-k));
                st = st.add(s[l - 1][m].times_r2(x).scale(-k));
            }
            let d = 1.0 / ((lf + mf + 1.0) * (lf - mf + 1.0)).sqrt();
            cn[m] = ct.scale(d);
            sn[m] = st.scale(d);
        }
        let a = if l == 0 {
            1.0
        } else {
            ((2.0 * lf + 1.0) / (2.0 * lf + 2.0)).sqrt()
        };
        let (cl, sl) = (c[l][l], s[l][l]);
        cn[l + 1] = cl
            .times_coord(x, 0)
            .add(sl.times_coord(x, 1).scale(-1.0))
            .scale(a);
        sn[l + 1] = cl.times_coord(x, 1).add(sl.times_coord(x, 0)).scale(a);
        c.push(cn);
        s.push(sn);
    }

    (0..=max_degree)
        .map(|l| {
            let mut out = Vec::with_capacity(2 * l + 1);
            out.push(c[l][0]);
            for m in 1..=l {
                out.push(c[l][m]);
                out.push(s[l][m]);
            }
            out
        })
        .collect()
}

/// Real spherical harmonic values `Y_lm(s)` for `1 <= l <= max_degree`,
/// each scaled to unit mean square over the sphere.
pub fn harmonic_values(s: &Vector3<f64>, max_degree: usize) -> Vec<f64> {
    let sh = solid_harmonics(s, max_degree);
    let mut out = Vec::new();
    for (l, row) in sh.iter().enumerate().skip(1) {
        let norm = ((2 * l + 1) as f64).sqrt();
        out.extend(row.iter().map(|d| d.v * norm));
    }
    out
}

/// Number of tangent fields for a given maximum degree: `2 * L * (L + 2)`.
pub fn basis_len(max_degree: usize) -> usize {
    2 * max_degree * (max_degree + 2)
}

/// Evaluate every basis field at the unit vector `s`.
///
/// The first half are gradient fields `grad Y_lm`, the second half the
/// rotated fields `s x grad Y_lm`, both in degree-major order. Each field is
/// scaled to unit mean-square magnitude over the sphere.
pub fn tangent_basis_at(s: &Vector3<f64>, max_degree: usize) -> Vec<Vector3<f64>> {
    let sh = solid_harmonics(s, max_degree);
    let half = max_degree * (max_degree + 2);
    let mut grads = Vec::with_capacity(half);
    for (l, row) in sh.iter().enumerate().skip(1) {
        let lf = l as f64;
        let norm = ((2.0 * lf + 1.0) / (lf * (lf + 1.0))).sqrt();
        for d in row {
            let tangential = d.g - s * (lf * d.v);
            grads.push(tangential * norm);
        }
    }
    let curls: Vec<_> = grads.iter().map(|g| s.cross(g)).collect();
    grads.extend(curls);
    grads
}

/// Basis fields sampled at a fixed set of points, stored field-major.
#[derive(Debug, Clone)]
pub struct TangentBasis {
    max_degree: usize,
    fields: Vec<Vec<Vector3<f64>>>,
}

impl TangentBasis {
    pub fn sample(points: &[Vector3<f64>], max_degree: usize) -> Self {
        let k = basis_len(max_degree);
        let mut fields = vec![Vec::with_capacity(points.len()); k];
        for p in points {
            for (field, v) in fields.iter_mut().zip(tangent_basis_at(p, max_degree)) {
                field.push(v);
            }
        }
        Self { max_degree, fields }
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn field(&self, k: usize) -> &[Vector3<f64>] {
        &self.fields[k]
    }

    /// `sum_k coeffs[k] * field_k` at every sample point.
    pub fn combine(&self, coeffs: &[f64]) -> Vec<Vector3<f64>> {
        let n = self.fields.first().map_or(0, Vec::len);
        let mut out = vec![Vector3::zeros(); n];
        for (field, &c) in self.fields.iter().zip(coeffs) {
            if c == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(field) {
                *o += v * c;
            }
        }
        out
    }
}

//! Closed-form eigenvalues and a Sylvester positive-definiteness test for
//! symmetric 3x3 matrices.

/// Row-major symmetric 3x3 matrix (only symmetry of the stored entries is
/// assumed, not enforced).
pub type Sym3 = [[f64; 3]; 3];

fn det3(m: &Sym3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Eigenvalues in ascending order via the trigonometric solution of the
/// characteristic cubic (exact up to round-off for symmetric input).
pub fn eigenvalues(m: &Sym3) -> [f64; 3] {
    let p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    if p1 == 0.0 {
        let mut d = [m[0][0], m[1][1], m[2][2]];
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        return d;
    }
    let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let mut b = *m;
    for (i, row) in b.iter_mut().enumerate() {
        row[i] -= q;
        for v in row.iter_mut() {
            *v /= p;
        }
    }
    let r = (det3(&b) / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e_max = q + 2.0 * p * phi.cos();
    let e_min = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
    [e_min, 3.0 * q - e_max - e_min, e_max]
}

pub fn lambda_min(m: &Sym3) -> f64 {
    eigenvalues(m)[0]
}

/// Sylvester criterion: all leading principal minors strictly positive.
pub fn sylvester_pd(m: &Sym3) -> bool {
    m[0][0] > 0.0 && m[0][0] * m[1][1] - m[0][1] * m[1][0] > 0.0 && det3(m) > 0.0
}

/// Positive-definiteness verdict from the eigenvalue test, with a
/// "marginal" band around zero that is reported instead of "pass".
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Definiteness {
    Positive,
    Marginal,
    NotPositive,
}

pub const MARGINAL_BAND: f64 = 1e-12;

pub fn definiteness(m: &Sym3) -> Definiteness {
    let lmin = lambda_min(m);
    if lmin.abs() <= MARGINAL_BAND {
        Definiteness::Marginal
    } else if lmin > 0.0 {
        Definiteness::Positive
    } else {
        Definiteness::NotPositive
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn diagonal_matrix_eigenvalues_sorted() {
        let m = [[3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]];
        assert_eq!(eigenvalues(&m), [1.0, 2.0, 3.0]);
    }

    #[test]
    fn known_eigenvalues() {
        // [[2,1,0],[1,2,1],[0,1,2]] has eigenvalues 2, 2 +/- sqrt(2).
        let m = [[2.0, 1.0, 0.0], [1.0, 2.0, 1.0], [0.0, 1.0, 2.0]];
        let e = eigenvalues(&m);
        let s2 = 2.0f64.sqrt();
        assert_relative_eq!(e[0], 2.0 - s2, epsilon = 1e-12);
        assert_relative_eq!(e[1], 2.0, epsilon = 1e-12);
        assert_relative_eq!(e[2], 2.0 + s2, epsilon = 1e-12);
    }

    #[test]
    fn sylvester_and_eigen_agree() {
        let pd = [[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]];
        assert!(sylvester_pd(&pd));
        assert_eq!(definiteness(&pd), Definiteness::Positive);
        let npd = [[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(!sylvester_pd(&npd));
        assert_eq!(definiteness(&npd), Definiteness::NotPositive);
    }

    #[test]
    fn zero_eigenvalue_is_marginal() {
        let m = [[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert_eq!(definiteness(&m), Definiteness::Marginal);
    }

    #[test]
    fn trace_and_det_invariants() {
        let m = [[4.0, 1.0, -2.0], [1.0, 3.0, 0.5], [-2.0, 0.5, 5.0]];
        let e = eigenvalues(&m);
        assert_relative_eq!(e[0] + e[1] + e[2], 12.0, epsilon = 1e-10);
        assert_relative_eq!(e[0] * e[1] * e[2], det3(&m), max_relative = 1e-10);
    }
}

//! Quaternionic structures, the space-form curvature oracle and the
//! block decompositions of `g(·, J_α ·)`.

use crate::error::{Error, Result};
use crate::geometry::{inner, CurvatureTensor, Mat, OrthoFrame, Vector};

/// Invariant tolerance for structure checks.
pub const STRUCTURE_TOL: f64 = 1e-10;

/// Three almost complex structures `J_1, J_2, J_3` on a `4m`-dimensional space.
#[derive(Clone, Debug, PartialEq)]
pub struct QuaternionicStructure {
    pub j: [Mat; 3],
}

/// Left multiplication by `i` on ℍ ≅ ℝ⁴ (basis 1, i, j, k).
fn unit_i() -> Mat {
    Mat::from_row_slice(4, 4, &[0., -1., 0., 0., 1., 0., 0., 0., 0., 0., 0., -1., 0., 0., 1., 0.])
}

fn unit_j() -> Mat {
    Mat::from_row_slice(4, 4, &[0., 0., -1., 0., 0., 0., 0., 1., 1., 0., 0., 0., 0., -1., 0., 0.])
}

fn unit_k() -> Mat {
    Mat::from_row_slice(4, 4, &[0., 0., 0., -1., 0., 0., -1., 0., 0., 1., 0., 0., 1., 0., 0., 0.])
}

fn block_diag(b: &Mat, m: usize) -> Mat {
    let mut out = Mat::zeros(4 * m, 4 * m);
    for k in 0..m {
        out.view_mut((4 * k, 4 * k), (4, 4)).copy_from(b);
    }
    out
}

impl QuaternionicStructure {
    /// Blockwise left multiplication by the quaternion units on ℝ^{4m}.
    pub fn quat_flat(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Structure("quat-flat needs m ≥ 1".into()));
        }
        Ok(QuaternionicStructure {
            j: [block_diag(&unit_i(), m), block_diag(&unit_j(), m), block_diag(&unit_k(), m)],
        })
    }

    /// Registry lookup: `"quat-flat:m"`.
    pub fn builtin(name: &str) -> Result<Self> {
        match name.split_once(':') {
            Some(("quat-flat", m)) => {
                let m: usize = m
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad structure name `{name}`")))?;
                Self::quat_flat(m)
            }
            _ => Err(Error::Config(format!("unknown quaternionic structure `{name}`"))),
        }
    }

    pub fn from_matrices(j: [Mat; 3]) -> Result<Self> {
        let n = j[0].nrows();
        if n == 0 || n % 4 != 0 {
            return Err(Error::Structure(format!("dimension {n} is not a positive multiple of 4")));
        }
        if j.iter().any(|m| m.nrows() != n || m.ncols() != n) {
            return Err(Error::Structure("structure matrices must be square of equal size".into()));
        }
        Ok(QuaternionicStructure { j })
    }

    pub fn dim(&self) -> usize {
        self.j[0].nrows()
    }
}

/// Largest violation of each structure identity.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureReport {
    /// `max |J_α² + I|`, per α.
    pub square: [f64; 3],
    /// `max |J_1J_2 − J_3|`.
    pub product: f64,
    /// `max |J_1J_2 + J_2J_1|`.
    pub anticommute: f64,
    /// `max |J_αᵀ g J_α − g|`, per α.
    pub hermitian: [f64; 3],
}

impl StructureReport {
    pub fn passes(&self) -> bool {
        self.failures().is_empty()
    }

    /// Names of the identities that exceed the tolerance.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for a in 0..3 {
            if !(self.square[a] < STRUCTURE_TOL) {
                out.push(format!("J{}^2 = -I (violation {:e})", a + 1, self.square[a]));
            }
        }
        if !(self.product < STRUCTURE_TOL) {
            out.push(format!("J1J2 = J3 (violation {:e})", self.product));
        }
        if !(self.anticommute < STRUCTURE_TOL) {
            out.push(format!("J1J2 = -J2J1 (violation {:e})", self.anticommute));
        }
        for a in 0..3 {
            if !(self.hermitian[a] < STRUCTURE_TOL) {
                out.push(format!("g(J{0}X, J{0}Y) = g(X, Y) (violation {1:e})", a + 1, self.hermitian[a]));
            }
        }
        out
    }

    pub fn into_result(self) -> Result<Self> {
        let f = self.failures();
        if f.is_empty() {
            Ok(self)
        } else {
            Err(Error::Structure(f.join("; ")))
        }
    }
}

fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

pub fn check_quaternionic_structure(s: &QuaternionicStructure, g: &Mat) -> StructureReport {
    let n = s.dim();
    let id = Mat::identity(n, n);
    let square = [0, 1, 2].map(|a| max_abs(&(&s.j[a] * &s.j[a] + &id)));
    let j12 = &s.j[0] * &s.j[1];
    let j21 = &s.j[1] * &s.j[0];
    let hermitian = [0, 1, 2].map(|a| max_abs(&(s.j[a].transpose() * g * &s.j[a] - g)));
    StructureReport {
        square,
        product: max_abs(&(&j12 - &s.j[2])),
        anticommute: max_abs(&(&j12 + &j21)),
        hermitian,
    }
}

/// Curvature of a quaternionic space form of constant `c` at a point.
#[derive(Clone, Debug)]
pub struct QsfOracle {
    pub c: f64,
    pub structure: QuaternionicStructure,
    pub metric: Mat,
    /// `g J_α`, so that `g(X, J_α Y) = Xᵀ (g J_α) Y`.
    gj: [Mat; 3],
}

impl QsfOracle {
    pub fn new(c: f64, structure: QuaternionicStructure, metric: Mat) -> Result<Self> {
        if metric.nrows() != structure.dim() {
            return Err(Error::Dimension(format!(
                "metric is {0}×{0}, structure acts on dimension {1}",
                metric.nrows(),
                structure.dim()
            )));
        }
        check_quaternionic_structure(&structure, &metric).into_result()?;
        let gj = [0, 1, 2].map(|a| &metric * &structure.j[a]);
        Ok(QsfOracle {
            c,
            structure,
            metric,
            gj,
        })
    }
}

pub fn qsf_curvature(o: &QsfOracle, z1: &Vector, z2: &Vector, z3: &Vector, z4: &Vector) -> f64 {
    let g = |a: &Vector, b: &Vector| inner(&o.metric, a, b);
    // gj(a, X, Y) = g(X, J_a Y); note g(J_a X, Y) = −g(X, J_a Y)
    let gj = |a: usize, x: &Vector, y: &Vector| inner(&o.gj[a], x, y);
    let mut s = g(z2, z3) * g(z1, z4) - g(z1, z3) * g(z2, z4);
    for a in 0..3 {
        s += gj(a, z1, z3) * (-gj(a, z2, z4)) - gj(a, z2, z3) * (-gj(a, z1, z4))
            + 2.0 * gj(a, z1, z2) * (-gj(a, z3, z4));
    }
    0.25 * o.c * s
}

impl CurvatureTensor for QsfOracle {
    fn dim(&self) -> usize {
        self.metric.nrows()
    }
    fn metric(&self) -> &Mat {
        &self.metric
    }
    fn eval(&self, a: &Vector, b: &Vector, c: &Vector, d: &Vector) -> f64 {
        qsf_curvature(self, a, b, c, d)
    }
}

/// Norms of the blocks of `M^α_ab = g(e_a, J_α e_b)` over the frame `[h; v]`.
#[derive(Clone, Debug, PartialEq)]
pub struct JDecomposition {
    /// `‖P_α‖² = Σ_{i,j} g(h_i, J_α h_j)²`
    pub norms_p: [f64; 3],
    /// `‖Q_α‖² = Σ_{i,j} g(v_i, J_α v_j)²`
    pub norms_q: [f64; 3],
    /// `‖P_α^V‖² = Σ_{i,j} g(h_i, J_α v_j)²`
    pub norms_pv: [f64; 3],
    /// Full matrices over the combined frame, horizontal block first.
    pub matrices: [Mat; 3],
    pub s: usize,
    pub l: usize,
}

impl JDecomposition {
    pub fn total(&self, a: usize) -> f64 {
        self.norms_p[a] + self.norms_q[a] + 2.0 * self.norms_pv[a]
    }

    pub fn sum_p(&self) -> f64 {
        self.norms_p.iter().sum()
    }

    pub fn sum_q(&self) -> f64 {
        self.norms_q.iter().sum()
    }

    pub fn sum_pv(&self) -> f64 {
        self.norms_pv.iter().sum()
    }
}

/// Decomposes each `J_α` along an orthonormal split `horizontal ⊕ vertical`.
///
/// In map mode pass the range frame as `horizontal` and the range-perp frame
/// as `vertical`; `norms_p` is then `‖P_α^R‖²`.
pub fn decompose_j(s: &QuaternionicStructure, horizontal: &OrthoFrame, vertical: &OrthoFrame) -> Result<JDecomposition> {
    let g = &horizontal.metric;
    if g.nrows() != s.dim() {
        return Err(Error::Dimension("frame and structure dimensions differ".into()));
    }
    let frame: Vec<&Vector> = horizontal.vectors.iter().chain(&vertical.vectors).collect();
    let defect = horizontal
        .orthonormality_defect()
        .max(vertical.orthonormality_defect())
        .max(horizontal.cross_defect(vertical));
    if defect > 1e-9 {
        return Err(Error::Frame(format!("split is not orthonormal (defect {defect:e})")));
    }
    let (ns, nl) = (horizontal.len(), vertical.len());
    let k = ns + nl;
    let mut norms_p = [0.0; 3];
    let mut norms_q = [0.0; 3];
    let mut norms_pv = [0.0; 3];
    let matrices = [0, 1, 2].map(|a| {
        let gj = g * &s.j[a];
        Mat::from_fn(k, k, |i, j| inner(&gj, frame[i], frame[j]))
    });
    for a in 0..3 {
        let m = &matrices[a];
        for i in 0..k {
            for j in 0..k {
                let v = m[(i, j)] * m[(i, j)];
                match (i < ns, j < ns) {
                    (true, true) => norms_p[a] += v,
                    (false, false) => norms_q[a] += v,
                    (true, false) => norms_pv[a] += v,
                    (false, true) => {}
                }
            }
        }
    }
    Ok(JDecomposition {
        norms_p,
        norms_q,
        norms_pv,
        matrices,
        s: ns,
        l: nl,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{gram_schmidt, Tensor4};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn e(n: usize, i: usize) -> Vector {
        let mut v = Vector::zeros(n);
        v[i] = 1.0;
        v
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vector {
        Vector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn quaternion_units_pass() {
        for m in [1, 2] {
            let s = QuaternionicStructure::quat_flat(m).unwrap();
            assert!(check_quaternionic_structure(&s, &Mat::identity(4 * m, 4 * m)).passes());
        }
    }

    #[test]
    fn flipped_block_fails_product() {
        let mut s = QuaternionicStructure::quat_flat(2).unwrap();
        let flipped = -s.j[0].view((4, 4), (4, 4)).clone_owned();
        s.j[0].view_mut((4, 4), (4, 4)).copy_from(&flipped);
        let r = check_quaternionic_structure(&s, &Mat::identity(8, 8));
        assert!(r.product > 1.0);
        assert!(r.failures().iter().any(|f| f.starts_with("J1J2 = J3")));
    }

    #[test]
    fn quaternion_relations_literal() {
        let s = QuaternionicStructure::quat_flat(1).unwrap();
        // i * j = k on the quaternion 1
        let one = e(4, 0);
        assert_eq!(&s.j[0] * (&s.j[1] * &one), s.j[2].clone() * &one);
        assert_eq!(&s.j[0] * &one, e(4, 1));
    }

    #[test]
    fn qsf_examples() {
        let s = QuaternionicStructure::quat_flat(2).unwrap();
        let zero = QsfOracle::new(0.0, s.clone(), Mat::identity(8, 8)).unwrap();
        let o = QsfOracle::new(4.0, s.clone(), Mat::identity(8, 8)).unwrap();
        let x = e(8, 0);
        let jx = &s.j[0] * &x;
        assert_eq!(qsf_curvature(&zero, &x, &jx, &jx, &x), 0.0);
        assert!((qsf_curvature(&o, &x, &jx, &jx, &x) - 4.0).abs() < 1e-12);
        let y = e(8, 5);
        assert!((qsf_curvature(&o, &x, &y, &y, &x) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn qsf_symmetries_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = QuaternionicStructure::quat_flat(2).unwrap();
        let o = QsfOracle::new(-3.0, s, Mat::identity(8, 8)).unwrap();
        let comps = Tensor4::from_fn(8, |i, j, k, l| qsf_curvature(&o, &e(8, i), &e(8, j), &e(8, k), &e(8, l)));
        let (sym, b) = comps.symmetry_residuals();
        assert!(sym < 1e-12 && b < 1e-12);
        for _ in 0..1000 {
            let z: Vec<Vector> = (0..4).map(|_| random_vec(&mut rng, 8)).collect();
            let r = |a: usize, b: usize, c: usize, d: usize| qsf_curvature(&o, &z[a], &z[b], &z[c], &z[d]);
            let r0 = r(0, 1, 2, 3);
            assert!((r0 + r(1, 0, 2, 3)).abs() < 1e-10);
            assert!((r0 + r(0, 1, 3, 2)).abs() < 1e-10);
            assert!((r0 - r(2, 3, 0, 1)).abs() < 1e-10);
            assert!((r0 + r(1, 2, 0, 3) + r(2, 0, 1, 3)).abs() < 1e-10);
        }
    }

    #[test]
    fn decomposition_examples() {
        let s = QuaternionicStructure::quat_flat(1).unwrap();
        let g = Mat::identity(4, 4);
        let full = gram_schmidt(&(0..4).map(|i| e(4, i)).collect::<Vec<_>>(), &g).unwrap();
        let d = decompose_j(&s, &full, &OrthoFrame::empty(g.clone())).unwrap();
        // every J_α is orthogonal, so its Gram matrix over a full frame has squared norm n
        assert_eq!(d.norms_p, [4.0; 3]);
        assert_eq!(d.norms_q, [0.0; 3]);
        assert_eq!(d.norms_pv, [0.0; 3]);

        let h = gram_schmidt(&[e(4, 0), &s.j[0] * e(4, 0)], &g).unwrap();
        let v = gram_schmidt(&[e(4, 2), e(4, 3)], &g).unwrap();
        let d = decompose_j(&s, &h, &v).unwrap();
        assert_eq!(d.norms_p, [2.0, 0.0, 0.0]);
        assert_eq!(d.norms_pv[0], 0.0);
        for a in 0..3 {
            assert!((d.total(a) - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn decomposition_completeness_random_split() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = QuaternionicStructure::quat_flat(2).unwrap();
        let g = Mat::identity(8, 8);
        for l in 0..=8 {
            let vecs: Vec<Vector> = (0..8).map(|_| random_vec(&mut rng, 8)).collect();
            let f = gram_schmidt(&vecs, &g).unwrap();
            let h = OrthoFrame {
                vectors: f.vectors[l..].to_vec(),
                metric: g.clone(),
            };
            let v = OrthoFrame {
                vectors: f.vectors[..l].to_vec(),
                metric: g.clone(),
            };
            let d = decompose_j(&s, &h, &v).unwrap();
            for a in 0..3 {
                assert!((d.total(a) - 8.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn non_orthonormal_split_rejected() {
        let s = QuaternionicStructure::quat_flat(1).unwrap();
        let g = Mat::identity(4, 4);
        let h = OrthoFrame {
            vectors: vec![e(4, 0) * 2.0],
            metric: g.clone(),
        };
        assert!(matches!(decompose_j(&s, &h, &OrthoFrame::empty(g)), Err(Error::Frame(_))));
    }
}

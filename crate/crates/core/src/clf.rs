//! Quadratic control Lyapunov function `V = ½ zᵀ P z` with
//! `P = diag(kx, ky) ⊗ P0`, and its certification against the Riccati
//! inequality `AᵀP + PA − PBBᵀP < 0` of the chain-of-four-integrators pair.

use nalgebra::{Matrix4, SMatrix, Vector2, Vector4};
use rayon::prelude::*;

use crate::{Error, Matrix8, Matrix8x2, Result, Vector8};

/// Published 4×4 block of the Lyapunov weight.
pub const P0: [[f64; 4]; 4] = [
    [0.25, 0.40, 0.95, 0.70],
    [0.40, 2.40, 4.00, 3.80],
    [0.95, 4.00, 9.80, 9.40],
    [0.70, 3.80, 9.40, 13.0],
];

/// Gain range over which the Riccati inequality is claimed to hold.
pub const CLAIMED_GAIN_RANGE: (f64, f64) = (0.2, 1e6);

/// Relative asymmetry tolerated by the definiteness checks.
const SYMMETRY_TOL: f64 = 1e-12;

pub fn p0() -> Matrix4<f64> {
    Matrix4::from_fn(|i, j| P0[i][j])
}

/// 4×4 upper shift, the single-channel chain of four integrators.
pub fn shift4() -> Matrix4<f64> {
    Matrix4::from_fn(|i, j| if j == i + 1 { 1.0 } else { 0.0 })
}

/// `[0, 0, 0, 1]ᵀ`.
pub fn input4() -> Vector4<f64> {
    Vector4::new(0.0, 0.0, 0.0, 1.0)
}

/// `A = I₂ ⊗ shift4`, `B = I₂ ⊗ e₄`: the linearized normal form `ż = Az + Bv`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPair {
    pub a: Matrix8,
    pub b: Matrix8x2,
}

impl LinearPair {
    pub fn chain_of_integrators() -> Self {
        let a = Matrix8::from_fn(|i, j| if j == i + 1 && i != 3 { 1.0 } else { 0.0 });
        let mut b = Matrix8x2::zeros();
        b[(3, 0)] = 1.0;
        b[(7, 1)] = 1.0;
        Self { a, b }
    }
}

/// Outcome of a Cholesky-pivot definiteness test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefiniteCertificate {
    pub definite: bool,
    /// Smallest pivot encountered, including the failing one.
    pub margin: f64,
}

/// Runs a Cholesky factorization and reports the smallest pivot
/// `d_j = M_jj − Σ_k L_jk²`. The matrix is positive definite iff every pivot
/// is strictly positive; factorization stops at the first one that is not.
fn cholesky_pivots<const N: usize>(m: &SMatrix<f64, N, N>) -> DefiniteCertificate {
    let mut l = SMatrix::<f64, N, N>::zeros();
    let mut margin = f64::INFINITY;
    for j in 0..N {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        margin = margin.min(d);
        if !(d > 0.0) {
            return DefiniteCertificate {
                definite: false,
                margin,
            };
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..N {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    DefiniteCertificate {
        definite: true,
        margin,
    }
}

fn check_symmetric<const N: usize>(m: &SMatrix<f64, N, N>) -> Result<()> {
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::Asymmetric(asym));
    }
    Ok(())
}

pub fn certify_positive_definite<const N: usize>(
    m: &SMatrix<f64, N, N>,
) -> Result<DefiniteCertificate> {
    check_symmetric(m)?;
    Ok(cholesky_pivots(m))
}

/// `definite` is true iff `−M` admits a Cholesky factorization.
pub fn certify_negative_definite<const N: usize>(
    m: &SMatrix<f64, N, N>,
) -> Result<DefiniteCertificate> {
    check_symmetric(m)?;
    Ok(cholesky_pivots(&(-m)))
}

/// Certified CLF weight.
#[derive(Debug, Clone, PartialEq)]
pub struct ClfMatrix {
    pub p: Matrix8,
    pub kx: f64,
    pub ky: f64,
    pub p0: Matrix4<f64>,
    /// Positive-definiteness certificate of `p`.
    pub certificate: DefiniteCertificate,
}

pub fn build_clf(kx: f64, ky: f64) -> Result<ClfMatrix> {
    for (name, k) in [("kx", kx), ("ky", ky)] {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::Domain {
                name,
                reason: format!("gain must be finite and > 0, got {k}"),
            });
        }
    }
    let p0 = p0();
    let mut p = Matrix8::zeros();
    p.fixed_view_mut::<4, 4>(0, 0).copy_from(&(p0 * kx));
    p.fixed_view_mut::<4, 4>(4, 4).copy_from(&(p0 * ky));
    let certificate = certify_positive_definite(&p)?;
    if !certificate.definite {
        return Err(Error::NotPositiveDefinite {
            index: 0,
            pivot: certificate.margin,
        });
    }
    Ok(ClfMatrix {
        p,
        kx,
        ky,
        p0,
        certificate,
    })
}

impl ClfMatrix {
    /// `kx = ky = 1`.
    pub fn unit() -> Self {
        build_clf(1.0, 1.0).expect("published P0 is positive definite")
    }
}

/// `AᵀP + PA − PBBᵀP`, assembled so that the result is exactly symmetric.
pub fn riccati_residual(clf: &ClfMatrix) -> Matrix8 {
    let pair = LinearPair::chain_of_integrators();
    let pa = clf.p * pair.a;
    let pb = clf.p * pair.b;
    pa.transpose() + pa - pb * pb.transpose()
}

/// Single-channel residual `k·M0 − k²·O0` with `M0 = A0ᵀP0 + P0A0`,
/// `O0 = P0 b0 b0ᵀ P0`. The 8×8 residual is `diag(block(kx), block(ky))`.
pub fn riccati_residual_block(k: f64) -> Matrix4<f64> {
    let p0 = p0();
    let pa = p0 * shift4();
    let pb = p0 * input4();
    (pa.transpose() + pa) * k - (pb * pb.transpose()) * (k * k)
}

/// One grid point of a gain sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub kx: f64,
    pub ky: f64,
    pub negdef: bool,
    pub margin: f64,
    /// Both gains lie in [`CLAIMED_GAIN_RANGE`].
    pub in_claim: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainSweep {
    pub points: Vec<SweepPoint>,
}

impl GainSweep {
    /// True iff every in-claim point is certified negative definite.
    pub fn claim_holds(&self) -> bool {
        self.points.iter().filter(|p| p.in_claim).all(|p| p.negdef)
    }

    pub fn violations(&self) -> impl Iterator<Item = &SweepPoint> {
        self.points.iter().filter(|p| p.in_claim && !p.negdef)
    }
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

fn in_claim(k: f64) -> bool {
    (CLAIMED_GAIN_RANGE.0..=CLAIMED_GAIN_RANGE.1).contains(&k)
}

/// Certifies the residual at every `(kx, ky)` of the Cartesian product, in
/// row-major order (kx outer).
pub fn sweep_points(kx_values: &[f64], ky_values: &[f64]) -> Result<GainSweep> {
    let pairs: Vec<(f64, f64)> = kx_values
        .iter()
        .flat_map(|&kx| ky_values.iter().map(move |&ky| (kx, ky)))
        .collect();
    let points = pairs
        .par_iter()
        .map(|&(kx, ky)| {
            let clf = build_clf(kx, ky)?;
            let cert = certify_negative_definite(&riccati_residual(&clf))?;
            Ok(SweepPoint {
                kx,
                ky,
                negdef: cert.definite,
                margin: cert.margin,
                in_claim: in_claim(kx) && in_claim(ky),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GainSweep { points })
}

/// Log-spaced `n × n` sweep over `[lo, hi]²`.
pub fn sweep_gain_grid(lo: f64, hi: f64, n: usize) -> Result<GainSweep> {
    if n < 2 {
        return Err(Error::Domain {
            name: "n",
            reason: format!("grid needs at least 2 points per axis, got {n}"),
        });
    }
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::Domain {
            name: "gain range",
            reason: format!("need 0 < lo <= hi, got [{lo}, {hi}]"),
        });
    }
    let axis = log_space(lo, hi, n);
    sweep_points(&axis, &axis)
}

/// `V`, `α = zᵀPΦ`, `β = ΓᵀPz` and `b = βᵀβ` at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClfEvaluation {
    pub v: f64,
    pub alpha: f64,
    pub beta: Vector2<f64>,
    pub b: f64,
}

pub fn evaluate_clf(clf: &ClfMatrix, z: &Vector8, phi: &Vector8, gamma: &Matrix8x2) -> ClfEvaluation {
    let pz = clf.p * z;
    let beta = gamma.transpose() * pz;
    ClfEvaluation {
        v: 0.5 * z.dot(&pz),
        alpha: pz.dot(phi),
        beta,
        b: beta.norm_squared(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Matrix3;

    #[test]
    fn p0_leading_minors_positive() {
        let p = p0();
        let minors = [
            p[(0, 0)],
            p.fixed_view::<2, 2>(0, 0).determinant(),
            Matrix3::from(p.fixed_view::<3, 3>(0, 0)).determinant(),
            p.determinant(),
        ];
        assert!(minors.iter().all(|&m| m > 0.0), "{minors:?}");
    }

    #[test]
    fn kronecker_blocks() {
        let clf = build_clf(2.0, 1.0).unwrap();
        assert_eq!(Matrix4::from(clf.p.fixed_view::<4, 4>(0, 0)), p0() * 2.0);
        assert_eq!(Matrix4::from(clf.p.fixed_view::<4, 4>(4, 4)), p0());
        assert_eq!(Matrix4::from(clf.p.fixed_view::<4, 4>(0, 4)), Matrix4::zeros());
        assert!(build_clf(0.2, 0.2).is_ok());
    }

    #[test]
    fn nonpositive_gains_rejected() {
        assert!(matches!(build_clf(0.0, 1.0), Err(Error::Domain { name: "kx", .. })));
        assert!(matches!(build_clf(1.0, -2.0), Err(Error::Domain { name: "ky", .. })));
    }

    #[test]
    fn certify_trivial_cases() {
        let neg = certify_negative_definite(&(-Matrix4::<f64>::identity())).unwrap();
        assert!(neg.definite);
        assert_eq!(neg.margin, 1.0);
        assert!(!certify_negative_definite(&Matrix4::<f64>::zeros()).unwrap().definite);
        let mut asym = Matrix4::<f64>::identity();
        asym[(0, 1)] = 1e-6;
        assert!(matches!(
            certify_negative_definite(&asym),
            Err(Error::Asymmetric(_))
        ));
    }

    #[test]
    fn residual_unit_gains() {
        let r = riccati_residual(&ClfMatrix::unit());
        // (1,1) = −(P0[0][3])² since the shift terms vanish on the first diagonal entry
        assert_abs_diff_eq!(r[(0, 0)], -0.49, epsilon = 1e-15);
        let cert = certify_negative_definite(&r).unwrap();
        assert!(cert.definite && cert.margin > 0.0);
    }

    #[test]
    fn residual_block_structure() {
        for (kx, ky) in [(1.0, 1.0), (0.2, 37.0), (1e6, 3.5)] {
            let full = riccati_residual(&build_clf(kx, ky).unwrap());
            let mut blocks = Matrix8::zeros();
            blocks
                .fixed_view_mut::<4, 4>(0, 0)
                .copy_from(&riccati_residual_block(kx));
            blocks
                .fixed_view_mut::<4, 4>(4, 4)
                .copy_from(&riccati_residual_block(ky));
            let scale = full.amax().max(1.0);
            assert!((full - blocks).amax() <= 1e-12 * scale);
        }
    }

    #[test]
    fn sweep_probes() {
        let s = sweep_points(&[1.0, 1e6, 0.01], &[1.0, 1e6, 0.01]).unwrap();
        let at = |kx: f64, ky: f64| *s.points.iter().find(|p| p.kx == kx && p.ky == ky).unwrap();
        assert!(at(1.0, 1.0).negdef);
        assert!(at(1e6, 1e6).negdef);
        assert!(!at(0.01, 0.01).in_claim);
        assert!(sweep_gain_grid(0.2, 1e6, 1).is_err());
    }

    #[test]
    fn log_space_endpoints() {
        let v = log_space(0.2, 1e6, 25);
        assert_eq!(v.len(), 25);
        assert_eq!((v[0], v[24]), (0.2, 1e6));
        assert!(v.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn evaluate_examples() {
        let clf = ClfMatrix::unit();
        let e = evaluate_clf(&clf, &Vector8::zeros(), &Vector8::zeros(), &Matrix8x2::zeros());
        assert_eq!((e.v, e.alpha, e.b), (0.0, 0.0, 0.0));
        let mut z = Vector8::zeros();
        z[0] = 1.0;
        let e = evaluate_clf(&clf, &z, &Vector8::zeros(), &Matrix8x2::zeros());
        assert_eq!(e.v, 0.125);
    }
}

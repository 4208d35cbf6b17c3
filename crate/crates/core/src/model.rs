//! Problem-instance types and validation of the standing assumptions.
//!
//! Two Gaussian observation models are supported: the aligned model
//! `Y_l = X + N_l` with noise covariances `Sigma_l`, and the general-channel
//! model `Y_l = H_l X + N_l` with identity noise. Every instance is immutable
//! after construction and all operations are pure.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matkernel::{self, GenMatrix, SymMatrix, PD_TOL};

/// Aligned-model instance: source covariance plus per-sensor noise covariances.
#[derive(Debug, Clone)]
pub struct CeoInstance {
    kx: SymMatrix,
    noises: Vec<SymMatrix>,
}

/// General-channel instance: source covariance plus per-sensor channel
/// matrices; noise covariances are identity.
#[derive(Debug, Clone)]
pub struct GeneralCeoInstance {
    kx: SymMatrix,
    channels: Vec<GenMatrix>,
}

/// The target distortion matrix `D`.
#[derive(Debug, Clone)]
pub struct DistortionTarget {
    d: SymMatrix,
}

/// Scalar instance: source variance plus per-sensor noise variances.
#[derive(Debug, Clone)]
pub struct ScalarCeoInstance {
    pub var_x: f64,
    pub noise_vars: Vec<f64>,
}

/// Parallel instance: everything diagonal, with a per-component distortion
/// target.
#[derive(Debug, Clone)]
pub struct ParallelCeoInstance {
    pub source_vars: Vec<f64>,
    /// `noise_vars[l][m]` is the noise variance of sensor `l` on component `m`.
    pub noise_vars: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

fn require_pd(m: &SymMatrix, what: &str) -> Result<()> {
    let min = m.min_eigenvalue();
    let tol = PD_TOL * m.spectral_norm().max(1.0);
    if min <= tol {
        return Err(Error::InvalidInstance(format!(
            "{what} must be positive definite (min eigenvalue {min:.3e})"
        )));
    }
    Ok(())
}

impl CeoInstance {
    pub fn new(kx: SymMatrix, noises: Vec<SymMatrix>) -> Result<Self> {
        if noises.is_empty() {
            return Err(Error::InvalidInstance("need at least one sensor".into()));
        }
        require_pd(&kx, "source covariance")?;
        for (l, s) in noises.iter().enumerate() {
            if s.dim() != kx.dim() {
                return Err(Error::DimensionMismatch {
                    expected: kx.dim(),
                    got: s.dim(),
                });
            }
            require_pd(s, &format!("noise covariance of sensor {}", l + 1))?;
        }
        Ok(CeoInstance { kx, noises })
    }

    /// Source dimension `M`.
    pub fn dim(&self) -> usize {
        self.kx.dim()
    }

    /// Number of sensors `L`.
    pub fn sensors(&self) -> usize {
        self.noises.len()
    }

    pub fn kx(&self) -> &SymMatrix {
        &self.kx
    }

    pub fn noise(&self, l: usize) -> &SymMatrix {
        &self.noises[l]
    }

    pub fn noises(&self) -> &[SymMatrix] {
        &self.noises
    }
}

impl GeneralCeoInstance {
    pub fn new(kx: SymMatrix, channels: Vec<GenMatrix>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidInstance("need at least one sensor".into()));
        }
        require_pd(&kx, "source covariance")?;
        for h in &channels {
            if h.ncols() != kx.dim() || h.nrows() == 0 {
                return Err(Error::DimensionMismatch {
                    expected: kx.dim(),
                    got: h.ncols(),
                });
            }
        }
        Ok(GeneralCeoInstance { kx, channels })
    }

    pub fn dim(&self) -> usize {
        self.kx.dim()
    }

    pub fn sensors(&self) -> usize {
        self.channels.len()
    }

    pub fn kx(&self) -> &SymMatrix {
        &self.kx
    }

    pub fn channel(&self, l: usize) -> &GenMatrix {
        &self.channels[l]
    }

    pub fn channels(&self) -> &[GenMatrix] {
        &self.channels
    }
}

impl DistortionTarget {
    pub fn new(d: SymMatrix) -> Result<Self> {
        require_pd(&d, "distortion target")?;
        Ok(DistortionTarget { d })
    }

    pub fn scalar(d: f64) -> Result<Self> {
        Self::new(SymMatrix::from_diagonal(&[d]))
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.d
    }

    pub fn dim(&self) -> usize {
        self.d.dim()
    }
}

impl ScalarCeoInstance {
    pub fn new(var_x: f64, noise_vars: Vec<f64>) -> Result<Self> {
        if !(var_x > 0.0) {
            return Err(Error::InvalidInstance("source variance must be positive".into()));
        }
        if noise_vars.is_empty() || noise_vars.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidInstance(
                "need at least one sensor with positive noise variance".into(),
            ));
        }
        Ok(ScalarCeoInstance { var_x, noise_vars })
    }

    pub fn sensors(&self) -> usize {
        self.noise_vars.len()
    }

    /// Embeds the scalar instance as an aligned instance with 1x1 matrices.
    pub fn to_matrix_instance(&self) -> CeoInstance {
        let kx = SymMatrix::from_diagonal(&[self.var_x]);
        let noises = self
            .noise_vars
            .iter()
            .map(|v| SymMatrix::from_diagonal(&[*v]))
            .collect();
        CeoInstance::new(kx, noises).expect("validated scalar instance")
    }

    /// Lower distortion limit: the MMSE with direct access to all sensors.
    pub fn mmse(&self) -> f64 {
        let prec = 1.0 / self.var_x + self.noise_vars.iter().map(|v| 1.0 / v).sum::<f64>();
        1.0 / prec
    }
}

impl ParallelCeoInstance {
    pub fn new(source_vars: Vec<f64>, noise_vars: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        let m = source_vars.len();
        if m == 0 || source_vars.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidInstance("source variances must be positive".into()));
        }
        if noise_vars.is_empty() {
            return Err(Error::InvalidInstance("need at least one sensor".into()));
        }
        for row in &noise_vars {
            if row.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::InvalidInstance("noise variances must be positive".into()));
            }
        }
        if targets.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: targets.len(),
            });
        }
        let inst = ParallelCeoInstance {
            source_vars,
            noise_vars,
            targets,
        };
        for c in 0..m {
            let lo = inst.component(c).mmse();
            let hi = inst.source_vars[c];
            let d = inst.targets[c];
            if !(d >= lo - 1e-12 && d <= hi + 1e-12) {
                return Err(Error::InvalidInstance(format!(
                    "target D_{} = {d} outside the admissible interval [{lo:.6}, {hi:.6}]",
                    c + 1
                )));
            }
        }
        Ok(inst)
    }

    pub fn sensors(&self) -> usize {
        self.noise_vars.len()
    }

    pub fn components(&self) -> usize {
        self.source_vars.len()
    }

    /// The scalar sub-instance for one source component.
    pub fn component(&self, m: usize) -> ScalarCeoInstance {
        ScalarCeoInstance {
            var_x: self.source_vars[m],
            noise_vars: self.noise_vars.iter().map(|row| row[m]).collect(),
        }
    }

    /// Embeds the parallel instance as an aligned instance with diagonal
    /// matrices, together with the diagonal distortion target.
    pub fn to_matrix_instance(&self) -> (CeoInstance, DistortionTarget) {
        let kx = SymMatrix::from_diagonal(&self.source_vars);
        let noises = self
            .noise_vars
            .iter()
            .map(|row| SymMatrix::from_diagonal(row))
            .collect();
        let inst = CeoInstance::new(kx, noises).expect("validated parallel instance");
        let target = DistortionTarget::new(SymMatrix::from_diagonal(&self.targets))
            .expect("validated parallel targets");
        (inst, target)
    }
}

/// Outcome of the distortion-limit check, one flag per side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DistortionValidation {
    /// `collective MMSE <= D` holds.
    pub lower_ok: bool,
    /// `D <= K_X` holds. Enforcing this side may lose generality for
    /// indefinite `K_X - D`; callers may choose to ignore it.
    pub upper_ok: bool,
}

impl DistortionValidation {
    pub fn is_ok(&self) -> bool {
        self.lower_ok && self.upper_ok
    }

    pub fn is_ok_skipping_upper(&self, skip_upper: bool) -> bool {
        self.lower_ok && (skip_upper || self.upper_ok)
    }
}

/// MMSE matrix of the source given every sensor observation:
/// `(K_X^{-1} + sum_l Sigma_l^{-1})^{-1}`.
pub fn collective_mmse(inst: &CeoInstance) -> Result<SymMatrix> {
    let mut prec = matkernel::inverse(inst.kx())?;
    for l in 0..inst.sensors() {
        prec = prec.add(&matkernel::inverse(inst.noise(l))?);
    }
    matkernel::inverse(&prec)
}

/// MMSE matrix for the general model: `(K_X^{-1} + sum_l H_l^T H_l)^{-1}`.
pub fn general_collective_mmse(inst: &GeneralCeoInstance) -> Result<SymMatrix> {
    let mut prec = matkernel::inverse(inst.kx())?;
    for h in inst.channels() {
        let r = h.nrows();
        prec = prec.add(&matkernel::congruence(h, &SymMatrix::identity(r)));
    }
    matkernel::inverse(&prec)
}

const VALIDATION_TOL: f64 = 1e-9;

/// Checks the two distortion limits `collective MMSE <= D <= K_X`.
pub fn validate_distortion(inst: &CeoInstance, target: &DistortionTarget) -> Result<DistortionValidation> {
    if target.dim() != inst.dim() {
        return Err(Error::DimensionMismatch {
            expected: inst.dim(),
            got: target.dim(),
        });
    }
    let mmse = collective_mmse(inst)?;
    Ok(DistortionValidation {
        lower_ok: matkernel::psd_leq(&mmse, target.matrix(), VALIDATION_TOL)?,
        upper_ok: matkernel::psd_leq(target.matrix(), inst.kx(), VALIDATION_TOL)?,
    })
}

/// General-model analogue of [`validate_distortion`].
pub fn validate_general_distortion(
    inst: &GeneralCeoInstance,
    target: &DistortionTarget,
) -> Result<DistortionValidation> {
    if target.dim() != inst.dim() {
        return Err(Error::DimensionMismatch {
            expected: inst.dim(),
            got: target.dim(),
        });
    }
    let mmse = general_collective_mmse(inst)?;
    Ok(DistortionValidation {
        lower_ok: matkernel::psd_leq(&mmse, target.matrix(), VALIDATION_TOL)?,
        upper_ok: matkernel::psd_leq(target.matrix(), inst.kx(), VALIDATION_TOL)?,
    })
}

/// Converts an aligned instance to the general-channel form via
/// `H_l = Sigma_l^{-1/2}`. Bound values agree with the aligned formulas under
/// the whitened allocation map `D'_l = Sigma_l^{-1/2} D_l Sigma_l^{-1/2}`.
pub fn align_to_general(inst: &CeoInstance) -> Result<GeneralCeoInstance> {
    let channels = inst
        .noises()
        .iter()
        .map(|s| Ok(matkernel::sym_sqrt(&matkernel::inverse(s)?)?.into_dmatrix()))
        .collect::<Result<Vec<_>>>()?;
    GeneralCeoInstance::new(inst.kx().clone(), channels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_instance, seeded};
    use nalgebra::DMatrix;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn collective_mmse_identity_example() {
        let inst = CeoInstance::new(
            SymMatrix::identity(2),
            vec![SymMatrix::identity(2), SymMatrix::identity(2)],
        )
        .unwrap();
        let mmse = collective_mmse(&inst).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 / 3.0 } else { 0.0 };
                assert!(approx(mmse.get(i, j), want, 1e-14));
            }
        }
        assert!(matkernel::psd_leq(&mmse, inst.kx(), 1e-9).unwrap());
    }

    #[test]
    fn collective_mmse_scalar_harmonic() {
        let inst = CeoInstance::new(
            SymMatrix::from_diagonal(&[2.0]),
            vec![SymMatrix::from_diagonal(&[3.0])],
        )
        .unwrap();
        let mmse = collective_mmse(&inst).unwrap();
        assert!(approx(mmse.get(0, 0), 2.0 * 3.0 / (2.0 + 3.0), 1e-14));
    }

    #[test]
    fn collective_mmse_matches_joint_covariance_oracle() {
        // Schur-complement MMSE from the stacked joint covariance of
        // (X, Y_1, ..., Y_L), inverted with an LU path independent of the
        // eigen kernel.
        let mut rng = seeded(41);
        for _ in 0..10 {
            let inst = random_instance(&mut rng, 3, 3);
            let m = inst.dim();
            let l = inst.sensors();
            let k = inst.kx().as_dmatrix();
            let mut cyy = DMatrix::zeros(l * m, l * m);
            let mut cxy = DMatrix::zeros(m, l * m);
            for i in 0..l {
                cxy.view_mut((0, i * m), (m, m)).copy_from(k);
                for j in 0..l {
                    let mut block = k.clone();
                    if i == j {
                        block += inst.noise(i).as_dmatrix();
                    }
                    cyy.view_mut((i * m, j * m), (m, m)).copy_from(&block);
                }
            }
            let cyy_inv = cyy.try_inverse().expect("joint covariance invertible");
            let oracle = k - &cxy * cyy_inv * cxy.transpose();
            let mmse = collective_mmse(&inst).unwrap();
            let diff = (mmse.as_dmatrix() - oracle)
                .iter()
                .fold(0.0_f64, |a, x| a.max(x.abs()));
            assert!(diff < 1e-10, "oracle mismatch {diff}");
        }
    }

    #[test]
    fn collective_mmse_monotone_in_sensors() {
        let mut rng = seeded(43);
        for _ in 0..10 {
            let inst = random_instance(&mut rng, 3, 2);
            let fewer = CeoInstance::new(inst.kx().clone(), inst.noises()[..2].to_vec()).unwrap();
            let with_all = collective_mmse(&inst).unwrap();
            let with_fewer = collective_mmse(&fewer).unwrap();
            assert!(matkernel::psd_leq(&with_all, &with_fewer, 1e-9).unwrap());
        }
    }

    #[test]
    fn validate_distortion_sides() {
        let inst = CeoInstance::new(
            SymMatrix::identity(2),
            vec![SymMatrix::identity(2), SymMatrix::identity(2)],
        )
        .unwrap();
        let ok = validate_distortion(&inst, &DistortionTarget::new(SymMatrix::identity(2).scaled(0.5)).unwrap())
            .unwrap();
        assert!(ok.is_ok());

        let low = validate_distortion(&inst, &DistortionTarget::new(SymMatrix::identity(2).scaled(0.2)).unwrap())
            .unwrap();
        assert!(!low.lower_ok && low.upper_ok);

        let high = validate_distortion(&inst, &DistortionTarget::new(SymMatrix::identity(2).scaled(1.5)).unwrap())
            .unwrap();
        assert!(high.lower_ok && !high.upper_ok);
        assert!(high.is_ok_skipping_upper(true));
    }

    #[test]
    fn align_examples() {
        let inst = CeoInstance::new(
            SymMatrix::identity(2),
            vec![SymMatrix::identity(2), SymMatrix::from_diagonal(&[4.0, 1.0])],
        )
        .unwrap();
        let gen = align_to_general(&inst).unwrap();
        assert!(approx(gen.channel(0)[(0, 0)], 1.0, 1e-12));
        assert!(approx(gen.channel(1)[(0, 0)], 0.5, 1e-12));
        assert!(approx(gen.channel(1)[(1, 1)], 1.0, 1e-12));
    }

    #[test]
    fn general_validation_examples() {
        let kx = SymMatrix::identity(2);
        let eye = DMatrix::identity(2, 2);
        let inst = GeneralCeoInstance::new(kx.clone(), vec![eye.clone(), eye]).unwrap();
        let v = validate_general_distortion(
            &inst,
            &DistortionTarget::new(SymMatrix::identity(2).scaled(0.5)).unwrap(),
        )
        .unwrap();
        assert!(v.is_ok());

        // Row channels: each sensor sees one coordinate, limit is 0.5 I.
        let h1 = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let h2 = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let rows = GeneralCeoInstance::new(kx, vec![h1, h2]).unwrap();
        let mmse = general_collective_mmse(&rows).unwrap();
        assert!(approx(mmse.get(0, 0), 0.5, 1e-12));
        let v = validate_general_distortion(
            &rows,
            &DistortionTarget::new(SymMatrix::identity(2).scaled(0.6)).unwrap(),
        )
        .unwrap();
        assert!(v.is_ok());
        let v = validate_general_distortion(
            &rows,
            &DistortionTarget::new(SymMatrix::identity(2).scaled(0.4)).unwrap(),
        )
        .unwrap();
        assert!(!v.lower_ok);
    }

    #[test]
    fn parallel_interval_enforced() {
        // Component limits: [1/3, 1] for unit variances with two sensors.
        assert!(ParallelCeoInstance::new(
            vec![1.0, 1.0],
            vec![vec![1.0, 1.0], vec![1.0, 1.0]],
            vec![0.4, 0.8],
        )
        .is_ok());
        assert!(ParallelCeoInstance::new(
            vec![1.0, 1.0],
            vec![vec![1.0, 1.0], vec![1.0, 1.0]],
            vec![0.2, 0.8],
        )
        .is_err());
    }
}

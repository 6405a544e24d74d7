//! Matrix-variate distributions over the SPD cone.
//!
//! Parameterization: the inverse Wishart density over `X ∈ S⁺⁺_d` with
//! degrees of freedom `ν > 2d` and parameter matrix `V` is
//!
//! ```text
//! IW_d(X | ν, V) = etr(−½ V X⁻¹) |V|^{(ν−d−1)/2}
//!                  / (2^{d(ν−d−1)/2} Γ_d((ν−d−1)/2) |X|^{ν/2}),
//! ```
//!
//! with mean `V / (ν − 2d − 2)`, and the Wishart density with `w > d − 1`
//! and parameter `W` is
//!
//! ```text
//! W_d(X | w, W) = etr(−½ X W⁻¹) |X|^{(w−d−1)/2}
//!                 / (2^{wd/2} Γ_d(w/2) |W|^{w/2}),
//! ```
//!
//! with mean `w W`. The two families are linked by inversion:
//! `X ~ IW_d(ν, V)` iff `X⁻¹ ~ W_d(ν − d − 1, V⁻¹)`.
//!
//! The non-central inverse Wishart density itself (a hypergeometric function
//! of matrix argument) is deliberately not evaluated; the distribution only
//! enters through [`transition_sample`], which realises the factor-form state
//! transition model, and through the closed-form moment identities consumed
//! by the prediction updates.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::numerics::{digamma_dof_sum, ln_multigamma, SpdMatrix};
use crate::{Error, Result};

/// Tolerance used to decide whether a real dof count is an integer.
const INTEGER_DOF_TOL: f64 = 1e-9;

/// Inverse Wishart parameters `(ν, V)` with `ν > 2d`.
#[derive(Debug, Clone)]
pub struct InverseWishartParams {
    nu: f64,
    v_mat: SpdMatrix,
}

impl InverseWishartParams {
    pub fn new(nu: f64, v_mat: SpdMatrix) -> Result<Self> {
        let min = 2.0 * v_mat.dim() as f64;
        if !(nu.is_finite() && nu > min) {
            return Err(Error::DegreesOfFreedom { value: nu, min });
        }
        Ok(Self { nu, v_mat })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn v_mat(&self) -> &SpdMatrix {
        &self.v_mat
    }

    pub fn dim(&self) -> usize {
        self.v_mat.dim()
    }

    /// `E[X] = V / (ν − 2d − 2)`; requires `ν > 2d + 2`.
    pub fn mean(&self) -> Result<SpdMatrix> {
        let denom = self.nu - 2.0 * self.dim() as f64 - 2.0;
        if denom <= 0.0 {
            return Err(Error::DegreesOfFreedom {
                value: self.nu,
                min: 2.0 * self.dim() as f64 + 2.0,
            });
        }
        self.v_mat.scale(1.0 / denom)
    }
}

/// Wishart parameters `(w, W)` with `w > d − 1`.
#[derive(Debug, Clone)]
pub struct WishartParams {
    w: f64,
    w_mat: SpdMatrix,
}

impl WishartParams {
    pub fn new(w: f64, w_mat: SpdMatrix) -> Result<Self> {
        let min = w_mat.dim() as f64 - 1.0;
        if !(w.is_finite() && w > min) {
            return Err(Error::DegreesOfFreedom { value: w, min });
        }
        Ok(Self { w, w_mat })
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn w_mat(&self) -> &SpdMatrix {
        &self.w_mat
    }

    pub fn dim(&self) -> usize {
        self.w_mat.dim()
    }

    /// `E[X] = w W`.
    pub fn mean(&self) -> SpdMatrix {
        self.w_mat.scale(self.w).expect("dof validated positive")
    }
}

/// Non-central inverse Wishart parameters `(v, Σ, Θ)`: `v > 2d`, `Σ` strictly
/// positive definite and `Θ` positive semidefinite.
#[derive(Debug, Clone)]
pub struct NcIwParams {
    v: f64,
    sigma: SpdMatrix,
    theta: SpdMatrix,
}

impl NcIwParams {
    pub fn new(v: f64, sigma: SpdMatrix, theta: SpdMatrix) -> Result<Self> {
        let d = sigma.dim();
        let min = 2.0 * d as f64;
        if !(v.is_finite() && v > min) {
            return Err(Error::DegreesOfFreedom { value: v, min });
        }
        if theta.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: theta.dim() });
        }
        // Strictness of sigma is enforced here; theta may sit on the cone
        // boundary (theta = 0 recovers the central inverse Wishart).
        sigma.chol_lower()?;
        Ok(Self { v, sigma, theta })
    }

    /// Parameters of the extent transition density: `Σ = M Q⁻¹ Mᵀ` and
    /// `Θ = M⁻ᵀ X_prev⁻¹ M⁻¹` for a nonsingular transformation `M`.
    pub fn transition_params(
        v: f64,
        m: &DMatrix<f64>,
        q: &SpdMatrix,
        x_prev: &SpdMatrix,
    ) -> Result<Self> {
        let m_inv = invert_transform(m)?;
        let sigma = q.inverse()?.congruence(m);
        let theta = x_prev.inverse()?.congruence(&m_inv.transpose());
        Self::new(v, sigma, theta)
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn sigma(&self) -> &SpdMatrix {
        &self.sigma
    }

    pub fn theta(&self) -> &SpdMatrix {
        &self.theta
    }
}

/// Log-density of the inverse Wishart distribution at `x`.
pub fn iw_logpdf(x: &SpdMatrix, p: &InverseWishartParams) -> Result<f64> {
    let d = p.dim();
    if x.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.dim() });
    }
    let n = p.nu - d as f64 - 1.0;
    let trace = x.solve(p.v_mat.as_matrix())?.trace();
    Ok(-0.5 * trace + 0.5 * n * p.v_mat.logdet()? - 0.5 * (d as f64) * n * std::f64::consts::LN_2
        - ln_multigamma(d, 0.5 * n)?
        - 0.5 * p.nu * x.logdet()?)
}

/// Lower-triangular factor `F` with `F Fᵀ ~ W_d(w, W)`, by the triangular
/// construction: diagonal entries are square roots of chi-square variates
/// with dof `w − i`, sub-diagonal entries standard normal. Real
/// (non-integer) dof `w > d − 1` are admitted through the gamma-distributed
/// chi-square generalisation.
pub fn wishart_sample_factor<R: Rng + ?Sized>(rng: &mut R, p: &WishartParams) -> Result<DMatrix<f64>> {
    let d = p.dim();
    let mut a = DMatrix::zeros(d, d);
    for i in 0..d {
        let dof = p.w - i as f64;
        let chi = ChiSquared::new(dof)
            .map_err(|e| Error::Domain(format!("chi-square dof {dof}: {e}")))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    Ok(p.w_mat.chol_lower()? * a)
}

/// Draws from `W_d(w, W)`.
pub fn wishart_sample<R: Rng + ?Sized>(rng: &mut R, p: &WishartParams) -> Result<SpdMatrix> {
    Ok(SpdMatrix::from_factor(&wishart_sample_factor(rng, p)?))
}

/// Draws from `IW_d(ν, V)` by inverting a Wishart draw with dof `ν − d − 1`
/// and parameter `V⁻¹`.
pub fn iw_sample<R: Rng + ?Sized>(rng: &mut R, p: &InverseWishartParams) -> Result<SpdMatrix> {
    let d = p.dim();
    let wp = WishartParams::new(p.nu - d as f64 - 1.0, p.v_mat.inverse()?)?;
    let f = wishart_sample_factor(rng, &wp)?;
    // X = (F Fᵀ)⁻¹ = F⁻ᵀ F⁻¹ with F lower-triangular.
    let f_inv = f
        .solve_lower_triangular(&DMatrix::identity(d, d))
        .ok_or(Error::NotPositiveDefinite { minor: d })?;
    Ok(SpdMatrix::from_factor(&f_inv.transpose()))
}

/// First-order moments of `IW_d(ν, V)` used by the KL projection:
/// `E[X⁻¹] = (ν − d − 1) V⁻¹` and
/// `E[ln|X|] = ln|V| − d ln 2 − Σ_{i=1}^{d} ψ₀((ν − d − i)/2)`.
#[derive(Debug, Clone)]
pub struct IwMoments {
    pub e_inv: SpdMatrix,
    pub e_lndet: f64,
}

pub fn iw_entropy_moments(p: &InverseWishartParams) -> Result<IwMoments> {
    let d = p.dim();
    let e_inv = p.v_mat.inverse()?.scale(p.nu - d as f64 - 1.0)?;
    let e_lndet = p.v_mat.logdet()?
        - d as f64 * std::f64::consts::LN_2
        - digamma_dof_sum(d, p.nu);
    Ok(IwMoments { e_inv, e_lndet })
}

/// One draw of the extent transition model
///
/// ```text
/// X_next⁻¹ = M⁻ᵀ (X_prev^{-1/2} + n^{1/2} W^{1/2}) (·)ᵀ M⁻¹,
/// W ~ W_d(n, Q/n),  n = v − d − 1,
/// ```
///
/// realised through rectangular factor matrices: the square roots are `d × n`
/// factors, the previous-state factor embedded by identity padding, and the
/// noise factor a matrix-normal draw whose columns carry covariance `Q`.
/// Equivalently `X_next = M (B Bᵀ)⁻¹ Mᵀ` with the columns of `B` independent
/// Gaussians centred on the padded factor of `X_prev⁻¹`.
///
/// For integer `n` the construction is exact for every `v > 2d`. Non-integer
/// dof are supported for `n > 2d − 1` by splitting off the full-rank
/// non-central part (`d` Gaussian columns) and adding an independent central
/// Wishart remainder with real dof `n − d`.
///
/// This realises the transition law conditional on a fixed previous extent.
/// For marginal statements over an inverse Wishart prior with `v` below the
/// prior dof, use [`transition_sample_from_prior`], which couples the
/// transition to the prior's factor columns.
pub fn transition_sample<R: Rng + ?Sized>(
    rng: &mut R,
    x_prev: &SpdMatrix,
    m: &DMatrix<f64>,
    q: &SpdMatrix,
    v: f64,
) -> Result<SpdMatrix> {
    let d = x_prev.dim();
    let df = d as f64;
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: m.nrows().max(m.ncols()) });
    }
    if q.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: q.dim() });
    }
    if !(v.is_finite() && v > 2.0 * df) {
        return Err(Error::DegreesOfFreedom { value: v, min: 2.0 * df });
    }
    let n = v - df - 1.0;
    let a0 = x_prev.inverse()?.sym_sqrt()?;
    let lq = q.chol_lower()?.clone();

    let s = if (n - n.round()).abs() < INTEGER_DOF_TOL {
        let cols = n.round() as usize;
        let g = DMatrix::from_fn(d, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut b = &lq * g;
        for i in 0..d {
            for j in 0..d {
                b[(i, j)] += a0.as_matrix()[(i, j)];
            }
        }
        SpdMatrix::from_factor(&b)
    } else if n > 2.0 * df - 1.0 {
        let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let b = a0.as_matrix() + &lq * g;
        let noncentral = SpdMatrix::from_factor(&b);
        let remainder = wishart_sample(rng, &WishartParams::new(n - df, q.clone())?)?;
        SpdMatrix::new_semidefinite(noncentral.as_matrix() + remainder.as_matrix())?
    } else {
        return Err(Error::Domain(format!(
            "transition dof v = {v} is neither integer-compatible nor above the \
             non-integer construction floor v > {}",
            3.0 * df
        )));
    };

    // X_next = M S⁻¹ Mᵀ = (M L⁻ᵀ)(M L⁻ᵀ)ᵀ with S = L Lᵀ.
    let l = s.chol_lower()?;
    let l_inv = l
        .solve_lower_triangular(&DMatrix::identity(d, d))
        .ok_or(Error::NotPositiveDefinite { minor: d })?;
    let m_inv_check = invert_transform(m)?;
    let _ = m_inv_check; // nonsingularity established
    Ok(SpdMatrix::from_factor(&(m * l_inv.transpose())))
}

/// Joint draw `(X_prev, X_next)` of the factor-form transition model over an
/// inverse Wishart prior.
///
/// The prior extent enters through its Gaussian factor: `X_prev⁻¹ = Y Yᵀ`
/// with `Y` a `d × (ν − d − 1)` matrix of independent `N(0, V⁻¹)` columns,
/// and the transition consumes the leading `v − d − 1` columns of `Y` (the
/// identity-padding embedding) before the matrix-normal noise is added. This
/// coupling is what makes the prediction density exactly inverse Wishart,
/// `X_next ~ IW_d(v, M V(I + QV)⁻¹ Mᵀ)`, for every `v ≤ ν`; re-rooting an
/// already-realised extent (as [`transition_sample`] does) reproduces the
/// same conditional law but matches the marginal only at `v = ν`.
///
/// Both `ν − d − 1` and `v − d − 1` must be integers here.
pub fn transition_sample_from_prior<R: Rng + ?Sized>(
    rng: &mut R,
    prior: &InverseWishartParams,
    m: &DMatrix<f64>,
    q: &SpdMatrix,
    v: f64,
) -> Result<(SpdMatrix, SpdMatrix)> {
    let d = prior.dim();
    let df = d as f64;
    if !(v.is_finite() && v > 2.0 * df && v <= prior.nu() + INTEGER_DOF_TOL) {
        return Err(Error::DegreesOfFreedom { value: v, min: 2.0 * df });
    }
    let n_prior = prior.nu() - df - 1.0;
    let n_trans = v - df - 1.0;
    if (n_prior - n_prior.round()).abs() > INTEGER_DOF_TOL
        || (n_trans - n_trans.round()).abs() > INTEGER_DOF_TOL
    {
        return Err(Error::Domain(
            "coupled factor draw requires integer factor widths on both ends".into(),
        ));
    }
    let cols_prior = n_prior.round() as usize;
    let cols_trans = n_trans.round() as usize;
    invert_transform(m)?;

    let l_vinv = prior.v_mat().inverse()?.chol_lower()?.clone();
    let g = DMatrix::from_fn(d, cols_prior, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = &l_vinv * g;
    let s_prev = SpdMatrix::from_factor(&y);
    let l_prev = s_prev.chol_lower()?;
    let x_prev = SpdMatrix::from_factor(
        &l_prev
            .solve_lower_triangular(&DMatrix::identity(d, d))
            .ok_or(Error::NotPositiveDefinite { minor: d })?
            .transpose(),
    );

    let lq = q.chol_lower()?.clone();
    let noise = DMatrix::from_fn(d, cols_trans, |_, _| rng.sample::<f64, _>(StandardNormal));
    let b = y.columns(0, cols_trans).into_owned() + &lq * noise;
    let s_next = SpdMatrix::from_factor(&b);
    let l_next = s_next.chol_lower()?;
    let x_next = SpdMatrix::from_factor(
        &(m * l_next
            .solve_lower_triangular(&DMatrix::identity(d, d))
            .ok_or(Error::NotPositiveDefinite { minor: d })?
            .transpose()),
    );
    Ok((x_prev, x_next))
}

/// Inverts a transformation matrix, rejecting singular inputs.
pub(crate) fn invert_transform(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let lu = m.clone().lu();
    let det = lu.determinant();
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if !det.is_finite() || det.abs() <= 1e-12 * scale.powi(m.nrows() as i32).max(f64::MIN_POSITIVE) {
        return Err(Error::SingularTransform);
    }
    lu.try_inverse().ok_or(Error::SingularTransform)
}

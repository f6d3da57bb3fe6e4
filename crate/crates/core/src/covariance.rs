//! Covariance algebra for two single-mode Gaussian states undergoing phase
//! rotation and balanced beam-splitter interference.
//!
//! Conventions, used consistently across the crate:
//!
//! * shot-noise units, vacuum variance = 1;
//! * a phase shift `phi` rotates quadratures as `x' = x cos(phi) + p sin(phi)`,
//!   `p' = -x sin(phi) + p cos(phi)`, so a diagonal state picks up the cross
//!   term `(V_p - V_x)/2 * sin(2 phi)`;
//! * the balanced beam splitter maps `q1' = (q1 + q2)/sqrt(2)`,
//!   `q2' = (q1 - q2)/sqrt(2)`. The map is an involution, which the test
//!   suite relies on.

use thiserror::Error;

/// Slack on positive-semidefiniteness checks so that pure states
/// (`V_x * V_p = 1` exactly) pass despite rounding.
pub const PHYSICALITY_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum CovarianceError {
    #[error("quadrature variances must be positive, got v_x = {v_x}, v_p = {v_p}")]
    NonPositiveVariance { v_x: f64, v_p: f64 },
    #[error("Heisenberg bound violated: v_x * v_p = {product} < 1")]
    HeisenbergViolation { product: f64 },
    #[error("covariance matrix is unphysical (determinant {det} < 1)")]
    UnphysicalCovariance { det: f64 },
    #[error("detection efficiency must lie in (0, 1], got {eta}")]
    InvalidEfficiency { eta: f64 },
}

/// Squeezed and anti-squeezed variances of one input mode, in shot-noise
/// units. `x` is the initially squeezed amplitude quadrature, `p` the
/// anti-squeezed phase quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezedModeParams {
    v_x: f64,
    v_p: f64,
}

impl SqueezedModeParams {
    /// Validates `v_x > 0`, `v_p > 0` and the Heisenberg bound
    /// `v_x * v_p >= 1` (pure states saturate it).
    pub fn new(v_x: f64, v_p: f64) -> Result<Self, CovarianceError> {
        if !(v_x > 0.0) || !(v_p > 0.0) {
            return Err(CovarianceError::NonPositiveVariance { v_x, v_p });
        }
        let product = v_x * v_p;
        if product < 1.0 - PHYSICALITY_TOL {
            return Err(CovarianceError::HeisenbergViolation { product });
        }
        Ok(Self { v_x, v_p })
    }

    /// The vacuum state, `V_x = V_p = 1`.
    pub fn vacuum() -> Self {
        Self { v_x: 1.0, v_p: 1.0 }
    }

    pub fn v_x(&self) -> f64 {
        self.v_x
    }

    pub fn v_p(&self) -> f64 {
        self.v_p
    }
}

/// Symmetric 2x2 matrix of quadrature second moments of a single mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeCovariance {
    pub c_xx: f64,
    pub c_xp: f64,
    pub c_pp: f64,
}

impl ModeCovariance {
    /// Validates positivity of the diagonal and the physicality bound
    /// `det >= 1` (up to [`PHYSICALITY_TOL`]).
    pub fn new(c_xx: f64, c_xp: f64, c_pp: f64) -> Result<Self, CovarianceError> {
        if !(c_xx > 0.0) || !(c_pp > 0.0) {
            return Err(CovarianceError::NonPositiveVariance {
                v_x: c_xx,
                v_p: c_pp,
            });
        }
        let det = c_xx * c_pp - c_xp * c_xp;
        if det < 1.0 - PHYSICALITY_TOL {
            return Err(CovarianceError::UnphysicalCovariance { det });
        }
        Ok(Self { c_xx, c_xp, c_pp })
    }

    pub fn vacuum() -> Self {
        Self {
            c_xx: 1.0,
            c_xp: 0.0,
            c_pp: 1.0,
        }
    }

    /// Diagonal covariance of a squeezed mode before any phase shift.
    pub fn from_params(params: &SqueezedModeParams) -> Self {
        Self {
            c_xx: params.v_x(),
            c_xp: 0.0,
            c_pp: params.v_p(),
        }
    }

    pub fn determinant(&self) -> f64 {
        self.c_xx * self.c_pp - self.c_xp * self.c_xp
    }

    /// Variance of the quadrature `q(angle) = x cos + p sin`.
    pub fn quadrature_variance(&self, angle: f64) -> f64 {
        let (s, c) = angle.sin_cos();
        self.c_xx * c * c + 2.0 * self.c_xp * c * s + self.c_pp * s * s
    }
}

/// Symmetric 4x4 covariance over the quadratures `(x1, p1, x2, p2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeCovariance {
    m: [[f64; 4]; 4],
}

impl TwoModeCovariance {
    /// Block-diagonal covariance of two uncorrelated modes.
    pub fn from_modes(mode1: &ModeCovariance, mode2: &ModeCovariance) -> Self {
        let mut m = [[0.0; 4]; 4];
        m[0][0] = mode1.c_xx;
        m[0][1] = mode1.c_xp;
        m[1][0] = mode1.c_xp;
        m[1][1] = mode1.c_pp;
        m[2][2] = mode2.c_xx;
        m[2][3] = mode2.c_xp;
        m[3][2] = mode2.c_xp;
        m[3][3] = mode2.c_pp;
        Self { m }
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.m[row][col]
    }

    pub fn as_matrix(&self) -> &[[f64; 4]; 4] {
        &self.m
    }

    pub fn determinant(&self) -> f64 {
        det4(&self.m)
    }

    /// Covariance of the quadratures `q1(theta)` of mode 1 and `q2(psi)` of
    /// mode 2, i.e. `u^T M v` with `u = (cos theta, sin theta, 0, 0)` and
    /// `v = (0, 0, cos psi, sin psi)`.
    fn cross_covariance(&self, theta: f64, psi: f64) -> f64 {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = psi.sin_cos();
        ct * (self.m[0][2] * cp + self.m[0][3] * sp) + st * (self.m[1][2] * cp + self.m[1][3] * sp)
    }

    fn mode_variance(&self, mode: usize, angle: f64) -> f64 {
        let o = 2 * mode;
        let (s, c) = angle.sin_cos();
        self.m[o][o] * c * c + 2.0 * self.m[o][o + 1] * c * s + self.m[o + 1][o + 1] * s * s
    }
}

fn det4(m: &[[f64; 4]; 4]) -> f64 {
    // Expansion by 2x2 complementary minors (fixed size, no pivoting needed
    // for the well-conditioned matrices handled here).
    let minor =
        |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    minor(0, 1, 0, 1) * minor(2, 3, 2, 3) - minor(0, 1, 0, 2) * minor(2, 3, 1, 3)
        + minor(0, 1, 0, 3) * minor(2, 3, 1, 2)
        + minor(0, 1, 1, 2) * minor(2, 3, 0, 3)
        - minor(0, 1, 1, 3) * minor(2, 3, 0, 2)
        + minor(0, 1, 2, 3) * minor(2, 3, 0, 1)
}

/// Second moments of the joint Gaussian of the trigger quadrature
/// `q1(theta)` and the verified quadrature `q2(psi)` after the beam
/// splitter: `a = Var[q1]`, `b = Var[q2]`, `c = Cov[q1, q2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalMoments {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ConditionalMoments {
    /// Determinant `d = a*b - c^2`; computed on demand so it can never be
    /// stored inconsistently. Non-negative by Cauchy-Schwarz.
    pub fn det(&self) -> f64 {
        self.a * self.b - self.c * self.c
    }
}

/// Applies the phase rotation `R(phi)` to a mode covariance:
/// `R(phi) cov R(phi)^T`. For a diagonal input the diagonal becomes
/// `V_x cos^2 + V_p sin^2` and `V_p cos^2 + V_x sin^2`.
pub fn rotate_covariance(cov: &ModeCovariance, phi: f64) -> ModeCovariance {
    let (s, c) = phi.sin_cos();
    let (cc, ss, cs) = (c * c, s * s, c * s);
    ModeCovariance {
        c_xx: cov.c_xx * cc + cov.c_pp * ss + 2.0 * cov.c_xp * cs,
        c_xp: (cov.c_pp - cov.c_xx) * cs + cov.c_xp * (cc - ss),
        c_pp: cov.c_pp * cc + cov.c_xx * ss - 2.0 * cov.c_xp * cs,
    }
}

/// Interferes two uncorrelated modes on the balanced beam splitter and
/// returns the full 4x4 output covariance.
pub fn beamsplitter_transform(cov1: &ModeCovariance, cov2: &ModeCovariance) -> TwoModeCovariance {
    beamsplitter_map(&TwoModeCovariance::from_modes(cov1, cov2))
}

/// Applies the balanced beam-splitter symplectic map to an arbitrary
/// two-mode covariance. Applying it twice is the identity.
pub fn beamsplitter_map(tm: &TwoModeCovariance) -> TwoModeCovariance {
    // S = (1/sqrt(2)) [[I, I], [I, -I]] acting blockwise; S Sigma S^T.
    let g = tm.as_matrix();
    let mut m = [[0.0; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            let a = g[i][j];
            let b = g[i][j + 2];
            let c = g[i + 2][j];
            let d = g[i + 2][j + 2];
            m[i][j] = 0.5 * (a + b + c + d);
            m[i][j + 2] = 0.5 * (a - b + c - d);
            m[i + 2][j] = 0.5 * (a + b - c - d);
            m[i + 2][j + 2] = 0.5 * (a - b - c + d);
        }
    }
    TwoModeCovariance { m }
}

/// Reads the trigger/verify second moments off a two-mode covariance by
/// quadratic forms: `a = Var[q1(theta)]`, `b = Var[q2(psi)]`,
/// `c = Cov[q1(theta), q2(psi)]`.
pub fn conditional_moments(tm: &TwoModeCovariance, theta: f64, psi: f64) -> ConditionalMoments {
    ConditionalMoments {
        a: tm.mode_variance(0, theta),
        b: tm.mode_variance(1, psi),
        c: tm.cross_covariance(theta, psi),
    }
}

/// Closed-form trigger/verify moments for two copies of the same squeezed
/// state with phase shifts `phi1`, `phi2` and trigger angle `theta` (the
/// verified quadrature is the amplitude quadrature `x2`):
///
/// ```text
/// A = (V_x1 + V_x2)/2 cos^2(theta) + (V_p1 + V_p2)/2 sin^2(theta)
///     + (V_p - V_x)/4 [sin(2 phi1) + sin(2 phi2)] sin(2 theta)
/// B = (V_x1 + V_x2)/2
/// C = (V_x1 - V_x2)/2 cos(theta)
///     + (V_p - V_x)/4 [sin(2 phi1) - sin(2 phi2)] sin(theta)
/// ```
///
/// with `V_xj = V_x cos^2(phi_j) + V_p sin^2(phi_j)` and analogously for
/// `V_pj`. Kept as the independent oracle for the general covariance path.
pub fn closed_form_moments(
    params: &SqueezedModeParams,
    phi1: f64,
    phi2: f64,
    theta: f64,
) -> ConditionalMoments {
    let (v_x, v_p) = (params.v_x(), params.v_p());
    let rotated = |phi: f64| {
        let (s, c) = phi.sin_cos();
        (v_x * c * c + v_p * s * s, v_p * c * c + v_x * s * s)
    };
    let (v_x1, v_p1) = rotated(phi1);
    let (v_x2, v_p2) = rotated(phi2);
    let (st, ct) = theta.sin_cos();
    let quarter = 0.25 * (v_p - v_x);
    let a = 0.5 * (v_x1 + v_x2) * ct * ct
        + 0.5 * (v_p1 + v_p2) * st * st
        + quarter * ((2.0 * phi1).sin() + (2.0 * phi2).sin()) * (2.0 * theta).sin();
    let b = 0.5 * (v_x1 + v_x2);
    let c = 0.5 * (v_x1 - v_x2) * ct + quarter * ((2.0 * phi1).sin() - (2.0 * phi2).sin()) * st;
    ConditionalMoments { a, b, c }
}

/// Models detection efficiency `eta` as a loss channel on the second
/// moments: `V -> eta V + 1 - eta` on the diagonal, off-diagonals scale
/// by `eta`. `eta = 1` is the identity and the vacuum is invariant.
pub fn apply_detection_efficiency(
    cov: &ModeCovariance,
    eta: f64,
) -> Result<ModeCovariance, CovarianceError> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(CovarianceError::InvalidEfficiency { eta });
    }
    Ok(ModeCovariance {
        c_xx: eta * cov.c_xx + (1.0 - eta),
        c_xp: eta * cov.c_xp,
        c_pp: eta * cov.c_pp + (1.0 - eta),
    })
}

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Result, SysIdError};

/// A discrete-time state-space model `X_{t+1} = A X_t + B U_t`, `Y_t = C X_t`
/// without feedthrough.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    c: DMatrix<f64>,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl StateSpaceModel {
    pub fn new(c: DMatrix<f64>, a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(SysIdError::Dimension(format!(
                "A must be square and non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if c.ncols() != n || c.nrows() == 0 {
            return Err(SysIdError::Dimension(format!(
                "C must be p x {n} with p >= 1, got {}x{}",
                c.nrows(),
                c.ncols()
            )));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(SysIdError::Dimension(format!(
                "B must be {n} x m with m >= 1, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        if c.iter().chain(a.iter()).chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(SysIdError::InvalidArgument(
                "model matrices contain non-finite entries".into(),
            ));
        }
        Ok(Self { c, a, b })
    }

    /// Scalar model `(c, a, b)`.
    pub fn scalar(c: f64, a: f64, b: f64) -> Self {
        Self::new(
            DMatrix::from_element(1, 1, c),
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
        )
        .expect("scalar model is well formed")
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Output dimension.
    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    /// Input dimension.
    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        (self.c, self.a, self.b)
    }

    /// Spectral radius `ρ(A)`.
    ///
    /// Triangular `A` (shift registers, nilpotent fixtures) is read off the
    /// diagonal exactly; Hessenberg QR on a large Jordan block would otherwise
    /// report eigenvalues of size `ε^{1/n}`.
    pub fn spectral_radius(&self) -> f64 {
        spectral_radius(&self.a)
    }

    pub fn is_schur_stable(&self) -> bool {
        self.spectral_radius() < 1.0
    }

    pub fn ensure_stable(&self) -> Result<f64> {
        let rho = self.spectral_radius();
        if rho < 1.0 {
            Ok(rho)
        } else {
            Err(SysIdError::Unstable(rho))
        }
    }

    /// The equivalent model `(C S⁻¹, S A S⁻¹, S B)`.
    pub fn similarity(&self, s: &DMatrix<f64>) -> Result<Self> {
        let n = self.n();
        if s.nrows() != n || s.ncols() != n {
            return Err(SysIdError::Dimension(format!(
                "similarity transform must be {n}x{n}"
            )));
        }
        let s_inv = s
            .clone()
            .try_inverse()
            .ok_or_else(|| SysIdError::Numerical("similarity transform is singular".into()))?;
        Self::new(&self.c * &s_inv, s * &self.a * &s_inv, s * &self.b)
    }

    /// Parallel interconnection realizing `G_self(z) − G_other(z)`.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        if self.p() != other.p() || self.m() != other.m() {
            return Err(SysIdError::Dimension(format!(
                "cannot subtract a {}x{} system from a {}x{} system",
                other.p(),
                other.m(),
                self.p(),
                self.m()
            )));
        }
        let (n1, n2) = (self.n(), other.n());
        let mut a = DMatrix::zeros(n1 + n2, n1 + n2);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, n1), (n2, n2)).copy_from(&other.a);
        let mut b = DMatrix::zeros(n1 + n2, self.m());
        b.rows_mut(0, n1).copy_from(&self.b);
        b.rows_mut(n1, n2).copy_from(&other.b);
        let mut c = DMatrix::zeros(self.p(), n1 + n2);
        c.columns_mut(0, n1).copy_from(&self.c);
        c.columns_mut(n1, n2).copy_from(&(-&other.c));
        Self::new(c, a, b)
    }

    /// Parses the JSON model format (`{"C": [[..]], "A": [[..]], "B": [[..]]}`).
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub(crate) fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    let lower = (0..n).all(|i| (i + 1..n).all(|j| a[(i, j)] == 0.0));
    let upper = (0..n).all(|i| (0..i).all(|j| a[(i, j)] == 0.0));
    if lower || upper {
        return (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    }
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(SysIdError::Parse(format!("matrix {name} is empty")));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(SysIdError::Parse(format!("matrix {name} has ragged rows")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRepr {
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
}

impl Serialize for StateSpaceModel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ModelRepr {
            c: matrix_to_rows(&self.c),
            a: matrix_to_rows(&self.a),
            b: matrix_to_rows(&self.b),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for StateSpaceModel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let repr = ModelRepr::deserialize(deserializer)?;
        let c = rows_to_matrix(&repr.c, "C").map_err(D::Error::custom)?;
        let a = rows_to_matrix(&repr.a, "A").map_err(D::Error::custom)?;
        let b = rows_to_matrix(&repr.b, "B").map_err(D::Error::custom)?;
        StateSpaceModel::new(c, a, b).map_err(D::Error::custom)
    }
}

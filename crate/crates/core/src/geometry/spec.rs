use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const RANK_TOL: f64 = 1e-10;

/// The tuple `(κ, β, d_0…d_κ, B_1…B_κ, Λ)`.
///
/// Coordinates are stored layer by layer in the order `x^(0), x^(1), …, x^(κ)`.
/// The display order `x^(κ), …, x^(0), t` is used only by [`SystemSpec::assemble_b`],
/// [`SystemSpec::exp_tb`] and the `*_display` conversions on [`KineticPoint`].
#[derive(Clone, Debug, PartialEq)]
pub struct SystemSpec {
    kappa: usize,
    beta: f64,
    dims: Vec<usize>,
    blocks: Vec<DMatrix<f64>>,
    lambda: f64,
    offsets: Vec<usize>,
}

impl SystemSpec {
    /// Validate and build. `blocks[i-1]` is `B_i` with shape `d_i × d_{i-1}`.
    pub fn new(
        kappa: usize,
        beta: f64,
        dims: Vec<usize>,
        blocks: Vec<DMatrix<f64>>,
        lambda: f64,
    ) -> Result<Self> {
        if kappa < 1 {
            return Err(Error::InvalidSpec("kappa must be at least 1".into()));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::InvalidSpec(format!(
                "beta = {beta} is outside (0, 1]"
            )));
        }
        if !(lambda.is_finite() && lambda >= 1.0) {
            return Err(Error::InvalidSpec(format!(
                "lambda = {lambda} must be >= 1"
            )));
        }
        if dims.len() != kappa + 1 {
            return Err(Error::InvalidSpec(format!(
                "expected {} layer dimensions, got {}",
                kappa + 1,
                dims.len()
            )));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidSpec("layer dimensions must be >= 1".into()));
        }
        if dims.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidSpec(
                "layer dimensions must be non-increasing".into(),
            ));
        }
        if blocks.len() != kappa {
            return Err(Error::InvalidSpec(format!(
                "expected {kappa} blocks, got {}",
                blocks.len()
            )));
        }
        let mut op_norm: f64 = 0.0;
        for (k, b) in blocks.iter().enumerate() {
            let i = k + 1;
            if b.nrows() != dims[i] || b.ncols() != dims[i - 1] {
                return Err(Error::InvalidSpec(format!(
                    "B_{i} has shape {}x{}, expected {}x{}",
                    b.nrows(),
                    b.ncols(),
                    dims[i],
                    dims[i - 1]
                )));
            }
            if b.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidSpec(format!("B_{i} has non-finite entries")));
            }
            let sv = b.clone().svd(false, false).singular_values;
            let smax = sv.max();
            let smin = sv.min();
            if !(smax > 0.0) || smin <= RANK_TOL * smax {
                return Err(Error::InvalidSpec(format!(
                    "B_{i} is rank deficient (singular values {smin:e} .. {smax:e})"
                )));
            }
            op_norm = op_norm.max(smax);
        }
        // Blocks occupy disjoint rows and columns, so ||B|| is the largest block norm.
        if op_norm > lambda * (1.0 + 1e-12) {
            return Err(Error::InvalidSpec(format!(
                "operator norm of B is {op_norm}, exceeding lambda = {lambda}"
            )));
        }
        let mut offsets = Vec::with_capacity(kappa + 2);
        let mut acc = 0;
        for &d in &dims {
            offsets.push(acc);
            acc += d;
        }
        offsets.push(acc);
        Ok(Self {
            kappa,
            beta,
            dims,
            blocks,
            lambda,
            offsets,
        })
    }

    /// Chain with every `d_i = d` and `B_i = Id`.
    pub fn chain(kappa: usize, d: usize, beta: f64, lambda: f64) -> Result<Self> {
        let blocks = (0..kappa).map(|_| DMatrix::identity(d, d)).collect();
        Self::new(kappa, beta, vec![d; kappa + 1], blocks, lambda)
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }
    pub fn d0(&self) -> usize {
        self.dims[0]
    }
    /// Total spatial dimension `N = Σ d_i`.
    pub fn n(&self) -> usize {
        self.offsets[self.kappa + 1]
    }
    /// Start of layer `i` in the internal flat vector.
    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }
    /// `B_i` for `1 ≤ i ≤ κ`.
    pub fn block(&self, i: usize) -> &DMatrix<f64> {
        &self.blocks[i - 1]
    }
    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }
    /// True when every layer has dimension `d_0`, so all `B_i` are square and invertible.
    pub fn is_square(&self) -> bool {
        self.dims.iter().all(|&d| d == self.dims[0])
    }

    /// Ordered product `B_i B_{i-1} ⋯ B_j`, shape `d_i × d_{j-1}`.
    pub fn composed_block(&self, i: usize, j: usize) -> Result<DMatrix<f64>> {
        if j < 1 || j > i || i > self.kappa {
            return Err(Error::IndexOutOfRange(format!(
                "composed_block({i}, {j}) needs 1 <= j <= i <= {}",
                self.kappa
            )));
        }
        Ok(self.composed(i, j))
    }

    /// As [`Self::composed_block`] but also accepts the empty product `j = i + 1` (identity).
    pub(crate) fn composed(&self, i: usize, j: usize) -> DMatrix<f64> {
        let mut m = DMatrix::identity(self.dims[i], self.dims[i]);
        for k in (j..=i).rev() {
            // m currently maps layer k into layer i
            m = &m * self.block(k);
        }
        m
    }

    /// `B` in internal ordering: block `(i, i-1)` holds `B_i` (strictly block lower triangular).
    pub fn assemble_b_internal(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut b = DMatrix::zeros(n, n);
        for i in 1..=self.kappa {
            b.view_mut(
                (self.offsets[i], self.offsets[i - 1]),
                (self.dims[i], self.dims[i - 1]),
            )
            .copy_from(self.block(i));
        }
        b
    }

    /// `B` in display ordering `(x^(κ), …, x^(0))`, where `B_i` sits on the block super-diagonal.
    pub fn assemble_b(&self) -> DMatrix<f64> {
        self.to_display_matrix(&self.assemble_b_internal())
    }

    /// `exp(tB)` as the terminating series `Σ_{m≤κ} (tB)^m / m!` (internal ordering).
    pub fn exp_tb_internal(&self, t: f64) -> DMatrix<f64> {
        let n = self.n();
        let tb = self.assemble_b_internal() * t;
        let mut out = DMatrix::identity(n, n);
        let mut term = DMatrix::identity(n, n);
        for m in 1..=self.kappa {
            term = &term * &tb / m as f64;
            out += &term;
        }
        out
    }

    /// `exp(tB)` in display ordering.
    pub fn exp_tb(&self, t: f64) -> DMatrix<f64> {
        self.to_display_matrix(&self.exp_tb_internal(t))
    }

    /// Display position of internal flat index `k`.
    pub fn display_index(&self, k: usize) -> usize {
        let layer = (0..=self.kappa)
            .rev()
            .find(|&i| self.offsets[i] <= k)
            .unwrap_or(0);
        let within = k - self.offsets[layer];
        let before: usize = self.dims[layer + 1..].iter().sum();
        before + within
    }

    /// Permute an `N × N` internal matrix into display ordering.
    pub fn to_display_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n();
        let perm: Vec<usize> = (0..n).map(|k| self.display_index(k)).collect();
        let mut out = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                out[(perm[a], perm[b])] = m[(a, b)];
            }
        }
        out
    }
}

/// A point `z = (x, t)` of `R^{N+1}`, layers stored as `x^(0), …, x^(κ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct KineticPoint {
    layers: Vec<DVector<f64>>,
    t: f64,
}

impl KineticPoint {
    pub fn new(spec: &SystemSpec, layers: Vec<DVector<f64>>, t: f64) -> Result<Self> {
        if layers.len() != spec.kappa() + 1 {
            return Err(Error::DimensionMismatch {
                expected: spec.kappa() + 1,
                got: layers.len(),
            });
        }
        for (l, &d) in layers.iter().zip(spec.dims()) {
            if l.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: l.len(),
                });
            }
        }
        Ok(Self { layers, t })
    }

    pub fn origin(spec: &SystemSpec) -> Self {
        Self {
            layers: spec.dims().iter().map(|&d| DVector::zeros(d)).collect(),
            t: 0.0,
        }
    }

    /// From an internal flat spatial vector of length `N`.
    pub fn from_flat(spec: &SystemSpec, x: &DVector<f64>, t: f64) -> Result<Self> {
        if x.len() != spec.n() {
            return Err(Error::DimensionMismatch {
                expected: spec.n(),
                got: x.len(),
            });
        }
        let layers = (0..=spec.kappa())
            .map(|i| x.rows(spec.offset(i), spec.dims()[i]).into_owned())
            .collect();
        Ok(Self { layers, t })
    }

    /// From `(x^(κ), …, x^(0), t)`, the order points are written in.
    pub fn from_display(spec: &SystemSpec, coords: &[f64]) -> Result<Self> {
        if coords.len() != spec.n() + 1 {
            return Err(Error::DimensionMismatch {
                expected: spec.n() + 1,
                got: coords.len(),
            });
        }
        let mut x = DVector::zeros(spec.n());
        for k in 0..spec.n() {
            x[k] = coords[spec.display_index(k)];
        }
        Self::from_flat(spec, &x, coords[spec.n()])
    }

    pub fn to_display(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .layers
            .iter()
            .rev()
            .flat_map(|l| l.iter().copied())
            .collect();
        out.push(self.t);
        out
    }

    pub fn flat(&self) -> DVector<f64> {
        let v: Vec<f64> = self.layers.iter().flat_map(|l| l.iter().copied()).collect();
        DVector::from_vec(v)
    }

    pub fn layer(&self, i: usize) -> &DVector<f64> {
        &self.layers[i]
    }
    pub fn layers(&self) -> &[DVector<f64>] {
        &self.layers
    }
    pub fn t(&self) -> f64 {
        self.t
    }

    /// Largest absolute coordinate difference, time included.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let dx = (self.flat() - other.flat()).amax();
        dx.max((self.t - other.t).abs())
    }
}

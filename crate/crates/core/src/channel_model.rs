//! Correlated Rayleigh channel realizations and the cascaded quantities derived from them.
//!
//! Indices are 0-based throughout: antenna 0 is the typical antenna and user 0 the
//! typical user.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};

/// Problem sizes: `m` BS antennas, `n` IRS elements, `k` users.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SystemDims {
    pub m: usize,
    pub n: usize,
    pub k: usize,
}

impl SystemDims {
    pub fn new(m: usize, n: usize, k: usize) -> Result<Self> {
        if m == 0 || n == 0 || k == 0 {
            return Err(Error::InvalidParameter(format!(
                "dimensions must be positive, got M={m}, N={n}, K={k}"
            )));
        }
        Ok(Self { m, n, k })
    }

    /// True when the antenna count is at least the IRS element count.
    pub fn many_antennas(&self) -> bool {
        self.m >= self.n
    }

    /// Unknowns left after exploiting the antenna correlation: `KN + (M-1)N`.
    pub fn reduced_unknowns(&self) -> usize {
        self.k * self.n + (self.m - 1) * self.n
    }

    pub fn full_unknowns(&self) -> usize {
        self.k * self.m * self.n
    }
}

/// Large-scale gains and IRS-side spatial correlation (as matrix square roots).
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSpec {
    /// IRS-BS power gain (linear).
    pub irs_bs_gain: f64,
    /// User-IRS power gains, one per user (linear).
    pub user_irs_gains: Vec<f64>,
    /// Square root of the IRS transmit correlation matrix, `N x N`.
    pub irs_tx_corr_sqrt: CMatrix,
    /// Square roots of the per-user IRS receive correlation matrices, each `N x N`.
    pub user_irs_corr_sqrts: Vec<CMatrix>,
}

pub const DEFAULT_RHO: f64 = 0.5;

impl CorrelationSpec {
    /// Exponential correlation on both IRS sides with common gains for all users.
    pub fn exponential(
        dims: SystemDims,
        rho_irs: f64,
        rho_user: f64,
        irs_bs_gain: f64,
        user_irs_gain: f64,
    ) -> Result<Self> {
        let irs = build_exponential_corr_sqrt(dims.n, rho_irs)?;
        let user = build_exponential_corr_sqrt(dims.n, rho_user)?;
        let spec = Self {
            irs_bs_gain,
            user_irs_gains: vec![user_irs_gain; dims.k],
            irs_tx_corr_sqrt: irs,
            user_irs_corr_sqrts: vec![user; dims.k],
        };
        spec.validate(dims)?;
        Ok(spec)
    }

    /// Unit gains, `rho = 0.5` on both sides.
    pub fn unit(dims: SystemDims) -> Result<Self> {
        Self::exponential(dims, DEFAULT_RHO, DEFAULT_RHO, 1.0, 1.0)
    }

    pub fn validate(&self, dims: SystemDims) -> Result<()> {
        let n = dims.n;
        if self.irs_tx_corr_sqrt.shape() != (n, n) {
            return Err(Error::InvalidParameter(format!(
                "IRS correlation root is {:?}, expected ({n}, {n})",
                self.irs_tx_corr_sqrt.shape()
            )));
        }
        if self.user_irs_gains.len() != dims.k || self.user_irs_corr_sqrts.len() != dims.k {
            return Err(Error::InvalidParameter(format!(
                "expected {} user gains and correlation roots, got {} and {}",
                dims.k,
                self.user_irs_gains.len(),
                self.user_irs_corr_sqrts.len()
            )));
        }
        if !(self.irs_bs_gain >= 0.0 && self.irs_bs_gain.is_finite()) {
            return Err(Error::InvalidParameter(format!("IRS-BS gain {}", self.irs_bs_gain)));
        }
        if let Some(g) = self.user_irs_gains.iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
            return Err(Error::InvalidParameter(format!("user-IRS gain {g}")));
        }
        for (idx, s) in std::iter::once(&self.irs_tx_corr_sqrt)
            .chain(&self.user_irs_corr_sqrts)
            .enumerate()
        {
            if s.shape() != (n, n) {
                return Err(Error::InvalidParameter(format!(
                    "correlation root {idx} is {:?}, expected ({n}, {n})",
                    s.shape()
                )));
            }
            let c = s * s.adjoint();
            if c.diagonal().iter().any(|d| (d - linalg::ONE).norm() > 1e-9) {
                return Err(Error::InvalidParameter(format!(
                    "correlation root {idx} does not give a unit-diagonal correlation matrix"
                )));
            }
        }
        Ok(())
    }

    /// `E[r_{c,m} conj(r_{l,m})]`, identical for every antenna `m`.
    pub fn irs_bs_covariance(&self) -> CMatrix {
        column_gram(&self.irs_tx_corr_sqrt) * C64::from(self.irs_bs_gain)
    }

    /// `E[t_{k,c} conj(t_{k,l})]` for user `k`.
    pub fn user_irs_covariance(&self, k: usize) -> CMatrix {
        column_gram(&self.user_irs_corr_sqrts[k]) * C64::from(self.user_irs_gains[k])
    }
}

// (S^T conj(S))_{c,l} = sum_i S_{i,c} conj(S_{i,l})
fn column_gram(s: &CMatrix) -> CMatrix {
    s.transpose() * s.conjugate()
}

/// Principal square root of the exponential correlation matrix `C_{i,j} = rho^|i-j|`.
pub fn build_exponential_corr_sqrt(n: usize, rho: f64) -> Result<CMatrix> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!("rho must lie in [0, 1), got {rho}")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("correlation size must be positive".into()));
    }
    if rho == 0.0 {
        return Ok(CMatrix::identity(n, n));
    }
    Ok(linalg::hermitian_sqrt(&exponential_corr(n, rho)))
}

pub fn exponential_corr(n: usize, rho: f64) -> CMatrix {
    CMatrix::from_fn(n, n, |i, j| C64::from(rho.powi(i.abs_diff(j) as i32)))
}

/// One draw of every physical channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Direct user-BS channels, `M x K`, column `k` is `h_k`.
    pub h: CMatrix,
    /// IRS-BS channels, `N x M`, row `n` is `r_n^T`.
    pub r: CMatrix,
    /// User-IRS channels, `K x N`, entry `(k, n)` is `t_{k,n}`.
    pub t: CMatrix,
}

impl ChannelRealization {
    pub fn dims(&self) -> SystemDims {
        SystemDims {
            m: self.r.ncols(),
            n: self.r.nrows(),
            k: self.t.nrows(),
        }
    }
}

/// Samples a realization from the correlated Rayleigh model.
///
/// `r_{n,m} = sum_i rt_{i,m} S_{i,n}` with `rt ~ CN(0, irs_bs_gain)` and
/// `t_{k,n} = sum_i S^k_{i,n} tt_{k,i}` with `tt ~ CN(0, user_irs_gains[k])`.
/// Direct channels are i.i.d. CN(0, 1). The draw order is `h`, then `rt`, then `tt`,
/// all from one ChaCha8 stream seeded with `seed`.
pub fn sample_channels(dims: SystemDims, spec: &CorrelationSpec, seed: u64) -> Result<ChannelRealization> {
    spec.validate(dims)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = CMatrix::from_fn(dims.m, dims.k, |_, _| linalg::sample_cscg(&mut rng, 1.0));
    let r_iid = CMatrix::from_fn(dims.n, dims.m, |_, _| linalg::sample_cscg(&mut rng, spec.irs_bs_gain));
    let r = spec.irs_tx_corr_sqrt.transpose() * r_iid;
    let mut t = CMatrix::zeros(dims.k, dims.n);
    for k in 0..dims.k {
        let t_iid = CVector::from_fn(dims.n, |_, _| linalg::sample_cscg(&mut rng, spec.user_irs_gains[k]));
        let row = spec.user_irs_corr_sqrts[k].transpose() * t_iid;
        t.set_row(k, &row.transpose());
    }
    Ok(ChannelRealization { h, r, t })
}

/// Cascaded channels viewed per user (`g`) and per antenna (`v`), plus both
/// families of correlation coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadedChannels {
    dims: SystemDims,
    g: Vec<CVector>,
    v: Vec<CVector>,
    /// `beta[(m, n)] = r_{n,m} / r_{n,0}`; row 0 is all ones.
    pub beta: CMatrix,
    /// `lambda[(k, n)] = t_{k,n} / t_{0,n}`; row 0 is all ones.
    pub lambda: CMatrix,
}

impl CascadedChannels {
    pub fn dims(&self) -> SystemDims {
        self.dims
    }

    /// `g_{k,n} = t_{k,n} r_n`, an M-vector.
    pub fn g(&self, k: usize, n: usize) -> &CVector {
        &self.g[k * self.dims.n + n]
    }

    /// `v_{m,n} = r_{n,m} t_n`, a K-vector.
    pub fn v(&self, m: usize, n: usize) -> &CVector {
        &self.v[m * self.dims.n + n]
    }

    /// Typical-antenna unknowns `[v_{0,0}^T, ..., v_{0,N-1}^T]^T` (n outer, k inner).
    pub fn v_typical_stacked(&self) -> CVector {
        stack((0..self.dims.n).map(|n| self.v(0, n)))
    }

    /// `[v_0^T, ..., v_{M-1}^T]^T` with `v_m = [v_{m,0}^T, ..., v_{m,N-1}^T]^T`.
    pub fn v_full_stacked(&self) -> CVector {
        stack(self.v.iter())
    }

    /// `[g_0^T, ..., g_{K-1}^T]^T` with `g_k = [g_{k,0}^T, ..., g_{k,N-1}^T]^T`.
    pub fn g_full_stacked(&self) -> CVector {
        stack(self.g.iter())
    }

    /// Scales every cascaded vector by `c`; the correlation coefficients are unchanged.
    pub fn scaled(&self, c: C64) -> Self {
        let mut out = self.clone();
        out.g.iter_mut().for_each(|x| *x *= c);
        out.v.iter_mut().for_each(|x| *x *= c);
        out
    }
}

pub(crate) fn stack<'a>(parts: impl Iterator<Item = &'a CVector>) -> CVector {
    let data: Vec<C64> = parts.flat_map(|p| p.iter().copied()).collect();
    CVector::from_vec(data)
}

pub fn derive_cascaded(ch: &ChannelRealization) -> Result<CascadedChannels> {
    let dims = ch.dims();
    if ch.h.shape() != (dims.m, dims.k) || ch.t.ncols() != dims.n {
        return Err(Error::InvalidParameter("channel realization shapes disagree".into()));
    }
    for n in 0..dims.n {
        if ch.r[(n, 0)] == linalg::ZERO {
            return Err(Error::DegenerateChannel(format!("r_{{{},1}} is zero", n + 1)));
        }
        if ch.t[(0, n)] == linalg::ZERO {
            return Err(Error::DegenerateChannel(format!("t_{{1,{}}} is zero", n + 1)));
        }
    }
    let mut g = Vec::with_capacity(dims.k * dims.n);
    for k in 0..dims.k {
        for n in 0..dims.n {
            g.push(ch.r.row(n).transpose() * ch.t[(k, n)]);
        }
    }
    let mut v = Vec::with_capacity(dims.m * dims.n);
    for m in 0..dims.m {
        for n in 0..dims.n {
            v.push(ch.t.column(n) * ch.r[(n, m)]);
        }
    }
    let beta = CMatrix::from_fn(dims.m, dims.n, |m, n| {
        if m == 0 {
            linalg::ONE
        } else {
            ch.r[(n, m)] / ch.r[(n, 0)]
        }
    });
    let lambda = CMatrix::from_fn(dims.k, dims.n, |k, n| {
        if k == 0 {
            linalg::ONE
        } else {
            ch.t[(k, n)] / ch.t[(0, n)]
        }
    });
    Ok(CascadedChannels { dims, g, v, beta, lambda })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn dims_reject_zero() {
        assert!(SystemDims::new(0, 2, 2).is_err());
        assert_eq!(SystemDims::new(4, 8, 3).unwrap().reduced_unknowns(), 3 * 8 + 3 * 8);
    }

    #[test]
    fn exponential_rho_zero_is_identity() {
        let s = build_exponential_corr_sqrt(3, 0.0).unwrap();
        assert_eq!(s, CMatrix::identity(3, 3));
    }

    #[test]
    fn exponential_two_by_two_squares_back() {
        // C = [[1, .5], [.5, 1]] has eigenpairs (1.5, [1,1]/sqrt2) and (0.5, [1,-1]/sqrt2),
        // so the principal root is [[a, b], [b, a]] with a = (sqrt1.5 + sqrt.5)/2, b = (sqrt1.5 - sqrt.5)/2.
        let s = build_exponential_corr_sqrt(2, 0.5).unwrap();
        let a = (1.5f64.sqrt() + 0.5f64.sqrt()) / 2.0;
        let b = (1.5f64.sqrt() - 0.5f64.sqrt()) / 2.0;
        assert!((s[(0, 0)] - c(a, 0.0)).norm() < 1e-12);
        assert!((s[(0, 1)] - c(b, 0.0)).norm() < 1e-12);
        let sq = &s * &s;
        let target = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(1.0, 0.0)]);
        assert!((sq - target).norm() < 1e-12);
    }

    #[test]
    fn exponential_unit_diagonal() {
        let s = build_exponential_corr_sqrt(4, 0.9).unwrap();
        let cc = &s * s.adjoint();
        for i in 0..4 {
            assert!((cc[(i, i)] - linalg::ONE).norm() < 1e-12);
        }
    }

    #[test]
    fn exponential_rejects_bad_rho() {
        assert!(build_exponential_corr_sqrt(3, 1.0).is_err());
        assert!(build_exponential_corr_sqrt(3, -0.1).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let dims = SystemDims::new(3, 4, 2).unwrap();
        let spec = CorrelationSpec::unit(dims).unwrap();
        let a = sample_channels(dims, &spec, 42).unwrap();
        let b = sample_channels(dims, &spec, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_channels(dims, &spec, 43).unwrap());
    }

    #[test]
    fn zero_gain_gives_zero_irs_bs_channel() {
        let dims = SystemDims::new(3, 4, 2).unwrap();
        let spec = CorrelationSpec::exponential(dims, 0.5, 0.5, 0.0, 1.0).unwrap();
        let ch = sample_channels(dims, &spec, 1).unwrap();
        assert!(ch.r.iter().all(|z| *z == linalg::ZERO));
        assert!(matches!(derive_cascaded(&ch), Err(Error::DegenerateChannel(_))));
    }

    #[test]
    fn sampling_rejects_mismatched_spec() {
        let dims = SystemDims::new(3, 4, 2).unwrap();
        let spec = CorrelationSpec::unit(SystemDims::new(3, 5, 2).unwrap()).unwrap();
        assert!(sample_channels(dims, &spec, 1).is_err());
    }

    #[test]
    fn hand_computed_cascade() {
        let ch = ChannelRealization {
            h: CMatrix::zeros(2, 1),
            r: CMatrix::from_row_slice(1, 2, &[c(2.0, 0.0), c(0.0, 6.0)]),
            t: CMatrix::from_row_slice(1, 1, &[c(3.0, 0.0)]),
        };
        let cas = derive_cascaded(&ch).unwrap();
        assert_eq!(cas.g(0, 0).as_slice(), &[c(6.0, 0.0), c(0.0, 18.0)]);
        assert_eq!(cas.v(0, 0)[0], c(6.0, 0.0));
        assert_eq!(cas.v(1, 0)[0], c(0.0, 18.0));
        assert!((cas.beta[(1, 0)] - c(0.0, 3.0)).norm() < 1e-15);
    }

    #[test]
    fn identical_irs_bs_entries_give_unit_beta() {
        let ch = ChannelRealization {
            h: CMatrix::zeros(3, 2),
            r: CMatrix::from_element(4, 3, linalg::ONE),
            t: CMatrix::from_fn(2, 4, |k, n| c(1.0 + k as f64, n as f64)),
        };
        let cas = derive_cascaded(&ch).unwrap();
        assert!(cas.beta.iter().all(|b| *b == linalg::ONE));
    }

    #[test]
    fn reindexing_and_scaling_identities() {
        let dims = SystemDims::new(5, 6, 3).unwrap();
        let spec = CorrelationSpec::unit(dims).unwrap();
        let ch = sample_channels(dims, &spec, 9).unwrap();
        let cas = derive_cascaded(&ch).unwrap();
        for m in 0..dims.m {
            for n in 0..dims.n {
                for k in 0..dims.k {
                    assert_eq!(cas.v(m, n)[k], cas.g(k, n)[m]);
                }
                let scaled = cas.v(0, n) * cas.beta[(m, n)];
                assert!((scaled - cas.v(m, n)).norm() <= 1e-12 * cas.v(m, n).norm());
            }
        }
        for k in 0..dims.k {
            for n in 0..dims.n {
                let scaled = cas.g(0, n) * cas.lambda[(k, n)];
                assert!((scaled - cas.g(k, n)).norm() <= 1e-12 * cas.g(k, n).norm());
            }
        }
        assert!((linalg::sq_norm(&cas.v_full_stacked()) - linalg::sq_norm(&cas.g_full_stacked())).abs() < 1e-9);
    }
}

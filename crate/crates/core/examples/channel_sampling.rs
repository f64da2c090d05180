//! Draws a correlated channel realization and checks the two scaling structures of the
//! cascaded channels: across antennas (`v_{m,n} = beta_{m,n} v_{1,n}`) and across users
//! (`g_{k,n} = lambda_{k,n} g_{1,n}`).

use irs_chanest::{derive_cascaded, sample_channels, CorrelationSpec, SystemDims};

pub fn main() -> irs_chanest::Result<()> {
    let dims = SystemDims::new(4, 6, 3)?;
    let spec = CorrelationSpec::exponential(dims, 0.7, 0.4, 1e-7, 1e-6)?;
    let ch = sample_channels(dims, &spec, 7)?;
    let casc = derive_cascaded(&ch)?;

    let mut antenna_gap: f64 = 0.0;
    let mut user_gap: f64 = 0.0;
    for n in 0..dims.n {
        for m in 0..dims.m {
            let scaled = casc.v(0, n) * casc.beta[(m, n)];
            antenna_gap = antenna_gap.max((casc.v(m, n) - scaled).norm() / casc.v(m, n).norm());
        }
        for k in 0..dims.k {
            let scaled = casc.g(0, n) * casc.lambda[(k, n)];
            user_gap = user_gap.max((casc.g(k, n) - scaled).norm() / casc.g(k, n).norm());
        }
    }
    println!("M={} N={} K={}", dims.m, dims.n, dims.k);
    println!("IRS-BS covariance diagonal: {:.3e}", spec.irs_bs_covariance()[(0, 0)].re);
    println!("|r| Frobenius: {:.3e}, |t| Frobenius: {:.3e}", ch.r.norm(), ch.t.norm());
    println!("max relative gap, antenna scaling: {antenna_gap:.2e}");
    println!("max relative gap, user scaling:    {user_gap:.2e}");
    println!("beta (first two antennas):\n{:.3}", casc.beta.rows(0, 2));
    Ok(())
}

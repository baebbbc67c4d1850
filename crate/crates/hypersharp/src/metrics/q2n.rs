//! Universal image quality index generalised to hyperspectral cubes through
//! hypercomplex algebra.
//!
//! Each pixel's spectrum (zero-padded to a power-of-two length `D`) is read
//! as one hypercomplex number built by repeated Cayley-Dickson doubling of
//! the reals. Over every non-overlapping block the index multiplies three
//! factors: the modulus of the hypercomplex correlation coefficient, a
//! contrast term, and a luminance term; the image score is the mean over
//! blocks. Identical cubes score 1; the score degrades with spectral as
//! well as spatial distortion because the correlation is computed jointly
//! over all bands rather than band by band.

use crate::cube::ImageCube;
use crate::error::{Error, Result};
use crate::parallel::{map_indices, pairwise_sum};

/// Default block side used across the crate.
pub const DEFAULT_BLOCK: usize = 32;

/// Basis product signs of the Cayley-Dickson algebra of dimension `dim`
/// (a power of two): `e_p * e_q = sign[p * dim + q] * e_{p XOR q}`.
///
/// Built by doubling: with `z = (a, b)` and `w = (c, d)` the product is
/// `z * w = (a c - conj(d) b, d a + b conj(c))`, and `conj(e_q)` flips the
/// sign of every non-real basis element.
fn sign_table(dim: usize) -> Vec<i8> {
    debug_assert!(dim.is_power_of_two());
    let mut table = vec![1i8];
    let mut m = 1usize;
    while m < dim {
        let mut next = vec![0i8; 4 * m * m];
        let stride = 2 * m;
        for p in 0..m {
            for q in 0..m {
                let s = table[p * m + q];
                let s_rev = table[q * m + p];
                // low * low: a c
                next[p * stride + q] = s;
                // low * high: d a, evaluated as e_q * e_p
                next[p * stride + (m + q)] = s_rev;
                // high * low: b conj(c)
                next[(m + p) * stride + q] = if q == 0 { s } else { -s };
                // high * high: -conj(d) b
                next[(m + p) * stride + (m + q)] = if q == 0 { -s_rev } else { s_rev };
            }
        }
        table = next;
        m = stride;
    }
    table
}

struct BlockStats {
    q: f64,
}

/// Statistics of one block pair, with the degenerate cases resolved:
/// undefined factors from matching degeneracy count as 1 (identical
/// constant blocks score 1), while a variance that vanishes on exactly one
/// side scores 0.
#[allow(clippy::too_many_arguments)]
fn block_quality(
    gt: &ImageCube,
    fused: &ImageCube,
    row0: usize,
    col0: usize,
    block: usize,
    dim: usize,
    signs: &[i8],
) -> BlockStats {
    let bands = gt.bands();
    let n = (block * block) as f64;

    let mut mean_z = vec![0.0; bands];
    let mut mean_w = vec![0.0; bands];
    for r in row0..row0 + block {
        for c in col0..col0 + block {
            for (p, (&z, &w)) in gt.spectrum(r, c).iter().zip(fused.spectrum(r, c)).enumerate() {
                mean_z[p] += z;
                mean_w[p] += w;
            }
        }
    }
    for p in 0..bands {
        mean_z[p] /= n;
        mean_w[p] /= n;
    }

    // Cross moments of the deviations; components past `bands` are zero.
    let mut moments = vec![0.0; bands * bands];
    let mut var_z = 0.0;
    let mut var_w = 0.0;
    let mut dz = vec![0.0; bands];
    let mut dw = vec![0.0; bands];
    for r in row0..row0 + block {
        for c in col0..col0 + block {
            for (p, (&z, &w)) in gt.spectrum(r, c).iter().zip(fused.spectrum(r, c)).enumerate() {
                dz[p] = z - mean_z[p];
                dw[p] = w - mean_w[p];
                var_z += dz[p] * dz[p];
                var_w += dw[p] * dw[p];
            }
            for (p, &zp) in dz.iter().enumerate() {
                let row = &mut moments[p * bands..(p + 1) * bands];
                for (mq, &wq) in row.iter_mut().zip(&dw) {
                    *mq += zp * wq;
                }
            }
        }
    }
    var_z /= n;
    var_w /= n;

    // Hypercomplex covariance sigma_{z conj(w)}: component p XOR q picks up
    // moments[p][q] with the basis product sign and the conjugation sign.
    let mut cov = vec![0.0; dim];
    for p in 0..bands {
        for q in 0..bands {
            let s = signs[p * dim + q] as f64;
            let conj = if q == 0 { 1.0 } else { -1.0 };
            cov[p ^ q] += s * conj * moments[p * bands + q] / n;
        }
    }
    let cov_mod = cov.iter().map(|v| v * v).sum::<f64>().sqrt();

    let mod_mz = mean_z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mod_mw = mean_w.iter().map(|v| v * v).sum::<f64>().sqrt();
    let luminance = if mod_mz == 0.0 && mod_mw == 0.0 {
        1.0
    } else {
        2.0 * mod_mz * mod_mw / (mod_mz * mod_mz + mod_mw * mod_mw)
    };

    let q = if var_z == 0.0 && var_w == 0.0 {
        luminance
    } else if var_z == 0.0 || var_w == 0.0 {
        0.0
    } else {
        let correlation = cov_mod / (var_z.sqrt() * var_w.sqrt());
        let contrast = 2.0 * var_z.sqrt() * var_w.sqrt() / (var_z + var_w);
        correlation * contrast * luminance
    };
    BlockStats { q }
}

/// [`q2n`] with an explicit block side.
pub fn q2n_with_block(gt: &ImageCube, fused: &ImageCube, block: usize) -> Result<f64> {
    if gt.height() != fused.height() || gt.width() != fused.width() || gt.bands() != fused.bands()
    {
        return Err(Error::dim(format!(
            "cube shapes differ: {}x{}x{} vs {}x{}x{}",
            gt.height(),
            gt.width(),
            gt.bands(),
            fused.height(),
            fused.width(),
            fused.bands()
        )));
    }
    if block < 2 {
        return Err(Error::domain(format!("block side {block} < 2")));
    }
    let blocks_y = gt.height() / block;
    let blocks_x = gt.width() / block;
    if blocks_y == 0 || blocks_x == 0 {
        return Err(Error::dim(format!(
            "{}x{} raster smaller than one {block}x{block} block",
            gt.height(),
            gt.width()
        )));
    }
    if gt.samples().iter().all(|&v| v == 0.0) && fused.samples().iter().all(|&v| v == 0.0) {
        return Err(Error::degenerate(
            "both cubes are identically zero; quality index undefined",
        ));
    }

    let dim = gt.bands().next_power_of_two();
    let signs = sign_table(dim);
    let qs: Vec<f64> = map_indices(blocks_y * blocks_x, |i| {
        let row0 = (i / blocks_x) * block;
        let col0 = (i % blocks_x) * block;
        block_quality(gt, fused, row0, col0, block, dim, &signs).q
    });
    Ok(pairwise_sum(&qs) / qs.len() as f64)
}

/// Hypercomplex universal quality index over 32x32 blocks (ragged edges
/// dropped). 1 means identical content; sensitive to spectral and spatial
/// distortion jointly.
pub fn q2n(gt: &ImageCube, fused: &ImageCube) -> Result<f64> {
    q2n_with_block(gt, fused, DEFAULT_BLOCK)
}

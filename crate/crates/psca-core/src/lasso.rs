//! Lasso benchmark problems: min_x ½‖Ax − b‖² + λ‖x‖₁.
//!
//! Instances are synthesized with a planted, KKT-certified optimum: a dual
//! certificate u is drawn on the unit sphere, columns of a Gaussian base
//! matrix are rescaled so that Aᵀu hits λ exactly on a chosen support and
//! stays strictly below λ off it, and b = Ax* + u. Then Aᵀ(Ax* − b) = −Aᵀu
//! satisfies the ℓ1 subgradient conditions exactly, so x* is a global
//! minimizer with a certified optimal value.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::{Arc, OnceLock};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{CoreError, Result};
use crate::layout::BlockLayout;
use crate::linalg::{norm, norm_sq, power_iteration, CsrMatrix, DesignMatrix, Storage};
use crate::oracles::{LeastSquares, ScaledL1};
use crate::problem::Problem;
use crate::rng::{mix64, SplitMix64};
use crate::solver::CertifiedOptimum;

pub use crate::oracles::soft_threshold;

/// Pre-scale |v_j| band for support columns. Keeps the rescale factor
/// λ/|v_j| within λ·[2.0, 2.5], so planted support columns carry curvature
/// comparable to the spectral edge of the Gaussian bulk and the planted
/// basin stays well enough conditioned for first-order solvers to certify
/// convergence at theory-gated step sizes.
const SUPPORT_V_BAND: (f64, f64) = (0.4, 0.5);

/// Cap (in units of λ) on the off-support rescale factor θ_j·λ/|v_j|.
const OFF_SCALE_CAP: f64 = 1.6;

/// Strict-complementarity cap: off-support |Aᵀu| targets are θ_j·λ with
/// θ_j uniform on [0, THETA_MAX), keeping the optimum strictly unique.
const THETA_MAX: f64 = 0.9;

/// Degenerate-draw guard for |v_j|.
const V_EPS: f64 = 1e-12;

const MAGIC: &[u8; 8] = b"PSCALSS1";
const FORMAT_VERSION: u32 = 1;

/// ⌊sparsity·cols⌋, the planted support size.
pub fn support_size_for(cols: usize, sparsity: f64) -> usize {
    (sparsity * cols as f64).floor() as usize
}

/// A Lasso instance with a certified optimum.
#[derive(Clone)]
pub struct LassoInstance {
    design: Arc<DesignMatrix>,
    b: Vec<f64>,
    lambda: f64,
    x_star: Vec<f64>,
    h_star: f64,
    support_size: usize,
    seed: u64,
    l_grad: OnceLock<f64>,
}

/// Generates a KKT-certified instance. Pure function of its arguments:
/// identical inputs produce bit-identical instances.
pub fn generate_nesterov(
    rows: usize,
    cols: usize,
    sparsity: f64,
    lambda: f64,
    seed: u64,
) -> Result<LassoInstance> {
    if rows < 1 || cols < 1 {
        return Err(CoreError::invalid("rows and cols must be positive"));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(CoreError::invalid("lambda must be positive and finite"));
    }
    if !(sparsity > 0.0) || sparsity > 1.0 {
        return Err(CoreError::invalid("sparsity must lie in (0, 1]"));
    }
    let support_size = support_size_for(cols, sparsity);
    if support_size < 1 {
        return Err(CoreError::invalid(format!(
            "sparsity {sparsity} yields an empty support for {cols} columns"
        )));
    }

    let mut rng = SplitMix64::new(mix64(seed ^ 0x4E53_5456)); // "NSTV"

    // Dual certificate on the unit sphere.
    let mut u = vec![0.0; rows];
    loop {
        rng.fill_gaussian(&mut u);
        let n = norm(&u);
        if n > 1e-8 {
            let inv = 1.0 / n;
            for s in u.iter_mut() {
                *s *= inv;
            }
            break;
        }
    }

    // Support chosen uniformly at random (partial Fisher-Yates).
    let mut ids: Vec<usize> = (0..cols).collect();
    for k in 0..support_size {
        let j = k + rng.next_index(cols - k);
        ids.swap(k, j);
    }
    let mut on_support = vec![false; cols];
    for &j in &ids[..support_size] {
        on_support[j] = true;
    }

    // Columns, generated column-major, rescaled to their |Aᵀu| targets.
    let mut col_major = vec![0.0; rows * cols];
    let mut v = vec![0.0; cols];
    for j in 0..cols {
        let col = &mut col_major[j * rows..(j + 1) * rows];
        if on_support[j] {
            let v_raw = loop {
                rng.fill_gaussian(col);
                let v_raw = crate::linalg::dot(col, &u);
                let mag = v_raw.abs();
                if mag >= SUPPORT_V_BAND.0 && mag <= SUPPORT_V_BAND.1 {
                    break v_raw;
                }
            };
            let scale = lambda / v_raw.abs();
            for s in col.iter_mut() {
                *s *= scale;
            }
            v[j] = lambda * v_raw.signum();
        } else {
            let theta = rng.next_range_f64(0.0, THETA_MAX);
            let floor = (theta / OFF_SCALE_CAP).max(V_EPS);
            let v_raw = loop {
                rng.fill_gaussian(col);
                let v_raw = crate::linalg::dot(col, &u);
                if v_raw.abs() >= floor {
                    break v_raw;
                }
            };
            let scale = theta * lambda / v_raw.abs();
            for s in col.iter_mut() {
                *s *= scale;
            }
            v[j] = theta * lambda * v_raw.signum();
        }
    }

    // Planted optimum.
    let mut x_star = vec![0.0; cols];
    let mut sorted_support: Vec<usize> = ids[..support_size].to_vec();
    sorted_support.sort_unstable();
    for &j in &sorted_support {
        let magnitude = rng.next_range_f64(0.1, 1.0);
        x_star[j] = v[j].signum() * magnitude;
    }

    // Row-major copy for the design matrix.
    let mut data = vec![0.0; rows * cols];
    for j in 0..cols {
        for i in 0..rows {
            data[i * cols + j] = col_major[j * rows + i];
        }
    }
    drop(col_major);
    let design = Arc::new(DesignMatrix::from_dense(rows, cols, data)?);

    // b = A x* + u.
    let mut b = vec![0.0; rows];
    design.ax_into(&x_star, &mut b);
    for (bk, uk) in b.iter_mut().zip(&u) {
        *bk += uk;
    }

    let mut instance = LassoInstance {
        design,
        b,
        lambda,
        x_star,
        h_star: 0.0,
        support_size,
        seed,
        l_grad: OnceLock::new(),
    };
    instance.h_star = instance.objective(&instance.x_star)?;
    Ok(instance)
}

impl LassoInstance {
    pub fn rows(&self) -> usize {
        self.design.rows()
    }

    pub fn cols(&self) -> usize {
        self.design.cols()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn support_size(&self) -> usize {
        self.support_size
    }

    pub fn x_star(&self) -> &[f64] {
        &self.x_star
    }

    pub fn h_star(&self) -> f64 {
        self.h_star
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    pub fn certified(&self) -> CertifiedOptimum {
        CertifiedOptimum {
            x_star: self.x_star.clone(),
            h_star: self.h_star,
        }
    }

    /// ½‖Ax − b‖² + λ‖x‖₁, term order matched to the scalar-block problem
    /// wrapper so certified values compare exactly.
    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.cols() {
            return Err(CoreError::DimensionMismatch {
                expected: self.cols(),
                got: x.len(),
            });
        }
        let mut res = vec![0.0; self.rows()];
        self.design.ax_into(x, &mut res);
        for (r, b) in res.iter_mut().zip(&self.b) {
            *r -= b;
        }
        let mut g = 0.0;
        for &xi in x {
            g += self.lambda * xi.abs();
        }
        Ok(0.5 * norm_sq(&res) + g)
    }

    /// g = Aᵀ(Ax − b).
    pub fn smooth_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols() {
            return Err(CoreError::DimensionMismatch {
                expected: self.cols(),
                got: x.len(),
            });
        }
        let mut res = vec![0.0; self.rows()];
        self.design.ax_into(x, &mut res);
        for (r, b) in res.iter_mut().zip(&self.b) {
            *r -= b;
        }
        let mut g = vec![0.0; self.cols()];
        self.design.atx_into(&res, &mut g);
        Ok(g)
    }

    /// First-order optimality residual at x:
    /// max over j of |g_j + λ·sign(x_j)| where x_j ≠ 0 and of
    /// max(|g_j| − λ, 0) where x_j = 0, with g = Aᵀ(Ax − b).
    pub fn kkt_residual(&self, x: &[f64]) -> Result<f64> {
        let g = self.smooth_gradient(x)?;
        let mut worst = 0.0f64;
        for (j, &xj) in x.iter().enumerate() {
            let r = if xj != 0.0 {
                (g[j] + self.lambda * xj.signum()).abs()
            } else {
                (g[j].abs() - self.lambda).max(0.0)
            };
            worst = worst.max(r);
        }
        Ok(worst)
    }

    /// λ_max(AᵀA), the Lipschitz constant of the smooth gradient; power
    /// iteration, computed once and cached.
    pub fn lipschitz_grad(&self) -> f64 {
        *self.l_grad.get_or_init(|| {
            let rows = self.rows();
            let design = &self.design;
            power_iteration(
                self.cols(),
                |x, out| {
                    let mut tmp = vec![0.0; rows];
                    design.ax_into(x, &mut tmp);
                    design.atx_into(&tmp, out);
                },
                0x4C47_5241_44,
                1e-13,
                50_000,
            )
        })
    }

    /// Wraps the instance as a block-separable composite problem with the
    /// given block size: f = ½‖Ax−b‖², g_i = λ‖·‖₁ on each block, X_i = ℝ.
    /// Scalar blocks declare curvatures c_j = ‖a_j‖² so exact coordinate
    /// minimization and block-proximal closed forms apply.
    pub fn as_problem(&self, block_size: usize) -> Result<Problem> {
        let layout = BlockLayout::split(self.cols(), block_size)?;
        let mut smooth = LeastSquares::new(Arc::clone(&self.design), self.b.clone())?;
        if block_size == 1 {
            smooth = smooth.with_scalar_curvatures();
        }
        let nonsmooth = ScaledL1::new(self.lambda)?;
        Ok(
            Problem::new(layout, Arc::new(smooth), Arc::new(nonsmooth))?
                .with_lipschitz_grad_hint(self.lipschitz_grad()),
        )
    }

    /// Writes the binary container at `path` and a `<path>.meta` sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
        let storage = self.design.storage();
        w.write_u8(match storage {
            Storage::Dense => 0,
            Storage::Csr => 1,
        })?;
        w.write_u64::<LittleEndian>(self.rows() as u64)?;
        w.write_u64::<LittleEndian>(self.cols() as u64)?;
        w.write_f64::<LittleEndian>(self.lambda)?;
        w.write_u64::<LittleEndian>(self.seed)?;
        w.write_u64::<LittleEndian>(self.support_size as u64)?;
        w.write_f64::<LittleEndian>(self.h_star)?;
        for &x in &self.x_star {
            w.write_f64::<LittleEndian>(x)?;
        }
        for &b in &self.b {
            w.write_f64::<LittleEndian>(b)?;
        }
        match storage {
            Storage::Dense => {
                for &e in &self.design.to_dense() {
                    w.write_f64::<LittleEndian>(e)?;
                }
            }
            Storage::Csr => {
                let csr = self.design.csr().expect("storage says csr");
                w.write_u64::<LittleEndian>(csr.values.len() as u64)?;
                for &p in &csr.indptr {
                    w.write_u64::<LittleEndian>(p as u64)?;
                }
                for &i in &csr.indices {
                    w.write_u64::<LittleEndian>(i as u64)?;
                }
                for &val in &csr.values {
                    w.write_f64::<LittleEndian>(val)?;
                }
            }
        }
        w.flush()?;
        drop(w);

        let meta_path = sidecar_path(path);
        let mut meta = String::new();
        meta.push_str(&format!("format_version={FORMAT_VERSION}\n"));
        meta.push_str(&format!("rows={}\n", self.rows()));
        meta.push_str(&format!("cols={}\n", self.cols()));
        meta.push_str(&format!("lambda={:.17e}\n", self.lambda));
        meta.push_str(&format!("seed={}\n", self.seed));
        meta.push_str(&format!("support_size={}\n", self.support_size));
        meta.push_str(&format!("h_star={:.17e}\n", self.h_star));
        meta.push_str(&format!(
            "storage={}\n",
            match storage {
                Storage::Dense => "dense",
                Storage::Csr => "csr",
            }
        ));
        std::fs::write(meta_path, meta)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut r = BufReader::new(file);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(CoreError::Format("bad magic; not an instance container".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != FORMAT_VERSION {
            return Err(CoreError::Format(format!(
                "unsupported container version {version}"
            )));
        }
        let storage = match r.read_u8()? {
            0 => Storage::Dense,
            1 => Storage::Csr,
            k => return Err(CoreError::Format(format!("unknown storage kind {k}"))),
        };
        let rows = r.read_u64::<LittleEndian>()? as usize;
        let cols = r.read_u64::<LittleEndian>()? as usize;
        if rows == 0 || cols == 0 || rows > 1 << 32 || cols > 1 << 32 {
            return Err(CoreError::Format("implausible dimensions".into()));
        }
        let lambda = r.read_f64::<LittleEndian>()?;
        let seed = r.read_u64::<LittleEndian>()?;
        let support_size = r.read_u64::<LittleEndian>()? as usize;
        let h_star = r.read_f64::<LittleEndian>()?;
        let mut x_star = vec![0.0; cols];
        for x in x_star.iter_mut() {
            *x = r.read_f64::<LittleEndian>()?;
        }
        let mut b = vec![0.0; rows];
        for v in b.iter_mut() {
            *v = r.read_f64::<LittleEndian>()?;
        }
        let design = match storage {
            Storage::Dense => {
                let mut data = vec![0.0; rows * cols];
                for e in data.iter_mut() {
                    *e = r.read_f64::<LittleEndian>()?;
                }
                DesignMatrix::from_dense_with_storage(rows, cols, data, Storage::Dense)?
            }
            Storage::Csr => {
                let nnz = r.read_u64::<LittleEndian>()? as usize;
                let mut indptr = vec![0usize; rows + 1];
                for p in indptr.iter_mut() {
                    *p = r.read_u64::<LittleEndian>()? as usize;
                }
                let mut indices = vec![0usize; nnz];
                for i in indices.iter_mut() {
                    *i = r.read_u64::<LittleEndian>()? as usize;
                }
                let mut values = vec![0.0; nnz];
                for v in values.iter_mut() {
                    *v = r.read_f64::<LittleEndian>()?;
                }
                if indptr[rows] != nnz || indices.iter().any(|&i| i >= cols) {
                    return Err(CoreError::Format("inconsistent CSR arrays".into()));
                }
                DesignMatrix::from_csr(CsrMatrix {
                    rows,
                    cols,
                    indptr,
                    indices,
                    values,
                })?
            }
        };
        Ok(LassoInstance {
            design: Arc::new(design),
            b,
            lambda,
            x_star,
            h_star,
            support_size,
            seed,
            l_grad: OnceLock::new(),
        })
    }
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_os_string();
    os.push(".meta");
    std::path::PathBuf::from(os)
}

//! Spatially-correlated Rician channels for a 2-D fluid antenna surface.
//!
//! Ports are laid out on an `n1 x n2` grid spanning `w1 x w2` wavelengths and
//! flattened row-major (`k = j + i * n2`, zero-based). The NLoS part of every
//! BS-antenna row has the Jakes-type covariance
//! `J[k1,k2] = omega * j0(2*pi*d(k1,k2))`, where `d` is the port spacing in
//! wavelengths. The LoS part is a rank-one plane wave across the BS array and
//! the port grid.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Zeroth-order Bessel function of the first kind.
///
/// Evaluated by the periodic trapezoid rule on
/// `j0(x) = 1/(2*pi) * integral_0^{2*pi} cos(x sin(theta)) d(theta)`. The rule
/// is exact up to terms of order `J_n(x)` for `n` nodes, so taking
/// `n > |x| + 40` leaves only rounding error.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    let nodes = (((x + 40.0) / 4.0).ceil() as usize) * 4;
    let step = 2.0 * PI / nodes as f64;
    // integrand is symmetric under theta -> pi - theta and theta -> -theta
    let quarter = nodes / 4;
    let mut sum = 0.5 * (1.0 + x.cos());
    for k in 1..quarter {
        sum += (x * (k as f64 * step).sin()).cos();
    }
    sum / quarter as f64
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PortGrid {
    pub n1: usize,
    pub n2: usize,
    /// Surface width in wavelengths.
    pub w1: f64,
    /// Surface height in wavelengths.
    pub w2: f64,
}

impl PortGrid {
    pub fn new(n1: usize, n2: usize, w1: f64, w2: f64) -> Result<Self> {
        let grid = PortGrid { n1, n2, w1, w2 };
        grid.validate()?;
        Ok(grid)
    }

    /// Square `side x side` grid on a `width x width` surface.
    pub fn square(side: usize, width: f64) -> Result<Self> {
        Self::new(side, side, width, width)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::invalid(format!("port grid {}x{} is empty", self.n1, self.n2)));
        }
        if !(self.w1 > 0.0 && self.w2 > 0.0) || !self.w1.is_finite() || !self.w2.is_finite() {
            return Err(Error::invalid(format!(
                "surface size {}x{} must be positive and finite",
                self.w1, self.w2
            )));
        }
        Ok(())
    }

    pub fn num_ports(&self) -> usize {
        self.n1 * self.n2
    }

    /// Flattened index of the port on row `i`, column `j` (both zero-based).
    pub fn linear_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n1 && j < self.n2);
        j + i * self.n2
    }

    /// Inverse of [`PortGrid::linear_index`].
    pub fn grid_index(&self, k: usize) -> (usize, usize) {
        (k / self.n2, k % self.n2)
    }

    /// Port position in wavelengths. A dimension with a single port has zero extent.
    pub fn position(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.grid_index(k);
        let along = |idx: usize, count: usize, width: f64| {
            if count == 1 {
                0.0
            } else {
                idx as f64 / (count - 1) as f64 * width
            }
        };
        (along(i, self.n1, self.w1), along(j, self.n2, self.w2))
    }
}

/// Port-to-port NLoS covariance `J` (real, symmetric, diagonal `omega`).
pub fn spatial_covariance(grid: &PortGrid, omega: f64) -> DMatrix<f64> {
    let n = grid.num_ports();
    let mut cov = DMatrix::zeros(n, n);
    for k1 in 0..n {
        let (x1, y1) = grid.position(k1);
        cov[(k1, k1)] = omega;
        for k2 in (k1 + 1)..n {
            let (x2, y2) = grid.position(k2);
            let dist = ((x1 - x2).powi(2) + (y1 - y2).powi(2)).sqrt();
            let v = omega * bessel_j0(2.0 * PI * dist);
            cov[(k1, k2)] = v;
            cov[(k2, k1)] = v;
        }
    }
    cov
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelModel {
    /// Rice factor `L` (LoS to NLoS power ratio).
    pub rice_factor: f64,
    /// Per-entry channel power `omega`.
    pub channel_power: f64,
    pub num_bs_antennas: usize,
    pub grid: PortGrid,
}

impl ChannelModel {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.rice_factor >= 0.0) || !self.rice_factor.is_finite() {
            return Err(Error::invalid(format!("rice factor {} must be >= 0", self.rice_factor)));
        }
        if !(self.channel_power > 0.0) || !self.channel_power.is_finite() {
            return Err(Error::invalid(format!("channel power {} must be > 0", self.channel_power)));
        }
        if self.num_bs_antennas == 0 {
            return Err(Error::invalid("BS needs at least one antenna"));
        }
        Ok(())
    }
}

/// Channel of one user: `M x N`, column `n` is the port-`n` channel vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelMatrix {
    pub entries: DMatrix<Complex64>,
    pub user_id: usize,
}

impl ChannelMatrix {
    pub fn new(entries: DMatrix<Complex64>, user_id: usize) -> Self {
        ChannelMatrix { entries, user_id }
    }

    pub fn num_bs_antennas(&self) -> usize {
        self.entries.nrows()
    }

    pub fn num_ports(&self) -> usize {
        self.entries.ncols()
    }

    /// Debug dump with columns `m, n, re, im`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["m", "n", "re", "im"])?;
        for n in 0..self.num_ports() {
            for m in 0..self.num_bs_antennas() {
                let h = self.entries[(m, n)];
                w.write_record(&[m.to_string(), n.to_string(), h.re.to_string(), h.im.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Where users are dropped. Used only for LoS angles; path loss is not modeled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Deployment {
    /// Side of the square UE area, meters.
    pub side: f64,
    /// Distance from the BS to the center of the UE area, meters.
    pub distance: f64,
    /// BS height above the UE plane, meters.
    pub bs_height: f64,
}

impl Default for Deployment {
    fn default() -> Self {
        Deployment { side: 100.0, distance: 200.0, bs_height: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UserGeometry {
    /// UE position in meters; the UE square is centered on the origin and the
    /// BS sits at `(0, -distance)`.
    pub position: [f64; 2],
    /// Azimuth of the BS-to-UE direction, radians from the BS array axis.
    pub los_azimuth: f64,
    /// Elevation of the BS-to-UE direction, radians.
    pub los_elevation: f64,
}

impl UserGeometry {
    pub fn at(position: [f64; 2], deployment: &Deployment) -> Self {
        let dx = position[0];
        let dy = position[1] + deployment.distance;
        let horizontal = dx.hypot(dy);
        UserGeometry {
            position,
            los_azimuth: dy.atan2(dx),
            los_elevation: (-deployment.bs_height).atan2(horizontal),
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, deployment: &Deployment) -> Self {
        let half = deployment.side / 2.0;
        let x = rng.random_range(-half..=half);
        let y = rng.random_range(-half..=half);
        Self::at([x, y], deployment)
    }

    /// Phase of the LoS component at BS antenna `m` (half-wavelength ULA).
    fn bs_phase(&self, m: usize) -> f64 {
        PI * m as f64 * self.los_azimuth.cos() * self.los_elevation.cos()
    }

    /// Phase of the LoS component at a port located at `(p1, p2)` wavelengths.
    fn port_phase(&self, p1: f64, p2: f64) -> f64 {
        let c = self.los_elevation.cos();
        -2.0 * PI * c * (p1 * self.los_azimuth.cos() + p2 * self.los_azimuth.sin())
    }
}

/// Rank-one plane-wave LoS matrix with entry modulus `sqrt(omega)`.
pub fn los_matrix(model: &ChannelModel, geom: &UserGeometry) -> DMatrix<Complex64> {
    let amp = model.channel_power.sqrt();
    let bs: Vec<f64> = (0..model.num_bs_antennas).map(|m| geom.bs_phase(m)).collect();
    let ports: Vec<f64> = (0..model.grid.num_ports())
        .map(|k| {
            let (p1, p2) = model.grid.position(k);
            geom.port_phase(p1, p2)
        })
        .collect();
    DMatrix::from_fn(bs.len(), ports.len(), |m, n| Complex64::from_polar(amp, bs[m] + ports[n]))
}

/// Channel sampler with the covariance factor computed once.
///
/// `J` is factored as `V * sqrt(max(Lambda, 0))`; Bessel kernels on dense grids
/// are routinely indefinite at rounding level.
#[derive(Clone, Debug)]
pub struct CorrelatedRician {
    model: ChannelModel,
    /// Transposed color factor, `N x N`.
    color_t: DMatrix<f64>,
    clipped_eigenvalues: usize,
}

impl CorrelatedRician {
    pub fn new(model: ChannelModel) -> Result<Self> {
        model.validate()?;
        let cov = spatial_covariance(&model.grid, model.channel_power);
        let n = cov.nrows();
        let trace = cov.trace();
        let frob = cov.norm();
        let eig = SymmetricEigen::try_new(cov, f64::EPSILON, 1000 * n.max(10)).ok_or_else(|| Error::Numerical {
            what: "covariance eigendecomposition did not converge",
            detail: format!("N={n}, trace={trace:.6e}, frobenius={frob:.6e}"),
        })?;
        let mut clipped = 0;
        let scale: Vec<f64> = eig
            .eigenvalues
            .iter()
            .map(|&l| {
                if l < 0.0 {
                    clipped += 1;
                    0.0
                } else {
                    l.sqrt()
                }
            })
            .collect();
        let color = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, c)] * scale[c]);
        if color.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                what: "covariance factor is not finite",
                detail: format!("N={n}, trace={trace:.6e}"),
            });
        }
        let color_t = color.transpose();
        Ok(CorrelatedRician { model, color_t, clipped_eigenvalues: clipped })
    }

    pub fn model(&self) -> &ChannelModel {
        &self.model
    }

    /// Number of negative eigenvalues of `J` that were clipped to zero.
    pub fn clipped_eigenvalues(&self) -> usize {
        self.clipped_eigenvalues
    }

    /// NLoS part only: rows are i.i.d. `CN(0, J)`.
    pub fn sample_nlos<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<Complex64> {
        let m = self.model.num_bs_antennas;
        let n = self.model.grid.num_ports();
        let half = std::f64::consts::FRAC_1_SQRT_2;
        let white = DMatrix::from_fn(m, n, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * half, im * half)
        });
        crate::linalg::cmul_real(&white, &self.color_t)
    }

    pub fn sample<R: Rng + ?Sized>(&self, geom: &UserGeometry, user_id: usize, rng: &mut R) -> ChannelMatrix {
        let l = self.model.rice_factor;
        let nlos = self.sample_nlos(rng);
        let entries = if l == 0.0 {
            nlos
        } else {
            let los = los_matrix(&self.model, geom);
            let a = (l / (1.0 + l)).sqrt();
            let b = (1.0 / (1.0 + l)).sqrt();
            los * Complex64::new(a, 0.0) + nlos * Complex64::new(b, 0.0)
        };
        ChannelMatrix::new(entries, user_id)
    }
}

/// One-shot channel draw. Prefer [`CorrelatedRician`] when sampling repeatedly.
pub fn sample_channel<R: Rng + ?Sized>(
    model: &ChannelModel,
    geom: &UserGeometry,
    user_id: usize,
    rng: &mut R,
) -> Result<ChannelMatrix> {
    Ok(CorrelatedRician::new(*model)?.sample(geom, user_id, rng))
}

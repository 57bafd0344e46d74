//! Per-RIS channel generation (Rayleigh and clustered mmWave) and the cascaded
//! channel structures used by estimation and design.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian, complex_gaussian_vec, CMat, CVec, C64};

/// Source→RIS (`f`) and RIS→destination (`h`) channels, one vector of `N`
/// coefficients per RIS.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub f: Vec<CVec>,
    pub h: Vec<CVec>,
}

impl ChannelSet {
    pub fn new(f: Vec<CVec>, h: Vec<CVec>) -> Result<Self> {
        if f.is_empty() {
            return Err(Error::InvalidConfig("at least one RIS is required".into()));
        }
        if f.len() != h.len() {
            return Err(Error::Dimension { expected: f.len(), actual: h.len() });
        }
        let n = f[0].len();
        if n == 0 {
            return Err(Error::InvalidConfig("RIS must have at least one element".into()));
        }
        for v in f.iter().chain(h.iter()) {
            if v.len() != n {
                return Err(Error::Dimension { expected: n, actual: v.len() });
            }
        }
        Ok(ChannelSet { f, h })
    }

    pub fn num_ris(&self) -> usize {
        self.f.len()
    }

    pub fn elements(&self) -> usize {
        self.f[0].len()
    }

    /// i.i.d. `CN(0, 1)` entries for every link.
    pub fn rayleigh<R: Rng + ?Sized>(num_ris: usize, elements: usize, rng: &mut R) -> Result<Self> {
        check_dims(num_ris, elements)?;
        let mut f = Vec::with_capacity(num_ris);
        let mut h = Vec::with_capacity(num_ris);
        for _ in 0..num_ris {
            f.push(complex_gaussian_vec(rng, elements, 1.0));
            h.push(complex_gaussian_vec(rng, elements, 1.0));
        }
        Ok(ChannelSet { f, h })
    }

    /// Clustered mmWave channels: `h_k` is an `N_p`-path sum of array
    /// responses, `f_k` a rank-one line-of-sight response.
    pub fn mmwave<R: Rng + ?Sized>(num_ris: usize, params: &MmWaveParams, rng: &mut R) -> Result<Self> {
        params.validate()?;
        let n = params.geometry.elements();
        check_dims(num_ris, n)?;
        let np = params.paths_per_ris;
        let scale = (n as f64 / np as f64).sqrt();
        let mut f = Vec::with_capacity(num_ris);
        let mut h = Vec::with_capacity(num_ris);
        for k in 0..num_ris {
            // h_k^H = sqrt(N/N_p) Σ λ α^H, hence h_k = sqrt(N/N_p) Σ conj(λ) α.
            let mut hk = CVec::zeros(n);
            for p in 0..np {
                let gain = complex_gaussian(rng, 1.0);
                let (az, el) = match &params.departure_angles {
                    Some(angles) => angles[k][p],
                    None => draw_angles(rng),
                };
                hk += array_response(az, el, &params.geometry) * gain.conj();
            }
            h.push(hk * C64::new(scale, 0.0));

            let gain = complex_gaussian(rng, 1.0);
            let (az, el) = match &params.arrival_angles {
                Some(angles) => angles[k],
                None => draw_angles(rng),
            };
            f.push(array_response(az, el, &params.geometry) * (gain * (n as f64).sqrt()));
        }
        Ok(ChannelSet { f, h })
    }

    pub fn cascade(&self) -> CascadedChannel {
        let n = self.elements();
        let h_eq = CVec::from_fn(self.num_ris() * n, |i, _| {
            let (k, l) = (i / n, i % n);
            self.h[k][l].conj() * self.f[k][l]
        });
        CascadedChannel { h_eq, elements: n }
    }

    /// `H_e = blk[h_1^H diag(f_1), …, h_K^H diag(f_K)]`, a `K × NK` matrix.
    pub fn he_matrix(&self) -> CMat {
        self.cascade().he_matrix()
    }
}

fn check_dims(num_ris: usize, elements: usize) -> Result<()> {
    if num_ris == 0 {
        return Err(Error::InvalidConfig("at least one RIS is required".into()));
    }
    if elements == 0 {
        return Err(Error::InvalidConfig("RIS must have at least one element".into()));
    }
    Ok(())
}

fn draw_angles<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    (rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..PI))
}

/// Seeded Rayleigh draw.
pub fn gen_rayleigh(num_ris: usize, elements: usize, seed: u64) -> Result<ChannelSet> {
    ChannelSet::rayleigh(num_ris, elements, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Seeded mmWave draw.
pub fn gen_mmwave(num_ris: usize, params: &MmWaveParams, seed: u64) -> Result<ChannelSet> {
    ChannelSet::mmwave(num_ris, params, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Cascaded channel `h_eq`, with entry `(k-1)N + l` equal to
/// `conj(h_k[l]) f_k[l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadedChannel {
    pub h_eq: CVec,
    pub elements: usize,
}

impl CascadedChannel {
    pub fn num_ris(&self) -> usize {
        self.h_eq.len() / self.elements
    }

    /// Segment of `h_eq` belonging to RIS `k`.
    pub fn segment(&self, k: usize) -> CVec {
        self.h_eq.rows(k * self.elements, self.elements).into_owned()
    }

    /// Block-diagonal `H_e`: row `k` holds segment `k` in its own columns.
    pub fn he_matrix(&self) -> CMat {
        he_from_heq(&self.h_eq, self.num_ris())
    }
}

/// `H_e` built from a stacked cascaded-channel vector.
pub fn he_from_heq(h_eq: &CVec, num_ris: usize) -> CMat {
    let n = h_eq.len() / num_ris;
    let mut he = CMat::zeros(num_ris, h_eq.len());
    for k in 0..num_ris {
        for l in 0..n {
            he[(k, k * n + l)] = h_eq[k * n + l];
        }
    }
    he
}

/// Uniform rectangular array geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UraGeometry {
    pub nx: usize,
    pub ny: usize,
    /// Wavenumber-spacing product `kd`; `π` for half-wavelength spacing.
    pub kd: f64,
}

impl UraGeometry {
    pub fn half_wavelength(nx: usize, ny: usize) -> Self {
        UraGeometry { nx, ny, kd: PI }
    }

    pub fn elements(&self) -> usize {
        self.nx * self.ny
    }
}

/// Unit-norm URA response. Element `(m, n)` sits at index `m * N_y + n`.
pub fn array_response(azimuth: f64, elevation: f64, geom: &UraGeometry) -> CVec {
    let n = geom.elements();
    let norm = 1.0 / (n as f64).sqrt();
    let ux = azimuth.sin() * elevation.sin();
    let uy = elevation.cos();
    CVec::from_fn(n, |i, _| {
        let (m, q) = (i / geom.ny, i % geom.ny);
        C64::from_polar(norm, geom.kd * (m as f64 * ux + q as f64 * uy))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmWaveParams {
    pub paths_per_ris: usize,
    pub geometry: UraGeometry,
    /// Per-RIS, per-path `(azimuth, elevation)` for the RIS→destination paths;
    /// drawn uniformly when absent.
    pub departure_angles: Option<Vec<Vec<(f64, f64)>>>,
    /// Per-RIS `(azimuth, elevation)` of the line-of-sight source link.
    pub arrival_angles: Option<Vec<(f64, f64)>>,
}

impl MmWaveParams {
    pub fn new(paths_per_ris: usize, geometry: UraGeometry) -> Self {
        MmWaveParams {
            paths_per_ris,
            geometry,
            departure_angles: None,
            arrival_angles: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.paths_per_ris == 0 {
            return Err(Error::InvalidConfig("mmWave model needs at least one path".into()));
        }
        if let Some(angles) = &self.departure_angles {
            if angles.iter().any(|a| a.len() != self.paths_per_ris) {
                return Err(Error::InvalidConfig("one departure angle pair per path".into()));
            }
        }
        Ok(())
    }
}

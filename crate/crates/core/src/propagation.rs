//! Free-space near-field propagation from the DMA elements to a point, and
//! the in-waveguide propagation along each microstrip.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scenario::SystemGeometry;

/// Element radiation profile `2 (b + 1) cos^b(theta)` on `[0, pi/2]`, zero
/// elsewhere. `theta` is measured from the aperture normal.
pub fn radiation_profile(theta: f64, boresight_gain: f64) -> f64 {
    if (0.0..=FRAC_PI_2).contains(&theta) {
        profile_from_cos(theta.cos(), boresight_gain)
    } else {
        0.0
    }
}

fn profile_from_cos(cos_theta: f64, boresight_gain: f64) -> f64 {
    if cos_theta <= 0.0 {
        return 0.0;
    }
    2.0 * (boresight_gain + 1.0) * cos_theta.powf(boresight_gain)
}

/// Channel from every element to one point, flat microstrip-major order.
///
/// Entry `n` holds `A_n e^{+jk d_n}`, so that the received signal is
/// `a^H r = sum_n A_n e^{-jk d_n} r_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector {
    pub position: [f64; 3],
    pub entries: Vec<Complex64>,
}

impl ChannelVector {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Channel gain `||a||^2`.
    pub fn gain(&self) -> f64 {
        crate::linalg::norm_sqr(&self.entries)
    }

    /// Writes `index,real,imag` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,real,imag")?;
        for (n, v) in self.entries.iter().enumerate() {
            writeln!(out, "{n},{},{}", v.re, v.im)?;
        }
        Ok(())
    }
}

pub fn channel_vector(geometry: &SystemGeometry, point: [f64; 3]) -> Result<ChannelVector> {
    if !point.iter().all(|c| c.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "channel point must be finite, got {point:?}"
        )));
    }
    let lambda = geometry.wavelength;
    let k = geometry.wavenumber;
    let b = geometry.boresight_gain;
    let mut entries = Vec::with_capacity(geometry.element_count());
    for element in geometry.positions() {
        let dx = point[0] - element[0];
        let dy = point[1] - element[1];
        let dz = point[2] - element[2];
        let d = (dx * dx + dy * dy + dz * dz).sqrt();
        if d == 0.0 {
            return Err(Error::SingularPoint {
                x: point[0],
                y: point[1],
                z: point[2],
            });
        }
        let gain = profile_from_cos(dz / d, b);
        if gain == 0.0 {
            entries.push(Complex64::new(0.0, 0.0));
            continue;
        }
        let amplitude = gain.sqrt() * lambda / (4.0 * PI * d);
        entries.push(Complex64::from_polar(amplitude, k * d));
    }
    Ok(ChannelVector {
        position: point,
        entries,
    })
}

/// `a(p)^H r` together with the channel gain `||a(p)||^2`, computed without
/// materialising `a(p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointResponse {
    pub amplitude: Complex64,
    pub gain: f64,
}

pub fn response_at(
    geometry: &SystemGeometry,
    radiated: &[Complex64],
    point: [f64; 3],
) -> Result<PointResponse> {
    assert_eq!(radiated.len(), geometry.element_count());
    let scale = geometry.wavelength / (4.0 * PI);
    let k = geometry.wavenumber;
    let b = geometry.boresight_gain;
    let mut amplitude = Complex64::new(0.0, 0.0);
    let mut gain = 0.0;
    for (element, r) in geometry.positions().iter().zip(radiated) {
        let dx = point[0] - element[0];
        let dy = point[1] - element[1];
        let dz = point[2] - element[2];
        let d = (dx * dx + dy * dy + dz * dz).sqrt();
        if d == 0.0 {
            return Err(Error::SingularPoint {
                x: point[0],
                y: point[1],
                z: point[2],
            });
        }
        let profile = profile_from_cos(dz / d, b);
        if profile == 0.0 {
            continue;
        }
        let a = profile.sqrt() * scale / d;
        gain += a * a;
        amplitude += Complex64::from_polar(a, -k * d) * r;
    }
    Ok(PointResponse { amplitude, gain })
}

/// Diagonal in-waveguide propagation `h_{i,l} = exp(-rho_l (alpha_c + j beta_c))`
/// with `rho_l = l * spacing` measured from the microstrip feed at element 0.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveguideMatrix {
    diagonal: Vec<Complex64>,
}

impl WaveguideMatrix {
    pub fn diagonal(&self) -> &[Complex64] {
        &self.diagonal
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.diagonal.len());
        self.diagonal.iter().zip(x).map(|(h, v)| h * v).collect()
    }

    pub fn apply_adjoint(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.diagonal.len());
        self.diagonal.iter().zip(x).map(|(h, v)| h.conj() * v).collect()
    }

    /// Dense entry; off-diagonal entries are zero.
    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        if row == col {
            self.diagonal[row]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }
}

pub fn waveguide_matrix(geometry: &SystemGeometry) -> WaveguideMatrix {
    let propagation = Complex64::new(geometry.waveguide_attenuation, geometry.waveguide_phase);
    let per_strip: Vec<Complex64> = (0..geometry.elements_per_microstrip)
        .map(|l| (-propagation * (l as f64 * geometry.spacing)).exp())
        .collect();
    let diagonal = (0..geometry.microstrips)
        .flat_map(|_| per_strip.iter().copied())
        .collect();
    WaveguideMatrix { diagonal }
}

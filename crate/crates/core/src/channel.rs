//! Ray lists to MIMO channels: steering vectors, per-path gains, receive
//! combining and thermal noise.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64;

use crate::geometry::{trace_paths, Face, PathKind, Position3D, PropagationPath};
use crate::scenario::{ArrayGeometry, CanyonScenario, RfConstants};

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// In-plane unit axes `(horizontal, vertical)` of an array with the given
/// face normal.
fn array_axes(normal: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let n = normal.normalize();
    let horiz = Vector3::z().cross(&n);
    let horiz = if horiz.norm() < 1e-12 {
        Vector3::x()
    } else {
        horiz.normalize()
    };
    let vert = n.cross(&horiz);
    (horiz, vert)
}

/// Planar-array response toward `direction`. Element `(m, n)` (row `m`
/// along the vertical axis, column `n` along the horizontal one) sits at
/// index `m * cols + n` with phase `2 pi s (m v + n u)`.
pub fn steering_vector(array: &ArrayGeometry, direction: &Vector3<f64>) -> CVector {
    let (e_h, e_v) = array_axes(&array.orientation);
    let u = direction.dot(&e_h);
    let v = direction.dot(&e_v);
    let k = 2.0 * PI * array.spacing;
    DVector::from_fn(array.num_elements(), |i, _| {
        let m = (i / array.cols) as f64;
        let n = (i % array.cols) as f64;
        Complex64::from_polar(1.0, k * (m * v + n * u))
    })
}

/// Whether `direction` lies in front of the array face. Base-station
/// faces only radiate into their front half-space; the handset array has
/// no such baffle and hears both sides.
pub fn in_front(array: &ArrayGeometry, direction: &Vector3<f64>) -> bool {
    direction.dot(&array.orientation) > 0.0
}

/// Complex amplitude of one ray: free-space spreading, oxygen absorption,
/// reflection loss and carrier phase.
pub fn path_gain(path: &PropagationPath, rf: &RfConstants) -> Complex64 {
    let l = path.total_length;
    let spreading = rf.wavelength / (4.0 * PI * l);
    let absorption = 10f64.powf(-rf.oxygen_absorption_db_per_km * (l / 1000.0) / 20.0);
    let reflection = 10f64.powf(-rf.reflection_loss_db * path.num_reflections as f64 / 20.0);
    let phase = -2.0 * PI * l / rf.wavelength;
    Complex64::from_polar(spreading * absorption * reflection, phase)
}

/// `H = sum_p g_p a_rx(arrival_p) a_tx(departure_p)^H`, `M x N`.
/// Rays leaving behind the transmit face contribute nothing.
pub fn channel_matrix(
    paths: &[PropagationPath],
    tx_array: &ArrayGeometry,
    rx_array: &ArrayGeometry,
    rf: &RfConstants,
) -> CMatrix {
    let mut h = CMatrix::zeros(rx_array.num_elements(), tx_array.num_elements());
    for p in paths {
        if !in_front(tx_array, &p.departure_dir) {
            continue;
        }
        let g = path_gain(p, rf);
        let a_rx = steering_vector(rx_array, &p.arrival_dir) * g;
        let a_tx = steering_vector(tx_array, &p.departure_dir);
        h += a_rx * a_tx.adjoint();
    }
    h
}

/// Unit-norm combiner matched to the serving ray's arrival direction.
pub fn rx_combiner(rx_array: &ArrayGeometry, serving_path: &PropagationPath) -> CVector {
    let m = rx_array.num_elements() as f64;
    steering_vector(rx_array, &serving_path.arrival_dir) / Complex64::new(m.sqrt(), 0.0)
}

/// Effective transmit-side channel `h` with `h^H = w_rx^H H`, where
/// `w_rx = a_rx(LoS arrival) / sqrt(M)`. The same combiner applies to
/// every incident signal at this user.
pub fn receive_beamform(h: &CMatrix, rx_array: &ArrayGeometry, serving_path: &PropagationPath) -> CVector {
    let w = rx_combiner(rx_array, serving_path);
    h.adjoint() * w
}

/// Thermal noise over one reuse band, watts.
pub fn noise_power(rf: &RfConstants, reuse: usize) -> f64 {
    let band = rf.bandwidth_hz / reuse as f64;
    10f64.powf((rf.noise_psd_dbm_hz + rf.noise_figure_db) / 10.0) * band * 1e-3
}

/// Receive-side state for one served user.
#[derive(Debug, Clone)]
pub struct UserChannel {
    pub position: Position3D,
    /// Receive array turned to face the serving base station.
    pub rx_array: ArrayGeometry,
    pub rx_combiner: CVector,
    pub serving_path: PropagationPath,
    /// Effective channel after receive combining, length `N`.
    pub effective: CVector,
    /// Full `M x N` channel, kept for diagnostics.
    pub matrix: CMatrix,
    pub noise_power: f64,
}

/// Channels from one face to its users for a single drop.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub users: Vec<UserChannel>,
}

impl ChannelSet {
    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn effective(&self) -> Vec<CVector> {
        self.users.iter().map(|u| u.effective.clone()).collect()
    }

    pub fn noise(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.noise_power).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> (Vec<CVector>, Vec<f64>) {
        indices
            .iter()
            .map(|&i| (self.users[i].effective.clone(), self.users[i].noise_power))
            .unzip()
    }
}

/// Transmit array of a base-station face.
pub fn face_array(scenario: &CanyonScenario, face: &Face) -> ArrayGeometry {
    scenario.tx_array.oriented(face.facing.normal())
}

/// Builds the LoS-served channel from `face` to each user, turning each
/// user's receive array toward the face.
pub fn build_channel_set(scenario: &CanyonScenario, face: &Face, users: &[Position3D]) -> ChannelSet {
    let tx = face_array(scenario, face);
    let sigma2 = noise_power(&scenario.rf, scenario.reuse);
    let users = users
        .iter()
        .map(|u| {
            let paths = trace_paths(&face.position, u, scenario);
            let serving = paths
                .iter()
                .find(|p| p.kind == PathKind::LoS)
                .cloned()
                .expect("trace_paths always yields a LoS ray");
            let rx = scenario.rx_array.oriented(serving.arrival_dir);
            let matrix = channel_matrix(&paths, &tx, &rx, &scenario.rf);
            let combiner = rx_combiner(&rx, &serving);
            let effective = matrix.adjoint() * &combiner;
            UserChannel {
                position: *u,
                rx_array: rx,
                rx_combiner: combiner,
                serving_path: serving,
                effective,
                matrix,
                noise_power: sigma2,
            }
        })
        .collect();
    ChannelSet { users }
}

/// Scalar response `w^H H omega` for a ray bundle, without forming `H`.
/// Returns the LoS and reflected parts separately.
pub fn link_response(
    paths: &[PropagationPath],
    tx_array: &ArrayGeometry,
    rx_array: &ArrayGeometry,
    combiner: &CVector,
    beamformer: &CVector,
    rf: &RfConstants,
) -> (Complex64, Complex64) {
    let mut los = Complex64::new(0.0, 0.0);
    let mut nlos = Complex64::new(0.0, 0.0);
    for p in paths {
        if !in_front(tx_array, &p.departure_dir) {
            continue;
        }
        let g = path_gain(p, rf);
        let rx_part = combiner.dotc(&steering_vector(rx_array, &p.arrival_dir));
        let tx_part = steering_vector(tx_array, &p.departure_dir).dotc(beamformer);
        let v = g * rx_part * tx_part;
        if p.kind == PathKind::LoS {
            los += v;
        } else {
            nlos += v;
        }
    }
    (los, nlos)
}

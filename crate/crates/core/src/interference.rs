//! Inter-cell interference at users of the target picocell and the
//! sidelobe ratio `alpha_c`.
//!
//! Base-station indices here are relative to `BS_0`, the west base station
//! of the centre picocell; the target users are served by its East face.
//! A face transmits in band `global_index mod F`.

use rand::Rng;

use crate::channel::{build_channel_set, face_array, link_response, rx_combiner, CVector, UserChannel};
use crate::error::{Error, Result};
use crate::geometry::{
    center_cell, drop_face_users, num_base_stations, num_cells, place_base_stations, sample_user, trace_paths, Face,
    Facing, PathKind, Position3D,
};
use crate::phy::{solve_maxmin_sinr, MaxMinOptions};
use crate::scenario::CanyonScenario;

/// The interferers around a user of `BS_0`'s East face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InterferenceSource {
    /// East faces of `BS_-2`.
    FarWest,
    /// East faces of `BS_-1`.
    NearWest,
    /// The other subarrays of `BS_0` East.
    IntraCell,
    /// West faces of `BS_1`.
    NearEast,
    /// West faces of `BS_2`.
    FarEast,
}

impl InterferenceSource {
    pub const INTERCELL: [InterferenceSource; 4] = [
        InterferenceSource::FarWest,
        InterferenceSource::NearWest,
        InterferenceSource::NearEast,
        InterferenceSource::FarEast,
    ];

    /// Base-station offset from `BS_0` and the facing of the interfering face.
    pub fn offset(self) -> (i64, Facing) {
        match self {
            InterferenceSource::FarWest => (-2, Facing::East),
            InterferenceSource::NearWest => (-1, Facing::East),
            InterferenceSource::IntraCell => (0, Facing::East),
            InterferenceSource::NearEast => (1, Facing::West),
            InterferenceSource::FarEast => (2, Facing::West),
        }
    }
}

/// Frequency band a face transmits in.
pub fn face_band(face: &Face, reuse: usize) -> usize {
    face.bs_index % reuse.max(1)
}

/// Global index of `BS_0`.
pub fn reference_bs(scenario: &CanyonScenario) -> usize {
    center_cell(scenario)
}

/// Face at `offset` base stations from `BS_0`.
pub fn relative_face(scenario: &CanyonScenario, offset: i64, facing: Facing) -> Result<Face> {
    let idx = reference_bs(scenario) as i64 + offset;
    if idx < 0 || idx >= num_base_stations(scenario) as i64 {
        return Err(Error::StreetTooShort(format!(
            "base station at offset {offset} lies beyond the {} m street",
            scenario.street_length
        )));
    }
    Ok(place_base_stations(scenario)[idx as usize].face(facing))
}

/// Serving face of the target users (`BS_0` East).
pub fn serving_face(scenario: &CanyonScenario) -> Face {
    relative_face(scenario, 0, Facing::East).expect("BS_0 always exists")
}

/// What one interfering face is transmitting during a drop.
#[derive(Debug, Clone)]
pub struct InterfererAssignment {
    pub source: InterferenceSource,
    pub face: Face,
    pub users: Vec<Position3D>,
    /// Empty when the face is out of band and never transmits on our band.
    pub beamformers: Vec<CVector>,
}

/// Draws `K` users for each of the four inter-cell faces and computes their
/// max-min beamformers toward those users. Users are drawn for every face
/// so the random stream does not depend on `F`; beams are only solved for
/// faces sharing the serving band.
pub fn draw_interferers<R: Rng + ?Sized>(
    scenario: &CanyonScenario,
    opts: &MaxMinOptions,
    rng: &mut R,
) -> Result<Vec<InterfererAssignment>> {
    let serving_band = face_band(&serving_face(scenario), scenario.reuse);
    let k = scenario.subarrays_per_face;
    let g_max = scenario.tx_array.num_elements() as f64;
    let mut out = Vec::with_capacity(4);
    for source in InterferenceSource::INTERCELL {
        let (offset, facing) = source.offset();
        let face = relative_face(scenario, offset, facing)?;
        let users = drop_face_users(scenario, &face, k, rng)?;
        let beamformers = if face_band(&face, scenario.reuse) == serving_band {
            let set = build_channel_set(scenario, &face, &users);
            solve_maxmin_sinr(&set.effective(), &set.noise(), &scenario.rf, g_max, opts)?.beamformers
        } else {
            Vec::new()
        };
        out.push(InterfererAssignment {
            source,
            face,
            users,
            beamformers,
        });
    }
    Ok(out)
}

/// Received interference power from one source, watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceContribution {
    pub source: InterferenceSource,
    /// Coherent sum over LoS and reflected rays, per beam.
    pub total: f64,
    /// LoS rays alone.
    pub los: f64,
    /// Reflected rays alone.
    pub nlos: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceBreakdown {
    pub sources: Vec<SourceContribution>,
    pub total: f64,
}

impl InterferenceBreakdown {
    pub fn source(&self, source: InterferenceSource) -> Option<&SourceContribution> {
        self.sources.iter().find(|c| c.source == source)
    }
}

/// Power `face` delivers to `user` through `beams`, after the user's
/// receive combiner. Returns `(total, los, nlos)`.
pub fn face_power_at(
    scenario: &CanyonScenario,
    face: &Face,
    beams: &[CVector],
    user: &UserChannel,
) -> (f64, f64, f64) {
    if beams.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let tx = face_array(scenario, face);
    let paths = trace_paths(&face.position, &user.position, scenario);
    let mut acc = (0.0, 0.0, 0.0);
    for w in beams {
        let (los, nlos) = link_response(&paths, &tx, &user.rx_array, &user.rx_combiner, w, &scenario.rf);
        acc.0 += (los + nlos).norm_sqr();
        acc.1 += los.norm_sqr();
        acc.2 += nlos.norm_sqr();
    }
    acc
}

/// Inter-cell interference at `user` (served by `serving`) from the given
/// assignments. Faces outside the serving band contribute exactly zero.
pub fn intercell_interference(
    user: &UserChannel,
    serving: &Face,
    scenario: &CanyonScenario,
    assignments: &[InterfererAssignment],
) -> InterferenceBreakdown {
    let band = face_band(serving, scenario.reuse);
    let sources: Vec<SourceContribution> = assignments
        .iter()
        .map(|a| {
            let (total, los, nlos) = if face_band(&a.face, scenario.reuse) == band {
                face_power_at(scenario, &a.face, &a.beamformers, user)
            } else {
                (0.0, 0.0, 0.0)
            };
            SourceContribution {
                source: a.source,
                total,
                los,
                nlos,
            }
        })
        .collect();
    let total = sources.iter().map(|c| c.total).sum();
    InterferenceBreakdown { sources, total }
}

/// LoS and reflected parts of the interference that the other beams of the
/// serving face put on user `k`, watts.
pub fn intracell_split(
    scenario: &CanyonScenario,
    face: &Face,
    users: &[UserChannel],
    beams: &[CVector],
    k: usize,
) -> (f64, f64) {
    let others: Vec<CVector> = beams
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != k)
        .map(|(_, b)| b.clone())
        .collect();
    let (_, los, nlos) = face_power_at(scenario, face, &others, &users[k]);
    (los, nlos)
}

/// Beam steered along the LoS departure toward `user`, at per-subarray
/// power `EIRP / N`.
pub fn los_matched_beam(scenario: &CanyonScenario, face: &Face, user: &Position3D) -> CVector {
    let tx = face_array(scenario, face);
    let paths = trace_paths(&face.position, user, scenario);
    let los = paths
        .iter()
        .find(|p| p.kind == PathKind::LoS)
        .expect("trace_paths always yields a LoS ray");
    let a = crate::channel::steering_vector(&tx, &los.departure_dir);
    let n = tx.num_elements() as f64;
    let amplitude = (scenario.rf.eirp_watts() / n).sqrt() / n.sqrt();
    a * num_complex::Complex64::new(amplitude, 0.0)
}

/// Smallest desired power inside a picocell: full EIRP, receive gain `M`,
/// free-space and oxygen loss over the longest in-cell link.
pub fn worst_case_desired_power(scenario: &CanyonScenario) -> f64 {
    let rf = &scenario.rf;
    let l = scenario.max_link_length();
    let m = scenario.rx_array.num_elements() as f64;
    let spreading = rf.wavelength / (4.0 * std::f64::consts::PI * l);
    let absorption = 10f64.powf(-rf.oxygen_absorption_db_per_km * (l / 1000.0) / 10.0);
    rf.eirp_watts() * m * spreading * spreading * absorption
}

/// `alpha_1 .. alpha_{c_max}` from the same Monte Carlo draws.
///
/// Each trial places a user uniformly in the target picocell (its receive
/// array facing `BS_0`) and lets every in-band face on the street serve
/// `K` random users of its own cell with LoS-steered beams. Base stations
/// beyond the street ends are ignored.
pub fn alpha_curve<R: Rng + ?Sized>(
    scenario: &CanyonScenario,
    c_max: usize,
    num_trials: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    scenario.validate()?;
    if c_max == 0 || num_trials == 0 {
        return Err(Error::InvalidScenario("c_max and trial count must be at least 1".into()));
    }
    let b0 = reference_bs(scenario);
    let nbs = num_base_stations(scenario);
    if b0 < c_max + 1 || b0 + c_max + 1 >= nbs {
        return Err(Error::StreetTooShort(format!(
            "alpha_{c_max} needs base stations out to offset {}; a {} m street with d = {} m has {} on each side",
            c_max + 1,
            scenario.street_length,
            scenario.cell_width,
            b0.min(nbs - 1 - b0)
        )));
    }
    let bss = place_base_stations(scenario);
    let serving = serving_face(scenario);
    let band = face_band(&serving, scenario.reuse);
    let cells = num_cells(scenario);
    let target_cell = center_cell(scenario);
    let k = scenario.subarrays_per_face;

    // Interferers of each offset |n| >= 1, summed per offset.
    let mut per_offset = vec![0.0; nbs];
    for _ in 0..num_trials {
        let pos = sample_user(scenario, target_cell, rng);
        let user = target_user(scenario, &serving, pos);
        for bs in &bss {
            for face in bs.faces() {
                if face.served_cell(cells).is_none() {
                    continue;
                }
                let users = drop_face_users(scenario, &face, k, rng)?;
                let offset = (bs.index as i64 - b0 as i64).unsigned_abs() as usize;
                if offset == 0 || face_band(&face, scenario.reuse) != band {
                    continue;
                }
                let beams: Vec<CVector> = users.iter().map(|u| los_matched_beam(scenario, &face, u)).collect();
                per_offset[offset] += face_power_at(scenario, &face, &beams, &user).0;
            }
        }
    }
    let p = worst_case_desired_power(scenario);
    let trials = num_trials as f64;
    Ok((1..=c_max)
        .map(|c| per_offset[c..].iter().sum::<f64>() / trials / p)
        .collect())
}

/// Monte Carlo estimate of `alpha_c`.
pub fn estimate_alpha_c<R: Rng + ?Sized>(
    scenario: &CanyonScenario,
    c: usize,
    num_trials: usize,
    rng: &mut R,
) -> Result<f64> {
    if c == 0 {
        return Err(Error::InvalidScenario("c must be at least 1".into()));
    }
    Ok(alpha_curve(scenario, c, num_trials, rng)?[c - 1])
}

/// Receive-side state for a target user without building its full channel.
pub fn target_user(scenario: &CanyonScenario, serving: &Face, pos: Position3D) -> UserChannel {
    let paths = trace_paths(&serving.position, &pos, scenario);
    let serving_path = paths
        .into_iter()
        .find(|p| p.kind == PathKind::LoS)
        .expect("trace_paths always yields a LoS ray");
    let rx = scenario.rx_array.oriented(serving_path.arrival_dir);
    let combiner = rx_combiner(&rx, &serving_path);
    UserChannel {
        position: pos,
        rx_array: rx,
        rx_combiner: combiner,
        serving_path,
        effective: CVector::zeros(0),
        matrix: crate::channel::CMatrix::zeros(0, 0),
        noise_power: crate::channel::noise_power(&scenario.rf, scenario.reuse),
    }
}

//! Geometric line-of-sight channel synthesis for a cabin scene.
//!
//! Every link is a free-space far-field path `λ/(4πd)·e^{-j2πd/λ}` shaped by
//! the transmit and receive array responses. Direct BS→UE links lose
//! `blockage_loss_per_row_db` (plus `human_body_loss_db` when the rows are
//! occupied) for every seat row strictly between the BS row and the UE row,
//! except the nearest one. Links attenuated beyond `attenuation_floor_db` are
//! exactly zero.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::steering::unit;
use super::{apply_ris_area_scaling, steering_vector, ArrayFrame, ChannelError, ChannelSet};
use crate::scene::{validate, CabinScene, Point3, RadioConfig};
use crate::C64;

/// Where the RIS element area factor is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RisScaling {
    /// On both the BS→RIS and the RIS→UE link.
    PerLink,
    /// Once per BS→RIS→UE path (on the BS→RIS link only).
    Composite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthModel {
    pub blockage_loss_per_row_db: f64,
    pub human_body_loss_db: f64,
    /// Whether each blocking row also carries seated passengers.
    pub passengers_block: bool,
    pub attenuation_floor_db: f64,
    /// Extra diffuse paths per direct link.
    pub nlos_ray_count: usize,
    /// Loss of a diffuse path relative to a free-space path of the same length.
    pub nlos_extra_loss_db: f64,
    pub ris_scaling: RisScaling,
    pub seed: u64,
}

impl Default for SynthModel {
    fn default() -> Self {
        Self {
            blockage_loss_per_row_db: 15.0,
            human_body_loss_db: 30.0,
            passengers_block: true,
            attenuation_floor_db: 180.0,
            nlos_ray_count: 0,
            nlos_extra_loss_db: 20.0,
            ris_scaling: RisScaling::PerLink,
            seed: 0,
        }
    }
}

impl SynthModel {
    /// Number of seat rows that attenuate a direct path between two rows.
    pub fn blocking_rows(bs_row: i64, ue_row: i64) -> usize {
        let between = (bs_row - ue_row).unsigned_abs().saturating_sub(1) as usize;
        between.saturating_sub(1)
    }

    pub fn loss_per_blocking_row_db(&self) -> f64 {
        if self.passengers_block {
            self.blockage_loss_per_row_db + self.human_body_loss_db
        } else {
            self.blockage_loss_per_row_db
        }
    }

    fn validate(&self) -> Result<(), ChannelError> {
        let losses = [
            self.blockage_loss_per_row_db,
            self.human_body_loss_db,
            self.nlos_extra_loss_db,
        ];
        if losses.iter().any(|l| !(*l >= 0.0)) || self.attenuation_floor_db.is_nan() {
            return Err(ChannelError::InvalidScene("synthetic model losses must be nonnegative".into()));
        }
        Ok(())
    }
}

fn distance(a: Point3, b: Point3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Complex gain of a path of length `d` with `extra_loss_db` on top of
/// free-space loss, or zero when the total exceeds `floor_db`.
fn path_gain(d: f64, wavelength: f64, extra_loss_db: f64, floor_db: f64) -> C64 {
    let amplitude = wavelength / (4.0 * std::f64::consts::PI * d);
    let total_db = -20.0 * amplitude.log10() + extra_loss_db;
    if total_db > floor_db {
        return C64::new(0.0, 0.0);
    }
    let phase = -2.0 * std::f64::consts::PI * d / wavelength;
    C64::from_polar(amplitude * 10f64.powf(-extra_loss_db / 20.0), phase)
}

fn random_unit(rng: &mut ChaCha8Rng) -> Point3 {
    let z: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
    let r = (1.0 - z * z).sqrt();
    [r * phi.cos(), r * phi.sin(), z]
}

pub fn synth_channel_set(
    scene: &CabinScene,
    radio: &RadioConfig,
    model: &SynthModel,
) -> Result<ChannelSet, ChannelError> {
    let report = validate(scene, radio);
    if !report.is_empty() {
        let msg: Vec<String> = report.iter().map(ToString::to_string).collect();
        return Err(ChannelError::InvalidScene(msg.join("; ")));
    }
    model.validate()?;

    let wavelength = radio.wavelength();
    let floor = model.attenuation_floor_db;
    let bs = scene.bs_position;
    let bs_frame = ArrayFrame::downward();
    let bs_side = (radio.bs_antennas_per_side, radio.bs_antennas_per_side);
    let bs_response = |toward_array: Point3| {
        steering_vector(bs_side, radio.bs_spacing, wavelength, bs_frame.local(toward_array))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);

    let bs_row = scene.bs_row();
    let mut direct = Vec::with_capacity(scene.num_ues());
    for (k, &ue) in scene.ue_positions.iter().enumerate() {
        let blocking = SynthModel::blocking_rows(bs_row, scene.ue_row(k));
        let loss = blocking as f64 * model.loss_per_blocking_row_db();
        let d = distance(bs, ue);
        let mut h = bs_response(unit(sub(bs, ue)))? * path_gain(d, wavelength, loss, floor);
        for _ in 0..model.nlos_ray_count {
            let departure = random_unit(&mut rng);
            let stretch: f64 = rng.gen_range(1.1..2.0);
            let phase: f64 = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
            let gain = path_gain(d * stretch, wavelength, loss + model.nlos_extra_loss_db, floor)
                * C64::from_polar(1.0, phase);
            let toward_array = [-departure[0], -departure[1], -departure[2]];
            h = h + bs_response(toward_array)? * gain;
        }
        direct.push(h);
    }

    let mut bs_ris = Vec::with_capacity(scene.num_candidates());
    let mut ris_ue = Vec::with_capacity(scene.num_candidates());
    for cand in &scene.ris_candidates {
        let frame = ArrayFrame::vertical(cand.normal);
        let side = (cand.elements_per_side, cand.elements_per_side);
        let ris_response = |toward_array: Point3| {
            steering_vector(side, cand.element_spacing, wavelength, frame.local(toward_array))
        };

        let d = distance(bs, cand.center);
        let a_bs = bs_response(unit(sub(bs, cand.center)))?;
        let a_ris = ris_response(unit(sub(cand.center, bs)))?;
        let gain = path_gain(d, wavelength, 0.0, floor);
        let g: Array2<C64> = Array2::from_shape_fn((a_ris.len(), a_bs.len()), |(m, n)| gain * a_ris[m] * a_bs[n]);
        bs_ris.push(apply_ris_area_scaling(&g));

        let mut per_ue = Vec::with_capacity(scene.num_ues());
        for &ue in &scene.ue_positions {
            let d = distance(cand.center, ue);
            let v: Array1<C64> = ris_response(unit(sub(cand.center, ue)))? * path_gain(d, wavelength, 0.0, floor);
            per_ue.push(match model.ris_scaling {
                RisScaling::PerLink => apply_ris_area_scaling(&v),
                RisScaling::Composite => v,
            });
        }
        ris_ue.push(per_ue);
    }

    ChannelSet::new(direct, bs_ris, ris_ue)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::RIS_AREA_POWER_FACTOR;
    use crate::scene::{build_cabin_section, build_default_cabin, CabinBuilder};

    fn small_scene() -> CabinScene {
        CabinBuilder {
            rows: 7,
            seats_per_row: 2,
            populated_rows: 0..7,
            ..CabinBuilder::default()
        }
        .build(8)
        .unwrap()
    }

    fn small_radio() -> RadioConfig {
        RadioConfig {
            bs_antennas_per_side: 2,
            ..RadioConfig::default()
        }
    }

    #[test]
    fn blocking_row_count() {
        assert_eq!(SynthModel::blocking_rows(5, 5), 0);
        assert_eq!(SynthModel::blocking_rows(5, 4), 0);
        assert_eq!(SynthModel::blocking_rows(5, 3), 0);
        assert_eq!(SynthModel::blocking_rows(5, 2), 1);
        assert_eq!(SynthModel::blocking_rows(5, 10), 3);
        assert_eq!(SynthModel::blocking_rows(5, 0), 3);
    }

    #[test]
    fn same_row_ue_unattenuated() {
        let scene = small_scene();
        let radio = small_radio();
        let set = synth_channel_set(&scene, &radio, &SynthModel::default()).unwrap();
        let bs_row = scene.bs_row();
        let k = (0..scene.num_ues()).find(|&k| scene.ue_row(k) == bs_row).unwrap();
        let d = distance(scene.bs_position, scene.ue_positions[k]);
        let free_space = radio.wavelength() / (4.0 * std::f64::consts::PI * d);
        for c in set.direct(k).iter() {
            assert!((c.norm() - free_space).abs() < 1e-15);
        }
    }

    #[test]
    fn deterministic_for_a_seed() {
        let scene = small_scene();
        let model = SynthModel {
            nlos_ray_count: 3,
            seed: 9,
            ..SynthModel::default()
        };
        let a = synth_channel_set(&scene, &small_radio(), &model).unwrap();
        let b = synth_channel_set(&scene, &small_radio(), &model).unwrap();
        assert_eq!(a, b);
        let other = synth_channel_set(&scene, &small_radio(), &SynthModel { seed: 10, ..model }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn doubling_distance_costs_six_db() {
        let mut scene = small_scene();
        let radio = small_radio();
        let bs = scene.bs_position;
        // two UEs straight below the BS at distances 0.5 and 1.0 m
        scene.ue_positions = vec![[bs[0], 0.3, bs[2] - 0.4], [bs[0], 0.6, bs[2] - 0.8]];
        let set = synth_channel_set(&scene, &radio, &SynthModel::default()).unwrap();
        let p_near = set.direct(0)[0].norm_sqr();
        let p_far = set.direct(1)[0].norm_sqr();
        let drop_db = 10.0 * (p_near / p_far).log10();
        assert!((drop_db - 20.0 * 2f64.log10()).abs() < 1e-6);
        assert!((drop_db - 6.02).abs() < 1e-2);
    }

    #[test]
    fn direct_power_non_increasing_with_row_distance() {
        let scene = build_default_cabin(8).unwrap();
        let radio = RadioConfig::default();
        let set = synth_channel_set(&scene, &radio, &SynthModel::default()).unwrap();
        let bs_row = scene.bs_row();
        // seat 0 (window) of every row on one side of the BS
        let mut last = f64::INFINITY;
        for row in (0..=bs_row as usize).rev() {
            let k = row * scene.seats_per_row;
            let p = set.direct(k).iter().map(|c| c.norm_sqr()).sum::<f64>();
            assert!(p <= last);
            last = p;
        }
        // the far rows are fully blocked
        assert_eq!(last, 0.0);
    }

    #[test]
    fn outage_rows_in_section() {
        let scene = build_cabin_section(8, 6, 4).unwrap();
        let set = synth_channel_set(&scene, &RadioConfig::default(), &SynthModel::default()).unwrap();
        let powers: Vec<f64> = (0..scene.num_ues())
            .map(|k| set.direct(k).iter().map(|c| c.norm_sqr()).sum())
            .collect();
        assert!(powers.iter().all(|p| p.is_finite()));
        assert!(powers[0] > 1e3 * powers[23]);
    }

    #[test]
    fn composite_scaling_applies_factor_once() {
        let scene = small_scene();
        let radio = small_radio();
        let per_link = synth_channel_set(&scene, &radio, &SynthModel::default()).unwrap();
        let composite = synth_channel_set(
            &scene,
            &radio,
            &SynthModel {
                ris_scaling: RisScaling::Composite,
                ..SynthModel::default()
            },
        )
        .unwrap();
        let a = per_link.cascaded(0, 0);
        let b = composite.cascaded(0, 0);
        for (x, y) in a.iter().zip(b.iter()) {
            let ratio = x.norm_sqr() / y.norm_sqr();
            assert!((ratio - RIS_AREA_POWER_FACTOR).abs() < 1e-12);
        }
    }
}

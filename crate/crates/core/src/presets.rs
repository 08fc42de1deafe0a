//! Built-in traffic profiles and the reference smart-factory scenario.

use crate::channel::ChannelVariation;
use crate::model::{ArrivalSpec, QfiProfile, Scenario, StartOffsetPolicy, DEFAULT_BUFFER_CAPACITY};
use crate::scalar::Scalar;

/// Named `(alpha, beta, gamma)` triple.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightConfig<T> {
    pub name: String,
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
}

impl<T: Scalar> WeightConfig<T> {
    pub fn new(name: &str, alpha: T, beta: T, gamma: T) -> Self {
        Self {
            name: name.to_string(),
            alpha,
            beta,
            gamma,
        }
    }
}

pub const DELAY_TUNED: &str = "delay-tuned";
pub const BALANCED: &str = "balanced";
pub const FAIRNESS_TUNED: &str = "fairness-tuned";

pub fn weight_configs<T: Scalar>() -> Vec<WeightConfig<T>> {
    vec![
        WeightConfig::new(
            DELAY_TUNED,
            T::ratio(7, 10),
            T::ratio(2, 10),
            T::ratio(1, 10),
        ),
        WeightConfig::new(BALANCED, T::ratio(4, 10), T::ratio(3, 10), T::ratio(3, 10)),
        WeightConfig::new(
            FAIRNESS_TUNED,
            T::ratio(2, 10),
            T::ratio(2, 10),
            T::ratio(6, 10),
        ),
    ]
}

fn balanced<T: Scalar>() -> (T, T, T) {
    (T::ratio(4, 10), T::ratio(3, 10), T::ratio(3, 10))
}

/// Time-critical actuation loop: 64 B every 1 ms, 5 ms bound.
pub fn control_profile_as<T: Scalar>() -> QfiProfile<T> {
    let (alpha, beta, gamma) = balanced();
    QfiProfile {
        role: "control".into(),
        qfi: 1,
        five_qi: 85,
        packet_size: 64,
        arrival: ArrivalSpec::Periodic {
            period: T::ratio(1, 1000),
        },
        delay_bound: Some(T::ratio(5, 1000)),
        gbr: None,
        priority_level: 1,
        priority_weight: None,
        alpha,
        beta,
        gamma,
        rate_cap: None,
    }
}

/// Telemetry: 128 B every 10 ms, 50 ms bound, 100 kbit/s GBR.
pub fn sensor_profile_as<T: Scalar>() -> QfiProfile<T> {
    let (alpha, beta, gamma) = balanced();
    QfiProfile {
        role: "sensor".into(),
        qfi: 2,
        five_qi: 6,
        packet_size: 128,
        arrival: ArrivalSpec::Periodic {
            period: T::ratio(10, 1000),
        },
        delay_bound: Some(T::ratio(50, 1000)),
        gbr: Some(T::from_count(100_000)),
        priority_level: 2,
        priority_weight: None,
        alpha,
        beta,
        gamma,
        rate_cap: None,
    }
}

/// Camera stream: 30 frames/s of 1000 B packets, 50 ms bound, non-GBR.
pub fn video_profile_as<T: Scalar>(burst_min: u32, burst_max: u32) -> QfiProfile<T> {
    let (alpha, beta, gamma) = balanced();
    QfiProfile {
        role: "video".into(),
        qfi: 3,
        five_qi: 9,
        packet_size: 1000,
        arrival: ArrivalSpec::Video {
            frame_interval: T::ratio(1, 30),
            burst_min,
            burst_max,
        },
        delay_bound: Some(T::ratio(50, 1000)),
        gbr: None,
        priority_level: 4,
        priority_weight: None,
        alpha,
        beta,
        gamma,
        rate_cap: None,
    }
}

/// Default burst range of the video model, packets per frame.
pub const VIDEO_BURST_DEFAULT: (u32, u32) = (5, 40);
/// Burst range used by the reference high-load scenario.
pub const VIDEO_BURST_REFERENCE: (u32, u32) = (5, 25);

/// 6 UEs x {control, sensor, video}, 20 Mbit/s over 25 PRBs, 10 s, static
/// per-UE channel spread over [0.6, 1.0].
pub fn reference_scenario_as<T: Scalar>() -> Scenario<T> {
    Scenario {
        num_ues: 6,
        flows_per_ue: vec![
            control_profile_as(),
            sensor_profile_as(),
            video_profile_as(VIDEO_BURST_REFERENCE.0, VIDEO_BURST_REFERENCE.1),
        ],
        sim_duration: T::from_count(10),
        tti_duration: T::ratio(1, 1000),
        cell_capacity: T::from_count(20_000_000),
        num_prbs: 25,
        seed: 1,
        start_offsets: StartOffsetPolicy::Random,
        buffer_capacity: DEFAULT_BUFFER_CAPACITY,
        channel: ChannelVariation::StaticPerUe { lo: 0.6, hi: 1.0 },
        gbr_window: T::ratio(1, 10),
    }
}

pub fn reference_scenario() -> Scenario<f64> {
    reference_scenario_as()
}

pub fn control_profile() -> QfiProfile<f64> {
    control_profile_as()
}

pub fn sensor_profile() -> QfiProfile<f64> {
    sensor_profile_as()
}

pub fn video_profile() -> QfiProfile<f64> {
    video_profile_as(VIDEO_BURST_DEFAULT.0, VIDEO_BURST_DEFAULT.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_video_load_oversubscribes_cell() {
        let per_flow = video_profile().offered_load();
        assert!((per_flow - 5.4e6).abs() < 1.0);
        assert!(6.0 * per_flow > 20e6);
        let reference = reference_scenario().flows_per_ue[2].offered_load();
        assert!(6.0 * reference > 20e6);
    }

    #[test]
    fn default_weight_configs() {
        let w = weight_configs::<f64>();
        let triples: Vec<_> = w.iter().map(|c| (c.alpha, c.beta, c.gamma)).collect();
        assert_eq!(
            triples,
            vec![(0.7, 0.2, 0.1), (0.4, 0.3, 0.3), (0.2, 0.2, 0.6)]
        );
    }
}

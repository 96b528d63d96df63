use super::{ChannelParams, GridPoint};

pub const CALIBRATION_BITRATES: [f64; 5] = [1.0, 11.0, 24.0, 48.0, 54.0];
pub const CALIBRATION_DISTANCES: [f64; 7] = [1.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.2];

// Per-bit error rate. Rows follow CALIBRATION_BITRATES, columns
// CALIBRATION_DISTANCES. Fitted so a 1 KB streamer datagram (1059 bytes on the
// air) is damaged about 33% of the time at 54 Mbps / 12.2 m and well under 1%
// at 1 Mbps / 1 m.
const BER: [[f64; 7]; 5] = [
    [2.36e-7, 3.55e-7, 4.73e-7, 5.92e-7, 7.10e-7, 9.48e-7, 1.19e-6],
    [4.73e-7, 7.10e-7, 9.48e-7, 1.43e-6, 1.90e-6, 2.39e-6, 2.99e-6],
    [1.19e-6, 1.78e-6, 2.99e-6, 4.82e-6, 7.30e-6, 9.84e-6, 1.24e-5],
    [2.39e-6, 3.60e-6, 7.30e-6, 1.24e-5, 1.92e-5, 2.63e-5, 3.55e-5],
    [2.99e-6, 4.82e-6, 9.84e-6, 1.64e-5, 2.49e-5, 3.40e-5, 4.73e-5],
];

// Per-frame probability that nothing arrives at all.
const P_LOSS: [[f64; 7]; 5] = [
    [0.000, 0.000, 0.001, 0.001, 0.002, 0.003, 0.004],
    [0.000, 0.001, 0.002, 0.003, 0.004, 0.005, 0.007],
    [0.001, 0.002, 0.003, 0.005, 0.008, 0.012, 0.016],
    [0.002, 0.003, 0.005, 0.008, 0.012, 0.018, 0.025],
    [0.002, 0.004, 0.006, 0.010, 0.015, 0.022, 0.030],
];

fn table(values: &[[f64; 7]; 5]) -> Vec<GridPoint> {
    CALIBRATION_BITRATES
        .iter()
        .zip(values)
        .flat_map(|(&b, row)| {
            CALIBRATION_DISTANCES
                .iter()
                .zip(row)
                .map(move |(&d, &v)| GridPoint::new(b, d, v))
        })
        .collect()
}

/// Built-in channel calibration over 802.11b/g bitrates and indoor distances.
pub fn default_calibration() -> ChannelParams {
    ChannelParams::new(&table(&BER), &table(&P_LOSS), 0).expect("built-in table is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ber_lookup;

    #[test]
    fn monotone_in_distance_and_bitrate() {
        let p = default_calibration();
        for b in CALIBRATION_BITRATES {
            for w in CALIBRATION_DISTANCES.windows(2) {
                assert!(ber_lookup(&p, b, w[0]) <= ber_lookup(&p, b, w[1]));
                assert!(p.loss_lookup(b, w[0]) <= p.loss_lookup(b, w[1]));
            }
        }
        for d in CALIBRATION_DISTANCES {
            for w in CALIBRATION_BITRATES.windows(2) {
                assert!(ber_lookup(&p, w[0], d) <= ber_lookup(&p, w[1], d));
                assert!(p.loss_lookup(w[0], d) <= p.loss_lookup(w[1], d));
            }
        }
    }

    #[test]
    fn frozen_table_matches_fixture() {
        let text = include_str!("../../fixtures/default_channel.txt");
        let parsed = crate::channel::parse_channel_config(text, 0).unwrap();
        assert_eq!(parsed, default_calibration());
    }
}

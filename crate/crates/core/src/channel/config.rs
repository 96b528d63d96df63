//! Plain-text channel tables: one `bitrate distance ber p_loss` record per
//! line, `#` starts a comment.

use std::fmt::Write as _;
use std::path::Path;

use super::{ChannelError, ChannelParams, GridPoint};

pub fn parse_channel_config(text: &str, seed: u64) -> Result<ChannelParams, ChannelError> {
    let mut ber = Vec::new();
    let mut loss = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(ChannelError::Parse {
                line: i + 1,
                msg: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let mut nums = [0.0; 4];
        for (slot, f) in nums.iter_mut().zip(&fields) {
            *slot = f.parse().map_err(|_| ChannelError::Parse {
                line: i + 1,
                msg: format!("not a number: {f}"),
            })?;
        }
        let [bitrate, distance, b, l] = nums;
        ber.push(GridPoint::new(bitrate, distance, b));
        loss.push(GridPoint::new(bitrate, distance, l));
    }
    ChannelParams::new(&ber, &loss, seed)
}

pub fn load_channel_file(path: &Path, seed: u64) -> Result<ChannelParams, ChannelError> {
    let text = std::fs::read_to_string(path).map_err(|e| ChannelError::Io(format!("{}: {e}", path.display())))?;
    parse_channel_config(&text, seed)
}

pub fn write_channel_config(params: &ChannelParams) -> String {
    let mut out = String::from("# bitrate_mbps distance_m ber p_loss\n");
    // rows follow the ber grid; loss is sampled at the same points
    for b in params.ber_table() {
        let p_loss = params.loss_lookup(b.bitrate, b.distance);
        let _ = writeln!(out, "{} {} {:e} {}", b.bitrate, b.distance, b.value, p_loss);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blank_lines() {
        let text = "# header\n\n54 2 0.0002 0.01  # near\n54 12.2 0.002 0.05\n";
        let p = parse_channel_config(text, 3).unwrap();
        assert_eq!(p.seed, 3);
        let c = p.conditions(54.0, 12.2);
        assert_eq!((c.ber, c.p_loss), (0.002, 0.05));
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_channel_config("54 2 0.1 0\n54 x 0.1 0\n", 0).unwrap_err();
        assert!(matches!(err, ChannelError::Parse { line: 2, .. }));
        assert!(matches!(parse_channel_config("1 2 3\n", 0), Err(ChannelError::Parse { line: 1, .. })));
        assert_eq!(parse_channel_config("# nothing\n", 0), Err(ChannelError::EmptyTable));
    }

    #[test]
    fn written_table_parses_back() {
        let p = crate::channel::default_calibration();
        assert_eq!(parse_channel_config(&write_channel_config(&p), 0).unwrap(), p);
    }
}

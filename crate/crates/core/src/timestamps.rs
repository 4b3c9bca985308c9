//! Detector event records.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::PS;

/// Detection times of one channel on a 1 ps grid, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimestampStream {
    pub channel: String,
    pub times_ps: Vec<u64>,
}

impl TimestampStream {
    pub fn new(channel: impl Into<String>, times_ps: Vec<u64>) -> Result<Self> {
        if times_ps.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("times_ps", "timestamps must be sorted ascending"));
        }
        Ok(TimestampStream {
            channel: channel.into(),
            times_ps,
        })
    }

    pub fn empty(channel: impl Into<String>) -> Self {
        TimestampStream {
            channel: channel.into(),
            times_ps: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.times_ps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_ps.is_empty()
    }

    pub fn times_s(&self) -> impl Iterator<Item = f64> + '_ {
        self.times_ps.iter().map(|&t| t as f64 * PS)
    }
}

/// Writes `channel,time_ps` rows, one channel after another.
pub fn write_csv<W: Write>(mut out: W, streams: &[&TimestampStream]) -> Result<()> {
    writeln!(out, "channel,time_ps")?;
    for s in streams {
        if s.channel.contains(',') || s.channel.contains('\n') {
            return Err(Error::invalid("channel", "channel names cannot contain ',' or newlines"));
        }
        for t in &s.times_ps {
            writeln!(out, "{},{}", s.channel, t)?;
        }
    }
    Ok(())
}

/// Reads a `channel,time_ps` file. Channels come back in order of first
/// appearance; rows of each channel must already be ascending.
pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<TimestampStream>> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?;
    match header.as_deref().map(str::trim) {
        Some("channel,time_ps") => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "expected header channel,time_ps".into(),
            })
        }
    }
    let mut streams: Vec<TimestampStream> = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let lineno = idx + 2;
        if line.trim().is_empty() {
            continue;
        }
        let Some((channel, time)) = line.split_once(',') else {
            return Err(Error::Parse { line: lineno, message: "expected 2 columns".into() });
        };
        let t: u64 = time.trim().parse().map_err(|e| Error::Parse {
            line: lineno,
            message: format!("time {time:?}: {e}"),
        })?;
        let stream = match streams.iter_mut().position(|s| s.channel == channel) {
            Some(i) => &mut streams[i],
            None => {
                streams.push(TimestampStream::empty(channel));
                streams.last_mut().unwrap()
            }
        };
        if stream.times_ps.last().is_some_and(|&last| t < last) {
            return Err(Error::Parse {
                line: lineno,
                message: format!("channel {channel} is not sorted"),
            });
        }
        stream.times_ps.push(t);
    }
    Ok(streams)
}

//! Per-step episode traces as comma-separated text.
//!
//! Column order: `t`, `q1..q6`, `qd1..qd6`, `a_m1..a_m6`, `a_b1..a_b3`,
//! `tau1..tau3`, `e_pos`, `e_ori`, `e_att`, `r_m`, `r_b`, `obs_delayed`,
//! `act_delayed`, `wheel_clipped`, `impulse`. `q`/`qd` describe the state after
//! the step, `a_*` the executed (post-delay, pre-clip) actions and `tau` the
//! base torque actually applied. Flags are 0/1.

use std::io::{Read, Write};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FaultFlags {
    pub obs_delayed: bool,
    pub act_delayed: bool,
    pub wheel_clipped: bool,
    pub impulse: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepRecord {
    pub t: u32,
    pub q: [f64; 6],
    pub qdot: [f64; 6],
    pub action_arm: [f64; 6],
    pub action_base: [f64; 3],
    pub tau_applied: [f64; 3],
    pub e_pos: f64,
    pub e_ori: f64,
    pub e_att: f64,
    pub r_m: f64,
    pub r_b: f64,
    pub flags: FaultFlags,
}

pub fn trace_header() -> Vec<String> {
    let mut h = vec!["t".to_string()];
    let series = |h: &mut Vec<String>, prefix: &str, n: usize| {
        h.extend((1..=n).map(|i| format!("{prefix}{i}")));
    };
    series(&mut h, "q", 6);
    series(&mut h, "qd", 6);
    series(&mut h, "a_m", 6);
    series(&mut h, "a_b", 3);
    series(&mut h, "tau", 3);
    for c in ["e_pos", "e_ori", "e_att", "r_m", "r_b", "obs_delayed", "act_delayed", "wheel_clipped", "impulse"] {
        h.push(c.to_string());
    }
    h
}

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

pub fn write_trace<W: Write>(out: W, records: &[StepRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace_header())?;
    for r in records {
        let mut row = vec![r.t.to_string()];
        for v in r.q.iter().chain(&r.qdot).chain(&r.action_arm).chain(&r.action_base).chain(&r.tau_applied) {
            row.push(v.to_string());
        }
        for v in [r.e_pos, r.e_ori, r.e_att, r.r_m, r.r_b] {
            row.push(v.to_string());
        }
        let f = r.flags;
        row.extend([flag(f.obs_delayed), flag(f.act_delayed), flag(f.wheel_clipped), flag(f.impulse)]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum TraceReadError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("unexpected header")]
    Header,
    #[error("bad value `{0}`")]
    Value(String),
}

pub fn read_trace<R: Read>(input: R) -> Result<Vec<StepRecord>, TraceReadError> {
    let mut rdr = csv::Reader::from_reader(input);
    if rdr.headers()?.iter().ne(trace_header().iter().map(String::as_str)) {
        return Err(TraceReadError::Header);
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let num = |i: usize| -> Result<f64, TraceReadError> {
            row[i].parse().map_err(|_| TraceReadError::Value(row[i].to_string()))
        };
        let fill = |dst: &mut [f64], start: usize| -> Result<(), TraceReadError> {
            for (k, d) in dst.iter_mut().enumerate() {
                *d = num(start + k)?;
            }
            Ok(())
        };
        let mut r = StepRecord {
            t: row[0].parse().map_err(|_| TraceReadError::Value(row[0].to_string()))?,
            ..Default::default()
        };
        fill(&mut r.q, 1)?;
        fill(&mut r.qdot, 7)?;
        fill(&mut r.action_arm, 13)?;
        fill(&mut r.action_base, 19)?;
        fill(&mut r.tau_applied, 22)?;
        r.e_pos = num(25)?;
        r.e_ori = num(26)?;
        r.e_att = num(27)?;
        r.r_m = num(28)?;
        r.r_b = num(29)?;
        r.flags = FaultFlags {
            obs_delayed: &row[30] == "1",
            act_delayed: &row[31] == "1",
            wheel_clipped: &row[32] == "1",
            impulse: &row[33] == "1",
        };
        out.push(r);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_has_documented_width() {
        assert_eq!(trace_header().len(), 34);
    }

    #[test]
    fn written_trace_reads_back() {
        let rec = StepRecord {
            t: 3,
            q: [0.1, -1.0 / 3.0, 0.0, 1e-17, 2.0, -2.0],
            e_pos: 0.123456789012345,
            r_b: -0.75,
            flags: FaultFlags {
                act_delayed: true,
                ..Default::default()
            },
            ..Default::default()
        };
        let mut buf = Vec::new();
        write_trace(&mut buf, &[rec, rec]).unwrap();
        let back = read_trace(buf.as_slice()).unwrap();
        assert_eq!(back, vec![rec, rec]);
    }
}

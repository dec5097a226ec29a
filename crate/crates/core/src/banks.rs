//! Offline choice of how many scratchpad banks each task may lock.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::task::SystemParams;
use crate::{div_ceil, Cycles, Error, Result};

/// Default tolerance over the best execution time when picking a bank count.
pub const DEFAULT_EPS: f64 = 0.01;

/// Measured execution time of one workload with a given number of banks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub banks: u32,
    pub exec_cycles: Cycles,
}

/// Banks needed to hold `footprint_bytes`, at least one and at most the whole scratchpad.
/// CPU-only tasks get none.
pub fn min_banks_static(footprint_bytes: u64, uses_accelerator: bool, sys: &SystemParams) -> u32 {
    if !uses_accelerator {
        return 0;
    }
    div_ceil(footprint_bytes, sys.bank_size).clamp(1, sys.total_banks as u64) as u32
}

/// Smallest bank count whose execution time is within `eps` of the best in the profile.
pub fn min_banks_profiled(profile: &[ProfilePoint], eps: f64) -> Result<u32> {
    let best = profile.iter().map(|p| p.exec_cycles).min().ok_or(Error::EmptyProfile)?;
    if !(eps >= 0.0) {
        return Err(Error::InvalidParam(format!("threshold {eps} must be non-negative")));
    }
    for w in profile.windows(2) {
        if w[1].banks <= w[0].banks {
            return Err(Error::InvalidParam("profile must be sorted by strictly increasing banks".into()));
        }
        if w[1].exec_cycles > w[0].exec_cycles {
            return Err(Error::InvalidParam(format!(
                "execution time grows from {} to {} banks",
                w[0].banks, w[1].banks
            )));
        }
    }
    let limit = (1.0 + eps) * best as f64;
    Ok(profile
        .iter()
        .find(|p| p.exec_cycles as f64 <= limit)
        .expect("the best point always qualifies")
        .banks)
}

/// Reads a `banks,exec_cycles` CSV with a header row.
pub fn read_profile<R: Read>(reader: R) -> Result<Vec<ProfilePoint>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        out.push(rec?);
    }
    out.sort_by_key(|p: &ProfilePoint| p.banks);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(banks: u32, exec_cycles: Cycles) -> ProfilePoint {
        ProfilePoint { banks, exec_cycles }
    }

    #[test]
    fn static_rule() {
        let sys = SystemParams::default();
        assert_eq!(min_banks_static(64 * 1024, true, &sys), 2);
        assert_eq!(min_banks_static(300 * 1024, true, &sys), 8);
        assert_eq!(min_banks_static(1, true, &sys), 1);
        assert_eq!(min_banks_static(0, true, &sys), 1);
        assert_eq!(min_banks_static(1 << 20, false, &sys), 0);
    }

    #[test]
    fn profiled_rule() {
        let prof = [p(1, 2_000_000), p(2, 1_100_000), p(3, 1_000_000), p(4, 1_000_000)];
        assert_eq!(min_banks_profiled(&prof, 0.01).unwrap(), 3);
        assert_eq!(min_banks_profiled(&prof, 0.15).unwrap(), 2);
        assert_eq!(min_banks_profiled(&[p(1, 5), p(2, 5)], 0.0).unwrap(), 1);
        assert!(matches!(min_banks_profiled(&[], 0.01), Err(Error::EmptyProfile)));
        assert!(min_banks_profiled(&[p(1, 5), p(2, 6)], 0.01).is_err());
    }

    #[test]
    fn csv_profile() {
        let text = "banks,exec_cycles\n2,1100000\n1,2000000\n3,1000000\n";
        let prof = read_profile(text.as_bytes()).unwrap();
        assert_eq!(prof[0], p(1, 2_000_000));
        assert_eq!(min_banks_profiled(&prof, 0.01).unwrap(), 3);
    }
}

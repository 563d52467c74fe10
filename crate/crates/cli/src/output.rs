//! Number formatting, CSV emission and atomic file writes.

use std::io::{self, Write};
use std::path::Path;

use trm_core::{BalanceTrajectory, PaymentStream};

/// Formats `v` with 17 significant digits. Fixed notation for magnitudes in
/// `[1e-5, 1e17)`, scientific otherwise.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "NaN".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..17).contains(&exp) {
        let s = format!("{:.*}", (16 - exp) as usize, v);
        // Rounding can carry into a new leading digit (9.99… -> 10.0…).
        let digits = s
            .chars()
            .filter(char::is_ascii_digit)
            .skip_while(|&c| c == '0')
            .count();
        if digits > 17 && exp < 16 {
            return format!("{:.*}", (15 - exp) as usize, v);
        }
        s
    } else {
        format!("{v:.16e}")
    }
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

/// `t,balance,branch`, one row per event.
pub fn trajectory_csv(tr: &BalanceTrajectory) -> Vec<u8> {
    let mut w = csv_writer(Vec::new());
    w.write_record(["t", "balance", "branch"])
        .expect("in-memory write");
    for e in &tr.events {
        w.write_record([
            fmt_num(e.t),
            fmt_num(e.balance),
            e.branch.as_str().to_string(),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// `t,value` samples of the stream's distribution function.
pub fn stream_samples_csv(f: &PaymentStream, times: &[f64]) -> Vec<u8> {
    let mut w = csv_writer(Vec::new());
    w.write_record(["t", "value"]).expect("in-memory write");
    for &t in times {
        w.write_record([fmt_num(t), fmt_num(f.value_at(t))])
            .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failed run never leaves a partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use trm_core::StepStream;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_num(0.1), "0.10000000000000001");
        assert_eq!(fmt_num(-100.0), "-100.00000000000000");
        assert_eq!(fmt_num(1.5e-9), "1.5000000000000000e-9");
        assert_eq!(fmt_num(0.0), "0");
        for v in [
            0.1,
            1.0 / 3.0,
            -2.5e-7,
            123456.789,
            9.999999999999999,
            1e300,
            f64::MIN_POSITIVE,
        ] {
            assert_eq!(fmt_num(v).parse::<f64>().unwrap(), v, "{v}");
        }
    }

    #[test]
    fn samples_csv() {
        let f = PaymentStream::Step(StepStream::from_pairs(&[(0.0, -1.0), (1.0, 3.0)]).unwrap());
        let out = String::from_utf8(stream_samples_csv(&f, &[-1.0, 0.5, 1.0])).unwrap();
        assert_eq!(out, "t,value\n-1.0000000000000000,0\n0.50000000000000000,-1.0000000000000000\n1.0000000000000000,2.0000000000000000\n");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        write_atomic(&p, b"a\n").unwrap();
        write_atomic(&p, b"b\n").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"b\n");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}

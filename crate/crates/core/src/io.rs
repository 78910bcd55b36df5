//! Number formatting and small CSV helpers shared by the writers.

use std::io::Write;

/// Shortest round-tripping form, capped at 17 significant digits.
pub fn fmt17(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{v}");
    if s.len() <= 24 {
        s
    } else {
        format!("{v:.16e}")
    }
}

/// Writes a state as `x,u` rows.
pub fn write_state_csv(state: &crate::solver::SimState, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "x,u")?;
    for (j, u) in state.u.iter().enumerate() {
        writeln!(w, "{},{}", fmt17(state.grid.node(j)), fmt17(*u))?;
    }
    Ok(())
}

/// Reads `x,u` rows back into nodes and values.
pub fn read_state_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>), String> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut xs = Vec::new();
    let mut us = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let parse = |i: usize| -> Result<f64, String> {
            rec.get(i).ok_or("short row")?.trim().parse::<f64>().map_err(|e| e.to_string())
        };
        xs.push(parse(0)?);
        us.push(parse(1)?);
    }
    Ok((xs, us))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, 0.0, 1e-17] {
            assert_eq!(fmt17(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt17(f64::INFINITY), "inf");
        assert!("inf".parse::<f64>().unwrap().is_infinite());
    }
}

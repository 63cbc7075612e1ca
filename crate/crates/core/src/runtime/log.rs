use std::io::Write;

use super::AdaptationRecord;

fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

/// Adaptation log as CSV, one `<param>_before`/`<param>_after` pair per parameter.
pub fn write_log_csv<W: Write>(records: &[AdaptationRecord], params: &[String], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["cycle_time".to_string(), "kind".into(), "event".into(), "status".into()];
    for p in params {
        header.push(format!("{p}_before"));
        header.push(format!("{p}_after"));
    }
    header.extend(["delta".to_string(), "robustness_of_min_req".into(), "solve_ms".into()]);
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            fmt(r.time),
            serde_json::to_value(r.kind).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default(),
            r.event.clone(),
            serde_json::to_value(r.status).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default(),
        ];
        for p in params {
            row.push(r.before.get(p).map_or(String::new(), fmt));
            row.push(r.after.get(p).map_or(String::new(), fmt));
        }
        row.push(fmt(r.delta));
        row.push(fmt(r.robustness_min));
        // NaN blanks the timing column
        row.push(if r.solve_ms.is_nan() { String::new() } else { format!("{:.3}", r.solve_ms) });
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

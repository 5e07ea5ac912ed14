//! JSON and CSV artifacts. Floats use the shortest round-trip form, so
//! reruns are byte-identical.

use crate::CliError;
use frontlab::fbsolver::Trajectory;
use frontlab::semiwave::SemiWaveProfile;
use serde::Serialize;
use std::path::Path;

fn io(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(format!("serialising: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    std::fs::write(path, to_json(value)?).map_err(|e| io(path, e))
}

fn write_rows(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io(path, e))?;
    w.write_record(header).map_err(|e| io(path, e))?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| io(path, e))?;
    }
    w.flush().map_err(|e| io(path, e))
}

/// Columns `x, phi_1..phi_m`.
pub fn write_profile_csv(path: &Path, profile: &SemiWaveProfile) -> Result<(), CliError> {
    let mut header = vec!["x".to_string()];
    header.extend((1..=profile.values.len()).map(|i| format!("phi_{i}")));
    let rows = (0..profile.nodes()).map(|j| {
        let mut r = vec![profile.x(j)];
        r.extend(profile.values.iter().map(|v| v[j]));
        r
    });
    write_rows(path, &header, rows)
}

/// `trajectory.csv` with columns `t, g, h, g_dot, h_dot, center_1..` and
/// one `snapshot_<k>.csv` per snapshot with columns `x, u_1..`.
pub fn write_trajectory(dir: &Path, traj: &Trajectory) -> Result<(), CliError> {
    let m = traj.center.first().map_or(0, |c| c.len());
    let mut header: Vec<String> = ["t", "g", "h", "g_dot", "h_dot"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=m).map(|i| format!("center_{i}")));
    let rows = (0..traj.len()).map(|k| {
        let mut r = vec![traj.times[k], traj.g[k], traj.h[k], traj.g_dot[k], traj.h_dot[k]];
        r.extend_from_slice(&traj.center[k]);
        r
    });
    write_rows(&dir.join("trajectory.csv"), &header, rows)?;
    for (k, snap) in traj.snapshots.iter().enumerate() {
        let mut header = vec!["x".to_string()];
        header.extend((1..=snap.values.len()).map(|i| format!("u_{i}")));
        let rows = (0..snap.x.len()).map(|j| {
            let mut r = vec![snap.x[j]];
            r.extend(snap.values.iter().map(|v| v[j]));
            r
        });
        write_rows(&dir.join(format!("snapshot_{k}.csv")), &header, rows)?;
    }
    Ok(())
}

/// Reads the `t` and `h` columns of a trajectory CSV.
pub fn read_trajectory(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io(path, e))?;
    let headers = r.headers().map_err(|e| io(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Validation(format!("{}: missing column {name:?}", path.display())))
    };
    let (ti, hi) = (col("t")?, col("h")?);
    let mut t = Vec::new();
    let mut h = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| io(path, e))?;
        let parse = |i: usize| {
            rec.get(i).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| {
                CliError::Validation(format!("{}: row {} has a malformed number", path.display(), line + 2))
            })
        };
        t.push(parse(ti)?);
        h.push(parse(hi)?);
    }
    Ok((t, h))
}

//! Line-oriented JSON files for trajectories and preferences.
//!
//! A trajectory file starts with `{"dim":..,"gamma_default":..}` and then holds
//! one `{"id","metadata","steps"}` object per line. A preference file starts
//! with `{"trajectories":"<path relative to this file>"}` and then holds one
//! `{"left","right","label"}` object per line. Blank lines are ignored.
//! Writing is canonical, so parse then write reproduces the input bytes.

use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::{PreferenceDataset, PreferenceRecord, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryHeader {
    pub dim: usize,
    pub gamma_default: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferenceHeader {
    pub trajectories: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub dataset: PreferenceDataset,
    pub gamma_default: f64,
}

fn parse_line<T: DeserializeOwned>(line: &str, number: usize) -> Result<T> {
    serde_json::from_str(line).map_err(|e| Error::Parse {
        line: number,
        message: e.to_string(),
    })
}

fn lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)).map_err(Error::from))
        .filter(|r| !matches!(r, Ok((_, l)) if l.trim().is_empty()))
}

fn header<T: DeserializeOwned>(
    it: &mut impl Iterator<Item = Result<(usize, String)>>,
    what: &str,
) -> Result<T> {
    let (n, line) = it.next().ok_or_else(|| Error::Parse {
        line: 1,
        message: format!("missing {what} header"),
    })??;
    parse_line(&line, n)
}

pub fn read_trajectories<R: BufRead>(reader: R) -> Result<(TrajectoryHeader, Vec<Trajectory>)> {
    let mut it = lines(reader);
    let head: TrajectoryHeader = header(&mut it, "trajectory")?;
    if head.dim == 0 {
        return Err(Error::Parse { line: 1, message: "dim must be >= 1".into() });
    }
    if !(0.0..=1.0).contains(&head.gamma_default) {
        return Err(Error::Parse { line: 1, message: "gamma_default must lie in [0, 1]".into() });
    }
    let mut out = Vec::new();
    for item in it {
        let (n, line) = item?;
        let traj: Trajectory = parse_line(&line, n)?;
        if traj.dim() != head.dim {
            return Err(Error::Parse {
                line: n,
                message: format!("trajectory `{}` has dimension {}, header says {}", traj.id(), traj.dim(), head.dim),
            });
        }
        out.push(traj);
    }
    Ok((head, out))
}

pub fn read_preferences<R: BufRead>(reader: R) -> Result<(PreferenceHeader, Vec<PreferenceRecord>)> {
    let mut it = lines(reader);
    let head: PreferenceHeader = header(&mut it, "preference")?;
    let mut out = Vec::new();
    for item in it {
        let (n, line) = item?;
        out.push(parse_line(&line, n)?);
    }
    Ok((head, out))
}

fn json_line<T: Serialize>(out: &mut String, value: &T) {
    out.push_str(&serde_json::to_string(value).expect("plain data serializes"));
    out.push('\n');
}

pub fn trajectories_to_string<'a>(
    header: TrajectoryHeader,
    trajectories: impl IntoIterator<Item = &'a Trajectory>,
) -> String {
    let mut out = String::new();
    json_line(&mut out, &header);
    for t in trajectories {
        json_line(&mut out, t);
    }
    out
}

pub fn preferences_to_string<'a>(
    header: &PreferenceHeader,
    records: impl IntoIterator<Item = &'a PreferenceRecord>,
) -> String {
    let mut out = String::new();
    json_line(&mut out, header);
    for r in records {
        json_line(&mut out, r);
    }
    out
}

/// Both file bodies for `data`; the preference header points at `trajectories_path`.
pub fn dataset_to_strings(data: &PreferenceDataset, gamma_default: f64, trajectories_path: &str) -> (String, String) {
    let trajs = trajectories_to_string(
        TrajectoryHeader {
            dim: data.dim(),
            gamma_default,
        },
        data.trajectories(),
    );
    let prefs = preferences_to_string(
        &PreferenceHeader {
            trajectories: trajectories_path.to_string(),
        },
        data.records(),
    );
    (trajs, prefs)
}

pub fn parse_dataset(trajectories: &str, preferences: &str) -> Result<LoadedDataset> {
    let (head, trajs) = read_trajectories(trajectories.as_bytes())?;
    let (_, records) = read_preferences(preferences.as_bytes())?;
    Ok(LoadedDataset {
        dataset: PreferenceDataset::new(trajs, records)?,
        gamma_default: head.gamma_default,
    })
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Loads a preference file and the trajectory file its header names.
pub fn load_dataset(preferences_path: &Path) -> Result<LoadedDataset> {
    let prefs = read_file(preferences_path)?;
    let (head, _) = read_preferences(prefs.as_bytes())?;
    let traj_path = resolve(preferences_path, &head.trajectories);
    let trajs = read_file(&traj_path)?;
    parse_dataset(&trajs, &prefs)
}

fn resolve(preferences_path: &Path, relative: &str) -> PathBuf {
    preferences_path
        .parent()
        .unwrap_or_else(|| Path::new(""))
        .join(relative)
}

/// Writes the preference file at `preferences_path` and the trajectory file at
/// `trajectories_relative`, resolved against the preference file's directory.
pub fn save_dataset(
    data: &PreferenceDataset,
    gamma_default: f64,
    preferences_path: &Path,
    trajectories_relative: &str,
) -> Result<()> {
    let (trajs, prefs) = dataset_to_strings(data, gamma_default, trajectories_relative);
    let traj_path = resolve(preferences_path, trajectories_relative);
    for (path, body) in [(&traj_path, trajs), (&preferences_path.to_path_buf(), prefs)] {
        let mut f = fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        f.write_all(body.as_bytes())?;
    }
    Ok(())
}

/// A whole dataset as one JSON document, used over HTTP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetPayload {
    #[serde(default = "default_gamma")]
    pub gamma_default: f64,
    pub trajectories: Vec<Trajectory>,
    pub records: Vec<PreferenceRecord>,
}

fn default_gamma() -> f64 {
    1.0
}

impl DatasetPayload {
    pub fn from_dataset(data: &PreferenceDataset, gamma_default: f64) -> Self {
        Self {
            gamma_default,
            trajectories: data.trajectories().cloned().collect(),
            records: data.records().to_vec(),
        }
    }

    pub fn into_dataset(self) -> Result<LoadedDataset> {
        if !(0.0..=1.0).contains(&self.gamma_default) {
            return Err(Error::param("gamma_default", "must lie in [0, 1]"));
        }
        Ok(LoadedDataset {
            dataset: PreferenceDataset::new(self.trajectories, self.records)?,
            gamma_default: self.gamma_default,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datalab::{generate_synthetic, toy_fixture, SyntheticSpec};
    use std::collections::BTreeMap;

    #[test]
    fn toy_round_trip_is_byte_identical() {
        let (t, p) = dataset_to_strings(&toy_fixture(true), 1.0, "toy.trajectories.jsonl");
        assert_eq!(
            t.lines().next().unwrap(),
            r#"{"dim":1,"gamma_default":1.0}"#
        );
        assert_eq!(p.lines().nth(5).unwrap(), r#"{"left":"item2","right":"item4","label":1}"#);
        let loaded = parse_dataset(&t, &p).unwrap();
        assert_eq!(loaded.dataset, toy_fixture(true));
        let (t2, p2) = dataset_to_strings(&loaded.dataset, loaded.gamma_default, "toy.trajectories.jsonl");
        assert_eq!((t, p), (t2, p2));
    }

    #[test]
    fn metadata_survives() {
        let mut meta = BTreeMap::new();
        meta.insert("policy".to_string(), "greedy".to_string());
        meta.insert("episode".to_string(), "3".to_string());
        let a = Trajectory::with_metadata("a", vec![vec![0.1, -2.0]], meta).unwrap();
        let b = Trajectory::new("b", vec![vec![1e-300, 3.5], vec![0.0, 1.0]]).unwrap();
        let data = PreferenceDataset::new(vec![a, b], vec![PreferenceRecord::new("a", "b", crate::reward::Label::Tie)]).unwrap();
        let (t, p) = dataset_to_strings(&data, 0.9, "x.jsonl");
        let loaded = parse_dataset(&t, &p).unwrap();
        assert_eq!(loaded.dataset, data);
        assert_eq!(loaded.gamma_default, 0.9);
        assert_eq!(dataset_to_strings(&loaded.dataset, 0.9, "x.jsonl"), (t, p));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let t = "{\"dim\":1,\"gamma_default\":1.0}\n{\"id\":\"a\",\"steps\":[[1.0]]}\n{\"id\":\"b\",\"steps\":[[1.0,2.0]]}\n";
        match read_trajectories(t.as_bytes()) {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        let p = "{\"trajectories\":\"t\"}\n\n{\"left\":\"a\",\"right\":\"b\",\"label\":2}\n";
        match read_preferences(p.as_bytes()) {
            Err(Error::Parse { line: 3, message }) => assert!(message.contains("label")),
            other => panic!("{other:?}"),
        }
        match read_preferences("".as_bytes()) {
            Err(Error::Parse { line: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        let bad_steps = "{\"dim\":1,\"gamma_default\":1.0}\n{\"id\":\"a\",\"steps\":[]}\n";
        assert!(matches!(read_trajectories(bad_steps.as_bytes()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let data = generate_synthetic(&SyntheticSpec::realizable(3, 20, 30, 4)).unwrap();
        let path = dir.path().join("prefs.jsonl");
        save_dataset(&data, 0.95, &path, "trajs.jsonl").unwrap();
        let loaded = load_dataset(&path).unwrap();
        assert_eq!(loaded.dataset, data);
        assert_eq!(loaded.gamma_default, 0.95);
        let before = (
            fs::read(dir.path().join("trajs.jsonl")).unwrap(),
            fs::read(&path).unwrap(),
        );
        save_dataset(&loaded.dataset, 0.95, &path, "trajs.jsonl").unwrap();
        let after = (
            fs::read(dir.path().join("trajs.jsonl")).unwrap(),
            fs::read(&path).unwrap(),
        );
        assert_eq!(before, after);
        assert!(matches!(load_dataset(&dir.path().join("missing.jsonl")), Err(Error::Io(_))));
    }

    #[test]
    fn payload_round_trip() {
        let payload = DatasetPayload::from_dataset(&toy_fixture(false), 1.0);
        let json = serde_json::to_string(&payload).unwrap();
        let back: DatasetPayload = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_dataset().unwrap().dataset, toy_fixture(false));
    }
}

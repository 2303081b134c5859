//! Fixture files for driving the `sill` binary.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sill_koopman::bench::{make_snapshots, rk4_integrate, spanned_field};
use sill_koopman::io::{snapshots_to_csv, to_json_pretty};
use sill_koopman::{ConjLogistic, GridSpec, SillDictionary, SnapshotSet, SpannedField};

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_sill")
}

pub fn run_cli(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn sill")
}

pub fn fixture_dictionary() -> SillDictionary {
    SillDictionary::new(
        2,
        vec![
            ConjLogistic::new(vec![-0.375, 0.625], vec![3.0, 3.0]).unwrap(),
            ConjLogistic::new(vec![0.625, -0.375], vec![3.0, 3.0]).unwrap(),
        ],
    )
    .unwrap()
}

pub fn fixture_field() -> SpannedField {
    SpannedField::from_rows(fixture_dictionary(), &[vec![1.0, 0.5], vec![-0.5, 1.0]]).unwrap()
}

/// Writes every input file the eight subcommands need and returns the
/// config path for each, keyed by subcommand name.
pub fn write_fixtures(dir: &Path) -> Vec<(&'static str, PathBuf)> {
    let sf = fixture_field();
    let field = spanned_field(&sf);
    let grid = GridSpec {
        lo: vec![-2.0, -2.0],
        hi: vec![2.0, 2.0],
        points_per_dim: 6,
        delta: 1e-3,
    };
    let pts = grid.training_points();
    let ct = make_snapshots(&field, &pts).unwrap();
    fs::write(dir.join("ct.csv"), snapshots_to_csv(&ct)).unwrap();
    fs::write(dir.join("ct_manifest.json"), r#"{"mode":"CT"}"#).unwrap();

    let dt = 0.05;
    let succ: Vec<Vec<f64>> = pts
        .iter()
        .map(|p| rk4_integrate(&field, p, dt / 10.0, 10).unwrap().states.pop().unwrap())
        .collect();
    let dts = SnapshotSet::discrete(&pts, &succ, dt).unwrap();
    fs::write(dir.join("dt.csv"), snapshots_to_csv(&dts)).unwrap();
    fs::write(dir.join("dt_manifest.json"), r#"{"mode":"DT","dt":0.05}"#).unwrap();
    fs::write(dir.join("dictionary.json"), to_json_pretty(&fixture_dictionary()).unwrap()).unwrap();

    let configs: Vec<(&'static str, String)> = vec![
        (
            "fit",
            r#"{"snapshots":"ct.csv","manifest":"ct_manifest.json","dictionary":"dictionary.json","ridge":1e-10}"#.into(),
        ),
        (
            "edmd",
            r#"{"snapshots":"dt.csv","manifest":"dt_manifest.json","dictionary":"dictionary.json"}"#.into(),
        ),
        (
            "predict",
            r#"{"model":"fit_out/model.json","initial_conditions":[[0.5,-0.5],[1.0,1.0]],"horizon":1.0,"dt":0.01}"#
                .into(),
        ),
        (
            "closure",
            r#"{"grid":{"lo":[-2,-2],"hi":[2,2],"points_per_dim":8,"delta":0.1},"alpha_scales":[1,2,4]}"#.into(),
        ),
        (
            "theorem1",
            r#"{"f":{"mu":[-0.5,-0.5],"alpha":[2,3]},"g":{"mu":[0.5,0.5],"alpha":[3,2]},
                "grid":{"lo":[-3,-3],"hi":[3,3],"points_per_dim":12,"delta":0.5}}"#
                .into(),
        ),
        ("stats", r#"{"samples":100000,"m_values":[1,2,3]}"#.into()),
        ("example1", r#"{"n":2}"#.into()),
        ("complete-dictionary", r#"{"dictionary":"dictionary.json"}"#.into()),
    ];
    configs
        .into_iter()
        .map(|(name, text)| {
            let p = dir.join(format!("{name}.json"));
            fs::write(&p, text).unwrap();
            (name, p)
        })
        .collect()
}

/// All regular files in `dir`, sorted by name, with their bytes.
pub fn snapshot_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

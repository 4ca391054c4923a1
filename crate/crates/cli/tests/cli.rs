use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use tractfit::glottal::GlottalParams;
use tractfit::io::write_wav;
use tractfit::tract::{synthesize_voice, SimulationConfig, TractControls};
use tractfit::ParameterTrack;

fn tractfit(args: &[&str], seed_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tractfit"));
    cmd.args(args).env_remove("TRACTFIT_SEED");
    if let Some(s) = seed_env {
        cmd.env("TRACTFIT_SEED", s);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn vowel_wav(dir: &Path, frames: usize) -> PathBuf {
    let sim = SimulationConfig::default();
    let g = vec![GlottalParams::new(115.0, 0.7).unwrap(); frames];
    let c = vec![TractControls::new(21.0, 2.9, vec![]).unwrap(); frames];
    let audio = synthesize_voice(&g, &c, 480, &sim, 3).unwrap();
    let path = dir.join("vowel.wav");
    write_wav(&path, &audio).unwrap();
    path
}

fn match_args<'a>(input: &'a str, params: &'a str, audio: &'a str) -> Vec<&'a str> {
    vec![
        "match",
        "--in",
        input,
        "--out-params",
        params,
        "--out-audio",
        audio,
        "--steps",
        "25",
        "--seed",
        "4",
    ]
}

fn read_track(path: &Path) -> ParameterTrack {
    ParameterTrack::from_json(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn match_writes_both_artifacts_deterministically() {
    let dir = TempDir::new().unwrap();
    let wav = vowel_wav(dir.path(), 12);
    let (t1, a1) = (dir.path().join("p1.json"), dir.path().join("r1.wav"));
    let (t2, a2) = (dir.path().join("p2.json"), dir.path().join("r2.wav"));
    let o = tractfit(&match_args(p(&wav), p(&t1), p(&a1)), None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("voiced"));
    let o = tractfit(&match_args(p(&wav), p(&t2), p(&a2)), None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read(&t1).unwrap(), fs::read(&t2).unwrap());
    assert_eq!(fs::read(&a1).unwrap(), fs::read(&a2).unwrap());
    let track = read_track(&t1);
    assert_eq!(track.frames.len(), 12);
    assert!(track.voiced_count() > 0);
}

#[test]
fn match_then_synth_round_trip() {
    let dir = TempDir::new().unwrap();
    let wav = vowel_wav(dir.path(), 10);
    let (track, resynth) = (dir.path().join("p.json"), dir.path().join("r.wav"));
    let o = tractfit(&match_args(p(&wav), p(&track), p(&resynth)), None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = dir.path().join("s.wav");
    let o = tractfit(
        &[
            "synth",
            "--params",
            p(&track),
            "--out",
            p(&out),
            "--seed",
            "4",
        ],
        None,
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    // synth renders exactly what match resynthesized with the same seed
    assert_eq!(fs::read(&out).unwrap(), fs::read(&resynth).unwrap());
}

#[test]
fn missing_input_is_an_input_error_without_outputs() {
    let dir = TempDir::new().unwrap();
    let (track, audio) = (dir.path().join("p.json"), dir.path().join("r.wav"));
    let missing = dir.path().join("missing.wav");
    let o = tractfit(&match_args(p(&missing), p(&track), p(&audio)), None);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("missing.wav"));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn corrupt_wav_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.wav");
    fs::write(&bad, b"RIFF....WAVEjunk").unwrap();
    let track = dir.path().join("p.json");
    let o = tractfit(&["match", "--in", p(&bad), "--out-params", p(&track)], None);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bad.wav"), "{}", stderr(&o));
    assert!(!track.exists());
}

#[test]
fn silence_exits_with_no_voiced_content() {
    let dir = TempDir::new().unwrap();
    let wav = dir.path().join("silence.wav");
    write_wav(&wav, &tractfit::AudioBuffer::silence(9600, 48000.0)).unwrap();
    let track = dir.path().join("p.json");
    let o = tractfit(&["match", "--in", p(&wav), "--out-params", p(&track)], None);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(!track.exists());
}

fn sample_track() -> serde_json::Value {
    let frames: Vec<serde_json::Value> = (0..20)
        .map(|i| {
            serde_json::json!({
                "frame_index": i,
                "time_s": i as f64 * 0.01,
                "f0_hz": 110.0,
                "tenseness": 0.7,
                "tongue_position": 14.0,
                "tongue_diameter": 2.4,
                "constrictions": [],
                "loss": null,
                "voiced": true
            })
        })
        .collect();
    serde_json::json!({
        "header": {
            "schema_version": 1,
            "sample_rate": 48000.0,
            "hop_s": 0.01,
            "model_version": "test"
        },
        "frames": frames
    })
}

/// Frequency of the first local maximum of the response curve of frame 0.
fn first_peak_hz(response_csv: &Path) -> f64 {
    let text = fs::read_to_string(response_csv).unwrap();
    let rows: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect::<Vec<_>>())
        .filter(|c| c[0] == "0")
        .map(|c| (c[1].parse().unwrap(), c[2].parse().unwrap()))
        .collect();
    let k = (1..rows.len() - 1)
        .find(|&i| rows[i].1 > rows[i - 1].1 && rows[i].1 >= rows[i + 1].1)
        .unwrap();
    rows[k].0
}

#[test]
fn editing_tongue_position_moves_formants() {
    let dir = TempDir::new().unwrap();
    let mut track = sample_track();
    let mut outputs = Vec::new();
    for (name, tp) in [("back", 14.0), ("front", 27.0)] {
        for f in track["frames"].as_array_mut().unwrap() {
            f["tongue_position"] = serde_json::json!(tp);
        }
        let json = dir.path().join(format!("{name}.json"));
        fs::write(&json, track.to_string()).unwrap();
        let wav = dir.path().join(format!("{name}.wav"));
        let plots = dir.path().join(name);
        let o = tractfit(
            &[
                "synth",
                "--params",
                p(&json),
                "--out",
                p(&wav),
                "--plot-dir",
                p(&plots),
            ],
            None,
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(plots.join("area.csv").exists());
        outputs.push((
            fs::read(&wav).unwrap(),
            first_peak_hz(&plots.join("response.csv")),
        ));
    }
    assert_ne!(outputs[0].0, outputs[1].0);
    assert!(
        (outputs[0].1 - outputs[1].1).abs() > 100.0,
        "{} vs {}",
        outputs[0].1,
        outputs[1].1
    );
}

#[test]
fn schema_violations_name_the_field() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o.wav");
    let mut track = sample_track();
    track["frames"][3]["tenseness"] = serde_json::json!(1.5);
    let json = dir.path().join("bad.json");
    fs::write(&json, track.to_string()).unwrap();
    let o = tractfit(&["synth", "--params", p(&json), "--out", p(&out)], None);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("frames[3].tenseness"), "{}", stderr(&o));

    track["frames"] = serde_json::json!([]);
    fs::write(&json, track.to_string()).unwrap();
    let o = tractfit(&["synth", "--params", p(&json), "--out", p(&out)], None);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("frames"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn seed_comes_from_the_environment_unless_given() {
    let dir = TempDir::new().unwrap();
    let json = dir.path().join("t.json");
    fs::write(&json, sample_track().to_string()).unwrap();
    let render = |name: &str, flag: Option<&str>, env: Option<&str>| {
        let out = dir.path().join(name);
        let mut args = vec!["synth", "--params", p(&json), "--out", p(&out)];
        if let Some(s) = flag {
            args.extend(["--seed", s]);
        }
        let o = tractfit(&args, env);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        fs::read(&out).unwrap()
    };
    let flag5 = render("a.wav", Some("5"), None);
    assert_eq!(render("b.wav", None, Some("5")), flag5);
    assert_eq!(render("c.wav", Some("5"), Some("6")), flag5);
    assert_ne!(render("d.wav", None, Some("6")), flag5);
    let o = tractfit(
        &["synth", "--params", p(&json), "--out", "x.wav"],
        Some("many"),
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn single_trial_experiment_is_valid_and_repeatable() {
    let dir = TempDir::new().unwrap();
    let run = |name: &str| {
        let report = dir.path().join(name);
        let table = dir.path().join(format!("{name}.txt"));
        let o = tractfit(
            &[
                "experiment",
                "--trials",
                "1",
                "--seed",
                "7",
                "--out-report",
                p(&report),
                "--out-table",
                p(&table),
            ],
            None,
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert_eq!(
            String::from_utf8_lossy(&o.stdout),
            fs::read_to_string(&table).unwrap()
        );
        fs::read_to_string(&report).unwrap()
    };
    let a = run("a.json");
    assert_eq!(a, run("b.json"));
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    let conditions = v["conditions"].as_array().unwrap();
    assert_eq!(conditions.len(), 6);
    for c in conditions {
        assert!(c["frequency_response_mae_db"].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn zero_trials_and_bad_output_dirs_are_rejected() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("r.json");
    let o = tractfit(
        &["experiment", "--trials", "0", "--out-report", p(&report)],
        None,
    );
    assert_eq!(code(&o), 2);
    let nested = dir.path().join("no/such/dir/r.json");
    let o = tractfit(
        &["experiment", "--trials", "1", "--out-report", p(&nested)],
        None,
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("does not exist"));
}

#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_halludetect"));
    c.env_remove("HALLUDETECT_API_KEY");
    c
}

pub fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[track_caller]
pub fn assert_exit(o: &Output, code: i32) {
    assert_eq!(
        o.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        stdout(o),
        stderr(o)
    );
}

/// Writes a seeded fixture named `name` under `dir/fx`.
pub fn synth(dir: &Path, name: &str, extra: &[&str]) {
    let mut args = vec!["synth", "--out-dir", "fx", "--name", name];
    args.extend_from_slice(extra);
    assert_exit(&run_in(dir, &args), 0);
}

pub fn questions_jsonl(n: usize) -> String {
    (1..=n)
        .map(|i| {
            format!(
                "{{\"id\":\"q{i:02}\",\"question\":\"What is the answer for q{i:02}?\",\"reference_answer\":\"gold {i}\"}}\n"
            )
        })
        .collect()
}

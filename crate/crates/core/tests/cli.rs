use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cail::data::DemoSet;

const SMALL: &str = "\
# tiny networks so a run takes seconds
conv_channels=2
strides=4,4
feature_dim=6
disc_hidden=8
proj_hidden=8
proj_dim=4
hidden=8
batch_size=4
warmup=10
eval_every=10
eval_episodes=1
capacity=100
ckpt_every=20
";

fn cail(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cail"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn gen_demos(dir: &Path, episodes: &str, seed: &str) -> PathBuf {
    let out = dir.join(format!("demo-{episodes}-{seed}"));
    let o = cail(&["gen-expert", "--env", "pendulum", "--episodes", episodes, "--seed", seed, "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("small.cfg");
    std::fs::write(&path, SMALL).unwrap();
    path
}

#[test]
fn gen_expert_writes_reproducible_competent_demos() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.demo");
    let o = cail(&["gen-expert", "--env", "pendulum", "--episodes", "10", "--seed", "1", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("episode=")).count(), 10);
    let mean: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("mean="))
        .and_then(|l| l.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(mean >= 180.0, "{text}");

    let demos = DemoSet::load(&out).unwrap();
    assert_eq!(demos.trajectories.len(), 10);
    assert!(demos.trajectories.iter().all(|t| t.frames.len() == 200));

    let again = dir.path().join("b.demo");
    cail(&["gen-expert", "--env", "pendulum", "--episodes", "10", "--seed", "1", "--out", p(&again)]);
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn gen_expert_rejects_unknown_env_and_unwritable_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = cail(&["gen-expert", "--env", "acrobot", "--out", p(&dir.path().join("x"))]);
    assert_eq!(o.status.code(), Some(2));
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, b"x").unwrap();
    let o = cail(&["gen-expert", "--episodes", "1", "--out", p(&blocker.join("sub/out.demo"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn train_usage_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = cail(&["train", "--algo", "cail"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));

    let missing = dir.path().join("none.demo");
    let o = cail(&["train", "--demos", p(&missing), "--out", p(&dir.path().join("r"))]);
    assert_eq!(o.status.code(), Some(2));

    let corrupt = dir.path().join("corrupt.demo");
    std::fs::write(&corrupt, b"NOTADEMO and some trailing bytes").unwrap();
    let o = cail(&["train", "--demos", p(&corrupt), "--out", p(&dir.path().join("r"))]);
    assert_eq!(o.status.code(), Some(3));

    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "learning_rate=0.1\n").unwrap();
    let demos = gen_demos(dir.path(), "1", "0");
    let o = cail(&["train", "--demos", p(&demos), "--config", p(&cfg), "--out", p(&dir.path().join("r"))]);
    assert_eq!(o.status.code(), Some(2));

    let o = cail(&["train", "--demos", p(&demos), "--algo", "pcil", "--out", p(&dir.path().join("r"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn train_eval_plot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let demos = gen_demos(dir.path(), "1", "0");
    let cfg = small_config(dir.path());
    let mut runs = Vec::new();
    for (name, algo) in [("r0", "cail"), ("r1", "gail-se")] {
        let run = dir.path().join(name);
        let o = cail(&[
            "train", "--algo", algo, "--env", "pendulum", "--demos", p(&demos), "--steps", "30", "--seed", "0",
            "--config", p(&cfg), "--out", p(&run),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let metrics = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
        assert_eq!(
            metrics.lines().next().unwrap(),
            "step,eval_mean_return,eval_std_return,L_dis,L_unsup,L_csup,critic_loss,actor_loss,alpha,steps_per_second"
        );
        assert!(metrics.lines().last().unwrap().starts_with("30,"));
        let echo = std::fs::read_to_string(run.join("config")).unwrap();
        assert!(echo.contains(&format!("algo={algo}\n")) && echo.contains("total_steps=30\n"));
        assert!(run.join("ckpt_30").exists());
        runs.push(run);
    }

    let o = cail(&["eval", "--run", p(&runs[0]), "--episodes", "1", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("mean=") && text.contains(" std=0.000000 episodes=1"), "{text}");
    let again = cail(&["eval", "--run", p(&runs[0]), "--episodes", "1", "--seed", "3"]);
    assert_eq!(stdout(&again), text);

    let merged = dir.path().join("curves.csv");
    let o = cail(&["plot", "--runs", p(&runs[0]), p(&runs[1]), "--out", p(&merged)]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(&merged).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "run,step,eval_mean_return,eval_std_return");
    assert_eq!(lines.len(), 1 + 3 + 3);
    let keys: Vec<(String, u64)> = lines[1..]
        .iter()
        .map(|l| {
            let mut f = l.split(',');
            (f.next().unwrap().to_string(), f.next().unwrap().parse().unwrap())
        })
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert_eq!(keys[0].0, "r0");
}

#[test]
fn gail_se_augmentation_flag() {
    let dir = tempfile::tempdir().unwrap();
    let demos = gen_demos(dir.path(), "1", "0");
    let cfg = small_config(dir.path());
    for (flag, expected) in [(None, "aug=none"), (Some("--aug"), "aug=shift")] {
        let run = dir.path().join(format!("{}", flag.is_some()));
        let mut args = vec![
            "train", "--algo", "gail-se", "--demos", p(&demos), "--steps", "5", "--config", p(&cfg), "--out", p(&run),
        ];
        args.extend(flag);
        assert_eq!(cail(&args).status.code(), Some(0));
        let echo = std::fs::read_to_string(run.join("config")).unwrap();
        assert!(echo.lines().any(|l| l == expected), "{echo}");
    }
}

#[test]
fn eval_and_plot_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = cail(&["eval", "--run", p(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let o = cail(&["plot", "--runs", "--out", p(&dir.path().join("x.csv"))]);
    assert_eq!(o.status.code(), Some(2));
    let o = cail(&["plot", "--runs", p(dir.path()), "--out", p(&dir.path().join("x.csv"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn selftest_passes_and_names_each_property() {
    let o = cail(&["selftest"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
    assert!(text.contains("cail_loss identity"));
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn virosim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_virosim"))
        .args(args)
        .env_remove("SIM_SEED")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("scenario.toml");
    let text = format!(
        "[world]\nticks = 20\nfiles_per_host = 4\n[topology]\nhosts = 15\n[strategies]\nmc_trials = 50\nbaseline_trials = 50\nfixture_files = 5\n{extra}"
    );
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

const OUTPUTS: [&str; 6] = ["events.csv", "lineage.csv", "outcomes.csv", "infected.csv", "report.json", "config.toml"];

#[test]
fn missing_config_exits_2() {
    let o = virosim(&["simulate", "--config", "/no/such/file.toml", "--quiet"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn bad_probability_exits_3_naming_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[virus]\nopen_probability = 1.5\n").unwrap();
    let o = virosim(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("virus.open_probability"), "{}", stderr(&o));
}

#[test]
fn empty_sections_use_flagged_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.toml");
    fs::write(&cfg, "[world]\nticks = 3\n[topology]\nhosts = 5\n[virus]\n[av]\n[game]\n[strategies]\nmc_trials = 10\nbaseline_trials = 10\n").unwrap();
    let out = dir.path().join("out");
    let o = virosim(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let echo = fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(echo.contains("encryption_batch = 8  # default: not from paper"));
    assert!(echo.contains("p_full = 0.08\n"));
}

#[test]
fn same_seed_same_bytes_other_seed_other_log() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let run = |seed: &str, out: &str| {
        let out = dir.path().join(out);
        let o = virosim(&["simulate", "--config", &cfg, "--seed", seed, "--out", out.to_str().unwrap(), "--quiet"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        out
    };
    let a = run("7", "a");
    let b = run("7", "b");
    let c = run("8", "c");
    for f in OUTPUTS {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_ne!(fs::read(a.join("events.csv")).unwrap(), fs::read(c.join("events.csv")).unwrap());
    assert!(a.join("timing.json").exists());
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let seed_of = |args: &[&str], env: Option<&str>| {
        let out = dir.path().join("t");
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_virosim"));
        cmd.args(["simulate", "--config", &cfg, "--quiet", "--out", out.to_str().unwrap()]).args(args);
        cmd.env_remove("SIM_SEED");
        if let Some(e) = env {
            cmd.env("SIM_SEED", e);
        }
        let o = cmd.output().unwrap();
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let echo = fs::read_to_string(out.join("config.toml")).unwrap();
        echo.lines().find(|l| l.starts_with("master_seed")).unwrap().to_owned()
    };
    assert_eq!(seed_of(&[], None), "master_seed = 42");
    assert_eq!(seed_of(&[], Some("99")), "master_seed = 99");
    assert_eq!(seed_of(&["--seed", "5"], Some("99")), "master_seed = 5");

    let with_seed = small_config(dir.path(), "");
    let text = fs::read_to_string(&with_seed).unwrap().replace("[world]\n", "[world]\nmaster_seed = 13\n");
    fs::write(&with_seed, text).unwrap();
    assert_eq!(seed_of(&[], Some("99")), "master_seed = 13");

    let o = Command::new(env!("CARGO_BIN_EXE_virosim"))
        .args(["game", "--quiet", "--out", dir.path().join("u").to_str().unwrap()])
        .env("SIM_SEED", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(code(&o), 3);
}

#[test]
fn sweep_bad_path_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let o = virosim(&["sweep", "--config", &cfg, "--param", "game.nonexistent", "--values", "1,2", "--quiet"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let o = virosim(&["sweep", "--config", &cfg, "--param", "game.ransom", "--values", "5", "--metric", "bogus"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn sweep_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = dir.path().join("sw");
    let o = virosim(&[
        "sweep", "--config", &cfg, "--param", "game.ransom", "--values", "5,10,20,40", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.windows(2).all(|w| w[1] < w[0]), "{rows:?}");
}

#[test]
fn io_failure_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    let o = virosim(&["game", "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}

#[test]
fn correlate_builtin_and_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    let o = virosim(&["correlate", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("core trait similarity 1.0000"), "{stdout}");
    assert!(out.join("correlation.json").exists());

    let a = dir.path().join("a.toml");
    fs::write(&a, "organism = \"a\"\nstages = [[\"ATTACHMENT\", \"x\"], [\"REPLICATION\", \"y\"]]\n[traits]\ncontact_spread = true\n").unwrap();
    let o = virosim(&["correlate", "--profiles", a.to_str().unwrap(), a.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = virosim(&["correlate", "--profiles", a.to_str().unwrap(), "/missing.toml", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "organism = \"b\"\nstages = [[\"ATTACHMENT\", \"x\"]]\n").unwrap();
    let o = virosim(&["correlate", "--profiles", a.to_str().unwrap(), bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
}

#[test]
fn strategies_and_game_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    let o = virosim(&["game", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("user dominant action: NOT_PAY"));
    let game = fs::read_to_string(out.join("game.json")).unwrap();
    assert!(game.contains("\"strictly_dominant\": \"NOT_PAY\""));

    let o = virosim(&["strategies", "--trials", "40", "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("outcomes.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5 * 40);
    assert!(csv.starts_with("trial,strategy,recovered_fraction,malware_removed,reinfected,ransom_paid,total_complexity\n"));
}

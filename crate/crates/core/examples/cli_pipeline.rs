//! Drives the command line end to end in a temporary directory:
//! toy data, a short training run, a truncation sweep and an evaluation.

use restyle::cli::run;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let p = |s: &str| dir.path().join(s).to_string_lossy().into_owned();
    std::fs::write(
        p("run.toml"),
        r#"[model]
resolution = 16
z_dim = 16
base_channels = 16
min_channels = 8

[train]
steps = 100
snapshot_every = 50
fid_n = 200

[toy]
count = 400

[truncation]
mean_w_samples = 1024

[metrics]
list = ["fid", "ppl_zfull", "ppl_wend", "ls_z"]
fid_n = 200
ppl_pairs = 100
ls_samples = 400
ls_oracle = "latent_coordinate"
"#,
    )?;
    let cfg = p("run.toml");
    let steps: [Vec<String>; 4] = [
        vec!["prepare".into(), "--toy".into(), "--out".into(), p("toy")],
        vec!["train".into(), "--shards".into(), p("toy"), "--run-dir".into(), p("run")],
        vec![
            "generate".into(),
            "--snapshot".into(),
            p("run/snapshots/step-000100.sgfw"),
            "--mode".into(),
            "trunc_sweep".into(),
            "--out".into(),
            p("images"),
        ],
        vec!["eval".into(), "--snapshot".into(), p("run/snapshots/step-000100.sgfw"), "--shards".into(), p("toy"), "--out".into(), p("metrics.csv")],
    ];
    for args in steps {
        let mut argv = vec!["restyle".to_string()];
        argv.extend(args);
        argv.extend(["--config".into(), cfg.clone()]);
        println!("$ {}", argv[..2].join(" "));
        let code = run(&argv);
        if code != 0 {
            return Err(format!("{} exited with {code}", argv[1]).into());
        }
    }
    Ok(())
}

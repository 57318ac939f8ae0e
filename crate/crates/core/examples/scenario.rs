//! Reproducible scenario runs: build, validate and execute a scenario,
//! then read back the result record.

use sandpile1d::experiments::{run, validate, Command, Params, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let toml = r#"
name = "hole-law"
command = "prop51"
seed = 1

[params]
n = [1, 2]
k = 5
samples = 20000
"#;
    let scenario = Scenario::from_toml_str(toml)?;
    println!("valid: {}", validate(&scenario).ok);

    let bad = Scenario::new(
        "s",
        Command::Series,
        0,
        Params { f: Some("occ0".into()), eta: Some("0 0 ones 1".into()), t: Some(vec![0.5]), ..Params::default() },
    );
    for w in validate(&bad).warnings {
        println!("warning on {}: {}", w.field, w.message);
    }

    let dir = std::env::temp_dir().join("sandpile1d-scenario-example");
    let out = run(&scenario, Some(&dir))?;
    println!("wrote {} and {:?}", out.record_path.display(), out.extra_paths);
    println!("scenario hash {}", out.record["scenario_hash"]);
    print!("{}", std::fs::read_to_string(&out.extra_paths[0])?);
    Ok(())
}

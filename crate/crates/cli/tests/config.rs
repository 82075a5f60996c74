use blockgrad_cli::{
    parse_config, parse_config_with, CliError, Experiment, Job, Overrides, Preset,
};

fn usage_or_config_message(e: CliError) -> String {
    assert_eq!(e.exit_code(), 2, "{e}");
    e.to_string()
}

#[test]
fn invalid_weight_sequence_names_the_parameter() {
    let e = parse_config("experiment = \"nonconvex\"\n[nonconvex]\nweight_seq = \"exp 1.5\"\n")
        .unwrap_err();
    let msg = usage_or_config_message(e);
    assert!(msg.contains("alpha"), "{msg}");
}

#[test]
fn unknown_keys_are_rejected() {
    let e = parse_config("experiment = \"regret\"\n[regret]\nhorizn = 10\n").unwrap_err();
    let msg = usage_or_config_message(e);
    assert!(msg.contains("horizn"), "{msg}");
    assert!(parse_config("experimnt = \"regret\"\n").is_err());
}

#[test]
fn out_of_range_values_name_their_key() {
    let msg = usage_or_config_message(
        parse_config("experiment = \"regret\"\n[regret]\neta = -1.0\n").unwrap_err(),
    );
    assert!(msg.contains("eta"), "{msg}");
    let msg = usage_or_config_message(
        parse_config("experiment = \"stability\"\n[stability]\nbeta = 1.5\n").unwrap_err(),
    );
    assert!(msg.contains("beta"), "{msg}");
}

#[test]
fn regret_paper_preset_uses_published_settings() {
    let cfg = parse_config("preset = \"regret-paper\"\n").unwrap();
    assert_eq!(cfg.experiment, Experiment::Regret);
    assert_eq!(cfg.preset, Preset::Paper);
    let Job::Regret(r) = &cfg.job else {
        panic!("wrong job")
    };
    assert_eq!(r.eta, 0.01);
    assert_eq!(r.eps, 1e-8);
    assert_eq!(r.repetitions, 100);
    assert_eq!(r.horizon, 1000);
    assert_eq!(r.partitions.len(), 5);
}

#[test]
fn default_preset_uses_larger_epsilon() {
    let cfg = parse_config("experiment = \"regret\"\n").unwrap();
    let Job::Regret(r) = &cfg.job else {
        panic!("wrong job")
    };
    assert_eq!(r.eps, 1e-3);
}

#[test]
fn command_line_overrides_file() {
    let ov = Overrides {
        seed: Some(9),
        preset: Some("quick".into()),
        ..Default::default()
    };
    let cfg = parse_config_with("experiment = \"diag\"\nseed = 3\n", ov).unwrap();
    assert_eq!(cfg.seed, 9);
    assert_eq!(cfg.preset, Preset::Quick);
}

#[test]
fn canonical_form_round_trips() {
    let texts = [
        "preset = \"regret-paper\"\nseed = 7\nout = \"a b/r.csv\"\n",
        "experiment = \"nonconvex\"\n[nonconvex]\nweight_seq = \"poly 2.5\"\nstepsize = \"bias_corrected 0.5\"\npartitions = [\"1\", \"3/97\"]\n",
        "experiment = \"minnorm\"\n[minnorm]\nn = 4\nd = 9\npartition = \"4/5\"\n",
        "experiment = \"layerwise\"\npreset = \"quick\"\n",
        "experiment = \"stability\"\nthreads = 2\n[stream]\nblocks = [{ width = 3, prob = 0.0, mean = 1.0, std = 2.0 }]\n[stability]\npartitions = [\"1\", \"d\"]\n",
        "experiment = \"diag\"\n[diag]\npartition = \"20/80\"\n",
    ];
    for text in texts {
        let cfg = parse_config(text).unwrap_or_else(|e| panic!("{text}: {e}"));
        let canon = cfg.to_canonical();
        let back = parse_config(&canon).unwrap_or_else(|e| panic!("{canon}: {e}"));
        assert_eq!(cfg, back, "{canon}");
        assert_eq!(canon, back.to_canonical());
    }
}

use ddp::report::{group_stats, write_group_table, write_root_table};
use ddp::{
    analyze_dataset, analyze_dataset_limited, analyze_dataset_sequential, emit_xyzm, parse_xyzm_str, synthesize,
    AnalysisReport, AnalyzeOptions, CorpusShape, DataBurst, Dataset, GroupLabel, PipelineConfig, Profile,
};
use proptest::prelude::*;

fn small_config(dims: usize) -> PipelineConfig {
    PipelineConfig {
        dims,
        burst_len: 27,
        ..Default::default()
    }
}

fn corpus(profile: Profile, subjects: usize, bursts: usize) -> (PipelineConfig, Dataset) {
    let config = small_config(4);
    let data = synthesize(
        profile,
        &config,
        CorpusShape {
            subjects,
            bursts_per_subject: bursts,
        },
    )
    .unwrap();
    (config, data)
}

#[test]
fn synthetic_corpus_survives_text_round_trip() {
    let (config, data) = corpus(Profile::Drift, 3, 4);
    let mut text = Vec::new();
    emit_xyzm(&data, &mut text).unwrap();
    let back = parse_xyzm_str(std::str::from_utf8(&text).unwrap(), &config).unwrap();
    assert_eq!(back.bursts, data.bursts);
    assert_eq!(back.metadata, data.metadata);
}

#[test]
fn report_json_round_trip() {
    let (config, data) = corpus(Profile::Burst, 2, 4);
    let report = analyze_dataset(&data, &config, AnalyzeOptions::default())
        .unwrap()
        .report(&config);
    let json = report.to_json().unwrap();
    let back = AnalysisReport::from_json(&json).unwrap();
    assert_eq!(back, report);
    assert_eq!(back.schema_version, "1.0");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    report.write_json(&path).unwrap();
    assert_eq!(AnalysisReport::read_json(&path).unwrap(), report);
}

#[test]
fn root_table_has_one_row_per_branch() {
    let (config, data) = corpus(Profile::Stable, 3, 4);
    let report = analyze_dataset(&data, &config, AnalyzeOptions::default())
        .unwrap()
        .report(&config);
    let mut out = Vec::new();
    write_root_table(&report.subjects, &mut out).unwrap();
    let rows = csv::Reader::from_reader(out.as_slice()).records().count();
    assert_eq!(rows, 3 * 3 * config.dims * config.root_count());
}

#[test]
fn limited_parallelism_matches_sequential() {
    let (config, data) = corpus(Profile::Drift, 6, 3);
    let seq = analyze_dataset_sequential(&data, &config, AnalyzeOptions::default()).unwrap();
    let par = analyze_dataset_limited(&data, &config, AnalyzeOptions::default(), Some(2)).unwrap();
    assert_eq!(
        seq.report(&config).to_json().unwrap(),
        par.report(&config).to_json().unwrap()
    );
}

#[test]
fn stride_two_halves_the_pairs() {
    let (mut config, data) = corpus(Profile::Stable, 1, 5);
    config.stride = 2;
    let analysis = analyze_dataset(&data, &config, AnalyzeOptions::default()).unwrap();
    let frames = &analysis.subjects[0].frames;
    assert_eq!(frames.len(), 3);
    assert!(frames.iter().all(|f| f.burst - f.previous_burst == 2));
}

#[test]
fn groups_are_compared() {
    let (config, data) = corpus(Profile::Stable, 4, 3);
    let report = analyze_dataset(&data, &config, AnalyzeOptions::default())
        .unwrap()
        .report(&config);
    let stats = group_stats(&report.subjects, &[GroupLabel::Control, GroupLabel::PostAclr], &config).unwrap();
    assert_eq!(stats.groups.len(), 2);
    assert!(stats.percent_change_combined.is_some());
    assert!(stats.rc_threshold > 0.0);

    let mut out = Vec::new();
    write_group_table(&stats, &mut out).unwrap();
    // two groups x (dims + combined) + percent-change rows
    let rows = csv::Reader::from_reader(out.as_slice()).records().count();
    assert_eq!(rows, 3 * (config.dims + 1));
}

#[test]
fn missing_group_is_reported_unavailable() {
    let (config, data) = corpus(Profile::Stable, 1, 3);
    let report = analyze_dataset(&data, &config, AnalyzeOptions::default())
        .unwrap()
        .report(&config);
    let stats = group_stats(&report.subjects, &[GroupLabel::Control, GroupLabel::PostAclr], &config).unwrap();
    assert_eq!(stats.unavailable, vec![GroupLabel::PostAclr]);
    assert!(stats.percent_change_combined.is_none());
}

#[test]
fn collapse_outranks_steady_signal() {
    let (config, data) = corpus(Profile::Burst, 1, 6);
    let injection = data.injections[0].clone();
    let analysis = analyze_dataset(&data, &config, AnalyzeOptions::default()).unwrap();
    let frame = analysis.subjects[0]
        .frames
        .iter()
        .find(|f| f.burst == injection.burst_index)
        .unwrap();
    assert!(frame.frame_pdi >= 5);
}

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    let burst = prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 2), 9);
    (prop::collection::vec(burst, 1..4), 1e-4f64..10.0).prop_map(|(bursts, dt)| {
        let mut data = Dataset::default();
        for (i, rows) in bursts.into_iter().enumerate() {
            data.bursts.push(DataBurst::from_rows(rows, dt, i as u64, "p"));
        }
        data
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn arbitrary_reals_round_trip(data in dataset_strategy()) {
        let config = PipelineConfig { dims: 2, burst_len: 9, ..Default::default() };
        let mut text = Vec::new();
        emit_xyzm(&data, &mut text).unwrap();
        let back = parse_xyzm_str(std::str::from_utf8(&text).unwrap(), &config).unwrap();
        prop_assert_eq!(back.bursts, data.bursts);
    }
}

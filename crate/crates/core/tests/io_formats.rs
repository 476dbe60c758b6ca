use arousalnet::error::Error;
use arousalnet::io::{
    decode_model, encode_model, load_members, load_model, read_prediction, read_record,
    read_windows, save_ensemble, save_model, synth_dataset, write_prediction, write_record,
    write_windows, Prediction, SynthConfig,
};
use arousalnet::models::{build_model_with, ModelConfig, ModelKind};
use arousalnet::nn::{Mode, RngState, Tensor3};
use arousalnet::prep::{prepare_record, Channel, Record};
use proptest::prelude::*;

fn sample_record(id: &str, n: usize, seed: u64) -> Record {
    let mut rng = RngState::new(seed);
    let channels = ["EEG", "EMG"]
        .iter()
        .map(|name| Channel {
            name: name.to_string(),
            samples: (0..n).map(|_| rng.normal() as f32).collect(),
        })
        .collect();
    let labels = (0..n).map(|_| rng.below(3) as i8 - 1).collect();
    Record::new(id, 200.0, channels, labels).unwrap()
}

fn small_synth(seed: u64) -> SynthConfig {
    SynthConfig {
        records: 3,
        duration_s: 120.0,
        event_rate: 60.0,
        seed,
        ..SynthConfig::default()
    }
}

#[test]
fn record_round_trip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = sample_record("rec-1", 777, 4);
    r.channels[0].samples[3] = f32::MIN_POSITIVE / 4.0;
    r.channels[1].samples[5] = -0.0;
    write_record(dir.path(), &r).unwrap();
    let back = read_record(dir.path(), "rec-1").unwrap();
    assert_eq!(back.id, r.id);
    assert_eq!(back.fs, r.fs);
    assert_eq!(back.labels, r.labels);
    for (a, b) in back.channels.iter().zip(&r.channels) {
        assert_eq!(a.name, b.name);
        let bits = |c: &Channel| c.samples.iter().map(|x| x.to_bits()).collect::<Vec<u32>>();
        assert_eq!(bits(a), bits(b));
    }
}

#[test]
fn bad_label_byte_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_record(dir.path(), &sample_record("r", 50, 1)).unwrap();
    let lab = dir.path().join("r.lab");
    let mut bytes = std::fs::read(&lab).unwrap();
    bytes[17] = 7;
    std::fs::write(&lab, bytes).unwrap();
    match read_record(dir.path(), "r").unwrap_err() {
        Error::LabelDomain { offset, value, .. } => assert_eq!((offset, value), (17, 7)),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn truncated_signal_reports_sizes() {
    let dir = tempfile::tempdir().unwrap();
    write_record(dir.path(), &sample_record("r", 50, 1)).unwrap();
    let sig = dir.path().join("r.sig");
    let bytes = std::fs::read(&sig).unwrap();
    std::fs::write(&sig, &bytes[..bytes.len() - 3]).unwrap();
    let err = read_record(dir.path(), "r").unwrap_err();
    assert!(
        matches!(
            err,
            Error::SizeMismatch {
                expected: 400,
                actual: 397,
                ..
            }
        ),
        "{err}"
    );
    let msg = err.to_string();
    assert!(
        msg.contains("400") && msg.contains("397") && msg.contains("r.sig"),
        "{msg}"
    );
}

#[test]
fn header_problems_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    write_record(dir.path(), &sample_record("r", 10, 1)).unwrap();
    let hdr = dir.path().join("r.hdr");
    let good = std::fs::read_to_string(&hdr).unwrap();
    std::fs::write(&hdr, good.replace("ZREC 1", "XREC 9")).unwrap();
    assert!(matches!(
        read_record(dir.path(), "r").unwrap_err(),
        Error::BadMagic { .. }
    ));
    std::fs::write(&hdr, good.replace("fs 200", "fs fast")).unwrap();
    assert!(matches!(
        read_record(dir.path(), "r").unwrap_err(),
        Error::Malformed { .. }
    ));
    assert!(read_record(dir.path(), "missing").is_err());
    assert!(read_record(dir.path(), "../r").is_err());
}

#[test]
fn model_round_trip_reproduces_eval_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ModelConfig::TINY;
    for kind in ModelKind::ALL {
        let mut rng = RngState::new(kind.tag() as u64);
        let mut model = build_model_with::<f32>(kind, cfg, &mut rng);
        let x = Tensor3::<f32>::from_fn([3, cfg.in_channels, cfg.input_len], |_, _, _| {
            rng.uniform() as f32
        });
        // Move the running statistics away from their initial values.
        model.graph.calibrate_batch_norm(&x).unwrap();
        let path = dir.path().join(format!("{kind}.znn"));
        save_model(&path, &model).unwrap();
        let mut back = load_model::<f32>(&path, Some(kind)).unwrap();
        let a = model.forward(&x, Mode::Eval).unwrap();
        let b = back.forward(&x, Mode::Eval).unwrap();
        let bits = |t: &Tensor3<f32>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<u32>>();
        assert_eq!(bits(&a), bits(&b), "{kind}");
        assert_eq!(encode_model(&back), std::fs::read(&path).unwrap());
    }
}

#[test]
fn corrupt_model_fails_checksum() {
    let dir = tempfile::tempdir().unwrap();
    let model = build_model_with::<f32>(
        ModelKind::M5WaveNetSame,
        ModelConfig::TINY,
        &mut RngState::new(0),
    );
    let path = dir.path().join("m.znn");
    save_model(&path, &model).unwrap();
    let mut bytes = std::fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x10;
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(
        load_model::<f32>(&path, None).unwrap_err(),
        Error::Checksum { .. }
    ));
}

#[test]
fn kind_mismatch_is_reported() {
    let model = build_model_with::<f32>(
        ModelKind::M5WaveNetSame,
        ModelConfig::TINY,
        &mut RngState::new(0),
    );
    let bytes = encode_model(&model);
    let err = decode_model::<f32>("m5.znn".as_ref(), &bytes, Some(ModelKind::M4WaveNetCausal))
        .unwrap_err();
    assert!(matches!(err, Error::KindMismatch { .. }), "{err}");
    assert!(decode_model::<f32>("m5.znn".as_ref(), &bytes, None).is_ok());
    assert!(decode_model::<f64>("m5.znn".as_ref(), &bytes, Some(ModelKind::M5WaveNetSame)).is_ok());
}

#[test]
fn ensemble_file_holds_every_member() {
    let dir = tempfile::tempdir().unwrap();
    let members: Vec<_> = (0..3)
        .map(|s| {
            build_model_with::<f32>(
                ModelKind::M5WaveNetSame,
                ModelConfig::TINY,
                &mut RngState::new(s),
            )
        })
        .collect();
    let path = dir.path().join("e.zen");
    save_ensemble(&path, &members).unwrap();
    let back = load_members::<f32>(&path, Some(ModelKind::M5WaveNetSame)).unwrap();
    assert_eq!(back.len(), 3);
    for (a, b) in back.iter().zip(&members) {
        assert_eq!(encode_model(a), encode_model(b));
    }
    let single = dir.path().join("one.znn");
    save_model(&single, &members[0]).unwrap();
    assert_eq!(load_members::<f32>(&single, None).unwrap().len(), 1);
}

#[test]
fn synth_is_deterministic_per_seed() {
    let root = tempfile::tempdir().unwrap();
    let write = |sub: &str, seed: u64| {
        let dir = root.path().join(sub);
        for r in synth_dataset(&small_synth(seed)).unwrap() {
            write_record(&dir, &r).unwrap();
        }
        let mut files: Vec<_> = std::fs::read_dir(&dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        files.sort();
        files
            .iter()
            .map(|f| (f.file_name().unwrap().to_owned(), std::fs::read(f).unwrap()))
            .collect::<Vec<_>>()
    };
    let a = write("a", 5);
    assert_eq!(a.len(), 9);
    assert_eq!(a, write("b", 5));
    assert_ne!(a, write("c", 6));
}

#[test]
fn window_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthConfig {
        records: 1,
        ..small_synth(2)
    };
    let set = prepare_record(&synth_dataset(&cfg).unwrap()[0]).unwrap();
    assert!(!set.is_empty());
    let path = dir.path().join("x.win");
    write_windows(&path, &set).unwrap();
    assert_eq!(read_windows(&path).unwrap(), set);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn prediction_round_trip(probs in proptest::collection::vec(0.0f32..=1.0, 0..300), id in "[a-z][a-z0-9_]{0,8}") {
        let dir = tempfile::tempdir().unwrap();
        let p = Prediction { record_id: id, probs };
        let path = dir.path().join("p.pred");
        write_prediction(&path, &p).unwrap();
        prop_assert_eq!(read_prediction(&path).unwrap(), p);
    }
}

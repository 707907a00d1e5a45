use scmrl_core::data::{synth_multiview, MultiViewDataset, Normalization, SynthSpec};
use scmrl_core::model::{init_unified, ScmrlConfig};
use scmrl_core::training::{from_bytes, to_bytes, Milestone, Phase, TrainSchedule, Trainer, Variant};
use scmrl_core::ErrorKind;

fn small_dataset(seed: u64, n: usize) -> MultiViewDataset {
    synth_multiview(&SynthSpec { n, dims: vec![6, 8], seed, ..SynthSpec::default() })
        .unwrap()
        .normalized(Normalization::MinMax)
}

fn small_config(ds: &MultiViewDataset) -> ScmrlConfig {
    ScmrlConfig {
        latent_dim: 8,
        encoder_hidden: vec![16],
        degrader_hidden: vec![16],
        classifier_hidden: vec![16],
        ..ScmrlConfig::new(ds.dims(), ds.k())
    }
}

fn schedule(pretrain: usize, joint: usize) -> TrainSchedule {
    TrainSchedule { pretrain_epochs: pretrain, joint_epochs: joint, batch_size: 32, seed: 5, ..TrainSchedule::default() }
}

fn history_json(t: &Trainer) -> String {
    serde_json::to_string(&t.report).unwrap()
}

#[test]
fn zero_epoch_pretraining_changes_nothing() {
    let ds = small_dataset(0, 60);
    let mut t = Trainer::new(small_config(&ds), schedule(0, 0), &ds).unwrap();
    let before = t.model.flat_params();
    t.pretrain(&ds).unwrap();
    assert_eq!(t.model.flat_params(), before);
    assert!(t.report.history.is_empty());
}

#[test]
fn pretraining_touches_only_autoencoders_and_reduces_reconstruction() {
    let ds = small_dataset(1, 90);
    let mut t = Trainer::new(small_config(&ds), schedule(50, 0), &ds).unwrap();
    let degraders = t.model.degraders.clone();
    let classifier = t.model.classifier.clone();
    let h = t.model.h.clone();
    let encoders = t.model.encoders.clone();
    t.pretrain(&ds).unwrap();
    assert_eq!(t.model.degraders, degraders);
    assert_eq!(t.model.classifier, classifier);
    assert_eq!(t.model.h, h);
    assert_ne!(t.model.encoders, encoders);
    let hist = &t.report.history;
    assert_eq!(hist.len(), 50);
    assert!(hist.last().unwrap().rec < hist[0].rec);
}

#[test]
fn same_seed_same_history() {
    let ds = small_dataset(2, 60);
    let run = || {
        let mut t = Trainer::new(small_config(&ds), schedule(3, 3), &ds).unwrap();
        t.fit(&ds).unwrap();
        t
    };
    let (a, b) = (run(), run());
    assert_eq!(history_json(&a), history_json(&b));
    assert_eq!(a.model.flat_params(), b.model.flat_params());
    assert_eq!(a.model.h, b.model.h);
    assert_eq!(to_bytes(&a).unwrap(), to_bytes(&b).unwrap());
}

#[test]
fn initialize_h_is_the_view_mean_and_repeatable() {
    let ds = small_dataset(3, 40);
    let mut t = Trainer::new(small_config(&ds), schedule(2, 0), &ds).unwrap();
    t.pretrain(&ds).unwrap();
    t.initialize_h(&ds).unwrap();
    let zs = t.model.encode_all(ds.views()).unwrap();
    assert_eq!(t.model.h, init_unified(&zs).unwrap());
    assert_eq!(t.model.h.shape(), (40, 8));
    let first = t.model.h.clone();
    t.initialize_h(&ds).unwrap();
    assert_eq!(t.model.h, first);
}

#[test]
fn zero_joint_epochs_leave_the_initialized_model() {
    let ds = small_dataset(4, 40);
    let mut t = Trainer::new(small_config(&ds), schedule(2, 0), &ds).unwrap();
    t.fit(&ds).unwrap();
    let mut reference = Trainer::new(small_config(&ds), schedule(2, 0), &ds).unwrap();
    reference.pretrain(&ds).unwrap();
    reference.initialize_h(&ds).unwrap();
    assert_eq!(t.model.flat_params(), reference.model.flat_params());
    assert_eq!(t.model.h, reference.model.h);
}

#[test]
fn disabled_terms_reduce_to_reconstruction_training() {
    let ds = small_dataset(5, 60);
    let cfg = ScmrlConfig { lambda1: 0.0, lambda2: 0.0, ..small_config(&ds) };
    let mut t = Trainer::new(cfg, schedule(2, 0), &ds).unwrap();
    t.fit(&ds).unwrap();
    let (degraders, classifier, h) = (t.model.degraders.clone(), t.model.classifier.clone(), t.model.h.clone());
    t.schedule.joint_epochs = 3;
    t.joint_train(&ds).unwrap();
    assert_eq!(t.model.degraders, degraders);
    assert_eq!(t.model.classifier, classifier);
    assert_eq!(t.model.h, h);
    for r in t.report.phase(Phase::Joint) {
        assert_eq!(r.total, r.rec);
        assert!(r.deg > 0.0 && r.sem != 0.0);
    }
}

#[test]
fn recorded_total_is_the_weighted_sum() {
    let ds = small_dataset(6, 70);
    for variant in Variant::ALL {
        let cfg = variant.apply(&ScmrlConfig { lambda1: 0.5, lambda2: 2.0, ..small_config(&ds) });
        let mut t = Trainer::new(cfg.clone(), schedule(1, 3), &ds).unwrap();
        t.fit(&ds).unwrap();
        let w = if cfg.joint_reconstruction { 1.0 } else { 0.0 };
        for r in t.report.phase(Phase::Joint) {
            assert_eq!(r.total, w * r.rec + cfg.lambda1 * r.deg + cfg.lambda2 * r.sem, "{variant}");
        }
    }
}

#[test]
fn short_final_batch_is_skipped() {
    let ds = small_dataset(7, 31);
    let mut t = Trainer::new(small_config(&ds), TrainSchedule { batch_size: 5, ..schedule(0, 1) }, &ds).unwrap();
    t.fit(&ds).unwrap();
    let r = &t.report.history[0];
    assert_eq!((r.batches, r.skipped_batches), (6, 1));
}

#[test]
fn resume_from_checkpoint_is_bit_identical() {
    let ds = small_dataset(8, 50);
    let mut straight = Trainer::new(small_config(&ds), schedule(4, 6), &ds).unwrap();
    straight.fit(&ds).unwrap();

    let mut first = Trainer::new(small_config(&ds), schedule(4, 6), &ds).unwrap();
    first.pretrain(&ds).unwrap();
    first.initialize_h(&ds).unwrap();
    first.joint_epoch(&ds).unwrap();
    first.joint_epoch(&ds).unwrap();
    let bytes = to_bytes(&first).unwrap();
    let mut resumed = from_bytes(&bytes, "mem".as_ref()).unwrap();
    assert_eq!(to_bytes(&resumed).unwrap(), bytes);
    resumed.fit(&ds).unwrap();

    assert_eq!(history_json(&resumed), history_json(&straight));
    assert_eq!(to_bytes(&resumed).unwrap(), to_bytes(&straight).unwrap());
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let ds = small_dataset(9, 30);
    let t = Trainer::new(small_config(&ds), schedule(0, 0), &ds).unwrap();
    let bytes = to_bytes(&t).unwrap();
    let path = std::path::Path::new("ckpt");
    assert!(from_bytes(&bytes[..bytes.len() - 8], path).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert_eq!(from_bytes(&bad, path).unwrap_err().kind(), ErrorKind::Data);
    let mut longer = bytes;
    longer.extend_from_slice(&[0; 8]);
    assert!(from_bytes(&longer, path).is_err());
}

#[test]
fn milestones_follow_the_cadence() {
    let ds = small_dataset(10, 30);
    let mut t = Trainer::new(small_config(&ds), schedule(1, 60), &ds).unwrap();
    let mut seen = Vec::new();
    t.fit_with(&ds, &mut |_, m| {
        seen.push(m);
        Ok(())
    })
    .unwrap();
    assert_eq!(
        seen,
        vec![Milestone::PretrainDone, Milestone::JointEpoch(25), Milestone::JointEpoch(50), Milestone::JointDone]
    );
}

#[test]
fn mismatched_inputs_are_config_errors() {
    let ds = small_dataset(11, 30);
    let mut cfg = small_config(&ds);
    cfg.input_dims = vec![6, 9];
    assert_eq!(Trainer::new(cfg, schedule(1, 1), &ds).unwrap_err().kind(), ErrorKind::Config);
    let small_batch = TrainSchedule { batch_size: 2, ..schedule(1, 1) };
    assert!(Trainer::new(small_config(&ds), small_batch, &ds).is_err());
    let other = small_dataset(12, 31);
    let mut t = Trainer::new(small_config(&ds), schedule(1, 1), &ds).unwrap();
    assert!(t.pretrain_epoch(&other).is_err());
}

use codefusion::eval::workloads::{chase_suite, class_variant, ProgramClass};
use codefusion::eval::{NcfConfig, NcfModel, TaskGraphs, Workload};
use codefusion::ggnn::{load_checkpoint, save_checkpoint};
use codefusion::tracer::{read_trace, write_trace};

#[test]
fn traces_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    for (i, job) in [chase_suite(8, 20, 1).remove(1), class_variant(ProgramClass::Matmul, 0, 2)].into_iter().enumerate() {
        let trace = job.run().unwrap();
        let path = dir.path().join(format!("t{i}.jsonl"));
        write_trace(&trace, &path).unwrap();
        assert_eq!(read_trace(&path).unwrap(), trace);
    }
}

#[test]
fn trained_model_reloads_with_identical_predictions() {
    let job = chase_suite(16, 40, 3).remove(0);
    let trace = job.run().unwrap();
    let mut cfg = NcfConfig::default();
    cfg.train.dim = 8;
    cfg.train.epochs = 1;
    let graphs = TaskGraphs::new(&job.program, 0, cfg.mode, cfg.radius);
    let (model, _) = NcfModel::<f64>::fit(&cfg, &[Workload { graphs: &graphs, events: &trace.events }]).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&path, &model.params, &model.checkpoint_meta()).unwrap();
    let back = NcfModel::<f64>::from_checkpoint(load_checkpoint(&path).unwrap()).unwrap();
    assert_eq!(back.config, model.config);
    assert_eq!(back.params, model.params);
    assert_eq!(back.predict(&graphs, &trace.events).unwrap(), model.predict(&graphs, &trace.events).unwrap());
}

use scenopt::instances::{
    evaluate_solution, generate_mclsp, generate_msmk, generate_stochastic, BaseInstance, Instance, MclspInstance,
    MclspRanges, MsmkRanges, ProblemKind,
};
use scenopt::pipeline::{
    generate_family, make_dataset, reference_solve, run_pipeline, screen, FamilySpec, PipelineConfig, PipelineMode,
    RunStatus, SolveBudget,
};
use scenopt::seqmodel::{FeatureScaling, SeqModel};
use scenopt::solver::{branch_and_bound, build_extensive_form, BnbOptions, FixSet};

/// A model that outputs the same probability for every binary.
fn constant_model(kind: ProblemKind, items: usize, logit: f64) -> SeqModel {
    let mut m = SeqModel::new(FeatureScaling::default_for(kind), items, 4, 0).unwrap();
    m.params.w_out.data.iter_mut().for_each(|w| *w = 0.0);
    m.params.b_out.data.iter_mut().for_each(|b| *b = logit);
    m
}

#[test]
fn perfect_model_limit() {
    // holding is so expensive that producing every period is optimal
    let inst = Instance::Mclsp(MclspInstance {
        items: 2,
        horizon: 3,
        demand: vec![vec![5.0, 6.0, 7.0], vec![3.0, 2.0, 4.0]],
        capacity: vec![20.0; 3],
        setup_cost: vec![vec![1.0; 3]; 2],
        production_cost: vec![vec![1.0; 3]; 2],
        holding_cost: vec![vec![100.0; 3]; 2],
        initial_inventory: vec![0.0; 2],
    });
    let reference = reference_solve(&inst, None).unwrap();
    assert!(reference.binary.iter().flatten().all(|&y| y == 1.0));
    let model = constant_model(ProblemKind::Mclsp, 2, 30.0);
    let out = run_pipeline(0, &inst, &model, &PipelineConfig::default(), &reference).unwrap();
    assert_eq!(out.report.accuracy, 1.0);
    assert_eq!(out.report.fixed_accuracy, Some(1.0));
    assert!(out.report.gap.unwrap().abs() <= 1e-6);
    assert_eq!(out.report.fixed, 6);
}

#[test]
fn confident_optimum_fixes_keep_the_objective() {
    for seed in 0..4 {
        let inst = Instance::Mclsp(generate_mclsp(seed, 2, 4, &MclspRanges::default()).unwrap());
        let ef = build_extensive_form(&inst);
        let reference = reference_solve(&inst, None).unwrap();
        let probs: Vec<Vec<f64>> = reference
            .binary
            .iter()
            .map(|r| r.iter().map(|&y| if y > 0.5 { 0.99 } else { 0.01 }).collect())
            .collect();
        let out = screen(&probs, &inst, &PipelineConfig::default()).unwrap();
        assert_eq!(out.fixes, ef.fixset_from_decisions(&reference.binary));
        let r = branch_and_bound(&ef.model, &out.fixes, None, &BnbOptions::default()).unwrap();
        assert_eq!(r.objective, reference.objective);
    }
}

fn mixed_instances() -> Vec<Instance> {
    let mut out = Vec::new();
    for seed in 0..4u64 {
        out.push(Instance::Mclsp(generate_mclsp(seed, 2, 4, &MclspRanges::default()).unwrap()));
        out.push(Instance::Msmk(generate_msmk(seed, 2, 3, &MsmkRanges::default()).unwrap()));
        let base = generate_mclsp(seed + 10, 2, 3, &MclspRanges::default()).unwrap();
        out.push(Instance::Stochastic(generate_stochastic(BaseInstance::Mclsp(base), &[2, 2], seed).unwrap()));
    }
    out
}

#[test]
fn runs_stay_feasible_for_untrained_models() {
    for (k, inst) in mixed_instances().iter().enumerate() {
        let kind = inst.kind();
        let reference = reference_solve(inst, None).unwrap();
        // random weights, and models that fix everything to 0 or to 1
        let models = [
            SeqModel::new(FeatureScaling::default_for(kind), 2, 4, k as u64).unwrap(),
            constant_model(kind, 2, -30.0),
            constant_model(kind, 2, 30.0),
        ];
        for model in &models {
            for mode in [PipelineMode::Fix, PipelineMode::WarmStart, PipelineMode::FixThenWarmStart] {
                let cfg = PipelineConfig {
                    p_fix: 0.55,
                    mode,
                    ..PipelineConfig::default()
                };
                let out = run_pipeline(k as u64, inst, model, &cfg, &reference).unwrap();
                assert_ne!(out.report.status, RunStatus::Failed);
                let sol = out.solution.unwrap();
                assert!(evaluate_solution(inst, &sol).unwrap().feasible);
                assert!(out.report.gap.unwrap() >= -1e-6);
                if mode == PipelineMode::WarmStart {
                    assert_eq!(out.report.objective, reference.objective);
                }
            }
        }
    }
}

#[test]
fn screening_off_still_recovers_through_fallback() {
    let inst = Instance::Mclsp(generate_mclsp(3, 2, 4, &MclspRanges::default()).unwrap());
    let reference = reference_solve(&inst, None).unwrap();
    let cfg = PipelineConfig {
        screening: false,
        mode: PipelineMode::Fix,
        ..PipelineConfig::default()
    };
    let out = run_pipeline(0, &inst, &constant_model(ProblemKind::Mclsp, 2, -30.0), &cfg, &reference).unwrap();
    assert!(out.report.fallbacks >= 1);
    assert!(out.report.infeasible_before_repair);
    assert!(evaluate_solution(&inst, &out.solution.unwrap()).unwrap().feasible);
}

#[test]
fn larger_instances_go_through_item_expansion() {
    let inst = Instance::Msmk(generate_msmk(1, 5, 2, &MsmkRanges::default()).unwrap());
    let reference = reference_solve(&inst, None).unwrap();
    let model = SeqModel::new(FeatureScaling::default_for(ProblemKind::Msmk), 2, 4, 1).unwrap();
    let out = run_pipeline(0, &inst, &model, &PipelineConfig::default(), &reference).unwrap();
    assert!(evaluate_solution(&inst, &out.solution.unwrap()).unwrap().feasible);
}

#[test]
fn datasets_are_reproducible() {
    let spec = FamilySpec {
        items: 2,
        horizon: 3,
        count: 3,
        seed: 11,
        ..FamilySpec::default()
    };
    let a = make_dataset(&generate_family(&spec).unwrap(), &SolveBudget::default()).unwrap();
    let b = make_dataset(&generate_family(&spec).unwrap(), &SolveBudget::default()).unwrap();
    assert_eq!(a.samples, b.samples);
    assert_eq!(a.optima, b.optima);
    let r = branch_and_bound(
        &build_extensive_form(&a.samples[0].instance).model,
        &FixSet::new(),
        None,
        &BnbOptions::default(),
    )
    .unwrap();
    assert_eq!(r.objective, a.optima[0].objective);
}

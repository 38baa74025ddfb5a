use kslab_core::io::{decode_field, encode_field, parse_reports, reports_to_json, RunConfig};
use kslab_core::particles::simulate;
use kslab_core::pde::PdeSolver;
use kslab_core::verification::{run_cross_check, run_decay_check, RunRecord, Verdict};
use kslab_core::KsError;

const CONFIG: &str = r#"
seed = 5

[model]
d = 2
chi = 0.02
lambda = 1.0
T = 0.2

[rho0]
components = [{ weight = 1.0, mean = [0.1, -0.2], variance = 0.5 }]

[c0]
components = [{ weight = 0.4, mean = [0.0, 0.0], variance = 1.0 }]

[pde]
n = 32
dt = 0.01
scheme = "etd2"
record_every = 10
duhamel = true

[particles]
n = 3000
dt = 0.02
kde_n = 32
backend = "mesh"
record_every = 5
"#;

fn pde_record(c: &RunConfig) -> RunRecord {
    let (problem, cfg) = c.pde_problem(c.pde.as_ref().unwrap()).unwrap();
    let mut solver = PdeSolver::new(problem, cfg).unwrap();
    let mut fields = Vec::new();
    solver.run_recording(c.model.horizon, 10, &mut fields).unwrap();
    let mut record = RunRecord::from_pde(&solver, c.model.horizon, fields);
    record.duhamel_gap = Some(solver.duhamel_gap(Default::default()).unwrap());
    record
}

fn particle_record(c: &RunConfig) -> RunRecord {
    let cfg = c.particle_config(c.particles.as_ref().unwrap()).unwrap();
    let run = simulate(&c.params().unwrap(), &c.rho0(), &c.c0(), &cfg, c.model.horizon).unwrap();
    RunRecord::from_particles(&run, c.identity())
}

#[test]
fn config_to_reports_and_back() {
    let c = RunConfig::from_toml_str(CONFIG).unwrap();
    let hash = c.hash();
    let pde = pde_record(&c);
    assert_eq!(pde.snapshots.len(), 3);
    let particles = particle_record(&c);

    let mut reports = run_decay_check(&pde, &c.params().unwrap(), &c.tolerances, &hash).unwrap();
    reports.extend(run_cross_check(&particles, &pde, &c.tolerances, &hash).unwrap());
    let ids: Vec<&str> = reports.iter().map(|r| r.check_id.as_str()).collect();
    for id in ["decay.script_n_q", "cross.l1.t=0", "cross.l1.t=0.1", "cross.l1.t=0.2", "cross.duhamel_c"] {
        assert!(ids.contains(&id), "{id} missing from {ids:?}");
    }
    assert_eq!(reports.iter().find(|r| r.check_id == "cross.duhamel_c").unwrap().verdict, Verdict::Pass);
    assert!(reports.iter().all(|r| r.run_config_hash == hash));

    let back = parse_reports(&reports_to_json(&reports)).unwrap();
    assert_eq!(back.len(), reports.len());
    for (a, b) in back.iter().zip(&reports) {
        assert_eq!(a.check_id, b.check_id);
        assert_eq!(a.measured.to_bits(), b.measured.to_bits());
        assert_eq!(a.verdict, b.verdict);
    }
}

#[test]
fn same_hash_same_measurements() {
    let a = RunConfig::from_toml_str(CONFIG).unwrap();
    let b = RunConfig::from_toml_str(&a.to_toml_string()).unwrap();
    assert_eq!(a.hash(), b.hash());
    let (ra, rb) = (particle_record(&a), particle_record(&b));
    assert_eq!(ra.final_positions, rb.final_positions);
    for ((ta, fa), (tb, fb)) in ra.snapshots.iter().zip(&rb.snapshots) {
        assert_eq!(encode_field(fa, *ta), encode_field(fb, *tb));
    }
    let (field, t) = decode_field(&encode_field(&ra.snapshots[1].1, ra.snapshots[1].0)).unwrap();
    assert_eq!((t, &field), (ra.snapshots[1].0, &ra.snapshots[1].1));
}

#[test]
fn mismatched_identities_are_rejected() {
    let a = RunConfig::from_toml_str(CONFIG).unwrap();
    let mut b = a.clone();
    b.model.lambda = 0.5;
    let err = run_cross_check(&particle_record(&a), &pde_record(&b), &a.tolerances, &a.hash());
    assert!(matches!(err, Err(KsError::ConfigMismatch(_))));
}

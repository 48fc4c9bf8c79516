use lifespan_core::fd::{fd_solve, FdConfig};
use lifespan_core::picard::{
    certify_with_apriori, estimate_apriori_constants, validate_certificate, ConstantOptions, PicardOptions, PicardSolver,
};
use lifespan_core::{DataFamily, Error, GridSpec, MeanCase};

const P: f64 = 1.5;

#[test]
fn certificates_validate_at_their_limit() {
    let opts = ConstantOptions::default();
    let apriori = estimate_apriori_constants(P, 1.0, &opts).unwrap();
    for fam in [DataFamily::BumpPositiveG, DataFamily::BumpMeanZeroG] {
        let data = fam.data(1.0).unwrap();
        let bound = certify_with_apriori(&data, P, apriori.clone(), &opts).unwrap();
        assert!(bound.eps0 > 0.0 && bound.eps0 < 1e-3, "{fam}: eps0 = {}", bound.eps0);
        let expected = if data.case() == MeanCase::MeanZero { 1.5 } else { 1.0 };
        assert!((bound.t_lower(bound.eps0).unwrap() - expected).abs() < 1e-9);

        let picard = PicardOptions { abs_tol: 0.0, rel_tol: 1e-10, ..Default::default() };
        let report = validate_certificate(&data, &bound, bound.eps0, 0.1, &picard).unwrap();
        assert!(report.trace.converged);
        assert!(report.trace.max_norm() <= report.norm_bound);
        assert!(report.trace.max_ratio().unwrap() <= 0.55, "{:?}", report.trace);

        let trivial = validate_certificate(&data, &bound, 0.0, 0.1, &picard).unwrap();
        assert!(trivial.grid.is_none() && trivial.trace.converged);
        assert!(matches!(
            validate_certificate(&data, &bound, 1e-3, 0.1, &picard),
            Err(Error::OutOfCertificate { .. })
        ));

        let json = serde_json::to_string(&bound).unwrap();
        assert!(json.contains("\"C_big\"") && json.contains("\"eps0\"") && json.contains("\"decay_grid\""));
    }
}

#[test]
fn iterate_norm_is_stable_under_refinement() {
    let data = DataFamily::BumpMeanZeroG.data(1.0).unwrap();
    let opts = PicardOptions { abs_tol: 0.0, rel_tol: 1e-10, ..Default::default() };
    let mut norms = Vec::new();
    for step in [0.1, 0.05] {
        let grid = GridSpec::uniform(step, 4.0, 1.0).unwrap();
        let solver = PicardSolver::new(&data, 1e-3, P, grid).unwrap();
        let (u, trace) = solver.iterate(&opts).unwrap();
        assert!(trace.converged);
        norms.push(solver.norm(&u).unwrap());
    }
    let change = (norms[1] - norms[0]).abs() / norms[1];
    assert!(change <= 0.05, "{norms:?}");
}

#[test]
fn integral_equation_matches_finite_differences() {
    let data = DataFamily::BumpPositiveG.data(1.0).unwrap();
    let eps = 0.05;
    let grid = GridSpec::uniform(0.05, 4.0, 1.0).unwrap();
    let solver = PicardSolver::new(&data, eps, P, grid).unwrap();
    let (u, trace) = solver.iterate(&PicardOptions::default()).unwrap();
    assert!(trace.converged);

    let cfg = FdConfig { dr: 0.01, output_step: Some(0.05), ..Default::default() };
    let fd = fd_solve(&data, eps, P, &cfg, 4.0).unwrap().field.unwrap();
    let mut worst: f64 = 0.0;
    for j in (0..=grid.n_t()).step_by(10) {
        for i in 0..=grid.cone_edge(j) {
            let full = solver.u0().at(i, j) + u.at(i, j);
            worst = worst.max((fd.at(i, j) - full).abs());
        }
    }
    assert!(worst <= 1e-3, "max |fd − (u0 + U)| = {worst:e}");
}

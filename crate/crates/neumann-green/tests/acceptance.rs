//! Acceptance suite: every headline property of the construction, one test per
//! criterion, each printing a pass/fail line. Tolerances are pinned here and in
//! the bundled configurations; nothing is deferred to later calibration.

use neumann_green::coeffs::{make_checkerboard, make_nonsymmetric_system, make_time_oscillatory, CoefficientField};
use neumann_green::config::parse_config;
use neumann_green::estimates::EstimateReport;
use neumann_green::fem::DiscreteSpace;
use neumann_green::green::{build_mollified_green, verify_conservation};
use neumann_green::mesh::{build_interval_mesh, build_polygon_mesh, unit_square, SpaceTimePoint};
use neumann_green::runner::{find_bundled, run_config_into};
use std::sync::Arc;

fn run_bundled(name: &str, tag: &str) -> EstimateReport {
    let cfg = parse_config(find_bundled(name).expect("bundled config").text).expect("parse");
    let dir = std::env::temp_dir().join(format!("ngreen_accept_{tag}"));
    let _ = std::fs::remove_dir_all(&dir);
    run_config_into(&cfg, &dir).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn conclude(criterion: &str, report: &EstimateReport) {
    print!("{}", report.to_text());
    let verdict = if report.all_pass() { "PASS" } else { "FAIL" };
    println!("criterion {criterion}: {verdict}");
    assert!(report.all_pass(), "criterion {criterion} failed:\n{}", report.to_text());
}

fn row(report: &EstimateReport, quantity: &str) -> (f64, bool) {
    let r = report
        .rows
        .iter()
        .find(|r| r.quantity == quantity)
        .unwrap_or_else(|| panic!("missing report row {quantity}"));
    (r.value, r.pass)
}

#[test]
fn criterion_01_parabolic_oracle_equivalence() {
    let report = run_bundled("01_oracle_interval", "c1");
    let (rel, pass) = row(&report, "oracle_rel_linf");
    assert!(pass && rel <= 0.02, "relative sup error {rel}");
    conclude("1 (series-reference equivalence)", &report);
}

#[test]
fn criterion_02_conservation_across_field_families() {
    // every bundled family, including the non-symmetric time-dependent system
    let interval = Arc::new(build_interval_mesh(0.0, 1.0, 96).unwrap());
    let square = Arc::new(build_polygon_mesh(&unit_square(), 0.05).unwrap());
    let cases: Vec<(&str, DiscreteSpace, CoefficientField)> = vec![
        ("interval identity", DiscreteSpace::new(interval.clone(), 1), CoefficientField::identity(1, 1)),
        (
            "interval checkerboard",
            DiscreteSpace::new(interval.clone(), 1),
            make_checkerboard(0.2, 1.0, 4, 1).unwrap(),
        ),
        (
            "interval oscillatory non-symmetric system",
            DiscreteSpace::new(interval.clone(), 2),
            make_time_oscillatory(make_nonsymmetric_system(2, 0.1, 1).unwrap(), 0.2, 7.0).unwrap(),
        ),
        ("square identity", DiscreteSpace::new(square.clone(), 1), CoefficientField::identity(2, 1)),
        ("square checkerboard", DiscreteSpace::new(square.clone(), 1), make_checkerboard(0.2, 1.0, 4, 2).unwrap()),
    ];
    let mut worst_overall = 0.0f64;
    for (label, space, field) in cases {
        let eps = (4.0 * space.mesh.mesh_size).min(0.13);
        let table = build_mollified_green(
            &space,
            &field,
            SpaceTimePoint { x: if space.mesh.dim == 1 { [0.4, 0.0] } else { [0.4, 0.45] }, t: 0.0 },
            eps,
            0.2,
            100,
        )
        .unwrap_or_else(|e| panic!("{label}: {e}"));
        let worst = verify_conservation(&table, 1e-8).unwrap_or_else(|e| panic!("{label}: {e}"));
        println!("  {label}: worst deviation {worst:e}");
        worst_overall = worst_overall.max(worst);
    }
    println!("criterion 2 (conservation, worst {worst_overall:e}): PASS");
    assert!(worst_overall <= 1e-8);
}

#[test]
fn criterion_03_duality_pairing() {
    let report = run_bundled("03_duality_pairs", "c3");
    let (worst, pass) = row(&report, "duality_worst");
    assert!(pass && worst <= 1e-9, "duality discrepancy {worst}");

    // same identity on a rough two-dimensional field
    let text = "
[domain]
kind = square
target_h = 0.05

[field]
family = checkerboard(0.2,1.0,4)

[discretization]
eps = 0.1
tau = 2e-3
horizon = 0.2

[verify]
checks = duality

[output]
seed = 77
workers = 2
";
    let cfg = parse_config(text).unwrap();
    let dir = std::env::temp_dir().join("ngreen_accept_c3b");
    let _ = std::fs::remove_dir_all(&dir);
    let report2 = run_config_into(&cfg, &dir).unwrap();
    let (worst2, pass2) = row(&report2, "duality_worst");
    assert!(pass2 && worst2 <= 1e-9, "2d duality discrepancy {worst2}");
    println!("  interval system worst {worst:e}, square checkerboard worst {worst2:e}");
    conclude("3 (forward/backward pairing)", &report);
}

#[test]
fn criterion_04_gaussian_bound_and_saturation() {
    let report = run_bundled("04_gaussian_checkerboard", "c4");
    let (kappa, kp) = row(&report, "gaussian_kappa_hat");
    assert!(kp, "fitted decay rate {kappa} under the certified rate");
    let (margin, mp) = row(&report, "gaussian_envelope_margin");
    assert!(mp && margin <= 1.02);
    let (growth, gp) = row(&report, "gaussian_saturation_growth");
    assert!(gp && growth >= 1.5, "prefactor kept shrinking: growth {growth}");
    let (smargin, sp) = row(&report, "gaussian_saturation_margin");
    assert!(sp && smargin <= 1.02);

    // identity coefficients: the fitted rate sits near the free-space quarter
    let text = "
[domain]
kind = interval
a = 0
b = 1
cells = 256

[field]
family = identity

[discretization]
eps = 0.015625
tau = 2e-4
horizon = 4.2

[poles]
pole = 0.35, 0.0
pole = 0.6, 0.0

[verify]
checks = gaussian_bound

[output]
seed = 78
workers = 2
";
    let cfg = parse_config(text).unwrap();
    let dir = std::env::temp_dir().join("ngreen_accept_c4b");
    let _ = std::fs::remove_dir_all(&dir);
    let report2 = run_config_into(&cfg, &dir).unwrap();
    let (kappa2, kp2) = row(&report2, "gaussian_kappa_hat");
    assert!(kp2 && kappa2 >= 0.125 && kappa2 <= 0.5, "identity decay rate {kappa2}");
    let (margin2, mp2) = row(&report2, "gaussian_envelope_margin");
    assert!(mp2 && margin2 <= 1.02);
    println!("  checkerboard kappa {kappa:.3}, identity kappa {kappa2:.3}");
    conclude("4 (Gaussian envelope with saturation)", &report);
}

#[test]
fn criterion_05_exponential_weight_machinery() {
    let report = run_bundled("05_davies_interval", "c5");
    let (zero_norm, zp) = row(&report, "davies_zero_weight_norm");
    assert!(zp && zero_norm <= 1.0 + 1e-10);
    for m in ["0.5", "1", "2", "3", "4"] {
        let (_, pass) = row(&report, &format!("davies_norm_m{m}"));
        assert!(pass, "twisted norm exceeded its certified bound at M = {m}");
    }
    let (dual, dp) = row(&report, "davies_duality_defect");
    assert!(dp && dual <= 1e-9);
    conclude("5 (conjugated-evolution growth bounds)", &report);
}

#[test]
fn criterion_06_dyadic_scalings() {
    let report = run_bundled("06_scalings_interval", "c6");
    for q in [
        "scaling_energy_outside",
        "scaling_tilde_distribution",
        "scaling_kernel_lp_local_p1.00",
        "scaling_gradient_lp_local_p1.00",
    ] {
        let (slope, pass) = row(&report, q);
        assert!(pass, "{q} slope {slope} outside its band");
    }
    conclude("6 (local norm and distribution scalings)", &report);
}

#[test]
fn criterion_07_pointwise_and_holder_stability() {
    let report = run_bundled("07_pointwise_stability", "c7");
    let (ps, pp) = row(&report, "pointwise_stability");
    assert!(pp && ps <= 0.15);
    let (hs, hp) = row(&report, "holder_stability");
    assert!(hp && hs <= 0.15);
    let (dev, op) = row(&report, "pointwise_vs_oracle");
    assert!(op && dev <= 0.25);
    conclude("7 (near-pole growth constants)", &report);
}

#[test]
fn criterion_08_condition_constants() {
    let square = run_bundled("08_conditions_square", "c8a");
    let (growth, gp) = row(&square, "embedding_growth");
    assert!(gp && growth <= 0.10);
    let (mu, mp) = row(&square, "interior_holder_mu0");
    assert!(mp && mu > 0.05);
    let (stab, sp) = row(&square, "local_boundedness_stability");
    assert!(sp && stab <= 0.20);
    let (theta, tp) = row(&square, "measure_density_theta");
    let (b1, _) = row(&square, "local_boundedness_b1");
    assert!(tp && theta >= 1.0 / (b1 * b1) - 1e-9, "theta {theta} vs 1/B1^2 {}", 1.0 / (b1 * b1));

    let lshape = run_bundled("08_conditions_lshape", "c8b");
    let (growth_l, gpl) = row(&lshape, "embedding_growth");
    assert!(gpl && growth_l <= 0.10);
    println!("  square gamma growth {growth:.4}, lshape gamma growth {growth_l:.4}");
    conclude("8 (structural condition constants)", &square);
}

#[test]
fn criterion_09_elliptic_neumann_function() {
    let interval = run_bundled("09_elliptic_interval", "c9a");
    let (rel, rp) = row(&interval, "elliptic_oracle_rel_l2");
    assert!(rp && rel <= 0.01);
    let (mean, mp) = row(&interval, "elliptic_mean_defect");
    assert!(mp && mean <= 1e-8);
    let (sym, symp) = row(&interval, "elliptic_symmetry");
    assert!(symp && sym <= 1e-8);
    let (rho_err, rhop) = row(&interval, "poincare_rel_err");
    assert!(rhop && rho_err <= 0.005);

    let square = run_bundled("09_elliptic_square", "c9b");
    let (slope_dev, sp) = row(&square, "elliptic_log_slope_rel");
    assert!(sp && slope_dev <= 0.10, "log slope off by {slope_dev}");
    let (sym2, sym2p) = row(&square, "elliptic_symmetry");
    assert!(sym2p && sym2 <= 1e-8);
    let (rate_dev, ratep) = row(&square, "relaxation_rate");
    assert!(ratep && rate_dev <= 0.15, "relaxation rate off by {rate_dev}");
    let (rho2, rho2p) = row(&square, "poincare_rel_err");
    assert!(rho2p && rho2 <= 0.005);
    for q in ["timebar_ball_l1_slope", "timebar_outside_grad_l2_slope"] {
        let (_, pass) = row(&square, q);
        assert!(pass, "{q} left its band");
    }
    println!("  interval oracle {rel:e}, square log-slope deviation {slope_dev:.3}");
    conclude("9 (elliptic Neumann function)", &square);
}

#[test]
fn criterion_10_deterministic_reports() {
    let cfg = parse_config(find_bundled("10_determinism").unwrap().text).unwrap();
    let dir1 = std::env::temp_dir().join("ngreen_accept_c10_a");
    let dir2 = std::env::temp_dir().join("ngreen_accept_c10_b");
    let _ = std::fs::remove_dir_all(&dir1);
    let _ = std::fs::remove_dir_all(&dir2);
    let r1 = run_config_into(&cfg, &dir1).unwrap();
    let r2 = run_config_into(&cfg, &dir2).unwrap();
    let a = std::fs::read(dir1.join("report.csv")).unwrap();
    let b = std::fs::read(dir2.join("report.csv")).unwrap();
    assert_eq!(a, b, "report bytes differ between identical runs");
    assert!(r1.all_pass());
    let verdict = if a == b && r1.all_pass() && r2.all_pass() { "PASS" } else { "FAIL" };
    println!("criterion 10 (bit-identical reports): {verdict}");
}

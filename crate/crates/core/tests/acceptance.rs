//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! `ACCEPTANCE_ONLY=2,7` restricts the run to the listed criteria.

use std::process::ExitCode;
use std::time::Instant;

use frameop::exec::Exec;
use frameop::geometry::generators;
use frameop::validate::{self, Report};
use frameop::Result;

type Runner = fn() -> Result<Vec<Report>>;

fn one(r: Result<Report>) -> Result<Vec<Report>> {
    r.map(|r| vec![r])
}

fn criteria() -> Vec<(usize, &'static str, Runner)> {
    vec![
        (1, "bilaplacian reduction", || one(validate::bilaplacian_reduction(&generators::disk(0.025)?, Exec::default()))),
        (2, "analytic square spectrum", || one(validate::square_spectrum(&validate::SquareConfig::default(), Exec::default()))),
        (3, "refinement convergence (disk)", || one(validate::refine_spectrum(&validate::RefineConfig::default(), Exec::default()))),
        (4, "KKT oracle equivalence", || one(validate::kkt_equivalence(&[1.0, 0.3, 0.01], 20, 4, Exec::default()))),
        (5, "operator invariants", || one(validate::operator_invariants(&[1.0, 0.3, 0.01], 5, Exec::default()))),
        (6, "tensor properties", || one(validate::tensor_properties(2000, 6))),
        (7, "anisotropy trend", || one(validate::anisotropy(&validate::AnisotropyConfig::default(), Exec::default()))),
        (8, "warp sweep", || one(validate::warp_sweep(&validate::WarpConfig::default(), Exec::default()))),
        (9, "distance metric", || one(validate::distance_properties(1000, 64, 9, Exec::default()))),
        (10, "QP oracle and coloring bounds", || one(validate::qp_oracle(60, 12, 10, Exec::default()))),
        (11, "3D ball convergence", || one(validate::ball_spectrum(&validate::BallConfig::default(), Exec::default()))),
    ]
}

fn main() -> ExitCode {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    for (id, name, run) in criteria() {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(reports) => {
                let ok = reports.iter().all(Report::passed);
                let details: Vec<String> = reports
                    .iter()
                    .flat_map(|r| r.checks.iter())
                    .map(|c| format!("{}{}: {}", if c.passed { "" } else { "FAILED " }, c.name, c.detail))
                    .collect();
                println!("{} criterion {id:>2} {name} [{secs:.1}s]; {}", if ok { "PASS" } else { "FAIL" }, details.join("; "));
                if std::env::var_os("ACCEPTANCE_TABLES").is_some() {
                    for r in &reports {
                        println!("{}", r.table);
                    }
                }
                if !ok {
                    failed += 1;
                }
            }
            Err(e) => {
                println!("FAIL criterion {id:>2} {name} [{secs:.1}s]; error: {e}");
                failed += 1;
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

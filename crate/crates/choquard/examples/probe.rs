// Temporary calibration probe; not part of the deliverable.
use std::sync::Arc;

use choquard::energy::ChoquardParams;
use choquard::grid::{build_grid, grad_sq_integral, l2_sq_integral, DomainSpec};
use choquard::riesz::build_kernel;
use choquard::solver::{eps_sweep, multistart, SolverConfig};
use choquard::{bubbles, diagnostics};

fn main() {
    let t0 = std::time::Instant::now();
    let which = std::env::args().nth(1).unwrap_or_else(|| "annulus".into());

    match which.as_str() {
        "annulus" => {
            let res: u32 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(64);
            let eps: f64 = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(0.1);
            let tol: f64 = std::env::args().nth(4).and_then(|s| s.parse().ok()).unwrap_or(1.5e-4);
            let spec = DomainSpec::annulus(&[0.0, 0.0], 0.4, 1.0, None).unwrap();
            println!("r_margin default = {}", spec.r_margin());
            let grid = build_grid(&spec, res).unwrap();
            println!("grid {:?} interior {}", grid.shape(), grid.interior_count());
            let kernel = build_kernel(&grid, 1.0).unwrap();
            let params = ChoquardParams::subcritical(3, 1.0, 0.0, eps).unwrap();
            let config = SolverConfig {
                seed_count: 8,
                seed_r_scale: Some(8.0),
                grad_tol: tol,
                ..SolverConfig::default()
            };
            let recs = multistart(&grid, &spec, &params, &kernel, &config, &[]).unwrap();
            for r in &recs {
                println!(
                    "E={:.6} bary=({:+.3},{:+.3}) iters={} grad={:.2e} conv={} sup={:.3}",
                    r.energy,
                    r.barycenter[0],
                    r.barycenter[1],
                    r.iterations,
                    r.final_grad_norm,
                    r.converged,
                    r.field.sup_norm()
                );
            }
            let classes = diagnostics::dedup(&recs, &spec, config.dedup_energy_rtol, config.dedup_bary_dist_h * grid.h());
            println!("classes: {}", classes.len());
            for c in &classes {
                println!(
                    "  class E={:.6} members={} bary=({:+.3},{:+.3})",
                    c.representative.energy, c.member_count, c.barycenter[0], c.barycenter[1]
                );
            }
            let consts = bubbles::critical_constants(3, 1.0, 16).unwrap();
            println!(
                "m_eps = {:.4} vs m_star = {:.4}; ratio {:.3}",
                recs[0].energy,
                consts.m_star,
                recs[0].energy / consts.m_star
            );
        }
        "sweep" => {
            let res: u32 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(32);
            let scale: f64 = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(2.4);
            let spec = DomainSpec::annulus(&[0.0, 0.0], 0.4 * scale, 1.0 * scale, None).unwrap();
            let grid = build_grid(&spec, res).unwrap();
            println!("grid {:?} interior {}", grid.shape(), grid.interior_count());
            let kernel = build_kernel(&grid, 1.0).unwrap();
            let params = ChoquardParams::subcritical(3, 1.0, 0.0, 0.5).unwrap();
            let config = SolverConfig {
                seed_count: 2,
                seed_r_scale: Some(8.0 / scale),
                grad_tol: 1.5e-4,
                ..SolverConfig::default()
            };
            let rows = eps_sweep(&grid, &spec, &params, &kernel, &[0.8, 0.4, 0.2, 0.1], &config).unwrap();
            let consts = bubbles::critical_constants(3, 1.0, 16).unwrap();
            for r in &rows {
                println!(
                    "eps={:.2} m={:.5} sup={:.4} bary=({:+.3},{:+.3}) ratio_to_mstar={:.3}",
                    r.eps,
                    r.m_eps,
                    r.sup_norm,
                    r.barycenter[0],
                    r.barycenter[1],
                    r.m_eps / consts.m_star
                );
            }
        }
        "disk" => {
            let res: u32 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(64);
            let eps: f64 = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(0.4);
            let tol: f64 = std::env::args().nth(4).and_then(|s| s.parse().ok()).unwrap_or(1e-5);
            let spec = DomainSpec::ball(&[0.0, 0.0], 1.0, None).unwrap();
            println!("r_margin default = {}", spec.r_margin());
            let grid = build_grid(&spec, res).unwrap();
            let kernel = build_kernel(&grid, 1.0).unwrap();
            let params = ChoquardParams::subcritical(3, 1.0, 0.0, eps).unwrap();
            let config = SolverConfig {
                seed_count: 4,
                seed_r_scale: Some(8.0),
                grad_tol: tol,
                max_iters: 2000,
                ..SolverConfig::default()
            };
            let recs = multistart(&grid, &spec, &params, &kernel, &config, &[]).unwrap();
            for r in &recs {
                println!(
                    "E={:.6} bary=({:+.4},{:+.4}) iters={} grad={:.2e} conv={}",
                    r.energy, r.barycenter[0], r.barycenter[1], r.iterations, r.final_grad_norm, r.converged
                );
            }
            let classes = diagnostics::dedup(&recs, &spec, config.dedup_energy_rtol, config.dedup_bary_dist_h * grid.h());
            println!("classes: {}", classes.len());
            for c in &classes {
                println!(
                    "  class E={:.6} members={} bary=({:+.4},{:+.4})",
                    c.representative.energy, c.member_count, c.barycenter[0], c.barycenter[1]
                );
            }
        }
        "bubble3d" => {
            for r_margin in [0.2f64, 0.45] {
                let spec = DomainSpec::ball(&[0.0, 0.0, 0.0], 1.0, Some(r_margin)).unwrap();
                let grid = build_grid(&spec, 64).unwrap();
                let consts = bubbles::critical_constants(3, 1.0, 16).unwrap();
                println!("r_margin={r_margin} grid {:?}", grid.shape());
                for r_scale in [4.0, 8.0, 16.0] {
                    let u = bubbles::seed_bubble(&grid, &spec, &[0.0, 0.0, 0.0], r_scale).unwrap();
                    let g = grad_sq_integral(&u);
                    let l2 = l2_sq_integral(&u);
                    println!(
                        "  R={r_scale:5.1} grad={g:9.4} (target {:.4}, gap {:+.4}) l2={l2:.6}",
                        consts.grad_u1_sq,
                        g - consts.grad_u1_sq
                    );
                }
            }
        }
        "holes" => {
            let res: u32 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(64);
            let eps: f64 = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(0.4);
            let tol: f64 = std::env::args().nth(4).and_then(|s| s.parse().ok()).unwrap_or(1.5e-4);
            let holes = vec![(vec![-0.35, 0.0], 0.18), (vec![0.35, 0.0], 0.18)];
            let spec = DomainSpec::multi_hole(&[0.0, 0.0], 1.0, &holes, None).unwrap();
            println!("r_margin default = {}", spec.r_margin());
            let grid = build_grid(&spec, res).unwrap();
            println!("grid {:?} interior {}", grid.shape(), grid.interior_count());
            let kernel = build_kernel(&grid, 1.0).unwrap();
            let params = ChoquardParams::subcritical(3, 1.0, 0.0, eps).unwrap();
            let config = SolverConfig {
                seed_count: 8,
                seed_r_scale: Some(8.0),
                grad_tol: tol,
                ..SolverConfig::default()
            };
            let recs = multistart(&grid, &spec, &params, &kernel, &config, &[]).unwrap();
            for r in &recs {
                println!(
                    "E={:.6} bary=({:+.3},{:+.3}) iters={} grad={:.2e} conv={}",
                    r.energy, r.barycenter[0], r.barycenter[1], r.iterations, r.final_grad_norm, r.converged
                );
            }
            let classes = diagnostics::dedup(&recs, &spec, config.dedup_energy_rtol, config.dedup_bary_dist_h * grid.h());
            println!("classes: {}", classes.len());
            for c in &classes {
                println!(
                    "  class E={:.6} members={} bary=({:+.3},{:+.3})",
                    c.representative.energy, c.member_count, c.barycenter[0], c.barycenter[1]
                );
            }
        }
        "path" => {
            let res: u32 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(48);
            let eps: f64 = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(0.4);
            let tol: f64 = std::env::args().nth(4).and_then(|s| s.parse().ok()).unwrap_or(1.2e-3);
            let spec = DomainSpec::annulus(&[0.0, 0.0], 0.4, 1.0, None).unwrap();
            let grid = build_grid(&spec, res).unwrap();
            let kernel = build_kernel(&grid, 1.0).unwrap();
            let params = ChoquardParams::subcritical(3, 1.0, 0.0, eps).unwrap();
            let config = SolverConfig {
                seed_count: 6,
                seed_r_scale: Some(8.0),
                grad_tol: tol,
                ..SolverConfig::default()
            };
            let recs = multistart(&grid, &spec, &params, &kernel, &config, &[]).unwrap();
            let classes = diagnostics::dedup(&recs, &spec, config.dedup_energy_rtol, config.dedup_bary_dist_h * grid.h());
            println!("classes: {}", classes.len());
            for c in classes.iter().take(4) {
                println!(
                    "  E={:.6} bary=({:+.3},{:+.3})",
                    c.representative.energy, c.barycenter[0], c.barycenter[1]
                );
            }
            let a = &classes[0].representative;
            let b = classes
                .iter()
                .map(|c| &c.representative)
                .max_by(|x, y| {
                    let ang = |r: &choquard::SolutionRecord| {
                        let d = r.barycenter[0] * a.barycenter[0] + r.barycenter[1] * a.barycenter[1];
                        let na = (a.barycenter[0] * a.barycenter[0] + a.barycenter[1] * a.barycenter[1]).sqrt();
                        let nr = (r.barycenter[0] * r.barycenter[0] + r.barycenter[1] * r.barycenter[1]).sqrt();
                        (d / (na * nr)).clamp(-1.0, 1.0).acos()
                    };
                    ang(x).total_cmp(&ang(y))
                })
                .unwrap();
            println!(
                "endpoints E=({:.6},{:.6}) baries ({:+.3},{:+.3}) ({:+.3},{:+.3})",
                a.energy, b.energy, a.barycenter[0], a.barycenter[1], b.barycenter[0], b.barycenter[1]
            );
            match choquard::path_minmax(a, b, &params, &kernel, &config).unwrap() {
                choquard::PathOutcome::Candidate(rec, path) => {
                    println!(
                        "CANDIDATE E={:.6} > endpoints; bary=({:+.3},{:+.3}) grad={:.2e} max_idx={}",
                        rec.energy, rec.barycenter[0], rec.barycenter[1], rec.final_grad_norm, path.max_index
                    );
                    println!("path energies: {:?}", path.energies.iter().map(|e| (e * 1e4).round() / 1e4).collect::<Vec<_>>());
                }
                choquard::PathOutcome::Collapsed { reason, path } => {
                    println!("COLLAPSED: {reason}");
                    println!("path energies: {:?}", path.energies.iter().map(|e| (e * 1e4).round() / 1e4).collect::<Vec<_>>());
                }
            }
        }
        "d3d" => {
            let res: u32 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(24);
            let spec = DomainSpec::ball(&[0.0, 0.0, 0.0], 1.0, Some(0.45)).unwrap();
            let grid = build_grid(&spec, res).unwrap();
            println!("grid {:?} interior {}", grid.shape(), grid.interior_count());
            let kernel = build_kernel(&grid, 1.0).unwrap();
            let consts = bubbles::critical_constants(3, 1.0, 16).unwrap();
            let critical = ChoquardParams::critical(3, 1.0, 0.0).unwrap();
            for r_scale in [4.0, 8.0, 16.0] {
                let u = bubbles::seed_bubble(&grid, &spec, &[0.0, 0.0, 0.0], r_scale).unwrap();
                let g = grad_sq_integral(&u);
                let d = choquard::energy::d_term(&u, &critical, &kernel);
                let quot = g / d.powf(1.0 / 5.0);
                println!(
                    "  R={r_scale:5.1} grad={g:9.4} (A={:.3}) d={d:10.3} (B={:.2}) S_quot={quot:.4} (S_HL={:.4})",
                    consts.grad_u1_sq, consts.d_crit_u1, consts.s_hl
                );
            }
        }
        "solve3d" => {
            let res: u32 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(20);
            let eps: f64 = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(0.3);
            let spec = DomainSpec::ball(&[0.0, 0.0, 0.0], 1.0, Some(0.3)).unwrap();
            let grid = build_grid(&spec, res).unwrap();
            println!("grid {:?} interior {} eps {eps}", grid.shape(), grid.interior_count());
            let kernel = build_kernel(&grid, 1.0).unwrap();
            let params = ChoquardParams::subcritical(3, 1.0, 0.0, eps).unwrap();
            let config = SolverConfig {
                seed_count: 1,
                seed_r_scale: Some(4.0),
                ..SolverConfig::default()
            };
            let recs = multistart(&grid, &spec, &params, &kernel, &config, &[]).unwrap();
            let rec = &recs[0];
            println!(
                "E={:.5} iters={} grad={:.2e} conv={} sup={:.3}",
                rec.energy, rec.iterations, rec.final_grad_norm, rec.converged, rec.field.sup_norm()
            );
            let consts = bubbles::critical_constants(3, 1.0, 16).unwrap();
            let critical = ChoquardParams::critical(3, 1.0, 0.0).unwrap();
            let g = grad_sq_integral(&rec.field);
            let d = choquard::energy::d_term(&rec.field, &critical, &kernel);
            let quot = g / d.powf(1.0 / 5.0);
            println!("S_quot={quot:.4} vs S_HL={:.4} (ratio {:.3})", consts.s_hl, quot / consts.s_hl);
        }
        "sweep3d" => {
            let res: u32 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(27);
            let spec = DomainSpec::annulus(&[0.0, 0.0, 0.0], 0.4, 1.0, None).unwrap();
            let grid = build_grid(&spec, res).unwrap();
            println!("grid {:?} interior {}", grid.shape(), grid.interior_count());
            let kernel = build_kernel(&grid, 1.0).unwrap();
            let params = ChoquardParams::subcritical(3, 1.0, 0.0, 0.5).unwrap();
            let config = SolverConfig {
                seed_count: 3,
                seed_r_scale: Some(6.0),
                grad_tol: 2e-4,
                max_iters: 400,
                ..SolverConfig::default()
            };
            let rows = eps_sweep(&grid, &spec, &params, &kernel, &[0.8, 0.4, 0.2, 0.1], &config).unwrap();
            let consts = bubbles::critical_constants(3, 1.0, 16).unwrap();
            for r in &rows {
                println!(
                    "eps={:.2} m={:.5} sup={:.4} conv={} ratio_to_mstar={:.3}",
                    r.eps,
                    r.m_eps,
                    r.sup_norm,
                    r.converged,
                    r.m_eps / consts.m_star
                );
            }
        }
        other => eprintln!("unknown probe {other}"),
    }
    eprintln!("elapsed: {:.1?}", t0.elapsed());
}

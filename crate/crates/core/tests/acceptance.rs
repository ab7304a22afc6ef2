//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Pass criterion numbers (e.g. `c2 c5`) to run a subset.

mod common;

use common::{combinatorial_bp, partial_fourier, random_mat, random_vec, sparse_vec, tiny_instance};
use rand::Rng;
use sparse_music::analysis::*;
use sparse_music::forward::{assemble_data, farfield_pair, DataMode, SensingPair};
use sparse_music::harness::*;
use sparse_music::linalg::{matvec, mul_adjoint, singular_values, spectral_norm, CMat, C64};
use sparse_music::music::{decompose, imaging_function, threshold_support, RankRule, ThresholdRule};
use sparse_music::scene::{draw_directions, draw_scene, DirectionKind, Grid, Incidence, Scene};
use sparse_music::solvers::{bpdn_error_constants, bpdn_solve, verify_bpdn_bound, BpdnOptions, SparseProblem};
use sparse_music::spectral::{draw_model, exact_covariances, identify_frequencies};
use std::f64::consts::{PI, SQRT_2};
use std::time::Instant;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

/// Far-field instance on a Rayleigh-spaced lattice with coincident incidence.
fn planar_instance(side: usize, n: usize, s: usize, seed: u64) -> (Scene, SensingPair, CMat) {
    let g = Grid::planar(side, SQRT_2 * PI).unwrap();
    let sc = draw_scene(&g, s, (1.0, 2.0), seed).unwrap();
    let kind = DirectionKind::PlanarFourier { wavenumber: 1.0, incidence: Incidence::Coincident };
    let sch = draw_directions(n, &kind, seed ^ 0x77).unwrap();
    let pair = farfield_pair(&g, &sc, &sch).unwrap().with_support(&sc.support).unwrap();
    let y = assemble_data(&pair, &sc, DataMode::Born).unwrap().y;
    (sc, pair, y)
}

fn rate(outcomes: &[TrialOutcome]) -> f64 {
    outcomes.iter().filter(|o| o.exact).count() as f64 / outcomes.len() as f64
}

fn c1() -> Verdict {
    let mut lines = Vec::new();
    let mut pass = true;
    for n in [10, 15, 20] {
        let c = ExperimentConfig { n, s: n - 1, trials: 100, sigma: 0.0, ..Default::default() };
        let exact = run_point(&c).unwrap().iter().filter(|o| o.exact).count();
        pass &= exact == 100;
        lines.push(format!("n={n}: {exact}/100"));
    }
    verdict(pass, lines.join(", "))
}

fn c2() -> Verdict {
    let s = 2;
    let (mut certified, mut recovered) = (0, 0);
    let mut seed = 0;
    while certified < 120 && seed < 600 {
        seed += 1;
        let (sc, pair, y) = planar_instance(6, 20, s, seed);
        let rs = ric_bruteforce(&pair.phi_ext, s).unwrap().max(&ric_bruteforce(&pair.psi_ext, s).unwrap());
        let rs1 = ric_bruteforce(&pair.phi_ext, s + 1).unwrap();
        let Ok(l) = gamma_lower_bound(&rs, &rs1) else { continue };
        let Ok(margin) = delta_margin(l) else { continue };
        let xi_min = sc.xi_min().unwrap();
        let xi_max = sc.xi_max().unwrap();
        let probe = NsrInputs {
            epsilon: 0.0,
            delta_plus_s: rs.delta_plus,
            delta_minus_s: rs.delta_minus,
            margin,
            xi_min,
            xi_max,
            zeta_min: 1.0,
            zeta_max: 1.0,
        };
        let bound = nsr_admissible(&probe, NsrCase::Nsr).bound;
        if !(bound > 0.0) {
            continue;
        }
        // Noise at a random fraction of the admissible level.
        let frac = 0.05 + 0.9 * sparse_music::rng::rng(seed).random::<f64>();
        let e0 = random_mat(20, 20, seed + 5000);
        let e = &e0 * C64::new(frac * bound * xi_min / spectral_norm(&e0), 0.0);
        let check = nsr_admissible(&NsrInputs { epsilon: spectral_norm(&e), ..probe }, NsrCase::Nsr);
        if !check.satisfied {
            continue;
        }
        certified += 1;
        let dec = decompose(&(&y + &e), RankRule::Fixed(s)).unwrap();
        let img = imaging_function(&dec, &pair).unwrap();
        let rule = ThresholdRule::Ric { delta_minus_s1: rs1.delta_minus, delta_plus_s: rs.delta_plus };
        if threshold_support(&img, rule).is_ok_and(|supp| supp == sc.support) {
            recovered += 1;
        }
    }
    verdict(certified >= 100 && recovered == certified, format!("{recovered}/{certified} certified instances recovered exactly (N=36)"))
}

fn c3() -> Verdict {
    let (mut applicable, mut held) = (0, 0);
    let mut worst: f64 = 0.0;
    for seed in 0..300u64 {
        if applicable >= 120 {
            break;
        }
        let (_, _, y) = planar_instance(6, 10, 3, seed);
        let e0 = random_mat(10, 10, seed + 7);
        let t0 = 1e-4;
        let r0 = perturbation_check(&y, &(&e0 * C64::new(t0, 0.0)), 3).unwrap().rho;
        let target = 0.01 + 0.2 * sparse_music::rng::rng(seed).random::<f64>();
        let e = &e0 * C64::new(t0 * target / r0, 0.0);
        let r = perturbation_check(&y, &e, 3).unwrap();
        if !r.bounds_applicable {
            continue;
        }
        applicable += 1;
        if r.subspace_distance <= r.distance_bound * (1.0 + 1e-9) + 1e-12 && r.bounds_hold {
            held += 1;
        }
        worst = worst.max(r.subspace_distance / r.distance_bound);
    }
    verdict(
        applicable >= 100 && held == applicable,
        format!("{held}/{applicable} instances with ρ < ρ* within the distance bound (max ratio {worst:.3})"),
    )
}

fn c4() -> Verdict {
    let mut viol = [0usize; 4];
    let mut count = [0usize; 4];
    for seed in 0..100u64 {
        let m = common::gaussian_unit(6, 12, seed);
        let rep = mutual_coherence(&m).unwrap();
        for r in [2, 3] {
            let b = ric_coherence_bound(&rep, r);
            let exact = ric_bruteforce(&m, r).unwrap();
            count[0] += 1;
            if b.delta_plus < exact.delta_plus - 1e-12 || b.delta_minus < exact.delta_minus - 1e-12 {
                viol[0] += 1;
            }
        }
    }
    for seed in 0..120u64 {
        let s = 2;
        let (sc, pair, y) = planar_instance(6, 16, s, seed);
        let rs = ric_bruteforce(&pair.phi_ext, s).unwrap().max(&ric_bruteforce(&pair.psi_ext, s).unwrap());
        let rs1 = ric_bruteforce(&pair.phi_ext, s + 1).unwrap();
        if let Ok(l) = gamma_lower_bound(&rs, &rs1) {
            count[1] += 1;
            if gamma_exact(&pair, &sc.support, None).unwrap().gamma < l - 1e-12 {
                viol[1] += 1;
            }
        }
        let sv = singular_values(&y);
        if let Ok(b) = sigma_min_bound(BoundCase::Scattering { xi: sc.xi_min().unwrap(), delta: rs.delta_minus }) {
            count[2] += 1;
            if sv[s - 1] * sv[s - 1] < b * (1.0 - 1e-12) {
                viol[2] += 1;
            }
        }
        let e = random_mat(16, 16, seed + 900) * C64::new(10f64.powf(-3.0 + 2.0 * (seed % 5) as f64 / 4.0), 0.0);
        let cal_e = mul_adjoint(&e, &y) + mul_adjoint(&y, &e) + mul_adjoint(&e, &e);
        let b = error_term_bound(spectral_norm(&e), BoundCase::Scattering { xi: sc.xi_max().unwrap(), delta: rs.delta_plus }).unwrap();
        count[3] += 1;
        if spectral_norm(&cal_e) > b * (1.0 + 1e-12) {
            viol[3] += 1;
        }
    }
    let pass = count.iter().all(|&c| c >= 100) && viol.iter().all(|&v| v == 0);
    verdict(
        pass,
        format!(
            "coherence RIC {}/{}, Γ lower bound {}/{}, σ_min {}/{}, ‖ℰ‖ {}/{} violations",
            viol[0], count[0], viol[1], count[1], viol[2], count[2], viol[3], count[3]
        ),
    )
}

fn c5() -> Verdict {
    let opts = BpdnOptions::default();
    let (mut exact_ok, mut bound_ok, mut oracle_ok, mut certified) = (0, 0, 0, 0);
    let mut worst_obj: f64 = 0.0;
    for seed in 0..100u64 {
        let a = tiny_instance(seed);
        let k = bpdn_error_constants(&ric_bruteforce(&a, 2).unwrap());
        if !k.condition_met {
            continue;
        }
        certified += 1;
        let (z, _) = sparse_vec(12, 1, seed);
        let y = matvec(&a, &z);
        let p = SparseProblem::new(a.clone(), y.clone(), 0.0).unwrap();
        let sol = bpdn_solve(&p, &opts).unwrap();
        if (&sol.z_hat - &z).norm() <= 1e-6 {
            exact_ok += 1;
        }
        let (_, oobj) = combinatorial_bp(&a, &y, 3).unwrap();
        worst_obj = worst_obj.max((sol.objective - oobj).abs());
        if (sol.objective - oobj).abs() <= 1e-6 {
            oracle_ok += 1;
        }
        let mut zc = random_vec(12, seed + 40);
        for (j, v) in zc.iter_mut().enumerate() {
            *v *= 0.5f64.powi(j as i32 + 1);
        }
        zc[(seed % 12) as usize] = C64::new(3.0, 1.0);
        let eps = 0.05;
        let e = random_vec(8, seed + 80);
        let yn = matvec(&a, &zc) + e.scale(eps / e.norm());
        let pn = SparseProblem::new(a, yn, eps).unwrap();
        let soln = bpdn_solve(&pn, &opts).unwrap();
        if verify_bpdn_bound(&pn, &soln, &zc, &k, 1).satisfied {
            bound_ok += 1;
        }
    }
    let pass = certified >= 100 && exact_ok == certified && bound_ok == certified && oracle_ok == certified;
    verdict(
        pass,
        format!(
            "{certified} certified: exact {exact_ok}, noisy bound {bound_ok}, oracle objective {oracle_ok} (max gap {worst_obj:.1e})"
        ),
    )
}

fn c6() -> Verdict {
    let base = ExperimentConfig { geometry: Geometry { side: 30, ..Default::default() }, trials: 100, ..Default::default() };
    let ns = [10, 15, 20, 25, 30];
    let at = |aperture: f64, method: Method| -> Vec<usize> {
        let c = ExperimentConfig { geometry: Geometry { aperture, ..base.geometry.clone() }, ..base.clone() };
        recoverable_sparsity(&c, &ns, method).unwrap().iter().map(|p| p.s_max).collect()
    };
    let pts = |v: &[usize]| -> Vec<(f64, f64)> { ns.iter().zip(v).map(|(&n, &s)| (n as f64, s as f64)).collect() };
    let music = at(100.0, Method::Music);
    let full = at(100.0, Method::BpdnFullMatrix);
    let single = at(100.0, Method::BpdnSingleColumn);
    let music_u = at(10.0, Method::Music);
    let full_u = at(10.0, Method::BpdnFullMatrix);
    let line = music.iter().zip(&ns).all(|(&s, &n)| s == n - 1);
    let exponent = loglog_slope(&pts(&full)).unwrap_or(0.0);
    let single_slope = linear_slope(&pts(&single)).unwrap_or(f64::INFINITY);
    let music_slope = linear_slope(&pts(&music)).unwrap_or(0.0);
    let under = music_u.iter().zip(&full_u).all(|(m, b)| m > b);
    verdict(
        line && exponent > 1.5 && single_slope < music_slope && under,
        format!(
            "MUSIC {music:?}; full BPDN {full:?} exponent {exponent:.2}; single-column {single:?} slope {single_slope:.2} vs {music_slope:.2}; A=10 MUSIC {music_u:?} vs BPDN {full_u:?}"
        ),
    )
}

fn c7() -> Verdict {
    let base = ExperimentConfig { n: 100, s: 10, trials: 200, ..Default::default() };
    let well = rate(&run_point(&ExperimentConfig { sigma: 1.0, ..base.clone() }).unwrap());
    let under_cfg = ExperimentConfig { sigma: 0.05, geometry: Geometry { aperture: 10.0, ..Default::default() }, ..base };
    let under = rate(&run_point(&under_cfg).unwrap());
    let ns = [50.0, 100.0, 150.0, 200.0, 250.0, 300.0];
    let curve = success_curve(&under_cfg, Axis::Sensors, &ns).unwrap();
    let tail: Vec<f64> = curve.rates()[ns.len() - 3..].to_vec();
    let spread = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let plateau = spread <= 0.05 && tail.iter().all(|&r| r < 1.0);
    verdict(
        well >= 0.95 && under < well && plateau,
        format!(
            "A=100 σ=1: {:.1}% (need ≥ 95%); A=10 σ=0.05: {:.1}%; A=10 n-sweep {:?}",
            100.0 * well,
            100.0 * under,
            curve.rates().iter().map(|r| (r * 1000.0).round() / 10.0).collect::<Vec<_>>()
        ),
    )
}

fn c8() -> Verdict {
    let mut ok = 0;
    for seed in 0..100 {
        let model = draw_model(64, 4, 24, 1, seed).unwrap();
        let found: Vec<Vec<usize>> = [0.0, 1.0, 100.0]
            .iter()
            .map(|&var| identify_frequencies(&model, &exact_covariances(&model, var)).map(|e| e.indices).unwrap_or_default())
            .collect();
        if found.iter().all(|f| *f == model.support) {
            ok += 1;
        }
    }
    verdict(ok == 100, format!("{ok}/100 frequency sets recovered for σ ∈ {{0, 1, 10}}"))
}

fn c9() -> Verdict {
    let medians: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| {
            let m = partial_fourier(n, 256, 2024 + n as u64);
            let ds: Vec<f64> =
                ric_sampled(&m, 4, 50, n as u64).unwrap().iter().map(|r| r.delta_plus.max(r.delta_minus)).collect();
            quantile(&ds, 0.5).unwrap()
        })
        .collect();
    let pass = medians.windows(2).all(|w| w[1] < w[0]);
    verdict(pass, format!("median δ₄ for n = 16, 32, 64: {:.3?}", medians))
}

fn main() {
    let checks: [(&str, &str, fn() -> Verdict); 9] = [
        ("c1", "noiseless optimal recovery", c1),
        ("c2", "threshold soundness on certified instances", c2),
        ("c3", "perturbation bounds", c3),
        ("c4", "bound domination", c4),
        ("c5", "BPDN guarantees", c5),
        ("c6", "recoverable-sparsity orderings", c6),
        ("c7", "noise sensitivity", c7),
        ("c8", "spectral estimation", c8),
        ("c9", "partial-Fourier RIP trend", c9),
    ];
    let wanted: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).map(|a| a.to_lowercase()).collect();
    let mut failed = 0;
    for (id, name, check) in checks {
        if !wanted.is_empty() && !wanted.iter().any(|w| w == id) {
            continue;
        }
        let t = Instant::now();
        let v = check();
        failed += usize::from(!v.pass);
        println!("{} {} {name}: {} [{:.1?}]", if v.pass { "PASS" } else { "FAIL" }, id.to_uppercase(), v.detail, t.elapsed());
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line with its
//! worst residual and wall time; the test fails if any criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tightframe::charfun::{instantiate_example, OmegaChain, OmegaExample};
use tightframe::descriptor::{parse_descriptor, sha256_hex, SystemArtifact};
use tightframe::emit::emit_figure1;
use tightframe::filters::{verify_uep_matrix, SamplingPlan, DEFAULT_SEED};
use tightframe::frame::{
    cyclic_gram, fiberization_both_sides, frame_operator, identity_defect, parseval_residual, random_test_function,
    telescoping_residual, windowed_gram, Family, FrameSystem, GenId, DEFAULT_WINDOW,
};
use tightframe::lattice::DiagLattice;
use tightframe::numeric::{int, C64};
use tightframe::sequence::Sequence;
use tightframe::tiles::{tile_iterate, tile_measure_estimate, tile_selfsimilarity_check, TileSpec};
use tightframe::{Elem, GroupSpec, LatticeChain};

struct Outcome {
    pass: bool,
    detail: String,
}

fn bspline_z(m: u32, order: u32) -> FrameSystem {
    FrameSystem::build(LatticeChain::dyadic_integers(m).unwrap(), Family::BSpline { order }, 0, m as usize).unwrap()
}

/// L_0 = 0, L_k = 2^{k-1} below the top, L_M = 2^M - 1.
fn proper_levels(m: u32) -> Vec<i64> {
    (0..=m).map(|k| if k == 0 { 0 } else if k == m { (1 << m) - 1 } else { 1 << (k - 1) }).collect()
}

fn charfun_cyclic(m: u32, shannon: bool) -> FrameSystem {
    let chain = LatticeChain::dyadic_cyclic(m).unwrap();
    let family = if shannon {
        Family::CharFun { omega: OmegaChain::shannon(&chain).unwrap(), example: None }
    } else {
        let ex = OmegaExample::Cyclic(proper_levels(m));
        Family::CharFun { omega: instantiate_example(&chain, &ex).unwrap(), example: Some(ex) }
    };
    FrameSystem::build(chain, family, 0, m as usize).unwrap()
}

fn charfun_torus(shannon: bool) -> FrameSystem {
    let chain = LatticeChain::torus_sequence(&[2, 3, 2]).unwrap();
    let family = if shannon {
        Family::CharFun { omega: OmegaChain::shannon(&chain).unwrap(), example: None }
    } else {
        let ex = OmegaExample::Torus(vec![0, 2, 5]);
        Family::CharFun { omega: instantiate_example(&chain, &ex).unwrap(), example: Some(ex) }
    };
    FrameSystem::build(chain, family, 0, 2).unwrap()
}

fn matrix_systems() -> Vec<(String, FrameSystem)> {
    let mut out = Vec::new();
    for m in [3, 10] {
        for n in [1, 2, 4] {
            out.push((format!("Z M={m} N={n}"), bspline_z(m, n)));
        }
    }
    for m in [3, 6] {
        for shannon in [false, true] {
            out.push((format!("Z_{} {}", 1 << m, if shannon { "shannon" } else { "proper" }), charfun_cyclic(m, shannon)));
        }
    }
    for shannon in [false, true] {
        out.push((format!("T [2,3,2] {}", if shannon { "shannon" } else { "proper" }), charfun_torus(shannon)));
    }
    out
}

fn criterion_uep() -> Outcome {
    let plan = SamplingPlan::default();
    let mut worst: f64 = 0.0;
    let mut min_samples = usize::MAX;
    let mut all_exhaustive_on_finite = true;
    for (_, sys) in matrix_systems() {
        for k in sys.k0..sys.k1 {
            let r = verify_uep_matrix(&sys.uep_matrix(k).unwrap(), &plan).unwrap();
            worst = worst.max(r.residual);
            if sys.chain.dual().is_discrete() {
                all_exhaustive_on_finite &= r.exhaustive;
            } else {
                min_samples = min_samples.min(r.samples);
            }
        }
    }
    Outcome {
        pass: worst <= 1e-12 && all_exhaustive_on_finite && min_samples >= 4096 + 1024,
        detail: format!("max residual {worst:.3e}, continuous samples per level >= {min_samples}"),
    }
}

fn criterion_refinement() -> Outcome {
    let plan = SamplingPlan::default();
    let mut worst: f64 = 0.0;
    for (_, sys) in matrix_systems() {
        for k in sys.k0..sys.k1 {
            worst = worst.max(sys.refinement_report(k, &plan).unwrap().residual);
        }
    }
    Outcome { pass: worst <= 1e-12, detail: format!("max residual {worst:.3e}") }
}

fn random_c(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n).map(|_| C64::new(rng.gen(), rng.gen())).collect()
}

fn criterion_fiberization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for n in [8i64, 16] {
        let group = GroupSpec::FiniteCyclic { modulus: n };
        let divisors: Vec<i64> = (1..=n).filter(|s| n % s == 0).collect();
        for _ in 0..50 {
            let step = divisors[rng.gen_range(0..divisors.len())];
            let lattice = DiagLattice::new(group.primal(), vec![int(step)]).unwrap();
            let v = tightframe::Domain::interval(0, n / step - 1);
            let f = Sequence::on_cyclic(n, random_c(&mut rng, n as usize));
            let phi = Sequence::on_cyclic(n, random_c(&mut rng, n as usize));
            let (l, r) = fiberization_both_sides(&group, &lattice, &v, &f, &phi).unwrap();
            worst = worst.max((l - r).abs() / (1.0 + l));
            count += 1;
        }
    }
    Outcome { pass: worst <= 1e-12, detail: format!("{count} triples, max |lhs - rhs|/(1 + lhs) {worst:.3e}") }
}

fn criterion_telescoping() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    for sys in [bspline_z(3, 2), charfun_cyclic(3, true)] {
        for _ in 0..20 {
            let f = random_test_function(&sys, &mut rng, DEFAULT_WINDOW).unwrap();
            for k in sys.k0..sys.k1 {
                worst = worst.max(telescoping_residual(&sys, k, &f).unwrap());
            }
        }
    }
    Outcome { pass: worst <= 1e-12, detail: format!("max residual {worst:.3e}") }
}

fn criterion_parseval() -> Outcome {
    let mut worst_s: f64 = 0.0;
    for m in 1..=6 {
        for shannon in [false, true] {
            if !shannon && m < 2 {
                // a proper subset needs a level with at least two frequencies
                continue;
            }
            worst_s = worst_s.max(identity_defect(&frame_operator(&charfun_cyclic(m, shannon)).unwrap()));
        }
    }
    let mut worst_p: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    for n in [1, 2, 4] {
        let sys = bspline_z(10, n);
        for _ in 0..100 {
            let f = random_test_function(&sys, &mut rng, DEFAULT_WINDOW).unwrap();
            worst_p = worst_p.max(parseval_residual(&sys, &f).unwrap());
        }
    }
    Outcome {
        pass: worst_s <= 1e-12 && worst_p <= 1e-10,
        detail: format!("max |S - I| {worst_s:.3e} on Z_2..Z_64; max relative Parseval residual {worst_p:.3e} on Z, M=10"),
    }
}

fn criterion_onb() -> Outcome {
    let haar = bspline_z(6, 1);
    let (elems, gram) = windowed_gram(&haar, 0, 63).unwrap();
    let haar_defect = (gram - nalgebra::DMatrix::<f64>::identity(elems.len(), elems.len())).abs().max();
    let mut norm_defect: f64 = 0.0;
    for id in haar.generator_ids() {
        norm_defect = norm_defect.max((haar.time_generator(id).unwrap().norm_sq().sqrt() - 1.0).abs());
    }
    let mut shannon_defect: f64 = 0.0;
    for m in [3, 6] {
        shannon_defect = shannon_defect.max(identity_defect(&cyclic_gram(&charfun_cyclic(m, true)).unwrap()));
    }
    Outcome {
        pass: elems.len() == 64 && haar_defect <= 1e-12 && norm_defect <= 1e-12 && shannon_defect <= 1e-12,
        detail: format!(
            "Haar: {} elements in [0, 63], |G - I| {haar_defect:.3e}, norms {norm_defect:.3e}; Shannon Gram |G - I| {shannon_defect:.3e}",
            elems.len()
        ),
    }
}

/// Triangle of length 2n - 1 scaled by n^{-3/2}: the order-2 generator with n-point blocks.
fn triangle(n: i64, x: i64) -> f64 {
    if x < 0 || x > 2 * n - 2 {
        return 0.0;
    }
    (x + 1).min(2 * n - 1 - x) as f64 * (n as f64).powf(-1.5)
}

fn criterion_figure() -> Outcome {
    let sys = bspline_z(10, 2);
    let files = emit_figure1(&sys, "acceptance", "0x5EED").unwrap();
    // level 6 blocks hold 16 points; the mask shift is 16
    let (n, shift) = (16i64, 16i64);
    let masks: [(f64, [f64; 3]); 2] = [(0.5, [1.0, 0.0, -1.0]), (8f64.powf(-0.5), [1.0, -2.0, 1.0])];
    let predicted = tightframe::bspline::predicted_wavelet_support(&sys.chain, 5, 2).unwrap();
    let mut ok = files.len() == 2 && predicted == 63;
    let mut details = Vec::new();
    for (f, (scale, mask)) in files.iter().zip(masks) {
        let rows: Vec<(i64, f64)> = f
            .contents
            .lines()
            .filter(|l| !l.starts_with('#'))
            .skip(1)
            .map(|l| {
                let c: Vec<&str> = l.split(',').collect();
                (c[0].parse().unwrap(), c[1].parse().unwrap())
            })
            .collect();
        let nonzero: Vec<i64> = rows.iter().filter(|(_, v)| *v != 0.0).map(|(x, _)| *x).collect();
        let support = (*nonzero.first().unwrap(), *nonzero.last().unwrap());
        let direct: Vec<f64> = (0..63)
            .map(|x| scale * mask.iter().enumerate().map(|(j, c)| c * triangle(n, x - j as i64 * shift)).sum::<f64>())
            .collect();
        let direct_norm = direct.iter().map(|v| v * v).sum::<f64>().sqrt();
        let norm = rows.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        let m0: f64 = rows.iter().map(|(_, v)| v).sum();
        let m1: f64 = rows.iter().map(|(x, v)| *x as f64 * v).sum();
        ok &= support == (0, predicted - 1) && m0.abs() <= 1e-12 && (norm - direct_norm).abs() <= 1e-12;
        let mut mirror_defect: f64 = 0.0;
        if f.name.contains("psi2") {
            // palindromic mask on a symmetric triangle
            let value = |x: i64| rows.iter().find(|(y, _)| *y == x).map_or(0.0, |(_, v)| *v);
            mirror_defect = (0..=62).map(|x| (value(x) - value(62 - x)).abs()).fold(0.0, f64::max);
            ok &= m1.abs() <= 1e-10 && mirror_defect <= 1e-15;
        }
        details.push(format!(
            "{}: support [{}, {}], sum {m0:.1e}, first moment {m1:.1e}, norm diff {:.1e}, mirror defect {mirror_defect:.1e}",
            f.name,
            support.0,
            support.1,
            (norm - direct_norm).abs()
        ));
    }
    Outcome { pass: ok, detail: details.join("; ") }
}

fn criterion_tiles() -> Outcome {
    let specs = [TileSpec::twin_dragon(), TileSpec::new([[0, 2], [-1, 0]], [1, 0]).unwrap()];
    let mut ok = true;
    for spec in &specs {
        for r in 1..=16 {
            ok &= tile_selfsimilarity_check(spec, r).unwrap();
        }
    }
    let q = tile_iterate(&specs[0], 16).unwrap();
    let m = tile_measure_estimate(&q, 1.0 / 64.0).unwrap();
    let q2 = tile_iterate(&specs[1], 16).unwrap();
    let m2 = tile_measure_estimate(&q2, 1.0 / 64.0).unwrap();
    ok &= q.len() == 1 << 16 && (m.estimate - 1.0).abs() <= 0.15;
    Outcome {
        pass: ok,
        detail: format!(
            "self-similar r=1..16 for both; twin dragon |Q|={} estimate {:.4} (overlap share {:.3}); second matrix estimate {:.4} (overlap share {:.3})",
            q.len(),
            m.estimate,
            m.violation_fraction,
            m2.estimate,
            m2.violation_fraction
        ),
    }
}

fn criterion_negative_controls() -> Outcome {
    let mut haar = bspline_z(3, 1);
    haar.zero_wavelet(0, 1).unwrap();
    let at_zero = haar.uep_matrix(0).unwrap().residual_at(&Elem::int(0)).unwrap();
    let mut shannon = charfun_cyclic(3, true);
    shannon.zero_wavelet(1, 1).unwrap();
    let s_defect = identity_defect(&frame_operator(&shannon).unwrap());

    // zero the filter in a stored artifact and run the binary
    let text = r#"{"group":{"variant":"integers"},"M":3,"family":{"bspline":{"order":1}}}"#;
    let d = parse_descriptor(text).unwrap();
    let art = SystemArtifact::from_system(&d.build().unwrap(), &d, &sha256_hex(text.as_bytes())).unwrap();
    let mut json: serde_json::Value = serde_json::from_str(&art.to_json()).unwrap();
    for c in json["levels"][0]["g"][0]["coeffs"].as_array_mut().unwrap() {
        *c = serde_json::json!([0.0, 0.0]);
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corrupted.json");
    std::fs::write(&path, serde_json::to_string(&json).unwrap()).unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_tightframe"))
        .args(["verify", "--suite", "uep", "--out"])
        .arg(dir.path().join("report.json"))
        .arg("--system")
        .arg(&path)
        .output()
        .unwrap()
        .status
        .code();
    Outcome {
        pass: at_zero >= 1.0 && s_defect >= 0.1 && status == Some(1),
        detail: format!("UEP residual at 0: {at_zero:.3}; |S - I| {s_defect:.3}; verify exit code {status:?}"),
    }
}

#[test]
fn acceptance_criteria() {
    let criteria: Vec<(&str, fn() -> Outcome, Duration)> = vec![
        ("1 UEP matrix certificates", criterion_uep, Duration::from_secs(5)),
        ("2 refinement identity", criterion_refinement, Duration::from_secs(2)),
        ("3 fiberization", criterion_fiberization, Duration::from_secs(1)),
        ("4 telescoping", criterion_telescoping, Duration::from_secs(2)),
        ("5 Parseval and frame operator", criterion_parseval, Duration::from_secs(30)),
        ("6 orthonormal bases", criterion_onb, Duration::MAX),
        ("7 level-5 wavelet structure", criterion_figure, Duration::MAX),
        ("8 tile algorithm", criterion_tiles, Duration::from_secs(10)),
        ("9 negative controls", criterion_negative_controls, Duration::MAX),
    ];
    let mut failures = Vec::new();
    for (name, run, budget) in criteria {
        let t = Instant::now();
        let out = run();
        let elapsed = t.elapsed();
        let in_time = elapsed <= budget;
        let pass = out.pass && in_time;
        let budget_text = if budget == Duration::MAX { String::new() } else { format!(" / budget {:.0} s", budget.as_secs_f64()) };
        println!(
            "criterion {name}: {} ({:.2} s{budget_text}) {}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            out.detail
        );
        if !pass {
            failures.push(name);
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}

#[test]
fn generator_ids_cover_the_system() {
    let sys = bspline_z(3, 2);
    assert_eq!(sys.generator_ids()[0], GenId { k: 0, m: 0 });
    assert_eq!(sys.generator_ids().len(), 7);
}

//! Acceptance battery. Each test prints one `criterion N: PASS|FAIL ...` line
//! and fails when its criterion fails. Run with `--nocapture` to see them.

use std::sync::OnceLock;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use quasilocal_core::embedding::{
    align, embed_axisymmetric, embed_general, embed_geodesic_sphere, gauss_map, EmbeddedSurface,
    GeneralOptions, Lorentz, PrincipalData, Strategy,
};
use quasilocal_core::flows::{
    barrier_ode, decay_exponent, gauge_deviation, killing_norm_rescaled, killing_transport_residual, solve_u,
    solve_w_scalar, FlowOptions, USolution,
};
use quasilocal_core::foliation::{riccati_oracle, Foliation, Schedule};
use quasilocal_core::grid::{max_abs, max_abs_diff, LatLonGrid};
use quasilocal_core::mass::{fit_constant, identity_check, LimitCheck};
use quasilocal_core::minkowski::FourVector;
use quasilocal_core::pipeline::{run, PipelineConfig, PipelineOutput};
use quasilocal_core::spinor::{zeta, zeta_clifford, CliffordRep, Spinor};
use quasilocal_core::surface::{HSource, Preset, SurfaceSpec};

fn report(n: u32, pass: bool, detail: String) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} failed: {detail}");
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>().join(" ")
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale
}

fn random_spinor(rng: &mut ChaCha8Rng) -> Spinor {
    let mut c = || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    Spinor::new(c(), c())
}

fn spec(p: Preset, n: usize, h: HSource) -> SurfaceSpec {
    SurfaceSpec::from_preset(p, LatLonGrid::new(n, n).unwrap(), h).unwrap()
}

/// A sphere embedding whose principal data is replaced by a random admissible
/// field: g = Σ ω^a⊗ω^a, h = Σ λ_a ω^a⊗ω^a with λ_a > κ.
fn random_principal_field(rng: &mut ChaCha8Rng, kappa: f64) -> EmbeddedSurface {
    let mut es = embed_geodesic_sphere(1.0, kappa, LatLonGrid::new(8, 8).unwrap()).unwrap();
    for p in 0..es.len() {
        let w = [[rng.random_range(0.5..2.0), rng.random_range(-0.5..0.5)], [rng.random_range(-0.5..0.5), rng.random_range(0.5..2.0)]];
        let lam = [kappa * rng.random_range(1.02..4.0), kappa * rng.random_range(1.02..4.0)];
        let mut g = [0.0; 3];
        let mut h = [0.0; 3];
        for a in 0..2 {
            let o = w[a];
            for (c, (i, j)) in [(0, 0), (0, 1), (1, 1)].iter().enumerate() {
                g[c] += o[*i] * o[*j];
                h[c] += lam[a] * o[*i] * o[*j];
            }
        }
        for c in 0..3 {
            es.metric[c][p] = g[c];
            es.h[c][p] = h[c];
        }
        es.principal[p] = PrincipalData::from_forms(g, h);
    }
    es
}

#[test]
fn criterion_1_foliation_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for field in 0..20 {
        let kappa = rng.random_range(0.3..2.0);
        let es = random_principal_field(&mut rng, kappa);
        let fol = Foliation::new(&es).unwrap();
        let radii: Vec<f64> = (0..=20).map(|i| i as f64 * 0.25 / kappa).collect();
        for p in 0..es.len() {
            let g0 = [es.metric[0][p], es.metric[1][p], es.metric[2][p]];
            let h0 = [es.h[0][p], es.h[1][p], es.h[2][p]];
            let oracle = riccati_oracle(g0, h0, kappa, &radii, 2e-4 / kappa).unwrap();
            for st in &oracle {
                let f = fol.frame_at(st.r).unwrap();
                let g = f.metric();
                let gs = (g[0][p] * g[2][p]).sqrt();
                let rr_oracle = 2.0 * (st.lambda[0] * st.lambda[1] - kappa * kappa);
                let errs = [
                    rel(f.lam[p][0], st.lambda[0], st.lambda[0]),
                    rel(f.lam[p][1], st.lambda[1], st.lambda[1]),
                    rel(f.h0[p], st.lambda[0] + st.lambda[1], st.lambda[0] + st.lambda[1]),
                    rel(f.rr[p], rr_oracle, rr_oracle.abs()),
                    rel(g[0][p], st.g[0], st.g[0]),
                    rel(g[1][p], st.g[1], gs),
                    rel(g[2][p], st.g[2], st.g[2]),
                ];
                let e = errs.iter().cloned().fold(0.0, f64::max);
                assert!(e.is_finite(), "field {field} node {p} r {}", st.r);
                worst = worst.max(e);
            }
        }
    }
    let es = embed_axisymmetric(&spec(Preset::Spheroid { a: 1.0, c: 0.8 }, 32, HSource::ReferenceScaled { scale: 1.0 }), 1.0)
        .unwrap();
    let mut far: f64 = 0.0;
    for kappa in [0.5, 1.0, 2.0] {
        let mut es = es.clone();
        if kappa != 1.0 {
            es = embed_geodesic_sphere(1.0, kappa, LatLonGrid::new(16, 16).unwrap()).unwrap();
        }
        let f = Foliation::new(&es).unwrap().frame_at(10.0 / kappa).unwrap();
        far = far.max(f.h0.iter().map(|h| (h - 2.0 * kappa).abs()).fold(0.0, f64::max));
    }
    report(
        1,
        worst < 1e-8 && far < 1e-6,
        format!("max relative error vs Riccati oracle {worst:.3e} (< 1e-8), max |H0 - 2 kappa| at 10/kappa {far:.3e} (< 1e-6)"),
    );
}

#[test]
fn criterion_2_algebraic_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut ident: f64 = 0.0;
    for _ in 0..100_000 {
        let u = rng.random_range(0.2..5.0);
        let kappa = rng.random_range(0.1..3.0);
        let rr = rng.random_range(-2.0..10.0) * kappa * kappa;
        ident = ident.max(identity_check(u, rr, kappa).abs());
    }
    let rep = CliffordRep::default();
    let mut zdiff: f64 = 0.0;
    for _ in 0..1000 {
        let a = random_spinor(&mut rng);
        let (z1, z2) = (zeta(&a), zeta_clifford(&a, &rep));
        zdiff = zdiff.max((z1 - z2).max_abs() / a.norm_sq());
    }
    let grid = LatLonGrid::new(16, 16).unwrap();
    let sphere = embed_geodesic_sphere(1.0, 1.0, grid).unwrap();
    let spheroid = spec(Preset::Spheroid { a: 1.0, c: 0.8 }, 16, HSource::ReferenceScaled { scale: 1.0 });
    let axi = embed_axisymmetric(&spheroid, 1.0).unwrap();
    let gen = embed_general(&spheroid, 1.0, &GeneralOptions::default(), None).unwrap();
    let mut null: f64 = 0.0;
    for es in [&sphere, &axi, &gen] {
        assert!(es.certified);
        for g in gauss_map(es) {
            null = null.max(g.norm_sq().abs() / (g.t * g.t));
        }
    }
    let fol = Foliation::new(&axi).unwrap();
    let radii: Vec<f64> = (0..=40).map(|i| i as f64 * 0.2).collect();
    let mut barrier: f64 = 0.0;
    for f0 in [0.6, 0.95, 1.05, 1.3] {
        barrier = barrier.max(barrier_ode(&fol, &radii, f0, 4).unwrap().ode_residual());
    }
    report(
        2,
        ident < 1e-11 && zdiff < 1e-12 && null < 1e-8 && barrier < 1e-10,
        format!("identity {ident:.3e} (< 1e-11), zeta forms {zdiff:.3e} (< 1e-12), gamma0 null {null:.3e} (< 1e-8), barrier ODE {barrier:.3e} (< 1e-10)"),
    );
}

fn spheroid_embedding(n: usize) -> EmbeddedSurface {
    embed_axisymmetric(&spec(Preset::Spheroid { a: 1.0, c: 0.8 }, n, HSource::ReferenceScaled { scale: 1.0 }), 1.0)
        .unwrap()
}

/// Max relative deviation of the u ≡ 1 scalar transport from the Killing norm.
fn killing_error(es: &EmbeddedSurface, a: &Spinor) -> f64 {
    let fol = Foliation::new(es).unwrap();
    let sched = Schedule::blended(es.kappa, 1.0, 8.0 / es.kappa, 64).unwrap();
    let usol = USolution::identity(es.grid, &sched, &es.mean_curvature());
    let term = killing_norm_rescaled(&fol.limit_frame(), a);
    let w = solve_w_scalar(&fol, &usol, &term, &FlowOptions::default()).unwrap();
    let mut err: f64 = 0.0;
    for k in 0..sched.len() {
        let exact = killing_norm_rescaled(&fol.frame_at_s(sched.s[k], sched.r[k]), a);
        err = err.max(max_abs_diff(&exact, &w.w_tilde[k]) / max_abs(&exact));
    }
    err
}

#[test]
fn criterion_3_killing_transport() {
    let a = Spinor::new(Complex64::new(0.3, -1.1), Complex64::new(0.7, 0.45));
    // (area-weighted rms, max) over three leaves
    let res: Vec<(f64, f64)> = [16, 32, 64, 128]
        .iter()
        .map(|&n| {
            let es = spheroid_embedding(n);
            let fol = Foliation::new(&es).unwrap();
            let mut out = (0.0f64, 0.0f64);
            for s in [0.9, 0.5, 0.1] {
                let r = killing_transport_residual(&fol, &es, s, &a);
                let sd = fol.frame_at_s(s, -s.ln() / (2.0 * es.kappa)).sd_tilde;
                let sq: Vec<f64> = r.iter().map(|v| v * v).collect();
                let rms = (es.grid.integrate(&sq, &sd) / es.grid.integrate(&vec![1.0; r.len()], &sd)).sqrt();
                out = (out.0.max(rms), out.1.max(max_abs(&r)));
            }
            out
        })
        .collect();
    let order = |f: fn(&(f64, f64)) -> f64| -> Vec<f64> { res.windows(2).map(|w| (f(&w[0]) / f(&w[1])).log2()).collect() };
    let rms_orders = order(|r| r.0);
    // pointwise, the lat-lon finite volume stencil is only first order in the pole rows
    let max_orders = order(|r| r.1);
    let e64 = killing_error(&spheroid_embedding(64), &a);
    let e128 = killing_error(&spheroid_embedding(128), &a);
    let rms: Vec<f64> = res.iter().map(|r| r.0).collect();
    report(
        3,
        rms_orders.iter().all(|o| *o >= 1.9) && e64 < 1e-4 && e128 < 1e-5,
        format!(
            "residual rms {} orders {rms_orders:.3?} (>= 1.9), max-norm orders {max_orders:.3?}, transport error 64: {e64:.3e} (< 1e-4), 128: {e128:.3e} (< 1e-5)",
            fmt_list(&rms)
        ),
    );
}

#[test]
fn criterion_4_decay_rates() {
    let mut lines = Vec::new();
    let mut pass = true;
    for (label, p, kappa) in [
        ("sphere", Preset::RoundSphere { radius: 1.0 }, 1.0),
        ("spheroid", Preset::Spheroid { a: 1.0, c: 0.8 }, 1.0),
        ("spheroid", Preset::Spheroid { a: 1.0, c: 0.8 }, 0.5),
    ] {
        let s = spec(p, 32, HSource::ReferenceScaled { scale: 0.9 });
        let mut cfg = PipelineConfig::new(kappa, Strategy::Axisymmetric);
        cfg.flow.certificate = false;
        let (_, fol) = quasilocal_core::pipeline::embed_and_foliate(&s, &cfg).unwrap();
        let calh0: Vec<f64> = Foliation::new(&embed_axisymmetric(&s, kappa).unwrap())
            .unwrap()
            .frame_at(0.0)
            .unwrap()
            .h0
            .iter()
            .map(|h| 0.9 * h)
            .collect();
        let u = solve_u(&fol, &calh0, &cfg.schedule(&s).unwrap(), &cfg.flow).unwrap();
        let r = &u.schedule.r;
        let hi = u.schedule.r_max();
        let a = decay_exponent(r, &u.sup_deviation(), 2.0 / kappa, hi).unwrap();
        let g = decay_exponent(r, &gauge_deviation(&fol, &u).a_minus_identity, 2.0 / kappa, hi).unwrap();
        pass &= (2.9 * kappa..=3.1 * kappa).contains(&a) && g >= 2.8 * kappa;
        lines.push(format!("{label} kappa {kappa}: |u-1| {:.4} kappa, |A-I| {:.4} kappa", a / kappa, g / kappa));
    }
    let s = spec(Preset::Spheroid { a: 1.0, c: 0.8 }, 16, HSource::ReferenceScaled { scale: 0.9 });
    let mut prev: Option<Vec<f64>> = None;
    let mut diffs = Vec::new();
    for steps in [100, 200, 400, 800] {
        let mut cfg = PipelineConfig::new(1.0, Strategy::Axisymmetric);
        cfg.flow.certificate = false;
        cfg.steps = steps;
        let (es, fol) = quasilocal_core::pipeline::embed_and_foliate(&s, &cfg).unwrap();
        let calh0: Vec<f64> = es.mean_curvature().iter().map(|h| 0.9 * h).collect();
        let u = solve_u(&fol, &calh0, &cfg.schedule(&s).unwrap(), &cfg.flow).unwrap();
        if let Some(p) = &prev {
            diffs.push(max_abs_diff(p, u.v_infty()));
        }
        prev = Some(u.v_infty().to_vec());
    }
    let ratios: Vec<f64> = diffs.windows(2).map(|w| w[1] / w[0]).collect();
    pass &= ratios.iter().all(|r| *r <= 0.35);
    report(4, pass, format!("{}; v_infty Cauchy ratios {ratios:.3?} (<= 0.35)", lines.join("; ")));
}

struct Case {
    label: String,
    out: PipelineOutput,
    /// ℋ ≤ H₀(·, 0) at every node.
    below: bool,
    /// ℋ = H₀(·, 0) at every node.
    equal: bool,
}

/// The monotonicity/limit/positivity cases at Nθ = Nψ = 64.
fn cases() -> &'static [Case] {
    static CASES: OnceLock<Vec<Case>> = OnceLock::new();
    CASES.get_or_init(|| {
        let n = 64;
        let mut list: Vec<(String, Preset, f64, HSource, Strategy)> = Vec::new();
        let sphere = Preset::RoundSphere { radius: 1.0 };
        for kappa in [0.5, 1.0, 2.0] {
            list.push((
                format!("sphere kappa={kappa} H=2"),
                sphere,
                kappa,
                HSource::Riemannian { h: vec![2.0; n * n] },
                Strategy::ClosedForm,
            ));
            list.push((
                format!("sphere kappa={kappa} H=0.9 H0"),
                sphere,
                kappa,
                HSource::ReferenceScaled { scale: 0.9 },
                Strategy::ClosedForm,
            ));
        }
        let spheroid = Preset::Spheroid { a: 1.0, c: 0.8 };
        let euclid = SurfaceSpec::preset_euclidean_h(&spheroid, &LatLonGrid::new(n, n).unwrap()).unwrap();
        list.push(("spheroid H=euclidean".into(), spheroid, 1.0, HSource::Riemannian { h: euclid }, Strategy::Axisymmetric));
        list.push(("spheroid H=0.9 H0".into(), spheroid, 1.0, HSource::ReferenceScaled { scale: 0.9 }, Strategy::Axisymmetric));
        list.push(("spheroid H=H0".into(), spheroid, 1.0, HSource::ReferenceScaled { scale: 1.0 }, Strategy::Axisymmetric));
        list.into_iter()
            .map(|(label, p, kappa, h, strat)| {
                let s = spec(p, n, h);
                let mut cfg = PipelineConfig::new(kappa, strat);
                cfg.flow.certificate = false;
                let out = run(&s, &cfg).unwrap();
                let h0 = out.embedded.mean_curvature();
                let below = out.calh0.iter().zip(&h0).all(|(c, h)| *c <= *h);
                let equal = out.calh0.iter().zip(&h0).all(|(c, h)| (c - h).abs() <= 1e-14 * h);
                Case { label, out, below, equal }
            })
            .collect()
    })
}

#[test]
fn criterion_5_monotonicity() {
    let mut worst = f64::NEG_INFINITY;
    let mut lines = Vec::new();
    let mut pass = true;
    for c in cases().iter().filter(|c| !c.equal) {
        let m = &c.out.report.monotonicity;
        pass &= m.pass;
        worst = worst.max(m.max_increment);
        lines.push(format!("{}: {:.2e}", c.label, m.max_increment));
    }
    let limited: usize = cases().iter().map(|c| c.out.w.components.iter().map(|w| w.limited_nodes).sum::<usize>()).sum();
    report(
        5,
        pass,
        format!("largest forward difference {worst:.3e} (<= 1e-6 (1+|m|)); limited W nodes {limited}; {}", lines.join(", ")),
    );
}

#[test]
fn criterion_6_limit_consistency() {
    let cs: Vec<&Case> = cases().iter().filter(|c| !c.equal).collect();
    let constants: Vec<f64> = cs.iter().map(|c| c.out.report.limit_constant.constant).collect();
    let mean = constants.iter().sum::<f64>() / constants.len() as f64;
    let spread = constants.iter().map(|c| (c - mean).abs() / mean).fold(0.0, f64::max);
    let all: Vec<LimitCheck> = cs.iter().flat_map(|c| c.out.report.directions.iter().map(|d| d.limit)).collect();
    let global = fit_constant(&all);
    report(
        6,
        spread < 0.02 && global.max_residual < 0.05,
        format!(
            "constants {constants:.6?}; spread {spread:.3e} (< 2%); global constant {:.8} residual {:.3e} (< 5%)",
            global.constant, global.max_residual
        ),
    );
}

#[test]
fn criterion_7_positivity() {
    let mut pass = true;
    let mut lines = Vec::new();
    for c in cases() {
        let em = &c.out.report.energy_momentum;
        if c.equal {
            let m0 = c.out.report.directions.iter().map(|d| d.m[0].abs()).fold(0.0, f64::max);
            let scale = m0.max(em.scale);
            let ok = em.p.max_abs() <= 1e-8 * scale.max(1.0);
            pass &= ok;
            lines.push(format!("{}: |P| {:.2e}", c.label, em.p.max_abs()));
        } else if c.below {
            let ok = em.class.is_future_causal() && em.uniform_sign;
            pass &= ok;
            lines.push(format!("{}: {} P.t {:.4e} uniform {}", c.label, em.class, em.p.t, em.uniform_sign));
        } else {
            lines.push(format!("{}: not below H0, skipped", c.label));
        }
    }
    report(7, pass, lines.join("; "));
}

#[test]
fn criterion_8_small_kappa() {
    let kappas = [0.4, 0.2, 0.1, 0.05];
    let pt: Vec<f64> = kappas
        .iter()
        .map(|&k| {
            let s = spec(Preset::RoundSphere { radius: 1.0 }, 32, HSource::Riemannian { h: vec![2.0; 32 * 32] });
            let mut cfg = PipelineConfig::new(k, Strategy::ClosedForm);
            cfg.flow.certificate = false;
            run(&s, &cfg).unwrap().report.energy_momentum.p.t
        })
        .collect();
    let taylor = |k: f64| 2.0 * ((1.0 + k * k).sqrt() - 1.0);
    let mut pass = pt.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0);
    let mut ratios = Vec::new();
    for i in 0..3 {
        let got = pt[i] / pt[i + 1];
        let want = taylor(kappas[i]) / taylor(kappas[i + 1]);
        pass &= (got / want - 1.0).abs() < 0.1;
        ratios.push(format!("{got:.4}/{want:.4}"));
    }
    report(8, pass, format!("P.t {} decreasing; ratios computed/analytic {}", fmt_list(&pt), ratios.join(", ")));
}

#[test]
fn criterion_9_embedding_certification() {
    let es = spheroid_embedding(128);
    let defect128 = es.defect;
    let s = spec(Preset::Spheroid { a: 1.0, c: 0.8 }, 16, HSource::ReferenceScaled { scale: 1.0 });
    let axi = embed_axisymmetric(&s, 1.0).unwrap();
    // start away from the answer: boost and rotate it, then add a smooth bump
    let l = Lorentz::from_generators(&[0.2, -0.1, 0.3, 0.15, -0.2, 0.1]);
    let init: Vec<FourVector> = axi
        .grid
        .nodes()
        .map(|(i, j, th, ps)| {
            let x = l.apply(&axi.x[axi.grid.idx(i, j)]);
            let f = 1.0 + 0.05 * th.sin() * th.sin() * ps.cos() + 0.03 * th.cos();
            let (a, b, c) = (x.x1 * f, x.x2 * f, x.x3 * f);
            FourVector::new(a, b, c, (1.0 + a * a + b * b + c * c).sqrt())
        })
        .collect();
    let gen = embed_general(&s, 1.0, &GeneralOptions::default(), Some(&init)).unwrap();
    let al = align(&gen.x, &axi.x);
    report(
        9,
        defect128 < 1e-6 && gen.certified && al.aligned_defect < 1e-4,
        format!(
            "axisymmetric defect at 128: {defect128:.3e} (< 1e-6); general from perturbed start: defect {:.3e}, aligned defect {:.3e} (< 1e-4)",
            gen.defect, al.aligned_defect
        ),
    );
}

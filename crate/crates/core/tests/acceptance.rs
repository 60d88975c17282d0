//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so the lines always appear in the test log. Set
//! `PERQWALK_BLESS=1` to rewrite the golden file instead of comparing.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use perqwalk::attractors::{
    asymptotic_marginal, asymptotic_marginal_pure, asymptotic_state, build_basis, dimension_report,
    fastpath_marginal_pure, find_common_eigenstates_numeric, general_attractor_basis, verify_common_eigenstate,
    AsymptoticDecomposition, StateSource,
};
use perqwalk::channel::{apply_by_enumeration, sample_config};
use perqwalk::cli::validate::random_density;
use perqwalk::evolution::{evolve_exact, evolve_mc, evolve_unitary, evolve_until_converged, ConvergenceOptions};
use perqwalk::linalg::{self, c64};
use perqwalk::{
    analytic, Boundary, CoinOperator, DensityOperator, EdgeConfiguration, Error, LatticeSpec, PercolationChannel,
    PercolationModel, PositionDistribution, Site, StateVector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Outcome = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn coins() -> [CoinOperator; 3] {
    [CoinOperator::hadamard2d(), CoinOperator::grover(), CoinOperator::fourier()]
}

fn variants(m: usize, n: usize) -> Vec<LatticeSpec> {
    let b = [Boundary::Periodic, Boundary::Open];
    b.iter().flat_map(|&bs| b.iter().map(move |&bt| LatticeSpec::new(m, n, bs, bt).unwrap())).collect()
}

fn channel(spec: LatticeSpec, coin: CoinOperator, p: f64) -> PercolationChannel {
    PercolationChannel::new(spec, coin, PercolationModel::new(p).unwrap())
}

fn random_coin(rng: &mut impl Rng) -> [c64; 4] {
    std::array::from_fn(|_| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

fn random_product(spec: &LatticeSpec, rng: &mut impl Rng) -> StateVector {
    let site = Site::new(rng.random_range(0..spec.m()), rng.random_range(0..spec.n()));
    let coin = random_coin(rng);
    let norm = coin.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    StateVector::localized(spec, site, coin.map(|z| z / norm)).unwrap()
}

fn random_pure(d: usize, rng: &mut impl Rng) -> StateVector {
    let amps = (0..d).map(|_| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    StateVector::normalized(amps).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed <= limit, || format!("took {elapsed:.1?}, limit {limit:?}"))
}

fn err(e: Error) -> String {
    e.to_string()
}

fn dimension_table() -> Outcome {
    let start = Instant::now();
    let h = CoinOperator::hadamard2d;
    let g = CoinOperator::grover;
    let f = CoinOperator::fourier;
    let table: [(LatticeSpec, CoinOperator, usize); 9] = [
        (LatticeSpec::carpet(4, 4).unwrap(), h(), 101),
        (LatticeSpec::torus(4, 3).unwrap(), h(), 26),
        (LatticeSpec::torus(3, 4).unwrap(), h(), 50),
        (LatticeSpec::torus(3, 3).unwrap(), h(), 10),
        (LatticeSpec::carpet(3, 3).unwrap(), g(), 257),
        (LatticeSpec::torus(3, 3).unwrap(), g(), 101),
        (LatticeSpec::torus(4, 4).unwrap(), g(), 325),
        (LatticeSpec::carpet(3, 3).unwrap(), f(), 17),
        (LatticeSpec::torus(3, 3).unwrap(), f(), 1),
    ];
    let mut got = Vec::new();
    for (spec, coin, expect) in table {
        let name = format!("{spec} {}", coin.name());
        let report = dimension_report(&channel(spec, coin, 0.5)).map_err(err)?;
        ensure(report.numeric_count == expect, || format!("{name}: numeric {} != {expect}", report.numeric_count))?;
        ensure(report.analytic_count == Some(expect), || {
            format!("{name}: closed form {:?} != {expect}", report.analytic_count)
        })?;
        got.push(report.numeric_count.to_string());
    }
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("counts {} in {:.1?}", got.join("/"), start.elapsed()))
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let spec = LatticeSpec::carpet(3, 3).unwrap();
    let mut worst: f64 = 0.0;
    for coin in coins() {
        let ch = channel(spec, coin, 0.5);
        for _ in 0..5 {
            let rho = random_density(spec.dim(), &mut rng);
            let fast = ch.apply(&rho).map_err(err)?;
            let slow = apply_by_enumeration(&ch, &rho).map_err(err)?;
            worst = worst.max(fast.max_abs_diff(&slow));
        }
    }
    ensure(worst <= 1e-12, || format!("max element difference {worst:.3e}"))?;
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!("{} edges, max diff {worst:.2e} in {:.1?}", spec.num_edges(), start.elapsed()))
}

fn asymptotics_vs_dynamics() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_dyn, mut worst_fast): (f64, f64) = (0.0, 0.0);
    let mut max_steps = 0;
    for spec in variants(3, 3).into_iter().chain(variants(4, 3)) {
        for coin in coins() {
            let name = format!("{spec} {}", coin.name());
            let ch = channel(spec, coin, 0.5);
            let basis = build_basis(&ch, StateSource::Auto).map_err(err)?;
            let psi0 = random_product(&spec, &mut rng);
            let rho0 = DensityOperator::pure(&psi0);
            let conv = evolve_until_converged(&ch, &rho0, ConvergenceOptions::default()).map_err(err)?;
            ensure(conv.converged, || format!("{name}: no convergence after {} steps", conv.steps))?;
            max_steps = max_steps.max(conv.steps);
            let dynamic = conv.rho.position_marginal(&spec).map_err(err)?;
            let formula = asymptotic_marginal(&basis, &rho0, conv.steps as u64).map_err(err)?;
            let d = formula.l1_distance(&dynamic);
            ensure(d <= 1e-6, || format!("{name}: asymptotic vs converged L1 {d:.3e}"))?;
            worst_dyn = worst_dyn.max(d);
            if basis.completeness().allows_fastpath() {
                let decomp = AsymptoticDecomposition::from_basis(&basis);
                let fast = fastpath_marginal_pure(&decomp, &ch, &psi0).map_err(err)?;
                let pure = asymptotic_marginal_pure(&basis, &psi0, conv.steps as u64).map_err(err)?;
                let d = fast.l1_distance(&pure);
                ensure(d <= 1e-10, || format!("{name}: fast vs full formula L1 {d:.3e}"))?;
                worst_fast = worst_fast.max(d);
            } else {
                return Err(format!("{name}: completeness {} not certified", basis.completeness()));
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!(
        "24 instances, L1 vs dynamics {worst_dyn:.2e} (<= {max_steps} steps), fast vs full {worst_fast:.2e} in {:.1?}",
        start.elapsed()
    ))
}

fn stationarity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let specs = variants(3, 3).into_iter().chain(variants(4, 3)).chain([LatticeSpec::torus(4, 4).unwrap()]);
    for spec in specs {
        for coin in coins() {
            let name = format!("{spec} {}", coin.name());
            let ch = channel(spec, coin, 0.5);
            let basis = build_basis(&ch, StateSource::Auto).map_err(err)?;
            let rho0 = random_density(spec.dim(), &mut rng);
            for t in [0, 1, 7] {
                let rho = asymptotic_state(&basis, &rho0, t).map_err(err)?;
                let before = rho.position_marginal(&spec).map_err(err)?;
                let after = ch.apply(&rho).map_err(err)?.position_marginal(&spec).map_err(err)?;
                let d = before.l1_distance(&after);
                ensure(d <= 1e-8, || format!("{name} t={t}: marginal moved by {d:.3e}"))?;
                worst = worst.max(d);
            }
        }
    }
    Ok(format!("max marginal change {worst:.2e}"))
}

fn p_independence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst, mut worst_dyn): (f64, f64) = (0.0, 0.0);
    for spec in variants(3, 3) {
        for coin in coins() {
            let name = format!("{spec} {}", coin.name());
            let rho0 = random_density(spec.dim(), &mut rng);
            let mut marginals = Vec::new();
            for p in [0.1, 0.5, 0.9] {
                let ch = channel(spec, coin.clone(), p);
                let basis = general_attractor_basis(&ch).map_err(err)?;
                let formula = asymptotic_marginal(&basis, &rho0, 0).map_err(err)?;
                let conv = evolve_until_converged(&ch, &rho0, ConvergenceOptions::default()).map_err(err)?;
                ensure(conv.converged, || format!("{name} p={p}: no convergence after {} steps", conv.steps))?;
                let d = asymptotic_marginal(&basis, &rho0, conv.steps as u64)
                    .map_err(err)?
                    .l1_distance(&conv.rho.position_marginal(&spec).map_err(err)?);
                ensure(d <= 1e-6, || format!("{name} p={p}: formula vs dynamics L1 {d:.3e}"))?;
                worst_dyn = worst_dyn.max(d);
                marginals.push(formula);
            }
            for i in 0..3 {
                for j in i + 1..3 {
                    let d = marginals[i].l1_distance(&marginals[j]);
                    ensure(d <= 1e-10, || format!("{name}: p-pair ({i},{j}) L1 {d:.3e}"))?;
                    worst = worst.max(d);
                }
            }
            for p in [0.0, 1.0] {
                let r = build_basis(&channel(spec, coin.clone(), p), StateSource::Auto);
                ensure(matches!(r, Err(Error::DegenerateProbability { .. })), || {
                    format!("{name}: p = {p} was not rejected")
                })?;
            }
        }
    }
    Ok(format!(
        "max pairwise L1 over p = 0.1/0.5/0.9 {worst:.2e}, formula vs dynamics {worst_dyn:.2e}; p = 0, 1 rejected"
    ))
}

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/hadamard_stripes.json")
}

fn stripe_marginal(spec: LatticeSpec) -> Result<PositionDistribution, String> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let coin = [c64::new(h, 0.0), c64::new(h, 0.0), c64::new(0.0, 0.0), c64::new(0.0, 0.0)];
    let psi0 = StateVector::localized(&spec, Site::new(7, 7), coin).map_err(err)?;
    let ch = channel(spec, CoinOperator::hadamard2d(), 0.5);
    let basis = build_basis(&ch, StateSource::Auto).map_err(err)?;
    asymptotic_marginal_pure(&basis, &psi0, 0).map_err(err)
}

fn hadamard_aspect() -> Outcome {
    let start = Instant::now();
    let a = stripe_marginal(LatticeSpec::torus(15, 16).unwrap())?;
    let b = stripe_marginal(LatticeSpec::torus(16, 15).unwrap())?;
    let l1 = a.l1_distance(&b.transposed());
    let path = golden_path();
    if std::env::var_os("PERQWALK_BLESS").is_some() {
        let value = json!({ "torus_15x16": a.as_slice(), "torus_16x15": b.as_slice(), "l1": l1 });
        std::fs::create_dir_all(path.parent().unwrap()).map_err(|e| e.to_string())?;
        std::fs::write(&path, serde_json::to_string_pretty(&value).unwrap() + "\n").map_err(|e| e.to_string())?;
    }
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let golden: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let column = |key: &str| -> Vec<f64> {
        golden[key].as_array().map(|v| v.iter().filter_map(Value::as_f64).collect()).unwrap_or_default()
    };
    for (key, dist) in [("torus_15x16", &a), ("torus_16x15", &b)] {
        let want = column(key);
        ensure(want.len() == dist.as_slice().len(), || format!("golden {key} has {} cells", want.len()))?;
        let d = want.iter().zip(dist.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        ensure(d <= 1e-10, || format!("{key} deviates from golden by {d:.3e}"))?;
    }
    ensure(l1 > 0.01, || format!("tori differ only by L1 {l1:.3e}"))?;
    let c = stripe_marginal(LatticeSpec::carpet(15, 16).unwrap())?;
    let d = stripe_marginal(LatticeSpec::carpet(16, 15).unwrap())?;
    let carpet = c.max_abs_diff(&d.transposed());
    ensure(carpet <= 1e-10, || format!("carpets differ under transpose by {carpet:.3e}"))?;
    within(start.elapsed(), Duration::from_secs(300))?;
    Ok(format!("torus L1 {l1:.4}, carpet transpose diff {carpet:.2e} in {:.1?}", start.elapsed()))
}

fn uniform_coin_at(spec: &LatticeSpec, site: Site) -> StateVector {
    StateVector::localized(spec, site, [c64::new(0.5, 0.0); 4]).unwrap()
}

fn grover_peak(spec: LatticeSpec, site: Site) -> Result<PositionDistribution, String> {
    let ch = channel(spec, CoinOperator::grover(), 0.5);
    let basis = build_basis(&ch, StateSource::Auto).map_err(err)?;
    asymptotic_marginal_pure(&basis, &uniform_coin_at(&spec, site), 0).map_err(err)
}

fn grover_localization() -> Outcome {
    let spec = LatticeSpec::torus(15, 15).unwrap();
    let centre = Site::new(7, 7);
    let dist = grover_peak(spec, centre)?;
    let peak = dist.get(7, 7);
    ensure(peak > 1.0 / 225.0, || format!("P(7,7) = {peak:.4e} <= 1/225"))?;
    let mut far = 0.0f64;
    for s in 0..15usize {
        for t in 0..15usize {
            if s.abs_diff(7) > 1 || t.abs_diff(7) > 1 {
                far = far.max(dist.get(s, t));
            }
        }
    }
    ensure(peak > far, || format!("P(7,7) = {peak:.4e} <= largest non-neighbouring cell {far:.4e}"))?;

    let small = LatticeSpec::torus(5, 5).unwrap();
    let ch = channel(small, CoinOperator::grover(), 0.5);
    let rho0 = DensityOperator::pure(&uniform_coin_at(&small, Site::new(2, 2)));
    let conv = evolve_until_converged(&ch, &rho0, ConvergenceOptions::default()).map_err(err)?;
    ensure(conv.converged, || "5x5 oracle did not converge".into())?;
    let oracle = conv.rho.position_marginal(&small).map_err(err)?.get(2, 2);
    let formula = grover_peak(small, Site::new(2, 2))?.get(2, 2);
    ensure((oracle - formula).abs() <= 1e-6, || format!("5x5 peak {formula:.8} vs dynamics {oracle:.8}"))?;

    let psi = evolve_unitary(
        &spec,
        &CoinOperator::grover(),
        &EdgeConfiguration::full(&spec),
        &uniform_coin_at(&spec, centre),
        1000,
    )
    .map_err(err)?;
    let unitary = psi.position_marginal(&spec).map_err(err)?.get(7, 7);
    ensure(unitary > peak, || format!("unitary peak {unitary:.4e} <= percolated {peak:.4e}"))?;
    Ok(format!(
        "P(7,7) {peak:.4e} (1/225 = {:.4e}, far max {far:.4e}); 5x5 {formula:.8} vs {oracle:.8}; unitary {unitary:.4e}",
        1.0 / 225.0
    ))
}

fn fourier_uniformity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for spec in [LatticeSpec::torus(3, 3).unwrap(), LatticeSpec::torus(4, 5).unwrap()] {
        let ch = channel(spec, CoinOperator::fourier(), 0.5);
        let basis = build_basis(&ch, StateSource::Auto).map_err(err)?;
        let uniform = PositionDistribution::uniform(spec.m(), spec.n());
        for k in 0..20 {
            let psi0 = if k % 2 == 0 { random_product(&spec, &mut rng) } else { random_pure(spec.dim(), &mut rng) };
            let d = asymptotic_marginal_pure(&basis, &psi0, 0).map_err(err)?.max_abs_diff(&uniform);
            ensure(d <= 1e-10, || format!("{spec} state {k}: deviation {d:.3e}"))?;
            worst = worst.max(d);
        }
    }
    Ok(format!("40 states, max deviation from uniform {worst:.2e}"))
}

fn eigenstate_verification() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut worst_res, mut worst_angle): (f64, f64) = (0.0, 0.0);
    let mut count = 0;
    for spec in variants(3, 3).into_iter().chain(variants(3, 4)).chain(variants(4, 4)) {
        for coin in coins() {
            let name = format!("{spec} {}", coin.name());
            let ch = channel(spec, coin.clone(), 0.5);
            let configs: Vec<EdgeConfiguration> = (0..50).map(|_| sample_config(ch.model(), &spec, &mut rng)).collect();
            let closed = analytic::states(&spec, &coin).map_err(err)?;
            for s in &closed {
                let r = verify_common_eigenstate(&ch, s.vector(), s.alpha(), &configs);
                ensure(r <= 1e-10, || format!("{name} {}: residual {r:.3e}", s.label()))?;
                worst_res = worst_res.max(r);
            }
            count += closed.len();
            let numeric = find_common_eigenstates_numeric(&ch).map_err(err)?.states;
            ensure(numeric.len() == closed.len(), || {
                format!("{name}: {} closed-form vs {} numeric", closed.len(), numeric.len())
            })?;
            let a: Vec<Vec<c64>> = closed.iter().map(|s| s.vector().to_vec()).collect();
            let b: Vec<Vec<c64>> = numeric.iter().map(|s| s.vector().to_vec()).collect();
            let angle = linalg::max_principal_sine(&a, &b);
            ensure(angle <= 1e-8, || format!("{name}: largest principal sine {angle:.3e}"))?;
            worst_angle = worst_angle.max(angle);
        }
    }
    Ok(format!("{count} states, max residual {worst_res:.2e}, max principal sine {worst_angle:.2e}"))
}

fn mc_consistency() -> Outcome {
    let spec = LatticeSpec::torus(3, 3).unwrap();
    let ch = channel(spec, CoinOperator::hadamard2d(), 0.5);
    let psi0 = StateVector::localized(&spec, Site::new(1, 1), [c64::new(0.5, 0.0); 4]).unwrap();
    let exact =
        evolve_exact(&ch, &DensityOperator::pure(&psi0), 50).map_err(err)?.position_marginal(&spec).map_err(err)?;
    let est = evolve_mc(&ch, &psi0, 50, 100_000, 42).map_err(err)?;
    let tv = est.mean.total_variation(&exact);
    let bound = 3.0 * est.tv_scale();
    ensure(tv <= bound, || format!("TV {tv:.3e} > 3 x stderr scale {bound:.3e}"))?;
    let again = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .map_err(|e| e.to_string())?
        .install(|| evolve_mc(&ch, &psi0, 50, 100_000, 42))
        .map_err(err)?;
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    ensure(
        bits(est.mean.as_slice()) == bits(again.mean.as_slice()) && bits(&est.stderr) == bits(&again.stderr),
        || "rerun with a different thread count is not bitwise identical".into(),
    )?;
    Ok(format!("TV {tv:.3e} <= {bound:.3e}; rerun bitwise identical"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("attractor-dimension table", dimension_table),
        ("oracle equivalence", oracle_equivalence),
        ("asymptotics vs dynamics", asymptotics_vs_dynamics),
        ("stationarity", stationarity),
        ("p-independence", p_independence),
        ("hadamard aspect-ratio dependence", hadamard_aspect),
        ("grover localization peak", grover_localization),
        ("fourier uniformity", fourier_uniformity),
        ("eigenstate verification", eigenstate_verification),
        ("monte carlo consistency", mc_consistency),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

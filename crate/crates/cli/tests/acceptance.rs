//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails or overruns its time budget.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use semeq::channel::{draw_realization, stream_rng, transmit, transmit_real, ChannelConfig};
use semeq::equalizers::{
    build_pfe, fit_linear, linear_objective, train_neural, Equalizer, NeuralArch, NeuralEqualizer, NoiseModel,
    TrainConfig,
};
use semeq::harness::{
    eval_channel, evaluate, evaluate_errors, fit_point, prepare_seed, run_pilot_sweep, EqualizerKind, ExperimentConfig,
    FadingMode, GridPoint,
};
use semeq::latents::{generate_mismatch, Layout, MismatchFamily, MismatchSpec, PilotSet};
use semeq::metrics::psnr_from_mse;
use semeq::numerics::{ComplexVector, Matrix};
use semeq::Error;

type Outcome = Result<String, String>;
type Criterion = (&'static str, u64, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|v| v * v).sum();
    (num / den).sqrt()
}

fn random_vec(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn semeq() -> Command {
    Command::new(env!("CARGO_BIN_EXE_semeq"))
}

// 1 -------------------------------------------------------------------------

fn table_counts() -> Outcome {
    let out = semeq().arg("params").output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("params exited with {}", out.status));
    }
    let text = String::from_utf8_lossy(&out.stdout);
    let expected = [("linear", 84_934_656u64), ("mlp", 169_887_745), ("cnn1", 6_416), ("cnn2", 12_833)];
    let mut seen = Vec::new();
    for (arch, want) in expected {
        let line = text.lines().find(|l| l.split_whitespace().next() == Some(arch)).ok_or(format!("no {arch} row"))?;
        let got: u64 = line.split_whitespace().last().unwrap().replace(',', "").parse().map_err(|e| format!("{e}"))?;
        if got != want {
            return Err(format!("{arch}: {got} != {want}"));
        }
        seen.push(format!("{arch}={got}"));
    }
    Ok(seen.join(" "))
}

// 2 -------------------------------------------------------------------------

struct Instance {
    pilots: PilotSet,
    noise: f64,
}

fn random_instance(seed: u64) -> Instance {
    let mut rng = stream_rng(seed, 0x6f72_6163, 0);
    let d = 2 * rng.random_range(1..=8usize);
    let m = rng.random_range(1..=12usize);
    let n = rng.random_range(2 * d..=200);
    let snr = [-10.0, 0.0, 20.0][seed as usize % 3];
    let fading = seed % 2 == 1;
    let x = Matrix::random_normal(n, d, &mut rng);
    let y = Matrix::random_normal(n, m, &mut rng);
    let mut pilots = PilotSet::new(x, y).unwrap();
    if fading {
        let cfg = ChannelConfig::noiseless().with_fading(true);
        let h = (0..n).map(|_| draw_realization(&cfg, &mut rng).h).collect();
        pilots = pilots.with_fading(h).unwrap();
    }
    Instance { pilots, noise: 0.5 * 10f64.powf(-snr / 10.0) }
}

/// Rows of `X̃`, fading applied pair by pair.
fn oracle_faded(p: &PilotSet) -> DMatrix<f64> {
    let mut x = to_na(p.x());
    if let Some(h) = p.fading() {
        for i in 0..p.len() {
            for j in (0..p.d()).step_by(2) {
                let z = h[i] * Complex64::new(x[(i, j)], x[(i, j + 1)]);
                x[(i, j)] = z.re;
                x[(i, j + 1)] = z.im;
            }
        }
    }
    x
}

fn oracle_objective(f: &DMatrix<f64>, x: &DMatrix<f64>, y: &DMatrix<f64>, noise: f64) -> f64 {
    let r = y - x * f.transpose();
    r.norm_squared() / x.nrows() as f64 + noise * f.norm_squared()
}

fn gradient_descent(x: &DMatrix<f64>, y: &DMatrix<f64>, noise: f64, steps: usize) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let a = x.transpose() * x / n + DMatrix::identity(x.ncols(), x.ncols()) * noise;
    let b = y.transpose() * x / n;
    let lmax = a.clone().symmetric_eigen().eigenvalues.max();
    let step = 1.0 / (2.0 * lmax);
    let mut f = DMatrix::zeros(y.ncols(), x.ncols());
    for _ in 0..steps {
        let grad = (&f * &a - &b) * 2.0;
        f -= grad * step;
    }
    f
}

fn closed_form_optimality() -> Outcome {
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_rel = 0.0f64;
    let mut worst_obj = 0.0f64;
    let mut faded = 0;
    for seed in 0..20 {
        let inst = random_instance(seed);
        faded += inst.pilots.fading().is_some() as usize;
        let eq = fit_linear(&inst.pilots, &NoiseModel { real_variance: inst.noise }).map_err(|e| e.to_string())?;
        let f_star = to_na(eq.matrix());
        let x = oracle_faded(&inst.pilots);
        let y = to_na(inst.pilots.y());
        let f_gd = gradient_descent(&x, &y, inst.noise, 10_000);
        let j_star = oracle_objective(&f_star, &x, &y, inst.noise);
        let j_gd = oracle_objective(&f_gd, &x, &y, inst.noise);
        let j_lib = linear_objective(eq.matrix(), &inst.pilots, &NoiseModel { real_variance: inst.noise }).unwrap();
        worst_gap = worst_gap.max(j_star - j_gd);
        worst_rel = worst_rel.max((&f_star - &f_gd).norm() / f_star.norm());
        worst_obj = worst_obj.max((j_lib - j_star).abs() / j_star);
    }
    check(
        worst_gap <= 1e-6 && worst_rel <= 1e-3 && worst_obj <= 1e-10 && faded > 0 && faded < 20,
        format!(
            "20 instances ({faded} faded): max J(F*)-J(F_gd) = {worst_gap:.2e}, max ||F*-F_gd||/||F*|| = {worst_rel:.2e}, objective agreement {worst_obj:.1e}"
        ),
    )
}

// 3 -------------------------------------------------------------------------

fn planted_recovery() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let mut rng = stream_rng(seed, 0x706c_616e, 0);
        let d = 2 * rng.random_range(2..=16usize);
        let m = rng.random_range(1..=24usize);
        let a = Matrix::random_normal(m, d, &mut rng);
        let x = Matrix::random_normal(4 * d, d, &mut rng);
        let y = x.matmul(&a.transpose()).unwrap();
        let eq = fit_linear(&PilotSet::new(x, y).unwrap(), &NoiseModel::noiseless()).map_err(|e| e.to_string())?;
        worst = worst.max(eq.matrix().sub(&a).unwrap().frobenius_norm() / a.frobenius_norm());
    }
    check(worst <= 1e-8, format!("10 seeds, max ||F*-A||/||A|| = {worst:.2e}"))
}

// 4 -------------------------------------------------------------------------

fn parseval_suite() -> Outcome {
    let (mut tight, mut norm, mut round, mut scale) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for seed in 0..100u64 {
        let mut rng = stream_rng(seed, 0x7061_7273, 0);
        let d = rng.random_range(1..=32usize);
        let m = rng.random_range(d..=8 * d);
        let refs = Matrix::random_normal(m, d, &mut rng);
        let pfe = build_pfe(&refs, &refs).map_err(|e| e.to_string())?;
        let g = to_na(pfe.analysis());
        tight = tight.max((g.transpose() * &g - DMatrix::identity(d, d)).abs().max());

        let x = random_vec(d, &mut rng);
        let c = pfe.analyze(&x).unwrap();
        let (nx, nc) = (x.iter().map(|v| v * v).sum::<f64>().sqrt(), c.iter().map(|v| v * v).sum::<f64>().sqrt());
        norm = norm.max((nc - nx).abs() / nx);
        round = round.max(rel_err(&pfe.synthesize(&c).unwrap(), &x));

        for alpha in [0.1, 10.0] {
            let scaled = build_pfe(&refs.scale(alpha), &refs).map_err(|e| e.to_string())?;
            scale = scale.max(scaled.analysis().max_abs_diff(pfe.analysis()));
        }
    }
    check(
        tight <= 1e-8 && norm <= 1e-10 && round <= 1e-8 && scale <= 1e-9,
        format!("100 frames: ||GtG-I||max = {tight:.1e}, norm {norm:.1e}, round trip {round:.1e}, scale {scale:.1e}"),
    )
}

// 5 -------------------------------------------------------------------------

fn worst_gradient_error(net: &mut NeuralEqualizer, x: &[f64], layout: Option<Layout>, y: &[f64]) -> f64 {
    let (_, grad) = net.backward(x, layout, y).unwrap();
    let p0 = net.params();
    let mut worst = 0.0f64;
    for i in 0..p0.len() {
        let mut p = p0.clone();
        p[i] = p0[i] + 1e-5;
        net.set_params(&p).unwrap();
        let up = net.backward(x, layout, y).unwrap().0;
        p[i] = p0[i] - 1e-5;
        net.set_params(&p).unwrap();
        let down = net.backward(x, layout, y).unwrap().0;
        let fd = (up - down) / 2e-5;
        worst = worst.max((fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-3));
    }
    net.set_params(&p0).unwrap();
    worst
}

fn gradient_checks() -> Outcome {
    let mut rng = stream_rng(5, 0x6772_6164, 0);
    let l = Layout::new(2, 4, 4);
    let x = random_vec(l.len(), &mut rng);
    let y = random_vec(l.len(), &mut rng);
    let mut mlp = NeuralEqualizer::mlp(12, 12, &mut rng);
    let mut cnn1 = NeuralEqualizer::cnn1(2, 2, &mut rng);
    let mut cnn2 = NeuralEqualizer::cnn2(2, 2, &mut rng);
    // a slope far from 1 makes the negative branch of PReLU visible
    let mut p = cnn2.params();
    p[2 * 2 * 25 + 2] = 0.25;
    cnn2.set_params(&p).unwrap();
    let e_mlp = worst_gradient_error(&mut mlp, &x[..12], None, &y[..12]);
    let e1 = worst_gradient_error(&mut cnn1, &x, Some(l), &y);
    let e2 = worst_gradient_error(&mut cnn2, &x, Some(l), &y);
    let total = mlp.param_count() + cnn1.param_count() + cnn2.param_count();
    check(
        e_mlp.max(e1).max(e2) <= 1e-4,
        format!("{total} parameters, max relative error mlp {e_mlp:.1e}, cnn1 {e1:.1e}, cnn2 {e2:.1e}"),
    )
}

// 6 -------------------------------------------------------------------------

fn channel_statistics() -> Outcome {
    const N: usize = 1_000_000;
    let mut rng = stream_rng(6, 0x6368_616e, 0);
    let symbols = ComplexVector(
        (0..N).map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))).collect(),
    );
    let mut worst_db = 0.0f64;
    for snr in [-10.0, 0.0, 20.0] {
        let (out, _) = transmit(&symbols, &ChannelConfig::awgn(snr), &mut rng);
        let signal: f64 = symbols.0.iter().map(|z| z.norm_sqr()).sum();
        let noise: f64 = out.0.iter().zip(&symbols.0).map(|(a, b)| (a - b).norm_sqr()).sum();
        worst_db = worst_db.max((10.0 * (signal / noise).log10() - snr).abs());
    }
    let fading = ChannelConfig::noiseless().with_fading(true);
    let gain = (0..N).map(|_| draw_realization(&fading, &mut rng).h.norm_sqr()).sum::<f64>() / N as f64;

    let x = random_vec(1024, &mut rng);
    let (clean, h) = transmit_real(&x, &ChannelConfig::noiseless(), &mut rng).unwrap();
    let exact = clean.iter().zip(&x).all(|(a, b)| a.to_bits() == b.to_bits()) && h.h == Complex64::new(1.0, 0.0);
    check(
        worst_db <= 0.05 && (gain - 1.0).abs() <= 0.01 && exact,
        format!("max SNR error {worst_db:.4} dB, E|h|^2 = {gain:.4}, noiseless bit-exact {exact}"),
    )
}

// 7 -------------------------------------------------------------------------

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        for (rank, &i) in idx.iter().enumerate() {
            r[i] = rank as f64;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y) * (x - y)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

fn figure_shape() -> Outcome {
    let base = ExperimentConfig { workers: 1, ..ExperimentConfig::default() };

    // (b) linear aligner against N, 5 seeds
    let cfg = ExperimentConfig { equalizers: vec![EqualizerKind::Linear], fading: FadingMode::Off, ..base.clone() };
    let report = run_pilot_sweep(&cfg).map_err(|e| e.to_string())?;
    if !report.is_complete() {
        return Err(report.failures.join("; "));
    }
    let means: Vec<_> = report.aggregates().collect();
    let ns: Vec<f64> = means.iter().map(|r| r.n_pilots as f64).collect();
    let mses: Vec<f64> = means.iter().map(|r| r.mean_mse).collect();
    let rho = spearman(&ns, &mses);
    let per_seed_worst = cfg
        .seeds
        .iter()
        .map(|&s| {
            let rows: Vec<_> = report.per_seed().filter(|r| r.seed == Some(s)).collect();
            let n: Vec<f64> = rows.iter().map(|r| r.n_pilots as f64).collect();
            let e: Vec<f64> = rows.iter().map(|r| r.mean_mse).collect();
            spearman(&n, &e)
        })
        .fold(f64::NEG_INFINITY, f64::max);

    // (a) and (c): every aligner at N = 1000, fading off and on, paired per vector
    let cfg = ExperimentConfig { eval_count: 1000, seeds: vec![42], ..base };
    let data = prepare_seed(&cfg, 42).map_err(|e| e.to_string())?;
    let kinds = [
        EqualizerKind::None,
        EqualizerKind::Linear,
        EqualizerKind::Mlp,
        EqualizerKind::Cnn1,
        EqualizerKind::Cnn2,
        EqualizerKind::Pfe,
        EqualizerKind::PfeFull,
    ];
    let mut psnr = Vec::new();
    for (k, &kind) in kinds.iter().enumerate() {
        let mut per_fading = Vec::new();
        for fading in [false, true] {
            let point = GridPoint { equalizer: kind, n_pilots: 1000, snr_align_db: 10.0, snr_eval_db: 10.0, fading };
            let eq = fit_point(&cfg, &data, &point, k as u64).map_err(|e| format!("{kind}: {e}"))?;
            let errors = evaluate_errors(&eq, &data.eval, data.image_target(), &eval_channel(42, &point), 1)
                .map_err(|e| e.to_string())?;
            per_fading.push(errors.iter().map(|&e| psnr_from_mse(e, &cfg.psnr)).collect::<Vec<f64>>());
        }
        psnr.push(per_fading);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let baseline = mean(&psnr[0][0]);
    let mut ok = rho <= -0.9;
    let mut margins = Vec::new();
    let mut paired = Vec::new();
    for (k, kind) in kinds.iter().enumerate() {
        let (off, on) = (&psnr[k][0], &psnr[k][1]);
        let diff: Vec<f64> = on.iter().zip(off).map(|(a, b)| a - b).collect();
        let md = mean(&diff);
        let sd = (diff.iter().map(|d| (d - md) * (d - md)).sum::<f64>() / (diff.len() - 1) as f64).sqrt();
        let t = md / (sd / (diff.len() as f64).sqrt());
        paired.push(format!("{kind} {md:+.2}dB/t={t:.1}"));
        // the unaligned baseline is reported but not an aligner
        if k > 0 {
            ok &= md < 0.0 && t < -1.645;
            let margin = mean(off) - baseline;
            ok &= margin > 3.0;
            margins.push(format!("{kind} +{margin:.2}"));
        }
    }
    check(
        ok,
        format!(
            "(a) baseline {baseline:.2} dB, margins [{}]; (b) spearman(N, MSE) = {rho:.3} on means, worst seed {per_seed_worst:.3}; (c) fading on-off over {} vectors [{}]",
            margins.join(", "),
            psnr[0][0].len(),
            paired.join(", ")
        ),
    )
}

// 8 -------------------------------------------------------------------------

fn resolution_agnostic() -> Outcome {
    let small = Layout::new(4, 8, 8);
    let large = small.resized(16, 16);
    let spec = |l: Layout, seed| {
        MismatchSpec::new(MismatchFamily::ConvLocal, 0, 0, 42, 43).with_layout(l).with_data_seed(seed)
    };
    let train = generate_mismatch(&spec(small, 1), 400, 0).map_err(|e| e.to_string())?.train;
    let held_out = generate_mismatch(&spec(large, 2), 1, 300).map_err(|e| e.to_string())?.eval;

    let channel = ChannelConfig::awgn(20.0).with_seed(8);
    let mut hyper = TrainConfig::for_arch(NeuralArch::Cnn2);
    hyper.max_epochs = 150;
    let (cnn2, _) = train_neural(NeuralArch::Cnn2, &train, &channel, &hyper).map_err(|e| e.to_string())?;
    let cfg = Default::default();
    let eval = ChannelConfig::awgn(20.0).with_seed(80);
    let aligned = evaluate(&Equalizer::Neural(cnn2), &held_out, None, &eval, 1, &cfg).map_err(|e| e.to_string())?;
    let unaligned = evaluate(&Equalizer::None, &held_out, None, &eval, 1, &cfg).map_err(|e| e.to_string())?;

    let probe = held_out.x_row(0);
    let linear = fit_linear(&train, &NoiseModel::from_channel(&channel)).map_err(|e| e.to_string())?;
    let mlp =
        NeuralEqualizer::init_for(NeuralArch::Mlp, &train, &mut stream_rng(8, 0, 0)).map_err(|e| e.to_string())?;
    let linear_err = linear.apply(probe);
    let mlp_err = mlp.forward(probe, Some(large));
    let rejects = matches!(linear_err, Err(Error::DimensionMismatch { .. }))
        && matches!(mlp_err, Err(Error::DimensionMismatch { .. }));
    check(
        aligned.mean_mse < unaligned.mean_mse && rejects,
        format!(
            "16x16 held-out MSE cnn2 {:.4e} vs unaligned {:.4e}; linear/mlp DimensionMismatch {rejects}",
            aligned.mean_mse, unaligned.mean_mse
        ),
    )
}

// 9 -------------------------------------------------------------------------

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("sweep.cfg");
    std::fs::write(
        &config,
        "scenario = mismatch\nfamily = general-linear\nd = 16\nm = 16\n\
         equalizer = none, linear, mlp, pfe, pfe-full\npilots = 8, 32, 128\n\
         seed = 42, 43\nfading = both\nsnr_align = 0, 20\neval_count = 200\nmax_epochs = 40\n",
    )
    .map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for workers in ["1", "8"] {
        let out = semeq()
            .args(["sweep-pilots", "--config"])
            .arg(&config)
            .args(["--workers", workers])
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{workers} workers: {}", String::from_utf8_lossy(&out.stderr)));
        }
        outputs.push(out.stdout);
    }
    let rows = outputs[0].iter().filter(|&&b| b == b'\n').count();
    check(
        outputs[0] == outputs[1],
        format!("{rows} CSV lines, 1 vs 8 workers byte-identical {}", outputs[0] == outputs[1]),
    )
}

// 10 ------------------------------------------------------------------------

fn pfe_compression() -> Outcome {
    let d = 32;
    let mut rng = stream_rng(10, 0x636f_6d70, 0);
    let mut orth = 0.0f64;
    let mut proj = 0.0f64;
    for m in [d / 4, d / 2, d - 1] {
        let refs = Matrix::random_normal(m, d, &mut rng);
        let pfe = build_pfe(&refs, &refs).map_err(|e| e.to_string())?;
        let r = to_na(&refs);
        let oracle = r.transpose() * (&r * r.transpose()).try_inverse().ok_or("singular references")? * &r;
        for _ in 0..20 {
            let x = random_vec(d, &mut rng);
            let y_hat = pfe.synthesize(&pfe.analyze(&x).unwrap()).unwrap();
            let residual: Vec<f64> = x.iter().zip(&y_hat).map(|(a, b)| a - b).collect();
            let inner = pfe.synthesis().matvec(&residual).unwrap();
            orth = orth
                .max(inner.iter().map(|v| v.abs()).fold(0.0, f64::max) / x.iter().map(|v| v * v).sum::<f64>().sqrt());
            let want = &oracle * nalgebra::DVector::from_column_slice(&x);
            proj = proj.max(rel_err(&y_hat, want.as_slice()));
        }
    }

    let spec = MismatchSpec::new(MismatchFamily::Orthogonal, d, d, 42, 43).with_data_seed(10);
    let data = generate_mismatch(&spec, 2 * d, 500).map_err(|e| e.to_string())?;
    let cfg = Default::default();
    let mut lines = Vec::new();
    let mut monotone = true;
    // only the noiseless curve is gated: with noise, ŷ collects noise from
    // min(M, d) coefficients, so fewer coefficients can win at low SNR
    for (name, channel) in [("noiseless", ChannelConfig::noiseless()), ("10 dB", ChannelConfig::awgn(10.0))] {
        let channel = channel.with_seed(100);
        let mut mses = Vec::new();
        for m in [d / 4, d / 2, d, 2 * d] {
            let refs = data.train.prefix(m);
            let eq = Equalizer::Pfe(build_pfe(refs.x(), refs.y()).map_err(|e| e.to_string())?);
            mses.push(evaluate(&eq, &data.eval, None, &channel, 1, &cfg).map_err(|e| e.to_string())?.mean_mse);
        }
        if channel.noise_sigma2() == 0.0 {
            monotone &= mses.windows(2).all(|w| w[1] <= w[0]);
        }
        lines.push(format!("{name} [{}]", mses.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", ")));
    }
    check(
        orth <= 1e-8 && proj <= 1e-8 && monotone,
        format!(
            "residual orthogonality {orth:.1e}, projection oracle {proj:.1e}; MSE over M = d/4..2d: {}",
            lines.join("; ")
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("parameter counts", 1, table_counts),
        ("closed-form optimality", 30, closed_form_optimality),
        ("noiseless planted recovery", 5, planted_recovery),
        ("Parseval suite", 10, parseval_suite),
        ("gradient checks", 10, gradient_checks),
        ("channel statistics", 10, channel_statistics),
        ("figure shape on the toy codec", 300, figure_shape),
        ("CNN resolution agnosticism", 60, resolution_agnostic),
        ("sweep determinism", 300, determinism),
        ("PFE compression", 60, pfe_compression),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*budget);
        let (ok, detail) = match outcome {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        failed += !ok as usize;
        println!(
            "criterion {:>2} {} {name}: {detail} [{:.2}s of {budget}s]",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

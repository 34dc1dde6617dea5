//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any failed.
//!
//! `cargo test -p xlalign-core --test acceptance`

// A NaN must fail a check, so conditions are negated rather than flipped.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::tempdir;
use xlalign::diagnostics::column_cosines;
use xlalign::fitting::{distance_loss, squared_loss};
use xlalign::io::{
    decode_embeddings, decode_map_file, encode_embeddings, encode_map_file, parse_pair_tsv, read_embeddings,
    read_map_file, write_embeddings, write_map, MapFile,
};
use xlalign::{
    dilation_report, evaluate, fit_distance_sgd, fit_ols, fit_procrustes, generate, ortho_report,
    ortho_report_with_threshold, split, EmbeddingSet, Error, FitConfig, FormatError, LinearMap, LinearMapF64,
    PairedEmbeddings, SplitSpec, SynthSpec, TransformKind,
};

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn max_abs_offdiag(p: &DMatrix<f64>) -> f64 {
    let d = p.nrows();
    let mut m = 0.0f64;
    for j in 0..d {
        for k in 0..d {
            if j != k {
                m = m.max(p[(j, k)].abs());
            }
        }
    }
    m
}

fn procrustes_constraint() -> Outcome {
    let start = Instant::now();
    let mut worst_p = 0.0f64;
    let mut worst_nstd = 0.0f64;
    for i in 0..20u64 {
        let dim = [4, 16, 64][(i % 3) as usize];
        let kind = if i % 2 == 0 {
            TransformKind::GeneralLinear
        } else {
            TransformKind::Orthogonal
        };
        let spec = SynthSpec::new(20 * dim, dim, kind, 1000 + i)
            .alpha(0.5 + 0.1 * i as f64)
            .noise(0.1);
        let (pairs, _) = generate::<f64>(&spec).map_err(|e| e.to_string())?;
        let fit = fit_procrustes(&pairs).map_err(|e| e.to_string())?;
        let p = column_cosines(fit.map.matrix()).map_err(|e| e.to_string())?;
        worst_p = worst_p.max(max_abs_offdiag(&p));
        worst_nstd = worst_nstd.max(dilation_report(&fit.map).nstd);
    }
    let elapsed = start.elapsed();
    ensure!(worst_p < 1e-6, "max |p_jk| = {worst_p:e}");
    ensure!(worst_nstd < 1e-9, "max nstd = {worst_nstd:e}");
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!(
        "max |p| {worst_p:.1e}, max nstd {worst_nstd:.1e}, {elapsed:.2?}"
    ))
}

fn ols_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut min_rel_gain = f64::INFINITY;
    let mut min_gap = f64::INFINITY;
    for i in 0..10u64 {
        let dim = 2 + (i as usize % 5);
        let kind = if i % 2 == 0 {
            TransformKind::GeneralLinear
        } else {
            TransformKind::Orthogonal
        };
        let spec = SynthSpec::new(200, dim, kind, 2000 + i).alpha(0.8).noise(0.2);
        let (pairs, _) = generate::<f64>(&spec).map_err(|e| e.to_string())?;
        let ols = fit_ols(&pairs).map_err(|e| e.to_string())?;
        let base = squared_loss(&ols.map, &pairs).map_err(|e| e.to_string())?;
        let scale = 1e-3 * ols.map.matrix().amax();
        for _ in 0..100 {
            let da = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-scale..scale));
            let db = DVector::from_fn(dim, |_, _| rng.random_range(-scale..scale));
            let perturbed = LinearMap::new(ols.map.matrix() + da, ols.map.bias() + db).unwrap();
            let loss = squared_loss(&perturbed, &pairs).map_err(|e| e.to_string())?;
            ensure!(
                loss >= base * (1.0 - 1e-12),
                "dataset {i}: perturbed loss {loss:e} < fitted {base:e}"
            );
            min_rel_gain = min_rel_gain.min((loss - base) / base);
        }
        let procrustes = fit_procrustes(&pairs).map_err(|e| e.to_string())?;
        let gap = procrustes.train_loss - ols.train_loss;
        ensure!(
            ols.train_loss <= procrustes.train_loss,
            "dataset {i}: ols {:e} > procrustes {:e}",
            ols.train_loss,
            procrustes.train_loss
        );
        min_gap = min_gap.min(gap);
    }
    Ok(format!(
        "min relative increase {min_rel_gain:.1e}; min procrustes−ols gap {min_gap:.2e}"
    ))
}

fn recovery_spec(noise: f64) -> SynthSpec {
    SynthSpec::new(5000, 16, TransformKind::Orthogonal, 4242)
        .alpha(0.9)
        .noise(noise)
}

fn noiseless_recovery() -> Outcome {
    let (pairs, truth) = generate::<f64>(&recovery_spec(0.0)).map_err(|e| e.to_string())?;
    let fit = fit_ols(&pairs).map_err(|e| e.to_string())?;
    let err = (fit.map.matrix() - truth.matrix()).amax();
    let ortho = ortho_report(&fit.map).map_err(|e| e.to_string())?;
    let max_p = ortho.min_p.abs().max(ortho.max_p.abs());
    let alpha = dilation_report(&fit.map).alpha_bar;
    ensure!(err < 1e-6, "max |A − truth| = {err:e}");
    ensure!(max_p < 1e-5, "max |p_jk| = {max_p:e}");
    ensure!((alpha - 0.9).abs() < 1e-5, "alpha_bar = {alpha}");
    Ok(format!("max|ΔA| {err:.1e}, max|p| {max_p:.1e}, ᾱ {alpha:.9}"))
}

fn noisy_recovery() -> Outcome {
    let (pairs, _) = generate::<f64>(&recovery_spec(0.01)).map_err(|e| e.to_string())?;
    let fit = fit_ols(&pairs).map_err(|e| e.to_string())?;
    let ortho = ortho_report(&fit.map).map_err(|e| e.to_string())?;
    let max_p = ortho.min_p.abs().max(ortho.max_p.abs());
    let alpha = dilation_report(&fit.map).alpha_bar;
    ensure!(max_p < 0.05, "max |p_jk| = {max_p}");
    ensure!((alpha - 0.9).abs() < 0.05, "alpha_bar = {alpha}");

    let parts = split(&pairs, &SplitSpec::new(0, 500, 1)).map_err(|e| e.to_string())?;
    let ols = fit_ols(&parts.train).map_err(|e| e.to_string())?;
    let sgd = fit_distance_sgd(&parts.train, &parts.val, &FitConfig::distance_sgd()).map_err(|e| e.to_string())?;
    let ols_val = distance_loss(&ols.map, &parts.val).map_err(|e| e.to_string())?;
    let sgd_val = distance_loss(&sgd.map, &parts.val).map_err(|e| e.to_string())?;
    let rel = (sgd_val - ols_val).abs() / ols_val;
    ensure!(
        rel <= 0.05,
        "sgd val {sgd_val:e} vs ols val {ols_val:e} ({:.1}%)",
        rel * 100.0
    );
    Ok(format!(
        "max|p| {max_p:.4}, ᾱ {alpha:.4}; val distance sgd {sgd_val:.5} vs ols {ols_val:.5} ({:+.2}%, {} epochs)",
        (sgd_val - ols_val) / ols_val * 100.0,
        sgd.epochs_run
    ))
}

/// Per-sample reference computed on plain nested vectors.
fn naive_metrics(e: &[Vec<f64>], mapped: &[Vec<f64>], t: &[Vec<f64>]) -> [f64; 4] {
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let cos = |a: &[f64], b: &[f64]| dot(a, b) / (dot(a, a).sqrt() * dot(b, b).sqrt());
    let n = e.len() as f64;
    let (mut d, mut dm, mut dc, mut fd, mut fc) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..e.len() {
        let (a, b) = (dist(&e[i], &t[i]), dist(&mapped[i], &t[i]));
        d += a;
        dm += b;
        if a - b > 0.0 {
            fd += 1.0;
        }
        let g = cos(&mapped[i], &t[i]) - cos(&e[i], &t[i]);
        dc += g;
        if g > 0.0 {
            fc += 1.0;
        }
    }
    let (d, dm) = (d / n, dm / n);
    [(d - dm) / d.min(dm), dc / n, fd / n, fc / n]
}

fn rows(set: &EmbeddingSet) -> Vec<Vec<f64>> {
    (0..set.count()).map(|i| set.row(i).iter().copied().collect()).collect()
}

fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for i in 0..100u64 {
        let n = rng.random_range(1..=1000);
        let dim = rng.random_range(1..=8);
        let mut gauss = |count: usize| -> Vec<f64> {
            (0..count)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect()
        };
        let src = EmbeddingSet::from_row_slice("en", dim, &gauss(n * dim)).unwrap();
        let tgt = EmbeddingSet::from_row_slice("de", dim, &gauss(n * dim)).unwrap();
        let a = gauss(dim * dim);
        let b: Vec<f64> = gauss(dim).iter().map(|x| 0.3 * x).collect();
        let map = LinearMapF64::from_row_slices(dim, &a, &b).unwrap();
        let pairs = PairedEmbeddings::new(src.clone(), tgt.clone()).unwrap();
        let report = evaluate(&map, &pairs).map_err(|e| format!("instance {i}: {e}"))?;

        // Map applied by hand, row by row.
        let mapped: Vec<Vec<f64>> = rows(&src)
            .iter()
            .map(|e| {
                (0..dim)
                    .map(|r| (0..dim).map(|c| a[r * dim + c] * e[c]).sum::<f64>() + b[r])
                    .collect()
            })
            .collect();
        let expected = naive_metrics(&rows(&src), &mapped, &rows(&tgt));
        let got = [report.d_d, report.d_c, report.f_d, report.f_c];
        for (g, x) in got.iter().zip(expected) {
            worst = worst.max((g - x).abs());
        }
        ensure!(worst <= 1e-12, "instance {i} (n={n}, D={dim}): {got:?} vs {expected:?}");

        let id = evaluate(&LinearMap::identity(dim), &pairs).map_err(|e| e.to_string())?;
        ensure!(
            (id.d_d, id.d_c, id.f_d, id.f_c) == (0.0, 0.0, 0.0, 0.0),
            "identity map on instance {i}: {id:?}"
        );
    }
    Ok(format!(
        "100 instances, max deviation {worst:.1e}; identity exactly zero"
    ))
}

fn hand_fixtures() -> Outcome {
    // 0.70711 is the five-digit rendering of 1/√2; the tolerance applies to the exact value.
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let pairs = PairedEmbeddings::new(
        EmbeddingSet::from_row_slice("en", 2, &[1.0, 0.0]).unwrap(),
        EmbeddingSet::from_row_slice("de", 2, &[0.0, 1.0]).unwrap(),
    )
    .unwrap();
    let map = LinearMapF64::from_row_slices(2, &[0.5, 0.0, 0.0, 0.5], &[0.0, 0.5]).unwrap();
    let r = evaluate(&map, &pairs).map_err(|e| e.to_string())?;
    ensure!((r.d_d - 1.0).abs() < 1e-12, "dD = {}", r.d_d);
    ensure!((r.d_c - inv_sqrt2).abs() < 1e-6, "dC = {}", r.d_c);
    ensure!(r.f_d == 1.0 && r.f_c == 1.0, "fD = {}, fC = {}", r.f_d, r.f_c);

    let shear = LinearMapF64::from_row_slices(2, &[1.0, 1.0, 0.0, 1.0], &[0.0, 0.0]).unwrap();
    let o = ortho_report_with_threshold(&shear, 0.383).map_err(|e| e.to_string())?;
    ensure!((o.max_p - inv_sqrt2).abs() < 1e-6, "p = {}", o.max_p);
    ensure!(o.flagged_pairs == 1, "flagged = {}", o.flagged_pairs);
    let o_default = ortho_report(&shear).map_err(|e| e.to_string())?;
    ensure!(
        o_default.flagged_pairs == 1,
        "default-threshold flagged = {}",
        o_default.flagged_pairs
    );

    let diag = LinearMapF64::from_row_slices(2, &[1.0, 0.0, 0.0, 3.0], &[0.0, 0.0]).unwrap();
    let d = dilation_report(&diag);
    ensure!(
        (d.alpha_bar, d.nstd, d.range) == (2.0, 0.5, 1.0),
        "dilation {:?}",
        (d.alpha_bar, d.nstd, d.range)
    );
    Ok(format!(
        "dD {:.6} dC {:.6}; p {:.6} flagged {}; ᾱ {} nstd {} r {}",
        r.d_d, r.d_c, o.max_p, o.flagged_pairs, d.alpha_bar, d.nstd, d.range
    ))
}

fn directional_analogue() -> Outcome {
    let spec = SynthSpec::new(20_000, 32, TransformKind::GeneralLinear, 31)
        .alpha(0.9)
        .noise(0.05);
    let (pairs, _) = generate::<f64>(&spec).map_err(|e| e.to_string())?;
    let parts = split(&pairs, &SplitSpec::new(1000, 0, 8)).map_err(|e| e.to_string())?;
    let fit = fit_ols(&parts.train).map_err(|e| e.to_string())?;
    let r = evaluate(&fit.map, &parts.test).map_err(|e| e.to_string())?;
    ensure!(r.d_d > 0.0, "dD = {}", r.d_d);
    ensure!(r.f_d > 0.5, "fD = {}", r.f_d);
    Ok(format!(
        "held-out dD {:.3} dC {:.3} fD {:.3} fC {:.3}",
        r.d_d, r.d_c, r.f_d, r.f_c
    ))
}

fn format_round_trips() -> Outcome {
    let dir = tempdir().map_err(|e| e.to_string())?;
    let (pairs, truth) = generate::<f64>(&SynthSpec::new(3, 4, TransformKind::Orthogonal, 9)).unwrap();

    let emb_path = dir.path().join("src.xemb");
    write_embeddings(pairs.source(), &emb_path).map_err(|e| e.to_string())?;
    let bytes = std::fs::read(&emb_path).unwrap();
    let read: EmbeddingSet = read_embeddings(&emb_path).map_err(|e| e.to_string())?;
    ensure!(
        encode_embeddings(&read).unwrap() == bytes,
        "embedding bytes differ after read∘write"
    );
    ensure!(
        read.lang() == "src" && read.count() == 3 && read.dim() == 4,
        "header fields changed"
    );

    let mut rng = ChaCha8Rng::seed_from_u64(768);
    let dim = 768;
    let big = LinearMapF64::from_row_slices(
        dim,
        &(0..dim * dim).map(|_| rng.random::<f64>() - 0.5).collect::<Vec<_>>(),
        &(0..dim).map(|_| rng.random::<f64>()).collect::<Vec<_>>(),
    )
    .unwrap();
    let map_path = dir.path().join("big.xmap");
    write_map(&big, &map_path).map_err(|e| e.to_string())?;
    let map_bytes = std::fs::read(&map_path).unwrap();
    let file = read_map_file(&map_path).map_err(|e| e.to_string())?;
    ensure!(
        encode_map_file(&file).unwrap() == map_bytes,
        "map bytes differ after read∘write"
    );
    let back: LinearMap = file.to_map().unwrap();
    ensure!(
        back.matrix() == big.matrix() && back.bias() == big.bias(),
        "768-dim map payload changed"
    );
    let truth_file = MapFile::from_map(&truth).unwrap();
    ensure!(
        decode_map_file(&encode_map_file(&truth_file).unwrap())
            .unwrap()
            .metadata
            == truth_file.metadata,
        "metadata not verbatim"
    );

    // Every error variant.
    let mut bad = bytes.clone();
    bad[..4].copy_from_slice(b"XEMA");
    ensure!(
        matches!(
            decode_embeddings::<f64>(&bad),
            Err(Error::Format(FormatError::BadMagic { .. }))
        ),
        "bad magic not detected"
    );
    let row = 4 * 4;
    let short_path = dir.path().join("short.xemb");
    std::fs::write(&short_path, &bytes[..bytes.len() - row]).unwrap();
    ensure!(
        matches!(
            read_embeddings::<f64>(&short_path),
            Err(Error::Format(FormatError::Truncated { .. }))
        ),
        "missing row not reported as truncation"
    );
    let mut v2 = map_bytes.clone();
    v2[4..8].copy_from_slice(&2u32.to_le_bytes());
    ensure!(
        matches!(
            decode_map_file(&v2),
            Err(Error::Format(FormatError::VersionMismatch { .. }))
        ),
        "version 2 accepted"
    );
    let mut long = bytes.clone();
    long.extend_from_slice(&[0; 4]);
    ensure!(
        matches!(
            decode_embeddings::<f64>(&long),
            Err(Error::Format(FormatError::SizeMismatch { .. }))
        ),
        "trailing bytes accepted"
    );
    let tsv = parse_pair_tsv("a\tb\nc\td\nno-tab-here\n");
    ensure!(
        matches!(&tsv, Err(FormatError::MalformedLine { line: 3 })),
        "malformed TSV: {tsv:?}"
    );
    ensure!(
        tsv.unwrap_err().to_string() == "line 3: expected 2 fields",
        "TSV error message"
    );
    Ok("XEMB and XMAP byte-identical; bad magic, truncation, version, size, TSV line errors raised".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 8] = [
        ("procrustes constraint", procrustes_constraint),
        ("ols optimality", ols_optimality),
        ("synthetic recovery (noiseless)", noiseless_recovery),
        ("synthetic recovery (noisy)", noisy_recovery),
        ("metric oracle equivalence", metric_oracle),
        ("hand-computed fixtures", hand_fixtures),
        ("directional desk-scale analogue", directional_analogue),
        ("format round trips", format_round_trips),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

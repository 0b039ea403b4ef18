use std::time::Instant;

use kg_core::analysis::PREDICTION_SCAN_MAX;
use kg_core::lattice::leading_term_defect;
use kg_core::limsup::{count_solutions_by_height, counting_ratio_stats_for_points, sample_points};
use kg_core::structure::{embed_on_face, lift_witness_on_face};
use kg_core::{
    classify_critical_sum, dickinson_dimension, estimate_measure, predict_branch, run_theorem_experiment,
    shell_count, shell_iter, slow_decrease_scan, DickinsonParams, ExperimentConfig, FaceIndex,
    LatticeVector, LiftCase, LiftInput, PsiSpec, SamplerConfig, Slab,
};
use serde_json::{json, Value};

use crate::output::{num, RunConfig, Report};
use crate::{
    ClassifyArgs, CountArgs, DimArgs, Failure, LiftArgs, MeasureArgs, OutputArgs, SamplingArgs, ShellsArgs,
    SlabArgs, TheoremArgs,
};

/// Largest number of vectors `shells --list` will print.
const MAX_LISTED: u128 = 10_000_000;

fn parse_psi(s: &str) -> Result<PsiSpec, Failure> {
    s.parse::<PsiSpec>().map_err(|e| Failure::Usage(format!("--psi: {e}")))
}

fn params(sub: &str, o: &OutputArgs) -> RunConfig {
    let mut p = RunConfig::new(sub, o.format, o.out.as_deref());
    p.set("timing", o.timing);
    p
}

fn elapsed(start: Instant, o: &OutputArgs) -> f64 {
    if o.timing {
        start.elapsed().as_secs_f64()
    } else {
        0.0
    }
}

fn sampler(s: &SamplingArgs) -> SamplerConfig {
    let cfg = SamplerConfig::new(s.samples, s.seed);
    match s.threads {
        Some(t) => cfg.with_threads(t as usize),
        None => cfg,
    }
}

fn set_sampling(p: &mut RunConfig, s: &SamplingArgs) {
    p.samples = Some(s.samples);
    p.seed = Some(s.seed);
    p.set("threads", s.threads);
}

/// JSON number when it fits, decimal string otherwise.
fn big(v: i128) -> Value {
    i64::try_from(v).map(Value::from).unwrap_or_else(|_| Value::from(v.to_string()))
}

fn tuple(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| num(*v)).collect();
    format!("({})", parts.join(","))
}

pub fn classify(a: ClassifyArgs) -> Result<Report, Failure> {
    let start = Instant::now();
    let spec = parse_psi(&a.psi)?;
    let c = a.c.unwrap_or(1.0 / a.n as f64);
    let series = classify_critical_sum(a.n, &spec)?;
    let branch = predict_branch(a.n, &spec)?;
    let cert = slow_decrease_scan(&spec, c, a.k_max)?;

    let mut p = params("classify", &a.output);
    p.n = Some(a.n);
    p.psi = Some(a.psi.clone());
    p.set("c", a.c);
    p.set("k_max", a.k_max);
    let row = vec![
        a.n.to_string(),
        a.psi,
        series.to_string(),
        branch.to_string(),
        num(cert.c),
        cert.k_scanned.to_string(),
        num(cert.empirical_k),
        cert.analytic_k.map(num).unwrap_or_default(),
        format!("{:?}", cert.verdict),
    ];
    Ok(Report {
        results: json!({ "series": series, "branch": branch, "slow_decrease": cert }),
        params: p,
        elapsed_s: elapsed(start, &a.output),
        notes: vec![],
        header: vec!["n", "psi", "series", "branch", "c", "k_scanned", "empirical_k", "analytic_k", "slow_decrease"],
        rows: vec![row],
    })
}

pub fn shells(a: ShellsArgs) -> Result<Report, Failure> {
    let start = Instant::now();
    let mut p = params("shells", &a.output);
    p.n = Some(a.n);
    p.set("k", &a.k);
    p.set("list", a.list);

    let mut rows = Vec::new();
    let mut results = Vec::new();
    if a.list {
        let total: u128 = a.k.iter().map(|&k| shell_count(a.n, k).map(|c| c / 2)).sum::<kg_core::Result<_>>()?;
        if total > MAX_LISTED {
            return Err(Failure::Usage(format!("--list would print {total} vectors; the limit is {MAX_LISTED}")));
        }
        for &k in &a.k {
            for q in shell_iter(a.n as usize, k)? {
                rows.push(vec![a.n.to_string(), k.to_string(), q.to_string()]);
                results.push(json!({ "k": k, "q": q }));
            }
        }
    } else {
        for &k in &a.k {
            let count = shell_count(a.n, k)?;
            let defect = leading_term_defect(a.n, k)?;
            rows.push(vec![
                a.n.to_string(),
                k.to_string(),
                count.to_string(),
                (count / 2).to_string(),
                defect.to_string(),
            ]);
            results.push(json!({
                "k": k,
                "shell_count": big(count as i128),
                "canonical": big((count / 2) as i128),
                "leading_term_defect": big(defect),
            }));
        }
    }
    let header = if a.list {
        vec!["n", "k", "q"]
    } else {
        vec!["n", "k", "shell_count", "canonical", "leading_term_defect"]
    };
    Ok(Report {
        params: p,
        results: Value::Array(results),
        elapsed_s: elapsed(start, &a.output),
        notes: vec![],
        header,
        rows,
    })
}

pub fn slab(a: SlabArgs) -> Result<Report, Failure> {
    let start = Instant::now();
    let q = LatticeVector::new(a.q.clone())?;
    let s = Slab::new(q.clone(), a.delta)?;
    let exact = s.volume_exact()?;
    let bound = s.volume_bound();

    let mut p = params("slab", &a.output);
    p.set("q", &a.q);
    p.set("delta", a.delta);
    Ok(Report {
        params: p,
        results: json!({
            "q": q, "delta": a.delta, "exact": exact, "bound": bound, "difference": bound - exact,
        }),
        elapsed_s: elapsed(start, &a.output),
        notes: vec![],
        header: vec!["q", "delta", "exact", "bound", "difference"],
        rows: vec![vec![q.to_string(), num(a.delta), num(exact), num(bound), num(bound - exact)]],
    })
}

pub fn count(a: CountArgs) -> Result<Report, Failure> {
    let start = Instant::now();
    let spec = parse_psi(&a.psi)?;
    let n = match (&a.x, a.n) {
        (Some(x), Some(n)) if x.len() != n as usize => {
            return Err(Failure::Usage(format!("--x has {} coordinates but --n is {n}", x.len())));
        }
        (Some(x), _) => x.len() as u32,
        (None, Some(n)) => n,
        (None, None) => return Err(Failure::Usage("count needs --n or --x".into())),
    };
    if a.heights.windows(2).any(|w| w[0] >= w[1]) || a.heights[0] == 0 {
        return Err(Failure::Usage("--heights must be positive and strictly increasing".into()));
    }

    let mut p = params("count", &a.output);
    p.n = Some(n);
    p.psi = Some(a.psi.clone());
    p.seed = Some(a.seed);
    p.set("heights", &a.heights);

    let points = match &a.x {
        Some(x) => {
            p.samples = Some(1);
            p.set("x", x);
            vec![x.clone()]
        }
        None => {
            p.samples = Some(a.points);
            p.set("points", a.points);
            sample_points(n as usize, a.points as usize, a.seed)
        }
    };
    let counts: Vec<Vec<u64>> =
        points.iter().map(|x| count_solutions_by_height(x, &a.heights, &spec)).collect::<kg_core::Result<_>>()?;
    let m = points.len() as f64;
    let stats = if a.x.is_none() {
        Some(counting_ratio_stats_for_points(&a.heights, &spec, n as usize, &points)?)
    } else {
        None
    };

    let elapsed_s = elapsed(start, &a.output);
    let mut rows = Vec::new();
    let mut out_rows = Vec::new();
    for (i, &q) in a.heights.iter().enumerate() {
        let values: Vec<f64> = counts.iter().map(|c| c[i] as f64).collect();
        let mean = values.iter().sum::<f64>() / m;
        let std_error = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt()
        } else {
            0.0
        };
        rows.push(vec![
            n.to_string(),
            a.psi.clone(),
            "1".into(),
            q.to_string(),
            points.len().to_string(),
            a.seed.to_string(),
            num(mean),
            num(std_error),
            num(elapsed_s),
        ]);
        let mut r = json!({
            "n": n, "psi": a.psi, "N": 1, "Q": q, "samples": points.len(), "seed": a.seed,
            "value": mean, "std_error": std_error, "elapsed_s": elapsed_s,
        });
        if let Some(s) = &stats {
            let row = &s.rows[i];
            r["min_ratio"] = json!(row.min_ratio);
            r["median_ratio"] = json!(row.median_ratio);
            r["critical_sum"] = json!(row.critical_sum);
        }
        out_rows.push(r);
    }
    let results = match &stats {
        Some(s) => json!({ "rows": out_rows, "classification": s.classification, "excluded": s.excluded }),
        None => json!({ "rows": out_rows }),
    };
    Ok(Report {
        params: p,
        results,
        elapsed_s,
        notes: vec![],
        header: vec!["n", "psi", "N", "Q", "samples", "seed", "value", "std_error", "elapsed_s"],
        rows,
    })
}

pub fn measure(a: MeasureArgs) -> Result<Report, Failure> {
    let start = Instant::now();
    let spec = parse_psi(&a.psi)?;
    let est = estimate_measure(&a.window, &spec, a.n as usize, &sampler(&a.sampling))?;
    let elapsed_s = elapsed(start, &a.output);

    let mut p = params("measure", &a.output);
    p.n = Some(a.n);
    p.psi = Some(a.psi.clone());
    p.window = Some([a.window.lo(), a.window.hi()]);
    set_sampling(&mut p, &a.sampling);
    let row = vec![
        a.n.to_string(),
        a.psi.clone(),
        a.window.lo().to_string(),
        a.window.hi().to_string(),
        est.samples.to_string(),
        est.seed.to_string(),
        num(est.value),
        num(est.std_error),
        num(elapsed_s),
    ];
    Ok(Report {
        results: json!({
            "n": a.n, "psi": a.psi, "N": a.window.lo(), "Q": a.window.hi(), "samples": est.samples,
            "seed": est.seed, "value": est.value, "std_error": est.std_error, "elapsed_s": elapsed_s,
        }),
        params: p,
        elapsed_s,
        notes: vec![],
        header: vec!["n", "psi", "N", "Q", "samples", "seed", "value", "std_error", "elapsed_s"],
        rows: vec![row],
    })
}

pub fn lift(a: LiftArgs) -> Result<Report, Failure> {
    let start = Instant::now();
    let spec = parse_psi(&a.psi)?;
    let n = a.x_hat.len() + 1;
    let c = match a.c {
        Some(c) => c,
        None => slow_decrease_scan(&spec, 1.0 / n as f64, PREDICTION_SCAN_MAX)?.constant(),
    };
    let face = FaceIndex::new(a.face.unwrap_or(n), n)?;
    let q_hat = LatticeVector::new(a.q_hat.clone())?;
    let input = LiftInput::new(a.x_hat.clone(), q_hat, c, &spec)?;
    let out = lift_witness_on_face(&input, &spec, n, face)?;
    let x = embed_on_face(&a.x_hat, face);
    let index = match out.case {
        LiftCase::TallQn { index } => index.to_string(),
        LiftCase::EqualHeight => String::new(),
    };

    let mut p = params("lift", &a.output);
    p.n = Some(n as u32);
    p.psi = Some(a.psi.clone());
    p.set("x_hat", &a.x_hat);
    p.set("q_hat", &a.q_hat);
    p.set("c", a.c);
    p.set("face", a.face);
    let row = vec![
        n.to_string(),
        face.to_string(),
        tuple(&x),
        out.q.to_string(),
        num(out.residual),
        num(out.psi_at_height),
        out.case.tag().to_string(),
        index,
        num(c),
    ];
    Ok(Report {
        results: json!({ "n": n, "face": face.get(), "x": x, "c": c, "lift": out }),
        params: p,
        elapsed_s: elapsed(start, &a.output),
        notes: vec![],
        header: vec!["n", "face", "x", "q", "residual", "psi_at_height", "case", "index", "c"],
        rows: vec![row],
    })
}

pub fn theorem(a: TheoremArgs) -> Result<Report, Failure> {
    let start = Instant::now();
    let spec = parse_psi(&a.psi)?;
    let cfg = ExperimentConfig {
        samples: a.sampling.samples,
        seed: a.sampling.seed,
        threads: a.sampling.threads.map(|t| t as usize),
        full_measure_threshold: a.threshold,
    };
    let mut report = run_theorem_experiment(a.n, &spec, &a.windows.0, &cfg)?;
    if !a.output.timing {
        report = report.without_timing();
    }
    report.params.psi = a.psi.clone();

    let mut p = params("theorem", &a.output);
    p.n = Some(a.n);
    p.psi = Some(a.psi.clone());
    set_sampling(&mut p, &a.sampling);
    p.set("windows", a.windows.0.iter().map(|w| [w.lo(), w.hi()]).collect::<Vec<_>>());
    p.set("threshold", a.threshold);

    let rows = report
        .observed
        .iter()
        .map(|o| {
            vec![
                o.window.lo().to_string(),
                o.window.hi().to_string(),
                num(o.estimate.value),
                num(o.estimate.std_error),
                num(o.union_bound),
                o.estimate.samples.to_string(),
                o.estimate.seed.to_string(),
            ]
        })
        .collect();
    let mut results = serde_json::to_value(&report).map_err(|e| Failure::Internal(e.to_string()))?;
    results["schedule_csv"] = Value::from(report.schedule_csv());
    Ok(Report {
        params: p,
        notes: vec![
            format!("predicted_branch={}", report.predicted_branch),
            format!("verdict={}", report.verdict),
        ],
        results,
        elapsed_s: elapsed(start, &a.output),
        header: vec!["N", "Q", "value", "std_error", "union_bound", "samples", "seed"],
        rows,
    })
}

pub fn dim(a: DimArgs) -> Result<Report, Failure> {
    let start = Instant::now();
    let dp = DickinsonParams::new(a.m, a.n, a.tau)?;
    let d = dickinson_dimension(&dp);
    let mut p = params("dim", &a.output);
    p.n = Some(a.n);
    p.set("m", a.m);
    p.set("tau", a.tau);
    Ok(Report {
        params: p,
        results: json!({ "m": a.m, "n": a.n, "tau": a.tau, "dimension": d }),
        elapsed_s: elapsed(start, &a.output),
        notes: vec![],
        header: vec!["m", "n", "tau", "dimension"],
        rows: vec![vec![a.m.to_string(), a.n.to_string(), num(a.tau), num(d)]],
    })
}

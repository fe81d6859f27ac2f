//! Per-base-point drift and diffusion errors against the ground truth,
//! aggregated by stratum, with paired Wilcoxon comparisons of the three
//! drift estimators: μ̂_E, μ̂⁽ᵒ⁾ = P̂μ̂_E, and the truth-projected P·μ̂_E.

use msde_core::metrics::{bonferroni, diffusion_errors, drift_errors, wilcoxon_one_sided, DriftErrorRecord, Stratum};
use msde_core::{EstimatorConfig, LocalEstimator, ManifoldSpec, Scheme};
use serde::Serialize;

use super::{
    base_points, fmt_f64, fmt_opt, numbered, prepare_dir, resolve_bandwidth, simulate_observed, with_pool, write_json,
    ResolvedBandwidth, Stats, Table,
};
use crate::config::ExperimentConfig;
use crate::error::CliResult;

/// One value per drift estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerEstimator<T> {
    pub mu_e: T,
    pub mu_o: T,
    pub p_mu_e: T,
}

impl<T> PerEstimator<T> {
    fn map<U>(&self, f: impl Fn(&T) -> U) -> PerEstimator<U> {
        PerEstimator {
            mu_e: f(&self.mu_e),
            mu_o: f(&self.mu_o),
            p_mu_e: f(&self.p_mu_e),
        }
    }
}

/// Errors at one base point; `None` fields mark a failed evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointRecord {
    pub status: String,
    pub true_norm: Option<f64>,
    pub l_hat: Option<f64>,
    pub n_active: Option<usize>,
    pub gap_flag: Option<bool>,
    pub low_support: Option<bool>,
    pub drift: Option<PerEstimator<DriftErrorRecord>>,
    pub frob_rel_err: Option<f64>,
    pub sin_theta: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WilcoxonComparison {
    /// Alternative hypothesis, e.g. `"nrmse(mu_o) < nrmse(mu_e)"`.
    pub alternative: String,
    pub pairs: usize,
    pub p_value: Option<f64>,
    pub p_adjusted: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AboveStratum {
    pub nrmse: PerEstimator<Stats>,
    pub rel_norm_err: PerEstimator<Stats>,
    pub angle_err: PerEstimator<Stats>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorTableSummary {
    pub config: ExperimentConfig,
    pub manifold: ManifoldSpec,
    pub scheme: Scheme,
    pub noise_rate: f64,
    pub bandwidth: ResolvedBandwidth,
    pub points: usize,
    pub threshold: f64,
    /// Largest true drift norm over the base points.
    pub sup_norm: f64,
    pub base_points: usize,
    pub failed: usize,
    pub above: usize,
    pub below: usize,
    pub low_support: usize,
    pub gap_flags: usize,
    pub above_stratum: AboveStratum,
    pub below_abs_err: PerEstimator<Stats>,
    pub frob_rel_err: Stats,
    pub sin_theta: Stats,
    pub wilcoxon: Vec<WilcoxonComparison>,
}

#[derive(Debug, Clone)]
pub struct ErrorTableResult {
    pub records: Vec<PointRecord>,
    pub summary: ErrorTableSummary,
}

fn failed(status: String) -> PointRecord {
    PointRecord {
        status,
        true_norm: None,
        l_hat: None,
        n_active: None,
        gap_flag: None,
        low_support: None,
        drift: None,
        frob_rel_err: None,
        sin_theta: None,
    }
}

fn compare(alternative: &str, a: &[f64], b: &[f64], comparisons: usize) -> WilcoxonComparison {
    match wilcoxon_one_sided(a, b) {
        Ok(p) => WilcoxonComparison {
            alternative: alternative.into(),
            pairs: a.len(),
            p_value: Some(p),
            p_adjusted: Some(bonferroni(p, comparisons)),
            error: None,
        },
        Err(e) => WilcoxonComparison {
            alternative: alternative.into(),
            pairs: a.len(),
            p_value: None,
            p_adjusted: None,
            error: Some(e.to_string()),
        },
    }
}

pub fn run(cfg: &ExperimentConfig) -> CliResult<ErrorTableResult> {
    cfg.validate()?;
    let dir = prepare_dir(&cfg.output_dir)?;
    let t = simulate_observed(cfg, cfg.n, cfg.seed)?;
    let m = *t.manifold();
    let d = m.intrinsic_dim();
    let p = t.dim();
    let rate = t.scheme().noise_rate();
    let est_cfg = EstimatorConfig {
        min_neighbors: cfg.min_neighbors,
        ..EstimatorConfig::new(1.0, d)
    };
    let bw = resolve_bandwidth(cfg, &t, &est_cfg.kernel)?;
    let est_cfg = EstimatorConfig { h: bw.h, ..est_cfg };
    let pts = base_points(cfg.base_points.as_ref().expect("validated"), &m, cfg.seed)?;
    let xs: Vec<_> = pts.iter().map(|b| b.ambient.clone()).collect();
    let estimates = with_pool(cfg.workers, || {
        LocalEstimator::new(&t, est_cfg).map(|e| e.estimate_batch(&xs))
    })??;

    let truths: Vec<_> = pts
        .iter()
        .map(|b| {
            let q = b.intrinsic.ok_or(msde_core::Error::OffManifold {
                residual: m.residual(b.ambient.as_slice()),
            })?;
            Ok((
                m.true_drift_with_rate(&q, rate)?,
                m.true_diffusion_with_rate(&q, rate)?,
                m.tangent_projector_at(&q)?,
            ))
        })
        .collect::<Vec<msde_core::Result<_>>>();
    let sup_norm = truths
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .map(|(mu, _, _)| mu.norm())
        .fold(0.0, f64::max);

    let mut records = Vec::with_capacity(pts.len());
    for (est, truth) in estimates.iter().zip(&truths) {
        let record = match (est, truth) {
            (Err(e), _) | (_, Err(e)) => failed(e.to_string()),
            (Ok(e), Ok((mu, pi, proj))) => {
                let evaluate = || -> msde_core::Result<PointRecord> {
                    let p_mu_e = proj * &e.mu_e;
                    let drift = PerEstimator {
                        mu_e: drift_errors(&e.mu_e, mu, sup_norm, cfg.threshold)?,
                        mu_o: drift_errors(&e.mu_o, mu, sup_norm, cfg.threshold)?,
                        p_mu_e: drift_errors(&p_mu_e, mu, sup_norm, cfg.threshold)?,
                    };
                    let diff = diffusion_errors(&e.pi_hat, pi, d)?;
                    Ok(PointRecord {
                        status: "ok".into(),
                        true_norm: Some(mu.norm()),
                        l_hat: Some(e.l_hat),
                        n_active: Some(e.n_active),
                        gap_flag: Some(e.gap_flag),
                        low_support: Some(e.low_support),
                        drift: Some(drift),
                        frob_rel_err: Some(diff.frob_rel_err),
                        sin_theta: Some(diff.sin_theta),
                    })
                };
                evaluate().unwrap_or_else(|err| failed(err.to_string()))
            }
        };
        records.push(record);
    }

    let mut header = vec!["index".to_string()];
    header.extend(numbered("x", p));
    header.extend(
        [
            "status",
            "stratum",
            "true_norm",
            "l_hat",
            "n_active",
            "gap_flag",
            "low_support",
        ]
        .map(String::from),
    );
    for est in ["mu_e", "mu_o", "p_mu_e"] {
        for metric in ["nrmse", "rel_norm_err", "angle_err", "abs_err"] {
            header.push(format!("{metric}_{est}"));
        }
    }
    header.extend(["frob_rel_err", "sin_theta"].map(String::from));
    let mut table = Table::new(header);
    for (i, (x, r)) in xs.iter().zip(&records).enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(x.iter().map(|v| fmt_f64(*v)));
        row.push(r.status.clone());
        row.push(match r.drift.as_ref().map(|dr| dr.mu_e.stratum) {
            Some(Stratum::Above) => "above".into(),
            Some(Stratum::Below) => "below".into(),
            None => String::new(),
        });
        row.push(fmt_opt(r.true_norm));
        row.push(fmt_opt(r.l_hat));
        row.push(r.n_active.map(|v| v.to_string()).unwrap_or_default());
        row.push(r.gap_flag.map(|v| v.to_string()).unwrap_or_default());
        row.push(r.low_support.map(|v| v.to_string()).unwrap_or_default());
        match &r.drift {
            Some(dr) => {
                for rec in [dr.mu_e, dr.mu_o, dr.p_mu_e] {
                    row.extend([
                        fmt_opt(rec.nrmse),
                        fmt_opt(rec.rel_norm_err),
                        fmt_opt(rec.angle_err),
                        fmt_f64(rec.abs_err),
                    ]);
                }
            }
            None => row.extend(std::iter::repeat_n(String::new(), 12)),
        }
        row.push(fmt_opt(r.frob_rel_err));
        row.push(fmt_opt(r.sin_theta));
        table.push(row);
    }
    table.write(&dir.join("error_table.csv"))?;

    let ok: Vec<&PerEstimator<DriftErrorRecord>> = records.iter().filter_map(|r| r.drift.as_ref()).collect();
    let above: Vec<_> = ok
        .iter()
        .filter(|dr| dr.mu_e.stratum == Stratum::Above)
        .copied()
        .collect();
    let below: Vec<_> = ok
        .iter()
        .filter(|dr| dr.mu_e.stratum == Stratum::Below)
        .copied()
        .collect();
    let collect =
        |set: &[&PerEstimator<DriftErrorRecord>], f: &dyn Fn(&DriftErrorRecord) -> Option<f64>| PerEstimator {
            mu_e: set.iter().filter_map(|dr| f(&dr.mu_e)).collect::<Vec<_>>(),
            mu_o: set.iter().filter_map(|dr| f(&dr.mu_o)).collect::<Vec<_>>(),
            p_mu_e: set.iter().filter_map(|dr| f(&dr.p_mu_e)).collect::<Vec<_>>(),
        };
    let nrmse = collect(&above, &|r| r.nrmse);
    let stats = |v: &Vec<f64>| Stats::of(v);
    let above_stratum = AboveStratum {
        nrmse: nrmse.map(stats),
        rel_norm_err: collect(&above, &|r| r.rel_norm_err).map(stats),
        angle_err: collect(&above, &|r| r.angle_err).map(stats),
    };
    let below_abs_err = collect(&below, &|r| Some(r.abs_err)).map(stats);
    let frob: Vec<f64> = records.iter().filter_map(|r| r.frob_rel_err).collect();
    let sin: Vec<f64> = records.iter().filter_map(|r| r.sin_theta).collect();
    let comparisons = 3;
    let wilcoxon = vec![
        compare("nrmse(mu_o) < nrmse(mu_e)", &nrmse.mu_o, &nrmse.mu_e, comparisons),
        compare("nrmse(p_mu_e) < nrmse(mu_o)", &nrmse.p_mu_e, &nrmse.mu_o, comparisons),
        compare("nrmse(p_mu_e) < nrmse(mu_e)", &nrmse.p_mu_e, &nrmse.mu_e, comparisons),
    ];

    let summary = ErrorTableSummary {
        config: cfg.clone(),
        manifold: m,
        scheme: t.scheme(),
        noise_rate: rate,
        bandwidth: bw,
        points: t.len(),
        threshold: cfg.threshold,
        sup_norm,
        base_points: pts.len(),
        failed: records.iter().filter(|r| r.drift.is_none()).count(),
        above: above.len(),
        below: below.len(),
        low_support: records.iter().filter(|r| r.low_support == Some(true)).count(),
        gap_flags: records.iter().filter(|r| r.gap_flag == Some(true)).count(),
        above_stratum,
        below_abs_err,
        frob_rel_err: Stats::of(&frob),
        sin_theta: Stats::of(&sin),
        wilcoxon,
    };
    write_json(&dir.join("error_table_summary.json"), &summary)?;
    Ok(ErrorTableResult { records, summary })
}
